"""Reference floating-point conversion routines and their numerical inverses.

The forward routines are the manufacturer-style float compensation formulas
for a digital temperature/pressure/humidity sensor.  They serve as ground
truth everywhere else in the package: dataset labels, training targets, and
the zero-error baseline in the Pareto analysis.

Notes on the temperature routine: it is algebraically a degree-2 polynomial
in the raw code,

    t_fine = a*adc_t^2 + b*adc_t + c,  with
    a = par_t3 / 1073741824
    b = par_t2 / 16384 - par_t1 * par_t3 / 33554432
    c = par_t1 * (par_t1 * par_t3 / 4194304 - par_t2 / 1024)

and temperature = t_fine / 5120.  The closed-form inverse below exploits
this.  Pressure and humidity are inverted by bracketing bisection on the raw
code treated as a real number; both are monotone over the code ranges that
map into the operating band.

All forward routines accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from importlib import resources

import numpy as np

from .errors import CalibrationFormatError, DegenerateCalibrationError, NoRootError

ADC_T_BITS = 20
ADC_P_BITS = 20
ADC_H_BITS = 16

ADC_T_MAX = (1 << ADC_T_BITS) - 1
ADC_P_MAX = (1 << ADC_P_BITS) - 1
ADC_H_MAX = (1 << ADC_H_BITS) - 1

QUANTITIES = ("temperature", "pressure", "humidity")

# Guard for the internal divisor of the pressure routine.
_DIVISOR_EPS = 1e-12

# Bisection settings shared by the pressure/humidity inverses.
_BISECT_ITERS = 80


@dataclass(frozen=True)
class OperatingRange:
    """Closed interval of converted values a quantity is specified over."""

    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"empty operating range [{self.min}, {self.max}]")

    @property
    def span(self) -> float:
        return self.max - self.min


RANGES = {
    "temperature": OperatingRange(-40.0, 85.0),
    "pressure": OperatingRange(30_000.0, 110_000.0),
    "humidity": OperatingRange(0.0, 100.0),
}

RAW_DOMAINS = {
    "temperature": [(0.0, float(ADC_T_MAX))],
    "pressure": [(0.0, float(ADC_T_MAX)), (0.0, float(ADC_P_MAX))],
    "humidity": [(0.0, float(ADC_T_MAX)), (0.0, float(ADC_H_MAX))],
}

_CALIB_KEYS = (
    ["par_t1", "par_t2", "par_t3"]
    + [f"par_p{i}" for i in range(1, 11)]
    + [f"par_h{i}" for i in range(1, 8)]
)


@dataclass(frozen=True)
class CalibrationConstants:
    """Decoded per-sensor parameters of the reference conversion routines."""

    par_t1: float
    par_t2: float
    par_t3: float
    par_p1: float
    par_p2: float
    par_p3: float
    par_p4: float
    par_p5: float
    par_p6: float
    par_p7: float
    par_p8: float
    par_p9: float
    par_p10: float
    par_h1: float
    par_h2: float
    par_h3: float
    par_h4: float
    par_h5: float
    par_h6: float
    par_h7: float

    def validate(self, samples: int = 512) -> None:
        """Check finiteness and strict monotonicity of the temperature map.

        Monotonicity over the 20-bit raw domain is what makes the
        temperature inversion well defined; it is checked by sampling.
        """
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise CalibrationFormatError(f"{f.name} is not finite")
        codes = np.linspace(0.0, float(ADC_T_MAX), samples)
        temps, _ = convert_temperature(codes, self)
        if not np.all(np.diff(temps) > 0.0):
            raise CalibrationFormatError(
                "temperature map is not strictly increasing over the raw domain"
            )


@dataclass(frozen=True)
class RawReading:
    """One raw sample triple straight off the ADC."""

    adc_t: int
    adc_p: int
    adc_h: int

    def __post_init__(self):
        if not 0 <= self.adc_t <= ADC_T_MAX:
            raise ValueError(f"adc_t out of 20-bit range: {self.adc_t}")
        if not 0 <= self.adc_p <= ADC_P_MAX:
            raise ValueError(f"adc_p out of 20-bit range: {self.adc_p}")
        if not 0 <= self.adc_h <= ADC_H_MAX:
            raise ValueError(f"adc_h out of 16-bit range: {self.adc_h}")


@dataclass(frozen=True)
class ConvertedReading:
    temperature: float  # degrees C
    pressure: float     # Pa
    humidity: float     # %RH, clamped to [0, 100]


def load_calibration(path) -> CalibrationConstants:
    """Load calibration constants from JSON, rejecting missing/extra keys."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return calibration_from_dict(raw)


def calibration_from_dict(raw: dict) -> CalibrationConstants:
    if not isinstance(raw, dict):
        raise CalibrationFormatError("calibration file must hold a JSON object")
    missing = [k for k in _CALIB_KEYS if k not in raw]
    extra = [k for k in raw if k not in _CALIB_KEYS]
    if missing or extra:
        raise CalibrationFormatError(f"missing keys {missing}, extra keys {extra}")
    values = {}
    for k in _CALIB_KEYS:
        v = raw[k]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise CalibrationFormatError(f"{k} is not a number")
        values[k] = float(v)
    calib = CalibrationConstants(**values)
    calib.validate()
    return calib


def default_calibration() -> CalibrationConstants:
    """The shipped mid-range fixture C0."""
    text = resources.files("tinyconv.data").joinpath("calibration_c0.json").read_text()
    return calibration_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Forward routines
# ---------------------------------------------------------------------------


def convert_temperature(adc_t, calib: CalibrationConstants):
    """Raw 20-bit temperature code -> (degrees C, t_fine).

    t_fine is the internal fine-temperature value consumed by the pressure
    routine.
    """
    var1 = (adc_t / 16384.0 - calib.par_t1 / 1024.0) * calib.par_t2
    d = adc_t / 131072.0 - calib.par_t1 / 8192.0
    var2 = d * d * calib.par_t3 * 16.0
    t_fine = var1 + var2
    return t_fine / 5120.0, t_fine


def convert_pressure(adc_p, t_fine, calib: CalibrationConstants):
    """Raw 20-bit pressure code plus t_fine -> pressure in Pa."""
    var1 = t_fine / 2.0 - 64000.0
    var2 = var1 * var1 * calib.par_p6 / 131072.0
    var2 = var2 + var1 * calib.par_p5 * 2.0
    var2 = var2 / 4.0 + calib.par_p4 * 65536.0
    var1 = (calib.par_p3 * var1 * var1 / 16384.0 + calib.par_p2 * var1) / 524288.0
    var1 = (1.0 + var1 / 32768.0) * calib.par_p1
    if np.any(np.abs(var1) < _DIVISOR_EPS):
        raise DegenerateCalibrationError("pressure divisor is ~0")
    press = 1048576.0 - adc_p
    press = (press - var2 / 4096.0) * 6250.0 / var1
    var1 = calib.par_p9 * press * press / 2147483648.0
    var2 = press * calib.par_p8 / 32768.0
    var3 = (press / 256.0) * (press / 256.0) * (press / 256.0) * calib.par_p10 / 131072.0
    return press + (var1 + var2 + var3 + calib.par_p7 * 128.0) / 16.0


def humidity_unclamped(adc_h, temperature, calib: CalibrationConstants):
    """Humidity compensation before the [0, 100] clamp.

    Exposed because the inverse needs the unclamped response to locate the
    boundaries of the clamped plateaus.
    """
    var1 = adc_h - (calib.par_h1 * 16.0 + calib.par_h3 / 2.0 * temperature)
    var2 = var1 * (
        calib.par_h2
        / 262144.0
        * (
            1.0
            + calib.par_h4 / 16384.0 * temperature
            + calib.par_h5 / 1048576.0 * temperature * temperature
        )
    )
    var3 = calib.par_h6 / 16384.0
    var4 = calib.par_h7 / 2097152.0
    return var2 + (var3 + var4 * temperature) * var2 * var2


def convert_humidity(adc_h, temperature, calib: CalibrationConstants):
    """Raw 16-bit humidity code plus ambient temperature -> %RH in [0, 100]."""
    hum = humidity_unclamped(adc_h, temperature, calib)
    if np.isscalar(hum) or np.ndim(hum) == 0:
        return min(max(float(hum), 0.0), 100.0)
    return np.clip(hum, 0.0, 100.0)


def convert(reading: RawReading, calib: CalibrationConstants) -> ConvertedReading:
    """Convert one raw triple with the shared t_fine/temperature plumbing."""
    temperature, t_fine = convert_temperature(reading.adc_t, calib)
    pressure = convert_pressure(reading.adc_p, t_fine, calib)
    humidity = convert_humidity(reading.adc_h, temperature, calib)
    return ConvertedReading(float(temperature), float(pressure), float(humidity))


# ---------------------------------------------------------------------------
# Inverses
# ---------------------------------------------------------------------------


def _tfine_poly(calib: CalibrationConstants):
    a = calib.par_t3 / 1073741824.0
    b = calib.par_t2 / 16384.0 - calib.par_t1 * calib.par_t3 / 33554432.0
    c = calib.par_t1 * (calib.par_t1 * calib.par_t3 / 4194304.0 - calib.par_t2 / 1024.0)
    return a, b, c


def invert_temperature(target, calib: CalibrationConstants) -> float:
    """Find the (real-valued) raw code whose conversion equals target.

    Closed-form quadratic root selection; the root inside the 20-bit raw
    domain is returned.  Rounding to integer codes is deliberately left to
    dataset export.
    """
    a, b, c = _tfine_poly(calib)
    rhs = c - float(target) * 5120.0
    if a == 0.0:
        if b == 0.0:
            raise NoRootError("temperature map is constant")
        x = -rhs / b
        if not 0.0 <= x <= ADC_T_MAX:
            raise NoRootError(f"target {target} outside reachable image")
        return float(x)
    disc = b * b - 4.0 * a * rhs
    if disc < 0.0:
        raise NoRootError(f"target {target} outside reachable image")
    sq = math.sqrt(disc)
    # Numerically stable pair of roots.
    q = -0.5 * (b + math.copysign(sq, b))
    roots = [r for r in (q / a, rhs / q if q != 0.0 else math.inf)
             if math.isfinite(r) and 0.0 <= r <= ADC_T_MAX]
    if not roots:
        raise NoRootError(f"target {target} outside reachable image")
    if len(roots) == 2 and abs(roots[0] - roots[1]) > 1e-6:
        # Cannot happen for a map that is strictly monotone on the domain.
        raise NoRootError(f"target {target} has an ambiguous preimage")
    return float(roots[0])


def _bisect(f, lo: float, hi: float, target: float, what: str) -> float:
    """Bracketing bisection for a continuous monotone section.

    Runs a fixed number of iterations, which shrinks the raw-code bracket to
    far below one ulp, so the forward image of the result is as close to the
    target as double precision permits.
    """
    flo = f(lo) - target
    fhi = f(hi) - target
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NoRootError(f"{what} target {target} outside reachable image")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid) - target
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def invert_pressure(target, t_fine, calib: CalibrationConstants) -> float:
    """Raw pressure code whose conversion at the given t_fine equals target."""
    return _bisect(
        lambda code: float(convert_pressure(code, t_fine, calib)),
        0.0,
        float(ADC_P_MAX),
        float(target),
        "pressure",
    )


def _bisect_many(f, hi_max: float, targets: np.ndarray, what: str) -> np.ndarray:
    """Vectorized counterpart of _bisect over per-element brackets."""
    targets = np.asarray(targets, dtype=float)
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, hi_max)
    flo = f(lo) - targets
    fhi = f(hi) - targets
    if np.any(flo * fhi > 0.0):
        bad = targets[flo * fhi > 0.0][0]
        raise NoRootError(f"{what} target {bad} outside reachable image")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        fmid = f(mid) - targets
        left = flo * fmid < 0.0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fmid)
    return 0.5 * (lo + hi)


def invert_temperature_many(targets, calib: CalibrationConstants) -> np.ndarray:
    """Vectorized closed-form temperature inversion."""
    targets = np.asarray(targets, dtype=float)
    a, b, c = _tfine_poly(calib)
    rhs = c - targets * 5120.0
    if a == 0.0:
        if b == 0.0:
            raise NoRootError("temperature map is constant")
        x = -rhs / b
        if np.any((x < 0.0) | (x > ADC_T_MAX)):
            raise NoRootError("temperature target outside reachable image")
        return x
    disc = b * b - 4.0 * a * rhs
    if np.any(disc < 0.0):
        raise NoRootError("temperature target outside reachable image")
    q = -0.5 * (b + math.copysign(1.0, b) * np.sqrt(disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = np.where(q != 0.0, rhs / q, np.inf)
    in1 = (r1 >= 0.0) & (r1 <= ADC_T_MAX)
    in2 = (r2 >= 0.0) & (r2 <= ADC_T_MAX)
    if np.any(~in1 & ~in2):
        raise NoRootError("temperature target outside reachable image")
    return np.where(in1, r1, r2)


def invert_pressure_many(targets, t_fines, calib: CalibrationConstants) -> np.ndarray:
    t_fines = np.asarray(t_fines, dtype=float)
    return _bisect_many(
        lambda code: convert_pressure(code, t_fines, calib),
        float(ADC_P_MAX),
        targets,
        "pressure",
    )


def invert_humidity_many(targets, temperatures, calib: CalibrationConstants) -> np.ndarray:
    targets = np.asarray(targets, dtype=float)
    if np.any((targets < 0.0) | (targets > 100.0)):
        raise NoRootError("humidity target outside [0, 100]")
    temperatures = np.asarray(temperatures, dtype=float)
    return _bisect_many(
        lambda code: humidity_unclamped(code, temperatures, calib),
        float(ADC_H_MAX),
        targets,
        "humidity",
    )


def invert_humidity(target, temperature, calib: CalibrationConstants) -> float:
    """Raw humidity code whose conversion at the given temperature equals target.

    Targets of exactly 0 or 100 have an interval preimage once clamping
    saturates; the boundary of that interval (the crossing of the unclamped
    response) is returned.
    """
    target = float(target)
    if not 0.0 <= target <= 100.0:
        raise NoRootError(f"humidity target {target} outside [0, 100]")
    return _bisect(
        lambda code: float(humidity_unclamped(code, temperature, calib)),
        0.0,
        float(ADC_H_MAX),
        target,
        "humidity",
    )
