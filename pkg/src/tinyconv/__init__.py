"""tinyconv: learned low-overhead surrogate conversion routines for a
digital environmental sensor, with cost modeling, Pareto analysis, and C
kernel emission.
"""

from .oracle import (
    CalibrationConstants,
    ConvertedReading,
    OperatingRange,
    RawReading,
    RANGES,
    convert,
    convert_humidity,
    convert_pressure,
    convert_temperature,
    default_calibration,
    load_calibration,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationConstants",
    "ConvertedReading",
    "OperatingRange",
    "RawReading",
    "RANGES",
    "convert",
    "convert_humidity",
    "convert_pressure",
    "convert_temperature",
    "default_calibration",
    "load_calibration",
    "__version__",
]
