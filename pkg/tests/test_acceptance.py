"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 1-7 run here with no C toolchain.  Criterion 8 (conformance of
emitted kernels) is the harness's own suite under harness/.
"""

import time

import numpy as np
import pytest

from tinyconv import (
    codegen,
    datagen,
    evaluation,
    families,
    ir,
    lowering,
    oracle,
    sequence_models as sm,
    surrogates,
)
from tinyconv.datagen import MeshSpec, SequenceSpec
from tinyconv.evaluation import EvalConfig, normalized_rmse, pareto_flags
from tinyconv.oracle import RANGES
from tinyconv.surrogates import AffineScaler

CFG = EvalConfig()  # 1000-point sequences, 10 datasets, 5 seeds, master 0


def _report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {num} {name}: {status}{suffix}")
    assert ok, f"criterion {num} {name}: {detail}"


def _nrmse(pred, truth, quantity):
    return normalized_rmse(pred, truth, RANGES[quantity])


def test_criterion_1_temperature_quadratic_exactness(calib):
    t0 = time.time()
    rec = evaluation.evaluate_model("quadratic", "temperature", CFG, calib)
    elapsed = time.time() - t0
    _report(1, "temperature quadratic nRMSE < 1e-6", rec.norm_rmse < 1e-6,
            f"nRMSE={rec.norm_rmse:.3e}, {elapsed:.1f}s")
    assert elapsed < 10.0


def test_criterion_2_temperature_linear_band(calib):
    t0 = time.time()
    rec = evaluation.evaluate_model("linear", "temperature", CFG, calib)
    elapsed = time.time() - t0
    _report(2, "temperature linear nRMSE in [1e-3, 1e-1]",
            1e-3 <= rec.norm_rmse <= 1e-1,
            f"nRMSE={rec.norm_rmse:.3e}, {elapsed:.1f}s")
    assert elapsed < 10.0


def test_criterion_3_cost_orderings(calib):
    meshes = {q: datagen.generate_mesh(q, MeshSpec(20, True), calib)
              for q in oracle.QUANTITIES}
    luts = {q: surrogates.build_lut(datagen.generate_mesh(q, MeshSpec(20, False), calib))
            for q in ("pressure", "humidity")}
    t0 = time.time()
    ok = True
    details = []
    for q in oracle.QUANTITIES:
        lin = ir.cost(lowering.lower(surrogates.fit_linear(meshes[q]), q))
        quad = ir.cost(lowering.lower(surrogates.fit_quadratic(meshes[q]), q))
        ref = ir.cost(lowering.lower_reference(q, calib))
        ok &= lin < quad < ref
        details.append(f"{q}: {lin:.0f}<{quad:.0f}<{ref:.0f}")
        if q in luts:
            lut_cost = ir.cost(lowering.lower(luts[q], q))
            ok &= lut_cost < ref
            details.append(f"lut400={lut_cost:.0f}")
    quad_p = ir.cost(lowering.lower(surrogates.fit_quadratic(meshes["pressure"]), "pressure"))
    ref_p = ir.cost(lowering.lower_reference("pressure", calib))
    reduction = 1.0 - quad_p / ref_p
    ok &= 0.50 <= reduction <= 0.90
    elapsed = time.time() - t0
    _report(3, "cost orderings and pressure reduction band", ok,
            f"{'; '.join(details)}; reduction={reduction:.1%}, {elapsed:.2f}s")
    assert elapsed < 1.0


def test_criterion_5_error_measure_self_consistency():
    truth = np.zeros(100)
    t = normalized_rmse(truth + 0.0114, truth, RANGES["temperature"])
    p = normalized_rmse(truth + 28.0, truth, RANGES["pressure"])
    ok = abs(t - 0.00912) <= 1e-5 and abs(p - 0.0350) <= 1e-4
    _report(5, "unit/normalized error pairs", ok, f"t={t:.6f}, p={p:.6f}")


def test_criterion_6_memory_anchors(calib):
    lut = surrogates.build_lut(datagen.generate_mesh("pressure", MeshSpec(20, False), calib))
    lut_ram = ir.estimate_memory(lowering.lower(lut, "pressure")).ram_bytes
    mesh = datagen.generate_mesh("temperature", MeshSpec(20, True), calib)
    lin_ram = ir.estimate_memory(
        lowering.lower(surrogates.fit_linear(mesh), "temperature")).ram_bytes
    ok = 1600 <= lut_ram <= 1820 and lin_ram < 60
    _report(6, "memory anchors", ok, f"lut400_ram={lut_ram}, linear_ram={lin_ram}")


# ---------------------------------------------------------------------------
# Criterion 7: property suites
# ---------------------------------------------------------------------------


def test_criterion_7a_round_trip_inversions(calib):
    rng = np.random.default_rng(123)
    worst = 0.0
    t_targets = rng.uniform(-40, 85, 1000)
    codes = oracle.invert_temperature_many(t_targets, calib)
    back, _ = oracle.convert_temperature(codes, calib)
    worst = max(worst, np.max(np.abs(back - t_targets)) / RANGES["temperature"].span)

    temps = rng.uniform(-40, 85, 1000)
    t_fines = oracle.convert_temperature(
        oracle.invert_temperature_many(temps, calib), calib)[1]
    p_targets = rng.uniform(30_000, 110_000, 1000)
    p_back = oracle.convert_pressure(
        oracle.invert_pressure_many(p_targets, t_fines, calib), t_fines, calib)
    worst = max(worst, np.max(np.abs(p_back - p_targets)) / RANGES["pressure"].span)

    h_targets = rng.uniform(0, 100, 1000)
    h_back = oracle.convert_humidity(
        oracle.invert_humidity_many(h_targets, temps, calib), temps, calib)
    worst = max(worst, np.max(np.abs(h_back - h_targets)) / RANGES["humidity"].span)
    _report("7a", "oracle round trips within 1e-6*range", worst < 1e-6,
            f"worst={worst:.2e}")


def test_criterion_7b_quadratic_residual(calib):
    mesh = datagen.generate_mesh("temperature", MeshSpec(20, True), calib)
    quad = surrogates.fit_quadratic(mesh)
    resid = _nrmse(surrogates.quadratic_predict(quad, mesh.inputs), mesh.targets,
                   "temperature")
    _report("7b", "quadratic fit residual on reference temperature < 1e-9",
            resid < 1e-9, f"resid={resid:.2e}")


def test_criterion_7c_lut_exactness_and_continuity(calib):
    lut = surrogates.build_lut(datagen.generate_mesh("pressure", MeshSpec(10, False), calib))
    mesh = datagen.generate_mesh("pressure", MeshSpec(10, False), calib)
    node_gap = np.max(np.abs(surrogates.lut_predict(lut, mesh.inputs) - mesh.targets))

    span = float(np.max(lut.values) - np.min(lut.values))
    eps = 1e-9
    worst_jump = 0.0
    rng = np.random.default_rng(5)
    for axis in (0, 1):
        for level in range(1, 10 - 1):
            edge = lut.mins[axis] + level * lut.steps[axis]
            for _ in range(20):
                other = rng.uniform(lut.mins[1 - axis],
                                    lut.mins[1 - axis] + 9 * lut.steps[1 - axis])
                lo_pt = [0.0, 0.0]
                hi_pt = [0.0, 0.0]
                lo_pt[axis] = edge - eps * lut.steps[axis]
                hi_pt[axis] = edge + eps * lut.steps[axis]
                lo_pt[1 - axis] = hi_pt[1 - axis] = other
                jump = abs(surrogates.lut_predict(lut, [lo_pt])[0]
                           - surrogates.lut_predict(lut, [hi_pt])[0])
                worst_jump = max(worst_jump, jump / span)
    ok = node_gap == 0.0 and worst_jump < 1e-7
    _report("7c", "LUT node exactness and cross-edge continuity", ok,
            f"node_gap={node_gap}, worst_edge_jump={worst_jump:.2e}")


def test_criterion_7d_gp_near_interpolation(calib):
    worst = 0.0
    for quantity in oracle.QUANTITIES:
        for levels in (2, 3):
            mesh = datagen.generate_mesh(quantity, MeshSpec(levels, True), calib)
            gp = surrogates.fit_gp(mesh, fixed_noise=1e-8)
            resid = _nrmse(surrogates.gp_predict(gp, mesh.inputs), mesh.targets, quantity)
            worst = max(worst, resid)
    _report("7d", "GP near-interpolation at noise 1e-8 (<1e-4)", worst < 1e-4,
            f"worst={worst:.2e}")


def test_criterion_7e_gradient_checks():
    rng = np.random.default_rng(11)
    x = rng.uniform(0, 1, (20, 2))
    y = rng.uniform(0, 1, 20)
    worst = 0.0

    def fd_worst(fn, params, eps=1e-5):
        _, grad = fn(params)
        w = 0.0
        for i in range(len(params)):
            up, dn = params.copy(), params.copy()
            up[i] += eps
            dn[i] -= eps
            fd = (fn(up)[0] - fn(dn)[0]) / (2 * eps)
            w = max(w, abs(grad[i] - fd) / max(abs(fd), 1e-8))
        return w

    shapes = surrogates._mlp_shapes(2, (3, 3, 1))
    n = sum(o * i + o for o, i in shapes)
    worst = max(worst, fd_worst(
        lambda th: surrogates._mlp_loss_grad(th, shapes, x, y),
        rng.uniform(-0.5, 0.5, n)))

    seq_checks = [
        (lambda th: sm._arma_loss_grad(th, x, y, 3, 2), 3 + 4 + 1),
        (lambda th: sm._rnn_loss_grad(th, x, y, 0), 4),
        (lambda th: sm._gru_loss_grad(th, x, y, 0, 0), 12),
        (lambda th: sm._gru_loss_grad(th, x, y, 1, 1), 12),
        (lambda th: sm._half_gru_loss_grad(th, x, y, 1, 1), 8),
    ]
    for fn, n in seq_checks:
        worst = max(worst, fd_worst(fn, rng.uniform(-0.4, 0.4, n)))
    _report("7e", "MLP and BPTT gradients vs finite differences (<1e-4)",
            worst < 1e-4, f"worst={worst:.2e}")


def test_criterion_7f_interpreter_native_equivalence(calib):
    mesh_t = datagen.generate_mesh("temperature", MeshSpec(20, True), calib)
    mesh_p = datagen.generate_mesh("pressure", MeshSpec(20, True), calib)
    rng = np.random.default_rng(21)
    n = 10_000
    worst = 0.0

    def rel_gap(got, want, quantity):
        span = RANGES[quantity].span
        return float(np.max(np.abs(got - want) / np.maximum(np.abs(want), span)))

    function_models = [
        ("temperature", surrogates.fit_linear(mesh_t)),
        ("pressure", surrogates.fit_linear(mesh_p)),
        ("temperature", surrogates.fit_quadratic(mesh_t)),
        ("pressure", surrogates.fit_quadratic(mesh_p)),
        ("temperature", surrogates.build_lut(
            datagen.generate_mesh("temperature", MeshSpec(20, False), calib))),
        ("pressure", surrogates.build_lut(
            datagen.generate_mesh("pressure", MeshSpec(20, False), calib))),
        ("temperature", surrogates.fit_gp(
            datagen.generate_mesh("temperature", MeshSpec(3, True), calib))),
        ("pressure", surrogates.fit_gp(
            datagen.generate_mesh("pressure", MeshSpec(3, True), calib))),
        ("temperature", surrogates.train_mlp(mesh_t, (3, 3, 1), 2, max_epochs=200)),
        ("pressure", surrogates.train_mlp(mesh_p, (3, 1), 2, max_epochs=200)),
    ]
    for quantity, model in function_models:
        prog = lowering.lower(model, quantity)
        x = np.column_stack([rng.uniform(lo, hi, n)
                             for lo, hi in oracle.RAW_DOMAINS[quantity]])
        worst = max(worst, rel_gap(ir.interpret_batch(prog, x),
                                   surrogates.predict(model, x), quantity))

    for quantity in oracle.QUANTITIES:
        prog = lowering.lower_reference(quantity, calib)
        x = np.column_stack([rng.uniform(lo, hi, n)
                             for lo, hi in oracle.RAW_DOMAINS[quantity]])
        worst = max(worst, rel_gap(ir.interpret_batch(prog, x),
                                   datagen.apply_oracle(quantity, x, calib), quantity))

    scaler = AffineScaler(np.array([0.0]), np.array([float(oracle.ADC_T_MAX)]))
    seq_models = [
        sm.ArmaModel(3, 2, rng.uniform(-0.3, 0.3, 6), scaler, -40.0, 125.0),
        sm.RecurrentCell("simple_rnn", "tanh", "sigmoid",
                         rng.uniform(-0.5, 0.5, 3), scaler, -40.0, 125.0),
        sm.RecurrentCell("gru", "tanh", "sigmoid",
                         rng.uniform(-0.5, 0.5, 9), scaler, -40.0, 125.0),
        sm.RecurrentCell("gru", "relu", "softsign",
                         rng.uniform(-0.5, 0.5, 9), scaler, -40.0, 125.0),
        sm.RecurrentCell("half_gru", "relu", "softsign",
                         rng.uniform(-0.5, 0.5, 6), scaler, -40.0, 125.0),
    ]
    x_seq = rng.uniform(0.0, oracle.ADC_T_MAX, (n, 1))
    for model in seq_models:
        prog = lowering.lower(model, "temperature")
        worst = max(worst, rel_gap(ir.interpret_sequence(prog, x_seq),
                                   sm.predict_sequence(model, x_seq), "temperature"))
    _report("7f", "interpreter/native equivalence across families (<1e-9 rel)",
            worst < 1e-9, f"worst={worst:.2e}, n={n}")


def test_criterion_7g_pareto_vs_brute_force():
    rng = np.random.default_rng(33)
    for trial in range(1000):
        size = int(rng.integers(1, 201))
        if trial % 3 == 0:  # discrete coordinates exercise ties
            pts = rng.integers(0, 10, (size, 2)).astype(float)
        else:
            pts = rng.uniform(0, 1, (size, 2))
        fast = np.array(pareto_flags([tuple(p) for p in pts]))
        err = pts[:, 0]
        cost_v = pts[:, 1]
        le_err = err[:, None] <= err[None, :]
        le_cost = cost_v[:, None] <= cost_v[None, :]
        strict = (err[:, None] < err[None, :]) | (cost_v[:, None] < cost_v[None, :])
        dominates = le_err & le_cost & strict
        np.fill_diagonal(dominates, False)
        brute = ~dominates.any(axis=0)
        assert np.array_equal(fast, brute), f"trial {trial}"
    _report("7g", "Pareto frontier matches O(n^2) brute force", True,
            "1000 random instances, sizes 1-200")


def test_criterion_7h_gp_autocorrelation():
    vals = []
    for s in range(200):
        x = datagen.sample_gp_sequence(SequenceSpec(1000, 20.0, seed=10_000 + s))
        vals.append(np.dot(x[:-20], x[20:]) / np.dot(x, x))
    mean = float(np.mean(vals))
    ok = abs(mean - 0.52864) < 0.05
    _report("7h", "GP lag-20 autocorrelation within 0.05 of 0.52864", ok,
            f"mean={mean:.5f} (formula value 0.52399)")


# ---------------------------------------------------------------------------
# Criterion 4: frontier structure from full suites (slowest, kept last)
# ---------------------------------------------------------------------------


def test_criterion_4_frontier_structure(calib):
    t0 = time.time()
    temp_report = evaluation.run_suite(["temperature"], CFG, calib)
    pressure_report = evaluation.run_suite(["pressure"], CFG, calib)
    elapsed = time.time() - t0

    seq_names = set(families._SEQUENCE_FAMILIES)
    temp_frontier = {r.model for r in temp_report.records if r.pareto}
    no_seq = not (temp_frontier & seq_names)

    pressure_frontier = {r.model for r in pressure_report.records if r.pareto}
    has_expected = {"original", "quadratic", "linear"} <= pressure_frontier

    for rep, tag in ((temp_report, "temperature"), (pressure_report, "pressure")):
        for f in rep.failures:
            print(f"  suite failure {tag}/{f['model']}: {f['error']}")

    _report(4, "frontier structure", no_seq and has_expected and elapsed < 1800.0,
            f"temp_frontier={sorted(temp_frontier)}, "
            f"pressure_frontier={sorted(pressure_frontier)}, {elapsed:.0f}s")
