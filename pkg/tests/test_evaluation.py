"""Normalized RMS error, the evaluation protocol, Pareto extraction."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tinyconv import evaluation, oracle
from tinyconv.errors import EmptyRosterError, LengthMismatchError, UnknownFamilyError
from tinyconv.evaluation import (
    EvalConfig,
    EvalRecord,
    normalized_rmse,
    pareto_flags,
    pareto_frontier,
    run_suite,
)
from tinyconv.oracle import RANGES, OperatingRange

FAST_CFG = EvalConfig(sequence_length=200, dataset_count=2, seeds=2, master_seed=0)


def brute_force_flags(points):
    flags = []
    for i, (e_i, c_i) in enumerate(points):
        dominated = any(
            (e_j <= e_i and c_j <= c_i and (e_j < e_i or c_j < c_i))
            for j, (e_j, c_j) in enumerate(points) if j != i)
        flags.append(not dominated)
    return flags


def test_normalized_rmse_basics():
    rng = OperatingRange(0.0, 100.0)
    x = np.linspace(0, 1, 50)
    assert normalized_rmse(x, x, rng) == 0.0
    assert normalized_rmse(x + 1.0, x, rng) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(LengthMismatchError):
        normalized_rmse(x, x[:-1], rng)


def test_normalized_rmse_known_unit_pairs():
    temp = RANGES["temperature"]
    truth = np.zeros(10)
    assert normalized_rmse(truth + 0.0114, truth, temp) == pytest.approx(0.00912, abs=1e-5)
    pres = RANGES["pressure"]
    assert normalized_rmse(truth + 28.0, truth, pres) == pytest.approx(0.0350, abs=1e-4)


@given(st.floats(1e-6, 1e6))
def test_normalized_rmse_scale_covariance(c):
    rng = OperatingRange(0.0, 10.0)
    truth = np.zeros(20)
    errs = np.linspace(-1.0, 1.0, 20)
    base = normalized_rmse(truth + errs, truth, rng)
    scaled = normalized_rmse(truth + c * errs, truth, rng)
    assert scaled == pytest.approx(c * base, rel=1e-9)


def test_pareto_hand_case():
    pts = [(0.0, 10.0), (1.0, 5.0), (2.0, 1.0), (1.0, 9.0)]
    assert pareto_flags(pts) == [True, True, True, False]
    assert pareto_flags([(3.0, 3.0)]) == [True]


def test_pareto_keeps_exact_ties():
    pts = [(1.0, 5.0), (1.0, 5.0), (2.0, 5.0)]
    assert pareto_flags(pts) == [True, True, False]


@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)),
                min_size=1, max_size=60))
def test_pareto_matches_brute_force(pts):
    pts = [(float(e), float(c)) for e, c in pts]
    assert pareto_flags(pts) == brute_force_flags(pts)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)),
                min_size=1, max_size=40))
def test_pareto_monotone_dominance(pts):
    pts = [(float(e), float(c)) for e, c in pts]
    before = pareto_flags(pts)
    worst = (max(e for e, _ in pts) + 1.0, max(c for _, c in pts) + 1.0)
    after = pareto_flags(pts + [worst])
    assert after[:-1] == before
    assert after[-1] is False or after[-1] == False  # noqa: E712


def test_pareto_frontier_records():
    recs = [
        EvalRecord("a", "temperature", 0.0, 0, 0, 10.0, 0, 0),
        EvalRecord("b", "temperature", 1.0, 0, 0, 5.0, 0, 0),
        EvalRecord("c", "temperature", 2.0, 0, 0, 1.0, 0, 0),
        EvalRecord("d", "temperature", 1.0, 0, 0, 9.0, 0, 0),
        EvalRecord("e", "pressure", 9.0, 0, 0, 9.0, 0, 0),
    ]
    front = pareto_frontier(recs)
    names = {(r.quantity, r.model) for r in front}
    assert names == {("temperature", "a"), ("temperature", "b"),
                     ("temperature", "c"), ("pressure", "e")}
    with pytest.raises(EmptyRosterError):
        pareto_frontier([])


def test_evaluate_original_is_exact(calib):
    rec = evaluation.evaluate_model("original", "temperature", FAST_CFG, calib)
    assert rec.norm_rmse == 0.0
    assert rec.cost > 0


def test_evaluate_quadratic_temperature(calib):
    rec = evaluation.evaluate_model("quadratic", "temperature", FAST_CFG, calib)
    assert rec.norm_rmse < 1e-6
    assert rec.rmse_units == pytest.approx(rec.norm_rmse * 125.0 / 100.0, rel=1e-12)


def test_evaluate_determinism(calib):
    a = evaluation.evaluate_model("linear", "temperature", FAST_CFG, calib)
    b = evaluation.evaluate_model("linear", "temperature", FAST_CFG, calib)
    assert a == b


def test_evaluate_unknown_family(calib):
    with pytest.raises(UnknownFamilyError):
        evaluation.evaluate_model("lut-7", "pressure", FAST_CFG, calib)


def test_evaluate_family_tolerates_diverged_seeds(calib, monkeypatch):
    from tinyconv import families
    from tinyconv.errors import DivergenceError

    real = families.train_family

    def flaky(name, quantity, calib_, master, k=0):
        if k == 0:
            raise DivergenceError("boom")
        return real(name, quantity, calib_, master, k)

    monkeypatch.setattr(evaluation.families, "train_family", flaky)
    rec = evaluation.evaluate_model("nn-1", "temperature", FAST_CFG, calib)
    assert rec.seeds_failed == 1
    assert len(rec.breakdown) == (FAST_CFG.seeds - 1) * FAST_CFG.dataset_count

    def hopeless(name, quantity, calib_, master, k=0):
        raise DivergenceError("boom")

    monkeypatch.setattr(evaluation.families, "train_family", hopeless)
    with pytest.raises(DivergenceError):
        evaluation.evaluate_model("nn-1", "temperature", FAST_CFG, calib)


def test_run_suite_tiny_roster(calib):
    roster = {"temperature": ["original", "linear", "quadratic"]}
    report = run_suite(["temperature"], FAST_CFG, calib, roster=roster)
    assert not report.failures
    assert [r.model for r in report.records] == ["linear", "original", "quadratic"]
    assert all(r.pareto for r in report.records)  # 0<err ordering vs cost ordering
    again = run_suite(["temperature"], FAST_CFG, calib, roster=roster)
    assert report.records == again.records


def test_run_suite_collects_failures(calib):
    roster = {"pressure": ["original", "lut-7"]}
    report = run_suite(["pressure"], FAST_CFG, calib, roster=roster)
    assert len(report.records) == 1
    assert len(report.failures) == 1
    assert report.failures[0]["model"] == "lut-7"
    assert report.records[0].pareto


def test_run_suite_empty_roster(calib):
    with pytest.raises(EmptyRosterError):
        run_suite(["temperature"], FAST_CFG, calib, roster={"temperature": []})


def test_report_files_roundtrip(tmp_path, calib):
    roster = {"temperature": ["original", "linear"]}
    report = run_suite(["temperature"], FAST_CFG, calib, roster=roster)
    csv_path = tmp_path / "report.csv"
    evaluation.write_report_csv(report.records, csv_path)
    text = csv_path.read_text()
    assert text.splitlines()[0] == (
        "model,quantity,norm_rmse,rmse_units,cost,flash_bytes,ram_bytes,pareto")
    back = evaluation.read_report_csv(csv_path)
    assert [(r.model, r.norm_rmse, r.cost, r.pareto) for r in back] == \
           [(r.model, r.norm_rmse, r.cost, r.pareto) for r in report.records]

    json_path = tmp_path / "report.json"
    evaluation.write_report_json(report, json_path)
    import json
    doc = json.loads(json_path.read_text())
    assert len(doc["records"]) == 2
    assert len(doc["records"][0]["per_dataset"]) == FAST_CFG.dataset_count

    plot_path = tmp_path / "plot.csv"
    evaluation.write_plot_data(report.records, plot_path)
    lines = plot_path.read_text().splitlines()
    assert lines[0] == "cost,norm_rmse,label"
    assert len(lines) == 3


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(dataset_count=0)
