"""Mesh and GP-sequence dataset generation."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tinyconv import datagen, oracle
from tinyconv.datagen import (
    Dataset,
    MeshSpec,
    SequenceSpec,
    fill_range_transform,
    generate_mesh,
    generate_sequence_dataset,
    matern52,
    sample_gp_sequence,
)
from tinyconv.errors import ConstantSequenceError
from tinyconv.oracle import ADC_P_MAX, ADC_T_MAX, RANGES

MATERN_AT_LENGTHSCALE = 0.5239941088318203  # (1 + sqrt5 + 5/3) exp(-sqrt5)


def test_mesh_counts(calib):
    assert generate_mesh("temperature", MeshSpec(20, True), calib).n == 20
    assert generate_mesh("pressure", MeshSpec(20, True), calib).n == 400
    assert generate_mesh("humidity", MeshSpec(3, False), calib).n == 9


def test_inverse_refined_endpoints_and_spacing(calib):
    ds = generate_mesh("temperature", MeshSpec(20, True), calib)
    span = RANGES["temperature"].span
    grid = np.linspace(-40.0, 85.0, 20)
    assert np.max(np.abs(ds.targets - grid)) < 1e-9 * span
    steps = np.diff(ds.targets)
    assert np.max(np.abs(steps - steps[0])) < 1e-9 * span

    tiny = generate_mesh("temperature", MeshSpec(2, True), calib)
    assert np.max(np.abs(tiny.targets - [-40.0, 85.0])) < 1e-9 * span


def test_inverse_refined_pressure_grid(calib):
    ds = generate_mesh("pressure", MeshSpec(5, True), calib)
    span = RANGES["pressure"].span
    grid = np.linspace(30_000.0, 110_000.0, 5)
    for block in ds.targets.reshape(5, 5):
        assert np.max(np.abs(block - grid)) < 1e-9 * span


def test_raw_mesh_spans_full_bit_width(calib):
    ds = generate_mesh("pressure", MeshSpec(4, False), calib)
    assert ds.inputs[:, 0].min() == 0.0 and ds.inputs[:, 0].max() == float(ADC_T_MAX)
    assert ds.inputs[:, 1].min() == 0.0 and ds.inputs[:, 1].max() == float(ADC_P_MAX)


@pytest.mark.parametrize("quantity", oracle.QUANTITIES)
def test_label_consistency_bit_identical(quantity, calib):
    mesh = generate_mesh(quantity, MeshSpec(5, True), calib)
    assert np.array_equal(datagen.apply_oracle(quantity, mesh.inputs, calib), mesh.targets)
    seq = generate_sequence_dataset(quantity, SequenceSpec(200, seed=3), calib)
    assert np.array_equal(datagen.apply_oracle(quantity, seq.inputs, calib), seq.targets)


def test_matern_kernel_shape():
    assert matern52(0.0, 20.0) == 1.0
    rs = np.linspace(0.0, 200.0, 500)
    ks = matern52(rs, 20.0)
    assert np.all(np.diff(ks) < 0.0)
    assert matern52(20.0, 20.0) == pytest.approx(MATERN_AT_LENGTHSCALE, abs=1e-12)
    expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
    assert matern52(20.0, 20.0) == pytest.approx(expected, abs=1e-15)


def test_gp_sequence_determinism():
    a = sample_gp_sequence(SequenceSpec(500, 20.0, seed=7))
    b = sample_gp_sequence(SequenceSpec(500, 20.0, seed=7))
    c = sample_gp_sequence(SequenceSpec(500, 20.0, seed=8))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_gp_single_point_draw():
    vals = np.array([sample_gp_sequence(SequenceSpec(1, 20.0, seed=s))[0]
                     for s in range(300)])
    assert np.all(np.isfinite(vals))
    # k(0) = 1: unit variance within Monte-Carlo slack
    assert abs(vals.std() - 1.0) < 0.15


def test_gp_lag_autocorrelation():
    vals = []
    for s in range(200):
        x = sample_gp_sequence(SequenceSpec(1000, 20.0, seed=10_000 + s))
        vals.append(np.dot(x[:-20], x[20:]) / np.dot(x, x))
    assert abs(np.mean(vals) - MATERN_AT_LENGTHSCALE) < 0.05


def test_gp_stationarity_proxy():
    draws = np.array([sample_gp_sequence(SequenceSpec(1000, 20.0, seed=20_000 + s))
                      for s in range(100)])
    idx_mean = draws.mean(axis=0)
    sigma = 1.0 / math.sqrt(100)
    # max over ~25 effectively independent indices: allow 4.5 sigma
    assert np.max(np.abs(idx_mean)) < 4.5 * sigma
    assert abs(idx_mean.mean()) < 3.0 * sigma


def test_gp_blocked_sampler_matches_kernel():
    vals = []
    for s in range(60):
        x = sample_gp_sequence(SequenceSpec(2500, 20.0, seed=30_000 + s))
        assert len(x) == 2500
        vals.append(np.dot(x[:-20], x[20:]) / np.dot(x, x))
    assert abs(np.mean(vals) - MATERN_AT_LENGTHSCALE) < 0.08


def test_fill_range_basic():
    out = fill_range_transform([0.0, 1.0, 2.0], 0.0, 100.0)
    assert np.array_equal(out, [0.0, 50.0, 100.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40).filter(
    lambda xs: max(xs) > min(xs)))
def test_fill_range_exact_endpoints(xs):
    out = fill_range_transform(xs, -40.0, 85.0)
    assert out.min() == -40.0
    assert out.max() == 85.0
    order = np.argsort(xs, kind="stable")
    assert np.all(np.diff(out[order]) >= 0.0)


def test_fill_range_amplitude_invariance():
    rng = np.random.default_rng(1)
    seq = rng.normal(size=100)
    base = fill_range_transform(seq, 30_000.0, 110_000.0)
    assert np.array_equal(fill_range_transform(2.0 * seq, 30_000.0, 110_000.0), base)
    assert np.allclose(fill_range_transform(3.7 * seq, 30_000.0, 110_000.0), base,
                       rtol=1e-12, atol=1e-6)


def test_fill_range_constant_error():
    with pytest.raises(ConstantSequenceError):
        fill_range_transform([5.0, 5.0, 5.0], 0.0, 1.0)


@pytest.mark.parametrize("quantity,dim", [("temperature", 1), ("pressure", 2),
                                          ("humidity", 2)])
def test_sequence_dataset_shape_and_range(quantity, dim, calib):
    ds = generate_sequence_dataset(quantity, SequenceSpec(1000, seed=5), calib)
    assert ds.n == 1000 and ds.dim == dim
    rng = RANGES[quantity]
    assert ds.targets.min() >= rng.min - 1e-9 * rng.span
    assert ds.targets.max() <= rng.max + 1e-9 * rng.span
    again = generate_sequence_dataset(quantity, SequenceSpec(1000, seed=5), calib)
    assert np.array_equal(ds.inputs, again.inputs)
    assert np.array_equal(ds.targets, again.targets)


def test_sequence_dataset_subseeds_differ(calib):
    ds = generate_sequence_dataset("pressure", SequenceSpec(400, seed=11), calib)
    # companion temperature follows its own draw, not the pressure draw
    t_conv = datagen.apply_oracle("temperature", ds.inputs[:, :1], calib)
    corr = np.corrcoef(t_conv, ds.targets)[0, 1]
    assert abs(corr) < 0.9


def test_quantize_dataset(calib):
    ds = generate_sequence_dataset("humidity", SequenceSpec(100, seed=2), calib)
    q = datagen.quantize_dataset(ds, calib)
    assert np.array_equal(q.inputs, np.rint(q.inputs))
    assert np.array_equal(datagen.apply_oracle("humidity", q.inputs, calib), q.targets)


def test_dataset_csv_roundtrip(tmp_path, calib):
    ds = generate_sequence_dataset("pressure", SequenceSpec(50, seed=9), calib)
    path = tmp_path / "d.csv"
    datagen.save_dataset(ds, path)
    text = path.read_text()
    assert text.splitlines()[0] == "adc_t,adc_p,target"
    back = datagen.load_dataset(path)
    assert np.array_equal(back.inputs, ds.inputs)
    assert np.array_equal(back.targets, ds.targets)
    assert back.quantity == "pressure" and back.kind == "sequence"
    assert back.meta["seed"] == 9
    assert (tmp_path / "d.json").exists()


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset("temperature", "mesh", np.zeros((3, 1)), np.zeros(4))
    with pytest.raises(ValueError):
        MeshSpec(1)
    with pytest.raises(ValueError):
        SequenceSpec(0)
    with pytest.raises(ValueError):
        SequenceSpec(10, lengthscale=0.0)
