import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import block_diag

from gcr.regression import (
    ComposedModel,
    KernelModel,
    PartitionSpec,
    PiecewisePolyModel,
    SingularSystemError,
    _design,
    _locate,
    degree_for_smoothness,
    fit_kernel,
    fit_piecewise_poly,
    fit_stage_two,
    median_bandwidth,
    monomial_exponents,
    partition_K,
    predict_composed,
    predict_pp,
)

LINE = np.array([-0.75, -0.25, 0.25, 0.75])


def line_model(M):
    return fit_piecewise_poly(LINE[:, None], 2 * LINE, PartitionSpec(1.0, 2, 1, 1), M)


def test_linear_cells_examples():
    m = line_model(2.0)
    assert predict_pp(m, 0.5) == pytest.approx(1.0, abs=1e-10)
    assert predict_pp(m, -0.75) == pytest.approx(-1.5, abs=1e-10)
    assert predict_pp(line_model(1.0), -0.75) == -1.0


def test_truncation_examples():
    spec = PartitionSpec(1.0, 1, 1, 0)
    assert predict_pp(PiecewisePolyModel(spec, {(0,): np.array([1.5])}, 1.0), 0.3) == 1.0
    assert predict_pp(PiecewisePolyModel(spec, {(0,): np.array([-3.2])}, 2.0), 0.3) == -2.0
    zero = PiecewisePolyModel(PartitionSpec(1.0, 3, 2, 2), {}, 5.0)
    assert np.all(zero.predict(np.random.default_rng(0).uniform(-2, 2, (20, 2))) == 0.0)


def test_spec_shape_rules():
    spec = PartitionSpec(2.0, 4, 3, 2)
    assert spec.side == 1.0
    assert spec.n_terms == math.comb(5, 3) == len(monomial_exponents(3, 2))
    with pytest.raises(ValueError):
        PartitionSpec(0.0, 2, 1, 1)
    with pytest.raises(ValueError):
        PartitionSpec(1.0, 0, 1, 1)


def test_quadratic_recovered_exactly():
    rng = np.random.default_rng(0)
    spec = PartitionSpec(1.0, 3, 2, 2)
    # 50 points per cell
    cells = [(a, b) for a in range(3) for b in range(3)]
    Z = np.vstack([
        -1 + (np.array(c) + rng.uniform(0, 1, (50, 2))) * spec.side for c in cells
    ])
    g = lambda z: z[:, 0] ** 2 + 2 * z[:, 1] ** 2
    model = fit_piecewise_poly(Z, g(Z), spec, 100.0)
    grid = np.stack(np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41)), -1).reshape(-1, 2)
    assert np.max(np.abs(model.predict(grid) - g(grid))) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3), k=st.integers(0, 3), data=st.data())
def test_in_class_polynomial_reproduced_on_its_cell(seed, d, k, data):
    rng = np.random.default_rng(seed)
    K = data.draw(st.integers(1, 4))
    spec = PartitionSpec(1.0, K, d, k)
    cell = rng.integers(0, K, d)
    lo = -1 + cell * spec.side
    Z = lo + rng.uniform(0.02, 0.98, (3 * spec.n_terms + 5, d)) * spec.side
    exps = monomial_exponents(d, k)
    coef = rng.uniform(-2, 2, len(exps))
    y = _design(Z, exps) @ coef
    model = fit_piecewise_poly(Z, y, spec, float(np.abs(y).max()) * 10 + 10)
    test = lo + rng.uniform(0, 1, (50, d)) * spec.side
    assert np.max(np.abs(model.predict(test) - _design(test, exps) @ coef)) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.floats(0.01, 5.0))
def test_truncation_bound_always_holds(seed, M):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-1, 1, (60, 2))
    y = 10 * rng.standard_normal(60)
    model = fit_piecewise_poly(Z, y, PartitionSpec(1.0, 3, 2, 2), M)
    assert np.all(np.abs(model.predict(rng.uniform(-5, 5, (500, 2)))) <= M)


def test_cells_decouple():
    rng = np.random.default_rng(2)
    spec = PartitionSpec(1.0, 2, 2, 1)
    Z = rng.uniform(-1, 1, (40, 2))
    y = np.sin(3 * Z[:, 0]) + Z[:, 1] ** 2
    model = fit_piecewise_poly(Z, y, spec, 100.0)
    cells, U = _locate(Z, spec)
    flat = np.ravel_multi_index(cells.T, (2, 2))
    order = np.argsort(flat, kind="stable")
    V = _design(U, monomial_exponents(2, 1))
    blocks = [V[order][flat[order] == c] for c in range(4)]
    A = block_diag(*blocks)
    coef, *_ = np.linalg.lstsq(A, y[order], rcond=None)
    global_rss = np.sum((A @ coef - y[order]) ** 2)
    local_rss = np.sum((model.raw(Z) - y) ** 2)
    assert local_rss == pytest.approx(global_rss, rel=1e-10, abs=1e-12)


def test_empty_cells_stay_zero():
    Z = np.array([[-0.9], [-0.8], [-0.7]])
    model = fit_piecewise_poly(Z, [1.0, 2.0, 3.0], PartitionSpec(1.0, 4, 1, 1), 10.0)
    assert set(model.coeffs) == {(0,)}
    assert predict_pp(model, 0.6) == 0.0


def test_rank_deficient_cell_uses_minimum_norm():
    # two samples cannot determine three quadratic coefficients
    model = fit_piecewise_poly(np.array([[0.2], [0.6]]), [1.0, 1.0], PartitionSpec(1.0, 1, 1, 2), 10.0)
    c = model.coeffs[(0,)]
    assert np.all(np.isfinite(c))
    np.testing.assert_allclose(model.raw([[0.2], [0.6]]), [1.0, 1.0], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_clamping_idempotence(seed):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-1, 1, (80, 2))
    model = fit_piecewise_poly(Z, Z[:, 0] * Z[:, 1], PartitionSpec(1.0, 3, 2, 2), 5.0)
    far = rng.uniform(-6, 6, (100, 2))
    np.testing.assert_array_equal(model.predict(far), model.predict(np.clip(far, -1, 1)))


def test_partition_K_examples():
    assert partition_K(10_000, 2, 2) == 4
    assert partition_K(3, 5, 7) >= 1
    assert partition_K(10**6, 1, 1) == 42
    with pytest.raises(ValueError):
        partition_K(2, 1, 1)
    with pytest.raises(ValueError):
        partition_K(100, 1, 1, sigma=1.0)
    ratio = 1000 / math.log(1000) / max(0.25 + 2 * 5 / 1000, 2 * 4 + 4 * 5 / 1000)
    assert partition_K(1000, 1, 1, sigma=0.5, M=2.0, C8=5.0) == math.ceil(ratio ** (1 / 3))


def test_degree_for_smoothness():
    assert [degree_for_smoothness(s) for s in (0.5, 1, 1.5, 2, 2.7)] == [0, 1, 1, 2, 2]


def test_stage_two_uses_data_bounds():
    rng = np.random.default_rng(3)
    Z = rng.uniform(-2, 3, (400, 1))
    y = np.cos(Z[:, 0])
    model = fit_stage_two(Z, y, s=2)
    assert model.spec.B == pytest.approx(np.abs(Z).max())
    assert model.M == pytest.approx(np.abs(y).max())
    assert model.spec.degree == 2
    assert np.sqrt(np.mean((model.predict(Z) - y) ** 2)) < 0.03


def test_kernel_single_sample_shrinkage():
    m = fit_kernel(np.array([[0.3, -1.0]]), [2.0], ridge=1e-3)
    assert m.predict([[0.3, -1.0]])[0] == pytest.approx(2.0 / 1.001, abs=1e-12)
    assert median_bandwidth(np.zeros((1, 2))) == 1.0


def test_kernel_constant_response():
    Z = np.random.default_rng(4).uniform(-1, 1, (30, 2))
    m = fit_kernel(Z, np.full(30, 3.0), ridge=1e-10)
    np.testing.assert_allclose(m.predict(Z), 3.0, atol=1e-5)


def test_kernel_sine():
    rng = np.random.default_rng(5)
    Z = rng.uniform(-1, 1, (500, 1))
    m = fit_kernel(Z, np.sin(np.pi * Z[:, 0]))
    grid = np.linspace(-0.95, 0.95, 200)[:, None]
    assert np.sqrt(np.mean((m.predict(grid) - np.sin(np.pi * grid[:, 0])) ** 2)) <= 0.02


def test_kernel_median_bandwidth_and_singular_case():
    Z = np.array([[0.0], [1.0], [3.0]])
    assert median_bandwidth(Z) == 2.0
    dup = np.array([[0.0], [0.0], [1.0]])
    with pytest.raises(SingularSystemError):
        fit_kernel(dup, [1.0, 1.0, 2.0], ridge=0.0)
    with pytest.raises(ValueError):
        fit_kernel(Z, [1.0, 2.0, 3.0], bandwidth=0.0)


def test_kernel_permutation_invariance_with_duplicates():
    rng = np.random.default_rng(6)
    Z = rng.uniform(-1, 1, (20, 2))
    Z = np.vstack([Z, Z[:5]])
    y = Z[:, 0] - Z[:, 1] ** 2
    perm = rng.permutation(len(Z))
    test = rng.uniform(-1, 1, (50, 2))
    a = fit_kernel(Z, y, bandwidth=0.5).predict(test)
    b = fit_kernel(Z[perm], y[perm], bandwidth=0.5).predict(test)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_composed_examples():
    coarse = fit_piecewise_poly(LINE[:, None], 2 * LINE, PartitionSpec(1.0, 2, 1, 1), 10.0)
    model = ComposedModel(np.eye(6)[:, [0]], coarse)
    assert predict_composed(model, [0.3, 7, -4, 0, 1, 2]) == pytest.approx(0.6, abs=1e-10)
    rng = np.random.default_rng(7)
    Z = rng.uniform(-1, 1, (200, 2))
    pp = fit_piecewise_poly(Z, Z[:, 0] + Z[:, 1], PartitionSpec(1.0, 2, 2, 1), 5.0)
    ident = ComposedModel(np.eye(2), pp)
    x = rng.uniform(-1, 1, (10, 2))
    np.testing.assert_array_equal(ident.predict(x), pp.predict(x))
    with pytest.raises(ValueError):
        ComposedModel(np.eye(3)[:, :2], coarse)


def test_json_round_trip_is_exact():
    rng = np.random.default_rng(8)
    Z = rng.uniform(-1, 1, (300, 2))
    y = np.exp(Z[:, 0]) * np.sin(Z[:, 1])
    basis = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    for g_hat in (fit_stage_two(Z, y), fit_kernel(Z[:50], y[:50])):
        model = ComposedModel(basis, g_hat)
        back = ComposedModel.from_dict(json.loads(json.dumps(model.to_dict())))
        X = rng.uniform(-1, 1, (40, 5))
        np.testing.assert_array_equal(back.predict(X), model.predict(X))
        np.testing.assert_array_equal(back.basis, basis)
    km = KernelModel.from_dict(fit_kernel(Z[:5, :1], y[:5]).to_dict())
    assert km.centers.shape == (5, 1)
