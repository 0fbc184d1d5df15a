import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpinn.grid import GridSpec, kuhn_decompose, tensor_grid
from cpinn.polyinterp import (
    build_interpolant,
    cell_nodes,
    interpolate_cell,
    l2h1_error,
    mixed_norm_error,
    rate_fit,
    sup_error,
)
from cpinn.polyinterp.interpolant import monomial_exponents, reference_nodes


def smooth(x, t):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * np.sin(np.pi * t)


@pytest.mark.parametrize("d,r", [(1, 2), (1, 4), (2, 2), (2, 3), (3, 2), (3, 3)])
def test_node_count_matches_dimension(d, r):
    for p in range(math.factorial(d)):
        assert reference_nodes(d, r, p).shape[0] == monomial_exponents(d, r).shape[0] == math.comb(r - 1 + d, d)


def _cell_samples(cell, fn, r, rp):
    xs, ts = cell_nodes(cell, r, rp)
    X = np.repeat(xs, ts.size, axis=0)
    T = np.tile(ts, xs.shape[0])
    return fn(X, T).reshape(xs.shape[0], ts.size)


def test_cell_constant():
    cell = kuhn_decompose((1, 0), 1, 1, 1)[1]
    poly = interpolate_cell(np.full((3, 2), 2.5), cell, 2, 2)
    rng = np.random.default_rng(0)
    assert np.allclose(poly(rng.random((20, 2)), rng.random(20)), 2.5)


def test_cell_linear_reproduction():
    cell = kuhn_decompose((0, 0), 0, 0, 0)[0]
    fn = lambda x, t: x[:, 0] + t
    poly = interpolate_cell(_cell_samples(cell, fn, 2, 2), cell, 2, 2)
    rng = np.random.default_rng(1)
    x, t = rng.random((50, 2)), rng.random(50)
    assert np.allclose(poly(x, t), fn(x, t), atol=1e-12)


def test_cell_bilinear_error_dense_oracle():
    cell = kuhn_decompose((0, 0), 0, 0, 0)[0]  # y0 >= y1
    fn = lambda x, t: x[:, 0] * x[:, 1]
    poly = interpolate_cell(_cell_samples(cell, fn, 2, 2), cell, 2, 2)
    g = np.linspace(0, 1, 100)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    X = X[X[:, 0] >= X[:, 1]]
    err = np.max(np.abs(poly(X, np.full(len(X), 0.5)) - fn(X, 0)))
    # linear interpolant through (0,0),(1,0),(1,1) is x2; max |x1 x2 - x2| over the triangle
    oracle = np.max(np.abs(X[:, 1] - X[:, 0] * X[:, 1]))
    assert err == pytest.approx(oracle, rel=1e-12)
    assert err == pytest.approx(0.25, abs=1e-3)


def test_cell_rejects_bad_shape():
    cell = kuhn_decompose((0, 0), 0, 0, 0)[0]
    with pytest.raises(ValueError):
        interpolate_cell(np.zeros((4, 2)), cell, 2, 2)


def test_constant_everywhere():
    spec = GridSpec(d=2, k=2, kp=1)
    S = build_interpolant(lambda x, t: np.ones(len(x)), spec)
    rng = np.random.default_rng(2)
    assert np.allclose(S(rng.random((500, 2)), rng.random(500)), 1.0)
    assert sup_error(lambda x, t: np.ones(len(x)), S, 6) == pytest.approx(0, abs=1e-13)


poly_specs = st.builds(GridSpec, d=st.integers(1, 3), k=st.integers(0, 2), kp=st.integers(0, 2), r=st.integers(2, 3), rp=st.integers(2, 3))


@settings(max_examples=25, deadline=None)
@given(poly_specs, st.integers(0, 10_000))
def test_polynomial_reproduction(spec, seed):
    rng = np.random.default_rng(seed)
    from cpinn.polyinterp.interpolant import monomial_exponents as mono

    exps = mono(spec.d, spec.r)
    coef = rng.standard_normal((exps.shape[0], spec.rp))

    def P(x, t):
        m = np.prod(x[:, None, :] ** exps[None], axis=2)
        tp = t[:, None] ** np.arange(spec.rp)[None]
        return np.einsum("nm,mj,nj->n", m, coef, tp)

    S = build_interpolant(P, spec)
    x, t = rng.random((1000, spec.d)), rng.random(1000) * spec.T
    ref = P(x, t)
    assert np.max(np.abs(S(x, t) - ref)) <= 1e-9 * max(1.0, np.max(np.abs(ref)))


@settings(max_examples=15, deadline=None)
@given(poly_specs)
def test_nodes_reproduce_samples(spec):
    f = lambda x, t: np.cos(3 * x.sum(axis=1)) + t**3
    S = build_interpolant(f, spec)
    pts = tensor_grid(spec).points
    vals = f(pts[:, : spec.d], pts[:, spec.d])
    assert np.allclose(S(pts[:, : spec.d], pts[:, spec.d]), vals, rtol=1e-10, atol=1e-12)


def test_lebesgue_ratio_stable():
    rng = np.random.default_rng(3)
    ratios = []
    for k in (1, 2, 3):
        spec = GridSpec(d=2, k=k, kp=k)
        worst = 0.0
        for _ in range(5):
            table = {}

            def noise(x, t):
                key = np.round(np.column_stack([x, t]), 10)
                out = np.empty(len(x))
                for i, kk in enumerate(map(tuple, key)):
                    out[i] = table.setdefault(kk, rng.uniform(-1, 1))
                return out

            S = build_interpolant(noise, spec)
            top = max(abs(v) for v in table.values())
            probe = sup_error(lambda x, t: np.zeros(len(x)), S, 12)
            worst = max(worst, probe / top)
        ratios.append(worst)
    assert max(ratios) <= 1.1 * min(ratios) + 0.5
    assert max(ratios) < 5


def test_sup_error_x_squared_dense_oracle():
    spec = GridSpec(d=1, k=0, kp=0)
    f = lambda x, t: x[:, 0] ** 2
    S = build_interpolant(f, spec)
    # interpolant in x is the chord x; |x^2 - x| peaks at 1/4
    est = sup_error(f, S, 1000)
    xs = np.linspace(0, 1, 1_000_001)
    assert est <= np.max(np.abs(xs**2 - xs)) + 1e-12
    assert est == pytest.approx(0.25, rel=1e-4)


def test_sup_error_monotone_in_probe():
    spec = GridSpec(d=2, k=1, kp=1)
    S = build_interpolant(smooth, spec)
    vals = [sup_error(smooth, S, n) for n in (2, 4, 8, 16)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_mixed_norm_of_constant_offset():
    spec = GridSpec(d=2, k=1, kp=1, T=2.0)
    S = build_interpolant(lambda x, t: np.zeros(len(x)), spec)
    err = mixed_norm_error(lambda x, t: np.full(len(x), 3.0), S, 2, 2)
    assert err == pytest.approx(3.0 * math.sqrt(2.0), rel=1e-12)
    assert mixed_norm_error(lambda x, t: np.full(len(x), 3.0), S, math.inf, math.inf) == pytest.approx(3.0)


def test_mixed_norm_analytic_d1():
    spec = GridSpec(d=1, k=0, kp=0)
    S = build_interpolant(lambda x, t: np.zeros(len(x)), spec)
    f = lambda x, t: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * t)
    assert mixed_norm_error(f, S, 2, 2, quad_res=200) == pytest.approx(0.5, abs=1e-3)


def test_mixed_norm_refinement_stable():
    spec = GridSpec(d=2, k=2, kp=2)
    S = build_interpolant(smooth, spec)
    a = mixed_norm_error(smooth, S, 2, 2, quad_res=8)
    b = mixed_norm_error(smooth, S, 2, 2, quad_res=16)
    assert abs(a - b) <= 0.01 * b


def test_rates_smooth_function():
    sups, l2s = [], []
    for k in range(1, 6):
        spec = GridSpec(d=2, k=k, kp=k)
        S = build_interpolant(smooth, spec)
        sups.append(sup_error(smooth, S, 16))
        l2s.append(mixed_norm_error(smooth, S, 2, 2, quad_res=4))
    assert rate_fit(range(1, 6), sups).fitted_slope == pytest.approx(-2, abs=0.3)
    assert rate_fit(range(1, 6), l2s).fitted_slope == pytest.approx(-2, abs=0.3)


def test_broken_h1_rate():
    f = lambda x, t: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * (1 + t)
    grad = lambda x, t: np.pi * (1 + t)[:, None] * np.column_stack(
        [np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]), np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])]
    )
    errs = [l2h1_error(f, grad, build_interpolant(f, GridSpec(2, k, k)), quad_res=4) for k in range(1, 5)]
    assert rate_fit(range(1, 5), errs).fitted_slope == pytest.approx(-1, abs=0.3)
