import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpinn.grid import GridSpec
from cpinn.polyinterp import (
    BesovClass,
    bump,
    build_interpolant,
    modulus_of_smoothness,
    predicted_exponents,
    predicted_level_slope,
    sup_error,
)


def test_modulus_vanishes_on_polynomials():
    f = lambda x, t: 1 + 2 * x[:, 0] - x[:, 1] + t * (3 - x[:, 0])
    assert modulus_of_smoothness(f, 2, 2, 0.3, 0.3, d=2, n_probe=8) < 1e-12


def test_modulus_kink_linear_in_b():
    f = lambda x, t: np.abs(x[:, 0] - 0.5)
    vals = [modulus_of_smoothness(f, 2, 0, b, 0, p=2, pp=2, n_probe=400, d=1) for b in (0.02, 0.04, 0.08)]
    assert vals[0] > 0
    # second differences of |x - 1/2| are 2|h| - |...| on a window of width 2h: L2 norm ~ b^{3/2}, L1 norm ~ b^2
    l1 = [modulus_of_smoothness(f, 2, 0, b, 0, p=1, pp=1, n_probe=400, d=1) for b in (0.02, 0.04, 0.08)]
    assert np.polyfit(np.log([0.02, 0.04, 0.08]), np.log(l1), 1)[0] == pytest.approx(2.0, abs=0.15)
    sup = [modulus_of_smoothness(f, 2, 0, b, 0, p=math.inf, pp=math.inf, n_probe=400, d=1) for b in (0.02, 0.04, 0.08)]
    # the sup is 2b, attained only where x + b hits the kink; probes are 1/400 apart
    for b, v in zip((0.02, 0.04, 0.08), sup):
        assert 2 * b - 2 / 400 <= v <= 2 * b + 1e-12
    assert vals[0] < vals[1] < vals[2]


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 0.2))
def test_modulus_monotone_under_doubling(b):
    f = lambda x, t: np.abs(x[:, 0] - 1 / 3) ** 1.5 * np.cos(t) + np.sin(5 * t) * x[:, 1]
    a = modulus_of_smoothness(f, 2, 1, b, b, d=2, n_probe=8, n_shift=4)
    c = modulus_of_smoothness(f, 2, 1, 2 * b, 2 * b, d=2, n_probe=8, n_shift=4)
    assert c >= a


CLS = BesovClass(s=1.5, theta=1.25, p=math.inf, pp=math.inf)


def test_bump_support_and_peak():
    bmp = bump(([0.25, 0.5], [0.5, 0.75]), (0.25, 0.5), CLS)
    amp = 0.25**1.5 * 0.25**1.25
    assert bmp.sup_value == pytest.approx(amp)
    assert bmp(np.array([[0.375, 0.625]]), 0.375)[0] == pytest.approx(amp)
    outside = np.array([[0.1, 0.6], [0.3, 0.8], [0.3, 0.6], [0.25, 0.6]])
    assert np.all(bmp(outside, np.array([0.3, 0.3, 0.6, 0.3])) == 0)


def test_bump_half_on_middle():
    bmp = bump(([0, 0], [1, 1]), (0, 1), BesovClass(s=2, theta=2, p=2, pp=2))
    g = np.linspace(0.25, 0.75, 21)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    for t in g:
        assert np.all(bmp(X, np.full(len(X), t)) >= 0.5 * bmp.sup_value)


def test_bump_sup_dense_probe():
    bmp = bump(([0.5, 0.0], [1.0, 0.5]), (0.0, 0.5), CLS)
    g = np.linspace(0, 1, 201)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    best = max(np.max(bmp(X, np.full(len(X), t))) for t in np.linspace(0, 1, 101))
    assert best == pytest.approx(bmp.sup_value, rel=0.01)


def test_bump_jet_matches_finite_differences():
    bmp = bump(([0.2, 0.1], [0.7, 0.6]), (0.1, 0.9), CLS)

    rng = np.random.default_rng(0)
    x = 0.25 + 0.4 * rng.random((20, 2))
    t = 0.2 + 0.6 * rng.random(20)
    j = bmp.jet(x, t)
    h = 1e-5
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (bmp(x + e, t) - bmp(x - e, t)) / (2 * h)
        assert np.allclose(j.grad_x[:, a], fd, rtol=1e-5, atol=1e-9)
        fd2 = (bmp(x + e, t) - 2 * bmp(x, t) + bmp(x - e, t)) / h**2
        assert np.allclose(j.hess_x[:, a, a], fd2, rtol=1e-3, atol=1e-6)
    fdt = (bmp(x, t + h) - bmp(x, t - h)) / (2 * h)
    assert np.allclose(j.dt, fdt, rtol=1e-5, atol=1e-9)
    assert np.allclose(j.laplacian, np.trace(j.hess_x, axis1=1, axis2=2))


def test_bump_rejects_degenerate():
    with pytest.raises(ValueError):
        bump(([0, 0], [0, 0.5]), (0, 1), CLS)
    with pytest.raises(ValueError):
        bump(([0, 0], [0.5, 0.5]), (0.5, 0.5), CLS)


def test_bump_invisible_to_interpolant():
    spec = GridSpec(d=2, k=2, kp=2, rp=2)
    dt = spec.T / spec.m_hat
    # spatial dyadic cube has grid nodes only on its boundary; time support sits between two nodes
    bmp = bump(([0.25, 0.5], [0.5, 0.75]), (2 * dt, 3 * dt), CLS)
    S = build_interpolant(bmp, spec)
    rng = np.random.default_rng(4)
    x = 0.25 + 0.25 * rng.random((300, 2))
    x[:, 1] += 0.25
    assert np.all(S(x, 2 * dt + dt * rng.random(300)) == 0)
    err = sup_error(bmp, S, 40, box=([0.25, 0.5, 2 * dt], [0.5, 0.75, 3 * dt]))
    assert err == pytest.approx(bmp.sup_value, rel=0.01)


def test_exponents_worked_example():
    assert predicted_exponents(BesovClass(s=2, theta=1, p=math.inf, pp=math.inf), "C", 2) == (1, 1)


def test_exponents_clamp():
    a, _ = predicted_exponents(BesovClass(s=2, theta=1, p=2, pp=2), "Ltau", 2, tau=2)
    assert a == 1


def test_exponents_boundary_example():
    a, _ = predicted_exponents(BesovClass(s=2, theta=1, p=2, pp=2), "trace", 2)
    assert a == 1


def test_exponents_exact_rationals():
    a, b = predicted_exponents(BesovClass(s=2.5, theta=1.5, p=4, pp=3), "L2H1", 3)
    assert isinstance(a, Fraction)
    assert a == Fraction(3, 2) / 3 - (Fraction(1, 4) - Fraction(1, 2))
    assert b == Fraction(3, 2) - (Fraction(1, 3) - Fraction(1, 2))
    a, _ = predicted_exponents(BesovClass(s=4, theta=1, p=1, pp=2), "L2Hm1", 3)
    assert a == Fraction(4, 3) - (1 - Fraction(5, 6))
    a, b = predicted_exponents(BesovClass(s=3, theta=1, p=2, pp=2), "initial", 2)
    assert (a, b) == (Fraction(3, 2), 0)


def test_exponents_hypothesis_violation():
    with pytest.raises(ValueError):
        predicted_exponents(BesovClass(s=1, theta=1, p=2, pp=2), "C", 2)
    with pytest.raises(ValueError):
        predicted_exponents(BesovClass(s=3, theta=0.5, p=2, pp=2), "C", 2)
    with pytest.raises(ValueError):
        predicted_exponents(BesovClass(s=3, theta=2), "nope", 2)


def test_level_slopes():
    cls = BesovClass(s=4, theta=3)
    assert predicted_level_slope(cls, "C", 2, "diagonal", r=2, rp=2) == -2
    assert predicted_level_slope(BesovClass(s=1.25, theta=2), "C", 2, "space") == -1.25
    assert predicted_level_slope(BesovClass(s=3, theta=0.75), "C", 2, "diagonal") == -0.75
