"""Smoothness classes, predicted recovery exponents, modulus estimates and bump fixtures."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from ..jet import Jet

NORM_IDS = ("C", "Ltau", "L2H1", "L2Hm1", "trace", "initial")


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(v).limit_denominator(10**9)


def _inv(p) -> Fraction:
    """``1/p`` as a fraction, with ``1/inf = 0``."""
    if p == math.inf:
        return Fraction(0)
    return 1 / _frac(p)


def _plus(v: Fraction) -> Fraction:
    return max(v, Fraction(0))


@dataclass(frozen=True)
class BesovClass:
    """Mixed smoothness ``B^theta_{p'q'}(0,T; B^s_{pq})``: ``s`` in space, ``theta`` in time."""

    s: float
    theta: float = 1.0
    p: float = math.inf
    q: float = math.inf
    pp: float = math.inf
    qp: float = math.inf

    def __post_init__(self):
        if self.s <= 0 or self.theta <= 0:
            raise ValueError("smoothness orders must be positive")
        for name in ("p", "q", "pp", "qp"):
            v = getattr(self, name)
            if not (v == math.inf or v >= 1):
                raise ValueError(f"{name}={v} must lie in [1, inf]")

    def capped(self, r: int, rp: int) -> "BesovClass":
        """The class with smoothness clipped at the polynomial orders an order-``(r, r')`` scheme can see."""
        return BesovClass(min(self.s, r), min(self.theta, rp), self.p, self.q, self.pp, self.qp)


def predicted_exponents(
    cls: BesovClass,
    norm_id: str,
    d: int,
    tau: float = 2,
    tau_t: float = 2,
) -> tuple[Fraction, Fraction]:
    """Recovery exponents ``(alpha, beta)`` with error ``~ m_tilde^-alpha * m_hat^-beta``.

    For ``trace`` the spatial exponent refers to the boundary count ``m_bar``;
    for ``initial`` there is no time exponent and ``beta = 0``.
    """
    if norm_id not in NORM_IDS:
        raise ValueError(f"unknown norm id {norm_id!r}; expected one of {NORM_IDS}")
    s, theta = _frac(cls.s), _frac(cls.theta)
    ip, ipp = _inv(cls.p), _inv(cls.pp)
    if s <= d * ip:
        raise ValueError(f"class needs s > d/p, got s={cls.s}, d/p={float(d * ip)}")
    if norm_id != "initial" and theta <= ipp:
        raise ValueError(f"class needs theta > 1/p', got theta={cls.theta}, 1/p'={float(ipp)}")
    half = Fraction(1, 2)
    if norm_id == "C":
        return s / d - ip, theta - ipp
    if norm_id == "Ltau":
        return s / d - _plus(ip - _inv(tau)), theta - _plus(ipp - _inv(tau_t))
    if norm_id == "L2H1":
        return (s - 1) / d - (ip - half), theta - (ipp - half)
    if norm_id == "L2Hm1":
        inv_delta = half + Fraction(1, d)
        return s / d - _plus(ip - inv_delta), theta - (ipp - half)
    if norm_id == "trace":
        if d < 2:
            raise ValueError("boundary exponent needs d >= 2")
        return (s - 1) / (d - 1) - Fraction(d, d - 1) * (ip - half), theta - (ipp - half)
    return s / d - (ip - half), Fraction(0)


def predicted_level_slope(
    cls: BesovClass,
    norm_id: str,
    d: int,
    sweep: str = "diagonal",
    r: int | None = None,
    rp: int | None = None,
    tau: float = 2,
    tau_t: float = 2,
) -> float:
    """Predicted slope of ``log2(error)`` per unit increase of the refinement level.

    ``sweep`` is ``space`` (vary k), ``time`` (vary k') or ``diagonal`` (k = k').
    On the diagonal the slowest component dominates the observed error.
    """
    if r is not None and rp is not None:
        cls = cls.capped(r, rp)
    alpha, beta = predicted_exponents(cls, norm_id, d, tau, tau_t)
    dim = d - 1 if norm_id == "trace" else d
    space = -float(dim * alpha)
    time = -float(beta)
    if sweep == "space":
        return space
    if sweep == "time":
        return time
    if sweep == "diagonal":
        return max(space, time) if norm_id != "initial" else space
    raise ValueError(f"unknown sweep {sweep!r}")


def _difference(f: Callable, x: np.ndarray, t: np.ndarray, h: np.ndarray, ht: float, r: int, rp: int) -> np.ndarray:
    out = np.zeros(x.shape[0])
    for i in range(r + 1):
        ci = (-1) ** (r - i) * math.comb(r, i)
        for j in range(rp + 1):
            cj = (-1) ** (rp - j) * math.comb(rp, j)
            out += ci * cj * f(x + i * h, t + j * ht)
    return out


def _shift_set(b: float, floor: float, dirs: np.ndarray) -> list[np.ndarray]:
    shifts = []
    j = 0
    while b * 2.0**-j >= floor:
        shifts.extend(b * 2.0**-j * u for u in dirs)
        j += 1
    return shifts


def _directions(n: int, dim: int) -> np.ndarray:
    """Deterministic directions in ``[-1, 1]^dim``: the signed unit extremes then a Halton fill."""
    extremes = np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))
    fill = 2.0 * qmc.Halton(d=dim, scramble=False).random(max(n, 1)) - 1.0
    return np.vstack([extremes, fill[:n]])


def _lp_norm(v: np.ndarray, p: float, cell: float, axis: int) -> np.ndarray:
    if p == math.inf:
        return np.max(np.abs(v), axis=axis)
    return (cell * np.sum(np.abs(v) ** p, axis=axis)) ** (1.0 / p)


def modulus_of_smoothness(
    f: Callable,
    r: int,
    rp: int,
    b: float,
    bp: float,
    p: float = 2,
    pp: float = 2,
    n_shift: int = 8,
    n_probe: int = 16,
    d: int = 1,
    T: float = 1.0,
) -> float:
    """Estimate ``sup ||Δ^r_h Δ^{r'}_{h'} f||_{L^{p'}_t L^p_x}`` over ``|h|_inf <= b``, ``|h'| <= b'``.

    The shift set is ``{b 2^-j u}`` over deterministic directions ``u`` and all
    ``j`` with ``b 2^-j`` above a fixed floor of a quarter probe spacing, so the
    set for ``2b`` contains the set for ``b`` and the estimate is nondecreasing
    in ``b``.  Each difference is integrated by a midpoint rule with
    ``n_probe`` points per axis over the sub-box where the stencil stays in
    ``[0,1]^d x [0,T]``.  ``r' = 0`` switches the time difference off.
    """
    if b <= 0 or (rp > 0 and bp <= 0):
        raise ValueError("shift radii must be positive")
    space_dirs = _directions(n_shift, d)
    space_shifts = _shift_set(b, 1.0 / (4 * n_probe), space_dirs)
    if rp > 0:
        time_shifts = [float(h[0]) for h in _shift_set(bp, T / (4 * n_probe), _directions(n_shift, 1))]
    else:
        time_shifts = [0.0]
    mid = (np.arange(n_probe) + 0.5) / n_probe
    best = 0.0
    for h in space_shifts:
        lo = np.maximum(0.0, -r * h)
        hi = np.minimum(1.0, 1.0 - r * h)
        if np.any(hi <= lo):
            continue
        axes = [lo[a] + (hi[a] - lo[a]) * mid for a in range(d)]
        x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        vol = float(np.prod(hi - lo)) / x.shape[0]
        for ht in time_shifts:
            t_lo, t_hi = max(0.0, -rp * ht), min(T, T - rp * ht)
            if t_hi <= t_lo:
                continue
            ts = t_lo + (t_hi - t_lo) * mid
            X = np.tile(x, (n_probe, 1))
            Tt = np.repeat(ts, x.shape[0])
            diff = _difference(f, X, Tt, h, ht, r, rp).reshape(n_probe, x.shape[0])
            inner = _lp_norm(diff, p, vol, axis=1)
            best = max(best, float(_lp_norm(inner, pp, (t_hi - t_lo) / n_probe, axis=0)))
    return best


def _profile(z: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``phi(z) = exp(1 - 1/(1 - (2z-1)^{2n}))`` on ``(0,1)``, zero outside, with two derivatives."""
    z = np.asarray(z, dtype=float)
    inside = (z > 0) & (z < 1)
    w = np.where(inside, 2 * z - 1, 0.0)
    q = w ** (2 * n)
    one_q = 1 - q
    phi = np.where(inside, np.exp(1 - 1 / np.where(inside, one_q, 1.0)), 0.0)
    dq = 4 * n * w ** (2 * n - 1)
    ddq = 8 * n * (2 * n - 1) * w ** (2 * n - 2)
    safe = np.where(inside, one_q, 1.0)
    g1 = -dq / safe**2
    g2 = -ddq / safe**2 - 2 * dq**2 / safe**3
    return phi, np.where(inside, g1 * phi, 0.0), np.where(inside, (g2 + g1**2) * phi, 0.0)


@dataclass(frozen=True)
class Bump:
    """Scaled tensor bump supported on the box ``[lo, hi] x [t0, t1]``."""

    lo: np.ndarray
    hi: np.ndarray
    t0: float
    t1: float
    amplitude: float
    order: int = 2

    @property
    def sup_value(self) -> float:
        return self.amplitude

    def _factors(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        ell = self.hi - self.lo
        px, dpx, ddpx = _profile((x - self.lo) / ell, self.order)
        lt = self.t1 - self.t0
        pt, dpt, _ = _profile((t - self.t0) / lt, self.order)
        return px, dpx / ell, ddpx / ell**2, pt, dpt / lt

    def __call__(self, x, t) -> np.ndarray:
        px, _, _, pt, _ = self._factors(x, t)
        return self.amplitude * np.prod(px, axis=1) * pt

    def jet(self, x, t) -> Jet:
        px, dpx, ddpx, pt, dpt = self._factors(x, t)
        n, d = px.shape
        value = np.prod(px, axis=1)
        grad = np.empty((n, d))
        hess = np.empty((n, d, d))
        for a in range(d):
            others = np.prod(np.delete(px, a, axis=1), axis=1)
            grad[:, a] = dpx[:, a] * others
            hess[:, a, a] = ddpx[:, a] * others
            for c in range(a + 1, d):
                rest = np.prod(np.delete(px, [a, c], axis=1), axis=1)
                hess[:, a, c] = hess[:, c, a] = dpx[:, a] * dpx[:, c] * rest
        A = self.amplitude
        return Jet(
            A * value * pt,
            A * grad * pt[:, None],
            A * value * dpt,
            A * np.trace(hess, axis1=1, axis2=2) * pt,
            A * hess * pt[:, None, None],
        )


def bump(
    cube: tuple[Sequence[float], Sequence[float]],
    interval: tuple[float, float],
    cls: BesovClass,
    d: int | None = None,
    order: int = 2,
) -> Bump:
    """Bump on ``cube x interval`` with sup ``l_I^{s-d/p} l_I'^{theta-1/p'}``.

    ``cube = (lo, hi)`` must be a cube (equal side lengths).  The profile
    exponent ``2*order`` keeps the tensor product above 1/2 on the middle half
    of the box for ``d <= 3`` with the default ``order=2``.
    """
    lo = np.atleast_1d(np.asarray(cube[0], dtype=float))
    hi = np.atleast_1d(np.asarray(cube[1], dtype=float))
    d = lo.size if d is None else d
    sides = hi - lo
    t0, t1 = float(interval[0]), float(interval[1])
    if np.any(sides <= 0) or t1 <= t0:
        raise ValueError("degenerate bump support")
    if not np.allclose(sides, sides[0], rtol=1e-12):
        raise ValueError("bump support must be a cube in space")
    ell, ell_t = float(sides[0]), t1 - t0
    amp = ell ** (cls.s - d * float(_inv(cls.p))) * ell_t ** (cls.theta - float(_inv(cls.pp)))
    return Bump(lo, hi, t0, t1, amp, order)
