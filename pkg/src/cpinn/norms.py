"""Discrete norms computed from point values, and quadrature counterparts used as oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .grid import BoundaryGrid, InitialGrid, TensorGrid
from .polyinterp.interpolant import mixed_lebesgue_norm

Grid = Union[TensorGrid, BoundaryGrid, InitialGrid]


@dataclass(frozen=True, eq=False)
class SiteValues:
    """Values aligned with a grid's point ordering (time-major, then space)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != len(self.grid):
            raise ValueError(f"{v.size} values for a grid of {len(self.grid)} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("site values must be finite")
        object.__setattr__(self, "values", v)

    def by_time(self) -> np.ndarray:
        """Values reshaped to ``(time levels, spatial sites)``."""
        if isinstance(self.grid, InitialGrid):
            return self.values[None, :]
        return self.values.reshape(self.grid.times.size, -1)


def sample(grid: Grid, fn: Callable) -> SiteValues:
    """Evaluate ``fn(x, t)`` at every site of ``grid``."""
    pts = grid.points
    d = grid.d
    return SiteValues(grid, fn(pts[:, :d], pts[:, d]))


def _levels(v) -> np.ndarray:
    if isinstance(v, SiteValues):
        return v.by_time()
    arr = np.asarray(v, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def mixed_from_levels(levels: np.ndarray, tau: float) -> float:
    """``[mean_j (mean_i |v_ij|^tau)^{2/tau}]^{1/2}`` for ``levels`` of shape ``(m_hat, m_tilde)``."""
    a = np.abs(levels)
    if math.isinf(tau):
        inner = np.max(a, axis=1) ** 2
    else:
        inner = np.mean(a**tau, axis=1) ** (2.0 / tau)
    return float(np.sqrt(np.mean(inner)))


def discrete_mixed(v, tau: float = 2) -> float:
    """Discrete ``L^2(0,T; L^tau)`` norm over a tensor grid.

    ``v`` is :class:`SiteValues` or an array of shape ``(m_hat, m_tilde)``.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    return mixed_from_levels(_levels(v), tau)


def discrete_boundary_l2(g) -> float:
    """Root mean square of the boundary values."""
    return float(np.sqrt(np.mean(_levels(g) ** 2)))


def discrete_initial_l2(u0) -> float:
    """Root mean square of the initial values."""
    return float(np.sqrt(np.mean(_levels(u0) ** 2)))


def pair_laplacian(points: np.ndarray, power: float) -> np.ndarray:
    """``D - K`` for the kernel ``K_ij = |p_i - p_j|^-power`` (``i != j``) and ``D = diag(K 1)``.

    Then ``sum_{i != j} K_ij (g_i - g_j)^2 = 2 g^T (D - K) g``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    dist = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
    off = ~np.eye(pts.shape[0], dtype=bool)
    if np.any(dist[off] == 0):
        raise ValueError("coincident points with distinct indices")
    K = np.zeros_like(dist)
    K[off] = dist[off] ** (-power)
    return np.diag(K.sum(axis=1)) - K


def h12_squared(levels: np.ndarray, space: np.ndarray, d: int, L: np.ndarray | None = None) -> float:
    m_hat, m_bar = levels.shape
    if L is None:
        L = pair_laplacian(space, d)
    # the form ignores per-level constants; centering avoids cancellation
    levels = levels - levels.mean(axis=1, keepdims=True)
    return float(2.0 * np.einsum("li,ij,lj->", levels, L, levels) / (m_hat * m_bar**2))


def h14_squared(levels: np.ndarray, times: np.ndarray, Lt: np.ndarray | None = None) -> float:
    m_hat, m_bar = levels.shape
    if Lt is None:
        Lt = pair_laplacian(times, 1.5)
    levels = levels - levels.mean(axis=0, keepdims=True)
    return float(2.0 * np.einsum("ji,jl,li->", levels, Lt, levels) / (m_hat**2 * m_bar))


def _boundary_parts(g, space=None, times=None):
    if isinstance(g, SiteValues):
        return g.by_time(), g.grid.space, g.grid.times
    levels = _levels(g)
    if space is None or times is None:
        raise ValueError("raw boundary arrays need explicit space and times")
    return levels, np.asarray(space, dtype=float), np.asarray(times, dtype=float)


def discrete_h12_seminorm(g, d: int | None = None, space=None, times=None) -> float:
    """Discrete ``L^2(0,T; H^{1/2}(boundary))`` seminorm from same-time pairs.

    Pairs ``i != j`` are summed in both orders with weight ``|x_i - x_j|^-d``.
    """
    levels, space, times = _boundary_parts(g, space, times)
    d = space.shape[1] if d is None else d
    return math.sqrt(max(h12_squared(levels, space, d), 0.0))


def discrete_h14_seminorm(g, space=None, times=None) -> float:
    """Discrete ``H^{1/4}(0,T; L^2(boundary))`` seminorm from same-site pairs with weight ``|t_j - t_l|^{-3/2}``."""
    levels, space, times = _boundary_parts(g, space, times)
    return math.sqrt(max(h14_squared(levels, times), 0.0))


def discrete_h1214_norm(g, d: int | None = None, space=None, times=None) -> float:
    """``2 * boundary L^2 + H^{1/2} seminorm + H^{1/4} seminorm``."""
    return (
        2.0 * discrete_boundary_l2(g)
        + discrete_h12_seminorm(g, d, space, times)
        + discrete_h14_seminorm(g, space, times)
    )


def quad_mixed(fn: Callable, tau: float, tau_t: float, res: int, d: int = 2, T: float = 1.0) -> float:
    """Midpoint-rule ``L^{tau'}(0,T; L^tau([0,1]^d))`` norm with ``res`` points per axis."""
    return mixed_lebesgue_norm(fn, tau, tau_t, res, res, d, T)


def boundary_quadrature(res: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes and weights on the faces of ``[0,1]^d`` (``res^(d-1)`` per face)."""
    if d == 1:
        return np.array([[0.0], [1.0]]), np.ones(2)
    mid = (np.arange(res) + 0.5) / res
    face = np.array(list(itertools.product(mid, repeat=d - 1)))
    pts = []
    for axis in range(d):
        for side in (0.0, 1.0):
            p = np.insert(face, axis, side, axis=1)
            pts.append(p)
    pts = np.vstack(pts)
    return pts, np.full(pts.shape[0], res ** -(d - 1.0))


def _time_midpoints(nt: int, T: float) -> np.ndarray:
    return (np.arange(nt) + 0.5) * (T / nt)


def quad_boundary_l2(g_fn: Callable, res: int, d: int = 2, T: float = 1.0, nt: int | None = None) -> float:
    nt = res if nt is None else nt
    pts, w = boundary_quadrature(res, d)
    total = 0.0
    for t in _time_midpoints(nt, T):
        total += np.sum(w * g_fn(pts, np.full(pts.shape[0], t)) ** 2)
    return math.sqrt(total * T / nt)


def quad_h12_seminorm(g_fn: Callable, res: int, d: int = 2, T: float = 1.0, nt: int | None = None) -> float:
    """Quadrature of ``int_0^T int int |g(x,t) - g(y,t)|^2 / |x-y|^d dx dy dt`` over boundary pairs.

    Pairs closer than one quadrature cell ``1/res`` are dropped.
    """
    nt = res if nt is None else nt
    pts, w = boundary_quadrature(res, d)
    dist = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
    keep = dist >= (1.0 / res) * (1 - 1e-9)
    kern = np.where(keep, w[:, None] * w[None, :] / np.where(keep, dist, 1.0) ** d, 0.0)
    total = 0.0
    for t in _time_midpoints(nt, T):
        g = g_fn(pts, np.full(pts.shape[0], t))
        total += np.sum(kern * (g[:, None] - g[None, :]) ** 2)
    return math.sqrt(total * T / nt)


def quad_h14_seminorm(g_fn: Callable, res: int, d: int = 2, T: float = 1.0, nt: int | None = None) -> float:
    """Quadrature of ``int_boundary int int |g(x,t) - g(x,s)|^2 / |t-s|^{3/2} dt ds dx``.

    Time pairs closer than one cell ``T/nt`` are dropped.
    """
    nt = res if nt is None else nt
    pts, w = boundary_quadrature(res, d)
    ts = _time_midpoints(nt, T)
    gap = np.abs(ts[:, None] - ts[None, :])
    keep = gap >= (T / nt) * (1 - 1e-9)
    kern = np.where(keep, (T / nt) ** 2 / np.where(keep, gap, 1.0) ** 1.5, 0.0)
    G = np.stack([g_fn(pts, np.full(pts.shape[0], t)) for t in ts])  # (nt, P)
    diff2 = (G[:, None, :] - G[None, :, :]) ** 2
    return math.sqrt(float(np.einsum("jl,jlp,p->", kern, diff2, w)))


def quad_h1214_norm(g_fn: Callable, res: int, d: int = 2, T: float = 1.0, nt: int | None = None) -> float:
    """Quadrature counterpart of :func:`discrete_h1214_norm` with the same weighting."""
    return (
        2.0 * quad_boundary_l2(g_fn, res, d, T, nt)
        + quad_h12_seminorm(g_fn, res, d, T, nt)
        + quad_h14_seminorm(g_fn, res, d, T, nt)
    )


def quad_initial_l2(u0_fn: Callable, res: int, d: int = 2) -> float:
    mid = (np.arange(res) + 0.5) / res
    x = np.stack(np.meshgrid(*([mid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return float(np.sqrt(np.mean(u0_fn(x, np.zeros(x.shape[0])) ** 2)))
