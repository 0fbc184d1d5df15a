"""Classical and consistent collocation losses for the heat equation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import BoundaryGrid, InitialGrid, TensorGrid, uniform_lattice
from .jet import Jet
from .network import MlpNetwork, value_and_grad
from .norms import discrete_mixed, pair_laplacian


@dataclass(eq=False)
class ProblemData:
    """Source, boundary and initial samples aligned with their grids."""

    tensor: TensorGrid
    boundary: BoundaryGrid
    initial: InitialGrid
    f: np.ndarray
    g: np.ndarray
    u0: np.ndarray
    exact_u: Callable | None = None
    _L12: np.ndarray | None = field(default=None, repr=False)
    _L14: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for name, grid in (("f", self.tensor), ("g", self.boundary), ("u0", self.initial)):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if v.size != len(grid):
                raise ValueError(f"{name}: {v.size} samples for {len(grid)} sites")
            setattr(self, name, v)

    @property
    def d(self) -> int:
        return self.tensor.d

    @property
    def m_tilde(self) -> int:
        return self.tensor.m_tilde

    def sites(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        pts = {"interior": self.tensor, "boundary": self.boundary, "initial": self.initial}[which].points
        return pts[:, : self.d], pts[:, self.d]

    @property
    def h12_matrix(self) -> np.ndarray:
        if self._L12 is None:
            self._L12 = pair_laplacian(self.boundary.space, self.d)
        return self._L12

    @property
    def h14_matrix(self) -> np.ndarray:
        if self._L14 is None:
            self._L14 = pair_laplacian(self.boundary.times, 1.5)
        return self._L14


def problem_data(problem, tensor: TensorGrid, boundary: BoundaryGrid, initial: InitialGrid) -> ProblemData:
    d = tensor.d
    ti, bi, ii = tensor.points, boundary.points, initial.points
    return ProblemData(
        tensor,
        boundary,
        initial,
        problem.f(ti[:, :d], ti[:, d]),
        problem.g(bi[:, :d], bi[:, d]),
        problem.u0(ii[:, :d]),
        problem.u,
    )


def lattice_data(problem, N: int) -> ProblemData:
    """Data on the ``N x N`` experiment lattice."""
    return problem_data(problem, *uniform_lattice(N, problem.d, problem.T))


@dataclass
class LossBreakdown:
    """Per-term loss values.

    For the consistent loss ``boundary_l2`` is the mean square mismatch before
    its factor 2, and ``boundary_h12`` / ``boundary_h14`` are squared seminorms.
    """

    kind: str
    interior: float
    boundary_l2: float
    boundary_h12: float
    boundary_h14: float
    initial: float
    total: float
    log_factor: float = 1.0
    gamma: float = 2.0


def default_gamma(d: int, m_tilde: int) -> float:
    if d == 2:
        if m_tilde < 3:
            raise ValueError("the d=2 exponent needs m_tilde >= 3")
        return 1.0 + 1.0 / math.log(m_tilde)
    if d >= 3:
        return 2.0 * d / (d + 2)
    raise ValueError("d must be >= 2")


# Each term returns (value, d value / d residual) for residual arrays shaped (time levels, sites).

def _mean_sq(r: np.ndarray):
    return float(np.mean(r**2)), 2.0 * r / r.size


def _mixed_sq(r: np.ndarray, gamma: float):
    m_hat, m_tilde = r.shape
    a = np.abs(r)
    A = np.mean(a**gamma, axis=1)
    val = float(np.mean(A ** (2.0 / gamma)))
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = np.where(A > 0, A ** (2.0 / gamma - 1.0), 0.0)
    grad = (2.0 / (m_hat * m_tilde)) * outer[:, None] * a ** (gamma - 1.0) * np.sign(r)
    return val, grad


def _pair_sq(e: np.ndarray, L: np.ndarray, axis_time: bool):
    m_hat, m_bar = e.shape
    if axis_time:
        scale = 2.0 / (m_hat**2 * m_bar)
        Le = L @ e
    else:
        scale = 2.0 / (m_hat * m_bar**2)
        Le = e @ L
    return max(float(scale * np.sum(e * Le)), 0.0), 2.0 * scale * Le


def _interior_term(res: np.ndarray, kind: str, gamma: float, shape):
    if kind == "pinn":
        return _mean_sq(res)
    return _mixed_sq(res.reshape(shape), gamma)


def _check_kind(kind):
    if kind not in ("pinn", "cpinn"):
        raise ValueError(f"unknown loss kind {kind!r}")


def _boundary_initial_terms(vb, vi, data: ProblemData, kind: str):
    """Terms and gradients from boundary values ``vb`` and initial values ``vi``."""
    eb = (vb - data.g).reshape(data.boundary.times.size, -1)
    ei = vi - data.u0
    bl2, gb = _mean_sq(eb)
    ini, gi = _mean_sq(ei)
    if kind == "pinn":
        return (bl2, 0.0, 0.0, ini), gb.ravel(), gi
    h12, g12 = _pair_sq(eb, data.h12_matrix, axis_time=False)
    h14, g14 = _pair_sq(eb, data.h14_matrix, axis_time=True)
    return (bl2, h12, h14, ini), (2.0 * gb + g12 + g14).ravel(), gi


def _assemble(kind, interior, terms, gamma) -> LossBreakdown:
    bl2, h12, h14, ini = terms
    weight = 1.0 if kind == "pinn" else 2.0
    total = interior + weight * bl2 + h12 + h14 + ini
    return LossBreakdown(kind, interior, bl2, h12, h14, ini, total, 1.0, gamma)


def _model_values(model, data: ProblemData):
    xi, ti = data.sites("interior")
    jet = model.jet(xi, ti, full_hessian=False) if isinstance(model, MlpNetwork) else model.jet(xi, ti)
    xb, tb = data.sites("boundary")
    x0, t0 = data.sites("initial")
    res = jet.heat_residual(data.f)
    if not np.all(np.isfinite(res)):
        raise FloatingPointError("non-finite residual")
    return res, model(xb, tb), model(x0, t0)


def evaluate(model, data: ProblemData, kind: str = "pinn", gamma: float | None = None) -> LossBreakdown:
    """Loss of any model exposing ``model(x, t)`` and ``model.jet(x, t)``."""
    _check_kind(kind)
    gamma = 2.0 if gamma is None else gamma
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    res, vb, vi = _model_values(model, data)
    interior, _ = _interior_term(res, kind, gamma, (data.tensor.times.size, -1))
    terms, _, _ = _boundary_initial_terms(vb, vi, data, kind)
    return _assemble(kind, interior, terms, gamma)


def pinn_loss(model, data: ProblemData) -> LossBreakdown:
    """Mean-square residual + boundary mismatch + initial mismatch, unit weights."""
    return evaluate(model, data, "pinn")


def cpinn_loss_sq(model, data: ProblemData, gamma: float | None = None) -> LossBreakdown:
    """Squared discrete ``L^2 L^gamma`` residual + squared boundary trace terms + squared initial ``L^2``.

    ``gamma`` defaults to :func:`default_gamma`.
    """
    if gamma is None:
        gamma = default_gamma(data.d, data.m_tilde)
    return evaluate(model, data, "cpinn", gamma)


def loss_and_grad(net: MlpNetwork, data: ProblemData, kind: str, gamma: float | None = None) -> tuple[LossBreakdown, np.ndarray]:
    """Loss breakdown and exact gradient with respect to the network parameters."""
    _check_kind(kind)
    if gamma is None:
        gamma = 2.0 if kind == "pinn" else default_gamma(data.d, data.m_tilde)
    shape = (data.tensor.times.size, -1)
    xi, ti = data.sites("interior")
    xb, tb = data.sites("boundary")
    x0, t0 = data.sites("initial")
    nb = xb.shape[0]
    out = {}

    def interior_fn(jet: Jet):
        res = jet.heat_residual(data.f)
        val, gr = _interior_term(res, kind, gamma, shape)
        gr = gr.ravel()
        out["interior"] = val
        return val, Jet(np.zeros_like(res), None, -gr, gr, None)

    def edge_fn(jet: Jet):
        terms, gb, gi = _boundary_initial_terms(jet.value[:nb], jet.value[nb:], data, kind)
        out["terms"] = terms
        weight = 1.0 if kind == "pinn" else 2.0
        val = weight * terms[0] + terms[1] + terms[2] + terms[3]
        return val, Jet(np.concatenate([gb, gi]), None, None, None, None)

    _, g_int = value_and_grad(net, xi, ti, interior_fn, "laplacian")
    _, g_edge = value_and_grad(net, np.vstack([xb, x0]), np.concatenate([tb, t0]), edge_fn, "value")
    return _assemble(kind, out["interior"], out["terms"], gamma), g_int + g_edge


def l_star(
    model,
    data: ProblemData,
    d: int | None = None,
    gamma: float | None = None,
    include_initial: bool = True,
    log_prefactor: bool = True,
) -> float:
    """Unsquared consistent loss.

    ``(1 + ln m_tilde) ||f + Δv - v_t||*_{L^2 L^gamma} + ||g - v||*_{H^{1/2,1/4}} + ||v - u0||*_{L^2}``
    for ``d = 2``; for ``d >= 3`` the prefactor is 1 and ``gamma = 2d/(d+2)``.
    """
    from .norms import discrete_h1214_norm, discrete_initial_l2

    d = data.d if d is None else d
    if d < 2:
        raise ValueError("l_star needs d >= 2")
    if gamma is None:
        gamma = default_gamma(d, data.m_tilde)
    factor = 1.0
    if d == 2:
        if data.m_tilde < 3:
            raise ValueError("the d=2 log factor needs m_tilde >= 3")
        if log_prefactor:
            factor = 1.0 + math.log(data.m_tilde)
    res, vb, vi = _model_values(model, data)
    levels = res.reshape(data.tensor.times.size, -1)
    eb = (data.g - vb).reshape(data.boundary.times.size, -1)
    total = factor * discrete_mixed(levels, gamma)
    total += discrete_h1214_norm(eb, d, data.boundary.space, data.boundary.times)
    if include_initial:
        total += discrete_initial_l2(vi - data.u0)
    return float(total)
