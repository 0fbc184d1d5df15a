"""Piecewise Lagrange interpolation on Kuhn simplices times dyadic intervals."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.stats import qmc

from ..grid import GridSpec, SimplexCell, kuhn_permutations, locate_many

Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def monomial_exponents(d: int, r: int) -> np.ndarray:
    """Exponents of monomials of total degree ``< r`` in ``d`` variables."""
    exps = [e for e in itertools.product(range(r), repeat=d) if sum(e) < r]
    exps.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.array(exps, dtype=np.int64).reshape(-1, d)


def _monomials(y: np.ndarray, exps: np.ndarray) -> np.ndarray:
    return np.prod(y[:, None, :] ** exps[None, :, :], axis=2)


def _monomial_grad(y: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """``(n, n_mono, d)`` partial derivatives of the monomials."""
    n, d = y.shape
    out = np.empty((n, exps.shape[0], d))
    for a in range(d):
        e = exps.copy()
        coef = e[:, a].astype(float)
        e[:, a] = np.maximum(e[:, a] - 1, 0)
        out[:, :, a] = coef[None, :] * np.prod(y[:, None, :] ** e[None, :, :], axis=2)
    return out


@lru_cache(maxsize=None)
def reference_nodes(d: int, r: int, perm_index: int) -> np.ndarray:
    """Lattice nodes (step ``1/(r-1)``) of the closed reference Kuhn simplex, integer coordinates."""
    perm = kuhn_permutations(d)[perm_index]
    nodes = []
    for idx in itertools.product(range(r), repeat=d):
        ordered = [idx[a] for a in perm]
        if all(ordered[i] >= ordered[i + 1] for i in range(d - 1)):
            nodes.append(idx)
    return np.array(nodes, dtype=np.int64).reshape(-1, d)


@lru_cache(maxsize=None)
def reference_inverse_vandermonde(d: int, r: int, perm_index: int) -> np.ndarray:
    nodes = reference_nodes(d, r, perm_index) / (r - 1)
    exps = monomial_exponents(d, r)
    if nodes.shape[0] != exps.shape[0]:
        raise np.linalg.LinAlgError(
            f"{nodes.shape[0]} nodes but polynomial space has dimension {exps.shape[0]}"
        )
    V = _monomials(nodes, exps)
    if np.linalg.cond(V) > 1e10:
        raise np.linalg.LinAlgError("singular Vandermonde: nodes are not unisolvent")
    return np.linalg.inv(V)


def time_nodes(rp: int) -> np.ndarray:
    """Reference time nodes in ``(0, 1]``: ``j / r'`` for ``j = 1..r'``."""
    return np.arange(1, rp + 1) / rp


def lagrange_1d(s: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Values ``(n, len(nodes))`` of the 1D Lagrange basis at ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.ones((s.size, nodes.size))
    for j, nj in enumerate(nodes):
        for m, nm in enumerate(nodes):
            if m != j:
                out[:, j] *= (s - nm) / (nj - nm)
    return out


def cell_nodes(cell: SimplexCell, r: int, rp: int) -> tuple[np.ndarray, np.ndarray]:
    """Physical interpolation nodes of a cell: spatial lattice nodes of the closed simplex and its time nodes."""
    d = len(cell.perm)
    ref = reference_nodes(d, r, cell.perm_id - 1) / (r - 1)
    return cell.origin + cell.side * ref, cell.t0 + (cell.t1 - cell.t0) * time_nodes(rp)


@dataclass(frozen=True)
class LocalPolynomial:
    """``sum_ij c_ij phi_i(x) psi_j(t)`` on one cell; evaluation extends the polynomial past the cell."""

    cell: SimplexCell
    r: int
    rp: int
    samples: np.ndarray  # (n_space_nodes, r')

    def __call__(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        d = len(self.cell.perm)
        y = (x - self.cell.origin) / self.cell.side
        s = (t - self.cell.t0) / (self.cell.t1 - self.cell.t0)
        phi = _monomials(y, monomial_exponents(d, self.r)) @ reference_inverse_vandermonde(
            d, self.r, self.cell.perm_id - 1
        )
        psi = lagrange_1d(s, time_nodes(self.rp))
        return np.einsum("ni,ij,nj->n", phi, self.samples, psi)


def interpolate_cell(samples: np.ndarray, cell: SimplexCell, r: int, rp: int) -> LocalPolynomial:
    """Tensor Lagrange interpolant on one cell.

    ``samples[i, j]`` is the value at the ``i``-th spatial node and ``j``-th
    time node returned by :func:`cell_nodes`.
    """
    samples = np.asarray(samples, dtype=float)
    d = len(cell.perm)
    n_nodes = reference_nodes(d, r, cell.perm_id - 1).shape[0]
    if samples.shape != (n_nodes, rp):
        raise ValueError(f"expected samples of shape {(n_nodes, rp)}, got {samples.shape}")
    reference_inverse_vandermonde(d, r, cell.perm_id - 1)  # unisolvency check
    return LocalPolynomial(cell, r, rp, samples)


class Interpolant:
    """Global piecewise polynomial ``S*_{k,k'}(f)`` built from grid samples.

    Sample layout: ``values[cube, perm, node, interval, time_node]`` with cubes
    flattened lexicographically.  Evaluation uses the same half-open cell
    convention as :func:`cpinn.grid.locate_many`.
    """

    def __init__(self, spec: GridSpec, values: np.ndarray):
        self.spec = spec
        self.values = values
        self._exps = monomial_exponents(spec.d, spec.r)
        self._vinv = np.stack(
            [reference_inverse_vandermonde(spec.d, spec.r, p) for p in range(math.factorial(spec.d))]
        )
        self._tnodes = time_nodes(spec.rp)

    def _locate(self, x, t):
        spec = self.spec
        cube, q, p, y, s = locate_many(x, t, spec)
        flat = np.ravel_multi_index(tuple(cube.T), (2**spec.k,) * spec.d)
        return flat, q, p, y, s

    def _coeffs(self, flat, q, p):
        return self.values[flat, p, :, q, :]  # (n, n_nodes, r')

    def __call__(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        flat, q, p, y, s = self._locate(x, t)
        phi = np.einsum("nm,nmi->ni", _monomials(y, self._exps), self._vinv[p])
        psi = lagrange_1d(s, self._tnodes)
        return np.einsum("ni,nij,nj->n", phi, self._coeffs(flat, q, p), psi)

    def grad_x(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Cellwise spatial gradient (broken gradient across simplices)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        flat, q, p, y, s = self._locate(x, t)
        dphi = np.einsum("nma,nmi->nia", _monomial_grad(y, self._exps), self._vinv[p])
        psi = lagrange_1d(s, self._tnodes)
        side = 2.0 ** (-self.spec.k)
        return np.einsum("nia,nij,nj->na", dphi, self._coeffs(flat, q, p), psi) / side

    def evaluate_chunked(self, x: np.ndarray, t: np.ndarray, chunk: int = 200_000) -> np.ndarray:
        out = np.empty(x.shape[0])
        for a in range(0, x.shape[0], chunk):
            out[a : a + chunk] = self(x[a : a + chunk], t[a : a + chunk])
        return out


def _node_lattice_indices(spec: GridSpec):
    """Integer lattice coordinates of every (cube, perm, node) spatial node."""
    d, r = spec.d, spec.r
    cubes = np.array(list(itertools.product(range(2**spec.k), repeat=d)), dtype=np.int64).reshape(-1, d)
    n_perm = math.factorial(d)
    ref = [reference_nodes(d, r, p) for p in range(n_perm)]
    n_nodes = ref[0].shape[0]
    idx = np.empty((cubes.shape[0], n_perm, n_nodes, d), dtype=np.int64)
    for p in range(n_perm):
        idx[:, p] = cubes[:, None, :] * (r - 1) + ref[p][None, :, :]
    return idx


def build_interpolant(f: Sampler, spec: GridSpec) -> Interpolant:
    """Sample ``f`` once at the distinct grid nodes and assemble ``S*_{k,k'}(f)``.

    ``f(x, t)`` takes ``x`` of shape ``(n, d)`` and ``t`` of shape ``(n,)``.
    """
    d = spec.d
    node_idx = _node_lattice_indices(spec)  # (C, P, M, d)
    n_axis = spec.n_axis
    flat_node = np.ravel_multi_index(tuple(np.moveaxis(node_idx, -1, 0)), (n_axis,) * d)
    used = np.unique(flat_node)
    xs = np.stack(np.unravel_index(used, (n_axis,) * d), axis=1) / (n_axis - 1)
    times = spec.times()
    X = np.tile(xs, (times.size, 1))
    Tt = np.repeat(times, xs.shape[0])
    vals = np.asarray(f(X, Tt), dtype=float).reshape(times.size, xs.shape[0])
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("sample provider returned non-finite values")
    pos = np.searchsorted(used, flat_node)  # (C, P, M)
    tv = vals.reshape(spec.n_intervals, spec.rp, xs.shape[0])  # interval, local time node, space
    out = tv[:, :, pos]  # (Q, r', C, P, M)
    return Interpolant(spec, np.ascontiguousarray(np.transpose(out, (2, 3, 4, 0, 1))))


def _probe_points(n_probe: int, d: int, T: float, box=None) -> tuple[np.ndarray, np.ndarray]:
    """Nested deterministic probe set: unscrambled Halton prefix plus the box corners."""
    lo = np.zeros(d + 1)
    hi = np.append(np.ones(d), T)
    if box is not None:
        lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    n = n_probe ** (d + 1)
    u = qmc.Halton(d=d + 1, scramble=False).random(n)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d + 1)))
    u = np.vstack([corners, u])
    pts = lo + u * (hi - lo)
    return pts[:, :d], pts[:, d]


def sup_error(f: Sampler, S: Callable, n_probe: int, d: int | None = None, T: float | None = None, box=None) -> float:
    """``max |f - S|`` over a nested probe set of ``n_probe^(d+1)`` points (plus corners).

    Probe sets for larger ``n_probe`` contain those for smaller ones, so the
    estimate never decreases as ``n_probe`` grows.  ``box = (lo, hi)`` restricts
    probing to a sub-box of ``[0,1]^d x [0,T]``.
    """
    spec = getattr(S, "spec", None)
    d = spec.d if d is None else d
    T = spec.T if T is None else T
    x, t = _probe_points(n_probe, d, T, box)
    best = 0.0
    chunk = 200_000
    for a in range(0, x.shape[0], chunk):
        xs, ts = x[a : a + chunk], t[a : a + chunk]
        best = max(best, float(np.max(np.abs(f(xs, ts) - S(xs, ts)))))
    return best


def _midpoints(n: int, length: float = 1.0) -> np.ndarray:
    return (np.arange(n) + 0.5) * (length / n)


def _lp(values: np.ndarray, p: float, weight: float, axis: int) -> np.ndarray:
    if math.isinf(p):
        return np.max(np.abs(values), axis=axis)
    return (weight * np.sum(np.abs(values) ** p, axis=axis)) ** (1.0 / p)


def mixed_lebesgue_norm(fn: Sampler, tau: float, tau_t: float, nx: int, nt: int, d: int, T: float) -> float:
    """Midpoint-rule ``L^{tau_t}(0,T; L^tau([0,1]^d))`` norm with ``nx^d x nt`` points."""
    xs = np.stack(np.meshgrid(*([_midpoints(nx)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    ts = _midpoints(nt, T)
    inner = np.empty(nt)
    for j, tj in enumerate(ts):
        inner[j] = _lp(fn(xs, np.full(xs.shape[0], tj)), tau, 1.0 / xs.shape[0], axis=0)
    return float(_lp(inner, tau_t, T / nt, axis=0))


def mixed_norm_error(f: Sampler, S: Interpolant, tau: float, tau_t: float, quad_res: int = 8) -> float:
    """``||f - S||_{L^tau'(0,T;L^tau)}`` by composite midpoint rule, ``quad_res`` points per cell axis."""
    spec = S.spec
    return mixed_lebesgue_norm(
        lambda x, t: f(x, t) - S(x, t),
        tau,
        tau_t,
        nx=quad_res * 2**spec.k,
        nt=quad_res * 2**spec.kp,
        d=spec.d,
        T=spec.T,
    )


def l2h1_error(f: Sampler, grad_f: Callable, S: Interpolant, quad_res: int = 8) -> float:
    """Broken ``L^2(0,T;H^1)`` error: ``L^2`` of the value plus cellwise spatial gradient."""
    spec = S.spec
    nx, nt, d = quad_res * 2**spec.k, quad_res * 2**spec.kp, spec.d
    xs = np.stack(np.meshgrid(*([_midpoints(nx)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    total = 0.0
    for tj in _midpoints(nt, spec.T):
        tt = np.full(xs.shape[0], tj)
        e = f(xs, tt) - S(xs, tt)
        ge = grad_f(xs, tt) - S.grad_x(xs, tt)
        total += np.sum(e**2) + np.sum(ge**2)
    return float(np.sqrt(total * spec.T / (nt * xs.shape[0])))
