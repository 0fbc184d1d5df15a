"""Space-time data sites and dyadic/Kuhn partitions of ``[0,1]^d x [0,T]``.

Three site families are produced from a :class:`GridSpec`:

* the interior tensor grid (one ``r^d`` spatial block per dyadic cube, so the
  spatial count is exactly ``(r 2^k)^d``; nodes on shared cube faces repeat
  once per cube),
* the lateral boundary grid (distinct spatial lattice points on the boundary
  of the unit cube),
* the initial grid at ``t = 0``.

Temporal nodes are ``t_j = j T / m_hat`` for ``j = 1..m_hat``.  Each dyadic
time interval ``(a, b]`` then holds exactly ``r'`` of them.

Cells follow the convention ``(a, b]`` per axis with the bottom face closed,
which is the same as picking the lexicographically smallest closed cell that
contains a point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec",
    "TensorGrid",
    "BoundaryGrid",
    "InitialGrid",
    "SimplexCell",
    "tensor_grid",
    "boundary_grid",
    "initial_grid",
    "uniform_lattice",
    "kuhn_decompose",
    "kuhn_permutations",
    "locate",
    "locate_many",
]

_SNAP = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Refinement parameters of a space-time grid.

    Attributes:
        d: spatial dimension.
        k: dyadic level in space (cube side ``2^-k``).
        kp: dyadic level in time (interval length ``T 2^-kp``).
        r: points per cube edge, polynomial order in space (degree ``< r``).
        rp: points per time interval, polynomial order in time.
        T: final time.
    """

    d: int
    k: int
    kp: int
    r: int = 2
    rp: int = 2
    T: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"spatial dimension must be >= 1, got d={self.d}")
        if self.r < 2 or self.rp < 2:
            raise ValueError(f"orders must satisfy r, r' >= 2, got r={self.r}, r'={self.rp}")
        if self.k < 0 or self.kp < 0:
            raise ValueError("refinement levels must be non-negative")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got T={self.T}")

    @property
    def h(self) -> float:
        """Spatial lattice spacing ``2^-k / (r-1)``."""
        return 2.0 ** (-self.k) / (self.r - 1)

    @property
    def hp(self) -> float:
        """Nominal temporal spacing ``2^-k' / (r'-1)`` (time nodes use ``T/m_hat``)."""
        return 2.0 ** (-self.kp) / (self.rp - 1)

    @property
    def m_tilde(self) -> int:
        return (self.r * 2**self.k) ** self.d

    @property
    def m_hat(self) -> int:
        return self.rp * 2**self.kp

    @property
    def m(self) -> int:
        return self.m_tilde * self.m_hat

    @property
    def m_bar_nominal(self) -> int:
        """Face-wise boundary count ``2d (r 2^k)^(d-1)`` (shared edges counted per face)."""
        return 2 * self.d * (self.r * 2**self.k) ** (self.d - 1)

    @property
    def n_axis(self) -> int:
        """Distinct lattice points per spatial axis."""
        return (self.r - 1) * 2**self.k + 1

    @property
    def n_cubes(self) -> int:
        return 2 ** (self.k * self.d)

    @property
    def n_intervals(self) -> int:
        return 2**self.kp

    def times(self) -> np.ndarray:
        j = np.arange(1, self.m_hat + 1)
        return j * (self.T / self.m_hat)


def _as_points(space: np.ndarray, times: np.ndarray) -> np.ndarray:
    # time-major: all spatial sites for t_1, then t_2, ...
    n_s, d = space.shape
    pts = np.empty((times.size * n_s, d + 1))
    pts[:, :d] = np.tile(space, (times.size, 1))
    pts[:, d] = np.repeat(times, n_s)
    return pts


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Interior sites ``space x times`` in time-major order."""

    space: np.ndarray
    times: np.ndarray
    spec: GridSpec | None = None

    @property
    def d(self) -> int:
        return self.space.shape[1]

    @property
    def m_tilde(self) -> int:
        return self.space.shape[0]

    @property
    def m_hat(self) -> int:
        return self.times.size

    @property
    def points(self) -> np.ndarray:
        return _as_points(self.space, self.times)

    def __len__(self):
        return self.m_tilde * self.m_hat


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Lateral boundary sites, one copy of each physical point per time level."""

    space: np.ndarray
    times: np.ndarray
    m_bar_nominal: int | None = None
    spec: GridSpec | None = None

    @property
    def d(self) -> int:
        return self.space.shape[1]

    @property
    def m_bar(self) -> int:
        return self.space.shape[0]

    @property
    def m_hat(self) -> int:
        return self.times.size

    @property
    def points(self) -> np.ndarray:
        return _as_points(self.space, self.times)

    def __len__(self):
        return self.m_bar * self.m_hat


@dataclass(frozen=True, eq=False)
class InitialGrid:
    space: np.ndarray
    spec: GridSpec | None = None

    @property
    def d(self) -> int:
        return self.space.shape[1]

    @property
    def m_tilde(self) -> int:
        return self.space.shape[0]

    @property
    def points(self) -> np.ndarray:
        return _as_points(self.space, np.zeros(1))

    def __len__(self):
        return self.m_tilde


def _cube_blocks(d: int, k: int, r: int) -> np.ndarray:
    """Spatial multiset: the ``r^d`` local lattice nodes of every dyadic cube, sorted lexicographically."""
    n_c = 2**k
    h = 1.0 / (n_c * (r - 1))
    local = np.arange(r)
    per_axis = (np.arange(n_c)[:, None] * (r - 1) + local[None, :]).ravel()  # lattice indices with repeats
    idx = np.array(list(itertools.product(np.sort(per_axis), repeat=d)), dtype=np.int64).reshape(-1, d)
    return idx * h


def tensor_grid(spec: GridSpec) -> TensorGrid:
    """Interior tensor grid with ``(r 2^k)^d`` spatial and ``r' 2^k'`` temporal sites."""
    space = _cube_blocks(spec.d, spec.k, spec.r)
    return TensorGrid(space=space, times=spec.times(), spec=spec)


def _lattice(n_axis: int, d: int) -> np.ndarray:
    idx = np.array(list(itertools.product(range(n_axis), repeat=d)), dtype=np.int64).reshape(-1, d)
    return idx / (n_axis - 1)


def _on_boundary(space: np.ndarray) -> np.ndarray:
    return np.any((np.abs(space) < _SNAP) | (np.abs(space - 1.0) < _SNAP), axis=1)


def boundary_grid(spec: GridSpec) -> BoundaryGrid:
    """Distinct lattice points on the boundary of ``[0,1]^d`` at every time level.

    ``m_bar_nominal`` keeps the face-wise count ``2d (r 2^k)^(d-1)``.
    """
    lat = _lattice(spec.n_axis, spec.d)
    space = lat[_on_boundary(lat)]
    return BoundaryGrid(space=space, times=spec.times(), m_bar_nominal=spec.m_bar_nominal, spec=spec)


def initial_grid(k: int, r: int, d: int) -> InitialGrid:
    if r < 2:
        raise ValueError(f"order must satisfy r >= 2, got r={r}")
    if d < 1:
        raise ValueError(f"spatial dimension must be >= 1, got d={d}")
    return InitialGrid(space=_cube_blocks(d, k, r))


def uniform_lattice(N: int, d: int = 2, T: float = 1.0) -> tuple[TensorGrid, BoundaryGrid, InitialGrid]:
    """Experiment grids for an ``N x ... x N`` mesh.

    Interior: the ``N^d`` lattice on ``[0,1]^d`` (boundary included) at ``t_j = jT/N``.
    Boundary: the ``N^d - (N-2)^d`` lattice points on the boundary, same times.
    Initial: the ``N^d`` lattice at ``t = 0``.
    """
    if N < 2:
        raise ValueError(f"mesh size must be >= 2, got N={N}")
    lat = _lattice(N, d)
    times = np.arange(1, N + 1) * (T / N)
    interior = TensorGrid(space=lat, times=times)
    bnd_space = lat[_on_boundary(lat)]
    boundary = BoundaryGrid(space=bnd_space, times=times, m_bar_nominal=2 * d * N ** (d - 1))
    return interior, boundary, InitialGrid(space=lat.copy())


@lru_cache(maxsize=None)
def kuhn_permutations(d: int) -> tuple[tuple[int, ...], ...]:
    """All axis orderings in lexicographic order; permutation id ``i`` is entry ``i-1``."""
    return tuple(itertools.permutations(range(d)))


@dataclass(frozen=True)
class SimplexCell:
    """One Kuhn simplex of a dyadic cube crossed with a dyadic time interval.

    ``perm`` lists axes in decreasing order of local coordinate: the simplex
    is ``{y : y[perm[0]] >= y[perm[1]] >= ... >= y[perm[-1]]}`` in the cube's
    unit coordinates.
    """

    cube: tuple[int, ...]
    interval: int
    perm_id: int
    perm: tuple[int, ...]
    origin: np.ndarray = field(repr=False)
    side: float = field(repr=False)
    t0: float = field(repr=False)
    t1: float = field(repr=False)

    @property
    def vertices(self) -> np.ndarray:
        d = len(self.perm)
        v = np.tile(self.origin, (d + 1, 1)).astype(float)
        for j, axis in enumerate(self.perm, start=1):
            v[j:, axis] += self.side
        return v

    @property
    def matrix(self) -> np.ndarray:
        """Columns ``v_j - v_0``; maps barycentric-free coordinates to physical offsets."""
        v = self.vertices
        return (v[1:] - v[0]).T

    @property
    def volume(self) -> float:
        d = len(self.perm)
        return abs(np.linalg.det(self.matrix)) / math.factorial(d)

    def barycentric(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lam = np.linalg.solve(self.matrix, x - self.vertices[0])
        return np.concatenate([[1.0 - lam.sum()], lam])

    def to_reference(self, x: np.ndarray, t: float) -> tuple[np.ndarray, float]:
        """Affine map to the reference Kuhn simplex of ``[0,1]^d`` and reference interval ``[0,1]``."""
        y = (np.asarray(x, dtype=float) - self.origin) / self.side
        s = (t - self.t0) / (self.t1 - self.t0)
        return y, s

    def contains(self, x: np.ndarray, t: float, tol: float = 1e-12) -> bool:
        lam = self.barycentric(x)
        return bool(np.all(lam >= -tol) and self.t0 - tol <= t <= self.t1 + tol)


def kuhn_decompose(cube: tuple[int, ...], interval: int, k: int, kp: int, T: float = 1.0) -> list[SimplexCell]:
    """The ``d!`` Kuhn simplices of dyadic cube ``cube`` (level ``k``) times interval ``interval`` (level ``k'``)."""
    cube = tuple(int(c) for c in cube)
    d = len(cube)
    side = 2.0 ** (-k)
    if any(c < 0 or c >= 2**k for c in cube) or not 0 <= interval < 2**kp:
        raise ValueError(f"cube {cube} / interval {interval} out of range for k={k}, k'={kp}")
    origin = np.array(cube, dtype=float) * side
    dt = T * 2.0 ** (-kp)
    return [
        SimplexCell(cube, interval, pid, perm, origin, side, interval * dt, (interval + 1) * dt)
        for pid, perm in enumerate(kuhn_permutations(d), start=1)
    ]


def _cell_index(u: np.ndarray, n: int) -> np.ndarray:
    # (a, b] cells with the bottom face closed; u is the coordinate in units of cell length
    idx = np.ceil(u - _SNAP * np.maximum(1.0, np.abs(u))).astype(np.int64) - 1
    return np.clip(idx, 0, n - 1)


def _perm_ids(y: np.ndarray) -> np.ndarray:
    """0-based Kuhn permutation index; ties go to the lexicographically smallest permutation."""
    n, d = y.shape
    if d == 1:
        return np.zeros(n, dtype=np.int64)
    order = np.argsort(-np.round(y, 11), axis=1, kind="stable")
    weights = d ** np.arange(d - 1, -1, -1)
    codes = order @ weights
    table = {int(np.dot(p, weights)): i for i, p in enumerate(kuhn_permutations(d))}
    return np.array([table[c] for c in codes.tolist()], dtype=np.int64)


def locate_many(x: np.ndarray, t: np.ndarray, spec: GridSpec):
    """Vectorised point location.

    Returns ``(cube_idx (n,d), interval (n,), perm_index (n,) 0-based, y (n,d), s (n,))``
    where ``y`` and ``s`` are coordinates in the unit cube / unit interval of the cell.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if x.shape[1] != spec.d:
        raise ValueError(f"expected points with {spec.d} spatial coordinates, got {x.shape[1]}")
    tol = 1e-12
    if np.any(x < -tol) or np.any(x > 1 + tol) or np.any(t < -tol * spec.T) or np.any(t > spec.T * (1 + tol)):
        raise ValueError("point outside [0,1]^d x [0,T]")
    nc = 2**spec.k
    nq = 2**spec.kp
    u = x * nc
    cube = _cell_index(u, nc)
    y = np.clip(u - cube, 0.0, 1.0)
    v = t / spec.T * nq
    q = _cell_index(v, nq)
    s = np.clip(v - q, 0.0, 1.0)
    return cube, q, _perm_ids(y), y, s


def locate(point: tuple[np.ndarray, float], spec: GridSpec) -> SimplexCell:
    """Cell containing ``(x, t)``; on shared facets the lexicographically smallest cell wins."""
    x, t = point
    cube, q, p, _, _ = locate_many(np.asarray(x, dtype=float)[None, :], np.array([t]), spec)
    cells = kuhn_decompose(tuple(cube[0]), int(q[0]), spec.k, spec.kp, spec.T)
    return cells[int(p[0])]
