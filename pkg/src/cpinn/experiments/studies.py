"""Table and figure data, refinement studies and norm comparisons."""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from ..grid import GridSpec, boundary_grid, initial_grid, tensor_grid
from ..loss import ProblemData, l_star
from ..norms import (
    discrete_h12_seminorm,
    discrete_h14_seminorm,
    discrete_h1214_norm,
    discrete_initial_l2,
    discrete_mixed,
    quad_h12_seminorm,
    quad_h14_seminorm,
    quad_h1214_norm,
    quad_initial_l2,
    quad_mixed,
    sample,
)
from ..polyinterp import (
    BesovClass,
    RateStudy,
    bump,
    build_interpolant,
    l2h1_error,
    mixed_norm_error,
    predicted_exponents,
    predicted_level_slope,
    rate_fit,
    sup_error,
)
from .problems import ManufacturedProblem, SumModel, manufactured
from .training import RunReport, TrainConfig, train

TABLE1_MESHES = (5, 10, 15, 20, 25, 30)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in row])


def write_json(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump([dict(zip(header, r)) for r in rows], fh, indent=1)


# -- PINN vs CPINN table ------------------------------------------------------

TABLE1_HEADER = ("N", "seed", "pinn_rel_err_pct", "cpinn_rel_err_pct", "pinn_final_loss", "cpinn_final_loss")


def _run_cell(args) -> tuple[int, int, str, RunReport]:
    problem_name, cfg = args
    _, report = train(manufactured(problem_name), cfg)
    return cfg.N, cfg.seed, cfg.loss, report


def reproduce_table1(
    problem: str,
    mesh_sizes: Sequence[int] = TABLE1_MESHES,
    seeds: Sequence[int] = (1, 2, 3),
    base: TrainConfig | None = None,
    threads: int = 1,
) -> tuple[list[tuple], list[RunReport]]:
    """Train both losses for every ``(N, seed)``; rows hold the per-seed values then one median row per ``N``.

    ``pinn_final_loss`` is the classical loss of the classically trained
    network and ``cpinn_final_loss`` the squared consistent loss of the
    consistently trained one.
    """
    base = base or TrainConfig()
    jobs = [(problem, base.replace(loss=kind, N=N, seed=s)) for N in mesh_sizes for s in seeds for kind in ("pinn", "cpinn")]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    reports = {(N, s, kind): rep for N, s, kind, rep in results}
    rows = []
    for N in mesh_sizes:
        per_seed = []
        for s in seeds:
            p, c = reports[(N, s, "pinn")], reports[(N, s, "cpinn")]
            row = (N, s, p.rel_l2_error, c.rel_l2_error, p.final_pinn_loss, c.final_cpinn_loss)
            per_seed.append(row)
            rows.append(row)
        rows.append((N, "median") + tuple(statistics.median(r[i] for r in per_seed) for i in range(2, 6)))
    return rows, [rep for _, _, _, rep in results]


# -- solution heatmaps -------------------------------------------------------

FIGURE1_HEADER = ("t", "x", "y", "exact", "pinn", "cpinn")


def figure1_data(nets: dict, problem: ManufacturedProblem, times: Sequence[float] = (0.0, 0.5, 1.0), res: int = 51) -> list[tuple]:
    """``res x res`` value grids (lattice including the edges) of the exact solution and each network."""
    g = np.linspace(0.0, 1.0, res)
    x = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    rows = []
    for t in times:
        tt = np.full(x.shape[0], float(t))
        cols = [problem.u(x, tt)] + [nets[k](x, tt) if k in nets else np.full(x.shape[0], np.nan) for k in ("pinn", "cpinn")]
        for i in range(x.shape[0]):
            rows.append((float(t), float(x[i, 0]), float(x[i, 1])) + tuple(float(c[i]) for c in cols))
    return rows


# -- interpolation and recovery rates ------------------------------------------


@dataclass(frozen=True)
class StudyFunction:
    fn: Callable
    grad: Callable
    smoothness: Callable[[str], BesovClass]


def _sine(x, t):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * np.sin(np.pi * t)


def _sine_grad(x, t):
    s = np.sin(np.pi * t)[:, None]
    return np.pi * s * np.column_stack(
        [np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]), np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])]
    )


SIGMA = 1.25


def _kink(x, t):
    return np.abs(x[:, 0] - 1 / 3) ** SIGMA * (1 + t)


def _kink_grad(x, t):
    u = x[:, 0] - 1 / 3
    g0 = SIGMA * np.abs(u) ** (SIGMA - 1) * np.sign(u) * (1 + t)
    return np.column_stack([g0, np.zeros_like(g0)])


def _integrability(norm: str) -> float:
    return math.inf if norm == "c" else 2.0


STUDY_FUNCTIONS = {
    # analytic: every smoothness order, measured in the target integrability
    "sine": StudyFunction(_sine, _sine_grad, lambda norm: BesovClass(8, 8, _integrability(norm), math.inf, _integrability(norm), math.inf)),
    # |x1 - 1/3|^sigma lies in B^{sigma + 1/p}_{p, inf} in space and is linear in time
    "kink": StudyFunction(
        _kink,
        _kink_grad,
        lambda norm: BesovClass(SIGMA + 1 / _integrability(norm), 8, _integrability(norm), math.inf, _integrability(norm), math.inf),
    ),
}

_NORM_IDS = {"c": "C", "l2l2": "Ltau", "l2h1": "L2H1"}


def interpolation_error(name: str, spec: GridSpec, norm: str, n_probe: int = 16, quad_res: int = 4) -> float:
    study = STUDY_FUNCTIONS[name]
    S = build_interpolant(study.fn, spec)
    if norm == "c":
        return sup_error(study.fn, S, n_probe)
    if norm == "l2l2":
        return mixed_norm_error(study.fn, S, 2, 2, quad_res)
    if norm == "l2h1":
        return l2h1_error(study.fn, study.grad, S, quad_res)
    raise ValueError(f"unknown norm {norm!r}")


def rate_study_interp(name: str, r: int = 2, rp: int = 2, norm: str = "c", kmin: int = 1, kmax: int = 5, d: int = 2) -> RateStudy:
    """Diagonal sweep ``k = k'`` of the interpolation error of a named study function."""
    if name not in STUDY_FUNCTIONS:
        raise ValueError(f"unknown function {name!r}; choose from {sorted(STUDY_FUNCTIONS)}")
    if norm not in _NORM_IDS:
        raise ValueError(f"unknown norm {norm!r}; choose from {sorted(_NORM_IDS)}")
    levels = list(range(kmin, kmax + 1))
    errors = [interpolation_error(name, GridSpec(d, k, k, r, rp), norm) for k in levels]
    cls = STUDY_FUNCTIONS[name].smoothness(norm)
    predicted = predicted_level_slope(cls, _NORM_IDS[norm], d, "diagonal", r=r, rp=rp)
    study = rate_fit(levels, errors, predicted)
    s_eff = min(cls.s, r)
    if norm == "l2h1" and not s_eff - d / cls.p + d / 2 > 1:
        study.notes.append("H1 hypothesis s - d/p + d/2 > 1 fails; slope reported without guarantee")
    return study


def sample_free_bump(k: int, kp: int, cls: BesovClass, d: int = 2, rp: int = 2, T: float = 1.0):
    """A level-``k`` cube bump whose time support lies strictly between two consecutive time nodes.

    The cube is the one with lower corner at ``(1/2, ..., 1/2)`` (for ``k >= 1``), so
    with ``r = 2`` no spatial node is interior to it.
    """
    side = 2.0**-k
    lo = np.full(d, 0.5 if k >= 1 else 0.0)
    m_hat = rp * 2**kp
    dt = T / m_hat
    j = m_hat // 2
    return bump((lo, lo + side), ((j - 1) * dt, j * dt), cls, d)


def bump_recovery_error(bmp, spec: GridSpec, n_probe: int = 24) -> float:
    """Sup error of the interpolant of ``bmp``, probed on the bump's support box."""
    S = build_interpolant(bmp, spec)
    box = (np.append(bmp.lo, bmp.t0), np.append(bmp.hi, bmp.t1))
    return sup_error(bmp, S, n_probe, box=box)


def rate_study_recovery(cls: BesovClass, norm_id: str = "C", kmin: int = 1, kmax: int = 5, kp: int = 2, d: int = 2, r: int = 2, rp: int = 2) -> dict[str, RateStudy]:
    """Spatial sweeps (``k`` varies, ``k'`` fixed) for a synthetic function and for sample-free bumps.

    ``function``: ``|x1 - 1/3|^sigma (1 + t)`` with ``sigma = s - 1/p``, which
    sits in the class; its error is sharp for ``C`` with ``p = inf``.
    ``bump``: a bump on a sample-free level-``k`` cell; its sup error equals
    its peak ``2^{-k(s - d/p)}``, the lower-bound mechanism.
    """
    if norm_id not in ("C", "Ltau"):
        raise ValueError("recovery sweeps support the C and Ltau norms")
    alpha, _ = predicted_exponents(cls, norm_id, d)
    levels = [(k, kp) for k in range(kmin, kmax + 1)]
    sigma = cls.s - (0.0 if cls.p == math.inf else 1.0 / cls.p)
    fn = lambda x, t: np.abs(x[:, 0] - 1 / 3) ** sigma * (1 + t)
    f_err = []
    for k, kk in levels:
        S = build_interpolant(fn, GridSpec(d, k, kk, r, rp))
        f_err.append(sup_error(fn, S, 16) if norm_id == "C" else mixed_norm_error(fn, S, 2, 2, 4))
    capped = predicted_level_slope(cls, norm_id, d, "space", r=r, rp=rp)
    out = {"function": rate_fit(levels, f_err, capped)}
    b_err = [bump_recovery_error(sample_free_bump(k, kp, cls, d, rp), GridSpec(d, k, kp, r, rp)) for k, _ in levels]
    out["bump"] = rate_fit(levels, b_err, -float(d * alpha) if norm_id == "C" else math.nan)
    return out


def recovery_rows(studies: dict[str, RateStudy]) -> list[tuple]:
    rows = []
    for kind, st in studies.items():
        for (k, kp), e in zip(st.levels, st.errors):
            rows.append((kind, k, kp, e, st.fitted_slope, st.predicted_slope))
    return rows


# -- discrete vs quadrature norms ---------------------------------------------


def _mixed_fn(x, t):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * np.cos(t)


def _trace_fn(x, t):
    return np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]) * np.exp(-t)


NORM_CHECKS = ("mixed", "h12", "h14", "h1214", "init")


def norm_check(which: str, kmin: int = 2, kmax: int = 5, d: int = 2, r: int = 2, rp: int = 2, fine_res: int = 256) -> list[tuple]:
    """Rows ``(k, k', discrete, quadrature, ratio)`` on the diagonal ``k = k'``.

    ``mixed`` and ``init`` compare with a fine fixed-resolution quadrature of
    the continuous norm; the boundary norms compare at matched resolution
    (one quadrature cell per boundary lattice interval).
    """
    if which not in NORM_CHECKS:
        raise ValueError(f"unknown norm {which!r}; choose from {NORM_CHECKS}")
    rows = []
    fine = None
    for k in range(kmin, kmax + 1):
        spec = GridSpec(d, k, k, r, rp)
        if which == "mixed":
            disc = discrete_mixed(sample(tensor_grid(spec), _mixed_fn), 2)
            fine = quad_mixed(_mixed_fn, 2, 2, fine_res, d) if fine is None else fine
            quad = fine
        elif which == "init":
            disc = discrete_initial_l2(sample(initial_grid(k, r, d), _mixed_fn))
            fine = quad_initial_l2(_mixed_fn, fine_res, d) if fine is None else fine
            quad = fine
        else:
            g = sample(boundary_grid(spec), _trace_fn)
            res = (spec.n_axis - 1)
            nt = spec.m_hat
            if which == "h12":
                disc, quad = discrete_h12_seminorm(g), quad_h12_seminorm(_trace_fn, res, d, spec.T, nt)
            elif which == "h14":
                disc, quad = discrete_h14_seminorm(g), quad_h14_seminorm(_trace_fn, res, d, spec.T, nt)
            else:
                disc, quad = discrete_h1214_norm(g), quad_h1214_norm(_trace_fn, res, d, spec.T, nt)
        rows.append((k, k, disc, quad, disc / quad if quad else math.nan))
    return rows


# -- loss vs error ------------------------------------------------------------


def l2h1_distance(model, exact, d: int = 2, T: float = 1.0, res: int = 24) -> float:
    """``||model - exact||`` in ``L^2(0,T; H^1)`` by the midpoint rule with ``res`` points per axis."""
    mid = (np.arange(res) + 0.5) / res
    x = np.stack(np.meshgrid(*([mid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    total = 0.0
    for t in mid * T:
        tt = np.full(x.shape[0], t)
        a, b = model.jet(x, tt), exact.jet(x, tt)
        total += float(np.sum((a.value - b.value) ** 2) + np.sum((a.grad_x - b.grad_x) ** 2))
    return math.sqrt(total * T / (res * x.shape[0]))


def error_vs_loss_study(models: Sequence, data: ProblemData, exact_u, quad_res: int = 24) -> tuple[list[tuple[float, float]], float]:
    """Per model ``(l_star, L^2 H^1 error)`` and the Spearman rank correlation of the two columns."""
    rows = [(l_star(m, data), l2h1_distance(m, exact_u, data.d, float(data.tensor.times[-1]), quad_res)) for m in models]
    if len(rows) < 2:
        return rows, math.nan
    rho = spearmanr([r[0] for r in rows], [r[1] for r in rows]).statistic
    return rows, float(rho)


def perturbation_family(problem: ManufacturedProblem, eps: Sequence[float] = (1e-3, 1e-2, 1e-1)):
    """``u + eps * bump`` models with a smooth bump in the middle of the space-time box."""
    b = bump(([0.25] * problem.d, [0.75] * problem.d), (0.25 * problem.T, 0.75 * problem.T), BesovClass(2, 2), problem.d)
    return [SumModel(problem.exact, b, e) for e in eps]
