"""Full-batch momentum gradient descent for collocation losses."""

from __future__ import annotations

import ctypes
import ctypes.util
import dataclasses
import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..loss import ProblemData, cpinn_loss_sq, default_gamma, lattice_data, loss_and_grad, pinn_loss
from ..network import MlpNetwork, init
from .problems import ManufacturedProblem


@functools.cache
def _keep_freed_memory() -> None:
    """Ask glibc to keep freed blocks instead of returning them to the OS.

    Every iteration allocates and frees the same few MB-sized tangent arrays;
    by default each one is a fresh mmap and pays page faults on first touch,
    which roughly doubles the step time.  No-op off glibc.
    """
    name = ctypes.util.find_library("c")
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError, TypeError):
        return
    m_trim_threshold, m_top_pad, m_mmap_threshold = -1, -2, -3
    mallopt(m_mmap_threshold, 32 << 20)
    mallopt(m_trim_threshold, 1 << 30)
    mallopt(m_top_pad, 64 << 20)


class TrainingDiverged(RuntimeError):
    """Raised when the training loss exceeds the divergence threshold."""


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "pinn"
    N: int = 15
    W: int = 20
    L: int = 4
    step_size: float = 1e-3
    momentum: float = 0.9
    iterations: int = 20000
    seed: int = 1
    gamma: float | None = None
    skip: bool = True
    record_every: int = 100
    divergence: float = 1e6

    def __post_init__(self):
        if self.loss not in ("pinn", "cpinn"):
            raise ValueError(f"loss must be 'pinn' or 'cpinn', got {self.loss!r}")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.gamma is not None and self.gamma < 1:
            raise ValueError("gamma must be >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class RunReport:
    loss_kind: str
    N: int
    seed: int
    iterations: int
    initial_loss: float
    final_loss: float
    final_pinn_loss: float
    final_cpinn_loss: float
    rel_l2_error: float
    wall_time: float
    history: list[tuple[int, float]] = field(default_factory=list)

    def summary(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("history")
        return d


def relative_l2_error(model, problem: ManufacturedProblem, probe_res: int = 50) -> float:
    """``100 * ||model - u|| / ||u||`` in ``L^2`` over the space-time box, midpoint rule."""
    d, T = problem.d, problem.T
    mid = (np.arange(probe_res) + 0.5) / probe_res
    x = np.stack(np.meshgrid(*([mid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    num = den = 0.0
    for t in mid * T:
        tt = np.full(x.shape[0], t)
        u = problem.u(x, tt)
        num += float(np.sum((model(x, tt) - u) ** 2))
        den += float(np.sum(u**2))
    return 100.0 * math.sqrt(num / den)


def train(
    problem: ManufacturedProblem,
    cfg: TrainConfig,
    data: ProblemData | None = None,
    net: MlpNetwork | None = None,
    probe_res: int = 50,
) -> tuple[MlpNetwork, RunReport]:
    """Minimise the configured loss from a seeded initialisation.

    Update rule: ``v <- mu v + grad``, ``params <- params - eta v``.
    """
    _keep_freed_memory()
    started = time.perf_counter()
    data = lattice_data(problem, cfg.N) if data is None else data
    net = init(cfg.W, cfg.L, problem.d, cfg.seed, cfg.skip) if net is None else net.copy()
    gamma = cfg.gamma
    if cfg.loss == "cpinn" and gamma is None:
        gamma = default_gamma(problem.d, data.m_tilde)
    velocity = np.zeros_like(net.params)
    history: list[tuple[int, float]] = []
    initial = None
    for it in range(cfg.iterations + 1):
        breakdown, grad = loss_and_grad(net, data, cfg.loss, gamma)
        loss = breakdown.total
        if initial is None:
            initial = loss
        if not math.isfinite(loss) or loss > cfg.divergence:
            raise TrainingDiverged(
                f"{cfg.loss} loss {loss:.3e} exceeded {cfg.divergence:.1e} at iteration {it} "
                f"(step size {cfg.step_size}, seed {cfg.seed})"
            )
        if it % cfg.record_every == 0 or it == cfg.iterations:
            history.append((it, loss))
        if it == cfg.iterations:
            break
        velocity = cfg.momentum * velocity + grad
        net.params -= cfg.step_size * velocity
    pinn_final = pinn_loss(net, data).total
    cpinn_final = cpinn_loss_sq(net, data, gamma if cfg.loss == "cpinn" else None).total
    report = RunReport(
        cfg.loss,
        cfg.N,
        cfg.seed,
        cfg.iterations,
        float(initial),
        float(loss),
        float(pinn_final),
        float(cpinn_final),
        relative_l2_error(net, problem, probe_res),
        time.perf_counter() - started,
        history,
    )
    return net, report
