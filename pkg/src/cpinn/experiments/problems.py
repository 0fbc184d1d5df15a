"""Manufactured heat-equation problems and closed-form models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..jet import Jet


@dataclass(frozen=True)
class FunctionModel:
    """A closed-form function exposing the same interface as a network: ``model(x, t)`` and ``model.jet(x, t)``."""

    jet_fn: Callable[[np.ndarray, np.ndarray], Jet]

    def jet(self, x, t, full_hessian: bool = True) -> Jet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (x.shape[0],))
        return self.jet_fn(x, t)

    def __call__(self, x, t) -> np.ndarray:
        return self.jet(x, t).value


@dataclass(frozen=True)
class SumModel:
    """``base + eps * extra`` for any two models."""

    base: object
    extra: object
    eps: float

    def jet(self, x, t, full_hessian: bool = True) -> Jet:
        return self.base.jet(x, t) + self.extra.jet(x, t).scale(self.eps)

    def __call__(self, x, t) -> np.ndarray:
        return self.base(x, t) + self.eps * self.extra(x, t)


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution ``u`` with source ``f = u_t - Δu``, boundary data ``g = u`` and initial data ``u0 = u(., 0)``."""

    name: str
    exact: FunctionModel
    source: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d: int = 2
    T: float = 1.0

    def u(self, x, t) -> np.ndarray:
        return self.exact(x, t)

    def f(self, x, t) -> np.ndarray:
        return self.source(np.atleast_2d(x), t)

    def g(self, x, t) -> np.ndarray:
        return self.exact(x, t)

    def u0(self, x, t=None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.exact(x, np.zeros(x.shape[0]))


def _u1_jet(x, t):
    X, Y = x[:, 0], x[:, 1]
    e = np.exp(-t)
    P, Q = X * (1 - X), Y * (1 - Y)
    dP, dQ = 1 - 2 * X, 1 - 2 * Y
    u = P * Q * e
    grad = np.column_stack([dP * Q * e, P * dQ * e])
    hess = np.empty((x.shape[0], 2, 2))
    hess[:, 0, 0] = -2 * Q * e
    hess[:, 1, 1] = -2 * P * e
    hess[:, 0, 1] = hess[:, 1, 0] = dP * dQ * e
    return Jet(u, grad, -u, hess[:, 0, 0] + hess[:, 1, 1], hess)


def _u1_source(x, t):
    X, Y = x[:, 0], x[:, 1]
    e = np.exp(-t)
    return -X * Y * (1 - X) * (1 - Y) * e + 2 * e * (X * (1 - X) + Y * (1 - Y))


def _u2_jet(x, t):
    pi = np.pi
    sx, cx = np.sin(pi * x[:, 0]), np.cos(pi * x[:, 0])
    sy, cy = np.sin(pi * x[:, 1]), np.cos(pi * x[:, 1])
    e = np.exp(-t)
    grad = np.column_stack([pi * cx * cy, -pi * sx * sy])
    hess = np.empty((x.shape[0], 2, 2))
    hess[:, 0, 0] = hess[:, 1, 1] = -pi * pi * sx * cy
    hess[:, 0, 1] = hess[:, 1, 0] = -pi * pi * cx * sy
    return Jet(sx * cy + e, grad, -e, hess[:, 0, 0] + hess[:, 1, 1], hess)


def _u2_source(x, t):
    return -np.exp(-t) + 2 * np.pi**2 * np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])


PROBLEMS = {
    "u1": lambda: ManufacturedProblem("u1", FunctionModel(_u1_jet), _u1_source),
    "u2": lambda: ManufacturedProblem("u2", FunctionModel(_u2_jet), _u2_source),
}


def manufactured(name: str) -> ManufacturedProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
