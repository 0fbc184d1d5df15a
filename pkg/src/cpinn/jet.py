"""Pointwise derivative bundle shared by networks and closed-form models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Jet:
    """Value and input derivatives at ``n`` sites.

    Shapes: ``value (n,)``, ``grad_x (n, d)``, ``dt (n,)``, ``hess_x (n, d, d)``.
    ``hess_x`` may be ``None`` when only the Laplacian was propagated.
    """

    value: np.ndarray
    grad_x: np.ndarray
    dt: np.ndarray
    laplacian: np.ndarray
    hess_x: np.ndarray | None = None

    def __add__(self, other: "Jet") -> "Jet":
        hess = None
        if self.hess_x is not None and other.hess_x is not None:
            hess = self.hess_x + other.hess_x
        return Jet(
            self.value + other.value,
            self.grad_x + other.grad_x,
            self.dt + other.dt,
            self.laplacian + other.laplacian,
            hess,
        )

    def scale(self, c: float) -> "Jet":
        return Jet(
            c * self.value,
            c * self.grad_x,
            c * self.dt,
            c * self.laplacian,
            None if self.hess_x is None else c * self.hess_x,
        )

    def heat_residual(self, f: np.ndarray) -> np.ndarray:
        """``f + Δv - v_t`` at the sites."""
        return f + self.laplacian - self.dt
