"""Least-squares convergence-rate fits over refinement sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class RateStudy:
    """Errors along a refinement sweep and the fitted ``log2`` slope per level.

    ``sweep`` records which level moved: ``space`` (k), ``time`` (k') or
    ``diagonal`` (both together).  A diagonal sweep only measures the combined
    slope, which is stored in both slope fields.
    """

    levels: list[tuple[int, int]]
    errors: list[float]
    sweep: str
    fitted_slope: float
    predicted_slope: float = math.nan
    intercept: float = 0.0
    fitted_slope_space: float = math.nan
    fitted_slope_time: float = math.nan
    predicted_slope_space: float = math.nan
    predicted_slope_time: float = math.nan
    notes: list[str] = field(default_factory=list)

    def rows(self):
        for (k, kp), e in zip(self.levels, self.errors):
            yield {"k": k, "kp": kp, "error": e, "fitted_slope": self.fitted_slope, "predicted_slope": self.predicted_slope}


def _sweep_axis(levels: list[tuple[int, int]]) -> tuple[str, np.ndarray]:
    ks = np.array([lv[0] for lv in levels], dtype=float)
    kps = np.array([lv[1] for lv in levels], dtype=float)
    dk, dkp = np.ptp(ks) > 0, np.ptp(kps) > 0
    if dk and dkp:
        if not np.allclose(np.diff(ks), np.diff(kps)):
            raise ValueError("levels must vary k, k', or both in lockstep")
        return "diagonal", ks
    if dk:
        return "space", ks
    if dkp:
        return "time", kps
    raise ValueError("levels do not vary")


def rate_fit(levels: Sequence, errors: Sequence[float], predicted_slope: float = math.nan) -> RateStudy:
    """Fit ``log2(error) = a + slope * level`` by least squares.

    ``levels`` may be integers (taken as a diagonal sweep ``k = k'``) or
    ``(k, k')`` pairs.
    """
    levels = [(int(lv), int(lv)) if np.isscalar(lv) else (int(lv[0]), int(lv[1])) for lv in levels]
    errors = [float(e) for e in errors]
    if len(levels) != len(errors):
        raise ValueError("levels and errors differ in length")
    if len(levels) < 3:
        raise ValueError("a rate fit needs at least 3 levels")
    if any(not e > 0 or not math.isfinite(e) for e in errors):
        raise ValueError("errors must be positive and finite")
    sweep, x = _sweep_axis(levels)
    slope, intercept = np.polyfit(x, np.log2(errors), 1)
    study = RateStudy(levels, errors, sweep, float(slope), float(predicted_slope), float(intercept))
    if sweep in ("space", "diagonal"):
        study.fitted_slope_space = study.fitted_slope
        study.predicted_slope_space = study.predicted_slope
    if sweep in ("time", "diagonal"):
        study.fitted_slope_time = study.fitted_slope
        study.predicted_slope_time = study.predicted_slope
    return study
