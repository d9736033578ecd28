"""Pointwise and simultaneous credible bands from curve draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BandSummary:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sim_lower: np.ndarray
    sim_upper: np.ndarray
    level: float
    m_alpha: float

    def contains(self, curve) -> bool:
        curve = np.asarray(curve)
        return bool(np.all((curve >= self.sim_lower) & (curve <= self.sim_upper)))


def simultaneous_band(curve_draws, level: float = 0.95, min_draws: int = 100) -> BandSummary:
    """Bands for draws of one curve, shape (n_draws, M).

    The simultaneous band is mean +/- m_alpha * sd, with m_alpha the ``level``
    quantile of the max standardized deviation over points.  Points with zero
    sd are left out of the max and the band collapses there.  The result is
    widened to the pointwise band wherever the latter is wider, so nesting
    holds exactly.
    """
    draws = np.asarray(curve_draws, dtype=float)
    if draws.ndim != 2:
        raise ValueError("curve draws must be a 2-d array (n_draws, M)")
    if draws.shape[0] < min_draws:
        raise ValueError(f"need at least {min_draws} draws, got {draws.shape[0]}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    tail = (1.0 - level) / 2
    mean = draws.mean(axis=0)
    lower, upper = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    sd = draws.std(axis=0, ddof=1)
    live = sd > 1e-12 * max(1.0, float(np.abs(mean).max()))
    if live.any():
        dev = np.abs(draws[:, live] - mean[live]) / sd[live]
        m_alpha = float(np.quantile(dev.max(axis=1), level))
    else:
        m_alpha = 0.0
    half = np.where(live, m_alpha * sd, 0.0)
    sim_lower = np.minimum(mean - half, lower)
    sim_upper = np.maximum(mean + half, upper)
    return BandSummary(mean, lower, upper, sim_lower, sim_upper, level, m_alpha)
