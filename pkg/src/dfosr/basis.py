"""Low-rank thin plate spline basis with a diagonalized, orthonormalized penalty.

The basis for a univariate grid is built in three passes:

1. the raw LR-TPS design ``[W0 : Z0]`` with ``W0 = (1, tau)`` and cubic
   radial columns ``|tau - knot|**3``;
2. diagonalization of the knot penalty, so the radial block becomes
   ``Z0 @ Omega_Z^{-1/2}`` with identity penalty;
3. a thin QR factorization ``B0 = Q R`` giving ``B = Q`` (orthonormal columns)
   and the penalty ``Omega = R^{-T} diag(0, 0, 1, ..., 1) R^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

DIM = 1
SMALL_GRID = 25
MAX_KNOTS = 150


class InvalidGridError(ValueError):
    pass


class DegenerateKnotsError(ValueError):
    pass


class OutOfRangeError(ValueError):
    pass


def make_grid(points) -> np.ndarray:
    """Sorted unique observation points; raises for fewer than four."""
    pts = np.asarray(points, dtype=float).ravel()
    if not np.all(np.isfinite(pts)):
        raise InvalidGridError("observation points must be finite")
    pts = np.unique(pts)
    if pts.size < 4:
        raise InvalidGridError(f"need at least 4 unique observation points, got {pts.size}")
    return pts


def select_knots(points) -> np.ndarray:
    """Knots at evenly spaced sample quantiles of the unique points.

    Grids with more than 25 points get ``min(M // 4, 150)`` knots.  Smaller
    grids get ``M - 2`` knots so that the basis dimension never exceeds M.
    """
    pts = make_grid(points)
    m = pts.size
    if m > SMALL_GRID:
        n_knots = min(m // 4, MAX_KNOTS)
    else:
        n_knots = min(m, m - DIM - 1)
    probs = np.arange(1, n_knots + 1) / (n_knots + 1)
    return np.quantile(pts, probs)


def tps_kernel(r, dim: int = DIM):
    """Thin plate spline radial function; ``r**3`` in one dimension."""
    if dim != 1:
        raise NotImplementedError(f"only one-dimensional domains are supported (got D={dim})")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    out = r**3
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BasisSystem:
    points: np.ndarray
    knots: np.ndarray
    B: np.ndarray
    Omega: np.ndarray
    Rinv: np.ndarray
    radial_transform: np.ndarray
    shift: float
    scale: float
    D: int = DIM

    @property
    def n_basis(self) -> int:
        return self.B.shape[1]

    def _scaled(self, tau):
        return (np.asarray(tau, dtype=float) - self.shift) / self.scale

    def raw_design(self, tau) -> np.ndarray:
        """Rows ``(1, tau, radial block)`` before the QR transform."""
        ts = np.atleast_1d(self._scaled(tau))
        ks = self._scaled(self.knots)
        z0 = tps_kernel(np.abs(ts[:, None] - ks[None, :]))
        return np.hstack([np.ones((ts.size, 1)), ts[:, None], z0 @ self.radial_transform])

    def evaluate(self, tau) -> np.ndarray:
        """Basis rows at new points inside the observed range."""
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        lo, hi = self.points[0], self.points[-1]
        tol = 1e-12 * max(1.0, abs(hi - lo))
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise OutOfRangeError(f"evaluation points must lie in [{lo}, {hi}]")
        return self.raw_design(t) @ self.Rinv

    def smoother(self, lam: float) -> np.ndarray:
        """Hat matrix of the penalized fit ``B (B'B + lam Omega)^{-1} B'``."""
        evals, V = linalg.eigh(self.Omega)
        shrink = 1.0 / (1.0 + lam * np.clip(evals, 0.0, None))
        BV = self.B @ V
        return (BV * shrink) @ BV.T


def build_basis(points, knots=None) -> BasisSystem:
    pts = make_grid(points)
    if knots is None:
        knots = select_knots(pts)
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 1 or np.any(np.diff(knots) <= 0):
        raise DegenerateKnotsError("knots must be a strictly increasing 1-d array")
    if knots[0] < pts[0] or knots[-1] > pts[-1]:
        raise DegenerateKnotsError("knots must lie within the observation range")
    L = knots.size + DIM + 1
    if L > pts.size:
        raise DegenerateKnotsError(f"basis dimension {L} exceeds the number of points {pts.size}")

    # rescale to [0, 1]; cubic kernels on raw units are badly conditioned
    shift = float(pts[0])
    scale = float(pts[-1] - pts[0])
    ts = (pts - shift) / scale
    ks = (knots - shift) / scale

    W0 = np.column_stack([np.ones_like(ts), ts])
    Z0 = tps_kernel(np.abs(ts[:, None] - ks[None, :]))
    omega_z = tps_kernel(np.abs(ks[:, None] - ks[None, :]))

    # the cubic kernel matrix is only conditionally definite; its square root
    # is taken on the absolute spectrum, as the SVD-based construction does
    evals, evecs = linalg.eigh(omega_z)
    mag = np.abs(evals)
    if mag.min() < 1e-12 * mag.max():
        raise DegenerateKnotsError("knot penalty matrix is numerically singular")
    radial_transform = evecs / np.sqrt(mag)

    B0 = np.hstack([W0, Z0 @ radial_transform])
    Q, R = linalg.qr(B0, mode="economic")
    Rinv = linalg.solve_triangular(R, np.eye(L))
    omega0 = np.diag(np.r_[np.zeros(DIM + 1), np.ones(L - DIM - 1)])
    Omega = Rinv.T @ omega0 @ Rinv
    Omega = 0.5 * (Omega + Omega.T)

    return BasisSystem(
        points=pts,
        knots=knots,
        B=Q,
        Omega=Omega,
        Rinv=Rinv,
        radial_transform=radial_transform,
        shift=shift,
        scale=scale,
    )


def evaluate_basis(system: BasisSystem, tau) -> np.ndarray:
    """Single point -> L-vector; array of points -> (n, L) matrix."""
    rows = system.evaluate(tau)
    return rows[0] if np.ndim(tau) == 0 else rows
