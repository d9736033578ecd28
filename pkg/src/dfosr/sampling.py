"""Random-variate primitives shared by the Gibbs sampler."""
from __future__ import annotations

import math

import numpy as np
from scipy import linalg, special


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class RedundantConstraintsError(np.linalg.LinAlgError):
    pass


class TruncationUnderflowError(FloatingPointError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derived_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for worker ``index`` under a master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _cholesky(Q):
    try:
        return linalg.cholesky(Q, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"precision matrix is not positive definite: {exc}") from exc


def sample_gaussian_precision(Q, ell, rng: np.random.Generator, chol=None) -> np.ndarray:
    """Draw from N(Q^{-1} ell, Q^{-1}) using the Cholesky factor of Q."""
    Q = np.asarray(Q, dtype=float)
    L = _cholesky(Q) if chol is None else chol
    ell_bar = linalg.solve_triangular(L, ell, lower=True, check_finite=False)
    z = rng.standard_normal(Q.shape[0])
    return linalg.solve_triangular(L, ell_bar + z, lower=True, trans="T", check_finite=False)


def sample_constrained_gaussian(Q, ell, C, rng: np.random.Generator) -> np.ndarray:
    """Draw from N(Q^{-1} ell, Q^{-1}) conditioned on ``C x = 0``.

    An unconstrained draw ``x0`` is mapped to
    ``x0 - Q^{-1} C' (C Q^{-1} C')^{-1} C x0``, which is exact conditioning
    for a Gaussian.  The projection is applied twice; the second pass removes
    rounding left by the first and leaves ``|C x|`` at machine precision.
    """
    Q = np.asarray(Q, dtype=float)
    L = _cholesky(Q)
    x0 = sample_gaussian_precision(Q, ell, rng, chol=L)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0:
        return x0
    c_bar = linalg.solve_triangular(L, C.T, lower=True, check_finite=False)
    c_tilde = linalg.solve_triangular(L, c_bar, lower=True, trans="T", check_finite=False)
    gram = C @ c_tilde
    try:
        gram_chol = linalg.cho_factor(gram, check_finite=False)
    except linalg.LinAlgError as exc:
        raise RedundantConstraintsError("constraint rows are linearly dependent") from exc
    diag = np.abs(np.diag(gram_chol[0]))
    if (diag.max() / diag.min()) ** 2 > 1e14:
        raise RedundantConstraintsError("constraint rows are linearly dependent")
    x = x0
    for _ in range(2):
        x = x - c_tilde @ linalg.cho_solve(gram_chol, C @ x, check_finite=False)
    return x


def slice_sample(log_density, x0: float, bounds=(-math.inf, math.inf), rng=None,
                 width: float = 1.0, max_steps: int = 100) -> float:
    """One stepping-out / shrinkage slice-sampling update (Neal 2003)."""
    lo, hi = bounds
    f0 = log_density(x0)
    if math.isnan(f0):
        raise FloatingPointError(f"log density is NaN at the starting point x={x0!r}")

    def logf(x):
        if x <= lo or x >= hi:
            return -math.inf
        val = log_density(x)
        if math.isnan(val):
            raise FloatingPointError(f"log density is NaN at x={x!r} (slice started at {x0!r})")
        return val

    level = f0 - rng.exponential()
    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and left > lo and logf(left) > level:
        left -= width
        j -= 1
    while k > 0 and right < hi and logf(right) > level:
        right += width
        k -= 1
    left = max(left, lo)
    right = min(right, hi)

    while True:
        x1 = left + (right - left) * rng.random()
        if logf(x1) > level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-14 * max(1.0, abs(x0)):
            return x0


def sample_truncated_gamma(shape, rate, lower, rng: np.random.Generator, size=None):
    """Gamma(shape, rate) conditioned on exceeding ``lower``, by inverse CDF."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("shape and rate must be positive")
    tail = special.gammaincc(shape, rate * np.asarray(lower, dtype=float))
    if np.any(tail < 1e-300):
        raise TruncationUnderflowError("mass above the truncation point underflows")
    if size is None:
        size = np.broadcast(shape, rate, tail).shape
    u = 1.0 - rng.random(size)  # in (0, 1]
    out = special.gammainccinv(shape, u * tail) / rate
    return out if np.ndim(out) else float(out)
