"""Variance components: nested horseshoe, multiplicative gamma process,
parameter-expanded initial states, hyperparameters and stochastic volatility.

Every half-Cauchy and Student-t prior is written as a gamma scale mixture,
so each full conditional is a gamma draw on the precision scale.  All gamma
distributions here are parameterized by (shape, rate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .sampling import slice_sample
from .statespace import smooth_batch

PREC_FLOOR = 1e-12
PREC_CAP = 1e12

NIG_SHAPE = 0.001
NIG_RATE = 0.001
INIT_DF = 3.0
HYPER_BOUNDS = (0.1, 50.0)
NU_BOUNDS = (2.0, 128.0)


def _gamma(rng, shape, rate):
    draw = rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float))
    return np.clip(draw, PREC_FLOOR, PREC_CAP)


def _check_finite(values, label):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise FloatingPointError(f"non-finite {label} at index {idx}")


# -- nested horseshoe ---------------------------------------------------------

@dataclass
class HorseshoeState:
    """Precisions and mixing variables of the four-level half-Cauchy hierarchy.

    ``omega_prec`` holds ``sigma_omega^{-2}`` for the T-1 increments of each
    (predictor, factor) path.  For the static variant it is empty and the
    (predictor, factor) level is the coefficient variance itself.
    """

    omega_prec: np.ndarray
    xi_omega: np.ndarray
    lambda_jk_prec: np.ndarray
    xi_lambda_jk: np.ndarray
    lambda_j_prec: np.ndarray
    xi_lambda_j: np.ndarray
    lambda_0_prec: float
    xi_lambda_0: float
    global_rate: float

    @classmethod
    def initial(cls, p: int, K: int, T: int, static: bool = False):
        n_inc = 0 if static else T - 1
        return cls(
            omega_prec=np.ones((p, K, n_inc)),
            xi_omega=np.ones((p, K, n_inc)),
            lambda_jk_prec=np.ones((p, K)),
            xi_lambda_jk=np.ones((p, K)),
            lambda_j_prec=np.ones(p),
            xi_lambda_j=np.ones(p),
            lambda_0_prec=1.0,
            xi_lambda_0=1.0,
            global_rate=float(T - 1),
        )

    @property
    def sigma_omega(self):
        return self.omega_prec ** -0.5

    @property
    def lambda_jk(self):
        return self.lambda_jk_prec ** -0.5

    @property
    def lambda_j(self):
        return self.lambda_j_prec ** -0.5

    @property
    def lambda_0(self):
        return self.lambda_0_prec ** -0.5


def _update_upper_levels(hs: HorseshoeState, rng):
    p, K = hs.lambda_jk_prec.shape
    hs.xi_lambda_jk = _gamma(rng, 1.0, hs.lambda_j_prec[:, None] + hs.lambda_jk_prec)
    hs.lambda_j_prec = _gamma(rng, (K + 1) / 2, hs.xi_lambda_j + hs.xi_lambda_jk.sum(axis=1))
    hs.xi_lambda_j = _gamma(rng, 1.0, hs.lambda_0_prec + hs.lambda_j_prec)
    hs.lambda_0_prec = float(_gamma(rng, (p + 1) / 2, hs.xi_lambda_0 + hs.xi_lambda_j.sum()))
    hs.xi_lambda_0 = float(_gamma(rng, 1.0, hs.global_rate + hs.lambda_0_prec))


def update_horseshoe(omega, hs: HorseshoeState, rng) -> HorseshoeState:
    """Gibbs pass over the dynamic hierarchy given increments ``omega`` (p, K, T-1)."""
    omega = np.asarray(omega, dtype=float)
    _check_finite(omega, "coefficient increment (j, k, t)")
    n_inc = omega.shape[2]
    hs.omega_prec = _gamma(rng, 1.0, hs.xi_omega + 0.5 * omega**2)
    hs.xi_omega = _gamma(rng, 1.0, hs.lambda_jk_prec[..., None] + hs.omega_prec)
    hs.lambda_jk_prec = _gamma(rng, (n_inc + 1) / 2, hs.xi_lambda_jk + hs.xi_omega.sum(axis=2))
    _update_upper_levels(hs, rng)
    return hs


def update_static_horseshoe(alpha, hs: HorseshoeState, rng) -> HorseshoeState:
    """Hierarchy with one level removed: ``alpha_jk ~ N(0, lambda_jk^2)``."""
    alpha = np.asarray(alpha, dtype=float)
    _check_finite(alpha, "static coefficient (j, k)")
    hs.lambda_jk_prec = _gamma(rng, 1.0, hs.xi_lambda_jk + 0.5 * alpha**2)
    _update_upper_levels(hs, rng)
    return hs


def update_nig(omega, rng) -> np.ndarray:
    """Shared-over-time innovation precisions under Gamma(0.001, 0.001)."""
    omega = np.asarray(omega, dtype=float)
    _check_finite(omega, "coefficient increment (j, k, t)")
    n_inc = omega.shape[2]
    return _gamma(rng, NIG_SHAPE + n_inc / 2, NIG_RATE + 0.5 * (omega**2).sum(axis=2))


def update_initial_scales(values, rng, df: float = INIT_DF) -> np.ndarray:
    """Mixing precisions of t_df initial states: ``Gamma(df/2 + 1/2, df/2 + v^2/2)``."""
    values = np.asarray(values, dtype=float)
    return _gamma(rng, df / 2 + 0.5, df / 2 + 0.5 * values**2)


# -- multiplicative gamma process ---------------------------------------------

@dataclass
class MgpState:
    delta_mu: np.ndarray
    delta_eta: np.ndarray
    xi_eta: np.ndarray  # (K, T-1)
    a_mu1: float = 2.0
    a_mu2: float = 3.0
    a_eta1: float = 2.0
    a_eta2: float = 3.0
    nu_eta: float = 10.0

    @classmethod
    def initial(cls, K: int, T: int):
        return cls(delta_mu=np.ones(K), delta_eta=np.ones(K), xi_eta=np.ones((K, T - 1)))

    @property
    def sigma_mu(self):
        return np.cumprod(self.delta_mu) ** -0.5

    @property
    def sigma_eta(self):
        return np.cumprod(self.delta_eta) ** -0.5

    @property
    def eta_var(self):
        """Innovation variances ``sigma_eta_k^2 / xi_eta_kt``, shape (K, T-1)."""
        return (1.0 / np.cumprod(self.delta_eta))[:, None] / self.xi_eta


def _mgp_deltas(delta, weighted_ss, counts, a1, a2, rng):
    """Sequential MGP multiplier updates.

    ``weighted_ss[k]`` is the precision-free sum of squares attached to
    factor k and ``counts[k]`` its number of terms.
    """
    delta = delta.copy()
    K = delta.size
    for ell in range(K):
        tau = np.cumprod(delta)[ell:] / delta[ell]
        shape = (a1 if ell == 0 else a2) + 0.5 * counts[ell:].sum()
        rate = 1.0 + 0.5 * np.sum(tau * weighted_ss[ell:])
        delta[ell] = _gamma(rng, shape, rate)
    return delta


def update_mgp_mu(mu, mgp: MgpState, rng) -> MgpState:
    mu = np.asarray(mu, dtype=float)
    mgp.delta_mu = _mgp_deltas(mgp.delta_mu, mu**2, np.ones(mu.size), mgp.a_mu1, mgp.a_mu2, rng)
    return mgp


def update_mgp_eta(eta, mgp: MgpState, rng) -> MgpState:
    """MGP multipliers then local t-scales for the factor innovations (K, T-1)."""
    eta = np.asarray(eta, dtype=float)
    K, n_inc = eta.shape
    ss = np.sum(eta**2 * mgp.xi_eta, axis=1)
    mgp.delta_eta = _mgp_deltas(mgp.delta_eta, ss, np.full(K, n_inc), mgp.a_eta1, mgp.a_eta2, rng)
    sig2 = 1.0 / np.cumprod(mgp.delta_eta)
    nu = mgp.nu_eta
    mgp.xi_eta = _gamma(rng, nu / 2 + 0.5, nu / 2 + eta**2 / (2 * sig2[:, None]))
    return mgp


def log_cond_first_shape(a: float, delta_first: float) -> float:
    """Gamma(2, 1) prior times the Gamma(a, 1) density of the first multiplier."""
    return math.log(a) - a + (a - 1.0) * math.log(delta_first) - math.lgamma(a)


def log_cond_rest_shape(a: float, log_delta_sum: float, n: int) -> float:
    return math.log(a) - a + (a - 1.0) * log_delta_sum - n * math.lgamma(a)


def log_cond_nu(nu: float, log_xi_sum: float, xi_sum: float, n: int) -> float:
    """Uniform prior times the Gamma(nu/2, nu/2) density of the t-scales."""
    h = nu / 2
    return n * (h * math.log(h) - math.lgamma(h)) + (h - 1.0) * log_xi_sum - h * xi_sum


def _slice_shapes(delta, a1, a2, rng):
    d1 = float(delta[0])
    a1 = slice_sample(lambda a: log_cond_first_shape(a, d1), a1, HYPER_BOUNDS, rng)
    rest = np.log(delta[1:]).sum()
    n = delta.size - 1
    a2 = slice_sample(lambda a: log_cond_rest_shape(a, rest, n), a2, HYPER_BOUNDS, rng)
    return a1, a2


def update_hyper_shapes(mgp: MgpState, rng) -> MgpState:
    mgp.a_mu1, mgp.a_mu2 = _slice_shapes(mgp.delta_mu, mgp.a_mu1, mgp.a_mu2, rng)
    mgp.a_eta1, mgp.a_eta2 = _slice_shapes(mgp.delta_eta, mgp.a_eta1, mgp.a_eta2, rng)
    if mgp.xi_eta.size:
        lx = float(np.log(mgp.xi_eta).sum())
        sx = float(mgp.xi_eta.sum())
        n = mgp.xi_eta.size
        mgp.nu_eta = slice_sample(lambda v: log_cond_nu(v, lx, sx, n), mgp.nu_eta, NU_BOUNDS, rng)
    return mgp


# -- stochastic volatility ------------------------------------------------------

# ten-component normal mixture approximation to log(chi^2_1) (Omori et al. 2007)
MIX_PROB = np.array([0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                     0.18842, 0.12047, 0.05591, 0.01575, 0.00115])
MIX_MEAN = np.array([1.92677, 1.34744, 0.73504, 0.02266, -0.85173,
                     -1.97278, -3.46788, -5.55246, -8.68384, -14.65000])
MIX_VAR = np.array([0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                    0.98583, 1.57469, 2.54498, 4.16591, 7.33342])

SV_MU_MEAN, SV_MU_VAR = -10.0, 100.0
SV_PHI_BETA = (20.0, 1.5)
SV_SIGMA_MAX = 100.0


@dataclass
class VolatilityState:
    h: np.ndarray
    mu_h: float
    phi_h: float = 0.9
    sigma_nu: float = 0.3

    @property
    def variances(self):
        return np.exp(self.h)


def sv_loglik(h, mu, phi, sigma) -> float:
    """Log density of a stationary AR(1) log-variance path."""
    if not (-1.0 < phi < 1.0) or sigma <= 0:
        return -math.inf
    x = h - mu
    init_var = sigma**2 / (1.0 - phi**2)
    innov = x[1:] - phi * x[:-1]
    return (-0.5 * math.log(init_var) - 0.5 * x[0] ** 2 / init_var
            - (h.size - 1) * math.log(sigma) - 0.5 * float(innov @ innov) / sigma**2)


def sample_log_variance(residuals, sv: VolatilityState, rng) -> np.ndarray:
    """Draw the log-variance path given residuals (T, M) via the mixture linearization."""
    e = np.asarray(residuals, dtype=float)
    e = np.where(e == 0.0, 1e-10, e)
    ystar = np.log(e**2)
    T = ystar.shape[0]
    dev = ystar[..., None] - sv.h[:, None, None] - MIX_MEAN
    logw = np.log(MIX_PROB) - 0.5 * np.log(MIX_VAR) - 0.5 * dev**2 / MIX_VAR
    logw -= logw.max(axis=-1, keepdims=True)
    w = np.exp(logw)
    cdf = np.cumsum(w, axis=-1)
    u = rng.random(ystar.shape + (1,)) * cdf[..., -1:]
    comp = np.minimum((cdf < u).sum(axis=-1), MIX_MEAN.size - 1)

    # pool the M linearized observations at each time by precision weighting
    prec = (1.0 / MIX_VAR[comp]).sum(axis=1)
    ybar = ((ystar - MIX_MEAN[comp]) / MIX_VAR[comp]).sum(axis=1) / prec

    phi, sig2 = sv.phi_h, sv.sigma_nu**2
    state_var = np.full((1, T, 1), sig2)
    init_var = np.array([[sig2 / (1.0 - phi**2)]])
    x = smooth_batch(np.ones((1, T, 1)), (1.0 / prec)[None], state_var,
                     np.array([[phi]]), init_var, (ybar - sv.mu_h)[None], rng)
    return sv.mu_h + x[0, :, 0]


def update_stochastic_volatility(residuals, sv: VolatilityState, rng) -> VolatilityState:
    sv.h = sample_log_variance(residuals, sv, rng)
    h = sv.h
    T = h.size

    phi, sig2 = sv.phi_h, sv.sigma_nu**2
    Q = 1.0 / SV_MU_VAR + (1.0 - phi**2) / sig2 + (T - 1) * (1.0 - phi) ** 2 / sig2
    ell = (SV_MU_MEAN / SV_MU_VAR + (1.0 - phi**2) * h[0] / sig2
           + (1.0 - phi) * np.sum(h[1:] - phi * h[:-1]) / sig2)
    sv.mu_h = float(ell / Q + rng.standard_normal() / math.sqrt(Q))

    a, b = SV_PHI_BETA

    def log_phi(ph):
        u = (ph + 1.0) / 2
        return (a - 1) * math.log(u) + (b - 1) * math.log1p(-u) + sv_loglik(h, sv.mu_h, ph, sv.sigma_nu)

    sv.phi_h = slice_sample(log_phi, sv.phi_h, (-1.0, 1.0), rng)
    sv.sigma_nu = slice_sample(lambda s: sv_loglik(h, sv.mu_h, sv.phi_h, s), sv.sigma_nu,
                               (0.0, SV_SIGMA_MAX), rng)
    return sv
