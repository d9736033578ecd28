"""Gibbs sampler for dynamic function-on-scalars regression.

Model, for curves Y_t observed on a grid and predictors x_t::

    Y_t       = F beta_t + e_t,                         e_t ~ N(0, sigma_t^2 I)
    beta_kt   = mu_k + sum_j x_jt alpha_jkt + gamma_kt
    gamma_kt  = phi_k gamma_k,t-1 + eta_kt
    alpha_jkt = alpha_jk,t-1 + omega_jkt

with F = B Psi constrained to F'F = I.  One sweep runs, in order:
imputation, loading curves, projection, dynamic states, intercepts and AR
coefficients, variance components, initial-state scales, hyperparameters.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import shrinkage as shr
from .basis import BasisSystem, build_basis
from .data import FunctionalDataset
from .sampling import make_rng, sample_constrained_gaussian, sample_truncated_gamma, slice_sample
from .statespace import smooth_batch

log = logging.getLogger(__name__)

VARIANTS = ("DFOSR-HS", "DFOSR-NIG", "FOSR-AR")
_ALIASES = {"hs": "DFOSR-HS", "nig": "DFOSR-NIG", "fosr-ar": "FOSR-AR"}

LAMBDA_F_LOWER = 1e-8
PHI_FLAT_BOUNDS = (-0.99, 0.99)
PHI_BETA = (5.0, 2.0)
ORTHO_TOL = 1e-8
RECOMP_TOL = 1e-10


class GibbsError(RuntimeError):
    pass


class DegenerateLoadingError(FloatingPointError):
    pass


def canonical_variant(name: str) -> str:
    key = name.strip()
    if key.lower() in _ALIASES:
        return _ALIASES[key.lower()]
    if key.upper() in VARIANTS:
        return key.upper()
    raise ValueError(f"unknown variant {name!r}; choose from {VARIANTS} or {tuple(_ALIASES)}")


@dataclass
class McmcConfig:
    K: int = 6
    n_iter: int = 5000
    burn_in: int = 2000
    thin: int = 3
    variant: str = "DFOSR-HS"
    sv_enabled: bool = False
    stationary_phi: bool = True
    seed: int = 0

    def __post_init__(self):
        self.variant = canonical_variant(self.variant)
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must be in [0, n_iter)")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def n_keep(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    @property
    def static(self) -> bool:
        return self.variant == "FOSR-AR"


@dataclass
class LoadingSet:
    Psi: np.ndarray  # (L, K)
    F: np.ndarray    # (M, K)


@dataclass
class ModelState:
    variant: str
    loadings: LoadingSet
    lambda_f: np.ndarray
    beta: np.ndarray        # (K, T)
    mu: np.ndarray          # (K,)
    phi: np.ndarray         # (K,)
    gamma: np.ndarray       # (K, T)
    alpha: np.ndarray       # (p, K, T)
    mgp: shr.MgpState
    xi_eta0: np.ndarray     # (K,)
    xi_omega0: np.ndarray   # (p, K)
    Y: np.ndarray           # (T, M) data with current imputations
    hs: shr.HorseshoeState | None = None
    nig_prec: np.ndarray | None = None
    sigma2: float = 1.0
    sv: shr.VolatilityState | None = None

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def T(self) -> int:
        return self.beta.shape[1]

    @property
    def F(self) -> np.ndarray:
        return self.loadings.F

    @property
    def Psi(self) -> np.ndarray:
        return self.loadings.Psi

    def obs_var(self) -> np.ndarray:
        if self.sv is not None:
            return np.clip(self.sv.variances, shr.PREC_FLOOR, shr.PREC_CAP)
        return np.full(self.T, self.sigma2)

    def alpha_variances(self):
        """Innovation variances (p, K, T) with slot 0 unused, and initial variances (p, K)."""
        p, K, T = self.alpha.shape
        var = np.zeros((p, K, T))
        if self.variant == "FOSR-AR":
            return var, 1.0 / self.hs.lambda_jk_prec
        if self.variant == "DFOSR-HS":
            var[:, :, 1:] = 1.0 / self.hs.omega_prec
        else:
            var[:, :, 1:] = (1.0 / self.nig_prec)[:, :, None]
        return var, 1.0 / self.xi_omega0

    def fitted(self) -> np.ndarray:
        return (self.F @ self.beta).T


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in draws plus what is needed to evaluate curves."""

    basis: BasisSystem
    X: np.ndarray
    missing: np.ndarray
    Psi: np.ndarray      # (n, L, K)
    F: np.ndarray        # (n, M, K)
    alpha: np.ndarray    # (n, p, K, T)
    beta: np.ndarray     # (n, K, T)
    gamma: np.ndarray    # (n, K, T)
    mu: np.ndarray       # (n, K)
    phi: np.ndarray      # (n, K)
    obs_var: np.ndarray  # (n, T)
    imputed: np.ndarray  # (n, n_missing) in row-major order of the missing mask
    lambda_f: np.ndarray = None
    config: McmcConfig = None
    seconds: float = 0.0

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    @property
    def tau(self) -> np.ndarray:
        return self.basis.points

    def loadings_at(self, tau=None) -> np.ndarray:
        if tau is None:
            return self.F
        rows = self.basis.evaluate(tau)
        return np.einsum("ml,nlk->nmk", rows, self.Psi)

    def regression_surface(self, j: int, tau=None) -> np.ndarray:
        """Draws of ``sum_k f_k(tau) alpha_jkt`` with shape (n, T, M)."""
        p = self.alpha.shape[1]
        if not 0 <= j < p:
            raise IndexError(f"predictor index {j} out of range for p={p}")
        return np.einsum("nmk,nkt->ntm", self.loadings_at(tau), self.alpha[:, j])

    def regression_surfaces(self, tau=None) -> np.ndarray:
        """All predictors at once, shape (n, p, T, M)."""
        return np.einsum("nmk,njkt->njtm", self.loadings_at(tau), self.alpha)

    def fitted_curves(self, tau=None) -> np.ndarray:
        """Draws of ``sum_k f_k(tau) beta_kt`` with shape (n, T, M)."""
        return np.einsum("nmk,nkt->ntm", self.loadings_at(tau), self.beta)

    def aligned_loadings(self, tau=None) -> np.ndarray:
        """Loading draws with each column's sign matched to the running mean."""
        F = self.loadings_at(tau).copy()
        ref = F[0].copy()
        for i in range(1, F.shape[0]):
            flip = np.sum(F[i] * ref, axis=0) < 0
            F[i][:, flip] *= -1
            ref += (F[i] - ref) / (i + 1)
        return F

    def imputed_curves(self, data_Y) -> np.ndarray:
        """Data curves with missing cells filled by each retained imputation."""
        out = np.broadcast_to(np.asarray(data_Y, dtype=float), (self.n,) + self.missing.shape).copy()
        out[:, self.missing] = self.imputed
        return out


# -- initialization ------------------------------------------------------------

def interpolate_missing(Y, tau) -> np.ndarray:
    """Per-curve linear interpolation over observed points (flat beyond the ends)."""
    Y = np.array(Y, dtype=float)
    col_mean = np.nanmean(np.where(np.isnan(Y).all(axis=0), 0.0, Y), axis=0)
    col_mean = np.where(np.isnan(col_mean), 0.0, col_mean)
    for row in Y:
        miss = np.isnan(row)
        if not miss.any():
            continue
        if miss.sum() >= row.size - 1:
            row[miss] = col_mean[miss] if (~miss).sum() == 0 else row[~miss][0]
        else:
            row[miss] = np.interp(tau[miss], tau[~miss], row[~miss])
    return Y


def initialize_state(config: McmcConfig, data: FunctionalDataset, basis: BasisSystem) -> ModelState:
    K, T, p = config.K, data.T, data.p
    L = basis.n_basis
    if K > L:
        raise ValueError(f"K={K} exceeds the basis dimension {L}")
    Y = interpolate_missing(data.Y, data.tau)
    coef = (Y - Y.mean(axis=0)) @ basis.B                  # (T, L)
    U, _, _ = np.linalg.svd(coef.T, full_matrices=True)     # (L, L)
    Psi = U[:, :K].copy()
    F = basis.B @ Psi
    beta = F.T @ Y.T
    mu = beta.mean(axis=1)
    gamma = beta - mu[:, None]
    resid = Y - (F @ beta).T
    sigma2 = float(np.clip(resid.var(), 1e-8, None))

    static = config.static
    state = ModelState(
        variant=config.variant,
        loadings=LoadingSet(Psi, F),
        lambda_f=np.ones(K),
        beta=beta,
        mu=mu,
        phi=np.full(K, 0.5),
        gamma=gamma,
        alpha=np.zeros((p, K, T)),
        mgp=shr.MgpState.initial(K, T),
        xi_eta0=np.ones(K),
        xi_omega0=np.ones((p, K)),
        Y=Y,
        sigma2=sigma2,
    )
    if config.variant == "DFOSR-NIG":
        state.nig_prec = np.ones((p, K))
    else:
        state.hs = shr.HorseshoeState.initial(p, K, T, static=static)
    if config.sv_enabled:
        state.sv = shr.VolatilityState(h=np.full(T, np.log(sigma2)), mu_h=float(np.log(sigma2)))
    return state


# -- sweep steps -----------------------------------------------------------------

def impute_missing(state: ModelState, missing: np.ndarray, rng) -> None:
    if not missing.any():
        return
    rows, cols = np.nonzero(missing)
    sd = np.sqrt(state.obs_var())[rows]
    mean = np.einsum("ik,ki->i", state.F[cols], state.beta[:, rows])
    state.Y[rows, cols] = mean + sd * rng.standard_normal(rows.size)


def update_loading_curves(state: ModelState, basis: BasisSystem, rng) -> None:
    B, Omega = basis.B, basis.Omega
    L = basis.n_basis
    K = state.K
    Psi = state.Psi.copy()
    beta = state.beta
    w_var = 1.0 / state.obs_var()
    BtY = state.Y @ B                                         # (T, L)
    shape = (L - basis.D + 1 + 1) / 2
    eye = np.eye(L)
    for k in range(K):
        psi = Psi[:, k]
        rate = max(0.5 * float(psi @ Omega @ psi), 1e-300)
        lam = min(sample_truncated_gamma(shape, rate, LAMBDA_F_LOWER, rng), shr.PREC_CAP)
        state.lambda_f[k] = lam

        wk = beta[k] * w_var                                  # (T,)
        others = np.delete(np.arange(K), k)
        Q = eye * float(wk @ beta[k]) + lam * Omega
        ell = BtY.T @ wk - Psi[:, others] @ (beta[others] @ wk)
        draw = sample_constrained_gaussian(Q, ell, Psi[:, others].T, rng)
        norm = float(np.linalg.norm(draw))
        if norm < 1e-12:
            raise DegenerateLoadingError(f"loading curve {k} collapsed to zero norm")
        Psi[:, k] = draw / norm
        beta[k] *= norm
    state.loadings = LoadingSet(Psi, B @ Psi)


def project(state: ModelState, basis: BasisSystem) -> np.ndarray:
    """Working-likelihood data ``Ytilde[k, t] = f_k' Y_t = psi_k' (B' Y_t)``."""
    return state.Psi.T @ (basis.B.T @ state.Y.T)


def factor_posterior(Ytilde_t, obs_var_t, prior_mean, prior_prec):
    """Precision and mean of beta_t given its projected data and a Gaussian prior."""
    prior_prec = np.atleast_2d(prior_prec)
    Q = prior_prec + np.eye(prior_prec.shape[0]) / obs_var_t
    ell = prior_prec @ prior_mean + np.asarray(Ytilde_t) / obs_var_t
    return Q, np.linalg.solve(Q, ell)


def dynamic_state_arrays(state: ModelState, X: np.ndarray):
    """Batched (over factors) state-space arrays for the smoother."""
    K, T = state.K, state.T
    p = X.shape[1]
    m = p + 1
    Z = np.broadcast_to(np.column_stack([X, np.ones(T)]), (K, T, m))
    alpha_var, init_alpha = state.alpha_variances()
    state_var = np.empty((K, T, m))
    state_var[:, :, :p] = alpha_var.transpose(1, 2, 0)
    state_var[:, 0, p] = 0.0
    state_var[:, 1:, p] = state.mgp.eta_var
    transition = np.ones((K, m))
    transition[:, p] = state.phi
    init_var = np.column_stack([init_alpha.T, 1.0 / state.xi_eta0])
    obs_var = np.broadcast_to(state.obs_var(), (K, T))
    return Z, obs_var, state_var, transition, init_var


def recompose_beta(state: ModelState, X: np.ndarray) -> np.ndarray:
    return state.mu[:, None] + np.einsum("tj,jkt->kt", X, state.alpha) + state.gamma


def update_dynamic_states(state: ModelState, X: np.ndarray, Ytilde: np.ndarray, rng) -> None:
    Z, obs_var, state_var, transition, init_var = dynamic_state_arrays(state, X)
    draw = smooth_batch(Z, obs_var, state_var, transition, init_var,
                        Ytilde - state.mu[:, None], rng)
    p = X.shape[1]
    state.alpha = draw[:, :, :p].transpose(2, 0, 1).copy()
    state.gamma = draw[:, :, p].copy()
    state.beta = recompose_beta(state, X)


def _phi_log_density(phi, gamma, prec, stationary):
    if stationary:
        u = (phi + 1.0) / 2
        a, b = PHI_BETA
        prior = (a - 1) * np.log(u) + (b - 1) * np.log1p(-u)
    else:
        prior = 0.0
    r = gamma[1:] - phi * gamma[:-1]
    return prior - 0.5 * float(np.dot(prec, r * r))


def update_mu_phi(state: ModelState, rng, stationary_phi: bool = True) -> None:
    prec_eta = 1.0 / state.mgp.eta_var                      # (K, T-1)
    prec_mu = 1.0 / state.mgp.sigma_mu**2
    bounds = (-1.0, 1.0) if stationary_phi else PHI_FLAT_BOUNDS
    for k in range(state.K):
        phi = state.phi[k]
        gc = state.gamma[k] + state.mu[k]
        Q = prec_mu[k] + (1.0 - phi) ** 2 * prec_eta[k].sum()
        ell = (1.0 - phi) * np.dot(gc[1:] - phi * gc[:-1], prec_eta[k])
        mu = ell / Q + rng.standard_normal() / np.sqrt(Q)
        g = gc - mu
        pk = prec_eta[k]
        phi = slice_sample(lambda x: _phi_log_density(x, g, pk, stationary_phi), phi, bounds, rng)
        state.mu[k] = mu
        state.phi[k] = phi
        state.gamma[k] = g


def residuals(state: ModelState) -> np.ndarray:
    return state.Y - state.fitted()


def update_observation_variance(state: ModelState, rng) -> None:
    resid = residuals(state)
    if state.sv is not None:
        shr.update_stochastic_volatility(resid, state.sv, rng)
        return
    ss = float(np.sum(resid * resid))
    if ss < 1e-300:
        warnings.warn("residual sum of squares is zero; the fit is degenerate", RuntimeWarning)
        ss = 1e-300
    T, M = resid.shape
    prec = rng.gamma(M * T / 2, 2.0 / ss)
    state.sigma2 = float(1.0 / np.clip(prec, shr.PREC_FLOOR, shr.PREC_CAP))


def factor_innovations(state: ModelState) -> np.ndarray:
    return state.gamma[:, 1:] - state.phi[:, None] * state.gamma[:, :-1]


def update_variances(state: ModelState, rng) -> None:
    """Observation variance, MGP parameters, then coefficient shrinkage."""
    update_observation_variance(state, rng)
    shr.update_mgp_mu(state.mu, state.mgp, rng)
    shr.update_mgp_eta(factor_innovations(state), state.mgp, rng)
    p = state.alpha.shape[0]
    if p == 0:
        return
    if state.variant == "FOSR-AR":
        shr.update_static_horseshoe(state.alpha[:, :, 0], state.hs, rng)
    else:
        omega = np.diff(state.alpha, axis=2)
        if state.variant == "DFOSR-HS":
            shr.update_horseshoe(omega, state.hs, rng)
        else:
            state.nig_prec = shr.update_nig(omega, rng)


def update_initial_scales(state: ModelState, rng) -> None:
    state.xi_eta0 = shr.update_initial_scales(state.gamma[:, 0], rng)
    if state.variant != "FOSR-AR" and state.alpha.shape[0]:
        state.xi_omega0 = shr.update_initial_scales(state.alpha[:, :, 0], rng)


def check_invariants(state: ModelState, X: np.ndarray) -> None:
    K = state.K
    gram = state.F.T @ state.F
    dev = float(np.abs(gram - np.eye(K)).max())
    if dev > ORTHO_TOL:
        raise AssertionError(f"loading orthonormality violated: max |F'F - I| = {dev:.3e}")
    gap = float(np.abs(recompose_beta(state, X) - state.beta).max())
    if gap > RECOMP_TOL * max(1.0, float(np.abs(state.beta).max())):
        raise AssertionError(f"factor recomposition violated by {gap:.3e}")


def gibbs_sweep(state: ModelState, data: FunctionalDataset, basis: BasisSystem,
                config: McmcConfig, rng, missing=None) -> None:
    """One pass of steps 1-8, each tagged for error reporting."""
    missing = data.missing if missing is None else missing
    X = data.X
    Ytilde = None

    def step3():
        nonlocal Ytilde
        Ytilde = project(state, basis)

    steps = (
        ("imputation", lambda: impute_missing(state, missing, rng)),
        ("loading curves", lambda: update_loading_curves(state, basis, rng)),
        ("projection", step3),
        ("dynamic states", lambda: update_dynamic_states(state, X, Ytilde, rng)),
        ("intercepts and AR coefficients", lambda: update_mu_phi(state, rng, config.stationary_phi)),
        ("variance parameters", lambda: update_variances(state, rng)),
        ("initial-state scales", lambda: update_initial_scales(state, rng)),
        ("hyperparameters", lambda: shr.update_hyper_shapes(state.mgp, rng)),
    )
    for name, fn in steps:
        try:
            fn()
        except Exception as exc:
            exc.add_note(f"during Gibbs step: {name}") if hasattr(exc, "add_note") else None
            raise GibbsError(f"step '{name}' failed: {exc}") from exc


def run_gibbs(config: McmcConfig, data: FunctionalDataset, basis: BasisSystem | None = None,
              progress_every: int = 0) -> PosteriorDraws:
    if basis is None:
        basis = build_basis(data.tau)
    if data.p and data.T < 2:
        raise ValueError("need at least two time points")
    rng = make_rng(config.seed)
    state = initialize_state(config, data, basis)
    missing = data.missing
    n_keep = config.n_keep
    p, K, T, M, L = data.p, config.K, data.T, data.M, basis.n_basis

    out = dict(
        Psi=np.empty((n_keep, L, K)), F=np.empty((n_keep, M, K)),
        alpha=np.empty((n_keep, p, K, T)), beta=np.empty((n_keep, K, T)),
        gamma=np.empty((n_keep, K, T)), mu=np.empty((n_keep, K)), phi=np.empty((n_keep, K)),
        obs_var=np.empty((n_keep, T)), imputed=np.empty((n_keep, int(missing.sum()))),
        lambda_f=np.empty((n_keep, K)),
    )
    start = time.perf_counter()
    kept = 0
    for it in range(config.n_iter):
        try:
            gibbs_sweep(state, data, basis, config, rng, missing)
        except GibbsError as exc:
            raise GibbsError(f"iteration {it}: {exc}") from exc.__cause__
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0 and kept < n_keep:
            check_invariants(state, data.X)
            out["Psi"][kept] = state.Psi
            out["F"][kept] = state.F
            out["alpha"][kept] = state.alpha
            out["beta"][kept] = state.beta
            out["gamma"][kept] = state.gamma
            out["mu"][kept] = state.mu
            out["phi"][kept] = state.phi
            out["obs_var"][kept] = state.obs_var()
            out["imputed"][kept] = state.Y[missing]
            out["lambda_f"][kept] = state.lambda_f
            kept += 1
        if progress_every and (it + 1) % progress_every == 0:
            log.info("iteration %d / %d", it + 1, config.n_iter)
    elapsed = time.perf_counter() - start
    return PosteriorDraws(basis=basis, X=data.X.copy(), missing=missing.copy(), config=config,
                          seconds=elapsed, **out)
