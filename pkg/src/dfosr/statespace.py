"""Joint simulation of dynamic regression states for one factor.

For factor k the projected series follows a dynamic linear model with state
``s_t = (alpha_{1,k,t}, ..., alpha_{p,k,t}, gamma_{k,t})``::

    y_t     = z_t' s_t + e_t,             e_t ~ N(0, obs_var[t])
    s_t     = G s_{t-1} + w_t,            w_t ~ N(0, diag(state_var[t]))   (t >= 1)
    s_0     ~ N(0, diag(init_var))

with ``z_t = (x_t', 1)`` and ``G = diag(1, ..., 1, phi)``.  Draws use the
mean-correction simulation smoother of Durbin and Koopman (2002): simulate
an unconditional path and pseudo-data, smooth the difference with a
covariance-form Kalman filter, and add the smoothed mean back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


class NumericalDegeneracyError(FloatingPointError):
    pass


@dataclass
class DlmSpec:
    Z: np.ndarray                # (T, p + 1) rows (x_t', 1)
    phi: float
    obs_var: np.ndarray          # (T,)
    alpha_innov_var: np.ndarray  # (T, p); row 0 unused
    gamma_innov_var: np.ndarray  # (T,);  entry 0 unused
    init_var: np.ndarray         # (p + 1,)

    @property
    def T(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1] - 1

    def validate(self):
        T, m = self.Z.shape
        if self.obs_var.shape != (T,) or self.gamma_innov_var.shape != (T,):
            raise ValueError("variance vectors must have length T")
        if self.alpha_innov_var.shape != (T, m - 1) or self.init_var.shape != (m,):
            raise ValueError("state variance shapes do not match the design")
        for name in ("obs_var", "alpha_innov_var", "gamma_innov_var", "init_var"):
            v = getattr(self, name)
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        if np.any(self.obs_var <= 0):
            raise ValueError("observation variances must be positive")

    def state_var(self) -> np.ndarray:
        return np.column_stack([self.alpha_innov_var, self.gamma_innov_var])

    def transition(self) -> np.ndarray:
        return np.r_[np.ones(self.p), self.phi]


@dataclass
class StatePath:
    alpha: np.ndarray  # (T, p)
    gamma: np.ndarray  # (T,)


@numba.njit(cache=True)
def _dk_kernel(Z, H, W, G, P1, y, e_obs, e_state, out):
    nb, T, m = Z.shape
    v = np.empty(T)
    F = np.empty(T)
    Kg = np.empty((T, m))
    a = np.empty(m)
    P = np.empty((m, m))
    Pz = np.empty(m)
    splus = np.empty((T, m))
    r = np.empty(m)
    rstore = np.empty((T, m))
    for b in range(nb):
        # unconditional pseudo-path and pseudo-data
        for i in range(m):
            splus[0, i] = np.sqrt(P1[b, i]) * e_state[b, 0, i]
        for t in range(1, T):
            for i in range(m):
                splus[t, i] = G[b, i] * splus[t - 1, i] + np.sqrt(W[b, t, i]) * e_state[b, t, i]

        # covariance-form filter on y - y+
        for i in range(m):
            a[i] = 0.0
            for j in range(m):
                P[i, j] = 0.0
            P[i, i] = P1[b, i]
        for t in range(T):
            ystar = y[b, t] - np.sqrt(H[b, t]) * e_obs[b, t]
            pred = 0.0
            for i in range(m):
                ystar -= Z[b, t, i] * splus[t, i]
                pred += Z[b, t, i] * a[i]
            f = H[b, t]
            for i in range(m):
                acc = 0.0
                for j in range(m):
                    acc += P[i, j] * Z[b, t, j]
                Pz[i] = acc
                f += Z[b, t, i] * acc
            if not (f > 0.0) or not np.isfinite(f):
                return b * T + t + 1
            v[t] = ystar - pred
            F[t] = f
            for i in range(m):
                Kg[t, i] = G[b, i] * Pz[i] / f
                a[i] = G[b, i] * a[i] + Kg[t, i] * v[t]
            if t + 1 < T:
                for i in range(m):
                    for j in range(i, m):
                        val = G[b, i] * P[i, j] * G[b, j] - f * Kg[t, i] * Kg[t, j]
                        if i == j:
                            val += W[b, t + 1, i]
                            if val < 0.0:
                                val = 0.0
                        P[i, j] = val
                        P[j, i] = val

        # backward recursion for the smoothing cumulant r
        for i in range(m):
            r[i] = 0.0
        for t in range(T - 1, -1, -1):
            kr = 0.0
            for i in range(m):
                kr += Kg[t, i] * r[i]
            for i in range(m):
                r[i] = Z[b, t, i] * (v[t] / F[t] - kr) + G[b, i] * r[i]
                rstore[t, i] = r[i]

        # forward pass for the smoothed mean, added to the pseudo-path
        for i in range(m):
            a[i] = P1[b, i] * rstore[0, i]
            out[b, 0, i] = splus[0, i] + a[i]
        for t in range(1, T):
            for i in range(m):
                a[i] = G[b, i] * a[i] + W[b, t, i] * rstore[t, i]
                out[b, t, i] = splus[t, i] + a[i]
    return 0


def smooth_batch(Z, obs_var, state_var, transition, init_var, y, rng) -> np.ndarray:
    """Draw state paths for a batch of independent models.

    Shapes: Z (B, T, m), obs_var (B, T), state_var (B, T, m) with row 0
    unused, transition (B, m), init_var (B, m), y (B, T).  Returns (B, T, m).
    """
    Z = np.ascontiguousarray(Z, dtype=float)
    nb, T, m = Z.shape
    e_obs = rng.standard_normal((nb, T))
    e_state = rng.standard_normal((nb, T, m))
    out = np.empty((nb, T, m))
    status = _dk_kernel(
        Z,
        np.ascontiguousarray(obs_var, dtype=float),
        np.ascontiguousarray(state_var, dtype=float),
        np.ascontiguousarray(transition, dtype=float),
        np.ascontiguousarray(init_var, dtype=float),
        np.ascontiguousarray(y, dtype=float),
        e_obs,
        e_state,
        out,
    )
    if status:
        b, t = divmod(status - 1, T)
        raise NumericalDegeneracyError(
            f"prediction variance is not positive (batch {b}, time {t})"
        )
    return out


def simulation_smoother(spec: DlmSpec, y, rng) -> StatePath:
    spec.validate()
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.T,) or not np.all(np.isfinite(y)):
        raise ValueError("observations must be a finite length-T vector")
    draw = smooth_batch(
        spec.Z[None], spec.obs_var[None], spec.state_var()[None],
        spec.transition()[None], spec.init_var[None], y[None], rng,
    )[0]
    return StatePath(alpha=draw[:, :-1], gamma=draw[:, -1])


def build_dlm_spec(k: int, state, data) -> DlmSpec:
    """Assemble the state-space model for factor ``k`` from the sampler state."""
    X = data.X
    T, p = X.shape
    if state.alpha.shape != (p, state.K, T):
        raise ValueError(f"alpha has shape {state.alpha.shape}, expected {(p, state.K, T)}")
    Z = np.column_stack([X, np.ones(T)])
    alpha_var, init_alpha = state.alpha_variances()
    gamma_var = np.r_[0.0, state.mgp.eta_var[k]]
    init = np.r_[init_alpha[:, k], 1.0 / state.xi_eta0[k]]
    return DlmSpec(
        Z=Z,
        phi=float(state.phi[k]),
        obs_var=state.obs_var(),
        alpha_innov_var=alpha_var[:, k, :].T,
        gamma_innov_var=gamma_var,
        init_var=init,
    )
