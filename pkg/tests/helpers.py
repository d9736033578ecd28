"""Dense reference computations shared by several test modules."""
import numpy as np


def dense_dlm_posterior(Z, obs_var, state_var, transition, init_var, y):
    """Exact conditional mean and covariance of the stacked states (T*m,).

    Builds the joint prior by writing every state as a linear map of the
    initial state and the innovations, then conditions on y.
    """
    T, m = Z.shape
    n = T * m
    A = np.zeros((n, n))
    G = np.diag(transition)
    for t in range(T):
        for s in range(t + 1):
            A[t * m:(t + 1) * m, s * m:(s + 1) * m] = np.linalg.matrix_power(G, t - s)
    d = np.concatenate([init_var] + [state_var[t] for t in range(1, T)])
    S = A @ np.diag(d) @ A.T
    H = np.zeros((T, n))
    for t in range(T):
        H[t, t * m:(t + 1) * m] = Z[t]
    Syy = H @ S @ H.T + np.diag(obs_var)
    gain = S @ H.T @ np.linalg.inv(Syy)
    return gain @ y, S - gain @ H @ S


def moment_zscores(x, mean, cov):
    n = x.shape[0]
    sd = np.sqrt(np.clip(np.diag(cov), 1e-300, None))
    zm = np.abs(x.mean(0) - mean) / (sd / np.sqrt(n))
    emp = np.cov(x, rowvar=False)
    se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n)
    live = se > 1e-12
    zc = np.abs(emp - cov)[live] / se[live]
    return zm.max(), zc.max()


def random_dlm(rng, T, p):
    m = p + 1
    Z = np.column_stack([rng.standard_normal((T, p)), np.ones(T)])
    state_var = rng.uniform(0.2, 1.5, (T, m))
    state_var[0] = 0.0
    return dict(
        Z=Z,
        obs_var=rng.uniform(0.3, 2.0, T),
        state_var=state_var,
        transition=np.r_[np.ones(p), rng.uniform(-0.9, 0.9)],
        init_var=rng.uniform(0.5, 3.0, m),
        y=rng.standard_normal(T) * 2,
    )
