"""Synthetic designs with sparse, locally constant regression surfaces, and
the accuracy metrics used to compare model variants on them."""
from __future__ import annotations

import csv
import hashlib
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import FunctionalDataset
from .gibbs import McmcConfig, PosteriorDraws, run_gibbs

log = logging.getLogger(__name__)

K_TRUE = 4
P_NULL = 10
P_ACTIVE = 5
JUMP_PROB = 0.01
AR_COEF = 0.8
RSNR = 5.0
POLY_DEGREES = (0, 2, 3, 4)

DESIGNS = {
    "dynamic-small": ("dynamic", 50, 20),
    "static-small": ("static", 50, 20),
    "dynamic-large": ("dynamic", 200, 100),
    "static-large": ("static", 200, 100),
}


@dataclass
class SimTruth:
    kind: str
    f_star: np.ndarray      # (M, K*)
    alpha_star: np.ndarray  # (p, K*, T)
    mu_star: np.ndarray     # (K*,)
    gamma_star: np.ndarray  # (K*, T)
    X: np.ndarray           # (T, p)
    tau: np.ndarray
    sigma_star: float
    Y_star: np.ndarray      # (T, M)
    Y: np.ndarray
    active_factors: dict

    @property
    def beta_star(self) -> np.ndarray:
        return self.mu_star[:, None] + np.einsum("tj,jkt->kt", self.X, self.alpha_star) + self.gamma_star

    def surfaces(self) -> np.ndarray:
        """True regression surfaces, shape (p, T, M)."""
        return np.einsum("mk,jkt->jtm", self.f_star, self.alpha_star)

    def dataset(self) -> FunctionalDataset:
        return FunctionalDataset(self.Y.copy(), self.tau.copy(), self.X.copy())


def orthonormal_polynomials(tau, degrees=POLY_DEGREES) -> np.ndarray:
    """Grid-orthonormal polynomials (Gram-Schmidt on centered monomials)."""
    x = (tau - tau.mean()) / (np.ptp(tau) or 1.0)
    V = np.vander(x, max(degrees) + 1, increasing=True)
    Q, R = np.linalg.qr(V)
    Q = Q * np.sign(np.diag(R))
    return Q[:, list(degrees)]


def truncated_poisson(rng, lam=1.0, low=1, high=K_TRUE) -> int:
    while True:
        v = rng.poisson(lam)
        if low <= v <= high:
            return int(v)


def simulate_design(kind: str, T: int, M: int, seed: int, p_null: int = P_NULL,
                    p_active: int = P_ACTIVE, rsnr: float = RSNR) -> SimTruth:
    if kind not in ("dynamic", "static"):
        raise ValueError(f"kind must be 'dynamic' or 'static', got {kind!r}")
    if T < 2 or M < 8:
        raise ValueError("need T >= 2 and M >= 8")
    rng = np.random.default_rng(seed)
    p = p_null + p_active
    tau = np.linspace(0.0, 1.0, M)
    f_star = orthonormal_polynomials(tau)
    scale = 1.0 / np.arange(1, K_TRUE + 1)

    alpha = np.zeros((p, K_TRUE, T))
    active = {}
    for j in range(p_active):
        n_k = truncated_poisson(rng)
        ks = np.sort(rng.choice(K_TRUE, size=n_k, replace=False))
        active[j] = ks.tolist()
        for k in ks:
            if kind == "static":
                alpha[j, k] = rng.normal(0.0, scale[k])
            else:
                level = rng.normal(0.0, scale[k])
                jumps = rng.normal(0.0, scale[k], T) * (rng.random(T) < JUMP_PROB)
                alpha[j, k] = level + np.cumsum(jumps)

    X = rng.standard_normal((T, p))
    mu = scale.copy()
    gamma = np.empty((K_TRUE, T))
    gamma[:, 0] = rng.normal(0.0, scale)
    innov_sd = scale * np.sqrt(1 - AR_COEF**2)
    for t in range(1, T):
        gamma[:, t] = AR_COEF * gamma[:, t - 1] + rng.normal(0.0, innov_sd)

    beta = mu[:, None] + np.einsum("tj,jkt->kt", X, alpha) + gamma
    Y_star = (f_star @ beta).T
    sigma = float(np.std(Y_star, ddof=1) / rsnr)
    Y = Y_star + sigma * rng.standard_normal((T, M))
    return SimTruth(kind, f_star, alpha, mu, gamma, X, tau, sigma, Y_star, Y, active)


def rmse(estimate, truth) -> float:
    estimate = np.asarray(estimate, dtype=float)
    truth = truth.surfaces() if isinstance(truth, SimTruth) else np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"estimate shape {estimate.shape} does not match truth {truth.shape}")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def mciw_and_coverage(samples, truth, level: float = 0.90):
    """Mean width of central intervals and the share of cells they cover.

    ``samples`` has a leading draw axis and the truth's shape after it.
    """
    samples = np.asarray(samples, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if samples.shape[0] < 100:
        raise ValueError(f"need at least 100 draws, got {samples.shape[0]}")
    if samples.shape[1:] != truth.shape:
        raise ValueError(f"draw shape {samples.shape[1:]} does not match truth {truth.shape}")
    tail = (1.0 - level) / 2
    lo, hi = np.quantile(samples, [tail, 1.0 - tail], axis=0)
    return float(np.mean(hi - lo)), float(np.mean((truth >= lo) & (truth <= hi)))


def surface_metrics(draws: PosteriorDraws, truth: SimTruth, level: float = 0.90) -> dict:
    """RMSE of the posterior-mean surfaces plus MCIW and coverage, one predictor at a time."""
    true_s = truth.surfaces()
    sq, widths, covered = 0.0, 0.0, 0.0
    for j in range(true_s.shape[0]):
        s = draws.regression_surface(j)
        sq += float(np.sum((s.mean(axis=0) - true_s[j]) ** 2))
        w, c = mciw_and_coverage(s, true_s[j], level)
        widths += w
        covered += c
    p = true_s.shape[0]
    return {"rmse": float(np.sqrt(sq / true_s.size)), "mciw": widths / p, "coverage": covered / p}


def replicate_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])


def data_checksum(Y) -> str:
    return hashlib.sha256(np.ascontiguousarray(Y).tobytes()).hexdigest()[:16]


def _one_replicate(design: str, methods, rep: int, seed: int) -> list:
    kind, T, M = DESIGNS[design]
    rs = replicate_seed(seed, rep)
    truth = simulate_design(kind, T, M, rs)
    data = truth.dataset()
    check = data_checksum(truth.Y)
    rows = []
    for cfg in methods:
        cfg = replace(cfg, seed=rs)
        row = {"design": design, "replicate": rep, "method": cfg.variant, "seed": rs,
               "checksum": check, "rmse": np.nan, "mciw": np.nan, "coverage": np.nan,
               "seconds": np.nan, "status": "ok", "error": ""}
        start = time.perf_counter()
        try:
            draws = run_gibbs(cfg, data)
            row.update(surface_metrics(draws, truth))
        except Exception as exc:  # keep the study going
            log.warning("replicate %d, %s failed: %s", rep, cfg.variant, exc)
            row.update(status="failed", error=str(exc).replace("\n", " "))
        row["seconds"] = time.perf_counter() - start
        rows.append(row)
    return rows


def worker_count() -> int:
    env = os.environ.get("DFOSR_THREADS")
    if env:
        return max(1, int(env))
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_study(design: str, methods, n_reps: int, seed: int = 0, workers: int | None = None) -> list:
    """Fit every method to ``n_reps`` paired replicates; one row per (replicate, method)."""
    if design not in DESIGNS:
        raise ValueError(f"unknown design {design!r}; choose from {sorted(DESIGNS)}")
    methods = [m if isinstance(m, McmcConfig) else McmcConfig(**m) for m in methods]
    workers = min(worker_count() if workers is None else workers, n_reps)
    if workers <= 1:
        chunks = [_one_replicate(design, methods, r, seed) for r in range(n_reps)]
    else:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_one_replicate, design, methods, r, seed) for r in range(n_reps)]
            chunks = [f.result() for f in futures]
    return [row for chunk in chunks for row in chunk]


REPORT_FIELDS = ("design", "replicate", "method", "seed", "checksum", "rmse", "mciw",
                 "coverage", "seconds", "status", "error")


def write_report(rows, path, include_timing: bool = True) -> None:
    fields = [f for f in REPORT_FIELDS if include_timing or f != "seconds"]
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def summarize_report(rows) -> dict:
    """Median metrics per (design, method) over successful replicates."""
    out = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        out.setdefault((row["design"], row["method"]), []).append(row)
    return {key: {m: float(np.median([r[m] for r in rs])) for m in ("rmse", "mciw", "coverage")}
            | {"n": len(rs)} for key, rs in out.items()}


__all__ = [
    "SimTruth", "simulate_design", "orthonormal_polynomials", "rmse", "mciw_and_coverage",
    "surface_metrics", "run_study", "write_report", "summarize_report", "DESIGNS",
]
