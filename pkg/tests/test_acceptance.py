"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict; the lines are printed at the end of
the pytest run (see conftest.py) and also when this file is run directly.
"""
import time

import numpy as np
import pytest
from scipy import stats

import helpers
import test_bands as tb
import test_gibbs as tg
import test_shrinkage as tsh
from dfosr import gibbs as g
from dfosr import shrinkage as shr
from dfosr.basis import build_basis
from dfosr.sampling import make_rng
from dfosr.simstudy import run_study, simulate_design
from dfosr.statespace import smooth_batch

RESULTS = {}


def record(n, ok, detail, seconds=None, budget=None):
    if budget is not None and seconds is not None and seconds > budget:
        ok = False
        detail += f"; exceeded budget {budget:.0f}s"
    timing = f" [{seconds:.1f}s]" if seconds is not None else ""
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}{timing}"
    return ok


class timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


# 1 ------------------------------------------------------------------------------------

def test_c01_orthonormality():
    tr = simulate_design("dynamic", 50, 20, 101)
    with timer() as t:
        d = g.run_gibbs(g.McmcConfig(K=6, n_iter=2000, burn_in=0, thin=1, seed=1), tr.dataset())
    dev = max(np.abs(F.T @ F - np.eye(6)).max() for F in d.F)
    ok = record(1, dev < 1e-8, f"max |F'F - I| = {dev:.2e} over {d.n} iterations", t.s, 180)
    assert ok, RESULTS[1]


# 2 ------------------------------------------------------------------------------------

def test_c02_working_likelihood():
    rng = np.random.default_rng(2)
    T, M, K = 4, 5, 2
    F = np.linalg.qr(rng.standard_normal((M, K)))[0]
    Y = rng.standard_normal((T, M))
    sig2 = rng.uniform(0.5, 2, T)
    worst = 0.0
    for t in range(T):
        A = rng.standard_normal((K, K))
        P0, m0 = A @ A.T + np.eye(K), rng.standard_normal(K)
        Qf = F.T @ F / sig2[t] + P0
        mf = np.linalg.solve(Qf, F.T @ Y[t] / sig2[t] + P0 @ m0)
        Q, m = g.factor_posterior(F.T @ Y[t], sig2[t], m0, P0)
        worst = max(worst, np.abs(Q - Qf).max(), np.abs(m - mf).max())
    ok = record(2, worst < 1e-10, f"max moment difference {worst:.1e}")
    assert ok, RESULTS[2]


# 3 ------------------------------------------------------------------------------------

def test_c03_smoother_oracle():
    n = 50_000
    worst = (0.0, 0.0)
    with timer() as t:
        for T, p in [(3, 1), (4, 2)]:
            for rep in range(3):
                s = helpers.random_dlm(np.random.default_rng(500 + 10 * T + rep), T, p)
                mean, cov = helpers.dense_dlm_posterior(**s)
                rep_ = lambda a: np.broadcast_to(a, (n,) + a.shape)
                x = smooth_batch(rep_(s["Z"]), rep_(s["obs_var"]), rep_(s["state_var"]),
                                 rep_(s["transition"]), rep_(s["init_var"]), rep_(s["y"]),
                                 make_rng(rep + 17 * T)).reshape(n, -1)
                zm, zc = helpers.moment_zscores(x, mean, cov)
                worst = (max(worst[0], zm), max(worst[1], zc))
    ok = record(3, max(worst) < 4, f"max |z| mean {worst[0]:.2f}, covariance {worst[1]:.2f}", t.s, 120)
    assert ok, RESULTS[3]


# 4 and 5 share one study ------------------------------------------------------------------

STUDY = {}


def study_rows():
    if not STUDY:
        cfg = lambda v: g.McmcConfig(K=6, n_iter=5000, burn_in=2000, thin=3, variant=v)
        t0 = time.perf_counter()
        STUDY["dynamic"] = run_study("dynamic-small", [cfg("DFOSR-HS"), cfg("DFOSR-NIG")], 10, seed=2024)
        STUDY["static"] = run_study("static-small", [cfg("FOSR-AR"), cfg("DFOSR-HS"), cfg("DFOSR-NIG")], 10,
                                    seed=2025)
        STUDY["seconds"] = time.perf_counter() - t0
    return STUDY


def metric(rows, method, name):
    return np.array([r[name] for r in rows if r["method"] == method and r["status"] == "ok"])


@pytest.mark.slow
def test_c04_method_ordering():
    s = study_rows()
    dyn, sta = s["dynamic"], s["static"]
    failures = sum(r["status"] != "ok" for r in dyn + sta)
    med = lambda rows, m: float(np.median(metric(rows, m, "rmse")))
    d_hs, d_nig = med(dyn, "DFOSR-HS"), med(dyn, "DFOSR-NIG")
    s_ar, s_hs, s_nig = med(sta, "FOSR-AR"), med(sta, "DFOSR-HS"), med(sta, "DFOSR-NIG")
    ok = failures == 0 and d_hs < d_nig and s_ar <= s_hs < s_nig
    detail = (f"dynamic median RMSE HS {d_hs:.4f} vs NIG {d_nig:.4f}; static AR {s_ar:.4f}, HS {s_hs:.4f}, "
              f"NIG {s_nig:.4f}; {failures} failed fits")
    ok = record(4, ok, detail, s["seconds"], 1800)
    assert ok, RESULTS[4]


@pytest.mark.slow
def test_c05_coverage_and_width():
    dyn = study_rows()["dynamic"]
    cov_hs = metric(dyn, "DFOSR-HS", "coverage")
    cov_nig = metric(dyn, "DFOSR-NIG", "coverage")
    w_hs, w_nig = metric(dyn, "DFOSR-HS", "mciw"), metric(dyn, "DFOSR-NIG", "mciw")
    narrower = int(np.sum(w_hs < w_nig))
    ok = cov_hs.mean() >= 0.90 and cov_nig.mean() >= 0.90 and narrower >= 8
    detail = (f"mean coverage HS {cov_hs.mean():.3f} (min {cov_hs.min():.3f}), NIG {cov_nig.mean():.3f} "
              f"(min {cov_nig.min():.3f}); HS narrower in {narrower}/10")
    ok = record(5, ok, detail)
    assert ok, RESULTS[5]


# 6 ------------------------------------------------------------------------------------

@pytest.mark.slow
def test_c06_performance():
    out = []
    ok = True
    for (T, M), budget in (((50, 20), 48.0), ((200, 100), 180.0)):
        data = simulate_design("dynamic", T, M, 6).dataset()
        g.run_gibbs(g.McmcConfig(K=6, n_iter=5, burn_in=0), data)  # warm the compiled kernel
        with timer() as t:
            g.run_gibbs(g.McmcConfig(K=6, n_iter=1000, burn_in=900, thin=1, seed=6), data)
        ok &= t.s <= budget
        out.append(f"T={T}, M={M}: {t.s:.1f}s (budget {budget:.0f}s)")
    ok = record(6, ok, "; ".join(out))
    assert ok, RESULTS[6]


# 7 ------------------------------------------------------------------------------------

@pytest.mark.slow
def test_c07_prior_fidelity():
    n = 100_000
    with timer() as t:
        ratio = tsh.horseshoe_prior_chain(n, 71)
        ks_hc = stats.kstest(ratio, stats.halfcauchy.cdf).statistic
        v = tsh.t3_prior_chain(n, 72)
        ks_t3 = stats.kstest(v, stats.t(3).cdf).statistic
        rng = make_rng(73)
        mgp = shr.MgpState.initial(6, 2)
        acc = np.zeros(6)
        for _ in range(n):
            shr.update_mgp_mu(rng.standard_normal(6) * mgp.sigma_mu, mgp, rng)
            acc += mgp.sigma_mu**2
        means = acc / n
    ordered = bool(np.all(np.diff(means) < 0))
    ok = ks_hc < 0.02 and ks_t3 < 0.02 and ordered
    detail = (f"KS half-Cauchy {ks_hc:.4f}, KS t3 {ks_t3:.4f}; MGP variance means "
              f"{np.array2string(means, precision=3)} {'decreasing' if ordered else 'NOT decreasing'}")
    ok = record(7, ok, detail, t.s, 300)
    assert ok, RESULTS[7]


# 8 ------------------------------------------------------------------------------------

@pytest.mark.slow
def test_c08_synthetic_recovery():
    with timer() as t:
        phi_hat = tg.ar_recovery(T=200, phi_true=0.8, seed=81)
        tr = simulate_design("dynamic", 50, 20, 82)
        d = g.run_gibbs(g.McmcConfig(K=6, n_iter=3000, burn_in=1000, thin=2, seed=82), tr.dataset())
        sigma_hat = float(np.sqrt(d.obs_var).mean())
        sv_est, sd = tsh.two_regime_recovery(seed=83)
    rel_sigma = abs(sigma_hat / tr.sigma_star - 1)
    rel_sv = [abs(sv_est[sd == lv].mean() / lv - 1) for lv in (0.1, 1.0)]
    ok = abs(phi_hat - 0.8) < 0.1 and rel_sigma < 0.10 and max(rel_sv) < 0.25
    detail = (f"phi {phi_hat:.3f} (truth 0.8); noise sd {sigma_hat:.4f} vs {tr.sigma_star:.4f} "
              f"({100 * rel_sigma:.1f}%); SV regime errors {100 * rel_sv[0]:.1f}%, {100 * rel_sv[1]:.1f}%")
    ok = record(8, ok, detail, t.s, 600)
    assert ok, RESULTS[8]


# 9 ------------------------------------------------------------------------------------

def test_c09_basis_suite():
    nulls, affine, limit = [], 0.0, 0.0
    for M in (7, 20, 31, 100, 604):
        tau = np.linspace(0, 1, M)
        b = build_basis(tau)
        ev = np.linalg.eigvalsh(b.Omega)
        nulls.append(int(np.sum(np.abs(ev) < 1e-8)))
        y = 2 - 3 * tau
        for lam in (1e-4, 1.0, 1e6):
            affine = max(affine, np.abs(b.smoother(lam) @ y - y).max())
        sig = np.cos(4 * tau) + tau**3
        line = np.polyval(np.polyfit(tau, sig, 1), tau)
        limit = max(limit, np.abs(b.smoother(1e12) @ sig - line).max())
    ok = all(n == 2 for n in nulls) and affine < 1e-8 and limit < 1e-4
    ok = record(9, ok, f"null-space dims {nulls}; affine error {affine:.1e}; large-penalty gap {limit:.1e}")
    assert ok, RESULTS[9]


# 10 -----------------------------------------------------------------------------------

def test_c10_band_coverage():
    with timer() as t:
        cov = tb.band_coverage(trials=1000, n_draws=10_000, M=10, level=0.95, seed=10)
    ok = record(10, 0.93 <= cov <= 0.97, f"simultaneous coverage {cov:.3f} over 1000 trials", t.s, 120)
    assert ok, RESULTS[10]


if __name__ == "__main__":
    import sys
    for name, fn in sorted((k, v) for k, v in dict(globals()).items() if k.startswith("test_c")):
        try:
            fn()
        except AssertionError:
            pass
    for n in sorted(RESULTS):
        print(RESULTS[n])
    sys.exit(0 if all("PASS" in v for v in RESULTS.values()) else 1)
