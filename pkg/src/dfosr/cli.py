"""Command-line entry point: ``simulate``, ``fit`` and ``summarize``.

Exit codes: 0 success, 1 usage error (bad flags, unreadable inputs),
2 runtime error (malformed data, sampler failure, unwritable output).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bands import simultaneous_band
from .basis import build_basis
from .data import DataFormatError, load_dataset
from .gibbs import McmcConfig, PosteriorDraws, canonical_variant, run_gibbs
from .simstudy import DESIGNS, run_study, summarize_report, write_report

log = logging.getLogger("dfosr")

STATISTICS = ("mean", "lower", "upper", "sim_lower", "sim_upper")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    response: str | None = None
    predictors: str | None = None
    standardize: bool = False
    out: str = "dfosr_out"
    level: float = 0.95
    design: str = "dynamic-small"
    reps: int = 1
    variants: tuple = ("DFOSR-HS", "DFOSR-NIG", "FOSR-AR")

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("band level must lie in (0, 1)")


# -- config files -----------------------------------------------------------------

_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False, "on": True, "off": False}
_KEYS = {
    "k": int, "iters": int, "burnin": int, "thin": int, "seed": int, "variant": str,
    "sv": "bool", "stationary_phi": "bool", "standardize": "bool", "level": float,
    "design": str, "reps": int, "out": str, "predictors": str, "response": str,
}


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for n, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in _KEYS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        kind = _KEYS[key]
        try:
            if kind == "bool":
                out[key] = _BOOL[value.lower()]
            else:
                out[key] = kind(value)
        except (KeyError, ValueError):
            raise UsageError(f"{path}:{n}: bad value {value!r} for {key}") from None
    return out


def _merge(args, defaults: dict) -> dict:
    """Command-line values override config-file values, which override defaults."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key in _KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _mcmc_from(opts: dict, variant=None) -> McmcConfig:
    return McmcConfig(
        K=opts["k"], n_iter=opts["iters"], burn_in=opts["burnin"], thin=opts["thin"],
        variant=variant or opts["variant"], sv_enabled=opts["sv"],
        stationary_phi=opts["stationary_phi"], seed=opts["seed"],
    )


_DEFAULTS = dict(k=6, iters=5000, burnin=2000, thin=3, seed=0, variant="hs", sv=False,
                 stationary_phi=True, standardize=False, level=0.95, design="dynamic-small",
                 reps=1, out="dfosr_out", predictors=None, response=None)


# -- draws on disk -------------------------------------------------------------------

def save_draws(draws: PosteriorDraws, path, dataset=None) -> None:
    extra = {}
    if dataset is not None:
        extra = dict(data_Y=dataset.Y, time_labels=np.array(dataset.time_labels, dtype=str),
                     predictor_names=np.array(dataset.predictor_names, dtype=str))
    np.savez_compressed(
        path, Psi=draws.Psi, F=draws.F, alpha=draws.alpha, beta=draws.beta, gamma=draws.gamma,
        mu=draws.mu, phi=draws.phi, obs_var=draws.obs_var, imputed=draws.imputed,
        lambda_f=draws.lambda_f, X=draws.X, missing=draws.missing,
        points=draws.basis.points, knots=draws.basis.knots,
        config=json.dumps(dataclasses.asdict(draws.config), sort_keys=True), **extra,
    )


def load_draws(path):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"draws file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        basis = build_basis(z["points"], z["knots"])
        config = McmcConfig(**json.loads(str(z["config"])))
        draws = PosteriorDraws(
            basis=basis, X=z["X"], missing=z["missing"], Psi=z["Psi"], F=z["F"], alpha=z["alpha"],
            beta=z["beta"], gamma=z["gamma"], mu=z["mu"], phi=z["phi"], obs_var=z["obs_var"],
            imputed=z["imputed"], lambda_f=z["lambda_f"], config=config,
        )
        meta = {k: z[k] for k in ("data_Y", "time_labels", "predictor_names") if k in z}
    return draws, meta


# -- summaries -------------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def _band_rows(writer, quantity, j, t, tau, curve_draws, level):
    band = simultaneous_band(curve_draws, level)
    for stat in STATISTICS:
        vals = getattr(band, stat)
        for m, (x, v) in enumerate(zip(tau, vals)):
            writer.writerow([quantity, j, t, m, _fmt(x), stat, _fmt(v)])


HEADER = ["quantity", "j", "t", "m", "tau", "statistic", "value"]


def summarize(draws: PosteriorDraws, out_dir, level: float = 0.95, meta=None) -> list:
    """Write tidy summary CSVs and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = meta or {}
    tau = draws.tau
    p = draws.alpha.shape[1]
    T = draws.beta.shape[2]
    written = []

    def open_csv(name):
        path = out / name
        written.append(path)
        fh = path.open("w", newline="")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        return fh, w

    fh, w = open_csv("surfaces.csv")
    with fh:
        for j in range(p):
            s = draws.regression_surface(j)
            for t in range(T):
                _band_rows(w, "surface", j, t, tau, s[:, t], level)

    fh, w = open_csv("fitted.csv")
    with fh:
        fit = draws.fitted_curves()
        for t in range(T):
            _band_rows(w, "fitted", "", t, tau, fit[:, t], level)

    fh, w = open_csv("loadings.csv")
    with fh:
        F = draws.aligned_loadings()
        for k in range(F.shape[2]):
            _band_rows(w, "loading", k, "", tau, F[:, :, k], level)

    if "data_Y" in meta and draws.missing.any():
        fh, w = open_csv("imputed.csv")
        with fh:
            curves = draws.imputed_curves(meta["data_Y"])
            for t in range(T):
                _band_rows(w, "imputed", "", t, tau, curves[:, t], level)

    fh, w = open_csv("obs_sd.csv")
    with fh:
        sd = np.sqrt(draws.obs_var)
        tail = (1 - level) / 2
        lo, hi = np.quantile(sd, [tail, 1 - tail], axis=0)
        for t in range(T):
            for stat, v in (("mean", sd[:, t].mean()), ("lower", lo[t]), ("upper", hi[t])):
                w.writerow(["obs_sd", "", t, "", "", stat, _fmt(v)])
    return written


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config: dict, inputs: dict, extra=None) -> Path:
    manifest = {
        "version": __version__,
        "seed": config.get("seed"),
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": file_digest(p)} for name, p in inputs.items() if p},
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


# -- subcommands -----------------------------------------------------------------------

def _ensure_out(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(args) -> int:
    opts = _merge(args, _DEFAULTS)
    if not opts.get("response"):
        raise UsageError("fit needs a response CSV")
    for key in ("response", "predictors"):
        if opts.get(key) and not Path(opts[key]).is_file():
            raise UsageError(f"{key} file not found: {opts[key]}")
    mcmc = _mcmc_from(opts)
    data = load_dataset(opts["response"], opts.get("predictors"), standardize=opts["standardize"])
    out = _ensure_out(opts["out"])
    log.info("fitting %s with K=%d to T=%d curves on M=%d points", mcmc.variant, mcmc.K, data.T, data.M)
    draws = run_gibbs(mcmc, data)
    save_draws(draws, out / "draws.npz", data)
    if not args.no_summary:
        summarize(draws, out, opts["level"], {"data_Y": data.Y})
    write_manifest(out, opts, {"response": opts["response"], "predictors": opts.get("predictors")},
                   {"n_draws": draws.n, "mcmc": dataclasses.asdict(mcmc)})
    print(f"{draws.n} draws written to {out}")
    return 0


def cmd_summarize(args) -> int:
    draws, meta = load_draws(args.draws)
    level = args.level if args.level is not None else 0.95
    out = _ensure_out(args.out or Path(args.draws).parent)
    paths = summarize(draws, out, level, meta)
    print("\n".join(str(p) for p in paths))
    return 0


def cmd_simulate(args) -> int:
    opts = _merge(args, dict(_DEFAULTS, variant=None))
    if opts["design"] not in DESIGNS:
        raise UsageError(f"unknown design {opts['design']!r}; choose from {sorted(DESIGNS)}")
    try:
        variants = ([canonical_variant(v) for v in opts["variant"].split(",")] if opts["variant"]
                    else list(RunConfig().variants))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    methods = [_mcmc_from(opts, v) for v in variants]
    out = _ensure_out(opts["out"])
    rows = run_study(opts["design"], methods, opts["reps"], seed=opts["seed"])
    write_report(rows, out / "metrics.csv", include_timing=False)
    write_report(rows, out / "timing.csv")
    opts["variant"] = ",".join(variants)
    write_manifest(out, opts, {}, {"summary": {f"{d}/{m}": v for (d, m), v in summarize_report(rows).items()}})
    for (design, method), s in sorted(summarize_report(rows).items()):
        print(f"{design:14s} {method:10s} n={s['n']:3d} rmse={s['rmse']:.4f} "
              f"mciw={s['mciw']:.4f} coverage={s['coverage']:.3f}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _add_mcmc_flags(p):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="number of factors")
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--sv", action="store_true", default=None, help="stochastic volatility errors")
    p.add_argument("--flat-phi", dest="stationary_phi", action="store_false", default=None,
                   help="flat prior on (-0.99, 0.99) for the AR coefficients")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfosr", description="Dynamic function-on-scalars regression")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="run the Gibbs sampler on a dataset")
    fit.add_argument("response", nargs="?", help="wide response CSV")
    fit.add_argument("--predictors", help="predictor CSV")
    fit.add_argument("--standardize", action="store_true", default=None)
    fit.add_argument("--variant", choices=["hs", "nig", "fosr-ar"])
    fit.add_argument("--level", type=float, help="band level (default 0.95)")
    fit.add_argument("--no-summary", action="store_true")
    _add_mcmc_flags(fit)
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="run a simulation study")
    sim.add_argument("--design", choices=sorted(DESIGNS))
    sim.add_argument("--reps", type=int)
    sim.add_argument("--variant", help="comma-separated subset of hs,nig,fosr-ar")
    _add_mcmc_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    summ = sub.add_parser("summarize", help="summaries and bands from stored draws")
    summ.add_argument("draws", help="draws.npz from 'fit'")
    summ.add_argument("--level", type=float)
    summ.add_argument("--out")
    summ.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, ValueError, OSError, RuntimeError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
