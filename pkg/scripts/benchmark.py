"""Wall-clock time per 1,000 Gibbs iterations for the two simulation sizes."""
import argparse
import time

from dfosr.gibbs import McmcConfig, run_gibbs
from dfosr.simstudy import simulate_design


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iters", type=int, default=1000)
    ap.add_argument("--variant", default="hs")
    ap.add_argument("--sv", action="store_true")
    args = ap.parse_args()
    for T, M in ((50, 20), (200, 100)):
        data = simulate_design("dynamic", T, M, 0).dataset()
        run_gibbs(McmcConfig(n_iter=3, burn_in=0, variant=args.variant), data)  # compile
        cfg = McmcConfig(K=6, n_iter=args.iters, burn_in=args.iters - 1, thin=1, variant=args.variant,
                         sv_enabled=args.sv)
        t0 = time.perf_counter()
        run_gibbs(cfg, data)
        dt = time.perf_counter() - t0
        print(f"T={T:4d} M={M:4d} p=15 K=6: {dt:7.2f}s per {args.iters} iterations "
              f"({1000 * dt / args.iters:.2f} ms/iteration)")


if __name__ == "__main__":
    main()
