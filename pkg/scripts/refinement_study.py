"""Grid refinement of the blow-up time (the 'sweep over grid n' study).

Usage: python3 scripts/refinement_study.py [--config configs/h3-blowup-alpha1.5.txt] [--out DIR]

Sweeps grid.h over successive halvings and prints t_star with the observed
convergence order log2(|t_h - t_{h/2}| / |t_{h/2} - t_{h/4}|).
"""
import argparse
import math

from fujitalab.config import load_config
from fujitalab.experiment import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/h3-blowup-alpha1.5.txt")
    ap.add_argument("--out", default="runs/refinement")
    ap.add_argument("--spacings", default="0.2,0.1,0.05")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = load_config(args.config)
    hs = [float(x) for x in args.spacings.split(",")]
    recs = run_sweep(cfg, "grid.h", hs, args.out, workers=args.workers)
    ts = [float(r.outcome.get("t_star", math.nan)) for r in recs]
    print(f"{'h':>8} {'t_star':>14} {'order':>7}")
    for i, (h, t) in enumerate(zip(hs, ts)):
        order = ""
        if i >= 2 and ts[i - 1] != t:
            order = f"{math.log2(abs(ts[i - 2] - ts[i - 1]) / abs(ts[i - 1] - t)):7.2f}"
        print(f"{h:8.4g} {t:14.8f} {order:>7}")


if __name__ == "__main__":
    main()
