"""Dichotomy scan (acceptance criterion 5): alpha sweep around lambda_1(H^3).

Usage: python3 scripts/dichotomy_scan.py [--out DIR] [--workers N] [--factors 0.25,0.5,...]

Runs the PiecewiseLinearPower(alpha, 2) sweep with alpha = factor * lambda_hat
from the same small bump, writes the sweep summary CSV and prints the
prediction/observation table.
"""
import argparse

from fujitalab.acceptance import DICHOTOMY_FACTORS, REPORTED_FACTORS, dichotomy_config
from fujitalab.experiment import run_sweep
from fujitalab.spectral import lambda1_manifold


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/dichotomy")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--factors", default=",".join(str(c) for c in DICHOTOMY_FACTORS + REPORTED_FACTORS))
    args = ap.parse_args()
    base = dichotomy_config()
    lam = lambda1_manifold(base.manifold.build(), base.spectrum.schedule()).extrapolated
    factors = [float(x) for x in args.factors.split(",")]
    recs = run_sweep(base, "nonlinearity.alpha", [c * lam for c in factors], args.out, workers=args.workers)
    print(f"lambda_hat = {lam:.6f}")
    print(f"{'alpha/lambda':>12} {'alpha':>9} {'predicted':>20} {'observed':>9} {'t*/horizon':>11}")
    for c, r in zip(factors, recs):
        t = r.outcome.get("t_star", r.outcome.get("horizon", float("nan")))
        print(f"{c:12.3g} {c * lam:9.4f} {r.prediction.get('verdict', 'Error'):>20} "
              f"{r.outcome.get('outcome', 'Error'):>9} {float(t):11.4f}")


if __name__ == "__main__":
    main()
