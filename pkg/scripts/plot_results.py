"""Post-processing plots from run directories (outside the acceptance surface; needs matplotlib).

Usage: python3 scripts/plot_results.py RUN_DIR [RUN_DIR ...] [--sweep SUMMARY.csv] [--out FIG.png]

Plots sup-norm histories (log scale) of each run.csv, and, with --sweep, the
observed outcome against the swept value.
"""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("runs", nargs="*")
    ap.add_argument("--sweep")
    ap.add_argument("--out", default="fujitalab.png")
    args = ap.parse_args()
    ncols = 2 if args.sweep else 1
    fig, axes = plt.subplots(1, ncols, figsize=(6 * ncols, 4), squeeze=False)
    ax = axes[0, 0]
    for d in args.runs:
        rows = read_csv(Path(d) / "run.csv")
        ax.semilogy([float(r["t"]) for r in rows], [max(float(r["sup"]), 1e-300) for r in rows],
                    label=Path(d).name)
    ax.set_xlabel("t")
    ax.set_ylabel("sup u(t)")
    if args.runs:
        ax.legend(fontsize=7)
    if args.sweep:
        rows = read_csv(args.sweep)
        ax2 = axes[0, 1]
        for tag, marker in (("Global", "o"), ("BlowUp", "x"), ("Inconclusive", "s")):
            sel = [r for r in rows if r["observed"] == tag]
            ax2.scatter([float(r["value"]) for r in sel], [float(r["t_star_or_horizon"]) for r in sel],
                        marker=marker, label=tag)
        ax2.set_xlabel("swept value")
        ax2.set_ylabel("t_star or horizon")
        ax2.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
