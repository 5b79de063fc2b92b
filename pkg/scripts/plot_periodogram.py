"""Plot a periodogram CSV (theta,power), optionally marking accepted periods.

    python scripts/plot_periodogram.py out/periodogram.csv --pvalues out/pvalues.csv -o pg.png
"""

from __future__ import annotations

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_columns(path, *names):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [[r[n] for r in rows] for n in names]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("periodogram")
    ap.add_argument("--pvalues", help="p-value table from `periodica confset`")
    ap.add_argument("--level", choices=["95", "99"], default="95")
    ap.add_argument("-o", "--output", default="periodogram.png")
    args = ap.parse_args(argv)

    theta, power = read_columns(args.periodogram, "theta", "power")
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot([float(t) for t in theta], [float(p) for p in power], lw=0.7, color="0.2")
    ax.set_xscale("log")
    ax.set_xlabel("period (days)")
    ax.set_ylabel("power")
    if args.pvalues:
        th0, flag = read_columns(args.pvalues, "theta0", f"in_{args.level}")
        for t, f in zip(th0, flag):
            ax.axvline(float(t), color="tab:red" if f == "yes" else "tab:blue",
                       ls="-" if f == "yes" else ":", lw=0.9)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
