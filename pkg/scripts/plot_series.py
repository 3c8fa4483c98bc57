"""Log-log (or semilog) plot of columns from a ``diagnostics.csv``.

Usage::

    thirdflow run configs/opt_case1.json --output-dir out/case1
    python3 scripts/plot_series.py out/case1/diagnostics.csv f_gap f_anchor_gap -o case1.png

Needs matplotlib (``pip install -e .[plot]``). Nonpositive samples are
dropped, since they cannot be shown on a log axis.
"""
from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from thirdflow.integrator import read_csv  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("columns", nargs="+")
    ap.add_argument("--semilog", action="store_true", help="linear time axis")
    ap.add_argument("-o", "--output", default="series.png")
    args = ap.parse_args(argv)

    names, data = read_csv(args.csv)
    t = data[:, names.index("t")]
    fig, ax = plt.subplots(figsize=(6, 4))
    for col in args.columns:
        if col not in names:
            print(f"no column {col!r}; have {names}", file=sys.stderr)
            return 2
        y = data[:, names.index(col)]
        keep = y > 0
        ax.plot(t[keep], y[keep], label=col)
    ax.set_yscale("log")
    if not args.semilog:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
