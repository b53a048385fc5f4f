#!/usr/bin/env python3
"""Paired reward histogram plus count-difference-ratio bars.

Input: histogram CSV ``bin_lo,bin_hi,count_a,count_b,ratio`` as written by
``viplab analyze --kind hist``. With a single encoder the count_b and ratio
columns are empty and only the histogram panel is drawn.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from schema import fail, parse_float, read_csv  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inp", required=True, help="histogram CSV")
    parser.add_argument("--out", required=True)
    parser.add_argument("--label-a", default="A")
    parser.add_argument("--label-b", default="B")
    args = parser.parse_args(argv)

    rows = read_csv(args.inp, ["bin_lo", "bin_hi", "count_a", "count_b", "ratio"])
    if not rows:
        fail(f"{args.inp}: no data rows")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    lo = [parse_float(r, "bin_lo", args.inp) for r in rows]
    hi = [parse_float(r, "bin_hi", args.inp) for r in rows]
    count_a = [parse_float(r, "count_a", args.inp) for r in rows]
    have_b = any(r["count_b"] != "" for r in rows)
    centers = [(a + b) / 2 for a, b in zip(lo, hi)]
    width = (hi[0] - lo[0]) * 0.42

    if have_b:
        fig, (ax, ax_ratio) = plt.subplots(2, 1, figsize=(6, 6), height_ratios=[2, 1], sharex=True)
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax_ratio = None

    if have_b:
        count_b = [parse_float(r, "count_b", args.inp) for r in rows]
        ax.bar([c - width / 2 for c in centers], count_a, width=width, label=args.label_a)
        ax.bar([c + width / 2 for c in centers], count_b, width=width, label=args.label_b)
        ax.legend()
    else:
        ax.bar(centers, count_a, width=width * 2, label=args.label_a)
    ax.set_ylabel("count")
    ax.set_title("embedding reward histogram")

    if ax_ratio is not None:
        ratio_x, ratio_y = [], []
        for c, r in zip(centers, rows):
            if r["ratio"] != "":
                ratio_x.append(c)
                ratio_y.append(parse_float(r, "ratio", args.inp))
        ax_ratio.bar(ratio_x, ratio_y, width=width * 2, color="0.4")
        ax_ratio.axhline(0.0, color="k", linewidth=0.6)
        ax_ratio.set_ylabel(f"(|{args.label_a}|-|{args.label_b}|)/|{args.label_b}|")
        ax_ratio.set_xlabel("reward")

    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
