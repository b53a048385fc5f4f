#!/usr/bin/env python3
"""Success-rate bars from one or more planner/eval summary JSONs.

Input: ``*_summary.json`` files (keys ``success_rate``, optional ``label``)
as written by ``viplab plan`` and ``viplab offline-rl``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from schema import fail, read_summary_json  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inp", required=True, nargs="+", help="summary JSON files")
    parser.add_argument("--out", required=True)
    parser.add_argument("--title", default="success rate")
    args = parser.parse_args(argv)

    labels, rates = [], []
    for path in args.inp:
        payload = read_summary_json(path)
        rate = payload["success_rate"]
        if not isinstance(rate, (int, float)) or not 0.0 <= rate <= 1.0:
            fail(f"{path}: success_rate must be in [0, 1], got {rate!r}")
        labels.append(str(payload.get("label", Path(path).stem)))
        rates.append(float(rate))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(rates), 4))
    ax.bar(range(len(rates)), [100 * r for r in rates], width=0.6, color="tab:blue")
    ax.set_xticks(range(len(rates)), labels, rotation=20, ha="right")
    ax.set_ylabel("success rate (%)")
    ax.set_ylim(0, 100)
    ax.set_title(args.title)
    for i, r in enumerate(rates):
        ax.text(i, 100 * r + 1.5, f"{100 * r:.0f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
