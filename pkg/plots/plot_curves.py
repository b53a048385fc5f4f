#!/usr/bin/env python3
"""Overlaid distance-to-goal curves, one line per trajectory.

Input: curves CSV ``traj_id,step,distance`` (normalized upstream when the
producing command was configured to normalize).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from schema import fail, parse_float, read_csv  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inp", required=True, help="curves CSV")
    parser.add_argument("--out", required=True)
    parser.add_argument("--title", default="embedding distance curves")
    args = parser.parse_args(argv)

    rows = read_csv(args.inp, ["traj_id", "step", "distance"])
    if not rows:
        fail(f"{args.inp}: no data rows")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    trajs: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        trajs.setdefault(row["traj_id"], []).append((int(row["step"]), parse_float(row, "distance", args.inp)))

    fig, ax = plt.subplots(figsize=(6, 4))
    for tid, points in sorted(trajs.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], linewidth=1.0, alpha=0.8)
    ax.set_xlabel("frame")
    ax.set_ylabel("distance to goal")
    ax.set_title(args.title)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
