#!/usr/bin/env python3
"""2-D embedding scatter with a time color gradient and an inset of
distance-to-goal curves.

Input: embeddings CSV ``traj_id,step,e0,e1,distance`` (exactly two embedding
columns; produced by ``viplab analyze --kind embed2d`` from a K=2 encoder).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from schema import fail, parse_float, read_csv  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inp", required=True, help="embeddings CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default="2-D embedding, colored by time")
    args = parser.parse_args(argv)

    rows = read_csv(args.inp, ["traj_id", "step", "e0", "e1", "distance"])
    if not rows:
        fail(f"{args.inp}: no data rows")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    trajs: dict[str, list[tuple[int, float, float, float]]] = {}
    for row in rows:
        trajs.setdefault(row["traj_id"], []).append(
            (
                int(row["step"]),
                parse_float(row, "e0", args.inp),
                parse_float(row, "e1", args.inp),
                parse_float(row, "distance", args.inp),
            )
        )

    fig, ax = plt.subplots(figsize=(6, 5))
    cmap = plt.get_cmap("rainbow")
    for points in trajs.values():
        points.sort()
        n = max(len(points) - 1, 1)
        xs = [p[1] for p in points]
        ys = [p[2] for p in points]
        colors = [cmap(p[0] / n) for p in points]
        ax.plot(xs, ys, color="0.8", linewidth=0.6, zorder=1)
        ax.scatter(xs, ys, c=colors, s=18, zorder=2)
    ax.set_xlabel("embedding dim 0")
    ax.set_ylabel("embedding dim 1")
    ax.set_title(args.title)

    inset = ax.inset_axes([0.62, 0.62, 0.35, 0.35])
    for points in trajs.values():
        inset.plot([p[0] for p in points], [p[3] for p in points], linewidth=0.8)
    inset.set_title("distance to goal", fontsize=7)
    inset.tick_params(labelsize=6)

    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
