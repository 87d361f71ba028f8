"""Cover the diagonal split of the unit square with axis boxes.

First pass: one cover at a fixed leftover bound. Second pass: repeat on the
leftover cells with the bound halved each round until nothing is left.
"""

import argparse

import numpy as np

from logifold.approx import (
    approximate,
    chart_family,
    grid_from_function,
    mismatch_measure,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=32, help="cells per axis")
    ap.add_argument("--epsilon-frac", type=float, default=0.1,
                    help="leftover bound as a fraction of the labeled measure")
    ap.add_argument("--depth", type=int, default=6, help="halving rounds")
    args = ap.parse_args()

    grid = grid_from_function(lambda p: int(p[1] >= p[0]),
                              [0.0, 0.0], [1.0, 1.0], args.resolution)
    mu = grid.labeled_measure()
    eps = args.epsilon_frac * mu

    cover = approximate(grid, eps)
    wrong, fallback = mismatch_measure(cover, grid)
    print(f"single cover: {len(cover.rectangles)} boxes, "
          f"residual {cover.residual_measure:.4f} (bound {eps:.4f}), "
          f"wrong measure {wrong}, fallback measure {fallback}")

    family = chart_family(grid, eps0=mu / args.resolution, depth=args.depth)
    for r in family.charts:
        print(f"round {r.index}: bound {r.epsilon:.5f}, "
              f"{len(r.chart.rectangles)} boxes, "
              f"round residual {r.chart.residual_measure:.5f}")
    print(f"family residual after {len(family.charts)} rounds: "
          f"{family.final_residual}")


if __name__ == "__main__":
    main()
