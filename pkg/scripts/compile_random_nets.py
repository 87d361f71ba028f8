"""Compile random step and relu nets and report forward-pass agreement.

Every sampled point is scored against the exact compiled graph; relu runs
skip points whose top two logits tie within the margin, since indexmax is
genuinely ambiguous there.
"""

import argparse
import time

import numpy as np
from numpy.random import default_rng

from logifold import evaluate_batch
from logifold.networks import (
    INDEXMAX,
    RELU,
    STEP,
    compile_relu_net,
    compile_step_net,
    forward_classical_batch,
    forward_logits,
    random_network,
)


def run_sweep(kind: str, count: int, samples: int, seed: int,
              margin: float) -> None:
    rng = default_rng(seed)
    t0 = time.time()
    mismatches = 0
    checked = 0
    targets = 0
    for _ in range(count):
        n = int(rng.integers(1, 4))
        hidden = [int(w) for w in rng.integers(2, 5, size=int(rng.integers(1, 4)))]
        dims = [n] + hidden + [int(rng.integers(2, 5))]
        net = random_network(rng, dims, kind, INDEXMAX)
        g = compile_step_net(net) if kind == STEP else compile_relu_net(net)
        targets += sum(1 for k, v in g.vertices.items() if v == "target")
        X = rng.normal(scale=2.0, size=(samples, n))
        want = forward_classical_batch(net, X)
        got = evaluate_batch(g, X)
        for j, x in enumerate(X):
            if kind == RELU:
                z = np.sort(forward_logits(net, x))
                if z[-1] - z[-2] <= margin:
                    continue
            checked += 1
            mismatches += int(got[j] != want[j])
    print(f"{kind}: {mismatches} mismatches over {checked} points "
          f"({count} nets, {targets} targets total), {time.time() - t0:.1f}s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=50, help="nets per activation")
    ap.add_argument("--samples", type=int, default=10_000, help="points per net")
    ap.add_argument("--seed", type=int, default=20240901)
    ap.add_argument("--kind", choices=[STEP, RELU, "both"], default="both")
    ap.add_argument("--margin", type=float, default=1e-9,
                    help="logit-tie exclusion margin for relu")
    args = ap.parse_args()
    if args.kind in (STEP, "both"):
        run_sweep(STEP, args.count, args.samples, args.seed, args.margin)
    if args.kind in (RELU, "both"):
        run_sweep(RELU, args.count, args.samples, args.seed + 1, args.margin)


if __name__ == "__main__":
    main()
