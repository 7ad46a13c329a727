"""Empirical ratio of greedy to exact objective on random small instances.

Prints the distribution of F(greedy) / F(exact) and the instances where the
ratio falls under 1 - 1/e.
"""
import argparse
import math
import random
import sys
from pathlib import Path

from xrerank.rerank import DIVERSITY, brute_force_rerank, explained_objective, rerank

# the random instance generator lives with the tests
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from instances import random_instance  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    ratios, low = [], []
    for i in range(args.n):
        cs, cfg, tables, ctx = random_instance(rng)
        g = explained_objective(rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
        b = explained_objective(brute_force_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
        if b <= 0:
            continue
        ratios.append(g / b)
        if g / b < 1 - 1 / math.e:
            low.append((i, g / b, cfg.alpha, sorted(cfg.properties), cfg.k))
    ratios.sort()
    with_div = sum(1 for r in low if DIVERSITY in r[3])
    print(f"instances {len(ratios)}  min {ratios[0]:.4f}  1%-quantile {ratios[len(ratios) // 100]:.4f}"
          f"  exact {sum(r > 1 - 1e-12 for r in ratios) / len(ratios):.3f}")
    print(f"below 1-1/e: {len(low)} (all with diversity: {with_div == len(low)})")
    for row in low[:10]:
        print("  instance %d ratio %.4f alpha %.2f properties %s k %d" % row)


if __name__ == "__main__":
    main()
