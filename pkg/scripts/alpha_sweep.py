"""Gain/loss against the baseline for weighted re-ranking over a range of alpha.

Runs the pipeline on the synthetic fixture (or a config file) and prints the
relative change of every global metric per property and alpha.

    python3 scripts/alpha_sweep.py --out /tmp/sweep
    python3 scripts/alpha_sweep.py --config data/config.txt --alphas 0.1,0.2
"""
import argparse
import sys
from pathlib import Path

from xrerank.config import load_config
from xrerank.data import FixtureSpec, write_fixture
from xrerank.evaluation import METRICS
from xrerank.pipeline import run_pipeline, summarize


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="pipeline config; default writes the synthetic fixture into --out")
    ap.add_argument("--out", default="sweep")
    ap.add_argument("--seed", type=int, default=FixtureSpec.seed)
    ap.add_argument("--alphas", default="0.1,0.2,0.3,0.4,0.5")
    ap.add_argument("--properties", default="recency;popularity;diversity")
    args = ap.parse_args(argv)

    out = Path(args.out)
    config = args.config
    if config is None:
        config = write_fixture(out / "data", FixtureSpec(seed=args.seed))["config"]
    cfg = load_config(config, {"alpha": args.alphas, "properties": args.properties, "out": str(out / "run")})
    result = run_pipeline(cfg)
    summary = summarize(result.reports)

    base = result.baseline.means
    print(f"{'setting':36s}" + "".join(f"{m:>10s}" for m in METRICS))
    print(f"{'baseline (absolute)':36s}" + "".join(f"{base[m]:10.4f}" for m in METRICS))
    for name in sorted(summary):
        if name == "baseline":
            continue
        rel = summary[name]["relative_change"]
        print(f"{name:36s}" + "".join("       n/a" if rel[m] is None else f"{100 * rel[m]:+9.1f}%" for m in METRICS))
    return 0


if __name__ == "__main__":
    sys.exit(main())
