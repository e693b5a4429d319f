"""Personalise for every agent in turn over one shared partition and report best accuracy."""

import argparse
import statistics

from waffle.config import parse_config
from waffle.server import run_multi_alice


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config")
    parser.add_argument("--alices", type=int, nargs="+", help="agents to personalise for (default: all)")
    args = parser.parse_args()

    cfg = parse_config(args.config)
    results = run_multi_alice(cfg, args.alices)
    bests = []
    for alice, records in results.items():
        best = records[-1].best_so_far if records else 0.0
        bests.append(best)
        print(f"alice={alice:2d} best={best:.4f}")
    print(f"mean={statistics.fmean(bests):.4f}")


if __name__ == "__main__":
    main()
