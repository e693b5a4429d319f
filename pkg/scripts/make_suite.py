"""Write the 4 x 5 benchmark suite (algorithms by distributions) as TOML configs.

    python3 scripts/make_suite.py configs/suite
    waffle compare configs/suite --output results/suite
"""

import argparse
from pathlib import Path

from waffle.cli import SUITE_ALGORITHMS, SUITE_DISTRIBUTIONS
from waffle.config import ExperimentConfig, write_config

BASE = ExperimentConfig(
    dataset="synthetic",
    algorithm="waffle",
    rounds=100,
    samples_per_agent=300,
    test_fraction=0.5,
    input_dim=20,
    spread=1.25,
    eta_l=0.1,
    batch_size=32,
    seeds=(0, 1, 2, 3, 4),
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("directory", type=Path)
    parser.add_argument("--rounds", type=int, default=BASE.rounds)
    parser.add_argument("--with-nocv", action="store_true", help="also emit waffle_nocv cells")
    args = parser.parse_args()

    args.directory.mkdir(parents=True, exist_ok=True)
    algorithms = SUITE_ALGORITHMS + (("waffle_nocv",) if args.with_nocv else ())
    for a in algorithms:
        for d in SUITE_DISTRIBUTIONS:
            cfg = BASE.with_(algorithm=a, distribution=d, rounds=args.rounds)
            write_config(cfg, args.directory / f"{a}_{d}.toml")
    print(f"wrote {len(algorithms) * len(SUITE_DISTRIBUTIONS)} configs to {args.directory}")


if __name__ == "__main__":
    main()
