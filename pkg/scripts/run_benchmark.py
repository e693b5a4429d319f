"""Run the benchmark suite end to end and print the comparison table.

Equivalent to ``make_suite.py`` followed by ``waffle compare``; the
``--control-update additive`` flag reruns the WAFFLE cells with the literal
server control update for comparison.
"""

import argparse
import logging
import tempfile
from pathlib import Path

from waffle.cli import SUITE_ALGORITHMS, SUITE_DISTRIBUTIONS, compare_suite, format_table, run_and_emit
from waffle.config import write_config

from make_suite import BASE


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--output", type=Path, default=Path("results/benchmark"))
    parser.add_argument("--rounds", type=int, default=BASE.rounds)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--control-update", default="reweighted", choices=("reweighted", "additive"))
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    base = BASE.with_(rounds=args.rounds)
    with tempfile.TemporaryDirectory() as tmp:
        for a in SUITE_ALGORITHMS:
            for d in SUITE_DISTRIBUTIONS:
                write_config(base.with_(algorithm=a, distribution=d), Path(tmp) / f"{a}_{d}.toml")
        rows = compare_suite(tmp, args.output, args.workers)
    print(format_table(rows))

    if args.control_update == "additive":
        extra = [
            run_and_emit(
                base.with_(
                    algorithm="waffle",
                    distribution=d,
                    control_update="additive",
                    output_path=str(args.output / "additive"),
                    workers=args.workers,
                )
            )
            for d in SUITE_DISTRIBUTIONS
        ]
        print("\nWAFFLE with the additive control update")
        print(format_table(extra))


if __name__ == "__main__":
    main()
