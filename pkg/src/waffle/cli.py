"""Command-line experiment runner.

    waffle run CONFIG [--output DIR] [--seeds 0 1 2] [--workers N] [--algorithm NAME]
    waffle compare CONFIG_DIR [--output DIR] [--workers N]

``run`` writes one CSV per seed plus a one-row summary CSV. ``compare`` runs a
directory of configs that differ only in algorithm and distribution and
writes a merged summary in the layout of a methods-by-distributions table.

Per-seed CSV columns: ``round, alice_acc, best_so_far, alpha_0..alpha_{N-1},
d_0..d_{N-1}``. Summary CSV columns: see :data:`SUMMARY_COLUMNS`.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import logging
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, ExperimentConfig, parse_config
from .server import RoundRecord, build_experiment
from .data import partition_hash

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "algorithm",
    "distribution",
    "mean_best_accuracy",
    "std_best_accuracy",
    "rounds_to_95pct_of_best",
    "partition_hash",
)
SUITE_ALGORITHMS = ("local", "fedavg", "scaffold", "waffle")
SUITE_DISTRIBUTIONS = ("A", "B", "C", "A_star", "B_star")
# fields allowed to differ between the configs of one comparison suite
_SUITE_FREE = {"algorithm", "distribution", "output_path", "workers", "control_update"}


@dataclass(frozen=True)
class SummaryRow:
    algorithm: str
    distribution: str
    mean_best_accuracy: float
    std_best_accuracy: float
    rounds_to_95pct_of_best: int
    partition_hash: str = ""


def rounds_to_fraction_of_best(records: list[RoundRecord], fraction: float = 0.95) -> int:
    """First round whose best-so-far accuracy reaches ``fraction`` of the final best."""
    if not records:
        return 0
    target = fraction * records[-1].best_so_far
    return next(r.round for r in records if r.best_so_far >= target)


def record_header(num_agents: int) -> list[str]:
    return (
        ["round", "alice_acc", "best_so_far"]
        + [f"alpha_{i}" for i in range(num_agents)]
        + [f"d_{i}" for i in range(num_agents)]
    )


def write_records(records: list[RoundRecord], num_agents: int, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(record_header(num_agents))
        for rec in records:
            writer.writerow(
                [rec.round, repr(rec.alice_test_accuracy), repr(rec.best_so_far)]
                + [repr(float(w)) for w in rec.weights]
                + [repr(float(d)) for d in rec.distances]
            )
    return path


def read_records(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def summarize(
    cfg: ExperimentConfig, runs: list[list[RoundRecord]], hashes: list[str]
) -> SummaryRow:
    bests = [recs[-1].best_so_far if recs else 0.0 for recs in runs]
    speeds = [rounds_to_fraction_of_best(recs) for recs in runs]
    combined = hashlib.sha256("".join(hashes).encode()).hexdigest()[:16]
    return SummaryRow(
        algorithm=cfg.algorithm,
        distribution=cfg.distribution_name,
        mean_best_accuracy=statistics.fmean(bests),
        std_best_accuracy=statistics.stdev(bests) if len(bests) > 1 else 0.0,
        rounds_to_95pct_of_best=statistics.median_low(speeds),
        partition_hash=combined,
    )


def write_summary(rows: list[SummaryRow], path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            values = dataclasses.astuple(row)
            writer.writerow([repr(v) if isinstance(v, float) else v for v in values])
    return path


def read_summary(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.algorithm}_{cfg.distribution_name}"


def run_and_emit(cfg: ExperimentConfig) -> SummaryRow:
    out = Path(cfg.output_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    runs, hashes = [], []
    for seed in cfg.seed_list:
        exp = build_experiment(cfg.with_(master_seed=seed))
        records = exp.run()
        write_records(records, cfg.num_agents, out / f"{_stem(cfg)}_seed{seed}.csv")
        runs.append(records)
        hashes.append(partition_hash(exp.bundles))
        if records:
            log.info(
                "%s seed=%d best=%.4f", _stem(cfg), seed, records[-1].best_so_far
            )
    row = summarize(cfg, runs, hashes)
    write_summary([row], out / f"{_stem(cfg)}_summary.csv")
    return row


def _suite_key(cfg: ExperimentConfig) -> dict:
    return {
        f.name: getattr(cfg, f.name)
        for f in dataclasses.fields(cfg)
        if f.name not in _SUITE_FREE
    }


def load_suite(cfg_dir) -> dict[tuple[str, str], ExperimentConfig]:
    paths = sorted(Path(cfg_dir).glob("*.toml"))
    if not paths:
        raise ConfigError(f"{cfg_dir}: no *.toml configs found")
    cells: dict[tuple[str, str], ExperimentConfig] = {}
    reference, ref_path = None, None
    for path in paths:
        cfg = parse_config(path)
        key = _suite_key(cfg)
        if reference is None:
            reference, ref_path = key, path
        elif key != reference:
            diff = sorted(k for k in key if key[k] != reference[k])
            raise ConfigError(
                f"{path.name}: data/optimizer settings differ from {ref_path.name} in {diff}"
            )
        cell = (cfg.algorithm, cfg.distribution_name)
        if cell in cells:
            raise ConfigError(f"{path.name}: duplicate cell {cell}")
        cells[cell] = cfg
    missing = [
        (a, d) for d in SUITE_DISTRIBUTIONS for a in SUITE_ALGORITHMS if (a, d) not in cells
    ]
    if missing:
        names = ", ".join(f"{a}/{d}" for a, d in missing)
        raise ConfigError(f"missing config for cell(s): {names}")
    return cells


def format_table(rows: list[SummaryRow]) -> str:
    algorithms = list(dict.fromkeys(r.algorithm for r in rows))
    distributions = list(dict.fromkeys(r.distribution for r in rows))
    lookup = {(r.algorithm, r.distribution): r for r in rows}
    width = max(16, *(len(a) + 2 for a in algorithms))
    lines = ["distribution".ljust(14) + "".join(a.rjust(width) for a in algorithms)]
    for d in distributions:
        cells = []
        for a in algorithms:
            r = lookup.get((a, d))
            cells.append(
                (f"{r.mean_best_accuracy:.4f}±{r.std_best_accuracy:.4f}" if r else "-").rjust(width)
            )
        lines.append(d.ljust(14) + "".join(cells))
    return "\n".join(lines)


def compare_suite(cfg_dir, output_path=None, workers: int | None = None) -> list[SummaryRow]:
    cells = load_suite(cfg_dir)
    rows = []
    for d in SUITE_DISTRIBUTIONS:
        extra = sorted(a for a, dd in cells if dd == d and a not in SUITE_ALGORITHMS)
        for a in (*SUITE_ALGORITHMS, *extra):
            cfg = cells[a, d]
            changes = {}
            if output_path is not None:
                changes["output_path"] = str(output_path)
            if workers is not None:
                changes["workers"] = workers
            rows.append(run_and_emit(cfg.with_(**changes) if changes else cfg))
    out = Path(output_path if output_path is not None else next(iter(cells.values())).output_path)
    write_summary(rows, out / "comparison_summary.csv")
    (out / "comparison_table.txt").write_text(format_table(rows) + "\n")
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waffle", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config over its seeds")
    run.add_argument("config")
    run.add_argument("--output", help="output directory (overrides output_path)")
    run.add_argument("--seeds", type=int, nargs="+", help="seed list override")
    run.add_argument("--workers", type=int, help="thread count for local training")
    run.add_argument("--algorithm", help="algorithm override")

    cmp_ = sub.add_parser("compare", help="run a directory of configs and merge the summaries")
    cmp_.add_argument("config_dir")
    cmp_.add_argument("--output", help="output directory")
    cmp_.add_argument("--workers", type=int, help="thread count for local training")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            changes = {}
            if args.output:
                changes["output_path"] = args.output
            if args.seeds:
                changes["seeds"] = tuple(args.seeds)
            if args.workers:
                changes["workers"] = args.workers
            if args.algorithm:
                changes["algorithm"] = args.algorithm
            if changes:
                cfg = cfg.with_(**changes)
            row = run_and_emit(cfg)
            print(format_table([row]))
        else:
            rows = compare_suite(args.config_dir, args.output, args.workers)
            print(format_table(rows))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
