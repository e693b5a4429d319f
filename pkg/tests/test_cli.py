import csv

import numpy as np
import pytest

from waffle.cli import (
    SUITE_ALGORITHMS,
    SUITE_DISTRIBUTIONS,
    SUMMARY_COLUMNS,
    compare_suite,
    main,
    read_records,
    read_summary,
    record_header,
    rounds_to_fraction_of_best,
    run_and_emit,
)
from waffle.config import ConfigError, ExperimentConfig, parse_config, write_config
from waffle.data import TEMPLATES

MINIMAL = """
rounds = 3

[data]
dataset = "synthetic"

[algorithm]
name = "waffle"
"""


def small_cfg(tmp_path, **kw):
    base = dict(
        dataset="synthetic",
        algorithm="waffle",
        rounds=4,
        distribution="B",
        samples_per_agent=40,
        input_dim=5,
        batch_size=8,
        output_path=str(tmp_path / "out"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert cfg.rounds == 3
    assert cfg.delta_omega == 3.2
    assert cfg.eta_g == 1.0
    assert cfg.alice_index == 0
    assert cfg.num_agents == 10
    assert cfg.seed_list == (0,)


def test_negative_learning_rate_names_the_key(tmp_path):
    text = MINIMAL + "\n[optimizer]\neta_l = -0.1\n"
    with pytest.raises(ConfigError, match="eta_l"):
        parse_config(write(tmp_path, text))


def test_distribution_c_template(tmp_path):
    text = MINIMAL.replace('dataset = "synthetic"', 'dataset = "synthetic"\ndistribution = "C"')
    cfg = parse_config(write(tmp_path, text))
    assert cfg.distribution == "C"
    assert TEMPLATES["C"] == (0.0, 0.0, 0.0, 0.1, 0.2, 0.4, 0.2, 0.1, 0.0, 0.0)


def test_custom_share_list(tmp_path):
    shares = "[" + ", ".join(["0.1"] * 10) + "]"
    text = MINIMAL.replace('dataset = "synthetic"', f'dataset = "synthetic"\ndistribution = {shares}')
    cfg = parse_config(write(tmp_path, text))
    assert cfg.distribution == (0.1,) * 10
    assert cfg.distribution_name == "custom"


@pytest.mark.parametrize(
    "extra, key",
    [
        ("\n[optimizer]\nmomentum = 0.9\n", "momentum"),
        ("\n[extras]\nfoo = 1\n", "extras"),
        ("\n[optimizer]\nbatch_size = 3.5\n", "batch_size"),
        ("\n[optimizer]\nbatch_size = true\n", "batch_size"),
        ('\n[model]\nkind = "cnn"\n', "kind"),
        ("\n[data]\nalice_index = 10\n", "alice_index"),
    ],
)
def test_bad_keys_and_types(tmp_path, extra, key):
    text = MINIMAL + extra
    # a second [data] table is a TOML error, so merge it into the first
    if extra.startswith("\n[data]"):
        text = MINIMAL.replace('dataset = "synthetic"', 'dataset = "synthetic"\nalice_index = 10')
    with pytest.raises(ConfigError, match=key):
        parse_config(write(tmp_path, text))


def test_missing_required_key(tmp_path):
    with pytest.raises(ConfigError, match="rounds"):
        parse_config(write(tmp_path, MINIMAL.replace("rounds = 3", "")))


def test_malformed_toml(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "rounds = = 3"))


def test_config_round_trip(tmp_path):
    cfg = small_cfg(tmp_path, seeds=(1, 2), hidden_dims=(7,), model_kind="mlp")
    assert parse_config(write_config(cfg, tmp_path / "rt.toml")) == cfg


def test_rounds_to_fraction_of_best():
    class R:
        def __init__(self, r, b):
            self.round, self.best_so_far = r, b

    recs = [R(1, 0.2), R(2, 0.5), R(3, 0.96), R(4, 1.0)]
    assert rounds_to_fraction_of_best(recs) == 3
    assert rounds_to_fraction_of_best([]) == 0


def test_run_writes_one_row_per_round(tmp_path):
    cfg = small_cfg(tmp_path, seeds=(0, 1))
    run_and_emit(cfg)
    out = tmp_path / "out"
    for seed in (0, 1):
        path = out / f"waffle_B_seed{seed}.csv"
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        assert header == record_header(10)
        rows = read_records(path)
        assert [int(r["round"]) for r in rows] == [1, 2, 3, 4]
        for r in rows:
            alphas = [r[f"alpha_{i}"] for i in range(10)]
            assert abs(sum(alphas) - 1.0) <= 1e-12
            # Alice's column holds her assigned pseudo-distance, never above the closest peer
            assert 0.0 <= r["d_0"] <= min(r[f"d_{i}"] for i in range(1, 10))


def test_single_seed_has_zero_std(tmp_path):
    row = run_and_emit(small_cfg(tmp_path))
    assert row.std_best_accuracy == 0.0


def test_summary_matches_recomputation(tmp_path):
    seeds = (0, 1, 2, 3, 4)
    cfg = small_cfg(tmp_path, seeds=seeds, algorithm="fedavg")
    row = run_and_emit(cfg)
    out = tmp_path / "out"
    bests, speeds = [], []
    for s in seeds:
        rows = read_records(out / f"fedavg_B_seed{s}.csv")
        best = max(r["alice_acc"] for r in rows)
        bests.append(best)
        speeds.append(next(int(r["round"]) for r in rows if r["best_so_far"] >= 0.95 * best))
    assert abs(row.mean_best_accuracy - sum(bests) / len(bests)) <= 1e-12
    assert abs(row.std_best_accuracy - np.std(bests, ddof=1)) <= 1e-12
    assert row.rounds_to_95pct_of_best == sorted(speeds)[(len(speeds) - 1) // 2]

    summary = read_summary(out / "fedavg_B_summary.csv")
    assert list(summary[0]) == list(SUMMARY_COLUMNS)
    assert float(summary[0]["mean_best_accuracy"]) == row.mean_best_accuracy


def read_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


@pytest.mark.parametrize("algorithm", ["local", "fedavg", "scaffold", "waffle"])
def test_reruns_are_byte_identical(tmp_path, algorithm):
    a = small_cfg(tmp_path, algorithm=algorithm, seeds=(3, 4), output_path=str(tmp_path / "a"))
    run_and_emit(a)
    run_and_emit(a.with_(output_path=str(tmp_path / "b"), workers=4))
    first, second = read_bytes(tmp_path / "a"), read_bytes(tmp_path / "b")
    assert first and first == second


def write_suite(directory, base, algorithms=SUITE_ALGORITHMS, distributions=SUITE_DISTRIBUTIONS):
    directory.mkdir(exist_ok=True)
    for a in algorithms:
        for d in distributions:
            write_config(base.with_(algorithm=a, distribution=d), directory / f"{a}_{d}.toml")


def test_compare_suite_fills_the_table(tmp_path):
    base = small_cfg(tmp_path, rounds=2, input_dim=3)
    write_suite(tmp_path / "cfgs", base)
    rows = compare_suite(tmp_path / "cfgs", tmp_path / "cmp")
    assert len(rows) == 20
    merged = read_summary(tmp_path / "cmp" / "comparison_summary.csv")
    assert [(r["algorithm"], r["distribution"]) for r in merged] == [
        (a, d) for d in SUITE_DISTRIBUTIONS for a in SUITE_ALGORITHMS
    ]
    # every algorithm sees the same partition of a given distribution
    for d in SUITE_DISTRIBUTIONS:
        hashes = {r["partition_hash"] for r in merged if r["distribution"] == d}
        assert len(hashes) == 1
    table = (tmp_path / "cmp" / "comparison_table.txt").read_text()
    assert "A_star" in table and "±" in table


def test_compare_names_missing_cell(tmp_path):
    base = small_cfg(tmp_path, rounds=1)
    write_suite(tmp_path / "cfgs", base)
    (tmp_path / "cfgs" / "scaffold_C.toml").unlink()
    with pytest.raises(ConfigError, match="scaffold/C"):
        compare_suite(tmp_path / "cfgs", tmp_path / "cmp")


def test_compare_rejects_inconsistent_settings(tmp_path):
    base = small_cfg(tmp_path, rounds=1)
    write_suite(tmp_path / "cfgs", base)
    write_config(base.with_(algorithm="local", distribution="A", eta_l=0.5), tmp_path / "cfgs" / "local_A.toml")
    with pytest.raises(ConfigError, match="eta_l"):
        compare_suite(tmp_path / "cfgs", tmp_path / "cmp")


def test_main_run_with_overrides(tmp_path, capsys):
    path = write_config(small_cfg(tmp_path, rounds=2), tmp_path / "c.toml")
    out = tmp_path / "cli"
    code = main(["run", str(path), "--output", str(out), "--seeds", "5", "6",
                 "--workers", "2", "--algorithm", "scaffold"])
    assert code == 0
    assert (out / "scaffold_B_seed5.csv").exists()
    assert (out / "scaffold_B_seed6.csv").exists()
    assert "scaffold" in capsys.readouterr().out


def test_main_reports_config_errors(tmp_path, capsys):
    path = write(tmp_path, MINIMAL + "\n[optimizer]\neta_l = 0\n")
    assert main(["run", str(path)]) == 2
    assert "eta_l" in capsys.readouterr().err


def test_main_requires_a_command():
    with pytest.raises(SystemExit):
        main([])

