import csv
import json

import numpy as np
import pytest

from lockbench.bench.config import ConfigError, config_from_dict, load_config
from lockbench.bench.oracle import oracle_report, oracle_row
from lockbench.bench.plot import parse_svg_points, plot, render_svg
from lockbench.bench.runner import (CSV_FIELDS, RunResult, evaluate_success, read_csv, run_one, run_seed,
                                    run_sweep, run_word, worker_count, write_csv)
from lockbench.lock import LockSpec, make_lock_mdp
from lockbench.mdp import FixedWordPolicy, UniformPolicy

TINY = {
    "methods": ["gc_exact", "tree_search"],
    "horizons": [5, 10],
    "runs": 2,
    "master_seed": 3,
    "n_eval": 100,
    "budgets": {"gc_exact": {"N": 300}, "tree_search": {"H_S": 2}},
}


def test_config_defaults_match_appendix_values():
    cfg = config_from_dict({"methods": ["fqi", "ppo", "gc_neural"], "horizons": [6]})
    f, p, g = cfg.budget("fqi"), cfg.budget("ppo"), cfg.budget("gc_neural")
    assert (f.K, f.I, f.epsilon, f.hidden, f.steps, f.lr, f.weight_decay, f.batches_per_iteration) == \
        (50, 1000, 0.3, (256, 256), 1000, 3e-4, 5e-5, 20)
    assert (p.K, p.I, p.clip, p.beta, p.hidden, p.steps, p.lr, p.weight_decay, p.n_batches) == \
        (50, 1000, 0.2, 1e-3, (512, 512), 500, 2e-3, 1e-8, 10)
    assert (g.I, g.hidden, g.steps, g.lr, g.weight_decay, g.n_batches) == (1000, (256, 256), 30000, 2e-2, 1e-3, 100)
    assert cfg.runs == 10 and cfg.n_eval == 1000 and cfg.budget("gc_exact").N == 1000


@pytest.mark.parametrize("patch, path", [
    ({"horizons": [2]}, "horizons[0]"),
    ({"methods": ["dqn"]}, "methods[0]"),
    ({"runs": 0}, "runs"),
    ({"budgets": {"fqi": {"epsilon": 2.0}}}, "budgets.fqi.epsilon"),
    ({"budgets": {"ppo": {"hidden": [0]}}}, "budgets.ppo.hidden[0]"),
    ({"budgets": {"ppo": {"steps": "many"}}}, "budgets.ppo.steps"),
    ({"budgets": {"gc_exact": {"alpha": 2}}}, "budgets.gc_exact.alpha"),
    ({"budgets": {"fqi": {"gamma": 0.9}}}, "budgets.fqi.gamma"),
    ({"b": {"5": "01"}}, "b.5"),
    ({"extra": 1}, "extra"),
])
def test_config_errors_name_the_field(patch, path):
    with pytest.raises(ConfigError) as err:
        config_from_dict({**TINY, **patch})
    assert err.value.path == path


def test_load_config_reports_bad_json(tmp_path):
    f = tmp_path / "c.json"
    f.write_text("{")
    with pytest.raises(ConfigError):
        load_config(f)


def test_seeds_are_pure_and_distinct():
    assert run_seed(0, "fqi", 6, 1) == run_seed(0, "fqi", 6, 1)
    seeds = {run_seed(m, meth, H, k) for m in (0, 1) for meth in ("fqi", "ppo") for H in (5, 6) for k in range(3)}
    assert len(seeds) == 24


def test_fixed_word_override():
    cfg = config_from_dict({**TINY, "b": {"5": "101"}})
    assert run_word(cfg, 5, 0).bits == "101" == run_word(cfg, 5, 1).bits
    assert len(run_word(cfg, 10, 0).bits) == 8


def test_evaluate_success_examples():
    spec = LockSpec.from_bits(6, "0110")
    mdp = make_lock_mdp(spec)
    word = FixedWordPolicy([0, 0, 1, 1, 0, 0])
    assert evaluate_success(word, mdp, 1000, np.random.default_rng(0)) == 1
    assert evaluate_success(UniformPolicy(), make_lock_mdp(LockSpec.random(30, np.random.default_rng(0))), 1000,
                            np.random.default_rng(0)) == 0
    # left-branch rewards never count
    wrong = FixedWordPolicy([0, 1, 0, 0, 1, 0])
    assert evaluate_success(wrong, mdp, 1000, np.random.default_rng(0)) == 0
    with pytest.raises(ValueError):
        evaluate_success(word, mdp, 0, np.random.default_rng(0))


def test_csv_round_trip(tmp_path):
    rows = [RunResult("ppo", 6, 1, 12, "0101", 1, 300000, None),
            RunResult("fqi", 25, 0, 7, "0" * 23, 0, 1250000, 12.5)]
    out = tmp_path / "r.csv"
    write_csv(out, rows)
    back = read_csv(out)
    assert back == sorted(rows, key=lambda r: (r.method, r.horizon, r.run))
    write_csv(tmp_path / "r2.csv", back)
    assert (tmp_path / "r2.csv").read_bytes() == out.read_bytes()
    assert out.read_text().splitlines()[0] == ",".join(CSV_FIELDS)


def test_csv_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("method,horizon\nfqi,6\n")
    with pytest.raises(ValueError):
        read_csv(bad)
    bad.write_text(",".join(CSV_FIELDS) + "\nfqi,6,0,1,01,2,10,\n")
    with pytest.raises(ValueError):
        read_csv(bad)


def test_sweep_cardinality_and_replay(tmp_path):
    cfg = config_from_dict({**TINY, "methods": ["gc_exact"]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = run_sweep(cfg, a, workers=1)
    assert len(rows) == 4 and all(r.success == 1 for r in rows)
    run_sweep(cfg, b, workers=1)
    assert a.read_bytes() == b.read_bytes()


def test_sweep_resume_gives_same_rows(tmp_path):
    cfg = config_from_dict(TINY)
    full = tmp_path / "full.csv"
    run_sweep(cfg, full, workers=1)
    part = tmp_path / "part.csv"
    lines = full.read_text().splitlines()
    # interrupted run: header plus a few rows in arbitrary order
    part.write_text("\n".join([lines[0], lines[5], lines[2]]) + "\n")
    run_sweep(cfg, part, workers=1)
    assert part.read_bytes() == full.read_bytes()


def test_sweep_refuses_foreign_rows(tmp_path):
    out = tmp_path / "r.csv"
    run_sweep(config_from_dict({**TINY, "methods": ["gc_exact"], "horizons": [5], "runs": 1}), out, workers=1)
    with pytest.raises(ValueError):
        run_sweep(config_from_dict({**TINY, "methods": ["gc_exact"], "master_seed": 99}), out, workers=1)


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = config_from_dict(TINY)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(cfg, a, workers=1)
    run_sweep(cfg, b, workers=2)
    assert a.read_bytes() == b.read_bytes()


def test_seconds_column_optional():
    cfg = config_from_dict({**TINY, "record_seconds": True})
    r = run_one(cfg, "gc_exact", 5, 0)
    assert r.seconds is not None and r.seconds >= 0
    assert run_one(config_from_dict(TINY), "gc_exact", 5, 0).seconds is None


def test_tree_search_row_counts_interface_calls():
    r = run_one(config_from_dict(TINY), "tree_search", 5, 0)
    assert r.env_calls > 0


def test_worker_count_from_env(monkeypatch):
    monkeypatch.setenv("LOCKBENCH_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("LOCKBENCH_WORKERS", "zero")
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.delenv("LOCKBENCH_WORKERS")
    assert worker_count() == 1


def test_plot_round_trip(tmp_path):
    rows = []
    for k in range(10):
        rows.append(RunResult("fqi", 6, k, k, "0000", int(k < 8), 1, None))
        rows.append(RunResult("fqi", 25, k, k, "0" * 23, int(k < 1), 1, None))
        rows.append(RunResult("gc_neural", 20, k, k, "0" * 18, 1, 1, None))
    write_csv(tmp_path / "r.csv", rows)
    data = plot(tmp_path / "r.csv", tmp_path / "r.svg")
    svg = (tmp_path / "r.svg").read_text()
    assert parse_svg_points(svg) == {"fqi": {6: 0.8, 25: 0.1}, "gc_neural": {20: 1.0}} == data
    assert svg.count('class="legend"') == 2


def test_plot_omits_empty_groups():
    svg = render_svg({"ppo": {}, "fqi": {6: 0.5}})
    assert "ppo" not in svg and 'data-method="fqi"' in svg


def test_oracle_rows():
    row = oracle_row(6, np.random.default_rng(0))
    assert str(row.right) == "1/32" and row.rewarding_words == 1 and row.passed
    assert str(oracle_row(4, np.random.default_rng(0)).total) == "7/24"
    rows = oracle_report(5, mc=20000, seed=1)
    assert [r.H for r in rows] == [3, 4, 5] and all(r.passed for r in rows)
