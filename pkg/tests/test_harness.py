import csv
import json
from pathlib import Path

import numpy as np
import pytest

from slope_ope.harness import (
    ExperimentConfig,
    derive_seed,
    expand_grid,
    load_config,
    report,
    run,
)
from slope_ope.harness.cli import main
from slope_ope.harness.config import condition_id
from slope_ope.harness.runner import CSV_COLUMNS, run_condition

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_cb(**kw):
    raw = {
        "domain": "cb",
        "replicates": 3,
        "record_wall_time": False,
        "settings": {"mc_samples": 2000, "bandwidths": [0.0625, 0.25]},
        "fixed": {"reward_kind": "absolute_value", "lipschitz": 1.0, "kernel": "boxcar",
                  "target": "linear", "logging": "uniform"},
        "grid": [{"n": [30, 60]}],
    }
    raw.update(kw)
    return ExperimentConfig.from_dict(raw)


def small_rl(**kw):
    raw = {
        "domain": "rl",
        "replicates": 4,
        "record_wall_time": False,
        "grid": [{"env": ["graph"], "stochastic_reward": [True], "sparse": [False],
                  "policy": [[0.6, 0.8]], "n": [16, 32]}],
    }
    raw.update(kw)
    return ExperimentConfig.from_dict(raw)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestGrid:
    def test_cross_product(self):
        cfg = ExperimentConfig.from_dict({"domain": "rl", "grid": {"a": [1, 2], "n": [1, 2, 3]}})
        assert len(expand_grid(cfg)) == 6

    def test_single_point(self):
        cfg = ExperimentConfig.from_dict({"domain": "rl", "grid": {"n": [5]}})
        (c,) = expand_grid(cfg)
        assert c.condition_id == "n=5" and c.world_key() == {}

    def test_empty_axis(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"domain": "rl", "grid": {"n": []}})

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"domain": "rl", "grid": {"n": [1]}, "seeds": 3})

    def test_bad_domain(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"domain": "mdp", "grid": {"n": [1]}})

    def test_duplicates_across_blocks_dropped(self):
        cfg = ExperimentConfig.from_dict({"domain": "rl", "grid": [{"n": [1, 2]}, {"n": [2, 3]}]})
        assert [c.condition_id for c in expand_grid(cfg)] == ["n=1", "n=2", "n=3"]

    def test_condition_id_stable(self):
        assert condition_id({"b": True, "a": [0.2, 0.8], "n": 16}) == "a=(0.2_0.8)/b=true/n=16"
        assert condition_id({"n": 16, "a": 1}) == condition_id({"a": 1, "n": 16})

    def test_full_configs(self):
        assert len(expand_grid(load_config(CONFIGS / "cb_full.yaml"))) == 1000
        assert len(expand_grid(load_config(CONFIGS / "rl_full.yaml"))) == 94
        assert len(expand_grid(load_config(CONFIGS / "ci_rl.yaml"))) == 12

    def test_all_shipped_configs_load(self):
        for p in CONFIGS.glob("*.yaml"):
            assert expand_grid(load_config(p))

    def test_derive_seed(self):
        s = derive_seed(0, "n=5", 3)
        assert s == derive_seed(0, "n=5", 3) and 0 <= s < 2**63
        assert s != derive_seed(0, "n=5", 4) and s != derive_seed(1, "n=5", 3)


class TestRunner:
    def test_deterministic_records(self):
        cfg = small_rl()
        a = [r.csv_row() for r in run(cfg)]
        b = [r.csv_row() for r in run(cfg)]
        assert a == b

    def test_master_seed_changes_data(self):
        a = [r.estimate for r in run(small_rl(master_seed=0))]
        b = [r.estimate for r in run(small_rl(master_seed=1))]
        assert a != b

    def test_methods_share_data(self):
        cfg = small_rl()
        recs = run(cfg)
        by_rep = {}
        for r in recs:
            by_rep.setdefault((r.condition_id, r.replicate), set()).add(r.data_digest)
        assert all(len(d) == 1 for d in by_rep.values())
        assert len({next(iter(d)) for d in by_rep.values()}) == len(by_rep)

    def test_world_shared_across_n(self):
        cfg = small_cb()
        c16, c32 = expand_grid(cfg)
        s1, _ = run_condition(cfg, c16)
        s2, _ = run_condition(cfg, c32)
        assert s1["world_seed"] == s2["world_seed"] and s1["truth"] == s2["truth"]

    def test_coverage(self, tmp_path):
        cfg = small_cb()
        run(cfg, tmp_path)
        rows = read_csv(tmp_path / "records.csv")
        assert rows[0] == CSV_COLUMNS
        methods = json.loads((tmp_path / "manifest.json").read_text())["methods"]
        assert methods == ["slope", "fixed_h(0.25)", "fixed_h(0.0625)"]
        keys = {(r[0], r[1], r[2]) for r in rows[1:]}
        assert len(keys) == len(rows) - 1 == 2 * 3 * len(methods)

    def test_cb_slope_chosen_bandwidth_on_grid(self):
        for r in run(small_cb()):
            if r.method == "slope":
                assert r.chosen_param in (0.0625, 0.25)

    def test_resume_matches_uninterrupted(self, tmp_path):
        cfg = small_rl(grid=[{"env": ["graph"], "stochastic_reward": [True], "sparse": [False],
                              "policy": [[0.6, 0.8]], "n": [16, 32, 48]}])
        full, part = tmp_path / "full", tmp_path / "part"
        run(cfg, full)
        conds = expand_grid(cfg)
        run(cfg, part, conditions=conds[:2])
        # simulate a crash midway through the third condition
        rows = read_csv(part / "records.csv")
        with open(part / "records.csv", "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow([conds[2].condition_id] + rows[1][1:])
        new = run(cfg, part)
        assert {r.condition_id for r in new} == {conds[2].condition_id}
        assert (full / "records.csv").read_bytes() == (part / "records.csv").read_bytes()
        assert (full / "manifest.json").read_bytes() == (part / "manifest.json").read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_rl()
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b", workers=2)
        assert (tmp_path / "a" / "records.csv").read_bytes() == (tmp_path / "b" / "records.csv").read_bytes()

    def test_resume_rejects_changed_config(self, tmp_path):
        run(small_rl(), tmp_path)
        with pytest.raises(ValueError):
            run(small_rl(replicates=5), tmp_path)
        # only the output location may differ
        run(small_rl(output="elsewhere"), tmp_path)

    def test_bad_existing_header(self, tmp_path):
        (tmp_path / "records.csv").write_text("x,y\n")
        with pytest.raises(ValueError):
            run(small_rl(), tmp_path)

    @pytest.mark.parametrize("env", ["graph_pomdp", "gridworld", "hybrid"])
    def test_other_envs_run(self, env):
        block = {"env": [env], "n": [16]}
        if env == "graph_pomdp":
            block.update(stochastic_reward=[False], sparse=[True], policy=[[0.2, 0.8]])
        elif env == "gridworld":
            block.update(slip=[0.2], policy=[[0.6, 0.1]])
        recs = run(small_rl(grid=[block], replicates=2))
        assert len(recs) == 8 and all(np.isfinite(r.estimate) for r in recs)


@pytest.fixture(scope="module")
def records_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    run(small_rl(), d)
    return d


class TestReport:
    @pytest.mark.parametrize("kind", ["ecdf", "pairwise", "learning_curve", "summary_table"])
    def test_kinds(self, records_dir, tmp_path, kind):
        out = report(records_dir, kind, tmp_path / f"{kind}.csv")
        rows = read_csv(out)
        assert len(rows) > 1

    def test_pairwise_shape(self, records_dir, tmp_path):
        rows = read_csv(report(records_dir, "pairwise", tmp_path / "p.csv"))
        assert rows[0] == ["method", "slope", "dm", "wdr", "ips"]
        assert rows[-1][0] == "column_mean" and len(rows) == 6
        for i in range(1, 5):
            assert float(rows[i][i]) == 0.0

    def test_two_method_pairwise(self, tmp_path):
        run(small_rl(methods=["slope", "ips"]), tmp_path / "r")
        rows = read_csv(report(tmp_path / "r", "pairwise", tmp_path / "p.csv"))
        assert len(rows) == 4 and all(len(r) == 3 for r in rows)

    def test_learning_curve_single_n(self, tmp_path):
        cfg = small_rl(grid=[{"env": ["graph"], "stochastic_reward": [True], "sparse": [False],
                              "policy": [[0.6, 0.8]], "n": [16]}])
        run(cfg, tmp_path / "r")
        rows = read_csv(report(tmp_path / "r", "learning_curve", tmp_path / "lc.csv"))
        assert len(rows) == 5 and {r[1] for r in rows[1:]} == {"16"}
        for r in rows[1:]:
            assert float(r[5]) <= float(r[3]) <= float(r[6])

    def test_summary_mse(self, records_dir, tmp_path):
        rows = read_csv(report(records_dir, "summary_table", tmp_path / "s.csv"))
        recs = read_csv(records_dir / "records.csv")[1:]
        cid, m = rows[1][0], rows[1][1]
        sq = [float(r[6]) for r in recs if r[0] == cid and r[1] == m]
        assert float(rows[1][3]) == pytest.approx(np.mean(sq))

    def test_incomplete_rejected(self, records_dir, tmp_path):
        d = tmp_path / "broken"
        d.mkdir()
        lines = (records_dir / "records.csv").read_text().splitlines()
        (d / "records.csv").write_text("\n".join(lines[:-1]) + "\n")
        (d / "manifest.json").write_bytes((records_dir / "manifest.json").read_bytes())
        with pytest.raises(ValueError):
            report(d, "summary_table", tmp_path / "s.csv")

    def test_unknown_kind(self, records_dir, tmp_path):
        with pytest.raises(ValueError):
            report(records_dir, "histogram", tmp_path / "x.csv")


class TestCli:
    def test_list_conditions(self, capsys):
        assert main(["list-conditions", "--config", str(CONFIGS / "ci_rl.yaml")]) == 0
        out = capsys.readouterr()
        assert len(out.out.strip().splitlines()) == 12 and "12 conditions" in out.err

    def test_run_and_report(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(
            "domain: rl\nreplicates: 2\nrecord_wall_time: false\n"
            "grid:\n  - {env: [graph], stochastic_reward: [false], sparse: [false], "
            "policy: [[0.2, 0.8]], n: [16]}\n")
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--master-seed", "7"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 7 and manifest["complete"]
        assert main(["report", "--records", str(out), "--kind", "summary_table",
                     "--out", str(tmp_path / "s.csv")]) == 0
        assert (tmp_path / "s.csv").exists()

    def test_run_without_output(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("domain: rl\nreplicates: 1\ngrid: {env: [graph], n: [16]}\n")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_module_entry(self):
        import subprocess
        import sys

        res = subprocess.run([sys.executable, "-m", "slope_ope", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "list-conditions" in res.stdout
