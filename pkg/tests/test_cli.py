import csv
import json

import numpy as np
import pytest

from trustdiff.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, _default_jobs, compare_runs, main
from trustdiff.config import ExperimentConfig
from trustdiff.dynamics import Configuration
from trustdiff.graph import Graph

BASE = {
    "graph": {"generator": "random_regular", "n": 30, "k": 4},
    "payoff": [8, 4, 2, 7],
    "delta_prime": 1.0,
    "horizon": 600,
    "trials": 3,
    "master_seed": 11,
}


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestExitCodes:
    def test_missing_subcommand(self, capsys):
        assert main([]) == EXIT_INVALID

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == EXIT_INVALID

    def test_invalid_config_lists_all(self, tmp_path, capsys):
        bad = dict(BASE, payoff=[1, 2, 3, 4], seed_fraction=2, trials=0)
        assert main(["simulate", "--config", write_cfg(tmp_path, bad)]) == EXIT_INVALID
        err = capsys.readouterr().err
        assert "seed_fraction" in err and "trials" in err and "a > d" in err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_INVALID

    def test_missing_edge_list(self, tmp_path, capsys):
        cfg = dict(BASE, graph={"edge_list": str(tmp_path / "missing.txt")})
        assert main(["simulate", "--config", write_cfg(tmp_path, cfg)]) == EXIT_INVALID

    def test_state_cap_is_runtime(self, tmp_path, capsys):
        cfg = {"degree_counts": {"3": 300, "7": 100}, "payoff": [8, 4, 2, 7], "delta_prime": 1.0,
               "max_states": 100}
        assert main(["chain", "--config", write_cfg(tmp_path, cfg)]) == EXIT_RUNTIME

    def test_jobs_env(self, monkeypatch):
        monkeypatch.setenv("TRUSTDIFF_JOBS", "3")
        assert _default_jobs() == 3
        monkeypatch.setenv("TRUSTDIFF_JOBS", "zero")
        assert main(["thresholds", "--payoff", "8,4,2,7", "--delta-prime", "1"]) == EXIT_INVALID


class TestSimulate:
    def run(self, tmp_path, name, data, *extra):
        out = tmp_path / name
        rc = main(["simulate", "--config", write_cfg(tmp_path, data), "--out", str(out), *extra])
        assert rc == EXIT_OK
        return out

    def test_outputs_and_determinism(self, tmp_path):
        a = self.run(tmp_path, "a", BASE)
        b = self.run(tmp_path, "b", BASE, "--jobs", "2")
        files = sorted(p.name for p in a.iterdir())
        assert files == ["aggregate.csv", "summary.json", "trial_0.csv", "trial_1.csv", "trial_2.csv"]
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_seed_flag_changes_output(self, tmp_path):
        a = self.run(tmp_path, "a", BASE)
        b = self.run(tmp_path, "b", BASE, "--seed", "12")
        assert (a / "trial_0.csv").read_bytes() != (b / "trial_0.csv").read_bytes()

    def test_adding_trials_keeps_earlier(self, tmp_path):
        a = self.run(tmp_path, "a", dict(BASE, trials=2, graph=dict(BASE["graph"], per_trial=True)))
        b = self.run(tmp_path, "b", dict(BASE, trials=3, graph=dict(BASE["graph"], per_trial=True)))
        assert (a / "trial_0.csv").read_bytes() == (b / "trial_0.csv").read_bytes()
        assert (a / "trial_1.csv").read_bytes() == (b / "trial_1.csv").read_bytes()

    def test_reaggregation(self, tmp_path):
        out = self.run(tmp_path, "a", dict(BASE, metric_stride=30, trials=4))
        trials = [read_csv(out / f"trial_{i}.csv") for i in range(4)]
        for row in read_csv(out / "aggregate.csv"):
            step = int(row["step"])
            adopt, util = [], []
            for t in trials:
                last = [r for r in t if int(r["step"]) <= step][-1]
                adopt.append(float(last["adoption_fraction"]))
                util.append(float(last["average_utility"]))
            assert float(row["mean_adoption"]) == pytest.approx(np.mean(adopt), abs=1e-12)
            assert float(row["mean_utility"]) == pytest.approx(np.mean(util), abs=1e-12)
            assert float(row["sweep"]) == step / 30

    def test_full_seeding(self, tmp_path):
        out = self.run(tmp_path, "a", dict(BASE, trials=1, seed_fraction=1.0))
        first = read_csv(out / "aggregate.csv")[0]
        assert (first["step"], float(first["mean_adoption"])) == ("0", 1.0)
        s = json.loads((out / "summary.json").read_text())
        assert s["domination_frequency"] == 1.0 and s["n_players"] == 30

    def test_sync_br_model(self, tmp_path):
        out = self.run(tmp_path, "a", dict(BASE, model="BR_LTE", horizon=20, trials=1))
        s = json.loads((out / "summary.json").read_text())
        assert s["trials"][0]["model"] == "BR_LTE"

    def test_set_override(self, tmp_path):
        out = self.run(tmp_path, "a", BASE, "--set", "trials=1", "--set", "model=\"NE\"")
        s = json.loads((out / "summary.json").read_text())
        assert len(s["trials"]) == 1 and s["config"]["model"] == "NE"

    def test_edge_list_source(self, tmp_path):
        el = tmp_path / "g.txt"
        el.write_text("# ring\n" + "".join(f"{i} {(i + 1) % 12}\n" for i in range(12)))
        out = self.run(tmp_path, "a", dict(BASE, graph={"edge_list": str(el)}, trials=1))
        assert json.loads((out / "summary.json").read_text())["n_players"] == 12


class TestChain:
    def chain_cfg(self, tmp_path, counts, **kw):
        return write_cfg(tmp_path, dict({"degree_counts": counts, "payoff": [8, 4, 2, 7], "delta_prime": 0.5}, **kw))

    def test_two_player_hand_solution(self, tmp_path, capsys):
        from trustdiff.game import PayoffMatrix, Sensitivity
        from trustdiff.meanfield import ChainSpec, birth_death_rates
        assert main(["chain", "--config", self.chain_cfg(tmp_path, {"1": 2})]) == EXIT_OK
        out = capsys.readouterr()
        rows = list(csv.DictReader(out.out.splitlines()))
        assert [r["state_index"] for r in rows] == ["0", "1", "2"]
        spec = ChainSpec.from_counts({1: 2}, payoff=PayoffMatrix(8, 4, 2, 7), trust=0.5, sens=Sensitivity())
        a, b = birth_death_rates(spec)
        assert float(rows[1]["w_all_A"]) == pytest.approx(a[1] / (a[1] + b[1]), rel=1e-12)
        assert float(rows[1]["tau"]) == pytest.approx(1 / (a[1] + b[1]), rel=1e-12)
        assert json.loads(out.err)["solver"] == "closed_form"

    def test_two_class_row_count(self, tmp_path):
        out = tmp_path / "o"
        cfg = self.chain_cfg(tmp_path, {"3": 30, "7": 10})
        assert main(["chain", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = read_csv(out / "chain.csv")
        assert len(rows) == 31 * 11
        assert list(rows[0])[:8] == ["state_index"] + [f"y_{k}" for k in range(1, 8)]
        meta = json.loads((out / "chain.json").read_text())
        assert meta["n_states"] == 341 and meta["residual"] < 1e-9

    @pytest.mark.slow
    def test_large_two_class_row_count(self, tmp_path):
        out = tmp_path / "o"
        cfg = self.chain_cfg(tmp_path, {"3": 300, "7": 100})
        assert main(["chain", "--config", cfg, "--out", str(out)]) == EXIT_OK
        assert sum(1 for _ in open(out / "chain.csv")) - 1 == 30401

    def test_seeds_alpha_one(self, tmp_path):
        out = tmp_path / "o"
        cfg = self.chain_cfg(tmp_path, {"4": 20}, delta_prime=1.0)
        assert main(["seeds", "--config", cfg, "--alpha", "1.0", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out / "seeds.csv")
        assert [r["y_4"] for r in rows] == ["20"]

    def test_seeds_requires_alpha(self, tmp_path, capsys):
        assert main(["seeds", "--config", self.chain_cfg(tmp_path, {"4": 20})]) == EXIT_INVALID


class TestThresholds:
    def table(self, capsys, payoff, dps):
        assert main(["thresholds", "--payoff", payoff, "--delta-prime", dps]) == EXIT_OK
        return list(csv.DictReader(capsys.readouterr().out.splitlines()))

    def test_first_table(self, capsys):
        rows = self.table(capsys, "8,4,2,7", "0.25,0.5,1,2,3")
        assert [round(float(r["q_star"]), 3) for r in rows] == [0.583, 0.5, 0.333, 0, 0]

    def test_floor(self, capsys):
        rows = self.table(capsys, "8,4,2,5", "1.5,2,5")
        assert all(float(r["q_star"]) == pytest.approx(0.1) for r in rows)

    def test_peculiar(self, capsys):
        (row,) = self.table(capsys, "10,9,1,9", "4")
        assert round(float(row["q_star"]), 3) == 0.444

    def test_bad_payoff(self, capsys):
        assert main(["thresholds", "--payoff", "1,2,3,4", "--delta-prime", "1"]) == EXIT_INVALID


class TestCompare:
    def test_identical(self, tmp_path, capsys):
        cfg = dict(BASE, horizon=50)
        assert main(["compare", "--config", write_cfg(tmp_path, cfg)]) == EXIT_OK
        res = json.loads(capsys.readouterr().out)
        assert res["identical"] is True and res["rounds"] <= 50

    def test_horizon_zero(self, tmp_path, capsys):
        assert main(["compare", "--config", write_cfg(tmp_path, dict(BASE, horizon=0))]) == EXIT_OK
        assert json.loads(capsys.readouterr().out) == {"identical": True, "rounds": 0}

    def test_isolated_vertices(self):
        g = Graph.from_edges(7, [(0, 1), (1, 2), (2, 0), (3, 4)])
        cfg = ExperimentConfig.from_dict(dict(BASE, horizon=10, delta_prime=0.3))
        init = Configuration.from_choices(g, np.array([1, 0, 0, 1, 0, 1, 0], bool))
        assert compare_runs(g, cfg, init)["identical"] is True
