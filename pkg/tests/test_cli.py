import json

import numpy as np
import pytest

from logifold.approx import grid_from_function, save_grid
from logifold.cli import main
from logifold.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    config_from_dict,
    config_hash,
    config_to_dict,
)
from logifold.graph import evaluate_batch, load_graph, validate_graph
from logifold.fuzzy import evaluate_fuzzy, load_fuzzy
from logifold.networks import (
    INDEXMAX,
    STEP,
    forward_classical,
    load_model,
    random_network,
    save_model,
)


class TestConfig:
    def test_defaults_validate(self):
        cfg = RunConfig().validate()
        assert cfg.seed == 0
        assert all(0.0 <= a <= 1.0 for a in cfg.alpha_grid)

    def test_caps_must_be_positive(self):
        with pytest.raises(ConfigError):
            RunConfig(chamber_cap=0).validate()

    def test_grid_must_stay_in_unit_interval(self):
        with pytest.raises(ConfigError):
            RunConfig(alpha_grid=(0.0, 1.5)).validate()

    def test_round_trip_and_unknown_fields(self):
        cfg = RunConfig(seed=5, alpha_grid=(0.0, 0.5))
        assert config_from_dict(config_to_dict(cfg)) == cfg
        with pytest.raises(ConfigError):
            config_from_dict({"seeds": 1})

    def test_overrides_win_and_change_the_hash(self):
        base = RunConfig(seed=5)
        bumped = apply_overrides(base, seed=9, grid=(0.0, 0.5))
        assert bumped.seed == 9
        assert bumped.alpha_grid == (0.0, 0.5)
        assert base.alpha_grid == RunConfig().alpha_grid
        assert config_hash(base) != config_hash(bumped)
        assert config_hash(base) == config_hash(RunConfig(seed=5))


@pytest.fixture
def step_model(tmp_path):
    net = random_network(np.random.default_rng(11), [2, 3, 2], STEP, INDEXMAX)
    path = tmp_path / "step.json"
    save_model(net, path)
    return net, path


class TestCompileEval:
    def test_compile_eval_check_equiv(self, tmp_path, step_model, capsys):
        net, model_path = step_model
        graph_path = tmp_path / "g.json"
        assert main(["compile", "--model", str(model_path),
                     "--activation", "step", "--out", str(graph_path)]) == 0
        g = load_graph(graph_path)
        assert not validate_graph(g).errors

        pts = tmp_path / "pts.csv"
        X = np.random.default_rng(3).normal(size=(20, 2))
        pts.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in X))
        out = tmp_path / "labels.txt"
        assert main(["eval", "--graph", str(graph_path), "--points", str(pts),
                     "--out", str(out)]) == 0
        labels = out.read_text().split()
        assert labels == [str(forward_classical(net, x)) for x in X]

        capsys.readouterr()
        assert main(["check-equiv", "--model", str(model_path), "--graph",
                     str(graph_path), "--samples", "500"]) == 0
        report = capsys.readouterr().out
        assert "samples: 500" in report
        assert "mismatches: 0" in report
        assert "config_hash: " in report

    def test_wrong_activation_is_a_validation_error(self, tmp_path, step_model):
        _, model_path = step_model
        code = main(["compile", "--model", str(model_path),
                     "--activation", "relu", "--out", str(tmp_path / "g.json")])
        assert code == 2

    def test_semilinear_round_trip_via_files(self, tmp_path, step_model):
        _, model_path = step_model
        g1 = tmp_path / "g1.json"
        s = tmp_path / "s.json"
        g2 = tmp_path / "g2.json"
        assert main(["compile", "--model", str(model_path),
                     "--activation", "step", "--out", str(g1)]) == 0
        assert main(["to-semilinear", "--graph", str(g1),
                     "--out", str(s)]) == 0
        assert main(["from-semilinear", "--set", str(s),
                     "--out", str(g2)]) == 0
        a, b = load_graph(g1), load_graph(g2)
        X = np.random.default_rng(5).normal(size=(200, 2))
        left = [str(l) for l in evaluate_batch(a, X)]
        assert left == evaluate_batch(b, X)


class TestGridCommands:
    @pytest.fixture
    def grid_file(self, tmp_path):
        grid = grid_from_function(lambda p: int(p[1] >= p[0]), (0.0, 0.0),
                                  (1.0, 1.0), 8)
        path = tmp_path / "grid.json"
        save_grid(grid, path)
        return path

    def test_approx_report_is_deterministic(self, tmp_path, grid_file):
        out, rep = tmp_path / "a.json", tmp_path / "r.json"
        argv = ["approx", "--grid", str(grid_file), "--epsilon-frac", "0.1",
                "--out", str(out), "--report", str(rep)]
        assert main(argv) == 0
        first = rep.read_bytes()
        doc = json.loads(first)
        assert doc["residual_measure"] < 0.1 * 1.0 + 1e-12
        assert doc["mismatch_measure"] == 0.0
        assert "config_hash" in doc
        assert main(argv) == 0
        assert rep.read_bytes() == first

    def test_charts_family_exhausts(self, tmp_path, grid_file):
        rep = tmp_path / "fam.json"
        assert main(["charts", "--grid", str(grid_file), "--eps0-frac",
                     "0.03125", "--depth", "6", "--report", str(rep)]) == 0
        doc = json.loads(rep.read_text())
        assert doc["final_residual"] == 0.0
        assert len(doc["rounds"]) <= 6

    def test_epsilon_is_required(self, tmp_path, grid_file):
        assert main(["approx", "--grid", str(grid_file),
                     "--out", str(tmp_path / "a.json")]) == 2


class TestTrainPipeline:
    def test_gen_train_specialize_fuzzy(self, tmp_path):
        data = tmp_path / "d.csv"
        assert main(["--seed", "7", "gen-data", "--kind", "blobs",
                     "--n", "120", "--out", str(data)]) == 0
        model = tmp_path / "m.json"
        assert main(["--seed", "7", "train", "--data", str(data), "--hidden",
                     "6", "--epochs", "8", "--out", str(model),
                     "--trace", str(tmp_path / "t.csv")]) == 0
        assert (tmp_path / "t.csv").read_text().startswith("epoch,loss")

        spec = tmp_path / "spec.json"
        assert main(["--seed", "7", "specialize", "--model", str(model),
                     "--blocks", "0|1", "--data", str(data), "--epochs", "5",
                     "--out", str(spec)]) == 0
        assert load_model(spec).output_dim == 2

        fuzz = tmp_path / "f.json"
        assert main(["fuzzy-import", "--model", str(model), "--kind",
                     "sigmoid", "--out", str(fuzz)]) == 0
        fg = load_fuzzy(fuzz)
        outcome = evaluate_fuzzy(fg, [0.5, 0.5])
        assert len(outcome.state) == 3
        assert outcome.state.sum() == pytest.approx(1.0)

    def test_bad_blocks_flag_is_validation(self, tmp_path):
        model = tmp_path / "m.json"
        save_model(random_network(np.random.default_rng(0), [2, 3],
                                  "sigmoid", "softmax"), model)
        assert main(["specialize", "--model", str(model), "--blocks", "a|b",
                     "--out", str(tmp_path / "s.json")]) == 2


def write_charts_file(tmp_path, data):
    gen = tmp_path / "gen.json"
    spec = tmp_path / "spec.json"
    assert main(["--seed", "7", "train", "--data", str(data), "--hidden", "6",
                 "--epochs", "10", "--out", str(gen)]) == 0
    assert main(["--seed", "7", "specialize", "--model", str(gen), "--blocks",
                 "0|1", "--data", str(data), "--epochs", "6",
                 "--out", str(spec)]) == 0
    charts = tmp_path / "charts.json"
    charts.write_text(json.dumps({
        "classes": [0, 1, 2],
        "charts": [
            {"id": "gen", "model": "gen.json", "blocks": [[0], [1], [2]]},
            {"id": "pair", "model": "spec.json", "blocks": [[0], [1]]},
        ],
    }))
    return charts


class TestEnsembleCommands:
    @pytest.fixture
    def pipeline(self, tmp_path):
        data = tmp_path / "d.csv"
        assert main(["--seed", "7", "gen-data", "--kind", "blobs", "--n",
                     "150", "--out", str(data)]) == 0
        charts = write_charts_file(tmp_path, data)
        return tmp_path, data, charts

    def test_target_graph_layout(self, pipeline):
        tmp_path, _, charts = pipeline
        out = tmp_path / "tg.json"
        assert main(["ensemble", "target-graph", "--charts", str(charts),
                     "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["nodes"][doc["root"]]["target"] == ["0", "1", "2"]
        assert doc["arrows"]["0"] == [1]
        assert doc["nodes"][1]["charts"] == [["pair"]]

    def test_calibrate_then_vote_deterministic(self, pipeline):
        tmp_path, data, charts = pipeline
        cal = tmp_path / "cal.json"
        assert main(["--grid", "0,0.4,0.6,0.8", "ensemble", "calibrate",
                     "--charts", str(charts), "--data", str(data),
                     "--out", str(cal)]) == 0
        doc = json.loads(cal.read_text())
        assert set(doc["classes"]) == {"0", "1", "2"}
        for rec in doc["classes"].values():
            assert rec["alpha"] in (0.0, 0.4, 0.6, 0.8)
            assert 0.0 <= rec["rate"] <= 1.0

        report = tmp_path / "vote.json"
        argv = ["--grid", "0,0.4,0.6,0.8", "ensemble", "vote", "--charts",
                str(charts), "--data", str(data), "--calibration", str(cal),
                "--out", str(report)]
        assert main(argv) == 0
        first = report.read_bytes()
        assert main(argv) == 0
        assert report.read_bytes() == first
        doc = json.loads(first)
        assert len(doc["instances"]) == 30  # test split of 150
        for rec in doc["instances"]:
            assert rec["prediction"] in {"0", "1", "2"}
            assert set(rec["answer"]) == {"0", "1", "2"}

    def test_report_writes_matrices(self, pipeline):
        tmp_path, data, charts = pipeline
        outdir = tmp_path / "rep"
        assert main(["ensemble", "report", "--charts", str(charts), "--data",
                     str(data), "--outdir", str(outdir)]) == 0
        summary = json.loads((outdir / "summary.json").read_text())
        assert set(summary["charts"]) == {"gen", "pair"}
        lines = (outdir / "gen_predictions.csv").read_text().splitlines()
        assert lines[0] == "instance_id,p_block_1,p_block_2,p_block_3"
        assert len(lines) == 31

    def test_missing_calibration_names_the_path(self, pipeline, capsys):
        tmp_path, data, charts = pipeline
        missing = tmp_path / "nope.json"
        code = main(["ensemble", "vote", "--charts", str(charts), "--data",
                     str(data), "--calibration", str(missing),
                     "--out", str(tmp_path / "v.json")])
        assert code == 65
        assert str(missing) in capsys.readouterr().err


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 64
        assert "invalid choice" in capsys.readouterr().err

    def test_unknown_ensemble_subcommand(self, capsys):
        assert main(["ensemble", "frobnicate"]) == 64

    def test_missing_required_flag(self, capsys):
        assert main(["compile", "--activation", "step", "--out", "x"]) == 2

    def test_malformed_json_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"layers": [\n  oops\n]}')
        code = main(["compile", "--model", str(bad), "--activation", "step",
                     "--out", str(tmp_path / "g.json")])
        assert code == 65
        assert "line 2" in capsys.readouterr().err

    def test_config_file_values_checked(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text('{"chamber_cap": -1}')
        code = main(["--config", str(cfgfile), "gen-data", "--kind", "blobs",
                     "--out", str(tmp_path / "d.csv")])
        assert code == 2

    def test_cap_exhaustion_exit_code(self, tmp_path):
        grid = grid_from_function(lambda p: int(p[0] + p[1]) % 2, (0.0, 0.0),
                                  (4.0, 4.0), 4)
        gridfile = tmp_path / "grid.json"
        save_grid(grid, gridfile)
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text('{"budget_cap": 1}')
        code = main(["--config", str(cfgfile), "approx", "--grid",
                     str(gridfile), "--epsilon", "0.01",
                     "--out", str(tmp_path / "a.json")])
        assert code == 3
