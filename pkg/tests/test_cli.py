"""End-to-end checks of the command-line interface via subprocesses."""
import csv
import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "edforecast.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(CLI + list(args), capture_output=True, text=True,
                          cwd=cwd)


def write_config(tmp_path, **overrides):
    doc = {"schema_version": 1,
           "data": {"synth_spec": "stmarys_like", "n_days": 560},
           "geometry": {"train_len": 400, "valid_len": 60, "test_len": 60},
           "horizons": [1],
           "models": ["lm", "knn", "seasonal_naive"],
           "grids": {"knn": [{"k": 5}, {"k": 10}]}}
    doc.update(overrides)
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


class TestSynthCommand:
    def test_writes_the_bundle(self, tmp_path):
        out = tmp_path / "data"
        res = run_cli("synth", "stmarys_like", "--days", "120",
                      "--out", str(out))
        assert res.returncode == 0
        names = sorted(p.name for p in out.iterdir())
        assert "attendance.csv" in names
        assert "calendar.json" in names
        assert "weather.csv" in names
        assert "trends_monthly.csv" in names
        with open(out / "attendance.csv") as fh:
            assert len(list(csv.DictReader(fh))) == 120

    def test_same_spec_and_seed_twice_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli("synth", "stmarys_like", "--days", "90",
                           "--out", str(out)).returncode == 0
        for p1 in sorted(a.iterdir()):
            assert p1.read_bytes() == (b / p1.name).read_bytes()

    def test_invalid_spec_exits_2_with_no_partial_files(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "data"
        res = run_cli("synth", str(bad), "--days", "100", "--out", str(out))
        assert res.returncode == 2
        assert not out.exists() or not any(out.iterdir())

    def test_unknown_bundled_name_exits_2(self, tmp_path):
        res = run_cli("synth", "atlantis_general", "--days", "100",
                      "--out", str(tmp_path / "x"))
        assert res.returncode == 2


@pytest.fixture(scope="module")
def backtest_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bt")
    cfg = write_config(tmp)
    out = tmp / "run"
    res = run_cli("backtest", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    return tmp, cfg, out, res


class TestBacktestCommand:
    def test_scores_cover_every_model_and_horizon(self, backtest_out):
        _, _, out, _ = backtest_out
        scores = json.loads((out / "scores.json").read_text())
        assert set(scores) == {"lm", "knn", "seasonal_naive"}
        for per_model in scores.values():
            assert set(per_model) == {"h1"}
            assert per_model["h1"]["n"] == 60

    def test_rerun_gives_identical_scores(self, backtest_out, tmp_path):
        tmp, cfg, out, _ = backtest_out
        out2 = tmp_path / "rerun"
        res = run_cli("backtest", "--config", str(cfg), "--out", str(out2))
        assert res.returncode == 0
        assert ((out / "scores.json").read_text()
                == (out2 / "scores.json").read_text())

    def test_scores_recomputable_from_the_fold_csv(self, backtest_out):
        _, _, out, _ = backtest_out
        with open(out / "folds.csv") as fh:
            rows = list(csv.DictReader(fh))
        scores = json.loads((out / "scores.json").read_text())
        by_model = {}
        for r in rows:
            by_model.setdefault(r["model"], []).append(
                abs(float(r["prediction"]) - float(r["actual"])))
        for model, errs in by_model.items():
            mae = sum(errs) / len(errs)
            assert abs(mae - scores[model]["h1"]["mae"]) <= 1e-9

    def test_summary_json_is_printed_on_stdout(self, backtest_out):
        _, _, _, res = backtest_out
        doc = json.loads(res.stdout)
        assert doc["command"] == "backtest"
        assert "scores" in doc

    def test_stderr_carries_json_log_events(self, backtest_out):
        _, _, _, res = backtest_out
        events = [json.loads(line) for line in res.stderr.splitlines()]
        assert any(e["event"] == "backtest_start" for e in events)
        assert any(e["event"] == "backtest_done" for e in events)

    def test_missing_config_file_exits_2(self, tmp_path):
        res = run_cli("backtest", "--config", str(tmp_path / "none.json"),
                      "--out", str(tmp_path / "o"))
        assert res.returncode == 2

    def test_invalid_config_exits_2(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"schema_version": 1, "data": {},
                                 "models": ["lm"]}))
        res = run_cli("backtest", "--config", str(p),
                      "--out", str(tmp_path / "o"))
        assert res.returncode == 2


class TestStackCommand:
    def test_stacked_weights_land_on_the_simplex(self, tmp_path):
        cfg = write_config(tmp_path,
                           stack={"enabled": True, "variants": ["convex"]})
        out = tmp_path / "stack"
        res = run_cli("stack", "--config", str(cfg), "--out", str(out))
        assert res.returncode == 0, res.stderr
        weights = json.loads((out / "stack_weights.json").read_text())
        w = weights["convex_h1"]["weights"]
        vals = [float(v) for v in w]
        assert min(vals) >= 0
        assert abs(sum(vals) - 1) < 1e-9
        scores = json.loads((out / "scores.json").read_text())
        assert "stack_convex" in scores


class TestTuneCommand:
    def test_writes_ledgers_and_selections(self, tmp_path):
        cfg = write_config(tmp_path, models=["knn"])
        out = tmp_path / "tune"
        res = run_cli("tune", "--config", str(cfg), "--out", str(out))
        assert res.returncode == 0, res.stderr
        sel = json.loads((out / "selections.json").read_text())
        assert set(sel) == {"knn_h1"}
        assert sel["knn_h1"]["hyperparams"]["k"] in (5, 10)
        ledger_lines = (out / "knn_h1.csv").read_text().strip().splitlines()
        assert len(ledger_lines) == 1 + 60 * 2  # days x candidates


class TestImportanceCommand:
    def test_reports_and_artifacts(self, tmp_path):
        cfg = write_config(tmp_path,
                           importance={"n_repeats": 3, "holdout_days": 60})
        out = tmp_path / "imp"
        res = run_cli("importance", "knn", "--config", str(cfg),
                      "--out", str(out))
        assert res.returncode == 0, res.stderr
        doc = json.loads((out / "importance_knn_h1.json").read_text())
        shares = [v["share"] for v in doc["importance"].values()]
        assert abs(sum(shares) - 1) < 1e-9 or sum(shares) == 0

    def test_identity_hook_zeroes_all_importances(self, tmp_path):
        cfg = write_config(tmp_path,
                           importance={"n_repeats": 2, "holdout_days": 60})
        out = tmp_path / "imp"
        res = run_cli("importance", "knn", "--config", str(cfg),
                      "--out", str(out), "--identity")
        assert res.returncode == 0, res.stderr
        doc = json.loads((out / "importance_knn_h1.json").read_text())
        assert all(v["raw"] == 0.0 for v in doc["importance"].values())

    def test_seeded_rerun_is_identical(self, tmp_path):
        cfg = write_config(tmp_path,
                           importance={"n_repeats": 2, "holdout_days": 60})
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            res = run_cli("importance", "knn", "--config", str(cfg),
                          "--out", str(out))
            assert res.returncode == 0
            outs.append((out / "importance_knn_h1.json").read_text())
        assert outs[0] == outs[1]

    def test_unknown_model_exits_2(self, tmp_path):
        cfg = write_config(tmp_path)
        res = run_cli("importance", "arima", "--config", str(cfg),
                      "--out", str(tmp_path / "x"))
        assert res.returncode == 2
