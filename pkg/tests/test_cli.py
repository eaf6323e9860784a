import csv
import json

import numpy as np
import pytest

from regnoise.cli import UsageError, build_parser, main, parse_config


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_flags_populate_config():
    cfg = parse_config(["--command", "check-variance", "--hurst", "1.5", "--seed", "7"])
    assert cfg.command == "check-variance" and cfg.seed == 7 and cfg.params["hurst"] == 1.5


def test_empty_argv_is_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_integer_hurst_rejected(capsys):
    assert main(["--command", "solve", "--hurst", "2.0"]) == 2
    err = capsys.readouterr().err
    assert "hurst" in err and "non-integer" in err


@pytest.mark.parametrize("argv", [
    ["--command", "solve", "--n-samples", "5"],
    ["--command", "nope"],
    ["--command", "solve", "--alpha", "1.5"],
    ["--command", "check-variance", "--n-samples", "abc"],
])
def test_bad_arguments_exit_2(argv):
    assert main(argv) == 2


def test_unknown_file_key_named(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "solve", "colour": 1}))
    with pytest.raises(UsageError, match="colour"):
        parse_config(["--config", str(cfg)])


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "solve", "seed": 3, "params": {"hurst": 2.3, "n_steps": 64}}))
    out = parse_config(["--config", str(cfg), "--n-steps", "32"])
    assert out.seed == 3 and out.params["hurst"] == 2.3 and out.params["n_steps"] == 32


def test_config_echo_round_trips(tmp_path):
    argv = ["--command", "solve", "--hurst", "2.3", "--n-steps", "32", "--seed", "11",
            "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    echoed = json.loads((tmp_path / "solve-11.json").read_text())["config"]["cli"]
    cfg_file = tmp_path / "again.json"
    cfg_file.write_text(json.dumps(echoed))
    assert parse_config(["--config", str(cfg_file)]).echo() == echoed == parse_config(argv).echo()


def test_solve_zero_drift_matches_gen_fbm(tmp_path):
    common = ["--n-steps", "64", "--hurst", "2.3", "--dim", "2", "--seed", "5", "--output-dir", str(tmp_path)]
    assert main(["--command", "gen-fbm", *common]) == 0
    assert main(["--command", "solve", "--drift", "zero", *common]) == 0
    top = {(r["t"], r["component"]): float(r["value"])
           for r in _rows(tmp_path / "gen-fbm-5.csv") if r["level"] == "2"}
    sol = _rows(tmp_path / "solve-5-solution.csv")
    assert len(sol) == 65 * 2
    for r in sol:
        assert float(r["x"]) == pytest.approx(top[(r["t"], r["component"])], abs=1e-12)


def test_check_variance_brownian_exits_zero(tmp_path):
    code = main(["--command", "check-variance", "--hurst", "0.5", "--n-samples", "2000",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "variance_identity-0.csv")
    assert list(rows[0]) == ["spacing", "mc_variance", "std_error", "target", "z_score", "within"]


def test_threshold_scan_shape(tmp_path):
    code = main(["--command", "threshold-scan", "--n-paths", "1", "--n-steps", "32", "--output-dir", str(tmp_path)])
    assert code in (0, 1)
    text = (tmp_path / "threshold_scan-0.csv").read_text().splitlines()
    assert text[0] == "H,alpha,strong,weak,median_metric,ratio"
    assert len(text) == 65


def test_rerun_is_byte_identical(tmp_path):
    argv = ["--command", "contraction", "--n-paths", "3", "--n-steps", "128"]
    assert main([*argv, "--workers", "1", "--output-dir", str(tmp_path / "a")]) == 0
    assert main([*argv, "--workers", "2", "--output-dir", str(tmp_path / "b")]) == 0
    for name in ("contraction-0.json", "contraction-0.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_runtime_error_exit_3(tmp_path, monkeypatch):
    import regnoise.cli as cli
    from regnoise.experiments import ExperimentReport

    def broken(cfg):
        return ExperimentReport("broken", {}, {"x": float("nan")}, True, cfg.seed)

    monkeypatch.setattr(cli, "_run_experiment", broken)
    assert main(["--command", "sew-demo", "--output-dir", str(tmp_path)]) == 3


def test_unwritable_output_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--command", "solve", "--n-steps", "16", "--output-dir", str(blocker / "sub")]) == 3


def test_every_param_has_a_flag():
    opts = {a.dest for a in build_parser()._actions}
    assert {"n_steps", "K", "h_list", "t_small"} <= opts
