import numpy as np
import pytest

from recirc.cli import main


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", "--seed", "5", "--out", str(out),
                 "--config", str(_config(tmp_path, "[scenario]\ncontroller = constant\nt_f = 3.0\n"))])
    assert code == 0
    assert (out / "run.csv").exists()
    assert (out / "run.svg").exists()


def test_seed_required(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path / "x")])
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_bad_config_value_rejected(tmp_path):
    cfg = _config(tmp_path, "[scenario]\ncontroller = constant\nt_f = -3\n")
    code = main(["simulate", "--seed", "1", "--out", str(tmp_path / "x"), "--config", str(cfg)])
    assert code == 2


def test_missing_config_file(tmp_path):
    code = main(["simulate", "--seed", "1", "--out", str(tmp_path / "x"),
                 "--config", str(tmp_path / "nope.ini")])
    assert code == 2


def test_run_fault_exit_code(tmp_path):
    # substrate started against the make-up singularity guard: plant fault
    cfg = _config(tmp_path, "[scenario]\ncontroller = constant\nt_f = 3.0\ns0 = 199.5\n")
    code = main(["simulate", "--seed", "1", "--out", str(tmp_path / "x"), "--config", str(cfg)])
    assert code == 3


def test_build_table_and_reuse(tmp_path):
    out = tmp_path / "tbl"
    assert main(["build-table", "--seed", "3", "--out", str(out),
                 "--config", str(_config(tmp_path, "[lookup]\ntable_size = 20\n"))]) == 0
    table_path = out / "policy_table.csv"
    assert table_path.exists()
    cfg = _config(
        tmp_path,
        f"[scenario]\ncontroller = lookup\nt_f = 3.0\n[lookup]\ntable_path = {table_path}\n",
        name="reuse.ini",
    )
    assert main(["simulate", "--seed", "4", "--out", str(tmp_path / "sim2"), "--config", str(cfg)]) == 0


def test_observability_report(tmp_path):
    cfg = _config(tmp_path, "[observability]\nn_points = 200\n")
    out = tmp_path / "obs"
    assert main(["observability", "--seed", "1", "--out", str(out), "--config", str(cfg)]) == 0
    lines = (out / "rank_report.csv").read_text().splitlines()
    assert len(lines) == 202


def test_mc_ukf_small(tmp_path):
    cfg = _config(tmp_path, "[campaign]\nn_runs = 3\nt_f = 30.0\n")
    out = tmp_path / "ukf"
    assert main(["mc-ukf", "--seed", "2", "--out", str(out), "--config", str(cfg)]) == 0
    assert (out / "ukf_campaign.csv").exists()


def test_mc_robustness_small(tmp_path):
    cfg = _config(tmp_path, "[campaign]\nn_scenarios = 2\nt_f = 6.0\n[lookup]\ntable_size = 30\n")
    out = tmp_path / "rob"
    assert main(["mc-robustness", "--seed", "2", "--out", str(out), "--config", str(cfg)]) == 0
    assert (out / "robustness_scenarios.csv").exists()
    assert (out / "robustness_summary.csv").exists()
    assert (out / "robustness.svg").exists()


def test_fit_synthetic(tmp_path):
    out = tmp_path / "fit"
    assert main(["fit", "--seed", "6", "--out", str(out)]) == 0
    assert (out / "fit_result.csv").exists()
    assert (out / "synthetic_data.csv").exists()


def test_fit_from_files(tmp_path):
    out = tmp_path / "fit1"
    assert main(["fit", "--seed", "6", "--out", str(out)]) == 0
    cfg = _config(
        tmp_path,
        f"[fit]\ndata = {out / 'synthetic_data.csv'}\nd_profile = {out / 'synthetic_profile.csv'}\n",
        name="fit2.ini",
    )
    assert main(["fit", "--seed", "7", "--out", str(tmp_path / "fit2"), "--config", str(cfg)]) == 0


def _config(tmp_path, body, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(body)
    return path
