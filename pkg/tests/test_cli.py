import csv
import json

import numpy as np
import pytest

from telelab import experiments
from telelab.cli import main, parse_axis, verify_report
from telelab.experiments import ConfigError, PROTOCOLS, aggregate, resolve_params, run_trials, trial_rng


def _run(tmp_path, *args):
    return main(["run", "--out", str(tmp_path), *args])


def _load(path):
    return json.loads(path.read_text())


def test_bbcjpw_run(tmp_path, capsys):
    assert _run(tmp_path, "--protocol", "bbcjpw", "--trials", "100", "--seed", "7") == 0
    rep = _load(tmp_path / "bbcjpw_seed7.json")
    assert abs(rep["aggregates"]["mean_fidelity"] - 1) < 1e-10
    assert rep["aggregates"]["n_trials"] == 100
    assert set(rep) == {"schema_version", "artifact_version", "config", "trials", "aggregates", "meta"}
    assert (tmp_path / "bbcjpw_seed7.png").stat().st_size > 0
    with open(tmp_path / "bbcjpw_seed7_trials.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 100


def test_innsbruck_rate(tmp_path):
    assert _run(tmp_path, "--protocol", "innsbruck", "--trials", "10000", "--seed", "1") == 0
    agg = _load(tmp_path / "innsbruck_seed1.json")["aggregates"]
    assert agg["exact_rate"] == 0.25
    assert abs(agg["success_rate"] - 0.25) < 3 * agg["sigma"]


def test_chain_exact_rate():
    params = resolve_params("innsbruck", {"chain": "3"})
    assert experiments.exact_rate("innsbruck", params) == 0.25**3


@pytest.mark.parametrize("protocol", sorted(PROTOCOLS))
def test_every_protocol_is_deterministic_and_verifies(tmp_path, protocol):
    extra = {"nogo": ["--param", "restarts=2"], "cv-grid": ["--param", "points=32", "--param", "box=6"]}
    args = ["--protocol", protocol, "--trials", "3", "--seed", "5", *extra.get(protocol, [])]
    assert _run(tmp_path / "a", *args) == 0
    assert _run(tmp_path / "b", *args) == 0
    stem = f"{protocol}_seed5"
    a, b = _load(tmp_path / "a" / f"{stem}.json"), _load(tmp_path / "b" / f"{stem}.json")
    a.pop("meta"), b.pop("meta")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    for ext in ("_trials.csv", ".png"):
        assert (tmp_path / "a" / f"{stem}{ext}").read_bytes() == (tmp_path / "b" / f"{stem}{ext}").read_bytes()
    assert verify_report(tmp_path / "a" / f"{stem}.json") == []


def test_trial_reproducible_in_isolation():
    params = resolve_params("crossed", {})
    records = run_trials("crossed", params, 5, 99)
    alone = PROTOCOLS["crossed"].trial(trial_rng(99, 3), params)
    assert records[3]["outcome"] == alone["outcome"]
    assert records[3]["fidelity"] == alone["fidelity"]


def test_tampered_report_fails_verification(tmp_path):
    _run(tmp_path, "--protocol", "swap", "--trials", "20", "--seed", "2")
    path = tmp_path / "swap_seed2.json"
    rep = _load(path)
    rep["aggregates"]["mean_fidelity"] = 0.5
    path.write_text(json.dumps(rep))
    assert verify_report(path)
    assert main(["verify-report", str(path)]) == 2


def test_unknown_parameter_rejected(tmp_path, capsys):
    assert _run(tmp_path, "--protocol", "bbcjpw", "--param", "colour=red") == 1
    assert "colour" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        ["--protocol", "teleportron"],
        ["--protocol", "cv-bk", "--param", "r=-1"],
        ["--protocol", "bbcjpw", "--trials", "0"],
        ["--protocol", "bbcjpw", "--param", "channel=Psi"],
        ["--protocol", "cv-grid", "--param", "points=100"],
        ["--protocol", "bbcjpw", "--param", "novalue"],
        [],
    ],
)
def test_config_errors_exit_one(tmp_path, args):
    assert _run(tmp_path, *args) == 1


def test_invariant_violation_exits_two(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(experiments, "FIDELITY_TOL", -1.0)
    assert _run(tmp_path, "--protocol", "bbcjpw", "--trials", "2") == 2
    assert "fidelity" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nprotocol = cv-bk\ntrials = 4\nseed = 3\nr = 0.5\n")
    assert main(["run", "--config", str(cfg), "--seed", "8", "--param", "r=1.5", "--out", str(tmp_path)]) == 0
    rep = _load(tmp_path / "cv-bk_seed8.json")
    assert rep["config"]["trials"] == 4 and rep["config"]["params"]["r"] == 1.5


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TELELAB_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--protocol", "swap", "--trials", "2"]) == 0
    assert (tmp_path / "env" / "swap_seed0.json").exists()


def test_parse_axis():
    assert parse_axis("r=0:1:0.25") == ("r", [0.0, 0.25, 0.5, 0.75, 1.0])
    assert parse_axis("state=gaussian,cat") == ("state", ["gaussian", "cat"])
    for bad in ("r=", "r", "r=1:0:0.1", "r=0:1:0"):
        with pytest.raises(ConfigError):
            parse_axis(bad)


def test_bk_sweep_is_monotone(tmp_path):
    args = ["sweep", "--protocol", "cv-bk", "--trials", "10", "--seed", "4", "--axis", "r=0:2:0.25", "--out", str(tmp_path)]
    assert main(args) == 0
    stem = tmp_path / "cv-bk_sweep_r_seed4"
    with open(f"{stem}.csv") as fh:
        rows = list(csv.DictReader(fh))
    f = np.array([float(r["mean_fidelity"]) for r in rows])
    assert len(rows) == 9 and np.all(np.diff(f) >= -1e-6)
    assert (tmp_path / "cv-bk_sweep_r_seed4.png").exists()
    assert verify_report(f"{stem}.json") == []


def test_nogo_sweep_respects_ceiling(tmp_path):
    args = ["sweep", "--protocol", "nogo", "--trials", "1", "--seed", "1", "--param", "restarts=2",
            "--param", "stats=bosonic", "--axis", "n_local=4:8:1", "--out", str(tmp_path)]
    assert main(args) == 0
    rep = _load(tmp_path / "nogo_sweep_n_local_seed1.json")
    assert [r["n_local"] for r in rep["rows"]] == [4, 5, 6, 7, 8]
    assert all(r["best_value"] <= 0.5 + 1e-6 for r in rep["rows"])


def test_single_point_sweep_equals_run(tmp_path):
    assert main(["sweep", "--protocol", "cv-bk", "--trials", "5", "--seed", "2", "--axis", "r=1.0",
                 "--out", str(tmp_path)]) == 0
    assert _run(tmp_path, "--protocol", "cv-bk", "--trials", "5", "--seed", "2", "--param", "r=1.0") == 0
    sweep = _load(tmp_path / "cv-bk_sweep_r_seed2.json")
    run = _load(tmp_path / "cv-bk_seed2.json")
    assert len(sweep["rows"]) == 1
    assert sweep["points"][0]["aggregates"] == run["aggregates"]


def test_sweep_rejects_foreign_axis(tmp_path):
    assert main(["sweep", "--protocol", "swap", "--axis", "r=0:1:0.5", "--out", str(tmp_path)]) == 1


def test_aggregates_recomputable_from_records():
    params = resolve_params("cavity", {})
    records = run_trials("cavity", params, 8, 3)
    decoded = json.loads(json.dumps(records))
    assert aggregate("cavity", params, decoded) == aggregate("cavity", params, records)
