"""End-to-end command line checks against the shipped config files."""

import json
from fractions import Fraction

from backscheme.cli import main

CONFIGS = "configs"


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_analyze_loss_config(capsys):
    code, out, err = run_cli(capsys, ["analyze", f"{CONFIGS}/example1.json"])
    assert code == 0
    assert err == ""
    report = json.loads(out)
    assert report["model"] == "loss"
    assert report["samples"] == ["w1", "w2"]
    assert report["limit"]["cardinal"] == 3
    assert report["limit"]["bijective"] is True
    assert report["extension"]["atom_weight"] == "1/6"
    assert report["queue_report"]["residual_workloads"]["w1"] == ["0", "2.5", "4.5"]
    assert report["index_scheme"]["all_surjective"] is True
    # Solutions solve the recursion; every value sits in the limit set.
    for selection in report["solutions"]:
        for label in ("w1", "w2"):
            assert selection[label] in report["limit"]["sets"][label]


def test_analyze_impatience_config(capsys):
    code, out, _ = run_cli(capsys, ["analyze", f"{CONFIGS}/example3.json"])
    assert code == 0
    report = json.loads(out)
    assert report["model"] == "impatience"
    assert "index_scheme" not in report
    bounds = report["queue_report"]["bounds"]
    assert bounds["best"] == min(
        bounds["window_peak"], bounds["window_service_sum"], bounds["peak_plus_tail"]
    )
    assert report["limit"]["cardinal"] <= bounds["best"]


def test_analyze_is_deterministic(capsys):
    _, first, _ = run_cli(capsys, ["analyze", f"{CONFIGS}/example4.json"])
    _, second, _ = run_cli(capsys, ["analyze", f"{CONFIGS}/example4.json"])
    assert first == second


def test_output_file_matches_stdout(tmp_path, capsys):
    target = tmp_path / "report.json"
    code, out, _ = run_cli(
        capsys, ["analyze", f"{CONFIGS}/example2.json", "--output", str(target)]
    )
    assert code == 0
    assert target.read_text(encoding="utf-8") == out


def test_table_format(capsys):
    code, out, _ = run_cli(
        capsys, ["validate", f"{CONFIGS}/example1.json", "--format", "table"]
    )
    assert code == 0
    assert out == "valid: true\nmodel: loss\n"


def test_loynes_subcommand(capsys):
    code, out, _ = run_cli(capsys, ["loynes", f"{CONFIGS}/example3.json"])
    assert code == 0
    report = json.loads(out)
    # The patience indicator breaks monotonicity; only the envelopes keep it.
    assert report["monotone"] == {
        "lower": True,
        "exact": False,
        "upper": True,
        "continuity": "vacuous on a finite lattice",
    }
    assert report["domination"]["lower_below_exact"] is True
    assert report["domination"]["exact_below_upper"] is True
    assert report["closed_form_matches"] is True
    assert report["singleton_lower"] == {"cardinal": 1, "matches_envelope": True}
    assert report["singleton_upper"] == {"cardinal": 1, "matches_envelope": True}


def test_bounds_subcommand(capsys):
    code, out, _ = run_cli(capsys, ["bounds", f"{CONFIGS}/example4.json"])
    assert code == 0
    report = json.loads(out)
    assert report["queue_report"]["bounds"]["best"] == 4
    assert "limit" not in report


def test_cftp_subcommand(capsys):
    code, out, _ = run_cli(
        capsys,
        ["cftp", f"{CONFIGS}/cftp_halfload.json", "--replications", "200", "--seed", "7"],
    )
    assert code == 0
    report = json.loads(out)
    assert report["replications"] == 200
    assert report["coupled"] == 200
    assert report["seed"] == 7
    assert report["stability_warning"] is False
    assert sum(Fraction(w) for w in report["distribution"].values()) == 1


def test_validate_each_config(capsys):
    for name, kind in (
        ("example1", "loss"),
        ("example2", "loss"),
        ("example3", "impatience"),
        ("example4", "impatience"),
        ("cftp_halfload", "cftp"),
    ):
        code, out, _ = run_cli(capsys, ["validate", f"{CONFIGS}/{name}.json"])
        assert code == 0
        assert json.loads(out) == {"valid": True, "model": kind}


def test_abstract_config(tmp_path, capsys):
    config = {
        "model": "abstract",
        "labels": ["a", "b"],
        "step": 1,
        "x_max": 2,
        "maps": {"a": [1, 2, 0], "b": [2, 0, 1]},
    }
    path = tmp_path / "abstract.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    code, out, _ = run_cli(capsys, ["analyze", str(path)])
    assert code == 0
    report = json.loads(out)
    assert report["model"] == "abstract"
    assert report["limit"]["cardinal"] == 3
    assert report["invariant_families"]["ergodic"] in (True, False)


def test_missing_file_is_a_config_error(capsys):
    code, out, err = run_cli(capsys, ["analyze", "configs/no_such_file.json"])
    assert code == 2
    payload = json.loads(out)
    assert payload["error"] == "config"
    assert err.startswith("error (config):")


def test_wrong_model_for_subcommand(capsys):
    code, out, _ = run_cli(capsys, ["analyze", f"{CONFIGS}/cftp_halfload.json"])
    assert code == 2
    assert json.loads(out)["error"] == "config"
    code, out, _ = run_cli(capsys, ["cftp", f"{CONFIGS}/example1.json"])
    assert code == 2
    code, out, _ = run_cli(capsys, ["loynes", f"{CONFIGS}/cftp_halfload.json"])
    assert code == 2


def test_model_error_exit_code(tmp_path, capsys):
    config = {
        "model": "loss",
        "samples": [
            {"label": "w1", "service": 1, "interarrival": 0},
        ],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    code, out, err = run_cli(capsys, ["analyze", str(path)])
    assert code == 3
    assert json.loads(out)["error"] == "model"
    assert err.startswith("error (model):")


def test_unstable_exit_code(tmp_path, capsys):
    code, out, err = run_cli(
        capsys, ["analyze", f"{CONFIGS}/example1.json", "--max-sweeps", "1"]
    )
    assert code == 4
    payload = json.loads(out)
    assert payload["error"] == "not-stabilized"
    assert "max_sweeps" in payload["reason"]
    assert err.startswith("error (not-stabilized):")
