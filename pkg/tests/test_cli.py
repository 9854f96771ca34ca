import json

import pytest

from aoi_offload.cli import main


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_mec_only_is_exact(capsys):
    code, out, _ = run(capsys, ["eval", "--family", "mec_only"])
    assert code == 0
    point = json.loads(out)
    assert point["delta"] == 1.5
    assert point["p_bar"] == 1.0
    assert point["method"] == "closed_form"


def test_eval_service_threshold_via_chain(capsys):
    code, out, _ = run(capsys, ["eval", "--family", "service_threshold",
                                "--mu", "0.5", "--zstar", "1", "--method", "chain"])
    assert code == 0
    point = json.loads(out)
    assert point["p_bar"] == pytest.approx(1.0 / 3.0, rel=1e-9)
    assert point["delta"] == pytest.approx(11.0 / 6.0, rel=1e-9)


def test_eval_local_only_slow_server(capsys):
    code, out, _ = run(capsys, ["eval", "--family", "local_only", "--mu", "0.01"])
    assert code == 0
    point = json.loads(out)
    assert point["delta"] == 199.5
    assert point["p_bar"] == 0.0


def test_eval_optimal_reports_lambda_as_param(capsys):
    code, out, _ = run(capsys, ["eval", "--family", "optimal", "--mu", "0.5",
                                "--lambda", "3", "--amax", "50"])
    assert code == 0
    point = json.loads(out)
    assert point["param"] == 3.0
    assert point["method"] == "rvi"
    assert point["delta"] + 3.0 * point["p_bar"] == pytest.approx(2.7352941176, abs=1e-6)


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--family", "service_threshold", "--mu", "0.5"],  # missing zstar
        ["eval", "--family", "nonsense"],
        ["eval", "--family", "age_threshold", "--method", "closed_form", "--astar", "3"],
        ["eval", "--family", "age_threshold", "--astar", "90", "--amax", "50"],
        ["eval", "--family", "local_only", "--mu", "0"],
        ["frontier", "--lambda-min", "-2", "--out", "x.csv"],
        ["nope"],
    ],
)
def test_invalid_flags_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


def test_frontier_small_grid(tmp_path, capsys):
    out = tmp_path / "points.csv"
    code, _, _ = run(capsys, [
        "frontier", "--mu", "0.5", "--amax", "50",
        "--astar-range", "1", "4", "--zstar-range", "0", "3",
        "--lambda-min", "0.1", "--lambda-max", "10", "--lambda-count", "4",
        "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "family,param,mu,p_bar,delta,method"
    assert len(lines) == 1 + 4 + 4 + 4 + 2
    families = [ln.split(",")[0] for ln in lines[1:]]
    assert families == sorted(families)
    for ln in lines[1:]:
        fields = ln.split(",")
        assert len(fields) == 6
        assert 0.0 <= float(fields[3]) <= 1.0
        assert float(fields[4]) >= 1.5


def test_frontier_json_format(tmp_path, capsys):
    out = tmp_path / "points.json"
    code, _, _ = run(capsys, [
        "frontier", "--mu", "0.5", "--amax", "50",
        "--astar-range", "1", "2", "--zstar-range", "0", "1",
        "--lambda-min", "0.1", "--lambda-max", "1", "--lambda-count", "2",
        "--format", "json", "--out", str(out),
    ])
    assert code == 0
    points = json.loads(out.read_text())
    assert len(points) == 2 + 2 + 2 + 2
    assert {p["family"] for p in points} == {
        "local_only", "mec_only", "age_threshold", "service_threshold", "optimal"}


def test_frontier_unwritable_path_exits_3(capsys):
    code, _, err = run(capsys, [
        "frontier", "--mu", "0.5", "--amax", "50",
        "--astar-range", "1", "1", "--zstar-range", "0", "0",
        "--lambda-min", "0.1", "--lambda-max", "1", "--lambda-count", "1",
        "--out", "/nonexistent-dir/points.csv",
    ])
    assert code == 3
    assert "cannot write" in err


def test_verify_passes_on_reference_instance(capsys):
    code, out, _ = run(capsys, ["verify", "--mu", "0.5", "--lambda", "3",
                                "--beta", "0.99", "--amax", "50",
                                "--horizon", "200000"])
    report = json.loads(out)
    assert code == 0
    assert report["passed"] is True
    assert "1" in report["thresholds"] and "2" in report["thresholds"]
    assert report["structure"]["passed"] is True


def test_verify_perfect_local_server(capsys):
    code, out, _ = run(capsys, ["verify", "--mu", "1.0", "--lambda", "5",
                                "--amax", "30", "--horizon", "100000"])
    report = json.loads(out)
    assert code == 0
    assert report["g"] == pytest.approx(1.5, abs=1e-9)


def test_verify_detects_injected_corruption(capsys):
    code, out, _ = run(capsys, ["verify", "--mu", "0.5", "--lambda", "3",
                                "--amax", "30", "--horizon", "100000",
                                "--inject-corruption"])
    report = json.loads(out)
    assert code == 1
    assert report["passed"] is False
    assert any(not c["passed"] for c in report["structure"]["checks"])


def test_rvi_command_reports_gain(capsys):
    code, out, _ = run(capsys, ["rvi", "--mu", "0.5", "--lambda", "3", "--amax", "50"])
    assert code == 0
    payload = json.loads(out)
    assert payload["g"] == pytest.approx(93.0 / 34.0, abs=1e-8)
    assert payload["converged"] is True
    assert payload["threshold_exact"] is True


def test_simulate_command_roundtrip(tmp_path, capsys):
    out = tmp_path / "sim.json"
    argv = ["simulate", "--family", "service_threshold", "--zstar", "1",
            "--mu", "0.5", "--horizon", "100000", "--seed", "7", "--out", str(out)]
    code, _, _ = run(capsys, argv)
    assert code == 0
    first = out.read_bytes()
    payload = json.loads(first)
    assert payload["slots"] == 99000 // 20 * 20
    code, _, _ = run(capsys, argv)
    assert out.read_bytes() == first


def test_config_file_defaults_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mu": 0.25, "lambda": 2.0}))
    code, out, _ = run(capsys, ["eval", "--family", "local_only", "--config", str(cfg)])
    assert code == 0
    assert json.loads(out)["delta"] == (4 - 0.25) / (2 * 0.25)
    code, out, _ = run(capsys, ["eval", "--family", "local_only", "--config", str(cfg),
                                "--mu", "0.5"])
    assert json.loads(out)["delta"] == 3.5


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit) as err:
        main(["eval", "--family", "mec_only", "--config", str(cfg)])
    assert err.value.code == 2
