import json

import pytest

from cli import main, parse_alpha_grid
from errors import DomainError

SCAN_HEADER = "alpha,E_plus,E_minus,E,ess_bottom"


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _error(err):
    return json.loads(err.strip().splitlines()[-1])


def test_classify(capsys):
    code, out, _ = _run(capsys, "classify", "--preset", "M3", "--alpha", "0.3")
    report = json.loads(out)
    assert code == 0
    assert report["schema_version"] == 1
    assert report["command"] == "classify"
    assert report["regime"] == "Case2b"
    assert report["alpha_cr"] == pytest.approx(0.5641895835477563, rel=1e-10)
    assert report["small_alpha_regime"] is True
    assert report["model_source"] == "preset:M3"


def test_classify_case_one(capsys):
    _, out, _ = _run(capsys, "classify", "--preset", "M1")
    report = json.loads(out)
    assert report["regime"] == "Case1"
    assert report["alpha_cr"] is None
    assert report["small_alpha_regime"] == "not-applicable"


def test_bottom(capsys):
    code, out, _ = _run(capsys, "bottom", "--preset", "M1", "--alpha", "1")
    report = json.loads(out)
    assert code == 0
    assert report["E"] == pytest.approx(-1.6420, abs=1e-3)
    assert report["roots"]["+"]["root"] == report["E"]
    assert report["roots"]["+"]["phi_derivative"] < -1
    assert report["essential_spectrum"]["attaining_sigma"] == 1


def test_bottom_subcritical(capsys):
    _, out, _ = _run(capsys, "bottom", "--preset", "M3", "--alpha", "0.3")
    report = json.loads(out)
    assert report["roots"]["-"]["root"] is None
    assert report["essential_spectrum"]["sector_bottoms"]["-"] == -1.0
    assert report["weak_coupling_margin"] > 0


def test_scan_csv(capsys):
    code, out, _ = _run(capsys, "scan", "--preset", "M3", "--alpha-grid", "0.1:2:5log")
    lines = out.split("\r\n")
    assert code == 0
    assert lines[0] == SCAN_HEADER
    assert len([line for line in lines if line]) == 6
    # no sigma = -1 zero below the critical coupling
    assert lines[1].split(",")[2] == ""


def test_scan_json_and_plot(capsys, tmp_path):
    figure = tmp_path / "scan.png"
    _, out, _ = _run(capsys, "scan", "--preset", "M1", "--alpha-grid", "0.5:2:4",
                     "--format", "json", "--plot", str(figure))
    report = json.loads(out)
    assert [row["alpha"] for row in report["table"]] == [0.5, 1.0, 1.5, 2.0]
    assert figure.stat().st_size > 0


def test_scan_is_deterministic(capsys, tmp_path):
    paths = [tmp_path / "first.csv", tmp_path / "second.csv"]
    for path in paths:
        assert main(["scan", "--preset", "MF", "--alpha-grid", "0.2:3:6log", "--out", str(path)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_bytes().startswith(SCAN_HEADER.encode() + b"\r\n")
    assert capsys.readouterr().out == ""


def test_asymptotics(capsys):
    _, out, _ = _run(capsys, "asymptotics", "--preset", "M1")
    lines = [line for line in out.split("\r\n") if line]
    assert lines[0] == "alpha,E_plus,ratio,target,discrepancy"
    assert len(lines) == 4
    assert float(lines[1].split(",")[-1]) < 1e-2


@pytest.mark.parametrize("preset", ["M1", "M3", "MF", "MR"])
@pytest.mark.parametrize("alpha", ["0.1", "1"])
@pytest.mark.parametrize("command", ["classify", "bottom", "eigs", "oracle", "oneboson"])
def test_commands_on_presets(capsys, preset, alpha, command):
    code, out, _ = _run(capsys, command, "--preset", preset, "--alpha", alpha,
                        "--oracle-panels", "2", "--oracle-order", "4")
    assert code == 0
    report = json.loads(out)
    assert report["command"] == command
    if command == "eigs":
        assert report["full_count_bound"]["holds"]
        assert report["total_count"] == sum(len(s["eigenvalues"]) for s in report["sectors"])
    if command == "oracle":
        assert all(row["agree"] for row in report["table"])


def test_eigs_single_sector(capsys):
    _, out, _ = _run(capsys, "eigs", "--preset", "M1", "--alpha", "3", "--sigma", "+",
                     "--oracle-panels", "2", "--oracle-order", "4")
    report = json.loads(out)
    assert [s["sigma"] for s in report["sectors"]] == ["+"]
    eigenvalues = report["sectors"][0]["eigenvalues"]
    assert eigenvalues == sorted(eigenvalues)
    assert all(e < report["sectors"][0]["sector_bottom"] for e in eigenvalues)


def test_fuzz(capsys):
    _, out, _ = _run(capsys, "fuzz", "--count", "2000", "--seed", "3")
    report = json.loads(out)
    assert report["passed"]
    assert report["count"] == 2000
    assert report["seed"] == 3


def test_model_file(capsys, tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({
        "name": "M3-copy", "dimension": 3, "epsilon": 1.0,
        "omega": {"kind": "abs"},
        "lambda": {"kind": "box", "support_radius": 1.0},
        "integrability": "case2-integrable",
    }))
    _, out, _ = _run(capsys, "classify", "--model", str(path), "--alpha", "0.3")
    report = json.loads(out)
    assert report["model"] == "M3-copy"
    assert report["regime"] == "Case2b"
    assert report["model_source"] == str(path)


def test_invalid_alpha_exits_with_validation_error(capsys):
    code, out, err = _run(capsys, "bottom", "--alpha", "0")
    assert code == 2
    assert out == ""
    error = _error(err)
    assert error["error"] == "DomainError"
    assert error["exit_code"] == 2


def test_invalid_model_file(capsys, tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"name": "broken", "colour": "red"}))
    code, _, err = _run(capsys, "classify", "--model", str(path))
    assert code == 2
    assert _error(err)["error"] == "ModelFileError"


def test_invalid_grid(capsys):
    code, _, err = _run(capsys, "scan", "--alpha-grid", "1:0.5:4")
    assert code == 2
    assert _error(err)["error"] == "DomainError"


@pytest.mark.parametrize("text, expected", [
    ("0.1:1:2", (0.1, 1.0)),
    ("1:3:3lin", (1.0, 2.0, 3.0)),
    ("0.01:1:3log", (0.01, 0.1, 1.0)),
    ("0.01:1:3:log", (0.01, 0.1, 1.0)),
])
def test_parse_alpha_grid(text, expected):
    assert parse_alpha_grid(text) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("text", ["1:2", "0:1:4", "1:2:1", "a:b:3", "0.1:1:4cubic"])
def test_parse_alpha_grid_rejects(text):
    with pytest.raises(DomainError):
        parse_alpha_grid(text)


@pytest.mark.parametrize("argv", [
    ["bottom", "--alpha", "abc"],
    ["nosuch"],
    ["classify", "--preset", "M7"],
    ["scan", "--unknown-flag"],
])
def test_usage_errors_are_single_json_lines(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code == 2
    assert out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1
    error = json.loads(lines[0])
    assert error["error"] == "DomainError"
    assert error["exit_code"] == 2


def test_tolerance_flags(capsys):
    _, out, _ = _run(capsys, "bottom", "--preset", "M3", "--alpha", "1",
                     "--rel-tol", "1e-8", "--tol", "1e-10", "--boundary-gap", "1e-10")
    loose = json.loads(out)
    _, out, _ = _run(capsys, "bottom", "--preset", "M3", "--alpha", "1")
    default = json.loads(out)
    assert loose["E"] == pytest.approx(default["E"], abs=1e-7)


@pytest.mark.parametrize("flag", ["--rel-tol", "--tol", "--boundary-gap"])
def test_tolerance_flags_must_be_positive(capsys, flag):
    code, _, err = _run(capsys, "bottom", flag, "0")
    assert code == 2
    assert _error(err)["error"] == "DomainError"
