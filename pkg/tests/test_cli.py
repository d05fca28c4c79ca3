import json
import math
import os
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

import cli_cases
from cpnflow.cli import CommandResult, ValidationError, dispatch, emit
from cpnflow.flow import CSV_HEADER

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
RTOL, ATOL = 1e-9, 1e-12
# columns of a singular basis are fixed only up to sign
SIGNED_COLUMNS = {"adapted_basis", "adapted_target_basis"}


def _schema(name):
    return json.loads(resources.files("cpnflow").joinpath("schemas", name).read_text())


def _fix_signs(M):
    M = np.array(M, dtype=float)
    piv = M[np.argmax(np.abs(M), axis=0), np.arange(M.shape[1])]
    return M * np.sign(piv)


def assert_close(got, want, path="$"):
    if isinstance(want, dict):
        assert isinstance(got, dict) and set(got) == set(want), f"{path}: keys differ"
        for k in want:
            a, b = got[k], want[k]
            if k in SIGNED_COLUMNS:
                a, b = _fix_signs(a).tolist(), _fix_signs(b).tolist()
            assert_close(a, b, f"{path}.{k}")
    elif isinstance(want, list):
        assert isinstance(got, list) and len(got) == len(want), f"{path}: length differs"
        for i, (a, b) in enumerate(zip(got, want)):
            assert_close(a, b, f"{path}[{i}]")
    elif isinstance(want, bool) or want is None or isinstance(want, str):
        assert got == want, f"{path}: {got!r} != {want!r}"
    else:
        assert math.isclose(got, want, rel_tol=RTOL, abs_tol=ATOL), f"{path}: {got!r} != {want!r}"


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    return cli_cases.write_config(str(tmp_path_factory.mktemp("cfg")))


@pytest.mark.parametrize("name", sorted(cli_cases.CASES))
def test_golden(name, config_path):
    code, text = cli_cases.invoke(cli_cases.CASES[name], config_path)
    assert code == 0
    got = json.loads(text)
    jsonschema.validate(got, _schema("command_result.schema.json"))
    with open(os.path.join(GOLDEN, name + ".json")) as fh:
        want = json.load(fh)
    assert_close(got, want)


def test_every_subcommand_has_a_golden():
    heads = {" ".join(a for a in argv[:2] if not a.startswith("-")) for argv in cli_cases.CASES.values()}
    for cmd in ("svd", "qform eval", "qform blocks", "qform delta", "lambda0", "pinch star-omega",
                "pinch curvature-sum", "pinch eps", "pinch lambda-from-eps", "pinch lambda1",
                "pinch log-comparison", "flow run", "ode"):
        assert any(h.startswith(cmd) for h in heads), cmd


def test_named_examples(config_path):
    out = json.loads(cli_cases.invoke(cli_cases.CASES["pinch_star_omega"])[1])
    assert out["outputs"]["star_omega"] == 0.25
    out = json.loads(cli_cases.invoke(cli_cases.CASES["lambda0_n2"])[1])
    assert abs(out["outputs"]["lambda0"] - 2.0395) < 1e-3
    out = json.loads(cli_cases.invoke(cli_cases.CASES["lambda0_n1"])[1])
    assert out["outputs"]["lambda0"] == "exceeds cap"
    jsonschema.validate(out["outputs"], _schema("lambda0_result.schema.json"))
    jsonschema.validate(json.loads(cli_cases.invoke(cli_cases.CASES["lambda0_n2"])[1])["outputs"],
                        _schema("lambda0_result.schema.json"))


@pytest.mark.parametrize("name", ["svd_random", "qform_delta", "ode", "flow_run", "lambda0_n2"])
def test_byte_identical(name, config_path):
    a = cli_cases.invoke(cli_cases.CASES[name], config_path)
    b = cli_cases.invoke(cli_cases.CASES[name], config_path)
    assert a == b and a[0] == 0


def test_global_options_either_side(tmp_path):
    argv = ["pinch", "eps", "--dim", "2", "--Lambda", "4"]
    _, before = cli_cases.invoke(["--seed", "0"] + argv)
    _, after = cli_cases.invoke(argv + ["--seed", "0"])
    assert before == after
    out = tmp_path / "x.json"
    assert cli_cases.invoke(argv + ["-o", str(out)]) == (0, "")
    assert json.loads(out.read_text())["outputs"]["eps"] == pytest.approx(0.09)


def test_seed_changes_random_matrix():
    a = json.loads(cli_cases.invoke(["svd", "--random", "2", "--seed", "1"])[1])
    b = json.loads(cli_cases.invoke(["svd", "--random", "2", "--seed", "2"])[1])
    assert a["outputs"]["matrix"] != b["outputs"]["matrix"]


def test_svd_matrix_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps([[2.0, 0.0], [0.0, 0.5]]))
    out = json.loads(cli_cases.invoke(["svd", "--matrix", str(p)])[1])
    assert out["outputs"]["singular_values"] == pytest.approx([2.0, 0.5])
    p.write_text(json.dumps([[2.0, 0.0], [0.0, 2.0]]))
    assert cli_cases.invoke(["svd", "--matrix", str(p)])[0] == 2


def test_csv_outputs(config_path):
    code, text = cli_cases.invoke(cli_cases.CASES["flow_run"] + ["--format", "csv"], config_path)
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 6
    code, text = cli_cases.invoke(cli_cases.CASES["ode"] + ["--format", "csv"])
    assert code == 0 and text.splitlines()[0] == "t,y,dydt"
    assert len(text.splitlines()) == 12


@pytest.mark.parametrize(
    "argv,code",
    [
        (["frobnicate"], 2),
        ([], 2),
        (["pinch", "star-omega", "--lambda", "1,1", "--format", "csv"], 2),
        (["pinch", "lambda1", "--dim", "1", "--lambda0", "2"], 2),
        (["pinch", "eps", "--dim", "2", "--Lambda", "0.5"], 2),
        (["pinch", "star-omega", "--lambda", "2,2"], 2),
        (["qform", "delta", "--dim", "2", "--Lambda", "0.5"], 2),
        (["ode", "--delta", "0.1", "--C0", "0.1", "--eps", "0.2", "--y0", "1"], 2),
        (["flow", "run", "--config", "/nonexistent.json"], 2),
        (["lambda0", "--dim", "2", "--tol", "-1"], 2),
    ],
)
def test_exit_codes(argv, code):
    assert cli_cases.invoke(argv)[0] == code


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import cpnflow.flow.kernel as fk

    monkeypatch.setattr(fk, "get_advance", lambda name="auto": (lambda *a: (fk.NONFINITE, 0)))
    p = cli_cases.write_config(str(tmp_path))
    assert cli_cases.invoke(["flow", "run", "--config", p])[0] == 3


def test_bad_output_path():
    assert cli_cases.invoke(["pinch", "eps", "--dim", "1", "--Lambda", "4", "-o", "/nonexistent/dir/x"])[0] == 2


def test_timing_flag():
    out = json.loads(cli_cases.invoke(["pinch", "eps", "--dim", "1", "--Lambda", "4", "--timing"])[1])
    assert out["elapsed_seconds"] > 0


def test_emit_contract(capsys):
    r = CommandResult("x", {}, {"v": float("inf")})
    emit(r)
    assert json.loads(capsys.readouterr().out)["outputs"]["v"] == "inf"
    with pytest.raises(ValidationError):
        emit(r, "csv")
    with pytest.raises(ValidationError):
        emit(r, "xml")
    assert dispatch(["pinch", "eps", "--dim", "1", "--Lambda", "4"])[1] == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cpnflow", "pinch", "star-omega", "--lambda", "1,1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["outputs"]["star_omega"] == 0.5
