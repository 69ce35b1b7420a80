import csv
import io
import json
import subprocess
import sys
import warnings
from importlib import resources

import jsonschema
import pytest

from dixiecup import acceptance, cli
from dixiecup.errors import QuadratureNonConvergence


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("dixiecup").joinpath("report_schema.json").read_text())


def call(*argv):
    buf = io.StringIO()
    code = cli.run(list(argv), stdout=buf)
    return code, buf.getvalue()


def call_json(schema, *argv):
    code, out = call(*argv, "--json")
    env = json.loads(out)
    jsonschema.validate(env, schema)
    return code, env


def test_moments_two_equal_coupons(schema):
    code, env = call_json(schema, "moments", "--n", "2", "--m", "1", "--uniform")
    assert code == 0
    assert env["results"]["mean"] == pytest.approx(3.0, rel=1e-12)
    assert env["results"]["var_T"] == pytest.approx(2.0, rel=1e-12)
    assert list(env) == ["command", "parameters", "results", "tool_version", "elapsed_ms"]


def test_moments_explicit_probabilities(schema):
    code, env = call_json(schema, "moments", "--p", "0.5,0.3,0.2", "--m", "2")
    assert code == 0
    assert env["results"]["mean"] == pytest.approx(11.980495930515064, rel=1e-10)


def test_centering_exponential(schema):
    code, env = call_json(schema, "centering", "--count", "100", "--m", "1")
    pair = env["results"]["centering"]
    assert code == 0
    assert pair["b"] == pytest.approx(4.6051701860, abs=1e-9)
    assert pair["a"] == pytest.approx(1.0, abs=1e-12)
    assert env["results"]["right_tail_holds"] is True


def test_hessian_two_coupons(schema):
    code, env = call_json(schema, "hessian", "--m", "1", "--bign", "2")
    assert code == 0
    assert env["results"]["C"] == pytest.approx(80.0, rel=1e-3)


@pytest.mark.parametrize(
    "argv",
    [
        ("gumbel", "--n", "1000", "--m", "2", "--points", "9"),
        ("radial", "--direction", "1,-1,0", "--m", "1", "--steps", "4"),
        ("case2", "--n", "1000", "--alpha", "1", "--m", "2"),
        ("simulate", "--n", "3", "--m", "1", "--trials", "2000"),
        ("simulate", "--p", "0.6,0.4", "--mode", "active-clock", "--trials", "2000"),
        ("simulate", "--n", "3", "--mode", "poissonized", "--trials", "2000"),
        ("case1", "--m", "1", "--bign-list", "20,40"),
        ("verify-all", "--quick", "--only", "2"),
    ],
)
def test_envelopes_validate(schema, argv):
    code, env = call_json(schema, *argv)
    assert code == 0
    assert env["command"] == argv[0]


def test_json_is_reproducible():
    argv = ("simulate", "--p", "0.5,0.3,0.2", "--m", "2", "--trials", "3000", "--seed", "7", "--json")
    outs = []
    for threads in ("1", "2"):
        _, out = call(*argv, "--threads", threads)
        env = json.loads(out)
        env.pop("elapsed_ms")
        env["parameters"].pop("threads")
        outs.append(json.dumps(env))
    assert outs[0] == outs[1]
    _, a = call("gumbel", "--n", "500", "--m", "3", "--json")
    _, b = call("gumbel", "--n", "500", "--m", "3", "--json")
    strip = lambda s: "\n".join(l for l in s.splitlines() if '"elapsed_ms"' not in l)
    assert strip(a) == strip(b)


@pytest.mark.parametrize(
    "argv, header",
    [
        (("gumbel", "--n", "100", "--points", "5"), ["x", "exact_cdf", "gumbel_cdf", "abs_diff"]),
        (("radial", "--p", "0.4,0.35,0.25", "--steps", "4"), ["theta", "var_T", "abs_err"]),
        (
            ("case2", "--n", "500", "--alpha", "0.5"),
            ["x", "M", "limit", "relative_deviation", "atomless", "exact_cdf", "gumbel_cdf"],
        ),
    ],
)
def test_csv_output(argv, header):
    code, out = call(*argv, "--csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == header
    assert len(rows) > 2 and all(len(r) == len(header) for r in rows)


def test_text_output():
    code, out = call("moments", "--n", "2")
    assert code == 0
    assert "results.mean = 3.0" in out.splitlines()


@pytest.mark.parametrize(
    "argv",
    [
        ("moments", "--p", "0.5,0.4"),
        ("moments", "--p", "0.5,-0.1,0.6"),
        ("moments", "--n", "3", "--p", "0.5,0.5"),
        ("moments", "--n", "3", "--m", "0"),
        ("moments", "--uniform"),
        ("centering", "--count", "1"),
        ("centering", "--count", "0.5"),
        ("radial", "--direction", "1,-1", "--theta-max", "0.8"),
        ("simulate", "--n", "2", "--trials", "0"),
        ("case2", "--n", "100", "--alpha", "-1"),
        ("verify-all", "--only", "13"),
        ("moments", "--n", "3", "--bogus"),
        ("gumbel", "--n", "100", "--x", "a,b"),
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    code, out = call(*argv)
    assert code == 2
    assert out == ""


def test_numeric_failure_exit_3(monkeypatch, schema):
    def noisy(args):
        warnings.warn("interval did not converge", QuadratureNonConvergence)
        return {}, {"value": 1.0}, None, 0

    monkeypatch.setitem(cli.COMMANDS, "moments", noisy)
    code, out = call("moments", "--n", "2", "--json")
    assert code == 3
    env = json.loads(out)
    assert env["results"]["diagnostics"]["warnings"] == ["interval did not converge"]


def test_truncation_failure_exit_3():
    code, out = call("case1", "--bign-list", "", "--truncation-j", "3", "--json")
    assert code == 3
    assert "error" in json.loads(out)["results"]


def test_failed_gate_exit_1(monkeypatch, schema):
    def fake(number, *, quick, seed, workers):
        return acceptance.GateResult(number, "stub", number != 2, {"runtime_s": 0.0}, 0.0)

    monkeypatch.setattr(acceptance, "run_gate", fake)
    code, env = call_json(schema, "verify-all", "--only", "1,2")
    assert code == 1
    assert [g["passed"] for g in env["results"]["gates"]] == [True, False]
    assert env["results"]["passed"] is False


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dixiecup", "moments", "--n", "2", "--json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["var_T"] == pytest.approx(2.0)
    proc = subprocess.run([sys.executable, "-m", "dixiecup", "centering", "--count", "1"], capture_output=True)
    assert proc.returncode == 2
