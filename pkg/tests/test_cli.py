import csv
import io
import json
import math
import os
from pathlib import Path

import pytest

from morreykit import cli

GOLDEN = Path(__file__).parent / "golden"
CASES = json.loads((GOLDEN / "cases.json").read_text())
REGEN = os.environ.get("MORREYKIT_REGEN_GOLDEN") == "1"


def run(args, tmp_path, cwd=GOLDEN):
    out = tmp_path / "out.txt"
    old = os.getcwd()
    os.chdir(cwd)
    try:
        code = cli.main(list(args) + ["--out", str(out)])
    finally:
        os.chdir(old)
    return code, (out.read_text() if out.exists() else None)


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


SQUARE = {"n": 2, "lower": [0, 0], "upper": [1, 1]}


# --- golden files ------------------------------------------------------------------

@pytest.mark.parametrize("case", CASES, ids=[c["name"] for c in CASES])
def test_golden_output(case, tmp_path):
    code, text = run(case["args"], tmp_path)
    assert code == case["exit"]
    ref = GOLDEN / f"{case['name']}.out"
    if REGEN:
        ref.write_text(text)
    assert text == ref.read_text()


@pytest.mark.parametrize("case", CASES, ids=[c["name"] for c in CASES])
def test_rerun_is_byte_identical(case, tmp_path):
    a = run(case["args"], tmp_path)
    b = run(case["args"], tmp_path)
    assert a == b


def test_golden_modulus_matches_closed_form():
    rows = list(csv.DictReader(io.StringIO((GOLDEN / "modulus_p4.out").read_text())))
    for r in rows:
        s = float(r["s"])
        assert float(r["mu"]) == pytest.approx(4 * 4 ** 0.25 * math.sqrt(s), rel=1e-12)


def test_golden_log_type_errors_small():
    rows = list(csv.DictReader(io.StringIO((GOLDEN / "modulus_log_type.out").read_text())))
    assert rows and all(float(r["err"]) < 1e-8 for r in rows)
    mu = [float(r["mu"]) for r in rows]
    assert mu == sorted(mu)


def test_golden_conjugate_values():
    rows = list(csv.DictReader(io.StringIO((GOLDEN / "conjugate_p4.out").read_text())))
    by_t = {float(r["t"]): r for r in rows[:3]}
    assert float(by_t[2]["A"]) == 4 and float(by_t[2]["a"]) == 8
    assert float(by_t[8]["conj_A"]) == pytest.approx(12, rel=1e-15)
    assert all(float(by_t[0][k]) == 0 for k in ("A", "a", "conj_A", "conj_a"))
    assert all(r["sobolev_inv"] == "n/a (P3 fails)" for r in rows)


def test_golden_norm_values():
    d = json.loads((GOLDEN / "norm_p4_x1.out").read_text())
    assert list(d) == ["norm_u", "norm_grad_u", "norm_W1A"]
    assert d["norm_grad_u"] == pytest.approx(4 ** -0.25, rel=1e-9)
    assert d["norm_W1A"] == pytest.approx(d["norm_u"] + 4 ** -0.25, rel=1e-9)


def test_golden_check_report():
    d = json.loads((GOLDEN / "check_double_phase.out").read_text())
    status = {r["condition"]: r["passed"] for r in d["reports"]}
    assert status["Delta2"] and status["P5"] and status["P5-tilde"]
    assert status["P3"] is False and status["P5-star"] is False


# --- commands ------------------------------------------------------------------------

def test_check_example_one(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": "4 + 0.5*sin(x1)"},
                                  "samples": 500})
    code, text = run(["check", "--config", cfg], tmp_path)
    assert code == 1
    status = {r["condition"]: r["passed"] for r in json.loads(text)["reports"]}
    assert status["Delta2"] and status["P5"] and status["P5-tilde"]
    assert not status["P3"]


def test_check_subset_passes(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "double-phase", "p": 3, "q": 4,
                                             "alpha": "1 + x1^2"},
                                  "checks": ["Delta2", "P5", "P5-tilde"]})
    code, text = run(["check", "--config", cfg], tmp_path)
    assert code == 0
    assert [r["condition"] for r in json.loads(text)["reports"]] == ["Delta2", "P5", "P5-tilde"]


def test_malformed_expression_is_a_usage_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": "4+*sin(x1)"}})
    code, text = run(["check", "--config", cfg], tmp_path)
    assert code == 2 and text is None
    err = capsys.readouterr().err
    assert "byte 2" in err


def test_config_errors(tmp_path, capsys):
    bad = [
        {"domain": SQUARE},
        {"domain": {"n": 2, "lower": [0, 0, 0], "upper": [1, 1]},
         "family": {"tag": "variable-exponent", "p": 4}},
        {"domain": SQUARE, "family": {"tag": "variable-exponent", "p": 1.5}},
        {"domain": SQUARE, "family": {"tag": "variable-exponent", "p": 4}, "tol": -1},
        {"domain": SQUARE, "family": {"tag": "double-phase", "p": 3, "q": 4}},
        {"domain": SQUARE, "family": {"tag": "variable-exponent", "p": 4}, "typo": 1},
    ]
    for i, cfg in enumerate(bad):
        code, _ = run(["modulus", "--config", write_config(tmp_path, cfg, f"b{i}.json")],
                      tmp_path)
        assert code == 2, cfg
    (tmp_path / "broken.json").write_text("{not json")
    assert run(["modulus", "--config", str(tmp_path / "broken.json")], tmp_path)[0] == 2
    assert run(["modulus", "--config", str(tmp_path / "missing.json")], tmp_path)[0] == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["modulus"]) == 2


def test_empty_s_grid(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4}})
    code, text = run(["modulus", "--config", cfg], tmp_path)
    assert code == 0 and text == "x1,x2,s,mu,err\n"


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4},
                                  "s": [1.0]})
    code, text = run(["modulus", "--config", cfg, "--s", "0.5"], tmp_path)
    assert code == 0
    assert text.splitlines()[1].split(",")[3] == "4"


def test_norm_constant(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4}})
    code, text = run(["norm", "--config", cfg, "--u", "1", "--resolution", "8"], tmp_path)
    d = json.loads(text)
    assert code == 0
    assert d["norm_u"] == pytest.approx(4 ** -0.25, rel=1e-9)
    assert d["norm_grad_u"] == 0.0


def test_norm_singularity_reports_cell(tmp_path, capsys):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4}})
    code, _ = run(["norm", "--config", cfg, "--u", "log(x1 - 0.5)", "--resolution", "8"],
                  tmp_path)
    assert code == 2
    assert "cell (0, 0)" in capsys.readouterr().err


def test_norm_needs_u(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4}})
    assert run(["norm", "--config", cfg], tmp_path)[0] == 2


def test_verify_constant_and_seed(tmp_path):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "log-type", "p": "3 + 0.5*cos(x2)"}})
    code, text = run(["verify", "--config", cfg, "--u", "5", "--resolution", "64",
                      "--pairs", "500"], tmp_path)
    assert code == 0 and json.loads(text)["max_ratio"] == 0.0
    a = run(["verify", "--config", cfg, "--u", "x1*x2", "--resolution", "64", "--seed", "3"],
            tmp_path)
    b = run(["verify", "--config", cfg, "--u", "x1*x2", "--resolution", "64", "--seed", "3"],
            tmp_path)
    assert a == b and json.loads(a[1])["seed"] == 3


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    from morreykit.errors import ConvergenceError

    def boom(cfg):
        raise ConvergenceError("no bracket")
    monkeypatch.setitem(cli.COMMANDS, "modulus", boom)
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4}})
    assert run(["modulus", "--config", cfg], tmp_path)[0] == 3


def test_stdout_when_no_out(tmp_path, capsys):
    cfg = write_config(tmp_path, {"domain": SQUARE,
                                  "family": {"tag": "variable-exponent", "p": 4},
                                  "s": [0.5]})
    assert cli.main(["modulus", "--config", cfg]) == 0
    assert capsys.readouterr().out.startswith("x1,x2,s,mu,err\n0.5,0.5,0.5,4,")


def test_schema_is_valid_json_schema():
    import jsonschema
    jsonschema.Draft202012Validator.check_schema(cli.load_schema())
