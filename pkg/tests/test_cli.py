from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullcalc.cli import CliConfig, identity_suite, main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_check_identities_default_families():
    code, text = run("check-identities", "--trials", "20")
    assert code == 0
    assert text.strip().splitlines()[-1] == "14 identity families, 14 passed"


def test_identity_family_names():
    names = [r.name for r in identity_suite(42, 3, 1e-10)]
    assert len(names) == 14 and names == sorted(names)
    assert {"dual_alpha", "j222_cancellation", "epsilon_contraction"} <= set(names)


def test_impossible_tolerance_fails(capsys):
    code, _ = run("check-identities", "--trials", "3", "--tol", "1e-30")
    assert code == 1
    err = capsys.readouterr().err
    assert "first failing identity" in err and "seed 42" in err


def test_single_draw_is_deterministic():
    a = run("check-identities", "--trials", "1", "--seed", "7", "--json")
    b = run("check-identities", "--trials", "1", "--seed", "7", "--json")
    assert a == b and a[0] == 0
    doc = json.loads(a[1])
    assert doc["schema"] == "nullcalc/1" and doc["config"]["seed"] == 7


@pytest.mark.parametrize("argv", [
    ("check-identities", "--trials", "0"),
    ("check-identities", "--tol", "0"),
    ("check-identities", "--tol", "-1"),
    ("replay", "bogus"),
    ("frobnicate",),
    (),
])
def test_usage_errors(argv, capsys):
    assert run(*argv)[0] == 2
    assert "usage" in capsys.readouterr().err


def test_config_invariants():
    with pytest.raises(ValueError):
        CliConfig(trials=0)
    with pytest.raises(ValueError):
        CliConfig(tol=0.0)
    assert CliConfig().seed == 42


def test_classify_signature():
    code, text = run("classify", "nab4 alpha")
    assert code == 0
    assert "signature   3" in text and "scale       -5/2" in text


@pytest.mark.parametrize("norm", ["||.||_{L4sc(S)}", "L4sc(S)", "L4(S)"])
def test_classify_norm(norm):
    code, text = run("classify", "alpha", norm, "--json")
    doc = json.loads(text)
    assert code == 0 and doc["delta_exponent"] == "-1/4"


def test_classify_wildcard_lists_signatures():
    doc = json.loads(run("classify", "Psi", "--json")[1])
    assert doc["signature"] == ["0", "1/2", "1", "3/2", "2"]


def test_classify_parse_error(capsys):
    code, _ = run("classify", "qqq")
    assert code == 2
    err = capsys.readouterr().err
    assert "unknown component at offset 0" in err
    assert err.strip().splitlines()[-1].startswith("0:")


def test_list_and_check_equations():
    code, text = run("list-equations")
    assert code == 0 and len(text.strip().splitlines()) == 21
    assert all(line.rstrip().endswith("pass") for line in text.strip().splitlines())
    code, text = run("check-equations")
    assert code == 0 and "21/21 equations consistent" in text
    assert sum(line.startswith("CONFLICT") for line in text.splitlines()) == 2
    code, text = run("list-equations", "--equation", "NBE_L_beta", "--json")
    doc = json.loads(text)
    assert [e["id"] for e in doc["equations"]] == ["NBE_L_beta"]
    assert run("list-equations", "--equation", "NOPE")[0] == 2


def test_replay_commands():
    code, text = run("replay", "outgoing", "--scripted")
    assert code == 0
    assert any(line.split()[:3] == ["I_0", "bounded", "1/2"] for line in text.splitlines())
    code, text = run("replay", "incoming", "--scripted")
    assert code == 0
    assert any(line.split()[:2] == ["J_222", "cancels"] for line in text.splitlines())
    code, text = run("replay", "--auto", "--json")
    assert code == 0
    assert len(json.loads(text)["campaigns"]) == 4


def test_verify_cancellation():
    code, text = run("verify-cancellation", "--trials", "10")
    assert code == 0
    assert "exactly zero" in text and "J_222" in text
    doc = json.loads(run("verify-cancellation", "--trials", "10", "--json")[1])
    assert doc["j222"] == {"draws": 10, "all_zero": True, "max_abs": "0"}
    assert {c["status"] for c in doc["certificates"]} == {"vanishes", "cancels"}


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("NULLCALC_SEED", "9")
    doc = json.loads(run("verify-cancellation", "--trials", "2", "--json")[1])
    assert doc["config"]["seed"] == 9
    doc = json.loads(run("verify-cancellation", "--trials", "2", "--seed", "3", "--json")[1])
    assert doc["config"]["seed"] == 3
    monkeypatch.setenv("NULLCALC_SEED", "x")
    assert run("verify-cancellation", "--trials", "2")[0] == 2


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(1, 3))
def test_json_is_byte_identical(seed, trials):
    argv = ("check-identities", "--seed", str(seed), "--trials", str(trials), "--json")
    assert run(*argv) == run(*argv)


def test_replay_json_is_byte_identical():
    assert run("replay", "--json") == run("replay", "--json")
