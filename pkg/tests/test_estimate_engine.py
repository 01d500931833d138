from __future__ import annotations

import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullcalc import estimate_engine as ee
from nullcalc.estimate_engine import (
    CAMPAIGNS,
    REFINED,
    Bound,
    EngineError,
    Move,
    Piece,
    Placement,
    PlacementError,
    anomaly_count,
    bound_term,
    campaign,
    enumerate_integrands,
    evaluate_moves,
    minimal_widening,
    partition_by_anomalies,
    placement_bound,
    replay,
    replay_all,
    vanishing_certificate,
)
from nullcalc.schematic_dsl import Factor, SchematicTerm, parse_term
from nullcalc.sig_scale import INF, HalfInt, NormSpec, anomaly_class

OUT, INC = CAMPAIGNS["outgoing"], CAMPAIGNS["incoming"]
N4A, N3AB = CAMPAIGNS["nab4_alpha"], CAMPAIGNS["nab3_alphab"]


def _exp(src, c, *norms, **kw):
    pl = Placement(src, norms, kw.pop("domain", c.domain), **kw)
    return bound_term(parse_term(src), c, (Move("holder_placement", placement=pl),)).delta_exponent


# ---------------------------------------------------------------- bounds


def test_bound_leading_and_correction():
    b = Bound((Piece(F(-1, 2), "c"), Piece(F(1, 4))))
    assert b.leading == F(-1, 2) and b.correction == F(1, 4)
    assert b.delta_exponent == F(-1, 2)
    b = Bound((Piece(0, "c", F(3, 2)), Piece(F(1, 8))))
    assert b.delta_exponent == F(1, 8) and b.factor_tag == "R^{3/2}"
    assert Bound().delta_exponent is None
    with pytest.raises(ValueError):
        Piece(0, "x")


def test_campaign_lookup():
    assert campaign("outgoing") is OUT
    with pytest.raises(EngineError):
        campaign("sideways")
    assert OUT.nu_derivs == ("D4", "Dc")
    assert INC.nu_derivs == ("D3", "Dc")


# ---------------------------------------------------------------- enumeration


def test_vanishing_enumerations():
    assert enumerate_integrands(OUT, "I", 3) == []
    assert enumerate_integrands(OUT, "K", 2) == []
    assert enumerate_integrands(N4A, "I", 3) == []
    assert enumerate_integrands(INC, "I", 3) == []


def test_nab4_alpha_I_contains_alpha_shapes():
    terms = {t.to_ascii() for t in enumerate_integrands(N4A, "I")}
    assert "alpha(D4 R) * alpha * rho" in terms
    assert "alpha(D4 R) * alpha * sigma" in terms
    assert max(partition_by_anomalies(N4A, "I")) == 2


def test_partition_is_exact_split():
    for c in CAMPAIGNS.values():
        for fam in ee.FAMILIES:
            parts = partition_by_anomalies(c, fam)
            assert sum(map(len, parts.values())) == len(enumerate_integrands(c, fam))
            for k, ts in parts.items():
                assert all(anomaly_count(t) == k for t in ts)


def test_exhaustion_is_sharp():
    # The signature constraint does the work: widening the range repopulates the class.
    assert minimal_widening(OUT, "I", 3) == HalfInt.of(2)
    assert minimal_widening(OUT, "K", 2) == HalfInt.of(1)
    assert minimal_widening(INC, "I", 3) == HalfInt.of(1)
    assert enumerate_integrands(OUT, "I", 3, widen=HalfInt.of(2))
    assert enumerate_integrands(OUT, "K", 2, widen=HalfInt.of(1))
    assert minimal_widening(OUT, "I", 1) == HalfInt.of(0)


def test_unknown_family():
    with pytest.raises(EngineError):
        enumerate_integrands(OUT, "Z")


# ---------------------------------------------------------------- certificates


@pytest.mark.parametrize("cid,label,status", [
    ("outgoing", "J_2", "vanishes"), ("incoming", "K_2", "vanishes"),
    ("outgoing", "I_3", "vanishes"), ("outgoing", "K_2", "vanishes"),
    ("outgoing", "I_21", "vanishes"), ("nab4_alpha", "I_3", "vanishes"),
    ("incoming", "I_3", "vanishes"), ("incoming", "J_222", "cancels"),
])
def test_certificates_recheck(cid, label, status):
    r = vanishing_certificate(CAMPAIGNS[cid], label)
    assert r.status == status
    assert r.certificate.recheck() and r.recheck()
    assert r.certificate.steps


def test_certificate_reason_chains():
    j2 = vanishing_certificate(OUT, "J_2").certificate
    assert j2.reason == "structural"
    assert [s.check for s in j2.steps][:2] == ["dl_zero_column", "signature_exceeds"]
    k2 = vanishing_certificate(INC, "K_2").certificate
    assert "closed_form_no_pair" in [s.check for s in k2.steps]
    assert vanishing_certificate(INC, "J_222").certificate.reason == "cancellation"
    json.dumps(j2.to_dict())


def test_certificate_unknown_label():
    with pytest.raises(EngineError):
        vanishing_certificate(OUT, "J_9")


def test_broken_certificate_step_is_detected():
    bad = ee.Step("claims a non-empty class is empty", "enumeration_empty", ("outgoing", "I", 1))
    assert not ee.Certificate("exhaustion", (bad,)).recheck()


# ---------------------------------------------------------------- placements


def test_term_examples():
    assert _exp("Psi_g(D4 R) * Psi_g * Psi_g", OUT, "L2", "L4", "L4") == F(1, 2)
    assert _exp("Psi_g(D4 R) * alpha * Psi_g", OUT, "L2", "L4", "L4") == F(1, 4)
    assert _exp("psi * alpha(D4 R) * alpha(D4 R)", N4A, "Linf", "L2", "L2") == F(-1, 2)


@pytest.mark.parametrize("norms,src", [
    (("L2", "L2", "L2"), "psi * Psi_g * Psi_g"),          # sum 1/p != 1
    (("Linf", "L2", "L2"), "Psi_g * psi * Psi_g"),        # curvature in L-infinity
    (("L4", "L4", "L2"), "Psi_g(D4 R) * Psi_g * psi"),    # derivative curvature in L4
    (("L2", "L4", "L4"), "trchib0 * Psi_g * Psi_g"),      # background not in L-infinity
    (("Linf", "L2", "L2"), "nab psi * Psi_g * Psi_g"),    # derivative connection in L-infinity
    (("L2", "L4"), "psi * Psi_g * Psi_g"),                # wrong arity
    (("L3", "L2", "Linf"), "Psi_g * Psi_g * psi"),        # unknown norm
])
def test_inadmissible_placements(norms, src):
    with pytest.raises(PlacementError):
        placement_bound(Placement(src, norms))


def test_refined_placement_rules():
    with pytest.raises(PlacementError):
        placement_bound(Placement("alpha * alpha * Psi_g", ("L4", "L4", "L2"),
                                  refined=("alpha_L4_sharp", None, None)))
    with pytest.raises(PlacementError):
        placement_bound(Placement("rho * Psi_g", ("L2", "L2"), refined=("nosuch", None)))
    with pytest.raises(PlacementError):
        placement_bound(Placement("rho * rho", ("L4", "L4"),
                                  refined=("alpha_L4_sharp", "alpha_L4_sharp")))
    b = placement_bound(Placement("Psi_g(D4 R) * alpha * alpha", ("L2", "L4", "L4"),
                                  refined=("curv_L2_sharp", "alpha_L4_sharp", "alpha_L4_sharp")))
    assert b.leading == 0 and b.correction == F(1, 8)
    assert set(REFINED) >= {"alpha_L4_sharp", "curv_L2_sharp", "nab4alpha_L2"}


def test_background_gains_nothing():
    a = placement_bound(Placement("trchib0 * alpha * Psi_g", ("Linf", "L2", "L2")))
    b = placement_bound(Placement("alpha * Psi_g", ("L2", "L2")))
    assert a == b


# ---------------------------------------------------------------- moves


@pytest.mark.parametrize("kwargs", [
    dict(kind="teleport"),
    dict(kind="holder_placement"),
    dict(kind="bianchi_sub", detail="NSE_L_chi"),
    dict(kind="structure_sub", detail="NBE_L_beta"),
    dict(kind="commutator", detail="NOPE"),
    dict(kind="comparison_swap", detail="COMP_D9"),
    dict(kind="ibp_null", detail="e1"),
    dict(kind="gronwall_absorb", detail="some"),
    dict(kind="weaken"),
])
def test_invalid_moves(kwargs):
    with pytest.raises(EngineError):
        Move(**kwargs)


def test_move_arithmetic():
    pl = Move("holder_placement", placement=Placement("psi * Psi_g * Psi_g", ("Linf", "L2", "L2")))
    assert evaluate_moves((pl,))[0].delta_exponent == F(1, 2)
    b, st_ = evaluate_moves((pl, Move("bianchi_sub", "NBE_L_beta", value=F(1, 4))))
    assert b.delta_exponent == F(1, 4) and st_ == "bounded"
    b, _ = evaluate_moves((pl, Move("weaken", value=F(1, 8))))
    assert b.delta_exponent == F(1, 8)
    assert evaluate_moves((pl, Move("gronwall_absorb", "all")))[1] == "absorbed"
    assert evaluate_moves((Move("cancellation"),))[1] == "cancels"
    assert Move("commutator", "COMM_4_beta").cite == "COMM_4_beta"


def test_gronwall_shape_is_absorbed():
    r = bound_term(parse_term("trchib0 * Psi_g(D4 R) * Psi_g(D4 R)"), OUT)
    assert r.status == "absorbed" and r.delta_exponent == 0
    assert r.moves[0].kind == "gronwall_absorb"


def test_unbounded_report():
    r = bound_term(parse_term("alpha(D4 R) * alpha(D4 R) * alpha(D4 R)"), OUT)
    assert r.status == "unbounded" and r.diagnostic
    with pytest.raises(EngineError):
        bound_term(parse_term("alpha"), OUT, "greedy")


# ---------------------------------------------------------------- properties

all_terms = [(c, t) for c in CAMPAIGNS.values() for fam in ee.FAMILIES
             for t in enumerate_integrands(c, fam, widen=HalfInt.of(1))]
_NS = [NormSpec(p, d) for p in (2, 4, INF) for d in ("S", "H", "Hb")]


def _losses(f):
    return [anomaly_class(f, n).delta_loss for n in _NS]


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(all_terms), st.integers(0, 2),
       st.sampled_from(["alpha", "alphab", "beta", "chih", "chibh"]))
def test_monotone_in_anomalies(ct, i, name):
    c, t = ct
    f = t.factors[i]
    g = Factor(name, f.derivs)
    if f.is_background or f.is_curvature != g.is_curvature:
        return
    if (g.name, g.derivs) in ee._MILD_SWAP:
        return  # mild anomalies are recoverable by design
    lf, lg = _losses(f), _losses(g)
    if not all(b <= a for a, b in zip(lf, lg)):
        return
    t2 = SchematicTerm(t.factors[:i] + (g,) + t.factors[i + 1:])
    e1, e2 = bound_term(t, c).delta_exponent, bound_term(t2, c).delta_exponent
    if e1 is not None and e2 is not None:
        assert e2 <= e1


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(all_terms))
def test_auto_is_deterministic_and_rechecks(ct):
    c, t = ct
    a, b = bound_term(t, c), bound_term(t, c)
    assert a.moves == b.moves
    assert a.to_dict() == b.to_dict()
    if a.status != "unbounded":
        assert a.recheck()
        assert a.delta_exponent is not None and (4 * a.delta_exponent).denominator == 1


# ---------------------------------------------------------------- replay


def _summary(cid):
    return replay(CAMPAIGNS[cid]).summary()


def test_replay_nab4_alpha():
    s = _summary("nab4_alpha")
    assert (s["I"]["delta_exponent"], s["J"]["delta_exponent"], s["K"]["delta_exponent"]) == \
        ("-1/4", "-1/2", "-1/2")
    assert s["final"] == {"delta_exponent": "-1/2", "factor_tag": "const", "correction": "1/4"}


def test_replay_nab3_alphab():
    s = _summary("nab3_alphab")
    assert [s[f]["delta_exponent"] for f in ("I", "J", "K", "final")] == ["0", "-1/2", "-1/2", "-1/2"]


def test_replay_outgoing_labels():
    r = replay(OUT)
    assert r.passed, r.mismatches
    assert r.report("I_22_bdry").factor_tag == "R^{3/2}"
    assert r.report("I_22_bdry").delta_exponent == F(1, 8)
    assert r.report("K_02").status == "absorbed"
    assert "certified d^1/4" in r.report("J_112").discrepancy
    assert r.report("final").delta_exponent == F(1, 8)


def test_replay_incoming_labels():
    r = replay(INC)
    assert r.passed, r.mismatches
    assert r.report("J_212").factor_tag == "R^{7/4}"
    assert r.report("J_212").delta_exponent == F(1, 4)
    assert r.report("J_222").status == "cancels"
    fin = r.report("final")
    assert (fin.delta_exponent, fin.factor_tag) == (F(1, 32), "R^{7/8}")
    with pytest.raises(EngineError):
        r.report("Z_1")


def test_replay_all_and_serialization():
    results = replay_all()
    assert [r.campaign for r in results] == list(CAMPAIGNS)
    assert all(r.passed for r in results)
    for r in results:
        d = r.to_dict()
        assert json.loads(json.dumps(d)) == d
        for rep in d["reports"]:
            assert {"campaign", "term_label", "integrand", "moves", "delta_exponent",
                    "factor_tag", "status", "paper_anchor"} <= set(rep)
        assert r.table().splitlines()[-1] == "result: pass"


def test_auto_replay_has_no_unbounded_terms():
    for r in replay_all("auto"):
        assert r.passed, r.mismatches
    with pytest.raises(EngineError):
        replay(OUT, "magic")


def test_expected_mismatch_is_reported():
    c = ee.Campaign("outgoing", OUT.commuted_direction, OUT.multipliers, OUT.signature_range,
                    OUT.lhs_norms, {"I_0": (F(3, 4), "const")}, OUT.domain)
    r = replay(c)
    assert not r.passed
    assert r.mismatches[0].startswith("I_0: got d^1/2")
