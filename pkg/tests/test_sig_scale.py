from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nullcalc.schematic_dsl import Factor, SchematicTerm, parse_factor, parse_term
from nullcalc.sig_scale import (
    INF,
    KINDS,
    RECORDED_CONFLICTS,
    WILDCARDS,
    HalfInt,
    NormSpec,
    SigScaleError,
    anomaly_class,
    factor_signature,
    holder_gain,
    index_signature,
    is_anomalous_curvature,
    norm_exponent,
    registry_consistency_report,
    registry_json,
    scale_of,
    signature_of,
    signature_of_term,
)

H = HalfInt.of
kinds = st.sampled_from(sorted(KINDS))
derivs = st.lists(st.sampled_from(["nab4", "nab3", "nab"]), max_size=3)


def test_signature_table():
    assert signature_of("alpha") == H(2)
    assert signature_of("etab") == H("1/2")
    assert signature_of("alphab") == H(0)
    assert signature_of("betab") == H("1/2")
    assert signature_of("trchib0") == H(0)


def test_scale_table():
    assert scale_of("alpha") == H("-3/2")
    assert scale_of("rho") == H("-1/2")


@given(kinds)
def test_scale_is_half_minus_signature(k):
    assert scale_of(k) + signature_of(k) == H("1/2")


def test_derivative_signatures():
    assert factor_signature(parse_factor("nab4 beta")) == H("5/2")
    assert factor_signature(parse_factor("nab3 alpha")) == H(2)
    assert signature_of_term(parse_term("chih * alpha")) == H(3)
    assert signature_of_term(parse_term("alpha(D4 R)")) == H(3)
    assert index_signature((4, 1, 4, 1)) == H(2)
    assert index_signature((4, 1, 3, 1), ("Dc",)) == H("3/2")


@given(st.lists(st.tuples(kinds, derivs), min_size=1, max_size=5))
def test_signature_additive(draws):
    factors = [Factor(k, tuple(d)) for k, d in draws if not (KINDS[k].cls == "background" and d)]
    if not factors:
        return
    total = HalfInt(0)
    for f in factors:
        base = signature_of(f.name)
        shift = sum((1 if d == "nab4" else Fraction(1, 2) if d == "nab" else 0 for d in f.derivs),
                    Fraction(0))
        total = total + base + H(shift)
    assert signature_of_term(SchematicTerm(tuple(factors))) == total


def test_norm_exponents():
    assert norm_exponent("alpha", NormSpec(2, "H")) == Fraction(1, 2)
    assert norm_exponent("rho", NormSpec(4, "S")) == Fraction(1, 4)
    # A bare HalfInt is read as a signature: sc = -1 means sgn = 3/2.
    assert norm_exponent(H("3/2"), NormSpec(2, "Hb")) == Fraction(1, 2)
    with pytest.raises(SigScaleError):
        norm_exponent("alpha", NormSpec(4, "H"))


sig_values = st.integers(-4, 8).map(lambda n: HalfInt(n))
ps = st.sampled_from([(2, INF), (INF, 2), (4, 4), (INF, INF), (4, INF), (INF, 4)])


@given(sig_values, sig_values, ps)
def test_holder_accounting_identity(s1, s2, pair):
    p1, p2 = pair
    inv = NormSpec(p1, "S").inv_p + NormSpec(p2, "S").inv_p
    if inv not in (Fraction(0), Fraction(1, 2), Fraction(1, 4), Fraction(1)):
        return
    p = INF if inv == 0 else 1 / inv
    if p not in (2, 4, INF):
        return
    prod = norm_exponent(s1 + s2, NormSpec(p, "S"))
    assert prod == Fraction(1, 2) + norm_exponent(s1, NormSpec(p1, "S")) \
        + norm_exponent(s2, NormSpec(p2, "S"))
    assert holder_gain(2) == Fraction(1, 2)


def test_background_constant_gains_nothing():
    assert signature_of("trchib0") == H(0)
    for n in (NormSpec(INF, "S"), NormSpec(2, "H"), NormSpec(4, "S")):
        assert anomaly_class("trchib0", n).delta_loss == 0


def test_anomaly_examples():
    assert anomaly_class("alpha", NormSpec(4, "S")).delta_loss == Fraction(-1, 4)
    assert anomaly_class("omega", NormSpec(INF, "S")).delta_loss == 0
    a = anomaly_class(parse_factor("alpha(D3 R)"), NormSpec(2, "H"))
    assert a.delta_loss == Fraction(-1, 2) and a.mild
    assert anomaly_class(parse_factor("nab3 alphab"), NormSpec.parse("L2sc(Hb)")).delta_loss \
        == Fraction(-1, 2)


def test_wildcards():
    for n in (NormSpec(2, "H"), NormSpec(4, "S"), NormSpec(2, "Hb")):
        assert anomaly_class("psi_g", n).delta_loss == 0
        assert anomaly_class("Psi_g", n).delta_loss == 0
        worst = min(anomaly_class(m, n).delta_loss for m in WILDCARDS["Psi"])
        assert anomaly_class("Psi", n).delta_loss == worst


@given(kinds, st.sampled_from([2, 4, INF]), st.sampled_from(["S", "H", "Hb"]))
def test_losses_are_nonpositive_quarters(k, p, d):
    loss = anomaly_class(k, NormSpec(p, d)).delta_loss
    assert loss <= 0
    assert (4 * loss).denominator == 1


def test_anomalous_curvature_flags():
    assert is_anomalous_curvature("alpha", ())
    assert is_anomalous_curvature("beta", ("Dc",))
    assert not is_anomalous_curvature("rho", ("D4",))


def test_halfint_rejects_quarters():
    with pytest.raises(SigScaleError):
        H("1/4")
    assert str(H("3/2")) == "3/2"
    assert H(1) < H("3/2")


def test_registry_self_consistency():
    lines, conflicts = registry_consistency_report()
    assert conflicts == []
    conflict_lines = [ln for ln in lines if ln.startswith("CONFLICT")]
    assert conflict_lines == ["CONFLICT " + c for c in RECORDED_CONFLICTS]


def test_registry_json_covers_every_kind():
    doc = registry_json()
    assert set(doc) == set(KINDS)
    assert doc["alpha"]["loss"]["L4sc(S)"] == "-1/4"
    assert doc["betab"]["signature"] == "1/2"
