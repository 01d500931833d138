"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

from __future__ import annotations

import io
import time
from fractions import Fraction as F

import numpy as np
import pytest

from nullcalc import equation_registry as er
from nullcalc import estimate_engine as ee
from nullcalc.cli import main
from nullcalc.schematic_dsl import ParseError, parse_norm, parse_term, print_term, random_term
from nullcalc.sig_scale import RECORDED_CONFLICTS, registry_consistency_report
from nullcalc.weyl_algebra import (
    WeylComponents,
    bel_robinson,
    bel_robinson_closed_form,
    decompose,
    hodge_dual,
    j222_cancellation,
    left_dual,
    random_weyl,
    reconstruct,
    right_dual,
    tabulated_indices,
)


@pytest.fixture
def verdict(capsys):
    """Print one line per criterion, visible even under output capture."""

    def emit(n: int, ok: bool, text: str, caveat: str = "") -> None:
        status = ("PASS" if ok else "FAIL") + (f" ({caveat})" if caveat else "")
        with capsys.disabled():
            print(f"\n[acceptance {n}] {status}: {text}")
        assert ok, text

    return emit


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def test_1_registry_consistency(verdict):
    t0 = time.perf_counter()
    reports = [er.check_signature_consistency(e) for e in er.registry()]
    dt = time.perf_counter() - t0
    passed = sum(r.passed for r in reports)
    verdict(1, passed == len(reports) == 21 and dt < 0.1,
            f"{passed}/{len(reports)} registry entries signature-consistent in {dt:.3f}s (< 0.1s)")


def test_2_bel_robinson_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    idx = tabulated_indices()
    dominant = {(3, 3, 3, 3): lambda c: 2 * np.sum(c.alpha ** 2),
                (2, 2, 2, 2): lambda c: 2 * np.sum(c.alphab ** 2),
                (3, 3, 3, 2): lambda c: 4 * c.beta @ c.beta,
                (3, 2, 2, 2): lambda c: 4 * c.betab @ c.betab,
                (3, 3, 2, 2): lambda c: 4 * (c.rho ** 2 + c.sigma ** 2)}
    worst = 0.0
    for _ in range(200):
        W = random_weyl(rng)
        q = bel_robinson(W).components.array
        c = decompose(W)
        scale = float(np.abs(q).max())
        for i in idx:
            worst = max(worst, abs(bel_robinson_closed_form(c, i) - q[tuple(j - 1 for j in i)]) / scale)
        for k, fn in dominant.items():
            worst = max(worst, abs(fn(c) - q[k]) / scale)
    dt = time.perf_counter() - t0
    verdict(2, worst < 1e-9 and dt < 5,
            f"{len(idx)} closed-form Q components + 5 dominant-energy cases over 200 draws "
            f"(seed 42): max rel err {worst:.2e} (< 1e-9) in {dt:.2f}s (< 5s)")


def _dual_residuals(seed: int = 42, draws: int = 100) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    res = dict.fromkeys(["**W=-W", "*a=-a*", "alpha(*W)=alpha*", "alphab(*W)=*alphab",
                         "sigma(W)=rho(*W)", "dec.rec", "rec.dec"], 0.0)
    for _ in range(draws):
        W = random_weyl(rng)
        dual = hodge_dual(W).array
        c, d = decompose(W), decompose(dual)
        upd = {
            "**W=-W": _rel(hodge_dual(dual).array, -W),
            "*a=-a*": _rel(left_dual(c.alpha), -right_dual(c.alpha)),
            "alpha(*W)=alpha*": _rel(d.alpha, right_dual(c.alpha)),
            "alphab(*W)=*alphab": _rel(d.alphab, left_dual(c.alphab)),
            "sigma(W)=rho(*W)": abs(c.sigma - d.rho) / max(1.0, abs(c.sigma)),
            "rec.dec": _rel(reconstruct(c).array, W),
        }
        comp = WeylComponents.random(rng)
        upd["dec.rec"] = _rel(decompose(reconstruct(comp)).as_vector(), comp.as_vector())
        for k, v in upd.items():
            res[k] = max(res[k], v)
    return res


def test_3_dual_identities(verdict):
    res = _dual_residuals()
    worst = max(res.values())
    # alpha(*W) = *alpha(W) holds literally only for alphab; for alpha the
    # orientation fixed by the Q component table gives alpha(*W) = alpha* = -*alpha.
    verdict(3, worst < 1e-10,
            "100 draws each, max residual " + f"{worst:.1e} (< 1e-10): " + ", ".join(res),
            caveat="clause alpha(*W) = *alpha(W) unattainable as stated: it holds for alphab "
            "only, alpha satisfies alpha(*W) = -*alpha(W); strict xfail below")


@pytest.mark.xfail(strict=True, reason="alpha(*W) = *alpha(W) contradicts the sign of the "
                   "sigma *alpha terms in the Q component table; alpha(*W) = -*alpha(W) holds")
def test_3_literal_alpha_dual_conflicts_with_q_table():
    rng = np.random.default_rng(42)
    for _ in range(100):
        W = random_weyl(rng)
        c, d = decompose(W), decompose(hodge_dual(W).array)
        assert _rel(d.alpha, left_dual(c.alpha)) < 1e-10


def test_4_j222_cancellation(verdict):
    rng = np.random.default_rng(42)

    def r():
        return F(int(rng.integers(-50, 51)), int(rng.integers(1, 13)))

    sums = []
    for _ in range(50):
        a, b = r(), r()
        A = np.array([[a, b], [b, -a]], dtype=object)
        B = np.array([[r(), r()], [r(), r()]], dtype=object)
        T, Ts = j222_cancellation(A, B)
        sums.append(T + Ts)
    exact = all(isinstance(s, (int, F)) and s == 0 for s in sums)
    verdict(4, exact, f"T + T* over 50 rational draws: {'exact zero' if exact else sums}")


def test_5_vanishing_lemmas(verdict):
    C = ee.CAMPAIGNS
    empties = {
        "outgoing I k=3": ee.enumerate_integrands(C["outgoing"], "I", 3),
        "outgoing K k=2": ee.enumerate_integrands(C["outgoing"], "K", 2),
        "nab4_alpha I k=3": ee.enumerate_integrands(C["nab4_alpha"], "I", 3),
    }
    certs = {lbl: ee.vanishing_certificate(C[cid], lbl)
             for cid, lbl in (("outgoing", "J_2"), ("incoming", "K_2"))}
    ok = (not any(empties.values())
          and all(r.status == "vanishes" and r.certificate.recheck() for r in certs.values()))
    verdict(5, ok, "empty: " + ", ".join(empties) + "; certificates re-checked: outgoing J_2 ("
            + certs["J_2"].certificate.reason + "), incoming K_2 ("
            + certs["K_2"].certificate.reason + ")")


_MINIMUM = {
    "nab4_alpha": {"I": (F(-1, 4), None), "J": (F(-1, 2), None), "K": (F(-1, 2), None),
                   "final": (F(-1, 2), None)},
    "nab3_alphab": {"I": (F(0), None), "J": (F(-1, 2), None), "K": (F(-1, 2), None),
                    "final": (F(-1, 2), None)},
    "outgoing": {"I_0": (F(1, 2), None), "I_1": (F(1, 4), None), "I_22_bdry": (F(1, 8), "R^{3/2}"),
                 "K_0": (F(1, 2), None), "K_1": (F(1, 4), "R^{3/2}"), "J_1": (F(1, 4), "R^{3/2}")},
    "incoming": {"I": (F(1, 4), None), "K": (F(1, 4), None), "J": (F(1, 16), "R^{7/4}"),
                 "final": (F(1, 32), "R^{7/8}")},
}


def test_6_campaign_replay(verdict):
    t0 = time.perf_counter()
    results = {r.campaign: r for r in ee.replay_all("scripted")}
    out = io.StringIO()
    code = main(["replay", "--scripted"], out=out)
    dt = time.perf_counter() - t0
    bad = []
    for cid, labels in _MINIMUM.items():
        r = results[cid]
        bad += [f"{cid}: {m}" for m in r.mismatches]
        for label, (exp, tag) in labels.items():
            rep = r.report(label)
            if rep.delta_exponent != exp or (tag is not None and rep.factor_tag != tag):
                bad.append(f"{cid}.{label}")
    n4 = results["nab4_alpha"].report("final")
    if n4.correction != F(1, 4):
        bad.append("nab4_alpha final correction")
    n_labels = sum(len(v) for v in _MINIMUM.values())
    verdict(6, not bad and code == 0 and dt < 2,
            f"{n_labels} minimum-set exponents + all expected bounds match, replay --scripted exit "
            f"{code}, {dt:.2f}s (< 2s)" + (f"; mismatches: {bad}" if bad else ""))


MALFORMED = [
    ("qqq", 0), ("alpha *", 7), ("alpha * * beta", 8), ("alpha(D4 R", 10), ("alpha(D5 R)", 6),
    ("chih(D4 R)", 0), ("alpha^{(3)}", 5), ("alpha beta", 6), ("alpha * ρ", 8),
    ("||alpha||_{L3sc(S)}", 12),
]


def test_7_parser(verdict):
    rng = np.random.default_rng(42)
    corpus_ok = 0
    for _ in range(1000):
        t = random_term(rng)
        s = print_term(t)
        corpus_ok += parse_term(s) == t and print_term(parse_term(s)) == s
    offsets_ok = 0
    for src, off in MALFORMED:
        try:
            parse_norm(src) if src.startswith("||") else parse_term(src)
        except ParseError as exc:
            offsets_ok += exc.offset == off
    crashes = 0
    alphabet = np.frombuffer(b"alphbetrosigmnchiPs_gD34 R()*^{}/|L0125-", dtype=np.uint8)
    for i in range(10_000):
        n = int(rng.integers(0, 48))
        if i % 2:
            data = rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        else:
            data = rng.choice(alphabet, size=n).tobytes()
        src = data.decode("latin-1")
        for fn in (parse_term, parse_norm):
            try:
                fn(src)
            except ParseError:
                pass
            except Exception:  # noqa: BLE001 - any other exception is a crash
                crashes += 1
    verdict(7, corpus_ok == 1000 and offsets_ok == len(MALFORMED) == 10 and crashes == 0,
            f"round-trip {corpus_ok}/1000, malformed offsets {offsets_ok}/{len(MALFORMED)}, "
            f"fuzz 10^4 byte strings: {crashes} crashes")


def test_8_anomaly_registry(verdict):
    lines, conflicts = registry_consistency_report()
    rows = [ln for ln in lines if not ln.startswith("CONFLICT")]
    recorded = [ln[len("CONFLICT "):] for ln in lines if ln.startswith("CONFLICT")]
    ok = (not conflicts and all(ln.rstrip().endswith("ok") for ln in rows)
          and recorded == list(RECORDED_CONFLICTS) and len(recorded) == 2)
    verdict(8, ok, f"{len(rows)} norm-definition rows match registry losses; "
            f"{len(recorded)} recorded conflicts reported verbatim, {len(conflicts)} unexpected")
