"""Registry of the transport structure equations, null Bianchi equations,
commutators, deformation tensors and comparison identities.

Every right-hand side is stored with exact coefficients and operator tags.
``trchib`` is always split into its background part ``trchib0`` and the
perturbation ``trchib_tilde``; full ``chi`` is split into ``chih`` and ``trchi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from .schematic_dsl import Factor, SchematicTerm, parse_term
from .sig_scale import (
    CONNECTION,
    CURVATURE,
    KINDS,
    WILDCARDS,
    HalfInt,
    SigScaleError,
    signature_of_term,
)


class RegistryError(KeyError):
    """Raised for unknown equation ids."""


@dataclass(frozen=True)
class RhsTerm:
    coeff: Fraction
    term: SchematicTerm
    op: str = ""  # operator tag: div, hat, dual, dot, curl, commuted


@dataclass(frozen=True)
class Equation:
    lhs: SchematicTerm
    rhs: tuple[RhsTerm, ...]


@dataclass(frozen=True)
class EquationEntry:
    id: str
    equations: tuple[Equation, ...]
    citation: str
    family: str  # structure | bianchi | commutator

    @property
    def lhs(self) -> SchematicTerm:
        return self.equations[0].lhs

    @property
    def rhs(self) -> tuple[RhsTerm, ...]:
        return tuple(t for eq in self.equations for t in eq.rhs)

    def equation_for(self, lhs_name: str) -> Equation:
        for eq in self.equations:
            if eq.lhs.factors[0].name == lhs_name:
                return eq
        raise RegistryError(f"{self.id} has no equation for {lhs_name!r}")


def _eq(lhs: str, *terms) -> Equation:
    rhs = []
    for t in terms:
        coeff, src = t[0], t[1]
        op = t[2] if len(t) > 2 else ""
        rhs.append(RhsTerm(Fraction(coeff), parse_term(src), op))
    return Equation(parse_term(lhs), tuple(rhs))


def _entry(id_, family, citation, *eqs) -> EquationEntry:
    return EquationEntry(id_, tuple(eqs), citation, family)


H = Fraction(1, 2)


@lru_cache(maxsize=1)
def registry() -> tuple[EquationEntry, ...]:
    """The 21 transcribed equations: 9 structure, 10 Bianchi, 2 commutators."""
    return (
        _entry("NSE_L_chi", "structure", "transport of chi along e4",
               _eq("nab4 trchi", (-H, "trchi * trchi"), (-1, "chih * chih", "dot"),
                   (-2, "omega * trchi")),
               _eq("nab4 chih", (-1, "trchi * chih"), (-2, "omega * chih"), (-1, "alpha"))),
        _entry("NSE_Lb_chib", "structure", "transport of chib along e3",
               _eq("nab3 trchib_tilde", (-H, "trchib_tilde * trchib_tilde"),
                   (-1, "trchib0 * trchib_tilde"), (-H, "trchib0 * trchib0"),
                   (-1, "chibh * chibh", "dot"), (-2, "omegab * trchib_tilde"),
                   (-2, "omegab * trchib0")),
               _eq("nab3 chibh", (-1, "trchib_tilde * chibh"), (-1, "trchib0 * chibh"),
                   (-2, "omegab * chibh"), (-1, "alphab"))),
        _entry("NSE_L_eta", "structure", "transport of eta along e4 and etab along e3",
               _eq("nab4 eta", (-1, "chih * eta", "dot"), (1, "chih * etab", "dot"),
                   (-H, "trchi * eta"), (H, "trchi * etab"), (-1, "beta")),
               _eq("nab3 etab", (-1, "chibh * etab", "dot"), (1, "chibh * eta", "dot"),
                   (-H, "trchib_tilde * etab"), (-H, "trchib0 * etab"),
                   (H, "trchib_tilde * eta"), (H, "trchib0 * eta"), (1, "betab"))),
        _entry("NSE_L_omegab", "structure", "transport of omegab along e4",
               _eq("nab4 omegab", (2, "omega * omegab"), (Fraction(3, 8), "eta * eta", "dot"),
                   (Fraction(-7, 4), "eta * etab", "dot"), (Fraction(7, 8), "etab * etab", "dot"),
                   (H, "rho"))),
        _entry("NSE_Lb_omega", "structure", "transport of omega along e3",
               _eq("nab3 omega", (2, "omegab * omega"), (Fraction(7, 8), "eta * eta", "dot"),
                   (Fraction(-7, 4), "eta * etab", "dot"), (Fraction(3, 8), "etab * etab", "dot"),
                   (H, "rho"))),
        _entry("NSE_L_chib", "structure", "transport of trchib along e4",
               _eq("nab4 trchib_tilde", (-H, "trchi * trchib_tilde"), (-H, "trchi * trchib0"),
                   (2, "omega * trchib_tilde"), (2, "omega * trchib0"), (2, "nab etab", "div"),
                   (2, "etab * etab", "dot"), (2, "rho"), (-1, "chih * chibh", "dot"))),
        _entry("NSE_Lb_tr_chi", "structure", "transport of trchi along e3",
               _eq("nab3 trchi", (-H, "trchib_tilde * trchi"), (-H, "trchib0 * trchi"),
                   (2, "omegab * trchi"), (2, "nab eta", "div"), (2, "eta * eta", "dot"),
                   (2, "rho"), (-1, "chih * chibh", "dot"))),
        _entry("NSE_L_chibh", "structure", "transport of chibh along e4",
               _eq("nab4 chibh", (-H, "trchi * chibh"), (1, "nab etab", "hat"),
                   (2, "omega * chibh"), (-H, "trchib_tilde * chih"), (-H, "trchib0 * chih"),
                   (1, "etab * etab", "hat"))),
        _entry("NSE_Lb_chih", "structure", "transport of chih along e3",
               _eq("nab3 chih", (-H, "trchib_tilde * chih"), (-H, "trchib0 * chih"),
                   (1, "nab eta", "hat"), (2, "omegab * chih"), (-H, "trchi * chibh"),
                   (1, "eta * eta", "hat"))),
        _entry("NBE_Lb_alpha", "bianchi", "Bianchi: alpha along e3",
               _eq("nab3 alpha", (-H, "trchib_tilde * alpha"), (-H, "trchib0 * alpha"),
                   (1, "nab beta", "hat"), (4, "omegab * alpha"), (-3, "chih * rho"),
                   (-3, "chih * sigma", "dual"), (1, "zeta * beta", "hat"),
                   (4, "eta * beta", "hat"))),
        _entry("NBE_L_beta", "bianchi", "Bianchi: beta along e4",
               _eq("nab4 beta", (-2, "trchi * beta"), (1, "nab alpha", "div"),
                   (-2, "omega * beta"), (1, "eta * alpha", "dot"))),
        _entry("NBE_Lb_beta", "bianchi", "Bianchi: beta along e3",
               _eq("nab3 beta", (-1, "trchib_tilde * beta"), (-1, "trchib0 * beta"),
                   (1, "nab rho"), (1, "nab sigma", "dual"), (2, "omegab * beta"),
                   (2, "chih * betab", "dot"), (3, "eta * rho"), (3, "eta * sigma", "dual"))),
        _entry("NBE_L_sigma", "bianchi", "Bianchi: sigma along e4",
               _eq("nab4 sigma", (Fraction(-3, 2), "trchi * sigma"), (-1, "nab beta", "div"),
                   (H, "chibh * alpha", "dual"), (-1, "zeta * beta", "dual"),
                   (-2, "etab * beta", "dual"))),
        _entry("NBE_Lb_sigma", "bianchi", "Bianchi: sigma along e3",
               _eq("nab3 sigma", (Fraction(-3, 2), "trchib_tilde * sigma"),
                   (Fraction(-3, 2), "trchib0 * sigma"), (-1, "nab betab", "div"),
                   (H, "chih * alphab", "dual"), (-1, "zeta * betab", "dual"),
                   (-2, "eta * betab", "dual"))),
        _entry("NBE_L_rho", "bianchi", "Bianchi: rho along e4",
               _eq("nab4 rho", (Fraction(-3, 2), "trchi * rho"), (1, "nab beta", "div"),
                   (-H, "chibh * alpha", "dot"), (1, "zeta * beta", "dot"),
                   (2, "etab * beta", "dot"))),
        _entry("NBE_Lb_rho", "bianchi", "Bianchi: rho along e3",
               _eq("nab3 rho", (Fraction(-3, 2), "trchib_tilde * rho"),
                   (Fraction(-3, 2), "trchib0 * rho"), (-1, "nab betab", "div"),
                   (-H, "chih * alphab", "dot"), (1, "zeta * betab", "dot"),
                   (-2, "eta * betab", "dot"))),
        _entry("NBE_L_betab", "bianchi", "Bianchi: betab along e4",
               _eq("nab4 betab", (-1, "trchi * betab"), (-1, "nab rho"),
                   (1, "nab sigma", "dual"), (2, "omega * betab"), (2, "chibh * beta", "dot"),
                   (-3, "etab * rho"), (3, "etab * sigma", "dual"))),
        _entry("NBE_Lb_betab", "bianchi", "Bianchi: betab along e3",
               _eq("nab3 betab", (-2, "trchib_tilde * betab"), (-2, "trchib0 * betab"),
                   (-1, "nab alphab", "div"), (-2, "omegab * betab"),
                   (1, "etab * alphab", "dot"))),
        _entry("NBE_L_alphab", "bianchi", "Bianchi: alphab along e4",
               _eq("nab4 alphab", (-H, "trchi * alphab"), (-1, "nab betab", "hat"),
                   (4, "omega * alphab"), (-3, "chibh * rho"), (3, "chibh * sigma", "dual"),
                   (1, "zeta * betab", "hat"), (-4, "etab * betab", "hat"))),
        _entry("COMM_4_beta", "commutator", "commutator [nab4, nab] on beta",
               _eq("nab4 nab beta", (1, "nab nab4 beta", "commuted"),
                   (-1, "chih * nab beta", "dot"), (-H, "trchi * nab beta"),
                   (1, "beta * beta", "dual"), (H, "eta * nab4 beta"), (H, "etab * nab4 beta"),
                   (1, "etab * beta * chih", "dot"), (H, "etab * beta * trchi", "dot"))),
        _entry("COMM_3_betab", "commutator", "commutator [nab3, nab] on betab",
               _eq("nab3 nab betab", (1, "nab nab3 betab", "commuted"),
                   (-1, "chibh * nab betab", "dot"), (-H, "trchib_tilde * nab betab"),
                   (-H, "trchib0 * nab betab"), (1, "betab * betab", "dual"),
                   (H, "eta * nab3 betab"), (H, "etab * nab3 betab"),
                   (1, "chibh * eta * betab", "dot"), (H, "trchib_tilde * eta * betab", "dot"),
                   (H, "trchib0 * eta * betab", "dot"))),
    )


def lookup(id_: str) -> EquationEntry:
    for e in registry():
        if e.id == id_:
            return e
    raise RegistryError(f"unknown equation id {id_!r}")


# ------------------------------------------------------------- consistency


@dataclass(frozen=True)
class ConsistencyReport:
    id: str
    lhs_signatures: tuple[HalfInt, ...]
    rhs_signatures: tuple[tuple[str, HalfInt], ...]
    passed: bool
    failures: tuple[str, ...] = ()

    def summary(self) -> str:
        sig = ",".join(str(s) for s in self.lhs_signatures)
        return f"{self.id}: lhs sgn {sig}, {len(self.rhs_signatures)} rhs terms, " + (
            "pass" if self.passed else "FAIL " + "; ".join(self.failures))


def _check_kinds(t: SchematicTerm) -> None:
    for f in t.factors:
        if f.name not in KINDS and f.name not in WILDCARDS:
            raise SigScaleError(f"unknown component kind {f.name!r}")


def check_signature_consistency(e: EquationEntry) -> ConsistencyReport:
    lhs_sigs, rhs_sigs, failures = [], [], []
    for eq in e.equations:
        _check_kinds(eq.lhs)
        s0 = signature_of_term(eq.lhs)
        lhs_sigs.append(s0)
        for r in eq.rhs:
            _check_kinds(r.term)
            s = signature_of_term(r.term)
            rhs_sigs.append((r.term.to_ascii(), s))
            if s != s0:
                failures.append(f"{r.term.to_ascii()} has signature {s}, lhs {eq.lhs.to_ascii()} has {s0}")
    return ConsistencyReport(e.id, tuple(lhs_sigs), tuple(rhs_sigs), not failures, tuple(failures))


def eliminate_zeta(e: EquationEntry) -> EquationEntry:
    """Rewrite zeta = (eta - etab)/2 in every right-hand side."""
    eqs = []
    for eq in e.equations:
        rhs = []
        for r in eq.rhs:
            idx = [i for i, f in enumerate(r.term.factors) if f.name == "zeta"]
            if not idx:
                rhs.append(r)
                continue
            i = idx[0]
            for name, sign in (("eta", 1), ("etab", -1)):
                fs = list(r.term.factors)
                fs[i] = Factor(name, fs[i].derivs)
                rhs.append(RhsTerm(r.coeff * sign / 2, SchematicTerm(tuple(fs)), r.op))
        eqs.append(Equation(eq.lhs, tuple(rhs)))
    return EquationEntry(e.id, tuple(eqs), e.citation, e.family)


# ------------------------------------------------------------- schematic layer

ANOMALOUS_KINDS = frozenset({"alpha", "chih", "chibh"})
GOOD_CONNECTION = frozenset(WILDCARDS["psi_g"]) | {"zeta"}


def _class_of(f: Factor) -> str:
    if f.derivs or f.name in ANOMALOUS_KINDS or f.name == "trchib0":
        return f.to_ascii()
    k = KINDS[f.name]
    if k.cls == CONNECTION:
        return "psi_g" if f.name in GOOD_CONNECTION else "psi"
    return "Psi_g"


def classify_term(t: SchematicTerm) -> SchematicTerm:
    """Collapse an exact term to its schematic class."""
    fs = t.factors
    if any(f.derivs for f in fs) or len(fs) == 1:
        return t.bare()
    if len(fs) == 2:
        conn = [f for f in fs if f.name in KINDS and KINDS[f.name].cls != CURVATURE]
        curv = [f for f in fs if f.name in KINDS and KINDS[f.name].cls == CURVATURE]
        if len(conn) == 1 and len(curv) == 1:
            c, r = conn[0], curv[0]
            if c.name == "trchib0":
                return parse_term(f"trchib0 * {_class_of(r)}")
            if r.name == "alpha":
                return parse_term(f"{_class_of(c)} * alpha")
            return parse_term("psi * Psi_g")
    classes = sorted((_class_of(f) for f in fs),
                     key=lambda s: (s.startswith(("P",)) or s in ("alpha",), s))
    return parse_term(" * ".join(classes))


def schematic_form(id_: str, lhs_name: Optional[str] = None) -> list[SchematicTerm]:
    """Distinct schematic classes of an equation's right-hand side."""
    if id_ in COMPARISON:
        return list(COMPARISON[id_][1])
    e = eliminate_zeta(lookup(id_))
    eqs = [e.equation_for(lhs_name)] if lhs_name else list(e.equations)
    out: list[SchematicTerm] = []
    for eq in eqs:
        for r in eq.rhs:
            c = classify_term(r.term)
            if c not in out:
                out.append(c)
    return out


# Comparison identities: lhs minus its transport counterpart, and the
# decomposition of beta(Dc R).
COMPARISON: dict[str, tuple[SchematicTerm, tuple[SchematicTerm, ...]]] = {
    "COMP_D4": (parse_term("Psi(D4 R)"), (parse_term("nab4 Psi"), parse_term("psi_g * Psi"))),
    "COMP_D3": (parse_term("Psi(D3 R)"), (parse_term("nab3 Psi"), parse_term("psi_g * Psi"))),
    "COMP_Dc": (parse_term("Psi(Dc R)"), (parse_term("nab Psi"), parse_term("psi_g * Psi"),
                                          parse_term("trchib0 * Psi_g"))),
    "COMP_Dc_beta": (parse_term("beta(Dc R)"),
                     (parse_term("trchib0 * alpha"), parse_term("nab beta"),
                      parse_term("psi_g * Psi"), parse_term("trchib0 * Psi_g"))),
    "MILD_D3_alpha": (parse_term("alpha(D3 R)"),
                      (parse_term("trchib0 * alpha"), parse_term("nab beta"),
                       parse_term("psi_g * alpha"), parse_term("psi * Psi_g"))),
}


# ------------------------------------------------------------- deformation


@dataclass(frozen=True)
class DeformationEntry:
    vector: str       # L or Lb
    component: str    # e.g. "33", "3a", "ab"
    value: str        # schematic value with Omega^-1 tags
    kinds: tuple[str, ...]
    kind: str = "pi"  # pi (deformation tensor) or DL (D^mu N^nu)


DEFORMATION: tuple[DeformationEntry, ...] = (
    DeformationEntry("L", "33", "-8 Omega^-1 omegab", ("omegab",)),
    DeformationEntry("L", "3a", "2 Omega^-1 eta", ("eta",)),
    DeformationEntry("L", "ab", "Omega^-1 chi", ("chih", "trchi")),
    # Printed with indices 33 for Lb; recorded as printed.
    DeformationEntry("Lb", "33", "-8 Omega^-1 omega", ("omega",)),
    DeformationEntry("Lb", "4a", "2 Omega^-1 etab", ("etab",)),
    DeformationEntry("Lb", "ab", "Omega^-1 chib", ("chibh", "trchib_tilde", "trchib0")),
    DeformationEntry("L", "44", "2 omegab", ("omegab",), "DL"),
    DeformationEntry("L", "4a", "-Omega^-1 eta", ("eta",), "DL"),
    DeformationEntry("L", "a4", "-Omega^-1 eta", ("eta",), "DL"),
    DeformationEntry("L", "ab", "Omega^-1 chi", ("chih", "trchi"), "DL"),
    DeformationEntry("Lb", "33", "2 omega", ("omega",), "DL"),
    DeformationEntry("Lb", "3a", "-Omega^-1 etab", ("etab",), "DL"),
    DeformationEntry("Lb", "a3", "-Omega^-1 etab", ("etab",), "DL"),
    DeformationEntry("Lb", "ab", "Omega^-1 chib", ("chibh", "trchib_tilde", "trchib0"), "DL"),
)


def _slot(i: int) -> str:
    return "a" if i in (1, 2) else str(i)


def dl_nonzero(vector: str, mu: int, nu: int) -> bool:
    """Whether D^mu N^nu is among the listed non-zero components."""
    pat = _slot(mu) + _slot(nu)
    pat = pat.replace("aa", "ab")
    return any(d.kind == "DL" and d.vector == vector and d.component == pat for d in DEFORMATION)


# Schematic shape of the current J^(N) and its dual: quadratic curvature
# terms and the deformation-derivative term D^mu N^nu D_nu R.
CURRENT_FAMILIES: dict[str, tuple[str, ...]] = {
    "JN": ("Psi * Psi", "psi * Psi(D4 R)", "psi * Psi(D3 R)", "psi * Psi(Dc R)"),
    "JNstar": ("Psi * Psi", "psi * Psi(D4 R)", "psi * Psi(D3 R)", "psi * Psi(Dc R)"),
}
