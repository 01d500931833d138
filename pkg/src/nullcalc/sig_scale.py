"""Signature and scale bookkeeping, scale-invariant norms and anomalies.

Signatures and scales are half-integers.  Exponents of the small parameter
delta are ``Fraction`` because L^4 anomalies and the refined estimates need
quarters and sixteenths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import TYPE_CHECKING, Iterable, Union

if TYPE_CHECKING:  # pragma: no cover
    from .schematic_dsl import Factor, SchematicTerm


class SigScaleError(ValueError):
    """Raised for unknown kinds, unsupported norms or unresolvable signatures."""


@total_ordering
@dataclass(frozen=True)
class HalfInt:
    """Exact half-integer stored as twice its value."""

    doubled: int

    @staticmethod
    def of(x: Union[int, Fraction, str, "HalfInt"]) -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        f = Fraction(x)
        if (2 * f).denominator != 1:
            raise SigScaleError(f"{x} is not a half-integer")
        return HalfInt(int(2 * f))

    @property
    def value(self) -> Fraction:
        return Fraction(self.doubled, 2)

    def __add__(self, other) -> "HalfInt":
        return HalfInt(self.doubled + HalfInt.of(other).doubled)

    __radd__ = __add__

    def __sub__(self, other) -> "HalfInt":
        return HalfInt(self.doubled - HalfInt.of(other).doubled)

    def __rsub__(self, other) -> "HalfInt":
        return HalfInt.of(other) - self

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.doubled)

    def __mul__(self, k: int) -> "HalfInt":
        if not isinstance(k, int):
            return NotImplemented
        return HalfInt(self.doubled * k)

    __rmul__ = __mul__

    def __lt__(self, other) -> bool:
        return self.value < _frac(other)

    def __eq__(self, other) -> bool:
        try:
            return self.value == _frac(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash(self.value)

    def __str__(self) -> str:
        return fraction_str(self.value)

    def __repr__(self) -> str:
        return f"HalfInt({self})"


def _frac(x) -> Fraction:
    return x.value if isinstance(x, HalfInt) else Fraction(x)


def fraction_str(f: Fraction) -> str:
    f = Fraction(f)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


CONNECTION, CURVATURE, BACKGROUND = "connection", "curvature", "background-constant"


@dataclass(frozen=True)
class ComponentKind:
    name: str
    cls: str
    signature: HalfInt
    unicode: str


def _k(name, cls, sgn, uni) -> ComponentKind:
    return ComponentKind(name, cls, HalfInt.of(Fraction(sgn)), uni)


# Signature table.  betab carries +1/2: sc = 1/2 - sgn with scale 0 forces it.
KINDS: dict[str, ComponentKind] = {k.name: k for k in (
    _k("chih", CONNECTION, 1, "χ̂"),
    _k("trchi", CONNECTION, 1, "trχ"),
    _k("omega", CONNECTION, 1, "ω"),
    _k("eta", CONNECTION, "1/2", "η"),
    _k("etab", CONNECTION, "1/2", "η̄"),
    _k("zeta", CONNECTION, "1/2", "ζ"),
    _k("chibh", CONNECTION, 0, "χ̄̂"),
    _k("trchib_tilde", CONNECTION, 0, "tr͂χ̄"),
    _k("trchib0", BACKGROUND, 0, "trχ̄₀"),
    _k("omegab", CONNECTION, 0, "ω̄"),
    _k("alpha", CURVATURE, 2, "α"),
    _k("beta", CURVATURE, "3/2", "β"),
    _k("rho", CURVATURE, 1, "ρ"),
    _k("sigma", CURVATURE, 1, "σ"),
    _k("betab", CURVATURE, "1/2", "β̄"),
    _k("alphab", CURVATURE, 0, "ᾱ"),
)}

CONNECTION_KINDS = tuple(n for n, k in KINDS.items() if k.cls == CONNECTION)
CURVATURE_KINDS = tuple(n for n, k in KINDS.items() if k.cls == CURVATURE)

# Wildcard classes and their concrete members.
WILDCARDS: dict[str, tuple[str, ...]] = {
    "psi": CONNECTION_KINDS,
    "psi_g": ("trchi", "omega", "eta", "etab", "trchib_tilde", "omegab"),
    "Psi": CURVATURE_KINDS,
    "Psi_g": ("beta", "rho", "sigma", "betab", "alphab"),
}
WILDCARD_UNICODE = {"psi": "ψ", "psi_g": "ψ_g", "Psi": "Ψ", "Psi_g": "Ψ_g"}

# Derivative tags.  D4/D3/Dc act on the curvature tensor (Psi(D_N R)).
DERIV_SIGNATURE: dict[str, HalfInt] = {
    "nab4": HalfInt(2), "nab3": HalfInt(0), "nab": HalfInt(1),
    "D4": HalfInt(2), "D3": HalfInt(0), "Dc": HalfInt(1),
}
CURVATURE_DERIVS = ("D4", "D3", "Dc")


def kind(name: str) -> ComponentKind:
    try:
        return KINDS[name]
    except KeyError:
        raise SigScaleError(f"unknown component kind {name!r}") from None


def signature_of(k: Union[str, ComponentKind]) -> HalfInt:
    return (kind(k) if isinstance(k, str) else k).signature


def scale_of(k: Union[str, ComponentKind, HalfInt]) -> HalfInt:
    """sc = 1/2 - sgn.  Accepts a kind or a signature."""
    sgn = k if isinstance(k, HalfInt) else signature_of(k)
    return HalfInt(1) - sgn


def deriv_signature(derivs: Iterable[str]) -> HalfInt:
    total = HalfInt(0)
    for d in derivs:
        if d not in DERIV_SIGNATURE:
            raise SigScaleError(f"unknown derivative {d!r}")
        total = total + DERIV_SIGNATURE[d]
    return total


def index_signature(indices: Iterable[int], derivs: Iterable[str] = ()) -> HalfInt:
    """Signature of a frame component from its index pattern.

    sgn = N4 + N_a/2 - 1 for the indices of the curvature tensor, plus the
    contribution of any derivative tags.
    """
    idx = list(indices)
    n4 = sum(i == 4 for i in idx)
    na = sum(i in (1, 2) for i in idx)
    return HalfInt(2 * n4 + na - 2) + deriv_signature(derivs)


def factor_signatures(f: "Factor") -> frozenset[HalfInt]:
    """All signatures a factor can take after wildcard resolution."""
    shift = deriv_signature(f.derivs)
    members = WILDCARDS.get(f.name, (f.name,))
    return frozenset(signature_of(m) + shift for m in members)


def factor_signature(f: "Factor") -> HalfInt:
    if f.annotation is not None:
        return f.annotation
    options = factor_signatures(f)
    if len(options) != 1:
        raise SigScaleError(f"signature of wildcard {f.name!r} needs an annotation")
    return next(iter(options))


def signature_of_term(t: "SchematicTerm") -> HalfInt:
    total = HalfInt(0)
    for f in t.factors:
        total = total + factor_signature(f)
    return total


INF = math.inf


@dataclass(frozen=True)
class NormSpec:
    p: float
    domain: str
    scale_invariant: bool = True

    def __post_init__(self) -> None:
        if self.p not in (2, 4, INF):
            raise SigScaleError(f"unsupported Lebesgue exponent {self.p}")
        if self.domain not in ("S", "H", "Hb"):
            raise SigScaleError(f"unsupported domain {self.domain!r}")

    @property
    def inv_p(self) -> Fraction:
        return Fraction(0) if self.p == INF else Fraction(1, int(self.p))

    @property
    def label(self) -> str:
        p = "inf" if self.p == INF else str(int(self.p))
        return f"L{p}{'sc' if self.scale_invariant else ''}({self.domain})"

    @staticmethod
    def parse(label: str) -> "NormSpec":
        """Parse a compact label such as 'L4(H)' or 'Linfsc(S)'."""
        s = label.strip()
        if not s.startswith("L") or "(" not in s or not s.endswith(")"):
            raise SigScaleError(f"bad norm label {label!r}")
        head, dom = s[1:-1].split("(", 1)
        sc = head.endswith("sc")
        head = head[:-2] if sc else head
        p = {"2": 2, "4": 4, "inf": INF}.get(head)
        if p is None:
            raise SigScaleError(f"unsupported Lebesgue exponent {head!r}")
        return NormSpec(p, dom, scale_invariant=True)

    def __str__(self) -> str:
        return self.label


def _scale_arg(x) -> HalfInt:
    from .schematic_dsl import Factor, SchematicTerm

    if isinstance(x, SchematicTerm):
        return scale_of(signature_of_term(x))
    if isinstance(x, Factor):
        return scale_of(factor_signature(x))
    return scale_of(x)


def norm_exponent(x, n: NormSpec) -> Fraction:
    """Power of delta turning the plain norm into the scale-invariant one."""
    if not n.scale_invariant:
        raise SigScaleError("norm_exponent needs a scale-invariant norm")
    sc = _scale_arg(x).value
    if n.domain == "S":
        return -sc - n.inv_p
    if n.p != 2:
        raise SigScaleError(f"no scale-invariant {n.label} norm on a null hypersurface")
    return -sc - (1 if n.domain == "H" else Fraction(1, 2))


def holder_gain(n_factors: int) -> Fraction:
    """Scale-invariant Hoelder: each product of two factors gains delta^(1/2)."""
    return Fraction(max(n_factors - 1, 0), 2)


# ---------------------------------------------------------------- anomalies


@dataclass(frozen=True)
class AnomalyClass:
    delta_loss: Fraction
    mild: bool = False
    source: str = ""

    def __post_init__(self) -> None:
        if self.delta_loss not in (0, Fraction(-1, 4), Fraction(-1, 2)):
            raise SigScaleError(f"invalid anomaly loss {self.delta_loss}")


@dataclass(frozen=True)
class AnomalyEntry:
    kind: str
    derivs: tuple[str, ...]
    p: tuple[float, ...]
    domains: tuple[str, ...]
    loss: Fraction
    mild: bool
    source: str


_ALL_P = (2, 4, INF)
_ALL_DOM = ("S", "H", "Hb")
_HALF, _QUARTER = Fraction(-1, 2), Fraction(-1, 4)

ANOMALY_TABLE: tuple[AnomalyEntry, ...] = (
    AnomalyEntry("chih", (), (2,), _ALL_DOM, _HALF, False, "O_{0,2}"),
    AnomalyEntry("chibh", (), (2,), _ALL_DOM, _HALF, False, "O_{0,2}"),
    AnomalyEntry("chih", (), (4,), _ALL_DOM, _QUARTER, False, "O_{0,4}"),
    AnomalyEntry("chibh", (), (4,), _ALL_DOM, _QUARTER, False, "O_{0,4}"),
    AnomalyEntry("alpha", (), (2,), ("H",), _HALF, False, "R_0"),
    AnomalyEntry("alpha", (), (4,), _ALL_DOM, _QUARTER, False, "alpha L4 estimate"),
    AnomalyEntry("beta", (), (2,), ("Hb",), _HALF, False, "Rb_0"),
    AnomalyEntry("alpha", ("nab4",), (2,), ("H",), _HALF, False, "R_1"),
    AnomalyEntry("alpha", ("D4",), (2,), ("H",), _HALF, False, "R_1 via comparison"),
    AnomalyEntry("alphab", ("nab3",), (2,), ("Hb",), _HALF, False, "Rb_1"),
    AnomalyEntry("alphab", ("D3",), (2,), ("Hb",), _HALF, False, "Rb_1 via comparison"),
    AnomalyEntry("alpha", ("nab3",), _ALL_P, _ALL_DOM, _HALF, True, "mild anomaly"),
    AnomalyEntry("alpha", ("D3",), _ALL_P, _ALL_DOM, _HALF, True, "mild anomaly"),
    AnomalyEntry("beta", ("Dc",), _ALL_P, _ALL_DOM, _HALF, True, "mild anomaly"),
)

MILD_ANOMALIES = frozenset({("alpha", ("nab3",)), ("alpha", ("D3",)), ("beta", ("Dc",))})

NOT_ANOMALOUS = AnomalyClass(Fraction(0))


def _norm_of(n) -> NormSpec:
    return NormSpec.parse(n) if isinstance(n, str) else n


def _concrete_anomaly(name: str, derivs: tuple[str, ...], n: NormSpec) -> AnomalyClass:
    k = kind(name)
    if k.cls == BACKGROUND:
        return NOT_ANOMALOUS
    if k.cls == CONNECTION and n.p == INF and not derivs:
        return NOT_ANOMALOUS
    key = tuple(sorted(derivs))
    for e in ANOMALY_TABLE:
        if e.kind == name and tuple(sorted(e.derivs)) == key and n.p in e.p and n.domain in e.domains:
            return AnomalyClass(e.loss, e.mild, e.source)
    return NOT_ANOMALOUS


def anomaly_class(x, n) -> AnomalyClass:
    """Registry lookup of the delta-loss of a factor in a norm.

    ``x`` is a kind name, a Factor or a single-factor SchematicTerm.  The good
    wildcards psi_g/Psi_g are non-anomalous by definition; psi/Psi take the
    worst member.
    """
    from .schematic_dsl import Factor, SchematicTerm

    n = _norm_of(n)
    if isinstance(x, SchematicTerm):
        if len(x.factors) != 1:
            raise SigScaleError("anomaly_class takes a single factor")
        x = x.factors[0]
    if isinstance(x, Factor):
        name, derivs = x.name, tuple(x.derivs)
    else:
        name, derivs = str(x), ()
    if name in ("psi_g", "Psi_g"):
        return NOT_ANOMALOUS
    if name in WILDCARDS:
        worst = min((_concrete_anomaly(m, derivs, n) for m in WILDCARDS[name]),
                    key=lambda a: (a.delta_loss, not a.mild))
        return worst
    return _concrete_anomaly(name, derivs, n)


def is_anomalous_curvature(name: str, derivs: tuple[str, ...]) -> bool:
    """Curvature factors counted as anomalies in their natural L2 norms."""
    key = (name, tuple(sorted(derivs)))
    return key in {("alpha", ()), ("alpha", ("D4",)), ("alphab", ("D3",)),
                   ("alpha", ("D3",)), ("beta", ("Dc",))}


# Weighted norm definitions: (norm, kind, derivs, p, domain, delta weight).
# A weight delta^w in front of a norm means that norm loses delta^(-w).
NORM_DEFINITIONS: tuple[tuple[str, str, tuple[str, ...], float, str, Fraction], ...] = (
    *[("O_{0,2}", k, (), 2, "S", Fraction(1, 2)) for k in ("chih", "chibh")],
    *[("O_{0,4}", k, (), 4, "S", Fraction(1, 4)) for k in ("chih", "chibh")],
    *[("O_{0,inf}", k, (), INF, "S", Fraction(0)) for k in ("chih", "chibh")],
    *[(f"O_{{0,{p}}}", k, (), p, "S", Fraction(0))
      for p in (2, 4, INF) for k in WILDCARDS["psi_g"]],
    *[(f"O_{{1,{p}}}", k, ("nab",), p, "S", Fraction(0))
      for p in (2, 4) for k in ("chih", "trchi", "omega", "eta", "etab", "chibh",
                               "trchib_tilde", "omegab")],
    ("R_0", "alpha", (), 2, "H", Fraction(1, 2)),
    *[("R_0", k, (), 2, "H", Fraction(0)) for k in ("beta", "rho", "sigma", "betab")],
    ("Rb_0", "beta", (), 2, "Hb", Fraction(1, 2)),
    *[("Rb_0", k, (), 2, "Hb", Fraction(0)) for k in ("rho", "sigma", "betab", "alphab")],
    ("R_1", "alpha", ("nab4",), 2, "H", Fraction(1, 2)),
    *[("R_1", k, ("nab",), 2, "H", Fraction(0))
      for k in ("alpha", "beta", "rho", "sigma", "betab")],
    ("Rb_1", "alphab", ("nab3",), 2, "Hb", Fraction(1, 2)),
    *[("Rb_1", k, ("nab",), 2, "Hb", Fraction(0))
      for k in ("beta", "rho", "sigma", "betab", "alphab")],
)

TABULATED_BETAB_SIGNATURE = HalfInt.of("-1/2")

CONFLICT_BETAB_SIGNATURE = (
    "betab signature: the tabulated signature cell reads -1/2 next to scale 0, "
    "which violates sc = 1/2 - sgn; the registry adopts sgn(betab) = +1/2."
)
CONFLICT_BETA_INCOMING = (
    "beta on the incoming hypersurface: one sentence calls it scale invariant, "
    "but the Rb_0 norm weights it by delta^(1/2); the registry follows the "
    "norm definition and records a loss of -1/2 for beta in L2(Hb)."
)
RECORDED_CONFLICTS = (CONFLICT_BETAB_SIGNATURE, CONFLICT_BETA_INCOMING)


def registry_consistency_report() -> tuple[list[str], list[str]]:
    """Cross-check the weighted norm definitions against the anomaly table.

    Returns (lines, conflicts).  Conflicts that are not among the two recorded
    ones indicate a transcription error.
    """
    from .schematic_dsl import Factor

    lines, conflicts = [], []
    for norm, name, derivs, p, dom, weight in NORM_DEFINITIONS:
        spec = NormSpec(p, dom)
        got = anomaly_class(Factor(name, derivs), spec).delta_loss
        ok = got == -weight
        lines.append(f"{norm:10s} {'.'.join(derivs + (name,)):14s} {spec.label:10s} "
                     f"weight {fraction_str(weight):4s} loss {fraction_str(got):5s} "
                     f"{'ok' if ok else 'CONFLICT'}")
        if not ok:
            conflicts.append(f"{norm}: {name} {spec.label} weight {weight} vs loss {got}")
    # Table-level checks that carry the two recorded conflicts.
    if TABULATED_BETAB_SIGNATURE + scale_of("betab") != HalfInt(1):
        lines.append("CONFLICT " + CONFLICT_BETAB_SIGNATURE)
    if anomaly_class("beta", NormSpec(2, "Hb")).delta_loss != 0:
        lines.append("CONFLICT " + CONFLICT_BETA_INCOMING)
    return lines, conflicts


def registry_json() -> dict:
    """Component table with per-norm losses, for export."""
    norms = [NormSpec(p, d) for d in ("S", "H", "Hb") for p in (2, 4, INF)]
    out = {}
    for name, k in KINDS.items():
        out[name] = {
            "class": k.cls,
            "signature": str(k.signature),
            "scale": str(scale_of(k)),
            "loss": {n.label: fraction_str(anomaly_class(name, n).delta_loss) for n in norms},
        }
    return out
