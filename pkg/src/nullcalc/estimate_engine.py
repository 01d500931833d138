"""Exponent bookkeeping for the four curvature energy-estimate campaigns.

A bound on an error integral is a sum of pieces ``coeff * R^r * delta^e``
where ``coeff`` is ``c`` (controlled by the initial data) or ``C`` (a
bootstrap constant).  Leaves are bounded by Hoelder placements; rewrites such
as integration by parts, Bianchi substitutions and anomaly swaps are recorded
as moves so every exponent can be recomputed from its move list alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .equation_registry import COMPARISON, dl_nonzero, lookup, RegistryError
from .schematic_dsl import Factor, NormExpr, SchematicTerm, parse_norm, parse_term
from .sig_scale import (
    CONNECTION_KINDS,
    CURVATURE_KINDS,
    INF,
    HalfInt,
    NormSpec,
    anomaly_class,
    factor_signatures,
    fraction_str,
    index_signature,
    is_anomalous_curvature,
)
from .weyl_algebra import (
    CLOSED_FORM_SYMBOLS,
    WeylComponents,
    j222_cancellation,
    q_cross_term,
    random_weyl,
)

F = Fraction
HALF, QUARTER = F(1, 2), F(1, 4)


class EngineError(KeyError):
    """Unknown campaign, label or move."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class PlacementError(ValueError):
    """A Hoelder placement that violates the admissibility rules."""


# ----------------------------------------------------------------- bounds


@dataclass(frozen=True)
class Piece:
    exponent: Fraction
    coeff: str = "C"
    r_power: Fraction = F(0)

    def __post_init__(self) -> None:
        if self.coeff not in ("c", "C"):
            raise ValueError(f"coefficient must be 'c' or 'C', got {self.coeff!r}")
        object.__setattr__(self, "exponent", F(self.exponent))
        object.__setattr__(self, "r_power", F(self.r_power))

    def shift(self, e: Fraction) -> "Piece":
        return Piece(self.exponent + e, self.coeff, self.r_power)

    def __str__(self) -> str:
        r = f" R^{fraction_str(self.r_power)}" if self.r_power else ""
        return f"{self.coeff}{r} d^{fraction_str(self.exponent)}"


def _product(groups: list[tuple[Piece, ...]]) -> tuple[Piece, ...]:
    """Expand a product of sums of pieces."""
    out = []
    for combo in itertools.product(*groups):
        coeff = "C" if any(p.coeff == "C" for p in combo) else "c"
        out.append(Piece(sum((p.exponent for p in combo), F(0)), coeff,
                         sum((p.r_power for p in combo), F(0))))
    return tuple(out)


@dataclass(frozen=True)
class Bound:
    pieces: tuple[Piece, ...] = ()

    @property
    def leading(self) -> Optional[Fraction]:
        cs = [p.exponent for p in self.pieces if p.coeff == "c"]
        return min(cs) if cs else None

    @property
    def correction(self) -> Optional[Fraction]:
        cs = [p.exponent for p in self.pieces if p.coeff == "C"]
        return min(cs) if cs else None

    @property
    def delta_exponent(self) -> Optional[Fraction]:
        """The certified power of delta.

        Data-controlled pieces with a non-negative power are carried by the
        qualitative tag; a negative one is the leading behaviour.
        """
        lead, corr = self.leading, self.correction
        if lead is not None and lead < 0:
            return lead
        if corr is not None:
            return corr
        return lead

    @property
    def factor_tag(self) -> str:
        rs = [p.r_power for p in self.pieces if p.coeff == "c" and p.exponent >= 0]
        r = max(rs) if rs else F(0)
        return "const" if r == 0 else f"R^{{{fraction_str(r)}}}"

    def __add__(self, other: "Bound") -> "Bound":
        return Bound(self.pieces + other.pieces)


# ----------------------------------------------------------------- refined estimates


@dataclass(frozen=True)
class RefinedEstimate:
    """A sharper norm bound with data-controlled and bootstrap parts."""

    name: str
    kinds: frozenset[str]
    p: float
    pieces: tuple[Piece, ...]
    derivs: Optional[frozenset[tuple[str, ...]]] = None  # None: any derivatives

    def applies(self, f: Factor, p: float) -> bool:
        if p != self.p or f.name not in self.kinds:
            return False
        return self.derivs is None or tuple(f.derivs) in self.derivs


_CURV = frozenset(CURVATURE_KINDS) | {"Psi", "Psi_g"}
_NONE = frozenset({()})

REFINED: dict[str, RefinedEstimate] = {r.name: r for r in (
    RefinedEstimate("alpha_L4_sharp", frozenset({"alpha"}), 4,
                    (Piece(-QUARTER, "c"), Piece(-QUARTER, "c", HALF), Piece(F(1, 16))), _NONE),
    RefinedEstimate("alpha_L4_incoming", frozenset({"alpha"}), 4,
                    (Piece(-QUARTER, "c"), Piece(-QUARTER, "c", HALF), Piece(0)), _NONE),
    RefinedEstimate("curv_L2_sharp", _CURV, 2,
                    (Piece(0, "c"), Piece(0, "c", HALF), Piece(F(1, 8)))),
    RefinedEstimate("curv_R", _CURV, 2, (Piece(0, "c", 1),)),
    RefinedEstimate("shear_L4_coarse", frozenset({"chih", "chibh"}), 4,
                    (Piece(-QUARTER, "c"), Piece(QUARTER)), _NONE),
    RefinedEstimate("chibh_L4_sharp", frozenset({"chibh"}), 4,
                    (Piece(-QUARTER, "c"), Piece(0, "c", F(3, 4)), Piece(QUARTER)), _NONE),
    RefinedEstimate("curv_L4_sharp", frozenset({"rho", "sigma", "alphab"}), 4,
                    (Piece(0, "c", 1), Piece(QUARTER)), _NONE),
    RefinedEstimate("omega_L4_sharp", frozenset({"omega"}), 4,
                    (Piece(0, "c", F(3, 4)), Piece(QUARTER)), _NONE),
    RefinedEstimate("nab4alpha_L2", frozenset({"alpha"}), 2,
                    (Piece(-HALF, "c"), Piece(QUARTER)), frozenset({("nab4",), ("D4",)})),
)}


# ----------------------------------------------------------------- placements and moves

_P = {"L2": 2, "L4": 4, "Linf": INF}


def _inv(p: float) -> Fraction:
    return F(0) if p == INF else F(1, int(p))


@dataclass(frozen=True)
class Placement:
    """Hoelder assignment of Lebesgue norms to the factors of an integrand."""

    integrand: str
    norms: tuple[str, ...]
    domain: str = "H"
    boundary: bool = False
    refined: tuple[Optional[str], ...] = ()
    prefactor: Optional[Fraction] = None

    @property
    def term(self) -> SchematicTerm:
        return parse_term(self.integrand)

    def describe(self) -> str:
        parts = []
        for i, (f, n) in enumerate(zip(self.term.factors, self.norms)):
            r = self.refined[i] if i < len(self.refined) and self.refined[i] else ""
            parts.append(f"{f.to_ascii()}:{n}" + (f"[{r}]" if r else ""))
        where = ("boundary " if self.boundary else "") + self.domain
        pre = f" prefactor d^{fraction_str(self.prefactor)}" if self.prefactor is not None else ""
        return f"{', '.join(parts)} on {where}{pre}"


def background_free_count(t: SchematicTerm) -> int:
    return sum(not f.is_background for f in t.factors)


def placement_bound(pl: Placement) -> Bound:
    """Exponent of a Hoelder placement.

    Base gain (n-2)/2 for n non-background factors (one delta^(1/2) per extra
    factor from scale-invariant Hoelder, minus the delta^(1/2) of the bulk
    measure), plus the anomaly loss of each factor in its norm.
    """
    t = pl.term
    fs = t.factors
    if len(pl.norms) != len(fs):
        raise PlacementError(f"{len(pl.norms)} norms for {len(fs)} factors in {pl.integrand!r}")
    try:
        ps = [_P[n] for n in pl.norms]
    except KeyError as exc:
        raise PlacementError(f"unknown norm {exc.args[0]!r}") from None
    if sum(_inv(p) for p in ps) != 1:
        raise PlacementError(f"exponents of {pl.norms} do not satisfy sum 1/p = 1")
    refined = tuple(pl.refined) + (None,) * (len(fs) - len(pl.refined))
    for f, p, r in zip(fs, ps, refined):
        if f.is_curvature and p == INF:
            raise PlacementError(f"curvature factor {f.to_ascii()} cannot take L-infinity")
        if f.derivs and f.is_curvature and p != 2:
            raise PlacementError(f"derivatives of curvature such as {f.to_ascii()} are controlled in L2 only")
        if f.derivs and not f.is_curvature and p == INF:
            raise PlacementError(f"derivatives of connection coefficients such as {f.to_ascii()} "
                                 "are controlled in L2 and L4 only")
        if f.is_background and p != INF:
            raise PlacementError("the background constant trchib0 is bounded in L-infinity")
        if r is not None:
            est = REFINED.get(r)
            if est is None:
                raise PlacementError(f"unknown refined estimate {r!r}")
            if not est.applies(f, p):
                raise PlacementError(f"refined estimate {r} does not apply to {f.to_ascii()} in L{p}")
    uses_refined = any(r is not None for r in refined)
    if uses_refined and any(r is None and not f.is_background for f, r in zip(fs, refined)):
        raise PlacementError("mixed placements must refine every non-background factor")
    n = background_free_count(t)
    base = pl.prefactor if pl.prefactor is not None else F(n - 2, 2)
    groups: list[tuple[Piece, ...]] = []
    for f, p, r in zip(fs, ps, refined):
        if f.is_background:
            continue
        if r is not None:
            groups.append(REFINED[r].pieces)
        else:
            loss = anomaly_class(f, NormSpec(p, pl.domain)).delta_loss
            groups.append((Piece(loss, "C" if not uses_refined else "c"),))
    if not uses_refined:
        total = sum((g[0].exponent for g in groups), F(0))
        return Bound((Piece(base + total),))
    return Bound(tuple(p.shift(base) for p in _product(groups)))


MOVE_KINDS = (
    "holder_placement", "ibp_null", "ibp_horizontal", "bianchi_sub", "structure_sub",
    "commutator", "comparison_swap", "mild_anomaly_swap", "gronwall_absorb", "weaken",
    "cancellation",
)
_REGISTRY_MOVES = {"bianchi_sub": "bianchi", "structure_sub": "structure", "commutator": "commutator"}


@dataclass(frozen=True)
class Move:
    kind: str
    detail: str = ""
    placement: Optional[Placement] = None
    value: Optional[Fraction] = None

    def __post_init__(self) -> None:
        if self.kind not in MOVE_KINDS:
            raise EngineError(f"unknown move kind {self.kind!r}")
        if self.kind == "holder_placement" and self.placement is None:
            raise EngineError("holder_placement needs a placement")
        if self.kind in _REGISTRY_MOVES:
            try:
                entry = lookup(self.detail)
            except RegistryError:
                raise EngineError(f"{self.kind} cites unknown equation {self.detail!r}") from None
            if entry.family != _REGISTRY_MOVES[self.kind]:
                raise EngineError(f"{self.kind} cannot cite {entry.family} entry {self.detail}")
        if self.kind in ("comparison_swap", "mild_anomaly_swap") and self.detail not in COMPARISON:
            raise EngineError(f"{self.kind} cites unknown comparison identity {self.detail!r}")
        if self.kind == "ibp_null" and self.detail not in ("e3", "e4"):
            raise EngineError("ibp_null direction must be e3 or e4")
        if self.kind == "gronwall_absorb" and self.detail not in ("all", "c"):
            raise EngineError("gronwall_absorb scope must be 'all' or 'c'")
        if self.kind == "weaken" and self.value is None:
            raise EngineError("weaken needs a target exponent")
        if self.value is not None:
            object.__setattr__(self, "value", F(self.value))

    @property
    def cite(self) -> str:
        """The registry entry or technique enabling this move."""
        return {
            "holder_placement": "L4 x L4 Hoelder placement",
            "ibp_null": f"integration by parts along {self.detail}",
            "ibp_horizontal": "integration by parts on the spheres",
            "gronwall_absorb": "Gronwall absorption into the energy",
            "weaken": "delta < 1 monotonicity",
            "cancellation": "Hodge-dual pairing",
        }.get(self.kind, self.detail)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "cite": self.cite}
        if self.detail:
            d["detail"] = self.detail
        if self.placement is not None:
            d["placement"] = self.placement.describe()
        if self.value is not None:
            d["value"] = fraction_str(self.value)
        return d


def evaluate_moves(moves: tuple[Move, ...]) -> tuple[Bound, str]:
    """Recompute (bound, status) of a move list by pure exponent arithmetic."""
    pieces: list[Piece] = []
    status = "bounded"
    for m in moves:
        if m.kind == "holder_placement":
            pieces.extend(placement_bound(m.placement).pieces)
        elif m.kind in ("comparison_swap", "mild_anomaly_swap", "bianchi_sub",
                        "structure_sub", "commutator"):
            # Lower-order remainder of the rewrite, if any.
            if m.value is not None:
                pieces.append(Piece(m.value))
        elif m.kind == "gronwall_absorb":
            if m.detail == "all":
                pieces, status = [], "absorbed"
            else:
                pieces = [p for p in pieces if p.coeff != "c"]
        elif m.kind == "weaken":
            if any(p.coeff == "C" and p.exponent < m.value for p in pieces):
                pass  # pieces already below the target stay as they are
            pieces = [Piece(min(p.exponent, m.value), p.coeff, p.r_power) if p.coeff == "C" else p
                      for p in pieces]
        elif m.kind == "cancellation":
            pieces, status = [], "cancels"
    return Bound(tuple(pieces)), status


# ----------------------------------------------------------------- campaigns


@dataclass(frozen=True)
class Campaign:
    id: str
    commuted_direction: str
    multipliers: tuple[tuple[str, str, str], ...]
    signature_range: tuple[HalfInt, HalfInt]
    lhs_norms: tuple[NormExpr, ...]
    expected_bounds: dict = field(hash=False, compare=False)
    domain: str = "H"

    @property
    def deriv(self) -> str:
        return "D4" if self.commuted_direction == "L" else "D3"

    @property
    def nu_derivs(self) -> tuple[str, ...]:
        """Derivative slots allowed in Psi(D_nu R): nu with some D^mu N^nu nonzero."""
        out = []
        for nu, tag in ((4, "D4"), (3, "D3"), (1, "Dc")):
            if any(dl_nonzero(self.commuted_direction, mu, nu) for mu in (1, 2, 3, 4)):
                out.append(tag)
        return tuple(out)

    def in_range(self, s: HalfInt) -> bool:
        lo, hi = self.signature_range
        return lo <= s <= hi


def _hi(x) -> HalfInt:
    return HalfInt.of(x)


def _exp(e, tag="const"):
    return (F(e), tag)


R32, R74, R78 = "R^{3/2}", "R^{7/4}", "R^{7/8}"

_ALL_BUT_LLL = tuple(t for t in itertools.product(("L", "Lb"), repeat=3) if t != ("L", "L", "L"))

CAMPAIGNS: dict[str, Campaign] = {
    "nab4_alpha": Campaign(
        "nab4_alpha", "L", (("L", "L", "L"),), (_hi(6), _hi(6)),
        (parse_norm("||nab4 alpha||_{L2sc(H)}"),),
        {"I": _exp(-QUARTER), "J": _exp(-HALF), "K": _exp(-HALF), "final": _exp(-HALF)},
        "H"),
    "nab3_alphab": Campaign(
        "nab3_alphab", "Lb", (("Lb", "Lb", "Lb"),), (_hi(1), _hi(1)),
        (parse_norm("||nab3 alphab||_{L2sc(Hb)}"),),
        {"I": _exp(0), "J": _exp(-HALF), "K": _exp(-HALF), "final": _exp(-HALF)},
        "Hb"),
    "outgoing": Campaign(
        "outgoing", "L", _ALL_BUT_LLL, (_hi(3), _hi(5)),
        (parse_norm("||Psi(D4 R)||_{L2sc(H)}"), parse_norm("||Psi(D4 R)||_{L2sc(Hb)}")),
        {"I_0": _exp(HALF), "I_11": _exp(QUARTER), "I_12": _exp(QUARTER),
         "I_122": _exp(HALF), "I_1": _exp(QUARTER), "I_2": _exp(F(1, 8), R32),
         "I": _exp(F(1, 8), R32),
         "K_01": _exp(HALF), "K_0": _exp(HALF), "K_1111": _exp(QUARTER),
         "K_1112": _exp(QUARTER), "K_1113": _exp(QUARTER, R32), "K_112": _exp(QUARTER),
         "K_12": _exp(QUARTER), "K_1": _exp(QUARTER, R32), "K": _exp(QUARTER, R32),
         "J_0": _exp(HALF), "J_1111": _exp(QUARTER), "J_1112": _exp(QUARTER),
         "J_1113": _exp(QUARTER, R32), "J_12": _exp(QUARTER), "J_1": _exp(QUARTER, R32),
         "J": _exp(QUARTER, R32), "final": _exp(F(1, 8), R32)},
        "H"),
    "incoming": Campaign(
        "incoming", "Lb", (("L", "L", "Lb"), ("L", "Lb", "Lb")), (_hi(2), _hi(3)),
        (parse_norm("||Psi(D3 R)||_{L2sc(H)}"), parse_norm("||Psi(D3 R)||_{L2sc(Hb)}")),
        {"I_0": _exp(HALF), "I_11": _exp(QUARTER), "I_12": _exp(QUARTER),
         "I_13": _exp(QUARTER), "I_1": _exp(QUARTER), "I_21": _exp(QUARTER),
         "I_22": _exp(QUARTER), "I_2": _exp(QUARTER), "I": _exp(QUARTER),
         "K_0": _exp(HALF), "K_11": _exp(QUARTER), "K_121": _exp(QUARTER),
         "K_12": _exp(QUARTER), "K_1": _exp(QUARTER), "K": _exp(QUARTER),
         "J_0": _exp(HALF), "J_11": _exp(F(1, 8), R32), "J_12": _exp(QUARTER),
         "J_1": _exp(F(1, 8), R32), "J_211": _exp(QUARTER), "J_212": _exp(QUARTER, R74),
         "J_213": _exp(QUARTER), "J_21": _exp(QUARTER, R74), "J_2212": _exp(F(1, 16), R74),
         "J_2": _exp(F(1, 16), R74), "J": _exp(F(1, 16), R74),
         "final": _exp(F(1, 32), R78)},
        "Hb"),
}


def campaign(cid: str) -> Campaign:
    try:
        return CAMPAIGNS[cid]
    except KeyError:
        raise EngineError(f"unknown campaign {cid!r}") from None


# ----------------------------------------------------------------- enumeration

FAMILIES = ("I", "J", "K")
_PSI = tuple(k for k in CONNECTION_KINDS if k != "zeta")


def _slot_options(c: Campaign, family: str) -> list[list[Factor]]:
    curv = [Factor(k) for k in CURVATURE_KINDS]
    curv_n = [Factor(k, (c.deriv,)) for k in CURVATURE_KINDS]
    psi = [Factor(k) for k in _PSI]
    if family == "I":
        return [curv_n, curv, curv]
    if family == "K":
        return [psi + [Factor("trchib0")], curv_n, curv_n]
    if family == "J":
        conn = psi + ([Factor("trchib0")] if c.id == "incoming" else [])
        curv_nu = [Factor(k, (d,)) for d in c.nu_derivs for k in CURVATURE_KINDS]
        return [conn, curv_n, curv_nu]
    raise EngineError(f"unknown family {family!r}")


def anomaly_count(t: SchematicTerm) -> int:
    return sum(is_anomalous_curvature(f.name, tuple(f.derivs)) for f in t.factors)


def _term_signature(t: SchematicTerm) -> HalfInt:
    total = HalfInt(0)
    for f in t.factors:
        total = total + min(factor_signatures(f))
    return total


def enumerate_integrands(c: Campaign, family: str, k: Optional[int] = None,
                         widen: HalfInt = HalfInt(0)) -> list[SchematicTerm]:
    """Concrete integrand shapes of a family within the signature range.

    ``widen`` enlarges the range on both sides; ``k`` filters by the number of
    anomalous curvature factors.  Symmetric slots are enumerated unordered.
    """
    lo, hi = c.signature_range
    lo, hi = lo - widen, hi + widen
    slots = _slot_options(c, family)
    if family in ("I", "K"):
        combos = ((a, b, d) for a in slots[0]
                  for b, d in itertools.combinations_with_replacement(slots[1], 2))
    else:
        combos = itertools.product(*slots)
    out = []
    for fs in combos:
        t = SchematicTerm(tuple(fs))
        if not lo <= _term_signature(t) <= hi:
            continue
        if k is not None and anomaly_count(t) != k:
            continue
        out.append(t)
    return out


def partition_by_anomalies(c: Campaign, family: str) -> dict[int, list[SchematicTerm]]:
    out: dict[int, list[SchematicTerm]] = {}
    for t in enumerate_integrands(c, family):
        out.setdefault(anomaly_count(t), []).append(t)
    return dict(sorted(out.items()))


def minimal_widening(c: Campaign, family: str, k: int, limit: int = 20) -> Optional[HalfInt]:
    """Smallest widening of the signature range that makes the k-class non-empty."""
    for w in range(limit + 1):
        if enumerate_integrands(c, family, k, HalfInt(w)):
            return HalfInt(w)
    return None


# ----------------------------------------------------------------- certificates


def _check_enumeration_empty(cid, family, k):
    return not enumerate_integrands(campaign(cid), family, k)


def _check_k_terms_only(cid, family, k, pair):
    want = sorted(pair)
    for t in enumerate_integrands(campaign(cid), family, k):
        bad = sorted(f.to_ascii() for f in t.factors
                     if is_anomalous_curvature(f.name, tuple(f.derivs)))
        if bad != want:
            return False
    return True


def _check_dl_zero_column(vector, nu):
    return all(not dl_nonzero(vector, mu, nu) for mu in (1, 2, 3, 4))


def _check_index_signature_below(pattern, derivs, bound):
    """max over free slots (0) and horizontal slots ('a') of the index signature < bound."""
    choices = [(1, 2, 3, 4) if p == 0 else (1, 2) if p == "a" else (p,) for p in pattern]
    best = max(index_signature(idx, derivs) for idx in itertools.product(*choices))
    return best < HalfInt.of(F(bound))


def _check_signature_exceeds(indices, derivs, extra, limit):
    total = index_signature(indices, derivs) + HalfInt.of(F(extra))
    return HalfInt.of(F(limit)) < total


def _check_weyl_zero(slots, seed):
    rng = np.random.default_rng(seed)
    W = random_weyl(rng)
    idx = tuple(slice(None) if s == 0 else s - 1 for s in slots)
    return bool(np.all(W[idx] == 0))


def _check_closed_form_no_pair(a, b):
    for (h, n4, n3), syms in CLOSED_FORM_SYMBOLS.items():
        if n4 + n3 >= 2 and a in syms and b in syms:
            return False
    return True


def _only(block: str, rng) -> WeylComponents:
    z = WeylComponents.zero()
    full = WeylComponents.random(rng)
    return replace(z, **{block: getattr(full, block)})


def _check_cross_term_zero(a, b, seed, draws, tol):
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        q = q_cross_term(_only(a, rng), _only(b, rng))
        for idx in itertools.product((1, 2, 3, 4), repeat=4):
            if sum(i in (3, 4) for i in idx) >= 2 and abs(q[tuple(i - 1 for i in idx)]) > tol:
                return False
    return True


def _random_rational_pair(rng):
    def r():
        return F(int(rng.integers(-20, 21)), int(rng.integers(1, 12)))
    a, b = r(), r()
    A = np.array([[a, b], [b, -a]], dtype=object)
    B = np.array([[r(), r()], [r(), r()]], dtype=object)
    return A, B


def _check_j222_exact(seed, draws):
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        T, Tstar = j222_cancellation(*_random_rational_pair(rng))
        if T + Tstar != 0:
            return False
    return True


CHECKS: dict[str, Callable[..., bool]] = {
    "enumeration_empty": _check_enumeration_empty,
    "k_terms_only": _check_k_terms_only,
    "dl_zero_column": _check_dl_zero_column,
    "index_signature_below": _check_index_signature_below,
    "signature_exceeds": _check_signature_exceeds,
    "weyl_zero": _check_weyl_zero,
    "closed_form_no_pair": _check_closed_form_no_pair,
    "cross_term_zero": _check_cross_term_zero,
    "j222_exact": _check_j222_exact,
}


@dataclass(frozen=True)
class Step:
    claim: str
    check: str
    args: tuple

    def run(self) -> bool:
        return bool(CHECKS[self.check](*self.args))

    def to_dict(self) -> dict:
        return {"claim": self.claim, "check": self.check,
                "args": [a if isinstance(a, (int, str, float)) else str(a) for a in self.args]}


@dataclass(frozen=True)
class Certificate:
    reason: str  # exhaustion | structural | cancellation
    steps: tuple[Step, ...]

    def recheck(self) -> bool:
        return all(s.run() for s in self.steps)

    def to_dict(self) -> dict:
        return {"reason": self.reason, "steps": [s.to_dict() for s in self.steps]}


def _exhaustion(cid, family, k, what):
    return Certificate("exhaustion", (
        Step(f"no {family}-integrand with {k} anomalies fits the signature range ({what})",
             "enumeration_empty", (cid, family, k)),))


_CERTIFICATES: dict[tuple[str, str], Callable[[], Certificate]] = {
    ("nab4_alpha", "I_3"): lambda: _exhaustion("nab4_alpha", "I", 3, "no triple anomaly"),
    ("outgoing", "I_3"): lambda: _exhaustion("outgoing", "I", 3, "7 > 5"),
    ("outgoing", "K_2"): lambda: _exhaustion("outgoing", "K", 2, "6 > 5"),
    ("incoming", "I_3"): lambda: _exhaustion("incoming", "I", 3, "at least 4 > 3"),
    ("outgoing", "I_21"): lambda: Certificate("structural", (
        Step("X = Lb: R_{33..} vanishes by antisymmetry of the first pair",
             "weyl_zero", ((3, 3, 0, 0), 0)),
        Step("Z = Lb: R_{..33} vanishes by antisymmetry of the second pair",
             "weyl_zero", ((0, 0, 3, 3), 0)),
        Step("X = Z = L: sgn(D4 R_{4343}) + 2 sgn(alpha) = 6 exceeds 5",
             "signature_exceeds", ((4, 3, 4, 3), ("D4",), 4, 5)),
    )),
    ("outgoing", "J_2"): lambda: Certificate("structural", (
        Step("D^mu L^3 = 0 for every mu, so nu != 3 and alpha(D3 R) cannot occur",
             "dl_zero_column", ("L", 3)),
        Step("a second alpha(D4 R) would give signature at least 6 > 5",
             "signature_exceeds", ((4, 1, 4, 1), ("D4",), 3, 5)),
        Step("hence the second anomaly is beta(Dc R); but sgn(Dc R_{mu a 3 b}) <= 3/2 < 2",
             "index_signature_below", ((0, "a", 3, "a"), ("Dc",), 2)),
        Step("the D4 variant has sgn(D4 R_{mu a 3 b}) <= 2 < 3, not alpha(D4 R)",
             "index_signature_below", ((0, "a", 3, "a"), ("D4",), 3)),
    )),
    ("incoming", "K_2"): lambda: Certificate("structural", (
        Step("alpha(D3 R) alpha(D3 R) and alphab(D3 R) alphab(D3 R) are excluded by signature;"
             " only the mixed pair survives",
             "k_terms_only", ("incoming", "K", 2, ("alpha(D3 R)", "alphab(D3 R)"))),
        Step("no closed-form Q component with two null slots contains both alpha and alphab",
             "closed_form_no_pair", ("alpha", "alphab")),
        Step("polarized Q between alpha-only and alphab-only fields vanishes on those slots",
             "cross_term_zero", ("alpha", "alphab", 0, 3, 1e-10)),
    )),
    ("incoming", "J_222"): lambda: Certificate("cancellation", (
        Step("T + T* = 0 exactly for the paired Hodge-dual contractions",
             "j222_exact", (0, 50)),
    )),
}


def vanishing_labels(cid: str) -> list[str]:
    return [lbl for (c, lbl) in _CERTIFICATES if c == cid]


# ----------------------------------------------------------------- reports


@dataclass
class BoundReport:
    campaign: str
    term_label: str
    integrand: Optional[SchematicTerm]
    moves: tuple[Move, ...]
    delta_exponent: Optional[Fraction]
    status: str  # bounded | vanishes | cancels | unbounded | absorbed
    factor_tag: str = "const"
    correction: Optional[Fraction] = None
    bound: Bound = field(default_factory=Bound)
    certificate: Optional[Certificate] = None
    diagnostic: str = ""
    displayed: Optional[Fraction] = None
    discrepancy: str = ""
    auto_exponent: Optional[Fraction] = None
    kind: str = "leaf"  # leaf | group | final

    @property
    def paper_anchor(self) -> str:
        fam = self.term_label.split("_")[0]
        return f"{self.campaign}.{fam}.{self.term_label}"

    def recheck(self) -> bool:
        """Recompute the exponent from the move list (or the certificate)."""
        if self.certificate is not None:
            return self.certificate.recheck()
        if self.kind != "leaf":
            return True
        bound, status = evaluate_moves(self.moves)
        if status != self.status:
            return False
        return status != "bounded" or bound.delta_exponent == self.delta_exponent

    def to_dict(self) -> dict:
        d = {
            "campaign": self.campaign,
            "term_label": self.term_label,
            "integrand": self.integrand.to_ascii() if self.integrand else None,
            "moves": [m.to_dict() for m in self.moves],
            "delta_exponent": fraction_str(self.delta_exponent) if self.delta_exponent is not None else None,
            "factor_tag": self.factor_tag,
            "status": self.status,
            "paper_anchor": self.paper_anchor,
        }
        if self.correction is not None and self.correction != self.delta_exponent:
            d["correction"] = fraction_str(self.correction)
        if self.certificate is not None:
            d["certificate"] = self.certificate.to_dict()
        if self.diagnostic:
            d["diagnostic"] = self.diagnostic
        if self.discrepancy:
            d["discrepancy"] = self.discrepancy
        if self.auto_exponent is not None:
            d["auto_exponent"] = fraction_str(self.auto_exponent)
        return d


def vanishing_certificate(c: Campaign, label: str) -> BoundReport:
    key = (c.id, label)
    if key not in _CERTIFICATES:
        raise EngineError(f"no vanishing claim {label!r} in campaign {c.id}")
    cert = _CERTIFICATES[key]()
    ok = cert.recheck()
    if cert.reason == "cancellation":
        moves: tuple[Move, ...] = (Move("cancellation"),)
        status = "cancels" if ok else "unbounded"
    else:
        moves, status = (), "vanishes" if ok else "unbounded"
    return BoundReport(c.id, label, None, moves, None, status, certificate=cert,
                       diagnostic="" if ok else "certificate step failed")


# ----------------------------------------------------------------- auto strategy


def _gronwall_shape(t: SchematicTerm) -> bool:
    fs = t.factors
    return (len(fs) == 3 and fs[0].is_background
            and all(f.is_curvature and f.derivs and not is_anomalous_curvature(f.name, tuple(f.derivs))
                    for f in fs[1:]))


def _search_placement(t: SchematicTerm, domain: str) -> Optional[Placement]:
    best: Optional[tuple[Fraction, tuple[str, ...]]] = None
    names = ("L2", "L4", "Linf")
    src = t.to_ascii()
    for norms in itertools.product(names, repeat=len(t.factors)):
        pl = Placement(src, norms, domain)
        try:
            e = placement_bound(pl).delta_exponent
        except PlacementError:
            continue
        key = (e, tuple(norms))
        if best is None or e > best[0] or (e == best[0] and norms < best[1]):
            best = key
    return None if best is None else Placement(src, best[1], domain)


_MILD_SWAP = {("alpha", ("D3",)): "MILD_D3_alpha", ("alpha", ("nab3",)): "MILD_D3_alpha",
              ("beta", ("Dc",)): "COMP_Dc_beta"}


def _swap_variants(t: SchematicTerm) -> list[tuple[Move, SchematicTerm]]:
    out = []
    for i, f in enumerate(t.factors):
        key = (f.name, tuple(f.derivs))
        if key in _MILD_SWAP:
            fs = list(t.factors)
            fs[i] = Factor("alpha")
            out.append((Move("mild_anomaly_swap", _MILD_SWAP[key], value=QUARTER),
                        SchematicTerm(tuple(fs))))
    return out


def auto_moves(t: SchematicTerm, domain: str, depth: int = 3) -> tuple[tuple[Move, ...], str]:
    """Best move list found by placement search and mild-anomaly swaps."""
    if _gronwall_shape(t):
        return (Move("gronwall_absorb", "all"),), "absorbed"
    candidates: list[tuple[Move, ...]] = []
    frontier: list[tuple[tuple[Move, ...], SchematicTerm]] = [((), t)]
    for level in range(depth + 1):
        nxt = []
        for prefix, term in frontier:
            pl = _search_placement(term, domain)
            if pl is not None:
                candidates.append(prefix + (Move("holder_placement", placement=pl),))
            if level < depth:
                nxt.extend((prefix + (m,), t2) for m, t2 in _swap_variants(term))
        frontier = nxt
    if not candidates:
        return (), "unbounded"

    def score(ms):
        b, _ = evaluate_moves(ms)
        return b.delta_exponent

    best = max(candidates, key=lambda ms: (score(ms), [-len(ms)],
                                           [m.to_dict().get("placement", "") for m in ms]))
    return best, "bounded"


def bound_term(t: SchematicTerm, c: Campaign, strategy="auto", label: str = "") -> BoundReport:
    """Bound one integrand, either by search (``'auto'``) or by a scripted move list."""
    if isinstance(strategy, str):
        if strategy != "auto":
            raise EngineError(f"unknown strategy {strategy!r}")
        moves, status = auto_moves(t, c.domain)
        if status == "unbounded":
            return BoundReport(c.id, label or t.to_ascii(), t, (), None, "unbounded",
                               diagnostic="no admissible placement")
    else:
        moves = tuple(strategy)
        status = None
    bound, st = evaluate_moves(moves)
    status = st if status is None or status == "bounded" else status
    exp = F(0) if status == "absorbed" else bound.delta_exponent
    if status == "bounded" and exp is None:
        return BoundReport(c.id, label or t.to_ascii(), t, moves, None, "unbounded",
                           diagnostic="move list produced no bound")
    return BoundReport(c.id, label or t.to_ascii(), t, moves, exp, status,
                       factor_tag=bound.factor_tag, correction=bound.correction, bound=bound)


# ----------------------------------------------------------------- scripted plans


def H_(src, *norms, domain="H", boundary=False, refined=(), prefactor=None) -> Move:
    return Move("holder_placement", placement=Placement(src, tuple(norms), domain, boundary,
                                                        tuple(refined), prefactor))


def M(kind, detail="", value=None) -> Move:
    return Move(kind, detail, value=value)


@dataclass(frozen=True)
class Plan:
    label: str
    integrand: str
    moves: tuple[Move, ...] = ()
    displayed: Optional[Fraction] = None
    note: str = ""


def _plans_nab4_alpha() -> list[Plan]:
    return [
        Plan("I_A", "alpha(D4 R) * alpha * Psi_g",
             (H_("alpha(D4 R) * alpha * Psi_g", "L2", "L4", "L4"),)),
        Plan("I_B", "Psi_g(D4 R) * alpha * alpha",
             (H_("Psi_g(D4 R) * alpha * alpha", "L2", "L4", "L4"),)),
        Plan("K_A", "psi * alpha(D4 R) * alpha(D4 R)",
             (H_("psi * alpha(D4 R) * alpha(D4 R)", "Linf", "L2", "L2"),)),
        Plan("K_B", "psi * Psi_g(D4 R) * Psi(D4 R)",
             (H_("psi * Psi_g(D4 R) * Psi(D4 R)", "Linf", "L2", "L2"),)),
        Plan("J_A", "psi * Psi(D4 R) * Psi(D4 R)",
             (H_("psi * Psi(D4 R) * Psi(D4 R)", "Linf", "L2", "L2"),)),
        Plan("J_B", "psi * Psi(D4 R) * Psi(Dc R)",
             (H_("psi * Psi(D4 R) * Psi(Dc R)", "Linf", "L2", "L2"),)),
    ]


def _plans_nab3_alphab() -> list[Plan]:
    hb = dict(domain="Hb")
    return [
        Plan("I_A", "Psi(D3 R) * Psi_g * Psi_g",
             (H_("Psi(D3 R) * Psi_g * Psi_g", "L2", "L4", "L4", **hb),)),
        Plan("K_A", "trchib0 * alphab(D3 R) * Psi_g(D3 R)",
             (H_("trchib0 * alphab(D3 R) * Psi_g(D3 R)", "Linf", "L2", "L2", **hb),)),
        Plan("K_B", "psi * alphab(D3 R) * alphab(D3 R)",
             (H_("psi * alphab(D3 R) * alphab(D3 R)", "Linf", "L2", "L2", **hb),)),
        Plan("K_C", "psi * Psi_g(D3 R) * Psi(D3 R)",
             (H_("psi * Psi_g(D3 R) * Psi(D3 R)", "Linf", "L2", "L2", **hb),)),
        Plan("J_A", "psi * Psi(D3 R) * Psi(D3 R)",
             (H_("psi * Psi(D3 R) * Psi(D3 R)", "Linf", "L2", "L2", **hb),)),
        Plan("J_B", "psi * Psi(D3 R) * Psi(Dc R)",
             (H_("psi * Psi(D3 R) * Psi(Dc R)", "Linf", "L2", "L2", **hb),)),
    ]


def _plans_outgoing() -> list[Plan]:
    hb_bdry = dict(domain="Hb", boundary=True)
    sharp3 = ("curv_L2_sharp", "alpha_L4_sharp", "alpha_L4_sharp")
    return [
        Plan("I_0", "Psi_g(D4 R) * Psi_g * Psi_g",
             (H_("Psi_g(D4 R) * Psi_g * Psi_g", "L2", "L4", "L4"),)),
        Plan("I_11", "Psi_g(D4 R) * alpha * Psi_g",
             (H_("Psi_g(D4 R) * alpha * Psi_g", "L2", "L4", "L4"),)),
        Plan("I_121_bulk", "alpha(D4 R) * Psi_g * Psi_g",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              H_("nab4 Psi_g * alpha * Psi_g", "L2", "L4", "L4"))),
        Plan("I_121_bdry", "alpha(D4 R) * Psi_g * Psi_g",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              H_("Psi_g * alpha * Psi_g", "L2", "L4", "L4", **hb_bdry))),
        Plan("I_122", "psi_g * Psi * Psi_g * Psi_g",
             (H_("psi_g * Psi * Psi_g * Psi_g", "Linf", "L2", "L4", "L4"),)),
        Plan("I_22_bulk", "alpha(D4 R) * alpha * alphab",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              M("bianchi_sub", "NBE_L_alphab", QUARTER), M("ibp_horizontal"),
              H_("nab alpha * alpha * betab", "L2", "L4", "L4"))),
        Plan("I_22_bdry", "alpha(D4 R) * alpha * alphab",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              H_("alphab * alpha * alpha", "L2", "L4", "L4", refined=sharp3, **hb_bdry))),
        Plan("K_01", "psi * Psi_g(D4 R) * Psi_g(D4 R)",
             (H_("psi * Psi_g(D4 R) * Psi_g(D4 R)", "Linf", "L2", "L2"),)),
        Plan("K_02", "trchib0 * Psi_g(D4 R) * Psi_g(D4 R)",
             (H_("trchib0 * Psi_g(D4 R) * Psi_g(D4 R)", "Linf", "L2", "L2"),
              M("gronwall_absorb", "all"))),
        Plan("K_1111", "chibh * alpha(D4 R) * rho(D4 R)",
             (M("comparison_swap", "COMP_D4"), M("bianchi_sub", "NBE_L_rho", QUARTER),
              M("ibp_null", "e4"), M("structure_sub", "NSE_L_chibh", QUARTER),
              M("ibp_horizontal"),
              H_("chih * nab alpha * beta", "Linf", "L2", "L2"),
              H_("nab chih * alpha * beta", "L4", "L4", "L2"))),
        Plan("K_1112", "chibh * alpha(D4 R) * rho(D4 R)",
             (M("comparison_swap", "COMP_D4"), M("bianchi_sub", "NBE_L_rho", QUARTER),
              M("ibp_null", "e4"), M("commutator", "COMM_4_beta", QUARTER),
              M("ibp_horizontal"),
              H_("nab chibh * alpha * nab4 beta", "L4", "L4", "L2"),
              H_("chibh * nab alpha * nab4 beta", "Linf", "L2", "L2"))),
        Plan("K_1113", "chibh * alpha(D4 R) * rho(D4 R)",
             (M("comparison_swap", "COMP_D4"), M("bianchi_sub", "NBE_L_rho", QUARTER),
              M("ibp_null", "e4"),
              H_("chibh * alpha * nab beta", "L4", "L4", "L2",
                 refined=("shear_L4_coarse", "alpha_L4_sharp", "curv_R"), **hb_bdry),
              M("weaken", "", QUARTER))),
        Plan("K_1121", "chibh * alpha(D4 R) * rho(D4 R)",
             (M("comparison_swap", "COMP_D4"), M("bianchi_sub", "NBE_L_rho", QUARTER),
              M("ibp_null", "e4"), M("structure_sub", "NSE_L_chibh", QUARTER),
              H_("chih * alpha * chibh * alpha", "L4", "L4", "L4", "L4", prefactor=F(3, 2)),
              M("weaken", "", QUARTER)),
             note="displayed prefactor delta^(3/2) for a quartic term; the signature rule "
                  "gives delta^1 and exponent 0"),
        Plan("K_1122", "chibh * alpha(D4 R) * rho(D4 R)",
             (M("comparison_swap", "COMP_D4"), M("bianchi_sub", "NBE_L_rho", QUARTER),
              M("ibp_null", "e4"),
              H_("chibh * chibh * alpha * alpha", "L4", "L4", "L4", "L4", prefactor=F(3, 2),
                 **hb_bdry),
              M("weaken", "", QUARTER)),
             note="displayed prefactor delta^(3/2) for a quartic term; the signature rule "
                  "gives delta^1 and exponent 0"),
        Plan("K_12", "psi_g * alpha(D4 R) * Psi_g(D4 R)",
             (M("comparison_swap", "COMP_D4"), M("bianchi_sub", "NBE_L_rho", QUARTER),
              M("ibp_null", "e4"),
              H_("nab4 psi_g * alpha * nab beta", "L4", "L4", "L2"),
              H_("psi_g * alpha * nab4 nab beta", "L4", "L4", "L2"),
              H_("psi_g * alpha * nab beta", "L4", "L4", "L2", **hb_bdry))),
        Plan("J_0", "psi * Psi_g(D4 R) * Psi_g(Dc R)",
             (H_("psi * Psi_g(D4 R) * Psi_g(Dc R)", "Linf", "L2", "L2"),)),
        Plan("J_1111", "chih * alpha(D4 R) * betab(Dc R)",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              M("structure_sub", "NSE_L_chi", QUARTER), M("ibp_horizontal"),
              H_("nab alpha * alpha * betab", "L2", "L4", "L4"))),
        Plan("J_1112", "chih * alpha(D4 R) * betab(Dc R)",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              M("commutator", "COMM_4_beta", QUARTER), M("ibp_horizontal"),
              H_("nab chih * alpha * nab4 betab", "L4", "L4", "L2"),
              H_("chih * nab alpha * nab4 betab", "Linf", "L2", "L2"))),
        Plan("J_1113", "chih * alpha(D4 R) * betab(Dc R)",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              H_("chih * alpha * nab betab", "L4", "L4", "L2",
                 refined=("shear_L4_coarse", "alpha_L4_sharp", "curv_R"), **hb_bdry),
              M("weaken", "", QUARTER))),
        Plan("J_112", "psi_g * alpha(D4 R) * Psi_g(Dc R)",
             (M("comparison_swap", "COMP_D4"), M("ibp_null", "e4"),
              H_("nab4 psi_g * alpha * nab Psi_g", "L4", "L4", "L2"),
              H_("psi_g * alpha * nab4 nab Psi_g", "L4", "L4", "L2"),
              H_("psi_g * alpha * nab Psi_g", "L4", "L4", "L2", **hb_bdry)),
             displayed=HALF,
             note="displayed as delta^(1/2) by analogy with K_12, which certifies delta^(1/4)"),
        Plan("J_12", "psi * Psi_g(D4 R) * beta(Dc R)",
             (M("mild_anomaly_swap", "COMP_Dc_beta", QUARTER),
              H_("nab Psi * psi_g * alpha", "L2", "L4", "L4"),
              M("ibp_horizontal"),
              H_("nab psi * alpha * Psi_g", "L2", "L4", "L4"),
              H_("psi * nab alpha * Psi_g", "Linf", "L2", "L2"))),
    ]


def _plans_incoming() -> list[Plan]:
    hb = dict(domain="Hb")
    h_bdry = dict(domain="H", boundary=True)
    return [
        Plan("I_0", "Psi_g(D3 R) * Psi_g * Psi_g",
             (H_("Psi_g(D3 R) * Psi_g * Psi_g", "L2", "L4", "L4", **hb),)),
        Plan("I_11", "Psi_g(D3 R) * alpha * Psi_g",
             (H_("Psi_g(D3 R) * alpha * Psi_g", "L2", "L4", "L4", **hb),)),
        Plan("I_12", "alpha(D3 R) * Psi_g * Psi_g",
             (M("mild_anomaly_swap", "MILD_D3_alpha", QUARTER),
              H_("alpha * Psi_g * Psi_g", "L4", "L2", "L4", **hb))),
        Plan("I_13", "alphab(D3 R) * Psi_g * Psi_g",
             (M("comparison_swap", "COMP_D3", QUARTER), M("ibp_null", "e3"),
              H_("alphab * nab3 Psi_g * Psi_g", "L4", "L2", "L4"),
              H_("alphab * Psi_g * Psi_g", "L2", "L4", "L4", **h_bdry))),
        Plan("I_21", "alphab(D3 R) * alpha * alphab",
             (M("comparison_swap", "COMP_D3", QUARTER), M("ibp_null", "e3"),
              M("mild_anomaly_swap", "MILD_D3_alpha", QUARTER),
              H_("alphab * alphab * alpha", "L2", "L4", "L4", **hb),
              H_("alphab * alphab * alpha", "L2", "L4", "L4", **h_bdry))),
        Plan("I_22", "alphab(D3 R) * alpha * rho",
             (M("comparison_swap", "COMP_D3", QUARTER), M("ibp_null", "e3"),
              M("mild_anomaly_swap", "MILD_D3_alpha", QUARTER),
              H_("alphab * rho * alpha", "L2", "L4", "L4", **hb),
              H_("alphab * nab3 rho * alpha", "L4", "L2", "L4", **hb),
              H_("alphab * rho * alpha", "L2", "L4", "L4", **h_bdry))),
        Plan("K_01", "psi * Psi_g(D3 R) * Psi_g(D3 R)",
             (H_("psi * Psi_g(D3 R) * Psi_g(D3 R)", "Linf", "L2", "L2"),)),
        Plan("K_02", "trchib0 * Psi_g(D3 R) * Psi_g(D3 R)",
             (H_("trchib0 * Psi_g(D3 R) * Psi_g(D3 R)", "Linf", "L2", "L2"),
              M("gronwall_absorb", "all"))),
        Plan("K_11", "psi * alpha(D3 R) * Psi_g(D3 R)",
             (M("mild_anomaly_swap", "MILD_D3_alpha", QUARTER),
              M("bianchi_sub", "NBE_Lb_rho", QUARTER), M("ibp_horizontal"),
              H_("nab psi * alpha * Psi_g", "L2", "L4", "L4"),
              H_("psi * nab alpha * Psi_g", "Linf", "L2", "L2"))),
        Plan("K_1211", "chih * alphab(D3 R) * rho(D3 R)",
             (M("comparison_swap", "COMP_D3", QUARTER), M("bianchi_sub", "NBE_Lb_rho", QUARTER),
              M("ibp_null", "e3"), M("structure_sub", "NSE_Lb_chih", QUARTER),
              H_("trchib0 * chih * alphab * nab betab", "Linf", "Linf", "L2", "L2"),
              H_("nab eta * alphab * nab betab", "L4", "L4", "L2"))),
        Plan("K_1212", "chih * alphab(D3 R) * rho(D3 R)",
             (M("comparison_swap", "COMP_D3", QUARTER), M("bianchi_sub", "NBE_Lb_rho", QUARTER),
              M("ibp_null", "e3"), M("commutator", "COMM_3_betab", QUARTER),
              M("ibp_horizontal"),
              H_("nab chih * alphab * nab3 betab", "L4", "L4", "L2"),
              H_("chih * nab alphab * nab3 betab", "Linf", "L2", "L2"))),
        Plan("K_1213", "chih * alphab(D3 R) * rho(D3 R)",
             (M("comparison_swap", "COMP_D3", QUARTER), M("bianchi_sub", "NBE_Lb_rho", QUARTER),
              M("ibp_null", "e3"),
              H_("chih * alphab * nab betab", "Linf", "L2", "L2", **h_bdry))),
        Plan("K_122", "psi * alphab(D3 R) * Psi_g(D3 R)",
             (M("comparison_swap", "COMP_D3", QUARTER), M("bianchi_sub", "NBE_Lb_rho", QUARTER),
              M("ibp_null", "e3"),
              H_("nab3 psi_g * alphab * nab betab", "L4", "L4", "L2"),
              H_("psi_g * nab alphab * nab3 betab", "Linf", "L2", "L2"),
              H_("psi_g * alphab * nab betab", "Linf", "L2", "L2", **h_bdry))),
        Plan("J_01", "psi * Psi_g(D3 R) * Psi_g(Dc R)",
             (H_("psi * Psi_g(D3 R) * Psi_g(Dc R)", "Linf", "L2", "L2"),)),
        Plan("J_02", "trchib0 * Psi_g(D3 R) * Psi_g(Dc R)",
             (H_("trchib0 * Psi_g(D3 R) * Psi_g(Dc R)", "Linf", "L2", "L2"),
              M("gronwall_absorb", "all"))),
        Plan("J_11", "trchib0 * alpha(D3 R) * Psi_g(Dc R)",
             (M("mild_anomaly_swap", "MILD_D3_alpha", QUARTER),
              M("bianchi_sub", "NBE_Lb_beta", QUARTER), M("ibp_horizontal"),
              H_("trchib0 * nab alpha * Psi_g", "Linf", "L2", "L2",
                 refined=(None, "curv_R", "curv_L2_sharp")))),
        Plan("J_12", "psi_g * alphab(D3 R) * Psi_g(D3 R)",
             (M("comparison_swap", "COMP_D3", QUARTER), M("ibp_null", "e3"),
              H_("nab3 psi_g * alphab * nab betab", "L4", "L4", "L2"),
              H_("psi_g * nab alphab * nab3 betab", "Linf", "L2", "L2"),
              H_("psi_g * alphab * nab betab", "Linf", "L2", "L2", **h_bdry))),
        Plan("J_13a", "psi_g * Psi_g(D3 R) * alphab(D3 R)",
             (M("comparison_swap", "COMP_D3", QUARTER), M("ibp_null", "e3"),
              H_("nab Psi_g * nab3 psi_g * alphab", "L2", "L4", "L4"),
              H_("nab Psi_g * psi_g * alphab", "L2", "Linf", "L2", **h_bdry))),
        Plan("J_13b", "trchib0 * Psi_g(D3 R) * beta(Dc R)",
             (M("mild_anomaly_swap", "COMP_Dc_beta", QUARTER), M("ibp_horizontal"),
              H_("trchib0 * nab alpha * Psi_g", "Linf", "L2", "L2",
                 refined=(None, "curv_R", "curv_L2_sharp")))),
        Plan("J_211", "omega * alpha(D3 R) * alphab(D3 R)",
             (M("ibp_null", "e3"), M("structure_sub", "NSE_Lb_omega", QUARTER),
              H_("rho * nab4 alpha * alphab", "L4", "L2", "L4",
                 refined=("curv_L4_sharp", "nab4alpha_L2", "curv_L4_sharp")),
              M("gronwall_absorb", "c"))),
        Plan("J_212", "omega * alpha(D3 R) * alphab(D3 R)",
             (M("ibp_null", "e3"),
              H_("omega * alphab * nab4 alpha", "L4", "L4", "L2",
                 refined=("omega_L4_sharp", "curv_L4_sharp", "nab4alpha_L2"), **h_bdry))),
        Plan("J_213", "omega * alpha(D3 R) * alphab(D3 R)",
             (M("ibp_null", "e4"), M("bianchi_sub", "NBE_Lb_alpha", QUARTER),
              H_("nab4 omega * alphab * alpha", "L2", "L4", "L4"),
              M("ibp_null", "e4"), M("commutator", "COMM_4_beta", QUARTER),
              M("ibp_horizontal"),
              H_("nab omega * alphab * nab4 beta", "L4", "L4", "L2"),
              H_("omega * nab alphab * nab4 beta", "Linf", "L2", "L2"))),
        Plan("J_2211", "chibh * alphab(D3 R) * beta(Dc R)",
             (M("comparison_swap", "COMP_Dc_beta", QUARTER), M("ibp_null", "e3"),
              M("structure_sub", "NSE_Lb_chib", QUARTER),
              H_("alphab * alphab * nab beta", "L4", "L4", "L2"),
              H_("chibh * alphab * nab3 nab beta", "Linf", "L2", "L2"),
              H_("chibh * alphab * nab beta", "Linf", "L2", "L2", **h_bdry))),
        Plan("J_2212", "chibh * alphab(D3 R) * beta(Dc R)",
             (M("comparison_swap", "COMP_Dc_beta", QUARTER), M("ibp_null", "e3"),
              M("structure_sub", "NSE_Lb_chib", QUARTER),
              M("mild_anomaly_swap", "MILD_D3_alpha", QUARTER),
              H_("chibh * alphab * alpha", "L4", "L2", "L4",
                 refined=("chibh_L4_sharp", "curv_L2_sharp", "alpha_L4_incoming"), **h_bdry),
              M("weaken", "", F(1, 16)))),
    ]


_PLANS: dict[str, Callable[[], list[Plan]]] = {
    "nab4_alpha": _plans_nab4_alpha,
    "nab3_alphab": _plans_nab3_alphab,
    "outgoing": _plans_outgoing,
    "incoming": _plans_incoming,
}

# How the family bounds become the final estimate: Young plus a square root
# for the anomalous campaigns, a square root of the energy for incoming.
_FINAL = {"nab4_alpha": "young_sqrt", "nab3_alphab": "young_sqrt",
          "outgoing": "combine", "incoming": "sqrt_energy"}

# Group labels reported for each campaign (leaves and certificates are added).
_GROUPS = {
    "nab4_alpha": ("I", "J", "K"),
    "nab3_alphab": ("I", "J", "K"),
    "outgoing": ("I_1", "I_12", "I_2", "I_22", "I", "K_0", "K_111", "K_112", "K_11", "K_1",
                 "K", "J_111", "J_11", "J_1", "J", ),
    "incoming": ("I_1", "I_2", "I", "K_0", "K_121", "K_12", "K_1", "K", "J_0", "J_13", "J_1",
                 "J_21", "J_221", "J_22", "J_2", "J"),
}


def plans(cid: str) -> list[Plan]:
    campaign(cid)
    return _PLANS[cid]()


def _group_member(label: str, group: str) -> bool:
    if label == group:
        return False
    return label.startswith(group if "_" in group else group + "_")


def _final_bound(kind: str, total: Bound) -> tuple[Bound, str]:
    worst = total.delta_exponent
    if kind == "young_sqrt":
        # E^2 <~ delta^-1 c + C delta^e  ==>  E <~ delta^-1/2 c + C delta^((e+1)/2)
        return Bound((Piece(-HALF, "c"), Piece((worst + 1) / 2))), "Young's inequality, square root"
    if kind == "sqrt_energy":
        return Bound(tuple(Piece(p.exponent / 2, p.coeff, p.r_power / 2) for p in total.pieces)), \
            "square root of the energy"
    return total, "sum of the family bounds"


@dataclass
class ReplayResult:
    campaign: str
    strategy: str
    reports: list[BoundReport]
    mismatches: list[str]

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def report(self, label: str) -> BoundReport:
        for r in self.reports:
            if r.term_label == label:
                return r
        raise EngineError(f"no report for {label!r}")

    def summary(self) -> dict:
        fams = {}
        for f in FAMILIES + ("final",):
            try:
                r = self.report(f)
            except EngineError:
                continue
            fams[f] = {"delta_exponent": fraction_str(r.delta_exponent)
                       if r.delta_exponent is not None else None,
                       "factor_tag": r.factor_tag}
            if r.kind == "final" and r.correction not in (None, r.delta_exponent):
                fams[f]["correction"] = fraction_str(r.correction)
        return fams

    def to_dict(self) -> dict:
        return {"campaign": self.campaign, "strategy": self.strategy, "passed": self.passed,
                "summary": self.summary(), "mismatches": self.mismatches,
                "reports": [r.to_dict() for r in self.reports]}

    def table(self) -> str:
        lines = [f"campaign {self.campaign} ({self.strategy})",
                 f"{'label':12s} {'status':9s} {'delta':>6s} {'tag':9s} integrand"]
        for r in self.reports:
            e = fraction_str(r.delta_exponent) if r.delta_exponent is not None else "-"
            extra = ""
            if r.kind == "final" and r.correction not in (None, r.delta_exponent):
                extra = f" (+C d^{fraction_str(r.correction)})"
            if r.discrepancy:
                extra += f"  [{r.discrepancy}]"
            integrand = r.integrand.to_ascii() if r.integrand else ""
            lines.append(f"{r.term_label:12s} {r.status:9s} {e:>6s} {r.factor_tag:9s} "
                         f"{integrand}{extra}")
        lines.append("result: " + ("pass" if self.passed else "FAIL " + "; ".join(self.mismatches)))
        return "\n".join(lines)


def _auto_variant(moves: tuple[Move, ...]) -> tuple[Move, ...]:
    """Replace every scripted placement by the best searched one (no refinements)."""
    out = []
    for m in moves:
        if m.kind == "holder_placement":
            p = m.placement
            found = _search_placement(p.term, p.domain)
            if found is not None:
                out.append(Move("holder_placement",
                                placement=replace(found, boundary=p.boundary)))
            continue
        out.append(m)
    return tuple(out)


def replay(c: Campaign, strategy: str = "scripted") -> ReplayResult:
    """Bound every labelled term, aggregate families and check the targets."""
    if strategy not in ("scripted", "auto"):
        raise EngineError(f"unknown strategy {strategy!r}")
    leaves: list[BoundReport] = []
    for plan in plans(c.id):
        moves = plan.moves if strategy == "scripted" else _auto_variant(plan.moves)
        rep = bound_term(parse_term(plan.integrand), c, moves, plan.label)
        auto = bound_term(parse_term(plan.integrand), c, _auto_variant(plan.moves), plan.label)
        if auto.delta_exponent != rep.delta_exponent:
            rep.auto_exponent = auto.delta_exponent
        rep.displayed = plan.displayed
        notes = []
        if plan.displayed is not None and plan.displayed != rep.delta_exponent:
            notes.append(f"displayed d^{fraction_str(plan.displayed)}, "
                         f"certified d^{fraction_str(rep.delta_exponent)}")
        if plan.note and strategy == "scripted":
            notes.append(plan.note)
        rep.discrepancy = "; ".join(notes)
        leaves.append(rep)
    for label in vanishing_labels(c.id):
        leaves.append(vanishing_certificate(c, label))

    reports = list(leaves)
    for g in _GROUPS[c.id]:
        members = [r for r in leaves if _group_member(r.term_label, g)]
        bound = Bound(tuple(p for r in members if r.status == "bounded" for p in r.bound.pieces))
        if bound.pieces:
            status, exp = "bounded", bound.delta_exponent
        elif members and all(r.status in ("vanishes", "cancels", "absorbed") for r in members):
            status, exp = ("cancels" if any(r.status == "cancels" for r in members) else "vanishes"), None
        else:
            status, exp = "unbounded", None
        reports.append(BoundReport(c.id, g, None, (), exp, status, factor_tag=bound.factor_tag,
                                   correction=bound.correction, bound=bound, kind="group"))
    total = Bound(tuple(p for f in FAMILIES for r in reports
                        if r.term_label == f for p in r.bound.pieces))
    fb, how = _final_bound(_FINAL[c.id], total)
    reports.append(BoundReport(c.id, "final", None, (), fb.delta_exponent, "bounded",
                               factor_tag=fb.factor_tag, correction=fb.correction, bound=fb,
                               kind="final", diagnostic=how))

    mismatches = []
    if strategy == "scripted":
        by_label = {r.term_label: r for r in reports}
        for label, (exp, tag) in c.expected_bounds.items():
            r = by_label.get(label)
            if r is None:
                mismatches.append(f"{label}: missing")
            elif r.delta_exponent != exp or r.factor_tag != tag:
                got = fraction_str(r.delta_exponent) if r.delta_exponent is not None else "-"
                mismatches.append(f"{label}: got d^{got} {r.factor_tag}, "
                                  f"expected d^{fraction_str(exp)} {tag}")
        for r in reports:
            if r.status == "unbounded":
                mismatches.append(f"{r.term_label}: {r.diagnostic or 'unbounded'}")
            elif not r.recheck():
                mismatches.append(f"{r.term_label}: certificate re-check failed")
    else:
        mismatches = [f"{r.term_label}: unbounded" for r in reports if r.status == "unbounded"]
    return ReplayResult(c.id, strategy, reports, mismatches)


def replay_all(strategy: str = "scripted") -> list[ReplayResult]:
    return [replay(campaign(cid), strategy) for cid in CAMPAIGNS]
