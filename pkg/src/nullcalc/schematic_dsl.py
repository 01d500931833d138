"""Parser, AST and printers for schematic terms and norm expressions.

Grammar (ASCII surface syntax)::

    term       := factor { "*" factor }
    factor     := { deriv } name [ "(" Dderiv { Dderiv } "R" ")" ] [ annotation ]
    deriv      := "nab4" | "nab3" | "nab" | "D4" | "D3" | "Dc"
    annotation := "^{(" halfint ")}"
    norm       := "||" term "||_{L" ("2" | "4" | "inf") ["sc"] "(" ("S"|"H"|"Hb") ")}"

``Psi(D4 R)`` and ``D4 Psi`` denote the same factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .sig_scale import (
    BACKGROUND,
    CURVATURE,
    CURVATURE_DERIVS,
    DERIV_SIGNATURE,
    KINDS,
    WILDCARD_UNICODE,
    WILDCARDS,
    HalfInt,
    NormSpec,
    SigScaleError,
    factor_signatures,
)

DERIV_ORDER = ("nab4", "nab3", "nab", "D4", "D3", "Dc")
NAMES = tuple(KINDS) + tuple(WILDCARDS)
_UNI_DERIV = {"nab4": "∇₄", "nab3": "∇₃", "nab": "∇", "D4": "D₄", "D3": "D₃", "Dc": "D_c"}


class ParseError(ValueError):
    """Syntax or semantic error with a byte offset and the expected tokens."""

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        super().__init__(message)
        self.message = message
        self.offset = offset
        self.expected = frozenset(expected)

    def render(self) -> str:
        exp = ",".join(sorted(self.expected)) if self.expected else "-"
        return f"{self.offset}:{exp}: {self.message}"

    def as_dict(self) -> dict:
        return {"offset": self.offset, "expected": sorted(self.expected), "message": self.message}


def _is_curvature_like(name: str) -> bool:
    if name in ("Psi", "Psi_g"):
        return True
    return name in KINDS and KINDS[name].cls == CURVATURE


@dataclass(frozen=True)
class Factor:
    name: str
    derivs: tuple[str, ...] = ()
    annotation: Optional[HalfInt] = None

    def __post_init__(self) -> None:
        derivs = tuple(sorted(self.derivs, key=DERIV_ORDER.index))
        object.__setattr__(self, "derivs", derivs)
        if self.annotation is not None:
            object.__setattr__(self, "annotation", HalfInt.of(self.annotation))

    @property
    def is_wildcard(self) -> bool:
        return self.name in WILDCARDS

    @property
    def is_background(self) -> bool:
        return self.name in KINDS and KINDS[self.name].cls == BACKGROUND

    @property
    def is_curvature(self) -> bool:
        return _is_curvature_like(self.name)

    def with_derivs(self, derivs) -> "Factor":
        return Factor(self.name, tuple(derivs), None)

    def bare(self) -> "Factor":
        return Factor(self.name, self.derivs, None)

    def to_ascii(self) -> str:
        pre = [d for d in self.derivs if d not in CURVATURE_DERIVS]
        post = [d for d in self.derivs if d in CURVATURE_DERIVS]
        s = " ".join(pre + [self.name])
        if post:
            s += "(" + " ".join(post) + " R)"
        if self.annotation is not None:
            s += "^{(" + str(self.annotation) + ")}"
        return s

    def to_unicode(self) -> str:
        pre = [_UNI_DERIV[d] for d in self.derivs if d not in CURVATURE_DERIVS]
        post = [_UNI_DERIV[d] for d in self.derivs if d in CURVATURE_DERIVS]
        base = WILDCARD_UNICODE.get(self.name) or KINDS[self.name].unicode
        s = "".join(pre) + base
        if post:
            s += "(" + "".join(post) + "R)"
        if self.annotation is not None:
            s += "^(" + str(self.annotation) + ")"
        return s


@dataclass(frozen=True)
class SchematicTerm:
    factors: tuple[Factor, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("a schematic term needs at least one factor")

    def to_ascii(self) -> str:
        return " * ".join(f.to_ascii() for f in self.factors)

    def to_unicode(self) -> str:
        return "·".join(f.to_unicode() for f in self.factors)

    def __str__(self) -> str:
        return self.to_ascii()

    def bare(self) -> "SchematicTerm":
        return SchematicTerm(tuple(f.bare() for f in self.factors))


@dataclass(frozen=True)
class NormExpr:
    term: SchematicTerm
    spec: NormSpec

    def to_ascii(self) -> str:
        return f"||{self.term.to_ascii()}||_{{{self.spec.label}}}"


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    # Offsets are reported in UTF-8 bytes.
    def offset(self, pos: Optional[int] = None) -> int:
        return len(self.src[: self.pos if pos is None else pos].encode("utf-8", "surrogatepass"))

    def error(self, msg: str, expected=(), pos: Optional[int] = None) -> ParseError:
        return ParseError(msg, self.offset(pos), frozenset(expected))

    def ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.ws()
        return self.src.startswith(s, self.pos)

    def expect(self, s: str) -> None:
        if not self.peek(s):
            raise self.error(f"expected {s!r}", {s})
        self.pos += len(s)

    def ident(self, expected) -> tuple[str, int]:
        self.ws()
        start = self.pos
        while self.pos < len(self.src) and (self.src[self.pos].isascii()
                                            and (self.src[self.pos].isalnum() or self.src[self.pos] == "_")):
            self.pos += 1
        if start == self.pos:
            raise self.error("expected a name", expected)
        return self.src[start:self.pos], start

    def at_end(self) -> bool:
        self.ws()
        return self.pos >= len(self.src)

    # term := factor { "*" factor }
    def term(self) -> SchematicTerm:
        factors = [self.factor()]
        while self.peek("*"):
            self.pos += 1
            factors.append(self.factor())
        return SchematicTerm(tuple(factors))

    def factor(self) -> Factor:
        derivs: list[str] = []
        self.ws()
        factor_start = self.pos
        while True:
            word, start = self.ident(set(DERIV_ORDER) | set(NAMES))
            if word in DERIV_ORDER:
                derivs.append(word)
                continue
            if word not in NAMES:
                raise ParseError(f"unknown component at offset {self.offset(start)}: {word!r}",
                                 self.offset(start), frozenset(NAMES))
            break
        name = word
        if self.peek("("):
            self.pos += 1
            count = 0
            while True:
                w, s = self.ident(set(CURVATURE_DERIVS) | {"R"})
                if w == "R" and count:
                    break
                if w not in CURVATURE_DERIVS:
                    raise self.error(f"expected a curvature derivative, got {w!r}",
                                     set(CURVATURE_DERIVS) | ({"R"} if count else set()), s)
                derivs.append(w)
                count += 1
            self.expect(")")
        annotation = None
        ann_pos = None
        if self.peek("^"):
            ann_pos = self.pos
            self.pos += 1
            self.expect("{")
            self.expect("(")
            annotation = self.halfint()
            self.expect(")")
            self.expect("}")
        f = Factor(name, tuple(derivs), None)
        self.check_factor(f, factor_start)
        if annotation is not None:
            try:
                allowed = factor_signatures(f)
            except SigScaleError as exc:
                raise self.error(str(exc), (), ann_pos) from None
            if annotation not in allowed:
                opts = ",".join(sorted(str(a) for a in allowed))
                raise self.error(f"inconsistent signature annotation {annotation} for "
                                 f"{f.to_ascii()} (possible: {opts})", (), ann_pos)
            f = Factor(name, tuple(derivs), annotation)
        return f

    def check_factor(self, f: Factor, start: int) -> None:
        dd = [d for d in f.derivs if d in CURVATURE_DERIVS]
        if f.is_background and f.derivs:
            raise self.error("the background constant trchib0 takes no derivatives", (), start)
        if dd and not f.is_curvature:
            raise self.error(f"curvature derivative {dd[0]} applied to non-curvature {f.name!r}",
                             (), start)

    def halfint(self) -> HalfInt:
        self.ws()
        start = self.pos
        if self.src.startswith("-", self.pos):
            self.pos += 1
        digits = self.pos
        while self.pos < len(self.src) and self.src[self.pos] in "0123456789":
            self.pos += 1
        if digits == self.pos:
            raise self.error("expected a number", {"<number>"})
        if self.src.startswith("/", self.pos):
            self.pos += 1
            d0 = self.pos
            while self.pos < len(self.src) and self.src[self.pos] in "0123456789":
                self.pos += 1
            if d0 == self.pos:
                raise self.error("expected a denominator", {"<number>"})
        text = self.src[start:self.pos]
        try:
            return HalfInt.of(Fraction(text))
        except (SigScaleError, ZeroDivisionError, ValueError):
            raise self.error(f"annotation {text!r} is not a half-integer", (), start) from None

    def norm(self) -> NormExpr:
        self.expect("||")
        t = self.term()
        self.expect("||")
        self.expect("_")
        self.expect("{")
        self.expect("L")
        p = None
        p_pos = self.pos
        for tok, val in (("inf", float("inf")), ("2", 2), ("4", 4)):
            if self.src.startswith(tok, self.pos):
                p, self.pos = val, self.pos + len(tok)
                break
        if p is None:
            raise self.error("unsupported p: expected one of 2, 4, inf", {"2", "4", "inf"}, p_pos)
        sc = False
        if self.src.startswith("sc", self.pos):
            sc, self.pos = True, self.pos + 2
        self.expect("(")
        dom = None
        for tok in ("Hb", "H", "S"):
            if self.src.startswith(tok, self.pos):
                dom, self.pos = tok, self.pos + len(tok)
                break
        if dom is None:
            raise self.error("expected a domain", {"S", "H", "Hb"})
        self.expect(")")
        self.expect("}")
        return NormExpr(t, NormSpec(p, dom, scale_invariant=sc))


def _run(src, fn):
    if not isinstance(src, str):
        raise ParseError("input must be text", 0)
    p = _Parser(src)
    if p.at_end():
        raise ParseError("empty input", p.offset(), frozenset(set(DERIV_ORDER) | set(NAMES)))
    try:
        out = fn(p)
    except ParseError:
        raise
    except (SigScaleError, ValueError) as exc:
        raise p.error(str(exc)) from None
    if not p.at_end():
        raise p.error(f"unexpected trailing input {p.src[p.pos:p.pos + 10]!r}", {"*"})
    return out


def parse_term(src: str) -> SchematicTerm:
    return _run(src, lambda p: p.term())


def parse_factor(src: str) -> Factor:
    t = parse_term(src)
    if len(t.factors) != 1:
        raise ParseError("expected a single factor", 0)
    return t.factors[0]


def parse_norm(src: str) -> NormExpr:
    return _run(src, lambda p: p.norm())


def print_term(t: SchematicTerm, unicode: bool = False) -> str:
    return t.to_unicode() if unicode else t.to_ascii()


def deriv_signature_table() -> dict[str, str]:
    return {d: str(v) for d, v in DERIV_SIGNATURE.items()}


def random_factor(rng) -> Factor:
    """Draw a well-formed factor; ``rng`` is a numpy Generator."""
    name = NAMES[int(rng.integers(len(NAMES)))]
    f = Factor(name)
    if f.is_background:
        return f
    pool = DERIV_ORDER if f.is_curvature else ("nab4", "nab3", "nab")
    n = int(rng.integers(0, 4))
    derivs = tuple(pool[int(i)] for i in rng.integers(0, len(pool), size=n))
    f = Factor(name, derivs)
    if rng.random() < 0.3:
        options = sorted(factor_signatures(f))
        f = Factor(name, derivs, options[int(rng.integers(len(options)))])
    return f


def random_term(rng, max_factors: int = 4) -> SchematicTerm:
    n = int(rng.integers(1, max_factors + 1))
    return SchematicTerm(tuple(random_factor(rng) for _ in range(n)))
