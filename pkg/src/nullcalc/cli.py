"""Command-line front end: identity checks, classification, registry, replay."""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import equation_registry as er
from . import estimate_engine as ee
from .frame_core import EPSILON4, INVERSE_METRIC
from .schematic_dsl import ParseError, parse_norm, parse_term
from .sig_scale import (
    INF,
    NormSpec,
    SigScaleError,
    anomaly_class,
    factor_signatures,
    fraction_str,
    registry_consistency_report,
    registry_json,
)
from .weyl_algebra import (
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
    star2,
    tabulated_indices,
    weyl_audit,
)

SCHEMA = "nullcalc/1"
DEFAULT_SEED = 42
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class CliConfig:
    seed: int = DEFAULT_SEED
    trials: int = 200
    tol: float = 1e-10
    json: bool = False
    campaigns: Optional[tuple[str, ...]] = None
    equations: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def header(self, command: str) -> dict:
        return {"schema": SCHEMA, "command": command,
                "config": {"seed": self.seed, "trials": self.trials, "tol": self.tol}}


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)


# ----------------------------------------------------------------- identity suite


@dataclass(frozen=True)
class IdentityResult:
    name: str
    residual: float
    threshold: float
    exact: bool = False

    @property
    def passed(self) -> bool:
        return self.residual == 0 if self.exact else self.residual < self.threshold

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual, "threshold": self.threshold,
                "exact": self.exact, "passed": self.passed}


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(1.0, float(np.abs(b).max())))


def _max(vals) -> float:
    return float(max(vals)) if vals else 0.0


def _rational_pair(rng):
    def r():
        return Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 20)))
    a, b = r(), r()
    A = np.array([[a, b], [b, -a]], dtype=object)
    B = np.array([[r(), r()], [r(), r()]], dtype=object)
    return A, B


def identity_suite(seed: int, trials: int, tol: float) -> list[IdentityResult]:
    """Run every identity family; each family draws from its own seeded stream."""
    qtol = 10 * tol  # doubly contracted quantities

    def fields(rng):
        return [random_weyl(rng) for _ in range(trials)]

    def closed_forms(rng):
        worst = []
        idx = tabulated_indices()
        for W in fields(rng):
            q = bel_robinson(W).components.array
            c = decompose(W)
            scale = max(1.0, float(np.abs(q).max()))
            worst.append(max(abs(bel_robinson_closed_form(c, i) - q[tuple(j - 1 for j in i)])
                             for i in idx) / scale)
        return _max(worst)

    def dominant(rng):
        worst = []
        for W in fields(rng):
            q = bel_robinson(W).components.array
            c = decompose(W)
            vals = {(3, 3, 3, 3): 2 * np.sum(c.alpha ** 2), (2, 2, 2, 2): 2 * np.sum(c.alphab ** 2),
                    (3, 3, 3, 2): 4 * c.beta @ c.beta, (3, 2, 2, 2): 4 * c.betab @ c.betab,
                    (3, 3, 2, 2): 4 * (c.rho ** 2 + c.sigma ** 2)}
            scale = max(1.0, float(np.abs(q).max()))
            worst.append(max(abs(q[k] - v) for k, v in vals.items()) / scale)
        return _max(worst)

    def q_sym(rng):
        return _max([bel_robinson(W).symmetry_residual() for W in fields(rng)])

    def q_trace(rng):
        return _max([bel_robinson(W).trace_residual() for W in fields(rng)])

    def dec_rec(rng):
        out = []
        for _ in range(trials):
            c = WeylComponents.random(rng)
            out.append(_rel(decompose(reconstruct(c)).as_vector(), c.as_vector()))
        return _max(out)

    def rec_dec(rng):
        return _max([_rel(reconstruct(decompose(W)).array, W) for W in fields(rng)])

    def double_dual(rng):
        return _max([_rel(hodge_dual(hodge_dual(W)).array, -W) for W in fields(rng)])

    def dual_alpha(rng):
        # alphab(*W) = *alphab(W) and alpha(*W) = alpha(W)* = -*alpha(W): the
        # orientation that reproduces the Q component table.
        out = []
        for W in fields(rng):
            c, d = decompose(W), decompose(hodge_dual(W).array)
            out.append(max(_rel(d.alphab, left_dual(c.alphab)), _rel(d.alpha, right_dual(c.alpha))))
        return _max(out)

    def dual_sigma(rng):
        out = []
        for W in fields(rng):
            c, d = decompose(W), decompose(hodge_dual(W).array)
            out.append(abs(c.sigma - d.rho) / max(1.0, abs(c.sigma)))
        return _max(out)

    def star_star(rng):
        out = []
        for _ in range(trials):
            v = rng.normal(size=2)
            out.append(_rel(star2(star2(v)), -v))
        return _max(out)

    def left_right(rng):
        out = []
        for _ in range(trials):
            a, b = rng.normal(size=2)
            m = np.array([[a, b], [b, -a]])
            out.append(_rel(left_dual(m), -right_dual(m)))
        return _max(out)

    def audit(rng):
        return _max([max(weyl_audit(W).values()) for W in fields(rng)])

    def eps_contraction(rng):
        eps = EPSILON4.array
        gi = INVERSE_METRIC.array
        total = Fraction(0)
        for a, b, c, d in itertools.product(range(4), repeat=4):
            if eps[a, b, c, d] == 0:
                continue
            up = sum((gi[a, p] * gi[b, q] * gi[c, r] * gi[d, s] * eps[p, q, r, s]
                      for p, q, r, s in itertools.permutations(range(4))), Fraction(0))
            total += eps[a, b, c, d] * up
        return float(abs(total + 24))

    def j222(rng):
        worst = Fraction(0)
        for _ in range(trials):
            T, Ts = j222_cancellation(*_rational_pair(rng))
            worst = max(worst, abs(T + Ts))
        return float(worst)

    families: list[tuple[str, Callable, float, bool]] = [
        ("bel_robinson_closed_forms", closed_forms, qtol, False),
        ("bel_robinson_symmetric", q_sym, qtol, False),
        ("bel_robinson_traceless", q_trace, qtol, False),
        ("decompose_reconstruct", dec_rec, tol, False),
        ("dominant_energy", dominant, qtol, False),
        ("double_dual", double_dual, tol, False),
        ("dual_alpha", dual_alpha, tol, False),
        ("dual_sigma_rho", dual_sigma, tol, False),
        ("epsilon_contraction", eps_contraction, tol, True),
        ("j222_cancellation", j222, tol, True),
        ("left_right_dual", left_right, tol, False),
        ("reconstruct_decompose", rec_dec, tol, False),
        ("star2_involution", star_star, tol, False),
        ("weyl_symmetries", audit, tol, False),
    ]
    out = []
    for i, (name, fn, thr, exact) in enumerate(sorted(families)):
        rng = np.random.default_rng([seed, i])
        out.append(IdentityResult(name, fn(rng), thr, exact))
    return out


# ----------------------------------------------------------------- commands


def cmd_check_identities(cfg: CliConfig, out) -> int:
    results = identity_suite(cfg.seed, cfg.trials, cfg.tol)
    failed = [r for r in results if not r.passed]
    if cfg.json:
        doc = cfg.header("check-identities")
        doc.update(families=[r.to_dict() for r in results], passed=not failed)
        print(_dump(doc), file=out)
    else:
        for r in results:
            kind = "exact" if r.exact else f"< {r.threshold:.0e}"
            print(f"{'pass' if r.passed else 'FAIL'}  {r.name:26s} residual {r.residual:.3e} ({kind})",
                  file=out)
        print(f"{len(results)} identity families, {len(results) - len(failed)} passed", file=out)
    if failed:
        print(f"first failing identity: {failed[0].name} (seed {cfg.seed})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


_CLASSIFY_NORMS = tuple(NormSpec(p, d) for d in ("S", "H", "Hb") for p in (2, 4, INF)
                        if d == "S" or p == 2)


def _norm_from_text(expr: str, text: str) -> NormSpec:
    text = text.strip()
    if text.startswith("||"):
        return parse_norm(text.replace("||.||", f"||{expr}||", 1)).spec
    return NormSpec.parse(text)


def cmd_classify(cfg: CliConfig, expr: str, norm: Optional[str], out) -> int:
    t = parse_term(expr)
    sigs = []
    for f in t.factors:
        sigs.append(sorted(factor_signatures(f)))
    totals = sorted({sum((s.value for s in combo), Fraction(0))
                     for combo in itertools.product(*sigs)})
    doc = {"expression": t.to_ascii(), "unicode": t.to_unicode(),
           "signature": [fraction_str(s) for s in totals],
           "scale": [fraction_str(Fraction(1, 2) - s) for s in totals]}
    if len(t.factors) == 1:
        f = t.factors[0]
        doc["anomaly"] = {n.label: fraction_str(anomaly_class(f, n).delta_loss)
                          for n in _CLASSIFY_NORMS}
    else:
        doc["factors"] = [{"factor": f.to_ascii(),
                           "anomaly": {n.label: fraction_str(anomaly_class(f, n).delta_loss)
                                       for n in _CLASSIFY_NORMS}} for f in t.factors]
    if norm is not None:
        spec = _norm_from_text(expr, norm)
        loss = sum((anomaly_class(f, spec).delta_loss for f in t.factors), Fraction(0))
        doc["norm"] = spec.label
        doc["delta_exponent"] = fraction_str(loss)
    if cfg.json:
        full = cfg.header("classify")
        full.update(doc)
        print(_dump(full), file=out)
        return EXIT_OK
    print(f"expression  {doc['expression']}  ({doc['unicode']})", file=out)
    print(f"signature   {', '.join(doc['signature'])}", file=out)
    print(f"scale       {', '.join(doc['scale'])}", file=out)
    for item in doc.get("factors", [{"factor": doc["expression"], "anomaly": doc.get("anomaly", {})}]):
        cells = "  ".join(f"{k} {v}" for k, v in item["anomaly"].items())
        print(f"anomaly     {item['factor']}: {cells}", file=out)
    if norm is not None:
        print(f"norm        {doc['norm']}: anomaly {doc['delta_exponent']}", file=out)
    return EXIT_OK


def _selected_equations(cfg: CliConfig) -> list[er.EquationEntry]:
    if not cfg.equations:
        return list(er.registry())
    return [er.lookup(e) for e in cfg.equations]


def cmd_list_equations(cfg: CliConfig, out) -> int:
    entries = _selected_equations(cfg)
    reports = [er.check_signature_consistency(e) for e in entries]
    if cfg.json:
        doc = cfg.header("list-equations")
        doc["equations"] = [{
            "id": e.id, "family": e.family, "citation": e.citation,
            "equations": [{"lhs": q.lhs.to_ascii(),
                           "rhs": [{"coeff": fraction_str(r.coeff), "term": r.term.to_ascii(),
                                    "op": r.op} for r in q.rhs]} for q in e.equations],
            "lhs_signature": [str(s) for s in rep.lhs_signatures],
            "passed": rep.passed,
        } for e, rep in zip(entries, reports)]
        doc["components"] = registry_json()
        print(_dump(doc), file=out)
        return EXIT_OK
    for e, rep in zip(entries, reports):
        sig = ",".join(str(s) for s in rep.lhs_signatures)
        print(f"{e.id:14s} {e.lhs.to_ascii():18s} {len(e.rhs):2d} terms  sgn {sig:5s} "
              f"{'pass' if rep.passed else 'FAIL'}", file=out)
    return EXIT_OK


def cmd_check_equations(cfg: CliConfig, out) -> int:
    reports = [er.check_signature_consistency(e) for e in _selected_equations(cfg)]
    lines, conflicts = registry_consistency_report()
    failed = [r for r in reports if not r.passed]
    ok = not failed and not conflicts
    if cfg.json:
        doc = cfg.header("check-equations")
        doc.update(equations=[{"id": r.id, "passed": r.passed, "failures": list(r.failures)}
                              for r in reports],
                   norm_registry=lines, unexpected_conflicts=conflicts, passed=ok)
        print(_dump(doc), file=out)
    else:
        for r in reports:
            print(r.summary(), file=out)
        print(f"{len(reports) - len(failed)}/{len(reports)} equations consistent", file=out)
        for line in lines:
            print(line, file=out)
    if failed:
        print(f"first inconsistent equation: {failed[0].id}", file=sys.stderr)
    elif conflicts:
        print(f"unexpected norm registry conflict: {conflicts[0]}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def _selected_campaigns(cfg: CliConfig) -> list[ee.Campaign]:
    ids = cfg.campaigns or tuple(ee.CAMPAIGNS)
    return [ee.campaign(c) for c in ids]


def cmd_replay(cfg: CliConfig, strategy: str, out) -> int:
    results = [ee.replay(c, strategy) for c in _selected_campaigns(cfg)]
    if cfg.json:
        doc = cfg.header("replay")
        doc["campaigns"] = [r.to_dict() for r in results]
        print(_dump(doc), file=out)
    else:
        print("\n\n".join(r.table() for r in results), file=out)
    for r in results:
        if not r.passed:
            print(f"first mismatch: {r.campaign} {r.mismatches[0]}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def cmd_verify_cancellation(cfg: CliConfig, out) -> int:
    rng = np.random.default_rng(cfg.seed)
    sums = []
    for _ in range(cfg.trials):
        T, Ts = j222_cancellation(*_rational_pair(rng))
        sums.append(T + Ts)
    exact_ok = all(s == 0 for s in sums)
    certs = []
    for c in _selected_campaigns(cfg):
        for label in ee.vanishing_labels(c.id):
            rep = ee.vanishing_certificate(c, label)
            certs.append(rep)
    ok = exact_ok and all(r.status in ("vanishes", "cancels") for r in certs)
    if cfg.json:
        doc = cfg.header("verify-cancellation")
        doc.update(j222={"draws": cfg.trials, "all_zero": exact_ok,
                         "max_abs": fraction_str(max(abs(s) for s in sums))},
                   certificates=[r.to_dict() for r in certs], passed=ok)
        print(_dump(doc), file=out)
    else:
        print(f"j222: T + T* over {cfg.trials} rational draws: "
              f"{'exactly zero' if exact_ok else 'NONZERO'}", file=out)
        for r in certs:
            print(f"{r.campaign:12s} {r.term_label:6s} {r.status:9s} "
                  f"({r.certificate.reason}, {len(r.certificate.steps)} "
                  f"{'step' if len(r.certificate.steps) == 1 else 'steps'})", file=out)
            for s in r.certificate.steps:
                print(f"    - {s.claim}", file=out)
    if not ok:
        bad = "j222" if not exact_ok else next(r.term_label for r in certs
                                               if r.status not in ("vanishes", "cancels"))
        print(f"first failing check: {bad} (seed {cfg.seed})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ----------------------------------------------------------------- argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: $NULLCALC_SEED or {DEFAULT_SEED})")
    p.add_argument("--trials", type=int, default=200, help="random draws per family")
    p.add_argument("--tol", type=float, default=1e-10, help="float tolerance")
    p.add_argument("--json", action="store_true", help="emit JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nullcalc",
                                     description="Null-frame calculus checks and estimate replay.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-identities", help="run the numeric identity suite")
    _common(p)
    p = sub.add_parser("classify", help="signature, scale and anomalies of an expression")
    _common(p)
    p.add_argument("expr")
    p.add_argument("norm", nargs="?", help="e.g. '||.||_{L4sc(S)}' or 'L4(S)'")
    for name, helptext in (("list-equations", "list the equation registry"),
                           ("check-equations", "check signature consistency of the registry")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--equation", action="append", help="restrict to an equation id")
    p = sub.add_parser("replay", help="replay an estimate campaign")
    _common(p)
    p.add_argument("campaign_id", nargs="?", choices=sorted(ee.CAMPAIGNS), metavar="CAMPAIGN",
                   help="one of " + ", ".join(sorted(ee.CAMPAIGNS)))
    p.add_argument("--campaign", action="append", choices=sorted(ee.CAMPAIGNS))
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--scripted", dest="strategy", action="store_const", const="scripted")
    mode.add_argument("--auto", dest="strategy", action="store_const", const="auto")
    p = sub.add_parser("verify-cancellation", help="exact cancellation and vanishing certificates")
    _common(p)
    p.add_argument("--campaign", action="append", choices=sorted(ee.CAMPAIGNS))
    return parser


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("NULLCALC_SEED")
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"NULLCALC_SEED must be an integer, got {env!r}") from None


def main(argv: Optional[list[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        campaigns = list(getattr(args, "campaign", None) or [])
        if getattr(args, "campaign_id", None):
            campaigns.insert(0, args.campaign_id)
        cfg = CliConfig(seed=_seed(args.seed), trials=args.trials, tol=args.tol, json=args.json,
                        campaigns=tuple(campaigns) or None,
                        equations=tuple(getattr(args, "equation", None) or ()) or None)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"nullcalc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "check-identities":
            return cmd_check_identities(cfg, out)
        if args.command == "classify":
            return cmd_classify(cfg, args.expr, args.norm, out)
        if args.command == "list-equations":
            return cmd_list_equations(cfg, out)
        if args.command == "check-equations":
            return cmd_check_equations(cfg, out)
        if args.command == "replay":
            return cmd_replay(cfg, args.strategy or "scripted", out)
        return cmd_verify_cancellation(cfg, out)
    except ParseError as exc:
        print(f"nullcalc: parse error: {exc.message}", file=sys.stderr)
        print(exc.render(), file=sys.stderr)
        return EXIT_USAGE
    except (er.RegistryError, ee.EngineError, SigScaleError) as exc:
        print(f"nullcalc: error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
