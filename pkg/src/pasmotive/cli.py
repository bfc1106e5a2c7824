"""Command-line interface: one subcommand per pipeline stage, JSON reports.

Exit status is 0 on success, 1 when the computation is mathematically
refused (unstable set, unbounded support, failed fit, ...) and 2 on usage
errors (bad arguments, unreadable or malformed input files).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .formula import FragmentError, Sort, SortError, formula_text
from .groups import PrecisionError, cartan_decompose, coset_index, coset_index_bruteforce
from .measure import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    DefinableSet,
    UnstableError,
    stability_level,
    volume_exact,
    volume_montecarlo,
)
from .models import MODELS, ExcludedPrimeError, TruncatedElement, eval_valued
from .orbital import (
    InvarianceError,
    SupportError,
    coset_support,
    load_problem,
    motive_proxy,
    orbital_integral,
)
from .parser import ParseError, parse_source, serialize
from .presburger import UnboundedUnderModel, eliminate_quantifiers, uniform_bound
from .qpoly import FitError, QPolynomial, fit_laurent
from .separation import LEDGER_SCOPE, separate

FIT_NOTE = (
    "no Laurent polynomial in q explains these values; this cannot tell a trace that is "
    "not a polynomial in q apart from an error in the inputs"
)
STABILITY_NOTE = "stability is decided per prime; other residue fields are not covered"

DOMAIN_ERRORS = (
    UnstableError,
    BudgetExceeded,
    FitError,
    UnboundedUnderModel,
    SupportError,
    InvarianceError,
    ExcludedPrimeError,
    PrecisionError,
    FragmentError,
)


class UsageError(Exception):
    pass


def rational(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return rational(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        items = sorted(value) if isinstance(value, set) else value
        return [_jsonable(v) for v in items]
    return value


# ---------------------------------------------------------------- inputs


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from err


def _source(args):
    text = args.formula_text if getattr(args, "formula_text", None) else None
    if text is None:
        if not args.file:
            raise UsageError("give a formula file or --formula")
        text = _read(args.file)
    args._inputs.append(text)
    return parse_source(text)


def _definable(args) -> DefinableSet:
    src = _source(args)
    sig = [v for v in src.variables() if v.sort is Sort.VF]
    return DefinableSet(src.body, tuple(sig), Path(args.file).stem if args.file else "")


def _primes(args, default=(3, 5, 7, 11, 13)) -> tuple[int, ...]:
    if getattr(args, "primes", None):
        return tuple(int(x) for x in args.primes.replace(",", " ").split())
    if getattr(args, "prime", None):
        return (args.prime,)
    return default


def _prime(args) -> int:
    if args.prime is None:
        raise UsageError("--prime is required")
    return args.prime


def _assignments(items: Sequence[str], variables) -> dict:
    sorts = {v.name: v.sort for v in variables}
    env = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"assignment {item!r} is not name=value")
        name, value = item.split("=", 1)
        if name not in sorts:
            raise UsageError(f"unknown variable {name}")
        env[name] = Fraction(value) if sorts[name] is Sort.VF else int(value)
    return env


# ---------------------------------------------------------------- commands


def cmd_parse(args) -> dict:
    src = _source(args)
    variables = src.variables()
    return {
        "canonical": serialize(src.body, variables),
        "variables": [{"name": v.name, "sort": v.sort.value} for v in variables],
    }


def cmd_qe(args) -> dict:
    src = _source(args)
    qf = eliminate_quantifiers(src.body)
    return {"input": formula_text(src.body), "quantifier_free": formula_text(qf)}


def cmd_bound(args) -> dict:
    src = _source(args)
    names = [v.name for v in src.variables() if v.sort is Sort.VG]
    result = uniform_bound(src.body, _primes(args), names)
    args._ledger.update({str(p): r for p, r in result.reasons.items()})
    return {
        "variables": list(result.variables),
        "C": [list(t) for t in result.C],
        "excluded_primes": sorted(result.excluded_primes),
        "sampled_primes": list(result.sampled_primes),
        "bounded_disjuncts": result.bounded,
        "unbounded_disjuncts_with_false_guard": result.unbounded,
        "guard_status": result.guard_status,
    }


def cmd_separate(args) -> dict:
    src = _source(args)
    form, ledger = separate(src.body)
    args._ledger.update(ledger.as_dict())
    return {
        "disjuncts": [{"residue": formula_text(psi), "presburger": formula_text(lin)} for psi, lin in form.disjuncts],
        "text": str(form),
    }


def cmd_eval(args) -> dict:
    src = _source(args)
    p = _prime(args)
    env = _assignments(args.assign, src.variables())
    value = eval_valued(src.body, args.model, args.precision, env, p=p)
    return {"value": value.name.lower(), "prime": p, "precision": args.precision}


def cmd_stability(args) -> dict:
    s = _definable(args)
    p = _prime(args)
    n = stability_level(s, p, args.model, args.level if args.level is not None else 4, args.budget)
    return {"level": n, "prime": p, "stability": STABILITY_NOTE}


def cmd_volume(args) -> dict:
    s = _definable(args)
    p = _prime(args)
    level = args.level
    if level is None:
        level = stability_level(s, p, args.model, 4, args.budget)
    if args.samples:
        res = volume_montecarlo(s, p, level, args.samples, args.seed, args.model)
    else:
        res = volume_exact(s, p, level, args.model, budget=args.budget, threads=args.threads)
    out = {"value": res.value, "level": res.level, "prime": p, "method": res.method, "count": res.count, "dimension": res.dimension, "stability": STABILITY_NOTE}
    if res.samples:
        out["samples"] = res.samples
        out["stderr"] = res.stderr
        out["seed"] = args.seed
    return out


def _matrix(text: str, p: int, model: str, precision: int):
    rows = [r for r in text.split(";") if r.strip()]
    try:
        values = [[Fraction(x) for x in row.replace(",", " ").split()] for row in rows]
    except ValueError as err:
        raise UsageError(f"bad matrix {text!r}") from err
    if any(len(r) != len(values) for r in values):
        raise UsageError("matrix must be square")
    return [[TruncatedElement.from_rational(model, p, x) for x in r] for r in values]


def cmd_cartan(args) -> dict:
    p = _prime(args)
    if not args.matrix:
        raise UsageError("--matrix is required, rows separated by ';'")
    g = _matrix(args.matrix, p, args.model, args.precision)
    return {"m": list(cartan_decompose(g)), "prime": p}


def _tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError as err:
        raise UsageError(f"bad tuple {text!r}") from err


def cmd_cosets(args) -> dict:
    if not args.m:
        raise UsageError("--m is required, e.g. --m 1,0")
    m = _tuple(args.m)
    ci = coset_index(m)
    primes = _primes(args, (3, 5, 7))
    out = {"m": list(ci.m), "index": str(ci.index), "values": {str(p): ci.index(p) for p in primes}}
    if args.bruteforce:
        out["bruteforce"] = {str(p): coset_index_bruteforce(m, p, args.model, args.budget) for p in primes}
    return out


def cmd_orbital(args) -> dict:
    problem = load_problem(args.file)
    args._inputs.append(_read(args.file))
    primes = _primes(args, problem.primes)
    if args.model:
        from dataclasses import replace

        problem = replace(problem, model=args.model)
    out: dict = {"problem": problem.name}
    support = coset_support(problem, primes)
    args._ledger.update(support.ledger.as_dict())
    out["C"] = [list(m) for m in support.C]
    out["support"] = {
        "method": support.method,
        "spread_bound": support.spread,
        "discriminant_bound": {str(p): b for p, b in support.discriminant_bound.items()},
    }
    values = {}
    terms = {}
    for p in primes:
        res = orbital_integral(problem, p, support.C)
        values[str(p)] = res.value
        terms[str(p)] = [
            {"m": list(t.m), "index": t.index, "vol_K": t.vol_K, "volume": t.volume, "level": t.level, "contribution": t.contribution}
            for t in res.terms
        ]
        out.setdefault("checks", {})[str(p)] = res.checks
    out["values"] = values
    out["terms"] = terms
    if args.fit:
        holdout = _tuple(args.holdout) if args.holdout else problem.holdout
        proxy = motive_proxy(problem, primes, holdout)
        out["fit"] = {
            "polynomial": str(proxy.polynomial),
            "coefficients": proxy.polynomial.to_json(),
            "per_coset": {",".join(map(str, m)): str(poly) for m, poly in proxy.per_coset.items()},
            "validated": {str(p): {"direct": d, "predicted": e} for p, (d, e) in proxy.validated.items()},
        }
    return out


def _points(text: str) -> list[tuple[int, Fraction]]:
    pts = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise UsageError(f"point {item!r} is not q:value")
        q, v = item.split(":", 1)
        pts.append((int(q), Fraction(v)))
    return pts


def cmd_fit(args) -> dict:
    if args.file:
        text = _read(args.file)
        args._inputs.append(text)
        data = json.loads(text)
        points = [(int(q), Fraction(v)) for q, v in data["points"].items()]
        holdout = [(int(q), Fraction(v)) for q, v in data.get("holdout", {}).items()]
    elif args.points:
        points = _points(args.points)
        holdout = _points(args.holdout) if args.holdout else []
    else:
        raise UsageError("give a JSON file or --points q:value,...")
    window = _tuple(args.window) if args.window else (-8, 8)
    if len(window) != 2:
        raise UsageError("--window takes lo,hi")
    try:
        fixed = QPolynomial.parse(args.fixed) if args.fixed else None
    except ValueError as err:
        raise UsageError(str(err)) from err
    res = fit_laurent(points, window, holdout, fixed=fixed)
    return {
        "polynomial": str(res.polynomial),
        "coefficients": res.polynomial.to_json(),
        "exponents": list(res.window),
        "validated": {str(q): {"expected": e, "predicted": p} for q, e, p in res.validated},
    }


COMMANDS = {
    "parse": cmd_parse,
    "qe": cmd_qe,
    "bound": cmd_bound,
    "separate": cmd_separate,
    "eval": cmd_eval,
    "stability": cmd_stability,
    "volume": cmd_volume,
    "cartan": cmd_cartan,
    "cosets": cmd_cosets,
    "orbital": cmd_orbital,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pasmotive", description="Definable sets, volumes and orbital integrals over local fields.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("file", nargs="?", help="formula file (.pas), problem file, or JSON points for fit")
    parser.add_argument("--formula", dest="formula_text", help="formula text instead of a file")
    parser.add_argument("--prime", type=int)
    parser.add_argument("--primes", help="comma separated primes")
    parser.add_argument("--model", choices=MODELS, default=None)
    parser.add_argument("--precision", type=int, default=1)
    parser.add_argument("--level", type=int)
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    parser.add_argument("--samples", type=int, default=0, help="Monte Carlo samples (volume)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out", help="write the report here instead of standard output")
    parser.add_argument("--assign", action="append", help="name=value for eval")
    parser.add_argument("--matrix", help="cartan: rows separated by ';'")
    parser.add_argument("--m", help="cosets: sorted exponent tuple")
    parser.add_argument("--bruteforce", action="store_true", help="cosets: also count by enumeration")
    parser.add_argument("--fit", action="store_true", help="orbital: fit the motive proxy")
    parser.add_argument("--holdout", help="held-out primes (orbital) or q:value points (fit)")
    parser.add_argument("--points", help="fit: q:value,...")
    parser.add_argument("--window", help="fit: exponent window lo,hi")
    parser.add_argument("--fixed", help="fit: known terms, e.g. '1' or 'q^2 + 1'; only the rest is fitted")
    parser.add_argument("--timings", action="store_true", help="include wall-clock timings (breaks byte-identical output)")
    return parser


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.model is None and args.command != "orbital":
        args.model = "padic"
    args._inputs = []
    args._ledger = {}
    start = time.perf_counter()
    try:
        results = COMMANDS[args.command](args)
    except (UsageError, ParseError, SortError) as err:
        print(f"error: {err}", file=stderr)
        return 2
    except DOMAIN_ERRORS as err:
        print(f"{type(err).__name__}: {err}", file=stderr)
        report = {"command": args.command, "error": type(err).__name__, "message": str(err)}
        detail = getattr(err, "residuals", None) or getattr(err, "witness", None)
        if detail:
            report["detail"] = _jsonable(detail)
        if isinstance(err, FitError):
            report["note"] = FIT_NOTE
        _emit(report, args, stdout)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=stderr)
        return 2
    digest = hashlib.sha256()
    for text in args._inputs:
        digest.update(text.encode())
    digest.update(json.dumps(sorted((k, str(v)) for k, v in vars(args).items() if not k.startswith("_") and k not in ("out", "timings"))).encode())
    report = {
        "command": args.command,
        "inputs_digest": digest.hexdigest(),
        "results": _jsonable(results),
        "ledger": {"excluded_primes": sorted(int(p) for p in args._ledger), "reasons": args._ledger, "scope": LEDGER_SCOPE},
    }
    if args.timings:
        report["timings"] = {"seconds": round(time.perf_counter() - start, 3)}
    _emit(report, args, stdout)
    return 0


def _emit(report: dict, args, stdout) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)


def main() -> None:
    sys.exit(run())
