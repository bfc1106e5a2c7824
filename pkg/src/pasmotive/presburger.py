"""Presburger arithmetic on the value-group sort.

Quantifier elimination follows Cooper's method.  Formulas are first brought
into a small internal language of linear atoms::

    ("le", lin)        lin <= 0
    ("dvd", k, lin)    k | lin
    ("ndvd", k, lin)   not k | lin

combined with ("and", parts) / ("or", parts) / ("true",) / ("false",), always
in negation normal form.  ``lin`` is a :class:`Lin`.  Results are converted
back to the formula AST so the rest of the pipeline can consume them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .formula import (
    FALSE,
    NEGATED_RELATION,
    TRUE,
    Add,
    And,
    Atom,
    Const,
    Divides,
    Exists,
    FalseF,
    Forall,
    Formula,
    FragmentError,
    Implies,
    Mul,
    Not,
    Or,
    Sort,
    Sub,
    Term,
    TrueF,
    Var,
    conj,
    disj,
    free_vars,
)


# ---------------------------------------------------------------- linear terms


@dataclass(frozen=True, slots=True)
class Lin:
    """Integer linear form ``sum coeffs[v] * v + const``; coefficients nonzero,
    sorted by variable name."""

    coeffs: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def build(coeffs: dict, const: int) -> Lin:
        return Lin(tuple(sorted((v, c) for v, c in coeffs.items() if c)), const)

    def coeff(self, name: str) -> int:
        for v, c in self.coeffs:
            if v == name:
                return c
        return 0

    def __add__(self, other: Lin) -> Lin:
        d = dict(self.coeffs)
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return Lin.build(d, self.const + other.const)

    def scale(self, k: int) -> Lin:
        if k == 0:
            return Lin()
        return Lin(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def __neg__(self) -> Lin:
        return self.scale(-1)

    def __sub__(self, other: Lin) -> Lin:
        return self + (-other)

    def shift(self, k: int) -> Lin:
        return Lin(self.coeffs, self.const + k)

    def drop(self, name: str) -> Lin:
        return Lin(tuple((v, c) for v, c in self.coeffs if v != name), self.const)

    def substitute(self, name: str, value: Lin) -> Lin:
        c = self.coeff(name)
        if not c:
            return self
        return self.drop(name) + value.scale(c)

    def evaluate(self, env) -> int:
        return self.const + sum(c * env[v] for v, c in self.coeffs)

    @property
    def names(self) -> set[str]:
        return {v for v, _ in self.coeffs}


def term_to_lin(t: Term) -> Lin:
    if isinstance(t, Var):
        if t.sort is not Sort.VG:
            raise FragmentError(f"{t.name} is not a value-group variable")
        return Lin(((t.name, 1),), 0)
    if isinstance(t, Const):
        if t.sort is not Sort.VG:
            raise FragmentError(f"constant {t.value} is not a value-group constant")
        return Lin((), int(t.value))
    if isinstance(t, Add):
        return term_to_lin(t.left) + term_to_lin(t.right)
    if isinstance(t, Sub):
        return term_to_lin(t.left) - term_to_lin(t.right)
    if isinstance(t, Mul):
        a, b = term_to_lin(t.left), term_to_lin(t.right)
        if not a.coeffs:
            return b.scale(a.const)
        if not b.coeffs:
            return a.scale(b.const)
        raise FragmentError(f"non-linear term {t}")
    raise FragmentError(f"not a Presburger term: {t}")


# ---------------------------------------------------------------- internal formulas

T = ("true",)
F = ("false",)


def _le(lin: Lin):
    return ("le", lin)


def _atom_vars(a) -> set[str]:
    return a[-1].names


def negate(g):
    tag = g[0]
    if tag == "true":
        return F
    if tag == "false":
        return T
    if tag == "le":
        return ("le", (-g[1]).shift(1))
    if tag == "dvd":
        return ("ndvd", g[1], g[2])
    if tag == "ndvd":
        return ("dvd", g[1], g[2])
    if tag == "and":
        return mk_or([negate(a) for a in g[1]])
    return mk_and([negate(a) for a in g[1]])


def _norm_atom(a):
    tag = a[0]
    if tag == "le":
        lin = a[1]
        if not lin.coeffs:
            return T if lin.const <= 0 else F
        g = 0
        for _, c in lin.coeffs:
            g = math.gcd(g, c)
        if g > 1:
            lin = Lin(tuple((v, c // g) for v, c in lin.coeffs), -((-lin.const) // g))
        return ("le", lin)
    k, lin = a[1], a[2]
    k = abs(k)
    coeffs = tuple((v, c % k) for v, c in lin.coeffs if c % k)
    const = lin.const % k
    if not coeffs:
        holds = const == 0
        return T if holds == (tag == "dvd") else F
    g = k
    for _, c in coeffs:
        g = math.gcd(g, c)
    if const % g:
        return F if tag == "dvd" else T
    g = math.gcd(g, const)
    if g > 1:
        k //= g
        coeffs = tuple((v, c // g) for v, c in coeffs)
        const //= g
    if k == 1:
        return T if tag == "dvd" else F
    return (tag, k, Lin(coeffs, const))


def mk_and(parts):
    out = []
    seen = set()
    bounds = {}  # variable part -> tightest const for le
    for p in parts:
        p = _norm_atom(p) if p[0] in ("le", "dvd", "ndvd") else p
        if p[0] == "false":
            return F
        if p[0] == "true":
            continue
        items = p[1] if p[0] == "and" else [p]
        for q in items:
            if q[0] == "le":
                key = q[1].coeffs
                bounds[key] = max(bounds.get(key, q[1].const), q[1].const)
            elif q not in seen:
                seen.add(q)
                out.append(q)
    for key, c in bounds.items():
        neg = tuple((v, -a) for v, a in key)
        if neg in bounds and c + bounds[neg] > 0:
            # a <= -c and -a <= -c' with c + c' > 0 is empty
            return F
    atoms = [("le", Lin(key, c)) for key, c in bounds.items()]
    for q in out:
        if q[0] in ("dvd", "ndvd") and (("ndvd" if q[0] == "dvd" else "dvd"), q[1], q[2]) in seen:
            return F
    out = atoms + out
    if not out:
        return T
    if len(out) == 1:
        return out[0]
    return ("and", tuple(sorted(out, key=_key)))


def mk_or(parts):
    out = []
    seen = set()
    bounds = {}
    for p in parts:
        p = _norm_atom(p) if p[0] in ("le", "dvd", "ndvd") else p
        if p[0] == "true":
            return T
        if p[0] == "false":
            continue
        items = p[1] if p[0] == "or" else [p]
        for q in items:
            if q[0] == "le":
                key = q[1].coeffs
                bounds[key] = min(bounds.get(key, q[1].const), q[1].const)
            elif q not in seen:
                seen.add(q)
                out.append(q)
    for key, c in bounds.items():
        neg = tuple((v, -a) for v, a in key)
        if neg in bounds and c + bounds[neg] <= 1:
            # a <= -c or -a <= -c' covers everything
            return T
    for q in out:
        if q[0] in ("dvd", "ndvd") and (("ndvd" if q[0] == "dvd" else "dvd"), q[1], q[2]) in seen:
            return T
    out = [("le", Lin(key, c)) for key, c in bounds.items()] + out
    if not out:
        return F
    if len(out) == 1:
        return out[0]
    return ("or", tuple(sorted(out, key=_key)))


def _key(g):
    return repr(g)


def formula_vars(g) -> set[str]:
    tag = g[0]
    if tag in ("true", "false"):
        return set()
    if tag in ("and", "or"):
        out = set()
        for a in g[1]:
            out |= formula_vars(a)
        return out
    return g[-1].names


def evaluate(g, env) -> bool:
    tag = g[0]
    if tag == "le":
        return g[1].evaluate(env) <= 0
    if tag == "dvd":
        return g[2].evaluate(env) % g[1] == 0
    if tag == "ndvd":
        return g[2].evaluate(env) % g[1] != 0
    if tag == "and":
        return all(evaluate(a, env) for a in g[1])
    if tag == "or":
        return any(evaluate(a, env) for a in g[1])
    return tag == "true"


def _map_atoms(g, fn):
    tag = g[0]
    if tag == "and":
        return mk_and([_map_atoms(a, fn) for a in g[1]])
    if tag == "or":
        return mk_or([_map_atoms(a, fn) for a in g[1]])
    if tag in ("true", "false"):
        return g
    return fn(g)


def subst(g, name: str, value: Lin):
    def fn(a):
        if a[0] == "le":
            return _norm_atom(("le", a[1].substitute(name, value)))
        return _norm_atom((a[0], a[1], a[2].substitute(name, value)))

    return _map_atoms(g, fn)


# ---------------------------------------------------------------- AST <-> internal


def _atom_from(op: str, left: Lin, right: Lin):
    d = left - right
    if op == "<=":
        return _le(d)
    if op == "<":
        return _le(d.shift(1))
    if op == ">=":
        return _le(-d)
    if op == ">":
        return _le((-d).shift(1))
    if op == "=":
        return mk_and([_le(d), _le(-d)])
    if op == "!=":
        return mk_or([_le(d.shift(1)), _le((-d).shift(1))])
    raise FragmentError(f"unknown relation {op}")


def to_internal(f: Formula, neg: bool = False):
    """Translate a Presburger formula, eliminating its quantifiers."""
    if isinstance(f, TrueF):
        return F if neg else T
    if isinstance(f, FalseF):
        return T if neg else F
    if isinstance(f, Atom):
        op = NEGATED_RELATION[f.op] if neg else f.op
        return _norm_or_keep(_atom_from(op, term_to_lin(f.left), term_to_lin(f.right)))
    if isinstance(f, Divides):
        a = _norm_atom(("ndvd" if neg else "dvd", f.modulus, term_to_lin(f.term)))
        return a
    if isinstance(f, Not):
        return to_internal(f.arg, not neg)
    if isinstance(f, And):
        parts = [to_internal(a, neg) for a in f.args]
        return mk_or(parts) if neg else mk_and(parts)
    if isinstance(f, Or):
        parts = [to_internal(a, neg) for a in f.args]
        return mk_and(parts) if neg else mk_or(parts)
    if isinstance(f, Implies):
        left, right = to_internal(f.left, not neg), to_internal(f.right, neg)
        return mk_and([left, right]) if neg else mk_or([left, right])
    if isinstance(f, (Exists, Forall)):
        if f.var.sort is not Sort.VG:
            raise FragmentError(f"quantifier over {f.var.sort.value} variable {f.var.name}")
        if isinstance(f, Exists):
            g = cooper(f.var.name, to_internal(f.body, False))
            return negate(g) if neg else g
        g = cooper(f.var.name, to_internal(f.body, True))
        return g if neg else negate(g)
    raise FragmentError(f"not a Presburger formula: {f!r}")


def _norm_or_keep(g):
    return _norm_atom(g) if g[0] in ("le", "dvd", "ndvd") else g


def _lin_term(lin: Lin, names: dict) -> Term:
    parts = []
    for v, c in lin.coeffs:
        var = names.get(v, Var(v, Sort.VG))
        parts.append((c, var))
    term = None
    for c, var in parts:
        piece = var if abs(c) == 1 else Mul(Const(Fraction(abs(c)), Sort.VG), var)
        if term is None:
            term = piece if c > 0 else Mul(Const(Fraction(-1), Sort.VG), var) if abs(c) == 1 else Mul(Const(Fraction(c), Sort.VG), var)
        else:
            term = Add(term, piece) if c > 0 else Sub(term, piece)
    if lin.const:
        if term is None:
            return Const(Fraction(lin.const), Sort.VG)
        c = Const(Fraction(abs(lin.const)), Sort.VG)
        term = Add(term, c) if lin.const > 0 else Sub(term, c)
    return term if term is not None else Const(Fraction(0), Sort.VG)


def _le_atom(lin: Lin, names) -> Formula:
    # sum a_i m_i <= -c, written with mostly positive coefficients
    body = Lin(lin.coeffs, 0)
    if sum(1 for _, c in lin.coeffs if c < 0) > len(lin.coeffs) / 2:
        return Atom(">=", _lin_term(-body, names), Const(Fraction(lin.const), Sort.VG))
    return Atom("<=", _lin_term(body, names), Const(Fraction(-lin.const), Sort.VG))


def to_formula(g, names: dict | None = None) -> Formula:
    names = names or {}
    tag = g[0]
    if tag == "true":
        return TRUE
    if tag == "false":
        return FALSE
    if tag == "le":
        return _le_atom(g[1], names)
    if tag == "dvd":
        return Divides(g[1], _lin_term(g[2], names))
    if tag == "ndvd":
        return Not(Divides(g[1], _lin_term(g[2], names)))
    if tag == "or":
        return disj(*[to_formula(a, names) for a in g[1]])
    # pair up a <= c and a >= c into an equation
    parts = list(g[1])
    les = {a[1].coeffs: a[1].const for a in parts if a[0] == "le"}
    out, done = [], set()
    for a in parts:
        if a[0] != "le":
            out.append(to_formula(a, names))
            continue
        key, c = a[1].coeffs, a[1].const
        if key in done:
            continue
        neg = tuple((v, -k) for v, k in key)
        if les.get(neg) == -c:
            done.update({key, neg})
            pos = key if key[0][1] > 0 else neg
            const = c if pos == key else -c
            out.append(Atom("=", _lin_term(Lin(pos, 0), names), Const(Fraction(-const), Sort.VG)))
        else:
            out.append(_le_atom(a[1], names))
    return conj(*out)


# ---------------------------------------------------------------- Cooper


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * abs(v) // math.gcd(out, abs(v))
    return out


def _atoms_of(g):
    tag = g[0]
    if tag in ("and", "or"):
        for a in g[1]:
            yield from _atoms_of(a)
    elif tag not in ("true", "false"):
        yield g


# a conjunction confining x to at most this many integers is expanded directly
BOUNDED_EXPANSION = 64


def _constant_range(g, x: str):
    lo = hi = None
    for a in g[1]:
        if a[0] != "le" or len(a[1].coeffs) != 1 or a[1].coeffs[0][0] != x:
            continue
        c, k = a[1].coeffs[0][1], a[1].const
        if c > 0:
            bound = (-k) // c
            hi = bound if hi is None else min(hi, bound)
        else:
            bound = -((-k) // (-c))
            lo = bound if lo is None else max(lo, bound)
    if lo is None or hi is None:
        return None
    return lo, hi


def cooper(x: str, g):
    """Eliminate ``exists x`` from the internal NNF formula ``g``."""
    if g[0] == "or":
        return mk_or([cooper(x, a) for a in g[1]])
    if x not in formula_vars(g):
        return g
    if g[0] == "and":
        inside = [a for a in g[1] if x in formula_vars(a)]
        outside = [a for a in g[1] if x not in formula_vars(a)]
        if outside:
            return mk_and(outside + [cooper(x, mk_and(inside))])
        span = _constant_range(g, x)
        if span is not None and span[1] - span[0] < BOUNDED_EXPANSION:
            out = []
            for v in range(span[0], span[1] + 1):
                out.append(subst(g, x, Lin((), v)))
                if out[-1] == T:
                    return T
            return mk_or(out)
    # make every coefficient of x equal to +-delta, then substitute x' = delta*x
    delta = _lcm(a[-1].coeff(x) for a in _atoms_of(g) if a[-1].coeff(x))

    def unify(a):
        c = a[-1].coeff(x)
        if not c:
            return a
        k = delta // abs(c)
        lin = a[-1].scale(k)
        lin = Lin.build({**dict(lin.coeffs), x: (1 if c > 0 else -1)}, lin.const)
        if a[0] == "le":
            return ("le", lin)
        return (a[0], a[1] * k, lin)

    g = _map_atoms(g, unify)
    if delta > 1:
        g = mk_and([g, ("dvd", delta, Lin(((x, 1),), 0))])
    if x not in formula_vars(g):
        return g
    # an equation x = t inside a conjunction: substitute directly
    if g[0] == "and":
        les = {}
        for a in g[1]:
            if a[0] == "le" and a[1].coeff(x):
                les[(a[1].coeffs, a[1].const)] = a
        for a in g[1]:
            if a[0] == "le" and a[1].coeff(x) == 1:
                neg = -a[1]
                if (neg.coeffs, neg.const) in les:
                    value = -(a[1].drop(x))
                    return subst(g, x, value)
    atoms = [a for a in _atoms_of(g) if a[-1].coeff(x)]
    big_d = _lcm(a[1] for a in atoms if a[0] != "le")
    # lower atom -x + r <= 0 means x > r - 1; B holds r - 1 = -(lin without x) - 1
    lower = [(a[1].drop(x)).shift(-1) for a in atoms if a[0] == "le" and a[1].coeff(x) < 0]
    upper = [(-a[1].drop(x)).shift(1) for a in atoms if a[0] == "le" and a[1].coeff(x) > 0]
    use_lower = len(lower) <= len(upper)
    bounds = _dedupe(lower if use_lower else upper)

    def at_infinity(a):
        if a[0] == "le" and a[1].coeff(x):
            up = a[1].coeff(x) > 0
            # -infinity satisfies upper bounds, +infinity lower bounds
            return T if up == use_lower else F
        return a

    inf_g = _map_atoms(g, at_infinity)
    out = []
    for j in range(1, big_d + 1):
        value = Lin((), j if use_lower else -j)
        out.append(subst(inf_g, x, value))
        if out[-1] == T:
            return T
    for b in bounds:
        for j in range(1, big_d + 1):
            out.append(subst(g, x, b.shift(j if use_lower else -j)))
            if out[-1] == T:
                return T
    return mk_or(out)


def _dedupe(lins):
    seen, out = set(), []
    for lin in lins:
        if lin not in seen:
            seen.add(lin)
            out.append(lin)
    return out


# ---------------------------------------------------------------- public API


def _check_presburger(f: Formula) -> None:
    for v in free_vars(f):
        if v.sort is not Sort.VG:
            raise FragmentError(f"free {v.sort.value} variable {v.name} in a Presburger formula")


def eliminate_quantifiers(f: Formula) -> Formula:
    """Equivalent quantifier-free Presburger formula (over the integers)."""
    _check_presburger(f)
    names = {v.name: v for v in free_vars(f)}
    return to_formula(to_internal(f), names)


@dataclass(frozen=True)
class BoundWitness:
    """Outcome of :func:`decide_bounded`.

    ``box`` lists ``(lo, hi)`` per variable when bounded and nonempty; it is
    ``None`` for an empty solution set.  For an unbounded set ``ray`` holds
    ``(variable, start, step)``: the projection onto that variable contains
    ``start + k*step`` for every k >= 0 (step may be negative).
    """

    variables: tuple[str, ...]
    bounded: bool
    box: tuple[tuple[int, int], ...] | None = None
    ray: tuple[str, int, int] | None = None

    @property
    def empty(self) -> bool:
        return self.bounded and self.box is None


def _one_var_solutions(g, x: str):
    """Bounds of the solution set of a formula in the single variable x.

    Beyond the threshold every inequality has constant truth value and the
    divisibilities repeat with the lcm of their moduli, so one period past the
    threshold decides unboundedness.  Returns (lo, hi, ray); lo is None for
    an empty set.
    """
    atoms = list(_atoms_of(g))
    period = _lcm(a[1] for a in atoms if a[0] != "le")
    threshold = 0
    for a in atoms:
        if a[0] == "le":
            c = abs(a[1].coeff(x)) or 1
            threshold = max(threshold, abs(a[1].const) // c + 1)
    ray = None
    hi = lo = None
    for j in range(threshold + 1, threshold + period + 1):
        if evaluate(g, {x: j}):
            hi, ray = math.inf, (x, j, period)
            break
    for j in range(threshold + 1, threshold + period + 1):
        if evaluate(g, {x: -j}):
            lo = -math.inf
            ray = ray or (x, -j, -period)
            break
    inside = [j for j in range(-threshold, threshold + 1) if evaluate(g, {x: j})]
    if lo is None and inside:
        lo = inside[0]
    if hi is None and inside:
        hi = inside[-1]
    return lo, hi, ray


def decide_bounded(f: Formula, variables: Sequence[Var | str] | None = None) -> BoundWitness:
    """Decide whether the solution set of ``f`` in Z^l is finite."""
    _check_presburger(f)
    if variables is None:
        names = sorted(v.name for v in free_vars(f))
    else:
        names = [v.name if isinstance(v, Var) else v for v in variables]
    g = to_internal(f)
    extra = formula_vars(g) - set(names)
    if extra:
        raise FragmentError(f"variables {sorted(extra)} not listed")
    if g == F:
        return BoundWitness(tuple(names), True, None)
    box = []
    for x in names:
        proj = g
        for y in names:
            if y != x:
                proj = cooper(y, proj)
        if proj == F:
            return BoundWitness(tuple(names), True, None)
        if proj == T:
            return BoundWitness(tuple(names), False, None, (x, 0, 1))
        lo, hi, ray = _one_var_solutions(proj, x)
        if ray is not None:
            return BoundWitness(tuple(names), False, None, ray)
        if lo is None:
            return BoundWitness(tuple(names), True, None)
        box.append((int(lo), int(hi)))
    return BoundWitness(tuple(names), True, tuple(box))


def enumerate_solutions(f: Formula, box, variables: Sequence[Var | str] | None = None) -> list[tuple[int, ...]]:
    """All integer solutions of quantifier-free ``f`` inside ``box``,
    lexicographically sorted.  ``box`` may be a :class:`BoundWitness`."""
    if isinstance(box, BoundWitness):
        if not box.bounded:
            raise ValueError("solution set is unbounded; no box to enumerate")
        if box.box is None:
            return []
        names = list(box.variables)
        box = box.box
    else:
        if box is None:
            raise ValueError("a box is required")
        if variables is None:
            names = sorted(v.name for v in free_vars(f))
        else:
            names = [v.name if isinstance(v, Var) else v for v in variables]
    if len(box) != len(names):
        raise ValueError("box dimension does not match the variables")
    g = to_internal(f)
    ranges = [range(lo, hi + 1) for lo, hi in box]
    out = []
    for point in itertools.product(*ranges):
        if evaluate(g, dict(zip(names, point))):
            out.append(tuple(point))
    return out


# ---------------------------------------------------------------- uniform bound

DEFAULT_PRIMES = (3, 5, 7, 11, 13)


class UnboundedUnderModel(ValueError):
    """An unbounded Presburger piece whose residue guard holds at a sampled prime."""

    def __init__(self, message: str, prime: int, disjunct: int):
        super().__init__(message)
        self.prime = prime
        self.disjunct = disjunct


@dataclass
class UniformBound:
    variables: tuple[str, ...]
    solutions: list[tuple[int, ...]]
    excluded_primes: set[int]
    reasons: dict[int, list[str]]
    bounded: list[int] = field(default_factory=list)
    unbounded: list[int] = field(default_factory=list)
    guard_status: list[dict[int, str]] = field(default_factory=list)
    sampled_primes: tuple[int, ...] = ()

    @property
    def C(self) -> list[tuple[int, ...]]:
        return self.solutions


def classify_guard(psi: Formula, primes: Iterable[int]) -> dict[int, bool]:
    from .models import eval_residue

    return {p: eval_residue(psi, p) for p in primes}


def uniform_bound(theta: Formula, primes: Iterable[int] = DEFAULT_PRIMES, variables: Sequence[Var | str] | None = None) -> UniformBound:
    """Finite set C of value-group tuples containing the solutions of
    ``theta`` in every sampled model whose residue characteristic avoids the
    exclusion ledger.

    The residue guard of each disjunct is evaluated over F_p for the sampled
    primes; bounded pieces are always collected (their guard may hold in some
    unsampled model), unbounded pieces are acceptable only when the guard is
    false at every sampled prime.
    """
    from .separation import separate

    for v in free_vars(theta):
        if v.sort is not Sort.VG:
            raise FragmentError(f"free {v.sort.value} variable {v.name}; only value-group variables may be free")
    if variables is None:
        names = tuple(sorted(v.name for v in free_vars(theta)))
    else:
        names = tuple(v.name if isinstance(v, Var) else v for v in variables)
    form, ledger = separate(theta)
    primes = tuple(p for p in primes if p not in ledger.primes)
    result = UniformBound(names, [], set(ledger.primes), {p: list(r) for p, r in ledger.reasons.items()}, sampled_primes=primes)
    found = set()
    for i, (psi, lin) in enumerate(form.disjuncts):
        status = classify_guard(psi, primes)
        result.guard_status.append({p: ("true" if v else "false") for p, v in status.items()})
        qf = eliminate_quantifiers(lin)
        witness = decide_bounded(qf, names)
        if witness.bounded:
            result.bounded.append(i)
            found.update(enumerate_solutions(qf, witness))
            continue
        holding = [p for p, v in status.items() if v]
        if holding:
            raise UnboundedUnderModel(
                f"unbounded under sampled model: disjunct {i} has unbounded value-group part "
                f"and its residue guard holds at p={holding[0]}",
                holding[0],
                i,
            )
        result.unbounded.append(i)
    result.solutions = sorted(found)
    return result
