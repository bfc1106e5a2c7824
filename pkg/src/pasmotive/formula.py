"""Sorted first-order syntax for Pas's three-sorted language of valued fields.

Terms and formulas are immutable dataclasses.  The three sorts are the valued
field (``VF``), its residue field (``RF``) and the value group (``VG``, the
integers augmented by ``+inf``).  ``ord`` maps VF to VG and ``ac`` maps VF to
RF.  Value-group terms must stay linear with integer coefficients so that the
value-group part of any formula is a Presburger formula.

Matrix-valued abbreviations are expanded by the parser into scalar variables
named ``X[i][j]`` (1-based); :func:`entry` builds such a variable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union


class Sort(Enum):
    VF = "vf"
    RF = "rf"
    VG = "vg"

    def __repr__(self) -> str:
        return f"Sort.{self.name}"


class SortError(TypeError):
    """Raised for ill-sorted terms or formulas."""


class FragmentError(ValueError):
    """Raised when a formula leaves the fragment an operation supports."""


# ---------------------------------------------------------------- terms


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return term_text(self)


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str
    sort: Sort


@dataclass(frozen=True, slots=True)
class Const(Term):
    """Numeric literal.  VG literals are integers; VF and RF literals are
    rationals (an RF rational is reduced modulo the residue characteristic)."""

    value: Fraction
    sort: Sort

    def __post_init__(self):
        value = Fraction(self.value)
        if self.sort is Sort.VG and value.denominator != 1:
            raise SortError(f"value-group literal must be an integer, got {value}")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True, slots=True)
class Infinity(Term):
    """The distinguished value-group constant +inf."""


@dataclass(frozen=True, slots=True)
class Pi(Term):
    """Integral power of the fixed uniformizer (p in Q_p, t in F_p((t)))."""

    exponent: int = 1


@dataclass(frozen=True, slots=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Sub(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Quot(Term):
    """Field division; valued-field sort only."""

    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Ord(Term):
    arg: Term


@dataclass(frozen=True, slots=True)
class Ac(Term):
    arg: Term


BINARY_TERMS = (Add, Sub, Mul, Quot)


def entry(name: str, i: int, j: int) -> Var:
    """Scalar variable for entry (i, j) of the matrix abbreviation ``name``."""
    return Var(f"{name}[{i}][{j}]", Sort.VF)


def matrix_vars(name: str, n: int) -> list[list[Var]]:
    return [[entry(name, i, j) for j in range(1, n + 1)] for i in range(1, n + 1)]


def vf(value) -> Const:
    return Const(Fraction(value), Sort.VF)


def rf(value) -> Const:
    return Const(Fraction(value), Sort.RF)


def vg(value: int) -> Const:
    return Const(Fraction(value), Sort.VG)


# ---------------------------------------------------------------- formulas


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return formula_text(self)

    def __and__(self, other: Formula) -> Formula:
        return conj(self, other)

    def __or__(self, other: Formula) -> Formula:
        return disj(self, other)

    def __invert__(self) -> Formula:
        return Not(self)


@dataclass(frozen=True, slots=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True, slots=True)
class FalseF(Formula):
    pass


TRUE = TrueF()
FALSE = FalseF()

RELATIONS = ("=", "!=", "<", "<=", ">", ">=")
NEGATED_RELATION = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    op: str
    left: Term
    right: Term

    def __post_init__(self):
        if self.op not in RELATIONS:
            raise ValueError(f"unknown relation {self.op!r}")


@dataclass(frozen=True, slots=True)
class Divides(Formula):
    """``modulus | term`` on the value group."""

    modulus: int
    term: Term

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("divisibility modulus must be positive")


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    args: tuple


@dataclass(frozen=True, slots=True)
class Or(Formula):
    args: tuple


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    var: Var
    body: Formula


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    var: Var
    body: Formula


QUANTIFIERS = (Exists, Forall)
ATOMIC = (Atom, Divides, TrueF, FalseF)


def conj(*args: Formula) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, And):
            flat.extend(a.args)
        elif isinstance(a, TrueF):
            continue
        elif isinstance(a, FalseF):
            return FALSE
        else:
            flat.append(a)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*args: Formula) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, Or):
            flat.extend(a.args)
        elif isinstance(a, FalseF):
            continue
        elif isinstance(a, TrueF):
            return TRUE
        else:
            flat.append(a)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def exists(variables: Iterable[Var], body: Formula) -> Formula:
    for v in reversed(list(variables)):
        body = Exists(v, body)
    return body


def forall(variables: Iterable[Var], body: Formula) -> Formula:
    for v in reversed(list(variables)):
        body = Forall(v, body)
    return body


# ---------------------------------------------------------------- sorts


def sort_of(t: Term) -> Sort:
    """Sort of a term, checking sort-correctness on the way down."""
    if isinstance(t, (Var, Const)):
        return t.sort
    if isinstance(t, Infinity):
        return Sort.VG
    if isinstance(t, Pi):
        return Sort.VF
    if isinstance(t, Ord):
        if sort_of(t.arg) is not Sort.VF:
            raise SortError(f"ord expects a valued-field argument: {t}")
        return Sort.VG
    if isinstance(t, Ac):
        if sort_of(t.arg) is not Sort.VF:
            raise SortError(f"ac expects a valued-field argument: {t}")
        return Sort.RF
    if isinstance(t, BINARY_TERMS):
        s1, s2 = sort_of(t.left), sort_of(t.right)
        if s1 is not s2:
            raise SortError(f"mixed sorts {s1.value}/{s2.value} in {t}")
        if isinstance(t, Quot) and s1 is not Sort.VF:
            raise SortError(f"division is only defined on the valued field: {t}")
        if isinstance(t, Mul) and s1 is Sort.VG:
            if not (_is_vg_constant(t.left) or _is_vg_constant(t.right)):
                raise SortError(f"value-group product must have a constant factor: {t}")
        return s1
    raise SortError(f"not a term: {t!r}")


def _is_vg_constant(t: Term) -> bool:
    if isinstance(t, Const):
        return True
    if isinstance(t, (Add, Sub, Mul)):
        return _is_vg_constant(t.left) and _is_vg_constant(t.right)
    return False


def check_sorts(f: Formula) -> None:
    """Raise :class:`SortError` if ``f`` is not well-sorted."""
    if isinstance(f, (TrueF, FalseF)):
        return
    if isinstance(f, Atom):
        s1, s2 = sort_of(f.left), sort_of(f.right)
        if s1 is not s2:
            raise SortError(f"atom compares {s1.value} with {s2.value}: {f}")
        if s1 is not Sort.VG and f.op not in ("=", "!="):
            raise SortError(f"order relation on {s1.value} sort: {f}")
        return
    if isinstance(f, Divides):
        if sort_of(f.term) is not Sort.VG:
            raise SortError(f"divisibility on non value-group term: {f}")
        return
    if isinstance(f, Not):
        return check_sorts(f.arg)
    if isinstance(f, (And, Or)):
        for a in f.args:
            check_sorts(a)
        return
    if isinstance(f, Implies):
        check_sorts(f.left)
        check_sorts(f.right)
        return
    if isinstance(f, QUANTIFIERS):
        return check_sorts(f.body)
    raise SortError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- traversal


def term_vars(t: Term) -> set[Var]:
    if isinstance(t, Var):
        return {t}
    if isinstance(t, (Ord, Ac)):
        return term_vars(t.arg)
    if isinstance(t, BINARY_TERMS):
        return term_vars(t.left) | term_vars(t.right)
    return set()


def free_vars(f: Formula) -> set[Var]:
    if isinstance(f, Atom):
        return term_vars(f.left) | term_vars(f.right)
    if isinstance(f, Divides):
        return term_vars(f.term)
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or)):
        out = set()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, Implies):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, QUANTIFIERS):
        return free_vars(f.body) - {f.var}
    return set()


def free_variables(f: Formula) -> set[tuple[str, Sort]]:
    """Unbound variables of ``f`` as ``(name, sort)`` pairs."""
    check_sorts(f)
    return {(v.name, v.sort) for v in free_vars(f)}


def all_vars(f: Formula) -> set[Var]:
    """Free and bound variables."""
    if isinstance(f, QUANTIFIERS):
        return all_vars(f.body) | {f.var}
    if isinstance(f, Not):
        return all_vars(f.arg)
    if isinstance(f, (And, Or)):
        out = set()
        for a in f.args:
            out |= all_vars(a)
        return out
    if isinstance(f, Implies):
        return all_vars(f.left) | all_vars(f.right)
    return free_vars(f)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, (Ord, Ac)):
        yield from subterms(t.arg)
    elif isinstance(t, BINARY_TERMS):
        yield from subterms(t.left)
        yield from subterms(t.right)


def atoms(f: Formula) -> Iterator[Formula]:
    if isinstance(f, (Atom, Divides)):
        yield f
    elif isinstance(f, Not):
        yield from atoms(f.arg)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from atoms(a)
    elif isinstance(f, Implies):
        yield from atoms(f.left)
        yield from atoms(f.right)
    elif isinstance(f, QUANTIFIERS):
        yield from atoms(f.body)


def atom_terms(a: Formula) -> tuple[Term, ...]:
    if isinstance(a, Atom):
        return (a.left, a.right)
    if isinstance(a, Divides):
        return (a.term,)
    return ()


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, QUANTIFIERS):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(is_quantifier_free(a) for a in f.args)
    if isinstance(f, Implies):
        return is_quantifier_free(f.left) and is_quantifier_free(f.right)
    return True


def rational_constants(f: Formula) -> set[Fraction]:
    """Valued-field and residue-field rational literals occurring in ``f``."""
    out = set()
    for a in atoms(f):
        for t in atom_terms(a):
            for s in subterms(t):
                if isinstance(s, Const) and s.sort is not Sort.VG:
                    out.add(s.value)
    return out


def prime_factors(n: int) -> set[int]:
    n = abs(n)
    out, d = set(), 2
    while d * d <= n:
        while n % d == 0:
            out.add(d)
            n //= d
        d += 1
    if n > 1:
        out.add(n)
    return out


def constant_exclusions(f: Formula) -> set[int]:
    """Primes at which some rational literal of ``f`` fails to be 0 or a unit."""
    out = set()
    for c in rational_constants(f):
        if c != 0:
            out |= prime_factors(c.numerator) | prime_factors(c.denominator)
    return out


# ---------------------------------------------------------------- substitution


def substitute_term(t: Term, binding: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        return binding.get(t, t)
    if isinstance(t, Ord):
        return Ord(substitute_term(t.arg, binding))
    if isinstance(t, Ac):
        return Ac(substitute_term(t.arg, binding))
    if isinstance(t, BINARY_TERMS):
        return type(t)(substitute_term(t.left, binding), substitute_term(t.right, binding))
    return t


def fresh_name(base: str, taken: set[str]) -> str:
    stem = base.rstrip("'")
    for k in itertools.count(1):
        candidate = stem + "'" * k
        if candidate not in taken:
            return candidate
    raise AssertionError("unreachable")


def substitute(f: Formula, binding: Mapping[Var, Term]) -> Formula:
    """Capture-avoiding substitution of free variables.

    >>> m, x = Var("m", Sort.VG), Var("x", Sort.VF)
    >>> str(substitute(Atom(">=", Ord(x), m), {m: vg(0)}))
    'ord(x) >= 0'
    """
    for v, t in binding.items():
        if sort_of(t) is not v.sort:
            raise SortError(f"cannot bind {v.sort.value} variable {v.name} to {sort_of(t).value} term {t}")
    return _subst(f, dict(binding))


def _subst(f: Formula, binding: dict[Var, Term]) -> Formula:
    if not binding:
        return f
    if isinstance(f, Atom):
        return Atom(f.op, substitute_term(f.left, binding), substitute_term(f.right, binding))
    if isinstance(f, Divides):
        return Divides(f.modulus, substitute_term(f.term, binding))
    if isinstance(f, Not):
        return Not(_subst(f.arg, binding))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_subst(a, binding) for a in f.args))
    if isinstance(f, Implies):
        return Implies(_subst(f.left, binding), _subst(f.right, binding))
    if isinstance(f, QUANTIFIERS):
        inner = {v: t for v, t in binding.items() if v != f.var}
        inner = {v: t for v, t in inner.items() if v in free_vars(f.body)}
        if not inner:
            return f
        incoming = set()
        for t in inner.values():
            incoming |= {v.name for v in term_vars(t)}
        var, body = f.var, f.body
        if var.name in incoming:
            taken = incoming | {v.name for v in all_vars(body)} | {v.name for v in inner}
            new = Var(fresh_name(var.name, taken), var.sort)
            body = _subst(body, {var: new})
            var = new
        return type(f)(var, _subst(body, inner))
    return f


# ---------------------------------------------------------------- normal forms


def eliminate_implications(f: Formula) -> Formula:
    if isinstance(f, Implies):
        return disj(Not(eliminate_implications(f.left)), eliminate_implications(f.right))
    if isinstance(f, Not):
        return Not(eliminate_implications(f.arg))
    if isinstance(f, And):
        return conj(*(eliminate_implications(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(eliminate_implications(a) for a in f.args))
    if isinstance(f, QUANTIFIERS):
        return type(f)(f.var, eliminate_implications(f.body))
    return f


def to_nnf(f: Formula) -> Formula:
    """Negation normal form: negations only directly above atoms."""
    return _nnf(eliminate_implications(f), False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, TrueF):
        return FALSE if neg else TRUE
    if isinstance(f, FalseF):
        return TRUE if neg else FALSE
    if isinstance(f, And):
        parts = [_nnf(a, neg) for a in f.args]
        return disj(*parts) if neg else conj(*parts)
    if isinstance(f, Or):
        parts = [_nnf(a, neg) for a in f.args]
        return conj(*parts) if neg else disj(*parts)
    if isinstance(f, Exists):
        return (Forall if neg else Exists)(f.var, _nnf(f.body, neg))
    if isinstance(f, Forall):
        return (Exists if neg else Forall)(f.var, _nnf(f.body, neg))
    return Not(f) if neg else f


def literal_key(f: Formula) -> str:
    return formula_text(f)


def to_dnf(f: Formula) -> Formula:
    """Disjunctive normal form of a quantifier-free formula.

    Literals inside each conjunct and the conjuncts themselves are sorted by
    their canonical text, so the output is reproducible and ``to_dnf`` is
    idempotent.  Conjuncts containing a literal and its negation are dropped.
    """
    if not is_quantifier_free(f):
        raise FragmentError("to_dnf expects a quantifier-free formula")
    return from_clauses(dnf_clauses(f))


def dnf_clauses(f: Formula) -> list[tuple[Formula, ...]]:
    """DNF as a sorted list of sorted literal tuples (empty tuple = true)."""
    clauses = _clauses(to_nnf(f))
    out = set()
    for c in clauses:
        lits = frozenset(c)
        if any(Not(l) in lits for l in lits if not isinstance(l, Not)):
            continue
        out.add(tuple(sorted(lits, key=literal_key)))
    if () in out:
        return [()]
    return sorted(out, key=lambda c: [literal_key(l) for l in c])


def _clauses(f: Formula) -> list[frozenset]:
    if isinstance(f, TrueF):
        return [frozenset()]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, Or):
        out = []
        for a in f.args:
            out.extend(_clauses(a))
        return out
    if isinstance(f, And):
        acc = [frozenset()]
        for a in f.args:
            part = _clauses(a)
            acc = [x | y for x in acc for y in part]
            if not acc:
                return []
        return acc
    return [frozenset([f])]


def from_clauses(clauses: list[tuple[Formula, ...]]) -> Formula:
    if not clauses:
        return FALSE
    return disj(*(conj(*c) if c else TRUE for c in clauses))


def rename_apart(f: Formula, taken: set[str] | None = None) -> Formula:
    """Rename bound variables so that no name is bound twice or also free."""
    used = set(taken or ()) | {v.name for v in free_vars(f)}
    return _rename(f, used)


def _rename(f: Formula, used: set[str]) -> Formula:
    if isinstance(f, QUANTIFIERS):
        var = f.var
        body = f.body
        if var.name in used:
            new = Var(fresh_name(var.name, used | {v.name for v in all_vars(body)}), var.sort)
            body = _subst(body, {var: new})
            var = new
        used.add(var.name)
        return type(f)(var, _rename(body, used))
    if isinstance(f, Not):
        return Not(_rename(f.arg, used))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_rename(a, used) for a in f.args))
    if isinstance(f, Implies):
        return Implies(_rename(f.left, used), _rename(f.right, used))
    return f


def to_prenex(f: Formula) -> Formula:
    """Prenex normal form (quantifier prefix over an NNF matrix)."""
    g = rename_apart(to_nnf(f))
    prefix: list[tuple[type, Var]] = []
    matrix = _pull(g, prefix)
    for q, v in reversed(prefix):
        matrix = q(v, matrix)
    return matrix


def _pull(f: Formula, prefix: list) -> Formula:
    if isinstance(f, QUANTIFIERS):
        prefix.append((type(f), f.var))
        return _pull(f.body, prefix)
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_pull(a, prefix) for a in f.args))
    return f


# ---------------------------------------------------------------- text


_PREC_ADD, _PREC_MUL = 1, 2


def _const_text(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _anchored(t: Term) -> bool:
    """True if the sort of ``t`` is readable from a non-literal subterm."""
    if isinstance(t, (Var, Infinity, Pi, Ord, Ac)):
        return True
    if isinstance(t, BINARY_TERMS):
        return _anchored(t.left) or _anchored(t.right)
    return False


def term_text(t: Term, prec: int = 0, tag: bool = False) -> str:
    """Canonical text of a term.

    Rational literals print as ``a/b`` without spaces (a single token) while
    field division prints as ``a / b``.  With ``tag`` set, literals carry an
    explicit ``:sort`` suffix, used when nothing else fixes their sort.
    """
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        s = _const_text(t.value)
        if tag:
            s = f"{s}:{t.sort.value}"
        if t.value < 0:
            return f"({s})" if prec > 0 else s
        return s
    if isinstance(t, Infinity):
        return "+inf"
    if isinstance(t, Pi):
        if t.exponent == 1:
            return "pi"
        return f"pi^{t.exponent}" if t.exponent >= 0 else f"pi^({t.exponent})"
    if isinstance(t, Ord):
        return f"ord({term_text(t.arg)})"
    if isinstance(t, Ac):
        return f"ac({term_text(t.arg)})"
    if isinstance(t, (Add, Sub)):
        op = "+" if isinstance(t, Add) else "-"
        s = f"{term_text(t.left, _PREC_ADD, tag)} {op} {term_text(t.right, _PREC_ADD + 1, tag)}"
        return f"({s})" if prec > _PREC_ADD else s
    if isinstance(t, (Mul, Quot)):
        op = "*" if isinstance(t, Mul) else " / "
        s = f"{term_text(t.left, _PREC_MUL, tag)}{op}{term_text(t.right, _PREC_MUL + 1, tag)}"
        return f"({s})" if prec > _PREC_MUL else s
    raise SortError(f"not a term: {t!r}")


# binding strength: quantifier/implication lowest, then or, and, not
def formula_text(f: Formula, prec: int = 0) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        tag = not (_anchored(f.left) or _anchored(f.right)) and sort_of(f.left) is not Sort.VG
        return f"{term_text(f.left, 0, tag)} {f.op} {term_text(f.right, 0, tag)}"
    if isinstance(f, Divides):
        return f"{f.modulus} | {term_text(f.term)}"
    if isinstance(f, Not):
        return f"not {formula_text(f.arg, 4)}"
    if isinstance(f, And):
        s = " and ".join(formula_text(a, 4) for a in f.args)
        return f"({s})" if prec > 3 else s
    if isinstance(f, Or):
        s = " or ".join(formula_text(a, 3) for a in f.args)
        return f"({s})" if prec > 2 else s
    if isinstance(f, Implies):
        s = f"{formula_text(f.left, 2)} -> {formula_text(f.right, 1)}"
        return f"({s})" if prec > 1 else s
    if isinstance(f, QUANTIFIERS):
        kw = "exists" if isinstance(f, Exists) else "forall"
        s = f"{kw} {f.var.sort.value} {f.var.name}. {formula_text(f.body, 0)}"
        return f"({s})" if prec > 0 else s
    raise SortError(f"not a formula: {f!r}")


Node = Union[Term, Formula]
