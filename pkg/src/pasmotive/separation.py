"""Separation of sorts for formulas whose valued-field material is constant.

A formula with no valued-field quantifiers and no free valued-field variables
only mentions valued-field terms built from rational constants and powers of
the uniformizer.  Outside finitely many primes each such term is either 0 or
``c * pi^k`` with ``c`` a unit, so ``ord`` and ``ac`` of it are known
constants.  After rewriting, the formula splits into a disjunction of
``psi_i and L_i`` with ``psi_i`` a residue-sort formula and ``L_i`` a
Presburger formula.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .formula import (
    FALSE,
    TRUE,
    Ac,
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
    Infinity,
    Mul,
    Not,
    Or,
    Ord,
    Pi,
    Quot,
    Sort,
    Sub,
    Term,
    TrueF,
    Var,
    check_sorts,
    conj,
    disj,
    formula_text,
    free_vars,
    prime_factors,
    sort_of,
    to_nnf,
)


LEDGER_SCOPE = (
    "excluded primes come from non-unit constants and residue-field sampling only; "
    "no valued-field quantifier elimination contributes to this set"
)


@dataclass
class ExclusionLedger:
    """Primes outside of which the rewrites are valid, with reasons."""

    primes: set[int] = field(default_factory=set)
    reasons: dict[int, list[str]] = field(default_factory=lambda: defaultdict(list))

    def exclude(self, p: int, reason: str) -> None:
        self.primes.add(p)
        if reason not in self.reasons[p]:
            self.reasons[p].append(reason)

    def exclude_constant(self, c: Fraction, where: str) -> None:
        c = Fraction(c)
        if c == 0:
            return
        for p in sorted(prime_factors(c.numerator) | prime_factors(c.denominator)):
            self.exclude(p, f"constant {c} is not a unit at {p} ({where})")

    def merge(self, other: ExclusionLedger) -> None:
        for p in other.primes:
            for r in other.reasons[p]:
                self.exclude(p, r)

    def as_dict(self) -> dict:
        return {str(p): list(self.reasons[p]) for p in sorted(self.primes)}


@dataclass(frozen=True)
class SortSeparatedForm:
    """``or_i (psi_i and L_i)``; an empty list is false."""

    disjuncts: tuple[tuple[Formula, Formula], ...]

    def formula(self) -> Formula:
        return disj(*(conj(psi, lin) for psi, lin in self.disjuncts))

    def __str__(self) -> str:
        if not self.disjuncts:
            return "false"
        return " or ".join(f"[{formula_text(p)}] and [{formula_text(l)}]" for p, l in self.disjuncts)


# ---------------------------------------------------------------- constant terms

INFINITE = "inf"


def _pi_poly(t: Term, ledger: ExclusionLedger) -> dict[int, Fraction]:
    """Valued-field constant term as ``{k: c}`` meaning ``sum c * pi^k``."""
    if isinstance(t, Const):
        return {0: t.value} if t.value else {}
    if isinstance(t, Pi):
        return {t.exponent: Fraction(1)}
    if isinstance(t, Var):
        raise FragmentError(f"free valued-field variable {t.name}; use the measure engine for definable sets")
    left, right = _pi_poly(t.left, ledger), _pi_poly(t.right, ledger)
    if isinstance(t, (Add, Sub)):
        sign = 1 if isinstance(t, Add) else -1
        out = dict(left)
        for k, c in right.items():
            out[k] = out.get(k, 0) + sign * c
        return {k: c for k, c in out.items() if c}
    if isinstance(t, Mul):
        out: dict[int, Fraction] = {}
        for k1, c1 in left.items():
            for k2, c2 in right.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + c1 * c2
        return {k: c for k, c in out.items() if c}
    if isinstance(t, Quot):
        if len(right) != 1:
            raise FragmentError(f"division by a non-monomial constant in {t}")
        (k2, c2), = right.items()
        return {k - k2: c / c2 for k, c in left.items()}
    raise FragmentError(f"unsupported valued-field term {t}")


def _leading(t: Term, ledger: ExclusionLedger, where: str):
    """(ord, ac coefficient) of a constant term; ord is INFINITE for zero."""
    poly = _pi_poly(t, ledger)
    if not poly:
        return INFINITE, Fraction(0)
    k = min(poly)
    # higher terms only need to be integral, the leading one must be a unit
    for j, c in poly.items():
        ledger.exclude_constant(c if j == k else Fraction(c.denominator), where)
    return k, poly[k]


# the value-group side: linear terms that may absorb +inf


def _vg_rewrite(t: Term, ledger: ExclusionLedger, where: str):
    """Return a Presburger term, or INFINITE if the term is +inf.

    +inf is absorbing under addition, subtraction and multiplication by a
    nonzero constant; ``0 * inf`` is 0.
    """
    if isinstance(t, (Var, Const)):
        return t
    if isinstance(t, Infinity):
        return INFINITE
    if isinstance(t, Ord):
        k, _ = _leading(t.arg, ledger, where)
        return INFINITE if k == INFINITE else Const(Fraction(k), Sort.VG)
    if isinstance(t, Mul):
        left, right = _vg_rewrite(t.left, ledger, where), _vg_rewrite(t.right, ledger, where)
        for a, b in ((left, right), (right, left)):
            if a == INFINITE:
                if isinstance(b, Const) and b.value == 0:
                    return b
                return INFINITE
        return Mul(left, right)
    left, right = _vg_rewrite(t.left, ledger, where), _vg_rewrite(t.right, ledger, where)
    if left == INFINITE or right == INFINITE:
        return INFINITE
    return type(t)(left, right)


def _rf_rewrite(t: Term, ledger: ExclusionLedger, where: str) -> Term:
    if isinstance(t, Var):
        return t
    if isinstance(t, Const):
        ledger.exclude_constant(Fraction(t.value.denominator), where)
        return t
    if isinstance(t, Ac):
        _, c = _leading(t.arg, ledger, where)
        return Const(c, Sort.RF)
    return type(t)(_rf_rewrite(t.left, ledger, where), _rf_rewrite(t.right, ledger, where))


# ---------------------------------------------------------------- separation

Pairs = list[tuple[Formula, Formula]]


def _simplify(pairs: Pairs) -> Pairs:
    merged: dict[Formula, list[Formula]] = {}
    order = []
    for psi, lin in pairs:
        if isinstance(psi, FalseF) or isinstance(lin, FalseF):
            continue
        if lin not in merged:
            merged[lin] = []
            order.append(lin)
        if psi not in merged[lin]:
            merged[lin].append(psi)
    out = []
    for lin in order:
        psis = merged[lin]
        psi = TRUE if any(isinstance(p, TrueF) for p in psis) else disj(*psis)
        out.append((psi, lin))
    return out


def _negate(pairs: Pairs) -> Pairs:
    # not or_i (psi_i and L_i) = and_i (not psi_i or not L_i)
    acc: Pairs = [(TRUE, TRUE)]
    for psi, lin in pairs:
        options = []
        if not isinstance(psi, TrueF):
            options.append((to_nnf(Not(psi)), TRUE))
        if not isinstance(lin, TrueF):
            options.append((TRUE, to_nnf(Not(lin))))
        acc = _simplify([(conj(a, c), conj(b, d)) for a, b in acc for c, d in options])
        if not acc:
            return []
    return acc


def _compare_infinite(op: str, left_inf: bool, right_inf: bool) -> bool:
    # both sides infinite or exactly one: +inf is above every integer
    if left_inf and right_inf:
        return op in ("=", "<=", ">=")
    if left_inf:
        return op in ("!=", ">", ">=")
    return op in ("!=", "<", "<=")


def _literal(f: Formula, ledger: ExclusionLedger) -> Pairs:
    where = formula_text(f)
    if isinstance(f, TrueF):
        return [(TRUE, TRUE)]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, Not):
        return _negate(_literal(f.arg, ledger))
    if isinstance(f, Divides):
        t = _vg_rewrite(f.term, ledger, where)
        if t == INFINITE:
            return [(TRUE, TRUE)]
        return [(TRUE, Divides(f.modulus, t))]
    sort = sort_of(f.left)
    if sort is Sort.VF:
        # a = b becomes ac(a - b) = 0, decided by whether a - b is zero
        k, _ = _leading(Sub(f.left, f.right), ledger, where)
        zero = k == INFINITE
        return [(TRUE, TRUE)] if zero == (f.op == "=") else []
    if sort is Sort.RF:
        atom = Atom(f.op, _rf_rewrite(f.left, ledger, where), _rf_rewrite(f.right, ledger, where))
        return [(atom, TRUE)]
    left, right = _vg_rewrite(f.left, ledger, where), _vg_rewrite(f.right, ledger, where)
    if left == INFINITE or right == INFINITE:
        holds = _compare_infinite(f.op, left == INFINITE, right == INFINITE)
        return [(TRUE, TRUE)] if holds else []
    return [(TRUE, Atom(f.op, left, right))]


def _separate(f: Formula, ledger: ExclusionLedger) -> Pairs:
    if isinstance(f, Or):
        out: Pairs = []
        for a in f.args:
            out.extend(_separate(a, ledger))
        return _simplify(out)
    if isinstance(f, And):
        acc: Pairs = [(TRUE, TRUE)]
        for a in f.args:
            part = _separate(a, ledger)
            acc = _simplify([(conj(p1, p2), conj(l1, l2)) for p1, l1 in acc for p2, l2 in part])
            if not acc:
                return []
        return acc
    if isinstance(f, (Exists, Forall)):
        v = f.var
        if v.sort is Sort.VF:
            raise FragmentError(
                f"valued-field quantifier over {v.name}: outside the separable fragment; "
                "evaluate it with the measure engine instead"
            )
        if isinstance(f, Forall):
            # forall v. phi == not exists v. not phi
            inner = _negate(_separate(f.body, ledger))
            return _negate(_exists(v, inner))
        return _exists(v, _separate(f.body, ledger))
    return _literal(f, ledger)


def _exists(v: Var, pairs: Pairs) -> Pairs:
    out = []
    for psi, lin in pairs:
        if v.sort is Sort.RF:
            psi = Exists(v, psi) if v in free_vars(psi) else psi
        else:
            lin = Exists(v, lin) if v in free_vars(lin) else lin
        out.append((psi, lin))
    return _simplify(out)


def separate(theta: Formula) -> tuple[SortSeparatedForm, ExclusionLedger]:
    """Rewrite ``theta`` as ``or_i (psi_i and L_i)``.

    Valid in every model whose residue characteristic is not in the returned
    ledger.  Raises :class:`FragmentError` on valued-field quantifiers or free
    valued-field variables.
    """
    check_sorts(theta)
    for v in free_vars(theta):
        if v.sort is Sort.VF:
            raise FragmentError(f"free valued-field variable {v.name}; use the measure engine for definable sets")
    ledger = ExclusionLedger()
    pairs = _separate(to_nnf(theta), ledger)
    return SortSeparatedForm(tuple(pairs)), ledger
