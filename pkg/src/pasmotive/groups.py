"""GL(n) and gl(n): definable sets, Cartan decomposition, double-coset indices.

The end-to-end scope is GL(2); constructors for general n exist where the
formulas are uniform in n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .formula import (
    Add,
    Atom,
    Const,
    Divides,
    Exists,
    Formula,
    Mul,
    Not,
    Ord,
    Ac,
    Pi,
    Sort,
    Sub,
    Quot,
    Term,
    Var,
    conj,
    disj,
    entry,
    matrix_vars,
)
from .measure import BudgetExceeded, DefinableSet
from .models import INF, TruncatedElement
from .qpoly import QPolynomial

ZERO = Const(Fraction(0), Sort.VF)
ONE = Const(Fraction(1), Sort.VF)
Matrix = list[list[Term]]


class PrecisionError(ValueError):
    """An elementary divisor valuation is not determined at this precision."""


# ---------------------------------------------------------------- symbolic matrices


def _add(a: Term, b: Term) -> Term:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def _mul(a: Term, b: Term) -> Term:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Mul(a, b)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n, k, m = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            t = ZERO
            for r in range(k):
                t = _add(t, _mul(a[i][r], b[r][j]))
            row.append(t)
        out.append(row)
    return out


def _permutation_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def det(a: Matrix) -> Term:
    """Leibniz expansion."""
    n = len(a)
    total = None
    for perm in itertools.permutations(range(n)):
        t = ONE
        for i in range(n):
            t = _mul(t, a[i][perm[i]])
        if t == ZERO:
            continue
        if total is None:
            total = t if _permutation_sign(perm) > 0 else Sub(ZERO, t)
        else:
            total = Add(total, t) if _permutation_sign(perm) > 0 else Sub(total, t)
    return total if total is not None else ZERO


def adjugate(a: Matrix) -> Matrix:
    n = len(a)
    if n == 1:
        return [[ONE]]
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1 :] for k, row in enumerate(a) if k != i]
            c = det(minor)
            out[j][i] = c if (i + j) % 2 == 0 else Sub(ZERO, c)
    return out


def inverse(a: Matrix) -> Matrix:
    d = det(a)
    return [[Quot(x, d) for x in row] for row in adjugate(a)]


def symbolic(name: str, n: int) -> Matrix:
    return [[v for v in row] for row in matrix_vars(name, n)]


def torus(m: Sequence[int], units: Sequence[Term] | None = None) -> Matrix:
    """diag(u_1 pi^m_1, ..., u_n pi^m_n)."""
    n = len(m)
    out = [[ZERO] * n for _ in range(n)]
    for i, mi in enumerate(m):
        d: Term = Pi(mi)
        if units is not None:
            d = Mul(units[i], d)
        out[i][i] = d
    return out


def discriminant(a: Matrix) -> Term:
    """Discriminant of the characteristic polynomial (n = 2)."""
    if len(a) != 2:
        raise ValueError("discriminant is implemented for 2x2 matrices")
    diff = Sub(a[0][0], a[1][1])
    return Add(Mul(diff, diff), Mul(Const(Fraction(4), Sort.VF), Mul(a[0][1], a[1][0])))


def integral(a: Matrix) -> Formula:
    return conj(*(Atom(">=", Ord(x), Const(Fraction(0), Sort.VG)) for row in a for x in row))


def unit(t: Term) -> Formula:
    return Atom("=", Ord(t), Const(Fraction(0), Sort.VG))


def flat(name: str, n: int) -> tuple[Var, ...]:
    return tuple(v for row in matrix_vars(name, n) for v in row)


# ---------------------------------------------------------------- context


@dataclass(frozen=True)
class GroupContext:
    n: int = 2

    @property
    def dim(self) -> int:
        return self.n * self.n

    @property
    def rank(self) -> int:
        return self.n

    def torus(self, m: Sequence[int]) -> Matrix:
        if len(m) != self.n:
            raise ValueError(f"expected {self.n} exponents")
        return torus(m)

    @property
    def g_q(self) -> QPolynomial:
        """[G]_q = |GL(n, F_q)| q^(-n^2) = prod_{i=1}^n (1 - q^(-i))."""
        out = QPolynomial.constant(1)
        for i in range(1, self.n + 1):
            out = out * (1 - QPolynomial.q(-i))
        return out


def gl_order(n: int, q: int) -> int:
    """|GL(n, F_q)| by the standard product."""
    out = 1
    for i in range(n):
        out *= q**n - q**i
    return out


# ---------------------------------------------------------------- definable sets


def build_glO(n: int, name: str = "X") -> DefinableSet:
    x = symbolic(name, n)
    return DefinableSet(integral(x), flat(name, n), f"gl({n},O)")


def build_K(n: int, name: str = "X") -> DefinableSet:
    x = symbolic(name, n)
    return DefinableSet(conj(integral(x), unit(det(x))), flat(name, n), f"GL({n},O)")


def regular_semisimple(x: Matrix) -> Formula:
    """n = 2: distinct eigenvalues."""
    return Atom("!=", discriminant(x), ZERO)


def split_condition(x: Matrix, xi: str = "xi") -> Formula:
    """The discriminant is a square: even valuation and square angular component."""
    d = discriminant(x)
    v = Var(xi, Sort.RF)
    return Exists(v, conj(Atom("=", Ac(d), Mul(v, v)), Divides(2, Ord(d))))


def elliptic(x: Matrix) -> Formula:
    """Regular semisimple and not conjugate into the standard Borel (n = 2, p odd)."""
    return conj(regular_semisimple(x), Not(split_condition(x)))


def build_regular_semisimple_elliptic(n: int = 2, name: str = "X") -> dict[str, DefinableSet]:
    if n != 2:
        raise NotImplementedError("regular semisimple / elliptic loci are implemented for n = 2")
    x = symbolic(name, n)
    sig = flat(name, n)
    base = integral(x)
    return {
        "regular_semisimple": DefinableSet(conj(base, regular_semisimple(x)), sig, "rs"),
        "elliptic": DefinableSet(conj(base, elliptic(x)), sig, "elliptic"),
    }


def example_z_matrix(a: Term, b: Term, u: Term) -> Matrix:
    return [[a, b], [Mul(u, b), a]]


def example_z(elliptic_only: bool = True, unit_discriminant: bool = False) -> DefinableSet:
    """The family [[a, b], [u b, a]] with u a unit and a, b integral.

    Its elliptic members are those with u a non-square unit; with
    ``unit_discriminant`` the discriminant 4 u b^2 is also required to be a
    unit, which makes the set stable.
    """
    a, b, u = (Var(s, Sort.VF) for s in ("a", "b", "u"))
    zero = Const(Fraction(0), Sort.VG)
    parts = [
        unit(u),
        Atom(">=", Ord(a), zero),
        Atom(">=", Ord(b), zero),
        Atom("!=", Sub(Mul(a, a), Mul(u, Mul(b, b))), ZERO),
        Atom("!=", b, ZERO),
    ]
    if unit_discriminant:
        parts.append(unit(discriminant(example_z_matrix(a, b, u))))
    if elliptic_only:
        xi = Var("xi", Sort.RF)
        parts.append(Not(Exists(xi, Atom("=", Ac(u), Mul(xi, xi)))))
    return DefinableSet(conj(*parts), (a, b, u), "Z")


def elliptic_unit_discriminant(name: str = "X") -> DefinableSet:
    """Open elliptic locus with unit discriminant inside gl(2, O)."""
    x = symbolic(name, 2)
    d = discriminant(x)
    xi = Var("xi", Sort.RF)
    body = conj(integral(x), unit(d), Not(Exists(xi, Atom("=", Ac(d), Mul(xi, xi)))))
    return DefinableSet(body, flat(name, 2), "E")


# ---------------------------------------------------------------- Cartan decomposition


def _minors(rows: list, k: int):
    n = len(rows)
    for r in itertools.combinations(range(n), k):
        for c in itertools.combinations(range(n), k):
            yield [[rows[i][j] for j in c] for i in r]


def _det_elements(a):
    n = len(a)
    if n == 1:
        return a[0][0]
    total = None
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in a[1:]]
        t = a[0][j] * _det_elements(minor)
        if total is None:
            total = t if j % 2 == 0 else -t
        else:
            total = total + t if j % 2 == 0 else total - t
    return total


def _min_valuation(values: list[TruncatedElement]) -> int:
    best = None
    floor = INF
    for v in values:
        val = v.valuation
        if val is None:
            floor = min(floor, v.prec)
        elif best is None or val < best:
            best = val
    if best is None or best == INF:
        raise PrecisionError("no minor has a determined valuation")
    if floor <= best:
        raise PrecisionError(f"a minor is only known modulo pi^{floor}, not enough to certify valuation {best}")
    return int(best)


def cartan_decompose(g: Sequence[Sequence[TruncatedElement]]) -> tuple[int, ...]:
    """Exponents m_1 >= ... >= m_n with g in K diag(pi^m) K.

    d_k, the least valuation of a k x k minor, equals the sum of the k
    smallest exponents.
    """
    rows = [list(r) for r in g]
    n = len(rows)
    d = [0]
    for k in range(1, n + 1):
        d.append(_min_valuation([_det_elements(m) for m in _minors(rows, k)]))
    e = [d[k] - d[k - 1] for k in range(1, n + 1)]
    return tuple(sorted(e, reverse=True))


def cartan_cell(m: Sequence[int], name: str = "g") -> DefinableSet:
    """K diag(pi^m) K as a definable set (entries need not be integral)."""
    m = sorted(m, reverse=True)
    n = len(m)
    x = symbolic(name, n)
    parts = []
    for k in range(1, n + 1):
        target = sum(m[n - k :])
        vals = [Ord(det(minor)) for minor in _minors(x, k)]
        parts.append(conj(*(Atom(">=", v, Const(Fraction(target), Sort.VG)) for v in vals)))
        parts.append(disj(*(Atom("=", v, Const(Fraction(target), Sort.VG)) for v in vals)))
    return DefinableSet(conj(*parts), flat(name, n), f"K pi^{tuple(m)} K")


# ---------------------------------------------------------------- coset index


def _q_factorial(k: int) -> QPolynomial:
    # [k]! in the variable q^-1: prod_{i=1}^k (1 - q^-i) / (1 - q^-1)
    out = QPolynomial.constant(1)
    for i in range(1, k + 1):
        term = QPolynomial.constant(0)
        for j in range(i):
            term = term + QPolynomial.q(-j)
        out = out * term
    return out


@dataclass(frozen=True)
class CosetIndex:
    m: tuple[int, ...]
    index: QPolynomial


def coset_index(m: Sequence[int]) -> CosetIndex:
    """[K diag(pi^m) K : K] as a polynomial in q.

    q^(sum_{i<j} (m_i - m_j)) times the q^-1 multinomial coefficient
    [n]! / prod [block]! over blocks of equal exponents.
    """
    m = tuple(m)
    if list(m) != sorted(m, reverse=True):
        raise ValueError("m must be sorted in descending order")
    n = len(m)
    shift = sum(m[i] - m[j] for i in range(n) for j in range(i + 1, n))
    num = _q_factorial(n)
    den = QPolynomial.constant(1)
    for _, block in itertools.groupby(m):
        den = den * _q_factorial(len(list(block)))
    quotient = _divide(num, den)
    return CosetIndex(m, QPolynomial.q(shift) * quotient)


def _divide(num: QPolynomial, den: QPolynomial) -> QPolynomial:
    """Exact division of polynomials in q^-1."""
    # work with exponents negated so that these are ordinary polynomials
    a = {-k: c for k, c in num.coeffs}
    b = {-k: c for k, c in den.coeffs}
    db = max(b)
    out: dict[int, Fraction] = {}
    while a and max(a) >= db:
        da = max(a)
        c = a[da] / b[db]
        out[da - db] = c
        for k, v in b.items():
            a[k + da - db] = a.get(k + da - db, 0) - c * v
            if a[k + da - db] == 0:
                del a[k + da - db]
    if a:
        raise ArithmeticError("inexact division")
    return QPolynomial.of({-k: c for k, c in out.items()})


def hermite_representatives(a: Sequence[int], p: int):
    """Upper triangular [[pi^a_1, x], [0, pi^a_2], ...] with entries of row
    i reduced modulo pi^a_i: one matrix per lattice with these diagonal
    exponents."""
    n = len(a)
    slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
    ranges = [range(p ** a[i]) for i, _ in slots]
    for values in itertools.product(*ranges):
        g = [[0] * n for _ in range(n)]
        for i in range(n):
            g[i][i] = p ** a[i]
        for (i, j), v in zip(slots, values):
            g[i][j] = v
        yield g


def coset_index_bruteforce(m: Sequence[int], p: int, model: str = "padic", budget: int = 10**7) -> int:
    """Number of left cosets gK inside K diag(pi^m) K, by enumerating the
    lattices g O^n in Hermite normal form and testing their Cartan type."""
    m = tuple(sorted(m, reverse=True))
    base = m[-1]
    shifted = tuple(x - base for x in m)
    total = sum(shifted)
    n = len(m)
    count = 0
    work = 0
    for a in itertools.product(range(total + 1), repeat=n):
        if sum(a) != total:
            continue
        for g in hermite_representatives(a, p):
            work += 1
            if work > budget:
                raise BudgetExceeded(f"coset enumeration exceeded budget {budget}")
            elements = [[TruncatedElement.from_rational(model, p, x) if model == "padic" else _digits_element(x, p) for x in row] for row in g]
            if cartan_decompose(elements) == shifted:
                count += 1
    return count


def _digits_element(x: int, p: int) -> TruncatedElement:
    ds = []
    while x:
        ds.append(x % p)
        x //= p
    return TruncatedElement.from_digits("laurent", p, ds, 0, None)
