"""Laurent polynomials in q with rational coefficients, and exact fitting.

A fit looks for the smallest block of consecutive exponents inside a window
whose polynomial passes through every data point, solving the linear system
in exact rationals.  Held-out points are then checked exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class QPolynomial:
    """``sum coeffs[k] * q^k``; zero coefficients are never stored."""

    coeffs: tuple[tuple[int, Fraction], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[int, object]) -> QPolynomial:
        items = [(int(k), Fraction(v)) for k, v in mapping.items()]
        merged: dict[int, Fraction] = {}
        for k, v in items:
            merged[k] = merged.get(k, Fraction(0)) + v
        return cls(tuple(sorted((k, v) for k, v in merged.items() if v)))

    @classmethod
    def constant(cls, c) -> QPolynomial:
        return cls.of({0: c})

    @classmethod
    def q(cls, k: int = 1) -> QPolynomial:
        return cls.of({k: 1})

    def as_dict(self) -> dict[int, Fraction]:
        return dict(self.coeffs)

    def __call__(self, q) -> Fraction:
        q = Fraction(q)
        return sum((c * q**k for k, c in self.coeffs), Fraction(0))

    def _lift(self, other) -> QPolynomial:
        return other if isinstance(other, QPolynomial) else QPolynomial.constant(other)

    def __add__(self, other) -> QPolynomial:
        other = self._lift(other)
        d = self.as_dict()
        for k, c in other.coeffs:
            d[k] = d.get(k, Fraction(0)) + c
        return QPolynomial.of(d)

    __radd__ = __add__

    def __neg__(self) -> QPolynomial:
        return QPolynomial(tuple((k, -c) for k, c in self.coeffs))

    def __sub__(self, other) -> QPolynomial:
        return self + (-self._lift(other))

    def __rsub__(self, other) -> QPolynomial:
        return self._lift(other) - self

    def __mul__(self, other) -> QPolynomial:
        other = self._lift(other)
        d: dict[int, Fraction] = {}
        for k1, c1 in self.coeffs:
            for k2, c2 in other.coeffs:
                d[k1 + k2] = d.get(k1 + k2, Fraction(0)) + c1 * c2
        return QPolynomial.of(d)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> QPolynomial:
        if n < 0:
            if len(self.coeffs) != 1:
                raise ValueError("only monomials have Laurent-polynomial inverses")
            (k, c), = self.coeffs
            return QPolynomial.of({k * n: c**n})
        out = QPolynomial.constant(1)
        for _ in range(n):
            out = out * self
        return out

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def exponent_range(self) -> tuple[int, int] | None:
        if not self.coeffs:
            return None
        return self.coeffs[0][0], self.coeffs[-1][0]

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for k, c in reversed(self.coeffs):
            mag = abs(c)
            if k == 0:
                body = _frac(mag)
            else:
                power = "q" if k == 1 else f"q^{k}" if k > 0 else f"q^({k})"
                body = power if mag == 1 else f"{_frac(mag)}*{power}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def to_json(self) -> dict[str, str]:
        return {str(k): _frac(c) for k, c in self.coeffs}

    @classmethod
    def parse(cls, text: str) -> QPolynomial:
        """Inverse of ``str``: terms like ``3/2*q^(-2)``, ``- q``, ``7``."""
        s = text.replace(" ", "")
        if s == "0":
            return cls()
        out: dict[int, Fraction] = {}
        pos = 0
        term = re.compile(r"([+-]?)(?:(\d+(?:/\d+)?)\*?)?(q(?:\^(?:\((-?\d+)\)|(\d+)))?)?")
        while pos < len(s):
            m = term.match(s, pos)
            if not m or m.end() == pos or (m.group(2) is None and m.group(3) is None):
                raise ValueError(f"cannot parse polynomial {text!r} at {pos}")
            sign = -1 if m.group(1) == "-" else 1
            coef = Fraction(m.group(2)) if m.group(2) else Fraction(1)
            if m.group(3):
                k = int(m.group(4) or m.group(5) or 1)
            else:
                k = 0
            out[k] = out.get(k, Fraction(0)) + sign * coef
            pos = m.end()
        return cls.of(out)


def _frac(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


# ---------------------------------------------------------------- fitting


class FitError(ValueError):
    """No Laurent polynomial in the window explains the data."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


def solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan elimination over Q; None if singular."""
    n = len(matrix)
    a = [list(map(Fraction, row)) + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n] for row in a]


def interpolate(points: Sequence[tuple[int, Fraction]], lo: int, hi: int) -> QPolynomial | None:
    """The polynomial with exponents lo..hi through the first hi-lo+1 points."""
    k = hi - lo + 1
    pts = list(points)[:k]
    if len(pts) < k:
        return None
    matrix = [[Fraction(q) ** e for e in range(lo, hi + 1)] for q, _ in pts]
    sol = solve_exact(matrix, [Fraction(v) for _, v in pts])
    if sol is None:
        return None
    return QPolynomial.of({e: c for e, c in zip(range(lo, hi + 1), sol)})


@dataclass(frozen=True)
class FitResult:
    polynomial: QPolynomial
    window: tuple[int, int]
    points: tuple[tuple[int, Fraction], ...]
    validated: tuple[tuple[int, Fraction, Fraction], ...]  # (q, expected, predicted)


def fit_laurent(
    points: Iterable[tuple[int, object]],
    window: tuple[int, int] = (-8, 8),
    holdout: Iterable[tuple[int, object]] = (),
    fixed: QPolynomial | None = None,
) -> FitResult:
    """Smallest exponent block in ``window`` fitting every point exactly.

    Among blocks with the fewest coefficients, all fits must agree; if the
    data only just determine the coefficients and several blocks fit, the
    result is ambiguous and a :class:`FitError` is raised.  Held-out points
    must then match exactly.

    ``fixed`` holds terms known in advance (say a leading term forced by a
    dimension count); only the remainder is fitted, inside ``window``.
    """
    if fixed is not None and not fixed.is_zero():
        rest = fit_laurent([(q, Fraction(v) - fixed(q)) for q, v in points], window)
        full = FitResult(fixed + rest.polynomial, rest.window, tuple((int(q), Fraction(v)) for q, v in points), ())
        return _validate(full, holdout)
    pts = [(int(q), Fraction(v)) for q, v in points]
    if len({q for q, _ in pts}) != len(pts):
        raise ValueError("fit points must have distinct q")
    if not pts:
        raise ValueError("no points to fit")
    lo, hi = window
    if lo > hi:
        raise ValueError("empty exponent window")
    if all(v == 0 for _, v in pts):
        poly = QPolynomial()
        return _validate(FitResult(poly, (0, -1), tuple(pts), ()), holdout)
    best_residuals = None
    for k in range(1, min(len(pts), hi - lo + 1) + 1):
        fits = []
        for a in range(lo, hi - k + 2):
            poly = interpolate(pts, a, a + k - 1)
            if poly is None:
                continue
            residuals = {q: v - poly(q) for q, v in pts}
            if all(r == 0 for r in residuals.values()):
                fits.append((poly, (a, a + k - 1)))
            elif best_residuals is None or k == min(len(pts), hi - lo + 1):
                best_residuals = {str(q): _frac(r) for q, r in residuals.items()}
        if not fits:
            continue
        distinct = {f[0] for f in fits}
        if len(distinct) > 1:
            raise FitError(
                f"ambiguous: {len(distinct)} different polynomials with {k} coefficients fit "
                f"{len(pts)} points; add primes or narrow the window",
                {"candidates": [str(p) for p in sorted(distinct, key=str)]},
            )
        poly, win = fits[0]
        return _validate(FitResult(poly, win, tuple(pts), ()), holdout)
    raise FitError(f"no Laurent polynomial with exponents in [{lo}, {hi}] fits the data", best_residuals)


def _validate(result: FitResult, holdout) -> FitResult:
    checked = []
    residuals = {}
    for q, v in holdout:
        v = Fraction(v)
        pred = result.polynomial(q)
        checked.append((int(q), v, pred))
        if pred != v:
            residuals[str(q)] = _frac(v - pred)
    if residuals:
        raise FitError(f"fitted {result.polynomial} fails held-out validation", residuals)
    return FitResult(result.polynomial, result.window, result.points, tuple(checked))
