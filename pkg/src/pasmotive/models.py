"""Concrete models of Pas's language and three-valued evaluation.

Two valued-field models are supported for each prime p: the p-adic numbers
(``"padic"``) and formal Laurent series over F_p (``"laurent"``).  The
uniformizer is p, respectively t, and ``ac(x)`` is the residue of
``x * pi^(-ord(x))`` with ``ac(0) = 0``.

Elements are known modulo ``pi^prec`` (absolute precision) or exactly.  An
atom whose truth depends on digits beyond the known precision evaluates to
``None`` (unknown); connectives follow Kleene's strong three-valued logic.
Valued-field quantifiers must be guarded to range over the integer ring O and
are evaluated by enumerating O / pi^N O at the working precision N.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping

from .formula import (
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
    Implies,
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
    free_vars,
    term_vars,
)

INF = math.inf
MODELS = ("padic", "laurent")
# precision of an element about which nothing is known
_LOST = -(10**9)


class ExcludedPrimeError(ValueError):
    """A rational constant is not integral at the residue characteristic."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def check_prime(p: int) -> None:
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")


# ---------------------------------------------------------------- TriBool


class TriBool(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @classmethod
    def of(cls, value: bool | None) -> TriBool:
        if value is None:
            return cls.UNKNOWN
        return cls.TRUE if value else cls.FALSE

    def as_optional(self) -> bool | None:
        return None if self is TriBool.UNKNOWN else self is TriBool.TRUE

    def __and__(self, other: TriBool) -> TriBool:
        return TriBool.of(_and3(self.as_optional(), other.as_optional()))

    def __or__(self, other: TriBool) -> TriBool:
        return TriBool.of(_or3(self.as_optional(), other.as_optional()))

    def __invert__(self) -> TriBool:
        v = self.as_optional()
        return TriBool.of(None if v is None else not v)


def _and3(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or3(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


# ---------------------------------------------------------------- residue field


@dataclass(frozen=True)
class FiniteFieldElement:
    """Element of the prime field F_p."""

    p: int
    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.p)

    def _coerce(self, other) -> int:
        if isinstance(other, FiniteFieldElement):
            if other.p != self.p:
                raise ValueError("elements of different fields")
            return other.value
        return int(other) % self.p

    def __add__(self, other):
        return FiniteFieldElement(self.p, self.value + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return FiniteFieldElement(self.p, self.value - self._coerce(other))

    def __rsub__(self, other):
        return FiniteFieldElement(self.p, self._coerce(other) - self.value)

    def __mul__(self, other):
        return FiniteFieldElement(self.p, self.value * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return FiniteFieldElement(self.p, -self.value)

    def inverse(self) -> FiniteFieldElement:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return FiniteFieldElement(self.p, pow(self.value, -1, self.p))

    def __truediv__(self, other):
        return self * FiniteFieldElement(self.p, self._coerce(other)).inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        return FiniteFieldElement(self.p, pow(self.value, k, self.p))

    def is_square(self) -> bool:
        if self.value == 0 or self.p == 2:
            return True
        return pow(self.value, (self.p - 1) // 2, self.p) == 1

    def __int__(self) -> int:
        return self.value


def residue_of(c: Fraction, p: int) -> int:
    """Reduction of a p-integral rational modulo p."""
    c = Fraction(c)
    if c.denominator % p == 0:
        raise ExcludedPrimeError(f"constant {c} is not integral at p={p}")
    return c.numerator * pow(c.denominator, -1, p) % p


# ---------------------------------------------------------------- valued field


def _vp_int(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _vp(x: Fraction, p: int) -> float:
    if x == 0:
        return INF
    return _vp_int(x.numerator, p) - _vp_int(x.denominator, p)


def _padic_reduce(x: Fraction, p: int, prec) -> Fraction:
    if prec is None or x == 0:
        return x
    v = _vp(x, p)
    if v >= prec:
        return Fraction(0)
    pv = Fraction(p) ** v
    u = x / pv
    mod = p ** (prec - v)
    digits = u.numerator * pow(u.denominator, -1, mod) % mod
    return pv * digits


def _laurent_norm(low: int, coeffs, p: int, prec) -> tuple:
    cs = [c % p for c in coeffs]
    start = 0
    while start < len(cs) and cs[start] == 0:
        start += 1
    if start == len(cs):
        return (0, ())
    low += start
    cs = cs[start:]
    if prec is not None:
        if low >= prec:
            return (0, ())
        cs = cs[: prec - low]
    while cs and cs[-1] == 0:
        cs.pop()
    return (low, tuple(cs))


def _laurent_add(x, y, p, prec, sign=1):
    if not x[1]:
        return _laurent_norm(y[0], [sign * c for c in y[1]], p, prec)
    if not y[1]:
        return _laurent_norm(x[0], x[1], p, prec)
    low = min(x[0], y[0])
    n = max(x[0] + len(x[1]), y[0] + len(y[1])) - low
    cs = [0] * n
    for i, c in enumerate(x[1]):
        cs[x[0] - low + i] += c
    for i, c in enumerate(y[1]):
        cs[y[0] - low + i] += sign * c
    return _laurent_norm(low, cs, p, prec)


def _laurent_mul(x, y, p, prec):
    if not x[1] or not y[1]:
        return (0, ())
    low = x[0] + y[0]
    n = len(x[1]) + len(y[1]) - 1
    if prec is not None:
        n = min(n, prec - low)
        if n <= 0:
            return (0, ())
    cs = [0] * n
    for i, a in enumerate(x[1]):
        if i >= n:
            break
        if a:
            for j, b in enumerate(y[1][: n - i]):
                cs[i + j] += a * b
    return _laurent_norm(low, cs, p, prec)


def _laurent_inverse(y, p, nterms):
    c = y[1]
    inv0 = pow(c[0], -1, p)
    d = [inv0]
    for k in range(1, nterms):
        s = 0
        for i in range(1, min(k, len(c) - 1) + 1):
            s += c[i] * d[k - i]
        d.append(-inv0 * s % p)
    return (-y[0], tuple(d))


# extra digits used when an exact Laurent quotient is not a Laurent polynomial
LAURENT_QUOTIENT_DIGITS = 64


@dataclass(frozen=True, slots=True)
class TruncatedElement:
    """Valued-field element known modulo pi^prec (``prec=None``: exact).

    ``value`` is a Fraction for p-adic elements and a pair
    ``(lowest exponent, coefficient tuple)`` for Laurent series.  Representatives
    are reduced modulo pi^prec.
    """

    model: str
    p: int
    value: object
    prec: int | None = None

    # construction ------------------------------------------------------
    @classmethod
    def from_digits(cls, model: str, p: int, digits: Iterable[int], shift: int = 0, prec: int | None = None):
        """``sum d_i pi^(shift+i) + O(pi^prec)``; the same digits give the same
        element in both models up to carries."""
        digits = tuple(int(d) % p for d in digits)
        if model == "padic":
            value = sum(Fraction(d) * Fraction(p) ** (shift + i) for i, d in enumerate(digits))
            return cls(model, p, _padic_reduce(Fraction(value), p, prec), prec)
        if model == "laurent":
            return cls(model, p, _laurent_norm(shift, digits, p, prec), prec)
        raise ValueError(f"unknown model {model!r}")

    @classmethod
    def from_rational(cls, model: str, p: int, c, prec: int | None = None):
        """Image of the rational constant ``c`` (reduced mod p in the Laurent model)."""
        c = Fraction(c)
        if model == "padic":
            return cls(model, p, _padic_reduce(c, p, prec), prec)
        if model == "laurent":
            return cls(model, p, _laurent_norm(0, [residue_of(c, p)], p, prec), prec)
        raise ValueError(f"unknown model {model!r}")

    @classmethod
    def uniformizer(cls, model: str, p: int, k: int = 1):
        if model == "padic":
            return cls(model, p, Fraction(p) ** k, None)
        return cls(model, p, (k, (1,)), None)

    @classmethod
    def lost(cls, model: str, p: int):
        """Element about which nothing is known."""
        zero = Fraction(0) if model == "padic" else (0, ())
        return cls(model, p, zero, _LOST)

    # inspection --------------------------------------------------------
    @property
    def exact(self) -> bool:
        return self.prec is None

    def _rep_valuation(self) -> float:
        if self.model == "padic":
            return _vp(self.value, self.p)
        return self.value[0] if self.value[1] else INF

    def valuation_lower_bound(self) -> float:
        v = self._rep_valuation()
        return v if self.prec is None else min(v, self.prec)

    @property
    def valuation(self) -> int | float | None:
        """``ord`` if determined (``inf`` for exact zero), else ``None``."""
        v = self._rep_valuation()
        if self.prec is None or v < self.prec:
            return v
        return None

    def ord_bounds(self) -> tuple:
        v = self.valuation
        if v is not None:
            return (v, v)
        return (self.prec, INF)

    def ac(self) -> int | None:
        v = self.valuation
        if v is None:
            return None
        if v == INF:
            return 0
        if self.model == "padic":
            u = self.value / Fraction(self.p) ** v
            return u.numerator * pow(u.denominator, -1, self.p) % self.p
        return self.value[1][0]

    @property
    def digits(self) -> tuple[int, ...]:
        """Unit digits d_0 (nonzero), d_1, ... known at this precision."""
        v = self.valuation
        if v is None or v == INF:
            return ()
        stop = self.prec if self.prec is not None else None
        if self.model == "laurent":
            cs = self.value[1]
            if stop is not None:
                cs = cs + (0,) * (stop - v - len(cs))
            return cs
        u = self.value / Fraction(self.p) ** v
        n = (stop - v) if stop is not None else None
        if n is None:
            if u.denominator != 1 or u < 0:
                raise ValueError("exact p-adic element has an infinite digit expansion")
            out, a = [], u.numerator
            while a:
                out.append(a % self.p)
                a //= self.p
            return tuple(out)
        mod = self.p**n
        a = u.numerator * pow(u.denominator, -1, mod) % mod
        out = []
        for _ in range(n):
            out.append(a % self.p)
            a //= self.p
        return tuple(out)

    def is_zero(self) -> bool | None:
        v = self.valuation
        if v is None:
            return None
        return v == INF

    # arithmetic --------------------------------------------------------
    def _check(self, other: TruncatedElement):
        if self.model != other.model or self.p != other.p:
            raise ValueError("elements of different models")

    def _min_prec(self, *precs):
        finite = [q for q in precs if q is not None and q != INF]
        if not finite:
            return None
        return int(max(min(finite), _LOST))

    def __add__(self, other: TruncatedElement) -> TruncatedElement:
        self._check(other)
        prec = self._min_prec(self.prec, other.prec)
        if self.model == "padic":
            return TruncatedElement(self.model, self.p, _padic_reduce(self.value + other.value, self.p, prec), prec)
        return TruncatedElement(self.model, self.p, _laurent_add(self.value, other.value, self.p, prec), prec)

    def __sub__(self, other: TruncatedElement) -> TruncatedElement:
        self._check(other)
        prec = self._min_prec(self.prec, other.prec)
        if self.model == "padic":
            return TruncatedElement(self.model, self.p, _padic_reduce(self.value - other.value, self.p, prec), prec)
        return TruncatedElement(self.model, self.p, _laurent_add(self.value, other.value, self.p, prec, -1), prec)

    def __neg__(self) -> TruncatedElement:
        if self.model == "padic":
            return TruncatedElement(self.model, self.p, _padic_reduce(-self.value, self.p, self.prec), self.prec)
        return TruncatedElement(self.model, self.p, _laurent_norm(self.value[0], [-c for c in self.value[1]], self.p, self.prec), self.prec)

    def __mul__(self, other: TruncatedElement) -> TruncatedElement:
        self._check(other)
        a, b = self.prec, other.prec
        va, vb = self.valuation_lower_bound(), other.valuation_lower_bound()
        bounds = []
        if a is not None:
            bounds.append(a + vb)
        if b is not None:
            bounds.append(b + va)
        prec = self._min_prec(*bounds)
        if self.model == "padic":
            return TruncatedElement(self.model, self.p, _padic_reduce(self.value * other.value, self.p, prec), prec)
        return TruncatedElement(self.model, self.p, _laurent_mul(self.value, other.value, self.p, prec), prec)

    def __truediv__(self, other: TruncatedElement) -> TruncatedElement:
        self._check(other)
        vy = other.valuation
        if vy is None or vy == INF:
            return TruncatedElement.lost(self.model, self.p)
        bounds = []
        if self.prec is not None:
            bounds.append(self.prec - vy)
        if other.prec is not None:
            bounds.append(self.valuation_lower_bound() + other.prec - 2 * vy)
        prec = self._min_prec(*bounds)
        if self.model == "padic":
            return TruncatedElement(self.model, self.p, _padic_reduce(self.value / other.value, self.p, prec), prec)
        if prec is None and len(other.value[1]) > 1:
            vx = self.valuation_lower_bound()
            prec = int(vx - vy + LAURENT_QUOTIENT_DIGITS) if vx != INF else None
        if prec is None:
            if not self.value[1]:
                return self
            inv = (-other.value[0], (pow(other.value[1][0], -1, self.p),))
            return TruncatedElement(self.model, self.p, _laurent_mul(self.value, inv, self.p, None), None)
        vx = self.valuation_lower_bound()
        nterms = max(1, int(prec - min(vx, prec) + 1)) if vx != INF else 1
        inv = _laurent_inverse(other.value, self.p, nterms + 1)
        return TruncatedElement(self.model, self.p, _laurent_mul(self.value, inv, self.p, prec), prec)

    def truncate(self, prec: int) -> TruncatedElement:
        """Forget digits at and beyond pi^prec."""
        if self.prec is not None and self.prec <= prec:
            return self
        if self.model == "padic":
            return TruncatedElement(self.model, self.p, _padic_reduce(self.value, self.p, prec), prec)
        return TruncatedElement(self.model, self.p, _laurent_norm(self.value[0], self.value[1], self.p, prec), prec)

    def __repr__(self) -> str:
        tail = "" if self.prec is None else f" + O(pi^{self.prec})"
        if self.model == "padic":
            return f"<padic p={self.p}: {self.value}{tail}>"
        low, cs = self.value
        terms = " + ".join(f"{c}*t^{low + i}" for i, c in enumerate(cs) if c) or "0"
        return f"<laurent p={self.p}: {terms}{tail}>"


def residue_classes(model: str, p: int, digits: int) -> list[TruncatedElement]:
    """Representatives of O / pi^digits O, in base-p digit order."""
    return list(_residue_classes(model, p, digits))


@lru_cache(maxsize=64)
def _residue_classes(model: str, p: int, digits: int) -> tuple:
    out = []
    for k in range(p**digits):
        ds, a = [], k
        for _ in range(digits):
            ds.append(a % p)
            a //= p
        out.append(TruncatedElement.from_digits(model, p, ds, 0, digits))
    return tuple(out)


def sample_elements(model: str, p: int, precision: int, count: int, seed: int) -> list[TruncatedElement]:
    """Uniform samples from O / pi^precision O, reproducible from ``seed``."""
    check_prime(p)
    if count < 1:
        raise ValueError("count must be positive")
    rng = random.Random(seed)
    return [
        TruncatedElement.from_digits(model, p, [rng.randrange(p) for _ in range(precision)], 0, precision)
        for _ in range(count)
    ]


# ---------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class Model:
    """Evaluation context: model family, residue characteristic and working
    precision for enumerating valued-field quantifiers."""

    tag: str
    p: int
    precision: int = 1
    vg_window: tuple[int, int] | None = None

    def __post_init__(self):
        if self.tag not in MODELS:
            raise ValueError(f"unknown model {self.tag!r}")
        check_prime(self.p)


def _vg_add(a, b):
    lo = a[0] + b[0] if not (a[0] == -b[0] and abs(a[0]) == INF) else -INF
    hi = a[1] + b[1] if not (a[1] == -b[1] and abs(a[1]) == INF) else INF
    return (lo, hi)


def _vg_scale(c, a):
    if c == 0:
        return (0, 0)
    if a == (INF, INF):
        return a  # +inf absorbs nonzero scalars
    if c > 0:
        return (c * a[0], c * a[1])
    return (c * a[1], c * a[0])


class _Compiler:
    """Turns formulas into closures ``env -> True | False | None``."""

    def __init__(self, model: Model):
        self.model = model
        self.p = model.p
        self._classes = None

    def vf_classes(self):
        if self._classes is None:
            self._classes = residue_classes(self.model.tag, self.p, self.model.precision)
        return self._classes

    # terms ---------------------------------------------------------------
    def vf_term(self, t: Term) -> Callable:
        tag, p = self.model.tag, self.p
        if isinstance(t, Var):
            name = t.name
            return lambda env: env[name]
        if isinstance(t, Const):
            c = TruncatedElement.from_rational(tag, p, t.value)
            return lambda env: c
        if isinstance(t, Pi):
            c = TruncatedElement.uniformizer(tag, p, t.exponent)
            return lambda env: c
        left, right = self.vf_term(t.left), self.vf_term(t.right)
        if isinstance(t, Add):
            return lambda env: left(env) + right(env)
        if isinstance(t, Sub):
            return lambda env: left(env) - right(env)
        if isinstance(t, Mul):
            return lambda env: left(env) * right(env)
        if isinstance(t, Quot):
            return lambda env: left(env) / right(env)
        raise FragmentError(f"unsupported valued-field term {t}")

    def cached_vf_term(self, t: Term) -> Callable:
        """vf_term remembering its last result; inside a quantifier loop the
        value is reused while the free variables hold the same objects."""
        fn = self.vf_term(t)
        if isinstance(t, (Var, Const, Pi)):
            return fn
        names = tuple(sorted(v.name for v in term_vars(t)))
        last = [None, None]  # (key objects, value); holding the key keeps ids alive

        def cached(env):
            key = tuple(env[n] for n in names)
            old = last[0]
            if old is not None and all(a is b for a, b in zip(old, key)):
                return last[1]
            value = fn(env)
            last[0], last[1] = key, value
            return value
        return cached

    def rf_term(self, t: Term) -> Callable:
        p = self.p
        if isinstance(t, Var):
            name = t.name
            return lambda env: env[name]
        if isinstance(t, Const):
            c = residue_of(t.value, p)
            return lambda env: c
        if isinstance(t, Ac):
            arg = self.cached_vf_term(t.arg)
            return lambda env: arg(env).ac()
        left, right = self.rf_term(t.left), self.rf_term(t.right)
        if isinstance(t, Add):
            return lambda env: _rf_op(left(env), right(env), lambda a, b: (a + b) % p)
        if isinstance(t, Sub):
            return lambda env: _rf_op(left(env), right(env), lambda a, b: (a - b) % p)
        if isinstance(t, Mul):
            def mul(env):
                a = left(env)
                if a == 0:
                    return 0
                b = right(env)
                if b == 0:
                    return 0
                return None if a is None or b is None else a * b % p
            return mul
        raise FragmentError(f"unsupported residue term {t}")

    def vg_term(self, t: Term) -> Callable:
        if isinstance(t, Var):
            name = t.name

            def var(env):
                v = env[name]
                return v if isinstance(v, tuple) else (v, v)
            return var
        if isinstance(t, Const):
            c = (int(t.value), int(t.value))
            return lambda env: c
        if isinstance(t, Infinity):
            return lambda env: (INF, INF)
        if isinstance(t, Ord):
            arg = self.cached_vf_term(t.arg)
            return lambda env: arg(env).ord_bounds()
        left, right = self.vg_term(t.left), self.vg_term(t.right)
        if isinstance(t, Add):
            return lambda env: _vg_add(left(env), right(env))
        if isinstance(t, Sub):
            return lambda env: _vg_add(left(env), _vg_scale(-1, right(env)))
        if isinstance(t, Mul):
            def mul(env):
                a, b = left(env), right(env)
                if a[0] == a[1] and abs(a[0]) != INF:
                    return _vg_scale(a[0], b)
                if b[0] == b[1] and abs(b[0]) != INF:
                    return _vg_scale(b[0], a)
                raise FragmentError(f"non-linear value-group product {t}")
            return mul
        raise FragmentError(f"unsupported value-group term {t}")

    # formulas ------------------------------------------------------------
    def formula(self, f: Formula) -> Callable:
        if isinstance(f, TrueF):
            return lambda env: True
        if isinstance(f, FalseF):
            return lambda env: False
        if isinstance(f, Atom):
            return self.atom(f)
        if isinstance(f, Divides):
            k, term = f.modulus, self.vg_term(f.term)

            def divides(env):
                lo, hi = term(env)
                if lo != hi:
                    return None
                if lo == INF:
                    return True
                return int(lo) % k == 0
            return divides
        if isinstance(f, Not):
            inner = self.formula(f.arg)

            def neg(env):
                v = inner(env)
                return None if v is None else not v
            return neg
        if isinstance(f, And):
            parts = [self.formula(a) for a in f.args]

            def conj(env):
                unknown = False
                for part in parts:
                    v = part(env)
                    if v is False:
                        return False
                    if v is None:
                        unknown = True
                return None if unknown else True
            return conj
        if isinstance(f, Or):
            parts = [self.formula(a) for a in f.args]

            def disj(env):
                unknown = False
                for part in parts:
                    v = part(env)
                    if v is True:
                        return True
                    if v is None:
                        unknown = True
                return None if unknown else False
            return disj
        if isinstance(f, Implies):
            left, right = self.formula(f.left), self.formula(f.right)

            def implies(env):
                a = left(env)
                if a is False:
                    return True
                b = right(env)
                if b is True:
                    return True
                if a is None or b is None:
                    return None
                return False
            return implies
        if isinstance(f, (Exists, Forall)):
            return self.quantifier(f)
        raise FragmentError(f"cannot evaluate {f!r}")

    def atom(self, f: Atom) -> Callable:
        from .formula import sort_of

        sort = sort_of(f.left)
        op = f.op
        if sort is Sort.VF:
            left, right = self.vf_term(f.left), self.vf_term(f.right)

            def vf_atom(env):
                z = (left(env) - right(env)).is_zero()
                if z is None:
                    return None
                return z if op == "=" else not z
            return vf_atom
        if sort is Sort.RF:
            left, right = self.rf_term(f.left), self.rf_term(f.right)

            def rf_atom(env):
                a, b = left(env), right(env)
                if a is None or b is None:
                    return None
                return (a == b) if op == "=" else (a != b)
            return rf_atom
        left, right = self.vg_term(f.left), self.vg_term(f.right)
        compare = _VG_COMPARE[op]
        return lambda env: compare(left(env), right(env))

    def quantifier(self, f: Formula) -> Callable:
        var = f.var
        name = var.name
        body = self.formula(f.body)
        is_exists = isinstance(f, Exists)
        if var.sort is Sort.RF:
            domain = lambda env: range(self.p)
        elif var.sort is Sort.VF:
            if not _guarded_integral(f):
                raise FragmentError(
                    f"valued-field quantifier over {name} is not restricted to the integer ring; "
                    "add a guard ord(x) >= 0"
                )
            classes = self.vf_classes()
            domain = lambda env: classes
        else:
            bounds = _vg_guard(f)
            if bounds is None:
                if self.model.vg_window is None:
                    raise FragmentError(f"value-group quantifier over {name} needs constant bounds")
                lo, hi = self.model.vg_window
            else:
                lo, hi = bounds
            rng = range(lo, hi + 1)
            domain = lambda env: rng

        def quantified(env):
            saved = env.get(name, _MISSING)
            unknown = False
            try:
                for value in domain(env):
                    env[name] = value
                    v = body(env)
                    if v is None:
                        unknown = True
                    elif v is is_exists:
                        return is_exists
            finally:
                if saved is _MISSING:
                    env.pop(name, None)
                else:
                    env[name] = saved
            return None if unknown else (not is_exists)
        return quantified


_MISSING = object()


def _rf_op(a, b, fn):
    if a is None or b is None:
        return None
    return fn(a, b)


def _cmp_eq(a, b):
    if a[0] == a[1] == b[0] == b[1]:
        return True
    if a[1] < b[0] or b[1] < a[0]:
        return False
    return None


def _cmp_lt(a, b):
    if a[1] < b[0]:
        return True
    if a[0] >= b[1]:
        return False
    return None


def _cmp_le(a, b):
    if a[1] <= b[0]:
        return True
    if a[0] > b[1]:
        return False
    return None


def _not3(v):
    return None if v is None else not v


_VG_COMPARE = {
    "=": _cmp_eq,
    "!=": lambda a, b: _not3(_cmp_eq(a, b)),
    "<": _cmp_lt,
    "<=": _cmp_le,
    ">": lambda a, b: _cmp_lt(b, a),
    ">=": lambda a, b: _cmp_le(b, a),
}


def _guard_conjuncts(f: Formula, var: Var):
    """Necessary conditions on ``var`` readable from the quantifier body."""
    body = f.body
    if isinstance(f, Forall):
        if isinstance(body, Implies):
            body = body.left
        elif isinstance(body, Or):
            # forall x. (not G or ...) is the same shape as G -> ...
            negs = [a.arg for a in body.args if isinstance(a, Not)]
            return _flatten_guards(negs, var, type(f))
        else:
            return []
    return _flatten_guards([body], var, type(f))


def _flatten_guards(stack, var, kind):
    out = []
    while stack:
        g = stack.pop()
        if isinstance(g, And):
            stack.extend(g.args)
        elif isinstance(g, kind) and g.var != var:
            inner = g.body
            if kind is Forall and isinstance(inner, Implies):
                inner = inner.left
            elif kind is Forall:
                continue
            stack.append(inner)
        else:
            out.append(g)
    return out


def _guarded_integral(f: Formula) -> bool:
    for g in _guard_conjuncts(f, f.var):
        if isinstance(g, Atom) and isinstance(g.left, Ord) and g.left.arg == f.var and isinstance(g.right, Const):
            if g.op in (">=", "=") and g.right.value >= 0:
                return True
            if g.op == ">" and g.right.value >= -1:
                return True
        if isinstance(g, Atom) and isinstance(g.right, Ord) and g.right.arg == f.var and isinstance(g.left, Const):
            if g.op in ("<=", "=") and g.left.value >= 0:
                return True
    return False


def _vg_guard(f: Formula):
    lo = hi = None
    v = f.var
    for g in _guard_conjuncts(f, v):
        if not isinstance(g, Atom):
            continue
        if g.left == v and isinstance(g.right, Const):
            c, op = int(g.right.value), g.op
        elif g.right == v and isinstance(g.left, Const):
            c, op = int(g.left.value), {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}[g.op]
        else:
            continue
        if op in (">=", "="):
            lo = c if lo is None else max(lo, c)
        if op == ">":
            lo = c + 1 if lo is None else max(lo, c + 1)
        if op in ("<=", "="):
            hi = c if hi is None else min(hi, c)
        if op == "<":
            hi = c - 1 if hi is None else min(hi, c - 1)
    if lo is None or hi is None:
        return None
    return lo, hi


def compile_formula(f: Formula, model: Model) -> Callable:
    """Compile ``f`` to a function ``env -> True | False | None``."""
    check_sorts(f)
    return _Compiler(model).formula(f)


def _coerce_env(env: Mapping, model: Model, f: Formula) -> dict:
    out = {}
    sorts = {v.name: v.sort for v in free_vars(f)}
    for name, value in (env or {}).items():
        sort = sorts.get(name)
        if sort is Sort.VF and not isinstance(value, TruncatedElement):
            value = TruncatedElement.from_rational(model.tag, model.p, value)
        elif sort is Sort.RF:
            value = int(value) % model.p if not isinstance(value, FiniteFieldElement) else value.value
        out[name] = value
    missing = set(sorts) - set(out)
    if missing:
        raise ValueError(f"unbound free variables: {sorted(missing)}")
    return out


def eval_valued(f: Formula, model: str | Model, precision: int = 1, env: Mapping | None = None, p: int | None = None) -> TriBool:
    """Three-valued truth of ``f`` in a valued-field model.

    ``model`` is either a :class:`Model` or a tag (then ``p`` is required).
    Free variables are bound through ``env``: valued-field variables to
    :class:`TruncatedElement` (or rationals, taken exactly), residue variables
    to integers, value-group variables to integers.
    """
    if not isinstance(model, Model):
        if p is None:
            raise ValueError("prime required")
        model = Model(model, p, precision)
    fn = compile_formula(f, model)
    return TriBool.of(fn(_coerce_env(env, model, f)))


def _residue_only(f: Formula) -> None:
    from .formula import atoms, atom_terms, subterms

    for a in atoms(f):
        for t in atom_terms(a):
            for s in subterms(t):
                if isinstance(s, (Ord, Ac, Pi, Infinity)) or (isinstance(s, (Var, Const)) and s.sort is not Sort.RF):
                    raise FragmentError(f"not a residue-sort formula: {a}")
        if isinstance(a, Divides):
            raise FragmentError(f"not a residue-sort formula: {a}")


def eval_residue(f: Formula, p: int, env: Mapping | None = None) -> bool:
    """Truth of a residue-sort formula over F_p (exhaustive quantifiers)."""
    check_prime(p)
    _residue_only(f)
    model = Model("padic", p)
    value = compile_formula(f, model)(_coerce_env(env, model, f))
    assert value is not None
    return value


def count_residue(f: Formula, p: int, variables: Iterable[Var] | None = None) -> int:
    """Number of assignments of the free residue variables satisfying ``f``."""
    check_prime(p)
    _residue_only(f)
    names = sorted(v.name for v in (variables if variables is not None else free_vars(f)))
    fn = compile_formula(f, Model("padic", p))
    count = 0
    env: dict = {}

    def rec(i):
        nonlocal count
        if i == len(names):
            count += bool(fn(env))
            return
        for a in range(p):
            env[names[i]] = a
            rec(i + 1)

    rec(0)
    return count
