"""Orbital integrals over definable families of elliptic elements (GL(2)).

For a test set D (Ad(K)-invariant) and a family E of elliptic elements of
gl(2, O) (Ad(K)-invariant), the quantity computed is

    I(q) = vol(K) * int_E int_{G/Z} 1_D(g^-1 X g) dg dX

with vol(gl(2,O)) = 1, dg restricting to the Haar measure of K and the
centre Z = pi^Z quotiented out (the integral over G itself diverges).  Using
G = disjoint union of K t_m K with m_1 >= m_2 and m_1 + m_2 in {0, 1}:

    I(q) = sum_m [K_m : K](q) * vol(K)^2 * vol{X in E : t_m^-1 X t_m in D}.

The finitely many m that contribute are certified by a valuation bound: for
elliptic X with ord(disc X) <= B and p odd, every conjugate has off-diagonal
entries of valuation <= B, so t^-1 X t in pi^-r gl(2,O) forces
m_1 - m_2 <= B + r.
"""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .formula import Atom, Const, Exists, Formula, Mul, Ord, Pi, Sort, Var, conj, substitute
from .groups import (
    GroupContext,
    Matrix,
    build_K,
    coset_index,
    discriminant,

    flat,

    inverse,
    mat_mul,
    symbolic,
    torus,
    unit,
)
from .measure import (
    DEFAULT_BUDGET,
    DefinableSet,
    UnstableError,
    check_invariance,
    count_classes,
    stable_volume,
    stability_level,
    volume_exact,
)
from .models import Model, TruncatedElement, compile_formula, is_prime
from .qpoly import FitError, FitResult, QPolynomial, fit_laurent
from .separation import ExclusionLedger

DEFAULT_PRIMES = (3, 5, 7, 11)
DEFAULT_HOLDOUT = (13,)


class SupportError(ValueError):
    """No finite support could be certified."""


class InvarianceError(ValueError):
    pass


@dataclass(frozen=True)
class OrbitalProblem:
    E: DefinableSet
    D: DefinableSet
    context: GroupContext = GroupContext(2)
    primes: tuple[int, ...] = DEFAULT_PRIMES
    holdout: tuple[int, ...] = DEFAULT_HOLDOUT
    model: str = "padic"
    d_invariant: bool = True
    e_invariant: bool = True
    d_bound: int = 0  # D lies in pi^-d_bound gl(n, O)
    max_level: int = 4
    budget: int = DEFAULT_BUDGET
    name: str = ""

    def __post_init__(self):
        n2 = self.context.n ** 2
        if self.E.dimension != n2 or self.D.dimension != n2:
            raise ValueError(f"E and D must be subsets of gl({self.context.n}) with {n2} coordinates")
        if self.context.n != 2:
            raise NotImplementedError("orbital assembly is implemented for GL(2)")
        if 2 in self.primes or 2 in self.holdout:
            raise ValueError("p = 2 is excluded")


# ---------------------------------------------------------------- formulas


def _as_matrix(variables: Sequence[Var], n: int) -> Matrix:
    return [list(variables[i * n : (i + 1) * n]) for i in range(n)]


def _instantiate(s: DefinableSet, matrix: Matrix) -> Formula:
    n = len(matrix)
    binding = {v: matrix[i // n][i % n] for i, v in enumerate(s.signature)}
    return substitute(s.formula, binding)


def build_psi(m: Sequence[int], E: DefinableSet, D: DefinableSet, context: GroupContext = GroupContext(2)) -> Formula:
    """psi(m, k1, k2, X): X in E, k1, k2 in K and g^-1 X g in D for
    g = k1 diag(u_i pi^m_i) k2 with some units u_i."""
    n = context.n
    x = symbolic("X", n)
    k1, k2 = symbolic("k1", n), symbolic("k2", n)
    units = [Var(f"u{i + 1}", Sort.VF) for i in range(n)]
    g = mat_mul(mat_mul(k1, torus(m, units)), k2)
    conj_x = mat_mul(mat_mul(inverse(g), x), g)
    body = conj(*(unit(u) for u in units), _instantiate(D, conj_x))
    for u in reversed(units):
        body = Exists(u, body)
    K = build_K(n)
    return conj(_instantiate(E, x), _instantiate(K, k1), _instantiate(K, k2), body)


def psi_signature(n: int = 2) -> tuple[Var, ...]:
    return flat("k1", n) + flat("k2", n) + flat("X", n)


def twisted_set(m: Sequence[int], E: DefinableSet, D: DefinableSet) -> DefinableSet:
    """{X in E : t^-1 X t in D} with t = diag(pi^m)."""
    n = len(m)
    xs = _as_matrix(E.signature, n)
    conj_x = [[xs[i][j] if m[j] == m[i] else Mul(Pi(m[j] - m[i]), xs[i][j]) for j in range(n)] for i in range(n)]
    return DefinableSet(conj(E.formula, _instantiate(D, conj_x)), E.signature, f"E_m{tuple(m)}")


# ---------------------------------------------------------------- checks


def _random_element(rng, model, p, digits):
    return TruncatedElement.from_digits(model, p, [rng.randrange(p) for _ in range(digits)], 0, digits)


def random_k(rng: random.Random, p: int, model: str, digits: int, n: int = 2):
    while True:
        k = [[_random_element(rng, model, p, digits) for _ in range(n)] for _ in range(n)]
        d = k[0][0] * k[1][1] - k[0][1] * k[1][0]
        if d.valuation == 0:
            return k, d


def _conjugation(names: Sequence[str], p: int, model: str, digits: int):
    def transform(rng, point):
        k, d = random_k(rng, p, model, digits)
        x = [[point[names[0]], point[names[1]]], [point[names[2]], point[names[3]]]]
        adj = [[k[1][1], -k[0][1]], [-k[1][0], k[0][0]]]
        kinv = [[a / d for a in row] for row in adj]
        y = _mat(_mat(kinv, x), k)
        return {names[0]: y[0][0], names[1]: y[0][1], names[2]: y[1][0], names[3]: y[1][1]}

    return transform


def _mat(a, b):
    return [[a[i][0] * b[0][j] + a[i][1] * b[1][j] for j in range(2)] for i in range(2)]


def check_ad_invariance(s: DefinableSet, p: int, model: str = "padic", digits: int = 3, samples: int = 100, seed: int = 0):
    names = [v.name for v in s.signature]
    return check_invariance(s, _conjugation(names, p, model, digits), p, digits, model, samples, seed)


def check_bound(D: DefinableSet, r: int, p: int, model: str = "padic", samples: int = 100, seed: int = 0) -> list:
    """Sampled check that D lies in pi^-r gl(2, O): points with an entry of
    valuation -r-1 must be outside D."""
    fn = compile_formula(D.formula, Model(model, p, 3))
    rng = random.Random(seed)
    bad = []
    shift = TruncatedElement.uniformizer(model, p, -r - 1)
    for _ in range(samples):
        entries = [_random_element(rng, model, p, 3) for _ in D.signature]
        j = rng.randrange(len(entries))
        unit_digits = [rng.randrange(1, p)] + [rng.randrange(p) for _ in range(2)]
        entries[j] = TruncatedElement.from_digits(model, p, unit_digits, 0, 3)
        env = {v.name: shift * e for v, e in zip(D.signature, entries)}
        if fn(env) is True:
            bad.append({name: repr(e) for name, e in env.items()})
    return bad


def discriminant_bound(E: DefinableSet, p: int, model: str = "padic", max_bound: int = 6, budget: int = DEFAULT_BUDGET) -> int:
    """Least B with ord(disc X) <= B on all of E (certified by counting)."""
    xs = _as_matrix(E.signature, 2)
    d = discriminant(xs)
    for b in range(max_bound + 1):
        s = DefinableSet(conj(E.formula, Atom(">", Ord(d), Const(Fraction(b), Sort.VG))), E.signature)
        # a zero count with no undecided class certifies emptiness
        try:
            if count_classes(s, p, b + 2, model, budget=budget) == 0:
                return b
        except UnstableError:
            continue
    raise SupportError(f"discriminant valuation on E is not bounded by {max_bound} at p={p}")


# ---------------------------------------------------------------- support and values


def candidate_tuples(n: int, spread: int) -> list[tuple[int, ...]]:
    """m_1 >= m_2, m_1 + m_2 in {0, .., n-1}, m_1 - m_2 <= spread (n = 2)."""
    out = []
    for diff in range(spread + 1):
        for total in range(n):
            if (total + diff) % 2 == 0:
                m1 = (total + diff) // 2
                out.append((m1, m1 - diff))
    return sorted(out, key=lambda m: (m[0] - m[1], m))


@functools.lru_cache(maxsize=256)
def _stable_volume(s: DefinableSet, p: int, model: str, max_level: int, budget: int):
    vol = stable_volume(s, p, model, max_level, budget)
    return vol.level, vol


@dataclass
class SupportResult:
    C: list[tuple[int, ...]]
    spread: int
    discriminant_bound: dict[int, int]
    ledger: ExclusionLedger
    method: str
    per_prime: dict[int, list[tuple[int, ...]]] = field(default_factory=dict)


def coset_support(problem: OrbitalProblem, primes: Iterable[int] | None = None) -> SupportResult:
    primes = tuple(primes or problem.primes)
    ledger = ExclusionLedger()
    ledger.exclude(2, "p = 2 excluded: the residue criterion for ellipticity needs odd residue characteristic")
    bounds = {}
    per_prime = {}
    spread = 0
    for p in primes:
        if not problem.d_invariant or not problem.e_invariant:
            raise InvarianceError("the coset factorization needs Ad(K)-invariant D and E")
        bounds[p] = discriminant_bound(problem.E, p, problem.model, budget=problem.budget)
        spread = max(spread, bounds[p] + problem.d_bound)
    for p in primes:
        found = []
        for m in candidate_tuples(problem.context.n, spread):
            s = twisted_set(m, problem.E, problem.D)
            _, vol = _stable_volume(s, p, problem.model, problem.max_level, problem.budget)
            if vol.value > 0:
                found.append(m)
        per_prime[p] = found
    C = sorted(set().union(*per_prime.values()), key=lambda m: (m[0] - m[1], m)) if per_prime else []
    return SupportResult(C, spread, bounds, ledger, "valuation cutoff + per-prime search", per_prime)


@dataclass
class OrbitalTerm:
    m: tuple[int, ...]
    index: Fraction
    vol_K: Fraction
    volume: Fraction
    level: int
    contribution: Fraction


@dataclass
class OrbitalResult:
    value: Fraction
    prime: int
    model: str
    terms: list[OrbitalTerm]
    C: list[tuple[int, ...]]
    ledger: ExclusionLedger
    checks: dict = field(default_factory=dict)


def vol_K(p: int, model: str = "padic", n: int = 2) -> Fraction:
    return _stable_volume(build_K(n), p, model, 4, DEFAULT_BUDGET)[1].value


def orbital_integral(
    problem: OrbitalProblem,
    p: int,
    C: Sequence[tuple[int, ...]] | None = None,
    model: str | None = None,
    level_offset: int = 0,
    check: bool = True,
) -> OrbitalResult:
    """sum over m in C of [K_m:K](p) vol(K)^2 vol{X in E : t_m^-1 X t_m in D}."""
    model = model or problem.model
    if not is_prime(p) or p == 2:
        raise ValueError(f"p={p} is not an admissible prime")
    support = None
    if C is None:
        support = coset_support(problem, (p,))
        C = support.C
    ledger = support.ledger if support else ExclusionLedger()
    ledger.exclude(2, "p = 2 excluded: the residue criterion for ellipticity needs odd residue characteristic")
    checks = {}
    if check:
        for label, s in (("D", problem.D), ("E", problem.E)):
            bad = check_ad_invariance(s, p, model)
            checks[f"{label} Ad(K)-invariance"] = "ok (100 samples)" if not bad else f"{len(bad)} counterexamples"
            if bad:
                raise InvarianceError(f"{label} is not Ad(K)-invariant at p={p}: {bad[0]}")
        bad = check_bound(problem.D, problem.d_bound, p, model)
        checks["D bound"] = "ok (100 samples)" if not bad else f"{len(bad)} counterexamples"
        if bad:
            raise SupportError(f"D is not contained in pi^-{problem.d_bound} gl(2,O) at p={p}")
    vk = vol_K(p, model, problem.context.n)
    terms = []
    total = Fraction(0)
    for m in C:
        s = twisted_set(m, problem.E, problem.D)
        level, vol = _stable_volume(s, p, model, problem.max_level, problem.budget)
        if level_offset:
            level += level_offset
            vol = volume_exact(s, p, level, model, budget=problem.budget)
        v = vol.value
        idx = coset_index(m).index(p)
        contribution = idx * vk * vk * v
        total += contribution
        terms.append(OrbitalTerm(tuple(m), idx, vk, v, level, contribution))
    return OrbitalResult(total, p, model, terms, list(C), ledger, checks)


# ---------------------------------------------------------------- motive proxy


def fit_motive_proxy(values: Iterable[tuple[int, object]], window: tuple[int, int] = (-8, 8), holdout=()) -> FitResult:
    """Exact Laurent polynomial through (q, value) points; see fit_laurent."""
    return fit_laurent(values, window, holdout)


@dataclass
class MotiveProxy:
    polynomial: QPolynomial
    per_coset: dict[tuple[int, ...], QPolynomial]
    values: dict[int, Fraction]
    validated: dict[int, tuple[Fraction, Fraction]]
    C: list[tuple[int, ...]]


def motive_proxy(
    problem: OrbitalProblem,
    primes: Sequence[int] | None = None,
    holdout: Sequence[int] | None = None,
    window: tuple[int, int] = (-8, 8),
) -> MotiveProxy:
    """Uniform Laurent polynomial for the orbital integral.

    The Tate factors [K_m:K](q) and vol(K)(q) = [G]_q are known polynomials,
    so only the per-coset volumes vol{X in E : t_m^-1 X t_m in D} are fitted
    across primes; the proxy is then evaluated at the held-out primes and
    compared with the directly computed integral.
    """
    primes = tuple(primes or problem.primes)
    holdout = tuple(problem.holdout if holdout is None else holdout)
    support = coset_support(problem, primes)
    C = support.C
    per_prime = {p: orbital_integral(problem, p, C, check=(p == primes[0])) for p in primes}
    g_q = problem.context.g_q
    for p, res in per_prime.items():
        if res.terms and res.terms[0].vol_K != g_q(p):
            raise FitError(f"vol(K) at p={p} disagrees with [G]_q")
    per_coset = {}
    total = QPolynomial()
    for i, m in enumerate(C):
        pts = [(p, per_prime[p].terms[i].volume) for p in primes]
        fit = fit_laurent(pts, window)
        per_coset[m] = fit.polynomial
        total = total + coset_index(m).index * g_q * g_q * fit.polynomial
    validated = {}
    for p in holdout:
        direct = orbital_integral(problem, p, C, check=False).value
        predicted = total(p)
        validated[p] = (direct, predicted)
        if direct != predicted:
            raise FitError(f"proxy {total} fails at held-out p={p}", {str(p): str(direct - predicted)})
    return MotiveProxy(total, per_coset, {p: r.value for p, r in per_prime.items()}, validated, C)


# ---------------------------------------------------------------- problem files


def load_problem(path: str | Path) -> OrbitalProblem:
    """Read a ``key = value`` problem file; E and D name formula files."""
    path = Path(path)
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    for key in ("E", "D"):
        if key not in values:
            raise ValueError(f"{path}: missing {key}")

    def load_set(key):
        p = (path.parent / values[key]).resolve()
        return DefinableSet.from_text(p.read_text(), key)

    def ints(key, default):
        if key not in values:
            return default
        return tuple(int(x) for x in values[key].replace(",", " ").split())

    def flag(key, default=True):
        return values.get(key, str(default)).lower() in ("1", "true", "yes")

    n = int(values.get("n", "2"))
    return OrbitalProblem(
        E=load_set("E"),
        D=load_set("D"),
        context=GroupContext(n),
        primes=ints("primes", DEFAULT_PRIMES),
        holdout=ints("holdout", DEFAULT_HOLDOUT),
        model=values.get("model", "padic"),
        d_invariant=flag("d_invariant"),
        e_invariant=flag("e_invariant"),
        d_bound=int(values.get("d_bound", "0")),
        max_level=int(values.get("max_level", "4")),
        budget=int(values.get("budget", str(DEFAULT_BUDGET))),
        name=values.get("name", path.stem),
    )


# ---------------------------------------------------------------- brute-force oracle


def _val(x: Fraction, p: int) -> float:
    if x == 0:
        return float("inf")
    v, a, b = 0, x.numerator, x.denominator
    while a % p == 0:
        a //= p
        v += 1
    while b % p == 0:
        b //= p
        v -= 1
    return v


def lattice_classes(p: int, radius: int):
    """Homothety classes of lattices at tree distance <= radius from O^2,
    as (distance, basis matrix) with the lattice spanned by the columns."""
    yield 0, ((1, 0), (0, 1))
    for d in range(1, radius + 1):
        for a in range(d + 1):
            c = d - a
            for x in range(p**a):
                if a >= 1 and c >= 1 and x % p == 0:
                    continue  # contained in pi O^2: not primitive
                yield d, ((p**a, x), (0, p**c))


def good_lattices(x, p: int, r: int, radius: int) -> dict[int, int]:
    """Number of lattice classes L (by distance) with X L inside pi^-r L."""
    out: dict[int, int] = {}
    for d, g in lattice_classes(p, radius):
        (a, b), (_, c) = g
        det = Fraction(a * c)
        ginv = ((Fraction(c) / det, Fraction(-b) / det), (Fraction(0), Fraction(a) / det))
        gm = ((a, b), (0, c))
        xg = [[sum(x[i][k] * gm[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
        y = [[sum(ginv[i][k] * xg[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
        if all(_val(e, p) >= -r for row in y for e in row):
            out[d] = out.get(d, 0) + 1
    return out


def bruteforce_orbital(E: DefinableSet, r: int, p: int, digits: int = 2, radius: int | None = None) -> Fraction:
    """vol(K) * int_E vol(K) #{lattice classes L : X L in pi^-r L} dX.

    vol(K) comes from counting GL(2, F_p) directly; X runs over the classes
    modulo pi^digits lying in E (membership decided by the evaluator), each
    represented by its integer lift.  The lattice count at a lift is exact
    for lattices at distance <= digits + r; the outermost ring searched must
    be empty, otherwise the oracle refuses to answer.
    """
    if radius is None:
        radius = digits + r
    if radius > digits + r:
        raise ValueError("radius too large for the chosen number of digits")
    invertible = sum(1 for a, b, c, d in itertools.product(range(p), repeat=4) if (a * d - b * c) % p)
    vk = Fraction(invertible, p**4)
    fn = compile_formula(E.formula, Model("padic", p, digits))
    total = 0
    names = [v.name for v in E.signature]
    for values in itertools.product(range(p**digits), repeat=4):
        env = {}
        for name, v in zip(names, values):
            ds = [(v // p**i) % p for i in range(digits)]
            env[name] = TruncatedElement.from_digits("padic", p, ds, 0, digits)
        inside = fn(env)
        if inside is None:
            raise UnstableError("E is not decided at this number of digits", digits - 1)
        if not inside:
            continue
        x = [[Fraction(values[0]), Fraction(values[1])], [Fraction(values[2]), Fraction(values[3])]]
        counts = good_lattices(x, p, r, radius)
        if counts.get(radius, 0):
            raise SupportError(f"lattices at distance {radius} still contribute; increase digits")
        total += sum(counts.values())
    return vk * vk * Fraction(total, p ** (4 * digits))
