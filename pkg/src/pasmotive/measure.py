"""Stability levels and volumes of definable subsets of O^d.

A set S is stable at level n when membership of a point of O^d depends only
on its coordinates modulo pi^n.  Its volume is then

    vol(S) = N / q^((n+1) d)

where N counts the residue classes modulo pi^(n+1) contained in S (any level
at or above the stability level gives the same rational).

Counting is done by adaptive refinement: a box of points sharing their first
few digits is evaluated with three-valued logic, and only boxes whose
membership is still unknown are split further.  Plain enumeration of all
classes is available as ``method="enumerate"`` and serves as an oracle.
"""

from __future__ import annotations

import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .formula import Formula, Sort, Var, check_sorts, free_vars
from .models import MODELS, Model, TruncatedElement, check_prime, compile_formula
from .parser import parse_source

DEFAULT_BUDGET = 10**8
DEFAULT_SAMPLES = 10**5


class BudgetExceeded(RuntimeError):
    pass


class UnstableError(ValueError):
    """Membership is not determined at the requested level."""

    def __init__(self, message: str, level: int, witness=None):
        super().__init__(message)
        self.level = level
        self.witness = witness


@dataclass(frozen=True)
class DefinableSet:
    """Subset of O^d cut out by ``formula`` in the coordinates ``signature``."""

    formula: Formula
    signature: tuple[Var, ...]
    name: str = ""

    def __post_init__(self):
        check_sorts(self.formula)
        object.__setattr__(self, "signature", tuple(self.signature))
        for v in self.signature:
            if v.sort is not Sort.VF:
                raise ValueError(f"signature variable {v.name} is not of valued-field sort")
        missing = {v for v in free_vars(self.formula) if v.sort is Sort.VF} - set(self.signature)
        if missing:
            raise ValueError(f"free variables {sorted(v.name for v in missing)} missing from the signature")
        other = [v.name for v in free_vars(self.formula) if v.sort is not Sort.VF]
        if other:
            raise ValueError(f"free non-valued-field variables {sorted(other)}")

    @property
    def dimension(self) -> int:
        return len(self.signature)

    @classmethod
    def from_text(cls, text: str, name: str = "") -> DefinableSet:
        src = parse_source(text)
        sig = [v for v in src.variables() if v.sort is Sort.VF]
        return cls(src.body, tuple(sig), name)

    def contains(self, point: Sequence[TruncatedElement], p: int, model: str = "padic", precision: int = 1) -> bool | None:
        fn = compile_formula(self.formula, Model(model, p, precision))
        return fn({v.name: x for v, x in zip(self.signature, point)})


@dataclass(frozen=True)
class VolumeResult:
    value: Fraction
    level: int
    prime: int
    model: str
    method: str  # "exact-count" or "monte-carlo"
    count: int | None = None
    samples: int | None = None
    stderr: float | None = None
    dimension: int = 0
    metadata: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------- counting


class _Counter:
    """Counts classes mod pi^digits inside S by adaptive refinement."""

    def __init__(self, s: DefinableSet, p: int, model: str, digits: int, budget: int):
        self.s = s
        self.p = p
        self.model = model
        self.digits = digits
        self.budget = budget
        self.evaluations = 0
        self.fn = compile_formula(s.formula, Model(model, p, max(digits, 1)))
        self.names = [v.name for v in s.signature]
        self._cache: dict = {}

    def element(self, digits: tuple[int, ...]) -> TruncatedElement:
        e = self._cache.get(digits)
        if e is None:
            e = TruncatedElement.from_digits(self.model, self.p, digits, 0, len(digits))
            self._cache[digits] = e
        return e

    def decide(self, state) -> bool | None:
        self.evaluations += 1
        if self.evaluations > self.budget:
            raise BudgetExceeded(
                f"more than {self.budget} evaluations; use monte-carlo or an invariance factorization"
            )
        env = {name: self.element(ds) for name, ds in zip(self.names, state)}
        return self.fn(env)

    def count(self, state=None) -> int:
        d, L, p = len(self.names), self.digits, self.p
        if state is None:
            state = tuple(() for _ in range(d))
        v = self.decide(state)
        if v is True:
            return p ** (L * d - sum(len(ds) for ds in state))
        if v is False:
            return 0
        i = min(range(d), key=lambda j: len(state[j])) if d else None
        if i is None or len(state[i]) >= L:
            raise UnstableError(
                f"membership undetermined modulo pi^{L} at {self._describe(state)}", L - 1, state
            )
        total = 0
        for a in range(p):
            total += self.count(state[:i] + (state[i] + (a,),) + state[i + 1 :])
        return total

    def enumerate_count(self) -> int:
        d, L, p = len(self.names), self.digits, self.p
        if p ** (L * d) > self.budget:
            raise BudgetExceeded(
                f"{p ** (L * d)} residue classes exceed the budget {self.budget}; "
                "use monte-carlo or an invariance factorization"
            )
        total = 0
        for k in range(p ** (L * d)):
            state = []
            for _ in range(d):
                ds = []
                for _ in range(L):
                    ds.append(k % p)
                    k //= p
                state.append(tuple(ds))
            v = self.decide(tuple(state))
            if v is None:
                raise UnstableError(f"membership undetermined modulo pi^{L} at {self._describe(state)}", L - 1, state)
            total += v
        return total

    def _describe(self, state) -> str:
        return ", ".join(f"{n}={list(ds)}" for n, ds in zip(self.names, state))


def _count_branch(args):
    s, p, model, digits, budget, state = args
    return _Counter(s, p, model, digits, budget).count(state)


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("WORKBENCH_THREADS", "1") or 1)
    return max(1, threads)


def count_classes(
    s: DefinableSet,
    p: int,
    digits: int,
    model: str = "padic",
    method: str = "refine",
    budget: int = DEFAULT_BUDGET,
    threads: int | None = None,
) -> int:
    """Number of classes of (O / pi^digits)^d contained in S."""
    check_prime(p)
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    counter = _Counter(s, p, model, digits, budget)
    if method == "enumerate":
        return counter.enumerate_count()
    if method != "refine":
        raise ValueError(f"unknown counting method {method!r}")
    workers = _threads(threads)
    if workers == 1 or s.dimension == 0 or digits == 0:
        return counter.count()
    # split on the first digit of the first coordinate
    root = tuple(() for _ in range(s.dimension))
    v = counter.decide(root)
    if v is not None:
        return p ** (digits * s.dimension) if v else 0
    jobs = [(s, p, model, digits, budget, ((a,),) + root[1:]) for a in range(p)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(_count_branch, jobs))


def _stable_count(s: DefinableSet, p: int, n: int, model: str, budget: int) -> int | None:
    try:
        return _Counter(s, p, model, n, budget).count()
    except UnstableError:
        return None


def is_stable_at(s: DefinableSet, p: int, n: int, model: str = "padic", budget: int = DEFAULT_BUDGET) -> bool:
    """Every class modulo pi^n has determined membership."""
    return _stable_count(s, p, n, model, budget) is not None


def _instability_witness(s: DefinableSet, p: int, n: int, model: str, seed: int = 0, tries: int = 200):
    """Two points agreeing modulo pi^n with different membership, if found."""
    counter = _Counter(s, p, model, n, DEFAULT_BUDGET)
    try:
        counter.count()
        return None
    except UnstableError as err:
        state = err.witness
    rng = random.Random(seed)
    extra = n + 6
    fn = compile_formula(s.formula, Model(model, p, extra))
    seen: dict[bool, tuple] = {}
    for k in range(tries):
        # exact lifts so that equalities can be decided; every third try
        # repeats one tail across coordinates to hit diagonal loci
        tail = tuple(rng.randrange(p) for _ in range(extra - n))
        point = tuple(
            ds + (tail if k % 3 == 0 else tuple(rng.randrange(p) for _ in range(extra - len(ds)))) for ds in state
        )
        env = {v.name: TruncatedElement.from_digits(model, p, ds, 0, None) for v, ds in zip(s.signature, point)}
        value = fn(env)
        if value is not None and value not in seen:
            seen[value] = point
            if len(seen) == 2:
                return {"inside": list(map(list, seen[True])), "outside": list(map(list, seen[False])), "digits": extra}
    return {"class": [list(ds) for ds in state], "digits": n, "note": "no separating lift found"}


def _level_search(s: DefinableSet, p: int, model: str, max_level: int, budget: int) -> tuple[int, int]:
    """(least stable level n, class count modulo pi^n)."""
    check_prime(p)
    counts: dict[int, int | None] = {}

    def stable(n):
        if n not in counts:
            counts[n] = _stable_count(s, p, n, model, budget)
        return counts[n] is not None

    if stable(0):
        return 0, counts[0]
    lo, hi = 0, None  # lo unstable
    n = 1
    while n <= max_level:
        if stable(n):
            hi = n
            break
        lo = n
        n *= 2
    if hi is None:
        if lo < max_level and stable(max_level):
            hi = max_level
        else:
            witness = _instability_witness(s, p, max_level, model)
            raise UnstableError(f"{s.name or 'set'} is not stable up to level {max_level} at p={p}", max_level, witness)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if stable(mid):
            hi = mid
        else:
            lo = mid
    return hi, counts[hi]


def stability_level(s: DefinableSet, p: int, model: str = "padic", max_level: int = 4, budget: int = DEFAULT_BUDGET) -> int:
    """Least n <= max_level at which S is stable (doubling, then bisection)."""
    return _level_search(s, p, model, max_level, budget)[0]


def stable_volume(s: DefinableSet, p: int, model: str = "padic", max_level: int = 4, budget: int = DEFAULT_BUDGET) -> VolumeResult:
    """Volume at the stability level, reusing the count from the level search.

    A refinement count that leaves no undecided class at n digits scales by
    q^d per extra digit, so the count modulo pi^n already fixes the volume.
    """
    level, n = _level_search(s, p, model, max_level, budget)
    d = s.dimension
    count = n * p**d
    meta = {"stability": f"checked at p={p} only (level {level}); other residue fields are not covered"}
    return VolumeResult(Fraction(count, p ** ((level + 1) * d)), level, p, model, "exact-count", count=count, dimension=d, metadata=meta)


def volume_exact(
    s: DefinableSet,
    p: int,
    level: int,
    model: str = "padic",
    method: str = "refine",
    budget: int = DEFAULT_BUDGET,
    threads: int | None = None,
) -> VolumeResult:
    """``N(level) * q^(-(level+1) d)``; raises UnstableError below the stability level."""
    if level < 0:
        raise ValueError("level must be non-negative")
    digits = level + 1
    n = count_classes(s, p, digits, model, method, budget, threads)
    d = s.dimension
    return VolumeResult(Fraction(n, p ** (digits * d)), level, p, model, "exact-count", count=n, dimension=d)


def volume_montecarlo(
    s: DefinableSet,
    p: int,
    level: int,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    model: str = "padic",
) -> VolumeResult:
    """Fraction of uniformly sampled classes mod pi^(level+1) lying in S."""
    check_prime(p)
    if samples < 1:
        raise ValueError("samples must be positive")
    digits = level + 1
    fn = compile_formula(s.formula, Model(model, p, digits))
    rng = random.Random(seed)
    hits = 0
    for _ in range(samples):
        env = {
            v.name: TruncatedElement.from_digits(model, p, [rng.randrange(p) for _ in range(digits)], 0, digits)
            for v in s.signature
        }
        value = fn(env)
        if value is None:
            raise UnstableError(f"sampled point undetermined at level {level}", level)
        hits += value
    phat = hits / samples
    stderr = math.sqrt(phat * (1 - phat) / samples)
    return VolumeResult(
        Fraction(hits, samples), level, p, model, "monte-carlo", count=hits, samples=samples, stderr=stderr, dimension=s.dimension
    )


def check_invariance(
    s: DefinableSet,
    transform: Callable[[random.Random, dict], dict],
    p: int,
    digits: int,
    model: str = "padic",
    samples: int = 100,
    seed: int = 0,
) -> list[dict]:
    """Spot-check that ``transform`` preserves membership in S.

    ``transform(rng, point)`` maps a point (name -> element) to its image.
    Returns the list of counterexamples found among ``samples`` random
    points; points or images with undetermined membership are skipped.
    """
    fn = compile_formula(s.formula, Model(model, p, digits))
    rng = random.Random(seed)
    bad = []
    for _ in range(samples):
        point = {
            v.name: TruncatedElement.from_digits(model, p, [rng.randrange(p) for _ in range(digits)], 0, digits)
            for v in s.signature
        }
        image = transform(rng, point)
        a, b = fn(point), fn(image)
        if a is not None and b is not None and a != b:
            bad.append({"point": {k: repr(x) for k, x in point.items()}, "before": a, "after": b})
    return bad
