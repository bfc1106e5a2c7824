from fractions import Fraction
from pathlib import Path

import pytest

from pasmotive.formula import check_sorts, free_vars
from pasmotive.groups import GroupContext
from pasmotive.measure import DefinableSet, UnstableError
from pasmotive.orbital import (
    InvarianceError,
    OrbitalProblem,
    bruteforce_orbital,
    build_psi,
    candidate_tuples,
    check_ad_invariance,
    check_bound,
    coset_support,
    discriminant_bound,
    lattice_classes,
    load_problem,
    motive_proxy,
    orbital_integral,
    psi_signature,
    twisted_set,
)
from pasmotive.qpoly import QPolynomial

from conftest import DATA, load_set

PROBLEMS = DATA / "problems"
q = QPolynomial.q()


@pytest.fixture(scope="module")
def example():
    return load_problem(PROBLEMS / "example_z.problem")


@pytest.fixture(scope="module")
def integral():
    return load_problem(PROBLEMS / "example_z_integral.problem")


def test_load_problem(example):
    assert example.name == "example_z"
    assert example.primes == (3, 5, 7, 11)
    assert example.holdout == (13,)
    assert example.d_bound == 1
    assert len(example.E.signature) == 4


def test_load_problem_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.problem"
    bad.write_text("E = x.pas\nnonsense\n")
    with pytest.raises(ValueError):
        load_problem(bad)
    bad.write_text("D = x.pas\n")
    with pytest.raises(ValueError, match="missing E"):
        load_problem(bad)


def test_problem_rejects_two(example):
    with pytest.raises(ValueError):
        OrbitalProblem(E=example.E, D=example.D, primes=(2, 3))


def test_candidate_tuples():
    assert candidate_tuples(2, 0) == [(0, 0)]
    assert candidate_tuples(2, 2) == [(0, 0), (1, 0), (1, -1)]


def test_lattice_class_counts():
    # the sphere of radius d in the (p+1)-regular tree has (p+1) p^(d-1) vertices
    for p in (3, 5):
        for d in (1, 2, 3):
            n = sum(1 for dist, _ in lattice_classes(p, d) if dist == d)
            assert n == (p + 1) * p ** (d - 1)


def test_psi_is_well_sorted(example):
    psi = build_psi((1, 0), example.E, example.D)
    check_sorts(psi)
    assert {v.name for v in free_vars(psi)} == {v.name for v in psi_signature()}


def test_invariance_checks(example):
    assert check_ad_invariance(example.E, 3) == []
    assert check_ad_invariance(example.D, 3) == []
    corner = DefinableSet.from_text("vf X[2,2]; ord(X[1][1]) >= 0 and ord(X[1][2]) >= 1 and ord(X[2][1]) >= 0 and ord(X[2][2]) >= 0")
    assert check_ad_invariance(corner, 3)


def test_bound_check(example):
    assert check_bound(example.D, 1, 3) == []
    assert check_bound(example.D, 0, 3)


def test_discriminant_bound(example):
    assert discriminant_bound(example.E, 3) == 0


def test_support(example, integral):
    sup = coset_support(example, (3, 5))
    assert sup.spread == 1
    assert sup.C == [(0, 0), (1, 0)]
    assert coset_support(integral, (3,)).C == [(0, 0)]


def test_twisted_volume_drops_off(example):
    from pasmotive.measure import stable_volume

    far = twisted_set((2, 0), example.E, example.D)
    assert stable_volume(far, 3).value == 0


def test_value_at_three(example):
    res = orbital_integral(example, 3)
    assert res.value == Fraction(2560, 6561)
    assert [t.m for t in res.terms] == [(0, 0), (1, 0)]
    assert res.checks["D Ad(K)-invariance"].startswith("ok")


@pytest.mark.slow
def test_matches_lattice_oracle(example):
    assert orbital_integral(example, 3).value == bruteforce_orbital(example.E, 1, 3, digits=2)


def test_integral_lattice_matches_oracle(integral):
    res = orbital_integral(integral, 3)
    val = res.value
    assert val == Fraction(512, 6561)
    # the only term is vol(K)^2 vol(E)
    assert val == GroupContext(2).g_q(3) ** 2 * Fraction(2, 9)
    assert val == bruteforce_orbital(integral.E, 0, 3, digits=1)


def test_laurent_model_agrees(example):
    C = [(0, 0), (1, 0)]
    for p in (3, 5):
        a = orbital_integral(example, p, C, check=False)
        b = orbital_integral(example, p, C, model="laurent", check=False)
        assert a.value == b.value


def test_level_offset_is_harmless(integral):
    a = orbital_integral(integral, 3, [(0, 0)], check=False).value
    b = orbital_integral(integral, 3, [(0, 0)], level_offset=1, check=False).value
    assert a == b


def test_non_invariant_problem_refused(example):
    bad = OrbitalProblem(E=example.E, D=example.D, d_invariant=False, primes=(3,))
    with pytest.raises(InvarianceError):
        coset_support(bad)


@pytest.mark.slow
def test_motive_proxy(example):
    proxy = motive_proxy(example)
    expected = (q + 2) * GroupContext(2).g_q ** 2 * (1 - q ** -1) ** 2 * Fraction(1, 2)
    assert proxy.polynomial == expected
    assert proxy.validated[13][0] == proxy.validated[13][1] == Fraction(4389396480, 815730721)
    assert proxy.values[3] == Fraction(2560, 6561)


def test_unstable_problem():
    prob = load_problem(PROBLEMS / "unstable.problem")
    with pytest.raises(UnstableError):
        motive_proxy(prob, primes=(3, 5, 7), holdout=())
