from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pasmotive.measure import (
    BudgetExceeded,
    DefinableSet,
    UnstableError,
    count_classes,
    is_stable_at,
    stability_level,
    stable_volume,
    volume_exact,
    volume_montecarlo,
)
from pasmotive.groups import build_K
from conftest import load_set


def ball(k: int) -> DefinableSet:
    return DefinableSet.from_text(f"vf x; ord(x) >= {k}", f"ord>={k}")


def test_level_of_integral_ball_is_zero():
    assert stability_level(ball(0), 3) == 0


def test_level_of_maximal_ideal_is_one():
    assert stability_level(ball(1), 3) == 1


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("p", [3, 5])
def test_ball_volume(k, p):
    s = ball(k)
    n = stability_level(s, p)
    assert volume_exact(s, p, n).value == Fraction(1, p**k)


def test_gl2_integral_volume_is_one():
    s = load_set("sets/gl2_integral.pas")
    assert volume_exact(s, 3, stability_level(s, 3)).value == 1


@pytest.mark.parametrize("model", ["padic", "laurent"])
def test_gl2_units_volume(model):
    s = load_set("sets/gl2_units.pas")
    n = stability_level(s, 3, model)
    assert volume_exact(s, 3, n, model).value == Fraction(16, 27)
    assert volume_exact(s, 3, n + 1, model).value == Fraction(16, 27)


def test_enumeration_oracle_matches_refinement():
    s = load_set("sets/gl2_units.pas")
    assert count_classes(s, 3, 1, method="enumerate") == count_classes(s, 3, 1) == 48


def test_doubling_level_leaves_value():
    s = load_set("sets/close_pair.pas")
    n = stability_level(s, 3)
    assert volume_exact(s, 3, n).value == volume_exact(s, 3, 2 * n + 1).value


def test_stable_volume_reuses_level_count():
    for rel in ("sets/unit_squares.pas", "sets/ord_ge_2.pas", "sets/close_pair.pas"):
        s = load_set(rel)
        for p in (3, 5):
            n = stability_level(s, p)
            assert stable_volume(s, p) == volume_exact(s, p, n)


def test_measure_zero_set_is_unstable_with_witness():
    s = DefinableSet.from_text("vf x, y; x = y", "diagonal")
    with pytest.raises(UnstableError) as err:
        stability_level(s, 3, max_level=3)
    w = err.value.witness
    assert "inside" in w and "outside" in w
    k = w["digits"] - 6
    assert [d[:k] for d in w["inside"]] != [] and all(a[:3] == b[:3] for a, b in zip(w["inside"], w["outside"]))


def test_below_stability_level_raises():
    with pytest.raises(UnstableError):
        count_classes(ball(3), 3, 2)
    assert not is_stable_at(ball(3), 3, 2)


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        count_classes(build_K(2), 3, 1, budget=10)


def test_parallel_count_matches(monkeypatch):
    s = load_set("sets/gl2_units.pas")
    assert count_classes(s, 3, 1, threads=2) == count_classes(s, 3, 1, threads=1)


def test_montecarlo_reproducible_and_close():
    s = ball(1)
    a = volume_montecarlo(s, 5, 1, samples=2000, seed=4)
    b = volume_montecarlo(s, 5, 1, samples=2000, seed=4)
    assert a == b
    assert abs(float(a.value) - 0.2) <= 3 * a.stderr + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(-2, 2), st.sampled_from([3, 5]))
def test_level_invariance_on_annuli(k, shift, p):
    s = DefinableSet.from_text(f"vf x, y; ord(x) >= 0 and ord(y) >= 0 and ord(x - {shift}*y) >= {k}", "annulus")
    n = stability_level(s, p)
    assert volume_exact(s, p, n).value == volume_exact(s, p, n + 1).value
