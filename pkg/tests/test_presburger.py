import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pasmotive.formula import FragmentError, Sort, Var, formula_text, free_vars, is_quantifier_free
from pasmotive.parser import parse
from pasmotive.presburger import (
    UnboundedUnderModel,
    decide_bounded,
    eliminate_quantifiers,
    enumerate_solutions,
    uniform_bound,
)
from qe_oracle import grid_truth, random_formula

DATA = Path(__file__).resolve().parents[1] / "src" / "pasmotive" / "data"


def test_parity_is_forced():
    assert formula_text(eliminate_quantifiers(parse("vg m; exists vg x. 2*x = m"))) == "2 | m"


def test_projection():
    assert formula_text(eliminate_quantifiers(parse("vg m; exists vg x. x >= 0 and m = x"))) == "m >= 0"


def test_non_linear_rejected():
    with pytest.raises(FragmentError):
        eliminate_quantifiers(parse("vf x; vg m; exists vg k. ord(x) = k + m"))


@pytest.mark.parametrize("seed", range(4))
def test_qe_random_formulas_match_brute_force(seed):
    rng = random.Random(1000 + seed)
    for _ in range(25):
        f, names = random_formula(rng)
        g = eliminate_quantifiers(f)
        assert is_quantifier_free(g)
        assert (grid_truth(f, names) == grid_truth(g, names)).all(), formula_text(f)


def test_qe_regression_corpus():
    corpus = json.loads((DATA / "qe_corpus.json").read_text())
    assert len(corpus) == 40
    for item in corpus:
        f = parse(item["formula"])
        g = eliminate_quantifiers(f)
        assert formula_text(g) == item["quantifier_free"]
        assert (grid_truth(f, item["free"]) == grid_truth(g, item["free"])).all()


def test_bounded_interval():
    w = decide_bounded(parse("vg m; 0 <= m and m <= 5"))
    assert w.bounded and w.box == ((0, 5),)


def test_ray_is_unbounded():
    w = decide_bounded(parse("vg m; m >= 0"))
    assert not w.bounded
    name, start, step = w.ray
    assert name == "m" and step > 0


def test_simplex_box():
    w = decide_bounded(parse("vg m1, m2; m1 >= 0 and m2 >= 0 and m1 + m2 <= 3"), ["m1", "m2"])
    assert w.bounded
    for lo, hi in w.box:
        assert 0 <= lo <= hi <= 3


def test_empty_is_bounded():
    w = decide_bounded(parse("vg m; m > 3 and m < 2"))
    assert w.bounded and w.empty


def test_enumerate_examples():
    f = parse("vg m; 0 <= m and m <= 2")
    assert enumerate_solutions(f, decide_bounded(f)) == [(0,), (1,), (2,)]
    f = parse("vg m; 2 | m and 0 <= m and m <= 5")
    assert enumerate_solutions(f, decide_bounded(f)) == [(0,), (2,), (4,)]
    f = parse("vg m1, m2; m1 >= m2 and 0 <= m2 and m1 <= 2")
    got = enumerate_solutions(f, decide_bounded(f, ["m1", "m2"]))
    assert got == [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]


def test_enumerate_needs_box():
    with pytest.raises(ValueError):
        enumerate_solutions(parse("vg m; m >= 0"), decide_bounded(parse("vg m; m >= 0")))


coef = st.integers(-4, 4)


@settings(max_examples=60, deadline=None)
@given(coef, coef, st.integers(-6, 6), coef, coef, st.integers(-6, 6), st.integers(2, 4), st.integers(0, 3))
def test_box_encloses_all_solutions(a, b, c, d, e, f_, k, r):
    text = f"vg m, n; {a}*m + {b}*n <= {c} and {d}*m + {e}*n >= {f_} and {k} | m + {r} and -7 <= m + n and m - n <= 7"
    f = parse(text)
    w = decide_bounded(f, ["m", "n"])
    if not w.bounded:
        return
    sols = enumerate_solutions(f, w) if not w.empty else []
    lo = -40
    brute = []
    for mv in range(lo, -lo + 1):
        for nv in range(lo, -lo + 1):
            if (a * mv + b * nv <= c and d * mv + e * nv >= f_ and (mv + r) % k == 0 and -7 <= mv + nv and mv - nv <= 7):
                brute.append((mv, nv))
    assert sols == brute


def test_uniform_bound_union():
    res = uniform_bound(parse("vg m; (0 <= m and m <= 2) or m = 0"))
    assert res.C == [(0,), (1,), (2,)]
    assert res.excluded_primes == set()


def test_uniform_bound_mixed_guard():
    res = uniform_bound(parse("vg m; (0 <= m and m <= 2 and exists rf xi. xi*xi = -1) or m = 1"), (3, 5, 7, 13))
    assert res.C == [(0,), (1,), (2,)]


def test_uniform_bound_dead_unbounded_piece():
    res = uniform_bound(parse("vg m; (m >= 0 and exists rf xi. xi*xi = 0 and xi != 0) or m = 2"))
    assert res.C == [(2,)]
    assert len(res.unbounded) == 1


def test_uniform_bound_unbounded_under_model():
    with pytest.raises(UnboundedUnderModel) as err:
        uniform_bound(parse("vg m; m >= 0 and exists rf xi. xi*xi = -1"), (3, 5, 7))
    assert err.value.prime == 5


def test_uniform_bound_rejects_valued_field_variables():
    with pytest.raises(FragmentError):
        uniform_bound(parse("vf x; vg m; ord(x) = m"))
