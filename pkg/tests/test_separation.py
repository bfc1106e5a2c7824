import itertools

import pytest

from pasmotive.formula import FragmentError, TrueF, formula_text
from pasmotive.models import TriBool, eval_valued
from pasmotive.parser import parse
from pasmotive.separation import separate


def test_unit_valuation():
    form, ledger = separate(parse("vg m; ord(2) = m"))
    assert formula_text(form.formula()) in ("m = 0", "0 = m")
    assert ledger.primes == {2}


def test_zero_has_infinite_valuation():
    form, ledger = separate(parse("vf x; ord(0) = +inf"))
    assert isinstance(form.formula(), TrueF)
    assert not ledger.primes


def test_angular_component_of_constant():
    form, ledger = separate(parse("rf xi; ac(3) = xi"))
    assert formula_text(form.formula()) == "3 = xi"
    assert ledger.primes == {3}


def test_composite_rational_excludes_its_primes():
    _, ledger = separate(parse("vg m; ord(6/35) = m"))
    assert ledger.primes == {2, 3, 5, 7}


def test_pi_powers_are_free():
    form, ledger = separate(parse("vg m; ord(pi^3 + 7*pi^5) = m"))
    assert formula_text(form.formula()) in ("m = 3", "3 = m")
    assert not ledger.primes


def test_valued_field_quantifier_is_out_of_fragment():
    with pytest.raises(FragmentError, match="measure engine"):
        separate(parse("vg m; exists vf x. ord(x) >= 0 and ord(x) = m"))


def test_free_valued_field_variable_rejected():
    with pytest.raises(FragmentError):
        separate(parse("vf x; vg m; ord(x) = m"))


def test_ledger_is_needed_at_two():
    # in Q_2 the constant 2 is the uniformizer, so m = 0 is wrong there
    theta = parse("vg m; ord(2) = m")
    assert eval_valued(theta, "padic", 4, {"m": 0}, p=2) is TriBool.FALSE
    assert eval_valued(theta, "padic", 4, {"m": 1}, p=2) is TriBool.TRUE


THETAS = [
    "vg m; ord(2) = m",
    "vg m; ord(6) <= m and m <= ord(pi^3) and not 3 | m",
    "vg m; (exists rf xi. ac(5) = xi*xi) and 0 <= m and m <= 4 or m = -1",
    "vg m, n; ord(pi^2 - 9*pi^3) + n = m or ac(10) = 1",
    "vg m; rf u; ac(7/2) = u and m != ord(0)",
    "vg m; forall rf xi. xi*xi != ac(3) or m >= ord(12)",
    "vg m; m + ord(0) = +inf and 2 | m",
]


@pytest.mark.parametrize("text", THETAS)
def test_separated_form_agrees_with_models(text):
    theta = parse(text)
    form, ledger = separate(theta)
    sep = form.formula()
    names = sorted({v.name: v for v in _free(theta)}.items())
    for p in (3, 5, 7, 11, 13):
        if p in ledger.primes:
            continue
        for model in ("padic", "laurent"):
            ranges = [range(p) if v.sort.value == "rf" else range(-3, 5) for _, v in names]
            for values in itertools.product(*ranges):
                env = {n: x for (n, _), x in zip(names, values)}
                a = eval_valued(theta, model, 3, env, p=p)
                b = eval_valued(sep, model, 3, {k: v for k, v in env.items() if k in {w.name for w in _free(sep)}}, p=p)
                assert a is b, (p, model, env)


def _free(f):
    from pasmotive.formula import free_vars

    return free_vars(f)
