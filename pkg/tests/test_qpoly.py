from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pasmotive.qpoly import FitError, QPolynomial, fit_laurent, solve_exact

q = QPolynomial.q()


def test_linear_fit():
    res = fit_laurent([(3, 4), (5, 6), (7, 8)])
    assert res.polynomial == q + 1


def test_unit_group_volume_fit():
    g = (1 - q ** -1) * (1 - QPolynomial.q(-2))
    pts = [(p, g(p)) for p in (3, 5, 7, 11)]
    res = fit_laurent(pts, (-3, 0), holdout=[(13, g(13))])
    assert res.polynomial == g
    assert str(res.polynomial) == "1 - q^(-1) - q^(-2) + q^(-3)"
    assert res.validated == ((13, g(13), g(13)),)


def test_underdetermined_fit_is_ambiguous():
    g = (1 - q ** -1) * (1 - QPolynomial.q(-2))
    with pytest.raises(FitError, match="ambiguous"):
        fit_laurent([(p, g(p)) for p in (3, 5, 7, 11)])


def test_holdout_catches_wrong_fit():
    with pytest.raises(FitError) as err:
        fit_laurent([(3, 12), (5, 30)], (1, 2), holdout=[(7, 57)])
    assert "7" in err.value.residuals


def test_non_polynomial_data_report_residuals():
    # points on y^2 = x^3 + x + 1 are not a polynomial in q in any small window
    counts = {3: 4, 5: 9, 7: 5, 11: 14, 13: 18}
    with pytest.raises(FitError) as err:
        fit_laurent(list(counts.items()), (-1, 1))
    assert err.value.residuals


def test_elliptic_curve_counts_are_brute_force():
    def count(p):
        return 1 + sum(1 for x in range(p) for y in range(p) if (y * y - x**3 - x - 1) % p == 0)

    assert {p: count(p) for p in (3, 5, 7, 11, 13)} == {3: 4, 5: 9, 7: 5, 11: 14, 13: 18}


def test_parse_round_trip():
    for poly in (q + 1, q * q + q, (1 - q ** -1) ** 3, QPolynomial.of({-2: Fraction(7, 2), 3: -1}), QPolynomial()):
        assert QPolynomial.parse(str(poly)) == poly


def test_exact_solver():
    assert solve_exact([[2, 1], [1, 3]], [3, 5]) == [Fraction(4, 5), Fraction(7, 5)]
    assert solve_exact([[1, 2], [2, 4]], [1, 2]) is None


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.integers(-3, 3), st.fractions(max_denominator=6).filter(bool), min_size=1, max_size=3))
def test_fit_recovers_sparse_polynomials(coeffs):
    poly = QPolynomial.of(coeffs)
    lo, hi = poly.exponent_range
    primes = (3, 5, 7, 11, 13, 17, 19, 23)
    width = hi - lo + 1
    res = fit_laurent([(p, poly(p)) for p in primes[: width + 1]], (lo, hi), holdout=[(29, poly(29))])
    assert res.polynomial == poly


def test_fixed_terms_resolve_tight_fits():
    target = (1 - QPolynomial.q(-1)) * (1 - QPolynomial.q(-2))
    pts = [(p, target(p)) for p in (3, 5, 7, 11)]
    with pytest.raises(FitError, match="ambiguous"):
        fit_laurent(pts, (-8, 8))
    res = fit_laurent(pts, (-4, -1), holdout=[(13, target(13))], fixed=QPolynomial.constant(1))
    assert res.polynomial == target
    with pytest.raises(FitError):
        fit_laurent(pts, (-4, -1), holdout=[(13, target(13) + 1)], fixed=QPolynomial.constant(1))
