from pathlib import Path

import pytest

from pasmotive.formula import Atom, Exists, Infinity, Ord, Sort, SortError, Var
from pasmotive.parser import ParseError, parse, parse_source, serialize, tokenize

GOLDEN = Path(__file__).parent / "golden"


def _blocks(name):
    return (GOLDEN / name).read_text().split("\n---\n")


def test_comparison_atom():
    f = parse("vf x; vg m; ord(x) >= m")
    assert f == Atom(">=", Ord(Var("x", Sort.VF)), Var("m", Sort.VG))


def test_residue_existential():
    f = parse("rf u; exists rf xi. ac_lift(u) = xi*xi")
    assert isinstance(f, Exists) and f.var == Var("xi", Sort.RF)


def test_infinity():
    f = parse("vf x; ord(x) = +inf")
    assert f.right == Infinity()


@pytest.mark.parametrize(
    "text",
    ["vf x; vg m; ord(x) >= m", "rf u; exists rf xi. ac_lift(u) = xi*xi", "vf x; ord(x) = +inf"],
)
def test_round_trip_examples(text):
    src = parse_source(text)
    assert parse(serialize(src.body, src.variables())) == src.body


def test_golden_corpus_round_trips():
    blocks = _blocks("formulas.txt")
    assert len(blocks) == 50
    for text in blocks:
        src = parse_source(text)
        again = parse_source(serialize(src.body, src.variables()))
        assert again.body == src.body, text


def test_golden_canonical_text_is_stable():
    got = []
    for text in _blocks("formulas.txt"):
        src = parse_source(text)
        got.append(serialize(src.body, src.variables()))
    assert "\n---\n".join(got) + "\n" == (GOLDEN / "formulas.canonical").read_text()


def test_comments_and_newlines():
    f = parse("# header\nvg m; # trailing\n m >= 0 # done\n")
    assert f == Atom(">=", Var("m", Sort.VG), parse("vg m; m >= 0").right)


def test_error_location():
    with pytest.raises(ParseError) as err:
        parse("vg m;\nm >= ) 1")
    assert (err.value.line, err.value.column) == (2, 6)


def test_undeclared_variable():
    with pytest.raises(ParseError, match="undeclared"):
        parse("vg m; m >= k")


def test_sort_mismatch():
    with pytest.raises((ParseError, SortError)):
        parse("vf x; vg m; x = m")


def test_matrix_ord_is_entrywise_minimum():
    f = parse("vf X[2,2]; ord(X) >= 0")
    text = serialize(f)
    assert text.count("ord(") == 4


def test_tokenize_rational_literal():
    kinds = [t.kind for t in tokenize("3/4 3 / 4")]
    assert kinds[0] == "rational" and "op" in kinds
