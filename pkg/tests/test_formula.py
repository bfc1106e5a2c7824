from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pasmotive.formula import (
    Ac,
    Add,
    And,
    Atom,
    Const,
    Divides,
    Exists,
    Forall,
    FragmentError,
    Infinity,
    Mul,
    Not,
    Or,
    Ord,
    Sort,
    SortError,
    Var,
    check_sorts,
    constant_exclusions,
    dnf_clauses,
    free_variables,
    rename_apart,
    substitute,
    to_dnf,
    to_prenex,
    vg,
)
from pasmotive.models import Model, compile_formula
from pasmotive.parser import parse, parse_source

x = Var("x", Sort.VF)
m = Var("m", Sort.VG)
k = Var("k", Sort.VG)
xi = Var("xi", Sort.RF)


def test_free_variables_reads_sorts():
    assert free_variables(Atom(">=", Ord(x), m)) == {("x", Sort.VF), ("m", Sort.VG)}


def test_binder_removes_variable():
    assert free_variables(Exists(x, Atom("=", Ord(x), m))) == {("m", Sort.VG)}


def test_closed_residue_formula():
    f = Exists(xi, Atom("=", Mul(xi, xi), Const(Fraction(1), Sort.RF)))
    assert free_variables(f) == set()


def test_ord_of_residue_term_is_ill_sorted():
    with pytest.raises(SortError):
        check_sorts(Atom("=", Ord(xi), m))


def test_ac_yields_residue_sort():
    check_sorts(Atom("=", Ac(x), xi))
    with pytest.raises(SortError):
        check_sorts(Atom("=", Ac(x), m))


def test_divisibility_only_in_value_group():
    with pytest.raises(SortError):
        check_sorts(Divides(2, xi))


def test_nonlinear_value_group_rejected():
    with pytest.raises(SortError):
        check_sorts(Atom("=", Mul(m, k), vg(0)))


A = Atom("=", m, vg(0))
B = Atom("=", m, vg(1))
C = Atom("<=", k, vg(2))


def test_dnf_distributes():
    clauses = {frozenset(c) for c in dnf_clauses(And((Or((A, B)), C)))}
    assert clauses == {frozenset((A, C)), frozenset((B, C))}


def test_dnf_identity_on_literal():
    assert to_dnf(A) == A


def test_dnf_de_morgan():
    assert to_dnf(Not(And((A, B)))) == to_dnf(Or((Not(A), Not(B))))


def test_dnf_rejects_quantifiers():
    with pytest.raises(FragmentError):
        to_dnf(Exists(m, A))


def test_substitute_value():
    f = Atom(">=", Ord(x), m)
    assert substitute(f, {m: vg(0)}) == Atom(">=", Ord(x), vg(0))


def test_substitute_avoids_capture():
    f = Exists(m, Atom("=", m, k))
    g = substitute(f, {k: m})
    assert isinstance(g, Exists) and g.var != m
    assert free_variables(g) == {("m", Sort.VG)}
    assert g.body == Atom("=", g.var, m)


def test_substitute_sort_mismatch():
    with pytest.raises(SortError):
        substitute(Atom("=", m, vg(0)), {m: x})


def test_substitute_matrix_entries():
    src = parse_source("vf X[2,2]; ord(X) >= 0")
    y = Var("y", Sort.VF)
    entries = src.variables()
    g = substitute(src.body, {entries[0]: Add(y, y)})
    assert ("y", Sort.VF) in free_variables(g)
    assert ("X[1][1]", Sort.VF) not in free_variables(g)


def test_rename_apart_and_prenex():
    f = parse("vg m; (exists vg k. k = m) and (exists vg k. k = m + 1)")
    g = rename_apart(f)
    names = []

    def walk(h):
        if isinstance(h, (Exists, Forall)):
            names.append(h.var.name)
            walk(h.body)
        elif isinstance(h, (And, Or)):
            for a in h.args:
                walk(a)

    walk(g)
    assert len(names) == len(set(names)) == 2
    p = to_prenex(f)
    assert isinstance(p, Exists) and isinstance(p.body, Exists)


def test_constant_exclusions():
    assert constant_exclusions(parse("vf x; ord(x - 6/35) >= 0")) == {2, 3, 5, 7}


def test_infinity_is_value_group():
    check_sorts(Atom("=", Ord(x), Infinity()))


# ---------------------------------------------------------------- properties

u = Var("u", Sort.RF)
v = Var("v", Sort.RF)
n = Var("n", Sort.VG)


def _rf_atom(a, b, op):
    left = Add(Mul(Const(Fraction(a), Sort.RF), u), v)
    return Atom(op, left, Const(Fraction(b), Sort.RF))


atoms = st.one_of(
    st.builds(lambda a, b, op: Atom(op, Add(Mul(vg(a), m), n), vg(b)), st.integers(-3, 3), st.integers(-5, 5), st.sampled_from(["=", "<", "<=", "!="])),
    st.builds(lambda c, d: Divides(c, Add(m, vg(d))), st.integers(2, 4), st.integers(0, 3)),
    st.builds(_rf_atom, st.integers(0, 4), st.integers(0, 4), st.sampled_from(["=", "!="])),
)

formulas = st.recursive(
    atoms,
    lambda inner: st.one_of(
        st.builds(Not, inner),
        st.builds(lambda a, b: And((a, b)), inner, inner),
        st.builds(lambda a, b: Or((a, b)), inner, inner),
    ),
    max_leaves=6,
)

MODEL = Model("padic", 5)


def _truth(f, env):
    return compile_formula(f, MODEL)(dict(env))


@settings(max_examples=60, deadline=None)
@given(formulas)
def test_dnf_equivalent_on_small_model(f):
    g = to_dnf(f)
    check_sorts(g)
    for mv in range(-10, 11, 3):
        for nv in range(-10, 11, 4):
            for uv in range(5):
                for vv in range(0, 5, 2):
                    env = {"m": mv, "n": nv, "u": uv, "v": vv}
                    assert _truth(f, env) == _truth(g, env)


@settings(max_examples=60, deadline=None)
@given(formulas)
def test_dnf_idempotent(f):
    assert to_dnf(to_dnf(f)) == to_dnf(f)
