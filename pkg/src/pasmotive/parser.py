"""Text syntax for Pas-language formulas.

A formula file is a block of sort-annotated declarations followed by one
formula; ``#`` starts a comment::

    # a residue-sort existential
    rf u;
    exists rf xi. u = xi*xi

Declarations are ``vf x;``, ``rf u, v;``, ``vg m;`` and ``vf X[2,2];`` for an
n x m valued-field matrix whose entries are read as ``X[i][j]`` (1-based).
A bare matrix name may appear inside ``ord(...)`` (entrywise minimum), in
matrix sums, differences and products, and on both sides of ``=``/``!=``.

Formula syntax, loosest binding first: ``exists``/``forall`` (scope runs to
the right), ``->`` (right associative), ``or``, ``and``, ``not``.  Atoms are
``t op t`` with op one of ``= != < <= > >=`` and ``k | t``.  Terms use
``+ - * /``, ``ord(.)``, ``ac(.)``, ``+inf``, ``pi``, ``pi^k``, integer and
rational literals (``3/4`` written without spaces is a literal, ``3 / 4`` is a
field quotient) and ``n:vf``-style sort tags on literals.  ``ac_lift(u)``
denotes the angular component of any lift of the residue element ``u``, which
is ``u`` itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .formula import (
    Ac,
    Add,
    And,
    Atom,
    Const,
    Divides,
    Exists,
    FALSE,
    Forall,
    Formula,
    Implies,
    Infinity,
    Mul,
    Not,
    Or,
    Ord,
    Pi,
    Quot,
    Sort,
    SortError,
    Sub,
    TRUE,
    Term,
    Var,
    check_sorts,
    conj,
    disj,
    entry,
    formula_text,
    free_vars,
    sort_of,
)

_SORTS = {"vf": Sort.VF, "rf": Sort.RF, "vg": Sort.VG}
_KEYWORDS = {"exists", "forall", "and", "or", "not", "true", "false", "ord", "ac", "ac_lift", "pi", "inf"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<rational>\d+/\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>->|<=|>=|!=|[=<>|()\[\],;.:+\-*/^])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    glued: bool = False  # no whitespace before this token


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    glued = False
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
            glued = False
        elif kind == "ws":
            col += len(s)
            glued = False
        else:
            tokens.append(Token(kind, s, line, col, glued))
            col += len(s)
            glued = True
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True, slots=True)
class _Num(Term):
    """Literal whose sort is fixed later from context."""

    value: Fraction


@dataclass(frozen=True)
class _Matrix:
    rows: tuple  # tuple of tuples of Term


@dataclass(frozen=True)
class _MinOrd:
    terms: tuple


@dataclass
class SourceFormula:
    """Parsed formula file: declarations in order, plus the formula."""

    declarations: list[tuple[str, Sort, tuple[int, int] | None]]
    body: Formula
    text: str = ""
    matrices: dict[str, tuple[int, int]] = field(default_factory=dict)

    def variables(self) -> list[Var]:
        """Declared scalar variables in declaration order (matrices row-major)."""
        out = []
        for name, sort, shape in self.declarations:
            if shape is None:
                out.append(Var(name, sort))
            else:
                out.extend(entry(name, i, j) for i in range(1, shape[0] + 1) for j in range(1, shape[1] + 1))
        return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.furthest = (0, "")
        self.scopes: list[dict[str, tuple[Sort, tuple[int, int] | None]]] = [{}]

    # token helpers -------------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        idx = self.tokens.index(tok) if tok in self.tokens else self.pos
        if idx >= self.furthest[0]:
            self.furthest = (idx, message)
        raise _Backtrack(idx, message)

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind in ("op", "ident") and tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind in ("op", "ident") and tok.text == text:
            self.pos += 1
            return tok
        self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}")

    def expect_int(self) -> int:
        tok = self.peek()
        if tok.kind != "int":
            self.fail(f"expected an integer, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return int(tok.text)

    def lookup(self, name: str):
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    # declarations --------------------------------------------------------
    def declarations(self) -> list:
        decls = []
        while self.peek().kind == "ident" and self.peek().text in _SORTS:
            sort = _SORTS[self.peek().text]
            self.pos += 1
            while True:
                name, shape = self.declname(allow_entry=False)
                if self.lookup(name) is not None:
                    self.fail(f"variable {name!r} declared twice")
                self.scopes[0][name] = (sort, shape)
                decls.append((name, sort, shape))
                if not self.accept(","):
                    break
            self.expect(";")
        return decls

    def declname(self, allow_entry: bool):
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _KEYWORDS or tok.text in _SORTS:
            self.fail(f"expected a variable name, found {tok.text or 'end of input'!r}")
        self.pos += 1
        name = tok.text
        if self.peek().text == "[":
            self.pos += 1
            i = self.expect_int()
            if self.accept(","):
                j = self.expect_int()
                self.expect("]")
                if i < 1 or j < 1:
                    self.fail("matrix dimensions must be positive", tok)
                return name, (i, j)
            self.expect("]")
            if allow_entry:
                self.expect("[")
                j = self.expect_int()
                self.expect("]")
                return f"{name}[{i}][{j}]", None
            self.fail("expected ',' in matrix declaration")
        return name, None

    # formulas ------------------------------------------------------------
    def formula(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.accept("or"):
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.accept("and"):
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "ident":
            if tok.text == "not":
                self.pos += 1
                return Not(self.unary())
            if tok.text in ("exists", "forall"):
                return self.quantified()
            if tok.text == "true":
                self.pos += 1
                return TRUE
            if tok.text == "false":
                self.pos += 1
                return FALSE
        if tok.text == "(":
            save = self.pos
            try:
                self.pos += 1
                f = self.formula()
                self.expect(")")
                if self.peek().kind == "op" and self.peek().text in ("=", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/", "|"):
                    raise _Backtrack(self.pos, "")
                return f
            except _Backtrack:
                self.pos = save
        return self.atom()

    def quantified(self) -> Formula:
        kind = Exists if self.peek().text == "exists" else Forall
        self.pos += 1
        tok = self.peek()
        if tok.text not in _SORTS:
            self.fail(f"expected a sort (vf, rf, vg) after quantifier, found {tok.text or 'end of input'!r}")
        sort = _SORTS[tok.text]
        self.pos += 1
        bound = []
        scope = {}
        while True:
            name, shape = self.declname(allow_entry=True)
            if shape is not None and sort is not Sort.VF:
                self.fail("matrix variables must have valued-field sort", tok)
            scope[name] = (sort, shape)
            if shape is None:
                bound.append(Var(name, sort))
            else:
                bound.extend(entry(name, i, j) for i in range(1, shape[0] + 1) for j in range(1, shape[1] + 1))
            if not self.accept(","):
                break
        self.expect(".")
        self.scopes.append(scope)
        try:
            body = self.formula()
        finally:
            self.scopes.pop()
        for v in reversed(bound):
            body = kind(v, body)
        return body

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "int" and self.peek(1).text == "|":
            self.pos += 2
            k = int(tok.text)
            if k < 1:
                self.fail("divisibility modulus must be positive", tok)
            t = self.term()
            if isinstance(t, (_Matrix, _MinOrd)):
                self.fail("divisibility needs a scalar value-group term", tok)
            return Divides(k, self._resolve_region(t, Sort.VG, tok))
        left = self.term()
        op_tok = self.peek()
        if op_tok.kind != "op" or op_tok.text not in ("=", "!=", "<", "<=", ">", ">="):
            self.fail(f"expected a relation, found {op_tok.text or 'end of input'!r}")
        self.pos += 1
        right = self.term()
        return self._make_atom(op_tok, left, right)

    def _make_atom(self, tok: Token, left, right) -> Formula:
        op = tok.text
        if isinstance(left, _MinOrd) or isinstance(right, _MinOrd):
            if isinstance(left, _MinOrd) and isinstance(right, _MinOrd):
                self.fail("cannot compare two matrix valuations", tok)
            if isinstance(right, _MinOrd):
                left, right = right, left
                op = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}.get(op, op)
            if isinstance(right, _Matrix):
                self.fail("matrix on the right of a valuation comparison", tok)
            bound = self._resolve_region(right, Sort.VG, tok)
            parts = left.terms
            each = lambda rel: [Atom(rel, t, bound) for t in parts]
            if op in (">=", ">"):
                return conj(*each(op))
            if op in ("<=", "<"):
                return disj(*each(op))
            attained = conj(*each(">="), disj(*each("=")))
            return attained if op == "=" else Not(attained)
        if isinstance(left, _Matrix) or isinstance(right, _Matrix):
            if not (isinstance(left, _Matrix) and isinstance(right, _Matrix)):
                self.fail("matrix compared with a scalar", tok)
            if op not in ("=", "!="):
                self.fail("matrices only support = and !=", tok)
            if _shape(left) != _shape(right):
                self.fail("matrix shapes differ", tok)
            eqs = [
                Atom("=", self._resolve_region(a, Sort.VF, tok), self._resolve_region(b, Sort.VF, tok))
                for ra, rb in zip(left.rows, right.rows)
                for a, b in zip(ra, rb)
            ]
            return conj(*eqs) if op == "=" else disj(*(Atom("!=", e.left, e.right) for e in eqs))
        sort = _infer(left) or _infer(right) or Sort.VG
        atom = Atom(op, self._resolve_region(left, sort, tok), self._resolve_region(right, sort, tok))
        try:
            check_sorts(atom)
        except SortError as exc:
            self.fail(str(exc), tok)
        return atom

    # terms ---------------------------------------------------------------
    def term(self):
        left = self.product()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            tok = self.peek()
            self.pos += 1
            right = self.product()
            left = self._binary(Add if tok.text == "+" else Sub, left, right, tok)
        return left

    def product(self):
        left = self.signed()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("*", "/"):
                self.pos += 1
                right = self.signed()
                left = self._binary(Mul if tok.text == "*" else Quot, left, right, tok)
            elif tok.kind == "ident" and tok.glued and self.tokens[self.pos - 1].kind == "int":
                # juxtaposition such as 2x
                right = self.signed()
                left = self._binary(Mul, left, right, tok)
            else:
                return left

    def signed(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.pos += 1
            inner = self.signed()
            if isinstance(inner, _Num):
                return _Num(-inner.value)
            if isinstance(inner, Const):
                return Const(-inner.value, inner.sort)
            return self._binary(Mul, _Num(Fraction(-1)), inner, tok)
        if tok.kind == "op" and tok.text == "+" and self.peek(1).text == "inf":
            self.pos += 2
            return Infinity()
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok.kind in ("int", "rational"):
            self.pos += 1
            value = Fraction(tok.text)
            if self.peek().text == ":" and self.peek().glued:
                self.pos += 1
                stok = self.peek()
                if stok.text not in _SORTS:
                    self.fail(f"expected a sort tag, found {stok.text!r}")
                self.pos += 1
                try:
                    return Const(value, _SORTS[stok.text])
                except SortError as exc:
                    self.fail(str(exc), tok)
            return _Num(value)
        if tok.kind == "op" and tok.text == "(":
            self.pos += 1
            t = self.term()
            self.expect(")")
            return t
        if tok.kind != "ident":
            self.fail(f"expected a term, found {tok.text or 'end of input'!r}")
        name = tok.text
        if name == "inf":
            self.pos += 1
            return Infinity()
        if name == "pi":
            self.pos += 1
            if self.accept("^"):
                if self.accept("("):
                    neg = self.accept("-")
                    k = self.expect_int()
                    self.expect(")")
                    return Pi(-k if neg else k)
                return Pi(self.expect_int())
            return Pi(1)
        if name in ("ord", "ac", "ac_lift"):
            self.pos += 1
            self.expect("(")
            arg = self.term()
            self.expect(")")
            if name == "ord":
                if isinstance(arg, _Matrix):
                    return _MinOrd(tuple(Ord(self._resolve_region(t, Sort.VF, tok)) for row in arg.rows for t in row))
                return Ord(self._resolve_region(arg, Sort.VF, tok))
            if isinstance(arg, (_Matrix, _MinOrd)):
                self.fail(f"{name} needs a scalar argument", tok)
            if name == "ac":
                return Ac(self._resolve_region(arg, Sort.VF, tok))
            return self._resolve_region(arg, Sort.RF, tok)
        if name in _KEYWORDS or name in _SORTS:
            self.fail(f"unexpected keyword {name!r}")
        self.pos += 1
        info = self.lookup(name)
        if self.peek().text == "[" and self.peek().glued:
            self.pos += 1
            i = self.expect_int()
            self.expect("]")
            self.expect("[")
            j = self.expect_int()
            self.expect("]")
            ename = f"{name}[{i}][{j}]"
            einfo = self.lookup(ename)
            if einfo is not None:
                return Var(ename, einfo[0])
            if info is None or info[1] is None:
                self.fail(f"undeclared matrix {name!r}", tok)
            rows, cols = info[1]
            if not (1 <= i <= rows and 1 <= j <= cols):
                self.fail(f"index [{i}][{j}] out of range for {name}[{rows},{cols}]", tok)
            return entry(name, i, j)
        if info is None:
            self.fail(f"undeclared variable {name!r}", tok)
        sort, shape = info
        if shape is not None:
            return _Matrix(tuple(tuple(entry(name, i, j) for j in range(1, shape[1] + 1)) for i in range(1, shape[0] + 1)))
        return Var(name, sort)

    def _binary(self, cls, left, right, tok):
        if isinstance(left, _MinOrd) or isinstance(right, _MinOrd):
            self.fail("matrix valuation must stand alone on one side of a comparison", tok)
        if isinstance(left, _Matrix) or isinstance(right, _Matrix):
            return self._matrix_binary(cls, left, right, tok)
        sl, sr = _infer(left), _infer(right)
        if sl and sr and sl is not sr:
            self.fail(f"mixed sorts {sl.value}/{sr.value}", tok)
        sort = sl or sr
        if sort is not None:
            left, right = self._resolve_region(left, sort, tok), self._resolve_region(right, sort, tok)
        node = cls(left, right)
        if sort is not None:
            try:
                sort_of(node)
            except SortError as exc:
                self.fail(str(exc), tok)
        return node

    def _matrix_binary(self, cls, left, right, tok):
        if cls in (Add, Sub):
            if not (isinstance(left, _Matrix) and isinstance(right, _Matrix)) or _shape(left) != _shape(right):
                self.fail("matrix sum needs two matrices of equal shape", tok)
            return _Matrix(tuple(
                tuple(self._binary(cls, a, b, tok) for a, b in zip(ra, rb)) for ra, rb in zip(left.rows, right.rows)
            ))
        if cls is Mul:
            if isinstance(left, _Matrix) and isinstance(right, _Matrix):
                n, k = _shape(left)
                k2, m = _shape(right)
                if k != k2:
                    self.fail("matrix product shapes do not match", tok)
                rows = []
                for i in range(n):
                    row = []
                    for j in range(m):
                        acc = None
                        for r in range(k):
                            prod = self._binary(Mul, left.rows[i][r], right.rows[r][j], tok)
                            acc = prod if acc is None else self._binary(Add, acc, prod, tok)
                        row.append(acc)
                    rows.append(tuple(row))
                return _Matrix(tuple(rows))
            scalar, mat = (left, right) if isinstance(right, _Matrix) else (right, left)
            return _Matrix(tuple(tuple(self._binary(Mul, scalar, e, tok) for e in row) for row in mat.rows))
        self.fail("matrix division is not supported", tok)

    def _resolve_region(self, t, sort: Sort, tok: Token) -> Term:
        if isinstance(t, (_Matrix, _MinOrd)):
            self.fail("matrix where a scalar is expected", tok)
        s = _infer(t)
        if s is not None and s is not sort:
            self.fail(f"expected a {sort.value} term, found {s.value}", tok)
        try:
            return _resolve(t, sort)
        except SortError as exc:
            self.fail(str(exc), tok)


class _Backtrack(Exception):
    def __init__(self, index: int, message: str):
        super().__init__(message)
        self.index = index
        self.message = message


def _shape(m: _Matrix) -> tuple[int, int]:
    return len(m.rows), len(m.rows[0])


def _infer(t) -> Sort | None:
    if isinstance(t, _Num):
        return None
    if isinstance(t, (Var, Const)):
        return t.sort
    if isinstance(t, (Infinity, Ord)):
        return Sort.VG
    if isinstance(t, Pi):
        return Sort.VF
    if isinstance(t, Ac):
        return Sort.RF
    if isinstance(t, (Add, Sub, Mul, Quot)):
        return _infer(t.left) or _infer(t.right)
    return None


def _resolve(t: Term, sort: Sort) -> Term:
    if isinstance(t, _Num):
        return Const(t.value, sort)
    if isinstance(t, (Add, Sub, Mul, Quot)):
        return type(t)(_resolve(t.left, sort), _resolve(t.right, sort))
    return t


def parse_source(text: str) -> SourceFormula:
    """Parse a formula file into declarations plus formula."""
    p = _Parser(text)
    try:
        decls = p.declarations()
        body = p.formula()
        if p.peek().kind != "eof":
            p.fail(f"unexpected {p.peek().text!r} after formula")
    except _Backtrack:
        idx, message = p.furthest
        tok = p.tokens[min(idx, len(p.tokens) - 1)]
        raise ParseError(message, tok.line, tok.column) from None
    try:
        check_sorts(body)
    except SortError as exc:
        raise ParseError(str(exc), 1, 1) from None
    matrices = {name: shape for name, _, shape in decls if shape is not None}
    return SourceFormula(decls, body, text, matrices)


def parse(text: str) -> Formula:
    """Parse formula text (declarations + formula) into a well-sorted Formula.

    >>> str(parse("vf x; vg m; ord(x) >= m"))
    'ord(x) >= m'
    """
    return parse_source(text).body


_ENTRY_RE = re.compile(r"^(?P<base>[A-Za-z_][A-Za-z0-9_']*)\[(?P<i>\d+)\]\[(?P<j>\d+)\]$")


def declaration_text(variables) -> str:
    """Declaration block for a set of variables; matrix entries are grouped."""
    scalars: dict[Sort, list[str]] = {s: [] for s in Sort}
    matrices: dict[str, tuple[int, int]] = {}
    for v in variables:
        m = _ENTRY_RE.match(v.name)
        if m and v.sort is Sort.VF:
            i, j = int(m["i"]), int(m["j"])
            r, c = matrices.get(m["base"], (0, 0))
            matrices[m["base"]] = (max(r, i), max(c, j))
        else:
            scalars[v.sort].append(v.name)
    lines = []
    for sort in (Sort.VF, Sort.RF, Sort.VG):
        names = sorted(scalars[sort])
        if sort is Sort.VF:
            names += [f"{b}[{r},{c}]" for b, (r, c) in sorted(matrices.items())]
        if names:
            lines.append(f"{sort.value} {', '.join(names)};")
    return "\n".join(lines)


def serialize(f: Formula, variables=None) -> str:
    """Canonical text: declarations for the free variables, then the formula."""
    check_sorts(f)
    decls = declaration_text(free_vars(f) if variables is None else variables)
    body = formula_text(f)
    return f"{decls}\n{body}\n" if decls else f"{body}\n"
