"""Parser for the T2 native text format.

The format::

    START: <loc>;
    FROM: <loc>;
      <stmt>*
    TO: <loc>;
    ...

where a statement is either ``assume(<cond>);`` or ``<ident> := <expr>;``,
conditions compare two linear expressions with one of ``< <= = == != >= >``,
and ``//`` starts a line comment.  Locations may be identifiers or numerals;
they are renumbered to dense ints, with the source spelling kept in the
program's `loc_names` table.

Normalizations performed here (the rest of the package only ever sees the
canonical `ir` form):

- strict comparisons become non-strict integer ones (``a < b`` is
  ``a - b + 1 <= 0``);
- ``a != b`` splits the enclosing rule into two alternatives (``<`` / ``>``);
- an ``assume`` occurring after an assignment splits the rule into a chain
  of transitions through fresh locations, so that within one transition all
  guards precede all assignments while the source's sequential semantics is
  preserved;
- ``nondet()`` is only legal as the entire right-hand side of an
  assignment, never inside a larger expression or a condition.

Division, modulo, and products of two variable terms are rejected with a
position-carrying `ParseError`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .ir import Assignment, Atom, LinearTerm, Program, Transition, eq, gt, le, lt


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'ident', 'num', 'op', 'eof'
    text: str
    line: int
    col: int


_TWO_CHAR = (":=", "<=", ">=", "==", "!=")
_ONE_CHAR = "<>=+-*();:"


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_.$"):
                j += 1
            toks.append(_Tok("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("num", text[i:j], line, col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR:
            toks.append(_Tok("op", two, line, col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            toks.append(_Tok("op", c, line, col))
            i += 1
            col += 1
            continue
        if c in "/%":
            raise ParseError(
                f"'{c}' is not supported (only linear integer arithmetic)", line, col
            )
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser

_NONDET = object()  # marker: a bare nondet() right-hand side
_ExprVal = Union[LinearTerm, object]


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0
        self.loc_ids: dict[str, int] = {}
        self.loc_names: dict[int, str] = {}
        self.next_loc = 0
        self.next_tid = 0
        self.transitions: list[Transition] = []

    # -- token plumbing

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def err(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        t = tok or self.peek()
        return ParseError(msg, t.line, t.col)

    def expect_op(self, op: str) -> _Tok:
        t = self.peek()
        if t.kind != "op" or t.text != op:
            shown = t.text if t.kind != "eof" else "end of input"
            raise self.err(f"expected '{op}', found {shown!r}")
        return self.take()

    def expect_kw(self, kw: str) -> None:
        t = self.peek()
        if t.kind != "ident" or t.text != kw:
            shown = t.text if t.kind != "eof" else "end of input"
            raise self.err(f"expected '{kw}', found {shown!r}")
        self.take()

    def at_kw(self, kw: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == kw

    # -- locations

    def loc_id(self, tok: _Tok) -> int:
        key = tok.text
        if key not in self.loc_ids:
            self.loc_ids[key] = self.next_loc
            self.loc_names[self.next_loc] = key
            self.next_loc += 1
        return self.loc_ids[key]

    def fresh_loc(self) -> int:
        lid = self.next_loc
        self.next_loc += 1
        return lid

    def parse_loc(self) -> int:
        t = self.peek()
        if t.kind not in ("ident", "num"):
            raise self.err("expected a location (identifier or numeral)")
        self.take()
        return self.loc_id(t)

    # -- expressions

    def parse_expr(self, allow_nondet: bool = False) -> _ExprVal:
        v = self.parse_addsub()
        if v is _NONDET and not allow_nondet:
            raise self.err("nondet() is only allowed as the entire right-hand side of an assignment")
        return v

    def parse_addsub(self) -> _ExprVal:
        left = self.parse_mul()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in "+-":
                self.take()
                right = self.parse_mul()
                if left is _NONDET or right is _NONDET:
                    raise self.err("nondet() cannot appear inside a larger expression", t)
                left = left + right if t.text == "+" else left - right
            else:
                return left

    def parse_mul(self) -> _ExprVal:
        left = self.parse_atom_expr()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text == "*":
                self.take()
                right = self.parse_atom_expr()
                if left is _NONDET or right is _NONDET:
                    raise self.err("nondet() cannot appear inside a larger expression", t)
                assert isinstance(left, LinearTerm) and isinstance(right, LinearTerm)
                if left.is_const():
                    left = right.scale(left.const)
                elif right.is_const():
                    left = left.scale(right.const)
                else:
                    raise self.err("nonlinear product of two variable expressions", t)
            else:
                return left

    def parse_atom_expr(self) -> _ExprVal:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return LinearTerm.of(Fraction(int(t.text)))
        if t.kind == "op" and t.text == "-":
            self.take()
            v = self.parse_atom_expr()
            if v is _NONDET:
                raise self.err("nondet() cannot appear inside a larger expression", t)
            assert isinstance(v, LinearTerm)
            return -v
        if t.kind == "op" and t.text == "(":
            self.take()
            v = self.parse_addsub()
            self.expect_op(")")
            return v
        if t.kind == "ident":
            self.take()
            if t.text == "nondet":
                self.expect_op("(")
                self.expect_op(")")
                return _NONDET
            return LinearTerm.var(t.text)
        shown = t.text if t.kind != "eof" else "end of input"
        raise self.err(f"expected an expression, found {shown!r}")

    # -- conditions: a list of alternatives, each a conjunction of atoms

    def parse_cond(self) -> list[list[Atom]]:
        lhs = self.parse_expr()
        t = self.peek()
        relops = ("<", "<=", "=", "==", "!=", ">=", ">")
        if t.kind != "op" or t.text not in relops:
            raise self.err("expected a comparison operator", t)
        self.take()
        rhs = self.parse_expr()
        assert isinstance(lhs, LinearTerm) and isinstance(rhs, LinearTerm)
        op = t.text
        if op == "<":
            return [[lt(lhs, rhs)]]
        if op == "<=":
            return [[le(lhs, rhs)]]
        if op in ("=", "=="):
            return [[eq(lhs, rhs)]]
        if op == ">=":
            return [[le(rhs, lhs)]]
        if op == ">":
            return [[gt(lhs, rhs)]]
        # '!=' over the integers: strictly below or strictly above
        return [[lt(lhs, rhs)], [gt(lhs, rhs)]]

    # -- statements and rules

    def parse_rule(self) -> None:
        self.expect_kw("FROM")
        self.expect_op(":")
        src = self.parse_loc()
        self.expect_op(";")
        # Each statement is ('assume', [alt, ...]) or ('assign', var, rhs).
        stmts: list[tuple] = []
        while not self.at_kw("TO"):
            t = self.peek()
            if t.kind == "eof":
                raise self.err("unexpected end of input inside a rule (missing 'TO:')")
            if self.at_kw("assume"):
                self.take()
                self.expect_op("(")
                alts = self.parse_cond()
                self.expect_op(")")
                self.expect_op(";")
                stmts.append(("assume", alts))
            elif t.kind == "ident":
                name_tok = self.take()
                if name_tok.text in ("FROM", "START", "TO", "nondet"):
                    raise self.err(f"'{name_tok.text}' cannot be used here", name_tok)
                self.expect_op(":=")
                rhs = self.parse_expr(allow_nondet=True)
                self.expect_op(";")
                expr = None if rhs is _NONDET else rhs
                stmts.append(("assign", name_tok.text, expr))
            else:
                raise self.err(f"expected a statement or 'TO:', found {t.text!r}", t)
        self.expect_kw("TO")
        self.expect_op(":")
        tgt = self.parse_loc()
        self.expect_op(";")
        # Expand '!=' alternatives into separate statement sequences.
        seqs: list[list[tuple]] = [[]]
        for st in stmts:
            if st[0] == "assume":
                seqs = [s + [("assume", alt)] for s in seqs for alt in st[1]]
            else:
                seqs = [s + [st] for s in seqs]
        for seq in seqs:
            self.emit_chain(src, tgt, seq)

    def emit_chain(self, src: int, tgt: int, stmts: list[tuple]) -> None:
        """Emit the transitions for one alternative of a rule, splitting at
        every assume that follows an assignment."""
        guards: list[Atom] = []
        assigns: list[Assignment] = []
        cur = src

        def flush(to: int) -> None:
            nonlocal guards, assigns
            self.transitions.append(
                Transition(self.next_tid, cur, to, tuple(guards), tuple(assigns))
            )
            self.next_tid += 1
            guards, assigns = [], []

        for st in stmts:
            if st[0] == "assume":
                if assigns:
                    mid = self.fresh_loc()
                    flush(mid)
                    cur = mid
                for a in st[1]:
                    if not a.is_trivially_true():
                        guards.append(a)
            else:
                _, var, expr = st
                assigns.append(Assignment(var, expr))
        flush(tgt)

    def parse_program(self) -> Program:
        self.expect_kw("START")
        self.expect_op(":")
        start = self.parse_loc()
        self.expect_op(";")
        while self.peek().kind != "eof":
            self.parse_rule()
        return Program(start, self.transitions, self.loc_names)


def parse_t2(text: str) -> Program:
    """Parse T2 source text into a `Program`.  Raises `ParseError`."""
    return _Parser(text).parse_program()
