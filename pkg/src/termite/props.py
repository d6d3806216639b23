"""CTL property language: formula trees in negation normal form, a parser
for the bracketed surface syntax, and the NNF dualizer.

Surface syntax: temporal operators are written in square brackets and
applied with parentheses - ``[AG](x <= 0)``, ``[EF]([AG](x <= 0))``,
``[AU](p, q)`` - and combine with ``&&``, ``||`` and ``!`` over linear
comparisons (``<=``, ``<``, ``>=``, ``>``, ``=``/``==``, ``!=``).
Negation is pushed down to the atoms at construction time via the CTL
dualities, so every consumer sees NNF trees only; a negated equality or a
``!=`` becomes the two-sided integer disjunction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .ir import Atom, LinearTerm


class CtlFormula:
    """Base class for NNF formula nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Leaf(CtlFormula):
    atom: Atom

    def __str__(self) -> str:
        return str(self.atom)


@dataclass(frozen=True)
class And(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self) -> str:
        return f"({self.left} && {self.right})"


@dataclass(frozen=True)
class Or(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self) -> str:
        return f"({self.left} || {self.right})"


def _unary(name: str):
    @dataclass(frozen=True)
    class _Op(CtlFormula):
        sub: CtlFormula

        def __str__(self) -> str:
            return f"[{name}]({self.sub})"

    _Op.__name__ = _Op.__qualname__ = name
    return _Op


def _binary(name: str):
    @dataclass(frozen=True)
    class _Op(CtlFormula):
        left: CtlFormula
        right: CtlFormula

        def __str__(self) -> str:
            return f"[{name}]({self.left}, {self.right})"

    _Op.__name__ = _Op.__qualname__ = name
    return _Op


AX = _unary("AX")
EX = _unary("EX")
AF = _unary("AF")
EF = _unary("EF")
AG = _unary("AG")
EG = _unary("EG")
AU = _binary("AU")
EU = _binary("EU")


def atoms_of(f: CtlFormula) -> set[Atom]:
    """All atoms occurring in the formula."""
    if isinstance(f, Leaf):
        return {f.atom}
    if isinstance(f, (And, Or, AU, EU)):
        return atoms_of(f.left) | atoms_of(f.right)
    return atoms_of(f.sub)


def formula_vars(f: CtlFormula) -> set[str]:
    out: set[str] = set()
    for a in atoms_of(f):
        out |= a.vars()
    return out


def negate(f: CtlFormula) -> CtlFormula:
    """The negation of `f`, rewritten into NNF via the CTL dualities."""
    if isinstance(f, Leaf):
        parts = [Leaf(a) for a in f.atom.negated()]
        out: CtlFormula = parts[0]
        for p in parts[1:]:
            out = Or(out, p)
        return out
    if isinstance(f, And):
        return Or(negate(f.left), negate(f.right))
    if isinstance(f, Or):
        return And(negate(f.left), negate(f.right))
    if isinstance(f, AX):
        return EX(negate(f.sub))
    if isinstance(f, EX):
        return AX(negate(f.sub))
    if isinstance(f, AF):
        return EG(negate(f.sub))
    if isinstance(f, EG):
        return AF(negate(f.sub))
    if isinstance(f, AG):
        return EF(negate(f.sub))
    if isinstance(f, EF):
        return AG(negate(f.sub))
    if isinstance(f, AU):
        np, nq = negate(f.left), negate(f.right)
        # not A[p U q]  =  E[!q U (!p && !q)]  or  EG !q
        return Or(EU(nq, And(np, nq)), EG(nq))
    if isinstance(f, EU):
        np, nq = negate(f.left), negate(f.right)
        # not E[p U q]  =  A[!q U (!p && !q)]  or  AG !q
        return Or(AU(nq, And(np, nq)), AG(nq))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Parser


class PropertyError(Exception):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<op>\[|\]|\(|\)|,|&&|\|\||!=|<=|>=|==|=|<|>|!|\+|-|\*)"
    r"|(?P<num>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_.$]*))"
)

_UNARY_OPS = {"AX": AX, "EX": EX, "AF": AF, "EF": EF, "AG": AG, "EG": EG}
_BINARY_OPS = {"AU": AU, "EU": EU}
_CMP = ("<=", ">=", "==", "!=", "=", "<", ">")


def _tokenize(text: str) -> list[tuple[str, str]]:
    toks: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise PropertyError(f"unexpected character {rest[0]!r} in property")
        pos = m.end()
        for kind in ("op", "num", "ident"):
            if m.group(kind) is not None:
                toks.append((kind, m.group(kind)))
                break
    toks.append(("eof", ""))
    return toks


class _PropParser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str]:
        return self.toks[self.pos]

    def take(self) -> tuple[str, str]:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> None:
        kind, got = self.take()
        if got != text or kind == "eof":
            shown = got if kind != "eof" else "end of property"
            raise PropertyError(f"expected {text!r}, found {shown!r}")

    # -- formulas

    def formula(self) -> CtlFormula:
        f = self.conjunction()
        while self.peek() == ("op", "||"):
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> CtlFormula:
        f = self.unit()
        while self.peek() == ("op", "&&"):
            self.take()
            f = And(f, self.unit())
        return f

    def unit(self) -> CtlFormula:
        kind, text = self.peek()
        if (kind, text) == ("op", "!"):
            self.take()
            return negate(self.unit())
        if (kind, text) == ("op", "["):
            return self.temporal()
        if (kind, text) == ("op", "("):
            if self.group_is_formula():
                self.take()
                f = self.formula()
                self.expect(")")
                return f
            return self.comparison()
        return self.comparison()

    def group_is_formula(self) -> bool:
        """At '(': does the matching group parse as a formula rather than a
        parenthesized arithmetic operand of a comparison?"""
        depth = 0
        for kind, text in self.toks[self.pos:]:
            if kind == "eof":
                break
            if text == "(":
                depth += 1
            elif text == ")":
                depth -= 1
                if depth == 0:
                    continue
            if depth == 0:
                # first token after the group closes
                return text not in _CMP and text not in ("+", "-", "*")
            if depth == 1 and text in ("&&", "||", "[", ","):
                return True
        return True

    def temporal(self) -> CtlFormula:
        self.expect("[")
        kind, name = self.take()
        if kind != "ident" or name not in (*_UNARY_OPS, *_BINARY_OPS):
            raise PropertyError(f"unknown temporal operator {name!r}")
        self.expect("]")
        self.expect("(")
        first = self.formula()
        if name in _BINARY_OPS:
            self.expect(",")
            second = self.formula()
            self.expect(")")
            return _BINARY_OPS[name](first, second)
        self.expect(")")
        return _UNARY_OPS[name](first)

    # -- atoms

    def comparison(self) -> CtlFormula:
        lhs = self.expr()
        kind, op = self.take()
        if kind == "eof" or op not in _CMP:
            raise PropertyError(f"expected a comparison, found {op or 'end of property'!r}")
        rhs = self.expr()
        d = lhs - rhs
        if op == "<=":
            return Leaf(Atom(d))
        if op == "<":
            return Leaf(Atom(d + 1))
        if op == ">=":
            return Leaf(Atom(-d))
        if op == ">":
            return Leaf(Atom(-d + 1))
        if op in ("=", "=="):
            return Leaf(Atom(d, is_eq=True))
        # !=: two-sided integer disjunction
        return Or(Leaf(Atom(d + 1)), Leaf(Atom(-d + 1)))

    def expr(self) -> LinearTerm:
        t = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            u = self.term()
            t = t + u if op == "+" else t - u
        return t

    def term(self) -> LinearTerm:
        t = self.factor()
        while self.peek() == ("op", "*"):
            self.take()
            u = self.factor()
            if t.is_const():
                t = u * t.const
            elif u.is_const():
                t = t * u.const
            else:
                raise PropertyError("nonlinear product in property atom")
        return t

    def factor(self) -> LinearTerm:
        kind, text = self.take()
        if (kind, text) == ("op", "-"):
            return -self.factor()
        if (kind, text) == ("op", "("):
            t = self.expr()
            self.expect(")")
            return t
        if kind == "num":
            return LinearTerm.of(Fraction(int(text)))
        if kind == "ident":
            return LinearTerm.var(text)
        shown = text if kind != "eof" else "end of property"
        raise PropertyError(f"expected a term, found {shown!r}")


def parse_ctl(text: str) -> CtlFormula:
    """Parse the bracketed CTL surface syntax into an NNF formula tree."""
    p = _PropParser(text)
    f = p.formula()
    if p.peek()[0] != "eof":
        raise PropertyError(f"trailing input after property: {p.peek()[1]!r}")
    return f
