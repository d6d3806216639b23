"""Core program representation.

Programs are integer transition systems: finitely many control locations
(plain ints), one start location, and transitions carrying a guard (a
conjunction of linear atoms over the pre-state) followed by an ordered list
of assignments.  All program variables range over the (unbounded)
mathematical integers; arithmetic inside the analyses is exact rational.

Conventions used throughout the package:

- A `LinearTerm` is an affine expression ``sum_i c_i * v_i + k`` with
  rational coefficients; zero coefficients are never stored.
- An `Atom` is canonical: either ``term <= 0`` or ``term = 0``.  Strict
  comparisons over integers are normalized away at construction time
  (``t < 0`` becomes ``t + 1 <= 0``), and disequalities never appear as
  atoms (the parser splits them into two transitions).
- Assignments in a transition are *sequential*: each right-hand side is
  evaluated in the state produced by the preceding assignments, exactly as
  in the source text.  `parallel_update` collapses such a list into a
  simultaneous substitution when a relational view is needed.
- A right-hand side of ``None`` means a nondeterministic integer choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

Rat = Fraction
RatLike = Union[Fraction, int]
State = dict[str, int]


def rat(x: RatLike) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------
# Linear terms


class LinearTerm:
    """An affine expression over program variables with rational coefficients.

    Immutable by convention; hashable.  The zero polynomial is represented
    by an empty coefficient map.
    """

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(
        self,
        coeffs: Optional[Mapping[str, RatLike] | Iterable[tuple[str, RatLike]]] = None,
        const: RatLike = 0,
    ):
        cs: dict[str, Fraction] = {}
        if coeffs:
            items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
            for v, c in items:
                c = rat(c)
                if c:
                    cs[v] = cs.get(v, Fraction(0)) + c
                    if not cs[v]:
                        del cs[v]
        self.coeffs = cs
        self.const = rat(const)
        self._hash: Optional[int] = None

    @staticmethod
    def var(name: str) -> "LinearTerm":
        return LinearTerm({name: 1})

    @staticmethod
    def of(value: RatLike) -> "LinearTerm":
        return LinearTerm(const=value)

    def is_const(self) -> bool:
        return not self.coeffs

    def coeff(self, v: str) -> Fraction:
        return self.coeffs.get(v, Fraction(0))

    def vars(self) -> set[str]:
        return set(self.coeffs)

    def __add__(self, other: "LinearTerm | RatLike") -> "LinearTerm":
        if not isinstance(other, LinearTerm):
            return LinearTerm(self.coeffs, self.const + rat(other))
        cs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            nc = cs.get(v, Fraction(0)) + c
            if nc:
                cs[v] = nc
            elif v in cs:
                del cs[v]
        return LinearTerm(cs, self.const + other.const)

    def __radd__(self, other: RatLike) -> "LinearTerm":
        return self + other

    def __neg__(self) -> "LinearTerm":
        return LinearTerm({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other: "LinearTerm | RatLike") -> "LinearTerm":
        return self + (-other if isinstance(other, LinearTerm) else -rat(other))

    def __rsub__(self, other: RatLike) -> "LinearTerm":
        return (-self) + rat(other)

    def scale(self, k: RatLike) -> "LinearTerm":
        k = rat(k)
        if not k:
            return LinearTerm()
        return LinearTerm({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def __mul__(self, k: RatLike) -> "LinearTerm":
        return self.scale(k)

    __rmul__ = __mul__

    def eval(self, env: Mapping[str, RatLike]) -> Fraction:
        total = self.const
        for v, c in self.coeffs.items():
            total += c * env[v]
        return total

    def subst(self, sub: Mapping[str, "LinearTerm"]) -> "LinearTerm":
        """Replace each variable by its image; variables absent from `sub`
        stay themselves."""
        if not any(v in sub for v in self.coeffs):
            return self
        out = LinearTerm(const=self.const)
        for v, c in self.coeffs.items():
            img = sub.get(v)
            out = out + (img.scale(c) if img is not None else LinearTerm({v: c}))
        return out

    def rename(self, ren: Mapping[str, str]) -> "LinearTerm":
        return LinearTerm({ren.get(v, v): c for v, c in self.coeffs.items()}, self.const)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, LinearTerm)
            and self.const == other.const
            and self.coeffs == other.coeffs
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((frozenset(self.coeffs.items()), self.const))
        return self._hash

    def __str__(self) -> str:
        parts: list[str] = []
        for v in sorted(self.coeffs):
            c = self.coeffs[v]
            if c == 1:
                piece = v
            elif c == -1:
                piece = f"-{v}"
            elif c.denominator == 1:
                piece = f"{c}*{v}"
            else:
                piece = f"({c})*{v}"
            if not parts:
                parts.append(piece)
            elif piece.startswith("-"):
                parts.append(f"- {piece[1:]}")
            else:
                parts.append(f"+ {piece}")
        if self.const or not parts:
            k = self.const
            if not parts:
                parts.append(str(k) if k.denominator == 1 else f"({k})")
            elif k < 0:
                parts.append(f"- {-k}" if k.denominator == 1 else f"- ({-k})")
            else:
                parts.append(f"+ {k}" if k.denominator == 1 else f"+ ({k})")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"LinearTerm({self})"


ZERO = LinearTerm()


def term_of(x: "LinearTerm | RatLike") -> LinearTerm:
    return x if isinstance(x, LinearTerm) else LinearTerm.of(x)


# ---------------------------------------------------------------------------
# Atoms


@dataclass(frozen=True)
class Atom:
    """A canonical linear constraint: ``term <= 0`` or (is_eq) ``term = 0``."""

    term: LinearTerm
    is_eq: bool = False

    def holds(self, env: Mapping[str, RatLike]) -> bool:
        v = self.term.eval(env)
        return v == 0 if self.is_eq else v <= 0

    def vars(self) -> set[str]:
        return self.term.vars()

    def subst(self, sub: Mapping[str, LinearTerm]) -> "Atom":
        return Atom(self.term.subst(sub), self.is_eq)

    def rename(self, ren: Mapping[str, str]) -> "Atom":
        return Atom(self.term.rename(ren), self.is_eq)

    def is_trivially_true(self) -> bool:
        if not self.term.is_const():
            return False
        return self.term.const == 0 if self.is_eq else self.term.const <= 0

    def is_trivially_false(self) -> bool:
        if not self.term.is_const():
            return False
        return self.term.const != 0 if self.is_eq else self.term.const > 0

    def negated(self) -> tuple["Atom", ...]:
        """Integer negation, as a disjunction of atoms.

        not(t <= 0)  is  -t + 1 <= 0;  not(t = 0)  is  t <= -1  or  -t <= -1.
        """
        if self.is_eq:
            return (Atom(self.term + 1), Atom(-self.term + 1))
        return (Atom(-self.term + 1),)

    def __str__(self) -> str:
        lhs = LinearTerm(self.term.coeffs)
        rhs = -self.term.const
        op = "==" if self.is_eq else "<="
        r = str(rhs) if rhs.denominator == 1 else f"({rhs})"
        return f"{lhs} {op} {r}"


TRUE = Atom(ZERO)
FALSE = Atom(LinearTerm.of(1))

TermLike = Union[LinearTerm, Fraction, int]


def le(lhs: TermLike, rhs: TermLike) -> Atom:
    return Atom(term_of(lhs) - term_of(rhs))


def ge(lhs: TermLike, rhs: TermLike) -> Atom:
    return le(rhs, lhs)


def lt(lhs: TermLike, rhs: TermLike) -> Atom:
    """Strict comparison over the integers: lhs < rhs iff lhs <= rhs - 1."""
    return Atom(term_of(lhs) - term_of(rhs) + 1)


def gt(lhs: TermLike, rhs: TermLike) -> Atom:
    return lt(rhs, lhs)


def eq(lhs: TermLike, rhs: TermLike) -> Atom:
    return Atom(term_of(lhs) - term_of(rhs), is_eq=True)


# ---------------------------------------------------------------------------
# Transitions and programs


@dataclass(frozen=True)
class Assignment:
    """``var := expr``, or a nondeterministic choice when expr is None."""

    var: str
    expr: Optional[LinearTerm]

    def __str__(self) -> str:
        return f"{self.var} := {self.expr if self.expr is not None else 'nondet()'}"


@dataclass(frozen=True)
class Transition:
    id: int
    source: int
    target: int
    guards: tuple[Atom, ...] = ()
    assigns: tuple[Assignment, ...] = ()

    def assigned_vars(self) -> set[str]:
        return {a.var for a in self.assigns}

    def vars(self) -> set[str]:
        vs: set[str] = set()
        for g in self.guards:
            vs |= g.vars()
        for a in self.assigns:
            vs.add(a.var)
            if a.expr is not None:
                vs |= a.expr.vars()
        return vs

    def nondet_count(self) -> int:
        return sum(1 for a in self.assigns if a.expr is None)

    def __str__(self) -> str:
        gs = " & ".join(str(g) for g in self.guards) or "true"
        asn = "; ".join(str(a) for a in self.assigns)
        body = f"[{gs}]" + (f" {asn}" if asn else "")
        return f"t{self.id}: {self.source} -> {self.target} {body}"


class Program:
    """An integer transition system.

    Locations are ints; `loc_names` optionally maps a location back to the
    identifier it had in the source text (used for diagnostics and proofs).
    Transition ids are unique within a program.
    """

    def __init__(
        self,
        start: int,
        transitions: Iterable[Transition],
        loc_names: Optional[Mapping[int, str]] = None,
    ):
        self.start = start
        self.transitions: tuple[Transition, ...] = tuple(transitions)
        self.loc_names: dict[int, str] = dict(loc_names or {})
        self._by_id: dict[int, Transition] = {}
        self._out: dict[int, list[Transition]] = {}
        self._in: dict[int, list[Transition]] = {}
        for t in self.transitions:
            if t.id in self._by_id:
                raise ValueError(f"duplicate transition id {t.id}")
            self._by_id[t.id] = t
            self._out.setdefault(t.source, []).append(t)
            self._in.setdefault(t.target, []).append(t)

    def locations(self) -> set[int]:
        locs = {self.start}
        for t in self.transitions:
            locs.add(t.source)
            locs.add(t.target)
        return locs

    def vars(self) -> tuple[str, ...]:
        vs: set[str] = set()
        for t in self.transitions:
            vs |= t.vars()
        return tuple(sorted(vs))

    def transition(self, tid: int) -> Transition:
        return self._by_id[tid]

    def has_transition(self, tid: int) -> bool:
        return tid in self._by_id

    def outgoing(self, loc: int) -> tuple[Transition, ...]:
        return tuple(self._out.get(loc, ()))

    def incoming(self, loc: int) -> tuple[Transition, ...]:
        return tuple(self._in.get(loc, ()))

    def loc_name(self, loc: int) -> str:
        return self.loc_names.get(loc, str(loc))

    def fresh_location(self) -> int:
        return max(self.locations(), default=-1) + 1

    def fresh_tid(self) -> int:
        return max(self._by_id, default=-1) + 1

    def replace(
        self,
        start: Optional[int] = None,
        transitions: Optional[Iterable[Transition]] = None,
        loc_names: Optional[Mapping[int, str]] = None,
    ) -> "Program":
        return Program(
            self.start if start is None else start,
            self.transitions if transitions is None else transitions,
            self.loc_names if loc_names is None else loc_names,
        )

    def __str__(self) -> str:
        lines = [f"start: {self.loc_name(self.start)}"]
        lines += [str(t) for t in self.transitions]
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Concrete execution


def apply_transition(
    t: Transition, state: State, choices: Sequence[int] = ()
) -> Optional[State]:
    """Execute one transition from `state`.

    `choices` supplies one integer per nondeterministic assignment, in
    order.  Returns the post-state, or None if a guard fails.  Raises
    ValueError when the number of choices is wrong (that is a harness bug,
    not program behaviour).
    """
    for g in t.guards:
        if not g.holds(state):
            return None
    need = t.nondet_count()
    if len(choices) != need:
        raise ValueError(f"transition {t.id} needs {need} choices, got {len(choices)}")
    out = dict(state)
    ci = 0
    for a in t.assigns:
        if a.expr is None:
            out[a.var] = choices[ci]
            ci += 1
        else:
            v = a.expr.eval(out)
            if v.denominator != 1:
                raise ValueError(f"non-integer update {a} in state {out}")
            out[a.var] = int(v)
    return out


@dataclass(frozen=True)
class TraceStep:
    tid: int
    choices: tuple[int, ...] = ()


@dataclass
class Trace:
    """A concrete execution: an initial state and the transitions taken."""

    start_state: State
    steps: tuple[TraceStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)


def replay(program: Program, trace: Trace) -> Optional[list[State]]:
    """Re-execute a trace from its initial state.

    Returns the full state sequence (one longer than the step list), or
    None if the trace is invalid: a step names a missing transition, a
    source location mismatches, or a guard fails.
    """
    state = dict(trace.start_state)
    loc = program.start
    states = [state]
    for st in trace.steps:
        if not program.has_transition(st.tid):
            return None
        t = program.transition(st.tid)
        if t.source != loc:
            return None
        nxt = apply_transition(t, state, st.choices)
        if nxt is None:
            return None
        state = nxt
        loc = t.target
        states.append(state)
    return states


# ---------------------------------------------------------------------------
# Relational view of a transition


def parallel_update(
    t: Transition, fresh: Callable[[int, str], str]
) -> tuple[list[Atom], dict[str, LinearTerm], list[str]]:
    """Collapse the ordered assignment list into one simultaneous update.

    Returns ``(guards, update, nondets)`` where `update` maps each assigned
    variable to a linear term over *pre-state* variables and fresh nondet
    symbols, and `nondets` lists the fresh symbols in choice order.
    ``fresh(i, var)`` must produce a name that cannot clash with program
    variables.
    """
    sub: dict[str, LinearTerm] = {}
    nondets: list[str] = []
    for i, a in enumerate(t.assigns):
        if a.expr is None:
            w = fresh(i, a.var)
            nondets.append(w)
            sub[a.var] = LinearTerm.var(w)
        else:
            sub[a.var] = a.expr.subst(sub)
    return list(t.guards), sub, nondets
