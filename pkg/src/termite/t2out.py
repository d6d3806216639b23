"""Output side of the T2 text format, plus DOT rendering.

`print_t2` emits a program in the same concrete syntax the parser reads;
parsing the output yields a program isomorphic to the input (locations and
transition ids are renumbered, semantics preserved).  `to_dot` renders the
control-flow graph for graphviz.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

from .ir import Atom, LinearTerm, Program, Transition


def _loc_printer(program: Program):
    """Unique, parseable identifier per location (source name if any)."""
    names: dict[int, str] = {}
    used: set[str] = set()
    for loc in sorted(program.locations()):
        name = program.loc_names.get(loc, f"loc_{loc}")
        while name in used:
            name += "_"
        names[loc] = name
        used.add(name)
    return lambda loc: names.get(loc, f"loc_{loc}")


def _int_scaled(atom: Atom) -> Atom:
    """Clear denominators (positive scaling keeps the atom equivalent)."""
    denoms = [c.denominator for c in atom.term.coeffs.values()]
    denoms.append(atom.term.const.denominator)
    k = lcm(*denoms)
    if k == 1:
        return atom
    return Atom(atom.term.scale(k), atom.is_eq)


def atom_text(atom: Atom) -> str:
    """Render an atom as a T2 condition, e.g. ``x - y <= 5``."""
    a = _int_scaled(atom)
    lhs = LinearTerm(a.term.coeffs)
    rhs = -a.term.const
    op = "==" if a.is_eq else "<="
    return f"{lhs} {op} {rhs}"


def _rule_lines(t: Transition, loc) -> list[str]:
    lines = [f"FROM: {loc(t.source)};"]
    for g in t.guards:
        lines.append(f"assume({atom_text(g)});")
    for a in t.assigns:
        rhs = "nondet()" if a.expr is None else str(a.expr)
        lines.append(f"{a.var} := {rhs};")
    lines.append(f"TO: {loc(t.target)};")
    return lines


def print_t2(program: Program) -> str:
    loc = _loc_printer(program)
    chunks = [f"START: {loc(program.start)};"]
    for t in program.transitions:
        chunks.append("\n".join(_rule_lines(t, loc)))
    return "\n\n".join(chunks) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(program: Program, title: str = "program") -> str:
    loc = _loc_printer(program)
    lines = [f'digraph "{_dot_escape(title)}" {{']
    lines.append("  node [shape=box, fontname=monospace];")
    lines.append("  edge [fontname=monospace];")
    for l in sorted(program.locations()):
        extra = ", peripheries=2" if l == program.start else ""
        lines.append(f'  n{l} [label="{_dot_escape(loc(l))}"{extra}];')
    for t in program.transitions:
        parts = [f"t{t.id}:"]
        parts += [f"assume({atom_text(g)});" for g in t.guards]
        parts += [
            f"{a.var} := {'nondet()' if a.expr is None else a.expr};" for a in t.assigns
        ]
        label = "\\l".join(_dot_escape(p) for p in parts) + "\\l"
        lines.append(f'  n{t.source} -> n{t.target} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
