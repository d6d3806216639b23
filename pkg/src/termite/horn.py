"""Export of reachability queries as linear constrained Horn clauses.

One uninterpreted predicate is introduced per program location, applied
to the program variables in canonical order.  Each transition becomes a
clause whose constraint is the transition's step relation, with primed
names for the assigned variables; a fact clause seeds the start location
and a goal clause turns the error condition into a derivation of
``false``.  A CHC solver answering ``unsat`` on the export has therefore
found the error reachable, ``sat`` means safe.
"""

from __future__ import annotations

import math
import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .ir import Atom, LinearTerm
from .safety import SafetyQuery, transition_relation


@dataclass(frozen=True)
class PredApp:
    pred: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class HornClause:
    """``head ← body ∧ constraint``; a missing head is ``false``, and at
    most one body predicate keeps the clause linear."""

    head: Optional[PredApp]
    body: Optional[PredApp]
    constraint: tuple[Atom, ...]


@dataclass(frozen=True)
class HornClauseSet:
    vars: tuple[str, ...]  # argument order shared by every predicate
    predicates: tuple[str, ...]
    clauses: tuple[HornClause, ...]


def _pred_name(loc: int, names) -> str:
    return "p_" + names.get(loc, str(loc))


def to_horn(q: SafetyQuery) -> HornClauseSet:
    """The query as Horn clauses: one fact for the start location, one
    clause per transition, one goal for the error condition."""
    p = q.program
    vs = p.vars()
    pred = {loc: _pred_name(loc, p.loc_names) for loc in p.locations()}
    clauses = [HornClause(PredApp(pred[p.start], vs), None, ())]
    for t in p.transitions:
        rel, post, _ = transition_relation(t)
        head = PredApp(pred[t.target], tuple(post.get(v, v) for v in vs))
        clauses.append(HornClause(head, PredApp(pred[t.source], vs), tuple(rel)))
    clauses.append(
        HornClause(None, PredApp(pred[q.error_location], vs),
                   tuple(q.error_condition))
    )
    return HornClauseSet(
        vs,
        tuple(pred[loc] for loc in sorted(pred)),
        tuple(clauses),
    )


# ---------------------------------------------------------------------------
# SMT-LIB rendering

_SIMPLE = re.compile(r"[A-Za-z~!@$%^&*_\-+=<>.?/][A-Za-z0-9~!@$%^&*_\-+=<>.?/]*")


def _sym(name: str) -> str:
    if _SIMPLE.fullmatch(name):
        return name
    return "|" + name + "|"  # names here never contain | or backslash


def _num(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def _smt_term(t: LinearTerm) -> tuple[str, int]:
    """Render `scale * t` with integer coefficients; returns the text and
    the (positive) scale used."""
    scale = math.lcm(
        t.const.denominator, *(c.denominator for c in t.coeffs.values())
    )
    parts = []
    for v in sorted(t.coeffs):
        c = int(t.coeffs[v] * scale)
        if c == 0:
            continue
        parts.append(_sym(v) if c == 1 else f"(* {_num(c)} {_sym(v)})")
    k = int(t.const * scale)
    if k != 0 or not parts:
        parts.append(_num(k))
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")", scale


def _smt_atom(a: Atom) -> str:
    text, _ = _smt_term(a.term)
    return f"(= {text} 0)" if a.is_eq else f"(<= {text} 0)"


def _smt_app(app: PredApp) -> str:
    if not app.args:
        return _sym(app.pred)
    return "(" + " ".join([_sym(app.pred)] + [_sym(v) for v in app.args]) + ")"


def _clause_vars(c: HornClause) -> list[str]:
    names = set()
    if c.head is not None:
        names.update(c.head.args)
    if c.body is not None:
        names.update(c.body.args)
    for a in c.constraint:
        names.update(a.term.vars())
    return sorted(names)


def emit_smtlib_horn(h: HornClauseSet) -> str:
    """SMT-LIB2 text for the clause set: `unsat` from a CHC solver means
    the error is reachable, `sat` that it is not."""
    out = ["(set-logic HORN)"]
    arity = " ".join(["Int"] * len(h.vars))
    for pred in h.predicates:
        out.append(f"(declare-fun {_sym(pred)} ({arity}) Bool)")
    for c in h.clauses:
        body = []
        if c.body is not None:
            body.append(_smt_app(c.body))
        body.extend(_smt_atom(a) for a in c.constraint)
        if not body:
            lhs = "true"
        elif len(body) == 1:
            lhs = body[0]
        else:
            lhs = "(and " + " ".join(body) + ")"
        rhs = "false" if c.head is None else _smt_app(c.head)
        impl = f"(=> {lhs} {rhs})"
        qvars = _clause_vars(c)
        if qvars:
            binders = " ".join(f"({_sym(v)} Int)" for v in qvars)
            out.append(f"(assert (forall ({binders}) {impl}))")
        else:
            out.append(f"(assert {impl})")
    out.append("(check-sat)")
    return "\n".join(out) + "\n"


def run_chc_solver(h: HornClauseSet, command: str, timeout: float = 60.0) -> str:
    """Hand the export to an external CHC solver (`command <file>`) and
    read back its one-word verdict; anything unrecognisable is
    'unknown'."""
    with tempfile.NamedTemporaryFile(
        "w", suffix=".smt2", delete=False
    ) as f:
        f.write(emit_smtlib_horn(h))
        path = f.name
    try:
        proc = subprocess.run(
            shlex.split(command) + [path],
            capture_output=True,
            text=True,
            timeout=timeout,
        )
        for line in proc.stdout.splitlines():
            word = line.strip()
            if word in ("sat", "unsat", "unknown"):
                return word
        return "unknown"
    except (subprocess.TimeoutExpired, OSError):
        return "unknown"
    finally:
        os.unlink(path)
