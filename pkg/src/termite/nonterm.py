"""Nontermination proving: recurrent sets synthesized from counterexample
lassos.

A recurrent set is a set of states at a cycle's head from which the cycle
can run forever: every state in the set satisfies the cycle's guards and
steps back into the set, and the stem reaches the set concretely.
Nondeterministic assignments on the cycle are resolved existentially by
affine *choice witnesses* (one infinite execution is enough), which makes
one cycle iteration an affine map with known coefficients.  Synthesis
closes the cycle's guard region under weakest preconditions of that map;
a fixpoint within the round budget is an inductive recurrent set.
Candidate witnesses are drawn from the lasso's own nondet choices, then
constant zero, then keep-the-current-value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .ir import (
    Atom,
    LinearTerm,
    Program,
    State,
    Trace,
    apply_transition,
    parallel_update,
    replay,
)
from .linsolve import implies_all, sat_decide

FIXPOINT_ROUNDS = 12


@dataclass(frozen=True)
class Lasso:
    """A potential counterexample to termination: a concrete path to a
    cycle head (`stem`) and a concrete cycle returning to it, replayable
    from the stem's final state."""

    stem: Trace
    cycle: Trace


@dataclass(frozen=True)
class RecurrentSet:
    """Certificate of nontermination at `location`.

    `states` is the recurrent set as an atom conjunction over program
    variables, `cycle` the witnessing cycle as transition ids in
    execution order, and `choice_witnesses` maps each nondeterministic
    assignment on the cycle, keyed (transition id, variable), to an
    affine term over the state at that step's entry."""

    location: int
    states: tuple[Atom, ...]
    cycle: tuple[int, ...]
    stem_witness: Trace
    choice_witnesses: Mapping[tuple[int, str], LinearTerm]


def cycle_relation(
    p: Program, cycle: Sequence[int], witnesses: Mapping[tuple[int, str], LinearTerm]
) -> Optional[tuple[list[Atom], dict[str, LinearTerm]]]:
    """Compose the cycle into (entry guards, state map), both over the
    state at the cycle's head, with every nondet draw replaced by its
    witness.  None when a draw has no witness."""
    state = {v: LinearTerm.var(v) for v in p.vars()}
    entry: list[Atom] = []
    for tid in cycle:
        t = p.transition(tid)
        guards, update, _ = parallel_update(t, lambda i, v: f"?{i}")
        entry.extend(g.subst(state) for g in guards)
        sub = dict(state)
        for i, a in enumerate(t.assigns):
            if a.expr is None:
                w = witnesses.get((tid, a.var))
                if w is None:
                    return None
                sub[f"?{i}"] = w.subst(state)
        new_state = dict(state)
        for v, term in update.items():
            new_state[v] = term.subst(sub)
        state = new_state
    return entry, state


def _trace_end(p: Program, trace: Trace) -> int:
    loc = p.start
    for s in trace.steps:
        loc = p.transition(s.tid).target
    return loc


def _padded(p: Program, trace: Trace) -> Trace:
    """The same trace with unmentioned variables pinned to zero, so every
    program variable has a concrete value."""
    base: State = dict.fromkeys(p.vars(), 0)
    return Trace({**base, **trace.start_state}, trace.steps)


def replay_from(p: Program, loc: int, trace: Trace) -> Optional[list[State]]:
    """Re-execute a trace that begins at `loc` rather than the program
    start; same contract as `ir.replay` otherwise."""
    state = dict(trace.start_state)
    states = [state]
    for st in trace.steps:
        if not p.has_transition(st.tid):
            return None
        t = p.transition(st.tid)
        if t.source != loc:
            return None
        nxt = apply_transition(t, state, st.choices)
        if nxt is None:
            return None
        state = nxt
        loc = t.target
        states.append(state)
    return states


def _close_region(
    p: Program,
    loc: int,
    cycle: tuple[int, ...],
    witnesses: dict[tuple[int, str], LinearTerm],
    stem: Trace,
    anchor: Mapping[str, int],
    rounds: int,
) -> Optional[RecurrentSet]:
    got = cycle_relation(p, cycle, witnesses)
    if got is None:
        return None
    entry, final = got
    region = list(dict.fromkeys(a for a in entry if not a.is_trivially_true()))
    for _ in range(rounds):
        # the anchor state must stay inside; conjoining only shrinks the
        # region, so one failure is final
        if not all(a.holds(anchor) for a in region):
            return None
        image = [a.subst(final) for a in region]
        if implies_all(region, image):
            rs = RecurrentSet(loc, tuple(region), cycle, stem, dict(witnesses))
            return rs if validate_recurrent_set(p, rs) else None
        have = set(region)
        region.extend(
            a for a in dict.fromkeys(image)
            if a not in have and not a.is_trivially_true()
        )
        if len(region) > 64:
            return None
    return None


def find_recurrent_set(
    p: Program, lasso: Lasso, rounds: int = FIXPOINT_ROUNDS
) -> Optional[RecurrentSet]:
    """Search for a recurrent set witnessing that the lasso's cycle can be
    taken forever; None when no candidate closes within the budget."""
    if not lasso.cycle.steps:
        return None
    cycle = tuple(s.tid for s in lasso.cycle.steps)
    loc = p.transition(cycle[0]).source
    cyc = _padded(p, lasso.cycle)
    if replay_from(p, loc, cyc) is None or _trace_end(p, lasso.stem) != loc:
        return None
    anchor = cyc.start_state

    from_lasso: dict[tuple[int, str], LinearTerm] = {}
    zeros: dict[tuple[int, str], LinearTerm] = {}
    keep: dict[tuple[int, str], LinearTerm] = {}
    for step in lasso.cycle.steps:
        t = p.transition(step.tid)
        draw = 0
        for a in t.assigns:
            if a.expr is not None:
                continue
            key = (t.id, a.var)
            from_lasso.setdefault(key, LinearTerm.of(step.choices[draw]))
            zeros.setdefault(key, LinearTerm.of(0))
            keep.setdefault(key, LinearTerm.var(a.var))
            draw += 1

    tried = []
    for witnesses in (from_lasso, zeros, keep):
        if witnesses in tried:
            continue
        tried.append(witnesses)
        rs = _close_region(p, loc, cycle, witnesses, lasso.stem, anchor, rounds)
        if rs is not None:
            return rs
    return None


def validate_recurrent_set(p: Program, rs: RecurrentSet) -> bool:
    """Independent certificate check: the stem concretely reaches the set
    at its location (R1), the set entails the cycle's guards under the
    witnessed choices (R2), and the set is closed under one witnessed
    cycle iteration (R3)."""
    states = replay(p, _padded(p, rs.stem_witness))
    if states is None or _trace_end(p, rs.stem_witness) != rs.location:
        return False
    if not all(a.holds(states[-1]) for a in rs.states):
        return False
    if not rs.cycle:
        return False
    cur = rs.location
    for tid in rs.cycle:
        t = p.transition(tid)
        if t.source != cur:
            return False
        cur = t.target
    if cur != rs.location:
        return False
    got = cycle_relation(p, rs.cycle, rs.choice_witnesses)
    if got is None:
        return False
    entry, final = got
    region = list(rs.states)
    if sat_decide(region) == "unsat":
        return False
    if not implies_all(region, entry):
        return False
    return implies_all(region, [a.subst(final) for a in region])
