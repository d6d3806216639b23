"""Termination proving by counterexample-guided argument refinement.

The driver instruments each cutpoint with a snapshot/check gadget and
asks the safety engine whether the check can fail.  A safety
counterexample is a lasso: a concrete stem to the cutpoint plus a cycle
back to it.  The cycle's composed relation (strengthened with the
stem's postcondition) feeds a Farkas-based linear rank-function
synthesizer, and accepted rank functions extend a per-cutpoint
lexicographic argument until the instrumented program is safe.  A lasso
no argument extension can rank is handed to the recurrent-set
synthesizer.  Simple cyclic transitions that carry their own rank
function are eliminated up front so the refinement loop never has to
reason about them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Mapping, Optional, Sequence, Union

from .ir import (
    Assignment,
    Atom,
    LinearTerm,
    Program,
    Trace,
    TraceStep,
    Transition,
    eq,
    ge,
    le,
    parallel_update,
    rat,
    replay,
)
from .linsolve import Sat, check_sat, eliminate, implies, optimize
from .nonterm import Lasso, RecurrentSet, find_recurrent_set
from .safety import DEFAULT_NODE_BUDGET, SafetyQuery, prove_safety
from .safety import Safe as _Safe
from .safety import Unsafe as _Unsafe
from .transform import cutpoints, cyclic_sccs, location_sccs, preprocess, scc_transitions

MAX_ROUNDS = 50

OLD_SUFFIX = ".old"
COPIED_FLAG = ".copied"


# ---------------------------------------------------------------------------
# Certificates and results


@dataclass(frozen=True)
class RankFunction:
    """An affine map with a lower bound; certified per use: the checked
    relation implies f(x) >= bound and f(x) - f(x') >= 1."""

    f: LinearTerm
    bound: Fraction


@dataclass(frozen=True)
class TerminationArgument:
    """Rank functions per cutpoint, in descending lexicographic priority."""

    per_cutpoint: Mapping[int, tuple[RankFunction, ...]]


@dataclass(frozen=True)
class InstrumentedProgram:
    """A program extended with a termination check at one cutpoint.

    The check lives in a copy of the cutpoint's strongly connected
    component: a snapshot transition saves every variable into its
    `.old` twin and jumps into the copy; returning to the cutpoint's
    copy enables a guard chain that reaches `error` exactly when the
    pair (snapshot state, current state) violates the installed
    argument.  In lexicographic mode the continue edge retakes the
    snapshot, so checks compare consecutive visits; in union-of-ranks
    mode it is a pure pass-through, so checks cover arbitrary visit
    pairs.  Projected onto the original variables and locations,
    executions are unchanged."""

    program: Program
    cutpoint: int
    error: int
    snapshot_tid: int
    copy_of: Mapping[int, int]  # copied transition id -> original id
    continue_tids: frozenset[int]
    refresh_tids: frozenset[int]  # where `.old` is (re)taken


@dataclass(frozen=True)
class Terminating:
    argument: TerminationArgument
    excluded: tuple[int, ...] = ()  # transition ids ranked by pre-elimination


@dataclass(frozen=True)
class Nonterminating:
    recurrent_set: RecurrentSet


@dataclass(frozen=True)
class Unknown:
    reason: str


TerminationResult = Union[Terminating, Nonterminating, Unknown]


# ---------------------------------------------------------------------------
# Path relations


def compose_relation(p: Program, tids: Sequence[int], prime: str = "'") -> list[Atom]:
    """The conjunctive relation of a path, over entry variables (plain
    names) and exit variables (primed).  Nondet draws are projected out
    rationally."""
    vs = p.vars()
    state = {v: LinearTerm.var(v) for v in vs}
    atoms: list[Atom] = []
    draws: list[str] = []
    for j, tid in enumerate(tids):
        t = p.transition(tid)
        guards, sub, nondets = parallel_update(t, lambda i, v: f"?{j}.{i}")
        draws.extend(nondets)
        atoms.extend(g.subst(state) for g in guards)
        new_state = dict(state)
        for v, term in sub.items():
            new_state[v] = term.subst(state)
        state = new_state
    for v in vs:
        atoms.append(eq(LinearTerm.var(v + prime), state[v]))
    out = eliminate(atoms, draws) if draws else atoms
    return [a for a in out if not a.is_trivially_true()]


def stem_postcondition(p: Program, tids: Sequence[int], prime: str = "'") -> list[Atom]:
    """States reachable at the end of the path from an arbitrary start,
    as a conjunction over plain variable names (a rational
    over-approximation)."""
    rel = compose_relation(p, tids, prime)
    post = eliminate(rel, p.vars())
    ren = {v + prime: v for v in p.vars()}
    return [a.rename(ren) for a in post if not a.is_trivially_true()]


# ---------------------------------------------------------------------------
# Rank function synthesis (Farkas)


def _rows(rel: Sequence[Atom]) -> list[tuple[dict[str, Fraction], Fraction, bool]]:
    # an atom is term <= 0 (or = 0): row coeffs . z <= -const
    return [(dict(a.term.coeffs), -a.term.const, a.is_eq) for a in rel]


def _entailment(tag: str, rel: Sequence[Atom], goal: Mapping[str, LinearTerm],
                rhs: LinearTerm) -> list[Atom]:
    """Farkas encoding of `rel |= goal . z <= rhs` with fresh multipliers;
    goal coefficients and rhs are terms over the synthesis unknowns."""
    rows = _rows(rel)
    out: list[Atom] = []
    names = sorted({v for coeffs, _, _ in rows for v in coeffs} | set(goal))
    for u in names:
        acc = LinearTerm() - goal.get(u, LinearTerm())
        for i, (coeffs, _, _) in enumerate(rows):
            c = coeffs.get(u)
            if c:
                acc = acc + c * LinearTerm.var(f"{tag}.{i}")
        out.append(Atom(acc, is_eq=True))
    acc = LinearTerm() - rhs
    for i, (_, c, _) in enumerate(rows):
        if c:
            acc = acc + c * LinearTerm.var(f"{tag}.{i}")
    out.append(Atom(acc))  # sum(lambda . c) <= rhs
    for i, (_, _, is_eq) in enumerate(rows):
        if not is_eq:
            out.append(ge(LinearTerm.var(f"{tag}.{i}"), 0))
    return out


def _base_vars(rel: Sequence[Atom], prime: str) -> list[str]:
    names = set()
    for a in rel:
        for v in a.vars():
            names.add(v[: -len(prime)] if v.endswith(prime) else v)
    return sorted(names)


def _synth_system(rel: Sequence[Atom], sides: Sequence[Sequence[Atom]],
                  base: Sequence[str], prime: str) -> list[Atom]:
    r = {v: LinearTerm.var(f"r.{v}") for v in base}
    bound_goal = {v: -r[v] for v in base}
    dec_goal: dict[str, LinearTerm] = {}
    for v in base:
        dec_goal[v] = -r[v]
        dec_goal[v + prime] = r[v]
    meta = _entailment("B", rel, bound_goal, LinearTerm() - LinearTerm.var("b"))
    meta += _entailment("D", rel, dec_goal, LinearTerm.of(-1))
    for j, side in enumerate(sides):
        meta += _entailment(f"S{j}", side, dec_goal, LinearTerm())
    return meta


def _synthesize(rel: Sequence[Atom], sides: Sequence[Sequence[Atom]] = (),
                prime: str = "'") -> Optional[RankFunction]:
    base = _base_vars(rel, prime)
    for side in sides:
        base = sorted(set(base) | set(_base_vars(side, prime)))
    if not base:
        return None
    meta = _synth_system(rel, sides, base, prime)
    res = check_sat(meta, integral=False)
    if not isinstance(res, Sat):
        return None
    model = res.model
    # greedy sparsification: pin coefficients to zero where still feasible
    pins: list[Atom] = []
    for v in base:
        if not model.get(f"r.{v}", Fraction(0)):
            pins.append(eq(LinearTerm.var(f"r.{v}"), 0))
            continue
        trial = check_sat(meta + pins + [eq(LinearTerm.var(f"r.{v}"), 0)],
                          integral=False)
        if isinstance(trial, Sat):
            pins.append(eq(LinearTerm.var(f"r.{v}"), 0))
            model = trial.model
    coeffs = {v: model.get(f"r.{v}", Fraction(0)) for v in base}
    f = LinearTerm({v: c for v, c in coeffs.items() if c})
    primed = {v: LinearTerm.var(v + prime) for v in base}
    # normalize: unit minimal decrease, then integer coefficients
    drop = optimize(rel, f - f.subst(primed), maximize=False)
    if drop.status == "optimal" and drop.value and drop.value > 0:
        f = f * (1 / drop.value)
    if f.coeffs:
        f = f * lcm(*(c.denominator for c in f.coeffs.values()))
    low = optimize(rel, f, maximize=False)
    if low.status == "optimal":
        bound = low.value
    else:
        bound = rat(model.get("b", Fraction(0)))
    bound = rat(bound)
    rf = RankFunction(f, bound)
    if not _certifies(rf, rel, prime):
        return None
    for side in sides:
        if not implies(side, ge(f - f.subst(primed), 0)):
            return None
    return rf


def _certifies(rf: RankFunction, rel: Sequence[Atom], prime: str = "'") -> bool:
    """Re-verification of boundedness and decrease, independent of the
    Farkas search."""
    base = _base_vars(rel, prime)
    primed = {v: LinearTerm.var(v + prime) for v in base}
    return implies(rel, ge(rf.f, rf.bound)) and implies(
        rel, ge(rf.f - rf.f.subst(primed), 1)
    )


def synthesize_rf(rel: Sequence[Atom], prime: str = "'") -> Optional[RankFunction]:
    """A single affine rank function for a conjunctive relation over
    plain and primed variables, or None."""
    return _synthesize(rel, (), prime)


# ---------------------------------------------------------------------------
# Lexicographic arguments


def _delta(rf: RankFunction, prime: str = "'") -> LinearTerm:
    primed = {v: LinearTerm.var(v + prime) for v in rf.f.vars()}
    return rf.f - rf.f.subst(primed)


def lex_cover_index(arg: Sequence[RankFunction], rel: Sequence[Atom],
                    prime: str = "'") -> Optional[int]:
    """The first component certifying the relation (strict bounded
    decrease, everything of higher priority non-increasing), or None."""
    for i, rf in enumerate(arg):
        if implies(rel, ge(rf.f, rf.bound)) and implies(rel, ge(_delta(rf, prime), 1)):
            return i
        if not implies(rel, ge(_delta(rf, prime), 0)):
            return None  # this component may increase: nothing below can cover
    return None


def extend_lex(arg: Sequence[RankFunction], rel: Sequence[Atom],
               history: Sequence[Sequence[Atom]] = (),
               prime: str = "'") -> Optional[list[RankFunction]]:
    """Insert a freshly synthesized component at the first position that
    ranks `rel` while every relation in `history` stays covered."""
    arg = list(arg)
    old_index = [lex_cover_index(arg, h, prime) for h in history]
    for pos in range(len(arg) + 1):
        if pos and not implies(rel, ge(_delta(arg[pos - 1], prime), 0)):
            break  # a higher-priority component increases on rel
        sides = [h for h, i in zip(history, old_index) if i is None or i >= pos]
        rf = _synthesize(rel, sides, prime)
        if rf is None:
            continue
        cand = arg[:pos] + [rf] + arg[pos:]
        if lex_cover_index(cand, rel, prime) is None:
            continue
        if all(lex_cover_index(cand, h, prime) is not None for h in history):
            return cand
    return None


# ---------------------------------------------------------------------------
# Instrumentation


def _int_scaled(rf: RankFunction) -> tuple[LinearTerm, Fraction]:
    """The rank function with integer coefficients (so strict decrease
    and strict bound violation are expressible as integer guards)."""
    dens = [c.denominator for c in rf.f.coeffs.values()]
    dens.append(rf.f.const.denominator)
    dens.append(rat(rf.bound).denominator)
    k = lcm(*dens)
    return rf.f * k, rat(rf.bound) * k


def instrument(p: Program, c: int, arg: Sequence[RankFunction] = (),
               exclude: frozenset[int] = frozenset(),
               disjunctive: bool = False) -> InstrumentedProgram:
    """Attach the termination check for cutpoint `c` and argument `arg`.

    The check covers every cycle through `c` that avoids `exclude`; with
    an empty argument it fires on any return to the cutpoint."""
    vs = p.vars()
    kept = [t for t in p.transitions if t.id not in exclude]
    comp = {c}
    for scc in location_sccs(Program(p.start, kept, p.loc_names)):
        if c in scc:
            comp = scc
            break
    scc_ts = [t for t in kept if t.source in comp and t.target in comp]

    next_loc = max(p.locations()) + 1
    next_tid = max((t.id for t in p.transitions), default=0) + 1
    names = dict(p.loc_names)

    def fresh_loc(label: str) -> int:
        nonlocal next_loc
        loc = next_loc
        next_loc += 1
        names[loc] = label
        return loc

    def of(loc: int) -> str:
        return p.loc_names.get(loc, str(loc))

    err = fresh_loc(f"err_{of(c)}")
    c_in = fresh_loc(f"{of(c)}#in")
    c_out = fresh_loc(f"{of(c)}#out")
    shadow = {l: fresh_loc(f"{of(l)}#copy") for l in sorted(comp) if l != c}

    ts = list(p.transitions)

    def add(source: int, target: int, guards=(), assigns=()) -> int:
        nonlocal next_tid
        tid = next_tid
        next_tid += 1
        ts.append(Transition(tid, source, target, tuple(guards), tuple(assigns)))
        return tid

    old_assigns = [Assignment(v + OLD_SUFFIX, LinearTerm.var(v)) for v in vs]
    snap_assigns = [Assignment(COPIED_FLAG, LinearTerm.of(1))] + old_assigns
    flag = LinearTerm.var(COPIED_FLAG)
    snapshot_tid = add(c, c_out, [le(flag, 0)], snap_assigns)

    copy_of: dict[int, int] = {}
    for t in sorted(scc_ts, key=lambda t: t.id):
        src = c_out if t.source == c else shadow[t.source]
        dst = c_in if t.target == c else shadow[t.target]
        copy_of[add(src, dst, t.guards, t.assigns)] = t.id

    # a lexicographic argument constrains consecutive visits, so the
    # snapshot is refreshed on every pass; the union-of-ranks check must
    # hold for arbitrary visit pairs and keeps the saved state instead
    continue_tid = add(c_in, c_out, [ge(flag, 1)],
                       () if disjunctive else old_assigns)

    old = {v: LinearTerm.var(v + OLD_SUFFIX) for v in vs}
    at = c_in
    for j, rf in enumerate(arg):
        f, b = _int_scaled(rf)
        f_old = f.subst(old)
        delta = f_old - f
        if disjunctive:
            # not covered by this component: no strict decrease, or unbounded
            nxt = err if j + 1 == len(arg) else fresh_loc(f"chk{j}_{of(c)}")
            add(at, nxt, [le(delta, 0)])
            add(at, nxt, [le(f_old, b - 1)])
        else:
            # lexicographic scan: an increase is an immediate violation;
            # equal or unbounded-decreasing components pass the scan on
            nxt = fresh_loc(f"chk{j}_{of(c)}")
            add(at, err, [le(delta, -1)])
            add(at, nxt, [ge(delta, 0), le(delta, 0)])
            add(at, nxt, [ge(delta, 0), le(f_old, b - 1)])
        at = nxt
    if not arg or not disjunctive:
        add(at, err, [])

    prog = Program(p.start, ts, names)
    refresh = {snapshot_tid} if disjunctive else {snapshot_tid, continue_tid}
    return InstrumentedProgram(prog, c, err, snapshot_tid, copy_of,
                               frozenset({continue_tid}), frozenset(refresh))


def extract_lasso(ins: InstrumentedProgram, p: Program,
                  trace: Trace) -> Optional[Lasso]:
    """Split an instrumented counterexample into a stem and a cycle over
    the original program.  The cycle is what ran since the last snapshot;
    copied steps before a snapshot refresh extend the stem."""
    steps = list(trace.steps)
    snap = next((i for i, s in enumerate(steps) if s.tid == ins.snapshot_tid), None)
    if snap is None:
        return None
    split = max(i for i, s in enumerate(steps) if s.tid in ins.refresh_tids)
    stem_steps = list(steps[:snap])
    for s in steps[snap + 1:split]:
        if s.tid in ins.copy_of:
            stem_steps.append(TraceStep(ins.copy_of[s.tid], s.choices))
    cyc: list[TraceStep] = []
    for s in steps[split + 1:]:
        if s.tid in ins.copy_of:
            cyc.append(TraceStep(ins.copy_of[s.tid], s.choices))
        elif s.tid not in ins.continue_tids:
            break  # entering the check chain
    if not cyc:
        return None
    start = dict.fromkeys(p.vars(), 0)
    start.update((v, x) for v, x in trace.start_state.items() if v in start)
    stem = Trace(start, tuple(stem_steps))
    states = replay(p, stem)
    if states is None:
        return None
    return Lasso(stem, Trace(states[-1], tuple(cyc)))


# ---------------------------------------------------------------------------
# Loop pre-elimination


def _preeliminate(p: Program) -> tuple[dict[int, list[RankFunction]], set[int]]:
    """Rank simple cyclic transitions directly: a transition may be
    excluded from argument search when its own one-step relation admits
    a rank function that is non-increasing across the rest of its
    component.  Removal repeats to a fixpoint."""
    found: dict[int, list[RankFunction]] = {}
    excluded: set[int] = set()
    for _ in range(len(p.transitions)):
        remaining = Program(p.start,
                            [t for t in p.transitions if t.id not in excluded],
                            p.loc_names)
        progress = False
        for comp in cyclic_sccs(remaining):
            ts = sorted(scc_transitions(remaining, comp), key=lambda t: t.id)
            rels = {t.id: compose_relation(p, [t.id]) for t in ts}
            for t in ts:
                sides = [rels[u.id] for u in ts if u.id != t.id]
                rf = _synthesize(rels[t.id], sides)
                if rf is not None:
                    found.setdefault(t.source, []).append(rf)
                    excluded.add(t.id)
                    progress = True
                    break
            if progress:
                break
        if not progress:
            break
    return found, excluded


def loop_preelimination(p: Program) -> tuple[Program, dict[int, list[RankFunction]]]:
    """Directly rank what needs no supporting invariants.  The program is
    returned unchanged (the ranked transitions stay in place for safety
    semantics); the map records the rank functions per source location."""
    found, _ = _preeliminate(p)
    return p, found


# ---------------------------------------------------------------------------
# The refinement driver


def _general_bound(rf: RankFunction, cycle_rel: Sequence[Atom]) -> RankFunction:
    """Relax the bound to the infimum of f over the cycle relation alone.
    A lasso's stem can pin variables to one concrete run's values, which
    would tie the bound to that run; any state able to execute the cycle
    satisfies the cycle's own constraints, so this bound covers them all.
    Lowering a bound weakens the boundedness certificate and never
    breaks a previously covered relation."""
    low = optimize(cycle_rel, rf.f, maximize=False)
    if low.status == "optimal" and rat(low.value) < rf.bound:
        return RankFunction(rf.f, rat(low.value))
    return rf


def validate_termination_argument(p: Program, c: int,
                                  arg: Sequence[RankFunction],
                                  exclude: frozenset[int] = frozenset(),
                                  disjunctive: bool = False,
                                  node_budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """Certificate check: re-instrument and require the safety engine to
    prove the check unreachable."""
    ins = instrument(p, c, arg, exclude, disjunctive)
    res = prove_safety(SafetyQuery(ins.program, ins.error, ()), node_budget)
    return isinstance(res, _Safe)


def _prove(p: Program, *, disjunctive: bool, try_nonterm: bool,
           max_rounds: int, node_budget: int) -> TerminationResult:
    p0 = preprocess(p)
    pre, excluded = _preeliminate(p0)
    reduced = Program(p0.start,
                      [t for t in p0.transitions if t.id not in excluded],
                      p0.loc_names)
    per_cutpoint: dict[int, tuple[RankFunction, ...]] = {
        loc: tuple(rfs) for loc, rfs in pre.items()
    }
    for c in cutpoints(reduced):
        arg: list[RankFunction] = list(per_cutpoint.get(c, ()))
        history: list[list[Atom]] = []
        proved = False
        for _ in range(max_rounds):
            ins = instrument(p0, c, arg, frozenset(excluded), disjunctive)
            res = prove_safety(SafetyQuery(ins.program, ins.error, ()), node_budget)
            if isinstance(res, _Safe):
                per_cutpoint[c] = tuple(arg)
                proved = True
                break
            if not isinstance(res, _Unsafe):
                return Unknown(f"safety engine gave up at cutpoint {c}: {res.reason}")
            lasso = extract_lasso(ins, p0, res.trace)
            if lasso is None:
                return Unknown(f"unusable counterexample at cutpoint {c}")
            cyc = compose_relation(p0, [s.tid for s in lasso.cycle.steps])
            rel = stem_postcondition(p0, [s.tid for s in lasso.stem.steps]) + cyc
            rel = list(dict.fromkeys(rel))
            if disjunctive:
                rf = synthesize_rf(rel)
                new = arg + [_general_bound(rf, cyc)] if rf is not None else None
            else:
                new = extend_lex(arg, rel, history)
                if new is not None:
                    new = [rf if rf in arg else _general_bound(rf, cyc)
                           for rf in new]
            if new is None:
                if try_nonterm:
                    rs = find_recurrent_set(p0, lasso)
                    if rs is not None:
                        return Nonterminating(rs)
                return Unknown(f"no rank function covers a cycle at cutpoint {c}")
            arg = new
            history.append(rel)
        if not proved:
            return Unknown(f"budget: {max_rounds} refinement rounds at cutpoint {c}")
    return Terminating(TerminationArgument(per_cutpoint), tuple(sorted(excluded)))


def prove_termination(p: Program, *, lexicographic: bool = True,
                      try_nonterm: bool = True, max_rounds: int = MAX_ROUNDS,
                      node_budget: int = DEFAULT_NODE_BUDGET) -> TerminationResult:
    """Decide termination of every execution of `p`."""
    return _prove(p, disjunctive=not lexicographic, try_nonterm=try_nonterm,
                  max_rounds=max_rounds, node_budget=node_budget)


def prove_termination_disjunctive(p: Program, *, try_nonterm: bool = True,
                                  max_rounds: int = MAX_ROUNDS,
                                  node_budget: int = DEFAULT_NODE_BUDGET
                                  ) -> TerminationResult:
    """Union-of-rank-functions mode: the check fires when a cycle is
    covered by no installed rank function, rather than enforcing a
    lexicographic order."""
    return _prove(p, disjunctive=True, try_nonterm=try_nonterm,
                  max_rounds=max_rounds, node_budget=node_budget)


# ---------------------------------------------------------------------------
# Proof rendering


def render_proof(arg: TerminationArgument,
                 loc_names: Optional[Mapping[int, str]] = None) -> str:
    names = loc_names or {}
    lines = ["Used the following cutpoint-specific lexicographic rank functions:"]
    for c in sorted(arg.per_cutpoint):
        name = names.get(c, str(c))
        lines.append(f" * For cutpoint {name}, used the following rank "
                     "functions/bounds (in descending priority order):")
        for rf in arg.per_cutpoint[c]:
            b = rat(rf.bound)
            lines.append(f"    - RF {rf.f}, bound {b}")
    return "\n".join(lines)
