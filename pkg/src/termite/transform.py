"""Program simplification and cutpoint selection.

`preprocess` applies semantics-preserving cleanups used by the termination
pipeline (the CTL engine works on the unsimplified program because it
reasons about individual control states):

a. drop transitions from unreachable locations;
b. forward constant propagation: substitute variables that hold the same
   constant on every path into guards and right-hand sides, fold, drop
   trivially true guards and transitions whose guard is trivially false;
c. collapse a location with exactly one incoming and one guard-free
   outgoing transition (assignment lists are sequential, so concatenation
   is exact composition);
d. remove identity self-loops (no guard, no assignment) that are their
   location's only outgoing transition: this is the compiled form of
   program exit, and the location becomes a halt state.

`cutpoints` returns a set of locations meeting every cycle, computed by
iterated SCC peeling: in each cyclic SCC pick the entry location with the
smallest id, remove it, repeat on what remains until acyclic.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional

from .ir import Assignment, Atom, LinearTerm, Program, Transition


# ---------------------------------------------------------------------------
# Strongly connected components (iterative Tarjan)


def tarjan_sccs(nodes: Iterable[int], succ: Callable[[int], Iterable[int]]) -> list[list[int]]:
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        work: list[tuple[int, Iterable[int]]] = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def location_sccs(program: Program) -> list[set[int]]:
    locs = sorted(program.locations())
    succ = lambda l: sorted({t.target for t in program.outgoing(l)})
    return [set(c) for c in tarjan_sccs(locs, succ)]


def cyclic_sccs(program: Program) -> list[set[int]]:
    """SCCs that contain at least one cycle."""
    out = []
    for comp in location_sccs(program):
        if len(comp) > 1:
            out.append(comp)
        else:
            (l,) = comp
            if any(t.target == l for t in program.outgoing(l)):
                out.append(comp)
    return out


def scc_transitions(program: Program, comp: set[int]) -> list[Transition]:
    return [t for t in program.transitions if t.source in comp and t.target in comp]


# ---------------------------------------------------------------------------
# Cutpoints


def cutpoints(program: Program) -> tuple[int, ...]:
    """A set of locations intersecting every cycle of the control graph."""
    edges = {(t.source, t.target) for t in program.transitions}
    alive = set(program.locations())
    chosen: list[int] = []
    while True:
        nodes = sorted(alive)
        succ = lambda l: sorted({b for (a, b) in edges if a == l and b in alive})
        cyclic = []
        for comp in tarjan_sccs(nodes, succ):
            cs = set(comp)
            if len(cs) > 1 or any((l, l) in edges for l in cs):
                cyclic.append(cs)
        if not cyclic:
            return tuple(sorted(chosen))
        for comp in sorted(cyclic, key=min):
            # loop heads make the best cutpoints: descent between visits
            # to an entry is simpler to certify than between visits to an
            # interior location, so peel entries first
            entries = {b for (a, b) in edges if b in comp and a not in comp}
            if program.start in comp:
                entries.add(program.start)
            pick = min(entries) if entries else min(comp)
            chosen.append(pick)
            alive.discard(pick)


# ---------------------------------------------------------------------------
# Preprocessing


def _transfer(t: Transition, env: dict[str, int]) -> Optional[dict[str, int]]:
    """Push a constant environment through one transition; None = infeasible."""
    sub = {v: LinearTerm.of(c) for v, c in env.items()}
    for g in t.guards:
        if g.subst(sub).is_trivially_false():
            return None
    cur = dict(env)
    for a in t.assigns:
        if a.expr is None:
            cur.pop(a.var, None)
            continue
        e = a.expr.subst({v: LinearTerm.of(c) for v, c in cur.items()})
        if e.is_const() and e.const.denominator == 1:
            cur[a.var] = int(e.const)
        else:
            cur.pop(a.var, None)
    return cur


def _constant_envs(p: Program) -> dict[int, dict[str, int]]:
    """For each reachable location, the variables that hold the same known
    constant on every execution reaching it.  The start environment is
    empty: initial variable values are arbitrary."""
    envs: dict[int, dict[str, int]] = {p.start: {}}
    work = [p.start]
    while work:
        loc = work.pop()
        env = envs[loc]
        for t in p.outgoing(loc):
            out = _transfer(t, env)
            if out is None:
                continue
            cur = envs.get(t.target)
            if cur is None:
                new = out
            else:
                new = {v: c for v, c in out.items() if cur.get(v) == c}
                if new == cur:
                    continue
            envs[t.target] = new
            work.append(t.target)
    return envs


def _rewrite_with_constants(p: Program) -> Program:
    envs = _constant_envs(p)
    new_ts: list[Transition] = []
    for t in p.transitions:
        env = envs.get(t.source)
        if env is None:
            continue  # unreachable
        sub = {v: LinearTerm.of(c) for v, c in env.items()}
        guards: list[Atom] = []
        dead = False
        for g in t.guards:
            a = g.subst(sub)
            if a.is_trivially_false():
                dead = True
                break
            if not a.is_trivially_true():
                guards.append(a)
        if dead:
            continue
        cur = dict(env)
        assigns: list[Assignment] = []
        for a in t.assigns:
            if a.expr is None:
                cur.pop(a.var, None)
                assigns.append(a)
                continue
            e = a.expr.subst({v: LinearTerm.of(c) for v, c in cur.items()})
            if e == LinearTerm.var(a.var):
                continue  # identity assignment
            if e.is_const() and e.const.denominator == 1:
                cur[a.var] = int(e.const)
            else:
                cur.pop(a.var, None)
            assigns.append(Assignment(a.var, e))
        new_ts.append(Transition(t.id, t.source, t.target, tuple(guards), tuple(assigns)))
    return p.replace(transitions=new_ts)


def _collapse_chains(p: Program) -> Program:
    ts = {t.id: t for t in p.transitions}
    changed = True
    while changed:
        changed = False
        by_in: dict[int, list[Transition]] = {}
        by_out: dict[int, list[Transition]] = {}
        for t in ts.values():
            by_in.setdefault(t.target, []).append(t)
            by_out.setdefault(t.source, []).append(t)
        for m in sorted(by_in):
            if m == p.start:
                continue
            ins, outs = by_in.get(m, []), by_out.get(m, [])
            if len(ins) != 1 or len(outs) != 1:
                continue
            t1, t2 = ins[0], outs[0]
            if t1.source == m or t2.target == m or t2.guards:
                continue
            merged = Transition(
                t1.id, t1.source, t2.target, t1.guards, t1.assigns + t2.assigns
            )
            del ts[t2.id]
            ts[t1.id] = merged
            changed = True
            break
    return p.replace(transitions=[ts[k] for k in sorted(ts)])


def _drop_halt_loops(p: Program) -> Program:
    drop: set[int] = set()
    for l in p.locations():
        outs = p.outgoing(l)
        if (
            len(outs) == 1
            and outs[0].target == l
            and not outs[0].guards
            and not outs[0].assigns
        ):
            drop.add(outs[0].id)
    if not drop:
        return p
    return p.replace(transitions=[t for t in p.transitions if t.id not in drop])


def preprocess(program: Program) -> Program:
    """Apply cleanups (a)-(d) to a fixpoint.  Semantics-preserving for
    reachability and for termination under the convention that an identity
    self-loop is a halt state."""
    p = program
    for _ in range(20):
        q = _drop_halt_loops(_collapse_chains(_rewrite_with_constants(p)))
        if len(q.transitions) == len(p.transitions) and all(
            a is b or a == b for a, b in zip(q.transitions, p.transitions)
        ):
            return q
        p = q
    return p
