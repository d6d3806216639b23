"""Explicit-state reference engine.

Brute-force exploration of a program under variable clamping: every
variable (and every nondeterministic choice) ranges over a finite
interval, transitions whose post-state would leave the interval are
disabled, and the resulting finite graph is analyzed exactly.  This is
the ground truth that the symbolic engines are differentially tested
against, so everything here favors obvious correctness over speed.

The clamp is an artifact: callers must pick intervals wide enough that
program guards, not the clamp, bound the dynamics of interest.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

from .ir import Program, State, apply_transition
from .props import And, AU, AX, CtlFormula, EF, EG, EU, EX, AF, AG, Leaf, Or, formula_vars

STATE_SPACE_LIMIT = 10_000_000


@dataclass(frozen=True)
class ClampSpec:
    """Exploration box: every variable and nondet result stays in
    [lo, hi]; `depth` caps the trace length."""

    lo: int
    hi: int
    depth: int = 1_000_000

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty clamp interval [{self.lo}, {self.hi}]")
        if self.depth < 0:
            raise ValueError("negative exploration depth")

    def values(self) -> range:
        return range(self.lo, self.hi + 1)


def _check_guard(p: Program, c: ClampSpec) -> None:
    width = c.hi - c.lo + 1
    n_states = width ** len(p.vars()) * max(1, len(p.locations()))
    if n_states > STATE_SPACE_LIMIT:
        raise ValueError(
            f"clamped state space has {n_states} states "
            f"(limit {STATE_SPACE_LIMIT}); narrow the clamp"
        )


class _Graph:
    """The reachable clamped state graph."""

    def __init__(self) -> None:
        self.key_index: dict[tuple[int, tuple[int, ...]], int] = {}
        self.locs: list[int] = []
        self.envs: list[State] = []
        self.succs: list[list[int]] = []
        self.starts: list[int] = []


def _explore(p: Program, c: ClampSpec) -> _Graph:
    _check_guard(p, c)
    names = p.vars()
    lo, hi = c.lo, c.hi
    g = _Graph()

    def index_of(loc: int, env: State) -> int:
        key = (loc, tuple(env[v] for v in names))
        got = g.key_index.get(key)
        if got is not None:
            return got
        i = len(g.locs)
        g.key_index[key] = i
        g.locs.append(loc)
        g.envs.append(dict(env))
        g.succs.append([])
        return i

    queue: deque[tuple[int, int]] = deque()
    for vals in itertools.product(c.values(), repeat=len(names)):
        i = index_of(p.start, dict(zip(names, vals)))
        g.starts.append(i)
        queue.append((i, 0))
    expanded: set[int] = set()
    while queue:
        i, d = queue.popleft()
        if i in expanded or d >= c.depth:
            continue
        expanded.add(i)
        env = g.envs[i]
        seen_here: set[int] = set()
        for t in p.outgoing(g.locs[i]):
            for choice in itertools.product(c.values(), repeat=t.nondet_count()):
                post = apply_transition(t, env, choice)
                if post is None:  # a guard failed
                    break  # guards ignore the choices; no point retrying
                if not all(lo <= post[v] <= hi for v in names):
                    continue  # leaves the clamp: this firing is disabled
                j = index_of(t.target, post)
                if j not in seen_here:
                    seen_here.add(j)
                    g.succs[i].append(j)
                if j not in expanded:
                    queue.append((j, d + 1))
    return g


def reachable_states(p: Program, c: ClampSpec) -> set[tuple[int, tuple[tuple[str, int], ...]]]:
    """All reachable (location, state) pairs of the clamped semantics;
    states are given as sorted (variable, value) tuples."""
    g = _explore(p, c)
    return {
        (g.locs[i], tuple(sorted(g.envs[i].items())))
        for i in range(len(g.locs))
    }


def decide_termination_finite(p: Program, c: ClampSpec) -> str:
    """'Nonterminating' iff the reachable clamped graph has a cycle,
    else 'Terminating'.  Exact on the finite model."""
    g = _explore(p, c)
    # iterative three-color depth-first search
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * len(g.locs)
    for root in range(len(g.locs)):
        if color[root] != WHITE:
            continue
        stack: list[tuple[int, int]] = [(root, 0)]
        color[root] = GRAY
        while stack:
            node, k = stack[-1]
            if k < len(g.succs[node]):
                stack[-1] = (node, k + 1)
                nxt = g.succs[node][k]
                if color[nxt] == GRAY:
                    return "Nonterminating"
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return "Terminating"


def _label(g: _Graph, f: CtlFormula,
           memo: dict[CtlFormula, frozenset[int]],
           succs: list[list[int]]) -> frozenset[int]:
    got = memo.get(f)
    if got is not None:
        return got
    n = len(g.locs)
    everyone = range(n)
    if isinstance(f, Leaf):
        sat = frozenset(i for i in everyone if f.atom.holds(g.envs[i]))
    elif isinstance(f, And):
        sat = _label(g, f.left, memo, succs) & _label(g, f.right, memo, succs)
    elif isinstance(f, Or):
        sat = _label(g, f.left, memo, succs) | _label(g, f.right, memo, succs)
    elif isinstance(f, EX):
        sub = _label(g, f.sub, memo, succs)
        sat = frozenset(i for i in everyone if any(j in sub for j in succs[i]))
    elif isinstance(f, AX):
        sub = _label(g, f.sub, memo, succs)
        sat = frozenset(i for i in everyone if all(j in sub for j in succs[i]))
    elif isinstance(f, EF):
        cur = set(_label(g, f.sub, memo, succs))
        while True:
            grow = {i for i in everyone
                    if i not in cur and any(j in cur for j in succs[i])}
            if not grow:
                break
            cur |= grow
        sat = frozenset(cur)
    elif isinstance(f, AF):
        cur = set(_label(g, f.sub, memo, succs))
        while True:
            grow = {i for i in everyone
                    if i not in cur and all(j in cur for j in succs[i])}
            if not grow:
                break
            cur |= grow
        sat = frozenset(cur)
    elif isinstance(f, EG):
        cur = set(_label(g, f.sub, memo, succs))
        while True:
            drop = {i for i in cur if not any(j in cur for j in succs[i])}
            if not drop:
                break
            cur -= drop
        sat = frozenset(cur)
    elif isinstance(f, AG):
        cur = set(_label(g, f.sub, memo, succs))
        while True:
            drop = {i for i in cur if not all(j in cur for j in succs[i])}
            if not drop:
                break
            cur -= drop
        sat = frozenset(cur)
    elif isinstance(f, EU):
        p_set = _label(g, f.left, memo, succs)
        cur = set(_label(g, f.right, memo, succs))
        while True:
            grow = {i for i in everyone
                    if i not in cur and i in p_set
                    and any(j in cur for j in succs[i])}
            if not grow:
                break
            cur |= grow
        sat = frozenset(cur)
    elif isinstance(f, AU):
        p_set = _label(g, f.left, memo, succs)
        cur = set(_label(g, f.right, memo, succs))
        while True:
            grow = {i for i in everyone
                    if i not in cur and i in p_set
                    and all(j in cur for j in succs[i])}
            if not grow:
                break
            cur |= grow
        sat = frozenset(cur)
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[f] = sat
    return sat


def _require_program_vars(p: Program, f: CtlFormula) -> None:
    loose = formula_vars(f) - set(p.vars())
    if loose:
        raise ValueError(
            "property mentions variables the program never uses: "
            + ", ".join(sorted(loose))
        )


def check_ctl_finite(p: Program, c: ClampSpec, f: CtlFormula) -> str:
    """Finite-state CTL labeling on the clamped graph: 'Holds' iff the
    formula is satisfied at every clamped initial valuation.  Halt states
    stutter (implicit self-loop) so the path semantics are total."""
    _require_program_vars(p, f)
    g = _explore(p, c)
    succs = [s if s else [i] for i, s in enumerate(g.succs)]
    memo: dict[CtlFormula, frozenset[int]] = {}
    sat = _label(g, f, memo, succs)
    return "Holds" if all(i in sat for i in g.starts) else "Fails"


def ctl_states(p: Program, c: ClampSpec, f: CtlFormula) -> set[tuple[int, tuple[tuple[str, int], ...]]]:
    """The reachable (location, state) pairs satisfying the formula -
    the raw labeling behind check_ctl_finite, for spot-checking
    precondition maps state by state."""
    _require_program_vars(p, f)
    g = _explore(p, c)
    succs = [s if s else [i] for i, s in enumerate(g.succs)]
    sat = _label(g, f, {}, succs)
    return {(g.locs[i], tuple(sorted(g.envs[i].items()))) for i in sat}
