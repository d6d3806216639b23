"""Reachability proving by lazy abstraction with interpolants.

The prover unwinds the transition graph into an abstract reachability
tree.  Nodes carry conjunctive annotations (initially ``true``) that
overapproximate the states reachable along their tree path.  When a node
at the error location is reached, the exact path formula is checked: a
satisfiable formula yields a concrete counterexample trace, an
unsatisfiable one yields a sequence of interpolants that strengthen the
annotations along the path.  Covering (a node whose annotation implies
that of an older uncovered node at the same location stops being
expanded) makes the unwinding terminate on programs with reachable
fixpoints.

Verdicts are re-validated before being returned: Safe invariants are
re-checked for inductiveness, Unsafe traces are replayed concretely.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm
from typing import Optional, Union

from .formula import (
    TRUE,
    Conj,
    Dnf,
    conj_implies_conj,
    conj_implies_dnf,
    dedupe,
    simplify_dnf,
)
from .ir import (
    Atom,
    LinearTerm,
    Program,
    Trace,
    TraceStep,
    Transition,
    eq,
    parallel_update,
    replay,
)
from .linsolve import (
    ResourceLimit,
    Sat,
    Unsat,
    check_sat,
    interpolant_sequence,
    sat_decide,
)

DEFAULT_NODE_BUDGET = 20_000

# above this many disjuncts, invariants are only deduplicated, not
# entailment-simplified (the validator handles the general shape anyway)
SIMPLIFY_DISJUNCT_CAP = 24


@dataclass(frozen=True)
class SafetyQuery:
    """Is `error_condition` (a conjunction) reachable at `error_location`?"""

    program: Program
    error_location: int
    error_condition: tuple[Atom, ...]

    def __post_init__(self):
        if self.error_location not in self.program.locations():
            raise ValueError(
                f"error location {self.error_location} is not in the program"
            )


@dataclass
class ArtNode:
    id: int
    location: int
    annotation: Conj
    parent: Optional[tuple[int, int]]  # (parent node id, transition id)
    covered_by: Optional[int] = None
    children: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class SafetyStats:
    expansions: int
    refinements: int
    covers_added: int
    covers_revoked: int


@dataclass(frozen=True)
class Safe:
    invariant: dict[int, Dnf]  # location -> disjunction of annotations
    stats: Optional[SafetyStats] = None


@dataclass(frozen=True)
class Unsafe:
    trace: Trace
    stats: Optional[SafetyStats] = None


@dataclass(frozen=True)
class Unknown:
    reason: str
    stats: Optional[SafetyStats] = None


SafetyResult = Union[Safe, Unsafe, Unknown]


# ---------------------------------------------------------------------------
# Transition relations and path formulas


def transition_relation(
    t: Transition, tag: str = "'"
) -> tuple[list[Atom], dict[str, str], list[str]]:
    """The step relation of `t` as atoms over pre-state variables, primed
    copies (suffixed with `tag`) of the assigned variables, and fresh
    nondet symbols.  Returns (atoms, assigned var -> primed name, nondet
    names in choice order)."""
    guards, update, nondets = parallel_update(t, lambda i, v: f"?{tag}{i}")
    atoms = list(guards)
    post: dict[str, str] = {}
    for v in update:
        post[v] = v + tag
        atoms.append(eq(LinearTerm.var(post[v]), update[v]))
    return atoms, post, nondets


def _encode_path(
    p: Program, tids: list[int]
) -> tuple[list[list[Atom]], list[dict[str, str]], list[list[str]]]:
    """SSA-style unrolling of a transition path.  Returns per-step atom
    groups, the variable-instance map at every cut (before step 1, after
    step 1, ...), and the per-step nondet instance names."""
    cur = {x: f"{x}@0" for x in p.vars()}
    cuts = [dict(cur)]
    groups: list[list[Atom]] = []
    step_nondets: list[list[str]] = []
    for step, tid in enumerate(tids, start=1):
        t = p.transition(tid)
        guards, update, nondets = parallel_update(
            t, lambda i, v, step=step: f"?{step}.{i}"
        )
        sub = {x: LinearTerm.var(n) for x, n in cur.items()}
        atoms = [g.subst(sub) for g in guards]
        for x in update:
            atoms.append(eq(LinearTerm.var(f"{x}@{step}"), update[x].subst(sub)))
        for x in update:
            cur[x] = f"{x}@{step}"
        groups.append(atoms)
        cuts.append(dict(cur))
        step_nondets.append(nondets)
    return groups, cuts, step_nondets


# ---------------------------------------------------------------------------
# The unwinding


def _normalized(a: Atom) -> Atom:
    """Scale to coprime integer variable coefficients (sign-canonical for
    equalities) so that scalar multiples of one fact collide."""
    coeffs = a.term.coeffs
    if not coeffs:
        return a
    den = lcm(*(c.denominator for c in coeffs.values()))
    num = gcd(*(abs(c.numerator) * (den // c.denominator) for c in coeffs.values()))
    scale = Fraction(den, num)
    if a.is_eq and coeffs[min(coeffs)] < 0:
        scale = -scale
    return Atom(a.term * scale, a.is_eq) if scale != 1 else a


def _sample_points(names: tuple[str, ...]) -> list[dict[str, int]]:
    """A small deterministic grid of integer points, used to refute most
    failing annotation implications without a solver call."""
    pts = [{v: 0 for v in names}]
    for v in names:
        for k in (-5, -1, 1, 5):
            pt = {u: 0 for u in names}
            pt[v] = k
            pts.append(pt)
    rng = random.Random(0)
    for _ in range(24):
        pts.append({v: rng.randint(-7, 7) for v in names})
    return pts


class Unwinding:
    """One run of the prover for one query; exposed for tests that need to
    inspect the final tree."""

    def __init__(self, query: SafetyQuery, node_budget: int = DEFAULT_NODE_BUDGET):
        self.query = query
        self.program = query.program
        self.budget = node_budget
        self.nodes: list[ArtNode] = [ArtNode(0, self.program.start, (), None)]
        self.work: deque[int] = deque([0])
        self.expanded: set[int] = set()
        self.covers_into: dict[int, set[int]] = {}  # coverer -> covered ids
        self.at_location: dict[int, list[int]] = {self.program.start: [0]}
        self.samples = _sample_points(self.program.vars())
        self.full_mask = (1 << len(self.samples)) - 1
        self.atom_masks: dict[Atom, int] = {}
        self.node_mask: dict[int, int] = {0: self.full_mask}
        self.impl_cache: dict[tuple[Conj, Conj], bool] = {}
        self.force_failed: set[tuple[int, int]] = set()
        self.path_cache: dict[int, tuple] = {}
        self.expansions = 0
        self.refinements = 0
        self.covers_added = 0
        self.covers_revoked = 0

    def _atom_mask(self, a: Atom) -> int:
        """Bitmask of the sample points satisfying the atom."""
        m = self.atom_masks.get(a)
        if m is None:
            m = 0
            for i, pt in enumerate(self.samples):
                if a.holds(pt):
                    m |= 1 << i
            self.atom_masks[a] = m
        return m

    def _implied(self, v: ArtNode, w: ArtNode) -> bool:
        """Does v's annotation entail w's?  Cheap filters first: syntactic
        containment proves it, a sample point inside v but outside w
        refutes it; only then the solver."""
        sv, sw = v.annotation, w.annotation
        if not sw:
            return True
        if set(sw) <= set(sv):
            return True
        if self.node_mask[v.id] & ~self.node_mask[w.id]:
            return False
        key = (sv, sw)
        got = self.impl_cache.get(key)
        if got is None:
            got = conj_implies_conj(sv, sw)
            self.impl_cache[key] = got
        return got

    def stats(self) -> SafetyStats:
        return SafetyStats(
            self.expansions, self.refinements, self.covers_added, self.covers_revoked
        )

    # -- covering bookkeeping

    def _blocked(self, nid: int) -> bool:
        node: Optional[ArtNode] = self.nodes[nid]
        while node is not None:
            if node.covered_by is not None:
                return True
            node = self.nodes[node.parent[0]] if node.parent else None
        return False

    def _subtree(self, nid: int) -> list[int]:
        out = [nid]
        i = 0
        while i < len(out):
            out.extend(self.nodes[out[i]].children)
            i += 1
        return out

    def _enqueue_frontier(self, nid: int) -> None:
        for uid in self._subtree(nid):
            if uid not in self.expanded and not self._blocked(uid):
                self.work.append(uid)

    def _uncover(self, xid: int) -> None:
        x = self.nodes[xid]
        self.covers_into[x.covered_by].discard(xid)
        x.covered_by = None
        self.covers_revoked += 1
        self._enqueue_frontier(xid)

    def _add_cover(self, v: ArtNode, w: ArtNode) -> None:
        v.covered_by = w.id
        self.covers_into.setdefault(w.id, set()).add(v.id)
        self.covers_added += 1
        # coverings must point at unblocked nodes: any cover into the
        # subtree that v now shadows is revoked
        for yid in self._subtree(v.id):
            for xid in sorted(self.covers_into.get(yid, set())):
                if xid != v.id:
                    self._uncover(xid)

    def _close(self, v: ArtNode) -> bool:
        """Try to cover `v` by an older uncovered node at its location."""
        if v.covered_by is not None:
            return True
        for wid in self.at_location.get(v.location, ()):
            if wid >= v.id:
                break
            w = self.nodes[wid]
            if not self._blocked(wid) and self._implied(v, w):
                self._add_cover(v, w)
                return True
        return False

    def _strengthen_path(self, path_nodes: list[ArtNode],
                         cuts: list[dict[str, str]],
                         itps: list[list[Atom]]) -> Optional[list[ArtNode]]:
        """Conjoin one inductive interpolant sequence onto the nodes of a
        tree path; None when an interpolant leaves its frame."""
        strengthened: list[ArtNode] = []
        for node, cut, itp in zip(path_nodes, cuts, itps):
            if not itp:
                continue
            rev = {inst: x for x, inst in cut.items()}
            if any(not a.vars() <= rev.keys() for a in itp):
                return None
            renamed = [a.rename(rev) for a in itp]
            if self._strengthen(node, renamed):
                strengthened.append(node)
        return strengthened

    def _force_cover(self, v: ArtNode) -> bool:
        """Covering with strengthening: when interpolants at one location
        drift apart, an older node's annotation may still be invariant
        along v's own path.  Each of its atoms is checked by refuting the
        negation on the path formula; the interpolants from those proofs
        strengthen the whole path, so the tree stays well-formed and v
        ends up covered.  Failures are final (annotations only grow)."""
        cands = [
            wid for wid in self.at_location.get(v.location, ())
            if wid < v.id and not self._blocked(wid)
            and self.nodes[wid].annotation and (v.id, wid) not in self.force_failed
        ]
        if not cands:
            return False
        path_nodes, tids = self._path_to(v)
        cached = self.path_cache.get(v.id)
        if cached is None:
            groups, cuts, _ = _encode_path(self.program, tids)
            atoms = [a for g in groups for a in g]
            # one feasibility solve refutes most candidates cheaply: a
            # path model is a reachable final state, so any atom it
            # violates cannot be invariant along the path.  The path of a
            # node never changes, so this is computed once per node.
            probe = check_sat(atoms, integral=True)
            model = probe.model if isinstance(probe, Sat) else None
            cached = (groups, cuts, atoms, model)
            self.path_cache[v.id] = cached
        groups, cuts, atoms, model = cached
        sub = {x: LinearTerm.var(n) for x, n in cuts[-1].items()}

        def refuted(a: Atom) -> bool:
            if model is None:
                return False
            t = a.subst(sub).term
            val = t.const + sum(
                c * model.get(x, Fraction(0)) for x, c in t.coeffs.items()
            )
            return val != 0 if a.is_eq else val > 0

        step_atoms = step_sub = None
        if v.parent is not None:
            pnode = self.nodes[v.parent[0]]
            sgroups, scuts, _ = _encode_path(self.program, [v.parent[1]])
            pre = {x: LinearTerm.var(n) for x, n in scuts[0].items()}
            step_atoms = [a.subst(pre) for a in pnode.annotation]
            step_atoms += [a for g in sgroups for a in g]
            step_sub = {x: LinearTerm.var(n) for x, n in scuts[-1].items()}

        def negations(a: Atom, frame: dict[str, LinearTerm]) -> list[Atom]:
            t = a.subst(frame).term
            out = [Atom(LinearTerm.of(1) - t)]
            if a.is_eq:
                out.append(Atom(t + LinearTerm.of(1)))
            return out

        def entailed_one_step(a: Atom) -> bool:
            """parent.annotation ∧ step ⊨ a: justifies adopting `a` at v
            without touching any other node."""
            if step_atoms is None:
                return False
            return all(
                isinstance(check_sat(step_atoms + [neg], integral=True), Unsat)
                for neg in negations(a, step_sub)
            )

        def entailed_by_path(a: Atom) -> bool:
            """Path-interpolant route: prove `a` invariant along v's path
            and strengthen the whole path so the tree stays consistent."""
            for neg in negations(a, sub):
                res = check_sat(atoms + [neg], integral=True)
                if not isinstance(res, Unsat):
                    return False
                itps = interpolant_sequence(groups + [[neg]], res.certificate)
                if itps is None or self._strengthen_path(
                        path_nodes, cuts, itps) is None:
                    return False
            return True

        for wid in cands:
            w = self.nodes[wid]
            if any(refuted(a) for a in w.annotation):
                self.force_failed.add((v.id, wid))
                continue
            ok = True
            for a in w.annotation:
                if a in set(v.annotation):
                    continue
                if entailed_one_step(a):
                    self._strengthen(v, [a])
                elif not entailed_by_path(a):
                    ok = False
                    break
            if ok and self._implied(v, w):
                self._add_cover(v, w)
                return True
            self.force_failed.add((v.id, wid))
        return False

    # -- refinement

    def _path_to(self, v: ArtNode) -> tuple[list[ArtNode], list[int]]:
        rev_nodes, rev_tids = [v], []
        node = v
        while node.parent is not None:
            pid, tid = node.parent
            node = self.nodes[pid]
            rev_nodes.append(node)
            rev_tids.append(tid)
        return rev_nodes[::-1], rev_tids[::-1]

    def _strengthen(self, node: ArtNode, atoms: list[Atom]) -> bool:
        have = set(node.annotation)
        new = []
        for a in map(_normalized, atoms):
            if a not in have and a not in new and not a.is_trivially_true():
                new.append(a)
        if not new:
            return False
        node.annotation = node.annotation + tuple(new)
        mask = self.node_mask[node.id]
        for a in new:
            mask &= self._atom_mask(a)
        self.node_mask[node.id] = mask
        # the annotation shrank: covers justified by the old one may break
        for xid in sorted(self.covers_into.get(node.id, set())):
            x = self.nodes[xid]
            if not self._implied(x, node):
                self._uncover(xid)
        return True

    def _refine(self, v: ArtNode) -> tuple[str, object]:
        """Decide the path to `v` against the error condition: 'unsafe'
        with a concrete trace, 'ok' after strengthening annotations, or
        'unknown' on a solver resource limit."""
        self.refinements += 1
        path_nodes, tids = self._path_to(v)
        groups, cuts, step_nondets = _encode_path(self.program, tids)
        err_sub = {x: LinearTerm.var(n) for x, n in cuts[-1].items()}
        groups.append([a.subst(err_sub) for a in self.query.error_condition])
        atoms = [a for g in groups for a in g]
        res = check_sat(atoms, integral=True)
        if isinstance(res, Sat):
            model = res.model
            init = {
                x: int(model.get(f"{x}@0", Fraction(0))) for x in self.program.vars()
            }
            steps = tuple(
                TraceStep(tid, tuple(int(model.get(n, Fraction(0))) for n in nds))
                for tid, nds in zip(tids, step_nondets)
            )
            return "unsafe", Trace(init, steps)
        if isinstance(res, ResourceLimit):
            return "unknown", f"path feasibility undecided: {res.reason}"
        itps = interpolant_sequence(groups, res.certificate)
        if itps is None:
            return "unknown", "no inductive interpolant sequence for a spurious path"
        strengthened = self._strengthen_path(path_nodes, cuts, itps)
        if strengthened is None:
            return "unknown", "interpolant escaped its frame"
        # strengthened annotations open new covering chances; closing an
        # ancestor prunes the whole subtree under it
        for node in strengthened:
            if not self._blocked(node.id):
                self._close(node)
        return "ok", None

    # -- expansion

    def _seed(self, v: ArtNode, t: Transition) -> Conj:
        """Facts certain to hold after taking `t` from within v's
        annotation: atoms untouched by the update, guards untouched by
        it, and the update's own deterministic equalities."""
        guards, update, nondets = parallel_update(t, lambda i, _x: f"?{i}")
        assigned = set(update)
        drawn = set(nondets)
        out: list[Atom] = []
        for a in list(v.annotation) + list(guards):
            if not (a.vars() & assigned):
                out.append(a)
        for x in sorted(update):
            vs = update[x].vars()
            if not (vs & assigned) and not (vs & drawn):
                out.append(eq(LinearTerm.var(x), update[x]))
        seeds: list[Atom] = []
        for a in map(_normalized, out):
            if a not in seeds and not a.is_trivially_true():
                seeds.append(a)
        return tuple(seeds)

    def _expand(self, v: ArtNode) -> None:
        self.expansions += 1
        for t in self.program.outgoing(v.location):
            if sat_decide(list(v.annotation) + list(t.guards)) == "unsat":
                continue  # transition disabled from every state in v
            ann = self._seed(v, t)
            w = ArtNode(len(self.nodes), t.target, ann, (v.id, t.id))
            self.nodes.append(w)
            mask = self.full_mask
            for a in ann:
                mask &= self._atom_mask(a)
            self.node_mask[w.id] = mask
            self.at_location.setdefault(w.location, []).append(w.id)
            v.children.append(w.id)
            self.work.append(w.id)
        self.expanded.add(v.id)

    def run(self) -> SafetyResult:
        err_loc = self.query.error_location
        err = list(self.query.error_condition)
        while self.work:
            vid = self.work.popleft()
            if vid in self.expanded or self._blocked(vid):
                continue
            v = self.nodes[vid]
            if self._close(v):
                continue
            if v.location == err_loc and sat_decide(list(v.annotation) + err) != "unsat":
                status, payload = self._refine(v)
                if status == "unsafe":
                    return Unsafe(payload, self.stats())
                if status == "unknown":
                    return Unknown(payload, self.stats())
                if self._blocked(vid):
                    continue
            if v.annotation and sat_decide(v.annotation) == "unsat":
                self.expanded.add(vid)  # represents no states at all
                continue
            if self._force_cover(v):
                continue
            if self.expansions >= self.budget:
                return Unknown(
                    f"node budget exhausted ({self.budget} expansions)", self.stats()
                )
            self._expand(v)
        return Safe(self._invariant(), self.stats())

    def _invariant(self) -> dict[int, Dnf]:
        inv: dict[int, Dnf] = {loc: () for loc in self.program.locations()}
        for node in self.nodes:
            if not self._blocked(node.id):
                inv[node.location] = inv[node.location] + (node.annotation,)
        out: dict[int, Dnf] = {}
        for loc, d in inv.items():
            d = dedupe(d)
            if len(d) <= SIMPLIFY_DISJUNCT_CAP:
                d = simplify_dnf(d)
            out[loc] = d
        return out


# ---------------------------------------------------------------------------
# Public entry points


def prove_safety(
    q: SafetyQuery, node_budget: int = DEFAULT_NODE_BUDGET
) -> SafetyResult:
    """Decide the query; Safe and Unsafe verdicts are re-validated by the
    independent checkers below before being returned."""
    result = Unwinding(q, node_budget).run()
    if isinstance(result, Safe) and not validate_invariant(q, result.invariant):
        return Unknown("internal: invariant failed validation", result.stats)
    if isinstance(result, Unsafe) and not validate_trace(q, result.trace):
        return Unknown("internal: counterexample failed to replay", result.stats)
    return result


def validate_invariant(q: SafetyQuery, inv: dict[int, Dnf]) -> bool:
    """Inductiveness check, independent of how `inv` was produced: the
    start location admits every state, every transition preserves the
    map, and the error location excludes the error condition."""
    p = q.program
    if not conj_implies_dnf((), inv.get(p.start, TRUE)):
        return False
    for t in p.transitions:
        rel, post, _ = transition_relation(t)
        target = inv.get(t.target, TRUE)
        renamed = tuple(tuple(a.rename(post) for a in c) for c in target)
        for c in inv.get(t.source, TRUE):
            if not conj_implies_dnf(list(c) + rel, renamed):
                return False
    for c in inv.get(q.error_location, TRUE):
        if sat_decide(list(c) + list(q.error_condition)) != "unsat":
            return False
    return True


def validate_trace(q: SafetyQuery, trace: Trace) -> bool:
    """Does the trace replay concretely and end at the error location in
    a state satisfying the error condition?"""
    states = replay(q.program, trace)
    if states is None:
        return False
    loc = q.program.start
    for s in trace.steps:
        loc = q.program.transition(s.tid).target
    return loc == q.error_location and all(
        a.holds(states[-1]) for a in q.error_condition
    )
