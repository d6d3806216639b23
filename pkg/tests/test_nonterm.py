"""Recurrent-set synthesis and certificate checking."""

import random

import pytest

from termite.ir import (
    Assignment,
    LinearTerm,
    Program,
    Trace,
    TraceStep,
    Transition,
    apply_transition,
    ge,
    le,
)
from termite.nonterm import (
    Lasso,
    RecurrentSet,
    cycle_relation,
    find_recurrent_set,
    replay_from,
    validate_recurrent_set,
)
from termite.linsolve import implies_all
from termite.oracle import ClampSpec, decide_termination_finite

from randprog import make_program

X = LinearTerm.var("x")


def _grower() -> Program:
    """x := 5, then forever { assume(x >= 0); x := x + 1 }."""
    return Program(0, (
        Transition(0, 0, 1, assigns=(Assignment("x", LinearTerm.of(5)),)),
        Transition(1, 1, 1, guards=(ge(X, 0),),
                   assigns=(Assignment("x", X + 1),)),
    ))


def _grower_lasso() -> Lasso:
    return Lasso(Trace({"x": 0}, (TraceStep(0),)),
                 Trace({"x": 5}, (TraceStep(1),)))


def _nondet_reset() -> Program:
    """Loop body x := nondet(); assume(x >= 0), split over two arcs."""
    return Program(0, (
        Transition(0, 0, 1),
        Transition(1, 1, 2, assigns=(Assignment("x", None),)),
        Transition(2, 2, 1, guards=(ge(X, 0),)),
    ))


def test_growing_counter_has_recurrent_set():
    p = _grower()
    rs = find_recurrent_set(p, _grower_lasso())
    assert rs is not None
    assert rs.location == 1
    assert rs.cycle == (1,)
    assert validate_recurrent_set(p, rs)
    # the set is exactly x >= 0
    assert implies_all(rs.states, [ge(X, 0)])
    assert implies_all([ge(X, 0)], list(rs.states))


def test_decrementing_counter_has_none():
    p = Program(0, (
        Transition(0, 0, 1, assigns=(Assignment("x", LinearTerm.of(1)),)),
        Transition(1, 1, 1, guards=(ge(X, 1),),
                   assigns=(Assignment("x", X - 1),)),
    ))
    lasso = Lasso(Trace({"x": 0}, (TraceStep(0),)),
                  Trace({"x": 1}, (TraceStep(1),)))
    assert find_recurrent_set(p, lasso) is None


def test_nondet_reset_gets_constant_witness():
    p = _nondet_reset()
    lasso = Lasso(Trace({"x": 0}, (TraceStep(0),)),
                  Trace({"x": 0}, (TraceStep(1, (0,)), TraceStep(2))))
    rs = find_recurrent_set(p, lasso)
    assert rs is not None
    assert validate_recurrent_set(p, rs)
    w = rs.choice_witnesses[(1, "x")]
    assert w.is_const() and w.const >= 0


def test_witness_follows_lasso_choice():
    # with a guard x >= 3 the zero witness is no good; the lasso's own
    # draw must be reused
    p = Program(0, (
        Transition(0, 0, 1),
        Transition(1, 1, 2, assigns=(Assignment("x", None),)),
        Transition(2, 2, 1, guards=(ge(X, 3),)),
    ))
    lasso = Lasso(Trace({"x": 0}, (TraceStep(0),)),
                  Trace({"x": 0}, (TraceStep(1, (7,)), TraceStep(2))))
    rs = find_recurrent_set(p, lasso)
    assert rs is not None and validate_recurrent_set(p, rs)
    assert rs.choice_witnesses[(1, "x")].eval({}) >= 3


def test_empty_cycle_rejected():
    p = _grower()
    assert find_recurrent_set(p, Lasso(Trace({"x": 0}, (TraceStep(0),)),
                                       Trace({"x": 5}, ()))) is None


def test_validator_rejects_stem_outside_set():
    p = _grower()
    good = find_recurrent_set(p, _grower_lasso())
    assert good is not None
    bad = RecurrentSet(good.location, (ge(X, 6),), good.cycle,
                       good.stem_witness, good.choice_witnesses)
    # {x >= 6} is inductive and inside the guard, but the stem lands at 5
    assert not validate_recurrent_set(p, bad)


def test_validator_rejects_guard_escape():
    # guard is x >= 1; {x >= 0} is closed under x := x + 1 but admits x = 0
    p = Program(0, (
        Transition(0, 0, 1, assigns=(Assignment("x", LinearTerm.of(5)),)),
        Transition(1, 1, 1, guards=(ge(X, 1),),
                   assigns=(Assignment("x", X + 1),)),
    ))
    rs = RecurrentSet(1, (ge(X, 0),), (1,),
                      Trace({"x": 0}, (TraceStep(0),)), {})
    assert not validate_recurrent_set(p, rs)


def test_validator_rejects_non_inductive_set():
    # {x >= 0} satisfies the guard but x := x - 1 steps out at x = 0
    p = Program(0, (
        Transition(0, 0, 1, assigns=(Assignment("x", LinearTerm.of(5)),)),
        Transition(1, 1, 1, guards=(ge(X, 0),),
                   assigns=(Assignment("x", X - 1),)),
    ))
    rs = RecurrentSet(1, (ge(X, 0),), (1,),
                      Trace({"x": 0}, (TraceStep(0),)), {})
    assert not validate_recurrent_set(p, rs)


def test_validator_rejects_broken_cycle_shape():
    p = _grower()
    good = find_recurrent_set(p, _grower_lasso())
    assert good is not None
    for cycle in ((), (0,), (1, 1, 0)):
        bad = RecurrentSet(good.location, good.states, cycle,
                           good.stem_witness, good.choice_witnesses)
        assert not validate_recurrent_set(p, bad)


def test_validator_rejects_missing_witness():
    p = _nondet_reset()
    lasso = Lasso(Trace({"x": 0}, (TraceStep(0),)),
                  Trace({"x": 0}, (TraceStep(1, (0,)), TraceStep(2))))
    rs = find_recurrent_set(p, lasso)
    assert rs is not None
    stripped = RecurrentSet(rs.location, rs.states, rs.cycle,
                            rs.stem_witness, {})
    assert not validate_recurrent_set(p, stripped)


def test_replay_from_checks_sources_and_guards():
    p = _grower()
    assert replay_from(p, 1, Trace({"x": 5}, (TraceStep(1),))) is not None
    assert replay_from(p, 0, Trace({"x": 5}, (TraceStep(1),))) is None
    assert replay_from(p, 1, Trace({"x": -1}, (TraceStep(1),))) is None
    assert replay_from(p, 1, Trace({"x": 5}, (TraceStep(9),))) is None


def _iterate_witnessed_cycle(p, rs, state, rounds):
    """Concretely run the witnessed cycle `rounds` times from `state`,
    asserting every visit stays inside the set and no guard fails."""
    got = cycle_relation(p, rs.cycle, rs.choice_witnesses)
    assert got is not None
    _, final = got
    for _ in range(rounds):
        assert all(a.holds(state) for a in rs.states)
        nxt = {}
        for v in p.vars():
            val = final.get(v, LinearTerm.var(v)).eval(state)
            assert val.denominator == 1
            nxt[v] = int(val)
        # cross-check the affine map against step-by-step execution
        concrete = dict(state)
        for tid in rs.cycle:
            t = p.transition(tid)
            choices = []
            for a in t.assigns:
                if a.expr is None:
                    w = rs.choice_witnesses[(t.id, a.var)].eval(concrete)
                    assert w.denominator == 1
                    choices.append(int(w))
            concrete = apply_transition(t, concrete, tuple(choices))
            assert concrete is not None, "a guard failed inside the set"
        assert {v: concrete[v] for v in p.vars()} == nxt
        state = nxt


def test_fifty_concrete_iterations_stay_inside():
    for p, lasso in ((_grower(), _grower_lasso()),
                     (_nondet_reset(),
                      Lasso(Trace({"x": 0}, (TraceStep(0),)),
                            Trace({"x": 0}, (TraceStep(1, (0,)), TraceStep(2)))))):
        rs = find_recurrent_set(p, lasso)
        assert rs is not None
        start = replay_from(p, p.start, rs.stem_witness)[-1]
        _iterate_witnessed_cycle(p, rs, start, 50)


def _walk_lassos(p, rng, walks=4, depth=40, cap=8):
    """Concrete random walks; each location revisit yields a lasso.
    Deduplicated by cycle shape, at most `cap` per program."""
    init = dict.fromkeys(p.vars(), 0)
    lassos = []
    shapes = set()
    for _ in range(walks):
        loc, state = p.start, dict(init)
        steps = []
        seen = {loc: (0, dict(state))}
        for _ in range(depth):
            outs = [t for t in p.outgoing(loc)
                    if apply_transition(t, state, (0,) * t.nondet_count())]
            if not outs:
                break
            t = rng.choice(outs)
            choices = tuple(rng.randint(-3, 3) for _ in range(t.nondet_count()))
            nxt = apply_transition(t, state, choices)
            if nxt is None:
                break
            steps.append(TraceStep(t.id, choices))
            loc, state = t.target, nxt
            if loc in seen:
                k, head = seen[loc]
                shape = tuple(s.tid for s in steps[k:])
                if shape not in shapes:
                    shapes.add(shape)
                    lassos.append(Lasso(Trace(init, tuple(steps[:k])),
                                        Trace(head, tuple(steps[k:]))))
                    if len(lassos) >= cap:
                        return lassos
                seen = {loc: (len(steps), dict(state))}
            else:
                seen[loc] = (len(steps), dict(state))
    return lassos


def test_random_programs_never_certify_terminating():
    """On deterministic bounded-state programs the clamped oracle decides
    termination exactly, so a validated recurrent set must coincide with
    the oracle calling the program nonterminating."""
    rng = random.Random(4101)
    clamp = ClampSpec(-5, 5, depth=200)
    found = checked = 0
    for _ in range(200):
        p = make_program(rng)
        verdict = decide_termination_finite(p, clamp)
        for lasso in _walk_lassos(p, rng):
            checked += 1
            rs = find_recurrent_set(p, lasso)
            if rs is None:
                continue
            found += 1
            assert validate_recurrent_set(p, rs)
            assert verdict == "Nonterminating", (
                f"certified a terminating program: {p}"
            )
            start = replay_from(p, p.start, rs.stem_witness)[-1]
            _iterate_witnessed_cycle(p, rs, start, 50)
    assert checked > 100, "walks found too few lassos to be meaningful"
    assert found > 10, "synthesis certified suspiciously few cycles"
