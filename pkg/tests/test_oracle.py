"""Explicit-state reference engine: clamped exploration, exact finite
termination, and CTL labeling on the reachable graph."""

import random

import pytest

from termite.ir import Assignment, LinearTerm, Program, Transition, ge, gt, le
from termite.oracle import (
    STATE_SPACE_LIMIT,
    ClampSpec,
    check_ctl_finite,
    ctl_states,
    decide_termination_finite,
    reachable_states,
)
from termite.props import negate, parse_ctl
from termite.t2parse import parse_t2
from termite.transform import preprocess

x = LinearTerm.var("x")
y = LinearTerm.var("y")


def _loc(p: Program, name: str) -> int:
    return next(i for i, n in p.loc_names.items() if n == name)


# ---------------------------------------------------------------------------
# Clamp handling


def test_clamp_validation():
    with pytest.raises(ValueError):
        ClampSpec(3, 2)
    with pytest.raises(ValueError):
        ClampSpec(0, 1, depth=-1)
    assert list(ClampSpec(-1, 1).values()) == [-1, 0, 1]


def test_state_space_guard():
    vs = [LinearTerm.var(f"v{i}") for i in range(9)]
    t = Transition(0, 0, 0, (le(sum(vs, LinearTerm()), 100),), ())
    p = Program(0, [t])
    with pytest.raises(ValueError):
        reachable_states(p, ClampSpec(-50, 49))


def test_property_over_unknown_variable_is_rejected():
    t = Transition(0, 0, 0, (gt(x, 0),), (Assignment("x", x - 1),))
    p = Program(0, [t])
    with pytest.raises(ValueError, match="zz"):
        check_ctl_finite(p, ClampSpec(0, 1), parse_ctl("[AG](zz <= 0)"))


def test_start_states_enumerate_the_clamp():
    t = Transition(0, 0, 1, (ge(x, 1),), ())
    p = Program(0, [t])
    got = reachable_states(p, ClampSpec(0, 1))
    assert got == {
        (0, (("x", 0),)),
        (0, (("x", 1),)),
        (1, (("x", 1),)),
    }


def test_false_guard_leaves_only_start_states():
    t = Transition(0, 0, 1, (ge(LinearTerm(), 1),), (Assignment("x", x + 1),))
    p = Program(0, [t])
    got = reachable_states(p, ClampSpec(-1, 1))
    assert got == {(0, (("x", v),)) for v in (-1, 0, 1)}


def test_nondet_assignment_ranges_over_clamp():
    t = Transition(0, 0, 1, (), (Assignment("x", None),))
    p = Program(0, [t])
    got = reachable_states(p, ClampSpec(-1, 1))
    assert got == {(loc, (("x", v),)) for loc in (0, 1) for v in (-1, 0, 1)}


def test_post_state_outside_clamp_is_disabled():
    t = Transition(0, 0, 0, (), (Assignment("x", x + 1),))
    p = Program(0, [t])
    got = reachable_states(p, ClampSpec(0, 3))
    assert got == {(0, (("x", v),)) for v in range(4)}
    # the clamp cuts the increment chain, so the finite model terminates
    assert decide_termination_finite(p, ClampSpec(0, 3)) == "Terminating"


def test_depth_cap_stops_expansion():
    t = Transition(0, 0, 0, (), ())
    p = Program(0, [t])
    assert decide_termination_finite(p, ClampSpec(0, 0)) == "Nonterminating"
    # depth 0 forbids taking any step at all
    assert decide_termination_finite(p, ClampSpec(0, 0, depth=0)) == "Terminating"


# ---------------------------------------------------------------------------
# Termination on the finite graph


def test_identity_self_loop_is_nonterminating():
    t = Transition(0, 0, 0, (), (Assignment("x", x),))
    p = Program(0, [t])
    assert decide_termination_finite(p, ClampSpec(-2, 2)) == "Nonterminating"


def test_countdown_is_terminating():
    t = Transition(0, 0, 0, (gt(x, 0),), (Assignment("x", x - 1),))
    p = Program(0, [t])
    assert decide_termination_finite(p, ClampSpec(-2, 5)) == "Terminating"


def test_two_phase_cycle_is_nonterminating():
    # flip-flop between two locations
    t0 = Transition(0, 0, 1, (), (Assignment("x", x + 1),))
    t1 = Transition(1, 1, 0, (), (Assignment("x", x - 1),))
    p = Program(0, [t0, t1])
    assert decide_termination_finite(p, ClampSpec(0, 1)) == "Nonterminating"


def test_ex0_termination(ex0_text):
    p = parse_t2(ex0_text)
    # the raw program keeps an explicit halt self-loop, so the graph cycles
    assert decide_termination_finite(p, ClampSpec(-2, 2)) == "Nonterminating"
    # preprocessing removes it; what remains is a genuine countdown
    assert decide_termination_finite(preprocess(p), ClampSpec(-2, 2)) == "Terminating"


# ---------------------------------------------------------------------------
# CTL labeling


def test_ex0_reaches_bb2_only_with_positive_counter(ex0_text):
    p = parse_t2(ex0_text)
    got = reachable_states(p, ClampSpec(-2, 2))
    bb2 = _loc(p, "main_bb2")
    v0s = {dict(env)["v0"] for loc, env in got if loc == bb2}
    assert v0s == {1, 2}


def test_ex0_ctl_verdicts(ex0_text):
    p = parse_t2(ex0_text)
    c = ClampSpec(-2, 2)
    assert check_ctl_finite(p, c, parse_ctl("[EF]([AG](x <= 0))")) == "Holds"
    assert check_ctl_finite(p, c, parse_ctl("[AF](x <= 0)")) == "Fails"
    assert check_ctl_finite(p, c, parse_ctl("[AG](0 <= 0)")) == "Holds"


def test_halt_states_stutter():
    t = Transition(0, 0, 1, (), (Assignment("x", LinearTerm.of(1)),))
    p = Program(0, [t])
    # from x=1 the halt state keeps x=1 forever, so AF(x<=0) fails there
    assert check_ctl_finite(p, ClampSpec(0, 1), parse_ctl("[AF](x <= 0)")) == "Fails"
    # with the assignment clamped away, the start itself is a halt state
    assert check_ctl_finite(p, ClampSpec(0, 0), parse_ctl("[AF](x <= 0)")) == "Holds"
    # the stutter loop also feeds EX/EG at halt states
    assert check_ctl_finite(p, ClampSpec(0, 1), parse_ctl("[EX](x >= 0)")) == "Holds"
    assert check_ctl_finite(p, ClampSpec(1, 1), parse_ctl("[EG](x >= 1)")) == "Holds"


def test_ctl_states_on_countdown():
    t = Transition(0, 0, 0, (gt(x, 0),), (Assignment("x", x - 1),))
    p = Program(0, [t])
    c = ClampSpec(-2, 5)
    everything = reachable_states(p, c)
    # every state eventually bottoms out at x <= 0 and stutters there
    assert ctl_states(p, c, parse_ctl("[AF](x <= 0)")) == everything
    # no path stays positive forever
    assert ctl_states(p, c, parse_ctl("[EG](x >= 1)")) == set()


# ---------------------------------------------------------------------------
# Random-model properties


def _random_program(rng: random.Random) -> Program:
    nlocs = rng.randint(1, 3)
    ts = []
    for i in range(rng.randint(1, 4)):
        guards = []
        if rng.random() < 0.7:
            g = rng.choice([le, ge, gt])
            guards.append(g(rng.randint(-2, 2) * x + rng.randint(-2, 2) * y,
                            rng.randint(-2, 2)))
        assigns = []
        for v, t in (("x", x), ("y", y)):
            r = rng.random()
            if r < 0.2:
                assigns.append(Assignment(v, None))
            elif r < 0.7:
                expr = (rng.randint(-1, 1) * x + rng.randint(-1, 1) * y
                        + rng.randint(-2, 2))
                assigns.append(Assignment(v, expr))
            else:
                assigns.append(Assignment(v, t))  # keep both vars in play
        ts.append(Transition(i, rng.randrange(nlocs), rng.randrange(nlocs),
                             tuple(guards), tuple(assigns)))
    return Program(0, ts)


def _random_formula(rng: random.Random, depth: int):
    if depth == 0 or rng.random() < 0.3:
        g = rng.choice([le, ge, gt])
        return parse_ctl(str(g(rng.randint(-2, 2) * x + rng.randint(-2, 2) * y,
                               rng.randint(-2, 2))))
    from termite.props import AF, AG, AU, AX, And, EF, EG, EU, EX, Or

    op = rng.choice([AX, EX, AF, EF, AG, EG, AU, EU, And, Or])
    if op in (AU, EU, And, Or):
        return op(_random_formula(rng, depth - 1), _random_formula(rng, depth - 1))
    return op(_random_formula(rng, depth - 1))


def test_ag_equals_complement_reachability():
    rng = random.Random(31)
    c = ClampSpec(-3, 3)
    for _ in range(40):
        p = _random_program(rng)
        a = le(rng.randint(-2, 2) * x + rng.randint(-2, 2) * y, rng.randint(-2, 2))
        verdict = check_ctl_finite(p, c, parse_ctl(f"[AG]({a})"))
        ok = all(a.holds(dict(env)) for _, env in reachable_states(p, c))
        assert verdict == ("Holds" if ok else "Fails")


def test_labeling_respects_negation():
    rng = random.Random(59)
    c = ClampSpec(-2, 2)
    for _ in range(30):
        p = _random_program(rng)
        f = _random_formula(rng, 2)
        sat = ctl_states(p, c, f)
        unsat = ctl_states(p, c, negate(f))
        everything = reachable_states(p, c)
        assert sat | unsat == everything and not (sat & unsat)
        # semantic double negation, including through until re-expansion
        assert ctl_states(p, c, negate(negate(f))) == sat


def test_exploration_is_deterministic():
    rng = random.Random(83)
    c = ClampSpec(-2, 2)
    for _ in range(10):
        p = _random_program(rng)
        assert reachable_states(p, c) == reachable_states(p, c)
        assert (decide_termination_finite(p, c)
                == decide_termination_finite(p, c))
