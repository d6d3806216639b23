"""DNF algebra: boolean operations checked pointwise, entailment checked
against exhaustive enumeration over a bounding box."""

import itertools
import random
from fractions import Fraction

from termite.formula import (
    FALSE,
    TRUE,
    conj_holds,
    conj_implies_conj,
    conj_implies_dnf,
    conj_negate,
    dedupe,
    dnf_and,
    dnf_holds,
    dnf_implies_dnf,
    dnf_negate,
    dnf_of,
    dnf_or,
    dnf_vars,
    simplify_conj,
    simplify_dnf,
)
from termite.ir import LinearTerm, eq, ge, gt, le, lt

x = LinearTerm.var("x")
y = LinearTerm.var("y")

BOX = 6
POINTS = [
    {"x": i, "y": j}
    for i, j in itertools.product(range(-BOX, BOX + 1), repeat=2)
]


def _rand_atom(rng):
    t = LinearTerm(
        {v: Fraction(rng.randint(-2, 2)) for v in ("x", "y") if rng.random() < 0.8},
        Fraction(rng.randint(-4, 4)),
    )
    build = rng.choice((le, ge, lt, eq))
    return build(t, 0)


def _rand_conj(rng, hi=3):
    return tuple(_rand_atom(rng) for _ in range(rng.randint(1, hi)))


def _rand_dnf(rng, hi=3):
    return tuple(_rand_conj(rng) for _ in range(rng.randint(1, hi)))


def _boxed(c):
    """The conjunction plus explicit box bounds, so that entailment over
    the integers coincides with entailment over POINTS."""
    walls = []
    for v in (x, y):
        walls.append(ge(v, -BOX))
        walls.append(le(v, BOX))
    return tuple(c) + tuple(walls)


# ---------------------------------------------------------------------------
# Constants and evaluation


def test_true_and_false_constants():
    for pt in POINTS[:9]:
        assert dnf_holds(TRUE, pt)
        assert not dnf_holds(FALSE, pt)


def test_dnf_of_single_conjunction():
    d = dnf_of([ge(x, 1)])
    assert len(d) == 1
    assert dnf_holds(d, {"x": 3, "y": 0})
    assert not dnf_holds(d, {"x": 0, "y": 0})


def test_dnf_vars_collects_all_mentions():
    d = ((ge(x, 0),), (le(y, 2),))
    assert dnf_vars(d) == {"x", "y"}


# ---------------------------------------------------------------------------
# Boolean operations agree with pointwise evaluation


def test_and_or_negate_pointwise():
    rng = random.Random(11)
    for _ in range(60):
        a, b = _rand_dnf(rng), _rand_dnf(rng)
        conj = dnf_and(a, b)
        disj = dnf_or(a, b)
        nega = dnf_negate(a)
        for pt in rng.sample(POINTS, 25):
            va, vb = dnf_holds(a, pt), dnf_holds(b, pt)
            assert dnf_holds(conj, pt) == (va and vb)
            assert dnf_holds(disj, pt) == (va or vb)
            assert dnf_holds(nega, pt) == (not va)


def test_conj_negate_pointwise():
    rng = random.Random(12)
    for _ in range(60):
        c = _rand_conj(rng)
        n = conj_negate(c)
        for pt in rng.sample(POINTS, 25):
            assert dnf_holds(n, pt) == (not conj_holds(c, pt))


def test_negate_involution_pointwise():
    rng = random.Random(13)
    for _ in range(25):
        d = _rand_dnf(rng, hi=2)
        dd = dnf_negate(dnf_negate(d))
        for pt in rng.sample(POINTS, 25):
            assert dnf_holds(dd, pt) == dnf_holds(d, pt)


def test_or_and_edge_cases():
    d = _rand_dnf(random.Random(14))
    assert dnf_or(FALSE, d) == d
    assert dnf_and(TRUE, d) == d
    assert dnf_and(FALSE, d) == FALSE
    assert dnf_negate(TRUE) == FALSE
    assert dnf_negate(FALSE) == TRUE


# ---------------------------------------------------------------------------
# Entailment


def test_conj_implies_conj_basics():
    one = ge(x, 1)
    zero = ge(x, 0)
    assert conj_implies_conj((one,), (zero,))
    assert not conj_implies_conj((zero,), (one,))
    assert conj_implies_conj((zero,), ())  # anything entails true


def test_entailment_matches_box_enumeration():
    """With the box walls conjoined to the premise, integer entailment and
    exhaustive enumeration over POINTS are the same question."""
    rng = random.Random(15)
    for _ in range(120):
        c, d = _rand_conj(rng), _rand_dnf(rng)
        premise = _boxed(c)
        want = all(
            dnf_holds(d, pt) for pt in POINTS if conj_holds(premise, pt)
        )
        assert conj_implies_dnf(premise, d) == want


def test_entailment_never_overclaims_unbounded():
    """Without the walls the box can only under-approximate countermodels:
    whenever the prover claims entailment, enumeration must agree."""
    rng = random.Random(16)
    for _ in range(120):
        c, d = _rand_conj(rng), _rand_dnf(rng)
        if conj_implies_dnf(c, d):
            assert all(
                dnf_holds(d, pt) for pt in POINTS if conj_holds(c, pt)
            )


def test_entailment_shortcuts():
    unsat = (ge(x, 1), le(x, 0))
    assert conj_implies_dnf(unsat, FALSE)  # false premise entails anything
    assert conj_implies_dnf((ge(x, 0),), TRUE)
    assert not conj_implies_dnf((ge(x, 0),), FALSE)


def test_entailment_branches_on_equalities():
    # x in [0, 1] is covered by {x = 0} union {x = 1} over the integers
    c = (ge(x, 0), le(x, 1))
    d = ((eq(x, 0),), (eq(x, 1),))
    assert conj_implies_dnf(c, d)
    assert not conj_implies_dnf(c, d[:1])


def test_entailment_integral_flag():
    # 2x = 1 has no integer solutions but a rational one
    c = (eq(2 * x, 1),)
    assert conj_implies_dnf(c, FALSE, integral=True)
    assert not conj_implies_dnf(c, FALSE, integral=False)


def test_entailment_fuel_exhaustion_is_conservative():
    c = (ge(x, 1),)
    d = ((ge(x, 0),),)
    assert conj_implies_dnf(c, d)
    assert not conj_implies_dnf(c, d, fuel=0)


def test_dnf_implies_dnf_pointwise():
    rng = random.Random(17)
    for _ in range(50):
        a, b = _rand_dnf(rng, hi=2), _rand_dnf(rng)
        boxed = tuple(_boxed(c) for c in a)
        want = all(
            dnf_holds(b, pt)
            for c in boxed
            for pt in POINTS
            if conj_holds(c, pt)
        )
        assert dnf_implies_dnf(boxed, b) == want


# ---------------------------------------------------------------------------
# Simplification


def test_dedupe_removes_reordered_duplicates():
    a = ge(x, 0)
    b = le(y, 3)
    assert dedupe(((a, b), (b, a), (a,))) == ((a, b), (a,))


def test_simplify_conj_drops_trivial_and_repeated():
    a = ge(x, 2)
    triv = ge(5, 0)
    assert simplify_conj((triv, a, a)) == (a,)


def test_simplify_dnf_absorbs_weaker_disjuncts():
    narrow = (ge(x, 2), le(x, 2))
    wide = (ge(x, 0),)
    assert simplify_dnf((narrow, wide)) == (wide,)
    assert simplify_dnf((wide, narrow)) == (wide,)


def test_simplify_dnf_drops_unsat_disjuncts():
    dead = (ge(x, 1), le(x, 0))
    live = (ge(x, 0),)
    assert simplify_dnf((dead, live)) == (live,)
    assert simplify_dnf((dead,)) == FALSE


def test_simplify_dnf_preserves_meaning():
    rng = random.Random(18)
    for _ in range(40):
        d = _rand_dnf(rng)
        s = simplify_dnf(d)
        for pt in rng.sample(POINTS, 30):
            assert dnf_holds(s, pt) == dnf_holds(d, pt)


def test_simplify_dnf_idempotent():
    rng = random.Random(19)
    for _ in range(20):
        s = simplify_dnf(_rand_dnf(rng))
        assert simplify_dnf(s) == s
