"""Solver tests: models, certificates, entailment, optimization,
projection, and interpolation."""

import itertools
import random
from fractions import Fraction

import pytest

from termite.ir import FALSE, Atom, LinearTerm, eq, ge, gt, le, lt
from termite.linsolve import (
    CutStep,
    FarkasCertificate,
    OptResult,
    ResourceLimit,
    Sat,
    Unsat,
    check_certificate,
    check_sat,
    eliminate,
    implies,
    implies_all,
    interpolant,
    interpolant_sequence,
    optimize,
    sat_decide,
)

x = LinearTerm.var("x")
y = LinearTerm.var("y")
z = LinearTerm.var("z")


def test_check_sat_empty_and_trivial():
    res = check_sat([])
    assert isinstance(res, Sat) and res.model == {}
    res = check_sat([le(3, 7)])
    assert isinstance(res, Sat)
    res = check_sat([le(7, 3)])
    assert isinstance(res, Unsat)
    assert check_certificate([le(7, 3)], res.certificate)


def test_simple_models_are_integral():
    res = check_sat([ge(x, 2), le(x, 10), eq(y, x + 3)])
    assert isinstance(res, Sat)
    m = res.model
    assert m["y"] == m["x"] + 3 and 2 <= m["x"] <= 10
    assert all(v.denominator == 1 for v in m.values())


def test_rational_vs_integer_gap():
    # 2x = 1 has a rational solution but no integer one
    atoms = [eq(x * 2, 1)]
    r = check_sat(atoms, integral=False)
    assert isinstance(r, Sat) and r.model["x"] == Fraction(1, 2)
    r = check_sat(atoms, integral=True)
    assert isinstance(r, Unsat)
    assert check_certificate(atoms, r.certificate)
    assert r.certificate.steps  # needs at least one strengthening step


def test_gcd_infeasible_equality():
    atoms = [eq(x * 2, y * 2 + 1)]
    r = check_sat(atoms)
    assert isinstance(r, Unsat)
    assert check_certificate(atoms, r.certificate)


def test_narrow_rational_strip_is_integer_empty():
    # 1 <= 3x - 3y <= 2 has rational points only
    atoms = [ge(x * 3 - y * 3, 1), le(x * 3 - y * 3, 2)]
    assert sat_decide(atoms, integral=False) == "sat"
    r = check_sat(atoms)
    assert isinstance(r, Unsat)
    assert check_certificate(atoms, r.certificate)


def test_certificate_rejects_tampering():
    atoms = [le(x, 0), ge(x, 1)]
    r = check_sat(atoms)
    assert isinstance(r, Unsat)
    cert = r.certificate
    assert check_certificate(atoms, cert)
    # flip a multiplier sign on an inequality: must be rejected
    bad = FarkasCertificate(
        {i: -m for i, m in cert.multipliers.items()}, cert.steps
    )
    assert not check_certificate(atoms, bad)
    # a cut whose stored bound was not floored must be rejected
    fake = FarkasCertificate(
        {0: Fraction(1)},
        (CutStep({0: Fraction(1, 2)}, {"x": Fraction(1, 2)}, Fraction(0)),),
    )
    assert not check_certificate(atoms, fake)


def test_implies_over_integers():
    assert implies([ge(x * 2, 1)], ge(x, 1))  # integer-only strengthening
    assert implies([ge(x, 1), le(x, 1)], eq(x, 1))
    assert implies([eq(x, 3)], le(x, 3))
    assert not implies([ge(x, 0)], ge(x, 1))
    assert not implies([], le(x, 5))
    assert implies_all([eq(x, 2), eq(y, x)], [le(y, 2), ge(y, 2)])


def test_optimize_basic():
    atoms = [ge(x, 2), le(x, 10)]
    r = optimize(atoms, x.scale(2) + 3, maximize=True)
    assert r.status == "optimal" and r.value == 23
    r = optimize(atoms, x, maximize=False)
    assert r.status == "optimal" and r.value == 2
    r = optimize([ge(x, 0)], x, maximize=True)
    assert r.status == "unbounded"
    r = optimize([ge(x, 1), le(x, 0)], x, maximize=True)
    assert r.status == "infeasible"


def test_optimize_through_equalities():
    atoms = [eq(x, y), le(y, 5), ge(y, -1)]
    r = optimize(atoms, x, maximize=True)
    assert r.status == "optimal" and r.value == 5
    r = optimize(atoms, x - y, maximize=True)
    assert r.status == "optimal" and r.value == 0


def test_optimize_fractional_vertex():
    # max x + y subject to 2x + y <= 3, x + 2y <= 3 is at (1,1)
    atoms = [le(x * 2 + y, 3), le(x + y * 2, 3), ge(x, 0), ge(y, 0)]
    r = optimize(atoms, x + y, maximize=True)
    assert r.status == "optimal" and r.value == 2


def test_eliminate_rational_shadow():
    atoms = [ge(x, y + 1), le(x, z)]
    out = eliminate(atoms, ["x"], mode="rational")
    assert len(out) == 1
    assert implies(out, le(y + 1, z)) and implies([le(y + 1, z)], out[0])


def test_eliminate_keeps_unrelated_constraints():
    atoms = [eq(y, 4), ge(x, 0)]
    out = eliminate(atoms, ["x"], mode="rational")
    assert out == [eq(y, 4)]


def test_eliminate_integer_under_unit_case_exact():
    # x between y and z with unit coefficients: projection is exact
    atoms = [ge(x, y), le(x, z)]
    out = eliminate(atoms, ["x"], mode="integer_under")
    assert implies(out, le(y, z)) and implies([le(y, z)], out[0])


def test_eliminate_integer_under_dark_shadow():
    # 2x >= y and 2x <= y: integer solution requires y even, which a
    # projection cannot say; the under-approximation must not claim all y
    atoms = [ge(x * 2, y), le(x * 2, y)]
    out = eliminate(atoms, ["x"], mode="integer_under")
    assert not implies([], out[0]) or out == [FALSE]


def test_interpolant_traced_cases():
    i = interpolant([eq(x, 0)], [ge(x, 1)])
    assert i == [le(x, 0)]
    i = interpolant([ge(x, 2), eq(y, x)], [le(y, 0)])
    assert i == [ge(y, 2)]
    i = interpolant([], [ge(x, 1), le(x, 0)])
    assert i == []
    i = interpolant([le(x, 0), ge(x, 1)], [eq(y, 0)])
    assert i is not None and len(i) == 1 and i[0].is_trivially_false()


def test_interpolant_requires_unsat():
    with pytest.raises(ValueError):
        interpolant([ge(x, 0)], [le(x, 5)])


def test_interpolant_integer_tightening():
    # x >= 1/2-ish via 2x >= 1; the interpolant must be integral
    i = interpolant([ge(x * 2, 1)], [le(x, 0)])
    assert i is not None
    assert implies([ge(x * 2, 1)], i[0])
    assert sat_decide(i + [le(x, 0)]) == "unsat"
    sc = i[0].term.coeffs
    assert all(c.denominator == 1 for c in sc.values())


def test_interpolant_sequence_chain():
    # a straight-line path: x0 = 0; x1 = x0 + 1; x2 = x1 + 1; x2 <= 1
    groups = [
        [eq(LinearTerm.var("x0"), 0)],
        [eq(LinearTerm.var("x1"), LinearTerm.var("x0") + 1)],
        [eq(LinearTerm.var("x2"), LinearTerm.var("x1") + 1)],
        [le(LinearTerm.var("x2"), 1)],
    ]
    seq = interpolant_sequence(groups)
    assert seq is not None and len(seq) == 5
    assert seq[0] == []
    assert len(seq[-1]) == 1 and seq[-1][0].is_trivially_false()
    for k in range(1, 5):
        assert implies_all(seq[k - 1] + groups[k - 1], seq[k])
    # frame condition: I_k only mentions variables shared by both sides
    suffix = set()
    suffixes = [set() for _ in range(5)]
    for k in range(3, -1, -1):
        suffix = suffix | set().union(*(a.vars() for a in groups[k]))
        suffixes[k] = set(suffix)
    prefix: set = set()
    for k in range(1, 4):
        prefix |= set().union(*(a.vars() for a in groups[k - 1]))
        ivars = set().union(*(a.vars() for a in seq[k]), set())
        assert ivars <= (prefix & suffixes[k])


def test_interpolant_sequence_on_sat_path_is_none():
    groups = [[ge(x, 0)], [le(x, 5)]]
    assert interpolant_sequence(groups) is None


# ---------------------------------------------------------------------------
# Randomized properties


def _random_atoms(rng, nv, na, eq_p=0.3):
    names = ["x", "y", "z", "w"][:nv]
    out = []
    for _ in range(na):
        coeffs = {v: rng.randint(-3, 3) for v in rng.sample(names, rng.randint(1, nv))}
        coeffs = {v: c for v, c in coeffs.items() if c}
        if not coeffs:
            coeffs = {rng.choice(names): 1}
        out.append(Atom(LinearTerm(coeffs, rng.randint(-8, 8)), rng.random() < eq_p))
    return names, out


def _brute_box(names, atoms, lo=-4, hi=4):
    for vals in itertools.product(range(lo, hi + 1), repeat=len(names)):
        env = dict(zip(names, vals))
        if all(a.holds(env) for a in atoms):
            return env
    return None


def test_random_systems_models_or_certificates():
    rng = random.Random(20240817)
    limits = 0
    for _ in range(250):
        names, atoms = _random_atoms(rng, rng.randint(1, 3), rng.randint(2, 6))
        res = check_sat(atoms, integral=True)
        if isinstance(res, Sat):
            assert all(a.holds(res.model) for a in atoms)
            assert all(v.denominator == 1 for v in res.model.values())
        elif isinstance(res, Unsat):
            assert check_certificate(atoms, res.certificate)
            assert _brute_box(names, atoms) is None
        else:
            limits += 1
    assert limits <= 5, f"too many resource limits: {limits}"


def test_random_unsat_splits_interpolate():
    rng = random.Random(99173)
    done = 0
    while done < 120:
        names, atoms = _random_atoms(rng, rng.randint(1, 3), rng.randint(3, 7))
        if sat_decide(atoms) != "unsat":
            continue
        cut = rng.randint(0, len(atoms))
        a, b = atoms[:cut], atoms[cut:]
        itp = interpolant(a, b)
        if itp is None:
            continue  # certification can fail; soundness is what we check
        avars = set().union(*(t.vars() for t in a), set())
        bvars = set().union(*(t.vars() for t in b), set())
        ivars = set().union(*(t.vars() for t in itp), set())
        assert ivars <= (avars & bvars)
        assert implies_all(a, itp)
        assert sat_decide(itp + b) == "unsat"
        done += 1


def test_random_projection_rational_is_an_overapproximation():
    rng = random.Random(5150)
    for _ in range(120):
        names, atoms = _random_atoms(rng, 3, rng.randint(2, 5), eq_p=0.4)
        dropped = rng.choice(names)
        out = eliminate(atoms, [dropped], mode="rational")
        env = _brute_box(names, atoms, -3, 3)
        if env is None:
            continue
        kept = {v: env[v] for v in names if v != dropped}
        assert all(a.holds(kept) for a in out)


def test_random_projection_integer_under_is_an_underapproximation():
    rng = random.Random(616)
    checked = 0
    for _ in range(150):
        names, atoms = _random_atoms(rng, 2, rng.randint(2, 4), eq_p=0.4)
        dropped = names[-1]
        kept_names = names[:-1]
        out = eliminate(atoms, [dropped], mode="integer_under")
        for vals in itertools.product(range(-3, 4), repeat=len(kept_names)):
            env = dict(zip(kept_names, vals))
            if not all(a.holds(env) for a in out):
                continue
            pinned = [eq(LinearTerm.var(v), env[v]) for v in kept_names]
            assert sat_decide(list(atoms) + pinned) == "sat", (
                f"{[str(a) for a in atoms]} at {env} not extendable on {dropped}"
            )
            checked += 1
            break
    assert checked >= 20


def test_random_optimize_dominates_feasible_points():
    rng = random.Random(71)
    for _ in range(80):
        names, atoms = _random_atoms(rng, 2, rng.randint(2, 5), eq_p=0.2)
        obj = LinearTerm({v: rng.randint(-2, 2) for v in names})
        r = optimize(atoms, obj, maximize=True)
        if r.status != "optimal":
            continue
        env = _brute_box(names, atoms, -3, 3)
        if env is not None:
            assert obj.eval(env) <= r.value
