"""Small DNF algebra over linear atoms.

A conjunction is a tuple of atoms, a DNF is a tuple of conjunctions.
``TRUE`` is the DNF with one empty conjunction, ``FALSE`` the DNF with no
disjuncts.  Entailment is discharged through the exact solver; wherever
the solver answers "unknown" the queries here degrade conservatively
(non-entailment, possibly-satisfiable), so callers stay sound.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .ir import Atom
from .linsolve import Sat, Unsat, check_sat, implies_all, sat_decide

Conj = tuple[Atom, ...]
Dnf = tuple[Conj, ...]

TRUE: Dnf = ((),)
FALSE: Dnf = ()


def dnf_of(atoms: Iterable[Atom]) -> Dnf:
    """The DNF with the given atoms as its single conjunction."""
    return (tuple(atoms),)


def conj_vars(c: Sequence[Atom]) -> set[str]:
    out: set[str] = set()
    for a in c:
        out |= a.vars()
    return out


def dnf_vars(d: Dnf) -> set[str]:
    out: set[str] = set()
    for c in d:
        out |= conj_vars(c)
    return out


def conj_holds(c: Sequence[Atom], env: Mapping[str, int]) -> bool:
    return all(a.holds(env) for a in c)


def dnf_holds(d: Dnf, env: Mapping[str, int]) -> bool:
    return any(conj_holds(c, env) for c in d)


def conj_sat(c: Sequence[Atom], integral: bool = True) -> bool:
    """May the conjunction be satisfiable?  ('unknown' counts as yes.)"""
    return sat_decide(c, integral=integral) != "unsat"


def conj_implies_conj(c: Sequence[Atom], d: Sequence[Atom],
                      integral: bool = True) -> bool:
    return implies_all(c, d, integral=integral)


def conj_implies_dnf(c: Sequence[Atom], d: Dnf, integral: bool = True,
                     fuel: int = 20_000) -> bool:
    """Does the conjunction entail the disjunction of conjunctions?

    Valid iff c together with the negation of every disjunct is
    unsatisfiable.  The search keeps a growing set of negated atoms and
    asks the solver for a model of it: a model that still satisfies some
    unprocessed disjunct forces a case split over that disjunct's atom
    negations, one that satisfies none is a genuine countermodel.
    Splitting only on disjuncts a model actually hits keeps the many
    irrelevant disjuncts out of the recursion.  `fuel` caps the number
    of solver calls; running out degrades to non-entailment.
    """
    if any(not disj for disj in d):
        return True  # an empty disjunct is `true`
    zeros = dict.fromkeys(sorted(conj_vars(c) | dnf_vars(d)), 0)
    budget = [fuel]

    def refuted(cons: list[Atom], remaining: tuple[Conj, ...]) -> bool:
        if budget[0] <= 0:
            return False  # out of budget: do not claim entailment
        budget[0] -= 1
        res = check_sat(cons, integral=integral)
        if isinstance(res, Unsat):
            return True
        if not isinstance(res, Sat):
            return False  # solver gave up: stay conservative
        env = {**zeros, **res.model}
        for i, disj in enumerate(remaining):
            if all(a.holds(env) for a in disj):
                rest = remaining[:i] + remaining[i + 1:]
                return all(refuted(cons + [n], rest)
                           for a in disj for n in a.negated())
        return False  # the model dodges every disjunct

    return refuted(list(c), tuple(sorted(d, key=len)))


def dnf_implies_dnf(a: Dnf, b: Dnf, integral: bool = True) -> bool:
    return all(conj_implies_dnf(c, b, integral=integral) for c in a)


def dnf_or(a: Dnf, b: Dnf) -> Dnf:
    out = list(a)
    seen = set(a)
    for c in b:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)


def dnf_and(a: Dnf, b: Dnf) -> Dnf:
    out: list[Conj] = []
    seen: set[Conj] = set()
    for ca in a:
        have = set(ca)
        for cb in b:
            c = ca + tuple(x for x in cb if x not in have)
            if c not in seen:
                seen.add(c)
                out.append(c)
    return tuple(out)


def conj_negate(c: Sequence[Atom]) -> Dnf:
    """Negation of a conjunction, as a DNF of single negated atoms."""
    out: list[Conj] = []
    for a in c:
        out.extend((n,) for n in a.negated())
    return dedupe(tuple(out))


def dnf_negate(d: Dnf) -> Dnf:
    """Full negation; grows as the product of the disjunct sizes, so keep
    inputs small (the verification layers cap their DNFs anyway)."""
    acc = TRUE
    for c in d:
        acc = dnf_and(acc, conj_negate(c))
    return acc


def dedupe(d: Dnf) -> Dnf:
    seen: set[Conj] = set()
    out: list[Conj] = []
    for c in d:
        key = tuple(sorted(set(c), key=str))
        if key not in seen:
            seen.add(key)
            out.append(c)
    return tuple(out)


def simplify_conj(c: Sequence[Atom]) -> Conj:
    """Drop duplicate and trivially true atoms (no solver calls)."""
    out: list[Atom] = []
    seen: set[Atom] = set()
    for a in c:
        if a.is_trivially_true() or a in seen:
            continue
        seen.add(a)
        out.append(a)
    return tuple(out)


def simplify_dnf(d: Dnf, integral: bool = True) -> Dnf:
    """Drop unsatisfiable disjuncts, then disjuncts entailed by another
    (kept) disjunct.  Quadratic in solver calls; meant for small DNFs."""
    live = [simplify_conj(c) for c in dedupe(d)]
    live = [c for c in live if conj_sat(c, integral=integral)]
    out: list[Conj] = []
    for i, c in enumerate(live):
        absorbed = False
        for j, other in enumerate(live):
            if i == j or (len(other), j) > (len(c), i):
                continue
            # prefer keeping the shorter disjunct; ties keep the earlier
            if conj_implies_conj(c, other, integral=integral):
                absorbed = True
                break
        if not absorbed:
            out.append(c)
    return tuple(out)
