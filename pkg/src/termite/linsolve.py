"""Exact linear arithmetic over rationals and integers, with certificates.

Everything here works on conjunctions of canonical `ir.Atom`s (``t <= 0`` /
``t = 0``) and all arithmetic is `fractions.Fraction`; no floats anywhere.

Entry points:

- `check_sat`: satisfiability with an integer (default) or rational model,
  or a `FarkasCertificate` of unsatisfiability that `check_certificate`
  can validate by pure arithmetic, or `ResourceLimit`.
- `sat_decide`: the same search as a bare decision; exhaustive
  branch-and-bound counts as an unsat decision even when no compact
  certificate was derived.
- `implies` / `implies_all`: integer entailment.
- `optimize`: exact rational simplex optimization of a linear objective.
- `eliminate`: quantifier elimination; `rational` mode is the standard
  Fourier-Motzkin shadow (exact for rationals, an over-approximation for
  integers), `integer_under` under-approximates integer projection using
  exact unit-coefficient elimination and dark-shadow gaps.
- `interpolant` / `interpolant_sequence`: Farkas interpolation from
  unsatisfiability certificates, with integer bound tightening.

Certificate shape: one rational multiplier per atom - required nonnegative
on inequality atoms, free-signed on equality atoms (an equality supports
both directions) - plus a list of derivation steps.  A Chvatal-Gomory
`CutStep` combines earlier rows with nonnegative multipliers (signed on
equalities) into a row with integer coefficients and floors its bound.  A
`ModStep` combines earlier *equality* rows into an integer equality
``a.x = c`` and introduces a fresh integer variable s with the row
``mods(a).x - m*s = mods(c)`` where ``mods`` is the symmetric residue
modulo m; every integer point of the earlier rows extends to s (take
``s = (mods(a).x - mods(c)) / m``, an integer because ``mods(t) == t``
modulo m), so the new row is sound.  The final combination of all rows
must reduce to ``0 <= negative``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor, gcd, lcm
from typing import Callable, Iterable, Optional, Sequence, Union

from .ir import Atom, LinearTerm

ZERO = Fraction(0)
ONE = Fraction(1)

SPLIT_LIMIT = 200  # branch-and-bound node budget
PIVOT_LIMIT = 200_000
CUT_ROUNDS = 4


# ---------------------------------------------------------------------------
# Results and certificates


@dataclass
class CutStep:
    """One rounding step: a nonnegative combination of the rows so far
    (atom rows first, earlier steps after) whose coefficients are integers,
    with the bound rounded down."""

    multipliers: dict[int, Fraction]
    coeffs: dict[str, Fraction]
    bound: Fraction


@dataclass
class ModStep:
    """One modular-projection step: `multipliers` combine earlier equality
    rows into an integer equality, and the step contributes the equality
    row ``mods(coeffs).x - modulus*var = mods(bound)`` over a fresh integer
    variable `var` (symmetric residues modulo `modulus`)."""

    multipliers: dict[int, Fraction]
    modulus: int
    var: str


Step = Union[CutStep, ModStep]


@dataclass
class FarkasCertificate:
    """Proof of unsatisfiability: `multipliers` combine atom rows and step
    rows (indices beyond the atom count refer to `steps`) into
    ``0 <= negative``."""

    multipliers: dict[int, Fraction]
    steps: tuple[Step, ...] = ()


@dataclass
class Sat:
    model: dict[str, Fraction]


@dataclass
class Unsat:
    certificate: FarkasCertificate


@dataclass
class ResourceLimit:
    reason: str


CheckResult = Union[Sat, Unsat, ResourceLimit]


def _atom_row(a: Atom) -> tuple[dict[str, Fraction], Fraction, bool]:
    """Canonical row view: ``coeffs . x  (<=|=)  bound``."""
    return (dict(a.term.coeffs), -a.term.const, a.is_eq)


def _combine(
    base: list[tuple[dict[str, Fraction], Fraction, bool]],
    combo: dict[int, Fraction],
) -> Optional[tuple[dict[str, Fraction], Fraction]]:
    """Weighted sum of rows; None if an index or a sign rule is violated."""
    coeffs: dict[str, Fraction] = {}
    bound = ZERO
    for i, m in combo.items():
        if not 0 <= i < len(base) or m == 0:
            if m == 0:
                continue
            return None
        c, b, is_eq = base[i]
        if m < 0 and not is_eq:
            return None
        for v, cv in c.items():
            nv = coeffs.get(v, ZERO) + m * cv
            if nv:
                coeffs[v] = nv
            else:
                coeffs.pop(v, None)
        bound += m * b
    return coeffs, bound


def _mods(t: int, m: int) -> int:
    """Symmetric residue of t modulo m, in ``(-m/2, m/2]``."""
    return t - m * ((2 * t + m) // (2 * m))


def check_certificate(atoms: Sequence[Atom], cert: FarkasCertificate) -> bool:
    """Validate a certificate by recomputing every combination."""
    base = [_atom_row(a) for a in atoms]
    seen_vars: set[str] = set()
    for c, _b, _e in base:
        seen_vars |= c.keys()
    for step in cert.steps:
        got = _combine(base, step.multipliers)
        if got is None:
            return False
        coeffs, bound = got
        if any(c.denominator != 1 for c in coeffs.values()):
            return False
        if isinstance(step, CutStep):
            fb = Fraction(floor(bound))
            if coeffs != dict(step.coeffs) or fb != step.bound:
                return False
            base.append((coeffs, fb, False))
        else:
            m = step.modulus
            if (not isinstance(m, int) or m < 1 or bound.denominator != 1
                    or step.var in seen_vars
                    or any(not base[i][2] for i, mu in step.multipliers.items() if mu)):
                return False
            row = {v: Fraction(_mods(int(c), m))
                   for v, c in coeffs.items() if _mods(int(c), m)}
            row[step.var] = Fraction(-m)
            base.append((row, Fraction(_mods(int(bound), m)), True))
        seen_vars |= base[-1][0].keys()
    got = _combine(base, cert.multipliers)
    return got is not None and not got[0] and got[1] < 0


# ---------------------------------------------------------------------------
# Bounded-variable simplex with provenance-tracked bounds
#
# Every variable (structural or slack) carries optional lower/upper bounds.
# A bound may carry a "source": a combination of base rows (atoms + cuts)
# deriving `x <= hi` resp. `-x <= -lo`; conflicts then assemble Farkas
# combinations.  Bounds without sources (branch-and-bound splits) still
# yield sound unsat *decisions*, just no certificate.


class _PivotLimit(Exception):
    pass


def _acc(dst: dict[int, Fraction], src: dict[int, Fraction], w: Fraction) -> None:
    for k, m in src.items():
        nv = dst.get(k, ZERO) + w * m
        if nv:
            dst[k] = nv
        else:
            dst.pop(k, None)


class _Simplex:
    def __init__(self) -> None:
        self.lo: list[Optional[Fraction]] = []
        self.hi: list[Optional[Fraction]] = []
        self.lo_src: list[Optional[dict[int, Fraction]]] = []
        self.hi_src: list[Optional[dict[int, Fraction]]] = []
        self.beta: list[Fraction] = []
        self.rows: dict[int, dict[int, Fraction]] = {}  # basic -> row
        self.cols: dict[int, set[int]] = {}  # nonbasic -> basics using it
        self.pivots = 0

    # -- construction

    def new_var(self) -> int:
        i = len(self.beta)
        self.lo.append(None)
        self.hi.append(None)
        self.lo_src.append(None)
        self.hi_src.append(None)
        self.beta.append(ZERO)
        self.cols[i] = set()
        return i

    def add_row(
        self,
        coeffs: dict[int, Fraction],
        lo: Optional[Fraction],
        hi: Optional[Fraction],
        lo_src: Optional[dict[int, Fraction]],
        hi_src: Optional[dict[int, Fraction]],
    ) -> int:
        """Add slack s = coeffs.x with bounds; works mid-solve."""
        expr: dict[int, Fraction] = {}
        for v, c in coeffs.items():
            if v in self.rows:  # v is basic: substitute its row
                for u, cu in self.rows[v].items():
                    nv = expr.get(u, ZERO) + c * cu
                    if nv:
                        expr[u] = nv
                    else:
                        del expr[u]
            else:
                nv = expr.get(v, ZERO) + c
                if nv:
                    expr[v] = nv
                else:
                    del expr[v]
        s = self.new_var()
        self.lo[s], self.hi[s] = lo, hi
        self.lo_src[s], self.hi_src[s] = lo_src, hi_src
        self.rows[s] = expr
        for v in expr:
            self.cols[v].add(s)
        self.beta[s] = sum((c * self.beta[v] for v, c in expr.items()), ZERO)
        return s

    def drop_row(self, s: int) -> None:
        """Remove a basic variable that no other row references."""
        row = self.rows.pop(s)
        for v in row:
            self.cols[v].discard(s)
        assert not self.cols.get(s)

    # -- bound assertion (branch and bound); returns an undo token

    def push_bound(self, v: int, lower: bool, value: Fraction):
        if lower:
            token = (v, True, self.lo[v], self.lo_src[v])
            if self.lo[v] is None or value > self.lo[v]:
                self.lo[v] = value
                self.lo_src[v] = None
                if v not in self.rows and self.beta[v] < value:
                    self.update(v, value)
        else:
            token = (v, False, self.hi[v], self.hi_src[v])
            if self.hi[v] is None or value < self.hi[v]:
                self.hi[v] = value
                self.hi_src[v] = None
                if v not in self.rows and self.beta[v] > value:
                    self.update(v, value)
        return token

    def pop_bound(self, token) -> None:
        v, lower, old, old_src = token
        if lower:
            self.lo[v], self.lo_src[v] = old, old_src
        else:
            self.hi[v], self.hi_src[v] = old, old_src

    # -- core operations

    def update(self, v: int, value: Fraction) -> None:
        delta = value - self.beta[v]
        if not delta:
            return
        for b in self.cols[v]:
            self.beta[b] += self.rows[b][v] * delta
        self.beta[v] = value

    def pivot(self, b: int, n: int) -> None:
        self.pivots += 1
        if self.pivots > PIVOT_LIMIT:
            raise _PivotLimit()
        brow = self.rows.pop(b)
        for v in brow:
            self.cols[v].discard(b)
        a = brow.pop(n)
        inv = ONE / a
        nrow = {b: inv}
        for v, c in brow.items():
            nrow[v] = -c * inv
        self.rows[n] = nrow
        for v in nrow:
            self.cols[v].add(n)
        for b2 in list(self.cols[n]):
            if b2 == n:
                continue
            row2 = self.rows[b2]
            c2 = row2.pop(n)
            self.cols[n].discard(b2)
            for v, cv in nrow.items():
                nv = row2.get(v, ZERO) + c2 * cv
                if nv:
                    row2[v] = nv
                    self.cols[v].add(b2)
                else:
                    row2.pop(v, None)
                    self.cols[v].discard(b2)

    def pivot_update(self, b: int, n: int, target: Fraction) -> None:
        a = self.rows[b][n]
        theta = (target - self.beta[b]) / a
        self.beta[n] += theta
        self.beta[b] = target
        for b2 in self.cols[n]:
            if b2 != b:
                self.beta[b2] += self.rows[b2][n] * theta
        self.pivot(b, n)

    # -- satisfiability

    def solve(self):
        """('sat', None) or ('unsat', base_combo_or_None)."""
        # inconsistent bound pairs first (possible after branching)
        for v in range(len(self.beta)):
            lo, hi = self.lo[v], self.hi[v]
            if lo is not None and hi is not None and lo > hi:
                if self.lo_src[v] is not None and self.hi_src[v] is not None:
                    combo: dict[int, Fraction] = {}
                    _acc(combo, self.lo_src[v], ONE)
                    _acc(combo, self.hi_src[v], ONE)
                    return ("unsat", combo)
                return ("unsat", None)
        while True:
            viol = None
            for b in sorted(self.rows):
                if self.lo[b] is not None and self.beta[b] < self.lo[b]:
                    viol = (b, True)
                    break
                if self.hi[b] is not None and self.beta[b] > self.hi[b]:
                    viol = (b, False)
                    break
            if viol is None:
                return ("sat", None)
            b, need_up = viol
            target = self.lo[b] if need_up else self.hi[b]
            row = self.rows[b]
            cand = None
            for n in sorted(row):
                a = row[n]
                if need_up:
                    ok = (a > 0 and (self.hi[n] is None or self.beta[n] < self.hi[n])) or (
                        a < 0 and (self.lo[n] is None or self.beta[n] > self.lo[n])
                    )
                else:
                    ok = (a > 0 and (self.lo[n] is None or self.beta[n] > self.lo[n])) or (
                        a < 0 and (self.hi[n] is None or self.beta[n] < self.hi[n])
                    )
                if ok:
                    cand = n
                    break
            if cand is None:
                return ("unsat", self._conflict(b, need_up, row))
            self.pivot_update(b, cand, target)

    def _conflict(self, b: int, need_up: bool, row: dict[int, Fraction]):
        combo: dict[int, Fraction] = {}
        src_b = self.lo_src[b] if need_up else self.hi_src[b]
        if src_b is None:
            return None
        _acc(combo, src_b, ONE)
        for n, a in row.items():
            if need_up:
                src = self.hi_src[n] if a > 0 else self.lo_src[n]
            else:
                src = self.lo_src[n] if a > 0 else self.hi_src[n]
            if src is None:
                return None
            _acc(combo, src, abs(a))
        return combo

    # -- optimization (assumes a feasible state; z is a basic objective var)

    def optimize(self, z: int, maximize: bool):
        """('optimal', value, combo_or_None) or ('unbounded', None, None)."""
        while True:
            row = self.rows[z]
            cand = None
            cdir = 0
            for n in sorted(row):
                a = row[n]
                up = (a > 0) == maximize
                if up and (self.hi[n] is None or self.beta[n] < self.hi[n]):
                    cand, cdir = n, 1
                    break
                if not up and (self.lo[n] is None or self.beta[n] > self.lo[n]):
                    cand, cdir = n, -1
                    break
            if cand is None:
                combo: Optional[dict[int, Fraction]] = {}
                for n, a in row.items():
                    if maximize:
                        src = self.hi_src[n] if a > 0 else self.lo_src[n]
                    else:
                        src = self.lo_src[n] if a > 0 else self.hi_src[n]
                    if src is None:
                        combo = None
                        break
                    _acc(combo, src, abs(a))
                return ("optimal", self.beta[z], combo)
            # ratio test: how far can cand move in direction cdir?
            best = None  # (theta, blocker_or_None, target)
            if cdir > 0 and self.hi[cand] is not None:
                best = (self.hi[cand] - self.beta[cand], None, self.hi[cand])
            if cdir < 0 and self.lo[cand] is not None:
                best = (self.beta[cand] - self.lo[cand], None, self.lo[cand])
            for b2 in sorted(self.cols[cand]):
                if b2 == z:
                    continue
                c = self.rows[b2][cand]
                delta = c * cdir
                if delta > 0 and self.hi[b2] is not None:
                    t = (self.hi[b2] - self.beta[b2]) / delta
                    tgt = self.hi[b2]
                elif delta < 0 and self.lo[b2] is not None:
                    t = (self.beta[b2] - self.lo[b2]) / (-delta)
                    tgt = self.lo[b2]
                else:
                    continue
                if best is None or t < best[0] or (t == best[0] and best[1] is not None and b2 < best[1]):
                    best = (t, b2, tgt)
            if best is None:
                return ("unbounded", None, None)
            theta, blocker, tgt = best
            if blocker is None:
                self.update(cand, self.beta[cand] + cdir * theta)
            else:
                self.pivot_update(blocker, cand, tgt)


# ---------------------------------------------------------------------------
# Working rows, presolve, and the solving engine


class _WRow:
    __slots__ = ("coeffs", "lo", "hi", "lo_src", "hi_src", "reductions")

    def __init__(self, coeffs, lo, hi, lo_src, hi_src):
        self.coeffs: dict[str, Fraction] = coeffs
        self.lo: Optional[Fraction] = lo
        self.hi: Optional[Fraction] = hi
        self.lo_src: Optional[dict[int, Fraction]] = lo_src
        self.hi_src: Optional[dict[int, Fraction]] = hi_src
        self.reductions = 0

    def is_eq(self) -> bool:
        return self.lo is not None and self.hi is not None and self.lo == self.hi


class _Unsat(Exception):
    def __init__(self, combo: Optional[dict[int, Fraction]]):
        self.combo = combo


class _Engine:
    """Shared machinery behind check_sat / sat_decide / optimize."""

    def __init__(self, atoms: Sequence[Atom], integral: bool, split_limit: int = SPLIT_LIMIT):
        self.atoms = list(atoms)
        self.integral = integral
        self.split_limit = split_limit
        self.base: list[tuple[dict[str, Fraction], Fraction, bool]] = [
            _atom_row(a) for a in self.atoms
        ]
        self.steps: dict[int, Step] = {}
        self.subs: list[tuple[str, dict[str, Fraction], Fraction, dict[int, Fraction]]] = []
        self.wrows: list[_WRow] = []
        self.splx: Optional[_Simplex] = None
        self.var_ids: dict[str, int] = {}
        self.id_vars: dict[int, str] = {}
        self.row_slack: list[int] = []
        self.splits = 0
        self.n_aux = 0
        self.input_vars: set[str] = set()
        for a in self.atoms:
            self.input_vars |= a.vars()

    # -- base-row bookkeeping

    def _add_cut(self, multipliers: dict[int, Fraction]) -> int:
        got = _combine(self.base, multipliers)
        assert got is not None, "internal: invalid cut combination"
        coeffs, bound = got
        assert all(c.denominator == 1 for c in coeffs.values())
        fb = Fraction(floor(bound))
        idx = len(self.base)
        self.steps[idx] = CutStep(dict(multipliers), dict(coeffs), fb)
        self.base.append((coeffs, fb, False))
        return idx

    def _add_mod(self, multipliers: dict[int, Fraction], modulus: int,
                 var: str) -> tuple[int, dict[str, Fraction], Fraction]:
        got = _combine(self.base, multipliers)
        assert got is not None, "internal: invalid modular combination"
        coeffs, bound = got
        assert all(c.denominator == 1 for c in coeffs.values())
        assert bound.denominator == 1
        row = {v: Fraction(_mods(int(c), modulus))
               for v, c in coeffs.items() if _mods(int(c), modulus)}
        row[var] = Fraction(-modulus)
        rb = Fraction(_mods(int(bound), modulus))
        idx = len(self.base)
        self.steps[idx] = ModStep(dict(multipliers), modulus, var)
        self.base.append((row, rb, True))
        return idx, row, rb

    # -- presolve

    def _build_wrows(self) -> None:
        for i, a in enumerate(self.atoms):
            coeffs, bound, is_eq = self.base[i]
            coeffs = dict(coeffs)
            if is_eq:
                self.wrows.append(_WRow(coeffs, bound, bound, {i: -ONE}, {i: ONE}))
            else:
                self.wrows.append(_WRow(coeffs, None, bound, None, {i: ONE}))

    def _row_trivial(self, r: _WRow) -> Optional[bool]:
        """True: drop; False: keep; raises _Unsat on contradiction."""
        if r.coeffs:
            return False
        if r.hi is not None and r.hi < 0:
            raise _Unsat(dict(r.hi_src) if r.hi_src is not None else None)
        if r.lo is not None and r.lo > 0:
            combo = None
            if r.lo_src is not None:
                combo = {}
                _acc(combo, r.lo_src, ONE)
            raise _Unsat(combo)
        return True

    def _substitute(self, r: _WRow, v: str, expr_c: dict[str, Fraction],
                    expr_k: Fraction, e_combo: dict[int, Fraction]) -> None:
        c = r.coeffs.pop(v, ZERO)
        if not c:
            return
        for u, cu in expr_c.items():
            nv = r.coeffs.get(u, ZERO) + c * cu
            if nv:
                r.coeffs[u] = nv
            else:
                r.coeffs.pop(u, None)
        if r.hi is not None:
            r.hi -= c * expr_k
            if r.hi_src is not None:
                _acc(r.hi_src, e_combo, -c)
        if r.lo is not None:
            r.lo -= c * expr_k
            if r.lo_src is not None:
                _acc(r.lo_src, e_combo, c)

    def _eq_ints(self, r: _WRow):
        """Integer-scaled view of an equality row: (coeffs, gcd, bound)."""
        scale = Fraction(lcm(*(c.denominator for c in r.coeffs.values()),
                             r.hi.denominator))
        ints = {v: int(c * scale) for v, c in r.coeffs.items()}
        return ints, gcd(*ints.values()), int(r.hi * scale), scale

    def _presolve(self) -> None:
        """Eliminate equalities by substitution, detect gcd-infeasible
        equalities, drop trivial rows.  In integer mode, substitutions must
        be exact; coefficient reduction with auxiliary variables is used
        only when no equality admits an exact pivot, so that infeasibility
        detected earlier keeps certificate-expressible provenance."""
        ineqs: list[_WRow] = []
        eqs: list[_WRow] = []
        for r in self.wrows:
            if self._row_trivial(r):
                continue
            (eqs if r.is_eq() else ineqs).append(r)

        def do_substitute(r: _WRow, pivot: str) -> None:
            a = r.coeffs.pop(pivot)
            expr_c = {u: -cu / a for u, cu in r.coeffs.items()}
            expr_k = r.hi / a
            e_combo: dict[int, Fraction] = {}
            _acc(e_combo, r.hi_src, ONE / a)
            self.subs.append((pivot, expr_c, expr_k, e_combo))
            for other in eqs:
                if other is not r:
                    self._substitute(other, pivot, expr_c, expr_k, e_combo)
            for other in ineqs:
                self._substitute(other, pivot, expr_c, expr_k, e_combo)

        while eqs:
            progressed = False
            # pass 1: trivial rows, gcd infeasibility, and exact pivots
            for r in list(eqs):
                if self._row_trivial(r):
                    eqs.remove(r)
                    progressed = True
                    continue
                ints, g, b, scale = self._eq_ints(r)
                if self.integral and b % g != 0:
                    # g does not divide the bound: two cuts close the system
                    lam = scale / g
                    c1 = self._add_cut({k: m * lam for k, m in r.hi_src.items()})
                    c2 = self._add_cut({k: -m * lam for k, m in r.hi_src.items()})
                    raise _Unsat({c1: ONE, c2: ONE})
                pivot = None
                if self.integral:
                    # a coefficient of magnitude g divides every other
                    # coefficient and the bound: the substitution is exact
                    for v in sorted(ints):
                        if abs(ints[v]) == g:
                            pivot = v
                            break
                else:
                    pivot = min(r.coeffs)
                if pivot is not None:
                    do_substitute(r, pivot)
                    eqs.remove(r)
                    progressed = True
            if progressed:
                ineqs = [r2 for r2 in ineqs if not self._row_trivial(r2)]
                continue
            # pass 2: no exact pivot anywhere; reduce one equality
            r = eqs[0]
            if r.reductions >= 60:
                eqs.remove(r)
                ineqs.append(r)  # give up on exact elimination of this row
                continue
            r.reductions += 1
            ints, g, b, scale = self._eq_ints(r)
            self._reduce_equality(r, ints, g, b, scale,
                                  [e for e in eqs if e is not r], ineqs)
        self.wrows = [r for r in ineqs if not self._row_trivial(r)]

    def _reduce_equality(self, r: _WRow, ints: dict[str, int], g: int,
                         b_scaled: int, scale: Fraction,
                         rest: list[_WRow], out: list[_WRow]) -> None:
        """One coefficient-reduction step for an integer equality with no
        unit pivot: taking the equation modulo m = |a_k| + 1 (a_k a
        smallest coefficient) yields an equation with a fresh integer
        variable in which x_k has coefficient -sign(a_k); substituting x_k
        away shrinks the remaining coefficients.  The modulo equation is
        recorded as a `ModStep` so certificates can reference it."""
        a = {v: iv // g for v, iv in ints.items()}
        k = min(a, key=lambda v: (abs(a[v]), v))
        m = abs(a[k]) + 1
        sigma = f".aux{self.n_aux}"
        self.n_aux += 1
        lam = scale / g
        e_idx, e_coeffs, e_bound = self._add_mod(
            {i: mu * lam for i, mu in r.hi_src.items()}, m, sigma)
        alpha = e_coeffs[k]  # -sign(a_k), magnitude 1
        expr_c = {u: -cu / alpha for u, cu in e_coeffs.items() if u != k}
        expr_k = e_bound / alpha
        e_combo = {e_idx: ONE / alpha}
        self.subs.append((k, expr_c, expr_k, e_combo))
        self._substitute(r, k, expr_c, expr_k, e_combo)
        for other in rest:
            self._substitute(other, k, expr_c, expr_k, e_combo)
        for other in out:
            self._substitute(other, k, expr_c, expr_k, e_combo)

    def _gcd_tighten(self) -> None:
        """Per-row Chvatal-Gomory tightening (integer mode only)."""
        extra: list[_WRow] = []
        for r in self.wrows:
            if not r.coeffs:
                continue
            denoms = [c.denominator for c in r.coeffs.values()]
            scale = Fraction(lcm(*denoms))
            ints = {v: int(c * scale) for v, c in r.coeffs.items()}
            g = gcd(*ints.values())
            lam = scale / g
            new_coeffs = {v: Fraction(c // g) for v, c in ints.items()}
            if r.hi is not None and r.hi_src is not None:
                b = r.hi * lam
                if b.denominator != 1:
                    ci = self._add_cut({k: m * lam for k, m in r.hi_src.items()})
                    extra.append(_WRow(dict(new_coeffs), None,
                                       self.base[ci][1], None, {ci: ONE}))
            if r.lo is not None and r.lo_src is not None:
                b = -r.lo * lam
                if b.denominator != 1:
                    ci = self._add_cut({k: m * lam for k, m in r.lo_src.items()})
                    extra.append(_WRow({v: -c for v, c in new_coeffs.items()}, None,
                                       self.base[ci][1], None, {ci: ONE}))
        self.wrows.extend(extra)

    # -- simplex construction

    def _var_id(self, v: str) -> int:
        if v not in self.var_ids:
            assert self.splx is not None
            i = self.splx.new_var()
            self.var_ids[v] = i
            self.id_vars[i] = v
        return self.var_ids[v]

    def _build_simplex(self) -> None:
        self.splx = _Simplex()
        for v in sorted({v for r in self.wrows for v in r.coeffs}):
            self._var_id(v)
        for r in self.wrows:
            coeffs = {self._var_id(v): c for v, c in r.coeffs.items()}
            s = self.splx.add_row(coeffs, r.lo, r.hi, r.lo_src, r.hi_src)
            self.row_slack.append(s)

    # -- solving

    def _solve_rational(self):
        status, combo = self.splx.solve()
        if status == "unsat":
            raise _Unsat(combo)

    def _model_if_valid(self, structural: dict[str, Fraction]
                        ) -> Optional[dict[str, Fraction]]:
        model = self._assemble_model(structural)
        if any(val.denominator != 1 for val in model.values()):
            return None
        if all(a.holds(model) for a in self.atoms):
            return model
        return None

    def _branch_and_bound(self) -> Optional[dict[str, Fraction]]:
        """Integer model search (iterative depth-first).  Returns a full
        input model or None when the tree closed; raises _PivotLimit on
        the split budget."""
        splx = self.splx
        struct_ids = sorted(self.id_vars)
        half = Fraction(1, 2)

        def frac_var() -> Optional[int]:
            for v in struct_ids:
                if splx.beta[v].denominator != 1:
                    return v
            return None

        # each frame: [var, bound-token, untried sibling branches]
        stack: list[list] = []
        try:
            while True:
                feasible = True
                try:
                    self._solve_rational()
                except _Unsat:
                    feasible = False
                if feasible:
                    v = frac_var()
                    if v is None:
                        return self._assemble_model(
                            {self.id_vars[u]: splx.beta[u] for u in struct_ids})
                    # the rounded vertex is often already a model
                    got = self._model_if_valid(
                        {self.id_vars[u]: Fraction(floor(splx.beta[u] + half))
                         for u in struct_ids})
                    if got is not None:
                        return got
                    self.splits += 1
                    if self.splits > self.split_limit:
                        raise _PivotLimit()
                    f = Fraction(floor(splx.beta[v]))
                    branches = [(False, f), (True, f + 1)]
                    if splx.beta[v] - f >= half:  # nearer child first
                        branches.reverse()
                    lower, value = branches.pop(0)
                    stack.append([v, splx.push_bound(v, lower, value), branches])
                    continue
                # infeasible: backtrack to the deepest untried sibling
                while stack:
                    v, token, alts = stack[-1]
                    splx.pop_bound(token)
                    if alts:
                        lower, value = alts.pop(0)
                        stack[-1][1] = splx.push_bound(v, lower, value)
                        break
                    stack.pop()
                else:
                    return None
        finally:
            for _v, token, _alts in reversed(stack):
                splx.pop_bound(token)

    def _boxed_model_search(self) -> Optional[dict[str, Fraction]]:
        """Budget fallback: redo the model search inside growing coordinate
        boxes, whose branch trees are finite.  Only a found model counts; a
        closed boxed tree proves nothing about the unbounded system."""
        splx = self.splx
        for width in (8, 64, 512):
            w = Fraction(width)
            tokens = [splx.push_bound(v, lower, -w if lower else w)
                      for v in sorted(self.id_vars) for lower in (True, False)]
            self.splits = 0
            try:
                got = self._branch_and_bound()
            except _PivotLimit:
                got = None
            finally:
                for t in reversed(tokens):
                    splx.pop_bound(t)
            if got is not None:
                return got
        return None

    def _cut_refutation(self) -> tuple[str, Optional[dict[int, Fraction]]]:
        """Derive variable-bound cuts until the rational relaxation itself
        is infeasible.  Returns ('refuted', combo) on success, ('progress',
        None) if cuts were added but the relaxation stayed feasible, or
        ('stuck', None)."""
        splx = self.splx
        any_added = False
        for _ in range(CUT_ROUNDS):
            try:
                self._solve_rational()
            except _Unsat as u:
                return ("refuted", u.combo)
            added = False
            for vid in sorted(self.id_vars):
                z = splx.add_row({vid: ONE}, None, None, None, None)
                unsat_combo = None
                for maximize in (True, False):
                    try:
                        self._solve_rational()
                    except _Unsat as u:
                        unsat_combo = u.combo
                        break
                    status, value, combo = splx.optimize(z, maximize)
                    if status != "optimal" or combo is None or value.denominator == 1:
                        continue
                    # combo derives x <= value (resp. -x <= -value); floor it
                    sign = ONE if maximize else -ONE
                    ci = self._add_cut(combo)
                    splx.add_row({vid: sign}, None, self.base[ci][1], None, {ci: ONE})
                    added = any_added = True
                if z in splx.rows:
                    splx.drop_row(z)
                if unsat_combo is not None:
                    return ("refuted", unsat_combo)
            if not added:
                break
        return ("progress" if any_added else "stuck", None)

    # -- model assembly

    def _assemble_model(self, structural: dict[str, Fraction]) -> dict[str, Fraction]:
        model = {v: ZERO for v in self.input_vars}
        model.update(structural)
        for v, expr_c, expr_k, _combo in reversed(self.subs):
            val = expr_k
            for u, cu in expr_c.items():
                val += cu * model.get(u, ZERO)
            model[v] = val
        return {v: model[v] for v in self.input_vars}

    def _structural_model(self) -> dict[str, Fraction]:
        return {name: self.splx.beta[vid] for name, vid in self.var_ids.items()}

    def _certificate(self, combo: dict[int, Fraction]) -> Optional[FarkasCertificate]:
        """Build a public certificate from a base-row combination, keeping
        only the steps the final combination transitively references."""
        natoms = len(self.atoms)
        needed: set[int] = set()
        stack = [i for i, m in combo.items() if m and i >= natoms]
        while stack:
            i = stack.pop()
            if i in needed:
                continue
            needed.add(i)
            stack.extend(j for j, mu in self.steps[i].multipliers.items()
                         if mu and j >= natoms and j not in needed)
        order = sorted(needed)
        remap = {i: natoms + pos for pos, i in enumerate(order)}

        def translate(d: dict[int, Fraction]) -> dict[int, Fraction]:
            return {remap.get(i, i): m for i, m in d.items() if m}

        out: list[Step] = []
        for i in order:
            s = self.steps[i]
            if isinstance(s, CutStep):
                out.append(CutStep(translate(s.multipliers), s.coeffs, s.bound))
            else:
                out.append(ModStep(translate(s.multipliers), s.modulus, s.var))
        cert = FarkasCertificate(translate(combo), tuple(out))
        if not check_certificate(self.atoms, cert):
            return None
        return cert

    # -- main entry

    def run(self, need_cert: bool):
        """'sat', model | 'unsat', cert_or_None | 'limit', reason."""
        def unsat_result(combo: Optional[dict[int, Fraction]]):
            cert = self._certificate(combo) if combo is not None else None
            if cert is not None:
                return ("unsat", cert)
            if need_cert:
                return ("limit", "infeasibility established but not certified")
            return ("unsat", None)

        try:
            self._build_wrows()
            self._presolve()
            if self.integral:
                self._gcd_tighten()
            self._build_simplex()
            self._solve_rational()
        except _Unsat as u:
            return unsat_result(u.combo)
        except _PivotLimit:
            return ("limit", "pivot budget exceeded")

        if not self.integral:
            return ("sat", self._assemble_model(self._structural_model()))

        for _round in range(3):
            try:
                model = self._branch_and_bound()
            except _PivotLimit:
                # budget ran out with the tree still open: look for a model
                # in bounded boxes, else tighten the relaxation and retry
                model = self._boxed_model_search()
                if model is not None:
                    return ("sat", model)
                try:
                    status, combo = self._cut_refutation()
                except _PivotLimit:
                    return ("limit", "pivot budget exceeded")
                if status == "refuted":
                    return unsat_result(combo)
                if status == "stuck":
                    return ("limit", "branch-and-bound budget exceeded")
                self.splits = 0
                continue
            if model is not None:
                return ("sat", model)
            # tree closed: integer-unsat; try to certify with cuts
            try:
                _status, combo = self._cut_refutation()
            except _PivotLimit:
                combo = None
            return unsat_result(combo)
        return ("limit", "branch-and-bound budget exceeded")


# ---------------------------------------------------------------------------
# Public API


def check_sat(atoms: Iterable[Atom], integral: bool = True,
              split_limit: int = SPLIT_LIMIT) -> CheckResult:
    """Satisfiability of a conjunction.  `integral` asks for an integer
    model; unsatisfiability always comes with a checkable certificate
    (otherwise `ResourceLimit` is returned)."""
    atoms = list(atoms)
    eng = _Engine(atoms, integral, split_limit)
    status, payload = eng.run(need_cert=True)
    if status == "sat":
        model = payload
        for a in atoms:
            assert a.holds(model), "internal: model fails an atom"
        if integral:
            assert all(v.denominator == 1 for v in model.values())
        return Sat(model)
    if status == "unsat":
        return Unsat(payload)
    return ResourceLimit(payload)


def sat_decide(atoms: Iterable[Atom], integral: bool = True,
               split_limit: int = SPLIT_LIMIT) -> str:
    """'sat' | 'unsat' | 'unknown'.  Exhausted branch-and-bound counts as
    an unsat decision even without a compact certificate."""
    eng = _Engine(list(atoms), integral, split_limit)
    status, _payload = eng.run(need_cert=False)
    return {"sat": "sat", "unsat": "unsat", "limit": "unknown"}[status]


def implies(premises: Iterable[Atom], conclusion: Atom, integral: bool = True) -> bool:
    """Entailment over the integers (conservative: unknown counts as no)."""
    premises = list(premises)
    if conclusion.is_trivially_true():
        return True
    for neg in conclusion.negated():
        if sat_decide(premises + [neg], integral=integral) != "unsat":
            return False
    return True


def implies_all(premises: Iterable[Atom], conclusions: Iterable[Atom],
                integral: bool = True) -> bool:
    premises = list(premises)
    return all(implies(premises, c, integral=integral) for c in conclusions)


@dataclass
class OptResult:
    status: str  # 'optimal' | 'unbounded' | 'infeasible' | 'limit'
    value: Optional[Fraction] = None
    model: Optional[dict[str, Fraction]] = None


def optimize(atoms: Iterable[Atom], objective: LinearTerm,
             maximize: bool = True) -> OptResult:
    """Exact optimization of a linear objective over the rational relaxation
    of a conjunction of atoms."""
    atoms = list(atoms)
    eng = _Engine(atoms, integral=False)
    try:
        eng._build_wrows()
        eng._presolve()
        eng._build_simplex()
        eng._solve_rational()
    except _Unsat:
        return OptResult("infeasible")
    except _PivotLimit:
        return OptResult("limit")
    # push the objective through the presolve substitutions
    obj_coeffs = dict(objective.coeffs)
    obj_const = objective.const
    for v, expr_c, expr_k, _combo in eng.subs:
        c = obj_coeffs.pop(v, ZERO)
        if not c:
            continue
        for u, cu in expr_c.items():
            nv = obj_coeffs.get(u, ZERO) + c * cu
            if nv:
                obj_coeffs[u] = nv
            else:
                obj_coeffs.pop(u, None)
        obj_const += c * expr_k
    splx = eng.splx
    row = {eng._var_id(v): c for v, c in obj_coeffs.items()}
    if not row:
        mdl = eng._assemble_model(eng._structural_model())
        return OptResult("optimal", obj_const, mdl)
    z = splx.add_row(row, None, None, None, None)
    try:
        status, value, _combo = splx.optimize(z, maximize)
    except _PivotLimit:
        return OptResult("limit")
    if status == "unbounded":
        return OptResult("unbounded")
    mdl = eng._assemble_model(eng._structural_model())
    result_value = value + obj_const
    return OptResult("optimal", result_value, mdl)


# ---------------------------------------------------------------------------
# Quantifier elimination


def _rows_of_atoms(atoms: Iterable[Atom]) -> list[tuple[dict[str, Fraction], Fraction, bool]]:
    return [_atom_row(a) for a in atoms]


def _row_atom(coeffs: dict[str, Fraction], bound: Fraction, is_eq: bool = False) -> Atom:
    return Atom(LinearTerm(coeffs, -bound), is_eq)


def _int_scale_row(coeffs: dict[str, Fraction], bound: Fraction):
    denoms = [c.denominator for c in coeffs.values()] + [bound.denominator]
    k = Fraction(lcm(*denoms))
    return {v: c * k for v, c in coeffs.items()}, bound * k


def eliminate(atoms: Iterable[Atom], drop: Iterable[str],
              mode: str = "rational") -> list[Atom]:
    """Project a conjunction onto the remaining variables.

    mode='rational': Fourier-Motzkin; the result is exactly the rational
    shadow (an over-approximation of the integer projection, and exact for
    equality substitutions).

    mode='integer_under': under-approximates the integer projection - unit
    coefficient pairs are combined exactly, other pairs use the dark-shadow
    gap condition, and non-unit equalities degrade to their inequality
    pair.  Every integer model of the result extends to an integer model of
    the input.
    """
    assert mode in ("rational", "integer_under")
    rows = _rows_of_atoms(atoms)
    todo = [v for v in dict.fromkeys(drop)]
    while todo:
        # prefer a variable with an equality occurrence we may substitute
        pick = None
        for v in todo:
            for coeffs, bound, is_eq in rows:
                if not is_eq or v not in coeffs:
                    continue
                if mode == "rational":
                    pick = (v, (coeffs, bound))
                    break
                ic, ib = _int_scale_row(coeffs, bound)
                ai = int(ic[v])
                if all(int(c) % ai == 0 for c in ic.values()) and int(ib) % ai == 0:
                    pick = (v, (coeffs, bound))
                    break
            if pick:
                break
        if pick:
            v, (coeffs, bound) = pick
            a = coeffs[v]
            expr_c = {u: -cu / a for u, cu in coeffs.items() if u != v}
            expr_k = bound / a
            nrows = []
            for c2, b2, e2 in rows:
                if (c2, b2) == (coeffs, bound) and e2:
                    continue
                c = c2.get(v, ZERO)
                if not c:
                    nrows.append((c2, b2, e2))
                    continue
                nc = {u: cu for u, cu in c2.items() if u != v}
                for u, cu in expr_c.items():
                    nv = nc.get(u, ZERO) + c * cu
                    if nv:
                        nc[u] = nv
                    else:
                        nc.pop(u, None)
                nrows.append((nc, b2 - c * expr_k, e2))
            rows = nrows
        else:
            v = min(todo, key=lambda u: _fm_cost(rows, u))
            rows = _fm_step(rows, v, mode)
        todo.remove(v)
        # early exit on a constant contradiction
        for coeffs, bound, is_eq in rows:
            if not coeffs and (bound < 0 or (is_eq and bound != 0)):
                return [Atom(LinearTerm.of(1))]
    out: list[Atom] = []
    seen = set()
    for coeffs, bound, is_eq in rows:
        a = _row_atom(coeffs, bound, is_eq)
        if a.is_trivially_true() or a in seen:
            continue
        seen.add(a)
        out.append(a)
    return out


def _fm_cost(rows, v: str) -> int:
    lo = hi = 0
    for coeffs, _b, is_eq in rows:
        c = coeffs.get(v, ZERO)
        if not c:
            continue
        if is_eq:
            lo += 1
            hi += 1
        elif c > 0:
            hi += 1
        else:
            lo += 1
    return lo * hi


def _fm_step(rows, v: str, mode: str):
    lowers, uppers, rest = [], [], []
    for coeffs, bound, is_eq in rows:
        c = coeffs.get(v, ZERO)
        if not c:
            rest.append((coeffs, bound, is_eq))
            continue
        variants = [(dict(coeffs), bound)]
        if is_eq:  # a kept equality acts as both directions
            variants.append(({u: -cu for u, cu in coeffs.items()}, -bound))
        for vc, vb in variants:
            if vc[v] > 0:
                uppers.append((vc, vb))
            else:
                lowers.append((vc, vb))
    out = list(rest)
    for lc, lb in lowers:
        for uc, ub in uppers:
            if mode == "integer_under":
                lci, lbi = _int_scale_row(lc, lb)
                uci, ubi = _int_scale_row(uc, ub)
                k1 = -lci[v]  # positive
                k2 = uci[v]  # positive
                nc: dict[str, Fraction] = {}
                for u, cu in lci.items():
                    if u != v:
                        nc[u] = nc.get(u, ZERO) + k2 * cu
                for u, cu in uci.items():
                    if u != v:
                        nv = nc.get(u, ZERO) + k1 * cu
                        if nv:
                            nc[u] = nv
                        else:
                            nc.pop(u, None)
                nb = k2 * lbi + k1 * ubi
                if k1 > 1 and k2 > 1:
                    nb -= (k1 - 1) * (k2 - 1)  # dark shadow
            else:
                k1 = -lc[v]
                k2 = uc[v]
                nc = {}
                for u, cu in lc.items():
                    if u != v:
                        nc[u] = nc.get(u, ZERO) + k2 * cu
                for u, cu in uc.items():
                    if u != v:
                        nv = nc.get(u, ZERO) + k1 * cu
                        if nv:
                            nc[u] = nv
                        else:
                            nc.pop(u, None)
                nb = k2 * lb + k1 * ub
            nc = {u: c for u, c in nc.items() if c}
            out.append((nc, nb, False))
    return out


# ---------------------------------------------------------------------------
# Interpolation


def _step_rows(
    base: list[tuple[dict[str, Fraction], Fraction, bool]],
    steps: Sequence[Step],
) -> list[tuple[dict[str, Fraction], Fraction, bool]]:
    """Recompute the row contributed by each certificate step."""
    rows = list(base)
    out: list[tuple[dict[str, Fraction], Fraction, bool]] = []
    for step in steps:
        got = _combine(rows, step.multipliers)
        assert got is not None, "internal: malformed certificate step"
        coeffs, bound = got
        if isinstance(step, CutStep):
            row = (coeffs, Fraction(floor(bound)), False)
        else:
            m = step.modulus
            mc = {v: Fraction(_mods(int(c), m))
                  for v, c in coeffs.items() if _mods(int(c), m)}
            mc[step.var] = Fraction(-m)
            row = (mc, Fraction(_mods(int(bound), m)), True)
        rows.append(row)
        out.append(row)
    return out


def _step_sides(natoms_a: int, natoms: int, steps: Sequence[Step]) -> list[str]:
    """Classify each step as 'a', 'b', or 'mixed' by the atom support of its
    derivation (transitively through earlier steps)."""
    sides: list[str] = []
    for step in steps:
        in_a = in_b = False
        for i in step.multipliers:
            if i < natoms_a:
                in_a = True
            elif i < natoms:
                in_b = True
            else:
                side = sides[i - natoms]
                if side == "a":
                    in_a = True
                elif side == "b":
                    in_b = True
                else:
                    in_a = in_b = True
        if in_a and in_b:
            sides.append("mixed")
        elif in_b:
            sides.append("b")
        else:
            sides.append("a")  # pure-a or empty
    return sides


def _side_sum(
    atoms: Sequence[Atom],
    cert: FarkasCertificate,
    take_atom: Callable[[int], bool],
    take_step: Callable[[int], bool],
):
    """Sum of the certificate rows selected by the predicates."""
    base = [_atom_row(a) for a in atoms]
    step_rows = _step_rows(base, cert.steps)
    coeffs: dict[str, Fraction] = {}
    bound = ZERO
    for i, m in cert.multipliers.items():
        if i < len(atoms):
            if not take_atom(i):
                continue
            c, b, _eq = base[i]
        else:
            if not take_step(i - len(atoms)):
                continue
            c, b, _eq = step_rows[i - len(atoms)]
        for v, cv in c.items():
            nv = coeffs.get(v, ZERO) + m * cv
            if nv:
                coeffs[v] = nv
            else:
                coeffs.pop(v, None)
        bound += m * b
    return coeffs, bound


def _tighten_row(coeffs: dict[str, Fraction], bound: Fraction):
    """Scale to integer coefficients and floor the bound (sound for
    conclusions about integer points)."""
    if not coeffs:
        return coeffs, Fraction(floor(bound)) if bound.denominator != 1 else bound
    sc, sb = _int_scale_row(coeffs, bound)
    g = gcd(*(int(c) for c in sc.values()))
    sc = {v: c / g for v, c in sc.items()}
    sb = sb / g
    return sc, Fraction(floor(sb))


def _row_to_atoms(coeffs: dict[str, Fraction], bound: Fraction) -> list[Atom]:
    if not coeffs:
        return [] if bound >= 0 else [Atom(LinearTerm.of(1))]
    return [_row_atom(coeffs, bound)]


def interpolant(a: Sequence[Atom], b: Sequence[Atom]) -> Optional[list[Atom]]:
    """A conjunction I with a |= I, I & b unsat, vars(I) within the shared
    variables.  Raises ValueError when a & b is satisfiable; returns None
    when no certified interpolant could be produced."""
    a, b = list(a), list(b)
    res = check_sat(a + b, integral=True)
    if isinstance(res, Sat):
        raise ValueError("interpolation requires a jointly unsatisfiable pair")
    if isinstance(res, ResourceLimit):
        return None
    cert = res.certificate
    sides = _step_sides(len(a), len(a) + len(b), cert.steps)
    if "mixed" not in sides:
        coeffs, bound = _side_sum(
            a + b, cert,
            take_atom=lambda i: i < len(a),
            take_step=lambda j: sides[j] == "a",
        )
        coeffs, bound = _tighten_row(coeffs, bound)
        cand = _row_to_atoms(coeffs, bound)
        if _interpolant_ok(a, b, cand):
            return cand
    avars = set().union(*(x.vars() for x in a)) if a else set()
    bvars = set().union(*(x.vars() for x in b)) if b else set()
    proj = eliminate(a, avars - bvars, mode="rational")
    if _interpolant_ok(a, b, proj):
        return proj
    return None


def _interpolant_ok(a: Sequence[Atom], b: Sequence[Atom], itp: Sequence[Atom]) -> bool:
    avars = set().union(*(x.vars() for x in a)) if a else set()
    bvars = set().union(*(x.vars() for x in b)) if b else set()
    ivars = set().union(*(x.vars() for x in itp)) if itp else set()
    if not ivars <= (avars & bvars):
        return False
    if not implies_all(list(a), list(itp)):
        return False
    return sat_decide(list(itp) + list(b)) == "unsat"


def interpolant_sequence(
    groups: Sequence[Sequence[Atom]],
    cert: Optional[FarkasCertificate] = None,
) -> Optional[list[list[Atom]]]:
    """Inductive interpolants for an unsatisfiable conjunction split into
    consecutive groups g_1..g_n: returns [I_0..I_n] with I_0 true, I_n
    false, I_k-1 & g_k |= I_k, and vars(I_k) within the variables shared
    by the prefix and the suffix.  Returns None when the path is not
    (certifiably) unsatisfiable or a condition cannot be met.

    All interpolants come from prefix sums of one certificate under one
    common integer scaling, so the inductive chain holds exactly.
    """
    groups = [list(g) for g in groups]
    atoms = [x for g in groups for x in g]
    if cert is None:
        res = check_sat(atoms, integral=True)
        if not isinstance(res, Unsat):
            return None
        cert = res.certificate
    # group index of every atom position
    group_of: list[int] = []
    for gi, g in enumerate(groups):
        group_of.extend([gi] * len(g))
    n = len(groups)
    # assign steps to the latest group in their support
    base = [_atom_row(x) for x in atoms]
    step_rows = _step_rows(base, cert.steps)
    step_group: list[int] = []
    for step in cert.steps:
        gmax = 0
        for i in step.multipliers:
            gmax = max(gmax, group_of[i] if i < len(atoms) else step_group[i - len(atoms)])
        step_group.append(gmax)
    # prefix sums
    prefixes: list[tuple[dict[str, Fraction], Fraction]] = []
    for k in range(n + 1):
        coeffs: dict[str, Fraction] = {}
        bound = ZERO
        for i, m in cert.multipliers.items():
            if i < len(atoms):
                if group_of[i] >= k:
                    continue
                c, b, _eq = base[i]
            else:
                if step_group[i - len(atoms)] >= k:
                    continue
                c, b, _eq = step_rows[i - len(atoms)]
            for v, cv in c.items():
                nv = coeffs.get(v, ZERO) + m * cv
                if nv:
                    coeffs[v] = nv
                else:
                    coeffs.pop(v, None)
            bound += m * b
        prefixes.append((coeffs, bound))
    if prefixes[-1][0] or prefixes[-1][1] >= 0:
        return None  # certificate does not close the full path
    # one common scale so that flooring is a no-op everywhere
    denoms = [1]
    for coeffs, bound in prefixes:
        denoms.extend(c.denominator for c in coeffs.values())
        denoms.append(bound.denominator)
    k_scale = Fraction(lcm(*denoms))
    result: list[list[Atom]] = []
    prefix_vars: set[str] = set()
    suffix_vars: list[set[str]] = [set() for _ in range(n + 1)]
    for gi in range(n - 1, -1, -1):
        suffix_vars[gi] = suffix_vars[gi + 1] | set().union(
            *(x.vars() for x in groups[gi]), set()
        )
    ok = True
    for k, (coeffs, bound) in enumerate(prefixes):
        if 0 < k < n:
            prefix_vars |= set().union(*(x.vars() for x in groups[k - 1]), set())
            frame = prefix_vars & suffix_vars[k]
            if not set(coeffs) <= frame:
                ok = False
                break
        atoms_k = _row_to_atoms(
            {v: c * k_scale for v, c in coeffs.items()}, bound * k_scale
        )
        result.append(atoms_k)
    if ok:
        return result
    # fall back to projection-based interpolants, verified per link
    result = [[]]
    pv: set[str] = set()
    for k in range(1, n):
        pv |= set().union(*(x.vars() for x in groups[k - 1]), set())
        frame = pv & suffix_vars[k]
        prefix_atoms = [x for g in groups[:k] for x in g]
        proj = eliminate(prefix_atoms, pv - frame, mode="rational")
        if not implies_all(result[-1] + groups[k - 1], proj):
            return None
        result.append(proj)
    if sat_decide(result[-1] + groups[-1]) != "unsat":
        return None
    result.append([Atom(LinearTerm.of(1))])
    return result
