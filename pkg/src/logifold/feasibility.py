"""Exact feasibility of linear constraint systems over the rationals.

Constraints are affine rows ``a . x + b >= 0`` (weak) or ``> 0`` (strict) with
integer coefficients (inputs are cleared of denominators exactly, so float
coefficients are handled without rounding).  Verdicts come from Fourier-Motzkin
elimination and are exact: a feasible system yields a rational witness, an
infeasible one yields the contradictory constant row derived by elimination.

An LP prescreen (scipy, float) is used only to *find* witness candidates
quickly; every candidate is verified in rational arithmetic before it is
trusted, and the elimination runs whenever no verified candidate exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Optional, Sequence

from .errors import DimensionBudgetError, GuardExplosionError

try:
    from scipy.optimize import linprog

    _HAVE_LP = True
except Exception:  # pragma: no cover - scipy is a declared dependency
    _HAVE_LP = False

# Exact elimination beyond this ambient dimension is not supported; row counts
# grow too fast for the guarantees to stay affordable.
DIM_BUDGET = 8

# Margin used when the LP prescreen models strict inequalities.  Only affects
# how often the prescreen succeeds, never correctness.
_LP_MARGIN_CAP = 1.0


@dataclass(frozen=True)
class Constraint:
    """Integer row ``coeffs . x + offset >= 0`` (or ``> 0`` when strict)."""

    coeffs: tuple
    offset: int
    strict: bool
    # ancestor row indices during elimination; Imbert's bound prunes derived
    # rows whose history outgrows the eliminated-variable count
    hist: frozenset = frozenset()


@dataclass
class Verdict:
    """Outcome of an exact emptiness check."""

    feasible: bool
    witness: Optional[tuple]  # rational point, present iff feasible
    contradiction: Optional[str]  # derived impossible row, present iff not


def _to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(float(v))  # exact binary expansion of the float


def make_constraint(coeffs: Sequence, offset, strict: bool) -> Constraint:
    """Build an integer constraint from float/rational data, exactly."""
    fr = [_to_fraction(c) for c in coeffs]
    fb = _to_fraction(offset)
    denom = lcm(*[f.denominator for f in fr + [fb]]) if fr else fb.denominator
    ints = [int(f * denom) for f in fr]
    b = int(fb * denom)
    g = 0
    for v in ints + [b]:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
        b = b // g
    return Constraint(tuple(ints), b, strict)


def negate_row(coeffs: Sequence, offset):
    return [-_to_fraction(c) for c in coeffs], -_to_fraction(offset)


def signed_constraint(coeffs: Sequence, offset, sign: str) -> Constraint:
    """PLUS means the row is >= 0; MINUS means it is < 0 (so -row > 0)."""
    if sign == "+":
        return make_constraint(coeffs, offset, strict=False)
    nc, nb = negate_row(coeffs, offset)
    return make_constraint(nc, nb, strict=True)


def evaluate_constraint(c: Constraint, point: Sequence[Fraction]) -> Fraction:
    total = Fraction(c.offset)
    for a, x in zip(c.coeffs, point):
        if a:
            total += a * x
    return total


def satisfies(c: Constraint, point: Sequence[Fraction]) -> bool:
    v = evaluate_constraint(c, point)
    return v > 0 if c.strict else v >= 0


def _normalize(c: Constraint) -> Constraint:
    g = 0
    for v in c.coeffs:
        g = gcd(g, abs(v))
    g = gcd(g, abs(c.offset))
    if g > 1:
        return Constraint(tuple(v // g for v in c.coeffs), c.offset // g, c.strict, c.hist)
    return c


def _simplify(rows: Iterable[Constraint]):
    """Drop satisfied constants, dedupe dominated rows; catch contradictions.

    Returns (rows, contradiction_string_or_None).
    """
    best = {}
    for r in rows:
        if not any(r.coeffs):
            ok = r.offset > 0 if r.strict else r.offset >= 0
            if not ok:
                op = ">" if r.strict else ">="
                return None, f"derived constant row {r.offset} {op} 0"
            continue
        r = _normalize(r)
        key = r.coeffs
        prev = best.get(key)
        if prev is None:
            best[key] = r
        elif r.offset < prev.offset or (r.offset == prev.offset and r.strict and not prev.strict):
            # smaller offset is the tighter bound; strict beats weak at a tie
            best[key] = r
    return list(best.values()), None


def _combine(p: Constraint, q: Constraint, j: int, hist) -> Constraint:
    """Eliminate variable j from a lower-bound row p (c_j>0) and upper q (c_j<0)."""
    mp = -q.coeffs[j]
    mq = p.coeffs[j]
    coeffs = tuple(mp * a + mq * b for a, b in zip(p.coeffs, q.coeffs))
    return Constraint(coeffs, mp * p.offset + mq * q.offset, p.strict or q.strict, hist)


def _eliminate(rows, n):
    """Full elimination. Returns (stages, contradiction) where stages records,
    per eliminated variable, the rows that mentioned it."""
    cur, bad = _simplify(
        Constraint(r.coeffs, r.offset, r.strict, frozenset((i,)))
        for i, r in enumerate(rows))
    if bad:
        return [], bad
    stages = []
    eliminated = 0
    while True:
        used = [j for j in range(n) if any(r.coeffs[j] for r in cur)]
        if not used:
            return stages, None
        # cheapest variable first: minimize the number of combined rows
        def cost(j):
            p = sum(1 for r in cur if r.coeffs[j] > 0)
            q = sum(1 for r in cur if r.coeffs[j] < 0)
            return p * q - p - q

        j = min(used, key=cost)
        P = [r for r in cur if r.coeffs[j] > 0]
        N = [r for r in cur if r.coeffs[j] < 0]
        Z = [r for r in cur if not r.coeffs[j]]
        stages.append((j, P + N))
        eliminated += 1
        cap = eliminated + 1  # Imbert: longer histories are redundant rows
        nxt = list(Z)
        for p in P:
            for q in N:
                h = p.hist | q.hist
                if len(h) <= cap:
                    nxt.append(_combine(p, q, j, h))
        cur, bad = _simplify(nxt)
        if bad:
            return stages, bad


def _back_substitute(stages, n) -> tuple:
    point = [Fraction(0)] * n
    for j, rows in reversed(stages):
        lo = hi = None
        lo_strict = hi_strict = False
        for r in rows:
            cj = r.coeffs[j]
            rest = Fraction(r.offset)
            for k, a in enumerate(r.coeffs):
                if a and k != j:
                    rest += a * point[k]
            bound = Fraction(-rest, cj)
            if cj > 0:  # x_j >= bound (or >)
                if lo is None or bound > lo or (bound == lo and r.strict):
                    lo, lo_strict = bound, r.strict
            else:  # x_j <= bound (or <)
                if hi is None or bound < hi or (bound == hi and r.strict):
                    hi, hi_strict = bound, r.strict
        if lo is None and hi is None:
            val = Fraction(0)
        elif hi is None:
            val = lo + 1
        elif lo is None:
            val = hi - 1
        elif lo < hi:
            val = (lo + hi) / 2
        else:
            # elimination guarantees lo == hi with both bounds weak
            val = lo
        point[j] = val
    return tuple(point)


def _lp_candidate(constraints, n):
    """Float LP for a point with positive margin on strict rows, or None."""
    if not _HAVE_LP or not constraints:
        return None
    # variables: x_1..x_n, t ; maximize t subject to  a.x + b >= t (strict rows)
    # and a.x + b >= 0 (weak rows); t capped so the problem stays bounded.
    a_ub = []
    b_ub = []
    try:
        for c in constraints:
            row = [-float(v) for v in c.coeffs]
            row.append(1.0 if c.strict else 0.0)
            a_ub.append(row)
            b_ub.append(float(c.offset))
    except OverflowError:
        # cleared denominators can exceed float range; fall back to exact FM
        return None
    a_ub.append([0.0] * n + [1.0])
    b_ub.append(_LP_MARGIN_CAP)
    cost = [0.0] * n + [-1.0]
    try:
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * n + [(None, None)], method="highs")
    except Exception:
        return None
    if not res.success or res.x is None:
        return None
    if res.x[-1] <= 0:
        return None
    return [Fraction(float(v)) for v in res.x[:n]]


def find_witness(constraints: Sequence[Constraint], n: int, dim_budget: int = DIM_BUDGET,
                 hint=None) -> Optional[tuple]:
    """Exact witness of the system, or None if it is infeasible.

    `hint` is an optional rational point tried first (cheap when the caller
    extends an already-witnessed system by one row).
    """
    if n > dim_budget:
        raise DimensionBudgetError(
            f"exact feasibility supports dimension <= {dim_budget}, got {n}")
    if hint is not None and all(satisfies(c, hint) for c in constraints):
        return tuple(hint)
    cand = _lp_candidate(constraints, n)
    if cand is not None and all(satisfies(c, cand) for c in constraints):
        return tuple(cand)
    stages, bad = _eliminate(list(constraints), n)
    if bad:
        return None
    return _back_substitute(stages, n)


def check_system(constraints: Sequence[Constraint], n: int, dim_budget: int = DIM_BUDGET) -> Verdict:
    """Like find_witness but keeps the elimination certificate on failure."""
    if n > dim_budget:
        raise DimensionBudgetError(
            f"exact feasibility supports dimension <= {dim_budget}, got {n}")
    cand = _lp_candidate(constraints, n)
    if cand is not None and all(satisfies(c, cand) for c in constraints):
        return Verdict(True, tuple(cand), None)
    stages, bad = _eliminate(list(constraints), n)
    if bad:
        return Verdict(False, None, bad)
    return Verdict(True, _back_substitute(stages, n), None)


def enumerate_chambers(rows, n: int, base: Sequence[Constraint] = (),
                       cap: Optional[int] = None, dim_budget: int = DIM_BUDGET,
                       base_witness=None):
    """All realizable sign vectors of `rows` within the `base` system.

    rows: sequence of (coeffs, offset) affine rows (floats accepted).
    Returns {sign_string: rational witness}.  Sign ``+`` stands for row >= 0,
    ``-`` for row < 0.  Raises GuardExplosionError past `cap` chambers.
    """
    w0 = base_witness if base_witness is not None else find_witness(list(base), n, dim_budget)
    if w0 is None:
        return {}
    int_rows = [make_constraint(c, b, strict=False) for c, b in rows]  # sign probes
    out = {}

    def rec(idx, system, witness, prefix):
        if idx == len(int_rows):
            if cap is not None and len(out) >= cap:
                raise GuardExplosionError(
                    f"more than {cap} realizable chambers for a {len(rows)}-row guard")
            out[prefix] = witness
            return
        probe = int_rows[idx]
        val = evaluate_constraint(probe, witness)
        for sign in "+-":
            if sign == "+":
                c = Constraint(probe.coeffs, probe.offset, False)
                free = val >= 0
            else:
                c = Constraint(tuple(-a for a in probe.coeffs), -probe.offset, True)
                free = val < 0
            sub = list(system) + [c]
            w = tuple(witness) if free else find_witness(sub, n, dim_budget, hint=None)
            if w is not None:
                rec(idx + 1, sub, w, prefix + sign)

    rec(0, list(base), w0, "")
    return out
