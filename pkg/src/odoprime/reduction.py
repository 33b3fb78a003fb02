"""Reduction of powers of T on triples ``(j, A, rho)``.

A triple whose top expansion index ``sigma_j`` lies in E is replaced by
triples with the top coefficient removed: a single child at an odd-type
position, two children split by the half-band of the E digit at a W-type
position.  ``rho`` accumulates ``|d| / a`` per step.  Iterating until
nothing changes yields the stabilized family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .holes import sample_Y, w_threshold
from .odometer import Cylinder
from .return_map import ReturnMap
from .schedule import WTYPE

STOP_J0 = "j=0"
STOP_SIGMA_LOW = "sigma<=N"
STOP_NOT_E = "sigma_not_in_E"
STOP_RHO = "rho>eps"

GOOD, BAD, NEITHER = "Good", "Bad", "Neither"


@dataclass(frozen=True)
class Triple:
    j: int
    A: Cylinder
    rho: Fraction
    parent: "Triple | None" = field(default=None, compare=False, repr=False)
    depth: int = field(default=0, compare=False)

    def chain(self) -> list:
        out, t = [], self
        while t is not None:
            out.append(t)
            t = t.parent
        return out[::-1]


def stop_reason(rm: ReturnMap, t: Triple, N: int, eps) -> str | None:
    if t.j == 0:
        return STOP_J0
    sigma = rm.sigma(t.j)
    if sigma <= N:
        return STOP_SIGMA_LOW
    if not rm.sched.in_E(sigma):
        return STOP_NOT_E
    if t.rho > eps:
        return STOP_RHO
    return None


W_RULES = ("matched", "literal")


def reduce_step(rm: ReturnMap, t: Triple, N: int, eps, w_rule: str = "matched") -> list:
    """One application of the reduction rule (stopped triples pass through).

    At a W-type position the upper half band sees no W hit per block of
    ``q_sigma`` steps, so one block holds ``r_sigma + 1`` returns and the
    child is ``j - d (r_sigma + 1)`` (``w_rule="matched"``).  ``"literal"``
    uses ``j - d r_sigma + d`` instead.
    """
    if w_rule not in W_RULES:
        raise ValueError(f"w_rule must be one of {W_RULES}")
    eps = Fraction(eps)
    if stop_reason(rm, t, N, eps) is not None:
        return [t]
    s = rm.sched
    exp = rm.d_digits(t.j)
    sigma = exp.sigma
    d = exp[sigma]
    a = s.sizes[sigma]
    r = rm.r(sigma)
    rho = t.rho + Fraction(abs(d), a)
    if s.kind(sigma) != WTYPE:
        return [Triple(t.j - d * r, t.A, rho, t, t.depth + 1)]
    thr = w_threshold(a)
    out = []
    low = t.A.restrict(sigma, 0, thr - 1)
    high = t.A.restrict(sigma, thr, a - 1)
    if low is not None:
        out.append(Triple(t.j - d * r, low, rho, t, t.depth + 1))
    if high is not None:
        shift = -d if w_rule == "matched" else d
        out.append(Triple(t.j - d * r + shift, high, rho, t, t.depth + 1))
    return out


@dataclass
class ReductionResult:
    i: int
    N: int
    eps: Fraction
    triples: list
    reasons: list
    levels: list  # the triple families after each round
    nu: list  # exact nu(A) per final triple

    @property
    def summary(self) -> list:
        """``(n, nu(A), rho)`` for every stabilized triple."""
        return [(t.j, m, t.rho) for t, m in zip(self.triples, self.nu)]

    def total_mass(self) -> Fraction:
        return sum(self.nu, Fraction(0))

    def to_json(self, rm: ReturnMap | None = None):
        rows = []
        for t, m, why in zip(self.triples, self.nu, self.reasons):
            row = {"n": t.j, "A": t.A.to_json(), "nu": str(m), "rho": str(t.rho), "stop": why, "depth": t.depth}
            if rm is not None:
                row["sigma"] = rm.sigma(t.j)
            rows.append(row)
        return {"i": self.i, "N": self.N, "eps": str(self.eps), "rounds": len(self.levels) - 1,
                "total_nu": str(self.total_mass()), "triples": rows}

    def tree_text(self) -> str:
        lines = []
        seen = set()
        for t, why in zip(self.triples, self.reasons):
            for k, node in enumerate(t.chain()):
                key = id(node)
                if key in seen:
                    continue
                seen.add(key)
                tag = f"  [{why}]" if node is t else ""
                lines.append(f"{'  ' * k}({node.j}, {node.A}, {node.rho}){tag}")
        return "\n".join(lines)


class NonTermination(RuntimeError):
    pass


def run_rounds(rm: ReturnMap, start: list, N: int, eps, rounds: int | None = None, cap: int = 10_000,
               w_rule: str = "matched"):
    """Apply reduce_step to every triple, ``rounds`` times or until stable."""
    eps = Fraction(eps)
    levels = [list(start)]
    cur = list(start)
    for k in range(cap):
        if rounds is not None and k >= rounds:
            break
        nxt = []
        changed = False
        for t in cur:
            kids = reduce_step(rm, t, N, eps, w_rule)
            if len(kids) != 1 or kids[0] is not t:
                changed = True
            nxt.extend(kids)
        if not changed:
            break
        cur = nxt
        levels.append(cur)
    else:
        raise NonTermination(f"reduction did not stabilize within {cap} rounds")
    return levels


def reduce_full(rm: ReturnMap, i: int, N: int, eps, w_rule: str = "matched") -> ReductionResult:
    eps = Fraction(eps)
    root = Triple(int(i), Cylinder.full(rm.sched), Fraction(0))
    levels = run_rounds(rm, [root], N, eps, w_rule=w_rule)
    final = levels[-1]
    reasons = [stop_reason(rm, t, N, eps) for t in final]
    nu = [rm.holes.nu(t.A) for t in final]
    return ReductionResult(int(i), N, eps, final, reasons, levels, nu)


def F_summary(rm: ReturnMap, i: int, N: int, eps) -> list:
    return reduce_full(rm, i, N, eps).summary


def classify(rm: ReturnMap, n: int, N: int, eps, w_rule: str = "matched") -> str:
    """Good / Bad / Neither for reduction at scale N."""
    eps = Fraction(eps)
    half = N // 2
    res_g = reduce_full(rm, n, half, eps**4, w_rule)
    high_g = sum((m for (j, m, _) in res_g.summary if j != 0 and rm.sigma(j) > half), Fraction(0))
    if high_g < eps**4:
        return GOOD
    res_b = reduce_full(rm, n, N, eps**2, w_rule)
    high_b = sum((m for (j, m, _) in res_b.summary if j != 0 and rm.sigma(j) > N), Fraction(0))
    if high_b > eps:
        return BAD
    return NEITHER


# ----------------------------------------------------------------------------
# the disagreement sets

def _window_values(v: int, d: int, a: int):
    """Digit values (mod a) visited at the top position from start digit v."""
    if d > 0:
        return [(v + t) % a for t in range(-1, d + 2)]
    return [(v + t) % a for t in range(d - 1, 2)]


def bad_digit_values(rm: ReturnMap, sigma: int, d: int) -> list:
    """Top-digit values whose orbit window may leave the reduction rule.

    The window of digits visited at ``sigma`` either meets ``a - 2`` (the
    gate to every deeper hole) or, at a W-type position, crosses the half
    band of the W hole.
    """
    s = rm.sched
    a = s.sizes[sigma]
    thr = w_threshold(a)
    bad = []
    for v in range(a):
        win = _window_values(v, d, a)
        hit = (a - 2) in win
        if s.kind(sigma) == WTYPE:
            hit = hit or len({u < thr for u in win}) > 1
        if hit:
            bad.append(v)
    return bad


def cover_cylinders(rm: ReturnMap, sigma: int, d: int, A: Cylinder | None = None) -> list:
    A = A if A is not None else Cylinder.full(rm.sched)
    out = []
    for v in bad_digit_values(rm, sigma, d):
        c = A.restrict(sigma, v, v)
        if c is not None:
            out.append(c)
    return out


@dataclass
class PQEstimate:
    i: int
    sigma: int
    d: int
    a: int
    samples: int
    rows: list  # per triple of round r
    P_hat: float
    P_se: float
    lemma_hat: float
    lemma_se: float
    bound: float
    cover_nu: Fraction | None
    cover_misses: int

    @property
    def bound_ok(self) -> bool:
        return self.lemma_hat <= self.bound + 3 * self.lemma_se

    @property
    def cover_ok(self) -> bool:
        if self.cover_nu is None:
            return True
        return self.cover_misses == 0 and 99 * (self.P_hat + 3 * self.P_se) >= float(self.cover_nu)

    def to_json(self):
        return {
            "i": self.i, "sigma": self.sigma, "d": self.d, "a": self.a, "samples": self.samples,
            "rows": self.rows, "P_hat": self.P_hat, "P_se": self.P_se,
            "lemma_hat": self.lemma_hat, "lemma_se": self.lemma_se, "bound": self.bound,
            "bound_ok": self.bound_ok,
            "cover_nu": None if self.cover_nu is None else str(self.cover_nu),
            "cover_misses": self.cover_misses, "cover_ok": self.cover_ok,
        }


def _se(p: float, n: int) -> float:
    return float(np.sqrt(max(p * (1 - p), 1.0 / n) / n))


def compute_PQ(rm: ReturnMap, i: int, N: int, eps, r: int = 1, samples: int = 10_000, rng=None,
               w_rule: str = "matched") -> PQEstimate:
    """Monte-Carlo estimate of P_r and the parent-comparison disagreement set.

    ``P`` counts ``x`` in the A-set of a round-``r`` triple ``(n, A, rho)``
    with ``(T^n x)_j != (T^i x)_j`` for some ``j <= sigma_n``.  The parent
    form compares each triple made in round ``r`` with its parent ``n'``
    at all positions below ``sigma_{n'}``; its bound is the sum of
    ``4 nu(A) |d| / a`` over those triples.  For ``r = 1`` the top-digit
    cover of the bad set is built and checked as well.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    eps = Fraction(eps)
    root = Triple(int(i), Cylinder.full(rm.sched), Fraction(0))
    levels = run_rounds(rm, [root], N, eps, rounds=r, w_rule=w_rule)
    fam = levels[-1]
    prev_ids = {id(t) for t in levels[-2]} if len(levels) > 1 else {id(root)}
    exp = rm.d_digits(i) if i else None
    sigma = exp.sigma if exp else 0
    d = exp[sigma] if exp else 0
    a = rm.sched.sizes[sigma] if sigma else 1

    xs = sample_Y(rm.holes, samples, rng)
    vals = rm.value_array([x.value for x in xs])
    digit_rows = np.array([x.digits for x in xs], dtype=object)
    top_cmp = max([sigma] + [rm.sigma(t.j) for t in fam] + [1])
    tdig = rm.digits_of(rm.t_power_many(vals, i), top_cmp)
    P = np.zeros(samples, dtype=bool)
    lemma = np.zeros(samples, dtype=bool)
    rows = []
    bound = Fraction(0)
    for t in fam:
        mask = np.array([t.A.contains(row) for row in digit_rows], dtype=bool)
        sig_n = rm.sigma(t.j)
        fresh = t.parent is not None and id(t) not in prev_ids
        if fresh:
            pexp = rm.d_digits(t.parent.j)
            ps = pexp.sigma
            bound += 4 * rm.holes.nu(t.A) * Fraction(abs(pexp[ps]), rm.sched.sizes[ps])
        if mask.any():
            idig = rm.digits_of(rm.t_power_many(vals[mask], t.j), top_cmp)
            P[mask] = (idig[:, :sig_n] != tdig[mask][:, :sig_n]).any(axis=1)
            if fresh and ps > 1:
                pdig = rm.digits_of(rm.t_power_many(vals[mask], t.parent.j), ps - 1)
                lemma[mask] = (idig[:, : ps - 1] != pdig).any(axis=1)
        rows.append({
            "n": t.j, "A": t.A.to_json(), "nu": str(rm.holes.nu(t.A)), "rho": str(t.rho),
            "sigma_n": sig_n, "hits": int(mask.sum()), "fresh": fresh,
            "P": int(P[mask].sum()), "lemma": int(lemma[mask].sum()),
        })
    p_hat = float(P.mean())
    l_hat = float(lemma.mean())
    cover_nu, misses = None, 0
    if r == 1 and sigma and rm.sched.in_E(sigma) and sigma > N:
        cover_nu = sum((rm.holes.nu(c) for c in cover_cylinders(rm, sigma, d)), Fraction(0))
        bad_vals = set(bad_digit_values(rm, sigma, d))
        misses = int(sum(1 for k in np.flatnonzero(P | lemma) if digit_rows[k][sigma - 1] not in bad_vals))
    return PQEstimate(int(i), sigma, d, a, samples, rows, p_hat, _se(p_hat, samples),
                      l_hat, _se(l_hat, samples), float(bound), cover_nu, misses)
