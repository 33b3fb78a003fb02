"""Seeded experiment runners.  Each returns a :class:`Report` whose checks decide the exit code."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from ..friends import InfeasibleWitness, make_friend, verify_witness
from ..holes import HoleFamily, sample_Y
from ..measures import (
    EmpiricalMeasure,
    InfeasibleBand,
    barycenter_step,
    distance_rows,
    find_barycenter,
    kr_distance,
    mixture,
    offdiag_joining,
    reordering_fraction,
    sample_values,
)
from ..odometer import Cylinder, count_below, residues_of
from ..oracle import FiniteQuotient
from ..reduction import compute_PQ, reduce_full
from ..return_map import GreedyStall, ReturnMap
from ..schedule import EMPTY, WTYPE, AlphabetSchedule
from .config import ConfigError, ExperimentConfig, InfeasibleConfig, resolve
from .report import Report

ORACLE_BUDGET = 2_000_000


def _frac(v) -> Fraction:
    try:
        return Fraction(str(v))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {v!r}") from exc


def _schedules(cfg: ExperimentConfig) -> list:
    """The user's single schedule, or every preset listed in ``params.presets``."""
    if cfg.schedule is not None:
        return [cfg.build_schedule()]
    return [cfg.build_schedule(spec) for spec in cfg.params["presets"]]


def _random_values(sched: AlphabetSchedule, count: int, rng) -> list:
    """Uniform points of X (not just Y), as exact integers."""
    cols = [rng.integers(0, sched.sizes[i], size=count).tolist() for i in range(1, sched.depth + 1)]
    return [sched.decode(row) for row in zip(*cols)]


def _report(name: str, cfg: ExperimentConfig, schedules=(), metric: bool = False) -> Report:
    rep = Report(f"experiment {name}", cfg, schedules, cfg.metric_config().label if metric else None)
    return rep


def _se(values: np.ndarray) -> float:
    return float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0


# ----------------------------------------------------------------------------
# same hit

def exp_same_hit(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    scheds = _schedules(cfg)
    rep = _report("same_hit", cfg, scheds)
    rows, bad, controls = [], [], {}
    for sched in scheds:
        holes = HoleFamily(sched)
        xs = _random_values(sched, int(p["points"]), rng)
        max_i = min(sched.depth, p["max_i"] or sched.depth)
        dependent = 0
        for i in range(2, max_i + 1):
            qi = sched.qs[i]
            for h in holes.holes:
                counts = {holes.hole_count_below(h, x + qi) - holes.hole_count_below(h, x) for x in xs}
                if h.top < i:
                    expected = qi * holes.cylinder(h).measure()
                    row = {"preset": sched.name, "i": i, "hole": h.label, "values": sorted(counts),
                           "expected": expected}
                    rows.append(row)
                    if len(counts) != 1 or Fraction(next(iter(counts))) != expected:
                        bad.append(row)
                elif len(counts) > 1:
                    dependent += 1
        controls[sched.name] = dependent
        rep.truncation[sched.name] = {"depth": sched.depth, "points": len(xs)}
    rep.table("constant_counts", rows)
    rep.check("hit counts of holes below i are constant and equal q_i mu(hole)", not bad,
              cases=len(rows), failures=bad[:10])
    rep.check("negative control: some hole at or above i gives x-dependent counts",
              all(v > 0 for v in controls.values()), x_dependent_cases=controls)
    if oracle:
        _same_hit_oracle(rep, scheds, p)
    rep.summary = {"cases": len(rows), "x_dependent_controls": controls}
    return rep


def _same_hit_oracle(rep: Report, scheds, p):
    bad = []
    for sched in scheds:
        L = _largest_L(sched, ORACLE_BUDGET)
        if L < 2:
            continue
        fq = FiniteQuotient(sched.with_depth(L), L)
        holes = HoleFamily(sched.with_depth(L))
        for i in range(2, L + 1):
            for h in holes.holes:
                if h.top < i:
                    hits = fq.hits_all(fq.cylinder_mask(holes.cylinder(h)), sched.qs[i])
                    if hits.min() != hits.max():
                        bad.append({"preset": sched.name, "i": i, "hole": h.label})
    rep.check("oracle: constancy over every state of the quotient", not bad, failures=bad)


def _largest_L(sched: AlphabetSchedule, budget: int) -> int:
    L = 0
    while L < sched.depth and sched.qs[L + 2] <= budget:
        L += 1
    return L


# ----------------------------------------------------------------------------
# oracle equivalence

def exp_oracle(cfg: ExperimentConfig, oracle: bool = True) -> Report:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    rep = _report("oracle", cfg)
    horizons = [int(n) for n in p["horizons"]]
    for q in p["quotients"]:
        L = int(q["L"])
        sched = AlphabetSchedule.from_dict({"preset": q["preset"], "depth": q.get("depth")}).with_depth(L)
        rep.add_schedule(sched, f"{sched.name}@L={L}")
        try:
            fq = FiniteQuotient(sched, L, int(p["budget"]))
        except ValueError as exc:
            raise InfeasibleConfig(str(exc)) from exc
        rm = ReturnMap.of(sched)
        rows = _oracle_compare(rm, fq, horizons, int(p["random_queries"]), int(p["literal_states"]), rng)
        rep.table("comparisons", rows)
        rep.truncation[f"{sched.name}@L={L}"] = {"states": fq.size, "Y_states": fq.n_Y}
        for row in rows:
            rep.check(f"{sched.name} L={L} {row['query']}", row["mismatches"] == 0,
                      compared=row["compared"], mismatches=row["mismatches"])
    return rep


def _oracle_compare(rm: ReturnMap, fq: FiniteQuotient, horizons, n_random, n_literal, rng) -> list:
    states = np.arange(fq.size, dtype=np.int64)
    Y = fq.Y
    m = fq.n_Y
    idx = np.arange(m)
    out = []

    def add(query, mism, compared):
        out.append({"preset": rm.sched.name, "L": fq.L, "query": query,
                    "compared": int(compared), "mismatches": int(mism)})

    # in_Y on every state, and |Y| against the exact measure
    add("in_Y all states", np.count_nonzero(rm.in_Y_array(states) != ~fq.hole), fq.size)
    muY = rm.holes.measure_Y()[0]
    add("|Y| = q mu(Y)", int(muY * fq.size != fq.n_Y), 1)

    zbad = xbad = tbad = 0
    for n in horizons:
        for sgn in (1, -1):
            k = sgn * n
            z = rm.zeta_many(Y, k)
            zbad += np.count_nonzero(z != fq.zeta_all(k))
            tbad += np.count_nonzero((Y + z) % fq.size != Y[(idx + k) % m])
        xbad += np.count_nonzero(rm.xi_array(Y, n) != fq.xi_all(n))
    add(f"zeta all Y-states, horizons +-{horizons}", zbad, 2 * m * len(horizons))
    add(f"t_power all Y-states, horizons +-{horizons}", tbad, 2 * m * len(horizons))
    add(f"xi all Y-states, horizons {horizons}", xbad, m * len(horizons))

    # hit counts: every hole and a few random prefix cylinders on all states,
    # one non-prefix cylinder on a subsample through the interval path
    sched = rm.sched
    cyls = list(rm.holes.cylinders())
    for _ in range(3):
        top = int(rng.integers(1, fq.L + 1))
        cons = [(j, int(v), int(v)) for j, v in
                ((j, rng.integers(0, sched.sizes[j])) for j in range(1, top))]
        lo = int(rng.integers(0, sched.sizes[top]))
        cons.append((top, lo, int(rng.integers(lo, sched.sizes[top]))))
        cyls.append(Cylinder(sched, cons))
    hbad = hcount = 0
    for C in cyls:
        mask = fq.cylinder_mask(C)
        for n in horizons:
            got = count_below(C, states + n) - count_below(C, states)
            hbad += np.count_nonzero(got != fq.hits_all(mask, n))
            hcount += fq.size
    sparse = Cylinder(sched, [(1, 1, 3), (3, 0, 1)])
    smask = fq.cylinder_mask(sparse)
    sub = rng.choice(fq.size, size=min(500, fq.size), replace=False)
    for n in horizons:
        ref = fq.hits_all(smask, n)[sub]
        got = np.array([count_below(sparse, int(s) + n) - count_below(sparse, int(s)) for s in sub])
        hbad += np.count_nonzero(got != ref)
        hcount += len(sub)
    add("hit_count all states (holes, prefix and sparse cylinders)", hbad, hcount)

    # random queries past the fixed horizons, wrapping included
    hi = 5 * m
    s_idx = rng.integers(0, m, size=n_random)
    ns = rng.integers(max(horizons) + 1, hi, size=n_random)
    sgn = np.where(rng.integers(0, 2, size=n_random) == 0, 1, -1)
    x0 = Y[s_idx]
    k = ns * sgn
    z = rm.zeta_many(x0, k)
    wraps, j = np.divmod(s_idx + k, m)
    ref = Y[j] - x0 + wraps * fq.size
    add("zeta random larger queries", np.count_nonzero(z != ref), n_random)
    add("t_power random larger queries", np.count_nonzero((x0 + z) % fq.size != Y[j]), n_random)
    xi_ref = np.array([fq.xi_all(int(n))[s] for s, n in zip(s_idx[:50], ns[:50])])
    add("xi random larger queries (50)", np.count_nonzero(rm.xi_array(x0[:50], ns[:50]) != xi_ref), 50)
    C = cyls[0]
    mask = fq.cylinder_mask(C)
    cum = np.concatenate(([0], np.cumsum(mask)))
    tot = int(cum[-1])

    def below(t):
        w, r = np.divmod(t, fq.size)
        return w * tot + cum[r]

    st = rng.integers(0, fq.size, size=n_random)
    ref = below(st + ns) - below(st)
    got = count_below(C, st + ns) - count_below(C, st)
    add("hit_count random larger queries", np.count_nonzero(got != ref), n_random)

    # the oracle's own enumeration against its literal stepping definitions
    lit = rng.choice(m, size=min(n_literal, m), replace=False)
    lbad = 0
    mask0 = fq.cylinder_mask(cyls[0])
    for n in (1, 2, 3, 17):
        zf, zb, xn, hn = fq.zeta_all(n), fq.zeta_all(-n), fq.xi_all(n), fq.hits_all(mask0, n)
        for s_i in lit:
            s = int(Y[s_i])
            lbad += fq.oracle_zeta(s, n) != zf[s_i]
            lbad += fq.oracle_zeta(s, -n) != zb[s_i]
            lbad += fq.oracle_t_power(s, n) != Y[(s_i + n) % m]
            lbad += fq.oracle_xi(s, n) != xn[s_i]
            lbad += fq.oracle_hit_count(s, n, cyls[0]) != hn[s]
    add("oracle enumeration vs literal stepping", lbad, 20 * len(lit))
    return out


# ----------------------------------------------------------------------------
# growth of return heights

def _growth_runs(sched: AlphabetSchedule, last: int) -> list:
    """Maximal runs ``[l0, l1]`` of steps ``l`` off E that start after some E position."""
    E = sched.e_positions
    runs, cur = [], []
    for l in range(1, last + 1):
        if sched.in_E(l):
            if cur:
                runs.append(cur)
            cur = []
        else:
            cur.append(l)
    if cur:
        runs.append(cur)
    first = E[0] if E else 0
    return [(r[0], r[-1]) for r in runs if r[0] > first]


def exp_growth(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    scheds = _schedules(cfg)
    rep = _report("growth", cfg, scheds)
    tol = float(p["tolerance"])
    exact_bad, literal_bad, literal_skipped, growth_rows, growth_bad = [], [], [], [], []
    r1 = {}
    for sched in scheds:
        rm = ReturnMap.of(sched)
        cut = rm.holes.absorbing_top
        rs = [rm.r(i) for i in range(1, sched.depth + 2)]
        r1[sched.name] = rs[0]
        rows = []
        for l in range(1, sched.depth + 1):
            r_l, r_n = rs[l - 1], rs[l]
            exact = rm.r_next(l, r_l) - r_n
            applicable = (not sched.in_E(l)) and (l + 1 > sched.depth or not sched.in_E(l + 1)) \
                and (cut is None or l < cut)
            a_next = sched.sizes[l + 1] if l + 1 <= sched.depth else sched.base
            literal = a_next * r_l - 1 - r_n if not sched.in_E(l) else None
            row = {"preset": sched.name, "l": l, "a_l": sched.sizes[l], "kind": sched.kind(l) or "",
                   "r_l": r_l, "r_next": r_n, "exact_residual": exact,
                   "literal_residual": literal, "literal_applies": applicable,
                   "log8_r_over_l": math.log(r_l, 8) / l if r_l > 0 else None}
            rows.append(row)
            if exact:
                exact_bad.append(row)
            if literal:
                target = literal_bad if applicable else literal_skipped
                target.append({"preset": sched.name, "l": l, "residual": literal})
        rep.table("r_table", rows)
        rep.add_series(f"log_growth_{sched.name}", [r["l"] for r in rows],
                       {"log8(r_l)/l": [r["log8_r_over_l"] for r in rows]},
                       xlabel="position l", ylabel="log_8(r_l) / l")
        for l0, l1 in _growth_runs(sched, sched.depth):
            ratio = math.log(rs[l1] / rs[l0 - 1]) / ((l1 - l0 + 1) * math.log(sched.base))
            g = {"preset": sched.name, "from": l0, "to": l1 + 1, "steps": l1 - l0 + 1, "ratio": ratio}
            growth_rows.append(g)
            if abs(ratio - 1) > tol:
                growth_bad.append(g)
        if sched.e_positions:
            rep.table("M_N", _m_table(rm))
    rep.table("growth_runs", growth_rows)
    rep.check("r_1 = 1", all(v == 1 for v in r1.values()), r1=r1)
    rep.check("exact block-count recurrence at every position", not exact_bad, failures=exact_bad[:10])
    rep.check("r_{l+1} = a_{l+1} r_l - 1 wherever l, l+1 are off E", not literal_bad, failures=literal_bad[:10])
    rep.check(f"log-growth between E positions within {tol:.0%} of log(base)", not growth_bad,
              failures=growth_bad)
    rep.notes.append("literal a_{l+1} r_l - 1 at steps next to E or past an absorbing hole "
                     "(reported, not asserted): " + ", ".join(f"{x['preset']}:{x['l']}" for x in literal_skipped))
    if oracle:
        bad = []
        for sched in scheds:
            L = _largest_L(sched, ORACLE_BUDGET)
            if L < 1:
                continue
            fq = FiniteQuotient(sched.with_depth(L), L)
            rm = ReturnMap.of(sched)
            if fq.r_heights() != [rm.r(i) for i in range(1, L + 2)]:
                bad.append(sched.name)
        rep.check("oracle: r_i by enumeration", not bad, failures=bad)
    rep.summary = {"literal_skipped": len(literal_skipped), "runs": len(growth_rows)}
    return rep


def _m_table(rm: ReturnMap) -> list:
    """Desk analog of M_N = r_{s-2} / r_N: s' = first E position >= N, s = the next one."""
    s = rm.sched
    E = list(s.e_positions)
    rows = []
    for N in range(1, s.depth + 1):
        later = [e for e in E if e >= N]
        if len(later) < 2 or later[1] - 2 < 1:
            continue
        s_pos = later[1]
        M = Fraction(rm.r(s_pos - 2), rm.r(N))
        rows.append({"N": N, "s_prime": later[0], "s": s_pos, "M_N": M, "log8_M_N": math.log(M, 8)})
    return rows


# ----------------------------------------------------------------------------
# friends

def exp_friends(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    scheds = _schedules(cfg)
    rep = _report("friends", cfg, scheds)
    rows, feas = [], []
    for sched in scheds:
        rm = ReturnMap.of(sched)
        positions = p["positions"] or list(range(2, sched.depth))
        for k, d in itertools.product(positions, p["d"]):
            if not 1 <= k <= sched.depth:
                raise InfeasibleConfig(f"position {k} outside the schedule")
            m = int(d) * rm.r(k)
            try:
                w = make_friend(rm, m)
            except (InfeasibleWitness, GreedyStall) as exc:
                feas.append({"preset": sched.name, "k": k, "d": d, "m": m, "feasible": False, "why": str(exc)})
                continue
            feas.append({"preset": sched.name, "k": k, "d": d, "m": m, "feasible": True, "kind": w.kind})
            chk = verify_witness(rm, w, int(p["samples"]), rng)
            indep = _independent_mass(w.domain)
            nu_indep = rm.holes.measure_in_Y(w.domain) / rm.holes.measure_Y()[0]
            rows.append({"preset": sched.name, "k": k, "d": d, "m": m, "kind": w.kind,
                         "surgery": list(w.surgery), "samples": chk.samples, "friends": chk.friends,
                         "offsets": {str(o): c for o, c in sorted(chk.offsets.items())},
                         "image_outside_Y": chk.image_outside_Y, "ok": chk.ok,
                         "mass": w.mass, "mass_by_residues": indep, "nu_mass": w.nu_mass,
                         "mass_exact": indep == w.mass and nu_indep == w.nu_mass})
    rep.table("witnesses", rows)
    rep.table("feasibility", feas)
    kinds = {r["kind"] for r in rows}
    rep.check("both generator types produced", {"noE", "E"} <= kinds, kinds=sorted(kinds))
    rep.check("every sampled domain point is a friend with offset in {+-1,+-2,+-3}",
              all(r["ok"] for r in rows), witnesses=len(rows),
              failures=[r for r in rows if not r["ok"]][:5])
    rep.check("witness masses equal exact cylinder measures", all(r["mass_exact"] for r in rows))
    rep.summary = {"witnesses": len(rows), "infeasible": sum(not f["feasible"] for f in feas)}
    return rep


def _independent_mass(C: Cylinder) -> Fraction:
    """mu(C) by counting residues, independent of the product formula."""
    try:
        mod, ivs = residues_of(C)
    except OverflowError:
        return C.measure()
    return Fraction(sum(b - a + 1 for a, b in ivs), mod)


# ----------------------------------------------------------------------------
# rigid rank one tower

def exp_tower(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    sched = cfg.build_schedule()
    rm = ReturnMap.of(sched)
    rep = _report("tower", cfg, [sched])
    rows = []
    positions = [int(k) for k in p["positions"]]
    for k in positions:
        if sched.kind(k) != EMPTY or sched.sizes[k] < 6:
            raise InfeasibleConfig(f"tower position {k} must be odd-type (empty) with size >= 6")
    for k in positions:
        rows.append(_tower_at(rm, k, int(p["samples"]), rng))
    rep.table("towers", rows)
    rep.check("base I_k lies in Y", all(r["base_in_Y"] for r in rows))
    rep.check("levels are the prefix cylinders of zeta_0(i) (sampled)", all(r["level_misses"] == 0 for r in rows),
              misses={r["k"]: r["level_misses"] for r in rows})
    rep.check("levels pairwise disjoint (zeta_0 increasing, zeta_0(n_k) = q_k)",
              all(r["disjoint"] for r in rows))
    rep.check("union complement equals excluded-band mass", all(r["union_ok"] for r in rows))
    rep.check("T^{n_k} acts on I_k as S^{q_k} (sampled, band extremes included)",
              all(r["image_misses"] == 0 for r in rows))
    rep.check("rigidity ratio equals 1 - 1/(band width) exactly", all(r["ratio_exact"] for r in rows),
              ratios={r["k"]: r["ratio"] for r in rows})
    rep.check("at least two tower indices", len(rows) >= 2)
    L = int(p["oracle_L"] or 0)
    if oracle or L:
        small = min(positions)
        L = L or small + 1
        rep.table("oracle", [_tower_oracle(sched, small, L)])
        o = rep.tables["oracle"][-1]
        rep.check(f"oracle: tower at {small} on the L={L} quotient", o["ok"], **o)
    rep.add_series("rigidity", [r["k"] for r in rows],
                   {"exact": [float(Fraction(r["ratio"])) for r in rows],
                    "sampled": [r["ratio_sampled"] for r in rows]},
                   xlabel="tower position k", ylabel="nu(T^n I ∩ I) / nu(I)")
    return rep


def _tower_base(sched: AlphabetSchedule, k: int) -> Cylinder:
    a = sched.sizes[k]
    return Cylinder(sched, [(j, 0, 0) for j in range(1, k)] + [(k, 0, a - 5)])


def _tower_at(rm: ReturnMap, k: int, samples: int, rng) -> dict:
    sched = rm.sched
    a, qk = sched.sizes[k], sched.qs[k]
    width = a - 4
    I = _tower_base(sched, k)
    n = rm.r(k)
    base_in_Y = rm.holes.measure_in_Y(I) == I.measure()

    xs = sample_Y(rm.holes, samples, rng, within=I)
    # force the band extremes into the sample
    extremes = [I.constraints[:-1] + ((k, v, v),) for v in (0, a - 5)]
    xs += sample_Y(rm.holes, 2, rng, within=Cylinder(sched, extremes[0]))
    xs += sample_Y(rm.holes, 2, rng, within=Cylinder(sched, extremes[1]))
    vals = rm.value_array([x.value for x in xs])
    lv = rng.integers(0, n, size=len(xs)).tolist()
    lv[:2] = [0, n - 1]
    lvls = rm.value_array(lv)
    z0 = rm.value_array([rm.zeta_value(0, int(i)) for i in lv])
    level_misses = int(np.count_nonzero(rm.zeta_many(vals, lvls) != z0))

    last = rm.zeta_value(0, n - 1)
    disjoint = last < qk and rm.zeta_value(0, n) == qk
    image_misses = int(np.count_nonzero(rm.zeta_many(vals, n) != qk))

    nu_I = rm.holes.nu(I)
    nu_union = n * nu_I
    excluded = rm.holes.nu(Cylinder(sched, [(k, a - 4, a - 1)]))
    union_ok = 1 - nu_union == excluded

    # T^n I = S^{q_k} I shifts the band up by one; intersect as cylinders
    shifted = Cylinder(sched, I.constraints[:-1] + ((k, 1, a - 4),))
    inter = I.intersect(shifted)
    ratio = rm.holes.nu(inter) / nu_I
    ratio_exact = ratio == 1 - Fraction(1, width)
    img = rm.digits_of(rm.t_power_many(vals, n), k)
    ratio_sampled = float(np.mean((img[:, : k - 1] == 0).all(axis=1) & (img[:, k - 1] <= a - 5)))
    return {"k": k, "size": a, "band_width": width, "n_k": n, "base_in_Y": base_in_Y,
            "level_misses": level_misses, "disjoint": disjoint, "image_misses": image_misses,
            "nu_I": nu_I, "nu_union": nu_union, "excluded_band_nu": excluded, "union_ok": union_ok,
            "ratio": ratio, "closed_form": 1 - Fraction(1, width), "ratio_exact": ratio_exact,
            "ratio_sampled": ratio_sampled, "samples": len(xs)}


def _tower_oracle(sched: AlphabetSchedule, k: int, L: int) -> dict:
    """Enumerate the tower inside a finite quotient and test every claim state by state."""
    s = sched.with_depth(L)
    try:
        fq = FiniteQuotient(s, L, ORACLE_BUDGET)
    except ValueError as exc:
        raise InfeasibleConfig(f"tower oracle: {exc}") from exc
    rm = ReturnMap.of(s)
    a = s.sizes[k]
    I = _tower_base(s, k)
    base_mask = fq.cylinder_mask(I)
    base_idx = fq.rank[np.flatnonzero(base_mask)]
    n = rm.r(k)
    m = fq.n_Y
    seen = np.zeros(fq.size, dtype=np.int64)
    levels_match = True
    for i in range(n):
        lvl = fq.Y[(base_idx + i) % m]
        seen[lvl] += 1
        digits = s.encode(rm.zeta_value(0, i))[: k - 1]
        C = Cylinder(s, [(j + 1, d, d) for j, d in enumerate(digits)] + [(k, 0, a - 5)])
        mask = fq.cylinder_mask(C)
        levels_match &= bool(mask[lvl].all()) and int(mask.sum()) == len(lvl)
    image = fq.Y[(base_idx + n) % m]
    ratio = Fraction(int(base_mask[image].sum()), len(base_idx))
    ok = bool(base_mask[fq.Y].sum() == base_mask.sum()) and seen.max() <= 1 and levels_match \
        and ratio == 1 - Fraction(1, a - 4)
    return {"k": k, "L": L, "states": fq.size, "base_states": len(base_idx), "levels": n,
            "max_multiplicity": int(seen.max()), "levels_match": levels_match, "ratio": ratio, "ok": ok}


# ----------------------------------------------------------------------------
# weak mixing witnesses

def admissible_indices(sched: AlphabetSchedule) -> list:
    """Indices two below an E position whose neighbours ``i - 1, i, i + 1`` are all off E.

    The B-witness constrains digits 1, i - 1 and i by base-8 values, so all
    three must carry the base alphabet.
    """
    out = []
    for e in sched.e_positions:
        i = e - 2
        if i >= 3 and not any(sched.in_E(j) for j in (i - 1, i, i + 1)):
            out.append(i)
    return out


def exp_weak_mixing(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    sched = cfg.build_schedule()
    rm = ReturnMap.of(sched)
    mcfg = cfg.metric_config()
    rep = _report("weak_mixing", cfg, [sched], metric=True)
    idx = [int(i) for i in p["indices"]] if p["indices"] else admissible_indices(sched)
    if len(idx) < 2:
        raise InfeasibleConfig(f"need two admissible indices, have {idx}")
    for i in idx:
        if i < 3 or i + 1 > sched.depth or any(sched.in_E(j) for j in (i - 1, i, i + 1)):
            raise InfeasibleConfig(f"index {i} is not admissible")
    samples = int(p["samples"])
    base = sample_values(rm, samples, rng)
    depth = sched.depth
    xd = rm.digits_of(base, depth)
    tx = rm.digits_of(rm.t_power_many(base, 1), depth)
    rep.truncation = {"depth": depth, "distance_tail": mcfg.theta ** depth}
    rows = []
    for i in idx:
        qi = sched.qs[i]
        U = np.ones(samples, dtype=bool)
        for h in rm.holes.holes:
            if h.top > i:
                hits = rm.holes.hole_count_below(h, base + qi + 1) - rm.holes.hole_count_below(h, base)
                U &= np.asarray(hits == 0, dtype=bool)
        A = U & (xd[:, i - 1] <= 4)
        B = U & (xd[:, i - 1] == 7) & (xd[:, 0] < 5) & (xd[:, i - 2] < 6)
        y = rm.t_power_many(base, rm.r(i))
        yd = rm.digits_of(y, depth)
        fA = np.where(A, distance_rows(yd, xd, mcfg), 0.0)
        fB = np.where(B, distance_rows(yd, tx, mcfg), 0.0)
        sA = rm.digits_of((base + qi) % rm.top, depth)
        sB = rm.digits_of((base + qi + 1) % rm.top, depth)
        rows.append({
            "i": i, "n_i": rm.r(i), "nu_U": float(U.mean()), "nu_A": float(A.mean()), "nu_A_se": _se(A.astype(float)),
            "nu_B": float(B.mean()), "nu_B_se": _se(B.astype(float)),
            "int_A": float(fA.mean()), "int_A_se": _se(fA), "int_B": float(fB.mean()), "int_B_se": _se(fB),
            "A_equals_S_qi": float((yd[A] == sA[A]).all(axis=1).mean()) if A.any() else None,
            "B_equals_S_qi_plus_1": float((yd[B] == sB[B]).all(axis=1).mean()) if B.any() else None,
            "theta_i": mcfg.theta ** i,
        })
    rep.table("witness_integrals", rows)
    lower = 0.5 - 0.125
    rep.check("nu(A_i) > 1/2 - 1/8 within 3 SE", all(r["nu_A"] + 3 * r["nu_A_se"] > lower for r in rows),
              nu_A={r["i"]: r["nu_A"] for r in rows})
    rep.check("nu(B_i) > 1/128 within 3 SE", all(r["nu_B"] + 3 * r["nu_B_se"] > 1 / 128 for r in rows),
              nu_B={r["i"]: r["nu_B"] for r in rows})
    rep.check("T^{n_i} = S^{q_i} on sampled A_i and S^{q_i + 1} on sampled B_i",
              all(r["A_equals_S_qi"] == 1.0 and r["B_equals_S_qi_plus_1"] == 1.0 for r in rows))
    factor = float(p["factor"])
    dec = []
    for r0, r1 in zip(rows, rows[1:]):
        for key in ("int_A", "int_B"):
            slack = 3 * math.hypot(r0[key + "_se"], factor * r1[key + "_se"])
            dec.append({"from": r0["i"], "to": r1["i"], "integral": key,
                        "ratio": r0[key] / r1[key] if r1[key] else None,
                        "ok": r0[key] - factor * r1[key] >= -slack})
    rep.table("decay", dec)
    rep.check(f"both integrals drop by >= {factor:g}x between successive admissible indices",
              all(d["ok"] for d in dec), steps=dec)
    rep.add_series("integrals", [r["i"] for r in rows],
                   {"int_A": [r["int_A"] for r in rows], "int_B": [r["int_B"] for r in rows]},
                   xlabel="admissible index i", ylabel="integral", logy=True)
    rep.summary = {"indices": idx}
    return rep


# ----------------------------------------------------------------------------
# barycenters

def exp_barycenter(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    sched = cfg.build_schedule()
    rm = ReturnMap.of(sched)
    mcfg = cfg.metric_config()
    rep = _report("barycenter", cfg, [sched], metric=True)
    trunc = int(p["truncation"])
    rep.truncation = {"depth": trunc, "kr_tail_bound": mcfg.theta ** trunc}
    targets = [int(b) for b in p["targets"]]
    w_pos = [q for q in sched.w_positions if q < sched.depth]
    if len(targets) > 1:
        if not w_pos:
            raise InfeasibleConfig("barycenters need a W-type position below the depth")
        barycenter_step(rm, targets[-1], targets[0], w_pos[0])
    seeds = [cfg.seed + k for k in range(int(p["n_seeds"]))]
    rows, series = [], {}
    for seed in seeds:
        res = find_barycenter(rm, targets, float(p["eps"]), budget=int(p["budget"]),
                              samples=int(p["samples"]), truncation=trunc, seed=seed, cfg=mcfg)
        reorder = reordering_fraction(rm, targets, res.powers, float(p["reorder_eps"]),
                                      samples=int(p["reorder_samples"]), seed=seed, cfg=mcfg)
        ratio = res.final / res.initial if res.initial else 0.0
        rows.append({"seed": seed, "initial": res.initial, "final": res.final, "ratio": ratio,
                     "stages": len(res.history) - 1, "stop": res.stop, "powers": res.powers,
                     "reordering_fraction": reorder, "history": res.history})
        series[f"seed {seed}"] = [h["distance"] for h in res.history]
    rep.table("runs", rows)
    half = float(p["halving"])
    rep.check(f"kr(J(b_hat), average) <= {half:g} x initial on every seed",
              all(r["ratio"] <= half for r in rows), ratios={r["seed"]: r["ratio"] for r in rows})
    trivial = find_barycenter(rm, targets[:1], float(p["eps"]), samples=200, truncation=trunc, seed=cfg.seed)
    rep.check("single target is its own barycenter", trivial.converged and trivial.final < 1e-12)
    n_stages = max(len(v) for v in series.values())
    rep.add_series("kr_trace", list(range(n_stages)),
                   {k: v + [None] * (n_stages - len(v)) for k, v in series.items()},
                   xlabel="stage", ylabel=f"max kr to average (theta={mcfg.theta:g})")
    rep.summary = {"mean_ratio": float(np.mean([r["ratio"] for r in rows]))}
    return rep


def exp_poulsen(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    sched = cfg.build_schedule()
    rm = ReturnMap.of(sched)
    mcfg = cfg.metric_config()
    rep = _report("poulsen", cfg, [sched], metric=True)
    trunc = int(p["truncation"])
    rep.truncation = {"depth": trunc, "kr_tail_bound": mcfg.theta ** trunc}
    targets = [int(b) for b in p["targets"]]
    weights = [_frac(w) for w in p["weights"]]
    if len(weights) != len(targets) or sum(weights) != 1 or min(weights) <= 0:
        raise InfeasibleConfig("weights must be positive, one per target, summing to 1")
    k = int(p["rigidity_position"])
    if sched.kind(k) != EMPTY:
        raise InfeasibleConfig(f"rigidity position {k} must be odd-type (empty)")
    if not any(w > k for w in sched.w_positions):
        raise InfeasibleConfig(f"no W-type position above the rigidity position {k}")
    denom = math.lcm(*[w.denominator for w in weights])
    copies = [int(w * denom) for w in weights]
    rk = rm.r(k)
    dup = [(n, n + ell * rk) for n, c in zip(targets, copies) for ell in range(c)]
    eps = float(p["eps"])
    base = sample_values(rm, int(p["samples"]), np.random.default_rng(cfg.seed))
    J = {b: offdiag_joining(rm, b, truncation=trunc, base=base) for b in {x for pair in dup for x in pair}}
    drows = [{"target": n, "duplicate": a, "kr": kr_distance(J[a], J[n], mcfg)} for n, a in dup if a != n]
    rep.table("duplicates", drows)
    rep.check("duplicated targets satisfy kr(J(a), J(n)) < eps/2", all(r["kr"] < eps / 2 for r in drows),
              eps=eps, worst=max((r["kr"] for r in drows), default=0.0))
    powers = [a for _, a in dup]
    res = find_barycenter(rm, powers, eps, budget=int(p["budget"]), samples=int(p["samples"]),
                          truncation=trunc, seed=cfg.seed, cfg=mcfg)
    goal = mixture([J[n] for n in targets], [float(w) for w in weights])
    finals = [kr_distance(offdiag_joining(rm, b, truncation=trunc, base=base), goal, mcfg) for b in res.powers]
    initial = max(kr_distance(J[n], goal, mcfg) for n in targets)
    rep.table("barycenter", [{"stage": h["stage"], "position": h["position"], "distance": h["distance"],
                              "per_power": h["per_power"]} for h in res.history])
    rep.check("weighted target: max kr to sum beta_i J(n_i) decreases", max(finals) < initial,
              initial=initial, final=max(finals))
    rep.summary = {"copies": copies, "rigidity_time": rk, "initial": initial, "final": max(finals),
                   "ratio": max(finals) / initial, "stop": res.stop}
    rep.notes.append("one W stage is feasible at desk scale; the halving ratio is reported, not asserted")
    rep.add_series("kr_trace", [h["stage"] for h in res.history],
                   {"max kr to duplicated average": [h["distance"] for h in res.history]},
                   xlabel="stage", ylabel=f"kr (theta={mcfg.theta:g})")
    return rep


# ----------------------------------------------------------------------------
# reduction

def exp_reduction(cfg: ExperimentConfig, oracle: bool = False) -> Report:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    rep = _report("reduction", cfg)
    N, eps, d = int(p["N"]), _frac(p["eps"]), int(p["d"])
    rows = []
    for inst in p["instances"]:
        sched = AlphabetSchedule.from_dict({"preset": inst["preset"], "depth": inst.get("depth")})
        if sched.name not in rep.schedules:
            rep.add_schedule(sched)
        rm = ReturnMap.of(sched)
        k = int(inst["p"])
        if not 2 <= k <= sched.depth or abs(d) > sched.sizes[k] // 2:
            raise InfeasibleConfig(f"instance {inst}: d={d} does not fit position {k}")
        i = int(inst.get("i") or d * rm.r(k) + rm.r(k - 1))
        res = reduce_full(rm, i, N, eps, p["w_rule"])
        masses = [sum((rm.holes.nu(t.A) for t in lvl), Fraction(0)) for lvl in res.levels]
        est = compute_PQ(rm, i, N, eps, r=1, samples=int(p["samples"]), rng=rng, w_rule=p["w_rule"])
        rows.append({"preset": sched.name, "p": k, "i": i, "sigma": est.sigma, "d": est.d, "a": est.a,
                     "rounds": len(res.levels) - 1, "triples": len(res.triples),
                     "mass_by_depth": masses, "mass_exact": all(m == 1 for m in masses),
                     "P1": est.P_hat, "P1_se": est.P_se, "lemma": est.lemma_hat, "lemma_se": est.lemma_se,
                     "bound": est.bound,
                     "P1_ok": est.P_hat <= est.bound + 3 * est.P_se, "lemma_ok": est.bound_ok,
                     "cover_nu": est.cover_nu, "cover_misses": est.cover_misses, "cover_ok": est.cover_ok,
                     "cover_checked": est.cover_nu is not None})
    rep.table("instances", rows)
    rep.check("mass conservation exact at every depth", all(r["mass_exact"] for r in rows))
    rep.check("nu(P_1) <= sum 4 nu(C)|d|/a within 3 SE", all(r["P1_ok"] and r["lemma_ok"] for r in rows),
              values={f"{r['preset']}:{r['p']}": [r["P1"], r["lemma"], r["bound"]] for r in rows})
    rep.check("cover bound 99 nu(P_1) >= nu(cover), no sampled bad point outside the cover",
              all(r["cover_ok"] and r["cover_checked"] for r in rows))
    rep.check("grid has at least 5 instances", len(rows) >= 5)
    rep.add_series("disagreement", list(range(len(rows))),
                   {"P_1": [r["P1"] for r in rows], "bound": [r["bound"] for r in rows]},
                   xlabel="instance", ylabel="mass", logy=True)
    return rep


# ----------------------------------------------------------------------------
# registry

LAB = {"preset": "lab"}

EXPERIMENTS = {
    "same_hit": (exp_same_hit, {"schedule": None, "params": {
        "presets": [{"preset": "paper", "depth": 6}, {"preset": "desk"}, {"preset": "desk2"}, {"preset": "lab"}],
        "points": 100, "max_i": None}}),
    "oracle": (exp_oracle, {"schedule": None, "params": {
        "quotients": [{"preset": "paper", "L": 6}, {"preset": "desk", "L": 7}, {"preset": "desk2", "L": 8}],
        "horizons": [1, 2, 3, 7, 64, 500, 999, 1000], "random_queries": 1000, "literal_states": 100,
        "budget": ORACLE_BUDGET}}),
    "growth": (exp_growth, {"schedule": None, "params": {
        "presets": [{"preset": "paper", "depth": 60}, {"preset": "desk"}, {"preset": "desk2"},
                    {"preset": "lab"}, {"preset": "wide"}],
        "tolerance": 0.05}}),
    "friends": (exp_friends, {"schedule": None, "params": {
        "presets": [LAB], "positions": [2, 3, 4, 5, 7, 11, 13, 15], "d": [1, -1, 2], "samples": 1000}}),
    "tower": (exp_tower, {"schedule": LAB, "params": {"positions": [2, 7, 15], "samples": 2000, "oracle_L": 4}}),
    "weak_mixing": (exp_weak_mixing, {"schedule": LAB, "params": {
        "indices": None, "samples": 10_000, "factor": 4}}),
    "barycenter": (exp_barycenter, {"schedule": LAB, "params": {
        "targets": [1, 2], "eps": 0.125, "budget": 4, "samples": 10_000, "truncation": 8, "n_seeds": 3,
        "halving": 0.5, "reorder_eps": 0.125, "reorder_samples": 2000}}),
    "poulsen": (exp_poulsen, {"schedule": {"preset": "wide"}, "params": {
        "targets": [1, 2], "weights": ["1/3", "2/3"], "eps": 0.1, "rigidity_position": 5,
        "budget": 4, "samples": 10_000, "truncation": 8}}),
    "reduction": (exp_reduction, {"schedule": None, "params": {
        "instances": [{"preset": "desk", "p": 3}, {"preset": "desk", "p": 4}, {"preset": "lab", "p": 2},
                      {"preset": "lab", "p": 7}, {"preset": "lab", "p": 11}, {"preset": "lab", "p": 15}],
        "d": 2, "N": 1, "eps": "1/2", "samples": 10_000, "w_rule": "matched"}}),
}


def run_experiment(name: str, cfg: ExperimentConfig, oracle: bool = False) -> Report:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}")
    fn, defaults = EXPERIMENTS[name]
    full = resolve(cfg, name, defaults)
    try:
        return fn(full, oracle=oracle)
    except InfeasibleBand as exc:
        raise InfeasibleConfig(str(exc)) from exc
