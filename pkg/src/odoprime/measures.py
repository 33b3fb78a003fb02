"""Metrics on Y and Y x Y, Wasserstein-1 on the digit tree, off-diagonal joinings,
the barycenter iteration, shift witnesses and the operator distance D."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .holes import sample_Y
from .odometer import Cylinder, Point
from .return_map import ReturnMap
from .schedule import WTYPE


class MismatchedSpaces(ValueError):
    pass


class InfeasibleBand(ValueError):
    pass


@dataclass(frozen=True)
class MetricConfig:
    """``d(x, y) = theta ** (first disagreeing position)``; pairs combine by max."""

    theta: float = 0.5

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")

    @property
    def label(self) -> str:
        return f"theta^first-disagreement, theta={self.theta}, product=max"


DEFAULT_METRIC = MetricConfig()


def _digits(x):
    return x.digits if isinstance(x, Point) else tuple(x)


def first_disagreement(x, y) -> int | None:
    dx, dy = _digits(x), _digits(y)
    n = max(len(dx), len(dy))
    for i in range(n):
        a = dx[i] if i < len(dx) else 0
        b = dy[i] if i < len(dy) else 0
        if a != b:
            return i + 1
    return None


def metric(x, y, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    k = first_disagreement(x, y)
    return 0.0 if k is None else cfg.theta**k


def product_metric(p, q, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    return max(metric(p[0], q[0], cfg), metric(p[1], q[1], cfg))


def first_disagreement_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise first disagreeing position (1-based); 0 where rows agree.

    Pair arrays of shape ``(n, t, 2)`` are compared on the interleaved digits,
    which realizes the max metric.
    """
    a = a.reshape(a.shape[0], a.shape[1], -1)
    b = b.reshape(b.shape[0], b.shape[1], -1)
    diff = (a != b).any(axis=2)
    hit = diff.any(axis=1)
    return np.where(hit, diff.argmax(axis=1) + 1, 0)


def distance_rows(a, b, cfg: MetricConfig = DEFAULT_METRIC) -> np.ndarray:
    k = first_disagreement_rows(a, b)
    return np.where(k > 0, cfg.theta ** k.astype(float), 0.0)


# ----------------------------------------------------------------------------
# empirical measures

@dataclass
class EmpiricalMeasure:
    """Weighted atoms on truncated digit vectors.

    ``points`` has shape ``(n, t)`` on Y or ``(n, t, 2)`` on Y x Y; digits
    beyond the truncation ``t`` are forgotten, which moves any distance by at
    most ``theta ** (t + 1)``.
    """

    points: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.ndim not in (2, 3):
            raise ValueError("points must be (n, t) or (n, t, 2)")
        if len(self.points) != len(self.weights):
            raise ValueError("one weight per point")
        if (self.weights < 0).any():
            raise ValueError("weights must be nonnegative")

    @classmethod
    def uniform(cls, points, label=""):
        points = np.asarray(points, dtype=np.int64)
        return cls(points, np.full(len(points), 1.0 / len(points)), label)

    @property
    def is_pair(self) -> bool:
        return self.points.ndim == 3

    @property
    def truncation(self) -> int:
        return self.points.shape[1]

    def total(self) -> float:
        return float(self.weights.sum())

    def normalized(self) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.points, self.weights / self.weights.sum(), self.label)

    def merge(self, other: "EmpiricalMeasure", w: float = 0.5) -> "EmpiricalMeasure":
        """Convex combination ``(1 - w) self + w other``."""
        _check_same(self, other)
        return EmpiricalMeasure(
            np.concatenate([self.points, other.points]),
            np.concatenate([(1 - w) * self.weights, w * other.weights]),
            self.label,
        )

    def marginal(self, k: int) -> "EmpiricalMeasure":
        if not self.is_pair:
            raise MismatchedSpaces("marginals exist only on Y x Y")
        return EmpiricalMeasure(self.points[:, :, k], self.weights)

    def cylinder_mass(self, cons: dict) -> float:
        """Mass of the atoms whose digits satisfy ``{pos: (lo, hi)}``."""
        ok = np.ones(len(self.points), dtype=bool)
        for p, (lo, hi) in cons.items():
            col = self.points[:, p - 1]
            ok &= (col >= lo) & (col <= hi)
        return float(self.weights[ok].sum())

    def to_json(self, limit: int = 0):
        out = {"pair": self.is_pair, "truncation": self.truncation, "atoms": len(self.points),
               "label": self.label}
        if limit:
            out["sample"] = [[p.tolist(), float(w)] for p, w in zip(self.points[:limit], self.weights[:limit])]
        return out


def mixture(measures: list, weights=None) -> EmpiricalMeasure:
    weights = np.full(len(measures), 1.0 / len(measures)) if weights is None else np.asarray(weights, float)
    for m in measures[1:]:
        _check_same(measures[0], m)
    return EmpiricalMeasure(
        np.concatenate([m.points for m in measures]),
        np.concatenate([w * m.weights / m.total() for m, w in zip(measures, weights)]),
    )


def _check_same(m1: EmpiricalMeasure, m2: EmpiricalMeasure):
    if m1.points.shape[1:] != m2.points.shape[1:]:
        raise MismatchedSpaces(f"spaces differ: {m1.points.shape[1:]} vs {m2.points.shape[1:]}")


def kr_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    """Exact W1 for the first-disagreement ultrametric via the tree formula.

    A node at depth ``m`` is a digit prefix (paired digits on Y x Y).  The
    edge into it has length ``(theta^m - theta^(m+1)) / 2``, except at the
    leaf level ``t`` where it is ``theta^t / 2``; W1 is the sum over nodes of
    edge length times the mass imbalance below the node.
    """
    _check_same(m1, m2)
    th = cfg.theta
    w1 = m1.weights / m1.total()
    w2 = m2.weights / m2.total()
    pts = np.concatenate([m1.points, m2.points])
    n, t = pts.shape[0], pts.shape[1]
    flat = pts.reshape(n, t, -1)
    signed = np.concatenate([w1, -w2])
    # running node labels: refine prefix classes one digit at a time
    labels = np.zeros(n, dtype=np.int64)
    total = 0.0
    for m in range(1, t + 1):
        cols = flat[:, m - 1, :]
        key = np.column_stack([labels, cols])
        _, labels = np.unique(key, axis=0, return_inverse=True)
        labels = labels.reshape(-1)
        imbalance = np.bincount(labels, weights=signed)
        length = th**m / 2 if m == t else (th**m - th ** (m + 1)) / 2
        total += length * float(np.abs(imbalance).sum())
    return total


def kr_lp(m1: EmpiricalMeasure, m2: EmpiricalMeasure, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    """W1 by linear programming on the cost matrix (small supports only)."""
    from scipy.optimize import linprog

    _check_same(m1, m2)
    a = m1.weights / m1.total()
    b = m2.weights / m2.total()
    n1, n2 = len(a), len(b)
    C = np.array([[distance_rows(m1.points[i:i + 1], m2.points[j:j + 1], cfg)[0] for j in range(n2)]
                  for i in range(n1)])
    A_eq = []
    for i in range(n1):
        row = np.zeros((n1, n2))
        row[i, :] = 1
        A_eq.append(row.ravel())
    for j in range(n2):
        row = np.zeros((n1, n2))
        row[:, j] = 1
        A_eq.append(row.ravel())
    res = linprog(C.ravel(), A_eq=np.array(A_eq), b_eq=np.concatenate([a, b]), bounds=(0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(res.fun)


# ----------------------------------------------------------------------------
# joinings

def sample_values(rm: ReturnMap, count: int, rng) -> np.ndarray:
    xs = sample_Y(rm.holes, count, rng)
    return rm.value_array([x.value for x in xs])


def _pairs(rm: ReturnMap, xv: np.ndarray, yv: np.ndarray, truncation: int) -> np.ndarray:
    return np.stack([rm.digits_of(xv, truncation), rm.digits_of(yv, truncation)], axis=2)


def offdiag_joining(rm: ReturnMap, n: int, sample_count: int = 10_000, truncation: int = 8,
                    seed=None, base: np.ndarray | None = None) -> EmpiricalMeasure:
    """Empirical J(n): nu-samples ``x`` paired with ``T^n x``.

    ``base`` reuses given sample values (common random numbers across powers).
    """
    if base is None:
        base = sample_values(rm, sample_count, np.random.default_rng(seed))
    y = rm.t_power_many(base, int(n))
    return EmpiricalMeasure.uniform(_pairs(rm, base, y, truncation), label=f"J({n})")


def birkhoff_joining(rm: ReturnMap, x, b: int, L: int, truncation: int = 8) -> EmpiricalMeasure:
    """``(1/L) sum_{i=1..L} delta_(T^i x, T^(i+b) x)``."""
    x0 = x.value if isinstance(x, Point) else int(x)
    first = rm.orbit(x0, 1, L + 1)
    second = rm.orbit(x0, 1 + b, L + 1 + b)
    return EmpiricalMeasure.uniform(_pairs(rm, first, second, truncation), label=f"B({b},{L})")


# ----------------------------------------------------------------------------
# barycenter

@dataclass
class BarycenterStep:
    b: int
    b_prime: int
    position: int
    power: int
    A: Cylinder
    B: Cylinder
    u: int
    v: int

    def to_json(self):
        return {"b": self.b, "b_prime": self.b_prime, "position": self.position, "power": self.power,
                "A": self.A.to_json(), "B": self.B.to_json(), "u": self.u, "v": self.v}


def imitation_bands(size: int, u: int, v: int):
    """Digit bands at a W-type position where ``T^(u + v r)`` imitates ``T^u`` and ``T^(u - v)``."""
    k = size // 2
    m = abs(u) + abs(v)
    return (m + 1, k - m - 1), (m + k + 1, 2 * k - m - 3)


def barycenter_step(rm: ReturnMap, b: int, b_prime: int, p: int) -> BarycenterStep:
    """``p = b + (b - b') r_p`` with the cylinders where it imitates ``b`` and ``b'``."""
    s = rm.sched
    if s.kind(p) != WTYPE:
        raise InfeasibleBand(f"position {p} is not W-type")
    u, v = int(b), int(b) - int(b_prime)
    (alo, ahi), (blo, bhi) = imitation_bands(s.sizes[p], u, v)
    if alo > ahi or blo > bhi:
        raise InfeasibleBand(f"bands empty at position {p} (size {s.sizes[p]}, |u|+|v| = {abs(u) + abs(v)})")
    A = Cylinder(s, [(p, alo, ahi)])
    B = Cylinder(s, [(p, blo, bhi)])
    return BarycenterStep(int(b), int(b_prime), p, u + v * rm.r(p), A, B, u, v)


@dataclass
class BarycenterResult:
    targets: list
    powers: list
    history: list = field(default_factory=list)
    converged: bool = False
    stop: str = ""

    @property
    def initial(self) -> float:
        return self.history[0]["distance"]

    @property
    def final(self) -> float:
        return self.history[-1]["distance"]

    def to_json(self):
        return {"targets": self.targets, "powers": [str(p) for p in self.powers], "history": self.history,
                "converged": self.converged, "stop": self.stop}


def _joining_distances(rm, powers, avg, base, truncation, cfg):
    return [kr_distance(offdiag_joining(rm, b, truncation=truncation, base=base), avg, cfg) for b in powers]


def find_barycenter(rm: ReturnMap, targets: list, eps: float, budget: int = 4, samples: int = 10_000,
                    truncation: int = 8, seed=0, positions: list | None = None,
                    cfg: MetricConfig = DEFAULT_METRIC) -> BarycenterResult:
    """Iterate the cyclic pairing ``b^(p) <- step(b^(p-1), b^(p))`` over W-type positions.

    All distances use one sample of base points, so the trace compares
    joinings on common random numbers.
    """
    targets = [int(b) for b in targets]
    rng = np.random.default_rng(seed)
    base = sample_values(rm, samples, rng)
    joins = [offdiag_joining(rm, b, truncation=truncation, base=base) for b in targets]
    avg = mixture(joins)
    powers = list(targets)
    dist = [kr_distance(j, avg, cfg) for j in joins]
    res = BarycenterResult(targets, powers, [{"stage": 0, "position": None, "distance": max(dist),
                                              "per_power": dist}])
    if len(targets) == 1 or max(dist) < eps:
        res.converged = True
        res.stop = "converged"
        return res
    positions = positions if positions is not None else [p for p in rm.sched.w_positions if p < rm.sched.depth]
    d = len(powers)
    for stage, p in enumerate(positions[:budget], start=1):
        try:
            steps = [barycenter_step(rm, powers[(k - 1) % d], powers[k], p) for k in range(d)]
        except InfeasibleBand as exc:
            res.stop = f"infeasible at position {p}: {exc}"
            break
        powers = [st.power for st in steps]
        dist = _joining_distances(rm, powers, avg, base, truncation, cfg)
        res.history.append({"stage": stage, "position": p, "distance": max(dist), "per_power": dist,
                            "mass_A": float(rm.holes.nu(steps[0].A)), "mass_B": float(rm.holes.nu(steps[0].B))})
        res.powers = powers
        if max(dist) < eps:
            res.converged = True
            res.stop = "converged"
            break
    else:
        res.stop = res.stop or "budget exhausted"
    return res


def reordering_fraction(rm: ReturnMap, targets: list, powers: list, eps: float, samples: int = 2000,
                        seed=0, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    """Share of sampled x admitting a permutation with ``d(T^b_j x, T^bhat_pi(j) x) < eps`` for all j."""
    base = sample_values(rm, samples, np.random.default_rng(seed))
    depth = rm.sched.depth
    tgt = [rm.digits_of(rm.t_power_many(base, b), depth) for b in targets]
    hat = [rm.digits_of(rm.t_power_many(base, b), depth) for b in powers]
    d = len(targets)
    close = np.zeros((d, d, samples), dtype=bool)
    for i in range(d):
        for j in range(d):
            close[i, j] = distance_rows(tgt[i], hat[j], cfg) < eps
    ok = np.zeros(samples, dtype=bool)
    for perm in itertools.permutations(range(d)):
        ok |= np.all([close[i, perm[i]] for i in range(d)], axis=0)
    return float(ok.mean())


# ----------------------------------------------------------------------------
# shift witness

@dataclass
class ShiftWitness:
    a: int
    b: int
    position: int
    G: Cylinder
    d_k: int
    half: int  # the power multiplier is half * r_p
    window: int  # r_{p-1}

    def to_json(self):
        return {"a": self.a, "b": self.b, "position": self.position, "G": self.G.to_json(),
                "d_k": str(self.d_k), "half": self.half, "window": self.window}


SHIFT_READINGS = ("size", "literal")


def shift_witness(rm: ReturnMap, a: int, b: int, p: int, reading: str = "size") -> ShiftWitness:
    """``G = {x_p in [k/3 + |a-b|, k/2 - 2 - |a-b|], x_(p-1) = 3}`` and ``d_k = a + (a-b) r_p``.

    With ``reading="size"`` ``k`` is the digit size at ``p`` and the
    power multiplier is ``k/2``, so the shifted digit lands in the upper half
    where ``T^(d_k)`` imitates ``T^b``.  ``"literal"`` takes ``k`` as half the
    size (``a_p = 2k``), which leaves the shifted digit in the lower half.
    """
    if reading not in SHIFT_READINGS:
        raise ValueError(f"reading must be one of {SHIFT_READINGS}")
    s = rm.sched
    if s.kind(p) != WTYPE:
        raise InfeasibleBand(f"position {p} is not W-type")
    size = s.sizes[p]
    k = size if reading == "size" else size // 2
    gap = abs(a - b)
    lo = -(-k // 3) + gap
    hi = k // 2 - 2 - gap
    if lo > hi or p < 2 or s.sizes[p - 1] <= 3:
        raise InfeasibleBand(f"shift band empty at position {p} (size {size}, |a-b| = {gap})")
    G = Cylinder(s, [(p - 1, 3, 3), (p, lo, hi)])
    return ShiftWitness(int(a), int(b), p, G, int(a) + (int(a) - int(b)) * rm.r(p), k // 2, rm.r(p - 1))


def shift_jx(rm: ReturnMap, w: ShiftWitness, xv: np.ndarray) -> np.ndarray:
    """``j_x = #{W_p hits along S^i x, i < zeta_x(half r_p)} - half``."""
    h = rm.holes.hole_at(w.position)
    z = rm.zeta_many(xv, w.half * rm.r(w.position))
    hits = rm.holes.hole_count_below(h, xv + z) - rm.holes.hole_count_below(h, xv)
    return hits - w.half


@dataclass
class ShiftCheck:
    samples: int
    follow_a: float  # share of (x, l) pairs agreeing below p
    follow_b: float
    occupation: list  # per sampled x: share of window with d(T^(a+l) x, T^(b+l) x) > c
    threshold: float

    def to_json(self):
        occ = np.asarray(self.occupation)
        return {"samples": self.samples, "follow_a": self.follow_a, "follow_b": self.follow_b,
                "occupation_mean": float(occ.mean()) if len(occ) else None,
                "occupation_min": float(occ.min()) if len(occ) else None,
                "occupation_ok_share": float((occ > self.threshold).mean()) if len(occ) else None,
                "threshold": self.threshold}


def check_shift(rm: ReturnMap, w: ShiftWitness, c: float, samples: int = 200, offsets: int = 9,
                occupation_samples: int = 50, max_window: int = 4001, seed=0,
                cfg: MetricConfig = DEFAULT_METRIC) -> ShiftCheck:
    """Sample G and test both follow conclusions and the occupation frequency.

    The second conclusion is tested as ``T^(d_k + l + M - j_x) x`` against
    ``T^(b + l) x``: with ``j_x`` as defined, ``S^(half q_p) x = T^(M - j_x) x``.
    Long windows are subsampled (``max_window`` offsets per point).
    """
    rng = np.random.default_rng(seed)
    xs = sample_Y(rm.holes, samples, rng, within=w.G)
    xv = rm.value_array([x.value for x in xs])
    jx = shift_jx(rm, w, xv)
    M = w.half * rm.r(w.position)
    p = w.position
    ls = sorted({-w.window, 0, w.window} | set(int(v) for v in rng.integers(-w.window, w.window + 1, offsets)))
    fa = fb = 0
    for l in ls:
        lhs_a = rm.digits_of(rm.t_power_many(xv, jx + (l + w.a)), p - 1)
        rhs_a = rm.digits_of(rm.t_power_many(xv, l + w.a + M), p - 1)
        fa += int((lhs_a == rhs_a).all(axis=1).sum())
        lhs_b = rm.digits_of(rm.t_power_many(xv, (w.d_k + l + M) - jx), p - 1)
        rhs_b = rm.digits_of(rm.t_power_many(xv, w.b + l), p - 1)
        fb += int((lhs_b == rhs_b).all(axis=1).sum())
    total = len(ls) * samples
    occ = []
    depth = rm.sched.depth
    span = 2 * w.window + 1
    for x in xs[:occupation_samples]:
        if span <= max_window:
            ls_occ = np.arange(-w.window, w.window + 1)
        else:
            ls_occ = rng.integers(-w.window, w.window + 1, max_window)
        base = rm.value_array([x.value] * len(ls_occ))
        ta = rm.t_power_many(base, rm.value_array((ls_occ + w.a).tolist()))
        tb = rm.t_power_many(base, rm.value_array((ls_occ + w.b).tolist()))
        dist = distance_rows(rm.digits_of(ta, depth), rm.digits_of(tb, depth), cfg)
        occ.append(float((dist > c).mean()))
    return ShiftCheck(samples, fa / total, fb / total, occ, 1.0 / 9.0)


# ----------------------------------------------------------------------------
# the operator distance D

def _frequencies(n: int, depth: int) -> list:
    out = [0]
    m = 1
    while len(out) < min(depth, n):
        out.append(m)
        if len(out) < min(depth, n) and (n - m) % n != m:
            out.append(-m)
        m += 1
    return out[:depth]


def operator_D(coeffs_1: dict, coeffs_2: dict, n_states: int, basis_depth: int = 16) -> float:
    """``sum_j 2^-j || U f_j - V f_j ||_2`` on a cyclic quotient of ``n_states`` Y-states.

    On the finite quotient T is one cycle through the Y-states, so the
    characters ``f_m(y_k) = exp(2 pi i m k / n)`` (``k`` the position along
    the cycle) are unimodular eigenvectors of every power of T:
    ``U_{T^i} f_m = exp(2 pi i m i / n) f_m``.  The closed form below uses
    this; :func:`operator_D_direct` applies the permutations instead.
    """
    for c in (coeffs_1, coeffs_2):
        if any(w < 0 for w in c.values()) or abs(sum(c.values()) - 1) > 1e-12:
            raise ValueError("coefficients must be nonnegative and sum to 1")
    total = 0.0
    for j, m in enumerate(_frequencies(n_states, basis_depth), start=1):
        lam = sum(w * np.exp(2j * np.pi * m * i / n_states) for i, w in coeffs_1.items())
        mu = sum(w * np.exp(2j * np.pi * m * i / n_states) for i, w in coeffs_2.items())
        total += 2.0**-j * abs(lam - mu)
    return float(total)


def operator_D_direct(coeffs_1: dict, coeffs_2: dict, perm: np.ndarray, basis_depth: int = 16) -> float:
    """Same distance computed by composing with the explicit permutation ``perm`` (T on Y-states)."""
    n = len(perm)
    order = np.empty(n, dtype=np.int64)
    k = 0
    for t in range(n):
        order[t] = k
        k = perm[k]
    if k != 0 or len(set(order.tolist())) != n:
        raise ValueError("T is not a single cycle on the quotient")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    total = 0.0
    powers = {}

    def power_index(i):
        if i not in powers:
            powers[i] = (pos + i) % n  # (f o T^i)(y) = f(T^i y)
        return powers[i]

    for j, m in enumerate(_frequencies(n, basis_depth), start=1):
        f = np.exp(2j * np.pi * m * np.arange(n) / n)
        Uf = sum(w * f[power_index(i)] for i, w in coeffs_1.items())
        Vf = sum(w * f[power_index(i)] for i, w in coeffs_2.items())
        total += 2.0**-j * float(np.sqrt(np.mean(np.abs(Uf - Vf) ** 2)))
    return total


def D_tail_bound(basis_depth: int) -> float:
    return 2.0 * 2.0**-basis_depth
