"""Friends: hit profiles, the friends predicate and the two witness generators.

Two points are ``n``-friends when, over the S-orbit window ``j = 0..n``
(``j = n..0`` for negative ``n``), their Z-hole hit counts agree at every
index but one, differ there by exactly one, and their W-hole counts agree.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .holes import Z_DIGIT, sample_Y
from .odometer import Cylinder, Point
from .return_map import GreedyStall, ReturnMap


class InfeasibleWitness(ValueError):
    """The generator's digit bands are empty for this schedule."""


@dataclass(frozen=True)
class HitProfile:
    horizon: int
    z: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)

    def to_json(self):
        return {"horizon": self.horizon, "z": {str(k): v for k, v in sorted(self.z.items())},
                "w": {str(k): v for k, v in sorted(self.w.items())}}


def _window(n: int):
    return (0, n + 1) if n >= 0 else (n, 1)


def hit_profile(rm: ReturnMap, x: Point, n: int) -> HitProfile:
    """Hit counts of every hole along ``S^j x`` for j in the closed window to ``n``."""
    lo, hi = _window(n)
    x0 = x.value
    z, w = {}, {}
    for h in rm.holes.holes:
        c = rm.holes.hole_hits(x0, lo, hi, h)
        if c:
            (z if h.kind == "Z" else w)[h.top] = c
    return HitProfile(n, z, w)


def profiles_are_friends(px: HitProfile, py: HitProfile) -> bool:
    if px.w != py.w:
        return False
    keys = set(px.z) | set(py.z)
    diffs = [abs(px.z.get(k, 0) - py.z.get(k, 0)) for k in keys]
    nonzero = [d for d in diffs if d]
    return nonzero == [1]


def are_friends(rm: ReturnMap, x: Point, y: Point, n: int) -> bool:
    return profiles_are_friends(hit_profile(rm, x, n), hit_profile(rm, y, n))


@dataclass
class FriendWitness:
    kind: str  # "noE" or "E"
    m: int
    position: int  # sigma_m
    d: int
    domain: Cylinder
    image: Cylinder
    surgery: tuple  # (position, from_value, to_value)
    mass: Fraction  # mu of the domain cylinder
    nu_mass: Fraction
    bound: Fraction  # the target / lower bound the lemma promises
    notes: list = field(default_factory=list)

    def apply(self, x: Point) -> Point:
        pos, frm, to = self.surgery
        if x[pos] != frm:
            raise ValueError(f"{x} is outside the witness domain")
        return x.replace(pos, to)

    def to_json(self):
        return {
            "kind": self.kind,
            "m": self.m,
            "position": self.position,
            "d": self.d,
            "domain": self.domain.to_json(),
            "image": self.image.to_json(),
            "surgery": list(self.surgery),
            "mass": str(self.mass),
            "nu_mass": str(self.nu_mass),
            "bound": str(self.bound),
            "notes": list(self.notes),
        }


def _top_coefficient(rm: ReturnMap, m: int):
    exp = rm.d_digits(m)
    k = exp.sigma
    return k, exp[k]


def make_friend_noE(rm: ReturnMap, m: int) -> FriendWitness:
    """Surgery witness at ``k = sigma_m`` when k lies outside E.

    For ``d > 0``: ``x_k = 0, x_{k-1} = 5, x_{k+1} = 4`` and ``G`` sets the
    k-th digit to 7.  For ``d < 0`` the orbit runs backwards, so the roles
    flip: ``x_k = 5, x_{k-1} = 7`` (``a_{k-1} - 1`` on E), ``x_{k+1} = 4``.
    A neighbour in E takes the band ``a/2 < v < a - 3`` instead of the
    fixed digit (only the upper neighbour for ``d < 0``).
    """
    s = rm.sched
    k, d = _top_coefficient(rm, m)
    if k == 0 or d == 0:
        raise InfeasibleWitness("m = 0 has no top coefficient")
    if s.in_E(k):
        raise InfeasibleWitness(f"sigma_m = {k} lies in E")
    if k < 2 or k + 1 > s.depth:
        raise InfeasibleWitness(f"sigma_m = {k} needs both neighbours within depth")
    if d < 0 and k < 3:
        raise InfeasibleWitness("backward surgery needs k - 1 >= 2 (digit 7 at position 1 is a hole)")

    def band(p):
        a = s.sizes[p]
        lo, hi = a // 2 + 1, a - 4  # open interval (a/2, a - 3)
        if lo > hi:
            raise InfeasibleWitness(f"empty band at E position {p} (size {a})")
        return lo, hi

    cons = []
    if d > 0:
        frm = 0
        cons.append((k - 1, *(band(k - 1) if s.in_E(k - 1) else (5, 5))))
    else:
        frm = 5
        low = s.sizes[k - 1] - 1 if s.in_E(k - 1) else Z_DIGIT
        cons.append((k - 1, low, low))
    cons.append((k + 1, *(band(k + 1) if s.in_E(k + 1) else (4, 4))))
    domain = Cylinder(s, cons + [(k, frm, frm)])
    image = Cylinder(s, cons + [(k, Z_DIGIT, Z_DIGIT)])
    return FriendWitness(
        "noE", m, k, d, domain, image, (k, frm, Z_DIGIT),
        domain.measure(), rm.holes.nu(domain), Fraction(1, 99),
    )


def make_friend_E(rm: ReturnMap, m: int) -> FriendWitness:
    """Rigid witness at an E position ``p = sigma_m``, surgery at ``p + 1``.

    For ``d > 0``: ``x_{p+1} = 0 -> 7``, ``x_{p-1} = 5`` and ``x_p`` in
    ``{a - 1 - min(d, a/3), ..., a - 2}``.  For ``d < 0``: ``x_{p-1} = 7``
    and ``x_p`` in ``{a - 2, ..., min(a - 1, a - 3 + |d|)}``, which requires
    ``a - 3 - |d| >= 0`` so the backward orbit never borrows from ``p + 1``.
    """
    s = rm.sched
    p, d = _top_coefficient(rm, m)
    if p == 0 or d == 0:
        raise InfeasibleWitness("m = 0 has no top coefficient")
    if not s.in_E(p):
        raise InfeasibleWitness(f"sigma_m = {p} is not in E")
    if p < 2 or p + 1 > s.depth:
        raise InfeasibleWitness(f"E position {p} needs both neighbours within depth")
    if d < 0 and p < 3:
        raise InfeasibleWitness("backward surgery needs p - 1 >= 2 (digit 7 at position 1 is a hole)")
    if s.in_E(p - 1) or s.in_E(p + 1):
        raise InfeasibleWitness(f"neighbours of E position {p} must lie outside E")
    a = s.sizes[p]
    if d > 0:
        # integer v with v >= a - 1 - min(d, a/3)
        lo = max(a - 1 - d, -((-(3 * (a - 1) - a)) // 3))
        hi = a - 2
        prev = 5
    else:
        if a - 3 - abs(d) < 0:
            raise InfeasibleWitness(f"size {a} too small for |d| = {abs(d)} backwards")
        lo, hi = a - 2, min(a - 1, a - 3 + abs(d))
        prev = Z_DIGIT
    if lo > hi or lo < 0:
        raise InfeasibleWitness(f"empty digit band at E position {p} (size {a}, d = {d})")
    cons = [(p - 1, prev, prev), (p, lo, hi)]
    domain = Cylinder(s, cons + [(p + 1, 0, 0)])
    image = Cylinder(s, cons + [(p + 1, Z_DIGIT, Z_DIGIT)])
    bound = Fraction(1, 2) * Fraction(1, 3) * Fraction(abs(d), a) * Fraction(1, 64)
    return FriendWitness(
        "E", m, p, d, domain, image, (p + 1, 0, Z_DIGIT),
        domain.measure(), rm.holes.nu(domain), bound,
    )


def make_friend(rm: ReturnMap, m: int) -> FriendWitness:
    k, _ = _top_coefficient(rm, m)
    return make_friend_E(rm, m) if rm.sched.in_E(k) else make_friend_noE(rm, m)


@dataclass
class WitnessCheck:
    samples: int
    friends: int
    offsets: Counter
    image_outside_Y: int
    failures: list

    @property
    def ok(self) -> bool:
        bad_offsets = [o for o in self.offsets if o == 0 or abs(o) > 3]
        return self.friends == self.samples and not bad_offsets and not self.image_outside_Y

    def to_json(self):
        return {
            "samples": self.samples,
            "friends": self.friends,
            "offsets": {str(k): v for k, v in sorted(self.offsets.items())},
            "image_outside_Y": self.image_outside_Y,
            "failures": self.failures[:10],
            "ok": self.ok,
        }


def verify_witness(rm: ReturnMap, w: FriendWitness, samples: int, rng, horizon_of=None) -> WitnessCheck:
    """Sample the domain, apply G, and test friendship at horizon ``zeta_x(m)``.

    ``horizon_of`` overrides the power whose time change sets the horizon
    (used when a witness built for one power is reused for another).
    """
    n = w.m if horizon_of is None else horizon_of
    xs = sample_Y(rm.holes, samples, rng, within=w.domain)
    good, outside, failures = 0, 0, []
    offsets: Counter = Counter()
    for x in xs:
        y = w.apply(x)
        if not rm.holes.in_Y(y):
            outside += 1
            failures.append({"x": str(x), "reason": "image outside Y"})
            continue
        zx = rm.zeta(x, n)
        if are_friends(rm, x, y, zx):
            good += 1
        else:
            failures.append({"x": str(x), "reason": "not friends"})
        offsets[rm.zeta(y, n) - zx] += 1
    return WitnessCheck(samples, good, offsets, outside, failures)


def search_H(rm: ReturnMap, n: int, eps, horizon: int | None = None, rng=None,
             reduction_N: int = 0, check_samples: int = 64):
    """Look for a witness of ``n`` in H_{horizon, eps}.

    The generator is tried on ``n`` itself and then on the powers produced
    by the reduction of ``n``; a candidate is accepted when its mass exceeds
    ``eps``, its surgery lies above ``horizon`` and a sampled check confirms
    friendship at horizon ``zeta_x(n)``.  Returns ``None`` when nothing is
    found, which proves nothing about membership.
    """
    if n == 0:
        return None
    from .reduction import reduce_full

    rng = rng if rng is not None else np.random.default_rng(0)
    candidates = [n]
    try:
        res = reduce_full(rm, n, reduction_N, Fraction(eps))
        candidates += [t.j for t in res.triples if t.j not in candidates]
    except (GreedyStall, ValueError):
        pass
    for c in candidates:
        if c == 0:
            continue
        try:
            w = make_friend(rm, c)
        except (InfeasibleWitness, GreedyStall):
            continue
        h = w.position - 1 if w.kind == "noE" else w.position
        if horizon is not None:
            h = horizon
        if w.nu_mass <= eps or w.surgery[0] <= h:
            continue
        if c != n:
            chk = verify_witness(rm, w, check_samples, rng, horizon_of=n)
            if not chk.ok:
                continue
        return w
    return None
