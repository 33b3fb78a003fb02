"""Points of X, the odometer S, cylinders and their exact measures."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .schedule import AlphabetSchedule, DepthError, ScheduleError


class RangeOverflow(ArithmeticError):
    """An odometer move left ``[0, q_top)`` while wraparound was disabled."""


@dataclass(frozen=True)
class Point:
    sched: AlphabetSchedule
    digits: tuple

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        if len(digits) > self.sched.depth:
            raise DepthError(f"point has {len(digits)} digits, depth is {self.sched.depth}")
        digits = digits + (0,) * (self.sched.depth - len(digits))
        sizes = self.sched.sizes
        for i, d in enumerate(digits, start=1):
            if not 0 <= d < sizes[i]:
                raise ScheduleError(f"digit {d} at position {i} outside radix {sizes[i]}")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def zero(cls, sched: AlphabetSchedule) -> "Point":
        return cls(sched, ())

    @classmethod
    def from_value(cls, sched: AlphabetSchedule, value: int) -> "Point":
        return cls(sched, sched.encode(value))

    @property
    def value(self) -> int:
        return self.sched.decode(self.digits)

    def __getitem__(self, pos: int) -> int:
        """Digit at 1-based position ``pos`` (zero beyond depth)."""
        if pos < 1:
            raise IndexError("positions are 1-based")
        return self.digits[pos - 1] if pos <= len(self.digits) else 0

    def replace(self, pos: int, value: int) -> "Point":
        d = list(self.digits)
        d[pos - 1] = value
        return Point(self.sched, tuple(d))

    def __str__(self):
        d = list(self.digits)
        while len(d) > 1 and d[-1] == 0:
            d.pop()
        return ",".join(map(str, d))

    def __repr__(self):
        return f"Point({self})"


def step(x: Point, wrap: bool = True) -> Point:
    """The odometer ``S``: add one with carrying to the right."""
    sizes = x.sched.sizes
    d = list(x.digits)
    for k in range(len(d)):
        if d[k] < sizes[k + 1] - 1:
            d[k] += 1
            return Point(x.sched, tuple(d))
        d[k] = 0
    if not wrap:
        raise RangeOverflow("carry past the depth limit")
    return Point(x.sched, tuple(d))


def advance(x: Point, n: int, wrap: bool = False) -> Point:
    """``S^n x`` by exact mixed-radix addition."""
    top = x.sched.modulus
    v = x.value + int(n)
    if not 0 <= v < top:
        if not wrap:
            raise RangeOverflow(f"S^{n} leaves [0, q_top) from {x}")
        v %= top
    return Point.from_value(x.sched, v)


# ----------------------------------------------------------------------------
# cylinders

@dataclass(frozen=True)
class Cylinder:
    """A finite set of digit constraints ``pos -> [lo, hi]`` (inclusive)."""

    sched: AlphabetSchedule
    constraints: tuple = ()

    def __post_init__(self):
        raw = self.constraints
        if isinstance(raw, dict):
            raw = raw.items()
        merged: dict = {}
        for item in raw:
            pos, spec = item[0], item[1:] if len(item) > 2 else item[1]
            if isinstance(spec, tuple) and len(spec) == 2:
                lo, hi = spec
            elif isinstance(spec, (tuple, list)):
                lo, hi = spec[0], spec[-1]
            else:
                lo = hi = spec
            pos, lo, hi = int(pos), int(lo), int(hi)
            if not 1 <= pos <= self.sched.depth:
                raise DepthError(f"constraint at position {pos} beyond depth {self.sched.depth}")
            a = self.sched.sizes[pos]
            if not (0 <= lo <= hi < a):
                raise ScheduleError(f"range {lo}..{hi} invalid at position {pos} (radix {a})")
            if pos in merged:
                plo, phi = merged[pos]
                lo, hi = max(lo, plo), min(hi, phi)
                if lo > hi:
                    raise EmptyCylinder(f"contradictory constraints at position {pos}")
            merged[pos] = (lo, hi)
        object.__setattr__(
            self, "constraints", tuple((p, lo, hi) for p, (lo, hi) in sorted(merged.items()))
        )

    @classmethod
    def full(cls, sched):
        return cls(sched, ())

    @property
    def as_dict(self) -> dict:
        return {p: (lo, hi) for p, lo, hi in self.constraints}

    @property
    def positions(self) -> tuple:
        return tuple(p for p, _, _ in self.constraints)

    @property
    def top(self) -> int:
        """Largest constrained position (0 for the full space)."""
        return self.constraints[-1][0] if self.constraints else 0

    def measure(self) -> Fraction:
        m = Fraction(1)
        sizes = self.sched.sizes
        for p, lo, hi in self.constraints:
            m *= Fraction(hi - lo + 1, sizes[p])
        return m

    def contains(self, x) -> bool:
        digits = x.digits if isinstance(x, Point) else x
        for p, lo, hi in self.constraints:
            v = digits[p - 1] if p <= len(digits) else 0
            if not lo <= v <= hi:
                return False
        return True

    __contains__ = contains

    def intersect(self, other: "Cylinder") -> "Cylinder | None":
        """Intersection, or None when empty."""
        try:
            return Cylinder(self.sched, self.constraints + other.constraints)
        except EmptyCylinder:
            return None

    def restrict(self, pos: int, lo: int, hi: int) -> "Cylinder | None":
        try:
            return Cylinder(self.sched, self.constraints + ((pos, lo, hi),))
        except EmptyCylinder:
            return None

    def is_prefix_form(self) -> bool:
        """True if every position below the top is pinned to one value."""
        if not self.constraints:
            return True
        if len(self.constraints) != self.top:
            return False
        return all(lo == hi for _, lo, hi in self.constraints[:-1])

    def to_json(self) -> list:
        return [[p, lo, hi] for p, lo, hi in self.constraints]

    def __str__(self):
        parts = [f"{p}:{lo}" if lo == hi else f"{p}:{lo}..{hi}" for p, lo, hi in self.constraints]
        return "{" + ", ".join(parts) + "}"

    def __repr__(self):
        return f"Cylinder{self}"


class EmptyCylinder(ValueError):
    pass


def cylinder_measure(C: Cylinder) -> Fraction:
    return C.measure()


def residues_of(C: Cylinder, max_intervals: int = 1 << 20):
    """Residues ``r mod q_m`` (``m = 1 + top``) whose digits lie in ``C``.

    Returns ``(q_m, intervals)`` with maximal, sorted, inclusive intervals.
    """
    sched = C.sched
    if not C.constraints:
        return 1, [(0, 0)]
    top = C.top
    qs, sizes = sched.qs, sched.sizes
    cons = C.as_dict
    low = C.constraints[0][0]
    lo0, hi0 = cons[low]
    # the lowest constrained position with free digits below it gives one block
    block_lo, block_hi = lo0 * qs[low], (hi0 + 1) * qs[low] - 1
    offsets = [0]
    for p in range(low + 1, top + 1):
        lo, hi = cons.get(p, (0, sizes[p] - 1))
        if len(offsets) * (hi - lo + 1) > max_intervals:
            raise OverflowError("too many residue intervals")
        offsets = [o + v * qs[p] for v in range(lo, hi + 1) for o in offsets]
    offsets.sort()
    out = []
    for o in offsets:
        a, b = o + block_lo, o + block_hi
        if out and out[-1][1] + 1 == a:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return qs[top + 1], out


def count_below(C: Cylinder, N):
    """``#{0 <= n < N : digits(n) in C}``, extended periodically to any integer N.

    The result is an antiderivative: ``count_below(C, b) - count_below(C, a)``
    counts the hits in ``[a, b)`` for any ``a <= b``.
    """
    if not C.constraints:
        return N
    if C.is_prefix_form():
        return _count_prefix(C, N)
    mod, ivs = residues_of(C)
    total = sum(b - a + 1 for a, b in ivs)
    Q, R = divmod(N, mod)
    part = 0
    for a, b in ivs:
        if R <= a:
            break
        part += min(b + 1, R) - a
    return Q * total + part


def _count_prefix(C: Cylinder, N):
    sched = C.sched
    f = C.top
    prefix = sum(lo * sched.qs[p] for p, lo, _ in C.constraints[:-1])
    _, lo, hi = C.constraints[-1]
    return prefix_count(N, prefix, sched.qs[f], sched.qs[f + 1], lo, hi)


def prefix_count(N, prefix: int, qf: int, qf1: int, lo: int, hi: int):
    """Hits below ``N`` of the residues ``prefix + v*qf`` (mod ``qf1``), ``lo <= v <= hi``.

    Works for Python ints and for numpy integer arrays alike.
    """
    Q = N // qf1
    R = N - Q * qf1
    # number of v in [lo, hi] with prefix + v*qf < R, i.e. v < ceil((R - prefix)/qf)
    c = -((prefix - R) // qf)
    width = hi - lo + 1
    part = _clip(c - lo, 0, width)
    return Q * width + part


def _clip(v, lo, hi):
    if isinstance(v, int):
        return lo if v < lo else hi if v > hi else v
    import numpy as np

    return np.minimum(np.maximum(v, lo), hi)


def hit_count(x: Point, m: int, C: Cylinder) -> int:
    """``#{0 <= j < m : S^j x in C}`` in closed form."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    x0 = x.value
    return count_below(C, x0 + m) - count_below(C, x0)


def cylinders_from(sched: AlphabetSchedule, specs: Iterable[Sequence]) -> list:
    return [Cylinder(sched, s) for s in specs]
