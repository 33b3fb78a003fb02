"""The removed sets Z_k and W-type holes, membership in Y, and hit counting.

Every hole is a *prefix cylinder*: all positions below its top index are
pinned to ``a_i - 2`` and the top digit ranges over a contiguous band.  The
union of the holes is therefore a disjoint union of the cylinders

    C_f = {x_i = a_i - 2 for i < f, x_f in cond_f minus {a_f - 2}},

indexed by the first position ``f`` where ``x`` leaves the ``a - 2`` pattern,
except that a hole whose band already contains ``a_p - 2`` (an *absorbing*
hole) swallows every deeper hole and closes the decomposition.  Measures and
counts below are exact consequences of this decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .odometer import Cylinder, Point, prefix_count
from .schedule import AlphabetSchedule, DepthError, WTYPE

Z_DIGIT = 7


def w_threshold(size: int) -> int:
    """Number of digit values ``v`` with ``2v < size``."""
    return (size + 1) // 2


@dataclass(frozen=True)
class Hole:
    kind: str  # "Z" or "W"
    top: int
    lo: int
    hi: int

    @property
    def label(self) -> str:
        return f"{self.kind}{self.top}"


@dataclass(frozen=True)
class Piece:
    """One cylinder of the disjoint decomposition of the hole union."""

    f: int
    lo: int
    hi: int
    prefix: int  # decode of the pinned a_i - 2 digits below f
    qf: int
    qf1: int


class HoleFamily:
    """Holes with top index at most ``D`` for a schedule.

    Parameters
    ----------
    sched : AlphabetSchedule
    D : int, optional
        Truncation depth; defaults to the schedule depth.
    """

    def __init__(self, sched: AlphabetSchedule, D: int | None = None):
        D = sched.depth if D is None else int(D)
        if not 0 <= D <= sched.depth:
            raise DepthError(f"truncation depth {D} outside [0, {sched.depth}]")
        self.sched = sched
        self.D = D
        self.holes = tuple(self._build_holes())
        self._by_top = {h.top: h for h in self.holes}

    def _build_holes(self):
        s = self.sched
        for k in range(1, self.D + 1):
            kind = s.kind(k)
            if kind is None:
                yield Hole("Z", k, Z_DIGIT, Z_DIGIT)
            elif kind == WTYPE:
                yield Hole("W", k, 0, w_threshold(s.sizes[k]) - 1)

    def __repr__(self):
        return f"<HoleFamily D={self.D} holes={len(self.holes)} {self.sched!r}>"

    # ------------------------------------------------------------------
    def hole_at(self, k: int) -> Hole | None:
        return self._by_top.get(k)

    def cylinder(self, h: Hole) -> Cylinder:
        s = self.sched
        cons = [(i, s.sizes[i] - 2, s.sizes[i] - 2) for i in range(1, h.top)]
        cons.append((h.top, h.lo, h.hi))
        return Cylinder(s, cons)

    def Z(self, k: int) -> Cylinder:
        h = self._by_top.get(k)
        if h is None or h.kind != "Z":
            raise KeyError(f"no Z hole at {k}")
        return self.cylinder(h)

    def W(self, p: int) -> Cylinder:
        h = self._by_top.get(p)
        if h is None or h.kind != "W":
            raise KeyError(f"no W-type hole at {p}")
        return self.cylinder(h)

    def D_k(self, k: int) -> Cylinder | None:
        """The hole with top index ``k``: Z_k off E, the W hole at W-type k, else None."""
        h = self._by_top.get(k)
        return self.cylinder(h) if h else None

    def cylinders(self) -> list:
        return [self.cylinder(h) for h in self.holes]

    def _absorbs(self, h: Hole) -> bool:
        return h.lo <= self.sched.sizes[h.top] - 2 <= h.hi

    @cached_property
    def absorbing_top(self) -> int | None:
        for h in self.holes:
            if self._absorbs(h):
                return h.top
        return None

    @cached_property
    def pieces(self) -> tuple:
        s = self.sched
        out = []
        prefix = 0
        for k in range(1, self.D + 1):
            h = self._by_top.get(k)
            if h is not None:
                out.append(Piece(k, h.lo, h.hi, prefix, s.qs[k], s.qs[k + 1]))
                if self._absorbs(h):
                    break
            prefix += (s.sizes[k] - 2) * s.qs[k]
        return tuple(out)

    def piece_cylinder(self, pc: Piece) -> Cylinder:
        """Exact cylinder of a piece; for non-absorbing pieces the band never meets a - 2."""
        s = self.sched
        cons = [(i, s.sizes[i] - 2, s.sizes[i] - 2) for i in range(1, pc.f)]
        cons.append((pc.f, pc.lo, pc.hi))
        return Cylinder(s, cons)

    # ------------------------------------------------------------------
    def in_Y(self, x, strict: bool = False) -> bool:
        """Membership in the complement of the holes with top index <= D.

        With ``strict`` a point whose digits match ``a_i - 2`` through D
        raises, since a hole beyond the truncation could still contain it.
        """
        digits = x.digits if isinstance(x, Point) else x
        sizes = self.sched.sizes
        for k in range(1, self.D + 1):
            v = digits[k - 1] if k <= len(digits) else 0
            h = self._by_top.get(k)
            if h is not None and h.lo <= v <= h.hi:
                return False
            if v != sizes[k] - 2:
                return True
        if strict and self.absorbing_top is None:
            raise DepthError("digits match a_i - 2 through the truncation depth")
        return True

    def hole_containing(self, x) -> Hole | None:
        digits = x.digits if isinstance(x, Point) else x
        sizes = self.sched.sizes
        for k in range(1, self.D + 1):
            v = digits[k - 1] if k <= len(digits) else 0
            h = self._by_top.get(k)
            if h is not None and h.lo <= v <= h.hi:
                return h
            if v != sizes[k] - 2:
                return None
        return None

    def count_below(self, N):
        """Number of non-Y residues in ``[0, N)``, extended periodically (antiderivative)."""
        total = 0
        for pc in self.pieces:
            total = total + prefix_count(N, pc.prefix, pc.qf, pc.qf1, pc.lo, pc.hi)
        return total

    def hole_count_below(self, h: Hole, N):
        s = self.sched
        prefix = sum((s.sizes[i] - 2) * s.qs[i] for i in range(1, h.top))
        return prefix_count(N, prefix, s.qs[h.top], s.qs[h.top + 1], h.lo, h.hi)

    def holes_count(self, x: Point, m: int) -> int:
        """``#{0 <= j < m : S^j x not in Y}``."""
        if m < 0:
            raise ValueError("m must be nonnegative")
        x0 = x.value
        return self.count_below(x0 + m) - self.count_below(x0)

    def hole_hits(self, x0: int, lo: int, hi: int, h: Hole) -> int:
        """Hits of hole ``h`` by ``S^j x`` for ``lo <= j < hi`` (x given by its value)."""
        return self.hole_count_below(h, x0 + hi) - self.hole_count_below(h, x0 + lo)

    # ------------------------------------------------------------------
    def hole_measure(self) -> Fraction:
        return sum((Fraction(pc.hi - pc.lo + 1, pc.qf1) for pc in self.pieces), Fraction(0))

    def tail_bound(self) -> Fraction:
        """Upper bound on the mass of all holes beyond D not already counted.

        Every such hole pins positions 1..D to ``a_i - 2``; an absorbing hole
        at or below D already contains them all.
        """
        if self.absorbing_top is not None:
            return Fraction(0)
        return Fraction(1, self.sched.qs[self.D + 1])

    def measure_Y(self):
        """``(mu(Y_D), tail)``: exact measure of the truncated Y and the ignored tail bound."""
        return 1 - self.hole_measure(), self.tail_bound()

    def measure_in_Y(self, C: Cylinder) -> Fraction:
        """Exact ``mu(C intersected with Y_D)``."""
        m = C.measure()
        for pc in self.pieces:
            inter = C.intersect(self.piece_cylinder(pc))
            if inter is not None:
                m -= inter.measure()
        return m

    def nu(self, C: Cylinder) -> Fraction:
        """Normalized measure ``nu(C) = mu(C ∩ Y) / mu(Y)``."""
        return self.measure_in_Y(C) / self.measure_Y()[0]

    # ------------------------------------------------------------------
    def max_gap(self, horizon: int | None = None) -> int:
        """Longest run of consecutive non-Y residues in one period (exact)."""
        period = self.pieces[-1].qf1 if self.pieces else 1
        if horizon is not None:
            period = min(period, horizon)
        if period > 4_000_000:
            raise OverflowError("period too large for a gap scan")
        best = run = 0
        prev = self.count_below(0)
        for n in range(1, 2 * period + 1):
            cur = self.count_below(n)
            if cur > prev:
                run += 1
                best = max(best, run)
            else:
                run = 0
            prev = cur
        return best


def in_Y(holes: HoleFamily, x) -> bool:
    return holes.in_Y(x)


def hit_count(x: Point, m: int, C: Cylinder) -> int:
    from .odometer import hit_count as _hc

    return _hc(x, m, C)


def holes_count(holes: HoleFamily, x: Point, m: int) -> int:
    return holes.holes_count(x, m)


def measure_Y(holes: HoleFamily):
    return holes.measure_Y()


def sample_Y(holes: HoleFamily, count: int, rng, within: Cylinder | None = None, max_tries: int = 200):
    """``count`` i.i.d. points of ``nu`` (restricted to ``within``) by rejection.

    Digits are drawn uniformly in their radix (or in the constrained band);
    points falling in a hole are redrawn.
    """
    s = holes.sched
    bands = within.as_dict if within is not None else {}
    out: list = []
    for _ in range(max_tries):
        need = count - len(out)
        if need <= 0:
            break
        batch = max(need + need // 4 + 8, 16)
        cols = []
        for i in range(1, s.depth + 1):
            lo, hi = bands.get(i, (0, s.sizes[i] - 1))
            if hi >= 1 << 62:
                cols.append([lo + _big_uniform(rng, hi - lo + 1) for _ in range(batch)])
            else:
                cols.append(rng.integers(lo, hi + 1, size=batch).tolist())
        for row in zip(*cols):
            if holes.in_Y(row):
                out.append(Point(s, row))
                if len(out) == count:
                    break
    if len(out) < count:
        raise RuntimeError("rejection sampling did not produce enough Y-points")
    return out


def _big_uniform(rng, n: int) -> int:
    bits = n.bit_length() + 64
    words = rng.integers(0, 1 << 32, size=(bits + 31) // 32)
    v = 0
    for w in words.tolist():
        v = (v << 32) | w
    return v % n
