"""The induced map T on Y, the time changes zeta and xi, return heights and digit expansions.

Finite-depth points live on the quotient ``Z / q_top``; since every hole with
top index at most the depth is periodic modulo ``q_top``, T is well defined
there and orbit arithmetic wraps modulo ``q_top``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .holes import HoleFamily, w_threshold
from .odometer import Point, step
from .schedule import WTYPE, AlphabetSchedule, ScheduleError

GREEDY_BOUNDS = ("own", "next")
GREEDY_RULES = ("feasible", "literal")


class NotInY(ValueError):
    pass


class GreedyStall(ArithmeticError):
    """The greedy expansion cannot reduce the remainder under the digit bound."""


@dataclass(frozen=True)
class DigitExpansion:
    n: int
    coeffs: dict = field(default_factory=dict)  # index -> nonzero signed coefficient

    def __getitem__(self, i: int) -> int:
        return self.coeffs.get(i, 0)

    @property
    def sigma(self) -> int:
        return max(self.coeffs) if self.coeffs else 0

    def value(self, sched: AlphabetSchedule) -> int:
        return sum(c * sched.qs[i] for i, c in self.coeffs.items())

    def __str__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"{c}*q{i}" for i, c in sorted(self.coeffs.items(), reverse=True))


class ReturnMap:
    """T together with its bookkeeping for one hole family.

    >>> from odoprime.schedule import AlphabetSchedule
    >>> rm = ReturnMap(HoleFamily(AlphabetSchedule.paper(12)))
    >>> rm.r(1), rm.r(2), rm.r(3)
    (1, 7, 55)
    """

    def __init__(self, holes: HoleFamily, greedy_bound: str = "own", greedy_rule: str = "feasible"):
        if greedy_bound not in GREEDY_BOUNDS:
            raise ValueError(f"greedy_bound must be one of {GREEDY_BOUNDS}")
        if greedy_rule not in GREEDY_RULES:
            raise ValueError(f"greedy_rule must be one of {GREEDY_RULES}")
        self.greedy_rule = greedy_rule
        self.holes = holes
        self.sched = holes.sched
        self.greedy_bound = greedy_bound
        self._r: dict = {}

    @classmethod
    def of(cls, sched: AlphabetSchedule, D: int | None = None, **kw) -> "ReturnMap":
        return cls(HoleFamily(sched, D), **kw)

    @property
    def top(self) -> int:
        return self.sched.modulus

    # ------------------------------------------------------------------
    # visits
    def _H(self, N):
        return self.holes.count_below(N)

    def _visits_fwd(self, x0, m):
        """Y-visits among ``S^j x`` for ``1 <= j <= m``."""
        return m - (self._H(x0 + m + 1) - self._H(x0 + 1))

    def _visits_back(self, x0, k):
        """Y-visits among ``S^{-j} x`` for ``1 <= j <= k``."""
        return k - (self._H(x0) - self._H(x0 - k))

    def _require_Y(self, x: Point):
        if not self.holes.in_Y(x):
            raise NotInY(f"{x} is not in Y")

    def zeta_value(self, x0: int, n: int) -> int:
        """zeta for the point with value ``x0`` (assumed in Y)."""
        n = int(n)
        if n == 0:
            return 0
        if n > 0:
            f, target = self._visits_fwd, n
        else:
            f, target = self._visits_back, -n
        lo, hi = target - 1, target
        while f(x0, hi) < target:
            lo, hi = hi, 2 * hi
        # invariant: f(lo) < target <= f(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if f(x0, mid) >= target:
                hi = mid
            else:
                lo = mid
        return hi if n > 0 else -hi

    def zeta(self, x: Point, n: int) -> int:
        """``zeta_x(n)``: the ``m`` with ``S^m x = T^n x``."""
        self._require_Y(x)
        return self.zeta_value(x.value, n)

    def xi(self, x: Point, n: int) -> int:
        """Least ``m`` with ``zeta_x(m) >= n``."""
        if n < 0:
            raise ValueError("xi is defined for n >= 0")
        self._require_Y(x)
        if n == 0:
            return 0
        return self._visits_fwd(x.value, n - 1) + 1

    def t_power(self, x: Point, n: int) -> Point:
        z = self.zeta(x, n)
        return Point.from_value(self.sched, (x.value + z) % self.top)

    def first_return(self, x: Point) -> Point:
        """T by literal stepping along the S-orbit."""
        self._require_Y(x)
        y = step(x)
        for _ in range(self.top):
            if self.holes.in_Y(y):
                return y
            y = step(y)
        raise RuntimeError("Y is empty")

    def first_return_inverse(self, x: Point) -> Point:
        self._require_Y(x)
        v = x.value
        for _ in range(self.top):
            v = (v - 1) % self.top
            y = Point.from_value(self.sched, v)
            if self.holes.in_Y(y):
                return y
        raise RuntimeError("Y is empty")

    # vectorized twins used for whole-quotient sweeps ---------------------
    def zeta_array(self, x0: np.ndarray, n: np.ndarray) -> np.ndarray:
        """Vectorized zeta for nonnegative ``n`` on int64 values."""
        x0 = np.asarray(x0, dtype=np.int64)
        n = np.broadcast_to(np.asarray(n, dtype=np.int64), x0.shape).copy()
        lo = n - 1
        hi = n.copy()
        pos = n > 0
        while True:
            short = pos & (self._visits_fwd(x0, hi) < n)
            if not short.any():
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2 * hi, hi)
        while True:
            open_ = pos & (hi - lo > 1)
            if not open_.any():
                break
            mid = (lo + hi) // 2
            ok = self._visits_fwd(x0, mid) >= n
            hi = np.where(open_ & ok, mid, hi)
            lo = np.where(open_ & ~ok, mid, lo)
        return np.where(pos, hi, 0)

    def xi_array(self, x0: np.ndarray, n: np.ndarray) -> np.ndarray:
        x0 = np.asarray(x0, dtype=np.int64)
        n = np.asarray(n, dtype=np.int64)
        return np.where(n > 0, self._visits_fwd(x0, n - 1) + 1, 0)

    def value_array(self, values) -> np.ndarray:
        """Values as int64 when the modulus allows it, otherwise as Python ints."""
        dtype = np.int64 if self.top < 1 << 61 else object
        return np.array([int(v) for v in values], dtype=dtype)

    def _search(self, f, x0, target):
        lo = x0 * 0 + (target - 1)
        hi = x0 * 0 + target
        while True:
            short = f(x0, hi) < target
            if not short.any():
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2 * hi, hi)
        while True:
            open_ = (hi - lo) > 1
            if not open_.any():
                break
            mid = (lo + hi) // 2
            ok = f(x0, mid) >= target
            hi = np.where(open_ & ok, mid, hi)
            lo = np.where(open_ & ~ok, mid, lo)
        return hi

    def zeta_many(self, x0: np.ndarray, n) -> np.ndarray:
        """zeta of signed powers ``n`` (scalar or per element) for many base points in Y."""
        if np.ndim(n) == 0:
            n = int(n)
            if n == 0:
                return x0 * 0
            if n > 0:
                return self._search(self._visits_fwd, x0, n)
            return -self._search(self._visits_back, x0, -n)
        n = np.asarray(n, dtype=x0.dtype)
        out = x0 * 0
        pos, neg = n > 0, n < 0
        if pos.any():
            out[pos] = self._search(self._visits_fwd, x0[pos], n[pos])
        if neg.any():
            out[neg] = -self._search(self._visits_back, x0[neg], -n[neg])
        return out

    def t_power_many(self, x0: np.ndarray, n) -> np.ndarray:
        return (x0 + self.zeta_many(x0, n)) % self.top

    def orbit(self, x0: int, lo: int, hi: int) -> np.ndarray:
        """Values of ``T^i x`` for ``lo <= i < hi``."""
        ns = np.arange(lo, hi)
        base = self.value_array([x0] * len(ns))
        return self.t_power_many(base, self.value_array(ns.tolist()))

    def digits_of(self, values: np.ndarray, upto: int) -> np.ndarray:
        """Digit matrix (positions 1..upto) of an array of values."""
        s = self.sched
        out = np.empty((len(values), upto), dtype=np.int64)
        for j in range(1, upto + 1):
            out[:, j - 1] = ((values // s.qs[j]) % s.sizes[j]).astype(np.int64)
        return out

    def in_Y_array(self, x0: np.ndarray) -> np.ndarray:
        x0 = np.asarray(x0, dtype=np.int64)
        return self._H(x0 + 1) - self._H(x0) == 0

    # ------------------------------------------------------------------
    # return heights and expansions
    def r(self, i: int) -> int:
        """``r_i = xi_0(q_i)``, the number of Y-states below ``q_i``."""
        if not 1 <= i <= self.sched.depth + 1:
            raise ScheduleError(f"index {i} outside [1, {self.sched.depth + 1}]")
        if i not in self._r:
            qi = self.sched.qs[i]
            self._r[i] = self._visits_fwd(0, qi - 1) + 1
        return self._r[i]

    def r_table(self, upto: int | None = None) -> list:
        upto = upto or self.sched.depth
        return [self.r(i) for i in range(1, upto + 1)]

    def r_next(self, l: int, r_l: int) -> int:
        """``r_{l+1}`` from ``r_l`` by block counting.

        Each of the ``a_l`` blocks of length ``q_l`` below ``q_{l+1}`` repeats
        the Y-pattern of the first one, except for the single state whose lower
        digits are all ``a_i - 2``: Z_l removes it in one block, a W hole at l
        restores it in the blocks above its band, and a W hole at l + 1 removes
        it in block 0.  Holes swallowed by an absorbing hole change nothing.
        """
        s = self.sched
        cut = self.holes.absorbing_top
        live = lambda k: cut is None or k <= cut  # noqa: E731
        out = s.sizes[l] * r_l
        if s.kind(l) is None and live(l):
            out -= 1
        if s.kind(l) == WTYPE and live(l):
            out += s.sizes[l] - w_threshold(s.sizes[l])
        if l + 1 <= s.depth and s.kind(l + 1) == WTYPE and live(l + 1):
            out -= 1
        return out

    def _bound(self, i: int) -> int:
        s = self.sched
        if self.greedy_bound == "own":
            return s.sizes[i] // 2
        if i + 1 > s.depth:
            return s.base // 2
        return s.sizes[i + 1] // 2

    def _capacity(self, i: int, used) -> int:
        """Largest remainder the unused indices below ``i`` can absorb."""
        return sum(self._bound(j) * self.sched.qs[j] for j in range(1, i) if j not in used)

    def greedy_digits(self, n: int) -> DigitExpansion:
        """Greedy signed expansion ``n = sum c_i q_i``, each index used at most once.

        At every step the pair ``(i, c)`` minimizing ``|rest - c q_i|`` is
        chosen; ties go to the smaller index, then to the smaller ``|c|``.
        Under the default ``feasible`` rule only pairs whose remainder the
        unused lower indices can still absorb are eligible, which keeps the
        loop from stranding a remainder below every unused index.
        """
        s = self.sched
        n = int(n)
        if 2 * abs(n) >= s.modulus:
            raise ScheduleError(f"|{n}| must be below q_top / 2")
        rest, coeffs = n, {}
        while rest:
            best = None
            for i in range(1, s.depth + 1):
                if i in coeffs:
                    continue
                qi = s.qs[i]
                if qi > 2 * abs(rest):
                    break
                b = self._bound(i)
                fl = rest // qi
                for c in (fl, fl + 1):
                    c = max(-b, min(b, c))
                    if c == 0:
                        continue
                    left = abs(rest - c * qi)
                    if self.greedy_rule == "feasible" and left > self._capacity(i, coeffs):
                        continue
                    key = (left, i, abs(c))
                    if best is None or key < best[0]:
                        best = (key, i, c)
            if best is None or best[0][0] >= abs(rest):
                raise GreedyStall(f"greedy expansion of {n} stalls at remainder {rest}")
            _, i, c = best
            coeffs[i] = c
            rest -= c * s.qs[i]
        return DigitExpansion(n, coeffs)

    def d_digits(self, n: int) -> DigitExpansion:
        """Expansion of ``zeta_0(n)``."""
        return self.greedy_digits(self.zeta_value(0, n))

    def sigma(self, n: int) -> int:
        return 0 if n == 0 else self.d_digits(n).sigma


# functional spellings --------------------------------------------------------

def first_return(rm: ReturnMap, x: Point) -> Point:
    return rm.first_return(x)


def zeta(rm: ReturnMap, x: Point, n: int) -> int:
    return rm.zeta(x, n)


def xi(rm: ReturnMap, x: Point, n: int) -> int:
    return rm.xi(x, n)


def t_power(rm: ReturnMap, x: Point, n: int) -> Point:
    return rm.t_power(x, n)
