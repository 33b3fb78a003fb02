"""Brute-force ground truth on the finite quotient ``Z / q_{L+1}``.

Holes are marked digit by digit straight from their definitions, T is the
explicit "next Y-state" permutation, and every query is answered by
enumeration.  Nothing here reuses the closed-form counting of the engine.
"""

from __future__ import annotations

import numpy as np

from .odometer import Cylinder
from .schedule import AlphabetSchedule, WTYPE

DEFAULT_BUDGET = 2_000_000


class BudgetExceeded(ValueError):
    pass


class HorizonWraps(ValueError):
    """A query horizon runs past one full cycle of the quotient."""


class FiniteQuotient:
    def __init__(self, sched: AlphabetSchedule, L: int, budget: int = DEFAULT_BUDGET):
        if L > sched.depth:
            raise ValueError(f"L={L} exceeds schedule depth {sched.depth}")
        size = sched.qs[L + 1]
        if size > budget:
            raise BudgetExceeded(f"q_{L + 1} = {size} exceeds the state budget {budget}")
        self.sched, self.L, self.size = sched, L, int(size)
        states = np.arange(self.size, dtype=np.int64)
        digits = np.empty((self.size, L), dtype=np.int64)
        rest = states.copy()
        for i in range(1, L + 1):
            a = sched.sizes[i]
            digits[:, i - 1] = rest % a
            rest //= a
        self.digits = digits

        hole = np.zeros(self.size, dtype=bool)
        prefix_ok = np.ones(self.size, dtype=bool)  # x_i = a_i - 2 for all i < k
        for k in range(1, L + 1):
            a = sched.sizes[k]
            dk = digits[:, k - 1]
            kind = sched.kind(k)
            if kind is None:
                hole |= prefix_ok & (dk == 7)
            elif kind == WTYPE:
                hole |= prefix_ok & (2 * dk < a)
            prefix_ok &= dk == a - 2
        self.hole = hole
        self.Y = np.flatnonzero(~hole)
        # rank[s] = number of Y-states strictly below s
        self.rank = np.concatenate(([0], np.cumsum(~hole)))[:-1].astype(np.int64)
        m = len(self.Y)
        self.T = np.roll(self.Y, -1)  # T[idx] is the Y-state after Y[idx]
        self.T_inv = np.roll(self.Y, 1)
        self.perm = np.roll(np.arange(m), -1)

    @property
    def n_Y(self) -> int:
        return int(len(self.Y))

    def in_Y(self, s) -> bool:
        return not self.hole[s]

    def _idx(self, s: int) -> int:
        if self.hole[s]:
            raise ValueError(f"state {s} is not in Y")
        return int(self.rank[s])

    # literal stepping queries -------------------------------------------
    def next_Y(self, s: int) -> int:
        t = (s + 1) % self.size
        while self.hole[t]:
            t = (t + 1) % self.size
        return t

    def prev_Y(self, s: int) -> int:
        t = (s - 1) % self.size
        while self.hole[t]:
            t = (t - 1) % self.size
        return t

    def oracle_zeta(self, s: int, n: int, allow_wrap: bool = True) -> int:
        """Walk the S-orbit one step at a time counting Y-visits."""
        if not allow_wrap and abs(n) > self.n_Y:
            raise HorizonWraps("horizon exceeds one cycle")
        self._idx(s)
        m, seen, t = 0, 0, s
        d = 1 if n > 0 else -1
        while seen < abs(n):
            t = (t + d) % self.size
            m += d
            if not self.hole[t]:
                seen += 1
        return m

    def oracle_t_power(self, s: int, n: int) -> int:
        self._idx(s)
        t = s
        for _ in range(abs(n)):
            t = self.next_Y(t) if n > 0 else self.prev_Y(t)
        return t

    def oracle_xi(self, s: int, n: int) -> int:
        """Least m with zeta(m) >= n, by stepping T until the S-time reaches n."""
        if n == 0:
            return 0
        m, z, t = 0, 0, s
        while z < n:
            u = self.next_Y(t)
            z += (u - t) % self.size
            t = u
            m += 1
        return m

    def oracle_hit_count(self, s: int, m: int, C: Cylinder) -> int:
        mask = self.cylinder_mask(C)
        cnt, t = 0, s
        for _ in range(m):
            cnt += bool(mask[t])
            t = (t + 1) % self.size
        return cnt

    # vectorized enumerations --------------------------------------------
    def cylinder_mask(self, C: Cylinder) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        for p, lo, hi in C.constraints:
            if p > self.L:
                raise ValueError(f"cylinder constrains position {p} beyond L={self.L}")
            d = self.digits[:, p - 1]
            mask &= (d >= lo) & (d <= hi)
        return mask

    def zeta_all(self, n: int) -> np.ndarray:
        """zeta for every Y-state at a fixed horizon n >= 0 (index arithmetic)."""
        m = self.n_Y
        idx = np.arange(m) + n
        wraps, j = np.divmod(idx, m)
        return self.Y[j] - self.Y + wraps * self.size

    def xi_all(self, n: int) -> np.ndarray:
        """xi for every Y-state: one plus the Y-states in (s, s + n - 1]."""
        if n == 0:
            return np.zeros(self.n_Y, dtype=np.int64)
        cum = np.concatenate(([0], np.cumsum(~self.hole)))  # cum[t] = #Y below t

        def ybelow(t):
            w, r = np.divmod(t, self.size)
            return w * self.n_Y + cum[r]

        s = self.Y
        return ybelow(s + n) - ybelow(s + 1) + 1

    def hits_all(self, mask: np.ndarray, m: int) -> np.ndarray:
        """For every state s: #{0 <= j < m : s + j in mask} via cyclic prefix sums."""
        cum = np.concatenate(([0], np.cumsum(mask)))
        total = int(cum[-1])

        def below(t):
            w, r = np.divmod(t, self.size)
            return w * total + cum[r]

        s = np.arange(self.size, dtype=np.int64)
        return below(s + m) - below(s)

    def r_heights(self) -> list:
        """r_i for 1 <= i <= L + 1: Y-states below q_i."""
        cum = np.concatenate(([0], np.cumsum(~self.hole)))
        return [int(cum[self.sched.qs[i]]) for i in range(1, self.L + 2)]

    def max_gap(self) -> int:
        gaps = np.diff(np.concatenate((self.Y, [self.Y[0] + self.size])))
        return int(gaps.max() - 1)


def build(sched: AlphabetSchedule, L: int, budget: int = DEFAULT_BUDGET) -> FiniteQuotient:
    return FiniteQuotient(sched, L, budget)
