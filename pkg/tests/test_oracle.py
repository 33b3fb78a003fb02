"""The closed-form engine against brute-force enumeration of finite quotients."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odoprime.odometer import Cylinder, Point, count_below
from odoprime.oracle import BudgetExceeded, FiniteQuotient, HorizonWraps
from odoprime.schedule import AlphabetSchedule

NAMES = ["paper", "desk", "desk2", "lab"]


def test_L1_paper():
    fq = FiniteQuotient(AlphabetSchedule.paper(3), 1)
    assert fq.size == 8 and list(np.flatnonzero(fq.hole)) == [7]
    assert fq.n_Y == 7


def test_budget():
    with pytest.raises(BudgetExceeded):
        FiniteQuotient(AlphabetSchedule.paper(12), 10, budget=10**6)


def test_T_is_a_bijection(small_quotients):
    for rm, fq in small_quotients.values():
        assert sorted(fq.T.tolist()) == fq.Y.tolist()
        assert (fq.T_inv[np.searchsorted(fq.Y, fq.T)] == fq.Y).all()


def test_Y_count_matches_measure(small_quotients):
    for rm, fq in small_quotients.values():
        assert fq.n_Y == rm.holes.measure_Y()[0] * fq.size


def test_r_heights(small_quotients):
    for rm, fq in small_quotients.values():
        assert fq.r_heights() == [rm.r(i) for i in range(1, fq.L + 2)]


def test_horizon_wrap_flag(small_quotients):
    rm, fq = small_quotients["paper"]
    with pytest.raises(HorizonWraps):
        fq.oracle_zeta(0, fq.n_Y + 1, allow_wrap=False)


@pytest.mark.parametrize("name", NAMES)
def test_every_state_small_horizons(small_quotients, name):
    rm, fq = small_quotients[name]
    Y = fq.Y
    idx = np.arange(fq.n_Y)
    states = np.arange(fq.size)
    assert (rm.in_Y_array(states) == ~fq.hole).all()
    for n in (1, 2, 3, 10, 100):
        for k in (n, -n):
            z = rm.zeta_many(Y, k)
            assert (z == fq.zeta_all(k)).all()
            assert ((Y + z) % fq.size == Y[(idx + k) % fq.n_Y]).all()
        assert (rm.xi_array(Y, n) == fq.xi_all(n)).all()
        for C in rm.holes.cylinders():
            got = count_below(C, states + n) - count_below(C, states)
            assert (got == fq.hits_all(fq.cylinder_mask(C), n)).all()


@pytest.mark.parametrize("name", NAMES)
@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_literal_stepping_agrees(small_quotients, name, data):
    rm, fq = small_quotients[name]
    s = int(fq.Y[data.draw(st.integers(0, fq.n_Y - 1))])
    n = data.draw(st.integers(-60, 60))
    x = Point.from_value(rm.sched, s)
    assert rm.zeta(x, n) == fq.oracle_zeta(s, n)
    assert rm.t_power(x, n).value == fq.oracle_t_power(s, n)
    if n >= 0:
        assert rm.xi(x, n) == fq.oracle_xi(s, n)
        top = data.draw(st.integers(1, fq.L))
        lo = data.draw(st.integers(0, rm.sched.sizes[top] - 1))
        C = Cylinder(rm.sched, [(top, lo, rm.sched.sizes[top] - 1)])
        assert count_below(C, s + n) - count_below(C, s) == fq.oracle_hit_count(s, n, C)


@pytest.mark.parametrize("name", NAMES)
def test_random_wrapping_queries(small_quotients, name, rng):
    rm, fq = small_quotients[name]
    m = fq.n_Y
    s_idx = rng.integers(0, m, size=300)
    k = rng.integers(-4 * m, 4 * m, size=300)
    x0 = fq.Y[s_idx]
    wraps, j = np.divmod(s_idx + k, m)
    assert (rm.zeta_many(x0, k) == fq.Y[j] - x0 + wraps * fq.size).all()
