import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odoprime.holes import sample_Y
from odoprime.odometer import Point
from odoprime.return_map import GreedyStall, NotInY, ReturnMap
from odoprime.schedule import AlphabetSchedule, ScheduleError


def test_first_return_heights_paper():
    rm = ReturnMap.of(AlphabetSchedule.paper(12))
    assert rm.r_table(5) == [1, 7, 55, 439, 3511]


@pytest.mark.parametrize("name", ["paper", "desk", "desk2", "lab", "wide"])
def test_block_count_recurrence(name):
    s = AlphabetSchedule.preset(name, 40 if name == "paper" else None)
    rm = ReturnMap.of(s)
    assert all(rm.r_next(l, rm.r(l)) == rm.r(l + 1) for l in range(1, s.depth + 1))


def test_literal_recurrence_off_E_and_its_failure_next_to_E(desk_rm):
    s = desk_rm.sched
    r = desk_rm.r
    assert r(2) == 8 * r(1) - 1
    # next to the odd-type position 3 (size 5) the a_{l+1} form is off by one index
    assert r(3) == 8 * r(2) - 1 != s.sizes[3] * r(2) - 1


def test_zeta_xi_small_values(desk_rm):
    x = Point.zero(desk_rm.sched)
    assert desk_rm.zeta(x, 0) == 0
    # state 7 is Z_1, so the seventh return lands on 8
    assert desk_rm.zeta(x, 7) == 8
    assert desk_rm.xi(x, 8) == 7
    assert desk_rm.xi(x, 0) == 0


def test_zeta_negative_inverts_positive(lab_rm, rng):
    for x in sample_Y(lab_rm.holes, 20, rng):
        for n in (1, 5, 1000, 10**6):
            y = lab_rm.t_power(x, n)
            assert lab_rm.t_power(y, -n) == x


def test_first_return_literal_matches_t_power(desk_rm, rng):
    for x in sample_Y(desk_rm.holes, 30, rng):
        assert desk_rm.first_return(x) == desk_rm.t_power(x, 1)
        assert desk_rm.first_return_inverse(x) == desk_rm.t_power(x, -1)


def test_not_in_Y(desk_rm):
    with pytest.raises(NotInY):
        desk_rm.zeta(Point(desk_rm.sched, (7,)), 1)
    with pytest.raises(ValueError):
        desk_rm.xi(Point.zero(desk_rm.sched), -1)


def test_r_index_range(desk_rm):
    with pytest.raises(ScheduleError):
        desk_rm.r(0)


def test_vectorized_matches_scalar(lab_rm, rng):
    xs = sample_Y(lab_rm.holes, 40, rng)
    vals = lab_rm.value_array([x.value for x in xs])
    ns = rng.integers(-10**7, 10**7, size=40)
    z = lab_rm.zeta_many(vals, lab_rm.value_array(ns.tolist()))
    assert [int(v) for v in z] == [lab_rm.zeta(x, int(n)) for x, n in zip(xs, ns)]


def test_orbit_is_consecutive_powers(desk_rm):
    o = desk_rm.orbit(0, 0, 20)
    assert [int(v) for v in o] == [desk_rm.t_power(Point.zero(desk_rm.sched), n).value for n in range(20)]


@settings(max_examples=200, deadline=None)
@given(st.integers(-(10**12), 10**12))
def test_greedy_expansion_sums_back(n):
    rm = ReturnMap.of(AlphabetSchedule.paper(20))
    c = rm.greedy_digits(n)
    assert c.value(rm.sched) == n
    assert all(abs(v) <= rm.sched.sizes[i] // 2 for i, v in c.coeffs.items())


def test_greedy_literal_rule_can_stall():
    rm = ReturnMap.of(AlphabetSchedule.paper(20), greedy_rule="literal")
    with pytest.raises(GreedyStall):
        rm.greedy_digits(-5)
    assert ReturnMap.of(AlphabetSchedule.paper(20)).greedy_digits(-5).value(rm.sched) == -5


def test_sigma_of_return_heights(lab_rm):
    for p in (3, 5, 7, 11):
        assert lab_rm.sigma(2 * lab_rm.r(p) + lab_rm.r(p - 1)) == p
    assert lab_rm.sigma(0) == 0


def test_bad_greedy_options():
    with pytest.raises(ValueError):
        ReturnMap.of(AlphabetSchedule.paper(12), greedy_bound="huge")
