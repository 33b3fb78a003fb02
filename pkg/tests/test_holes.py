from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odoprime.holes import HoleFamily, sample_Y, w_threshold
from odoprime.odometer import Cylinder, Point
from odoprime.schedule import AlphabetSchedule, DepthError


def test_w_threshold_counts_lower_half():
    assert w_threshold(6) == 3 and w_threshold(5) == 3 and w_threshold(2) == 1


def test_hole_shapes(desk):
    H = HoleFamily(desk)
    labels = [h.label for h in H.holes]
    assert labels[:4] == ["Z1", "Z2", "W4", "Z5"]
    assert H.Z(2).as_dict == {1: (6, 6), 2: (7, 7)}
    assert H.W(4).as_dict == {1: (6, 6), 2: (6, 6), 3: (3, 3), 4: (0, 2)}
    with pytest.raises(KeyError):
        H.Z(3)


def test_absorbing_hole(desk2):
    H = HoleFamily(desk2)
    assert H.absorbing_top == 3
    assert H.tail_bound() == 0


@pytest.mark.parametrize("name,L", [("paper", 4), ("desk", 5), ("desk2", 5), ("lab", 3)])
def test_measure_Y_matches_enumeration(name, L):
    s = AlphabetSchedule.preset(name, L)
    H = HoleFamily(s)
    # a truncated family only sees holes up to L; compare with the state count
    q = s.qs[L + 1]
    count = sum(H.in_Y(s.encode(v)) for v in range(q))
    assert H.measure_Y()[0] == Fraction(count, q)


def test_count_below_matches_membership(desk):
    H = HoleFamily(desk.with_depth(5))
    s = H.sched
    for v in range(0, 3000, 7):
        assert (H.count_below(v + 1) - H.count_below(v) == 0) == H.in_Y(s.encode(v))


def test_in_Y_nonstrict_and_strict(desk):
    H = HoleFamily(desk)
    pinned = Point(desk, tuple(a - 2 for a in desk.sizes[1:]))
    assert H.in_Y(pinned)
    with pytest.raises(DepthError):
        H.in_Y(pinned, strict=True)


def test_truncation_depth_bounds(desk):
    with pytest.raises(DepthError):
        HoleFamily(desk, desk.depth + 1)
    assert HoleFamily(desk, 0).measure_Y()[0] == 1


def test_nu_of_full_space_is_one(lab):
    H = HoleFamily(lab)
    assert H.nu(Cylinder.full(lab)) == 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32))
def test_sample_Y_lands_in_Y_and_cylinder(seed):
    s = AlphabetSchedule.preset("desk")
    H = HoleFamily(s)
    C = Cylinder(s, [(2, 6, 6)])
    xs = sample_Y(H, 25, np.random.default_rng(seed), within=C)
    assert all(H.in_Y(x) and C.contains(x) for x in xs)


def test_sample_Y_frequency_matches_nu(lab, rng):
    H = HoleFamily(lab)
    C = Cylinder(lab, [(1, 6, 6), (2, 7, 7)])
    xs = sample_Y(H, 4000, rng)
    est = np.mean([C.contains(x) for x in xs])
    nu = float(H.nu(C))
    assert abs(est - nu) < 4 * np.sqrt(nu * (1 - nu) / 4000)
