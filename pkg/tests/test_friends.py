import numpy as np
import pytest

from odoprime.friends import (
    HitProfile,
    InfeasibleWitness,
    are_friends,
    hit_profile,
    make_friend,
    profiles_are_friends,
    search_H,
    verify_witness,
)
from odoprime.holes import sample_Y
from odoprime.odometer import Point


def test_profile_comparison_rules():
    a = HitProfile(5, {1: 2, 3: 1}, {4: 1})
    assert profiles_are_friends(a, HitProfile(5, {1: 3, 3: 1}, {4: 1}))
    assert profiles_are_friends(a, HitProfile(5, {1: 2}, {4: 1}))
    # two Z levels differ
    assert not profiles_are_friends(a, HitProfile(5, {1: 3}, {4: 1}))
    # W counts must agree
    assert not profiles_are_friends(a, HitProfile(5, {1: 3, 3: 1}, {}))
    # identical is not a friend
    assert not profiles_are_friends(a, a)


def test_hit_profile_counts_holes_in_window(desk_rm):
    x = Point.zero(desk_rm.sched)
    p = hit_profile(desk_rm, x, 7)
    # S^7 of zero is the first Z_1 state
    assert p.z == {1: 1} and p.w == {}
    assert hit_profile(desk_rm, x, 6).z == {}


@pytest.mark.parametrize("k", [2, 3, 5, 7, 9, 13])
@pytest.mark.parametrize("d", [1, -1, 2])
def test_witness_sampled(lab_rm, k, d):
    m = d * lab_rm.r(k)
    if (k, d) == (2, -1):
        # the backward surgery writes 7 at position 1, which is the hole Z_1
        with pytest.raises(InfeasibleWitness):
            make_friend(lab_rm, m)
        return
    w = make_friend(lab_rm, m)
    assert w.kind == ("E" if lab_rm.sched.in_E(w.position) else "noE")
    chk = verify_witness(lab_rm, w, 80, np.random.default_rng(k * 10 + d))
    assert chk.ok, chk.failures[:3]
    assert set(chk.offsets) <= {-3, -2, -1, 1, 2, 3}


def test_witness_mass_is_cylinder_measure(lab_rm):
    w = make_friend(lab_rm, lab_rm.r(5))
    assert w.mass == w.domain.measure()
    assert w.nu_mass == lab_rm.holes.nu(w.domain)
    with pytest.raises(ValueError):
        pos, frm, _ = w.surgery
        w.apply(Point.zero(lab_rm.sched).replace(pos, frm + 1))


def test_friendship_is_symmetric(lab_rm, rng):
    w = make_friend(lab_rm, lab_rm.r(7))
    for x in sample_Y(lab_rm.holes, 20, rng, within=w.domain):
        y = w.apply(x)
        n = lab_rm.zeta(x, w.m)
        assert are_friends(lab_rm, x, y, n) == are_friends(lab_rm, y, x, n)


def test_search_H(lab_rm):
    w = search_H(lab_rm, lab_rm.r(9), 0.0)
    assert w is not None and w.surgery[0] > 1
    assert search_H(lab_rm, 0, 0.1) is None
