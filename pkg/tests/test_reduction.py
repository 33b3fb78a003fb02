from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odoprime.odometer import Cylinder
from odoprime.reduction import (
    BAD,
    GOOD,
    STOP_J0,
    Triple,
    bad_digit_values,
    classify,
    compute_PQ,
    reduce_full,
    reduce_step,
)
from odoprime.return_map import ReturnMap
from odoprime.schedule import AlphabetSchedule


def test_W_split_gives_zero_and_minus_one(desk_rm):
    # desk has a W position at 4
    res = reduce_full(desk_rm, desk_rm.r(4), 0, Fraction(1, 2))
    assert sorted(t.j for t in res.triples) == [-1, 0]
    assert res.total_mass() == 1


def test_literal_W_rule(desk_rm):
    res = reduce_full(desk_rm, desk_rm.r(4), 0, Fraction(1, 2), w_rule="literal")
    assert sorted(t.j for t in res.triples) == [0, 1]
    with pytest.raises(ValueError):
        reduce_step(desk_rm, Triple(5, Cylinder.full(desk_rm.sched), Fraction(0)), 0, 1, w_rule="odd")


def test_empty_type_keeps_the_cylinder(lab_rm):
    t = Triple(lab_rm.r(7), Cylinder.full(lab_rm.sched), Fraction(0))
    (kid,) = reduce_step(lab_rm, t, 1, Fraction(1, 2))
    assert kid.j == 0 and kid.A == t.A and kid.rho == Fraction(1, 11)
    assert reduce_step(lab_rm, kid, 1, Fraction(1, 2)) == [kid]


@settings(max_examples=60, deadline=None)
@given(st.integers(-(10**9), 10**9), st.integers(0, 6))
def test_mass_is_conserved(i, N):
    rm = ReturnMap.of(AlphabetSchedule.preset("lab"))
    res = reduce_full(rm, i, N, Fraction(1, 2))
    assert res.total_mass() == 1
    assert all(t.rho <= Fraction(1, 2) + 1 or why != "rho>eps" for t, why in zip(res.triples, res.reasons))


def test_stop_reasons_are_final(lab_rm):
    i = 2 * lab_rm.r(11) + lab_rm.r(10)
    res = reduce_full(lab_rm, i, 1, Fraction(1, 2))
    for t, why in zip(res.triples, res.reasons):
        assert why is not None
        assert reduce_step(lab_rm, t, 1, Fraction(1, 2)) == [t]
    assert reduce_full(lab_rm, 0, 1, 1).reasons == [STOP_J0]
    assert "(" in res.tree_text()


def test_bad_digits_cover_the_gate(lab_rm):
    bad = bad_digit_values(lab_rm, 7, 1)
    assert set(bad) == {7, 8, 9, 10}
    assert 199 in bad_digit_values(lab_rm, 4, 1)


def test_pq_small(lab_rm):
    i = 2 * lab_rm.r(7) + lab_rm.r(6)
    est = compute_PQ(lab_rm, i, 1, Fraction(1, 2), samples=2000, rng=np.random.default_rng(3))
    assert est.bound_ok and est.cover_ok
    assert est.sigma == 7 and est.d == 2


def test_classify(lab_rm):
    assert classify(lab_rm, 0, 4, Fraction(1, 2)) == GOOD
    # an empty-type top reduces straight to 0
    assert classify(lab_rm, lab_rm.r(15), 4, Fraction(1, 2)) == GOOD
    # a top position outside E cannot be reduced at all
    assert classify(lab_rm, lab_rm.r(14), 4, Fraction(1, 2)) == BAD
