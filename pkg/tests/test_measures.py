import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odoprime.holes import sample_Y
from odoprime.measures import (
    EmpiricalMeasure,
    InfeasibleBand,
    MetricConfig,
    MismatchedSpaces,
    barycenter_step,
    birkhoff_joining,
    check_shift,
    distance_rows,
    find_barycenter,
    first_disagreement,
    kr_distance,
    kr_lp,
    metric,
    mixture,
    offdiag_joining,
    operator_D,
    operator_D_direct,
    product_metric,
    shift_witness,
)

digits = st.lists(st.integers(0, 3), min_size=4, max_size=4)


def test_metric_basics():
    assert first_disagreement((1, 2, 3), (1, 2, 3)) is None
    assert first_disagreement((1, 2, 3), (1, 5, 3)) == 2
    assert metric((0, 0), (1, 0)) == 0.5
    assert metric((0, 0), (0, 1), MetricConfig(0.25)) == 0.0625
    assert product_metric(((0, 0), (0, 1)), ((0, 0), (1, 1))) == 0.5
    with pytest.raises(ValueError):
        MetricConfig(1.5)


@settings(max_examples=1000, deadline=None)
@given(digits, digits, digits)
def test_metric_axioms(x, y, z):
    dxy, dyz, dxz = metric(x, y), metric(y, z), metric(x, z)
    assert (dxy == 0) == (x == y)
    assert dxy == metric(y, x)
    # ultrametric, hence triangle
    assert dxz <= max(dxy, dyz) + 1e-15
    assert dxz <= dxy + dyz + 1e-15


@settings(max_examples=1000, deadline=None)
@given(st.tuples(digits, digits), st.tuples(digits, digits), st.tuples(digits, digits))
def test_product_metric_axioms(p, q, r):
    assert product_metric(p, q) == product_metric(q, p)
    assert product_metric(p, r) <= product_metric(p, q) + product_metric(q, r) + 1e-15
    assert (product_metric(p, q) == 0) == (p == q)


def test_distance_rows_matches_scalar(rng):
    a = rng.integers(0, 3, size=(200, 5))
    b = rng.integers(0, 3, size=(200, 5))
    want = [metric(x, y) for x, y in zip(a, b)]
    assert np.allclose(distance_rows(a, b), want)
    pa = rng.integers(0, 2, size=(100, 4, 2))
    pb = rng.integers(0, 2, size=(100, 4, 2))
    want = [product_metric((x[:, 0], x[:, 1]), (y[:, 0], y[:, 1])) for x, y in zip(pa, pb)]
    assert np.allclose(distance_rows(pa, pb), want)


def _random_measure(rng, pair):
    n = int(rng.integers(1, 9))
    shape = (n, 4, 2) if pair else (n, 4)
    return EmpiricalMeasure(rng.integers(0, 3, size=shape), rng.random(n) + 0.01)


@pytest.mark.parametrize("pair", [False, True])
def test_tree_formula_equals_linear_program(pair):
    rng = np.random.default_rng(11 + pair)
    for _ in range(100):
        m1, m2 = _random_measure(rng, pair), _random_measure(rng, pair)
        assert abs(kr_distance(m1, m2) - kr_lp(m1, m2)) < 1e-9


def test_kr_other_theta():
    rng = np.random.default_rng(5)
    cfg = MetricConfig(0.3)
    for _ in range(20):
        m1, m2 = _random_measure(rng, False), _random_measure(rng, False)
        assert abs(kr_distance(m1, m2, cfg) - kr_lp(m1, m2, cfg)) < 1e-9


def test_kr_is_a_metric_on_measures():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a, b, c = (_random_measure(rng, False) for _ in range(3))
        assert kr_distance(a, a) < 1e-12
        assert abs(kr_distance(a, b) - kr_distance(b, a)) < 1e-12
        assert kr_distance(a, c) <= kr_distance(a, b) + kr_distance(b, c) + 1e-12


def test_mismatched_spaces():
    a = EmpiricalMeasure.uniform(np.zeros((2, 4)))
    b = EmpiricalMeasure.uniform(np.zeros((2, 4, 2)))
    with pytest.raises(MismatchedSpaces):
        kr_distance(a, b)
    with pytest.raises(MismatchedSpaces):
        a.marginal(0)
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 4)), [1.0, -1.0])


def test_mixture_weights():
    a = EmpiricalMeasure.uniform(np.zeros((3, 2)))
    b = EmpiricalMeasure.uniform(np.ones((1, 2)))
    m = mixture([a, b], [0.25, 0.75])
    assert math.isclose(m.total(), 1.0)
    assert math.isclose(m.cylinder_mass({1: (1, 1)}), 0.75)
    assert math.isclose(a.merge(b, 0.5).cylinder_mass({1: (0, 0)}), 0.5)


def test_joinings_have_nu_marginals(lab_rm):
    J = offdiag_joining(lab_rm, lab_rm.r(3), sample_count=4000, truncation=6, seed=1)
    # T preserves nu, so both marginals estimate the same law
    m0, m1 = J.marginal(0), J.marginal(1)
    for pos, v in [(1, 0), (1, 6), (2, 3), (3, 0)]:
        assert abs(m0.cylinder_mass({pos: (v, v)}) - m1.cylinder_mass({pos: (v, v)})) < 0.03
    x = sample_Y(lab_rm.holes, 1, np.random.default_rng(0))[0]
    B = birkhoff_joining(lab_rm, x, 3, 50, truncation=4)
    assert B.points.shape == (50, 4, 2)


def test_barycenter_step_and_bands(lab_rm):
    st = barycenter_step(lab_rm, 1, 2, 4)
    assert st.power == 1 - lab_rm.r(4)
    assert st.A.constraints[0][1] <= st.A.constraints[0][2]
    with pytest.raises(InfeasibleBand):
        barycenter_step(lab_rm, 1, 2, 3)
    with pytest.raises(InfeasibleBand):
        barycenter_step(lab_rm, st.power, 2, 11)


def test_barycenter_improves_on_lab(lab_rm):
    res = find_barycenter(lab_rm, [1, 2], 0.01, samples=3000, truncation=7, seed=0)
    assert res.final < res.initial
    assert res.stop.startswith("infeasible") or res.converged
    one = find_barycenter(lab_rm, [5], 0.1, samples=100)
    assert one.converged and one.final < 1e-12


@pytest.mark.parametrize("p", [4, 11])
def test_shift_witness_follow(lab_rm, p):
    w = shift_witness(lab_rm, 1, 2, p)
    chk = check_shift(lab_rm, w, 0.01, samples=60, offsets=3, occupation_samples=5, max_window=500)
    assert chk.follow_a == 1.0 and chk.follow_b == 1.0
    lit = shift_witness(lab_rm, 1, 2, p, reading="literal")
    assert check_shift(lab_rm, lit, 0.01, samples=30, offsets=2, occupation_samples=0).follow_b < 0.5


def test_operator_D_forms_agree(small_quotients):
    rm, fq = small_quotients["desk"]
    n = fq.n_Y
    perm = np.searchsorted(fq.Y, fq.T)
    c1, c2 = {1: 0.5, 3: 0.5}, {2: 1.0}
    assert abs(operator_D(c1, c2, n) - operator_D_direct(c1, c2, perm)) < 1e-12
    assert operator_D(c1, c1, n) == 0
    with pytest.raises(ValueError):
        operator_D({1: 0.4}, c2, n)
