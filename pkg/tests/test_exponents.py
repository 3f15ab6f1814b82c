import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqgl.errors import DegenerateExponent, DomainError, GapViolation, HypothesisNotMet
from pqgl.exponents import (
    ExponentSet,
    G_eval,
    GrowthCase,
    RadiusSchedule,
    classify,
    gap_bound,
    moser_exponents,
    moser_reciprocal_sum,
    sobolev_exponent,
    strict_gap_exponent,
)


@pytest.mark.parametrize("n, r, expected", [(3, 6, Fraction(7, 6)), (2, 2, Fraction(1)), (3, 3, Fraction(1)), (2, 4, Fraction(5, 4))])
def test_gap_bound_is_exact(n, r, expected):
    value = gap_bound(n, r)
    assert isinstance(value, Fraction)
    assert value == expected


def test_gap_bound_rejects_r_below_n():
    with pytest.raises(DomainError):
        gap_bound(3, 2)


def test_gap_bound_monotone_in_r_and_n():
    for n in range(2, 6):
        vals = [gap_bound(n, r) for r in range(n, n + 8)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
    for r in range(6, 10):
        vals = [gap_bound(n, r) for n in range(2, 6)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize(
    "args, case",
    [
        ((3, 2, 2, 3, 13), GrowthCase.STANDARD),
        ((3, 2, Fraction(11, 5), 6, 0), GrowthCase.STRICT),
        ((3, 2, Fraction(7, 3), 6, 1), GrowthCase.LIMIT),
    ],
)
def test_classify_examples(args, case):
    assert classify(ExponentSet(*args)) is case


def test_classify_error_paths():
    with pytest.raises(GapViolation):
        ExponentSet(3, 2, Fraction(5, 2), 6, 0)
    with pytest.raises(HypothesisNotMet):
        classify(ExponentSet(3, 2, 2, 3, 12))
    with pytest.raises(HypothesisNotMet):
        classify(ExponentSet(3, 2, Fraction(7, 3), 6, 0))
    with pytest.raises(HypothesisNotMet):
        classify(ExponentSet(3, 2, Fraction(11, 5), 6, 1))
    assert classify(ExponentSet(3, 2, Fraction(11, 5), 6, 1), permissive=True) is GrowthCase.STRICT


def test_float_inputs_use_tolerance_for_the_limit_case():
    E = ExponentSet(3, 2.0, 2.0 * 7.0 / 6.0, 6.0, 1.0)
    assert classify(E) is GrowthCase.LIMIT
    assert not E.exact


def test_invariants_rejected():
    for bad in [dict(p=1), dict(q=1.5), dict(r=2), dict(alpha=-1), dict(mu=1.5)]:
        kw = dict(n=3, p=2, q=2, r=3, alpha=13)
        kw.update(bad)
        with pytest.raises(DomainError):
            ExponentSet(**kw)
    with pytest.raises(DomainError):
        ExponentSet(3, 2, 2, 3, 13, lambda_ell=2.0, Lambda_ell=1.0)


def test_to_dict_keeps_rationals_as_strings():
    d = ExponentSet(3, 2, Fraction(7, 3), 6, 1).to_dict()
    assert d["q"] == "7/3" and d["n"] == 3
    assert set(d) == {"n", "p", "q", "r", "alpha", "mu", "lambda", "Lambda"}


def test_sobolev_exponent():
    assert sobolev_exponent(ExponentSet(3, 2, 2, 3, 13)) == 6
    assert sobolev_exponent(ExponentSet(4, 2, 2, 4, 17)) == 4
    assert sobolev_exponent(ExponentSet(2, 2, 2, 2, 9)) == 4
    assert sobolev_exponent(ExponentSet(2, 2, 2, 2, 9, sobolev_override=10)) == 10
    with pytest.raises(DomainError):
        ExponentSet(2, 2, 2, 2, 9, sobolev_override=2)


def test_moser_sums():
    E4 = ExponentSet(4, 2, 2, 4, 17)
    assert moser_reciprocal_sum(E4) == pytest.approx(1.0, abs=1e-15)
    assert moser_reciprocal_sum(E4, 0) == 0.5
    np.testing.assert_allclose(moser_exponents(E4, 3), [2, 4, 8, 16])
    E3 = ExponentSet(3, 2, 2, 3, 13)
    assert abs(moser_reciprocal_sum(E3, 50) - 0.75) <= 1e-12


@pytest.mark.parametrize("n, p", [(3, Fraction(2)), (4, Fraction(2)), (3, Fraction(3, 2)), (5, Fraction(3))])
def test_moser_partial_sums_increase_to_limit_with_geometric_tail(n, p):
    E = ExponentSet(n, p, p, n, 4 * n + 1)
    limit = n / (2 * float(p))
    ratio = 2 / sobolev_exponent(E)
    sums = [moser_reciprocal_sum(E, J) for J in range(30)]
    assert all(a < b for a, b in zip(sums, sums[1:]))
    for J, s in enumerate(sums):
        assert s <= limit
        assert limit - s <= limit * ratio ** (J + 1) + 1e-15


def test_radius_schedule():
    R = RadiusSchedule(0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    seq = R.radii_seq(10)
    assert seq[0] == pytest.approx(0.5)
    assert np.all(np.diff(seq) < 0) and np.all(seq > 0.2)
    with pytest.raises(DomainError):
        RadiusSchedule(0.1, 0.3, 0.2, 0.4, 0.5, 0.6)
    with pytest.raises(DomainError):
        RadiusSchedule(0.1, 0.2, 0.3, 0.4, 0.5, 1.5)


def test_G_examples():
    assert G_eval(ExponentSet(3, 2, 2, 3, 13), GrowthCase.STANDARD, 4.0) == pytest.approx(2.0)
    E = ExponentSet(3, 2, 2.2, 6, 0)
    assert G_eval(E, GrowthCase.STRICT, 1.0) == pytest.approx(2.0)
    assert strict_gap_exponent(E) == pytest.approx(1.25)
    L = ExponentSet(3, 2, Fraction(7, 3), 6, 2)
    assert G_eval(L, GrowthCase.LIMIT, 1.0) == pytest.approx(math.exp(1.5) + 1.0, rel=1e-14)
    assert G_eval(E, GrowthCase.STRICT, 0.0) == 0.0


def test_strict_exponent_degenerates_at_the_gap():
    E = ExponentSet(3, 2, Fraction(7, 3), 6, 1)
    with pytest.raises(DegenerateExponent):
        strict_gap_exponent(E)
    # the exponent diverges as q/p increases to the gap bound
    qs = [Fraction(7, 3) - Fraction(1, 10 ** k) for k in range(1, 7)]
    exps = [strict_gap_exponent(ExponentSet(3, 2, q, 6, 0)) for q in qs]
    assert all(a < b for a, b in zip(exps, exps[1:]))
    assert exps[-1] > 1e5


rationals = st.fractions(min_value=Fraction(11, 10), max_value=Fraction(4), max_denominator=12)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 5), p=rationals, step=st.fractions(0, 1, max_denominator=12),
       dr=st.integers(0, 6), alpha=st.fractions(0, 30, max_denominator=4))
def test_classification_is_a_partition(n, p, step, dr, alpha):
    r = n + dr
    q = p * (1 + step * (gap_bound(n, r) - 1))
    E = ExponentSet(n, p, q, r, alpha)
    matches = [
        p == q and r == n and alpha > 4 * n,
        p < q and q / p < gap_bound(n, r) and r > n and alpha == 0,
        p < q and q / p == gap_bound(n, r) and r > n and alpha > 0,
    ]
    assert sum(matches) <= 1
    if any(matches):
        assert classify(E) is [GrowthCase.STANDARD, GrowthCase.STRICT, GrowthCase.LIMIT][matches.index(True)]
    else:
        with pytest.raises(HypothesisNotMet):
            classify(E)


@settings(max_examples=100, deadline=None)
@given(t=st.lists(st.floats(0, 50), min_size=2, max_size=20))
def test_G_is_nondecreasing(t):
    t = np.sort(np.asarray(t))
    for E, case in [
        (ExponentSet(3, 2, 2, 3, 13), GrowthCase.STANDARD),
        (ExponentSet(3, 2, Fraction(11, 5), 6, 0), GrowthCase.STRICT),
        (ExponentSet(3, 2, Fraction(7, 3), 6, 2), GrowthCase.LIMIT),
    ]:
        g = G_eval(E, case, t)
        assert np.all((g[1:] >= g[:-1]) | (np.isinf(g[1:]) & np.isinf(g[:-1])))
