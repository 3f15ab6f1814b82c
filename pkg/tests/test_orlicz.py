import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqgl.errors import (
    CaseError,
    ConstantBlowup,
    DegenerateWeight,
    DomainError,
    HorizonError,
    HypothesisError,
    S0NotFound,
)
from pqgl.exponents import ExponentSet
from pqgl.orlicz import (
    FENCHEL_CATALOG,
    HatWeight,
    L_inverse_asymptotics_check,
    OrliczWeight,
    PhiFunction,
    eq_elem_check,
    fenchel_conjugate,
    fenchel_inequality_check,
    ggp_sandwich_check,
    hat_inverse_bound,
    iteration_lemma_apply,
    iteration_lemma_constant,
    monotone_inverse,
    phi_submultiplicative_check,
)

# high-precision roots computed with mpmath.findroot at 30 digits
LINV_6_3_2_AT_100 = 3.16883117709404860789
HAT_INV_AT_2 = 1494.71463754033150358
HAT_BOUND_AT_2 = 1613.71517397094049043


def test_L_values():
    W = OrliczWeight(6, 3, 2)
    assert W(0.0) == 0.0
    assert OrliczWeight(6, 3, 0)(2.0) == 8.0
    assert W(1.0) == pytest.approx(math.log(math.e + 1) ** 2, rel=1e-15)
    assert OrliczWeight(3, 3, 5).at_zero() == 1.0


def test_L_inverse_values():
    W = OrliczWeight(6, 3, 2)
    assert W.inverse(math.log(math.e + 1) ** 2) == pytest.approx(1.0, rel=1e-12)
    assert OrliczWeight(6, 3, 0).inverse(8.0) == pytest.approx(2.0, rel=1e-12)
    assert W.inverse(0.0) == 0.0
    assert W.inverse(100.0) == pytest.approx(LINV_6_3_2_AT_100, rel=1e-12)
    # log^5(e + t) = 32 has the closed-form root e^2 - e
    assert OrliczWeight(3, 3, 5).inverse(32.0) == pytest.approx(math.e ** 2 - math.e, rel=1e-12)


def test_L_inverse_generalized_below_L0():
    W = OrliczWeight(3, 3, 5)
    assert W.inverse(0.5) == 0.0
    with pytest.raises(DegenerateWeight):
        OrliczWeight(3, 3, 0).inverse(2.0)
    with pytest.raises(DomainError):
        W.inverse(-1.0)


@pytest.mark.parametrize("r, n, alpha", [(6, 3, 2), (4, 2, 1), (3, 3, 5), (7, 3, 0.5)])
def test_round_trip_on_log_grid(r, n, alpha):
    W = OrliczWeight(r, n, alpha)
    tau = np.logspace(-3, 8, 1000) if r > n else np.logspace(0.01, 3, 1000)
    err = np.abs(W(W.inverse(tau)) - tau)
    assert np.all(err <= 1e-12 * np.maximum(1.0, tau))


@settings(max_examples=50, deadline=None)
@given(log_tau=st.floats(-20, 600))
def test_log_inverse_matches_inverse_or_extends_it(log_tau):
    W = OrliczWeight(6, 3, 2)
    s = W.log_inverse(log_tau)
    # (r - n) s + alpha log log(e + e^s) = log tau
    assert 3 * s + 2 * math.log(np.logaddexp(1.0, s)) == pytest.approx(log_tau, rel=1e-10, abs=1e-10)
    if log_tau < 300:
        assert math.exp(s) == pytest.approx(W.inverse(math.exp(log_tau)), rel=1e-10)


def test_asymptotics_examples():
    rep = L_inverse_asymptotics_check(OrliczWeight(3, 3, 5), [32.0])
    assert rep["max_violation"] <= 0
    assert rep["margins"][0] == pytest.approx(math.exp(2) - (math.e ** 2 - math.e), rel=1e-9)
    tight = L_inverse_asymptotics_check(OrliczWeight(6, 3, 0), [8.0])
    assert abs(tight["margins"][0]) <= 1e-12
    ident = L_inverse_asymptotics_check(OrliczWeight(6, 3, 2), np.geomspace(1.8, 1e6, 300))
    assert ident["max_violation"] <= 1e-10
    with pytest.raises(DomainError):
        L_inverse_asymptotics_check(OrliczWeight(3, 3, 5), [1.0])


def test_hat_weight_inverse_and_bound():
    H = HatWeight(6, 3, 2, 2, Fraction(7, 3))
    assert H.is_limit
    assert H(0.0) == 1.0
    assert hat_inverse_bound(H, 1.0) == pytest.approx(math.exp(1.5), rel=1e-14)
    assert hat_inverse_bound(H, 0.0) == 0.0
    assert H.inverse_exact(2.0) == pytest.approx(HAT_INV_AT_2, rel=1e-12)
    assert H.inverse_numeric(2.0) == pytest.approx(HAT_INV_AT_2, rel=1e-10)
    assert hat_inverse_bound(H, 2.0) == pytest.approx(HAT_BOUND_AT_2, rel=1e-12)
    assert H(H.inverse_exact(3.0)) == pytest.approx(3.0, rel=1e-10)
    with pytest.raises(DomainError):
        H.inverse_numeric(0.5)


def test_hat_bound_dominates_numeric_inverse():
    H = HatWeight(6, 3, 2, 2, Fraction(7, 3))
    sigma = np.geomspace(1.0, 5.0, 200)
    numeric = H.inverse_numeric(sigma)
    bound = hat_inverse_bound(H, sigma)
    assert np.all(bound >= numeric * (1 - 1e-10))
    assert np.all(np.diff(bound) >= 0) and np.all(np.diff(H(np.geomspace(0.1, 10, 50))) >= 0)


def test_hat_errors():
    with pytest.raises(CaseError):
        hat_inverse_bound(HatWeight(6, 3, 2, 2, Fraction(11, 5)), 1.0)
    with pytest.raises(DegenerateWeight):
        HatWeight(3, 3, 2, 2, 2)
    assert HatWeight.from_exponents(ExponentSet(3, 2, Fraction(7, 3), 6, 2)).is_limit


def test_phi_examples():
    e = math.e
    assert phi_submultiplicative_check(PhiFunction(1, 1), e, e) == pytest.approx(e ** 2 / 2, rel=1e-14)
    assert phi_submultiplicative_check(PhiFunction(1, 2), e ** 2, e ** 2) >= 0
    P = PhiFunction(2, 1.5)
    s = 7.0
    assert phi_submultiplicative_check(P, s, s) == pytest.approx(3 * P(s * s), rel=1e-13)
    with pytest.raises(DomainError):
        phi_submultiplicative_check(P, 1.0, 3.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_phi_margin_nonnegative_on_random_pairs(alpha, beta):
    rng = np.random.default_rng(17)
    s = np.exp(rng.uniform(math.log(1 + 2e-6), math.log(50), 10_000))
    t = np.exp(rng.uniform(math.log(1 + 2e-6), math.log(50), 10_000))
    assert np.min(phi_submultiplicative_check(PhiFunction(alpha, beta), s, t)) >= 0


def test_fenchel_examples():
    assert fenchel_conjugate(lambda t: 0.5 * np.asarray(t) ** 2, 3.0) == pytest.approx(4.5, rel=1e-12)
    assert fenchel_conjugate(lambda t: np.asarray(t, dtype=float), 0.5) == 0.0
    assert fenchel_conjugate(lambda t: np.asarray(t) ** 3, 3.0) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(HorizonError):
        fenchel_conjugate(lambda t: np.asarray(t, dtype=float), 2.0)


@pytest.mark.parametrize("name", sorted(FENCHEL_CATALOG))
def test_fenchel_inequality_and_convexity(name):
    Phi = FENCHEL_CATALOG[name]
    rng = np.random.default_rng(3)
    s, t = rng.uniform(0, 10, 10_000), rng.uniform(0, 10, 10_000)
    assert fenchel_inequality_check(Phi, s, t).min() >= -1e-10
    grid = np.linspace(0, 10, 101)
    star = fenchel_conjugate(Phi, grid)
    assert np.all(np.diff(star, 2) >= -1e-9)


def test_ggp_sandwich_for_test_functions():
    grid = np.logspace(-2, 3, 30)
    for phi in (lambda x: np.asarray(x, dtype=float), np.sqrt):
        s0, rep = ggp_sandwich_check(phi, grid)
        assert s0 == grid[0]
        assert rep["holds"].all()


def test_ggp_nontrivial_threshold_and_failure():
    phi = lambda s: np.log1p(np.asarray(s, dtype=float) ** 2)  # noqa: E731
    grid = np.logspace(-3, 3, 25)
    s0, rep = ggp_sandwich_check(phi, grid)
    assert 0.1 < s0 <= 2.0
    assert not rep["holds"][0] and rep["holds"][grid >= s0].all()
    with pytest.raises(S0NotFound):
        ggp_sandwich_check(phi, [1e-3, 1e-2])
    # phi^{-1} = sqrt has an infinite polar: no s0 exists
    with pytest.raises(S0NotFound):
        ggp_sandwich_check(lambda s: np.asarray(s, dtype=float) ** 2, np.linspace(1, 100, 12))


def test_iteration_lemma_constant():
    kappa, c = iteration_lemma_constant(2.0, 1.0, 0.25)
    assert kappa == pytest.approx(math.sqrt(0.5))
    assert c == pytest.approx((1 - kappa) ** -2 / (1 - 0.25 / kappa ** 2))
    kappa, _ = iteration_lemma_constant(2.0, 1.0, 0.75)
    assert 0 < kappa < 1
    with pytest.raises(ConstantBlowup):
        iteration_lemma_constant(400.0, 400.0, 1 - 1e-6)


def test_iteration_lemma_apply():
    assert iteration_lemma_apply(lambda r: np.zeros_like(r), 0.2, 1.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.5) >= 0
    theta, A, a_e, R1, R2 = 0.5, 1.0, 2.0, 0.25, 1.0
    # backward family: f(r1) - theta f(r2) <= (1 - theta) f(r1) = A / (R2 - r1)^a
    f = lambda r: A / ((1 - theta) * (R2 - np.asarray(r)) ** a_e)  # noqa: E731
    bound = iteration_lemma_apply(f, R1, R2, A, 0.0, 0.0, a_e, 0.0, theta)
    assert float(f(R1)) <= bound
    with pytest.raises(HypothesisError):
        iteration_lemma_apply(lambda r: np.ones_like(r), 0.2, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.5)


def test_eq_elem():
    W = OrliczWeight(6, 3, 2)
    assert eq_elem_check(W, 2.0, [0.0]) == 1.0
    c10 = eq_elem_check(W, 2.0, np.linspace(0, 10, 101))
    assert math.isfinite(c10)
    consts = [eq_elem_check(W, 2.0, np.concatenate(([0.0], np.logspace(-3, k, 200)))) for k in (1, 2, 3)]
    # the best constant settles as the sampled range grows
    assert max(consts) <= 1.5 * min(consts)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.1, 5), y=st.one_of(st.just(0.0), st.floats(1e-30, 1e6)))
def test_monotone_inverse_matches_power_root(a, y):
    f = lambda t: np.asarray(t, dtype=float) ** a  # noqa: E731
    t = float(monotone_inverse(f, y)[0])
    assert t == pytest.approx(y ** (1 / a), rel=1e-12, abs=1e-300)
