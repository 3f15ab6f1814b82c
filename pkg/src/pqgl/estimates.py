"""Both sides of the second-order Caccioppoli inequality and of the Lipschitz bound,
measured on discrete minimizers, plus the constant bookkeeping of the Moser iteration.

All constants are fitted: each check reports the smallest constant that makes
the inequality hold on the computed field, and tests compare those constants
across grid refinements.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    GapViolation,
    HypothesisNotMet,
    NonConvergence,
    ProductDivergence,
    SplitNotApplicable,
    StaleField,
)
from .exponents import (
    ExponentSet,
    G_eval,
    GrowthCase,
    RadiusSchedule,
    classify,
    moser_exponents,
    sobolev_exponent,
)
from .integrand import CoefficientField, Integrand, make_integrand, orlicz_norm_h
from .orlicz import OrliczWeight, monotone_inverse
from .solver import Grid, GridField, boundary_data, minimize

DEFAULT_RADII = ((0.2, 0.4), (0.25, 0.5), (0.3, 0.6))
DEFAULT_GAMMAS = (0.0, 2.0, 4.0)
CAUCHY_TOL = 1e-8
CSV_COLUMNS = (
    "regime", "p", "q", "r", "alpha", "m", "rho", "R", "gamma",
    "lhs", "rhs_sum", "fitted_C", "G_argument", "C_prime", "verdict",
)


@dataclass(frozen=True)
class Cutoff:
    """eta = clamp((R - |x|)/(R - rho), 0, 1): 1 on B_rho, 0 outside B_R."""

    rho: float
    R: float

    def __post_init__(self):
        if not 0 <= self.rho < self.R:
            raise DomainError("need 0 <= rho < R")

    def __call__(self, x):
        r = np.linalg.norm(np.atleast_2d(x), axis=1)
        return np.clip((self.R - r) / (self.R - self.rho), 0.0, 1.0)

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        ramp = (r > self.rho) & (r < self.R)
        safe = np.where(r > 0, r, 1.0)
        return np.where(ramp[:, None], -x / (safe[:, None] * (self.R - self.rho)), 0.0)


def v_of_grad(u: GridField, mu: float) -> np.ndarray:
    """Per-simplex V(Du) = (mu^2 + |Du|^2)^(1/2)."""
    Du = u.gradients()
    return np.sqrt(mu * mu + np.sum(Du * Du, axis=1))


def _require_converged(u: GridField):
    if not u.converged or u.grad_sup > u.tol:
        raise StaleField(f"field is not a converged minimizer (grad sup {u.grad_sup:.3e} > tol {u.tol:.3e})")


@dataclass(frozen=True)
class CaccioppoliResult:
    lhs: float
    rhs_terms: tuple
    fitted_C: float

    @property
    def rhs_sum(self) -> float:
        return float(sum(self.rhs_terms))


def caccioppoli_check(u: GridField, I: Integrand, cut: Cutoff, gamma: float) -> CaccioppoliResult:
    """lhs = int eta^2 V^(p-2+gamma) |D^2 u|^2 against the three right-hand terms

    (1+gamma^2) int eta^2 h^2 V^(2q-p+gamma),  int |D eta|^2 V^(p+gamma),
    int |D eta|^2 V^(q+gamma); fitted_C = lhs / (sum of the terms).
    The Hessian of a simplex is the mean of the recovered nodal Hessians at its vertices.
    """
    _require_converged(u)
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    g = u.grid
    p, q, mu = I.p, float(I.E.q), I.mu
    V = v_of_grad(u, mu)
    H = u.nodal_hessian()
    hess2 = np.sum(H * H, axis=(1, 2))[g.simplices].mean(axis=1)
    xb = g.barycenters
    eta = cut(xb)
    deta2 = np.sum(cut.grad(xb) ** 2, axis=1)
    h = I.coeff.h(xb)
    vol = g.volume
    lhs = vol * float(np.sum(eta ** 2 * V ** (p - 2 + gamma) * hess2))
    rhs = (
        (1 + gamma ** 2) * vol * float(np.sum(eta ** 2 * h ** 2 * V ** (2 * q - p + gamma))),
        vol * float(np.sum(deta2 * V ** (p + gamma))),
        vol * float(np.sum(deta2 * V ** (q + gamma))),
    )
    total = sum(rhs)
    if total > 0:
        fitted = lhs / total
    else:
        fitted = 0.0 if lhs == 0 else math.inf
    return CaccioppoliResult(lhs, rhs, fitted)


def invert_G(E: ExponentSet, case: GrowthCase, value: float) -> float:
    """Smallest t >= 0 with G(t) >= value."""
    if value <= 0:
        return 0.0
    return float(monotone_inverse(lambda t: G_eval(E, case, t), value)[0])


@dataclass(frozen=True)
class EstimateRecord:
    m: int
    regime: str
    rho: float
    R: float
    lhs: float
    inner: float
    C_prime: float


def main_estimate_check(u: GridField, E: ExponentSet, case, radii: Sequence = DEFAULT_RADII):
    """Smallest C' with sup_{B_rho} |Du| <= G(C' (R-rho)^-n int_{B_R} (1 + |Du|^p)).

    Sups and integrals run over simplices whose barycenter lies in the ball.
    """
    _require_converged(u)
    case = GrowthCase(case)
    g = u.grid
    Du = u.gradients()
    mod = np.linalg.norm(Du, axis=1)
    p = float(E.p)
    out = []
    for rho, R in radii:
        if not 0 < rho < R:
            raise DomainError("need 0 < rho < R")
        inner_ball = g.in_ball(g.barycenters, rho)
        outer_ball = g.in_ball(g.barycenters, R)
        lhs = float(mod[inner_ball].max()) if inner_ball.any() else 0.0
        integral = g.volume * float(np.sum(1.0 + mod[outer_ball] ** p))
        inner = integral / (R - rho) ** g.n
        c_prime = invert_G(E, case, lhs) / inner if lhs > 0 else 0.0
        out.append(EstimateRecord(g.m, case.value, float(rho), float(R), lhs, inner, c_prime))
    return out


# ----------------------------------------------------------------------------- Moser bookkeeping


@dataclass(frozen=True)
class MoserConstants:
    H_squared: float
    gamma: float = 0.0
    epsilon_split: Optional[float] = None

    def __post_init__(self):
        if self.H_squared < 0:
            raise DomainError("H^2 must be >= 0")

    @property
    def H(self) -> float:
        return math.sqrt(self.H_squared)

    def theta(self, n: int) -> float:
        """Theta = 1 + 4^n H^(2n)."""
        return 1.0 + 4.0 ** n * self.H_squared ** n

    @classmethod
    def from_coefficient(cls, Cf: CoefficientField, E: ExponentSet, center, radius: float,
                         gamma: float = 0.0) -> "MoserConstants":
        _, H2 = orlicz_norm_h(Cf, center, radius, E)
        return cls(H2, gamma)


def epsilon_split(MC: MoserConstants, E: ExponentSet, K: float) -> float:
    """L^{-1}(2^n H^n (1+gamma^2)^n K^(n(q-p))), the level splitting h into small and bounded parts."""
    n, p, q, r, alpha = E.floats()
    if q == p:
        raise SplitNotApplicable("q = p: no splitting of h is needed")
    if K < 0:
        raise DomainError("K must be >= 0")
    return float(OrliczWeight(r, n, alpha).inverse(split_argument(MC, E, K)))


def split_argument(MC: MoserConstants, E: ExponentSet, K: float) -> float:
    """2^n H^n (1+gamma^2)^n K^(n(q-p))."""
    n, p, q, _, _ = E.floats()
    return (2.0 * MC.H) ** n * (1 + MC.gamma ** 2) ** n * K ** (n * (q - p))


@dataclass(frozen=True)
class IterationTrace:
    """Partial sums of the logs of both Moser products, j = 0..J."""

    log_first: np.ndarray
    log_second: np.ndarray
    log_first_bound: float
    cauchy_first: bool
    cauchy_second: bool

    @property
    def first(self) -> np.ndarray:
        return np.exp(self.log_first)

    @property
    def second(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_second)


def first_product_log_bound(E: ExponentSet, C: float, d: float) -> float:
    """log of exp(log C S + log 4 sum (j+1)/p_j + 4 sum log p_j / p_j) / d^(2S), summed in closed form."""
    p = float(E.p)
    b = sobolev_exponent(E) / 2.0
    rho = 1.0 / b
    S = 1.0 / (p * (1.0 - rho))
    s_lin = 1.0 / (p * (1.0 - rho) ** 2)
    s_log = math.log(p) / (p * (1.0 - rho)) + math.log(b) * rho / (p * (1.0 - rho) ** 2)
    return math.log(C) * S + math.log(4.0) * s_lin + 4.0 * s_log - 2.0 * S * math.log(d)


def iteration_trace(E: ExponentSet, MC: MoserConstants, base_ratio: float, radii: RadiusSchedule,
                    J: int = 60, case: Optional[GrowthCase] = None) -> IterationTrace:
    """Partial products of (C 4^(j+1) p_j^4 / d^2)^(1/p_j) and (L^{-1}(2 Theta p_j^(4n)))^(1/p_j).

    ``base_ratio`` is the constant C (>= 1) of a single iteration step and
    d = R0~ - rho0~.  Both products are tracked through their logarithms.
    Raises ``ProductDivergence`` when the second product diverges (r = n with
    alpha <= 4n) or fails the Cauchy test at J without decaying terms.
    """
    if J < 1:
        raise DomainError("J must be >= 1")
    if base_ratio < 1:
        raise DomainError("base_ratio must be >= 1")
    n, p, q, r, alpha = E.floats()
    d = radii.R0_tilde - radii.rho0_tilde
    pj = moser_exponents(E, J)
    j = np.arange(J + 1, dtype=float)
    first_terms = (math.log(base_ratio) + (j + 1) * math.log(4.0) + 4.0 * np.log(pj) - 2.0 * math.log(d)) / pj
    if r == n:
        if alpha <= 4 * n:
            raise ProductDivergence(
                f"r = n and alpha = {alpha} <= 4n: terms p_j^(4n/alpha - 1) do not decay"
            )
    W = OrliczWeight(r, n, alpha)
    log_arg = math.log(2.0 * MC.theta(n)) + 4.0 * n * np.log(pj)
    second_terms = np.asarray(W.log_inverse(log_arg)) / pj
    log_first = np.cumsum(first_terms)
    log_second = np.cumsum(second_terms)

    def cauchy(terms, sums):
        return bool(abs(terms[-1]) <= CAUCHY_TOL * max(1.0, abs(sums[-1])))

    c1, c2 = cauchy(first_terms, log_first), cauchy(second_terms, log_second)
    if not c2 and second_terms[-1] >= second_terms[-2]:
        raise ProductDivergence("second product: terms stopped decaying before the Cauchy test passed")
    bound = first_product_log_bound(E, base_ratio, d)
    if log_first[-1] > bound + 1e-10 * max(1.0, abs(bound)):
        raise ProductDivergence(f"first product {log_first[-1]} exceeds its closed-form bound {bound}")
    if not (c1 and c2):
        warnings.warn("iteration products not Cauchy to 1e-8 at the requested depth", stacklevel=2)
    return IterationTrace(log_first, log_second, bound, c1, c2)


# ----------------------------------------------------------------------------- scans


@dataclass(frozen=True)
class ScanPoint:
    n: int
    p: object
    q: object
    r: object
    alpha: object
    mu: float = 0.5


def default_scan_points():
    """One 2D point per regime; the limit point has q/p equal to the gap bound."""
    return [
        ScanPoint(2, Fraction(2), Fraction(2), Fraction(2), Fraction(9)),
        ScanPoint(2, Fraction(2), Fraction(9, 4), Fraction(4), Fraction(0)),
        ScanPoint(2, Fraction(2), Fraction(5, 2), Fraction(4), Fraction(1)),
    ]


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def scan_point(pt: ScanPoint, m: int, radii=DEFAULT_RADII, gammas=DEFAULT_GAMMAS,
               a_profile: str = "sine", boundary: str = "bump", tol: float = 1e-8,
               max_iter: int = 200):
    """Rows of the scan table for one parameter point (see ``CSV_COLUMNS``)."""
    base = {"p": _fmt(pt.p), "q": _fmt(pt.q), "r": _fmt(pt.r), "alpha": _fmt(pt.alpha), "m": m}
    try:
        E = ExponentSet(pt.n, pt.p, pt.q, pt.r, pt.alpha, mu=pt.mu)
        case = classify(E)
    except (GapViolation, HypothesisNotMet) as exc:
        return [dict(base, regime="", rho="", R="", gamma="", lhs="", rhs_sum="", fitted_C="",
                     G_argument="", C_prime="", verdict=type(exc).__name__)]
    kind = "K2" if E.p == E.q else "K3"
    I = make_integrand(kind, E, a_profile, 1.0, 2.0)
    grid = Grid(pt.n, m)
    try:
        u, _ = minimize(grid, I, boundary_data(boundary, pt.n), tol=tol, max_iter=max_iter)
    except NonConvergence:
        return [dict(base, regime=case.value, rho="", R="", gamma="", lhs="", rhs_sum="", fitted_C="",
                     G_argument="", C_prime="", verdict="NonConvergence")]
    return [dict(base, **row) for row in estimate_rows(u, I, case, radii, gammas)]


def estimate_rows(u: GridField, I: Integrand, case, radii=DEFAULT_RADII, gammas=DEFAULT_GAMMAS):
    """Caccioppoli and main-estimate measurements for every radius pair and gamma."""
    case = GrowthCase(case)
    rows = []
    for rec in main_estimate_check(u, I.E, case, radii):
        for gamma in gammas:
            cr = caccioppoli_check(u, I, Cutoff(rec.rho, rec.R), gamma)
            ok = math.isfinite(cr.fitted_C) and math.isfinite(rec.C_prime)
            rows.append({
                "regime": case.value, "m": u.grid.m, "rho": repr(rec.rho), "R": repr(rec.R),
                "gamma": repr(float(gamma)), "lhs": repr(cr.lhs), "rhs_sum": repr(cr.rhs_sum),
                "fitted_C": repr(cr.fitted_C), "G_argument": repr(rec.inner),
                "C_prime": repr(rec.C_prime), "verdict": "pass" if ok else "fail",
            })
    return rows


def regime_scan(points=None, m: int = 33, radii=DEFAULT_RADII, gammas=DEFAULT_GAMMAS, workers: int = 1,
                **kwargs):
    """Scan table over parameter points, in input order regardless of ``workers``.

    ``G_argument`` is the integral side (R-rho)^-n int_{B_R}(1+|Du|^p) and ``C_prime``
    the fitted constant multiplying it.
    """
    points = list(points) if points is not None else default_scan_points()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda pt: scan_point(pt, m, radii, gammas, **kwargs), points))
    else:
        chunks = [scan_point(pt, m, radii, gammas, **kwargs) for pt in points]
    return [row for chunk in chunks for row in chunk]
