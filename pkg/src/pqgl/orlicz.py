"""Scalar toolkit: the Orlicz weight L, the composite weight L-hat, phi, and polars.

All evaluators accept scalars or numpy arrays.  Inverses are computed by bracketed
bisection (geometric bracket search followed by halving), which stays robust near
the flat region of L at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    CaseError,
    ConstantBlowup,
    DegenerateWeight,
    DomainError,
    HorizonError,
    HypothesisError,
    S0NotFound,
)
from .exponents import ExponentSet, _compare, as_number, gap_bound

BISECT_RTOL = 1e-13
BISECT_MAX_ITER = 200
FENCHEL_GRID = 4096
GOLDEN_ITER = 60
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _out(x, like):
    return x if np.ndim(like) else float(x)


def monotone_inverse(f: Callable, y, rtol: float = BISECT_RTOL, max_iter: int = BISECT_MAX_ITER):
    """Generalised inverse ``inf{t >= 0 : f(t) >= y}`` of a nondecreasing ``f``.

    ``f`` must be vectorised.  Values of ``y`` at or below ``f(0)`` map to 0.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros_like(y)
    active = y > f(np.zeros(1))[0]
    if not np.any(active):
        return out
    ya = y[active]
    lo = np.zeros_like(ya)
    hi = np.ones_like(ya)
    # geometric bracket: hi doubles until f(hi) >= y, lo halves while f(lo) >= y
    for _ in range(2100):
        need = f(hi) < ya
        if not np.any(need):
            break
        lo = np.where(need, hi, lo)
        hi = np.where(need, 2.0 * hi, hi)
    else:
        raise DomainError("bracket expansion failed; target beyond floating range")
    cand = hi.copy()
    for _ in range(2100):
        half = 0.5 * cand
        shrink = (lo == 0) & (half > 0) & (f(half) >= ya)
        if not np.any(shrink):
            break
        cand = np.where(shrink, half, cand)
    hi = cand
    lo = np.where(lo == 0, 0.5 * hi, lo)
    lo = np.where(f(lo) >= ya, 0.0, lo)
    for _ in range(max_iter):
        if np.all(hi - lo <= rtol * hi):
            break
        mid = 0.5 * (lo + hi)
        up = f(mid) >= ya
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    out[active] = 0.5 * (lo + hi)
    return out


@dataclass(frozen=True)
class OrliczWeight:
    """L(t) = t^(r-n) log^alpha(e + t)."""

    r: float
    n: int
    alpha: float

    @classmethod
    def from_exponents(cls, E: ExponentSet) -> "OrliczWeight":
        return cls(float(E.r), E.n, float(E.alpha))

    @property
    def power(self) -> float:
        return float(self.r) - self.n

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            val = t_arr ** self.power * np.log(math.e + t_arr) ** self.alpha
        return _out(val, t)

    def at_zero(self) -> float:
        return 0.0 if self.power > 0 else 1.0

    def _check_monotone(self):
        if self.power < 0:
            raise DomainError("r must be >= n")
        if self.power == 0 and self.alpha == 0:
            raise DegenerateWeight("L is constant when r = n and alpha = 0")

    def inverse(self, tau):
        """L^{-1}(tau); arguments below L(0) map to 0."""
        self._check_monotone()
        tau_arr = np.asarray(tau, dtype=float)
        if np.any(tau_arr < 0):
            raise DomainError("tau must be >= 0")
        return _out(monotone_inverse(self, tau_arr).reshape(tau_arr.shape), tau)

    def log_inverse(self, log_tau):
        """log L^{-1}(exp(log_tau)), for arguments far beyond floating range.

        Solves (r - n) s + alpha log log(e + e^s) = log_tau for s.  Returns -inf
        where exp(log_tau) <= L(0).
        """
        self._check_monotone()
        y = np.atleast_1d(np.asarray(log_tau, dtype=float))
        k, a = self.power, self.alpha

        def g(s):
            return k * s + a * np.log(np.logaddexp(1.0, s))

        out = np.full_like(y, -np.inf)
        floor = -np.inf if k > 0 else 0.0
        active = y > floor
        ya = y[active]
        lo = np.full_like(ya, -1.0)
        hi = np.full_like(ya, 1.0)
        for _ in range(2100):
            need_hi = g(hi) < ya
            need_lo = g(lo) > ya
            if not (np.any(need_hi) or np.any(need_lo)):
                break
            hi = np.where(need_hi, 2.0 * np.abs(hi) + 1.0, hi)
            lo = np.where(need_lo, -2.0 * np.abs(lo) - 1.0, lo)
        for _ in range(BISECT_MAX_ITER * 2):
            if np.all(hi - lo <= BISECT_RTOL * np.maximum(1.0, np.abs(hi))):
                break
            mid = 0.5 * (lo + hi)
            up = g(mid) >= ya
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        out[active] = 0.5 * (lo + hi)
        return _out(out.reshape(np.shape(log_tau)), log_tau)


def L_eval(W: OrliczWeight, t):
    return W(t)


def L_inverse(W: OrliczWeight, tau):
    return W.inverse(tau)


def L_inverse_asymptotics_check(W: OrliczWeight, tau_grid) -> dict:
    """Check the two upper bounds for L^{-1} at every tau in ``tau_grid``.

    r = n:  L^{-1}(tau) <= exp(tau^(1/alpha));
    r > n:  L^{-1}(tau) <= tau^(1/(r-n)) / log^(alpha/(r-n))(e + L^{-1}(tau)).

    Violations are relative to ``max(1, bound)``; the report's ``max_violation``
    should be <= 1e-10.  For r > n the second bound is an identity, so margins sit
    at rounding level.
    """
    tau = np.asarray(tau_grid, dtype=float)
    threshold = math.log(math.e + 1.0) ** W.alpha
    if np.any(tau < threshold * (1 - 1e-15)):
        raise DomainError(f"bounds hold only for tau >= log^alpha(e+1) = {threshold}")
    inv = np.atleast_1d(W.inverse(tau))
    if W.power == 0:
        if W.alpha <= 0:
            raise DegenerateWeight("r = n needs alpha > 0")
        with np.errstate(over="ignore"):
            bound = np.exp(np.atleast_1d(tau) ** (1.0 / W.alpha))
    else:
        k = W.power
        bound = np.atleast_1d(tau) ** (1.0 / k) / np.log(math.e + inv) ** (W.alpha / k)
    violation = (inv - bound) / np.maximum(1.0, bound)
    return {
        "check": "L_inverse_asymptotics",
        "n_samples": int(tau.size),
        "max_violation": float(np.max(violation)),
        "margins": bound - inv,
    }


@dataclass(frozen=True)
class HatWeight:
    """L-hat(s) = log^(alpha n / (2p(r-n)))(e + L^{-1}(s^(2n(q-p))))."""

    r: object
    n: int
    alpha: object
    p: object
    q: object

    def __post_init__(self):
        for name in ("r", "alpha", "p", "q"):
            object.__setattr__(self, name, as_number(getattr(self, name)))
        if not (self.r > self.n and self.q > self.p and self.alpha > 0):
            raise DegenerateWeight("L-hat needs r > n, q > p and alpha > 0")

    @classmethod
    def from_exponents(cls, E: ExponentSet) -> "HatWeight":
        return cls(E.r, E.n, E.alpha, E.p, E.q)

    @property
    def weight(self) -> OrliczWeight:
        return OrliczWeight(float(self.r), self.n, float(self.alpha))

    @property
    def is_limit(self) -> bool:
        return _compare(self.q / self.p, gap_bound(self.n, self.r)) == 0

    def _floats(self):
        return float(self.r), self.n, float(self.alpha), float(self.p), float(self.q)

    @property
    def log_power(self) -> float:
        r, n, a, p, _ = self._floats()
        return a * n / (2 * p * (r - n))

    def __call__(self, s):
        r, n, a, p, q = self._floats()
        s_arr = np.asarray(s, dtype=float)
        inner = self.weight.inverse(s_arr ** (2 * n * (q - p)))
        return _out(np.log(math.e + inner) ** self.log_power, s)

    def inverse_numeric(self, sigma):
        """Bisection inverse of L-hat; defined for sigma >= L-hat(0) = 1."""
        sig = np.asarray(sigma, dtype=float)
        if np.any(sig < 1.0):
            raise DomainError("L-hat takes values in [1, inf)")
        return _out(monotone_inverse(self, sig).reshape(sig.shape), sigma)

    def inverse_exact(self, sigma):
        """Closed-form inverse [(exp(sigma^k) - e) sigma^(2p/n)]^((r-n)/(2n(q-p)))."""
        r, n, a, p, q = self._floats()
        sig = np.asarray(sigma, dtype=float)
        if np.any(sig < 1.0):
            raise DomainError("L-hat takes values in [1, inf)")
        k = 2 * p * (r - n) / (a * n)
        with np.errstate(over="ignore"):
            base = np.maximum(np.expm1(sig ** k) - (math.e - 1.0), 0.0) * sig ** (2 * p / n)
            val = base ** ((r - n) / (2 * n * (q - p)))
        return _out(val, sigma)


def hat_inverse_bound(H: HatWeight, sigma):
    """exp((r/2p) sigma^(2p(r-n)/(alpha n))) sigma^(r/n): an upper bound for L-hat^{-1}.

    Only valid when q/p = 1 + 1/n - 1/r.
    """
    if not H.is_limit:
        raise CaseError("the closed-form bound needs q/p = 1 + 1/n - 1/r")
    r, n, a, p, _ = H._floats()
    sig = np.asarray(sigma, dtype=float)
    if np.any(sig < 0):
        raise DomainError("sigma must be >= 0")
    with np.errstate(over="ignore"):
        val = np.exp((r / (2 * p)) * sig ** (2 * p * (r - n) / (a * n))) * sig ** (r / n)
    return _out(val, sigma)


@dataclass(frozen=True)
class PhiFunction:
    """phi(t) = t^beta / log^alpha(t) on [1 + delta, inf)."""

    alpha: float
    beta: float
    delta: float = 1e-6

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        return _out(t_arr ** self.beta / np.log(t_arr) ** self.alpha, t)


def phi_submultiplicative_check(P: PhiFunction, s, t):
    """Margin 2^alpha sqrt(phi(s^2) phi(t^2)) - phi(st); nonnegative on the working domain."""
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    lim = 1.0 + P.delta
    if np.any(s_arr <= lim) or np.any(t_arr <= lim):
        raise DomainError(f"phi is used on (1 + delta, inf) = ({lim}, inf)")
    margin = 2.0 ** P.alpha * np.sqrt(P(s_arr ** 2) * P(t_arr ** 2)) - P(s_arr * t_arr)
    return _out(margin, s_arr * t_arr)


def _log_grid(T: float, size: int) -> np.ndarray:
    return np.concatenate(([0.0], np.logspace(math.log10(T) - 12, math.log10(T), size - 1)))


def _polar(y, a_fn, b_fn, grid, on_horizon="raise", chunk=256):
    """sup over tau in ``grid`` of y a(tau) - b(tau), refined by golden section.

    ``a_fn`` and ``b_fn`` are vectorised; a is nonnegative.  When the grid arg-max
    sits at the last node the supremum is not attained: raise ``HorizonError`` or,
    with ``on_horizon="inf"``, return +inf.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    a_grid = a_fn(grid)
    b_grid = b_fn(grid)
    best = np.empty_like(y)
    idx = np.empty(y.shape, dtype=int)
    for start in range(0, y.size, chunk):
        sl = slice(start, start + chunk)
        vals = y[sl, None] * a_grid[None, :] - b_grid[None, :]
        idx[sl] = np.argmax(vals, axis=1)
        best[sl] = vals[np.arange(vals.shape[0]), idx[sl]]
    at_edge = idx == grid.size - 1
    if np.any(at_edge) and on_horizon == "raise":
        raise HorizonError(
            f"arg-max at the search horizon T = {grid[-1]:g} for y = {y[at_edge][0]:g}; enlarge T"
        )
    lo = grid[np.maximum(idx - 1, 0)]
    hi = grid[np.minimum(idx + 1, grid.size - 1)]

    def obj(tau):
        return y * a_fn(tau) - b_fn(tau)

    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = obj(x1), obj(x2)
    for _ in range(GOLDEN_ITER):
        left = f1 >= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new = np.where(left, hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo))
        fn = obj(new)
        x1, x2, f1, f2 = (
            np.where(left, new, x2),
            np.where(left, x1, new),
            np.where(left, fn, f2),
            np.where(left, f1, fn),
        )
    refined = np.maximum(best, np.maximum(f1, f2))
    if on_horizon == "inf":
        refined = np.where(at_edge, np.inf, refined)
    return refined


def fenchel_conjugate(Phi: Callable, s, T: float = 1e3, n_grid: int = FENCHEL_GRID):
    """Polar Phi*(s) = sup_{0 <= t <= T} (s t - Phi(t)).

    The supremum is taken over ``n_grid`` log-spaced nodes (plus t = 0) and refined by
    golden section around the grid arg-max.  ``Phi`` must be vectorised, nonnegative
    and superlinear past ``T``; an arg-max at ``T`` raises ``HorizonError``.
    """
    grid = _log_grid(T, n_grid)
    val = _polar(s, lambda t: t, Phi, grid)
    return _out(val.reshape(np.shape(s)), s)


FENCHEL_CATALOG = {
    "quadratic": lambda t: 0.5 * np.asarray(t, dtype=float) ** 2,
    "cubic": lambda t: np.asarray(t, dtype=float) ** 3,
    "quartic": lambda t: 0.25 * np.asarray(t, dtype=float) ** 4,
}


def fenchel_inequality_check(Phi: Callable, s, t, T: float = 1e3) -> np.ndarray:
    """Margins Phi*(s) + Phi(t) - s t for paired samples; nonnegative up to rounding."""
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    star = np.asarray(fenchel_conjugate(Phi, s_arr, T), dtype=float)
    return star + np.asarray(Phi(t_arr), dtype=float) - s_arr * t_arr


def _conjugate_of_inverse(phi: Callable, y, grid):
    # (phi^{-1})*(y) = sup_t (y t - phi^{-1}(t)) = sup_s (y phi(s) - s) with t = phi(s)
    return _polar(y, phi, lambda s: s, grid, on_horizon="inf")


def ggp_sandwich_check(phi: Callable, s_grid, horizon: Optional[float] = None, rtol: float = 1e-9):
    """Find s0 with s/psi(s) <= phi(s) <= 2 s/psi(s) for every grid point beyond s0.

    psi is the inverse of the polar of phi^{-1}, all computed numerically.  Returns
    ``(s0, report)``; raises ``S0NotFound`` when the sandwich fails at the last grid
    point.  Margins are tested with relative slack ``rtol``.
    """
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size == 0 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise DomainError("s_grid must be a sorted 1-D array of positive points")
    T = horizon if horizon is not None else 1e4 * s[-1]
    grid = _log_grid(T, FENCHEL_GRID)

    def conj(y):
        return _conjugate_of_inverse(phi, y, grid)

    # psi(s) = sup{y : conj(y) <= s}; conj is nondecreasing with conj(0) = 0
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    for _ in range(200):
        need = conj(hi) <= s
        if not np.any(need):
            break
        lo = np.where(need, hi, lo)
        hi = np.where(need, 2.0 * hi, hi)
    for _ in range(BISECT_MAX_ITER):
        if np.all(hi - lo <= 1e-13 * hi):
            break
        mid = 0.5 * (lo + hi)
        ok = conj(mid) <= s
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    psi = lo
    phis = np.asarray(phi(s), dtype=float)
    with np.errstate(divide="ignore"):
        ratio = np.where(psi > 0, s / np.where(psi > 0, psi, 1.0), np.inf)
    lower = phis - ratio
    upper = 2.0 * ratio - phis
    slack = rtol * np.maximum(phis, 1e-300)
    holds = (lower >= -slack) & (upper >= -slack)
    report = {
        "check": "ggp_sandwich",
        "n_samples": int(s.size),
        "psi": psi,
        "lower_margin": lower,
        "upper_margin": upper,
        "holds": holds,
    }
    if not holds[-1]:
        raise S0NotFound("sandwich fails at the largest grid point; extend the grid")
    failing = np.flatnonzero(~holds)
    s0 = float(s[failing[-1] + 1]) if failing.size else float(s[0])
    report["s0"] = s0
    report["worst_margin"] = float(np.min(np.minimum(lower, upper)[s >= s0]))
    return s0, report


def iteration_lemma_constant(alpha_e: float, beta_e: float, theta: float):
    """(kappa, c) for the geometric-radii telescoping with rho_i = R1 + (1 - kappa^i)(R2 - R1).

    kappa = (theta / tau)^(1/max(alpha, beta, 1)) with tau = 1/2 for theta < 1/2
    (i.e. kappa = (2 theta)^(1/max(alpha, beta, 1))) and tau = (1 + theta)/2 otherwise,
    so that theta kappa^(-max(alpha, beta)) <= tau < 1.
    """
    if not 0 < theta < 1:
        raise DomainError("theta must lie in (0, 1)")
    if alpha_e < 0 or beta_e < 0:
        raise DomainError("exponents must be nonnegative")
    m = max(alpha_e, beta_e)
    tau = 0.5 if theta < 0.5 else 0.5 * (1.0 + theta)
    kappa = (theta / tau) ** (1.0 / max(m, 1.0))
    contraction = theta * kappa ** (-m)
    with np.errstate(over="ignore", divide="ignore"):
        c = np.float64(1.0 - kappa) ** (-m) / (1.0 - contraction)
    if not (0 < kappa < 1) or not np.isfinite(c) or c > 1e150:
        raise ConstantBlowup(f"no usable kappa for theta={theta}, max exponent={m}")
    return kappa, float(c)


def iteration_lemma_apply(f: Callable, R1: float, R2: float, A: float, B: float, C: float,
                          alpha_e: float, beta_e: float, theta: float, n_samples: int = 64):
    """Bound f(R1) by c (A/(R2-R1)^alpha + B/(R2-R1)^beta + C).

    The hypothesis f(r1) <= theta f(r2) + A/(r2-r1)^alpha + B/(r2-r1)^beta + C is
    checked on all pairs of ``n_samples`` interior points; the conclusion is asserted
    on the returned bound.
    """
    if not 0 < R1 < R2:
        raise DomainError("need 0 < R1 < R2")
    if min(A, B, C) < 0:
        raise DomainError("A, B, C must be nonnegative")
    _, c = iteration_lemma_constant(alpha_e, beta_e, theta)
    r = np.linspace(R1, R2, n_samples + 2)[1:-1]
    fr = np.asarray(f(r), dtype=float)
    i, j = np.triu_indices(r.size, k=1)
    d = r[j] - r[i]
    rhs = theta * fr[j] + A / d ** alpha_e + B / d ** beta_e + C
    slack = 1e-12 * np.maximum(1.0, np.abs(rhs))
    bad = fr[i] > rhs + slack
    if np.any(bad):
        k = int(np.argmax(bad))
        raise HypothesisError(f"hypothesis fails at r1={r[i][k]:.6g}, r2={r[j][k]:.6g}")
    D = R2 - R1
    bound = c * (A / D ** alpha_e + B / D ** beta_e + C)
    f1 = float(np.asarray(f(np.array([R1])), dtype=float)[0])
    if f1 > bound * (1 + 1e-12):
        raise HypothesisError(
            f"conclusion fails: f(R1) = {f1:g} > {bound:g}; hypothesis violated between samples"
        )
    return bound


def eq_elem_check(W: OrliczWeight, p: float, x_grid) -> float:
    """Smallest C with (1+x)(1+L^{-1}(x^{2/p}))^{n/2p} <= C (1 + x L^{-1}(x^{2/p})^{n/2p}) on the grid."""
    x = np.asarray(x_grid, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be >= 0")
    e = W.n / (2.0 * p)
    inv = np.atleast_1d(W.inverse(x ** (2.0 / p)))
    lhs = (1 + x) * (1 + inv) ** e
    rhs = 1 + x * inv ** e
    C = float(np.max(lhs / rhs))
    if not np.isfinite(C):
        raise ConstantBlowup("fitted constant is not finite")
    return C
