"""Exponent bookkeeping: regime classification, the bound function G, Moser schedules.

Regime detection is exact whenever p, q, r (and alpha) are given as rationals
(``Fraction``, ``int`` or strings such as ``"7/3"``).  Float inputs fall back to a
relative tolerance of ``1e-12`` for the equality q/p = 1 + 1/n - 1/r.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import DegenerateExponent, DomainError, GapViolation, HypothesisNotMet

Number = Union[Fraction, float]

EQ_RTOL = 1e-12
DEFAULT_SOBOLEV_2D = 4


def as_number(x) -> Number:
    """Coerce ints, Fractions and rational strings to ``Fraction``; floats stay floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise DomainError(f"cannot parse number {x!r}") from exc
    return float(x)


def _is_exact(*xs) -> bool:
    return all(isinstance(x, (Fraction, int)) for x in xs)


def _compare(a: Number, b: Number) -> int:
    """Three-way comparison; float inputs treat a relative 1e-12 band as equality."""
    if _is_exact(a, b):
        return (a > b) - (a < b)
    a, b = float(a), float(b)
    if abs(a - b) <= EQ_RTOL * max(abs(a), abs(b), 1e-300):
        return 0
    return 1 if a > b else -1


class GrowthCase(str, enum.Enum):
    STANDARD = "StandardGrowth"
    STRICT = "StrictGap"
    LIMIT = "LimitGap"

    def __str__(self):
        return self.value


def gap_bound(n, r) -> Number:
    """Largest admissible ratio q/p, namely 1 + 1/n - 1/r."""
    r = as_number(r)
    if n < 2:
        raise DomainError(f"dimension must be >= 2, got {n}")
    if _compare(r, n) < 0:
        raise DomainError(f"r = {r} must be >= n = {n}")
    if _is_exact(r):
        return 1 + Fraction(1, int(n)) - 1 / Fraction(r)
    return 1.0 + 1.0 / n - 1.0 / float(r)


@dataclass(frozen=True)
class ExponentSet:
    n: int
    p: Number
    q: Number
    r: Number
    alpha: Number = Fraction(0)
    mu: float = 1.0
    lambda_ell: float = 1.0
    Lambda_ell: float = 1.0
    sobolev_override: Optional[float] = None

    def __post_init__(self):
        for name in ("p", "q", "r", "alpha"):
            object.__setattr__(self, name, as_number(getattr(self, name)))
        object.__setattr__(self, "n", int(self.n))
        n, p, q, r, a = self.n, self.p, self.q, self.r, self.alpha
        if n < 2:
            raise DomainError(f"n must be >= 2, got {n}")
        if not p > 1:
            raise DomainError(f"p must exceed 1, got {p}")
        if _compare(q, p) < 0:
            raise DomainError(f"q = {q} below p = {p}")
        if _compare(r, n) < 0:
            raise DomainError(f"r = {r} below n = {n}")
        if a < 0:
            raise DomainError(f"alpha must be >= 0, got {a}")
        if not 0.0 <= float(self.mu) <= 1.0:
            raise DomainError(f"mu must lie in [0, 1], got {self.mu}")
        if not 0 < self.lambda_ell <= self.Lambda_ell:
            raise DomainError("need 0 < lambda <= Lambda")
        if self.sobolev_override is not None and not self.sobolev_override > 2:
            raise DomainError("Sobolev override must exceed 2")
        if _compare(self.ratio, gap_bound(n, r)) > 0:
            raise GapViolation(
                f"q/p = {self.ratio} exceeds 1 + 1/n - 1/r = {gap_bound(n, r)}"
            )

    @property
    def exact(self) -> bool:
        return _is_exact(self.p, self.q, self.r, self.alpha)

    @property
    def ratio(self) -> Number:
        return self.q / self.p

    @property
    def gap(self) -> Number:
        return gap_bound(self.n, self.r)

    def floats(self):
        """(n, p, q, r, alpha) as plain floats for numerics."""
        return self.n, float(self.p), float(self.q), float(self.r), float(self.alpha)

    def to_dict(self) -> dict:
        def fmt(x):
            return str(x) if isinstance(x, Fraction) else float(x)

        return {
            "n": self.n, "p": fmt(self.p), "q": fmt(self.q), "r": fmt(self.r),
            "alpha": fmt(self.alpha), "mu": float(self.mu),
            "lambda": float(self.lambda_ell), "Lambda": float(self.Lambda_ell),
        }


def classify(E: ExponentSet, permissive: bool = False) -> GrowthCase:
    """Return the regime of ``E``.

    ``permissive`` accepts alpha > 0 in the strict-gap regime (which then uses the
    strict-gap G); by default that combination raises ``HypothesisNotMet``.
    """
    n, p, q, r, a = E.n, E.p, E.q, E.r, E.alpha
    gap_cmp = _compare(E.ratio, E.gap)
    if gap_cmp > 0:
        raise GapViolation(f"q/p = {E.ratio} > {E.gap}")
    if _compare(p, q) == 0:
        if _compare(r, n) == 0 and a > 4 * n:
            return GrowthCase.STANDARD
        raise HypothesisNotMet(
            f"p = q requires r = n and alpha > 4n = {4 * n} (got r={r}, alpha={a})"
        )
    # p < q forces r > n, otherwise the gap bound is 1 and gap_cmp > 0 above
    if gap_cmp < 0:
        if a == 0 or permissive:
            return GrowthCase.STRICT
        raise HypothesisNotMet("strict gap requires alpha = 0 (enable permissive mode)")
    if a > 0:
        return GrowthCase.LIMIT
    raise HypothesisNotMet("limit gap q/p = 1 + 1/n - 1/r requires alpha > 0")


def sobolev_exponent(E: ExponentSet) -> float:
    if E.n >= 3:
        return 2.0 * E.n / (E.n - 2)
    s = DEFAULT_SOBOLEV_2D if E.sobolev_override is None else E.sobolev_override
    if s <= 2:
        raise DomainError("2D Sobolev exponent must exceed 2")
    return float(s)


def moser_exponents(E: ExponentSet, J: int) -> np.ndarray:
    """p_j = p (2*/2)^j for j = 0..J."""
    ratio = sobolev_exponent(E) / 2.0
    return float(E.p) * ratio ** np.arange(J + 1, dtype=float)


def moser_reciprocal_limit(E: ExponentSet) -> float:
    """Sum over all j of 1/p_j; equals n/(2p) for n >= 3."""
    ratio = sobolev_exponent(E) / 2.0
    return 1.0 / (float(E.p) * (1.0 - 1.0 / ratio))


def moser_reciprocal_sum(E: ExponentSet, J=None) -> float:
    """Partial sum of 1/p_j up to ``J`` inclusive; ``J=None`` or ``inf`` gives the limit."""
    if J is None or J == math.inf:
        return moser_reciprocal_limit(E)
    if J < 0:
        raise DomainError("J must be >= 0")
    return float(math.fsum(1.0 / moser_exponents(E, int(J))))


@dataclass(frozen=True)
class RadiusSchedule:
    rho0: float
    rho0_tilde: float
    rho: float
    R: float
    R0_tilde: float
    R0: float
    radii: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        chain = (self.rho0, self.rho0_tilde, self.rho, self.R, self.R0_tilde, self.R0)
        if not (0 < chain[0] and all(a < b for a, b in zip(chain, chain[1:])) and self.R0 <= 1):
            raise DomainError(f"radii must satisfy 0 < rho0 < ... < R0 <= 1, got {chain}")
        object.__setattr__(self, "radii", self.radii_seq(64))

    @classmethod
    def evenly(cls, rho0: float, R0: float) -> "RadiusSchedule":
        """Six radii spaced evenly between rho0 and R0."""
        r = np.linspace(rho0, R0, 6)
        return cls(*map(float, r))

    def radii_seq(self, count: int) -> np.ndarray:
        """rho_i = rho0~ + (R0~ - rho0~) / 2^i for i < count."""
        i = np.arange(count, dtype=float)
        return self.rho0_tilde + (self.R0_tilde - self.rho0_tilde) / 2.0 ** i


def strict_gap_exponent(E: ExponentSet) -> float:
    """(r - n) / (p(r - n) - rn(q - p)), the leading power of G in the strict regime."""
    n, p, q, r, _ = E.floats()
    den = E.p * (E.r - n) - E.r * n * (E.q - E.p)
    if den <= 0:
        raise DegenerateExponent(f"p(r-n) - rn(q-p) = {den} must be positive")
    return (r - n) / float(den)


def G_eval(E: ExponentSet, case: GrowthCase, t):
    """Evaluate the regime's bound function G at ``t >= 0`` (scalar or array)."""
    case = GrowthCase(case)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("G is defined for t >= 0")
    n, p, q, r, a = E.floats()
    base = t_arr ** (1.0 / p)
    if case is GrowthCase.STANDARD:
        out = base
    elif case is GrowthCase.STRICT:
        out = t_arr ** strict_gap_exponent(E) + base
    else:
        if a <= 0 or r <= n:
            raise DegenerateExponent("limit-gap G needs alpha > 0 and r > n")
        with np.errstate(over="ignore"):
            growth = np.exp((r / (2 * p)) * t_arr ** (2 * p * (r - n) / (a * n)))
            out = growth * t_arr ** (r / n) + base
    return out if np.ndim(t) else float(out)


def regime_warning(E: ExponentSet) -> Optional[str]:
    """A message when the classification relied on a float tolerance."""
    if E.exact:
        return None
    if _compare(E.ratio, E.gap) == 0:
        msg = "float inputs: the limit-gap regime was decided with relative tolerance 1e-12"
        warnings.warn(msg, stacklevel=2)
        return msg
    return "float inputs: regime detection is tolerance-dependent"
