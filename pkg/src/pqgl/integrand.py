"""Uhlenbeck-type energy densities with closed-form derivatives.

Catalog (w = mu^2 + |xi|^2, densities shifted so that F(x, 0) = 0):

* ``K1``  F = w^(p/2) - mu^p                                  (p = q)
* ``K2``  F = a(x) (w^(p/2) - mu^p)
* ``K3``  F = (w^(p/2) - mu^p) + a(x) (w^(q/2) - mu^q)

Every member is a sum of radial pieces ``c(x) g(w)``; for such a piece
``F_xi = 2 c g'(w) xi``, ``F_xixi = 2 c g' I + 4 c g'' xi xi^T`` and
``F_xix[i, j] = 2 g'(w) xi_i dc/dx_j``.

Points are arrays of shape ``(N, n)``.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import (
    DegenerateHessian,
    DomainError,
    EllipticityViolation,
    GlueError,
    GrowthViolation,
    MixedBoundViolation,
    QuadratureWarning,
)
from .exponents import ExponentSet

KINDS = ("K1", "K2", "K3")
A_PROFILES = ("const", "sine", "bump")


def _pts(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if n is not None and x.shape[1] != n:
        raise DomainError(f"expected points in R^{n}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class CoefficientField:
    """The modulating coefficient a(x), its gradient and the bound h(x) of |F_xix|."""

    a: Callable
    grad_a: Callable
    h: Callable
    a_min: float
    a_max: float
    label: str = "custom"


def coefficient_field(profile: str, n: int, a_min: float = 1.0, a_max: float = 2.0,
                      c_h: float = 1.0, c0: float = 0.0) -> CoefficientField:
    """Build a catalog coefficient with h = c_h |Da| + c0.

    ``const`` uses a = a_max; ``sine`` oscillates in x_1 between a_min and a_max;
    ``bump`` is a Gaussian bump of height a_max - a_min over a_min.
    """
    if not 0 < a_min <= a_max:
        raise DomainError("need 0 < a_min <= a_max")
    mid, amp = 0.5 * (a_min + a_max), 0.5 * (a_max - a_min)
    if profile == "const":
        def a(x):
            return np.full(_pts(x).shape[0], float(a_max))

        def grad_a(x):
            return np.zeros_like(_pts(x))
    elif profile == "sine":
        def a(x):
            return mid + amp * np.sin(math.pi * _pts(x)[:, 0])

        def grad_a(x):
            x = _pts(x)
            g = np.zeros_like(x)
            g[:, 0] = amp * math.pi * np.cos(math.pi * x[:, 0])
            return g
    elif profile == "bump":
        height = a_max - a_min

        def a(x):
            x = _pts(x)
            return a_min + height * np.exp(-4.0 * np.sum(x * x, axis=1))

        def grad_a(x):
            x = _pts(x)
            return (-8.0 * height * np.exp(-4.0 * np.sum(x * x, axis=1)))[:, None] * x
    else:
        raise DomainError(f"unknown a_profile {profile!r}; choose from {A_PROFILES}")

    def h(x):
        return c_h * np.linalg.norm(grad_a(x), axis=1) + c0

    return CoefficientField(a, grad_a, h, float(a_min), float(a_max), profile)


def catalog_constants(kind: str, p: float, q: float, mu: float, a_min: float, a_max: float):
    """Ellipticity constants (lambda, Lambda) valid for the catalog member."""
    p, q, mu = float(p), float(q), float(mu)
    lam_p = p * min(1.0, p - 1.0)
    big_p = p * max(1.0, p - 1.0)
    if q > p and mu == 0.0 and kind != "K1":
        raise DomainError("q > p with mu = 0 has no finite Lambda for this catalog member")
    spread = mu ** (p - q) if q > p else 1.0
    if kind == "K1":
        return lam_p, big_p
    if kind == "K2":
        return a_min * lam_p, a_max * big_p * spread
    if kind == "K3":
        return lam_p, big_p * spread + a_max * q * max(1.0, q - 1.0)
    raise DomainError(f"unknown kind {kind!r}")


def default_c_h(kind: str, p: float, q: float, mu: float) -> float:
    """Factor c_h making |F_xix| <= c_h |Da| w^((q-1)/2) hold analytically."""
    p, q = float(p), float(q)
    if kind == "K3":
        return q
    if kind == "K2":
        return p * (mu ** (p - q) if q > p else 1.0)
    return 1.0


class _Piece:
    """One radial term c(x) g(w) of the density."""

    __slots__ = ("c", "dc", "s", "glue")

    def __init__(self, c, dc, s, glue=None):
        self.c, self.dc, self.s, self.glue = c, dc, s, glue


@dataclass(frozen=True)
class Integrand:
    kind: str
    E: ExponentSet
    coeff: CoefficientField
    k: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown kind {self.kind!r}")
        if self.kind in ("K1", "K2") and self.E.q != self.E.p:
            # single-phase members only carry the p-power; q enters through the declared constants
            pass
        if self.k is not None and self.k <= 0:
            raise DomainError("truncation level must be positive")

    @property
    def n(self) -> int:
        return self.E.n

    @property
    def p(self) -> float:
        return float(self.E.p)

    @property
    def q(self) -> float:
        return float(self.E.q) if self.kind == "K3" else float(self.E.p)

    @property
    def mu(self) -> float:
        return float(self.E.mu)

    def glue_constants(self):
        """(w_k, c1, c2) of the p-growth continuation past |xi| = k, or None."""
        if self.k is None or self.kind != "K3" or self.q == self.p:
            return None
        p, q, mu = self.p, self.q, self.mu
        wk = mu * mu + float(self.k) ** 2
        c2 = (q / p) * wk ** ((q - p) / 2.0)
        c1 = (1.0 - q / p) * wk ** (q / 2.0) - mu ** q
        if not c2 > 0:
            raise GlueError(f"glued profile is not convex (c2 = {c2})")
        return wk, c1, c2

    def at(self, x) -> "FrozenIntegrand":
        """Freeze coefficient values at the points ``x``."""
        x = _pts(x, self.n)
        N = x.shape[0]
        ones, zeros = np.ones(N), np.zeros((N, self.n))
        if self.kind == "K1":
            pieces = [_Piece(ones, zeros, self.p)]
        elif self.kind == "K2":
            pieces = [_Piece(self.coeff.a(x), self.coeff.grad_a(x), self.p)]
        else:
            pieces = [
                _Piece(ones, zeros, self.p),
                _Piece(self.coeff.a(x), self.coeff.grad_a(x), self.q, self.glue_constants()),
            ]
        return FrozenIntegrand(self, x, pieces)

    def derivatives(self, x, xi):
        """(F, F_xi, F_xixi, F_xix) at paired rows of ``x`` and ``xi``."""
        J = self.at(x)
        return J.F(xi), J.grad(xi), J.hess(xi), J.mixed(xi)

    def F(self, x, xi):
        return self.at(x).F(xi)


class FrozenIntegrand:
    """An integrand with its coefficients evaluated at fixed points (e.g. simplex barycenters)."""

    def __init__(self, integrand: Integrand, x, pieces):
        self.integrand = integrand
        self.x = x
        self.pieces = pieces
        self.mu = integrand.mu
        self.p = integrand.p

    def _w(self, xi):
        xi = _pts(xi, self.integrand.n)
        if xi.shape[0] != self.x.shape[0]:
            raise DomainError("xi must have one row per frozen point")
        return xi, self.mu ** 2 + np.sum(xi * xi, axis=1)

    def _radial(self, piece, w, order):
        """g, 2g', 4g'' of one piece (without the coefficient)."""
        s, mu = piece.s, self.mu
        if piece.glue is None:
            segs = [(np.ones_like(w, dtype=bool), 0.0, 1.0, s, mu ** s)]
        else:
            wk, c1, c2 = piece.glue
            inner = w <= wk
            segs = [(inner, 0.0, 1.0, s, mu ** s), (~inner, c1, c2, self.p, 0.0)]
        g = np.zeros_like(w)
        d1 = np.zeros_like(w)
        d2 = np.zeros_like(w)
        pos = w > 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for mask, c1, c2, e, shift in segs:
                wm = w[mask]
                g[mask] = c1 + c2 * wm ** (e / 2.0) - shift
                if order >= 1:
                    val = c2 * e * wm ** ((e - 2.0) / 2.0)
                    d1[mask] = np.where(wm > 0, val, c2 * 2.0 if e == 2 else 0.0)
                    if e < 2 and np.any(~pos[mask]):
                        d1[mask] = np.where(wm > 0, val, np.inf)
                if order >= 2:
                    val = c2 * e * (e - 2.0) * wm ** ((e - 4.0) / 2.0)
                    d2[mask] = np.where(wm > 0, val, 0.0)
        return g, d1, d2

    def F(self, xi):
        xi, w = self._w(xi)
        out = np.zeros_like(w)
        for pc in self.pieces:
            g, _, _ = self._radial(pc, w, 0)
            out += pc.c * g
        return out

    def secant(self, xi):
        """omega(x, xi) with F_xi = omega xi."""
        xi, w = self._w(xi)
        om = np.zeros_like(w)
        for pc in self.pieces:
            _, d1, _ = self._radial(pc, w, 1)
            om += pc.c * d1
        return om

    def grad(self, xi):
        xi, w = self._w(xi)
        om = self.secant(xi)
        zero = np.sum(xi * xi, axis=1) == 0
        return np.where(zero[:, None], 0.0, om[:, None] * xi)

    def energy_density_and_grad(self, xi):
        xi, w = self._w(xi)
        F = np.zeros_like(w)
        om = np.zeros_like(w)
        for pc in self.pieces:
            g, d1, _ = self._radial(pc, w, 1)
            F += pc.c * g
            om += pc.c * d1
        zero = np.sum(xi * xi, axis=1) == 0
        return F, np.where(zero[:, None], 0.0, om[:, None] * xi)

    def hess(self, xi):
        xi, w = self._w(xi)
        N, n = xi.shape
        H = np.zeros((N, n, n))
        eye = np.eye(n)
        for pc in self.pieces:
            _, d1, d2 = self._radial(pc, w, 2)
            if np.any(~np.isfinite(d1)):
                raise DegenerateHessian("F_xixi is singular at xi = 0 when mu = 0 and exponent < 2")
            H += (pc.c * d1)[:, None, None] * eye + (pc.c * d2)[:, None, None] * (
                xi[:, :, None] * xi[:, None, :]
            )
        return H

    def mixed(self, xi):
        """F_xix[m, i, j] = d^2 F / d xi_i d x_j."""
        xi, w = self._w(xi)
        N, n = xi.shape
        M = np.zeros((N, n, n))
        for pc in self.pieces:
            _, d1, _ = self._radial(pc, w, 1)
            d1 = np.where(np.isfinite(d1), d1, 0.0)
            M += (d1[:, None] * xi)[:, :, None] * pc.dc[:, None, :]
        return M


def eval_derivatives(I: Integrand, x, xi):
    return I.derivatives(x, xi)


def make_integrand(kind: str, E: ExponentSet, a_profile: str = "sine", a_min: float = 1.0,
                   a_max: float = 2.0, c_h: Optional[float] = None, c0: float = 0.0,
                   declare_constants: bool = True) -> Integrand:
    """Catalog member with analytic (lambda, Lambda) written into its exponent set."""
    p, q = float(E.p), float(E.q)
    if c_h is None:
        c_h = default_c_h(kind, p, q, float(E.mu))
    coeff = coefficient_field(a_profile, E.n, a_min, a_max, c_h, c0)
    if declare_constants:
        lam, Lam = catalog_constants(kind, p, q, float(E.mu), a_min, a_max)
        E = dataclasses.replace(E, lambda_ell=lam, Lambda_ell=Lam)
    return Integrand(kind, E, coeff)


# ----------------------------------------------------------------------------- sampling checks


def sample_points(n: int, count: int, rng: np.random.Generator, extent: float = 1.0,
                  xi_range=(1e-3, 1e3)):
    """Uniform x in the cube and xi with log-uniform modulus and uniform direction."""
    x = rng.uniform(-extent, extent, size=(count, n))
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    lo, hi = np.log(xi_range[0]), np.log(xi_range[1])
    mod = np.exp(rng.uniform(lo, hi, size=count))
    return x, d * mod[:, None]


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def verify_ellipticity(I: Integrand, sample_count: int = 10_000, rng=0, tol: float = 1e-10):
    """Empirical (lambda, Lambda) from the extreme eigenvalues of F_xixi.

    Raises ``EllipticityViolation`` when the declared constants of ``I.E`` are beaten.
    """
    x, xi = sample_points(I.n, sample_count, _rng(rng))
    w = I.mu ** 2 + np.sum(xi * xi, axis=1)
    eig = np.linalg.eigvalsh(I.at(x).hess(xi))
    low = eig[:, 0] / w ** ((I.p - 2) / 2.0)
    high = eig[:, -1] / w ** ((float(I.E.q) - 2) / 2.0)
    lam_emp, Lam_emp = float(low.min()), float(high.max())
    lam, Lam = I.E.lambda_ell, I.E.Lambda_ell
    if lam_emp < lam * (1 - tol):
        i = int(np.argmin(low))
        raise EllipticityViolation(f"lambda_emp = {lam_emp} < declared {lam}", (x[i], xi[i]))
    if Lam_emp > Lam * (1 + tol):
        i = int(np.argmax(high))
        raise EllipticityViolation(f"Lambda_emp = {Lam_emp} > declared {Lam}", (x[i], xi[i]))
    return lam_emp, Lam_emp


def verify_growth(I: Integrand, sample_count: int = 10_000, rng=0, tol: float = 1e-10) -> dict:
    """Worst relative margins of the two-sided power bounds implied by ellipticity.

    For exponents below 2 these bounds can legitimately fail near xi = 0 when mu > 0.
    """
    x, xi = sample_points(I.n, sample_count, _rng(rng))
    xi[:4] = 0.0
    s2 = np.sum(xi * xi, axis=1)
    w = I.mu ** 2 + s2
    p, q = I.p, float(I.E.q)
    F = I.at(x).F(xi)
    lower = I.E.lambda_ell / (p * (p - 1)) * w ** ((p - 2) / 2.0) * s2
    upper = I.E.Lambda_ell / 2.0 * w ** ((q - 2) / 2.0) * s2
    scale = np.maximum(1.0, upper)
    m_low = (F - lower) / scale
    m_up = (upper - F) / scale
    out = {"lower": float(m_low.min()), "upper": float(m_up.min())}
    for name, m in (("lower", m_low), ("upper", m_up)):
        if m.min() < -tol:
            i = int(np.argmin(m))
            raise GrowthViolation(f"{name} growth bound fails by {m[i]:.3e}", (x[i], xi[i]))
    return out


def verify_mixed_bound(I: Integrand, sample_count: int = 10_000, rng=0, tol: float = 1e-10) -> float:
    """Worst relative margin of h(x) w^((q-1)/2) - |F_xix(x, xi)|."""
    x, xi = sample_points(I.n, sample_count, _rng(rng))
    w = I.mu ** 2 + np.sum(xi * xi, axis=1)
    M = np.linalg.norm(I.at(x).mixed(xi), axis=(1, 2))
    bound = I.coeff.h(x) * w ** ((float(I.E.q) - 1) / 2.0)
    m = (bound - M) / np.maximum(1.0, bound)
    if m.min() < -tol:
        i = int(np.argmin(m))
        raise MixedBoundViolation(f"|F_xix| exceeds h w^((q-1)/2) by {m[i]:.3e}", (x[i], xi[i]))
    return float(m.min())


# ----------------------------------------------------------------------------- quadrature


def ball_quadrature(n: int, radius: float, n_rad: int, n_ang: int):
    """Tensor Gauss rule on the ball of given radius centred at 0 (n = 2 or 3)."""
    gx, gw = np.polynomial.legendre.leggauss(n_rad)
    rho = 0.5 * radius * (gx + 1.0)
    wr = 0.5 * radius * gw * rho ** (n - 1)
    phi = 2.0 * math.pi * np.arange(n_ang) / n_ang
    wphi = np.full(n_ang, 2.0 * math.pi / n_ang)
    if n == 2:
        R, P = np.meshgrid(rho, phi, indexing="ij")
        pts = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1).reshape(-1, 2)
        wts = np.outer(wr, wphi).ravel()
        return pts, wts
    if n == 3:
        ct, wt = np.polynomial.legendre.leggauss(max(2, n_ang // 2))
        st = np.sqrt(1.0 - ct * ct)
        R, C, P = np.meshgrid(rho, ct, phi, indexing="ij")
        S = np.sqrt(1.0 - C * C)
        pts = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], axis=-1).reshape(-1, 3)
        wts = (wr[:, None, None] * wt[None, :, None] * wphi[None, None, :]).ravel()
        del st
        return pts, wts
    raise DomainError("ball quadrature is implemented for n = 2 and n = 3")


def ball_volume(n: int, radius: float) -> float:
    return math.pi ** (n / 2) / gamma_fn(n / 2 + 1) * radius ** n


def orlicz_norm_h(Cf: CoefficientField, center, radius: float, E: ExponentSet,
                  levels=((16, 32), (32, 64))):
    """Integral of h^r log^alpha(e + h) over a ball and H^2 = (integral)^(2/n).

    Two quadrature levels are compared; a relative change above 1e-3 warns.
    """
    n, _, _, r, alpha = E.floats()
    c = np.asarray(center, dtype=float).reshape(1, n)
    vals = []
    for n_rad, n_ang in levels:
        pts, wts = ball_quadrature(n, radius, n_rad, n_ang)
        h = np.asarray(Cf.h(pts + c), dtype=float)
        vals.append(float(np.sum(wts * h ** r * np.log(math.e + h) ** alpha)))
    coarse, fine = vals
    if abs(fine - coarse) > 1e-3 * max(abs(fine), 1e-300):
        warnings.warn(f"quadrature not converged: {coarse} vs {fine}", QuadratureWarning, stacklevel=2)
    return fine, fine ** (2.0 / n)


# ----------------------------------------------------------------------------- approximation


def truncate(I: Integrand, k: float) -> Integrand:
    """F_k: the q-power part continued with p-growth past |xi| = k (C^1 radial gluing)."""
    if k < 1:
        raise DomainError("truncation level must be >= 1")
    Ik = dataclasses.replace(I, k=float(k))
    Ik.glue_constants()
    return Ik


@dataclass(frozen=True)
class MollifierSpec:
    """Kernel c_n (1 - |y|^2)^3 on the unit ball with its quadrature rule."""

    n: int
    n_rad: int = 8
    n_ang: int = 16

    @property
    def normalization(self) -> float:
        return gamma_fn(self.n / 2 + 4) / (6.0 * math.pi ** (self.n / 2))

    def profile(self, y):
        y = _pts(y, self.n)
        r2 = np.sum(y * y, axis=1)
        return np.where(r2 < 1.0, self.normalization * (1.0 - r2) ** 3, 0.0)

    def rule(self):
        """Nodes y_j in the unit ball and weights including the kernel values."""
        pts, wts = ball_quadrature(self.n, 1.0, self.n_rad, self.n_ang)
        return pts, wts * self.profile(pts)

    def mass(self) -> float:
        return float(np.sum(self.rule()[1]))


def _reflect(x, extent):
    """Even reflection into [-S, S]^n and the sign flips of the Jacobian."""
    y = x.copy()
    sign = np.ones_like(x)
    over = y > extent
    y[over] = 2 * extent - y[over]
    sign[over] = -1.0
    under = y < -extent
    y[under] = -2 * extent - y[under]
    sign[under] = -1.0
    return y, sign


def mollify_field(Cf: CoefficientField, eps: float, M: MollifierSpec, extent: float = 1.0) -> CoefficientField:
    """Convolve a, Da and h with the kernel at radius ``eps``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if eps > extent:
        raise DomainError(f"eps = {eps} exceeds the reflection margin {extent}")
    nodes, wts = M.rule()

    def _conv(fn, vector=False):
        def out(x):
            x = _pts(x, M.n)
            N = x.shape[0]
            z = (x[:, None, :] + eps * nodes[None, :, :]).reshape(-1, M.n)
            zr, sign = _reflect(z, extent)
            v = fn(zr)
            if vector:
                v = (v * sign).reshape(N, -1, M.n)
                return np.einsum("nqd,q->nd", v, wts)
            return v.reshape(N, -1) @ wts

        return out

    return CoefficientField(
        _conv(Cf.a), _conv(Cf.grad_a, vector=True), _conv(Cf.h),
        Cf.a_min, Cf.a_max, f"{Cf.label}*eps={eps:g}",
    )


def mollify(Ik: Integrand, eps: float, M: Optional[MollifierSpec] = None, extent: float = 1.0) -> Integrand:
    """F_{eps,k}: F_k with its coefficient fields mollified (exact, as F_k is affine in a)."""
    M = M or MollifierSpec(Ik.n)
    return dataclasses.replace(Ik, coeff=mollify_field(Ik.coeff, eps, M, extent))


@dataclass(frozen=True)
class ApproxBounds:
    """Sampled constants of the approximating densities (sup/inf of the relevant ratios)."""

    k: Optional[float]
    eps: Optional[float]
    ell0: float
    ell: float
    ell1_k: float
    lambda_tilde: float
    Lambda_tilde: float
    Lambda_tilde1_k: float
    C_mix: float
    C1_mix_k: float
    C2_mix_K: Optional[float] = None


def approx_bounds(Ik: Integrand, sample_count: int = 10_000, rng=0, eps: Optional[float] = None,
                  h_ref: Optional[Callable] = None) -> ApproxBounds:
    """Fit the constants of the lower/upper growth, ellipticity and mixed bounds on samples.

    ``h_ref`` is the h used for the mixed bounds (defaults to the integrand's own h);
    when ``eps`` is given the mollified-h bound is reported as ``C2_mix_K``.
    """
    x, xi = sample_points(Ik.n, sample_count, _rng(rng))
    p, q, mu = Ik.p, float(Ik.E.q), Ik.mu
    s2 = np.sum(xi * xi, axis=1)
    w = mu * mu + s2
    J = Ik.at(x)
    F = J.F(xi)
    eig = np.linalg.eigvalsh(J.hess(xi))
    mixed = np.linalg.norm(J.mixed(xi), axis=(1, 2))
    h = (h_ref or Ik.coeff.h)(x)
    live = h > 0
    shiftp = w ** (p / 2) - mu ** p

    def sup(v):
        return float(np.max(v)) if v.size else 0.0

    c_mix = sup(mixed[live] / (h[live] * w[live] ** ((q - 1) / 2)))
    c1 = sup(mixed[live] / (h[live] * w[live] ** ((p - 1) / 2)))
    return ApproxBounds(
        k=Ik.k, eps=eps,
        ell0=float(np.min(F[s2 > 0] / shiftp[s2 > 0])),
        ell=sup(F / w ** (q / 2)),
        ell1_k=sup(F / w ** (p / 2)),
        lambda_tilde=float(np.min(eig[:, 0] / w ** ((p - 2) / 2))),
        Lambda_tilde=sup(np.abs(eig).max(axis=1) / w ** ((q - 2) / 2)),
        Lambda_tilde1_k=sup(np.abs(eig).max(axis=1) / w ** ((p - 2) / 2)),
        C_mix=c_mix,
        C1_mix_k=c1,
        C2_mix_K=c1 if eps is not None else None,
    )
