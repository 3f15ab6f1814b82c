"""
The scalar toolkit: Orlicz weights, their inverses and polars
=============================================================

L(t) = t^(r-n) log^alpha(e + t) measures the integrability of the coefficient bound h.
Its inverse, the closed-form upper bound for the inverse of the limit-case weight,
the Fenchel conjugate and the polar sandwich are all checked on samples here.
"""
from fractions import Fraction

import numpy as np

from pqgl.orlicz import (
    FENCHEL_CATALOG,
    HatWeight,
    OrliczWeight,
    PhiFunction,
    fenchel_inequality_check,
    ggp_sandwich_check,
    hat_inverse_bound,
    iteration_lemma_constant,
    phi_submultiplicative_check,
)

W = OrliczWeight(6, 3, 2)
tau = np.logspace(-3, 9, 7)
t = W.inverse(tau)
print("tau        L^-1(tau)      L(L^-1(tau)) - tau")
for a, b in zip(tau, t):
    print(f"{a:9.3g}  {b:13.6g}  {W(b) - a: .2e}")

# r = n: L(0) = 1, so the generalised inverse vanishes below 1
print("r = n, L^-1(0.5) =", OrliczWeight(3, 3, 5).inverse(0.5))

H = HatWeight(6, 3, 2, 2, Fraction(7, 3))
sigma = np.array([1.0, 1.5, 2.0, 3.0])
print("limit weight inverse:", np.round(H.inverse_numeric(sigma), 3))
print("closed-form bound:   ", np.round(hat_inverse_bound(H, sigma), 3))

rng = np.random.default_rng(0)
s, u = np.exp(rng.uniform(0, 4, 10_000)), np.exp(rng.uniform(0, 4, 10_000))
print("submultiplicativity margin (min):", phi_submultiplicative_check(PhiFunction(1, 1), s, u).min())

for name, Phi in FENCHEL_CATALOG.items():
    a, b = rng.uniform(0, 10, 10_000), rng.uniform(0, 10, 10_000)
    print(f"Fenchel-Young margin for {name:9s}: {fenchel_inequality_check(Phi, a, b).min():.2e}")

s0, rep = ggp_sandwich_check(lambda x: np.log1p(np.asarray(x, dtype=float) ** 2), np.logspace(-3, 3, 25))
print(f"polar sandwich for log(1+s^2) holds from s0 = {s0:.3g}")

for theta in (0.25, 0.75, 0.95):
    kappa, c = iteration_lemma_constant(2.0, 1.0, theta)
    print(f"iteration lemma, theta = {theta}: kappa = {kappa:.4f}, c = {c:.4g}")
