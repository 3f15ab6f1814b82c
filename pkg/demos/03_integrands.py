"""
Checking the structural assumptions on a catalog of integrands
==============================================================

The three catalog members are a p-Laplacian type density, one with an oscillating
coefficient, and a double-phase density with a p- and a q-part.  Ellipticity,
growth and the mixed-derivative bound are checked on 10^4 random samples each.
Then the truncation ladder F_k and the mollified coefficients are inspected.
"""
from fractions import Fraction

import numpy as np

from pqgl.errors import EllipticityViolation
from pqgl.exponents import ExponentSet
from pqgl.integrand import (
    approx_bounds,
    make_integrand,
    mollify,
    sample_points,
    truncate,
    verify_ellipticity,
    verify_growth,
    verify_mixed_bound,
)

E_std = ExponentSet(2, 2, 2, 2, 9, mu=0.5)
E_lim = ExponentSet(2, 2, Fraction(5, 2), 4, 1, mu=0.5)
members = {
    "K1": make_integrand("K1", E_std),
    "K2 sine": make_integrand("K2", E_std, "sine", 1.0, 2.0),
    "K3 bump": make_integrand("K3", E_lim, "bump", 1.0, 3.0),
}
for name, I in members.items():
    lam, Lam = verify_ellipticity(I, 10_000)
    growth = verify_growth(I, 10_000)
    mixed = verify_mixed_bound(I, 10_000)
    print(f"{name:8s} lambda {I.E.lambda_ell:.3g} <= {lam:.3g}, Lambda {Lam:.3g} <= {I.E.Lambda_ell:.3g}, "
          f"growth margins {growth['lower']:.2g}/{growth['upper']:.2g}, mixed margin {mixed:.2g}")

# understating Lambda is caught, with a witness point
bad = make_integrand("K3", ExponentSet(2, 2, Fraction(5, 2), 4, 1, mu=0.5, lambda_ell=2, Lambda_ell=3),
                     declare_constants=False)
try:
    verify_ellipticity(bad, 2000)
except EllipticityViolation as exc:
    print("corrupted Lambda:", exc, "at", np.round(exc.witness[1], 3))

# truncation: F_k agrees with F for |xi| <= k and grows like |xi|^p beyond
I = members["K3 bump"]
x, xi = sample_points(2, 5, np.random.default_rng(1), xi_range=(1, 200))
print("|xi|      F_2       F_20      F")
for row in zip(np.linalg.norm(xi, axis=1), truncate(I, 2).F(x, xi), truncate(I, 20).F(x, xi), I.F(x, xi)):
    print("  ".join(f"{v:8.4g}" for v in row))
for k in (1, 10, 100):
    b = approx_bounds(truncate(I, k), 5000)
    print(f"k = {k:3d}: p-growth constant {b.ell1_k:.4g}, ellipticity {b.lambda_tilde:.3g}")

Ie = mollify(truncate(I, 10), 0.05)
pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.9, 0.9]])
print("a vs mollified a:", np.round(I.coeff.a(pts), 5), np.round(Ie.coeff.a(pts), 5))
