"""
The Lipschitz bound across the three regimes
============================================

For one parameter point per regime the minimizer is computed, and the smallest
C' with sup_(B_rho) |Du| <= G(C' (R - rho)^-n int_(B_R) (1 + |Du|^p)) is fitted.
A bound that is really mesh-independent gives a C' that settles under refinement.
The closing part follows the constants of the Moser iteration.
"""
import numpy as np

from pqgl.estimates import DEFAULT_RADII, MoserConstants, default_scan_points, iteration_trace, main_estimate_check
from pqgl.exponents import ExponentSet, RadiusSchedule, classify
from pqgl.integrand import make_integrand
from pqgl.solver import Grid, boundary_data, minimize

bd = boundary_data("bump", 2)
for pt in default_scan_points():
    E = ExponentSet(pt.n, pt.p, pt.q, pt.r, pt.alpha, mu=pt.mu)
    case = classify(E)
    I = make_integrand("K2" if E.p == E.q else "K3", E, "sine", 1.0, 2.0)
    print(f"{case.value} (p, q, r, alpha) = ({E.p}, {E.q}, {E.r}, {E.alpha})")
    for m in (33, 65, 129):
        u, _ = minimize(Grid(2, m), I, bd, tol=1e-8)
        recs = main_estimate_check(u, E, case, DEFAULT_RADII)
        print(f"  m = {m:3d}  C' = " + ", ".join(f"{r.C_prime:.4e}" for r in recs))

# both Moser products converge when r > n or alpha > 4n, and diverge at alpha = 4n
sched = RadiusSchedule.evenly(0.1, 0.9)
E = ExponentSet(3, 2, 2, 3, 40)
tr = iteration_trace(E, MoserConstants(1.0), 2.0, sched, J=60)
print("first product", np.round(tr.first[[0, 5, 20, 60]], 6), "bound", np.exp(tr.log_first_bound))
print("second product", np.round(tr.second[[0, 5, 20, 60]], 6))
