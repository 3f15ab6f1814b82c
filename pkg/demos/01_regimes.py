"""
Which growth regime does an exponent set fall into?
===================================================

The Lipschitz bound takes a different form in each of three regimes, decided by
(n, p, q, r, alpha).  This script walks through a few exponent sets and prints
the regime, the gap bound 1 + 1/n - 1/r and the bound function G at a few points.
"""
from fractions import Fraction

import numpy as np

from pqgl.errors import GapViolation, HypothesisNotMet
from pqgl.exponents import ExponentSet, G_eval, classify, gap_bound, moser_reciprocal_sum

# rationals keep the limit case q/p = gap exact
candidates = [
    (3, 2, 2, 3, 13),                 # p = q, r = n, alpha > 4n
    (3, 2, Fraction(11, 5), 6, 0),    # gap strictly below the bound
    (3, 2, Fraction(7, 3), 6, 1),     # q/p exactly on the bound
    (3, 2, Fraction(7, 3), 6, 0),     # on the bound but without the log
    (3, 2, 2, 3, 12),                 # alpha = 4n is the borderline
]

for args in candidates:
    E = ExponentSet(*args)
    try:
        case = classify(E)
    except HypothesisNotMet as exc:
        print(f"{'no regime':14s} {exc}")
        continue
    G = G_eval(E, case, np.array([0.5, 1.0, 2.0]))
    print(f"{case.value:14s} gap bound {str(gap_bound(E.n, E.r)):4s} G(0.5, 1, 2) = "
          + ", ".join(f"{g:.5g}" for g in G))

# a ratio above the bound is rejected on construction
try:
    ExponentSet(3, 2, Fraction(5, 2), 6, 0)
except GapViolation as exc:
    print("q/p = 5/4:", exc)

# the Moser exponents p_j = p (n/(n-2))^j have reciprocal sum n/(2p)
E = ExponentSet(3, 2, 2, 3, 13)
for J in (0, 5, 20, 60):
    print(f"sum_(j<={J}) 1/p_j = {moser_reciprocal_sum(E, J):.12f}   (limit {3 / 4})")
