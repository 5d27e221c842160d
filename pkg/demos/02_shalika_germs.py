"""Barbasch-Moy tuples, the Theta matrix and Shalika germs for sl2.

Run with ``python demos/02_shalika_germs.py``.
"""
from __future__ import annotations

import random

from germlab.localfield import ORDERED_CLASSES, Qp
from germlab.sl2germs import (
    class_representatives,
    classify_nilpotents_bruteforce,
    germ_expansion_residual,
    sample_regular,
    shalika_germs,
    standard_theta,
)

Q5 = Qp(5, 16)

# Five nilpotent orbits: zero and one regular orbit per square class.
reps = classify_nilpotents_bruteforce(Q5)
print("nilpotent classes found by search:", len(reps))
for N in reps:
    print("  ", N)

# One Barbasch-Moy pair per orbit; Theta[j][i] = O(N_i, 1 of support j).
theta = standard_theta(Q5)
print("\nBarbasch-Moy tuple:")
for pr in theta.tuple_:
    print(f"   orbit {pr.orbit.label:>3}  N = {pr.N}  parahoric {pr.f.value}")
print("\nTheta:")
for row in theta.rows():
    print("  ", [str(v) for v in row])
print("upper triangular:", theta.is_upper_triangular(), " det =", theta.det())

# Germs through the adjugate: d * O(X) = Theta * Gamma(X) holds exactly.
print("\ngerms (orbits 0, 1, u, pi, u pi) of the two rational classes per stable class:")
for cls in ORDERED_CLASSES:
    v = 3 if cls.odd else 2
    D = -cls.representative(Q5).shift(v - int(cls.odd))
    for X in class_representatives(D):
        t = shalika_germs(X, theta)
        print(f"   -D in class {cls.value:>3}, ord D = {v}:", [str(g) for g in t.germs])

# Summed over a stable class, every regular orbit gets germ 1.
rng = random.Random(0)
X = sample_regular(Q5, rng, ORDERED_CLASSES[1], 4)
tables = [shalika_germs(Y, theta) for Y in class_representatives(X.det())]
print("\nstable regular germs:", [str(sum(t.germs[i] for t in tables)) for i in range(1, 5)])
print("residual of the expansion identity:", [str(r) for r in germ_expansion_residual(tables[0], theta)])

# Scaling X by pi^2 multiplies the zero-orbit germ by p^-2 and fixes the rest.
t1 = shalika_germs(X, theta)
t2 = shalika_germs(X.scale(Q5.pi() * Q5.pi()), theta)
print("germ ratios under X -> pi^2 X:", [str(b / a) if a else "0/0" for a, b in zip(t1.germs, t2.germs)])
