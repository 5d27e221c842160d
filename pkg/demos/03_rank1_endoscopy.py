"""Rank-1 endoscopic matching near 0 and the cross-field comparison.

Run with ``python demos/03_rank1_endoscopy.py``.
"""
from __future__ import annotations

from germlab.endoscopy import EndoscopicDatumRank1, kappa_germ_table, local_matching_check, reverify
from germlab.integrate import ak_compare
from germlab.localfield import Qp
from germlab.sl2germs import standard_tuple

Q5 = Qp(5, 14)
tests = standard_tuple(Q5)

# For each elliptic torus, solve for f^H on the annuli of h and check smoothness at 0.
for tau in ("u", "pi", "upi"):
    datum = EndoscopicDatumRank1.elliptic(tau)
    rep = local_matching_check(tests, datum, Q5, range(2, 6), samples=3, seed=1)
    again = reverify(rep, tests, Q5, range(3, 7), samples=3, seed=2)
    print(f"\n{datum.label}: transfer found = {rep.success}, reverified on a shifted range = {again}")
    for label in rep.tests:
        print(f"   f^H for {label:>7}: {rep.fH[label].pieces[0][2]}")

# The same search with the non-norm sign flipped cannot produce a smooth f^H.
bad = local_matching_check(tests, EndoscopicDatumRank1.elliptic("u"), Q5, range(2, 7), flip=True)
print("\nflipped transfer factor: transfer found =", bad.success)
print("   annulus values of the zero-orbit test:", {j: str(v) for j, v in bad.annulus_values["0@v0"].items()})

# Delta-weighted germs: the kappa-germs of the regular orbits are constants.
t = kappa_germ_table(None, EndoscopicDatumRank1.elliptic("u"), Q5(5))
print("\nkappa-germs at y = 5:", [str(g) for g in t.kappa], " stable:", [str(g) for g in t.stable])

# Q_5 and F_5((t)) give identical answers on the regression family.
print("\nQ_5 versus F_5((t)):")
for r in ak_compare(5, depth=3):
    rec = r.record()
    print(f"   {rec['label']:<30} agree={rec['agree']}  value={rec['value_mixed']}")
