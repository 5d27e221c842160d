"""Local fields, definable sets and exact volumes.

Run with ``python demos/01_fields_and_measures.py``.  Everything printed is
an exact rational; nothing is floating point.
"""
from __future__ import annotations

from germlab.denefpas import Ball, DefinableSet
from germlab.integrate import (
    Integrand,
    IntegrandTerm,
    LerayFiberSpec,
    Polynomial,
    integrate,
    leray_count,
    measure,
    singular_tail,
)
from germlab.localfield import ORDERED_CLASSES, Fpt, Qp, hilbert_symbol, short_element

Q5 = Qp(5, 14)
F5 = Fpt(5, 14)

# Elements carry a precision budget; ord and ac are exact on known digits.
x = Q5(50)
print("50 in Q_5:", short_element(x), " ord =", x.ord(), " ac =", x.ac())

# The four square classes and their Hilbert symbol table.
reps = [c.representative(Q5) for c in ORDERED_CLASSES]
print("\nHilbert symbols (rows, columns in the order 1, u, pi, u pi):")
for a in reps:
    print("  ", [hilbert_symbol(a, b) for b in reps])

# Definable sets are written in the Denef-Pas language and measured exactly.
unit = [Ball.unit(Q5)]
for text in ("ord(x) >= 2", "ac(x) = 1", "ord(x*x - 1) >= 2"):
    r = measure(DefinableSet.from_text(text), unit, 3, Q5)
    print(f"\nvol{{{text}}} = {r.value}   stable={r.stable} extrapolated={r.extrapolated}")

# Integrals of p^(a ord g) over a definable set.
shells = DefinableSet.from_text("ord(x) >= 1 && ord(x) <= 2")
f = Integrand((IntegrandTerm(a=1, g=Polynomial.from_text("x", ["x"])),))
print("\nintegral of p^ord(x) over 1 <= ord x <= 2:", integrate(f, shells, unit, 3, Q5).value)

# Leray fiber volumes of -a^2 - bc = D by counting solutions mod pi^m.
quad = Polynomial.from_text("-a^2 - b*c", ["a", "b", "c"])
for spec in (Q5, F5):
    L = LerayFiberSpec(quad, spec.pi(), tuple([Ball.unit(spec)] * 3))
    print(f"\nLeray volume of D = pi fiber over {spec.name}:", [str(leray_count(L, None, m, spec)) for m in (2, 3, 4)])

# The nilpotent cone is singular at 0; excise balls around 0 and watch the tail.
cone = LerayFiberSpec(quad, Q5.zero(), tuple([Ball.unit(Q5)] * 3))
tail = singular_tail(cone, 5, Q5, Ms=(1, 2, 3))
print("\ncone volume with pi^M O^3 removed, M = 1, 2, 3:", [str(v) for v in tail.values])
print("geometric ratio:", tail.ratio, " limit:", tail.limit)
