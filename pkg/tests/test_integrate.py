from __future__ import annotations

import json
from fractions import Fraction

import pytest

from germlab.denefpas import Ball, DefinableSet
from germlab.integrate import (
    Expression,
    Integrand,
    IntegrandTerm,
    LerayFiberSpec,
    Polynomial,
    ak_regression_family,
    asymptotic_vanishing_check,
    integrate,
    leray_count,
    leray_fiber_measure,
    measure,
    run_config,
    singular_tail,
    transfer_compare,
    truncated_family,
)
from germlab.localfield import Fpt, Qp
from germlab.sl2germs import ALL_ORBITS, Box, Sl2Element, fiber_measure, nilpotent_orbital_integral_box

Q5, F5 = Qp(5, 14), Fpt(5, 14)
QUADRIC = Polynomial.from_text("-a^2 - b*c", ["a", "b", "c"])


def S(text):
    return DefinableSet.from_text(text)


def unit_box(spec, n=1):
    return [Ball.unit(spec)] * n


class TestMeasure:
    @pytest.mark.parametrize("spec", [Q5, F5])
    def test_examples(self, spec):
        assert measure(S("ord(x) >= 0"), unit_box(spec), 3, spec).value == 1
        assert measure(S("ord(x) >= 2"), unit_box(spec), 3, spec).value == Fraction(1, 25)
        r = measure(S("ac(x) = 1"), unit_box(spec), 3, spec)
        assert r.value == Fraction(1, 4) and r.stable and r.extrapolated

    def test_additivity(self):
        parts = ["ord(x) = 0 && ac(x) = 1", "ord(x) = 0 && ac(x) = 2", "ord(x) >= 1"]
        union = measure(S(" || ".join(f"({p})" for p in parts)), unit_box(Q5), 3, Q5).value
        assert union == sum(measure(S(p), unit_box(Q5), 3, Q5).value for p in parts)

    def test_translation_invariance(self):
        a = measure(S("ord(x) >= 2 && ac(x) = 3"), unit_box(Q5), 3, Q5).value
        b = measure(S("ord(x - 7) >= 2 && ac(x - 7) = 3"), unit_box(Q5), 3, Q5).value
        assert a == b

    def test_scaling(self):
        base = measure(S("ac(x) = 1"), unit_box(Q5), 3, Q5).value
        scaled = measure(S("ac(x) = 1 && ord(x) >= 1"), unit_box(Q5), 3, Q5).value
        assert scaled == base / 5

    def test_refinement_stability(self):
        f = S("ord(x) >= 1 && ord(x*x - 25) >= 4")
        r3 = measure(f, unit_box(Q5), 3, Q5)
        r4 = measure(f, unit_box(Q5), 4, Q5)
        assert r3.stable and r3.value == r4.value

    def test_unstable_is_flagged_not_hidden(self):
        r = measure(S("ord(x) <= 3"), unit_box(Q5), 3, Q5)
        assert r.depth == 4 and r.stable


class TestIntegrate:
    x = Polynomial.from_text("x", ["x"])

    def test_one_is_measure(self):
        assert integrate(Integrand.one(), S("ord(x) >= 1"), unit_box(Q5), 3, Q5).value == Fraction(1, 5)

    def test_shells(self):
        shells = S("ord(x) >= 1 && ord(x) <= 2")
        up = Integrand((IntegrandTerm(a=1, g=self.x),))
        down = Integrand((IntegrandTerm(a=-1, g=self.x),))
        assert integrate(up, shells, unit_box(Q5), 3, Q5).value == Fraction(8, 5)
        assert integrate(down, shells, unit_box(Q5), 3, Q5).value == Fraction(104, 3125)

    def test_support_off_box(self):
        box = [Ball(Q5(1), 1)]
        assert integrate(Integrand.one(), S("ord(x) >= 1"), box, 3, Q5).value == 0

    def test_term_sets(self):
        f = Integrand((IntegrandTerm(Fraction(2), S=S("ord(x) = 0")), IntegrandTerm(Fraction(-1), S=S("ac(x) = 1"))))
        r = integrate(f, None, unit_box(Q5), 3, Q5, names=["x"])
        assert r.value == 2 * Fraction(4, 5) - Fraction(1, 4)


class TestLeray:
    def test_projection(self):
        L = LerayFiberSpec(Polynomial.from_text("x", ["a", "b", "x"]), Q5.zero(), tuple(unit_box(Q5, 3)))
        assert leray_fiber_measure(L, None, 2, Q5).value == 1

    def test_quadric_frozen(self):
        L = LerayFiberSpec(QUADRIC, Q5(5), tuple(unit_box(Q5, 3)))
        assert [leray_count(L, None, m, Q5) for m in (2, 3, 4)] == [Fraction(24, 25)] * 3

    def test_incompatible_valuation(self):
        L = LerayFiberSpec(QUADRIC, Q5(Fraction(1, 5)), tuple(unit_box(Q5, 3)))
        assert leray_count(L, None, 3, Q5) == 0

    @pytest.mark.parametrize("spec", [Q5, F5])
    def test_engine_agrees_with_counting(self, spec):
        pi = spec.pi()
        box = Box(Sl2Element.make(spec, 0, 0, 0), (0, 0, 0))
        for D in (pi, 2 * pi, spec(2), 3 * pi * pi):
            L = LerayFiberSpec(QUADRIC, D, tuple(unit_box(spec, 3)))
            assert fiber_measure(box, D) == leray_count(L, None, 4, spec)

    def test_partition_additivity(self):
        D = Q5(10)
        whole = leray_count(LerayFiberSpec(QUADRIC, D, tuple(unit_box(Q5, 3))), None, 3, Q5)
        parts = sum(
            leray_count(LerayFiberSpec(QUADRIC, D, (Ball(Q5(d), 1), Ball.unit(Q5), Ball.unit(Q5))), None, 3, Q5)
            for d in range(5)
        )
        assert whole == parts

    def test_restriction(self):
        L = LerayFiberSpec(QUADRIC, Q5(10), tuple(unit_box(Q5, 3)))
        unit_b = leray_count(L, S("vf a; vf b; ord(b) = 0"), 3, Q5)
        rest = leray_count(L, S("vf a; vf b; ord(b) >= 1"), 3, Q5)
        assert unit_b + rest == leray_count(L, None, 3, Q5)

    def test_singular_tail_certifies_cone(self):
        L = LerayFiberSpec(QUADRIC, Q5.zero(), tuple(unit_box(Q5, 3)))
        tail = singular_tail(L, 5, Q5, Ms=(1, 2, 3))
        assert tail.geometric and tail.ratio == Fraction(1, 5)
        box = Box(Sl2Element.make(Q5, 0, 0, 0), (0, 0, 0))
        cone = sum(nilpotent_orbital_integral_box(o, box) for o in ALL_ORBITS[1:])
        assert tail.limit == cone == Fraction(6, 5)

    def test_singular_tail_needs_depth(self):
        L = LerayFiberSpec(QUADRIC, Q5.zero(), tuple(unit_box(Q5, 3)))
        with pytest.raises(ValueError):
            singular_tail(L, 4, Q5, Ms=(1, 2, 3))


class TestTransfer:
    def test_measure_agrees(self):
        e = Expression(Integrand.one(), S("ord(x) >= 1"), (((0,), 0),))
        r = transfer_compare(e, 5, 3)
        assert r.agree and r.value_mixed == Fraction(1, 5)

    def test_p2_rejected(self):
        e = Expression(Integrand.one(), S("ord(x) >= 1"), (((0,), 0),))
        with pytest.raises(ValueError):
            transfer_compare(e, 2, 3)

    def test_disagreement_is_reported(self):
        r = transfer_compare(lambda spec, k: Fraction(spec.kind == "mixed"), 5, 3, label="probe")
        assert not r.agree and r.record()["agree"] is False

    def test_family_has_ten_members(self):
        assert len(ak_regression_family()) == 10


class TestVanishing:
    def test_zero_integrand(self):
        rep = asymptotic_vanishing_check(lambda a: Fraction(0), range(0, 6))
        assert rep.vanishes

    def test_indicator_family(self):
        fam = truncated_family(Integrand.one(), S("ord(x) = 3"), unit_box(Q5), 3, Q5,
                               lambda a: S(f"ord(x) >= {a}"))
        rep = asymptotic_vanishing_check(fam, range(0, 7))
        assert rep.first_nonzero == 0
        assert all(rep.values[a] != 0 for a in range(0, 4))
        assert all(rep.values[a] == 0 for a in range(4, 7))


class TestConfig:
    def test_run_config(self, tmp_path):
        (tmp_path / "shells.dp").write_text("vf x; ord(x) >= 1 && ord(x) <= 2\n", encoding="utf-8")
        cfg = {"field": "qp", "p": 5, "depth": 3, "formula_file": "shells.dp",
               "integrand": [{"coef": "1", "a": 1, "g": "x"}]}
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        rec = run_config(path)
        assert rec["value"] == "8/5" and rec["stable"] is True
