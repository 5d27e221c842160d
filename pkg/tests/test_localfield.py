from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from germlab.localfield import (
    INF,
    ORDERED_CLASSES,
    FieldSpec,
    Fpt,
    LocalElement,
    LocalFieldError,
    PrecisionError,
    Qp,
    SquareClass,
    format_element,
    hilbert_symbol,
    hilbert_symbol_bruteforce,
    legendre,
    parse_element,
)

Q5 = Qp(5, 12)
F5 = Fpt(5, 12)


def digits_el(spec, data, v=0):
    return LocalElement.from_digits(spec, data, v)


elements = st.builds(
    lambda kind, ds, v: LocalElement.from_digits(Qp(5, 12) if kind else Fpt(5, 12), [1 + ds[0] % 4] + ds[1:], v),
    st.booleans(),
    st.lists(st.integers(0, 4), min_size=1, max_size=5),
    st.integers(-3, 3),
)


def pair(kind):
    spec = Qp(5, 12) if kind else Fpt(5, 12)
    el = st.builds(lambda ds, v: LocalElement.from_digits(spec, [1 + ds[0] % 4] + ds[1:], v),
                   st.lists(st.integers(0, 4), min_size=1, max_size=5), st.integers(-3, 3))
    return st.tuples(el, el)


pairs = st.booleans().flatmap(pair)


class TestArithmetic:
    def test_difference_of_squares(self):
        assert (Q5(1 + 5) * Q5(1 - 5)) == Q5(1 - 25)

    def test_inverse_in_fpt(self):
        t = F5.pi()
        assert t * t.inverse() == F5.one()

    def test_carry(self):
        assert (Q5(3) + Q5(4)).digits[:2] == (2, 1)

    def test_ord_ac(self):
        a = Q5(75)
        assert a.ord() == 2 and a.ac() == 3
        z = Q5.zero()
        assert z.ord() == INF and z.ac() == 0
        b = parse_element("t^-1*(2 + 1*t)", F5)
        assert b.ord() == -1 and b.ac() == 2

    def test_inexact_zero_ord_is_an_error(self):
        z = LocalElement.ball(Q5, [0, 0], 2)
        with pytest.raises(PrecisionError):
            z.ord()
        assert z.ord_lower() == 2

    def test_field_mismatch(self):
        with pytest.raises(LocalFieldError):
            Q5.one() + F5.one()

    def test_p2_rejected_for_endoscopy(self):
        with pytest.raises(LocalFieldError):
            Qp(3, 5).require_endoscopic()
        with pytest.raises(LocalFieldError):
            FieldSpec("mixed", 2, 5)

    def test_text_round_trip(self):
        for text, spec in [("5^2*(3 + 1*5 + 0*5^2)", Q5), ("t^-1*(2 + 1*t)", F5)]:
            x = parse_element(text, spec)
            assert parse_element(format_element(x), spec) == x


class TestSquareClasses:
    def test_examples(self):
        assert Q5(4).square_class() is SquareClass.ONE
        assert Q5(5).square_class() is SquareClass.PI
        assert Q5(2).square_class() is SquareClass.U

    def test_nonsquare_is_smallest_nonresidue(self):
        assert Qp(5).nonsquare == 2 and Qp(7).nonsquare == 3 and Qp(11).nonsquare == 2
        squares = {x * x % 5 for x in range(1, 5)}
        assert 2 not in squares

    def test_sqrt(self):
        assert Q5(4).sqrt() == Q5(2)
        with pytest.raises(LocalFieldError):
            Q5(5).sqrt()
        r = Q5(6).sqrt()
        assert (r * r - Q5(6)).ord_lower() >= 4

    @given(elements, elements)
    def test_constant_on_squares(self, a, r):
        if a.spec != r.spec:
            return
        assert (a * a * r).square_class() is r.square_class()


class TestHilbert:
    def test_examples(self):
        assert hilbert_symbol(Q5(5), Q5(2)) == -1
        assert hilbert_symbol(Q5(3), Q5(-3)) == 1
        assert hilbert_symbol(Q5(2), Q5(3)) == 1

    @pytest.mark.parametrize("spec", [Qp(5, 10), Fpt(5, 10), Qp(7, 10)])
    def test_against_bruteforce_solubility(self, spec):
        reps = [c.representative(spec) for c in ORDERED_CLASSES]
        for a in reps:
            for b in reps:
                assert hilbert_symbol(a, b) == hilbert_symbol_bruteforce(a, b)

    @pytest.mark.parametrize("p", [5, 7, 11])
    def test_symmetric_bimultiplicative(self, p):
        for spec in (Qp(p, 8), Fpt(p, 8)):
            reps = [c.representative(spec) for c in ORDERED_CLASSES] + [spec(-1)]
            for a in reps:
                assert hilbert_symbol(a, -a) == 1
                for b in reps:
                    assert hilbert_symbol(a, b) == hilbert_symbol(b, a)
                    for c in reps:
                        assert hilbert_symbol(a, b * c) == hilbert_symbol(a, b) * hilbert_symbol(a, c)


class TestProperties:
    @given(pairs)
    def test_ultrametric(self, ab):
        a, b = ab
        s = a + b
        if s.is_zero:
            return
        assert s.ord() >= min(a.ord(), b.ord())
        if a.ord() != b.ord():
            assert s.ord() == min(a.ord(), b.ord())

    @given(pairs)
    def test_ord_additive_ac_multiplicative(self, ab):
        a, b = ab
        p = a.spec.p
        assert (a * b).ord() == a.ord() + b.ord()
        assert (a * b).ac() == a.ac() * b.ac() % p

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=6), st.lists(st.integers(0, 2), min_size=1, max_size=6))
    def test_fields_agree_without_carries(self, xs, ys):
        n = max(len(xs), len(ys))
        xs, ys = xs + [0] * (n - len(xs)), ys + [0] * (n - len(ys))
        sums = []
        for spec in (Qp(5, 8), Fpt(5, 8)):
            s = LocalElement.from_digits(spec, xs) + LocalElement.from_digits(spec, ys)
            sums.append(s.digits if not s.is_zero else ())
        assert sums[0] == sums[1]

    @given(st.integers(-10**6, 10**6).filter(lambda n: n != 0), st.integers(1, 10**6).filter(lambda n: n % 5))
    def test_rationals_round_trip(self, n, d):
        q = Fraction(n, d)
        x = Q5(q)
        assert x * Q5(d) == Q5(n)

    def test_legendre(self):
        assert [legendre(d, 7) for d in range(1, 7)] == [1, 1, -1, 1, -1, -1]
