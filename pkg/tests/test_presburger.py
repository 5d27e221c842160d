from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from germlab.presburger import (
    ExpPoly,
    PiecewiseExpPoly,
    PresburgerError,
    format_exppoly,
    is_eventually_zero,
    parse_exppoly,
    parse_piece,
    parse_piecewise,
    specialize,
    tail_bound_holds,
    uniform_tail_bound,
    zero_set_bounded,
)

t, qt = ExpPoly.t(), ExpPoly.qt()

exppolys = st.lists(
    st.tuples(st.integers(-5, 5).filter(bool), st.integers(0, 3), st.integers(-2, 3)), max_size=4
).map(ExpPoly.make)


class TestArithmetic:
    def test_cancellation(self):
        assert (2 * qt + (-2) * qt).is_zero

    def test_single_term_product(self):
        assert (t * qt).items() == [(1, 1, 1)]

    def test_expansion(self):
        assert (t - 3) * (t - 5) == t * t - 8 * t + 15

    @given(exppolys, exppolys, st.integers(2, 17), st.integers(-50, 200))
    def test_canonical_form_sound(self, f, g, q, n):
        assert specialize(f + g, q, n) == specialize(f, q, n) + specialize(g, q, n)
        assert specialize(f * g, q, n) == specialize(f, q, n) * specialize(g, q, n)


class TestSpecialize:
    def test_examples(self):
        assert specialize(t * qt, 3, 2) == 18
        assert specialize(ExpPoly(), 7, 9) == 0
        assert specialize(qt - t, 2, 4) == 12

    def test_q_below_two_rejected(self):
        with pytest.raises(PresburgerError):
            specialize(t, 1, 0)


class TestZeros:
    def test_examples(self):
        assert zero_set_bounded(t - 3, 5, 0, 10) == [3]
        assert zero_set_bounded(qt - 1, 2, 0, 10) == [0]

    def test_eventually_zero(self):
        assert is_eventually_zero(PiecewiseExpPoly.on_ray(ExpPoly()))
        assert is_eventually_zero(PiecewiseExpPoly.on_ray(qt - qt))
        f = t * t - 8 * t + 15
        assert not is_eventually_zero(PiecewiseExpPoly.on_ray(f))
        assert zero_set_bounded(f, 3, 0, 500) == [3, 5]

    def test_bounded_domain_has_no_tail(self):
        with pytest.raises(PresburgerError):
            is_eventually_zero(parse_piecewise("[0..4]: t"))

    def test_piecewise_tail_ignores_bounded_pieces(self):
        g = parse_piecewise("[0..9]: t - 3; [10..): 0")
        assert is_eventually_zero(g)
        assert g(5, 3) == 0 and g(5, 4) == 1


class TestTailBound:
    def test_examples(self):
        assert uniform_tail_bound(qt - t, 2) == 1
        assert uniform_tail_bound(ExpPoly.const(1), 5) == 0
        a0 = uniform_tail_bound(t * t - 8 * t + 15, 3)
        assert a0 >= 6 and tail_bound_holds(t * t - 8 * t + 15, 3, a0)

    @given(exppolys.filter(lambda f: not f.is_zero), st.integers(2, 17))
    def test_tail_is_zero_free(self, f, q):
        a0 = uniform_tail_bound(f, q)
        assert zero_set_bounded(f, q, a0, a0 + 60) == []


class TestText:
    @pytest.mark.parametrize("text", ["3*t^2*q^(−1*t) + 1/2*q^(2*t)", "q^t - t", "t^2 - 8*t + 15", "0", "-1/3*t*q^(-2*t)"])
    def test_round_trip(self, text):
        f = parse_exppoly(text)
        assert parse_exppoly(format_exppoly(f)) == f

    @given(exppolys)
    def test_round_trip_random(self, f):
        assert parse_exppoly(format_exppoly(f)) == f

    def test_pieces(self):
        p = parse_piece("[3..) mod 2 = 1")
        assert 5 in p and 4 not in p and 1 not in p
        b = parse_piece("[0..4] mod 2")
        assert [n for n in range(-2, 8) if n in b] == [0, 2, 4]
        with pytest.raises(PresburgerError):
            parse_piecewise("[0..): t; [3..): 1")
