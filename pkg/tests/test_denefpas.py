from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from germlab.denefpas import (
    And,
    Ball,
    DefinableSet,
    DPSyntaxError,
    Not,
    Or,
    Sort,
    SortError,
    enumerate_points,
    evaluate,
    evaluate_ball,
    free_variables,
    parse,
    parse_with_signature,
    print_program,
    to_text,
)
from germlab.localfield import LocalElement, Qp

Q5 = Qp(5, 10)


class TestParse:
    def test_atom_sorts(self):
        f = parse("ord(x) >= 0")
        assert free_variables(f) == {"x": Sort.VF}

    def test_conjunction(self):
        assert isinstance(parse("ac(x) = 1 && ord(x) = 0"), And)

    def test_sort_error(self):
        with pytest.raises(SortError):
            parse("rf y; ord(x) = y")

    def test_syntax_error_position(self):
        with pytest.raises(DPSyntaxError) as e:
            parse("ord(x) >= ")
        assert e.value.pos >= 0

    @pytest.mark.parametrize("text", [
        "ord(x) >= 0",
        "vf x; exists r in RF: r*r = ac(x)",
        "vf x; vf y; !(ord(x - y) >= 2) || ac(x) != 3",
        "vf x; vg n; ord(x) = n && n = 1 mod 2",
        "vf x; exists y in ball(x, 2): ord(y) >= 3",
        "vf x; forall n in [0..3]: ord(x) != n",
    ])
    def test_round_trip(self, text):
        f, sig = parse_with_signature(text)
        g, sig2 = parse_with_signature(print_program(f, sig))
        assert to_text(f) == to_text(g)


class TestEvaluate:
    def test_examples(self):
        assert evaluate(parse("ord(x) >= 1"), {"x": Q5(5)}, Q5)
        assert evaluate(parse("vf x; exists r in RF: r*r = ac(x)"), {"x": Q5(4)}, Q5)
        assert evaluate(parse("ac(x) = 2"), {"x": Q5(2 + 5)}, Q5)

    def test_ball_semantics(self):
        f = parse("ord(x) >= 2")
        assert evaluate_ball(f, {"x": LocalElement.ball(Q5, [0, 0], 2)}, Q5) is True
        assert evaluate_ball(f, {"x": LocalElement.ball(Q5, [0], 1)}, Q5) is None

    @given(st.integers(-200, 200), st.integers(-200, 200))
    def test_de_morgan(self, a, b):
        A, B = parse("ord(x) >= 1"), parse("ac(x) = 2")
        env = {"x": Q5(a + 5 * b)}
        assert evaluate(Not(And(A, B)), env, Q5) == evaluate(Or(Not(A), Not(B)), env, Q5)
        assert evaluate(Not(Or(A, B)), env, Q5) == evaluate(And(Not(A), Not(B)), env, Q5)


class TestEnumerate:
    def test_counts(self):
        U = [Ball.unit(Q5)]
        assert len(enumerate_points(DefinableSet.from_text("ord(x) >= 0"), U, 1, Q5).points) == 5
        assert len(enumerate_points(DefinableSet.from_text("ord(x) = 0"), U, 1, Q5).points) == 4

    def test_stability_flag(self):
        U = [Ball.unit(Q5)]
        S = DefinableSet.from_text("ord(x) >= 2")
        r1 = enumerate_points(S, U, 1, Q5)
        r2 = enumerate_points(S, U, 2, Q5)
        assert (len(r1.points), r1.stable) == (1, False)
        assert (len(r2.points), r2.stable) == (1, True)

    def test_empty_set_is_stable(self):
        S = DefinableSet.from_text("ord(x*x - 5) >= 2")
        for k in (1, 2):
            r = enumerate_points(S, [Ball.unit(Q5)], k, Q5)
            assert r.points == [] and r.stable

    def test_rename_invariance(self):
        S = DefinableSet.from_text("vf x; vf y; ord(x - y) >= 1 && ac(x) = 1")
        T = S.rename({"x": "u", "y": "w"})
        box = [Ball.unit(Q5)] * 2
        a = enumerate_points(S, box, 1, Q5).points
        b = enumerate_points(T, box, 1, Q5).points
        assert a == b

    def test_worker_independence(self):
        S = DefinableSet.from_text("vf x; vf y; ord(x*y) >= 1")
        box = [Ball.unit(Q5)] * 2
        assert enumerate_points(S, box, 1, Q5, workers=1).points == enumerate_points(S, box, 1, Q5, workers=2).points

    def test_monotone_convergence(self):
        S = DefinableSet.from_text("ac(x) = 1")
        vals = [Fraction(len(enumerate_points(S, [Ball.unit(Q5)], k, Q5).points), 5**k) for k in (1, 2, 3)]
        assert vals == [Fraction(1, 5), Fraction(6, 25), Fraction(31, 125)]
        assert vals[0] <= vals[1] <= vals[2] <= Fraction(1, 4)
