"""Measures, integrals and Leray fiber counts over a concrete local field.

Haar measure is normalized by vol(O) = 1 in every coordinate.  ``measure``
and ``integrate`` refine a box into balls and decide each ball with the
ball semantics of :mod:`germlab.denefpas`; only undecided balls are split,
so the decided part is exact.  Whatever is still undecided at the target
depth is extrapolated geometrically from three consecutive depths, and the
result is flagged.  ``leray_fiber_measure`` is the brute-force counter
N_m p^(-(n-1) m) used as an oracle for the sl2 engine.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
import sympy

from .denefpas import Ball, DefinableSet, evaluate, evaluate_ball
from .localfield import EQUAL, MIXED, FieldSpec, LocalElement, PrecisionError, _residue_ring


class InstabilityError(RuntimeError):
    """A value did not stabilize within the depth budget."""


@dataclass(frozen=True)
class IntegralResult:
    value: Fraction
    depth: int
    stable: bool
    field: FieldSpec
    extrapolated: bool = False
    undecided: Fraction = Fraction(0)

    def record(self) -> dict:
        return {"value": frac_str(self.value), "depth": self.depth, "stable": self.stable,
                "extrapolated": self.extrapolated, "field": self.field.name}


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s) -> Fraction:
    return Fraction(str(s))


# --- polynomials -------------------------------------------------------------------


@dataclass(frozen=True)
class Polynomial:
    """Integer polynomial in named variables: {exponent tuple: coefficient}."""

    names: tuple
    terms: tuple  # ((exps, coef), ...)

    @classmethod
    def from_text(cls, text: str, names=None) -> "Polynomial":
        expr = sympy.sympify(text.replace("^", "**"))
        syms = sorted(expr.free_symbols, key=lambda s: s.name) if names is None else [sympy.Symbol(n) for n in names]
        poly = sympy.Poly(expr, *syms) if syms else sympy.Poly(expr, sympy.Symbol("_"))
        terms = []
        for exps, c in poly.terms():
            if not c.is_integer:
                raise ValueError("polynomials must have integer coefficients")
            terms.append((tuple(exps) if syms else (), int(c)))
        return cls(tuple(s.name for s in syms), tuple(sorted(terms)))

    def __call__(self, values: dict) -> LocalElement:
        spec = next(iter(values.values())).spec if values else None
        total = None
        for exps, c in self.terms:
            mono = None
            for n, e in zip(self.names, exps):
                for _ in range(e):
                    mono = values[n] if mono is None else mono * values[n]
            term = spec(c) if mono is None else mono * c
            total = term if total is None else total + term
        return spec.zero() if total is None else total

    def degree_in(self, name: str) -> int:
        i = self.names.index(name)
        return max((exps[i] for exps, _ in self.terms), default=0)

    def split_linear(self, name: str) -> tuple["Polynomial", "Polynomial"]:
        """(A, B) with self = A * name + B, when self is linear in ``name``."""
        if self.degree_in(name) > 1:
            raise ValueError(f"not linear in {name}")
        i = self.names.index(name)
        A, B = [], []
        for exps, c in self.terms:
            e = list(exps)
            if e[i] == 1:
                e[i] = 0
                A.append((tuple(e), c))
            else:
                B.append((exps, c))
        return Polynomial(self.names, tuple(A)), Polynomial(self.names, tuple(B))

    def text(self) -> str:
        expr = 0
        syms = [sympy.Symbol(n) for n in self.names]
        for exps, c in self.terms:
            m = c
            for s, e in zip(syms, exps):
                m *= s**e
            expr += m
        return str(expr).replace("**", "^")


# --- integrands -------------------------------------------------------------------


@dataclass(frozen=True)
class IntegrandTerm:
    """coef * p^(a * ord g(x)) * [x in S]; g = None means the factor 1."""

    coef: Fraction = Fraction(1)
    a: int = 0
    g: Polynomial | None = None
    S: DefinableSet | None = None


@dataclass(frozen=True)
class Integrand:
    terms: tuple = (IntegrandTerm(),)

    @classmethod
    def one(cls) -> "Integrand":
        return cls((IntegrandTerm(),))

    @classmethod
    def indicator(cls, S: DefinableSet) -> "Integrand":
        return cls((IntegrandTerm(S=S),))


def _box_volume(spec: FieldSpec, radii) -> Fraction:
    return Fraction(1, spec.p ** sum(radii)) if all(r >= 0 for r in radii) else Fraction(spec.p) ** (-sum(radii))


def _children(spec: FieldSpec, centers, radii, k):
    """Split every coordinate whose radius is below k by one digit."""
    per = []
    for c, r in zip(centers, radii):
        if r >= k:
            per.append([(c, r)])
        else:
            pr = spec.pi(r)
            per.append([(c + spec(d) * pr if d else c, r + 1) for d in range(spec.p)])
    import itertools

    for combo in itertools.product(*per):
        yield tuple(x for x, _ in combo), tuple(r for _, r in combo)


def _cell_value(spec, S, f: Integrand, names, centers, radii, depth):
    """Exact value of the integrand on a decided cell, or None if undecided."""
    env = {n: c._truncate(r) for n, c, r in zip(names, centers, radii)}
    if S is not None:
        v = evaluate_ball(S.formula, env, spec, depth)
        if v is None:
            return None
        if v is False:
            return Fraction(0)
    total = Fraction(0)
    for t in f.terms:
        if t.S is not None:
            w = evaluate_ball(t.S.formula, env, spec, depth)
            if w is None:
                return None
            if not w:
                continue
        factor = Fraction(1)
        if t.g is not None and t.a != 0:
            gv = t.g(env)
            if gv.is_zero:
                return None
            factor = Fraction(spec.p) ** (t.a * int(gv.valuation))
        total += t.coef * factor
    return total


def _refine_sum(spec, S, f, names, box, k):
    """(decided integral, undecided volume) at depth k."""
    centers = tuple(b.center for b in box)
    radii = tuple(b.radius for b in box)
    decided = Fraction(0)
    undecided = Fraction(0)
    stack = [(centers, radii)]
    while stack:
        cs, rs = stack.pop()
        vol = _box_volume(spec, rs)
        val = _cell_value(spec, S, f, names, cs, rs, k)
        if val is not None:
            decided += val * vol
            continue
        if all(r >= k for r in rs):
            undecided += vol
            continue
        stack.extend(_children(spec, cs, rs, k))
    return decided, undecided


def _check_box(S, box, names):
    if len(box) != len(names):
        raise ValueError(f"box has {len(box)} balls but there are {len(names)} VF variables")


def _extrapolate(spec, S, f, names, box, k) -> IntegralResult:
    """Exact value at the first depth in k..k+3 with nothing undecided, else a geometric limit.

    Decided cells are exact, so once the undecided volume is 0 the value is
    final; the stability flag still compares with the next depth.  When
    undecided volume persists, the increments over four depths must form one
    geometric progression whose ratio matches the undecided volumes; the limit
    is then returned with ``extrapolated`` set.
    """
    vals = []
    for j in range(k, k + 4):
        v, u = _refine_sum(spec, S, f, names, box, j)
        if u == 0:
            nxt, _ = _refine_sum(spec, S, f, names, box, j + 1)
            return IntegralResult(v, j, nxt == v, spec, undecided=vals[0][1] if vals else Fraction(0))
        vals.append((v, u))
    (v0, u0), (v1, u1), (v2, u2), (v3, u3) = vals
    d1, d2, d3 = v1 - v0, v2 - v1, v3 - v2
    geometric = u1 / u0 == u2 / u1 == u3 / u2
    if d1 == 0 and d2 == 0 and d3 == 0:
        return IntegralResult(v0, k, geometric, spec, extrapolated=True, undecided=u0)
    if d1 != 0 and d2 != 0 and d2 / d1 == d3 / d2 and geometric:
        r = d2 / d1
        limit_a = v2 + d2 * r / (1 - r)
        limit_b = v3 + d3 * r / (1 - r)
        return IntegralResult(limit_b, k, limit_a == limit_b, spec, extrapolated=True, undecided=u0)
    return IntegralResult(v3, k + 3, False, spec, extrapolated=True, undecided=u3)


def measure(S: DefinableSet, box, depth: int, field: FieldSpec) -> IntegralResult:
    names = S.vf_vars
    _check_box(S, box, names)
    return _extrapolate(field, S, Integrand.one(), names, box, depth)


def integrate(f: Integrand, S: DefinableSet | None, box, depth: int, field: FieldSpec, names=None) -> IntegralResult:
    if names is None:
        if S is not None:
            names = S.vf_vars
        else:
            names = next(t.S.vf_vars for t in f.terms if t.S is not None)
    _check_box(S, box, names)
    return _extrapolate(field, S, f, names, box, depth)


# --- Leray fiber counting ------------------------------------------------------------------


@dataclass(frozen=True)
class LerayFiberSpec:
    poly: Polynomial
    D: LocalElement
    box: tuple  # Ball per variable, in poly.names order


def _encode(x: LocalElement, m: int) -> int:
    """Residue of an integral element modulo pi^m, digit-encoded."""
    if x.is_zero:
        return 0
    v = int(x.valuation)
    if v < 0:
        raise ValueError("grid values must be integral")
    if v >= m:
        return 0
    p = x.spec.p
    return (x.unit % p ** (m - v)) * p**v


def _ball_residues(spec: FieldSpec, ball: Ball, m: int) -> np.ndarray:
    from .denefpas import coset_points

    if ball.radius < 0 or (not ball.center.is_zero and ball.center.valuation < 0):
        raise ValueError("leray_fiber_measure needs integral boxes")
    pts = coset_points(spec, ball.center, ball.radius, max(m, ball.radius))
    return np.array([_encode(x, m) for x in pts], dtype=np.int64)


def _ord_array(spec: FieldSpec, x: np.ndarray, m: int) -> np.ndarray:
    """ord of encoded residues mod pi^m, capped at m."""
    p = spec.p
    out = np.full(x.shape, m, dtype=np.int64)
    rem = x.copy()
    for i in range(m):
        digit = rem % p
        hit = (digit != 0) & (out == m)
        out[hit] = i
        rem = rem // p
    return out


class _Ring:
    def __init__(self, spec: FieldSpec, m: int):
        self.spec, self.m = spec, m
        _, self.add, self.mul, _ = _residue_ring(spec, m)
        self.const_cache: dict[int, int] = {}

    def const(self, c: int) -> np.int64:
        if c not in self.const_cache:
            self.const_cache[c] = _encode(self.spec(c), self.m)
        return np.int64(self.const_cache[c])

    def neg(self, x):
        return self.mul(self.const(-1), x)

    def poly(self, P: Polynomial, arrays: dict):
        total = None
        for exps, c in P.terms:
            mono = None
            for n, e in zip(P.names, exps):
                for _ in range(e):
                    mono = arrays[n] if mono is None else self.mul(mono, arrays[n])
            term = self.const(c) if mono is None else self.mul(self.const(c), mono)
            total = term if total is None else self.add(total, term)
        return np.int64(0) if total is None else total


def _restrict_mask(restrict: DefinableSet | None, names, grids: dict, mask: np.ndarray, spec: FieldSpec, m: int):
    """Evaluate a definable restriction on the representatives where mask is set."""
    if restrict is None:
        return mask
    used = restrict.vf_vars
    out = mask.copy()
    p = spec.p
    idx = np.nonzero(mask)
    cache: dict = {}
    for flat in zip(*idx):
        key = tuple(int(grids[n][flat]) for n in used)
        if key not in cache:
            env = {}
            for n, code in zip(used, key):
                digits = [(code // p**i) % p for i in range(m)]
                env[n] = LocalElement.from_digits(spec, digits)
            try:
                cache[key] = bool(evaluate(restrict.formula, env, spec))
            except PrecisionError:
                cache[key] = False
        out[flat] = cache[key]
    return out


def _integral_values(spec_f: LerayFiberSpec) -> bool:
    coefs_ok = all(Fraction(c).denominator == 1 for _, c in spec_f.poly.terms)
    balls_ok = all(b.radius >= 0 and (b.center.is_zero or b.center.valuation >= 0) for b in spec_f.box)
    return coefs_ok and balls_ok


def leray_count(spec_f: LerayFiberSpec, restrict: DefinableSet | None, m: int, field: FieldSpec) -> Fraction:
    """N_m p^(-(n-1) m): solutions of c(x) = D mod pi^m on the depth-m grid of the box."""
    P = spec_f.poly
    names = P.names
    n = len(names)
    if len(spec_f.box) != n:
        raise ValueError("one ball per variable required")
    if _integral_values(spec_f) and not spec_f.D.is_zero and spec_f.D.valuation < 0:
        return Fraction(0)  # integral values never reach a non-integral D
    ring = _Ring(field, m)
    Dm = np.int64(_encode(spec_f.D, m)) if not spec_f.D.is_zero or spec_f.D.is_exact_zero else np.int64(0)
    last = names[-1]
    free_last = restrict is None or last not in restrict.vf_vars
    if n >= 2 and P.degree_in(last) <= 1 and free_last:
        # stratify by ord of the coefficient of the last variable
        A, B = P.split_linear(last)
        ball = spec_f.box[-1]
        axes = [_ball_residues(field, b, m) for b in spec_f.box[:-1]]
        mesh = np.meshgrid(*axes, indexing="ij")
        arrays = dict(zip(names[:-1], mesh))
        cn = np.int64(_encode(ball.center, m))
        arrays[last] = np.full(mesh[0].shape, cn, dtype=np.int64)
        Av = ring.poly(A, arrays)
        Bv = ring.poly(B, arrays)  # B' = A c_n + B after substituting x_n = c_n + pi^r y
        Bv = ring.add(ring.mul(Av, arrays[last]), Bv) if A.terms else Bv
        Av = ring.mul(Av, np.int64(_encode(field.pi(ball.radius), m))) if ball.radius else Av
        Av = np.broadcast_to(Av, mesh[0].shape)
        rhs = ring.add(np.broadcast_to(Dm, mesh[0].shape), ring.neg(np.broadcast_to(Bv, mesh[0].shape)))
        v = _ord_array(field, np.asarray(Av), m)
        w = _ord_array(field, np.asarray(rhs), m)
        ok = w >= v
        ok = _restrict_mask(restrict, names[:-1], arrays, ok, field, m)
        counts = np.where(ok, np.power(field.p, np.maximum(v - ball.radius, 0)).astype(object), 0)
        N = int(counts.sum())
    else:
        axes = [_ball_residues(field, b, m) for b in spec_f.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        arrays = dict(zip(names, mesh))
        vals = ring.poly(P, arrays)
        hit = np.asarray(vals == Dm) if np.ndim(vals) else np.full(mesh[0].shape, vals == Dm)
        hit = _restrict_mask(restrict, names, arrays, hit, field, m)
        N = int(hit.sum())
    return Fraction(N, field.p ** ((n - 1) * m))


def leray_fiber_measure(spec_f: LerayFiberSpec, restrict: DefinableSet | None, depth: int, field: FieldSpec) -> IntegralResult:
    a = leray_count(spec_f, restrict, depth, field)
    b = leray_count(spec_f, restrict, depth + 1, field)
    return IntegralResult(a, depth, a == b, field)


@dataclass(frozen=True)
class SingularTail:
    Ms: tuple
    values: tuple  # counts on the box minus the ball ord >= M around the singular point
    increments: tuple
    ratio: Fraction | None
    geometric: bool
    limit: Fraction | None


def singular_tail(spec_f: LerayFiberSpec, depth: int, field: FieldSpec, Ms=(1, 2, 3), center=None,
                  restrict: DefinableSet | None = None) -> SingularTail:
    """Fiber counts with the ball ord >= M around a singular point excluded.

    The excluded count is N(box) - N(center + pi^M O^n), two box counts on
    the fast path.  The tail is accepted when the increments across the M
    values are positive and decrease by one common ratio r < 1; the limit is
    then the last value plus the geometric remainder.  Counts on the ball of
    radius M are trusted only for depth >= 2M - 1, and at least three M
    values are needed to see a ratio.
    """
    if len(Ms) < 3:
        raise ValueError("at least three exclusion radii are needed")
    if depth < 2 * max(Ms) - 1:
        raise ValueError(f"depth {depth} is too shallow for exclusion radius {max(Ms)}")
    n = len(spec_f.poly.names)
    center = center or tuple(field.zero() for _ in range(n))
    total = leray_count(spec_f, restrict, depth, field)
    vals = []
    for M in Ms:
        ball = LerayFiberSpec(spec_f.poly, spec_f.D, tuple(Ball(c, M) for c in center))
        vals.append(total - leray_count(ball, restrict, depth, field))
    inc = tuple(b - a for a, b in zip(vals, vals[1:]))
    ratios = {b / a for a, b in zip(inc, inc[1:]) if a != 0}
    ratio = ratios.pop() if len(ratios) == 1 and all(x != 0 for x in inc) else None
    geometric = ratio is not None and 0 < ratio < 1 and all(x > 0 for x in inc)
    limit = vals[-1] + inc[-1] * ratio / (1 - ratio) if geometric else None
    return SingularTail(tuple(Ms), tuple(vals), inc, ratio, geometric, limit)


# --- transfer comparator -----------------------------------------------------------------------


@dataclass(frozen=True)
class Expression:
    """Integrand + set + box, with the box given field-independently as (digits, radius)."""

    integrand: Integrand
    S: DefinableSet | None
    box: tuple  # ((digits, radius), ...)
    names: tuple | None = None

    def evaluate(self, spec: FieldSpec, depth: int) -> IntegralResult:
        box = [Ball(LocalElement.from_digits(spec, d) if any(d) else spec.zero(), r) for d, r in self.box]
        return integrate(self.integrand, self.S, box, depth, spec, self.names)


@dataclass(frozen=True)
class TransferReport:
    p: int
    depth: int
    value_mixed: object  # Fraction or tuple of Fractions
    value_equal: object
    agree: bool
    label: str = ""

    def record(self) -> dict:
        return {"label": self.label, "p": self.p, "depth": self.depth, "value_mixed": _fmt(self.value_mixed),
                "value_equal": _fmt(self.value_equal), "agree": self.agree}


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    return frac_str(v)


def _exact(v):
    if isinstance(v, (tuple, list)):
        return tuple(_exact(x) for x in v)
    return Fraction(v)


def transfer_compare(expr, p: int, depth: int, label: str = "", precision: int = 24) -> TransferReport:
    """Evaluate one expression over Q_p and F_p((t)) and compare exactly.

    ``expr`` is an :class:`Expression` or any callable ``(spec, depth)``
    returning a rational, a tuple of rationals or an IntegralResult (used for
    orbital-integral quantities).  Disagreement is reported, not raised.
    """
    if p == 2:
        raise ValueError("p = 2 is outside the scope of the comparator")
    out = []
    for spec in (FieldSpec(MIXED, p, precision), FieldSpec(EQUAL, p, precision)):
        r = expr.evaluate(spec, depth) if isinstance(expr, Expression) else expr(spec, depth)
        if isinstance(r, IntegralResult):
            if not r.stable:
                raise InstabilityError(f"unstable value over {spec.name} at depth {depth}")
            r = r.value
        out.append(_exact(r))
    return TransferReport(p, depth, out[0], out[1], out[0] == out[1], label)


def ak_regression_family() -> list[tuple[str, object]]:
    """Ten field-independent expressions: measures, shell integrals, Theta, germs."""
    from .sl2germs import element_with_D, non_norm, shalika_germs, standard_theta
    from .localfield import SquareClass

    def one_var(text):
        return DefinableSet.from_text(text)

    x = Polynomial.from_text("x", ["x"])
    fam = [
        ("measure ord x >= 1", Expression(Integrand.one(), one_var("ord(x) >= 1"), (((0,), 0),))),
        ("measure ac x = 1", Expression(Integrand.one(), one_var("ac(x) = 1"), (((0,), 0),))),
        ("shell p^(ord x) on 1..2", Expression(Integrand((IntegrandTerm(a=1, g=x),)),
                                               one_var("ord(x) >= 1 && ord(x) <= 2"), (((0,), 0),))),
        ("shell p^(-2 ord x) on 0..3", Expression(Integrand((IntegrandTerm(a=-2, g=x),)),
                                                  one_var("ord(x) <= 3"), (((0,), 0),))),
    ]

    def theta_entries(spec, depth):
        return tuple(e for row in standard_theta(spec).rows() for e in row)

    fam.append(("Theta entries", theta_entries))

    def germ_expr(tau: SquareClass, v: int, rational_class: str):
        def run(spec, depth):
            unit = spec.one() + spec.pi()
            D = -(tau.representative(spec) * unit).shift(v - int(tau.odd))
            cls = SquareClass.ONE if rational_class == "norm" or tau is SquareClass.ONE else non_norm(D)
            return shalika_germs(element_with_D(D, cls), standard_theta(spec)).germs

        return run

    for tau, v, rc in [(SquareClass.ONE, 2, "norm"), (SquareClass.U, 2, "norm"), (SquareClass.U, 4, "non-norm"),
                       (SquareClass.PI, 1, "non-norm"), (SquareClass.UPI, 3, "norm")]:
        fam.append((f"germs tau={tau.value} ord D={v} {rc}", germ_expr(tau, v, rc)))
    return fam


def ak_compare(p: int, depth: int = 3) -> list[TransferReport]:
    return [transfer_compare(e, p, depth, label) for label, e in ak_regression_family()]


# --- asymptotic vanishing ------------------------------------------------------------------------


@dataclass(frozen=True)
class VanishingReport:
    first_nonzero: int | None
    values: dict

    @property
    def vanishes(self) -> bool:
        return self.first_nonzero is None


def asymptotic_vanishing_check(family: Callable[[int], Fraction | IntegralResult], a_range) -> VanishingReport:
    """Scan a over the range; report the first a with a nonzero (stable) value.

    ``family(a)`` integrates the fixed integrand against the truncation 1_a.
    """
    values = {}
    first = None
    for a in a_range:
        r = family(a)
        if isinstance(r, IntegralResult):
            if not r.stable:
                raise InstabilityError(f"unstable value at a = {a}")
            r = r.value
        values[a] = Fraction(r)
        if r != 0 and first is None:
            first = a
    return VanishingReport(first, values)


def truncated_family(f: Integrand, S: DefinableSet, box, depth: int, spec: FieldSpec, truncation: Callable[[int], DefinableSet]):
    """a -> integral of f over S intersected with the truncation set 1_a."""
    from .denefpas import And

    def run(a: int):
        T = truncation(a)
        both = DefinableSet(And(S.formula, T.formula), S.signature)
        return integrate(f, both, box, depth, spec)

    return run


# --- JSON experiment configs ---------------------------------------------------------------------


def spec_from_config(cfg: dict) -> FieldSpec:
    kind = {"qp": MIXED, "mixed": MIXED, "fpt": EQUAL, "equal": EQUAL}[cfg.get("field", "qp")]
    return FieldSpec(kind, int(cfg["p"]), int(cfg.get("precision", 24)))


def run_config(cfg: dict | str | Path, base: Path | None = None) -> dict:
    """Run a measure/integral experiment described in JSON; returns a result record."""
    if not isinstance(cfg, dict):
        path = Path(cfg)
        base = path.parent
        cfg = json.loads(path.read_text(encoding="utf-8"))
    base = base or Path(".")
    spec = spec_from_config(cfg)
    if "formula_file" in cfg:
        S = DefinableSet.from_file(base / cfg["formula_file"])
    else:
        S = DefinableSet.from_text(cfg["formula"])
    box = [Ball(spec(b.get("center", 0)), int(b.get("radius", 0))) for b in cfg.get("box", [{}] * len(S.vf_vars))]
    terms = []
    for t in cfg.get("integrand", [{"coef": "1"}]):
        g = Polynomial.from_text(t["g"], S.vf_vars) if t.get("g") else None
        T = DefinableSet.from_text(t["set"]) if t.get("set") else None
        terms.append(IntegrandTerm(parse_frac(t.get("coef", "1")), int(t.get("a", 0)), g, T))
    res = integrate(Integrand(tuple(terms)), S, box, int(cfg.get("depth", 3)), spec)
    return res.record()


def write_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: frac_str(v) if isinstance(v, Fraction) else v for k, v in r.items()})
    return buf.getvalue()
