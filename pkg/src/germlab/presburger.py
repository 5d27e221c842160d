"""Piecewise exponential polynomials t -> sum c t^k q^(l t) on Presburger pieces.

Terms are keyed by (k, l); the canonical form drops zero coefficients and
merges equal keys, so the zero function is the empty term list.  Dominance
order is lexicographic on (l, k), largest first: for q >= 2 a larger l
always wins eventually, and for equal l a larger power of t does.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

INF = math.inf


class PresburgerError(ValueError):
    pass


@dataclass(frozen=True)
class ExpPoly:
    """Canonical sum of c * t^k * q^(l t); ``terms`` maps (k, l) -> c (sorted)."""

    terms: tuple = ()

    @classmethod
    def make(cls, items: Iterable) -> "ExpPoly":
        acc: dict[tuple[int, int], Fraction] = {}
        for c, k, l in items:
            if k < 0:
                raise PresburgerError("powers of t must be nonnegative")
            key = (int(k), int(l))
            acc[key] = acc.get(key, Fraction(0)) + Fraction(c)
        return cls(tuple(sorted(((k, l, c) for (k, l), c in acc.items() if c != 0), key=lambda x: (-x[1], -x[0]))))

    @classmethod
    def const(cls, c) -> "ExpPoly":
        return cls.make([(c, 0, 0)])

    @classmethod
    def t(cls) -> "ExpPoly":
        return cls.make([(1, 1, 0)])

    @classmethod
    def qt(cls, l: int = 1) -> "ExpPoly":
        return cls.make([(1, 0, l)])

    def items(self):
        """(c, k, l) triples in dominance order."""
        return [(c, k, l) for k, l, c in self.terms]

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, o: "ExpPoly") -> "ExpPoly":
        return ExpPoly.make(self.items() + _coerce(o).items())

    __radd__ = __add__

    def __neg__(self) -> "ExpPoly":
        return ExpPoly.make([(-c, k, l) for c, k, l in self.items()])

    def __sub__(self, o) -> "ExpPoly":
        return self + (-_coerce(o))

    def __rsub__(self, o) -> "ExpPoly":
        return _coerce(o) - self

    def __mul__(self, o) -> "ExpPoly":
        o = _coerce(o)
        return ExpPoly.make([(c1 * c2, k1 + k2, l1 + l2) for c1, k1, l1 in self.items() for c2, k2, l2 in o.items()])

    __rmul__ = __mul__

    def __call__(self, q: int, t: int) -> Fraction:
        return specialize(self, q, t)

    def __str__(self) -> str:
        return format_exppoly(self)


def _coerce(x) -> ExpPoly:
    if isinstance(x, ExpPoly):
        return x
    return ExpPoly.const(Fraction(x))


def specialize(f: ExpPoly, q: int, t: int) -> Fraction:
    if q < 2:
        raise PresburgerError("q must be >= 2")
    total = Fraction(0)
    for c, k, l in f.items():
        total += c * Fraction(t) ** k * Fraction(q) ** (l * t)
    return total


def zero_set_bounded(f: ExpPoly, q: int, lo: int, hi: int) -> list[int]:
    """Every t in [lo, hi] with f(t) = 0, by exact evaluation."""
    if q < 2:
        raise PresburgerError("q must be >= 2")
    return [t for t in range(lo, hi + 1) if specialize(f, q, t) == 0]


def uniform_tail_bound(f: ExpPoly, q: int) -> int:
    """a0 >= 0 such that the dominant term outweighs all others for every t >= a0.

    With the dominant term c0 t^k0 q^(l0 t), each other term satisfies
    |c t^k q^(l t)| <= |c| t^k q^(l t) and the ratio to the dominant term is
    nonincreasing once t is past a computable threshold, so checking the
    strict inequality at one t beyond every threshold proves it for the tail.
    """
    if f.is_zero:
        raise PresburgerError("the zero function has no tail bound")
    if q < 2:
        raise PresburgerError("q must be >= 2")
    items = f.items()
    c0, k0, l0 = items[0]
    rest = items[1:]
    floor = 1 if any(k for _, k, _ in items) else 0  # t^k vanishes at t = 0
    # ratio r_j(t) = t^(k - k0) q^((l - l0) t) is nonincreasing for t >= T_j
    T = floor
    for c, k, l in rest:
        if l < l0 and k > k0:
            # d/dt [(k-k0) ln t + (l-l0) t ln q] <= 0  iff  t >= (k-k0) / ((l0-l) ln q)
            T = max(T, math.ceil((k - k0) / ((l0 - l) * math.log(q))) + 1)
        else:
            T = max(T, 1)

    def dominates(t: int) -> bool:
        dom = abs(c0) * Fraction(t) ** k0 * Fraction(q) ** (l0 * t)
        others = sum((abs(c) * Fraction(t) ** k * Fraction(q) ** (l * t) for c, k, l in rest), Fraction(0))
        return dom > others

    t = T
    while not dominates(t):
        t += 1
        if t > 10_000:
            raise PresburgerError("no tail bound found below 10000")
    # past t the ratio sum only decreases; walk down while exact checks still hold
    while t - 1 >= floor and dominates(t - 1):
        t -= 1
    return t


def tail_bound_holds(f: ExpPoly, q: int, a0: int, span: int = 500) -> bool:
    return not zero_set_bounded(f, q, a0, a0 + span)


# --- pieces -----------------------------------------------------------------------------


@dataclass(frozen=True)
class PresburgerPiece:
    """{t : lo <= t <= hi, t = residue mod modulus}; hi = INF for a right ray."""

    lo: int
    hi: float
    modulus: int = 1
    residue: int = 0

    def __post_init__(self):
        if self.modulus < 1:
            raise PresburgerError("modulus must be positive")
        object.__setattr__(self, "residue", self.residue % self.modulus)

    @property
    def bounded(self) -> bool:
        return self.hi != INF

    def __contains__(self, t: int) -> bool:
        return self.lo <= t <= self.hi and t % self.modulus == self.residue

    def intersect(self, o: "PresburgerPiece") -> "PresburgerPiece | None":
        lo, hi = max(self.lo, o.lo), min(self.hi, o.hi)
        if lo > hi:
            return None
        m = math.lcm(self.modulus, o.modulus)
        for r in range(m):
            if r % self.modulus == self.residue and r % o.modulus == o.residue:
                return PresburgerPiece(lo, hi, m, r)
        return None

    def __str__(self) -> str:
        hi = "" if self.hi == INF else str(int(self.hi))
        close = ")" if self.hi == INF else "]"
        s = f"[{self.lo}..{hi}{close}"
        if self.modulus != 1:
            s += f" mod {self.modulus}" + (f" = {self.residue}" if self.residue else "")
        return s


def parse_piece(text: str) -> PresburgerPiece:
    m = re.fullmatch(r"\s*\[\s*(-?\d+)\s*\.\.\s*(-?\d+)?\s*([\])])\s*(?:mod\s+(\d+)(?:\s*=\s*(\d+))?)?\s*", text)
    if not m:
        raise PresburgerError(f"bad piece {text!r}")
    lo = int(m.group(1))
    if m.group(3) == ")":
        if m.group(2) is not None:
            raise PresburgerError("a ray is written [a..)")
        hi = INF
    else:
        if m.group(2) is None:
            raise PresburgerError("a bounded piece needs an upper end")
        hi = int(m.group(2))
    if hi != INF and hi < lo:
        raise PresburgerError("empty piece")
    if hi == INF and lo < 0:
        raise PresburgerError("rays start at a nonnegative integer")
    return PresburgerPiece(lo, hi, int(m.group(4) or 1), int(m.group(5) or 0))


@dataclass(frozen=True)
class PiecewiseExpPoly:
    pieces: tuple  # ((PresburgerPiece, ExpPoly), ...)

    def __post_init__(self):
        ps = [p for p, _ in self.pieces]
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                if ps[i].intersect(ps[j]) is not None:
                    raise PresburgerError(f"pieces {ps[i]} and {ps[j]} overlap")

    @classmethod
    def on_ray(cls, f: ExpPoly, a: int = 0) -> "PiecewiseExpPoly":
        return cls(((PresburgerPiece(a, INF), f),))

    def piece_of(self, t: int):
        for p, f in self.pieces:
            if t in p:
                return f
        return None

    def __call__(self, q: int, t: int) -> Fraction:
        f = self.piece_of(t)
        if f is None:
            raise PresburgerError(f"t = {t} outside the domain")
        return specialize(f, q, t)

    def _combine(self, o: "PiecewiseExpPoly", op) -> "PiecewiseExpPoly":
        out = []
        for p1, f1 in self.pieces:
            for p2, f2 in o.pieces:
                p = p1.intersect(p2)
                if p is not None:
                    out.append((p, op(f1, f2)))
        return PiecewiseExpPoly(tuple(out))

    def __add__(self, o):
        return self._combine(o, lambda a, b: a + b)

    def __mul__(self, o):
        return self._combine(o, lambda a, b: a * b)

    @property
    def unbounded_parts(self):
        return [(p, f) for p, f in self.pieces if not p.bounded]

    def __str__(self) -> str:
        return "; ".join(f"{p}: {format_exppoly(f)}" for p, f in self.pieces)


def add(f, g):
    return f + g


def mul(f, g):
    return f * g


def is_eventually_zero(f) -> bool:
    """True iff every unbounded piece carries the zero function."""
    if isinstance(f, ExpPoly):
        return f.is_zero
    rays = f.unbounded_parts
    if not rays:
        raise PresburgerError("a bounded domain has no tail")
    return all(g.is_zero for _, g in rays)


# --- text form ------------------------------------------------------------------------------


def _fmt_coef(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_exppoly(f: ExpPoly) -> str:
    if f.is_zero:
        return "0"
    parts = []
    for c, k, l in f.items():
        factors = []
        if k:
            factors.append("t" if k == 1 else f"t^{k}")
        if l:
            factors.append("q^t" if l == 1 else f"q^({l}*t)")
        if not factors:
            body = _fmt_coef(abs(c))
        elif abs(c) == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_fmt_coef(abs(c))] + factors)
        parts.append(("-" if c < 0 else "+", body))
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


_FACTOR = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)|t(?:\^(?P<tk>\d+))?|q\^\(\s*(?P<l>[-−]?\d+)\s*\*\s*t\s*\)|q\^t)\s*"
)


def parse_exppoly(text: str) -> ExpPoly:
    """Parse ``3*t^2*q^(−1*t) + 1/2*q^(2*t) - t``."""
    s = text.replace("−", "-").strip()
    if s in ("", "0"):
        return ExpPoly()
    terms = []
    i = 0
    sign = 1
    # split on top-level + and - (not inside parentheses)
    chunks = []
    depth = 0
    cur = ""
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+-" and depth == 0:
            if cur.strip():
                chunks.append((sign, cur))
            elif cur.strip() == "" and chunks == [] and ch == "-":
                pass
            sign = 1 if ch == "+" else -1
            cur = ""
            continue
        cur += ch
    if cur.strip():
        chunks.append((sign, cur))
    for sign, chunk in chunks:
        c, k, l = Fraction(sign), 0, 0
        for factor in chunk.split("*"):
            factor = factor.strip()
            if not factor:
                continue
            if re.fullmatch(r"\d+(/\d+)?", factor):
                c *= Fraction(factor)
            elif re.fullmatch(r"t(\^\d+)?", factor):
                k += int(factor[2:]) if "^" in factor else 1
            elif factor == "q^t":
                l += 1
            elif factor.startswith("q^("):
                m = re.fullmatch(r"q\^\(\s*(-?\d+)", factor)
                if not m:
                    raise PresburgerError(f"bad factor {factor!r}")
                l += int(m.group(1))
            elif factor == "t)":
                continue
            else:
                raise PresburgerError(f"bad factor {factor!r}")
        terms.append((c, k, l))
    return ExpPoly.make(terms)


def parse_piecewise(text: str) -> PiecewiseExpPoly:
    """``[0..4] mod 2: t^2; [0..) mod 2 = 1: q^t - 1`` style definitions."""
    out = []
    for part in text.split(";"):
        if not part.strip():
            continue
        piece, _, body = part.partition(":")
        out.append((parse_piece(piece), parse_exppoly(body)))
    return PiecewiseExpPoly(tuple(out))
