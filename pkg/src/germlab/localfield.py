"""Finite-precision arithmetic in Q_p and F_p((t)).

Elements use capped relative precision: a nonzero element is
``pi^v * (d_0 + d_1 pi + ... + d_{n-1} pi^{n-1}) + O(pi^{v+n})`` with
``d_0 != 0`` and ``n <= N``.  A zero carries its absolute precision, so an
element that cancelled to nothing is an *inexact* zero and asking for its
valuation raises :class:`PrecisionError` instead of guessing.

The unit part is stored as the integer ``sum d_i p^i`` in both
characteristics; only the arithmetic on it differs (carries in Q_p,
digitwise mod p in F_p[[t]]).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

INF = math.inf

MIXED = "mixed"
EQUAL = "equal"


class LocalFieldError(ValueError):
    """Bad input to a local-field operation."""


class PrecisionError(ArithmeticError):
    """A quantity is not determined at the available precision."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


@lru_cache(maxsize=None)
def _squares_mod(p: int) -> frozenset:
    return frozenset((x * x) % p for x in range(1, p))


def legendre(d: int, p: int) -> int:
    d %= p
    if d == 0:
        return 0
    return 1 if d in _squares_mod(p) else -1


@lru_cache(maxsize=None)
def smallest_nonresidue(p: int) -> int:
    return next(d for d in range(2, p) if legendre(d, p) == -1)


@dataclass(frozen=True)
class FieldSpec:
    """Q_p (``kind='mixed'``) or F_p((t)) (``kind='equal'``) with N stored digits."""

    kind: str
    p: int
    precision: int = 30

    def __post_init__(self) -> None:
        if self.kind not in (MIXED, EQUAL):
            raise LocalFieldError(f"unknown field kind {self.kind!r}")
        if not is_prime(self.p):
            raise LocalFieldError(f"p={self.p} is not prime")
        if self.p == 2:
            raise LocalFieldError("p = 2 is not supported")
        if self.precision < 2:
            raise LocalFieldError("precision must be at least 2")

    @property
    def symbol(self) -> str:
        return str(self.p) if self.kind == MIXED else "t"

    @property
    def name(self) -> str:
        return f"Q_{self.p}" if self.kind == MIXED else f"F_{self.p}((t))"

    @property
    def nonsquare(self) -> int:
        """Smallest positive integer that is a nonresidue mod p."""
        return smallest_nonresidue(self.p)

    def with_precision(self, n: int) -> "FieldSpec":
        return FieldSpec(self.kind, self.p, n)

    def require_endoscopic(self) -> None:
        if self.p < 5:
            raise LocalFieldError("endoscopy-facing operations need p >= 5")

    # convenience constructors
    def __call__(self, x) -> "LocalElement":
        return LocalElement.coerce(self, x)

    def zero(self) -> "LocalElement":
        return LocalElement(self, INF, 0, INF)

    def one(self) -> "LocalElement":
        return LocalElement.from_int(self, 1)

    def pi(self, k: int = 1) -> "LocalElement":
        return LocalElement(self, k, 1, k + self.precision)


def Qp(p: int, precision: int = 30) -> FieldSpec:
    return FieldSpec(MIXED, p, precision)


def Fpt(p: int, precision: int = 30) -> FieldSpec:
    return FieldSpec(EQUAL, p, precision)


# --- unit-part arithmetic on length-n truncations -------------------------


def _to_digits(x: int, p: int, n: int) -> list[int]:
    out = []
    for _ in range(n):
        x, r = divmod(x, p)
        out.append(r)
    return out


def _from_digits(ds, p: int) -> int:
    x = 0
    for d in reversed(ds):
        x = x * p + d
    return x


def _add(kind: str, p: int, x: int, y: int, n: int) -> int:
    if kind == MIXED:
        return (x + y) % p**n
    a, b = _to_digits(x, p, n), _to_digits(y, p, n)
    return _from_digits([(u + v) % p for u, v in zip(a, b)], p)


def _neg(kind: str, p: int, x: int, n: int) -> int:
    if kind == MIXED:
        return (-x) % p**n
    return _from_digits([(-u) % p for u in _to_digits(x, p, n)], p)


def _mul(kind: str, p: int, x: int, y: int, n: int) -> int:
    if kind == MIXED:
        return (x * y) % p**n
    # Kronecker substitution: pack digits into wide slots, one big-int product.
    bits = (n * (p - 1) ** 2).bit_length() + 1
    a, b = _to_digits(x, p, n), _to_digits(y, p, n)
    pa = pb = 0
    for d in reversed(a):
        pa = (pa << bits) | d
    for d in reversed(b):
        pb = (pb << bits) | d
    prod = pa * pb
    mask = (1 << bits) - 1
    out = []
    for _ in range(n):
        out.append((prod & mask) % p)
        prod >>= bits
    return _from_digits(out, p)


def _inv(kind: str, p: int, x: int, n: int) -> int:
    if kind == MIXED:
        return pow(x, -1, p**n)
    a = _to_digits(x, p, n)
    inv0 = pow(a[0], -1, p)
    out = [0] * n
    # long division of 1 by a(t) in F_p[[t]]
    rem = [1] + [0] * (n - 1)
    for i in range(n):
        c = (rem[i] * inv0) % p
        out[i] = c
        if c:
            for j in range(i, n):
                rem[j] = (rem[j] - c * a[j - i]) % p
    return _from_digits(out, p)


def _shift(p: int, x: int, k: int) -> int:
    return x * p**k


def _ord_int(x: int, p: int) -> int:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


class SquareClass(Enum):
    """The four classes of F^x / F^x2 for odd residue characteristic."""

    ONE = "1"
    U = "u"
    PI = "pi"
    UPI = "upi"

    @property
    def odd(self) -> bool:
        return self in (SquareClass.PI, SquareClass.UPI)

    @property
    def nonsquare_unit(self) -> bool:
        return self in (SquareClass.U, SquareClass.UPI)

    @classmethod
    def of(cls, nonsquare_unit: bool, odd: bool) -> "SquareClass":
        return [[cls.ONE, cls.PI], [cls.U, cls.UPI]][int(nonsquare_unit)][int(odd)]

    def __mul__(self, other: "SquareClass") -> "SquareClass":
        return SquareClass.of(
            self.nonsquare_unit != other.nonsquare_unit, self.odd != other.odd
        )

    def representative(self, spec: FieldSpec) -> "LocalElement":
        u = LocalElement.from_int(spec, spec.nonsquare if self.nonsquare_unit else 1)
        return u * spec.pi() if self.odd else u

    @property
    def order_key(self) -> int:
        return ORDERED_CLASSES.index(self)


ORDERED_CLASSES = (SquareClass.ONE, SquareClass.U, SquareClass.PI, SquareClass.UPI)


@dataclass(frozen=True, eq=True)
class LocalElement:
    """Element of Q_p or F_p((t)) known modulo pi^absprec.

    ``valuation`` is ``INF`` for zeros; ``unit`` is the digit-encoded unit part
    (``unit % p != 0`` for nonzero elements).  Exact zero has ``absprec = INF``.
    """

    spec: FieldSpec
    valuation: float
    unit: int
    absprec: float

    # --- construction ---------------------------------------------------

    @classmethod
    def from_int(cls, spec: FieldSpec, n: int) -> "LocalElement":
        p, N = spec.p, spec.precision
        if spec.kind == EQUAL:
            n %= p
        if n == 0:
            return spec.zero()
        v = _ord_int(n, p)
        return cls(spec, v, (n // p**v) % p**N, v + N)

    @classmethod
    def from_fraction(cls, spec: FieldSpec, q: Fraction) -> "LocalElement":
        q = Fraction(q)
        num = cls.from_int(spec, q.numerator)
        if q.denominator == 1:
            return num
        den = cls.from_int(spec, q.denominator)
        if den.is_zero:
            raise LocalFieldError(f"{q} has denominator divisible by p in {spec.name}")
        return num / den

    @classmethod
    def from_digits(
        cls, spec: FieldSpec, digits, valuation: int = 0, prec: int | None = None
    ) -> "LocalElement":
        """``pi^valuation * sum digits[i] pi^i``, known to ``prec`` digits.

        ``prec=None`` pads to the full budget N (the digits are exact).
        """
        ds = [int(d) % spec.p for d in digits]
        if any(d != int(e) for d, e in zip(ds, digits)):
            raise LocalFieldError("digits must lie in 0..p-1")
        n = len(ds) if prec is None else prec
        if prec is None:
            exact = True
        else:
            exact = False
            if prec < len(ds):
                raise LocalFieldError("more digits than declared precision")
        k = next((i for i, d in enumerate(ds) if d), None)
        if k is None:
            if exact:
                return spec.zero()
            return cls(spec, INF, 0, valuation + n)
        ds = ds[k:]
        v = valuation + k
        rel = spec.precision if exact else min(n - k, spec.precision)
        ds = (ds + [0] * rel)[:rel]
        return cls(spec, v, _from_digits(ds, spec.p), v + rel)

    @classmethod
    def ball(cls, spec: FieldSpec, digits, radius: int) -> "LocalElement":
        """The coset ``sum digits[i] pi^i + pi^radius O`` as an element."""
        ds = list(digits)[:radius]
        return cls.from_digits(spec, ds + [0] * (radius - len(ds)), 0, prec=radius)

    @classmethod
    def coerce(cls, spec: FieldSpec, x) -> "LocalElement":
        if isinstance(x, LocalElement):
            if x.spec != spec:
                raise LocalFieldError(f"field mismatch: {x.spec.name} vs {spec.name}")
            return x
        if isinstance(x, bool):
            raise TypeError("bool is not a field element")
        if isinstance(x, int):
            return cls.from_int(spec, x)
        if isinstance(x, Fraction):
            return cls.from_fraction(spec, x)
        if isinstance(x, str):
            return parse_element(x, spec)
        raise TypeError(f"cannot coerce {type(x).__name__} to a local field element")

    # --- basic properties -------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    @property
    def is_exact_zero(self) -> bool:
        return self.unit == 0 and self.absprec == INF

    @property
    def precision(self) -> int:
        """Effective relative precision (number of known digits)."""
        return 0 if self.is_zero else int(self.absprec - self.valuation)

    @property
    def digits(self) -> tuple[int, ...]:
        return tuple(_to_digits(self.unit, self.spec.p, self.precision))

    def ord(self) -> float:
        if self.is_zero and self.absprec != INF:
            raise PrecisionError(
                f"valuation of O({self.spec.symbol}^{self.absprec}) is undetermined"
            )
        return self.valuation

    def ord_lower(self) -> float:
        """A lower bound for ord that is always available."""
        return self.absprec if self.is_zero else self.valuation

    def ac(self) -> int:
        if self.is_zero:
            if self.absprec != INF:
                raise PrecisionError("angular component of an inexact zero")
            return 0
        return self.unit % self.spec.p

    def is_integral(self) -> bool:
        return self.ord_lower() >= 0

    # --- arithmetic -------------------------------------------------------

    def _check(self, other) -> "LocalElement":
        other = LocalElement.coerce(self.spec, other) if not isinstance(
            other, LocalElement
        ) else other
        if other.spec != self.spec:
            raise LocalFieldError(f"field mismatch: {self.spec.name} vs {other.spec.name}")
        return other

    def _make(self, v: int, unit_at_v: int, absprec: float) -> "LocalElement":
        """Normalize ``pi^v * unit_at_v + O(pi^absprec)`` (unit may be divisible by p)."""
        spec = self.spec
        p = spec.p
        n = absprec - v
        if unit_at_v == 0 or n <= 0:
            return LocalElement(spec, INF, 0, absprec)
        k = _ord_int(unit_at_v, p)
        if k >= n:
            return LocalElement(spec, INF, 0, absprec)
        v2 = v + k
        rel = min(int(absprec - v2), spec.precision)
        u = (unit_at_v // p**k) % p**rel
        return LocalElement(spec, v2, u, v2 + rel)

    def __add__(self, other) -> "LocalElement":
        other = self._check(other)
        if self.is_exact_zero:
            return other
        if other.is_exact_zero:
            return self
        A = min(self.absprec, other.absprec)
        if self.is_zero and other.is_zero:
            return LocalElement(self.spec, INF, 0, A)
        if self.is_zero:
            return other._truncate(A)
        if other.is_zero:
            return self._truncate(A)
        m = int(min(self.valuation, other.valuation))
        n = int(A - m)
        if n <= 0:
            return LocalElement(self.spec, INF, 0, A)
        p, kind = self.spec.p, self.spec.kind
        x = _shift(p, self.unit, int(self.valuation) - m) % p**n
        y = _shift(p, other.unit, int(other.valuation) - m) % p**n
        return self._make(m, _add(kind, p, x, y, n), A)

    __radd__ = __add__

    def _truncate(self, absprec: float) -> "LocalElement":
        if absprec >= self.absprec:
            return self
        if self.is_zero:
            return LocalElement(self.spec, INF, 0, absprec)
        n = int(absprec - self.valuation)
        if n <= 0:
            return LocalElement(self.spec, INF, 0, absprec)
        return LocalElement(self.spec, self.valuation, self.unit % self.spec.p**n, absprec)

    def __neg__(self) -> "LocalElement":
        if self.is_zero:
            return self
        n = self.precision
        return LocalElement(
            self.spec, self.valuation, _neg(self.spec.kind, self.spec.p, self.unit, n), self.absprec
        )

    def __sub__(self, other) -> "LocalElement":
        return self + (-self._check(other))

    def __rsub__(self, other) -> "LocalElement":
        return self._check(other) - self

    def __mul__(self, other) -> "LocalElement":
        other = self._check(other)
        if self.is_exact_zero or other.is_exact_zero:
            return self.spec.zero()
        if self.is_zero or other.is_zero:
            return LocalElement(self.spec, INF, 0, self.ord_lower() + other.ord_lower())
        n = min(self.precision, other.precision)
        v = self.valuation + other.valuation
        u = _mul(self.spec.kind, self.spec.p, self.unit, other.unit, n)
        return LocalElement(self.spec, v, u, v + n)

    __rmul__ = __mul__

    def inverse(self) -> "LocalElement":
        if self.is_zero:
            raise ZeroDivisionError("inversion of zero")
        n = self.precision
        return LocalElement(
            self.spec, -self.valuation, _inv(self.spec.kind, self.spec.p, self.unit, n),
            -self.valuation + n,
        )

    def __truediv__(self, other) -> "LocalElement":
        return self * self._check(other).inverse()

    def __rtruediv__(self, other) -> "LocalElement":
        return self._check(other) * self.inverse()

    def __pow__(self, k: int) -> "LocalElement":
        if k < 0:
            return self.inverse() ** (-k)
        out = self.spec.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def shift(self, k: int) -> "LocalElement":
        """Multiply by pi^k exactly."""
        if self.is_exact_zero:
            return self
        if self.is_zero:
            return LocalElement(self.spec, INF, 0, self.absprec + k)
        return LocalElement(self.spec, self.valuation + k, self.unit, self.absprec + k)

    def unit_part(self) -> "LocalElement":
        return self.shift(-int(self.ord()))

    def agrees_with(self, other, absprec: int) -> bool:
        """True iff ``self == other mod pi^absprec`` (raises if undecidable)."""
        d = self - other
        if d.is_zero:
            if d.absprec < absprec:
                raise PrecisionError("comparison at insufficient precision")
            return True
        return d.valuation >= absprec

    def __str__(self) -> str:
        return format_element(self)

    def __repr__(self) -> str:
        return f"LocalElement<{self.spec.name}>({format_element(self)})"

    # --- square classes, roots, symbols ------------------------------------

    def square_class(self) -> SquareClass:
        if self.is_zero:
            raise LocalFieldError("square class of zero")
        v = int(self.valuation)
        return SquareClass.of(legendre(self.ac(), self.spec.p) == -1, v % 2 == 1)

    def sqrt(self) -> "LocalElement":
        return sqrt(self)


def sqrt(a: LocalElement) -> LocalElement:
    """Square root by Newton iteration; root with ac in 1..(p-1)/2."""
    spec = a.spec
    p = spec.p
    if a.is_zero:
        if a.is_exact_zero:
            return a
        raise PrecisionError("square root of an inexact zero")
    v = int(a.valuation)
    if v % 2:
        raise LocalFieldError("square root: odd valuation")
    d = a.ac()
    if legendre(d, p) != 1:
        raise LocalFieldError("square root: leading digit is a nonresidue")
    n = a.precision
    r0 = next(r for r in range(1, (p - 1) // 2 + 1) if (r * r - d) % p == 0)
    kind = spec.kind
    u = a.unit
    r = r0
    half = _inv(kind, p, 2 % p**n, n) if kind == MIXED else _inv(kind, p, 2 % p, n)
    k = 1
    while k < n:
        k = min(2 * k, n)
        # r <- (r + u/r) / 2 at precision k
        ur = _mul(kind, p, u % p**k, _inv(kind, p, r % p**k, k), k)
        r = _mul(kind, p, _add(kind, p, r % p**k, ur, k), half % p**k, k)
    return LocalElement(spec, v // 2, r % p**n, v // 2 + n)


def hilbert_symbol(a: LocalElement, b: LocalElement) -> int:
    """(a, b) for odd residue characteristic via the tame symbol."""
    if a.spec != b.spec:
        raise LocalFieldError("field mismatch")
    if a.is_zero or b.is_zero:
        raise LocalFieldError("Hilbert symbol needs nonzero arguments")
    p = a.spec.p
    al, be = int(a.ord()), int(b.ord())
    c = pow(-1, al * be) * pow(a.ac(), be % (p - 1), p) * pow(pow(b.ac(), -1, p), al % (p - 1), p)
    return legendre(c, p)


def _residue_ring(spec: FieldSpec, depth: int):
    """Vectorized arithmetic on all residues modulo pi^depth (digit-encoded ints)."""
    p = spec.p
    mod = p**depth
    allx = np.arange(mod, dtype=np.int64)
    digits = np.stack([(allx // p**i) % p for i in range(depth)], axis=-1)
    weights = p ** np.arange(depth, dtype=np.int64)

    def enc(ds):
        return (ds % p) @ weights

    def dec(x):
        x = np.asarray(x, dtype=np.int64)
        return np.stack([(x // p**i) % p for i in range(depth)], axis=-1)

    if spec.kind == MIXED:
        def add(x, y):
            return (x + y) % mod

        def mul(x, y):
            return (x * y) % mod
    else:
        def add(x, y):
            return enc(dec(x) + dec(y))

        def mul(x, y):
            a, b = dec(x), dec(y)
            out = np.zeros(np.broadcast(x, y).shape + (depth,), dtype=np.int64)
            for i in range(depth):
                for j in range(depth - i):
                    out[..., i + j] += a[..., i] * b[..., j]
            return enc(out)

    return allx, add, mul, digits


def hilbert_symbol_bruteforce(a: LocalElement, b: LocalElement, depth: int = 3) -> int:
    """Independent check: search primitive solutions of z^2 = a x^2 + b y^2.

    Arguments are first reduced to square-class representatives (ord 0 or 1);
    a primitive solution modulo pi^depth with depth >= 3 then lifts.
    """
    spec = a.spec
    p = spec.p
    ra = a.square_class().representative(spec)
    rb = b.square_class().representative(spec)

    def enc(x: LocalElement) -> int:
        return 0 if x.is_zero else (x.unit * p ** int(x.valuation)) % p**depth

    allx, add, mul, _ = _residue_ring(spec, depth)
    squares = np.zeros(p**depth, dtype=bool)
    squares[mul(allx, allx)] = True
    ax2 = mul(np.int64(enc(ra)), mul(allx, allx))
    by2 = mul(np.int64(enc(rb)), mul(allx, allx))
    unit = allx % p != 0
    rhs = add(ax2[:, None], by2[None, :])
    primitive = unit[:, None] | unit[None, :]
    if np.any(squares[rhs] & primitive):
        return 1
    # x, y both non-units force z to be a non-unit too: no primitive solution there
    return -1


# --- textual literals -------------------------------------------------------

_TERM = re.compile(r"^\s*(\d+)(?:\s*\*\s*(\w+)(?:\s*\^\s*(-?\d+))?)?\s*$")


def format_element(x: LocalElement) -> str:
    s = x.spec.symbol
    if x.is_zero:
        return "0" if x.absprec == INF else f"O({s}^{int(x.absprec)})"
    terms = []
    for i, d in enumerate(x.digits):
        if i == 0:
            terms.append(str(d))
        elif i == 1:
            terms.append(f"{d}*{s}")
        else:
            terms.append(f"{d}*{s}^{i}")
    body = "(" + " + ".join(terms) + ")"
    v = int(x.valuation)
    return body if v == 0 else f"{s}^{v}*{body}"


def short_element(x: LocalElement) -> str:
    """Display form of ``format_element`` with trailing zero digits dropped."""
    s = x.spec.symbol
    if x.is_zero:
        return format_element(x)
    digits = list(x.digits)
    while len(digits) > 1 and digits[-1] == 0:
        digits.pop()
    terms = [str(d) if i == 0 else (f"{d}*{s}" if i == 1 else f"{d}*{s}^{i}") for i, d in enumerate(digits) if d or i == 0]
    body = terms[0] if len(terms) == 1 else "(" + " + ".join(terms) + ")"
    v = int(x.valuation)
    return body if v == 0 else f"{s}^{v}*{body}"


def parse_element(text: str, spec: FieldSpec) -> LocalElement:
    """Parse ``5^2*(3 + 1*5 + 0*5^2)`` / ``t^-1*(2 + 1*t)`` / ``0`` / ``O(5^3)``."""
    s = spec.symbol
    t = text.strip()
    if t == "0":
        return spec.zero()
    m = re.fullmatch(r"O\(\s*" + re.escape(s) + r"\s*\^\s*(-?\d+)\s*\)", t)
    if m:
        return LocalElement(spec, INF, 0, int(m.group(1)))
    v = 0
    m = re.fullmatch(r"(" + re.escape(s) + r")\s*\^\s*(-?\d+)\s*\*\s*\((.*)\)", t)
    if m:
        v = int(m.group(2))
        body = m.group(3)
    else:
        m = re.fullmatch(r"\((.*)\)", t)
        if not m:
            raise LocalFieldError(f"cannot parse element literal {text!r}")
        body = m.group(1)
    digits = []
    for k, term in enumerate(body.split("+")):
        tm = _TERM.match(term)
        if not tm:
            raise LocalFieldError(f"bad term {term!r} in {text!r}")
        d, sym, exp = tm.group(1), tm.group(2), tm.group(3)
        power = 0 if sym is None else (1 if exp is None else int(exp))
        if sym is not None and sym != s:
            raise LocalFieldError(f"expected uniformizer {s!r}, got {sym!r}")
        if power != k:
            raise LocalFieldError(f"digit powers must be consecutive from 0 in {text!r}")
        if int(d) >= spec.p:
            raise LocalFieldError(f"digit {d} out of range for p={spec.p}")
        digits.append(int(d))
    if digits[0] == 0:
        raise LocalFieldError("leading digit must be nonzero")
    return LocalElement.from_digits(spec, digits, v, prec=len(digits))
