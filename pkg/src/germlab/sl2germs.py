"""Shalika germs of sl2 over Q_p and F_p((t)), computed exactly.

Orbital integrals use the Leray measure of the characteristic map
``X = [[a, b], [c, -a]] -> D = det X = -a^2 - bc`` with vol(O) = 1 on every
coordinate, both on regular semisimple fibers and on the nilpotent cone.
Fiber measures are computed by a cube recursion: on a cube
``x0 + pi^r O^3`` whose gradient has valuation ``e < r`` Hensel's lemma
gives the measure ``p^(e - 2r)`` in closed form; the cube at the origin is
rescaled.  Nothing is sampled, so results are exact rationals.

Rational classes inside a stable class are labelled by
``delta(X) = det[X v | v]`` for any ``v`` outside the eigenlines
(``delta = b`` for ``v = e2``, ``-c`` for ``v = e1``): modulo norms from the
splitting field of ``x^2 + D`` for semisimple X, modulo squares for
nilpotent X.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import sympy

from .localfield import (
    INF,
    ORDERED_CLASSES,
    FieldSpec,
    LocalElement,
    LocalFieldError,
    PrecisionError,
    SquareClass,
    hilbert_symbol,
    short_element,
)


class GermError(RuntimeError):
    """A germ computation could not be completed (instability, bad tuple, ...)."""


# --- elements -----------------------------------------------------------------


@dataclass(frozen=True)
class Sl2Element:
    """The trace-zero matrix [[a, b], [c, -a]]."""

    a: LocalElement
    b: LocalElement
    c: LocalElement

    @classmethod
    def make(cls, spec: FieldSpec, a, b, c) -> "Sl2Element":
        return cls(spec(a), spec(b), spec(c))

    @property
    def spec(self) -> FieldSpec:
        return self.a.spec

    def det(self) -> LocalElement:
        return -(self.a * self.a) - self.b * self.c

    def matrix(self):
        return ((self.a, self.b), (self.c, -self.a))

    def __add__(self, other: "Sl2Element") -> "Sl2Element":
        return Sl2Element(self.a + other.a, self.b + other.b, self.c + other.c)

    def __sub__(self, other: "Sl2Element") -> "Sl2Element":
        return Sl2Element(self.a - other.a, self.b - other.b, self.c - other.c)

    def scale(self, lam) -> "Sl2Element":
        lam = self.spec(lam)
        return Sl2Element(lam * self.a, lam * self.b, lam * self.c)

    def bracket(self, other: "Sl2Element") -> "Sl2Element":
        # [X, Y] for X = (a,b,c), Y = (a',b',c')
        a, b, c = self.a, self.b, self.c
        x, y, z = other.a, other.b, other.c
        return Sl2Element(b * z - c * y, 2 * (a * y - b * x), 2 * (c * x - a * z))

    def conjugate(self, g) -> "Sl2Element":
        """g X g^-1 for an invertible 2x2 matrix g = ((g11, g12), (g21, g22))."""
        (p, q), (r, s) = g
        det = p * s - q * r
        inv = ((s / det, -q / det), (-r / det, p / det))
        (m11, m12), (m21, m22) = _mat_mul(_mat_mul(g, self.matrix()), inv)
        return Sl2Element(m11, m12, m21)

    def is_zero(self) -> bool:
        return all(x.is_zero for x in (self.a, self.b, self.c))

    def __str__(self) -> str:
        a, b, c, d = (short_element(x) for x in (self.a, self.b, self.c, -self.a))
        return f"[[{a}, {b}], [{c}, {d}]]"


def _mat_mul(x, y):
    return tuple(
        tuple(sum((x[i][k] * y[k][j] for k in range(1, 2)), x[i][0] * y[0][j]) for j in range(2))
        for i in range(2)
    )


def E(spec: FieldSpec, u) -> Sl2Element:
    """The upper nilpotent [[0, u], [0, 0]]."""
    return Sl2Element(spec.zero(), spec(u), spec.zero())


@dataclass(frozen=True)
class CharPoint:
    D: LocalElement


def char_point(X: Sl2Element) -> CharPoint:
    return CharPoint(X.det())


def is_nilpotent(X: Sl2Element) -> bool:
    D = X.det()
    if D.is_zero:
        if not D.is_exact_zero and not X.is_zero() and D.absprec < 2 * _min_ord(X) + 1:
            raise PrecisionError("determinant indistinguishable from zero at this precision")
        return True
    return False


def _min_ord(X: Sl2Element) -> float:
    return min(x.ord_lower() for x in (X.a, X.b, X.c))


def delta(X: Sl2Element) -> LocalElement:
    """det[X v | v] for v = e2 (or e1 when b vanishes)."""
    if not X.b.is_zero:
        return X.b
    if not X.c.is_zero:
        return -X.c
    raise LocalFieldError("delta undefined: b and c both vanish")


def is_split(D: LocalElement) -> bool:
    return (-D).square_class() is SquareClass.ONE


def non_norm(D: LocalElement) -> SquareClass:
    """Smallest square class (in the order 1, u, pi, u pi) that is not a norm."""
    spec = D.spec
    for s in ORDERED_CLASSES[1:]:
        if hilbert_symbol(s.representative(spec), -D) == -1:
            return s
    raise LocalFieldError("every class is a norm: the stable class is split")


def class_invariant(X: Sl2Element) -> SquareClass:
    """Conjugation-invariant label of the rational class of a regular X.

    Nilpotent X: the square class of delta(X).  Split semisimple X: ``ONE``
    (one rational class).  Elliptic X: ``ONE`` if delta(X) is a norm, otherwise
    the smallest non-norm square class.
    """
    if X.is_zero():
        raise LocalFieldError("class_invariant needs a regular element")
    D = X.det()
    if D.is_zero:
        if not D.is_exact_zero:
            is_nilpotent(X)
        return delta(X).square_class()
    if _ord_checked(D) >= D.spec.precision - 2:
        raise PrecisionError("indistinguishable from nilpotent at this precision")
    if is_split(D):
        return SquareClass.ONE
    return SquareClass.ONE if hilbert_symbol(delta(X), -D) == 1 else non_norm(D)


def _ord_checked(x: LocalElement) -> int:
    return int(x.ord())


def class_representatives(D: LocalElement) -> list[Sl2Element]:
    """One element per rational class of the stable class det = D."""
    spec = D.spec
    companion = Sl2Element(spec.zero(), spec.one(), -D)
    if is_split(D):
        return [companion]
    n = non_norm(D).representative(spec)
    return [companion, Sl2Element(spec.zero(), n, -D / n)]


# --- Moy-Prasad lattices and supports -------------------------------------------


class Parahoric(str, Enum):
    V0 = "v0"
    V1 = "v1"
    IWAHORI = "iwahori"


PARAHORIC_ALPHA = {Parahoric.V0: Fraction(0), Parahoric.V1: Fraction(1), Parahoric.IWAHORI: Fraction(1, 2)}


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


@dataclass(frozen=True)
class MoyPrasadLattice:
    """g_{f,r} = {ord a >= r_a, ord b >= r_b, ord c >= r_c}; ``plus`` gives g_{f,r+}."""

    f: Parahoric
    r: Fraction
    plus: bool = False

    @property
    def radii(self) -> tuple[int, int, int]:
        s = PARAHORIC_ALPHA[self.f]
        eps = Fraction(1, 4) if self.plus else Fraction(0)
        # smallest integer >= (depth + shift), strictly above it for r+
        return (_ceil(self.r + eps), _ceil(self.r - s + eps), _ceil(self.r + s + eps))

    def generators(self, spec: FieldSpec) -> list[Sl2Element]:
        ra, rb, rc = self.radii
        z = spec.zero()
        return [
            Sl2Element(spec.pi(ra), z, z),
            Sl2Element(z, spec.pi(rb), z),
            Sl2Element(z, z, spec.pi(rc)),
        ]

    def contains(self, X: Sl2Element) -> bool:
        return all(
            x.ord_lower() >= r if x.is_zero else x.valuation >= r
            for x, r in zip((X.a, X.b, X.c), self.radii)
        )


def moy_prasad_lattice(f, r, plus: bool = False) -> MoyPrasadLattice:
    f = Parahoric(f)
    r = Fraction(r)
    if f is Parahoric.IWAHORI:
        if (2 * r).denominator != 1:
            raise ValueError("iwahori depths lie in (1/2)Z")
    elif r.denominator != 1:
        raise ValueError("vertex depths lie in Z")
    return MoyPrasadLattice(f, r, plus)


def g0(f) -> MoyPrasadLattice:
    return moy_prasad_lattice(f, 0)


def g0plus(f) -> MoyPrasadLattice:
    return moy_prasad_lattice(f, 0, plus=True)


@dataclass(frozen=True)
class Box:
    """center + pi^ra O x pi^rb O x pi^rc O."""

    center: Sl2Element
    radii: tuple[int, int, int]

    def contains(self, X: Sl2Element) -> bool:
        return g_radii_contains(X - self.center, self.radii)


def g_radii_contains(X: Sl2Element, radii) -> bool:
    return all(x.ord_lower() >= r for x, r in zip((X.a, X.b, X.c), radii))


# --- the fiber-measure engine ---------------------------------------------------

# Class conditions on delta, evaluated with a twist: the true delta is
# pi^twist times the delta of the rescaled coordinates.
NONE = "none"
NILPOTENT = "nilpotent"
ELLIPTIC = "elliptic"


@dataclass(frozen=True)
class ClassCondition:
    kind: str = NONE
    target: object = None  # SquareClass (nilpotent) or +-1 (elliptic)
    minus_D: LocalElement | None = None  # -D of the original fiber (elliptic)

    def decide(self, b: LocalElement, c: LocalElement, twist: int):
        """True/False when delta's class is determined on the cube, else None."""
        if self.kind == NONE:
            return True
        if not b.is_zero:
            d = b
        elif not c.is_zero:
            d = -c
        else:
            return None
        if self.kind == NILPOTENT:
            cls = d.square_class()
            if twist % 2:
                cls = cls * SquareClass.PI
            return cls is self.target
        spec = d.spec
        sign = hilbert_symbol(d, self.minus_D)
        if twist % 2:
            sign *= hilbert_symbol(spec.pi(), self.minus_D)
        return sign == self.target


@dataclass
class FiberStats:
    cubes: int = 0
    max_radius: int = 0
    shells: dict = field(default_factory=dict)


def _children(spec: FieldSpec, center: tuple, r: int):
    pr = spec.pi(r)
    digits = [spec.zero()] + [spec(d) * pr for d in range(1, spec.p)]
    for da, db, dc in itertools.product(digits, repeat=3):
        yield (center[0] + da, center[1] + db, center[2] + dc)


def _cube_measure(spec, center, r, D, cond, twist, stats) -> Fraction:
    """Leray measure of {Q = D} in the cube center + pi^r O^3 (not the origin cube)."""
    stats.cubes += 1
    stats.max_radius = max(stats.max_radius, r)
    a0, b0, c0 = (x._truncate(r) for x in center)
    e = int(min(x.ord_lower() for x in (a0, b0, c0)))
    if e >= r:
        raise GermError("origin cube passed to the smooth-cube evaluator")
    q = -(a0 * a0) - b0 * c0
    diff = D - q
    # Q(cube) = Q(x0) + pi^(r+e) O, and the cube is a submersion onto that ball
    if diff.absprec < r + e and diff.is_zero:
        raise PrecisionError("fiber membership undetermined; raise the digit budget")
    if not diff.is_zero and diff.valuation < r + e:
        return Fraction(0)
    verdict = cond.decide(b0, c0, twist)
    if verdict is None:
        if r > spec.precision - 2:
            raise PrecisionError("class of delta undetermined at this precision")
        return sum(
            (_cube_measure(spec, ch, r + 1, D, cond, twist, stats) for ch in _children(spec, center, r)),
            Fraction(0),
        )
    return Fraction(spec.p) ** (e - 2 * r) if verdict else Fraction(0)


def _shell_measure(spec, D, cond, twist, stats) -> Fraction:
    """Measure of {Q = D} in O^3 minus pi O^3."""
    total = Fraction(0)
    zero = spec.zero()
    for digs in itertools.product(range(spec.p), repeat=3):
        if digs == (0, 0, 0):
            continue
        center = tuple(spec(d) if d else zero for d in digs)
        total += _cube_measure(spec, center, 1, D, cond, twist, stats)
    return total


def _origin_measure(spec, D, r, cond, twist, stats) -> Fraction:
    """Measure of {Q = D} in pi^r O^3 (exact, including the nilpotent cone)."""
    p = spec.p
    if D.is_zero:
        # self-similar: pi^r O^3 = pi^r (shell) + pi^(r+1) O^3, period 2 in the twist
        s0 = _shell_cached(spec, D, cond, twist + r, stats)
        s1 = _shell_cached(spec, D, cond, twist + r + 1, stats)
        val = (s0 + s1 / p) / (1 - Fraction(1, p * p))
        return val / Fraction(p) ** r
    v = _ord_checked(D)
    total = Fraction(0)
    k = r
    while v - 2 * k >= 0:
        Dk = D.shift(-2 * k)
        total += _shell_cached(spec, Dk, cond, twist + k, stats) / Fraction(p) ** k
        k += 1
    return total


def _shell_cached(spec, D, cond, twist, stats) -> Fraction:
    key = (spec, D, cond, twist % 2)
    hit = _SHELL_CACHE.get(key)
    if hit is None:
        hit = _shell_measure(spec, D, cond, twist, stats)
        _SHELL_CACHE[key] = hit
    stats.shells[twist] = hit
    return hit


_SHELL_CACHE: dict = {}


def _box_cubes(spec: FieldSpec, box: Box):
    """Conjugate the box by diag(1, pi^k) and split it into equal-radius cubes.

    Returns (twist, radius, list of cube centers); the measure is invariant
    and delta picks up the factor pi^(-k).
    """
    ra, rb, rc = box.radii
    k = (rb - rc) // 2
    # (a, b, c) -> (a, pi^-k b, pi^k c)
    ra2, rb2, rc2 = ra, rb - k, rc + k
    ca, cb, cc = box.center.a, box.center.b.shift(-k), box.center.c.shift(k)
    R = max(ra2, rb2, rc2)
    ranges = []
    for cen, rad in ((ca, ra2), (cb, rb2), (cc, rc2)):
        offs = [spec.zero()]
        for j in range(rad, R):
            pj = spec.pi(j)
            offs = [o + spec(d) * pj if d else o for o in offs for d in range(spec.p)]
        ranges.append([cen + o for o in offs])
    return -k, R, list(itertools.product(*ranges))


def fiber_measure(box: Box, D: LocalElement, cond: ClassCondition = ClassCondition(), stats=None) -> Fraction:
    """Leray measure of {X in box : det X = D, class condition}."""
    spec = D.spec
    stats = stats if stats is not None else FiberStats()
    twist, R, centers = _box_cubes(spec, box)
    total = Fraction(0)
    for cen in centers:
        if all(x.ord_lower() >= R for x in cen):
            total += _origin_measure(spec, D, R, cond, twist, stats)
        else:
            total += _cube_measure(spec, cen, R, D, cond, twist, stats)
    return total


def nilpotent_tail_certificate(spec: FieldSpec, cls: SquareClass, levels: int = 3) -> list[Fraction]:
    """Shell-by-shell nilpotent measures of pi^n O^3 minus pi^(n+1) O^3, n = 0..levels+1.

    Every shell is computed directly (no rescaling); callers check the
    geometric decay shell[n+2] = shell[n] / p^2 that the closed form uses.
    """
    p = spec.p
    cond = ClassCondition(NILPOTENT, cls)
    out = []
    for n in range(levels + 2):
        total = Fraction(0)
        for digs in itertools.product(range(p), repeat=3):
            if digs == (0, 0, 0):
                continue
            cen = tuple(spec(d).shift(n) if d else spec.zero() for d in digs)
            total += _cube_measure(spec, cen, n + 1, spec.zero(), cond, 0, FiberStats())
        out.append(total)
    return out


# --- nilpotent orbits and Barbasch-Moy pairs --------------------------------------

ZERO_ORBIT = "0"


@dataclass(frozen=True)
class NilpotentOrbit:
    """The zero orbit (``cls is None``) or the regular orbit of class ``cls``."""

    cls: SquareClass | None

    @property
    def label(self) -> str:
        return ZERO_ORBIT if self.cls is None else self.cls.value

    @property
    def is_zero(self) -> bool:
        return self.cls is None

    def closure_key(self) -> tuple:
        # 0 below everything; regular orbits ordered 1, u, pi, u pi
        return (0, 0) if self.cls is None else (1, self.cls.order_key)

    def representative(self, spec: FieldSpec) -> Sl2Element:
        if self.cls is None:
            return Sl2Element(spec.zero(), spec.zero(), spec.zero())
        return E(spec, self.cls.representative(spec))


ALL_ORBITS = (NilpotentOrbit(None),) + tuple(NilpotentOrbit(c) for c in ORDERED_CLASSES)


def nilpotent_orbit_of(N: Sl2Element) -> NilpotentOrbit:
    if N.is_zero():
        return NilpotentOrbit(None)
    if not is_nilpotent(N):
        raise LocalFieldError("not nilpotent")
    return NilpotentOrbit(delta(N).square_class())


def nilpotent_orbit_reps(spec: FieldSpec) -> list[tuple[str, Sl2Element]]:
    """(label, representative) for the five nilpotent orbits, in closure order."""
    spec.require_endoscopic()
    return [(o.label, o.representative(spec)) for o in ALL_ORBITS]


@dataclass(frozen=True)
class BarbaschMoyPair:
    N: Sl2Element
    f: Parahoric
    verified_depth: int = 0

    @property
    def orbit(self) -> NilpotentOrbit:
        return nilpotent_orbit_of(self.N)

    def support(self) -> Box:
        return Box(self.N, g0plus(self.f).radii)

    def indicator(self, X: Sl2Element) -> bool:
        return self.support().contains(X)


@dataclass(frozen=True)
class BarbaschMoyTuple:
    pairs: tuple

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    @property
    def labels(self) -> list[str]:
        return [pr.orbit.label for pr in self.pairs]


def conjugator_to_upper(N: Sl2Element):
    """g in SL2 with g N g^-1 = E(delta(N)) for nonzero nilpotent N."""
    spec = N.spec
    one, zero = spec.one(), spec.zero()
    if N.b.is_zero:
        w = ((zero, one), (-one, zero))  # w F(c) w^-1 = E(-c)
        N = N.conjugate(w)
        g2 = conjugator_to_upper(N)
        return _mat_mul(g2, w)
    s = N.a / N.b
    return ((one, zero), (s, one))


def exhibit_closure(N_prime: Sl2Element, N: Sl2Element, steps: int = 3):
    """Certificate that N lies in the closure of the orbit of N'.

    For N = 0 returns the values Ad(lambda(pi^n) g) N' for n = 0..steps-1,
    which tend to 0.  For regular N returns a single conjugator g with
    g N' g^-1 = N (orbits of regular nilpotents are closed in the punctured
    cone).  Returns None when no certificate exists.
    """
    spec = N.spec
    if N_prime.is_zero():
        return [] if N.is_zero() else None
    g = conjugator_to_upper(N_prime)
    up = N_prime.conjugate(g)
    if N.is_zero():
        seq = []
        for n in range(steps):
            lam = ((spec.pi(n), spec.zero()), (spec.zero(), spec.pi(-n)))
            seq.append(up.conjugate(lam))
        return seq
    gN = conjugator_to_upper(N)
    target = N.conjugate(gN)
    try:
        lam = (target.b / up.b).sqrt()
    except LocalFieldError:
        return None
    h = ((lam, spec.zero()), (spec.zero(), lam.inverse()))
    (p, q), (r, s) = gN
    gN_inv = ((s, -q), (-r, p))  # det gN = 1
    return [_mat_mul(gN_inv, _mat_mul(h, g))]


def _nilpotents_in_box(box: Box, depth: int):
    """Nilpotent elements of the box with a, b running over digits below ``depth``."""
    spec = box.center.spec
    ra, rb, rc = box.radii

    def ball_points(center, r):
        pts = [center]
        for j in range(r, max(r, depth)):
            pj = spec.pi(j)
            pts = [x + spec(d) * pj for x in pts for d in range(spec.p)]
        return pts

    out = []
    for a in ball_points(box.center.a, ra):
        for b in ball_points(box.center.b, rb):
            if b.is_zero:
                if a.is_zero:
                    for c in ball_points(box.center.c, rc):
                        out.append(Sl2Element(a, b, c))
                continue
            c = -(a * a) / b
            X = Sl2Element(a, b, c)
            if box.contains(X):
                out.append(X)
    return out


def dominance_check(N: Sl2Element, f: Parahoric, search_depth: int) -> bool:
    """Bounded check of the Barbasch-Moy dominance condition for (N, f)."""
    if not g0(f).contains(N):
        return False
    if N.is_zero():
        return True
    box = Box(N, g0plus(f).radii)
    for Np in _nilpotents_in_box(box, search_depth):
        cert = exhibit_closure(Np, N)
        if cert is None:
            return False
        (g,) = cert
        if not _same(Np.conjugate(g), N):
            return False
    return True


def _unit_grid(spec: FieldSpec, depth: int) -> list[LocalElement]:
    return [LocalElement.from_digits(spec, (d0,) + rest)
            for d0 in range(1, spec.p) for rest in itertools.product(range(spec.p), repeat=depth - 1)]


def nilpotents_conjugate_bruteforce(N1: Sl2Element, N2: Sl2Element, depth: int = 3) -> bool:
    """Search SL2(F) for a conjugator between two nonzero nilpotents.

    After moving both to upper form E(b1), E(b2) the conjugators are
    upper-triangular with diagonal (x, 1/x) and x^2 b1 = b2.  The search runs
    over x = pi^j w with w in the depth-``depth`` unit grid and accepts when
    x^2 b1 / b2 = 1 mod pi^depth, which lifts exactly for odd p (1 + pi^3 O
    consists of squares).
    """
    b1 = N1.conjugate(conjugator_to_upper(N1)).b
    b2 = N2.conjugate(conjugator_to_upper(N2)).b
    gap = int(b2.valuation) - int(b1.valuation)
    if gap % 2:
        return False
    ratio = b1 / b2
    scale = ratio.spec.pi(gap)
    for w in _unit_grid(N1.spec, depth):
        r = w * w * ratio * scale - ratio.spec.one()
        if r.is_zero or r.valuation >= depth:
            return True
    return False


def classify_nilpotents_bruteforce(spec: FieldSpec, depth: int = 3, max_ord: int = 2) -> list[Sl2Element]:
    """Representatives of the conjugacy classes of nilpotents found by search.

    The sample contains 0, every upper E(x), lower F(x) and every a != 0
    element with x running over pi^j (unit digits) for j <= max_ord, so each
    square class and both triangular shapes occur several times.
    """
    zero = spec.zero()
    sample = []
    units = [spec(d) for d in range(1, spec.p)] + [spec(1 + spec.p if spec.kind == "mixed" else 1) + spec.pi()]
    for j in range(max_ord + 1):
        for w in units:
            x = w.shift(j)
            sample.append(Sl2Element(zero, x, zero))
            sample.append(Sl2Element(zero, zero, x))
            sample.append(Sl2Element(spec.one(), x, -(spec.one() / x)))
    reps: list[Sl2Element] = [Sl2Element(zero, zero, zero)]
    for N in sample:
        if not any(not R.is_zero() and nilpotents_conjugate_bruteforce(N, R, depth) for R in reps):
            reps.append(N)
    return reps


def _same(X: Sl2Element, Y: Sl2Element) -> bool:
    d = X - Y
    return all(x.is_zero for x in (d.a, d.b, d.c))


def _candidates(orbit: NilpotentOrbit, spec: FieldSpec):
    if orbit.is_zero:
        yield orbit.representative(spec)
        return
    rep = orbit.cls.representative(spec)
    u = rep.shift(-int(rep.valuation))
    shifts = [int(rep.valuation) + j for j in (0, -2, 2)]
    for j in shifts:
        yield E(spec, u.shift(j))
    for j in shifts:
        yield Sl2Element(spec.zero(), spec.zero(), -u.shift(j))


def barbasch_moy_pair(orbit: NilpotentOrbit, spec: FieldSpec, search_depth: int = 2) -> BarbaschMoyPair | None:
    from .rootdata import sl2_parahorics

    for f in sl2_parahorics():
        for N in _candidates(orbit, spec):
            if dominance_check(N, f, search_depth):
                return BarbaschMoyPair(N, f, search_depth)
    return None


def barbasch_moy_tuple(k: int, spec: FieldSpec, search_depth: int = 2) -> BarbaschMoyTuple:
    """First k Barbasch-Moy pairs in closure order; empty when k exceeds the orbit count."""
    spec.require_endoscopic()
    if k > len(ALL_ORBITS):
        return BarbaschMoyTuple(())
    pairs = []
    for orbit in ALL_ORBITS[:k]:
        pr = barbasch_moy_pair(orbit, spec, search_depth)
        if pr is None:
            raise GermError(f"no Barbasch-Moy pair found for orbit {orbit.label} at depth {search_depth}")
        pairs.append(pr)
    return BarbaschMoyTuple(tuple(pairs))


# --- orbital integrals -----------------------------------------------------------


def orbital_integral_box(X: Sl2Element, box: Box) -> Fraction:
    """O(X, 1_box) for regular semisimple X (Leray measure on X's rational class)."""
    D = X.det()
    if D.is_zero:
        raise GermError("orbital_integral needs a regular semisimple element")
    if _ord_checked(D) >= D.spec.precision - 4:
        raise PrecisionError("indistinguishable from nilpotent at this precision")
    if is_split(D):
        cond = ClassCondition()
    else:
        sign = hilbert_symbol(delta(X), -D)
        cond = ClassCondition(ELLIPTIC, sign, -D)
    return fiber_measure(box, D, cond)


def orbital_integral(X: Sl2Element, pair: BarbaschMoyPair, depth: int | None = None) -> Fraction:
    return orbital_integral_box(X, pair.support())


def nilpotent_orbital_integral_box(orbit: NilpotentOrbit, box: Box) -> Fraction:
    spec = box.center.spec
    if orbit.is_zero:
        return Fraction(int(box.contains(orbit.representative(spec))))
    return fiber_measure(box, spec.zero(), ClassCondition(NILPOTENT, orbit.cls))


def nilpotent_orbital_integral(N: Sl2Element, pair: BarbaschMoyPair, depth: int | None = None) -> Fraction:
    return nilpotent_orbital_integral_box(nilpotent_orbit_of(N), pair.support())


# --- Theta, adjugate, germs ---------------------------------------------------------


def det(M) -> Fraction:
    return Fraction(sympy.Matrix(M).det())


def adjugate(M) -> list[list[Fraction]]:
    A = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) if isinstance(x, Fraction) else x for x in row] for row in M])
    adj = A.adjugate()
    return [[Fraction(int(sympy.fraction(adj[i, j])[0]), int(sympy.fraction(adj[i, j])[1])) for j in range(A.cols)] for i in range(A.rows)]


def mat_vec(M, v):
    return [sum((M[i][j] * v[j] for j in range(len(v))), Fraction(0)) for i in range(len(M))]


def mat_mul(A, B):
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), Fraction(0)) for j in range(len(B[0]))] for i in range(len(A))]


@dataclass(frozen=True)
class ThetaMatrix:
    """Row j = test function 1_{Upsilon_j}; column i = nilpotent orbit of N_i.

    ``entries[j][i] = O(N_i, 1_{Upsilon_j})`` so that the germ expansion reads
    ``d * O(X, Upsilon) = Theta . Gamma(X, Upsilon)``.
    """

    entries: tuple
    tuple_: BarbaschMoyTuple

    @property
    def size(self) -> int:
        return len(self.entries)

    def rows(self) -> list[list[Fraction]]:
        return [list(r) for r in self.entries]

    def det(self) -> Fraction:
        return det(self.rows())

    def adjugate(self):
        return adjugate(self.rows())

    def is_upper_triangular(self) -> bool:
        n = self.size
        return all(self.entries[i][j] == 0 for i in range(n) for j in range(i))

    def diagonal(self) -> list[Fraction]:
        return [self.entries[i][i] for i in range(self.size)]


def theta_matrix(upsilon: BarbaschMoyTuple, depth: int | None = None) -> ThetaMatrix:
    pairs = sorted(upsilon.pairs, key=lambda pr: pr.orbit.closure_key())
    ordered = BarbaschMoyTuple(tuple(pairs))
    rows = []
    for test in pairs:
        box = test.support()
        rows.append(tuple(nilpotent_orbital_integral_box(pr.orbit, box) for pr in pairs))
    theta = ThetaMatrix(tuple(rows), ordered)
    if theta.det() == 0:
        raise GermError("Theta is singular: the tuple is not a germ basis")
    return theta


@dataclass(frozen=True)
class GermTable:
    """Germ data of one regular semisimple X against a Barbasch-Moy tuple.

    ``gamma`` is the adjugate-scaled vector; the Shalika germs proper are
    ``gamma / d``.
    """

    X: Sl2Element
    orbital: tuple
    gamma: tuple
    d: Fraction
    a: int
    labels: tuple

    @property
    def germs(self) -> tuple:
        return tuple(g / self.d for g in self.gamma)

    def germ(self, label: str) -> Fraction:
        return self.germs[self.labels.index(label)]


def orbital_vector(X: Sl2Element, upsilon: BarbaschMoyTuple) -> list[Fraction]:
    return [orbital_integral(X, pr) for pr in upsilon]


def shalika_germs(X: Sl2Element, theta: ThetaMatrix, depth: int | None = None) -> GermTable:
    O = orbital_vector(X, theta.tuple_)
    adj = theta.adjugate()
    gamma = mat_vec(adj, O)
    d = theta.det()
    lhs = [d * o for o in O]
    if mat_vec(theta.rows(), gamma) != lhs:
        raise GermError("germ expansion identity failed")
    D = X.det()
    return GermTable(X, tuple(O), tuple(gamma), d, _ord_checked(D), tuple(theta.tuple_.labels))


def germ_expansion_residual(table: GermTable, theta: ThetaMatrix) -> list[Fraction]:
    rhs = mat_vec(theta.rows(), list(table.gamma))
    return [table.d * o - r for o, r in zip(table.orbital, rhs)]


# --- sampling and families ---------------------------------------------------------


def element_with_D(D: LocalElement, cls: SquareClass = SquareClass.ONE) -> Sl2Element:
    """A regular element with determinant D in the rational class labelled ``cls``."""
    spec = D.spec
    if cls is SquareClass.ONE:
        return Sl2Element(spec.zero(), spec.one(), -D)
    n = cls.representative(spec)
    return Sl2Element(spec.zero(), n, -D / n)


def sample_D(spec: FieldSpec, cls: SquareClass, valuation: int, rng: random.Random, unit_digits: int = 4) -> LocalElement:
    """D with square class ``cls`` (after adjusting the parity) and ord = valuation."""
    p = spec.p
    while True:
        digs = [rng.randrange(1, p)] + [rng.randrange(p) for _ in range(unit_digits - 1)]
        u = LocalElement.from_digits(spec, digs)
        if (u.square_class() is SquareClass.U) == cls.nonsquare_unit:
            break
    return u.shift(valuation)


def sample_regular(spec: FieldSpec, rng: random.Random, minus_D_class: SquareClass, valuation: int, conjugate: bool = True) -> Sl2Element:
    """Random regular semisimple X with -det X in the given class and ord det X = valuation."""
    mD = sample_D(spec, minus_D_class, valuation, rng)
    if minus_D_class.odd != (valuation % 2 == 1):
        raise ValueError("valuation parity must match the square class")
    D = -mD
    reps = class_representatives(D)
    X = reps[rng.randrange(len(reps))]
    if conjugate:
        X = X.conjugate(random_sl2_integral(spec, rng))
    return X


def random_sl2_integral(spec: FieldSpec, rng: random.Random, digits: int = 3):
    """Random element of SL2(O): product of integral unipotents and a unit torus element."""
    def rnd():
        return LocalElement.from_digits(spec, [rng.randrange(spec.p) for _ in range(digits)])

    one, zero = spec.one(), spec.zero()
    x, y = rnd(), rnd()
    u = LocalElement.from_digits(spec, [rng.randrange(1, spec.p)] + [rng.randrange(spec.p) for _ in range(digits - 1)])
    g = ((one, x), (zero, one))
    h = ((one, zero), (y, one))
    t = ((u, zero), (zero, u.inverse()))
    return _mat_mul(_mat_mul(g, h), t)


def truncation_family(a: int):
    """The definable set {X : ord(det X) >= a} as a Denef-Pas set in (xa, xb, xc)."""
    from .denefpas import DefinableSet

    text = f"vf xa; vf xb; vf xc; ord(0 - xa*xa - xb*xc) >= {a}"
    return DefinableSet.from_text(text)


def in_truncation(X: Sl2Element, a: int) -> bool:
    D = X.det()
    return D.ord_lower() >= a if D.is_zero else D.valuation >= a


# --- asymptotic dependence ------------------------------------------------------------


@dataclass(frozen=True)
class DependenceReport:
    dependent: bool | None
    coefficients: tuple | None
    ranks: dict
    inconclusive: bool = False


def asymptotic_dependence_check(samples_by_a: dict) -> DependenceReport:
    """Exact rank test of sampled functions per truncation level.

    ``samples_by_a[a]`` is a list of rows, one per sampled X, each row the
    values of the r functions at X.  The functions are declared dependent
    when some nonzero vector annihilates the sample matrices of every level.
    """
    ranks = {}
    stacked = []
    r = None
    for a, rows in sorted(samples_by_a.items()):
        M = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in rows])
        r = M.cols
        ranks[a] = M.rank()
        stacked.extend(rows)
        if M.rows < r:
            return DependenceReport(None, None, ranks, inconclusive=True)
    M = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in stacked])
    kernel = M.nullspace()
    if not kernel:
        return DependenceReport(False, None, ranks)
    v = kernel[0]
    den = sympy.ilcm(*[sympy.fraction(x)[1] for x in v])
    coeffs = tuple(Fraction(int(x * den)) for x in v)
    return DependenceReport(True, coeffs, ranks)


@lru_cache(maxsize=None)
def standard_tuple(spec: FieldSpec) -> BarbaschMoyTuple:
    return barbasch_moy_tuple(5, spec)


@lru_cache(maxsize=None)
def standard_theta(spec: FieldSpec) -> ThetaMatrix:
    return theta_matrix(standard_tuple(spec))
