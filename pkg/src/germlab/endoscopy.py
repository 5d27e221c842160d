"""Rank-1 endoscopy for sl2: transfer-factor signs, kappa-orbital integrals
and the local matching search near 0.

The endoscopic Lie algebra of an elliptic datum is the torus h = F attached
to the quadratic extension F(sqrt tau).  An element y of h (y != 0) matches
the stable class of sl2 with determinant D = -tau y^2; the split datum uses
tau = 1.  The stable class of an elliptic D has two rational classes,
distinguished by whether delta(X) is a norm from F(sqrt tau), and the sign
part of the transfer factor is the Hilbert symbol (delta(X), tau).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .localfield import FieldSpec, LocalElement, SquareClass, hilbert_symbol
from .sl2germs import (
    BarbaschMoyPair,
    BarbaschMoyTuple,
    Box,
    GermError,
    Sl2Element,
    ThetaMatrix,
    class_representatives,
    delta,
    orbital_integral_box,
    shalika_germs,
    standard_theta,
)


class EndoscopyError(ValueError):
    pass


# --- data --------------------------------------------------------------------------


@dataclass(frozen=True)
class EndoscopicDatumRank1:
    """Torus type of H: split (tau = 1, kappa trivial) or elliptic(tau)."""

    tau: SquareClass = SquareClass.ONE

    def __post_init__(self):
        if not isinstance(self.tau, SquareClass):
            object.__setattr__(self, "tau", SquareClass(self.tau))

    @classmethod
    def split(cls) -> "EndoscopicDatumRank1":
        return cls(SquareClass.ONE)

    @classmethod
    def elliptic(cls, tau) -> "EndoscopicDatumRank1":
        tau = SquareClass(tau) if not isinstance(tau, SquareClass) else tau
        if tau is SquareClass.ONE:
            raise EndoscopyError("an elliptic datum needs a nonsquare class tau")
        return cls(tau)

    @property
    def is_split(self) -> bool:
        return self.tau is SquareClass.ONE

    @property
    def label(self) -> str:
        return "split" if self.is_split else f"elliptic({self.tau.value})"

    def kappa(self, X_G: Sl2Element) -> int:
        """The order-2 character on rational classes: trivial for the split datum."""
        if self.is_split:
            return 1
        return hilbert_symbol(delta(X_G), self.tau.representative(X_G.spec))

    def char_point(self, y: LocalElement) -> LocalElement:
        """Determinant of the sl2 stable class matching y in h."""
        return -(self.tau.representative(y.spec) * y * y)

    def stable_class(self, y: LocalElement) -> list[Sl2Element]:
        if y.is_zero:
            raise EndoscopyError("X_H must be G-regular (nonzero)")
        return class_representatives(self.char_point(y))

    def ord_offset(self) -> int:
        return int(self.tau.odd)

    def to_json(self) -> dict:
        return {"torus": "split" if self.is_split else "elliptic", "tau": self.tau.value}

    @classmethod
    def from_json(cls, d: dict) -> "EndoscopicDatumRank1":
        if d.get("torus", "elliptic") == "split":
            return cls.split()
        return cls.elliptic(d["tau"])


def corresponds(datum: EndoscopicDatumRank1, y: LocalElement, X_G: Sl2Element) -> bool:
    """Char points of y and X_G agree in the Chevalley quotient."""
    return X_G.det() == datum.char_point(y)


@dataclass(frozen=True)
class TransferFactorRank1:
    """Delta(X_H, X_G) relative to a base pair; ``flip`` negates the non-norm class.

    The absolute sign is kappa(X_G); the relative factor is
    kappa(X_G) kappa(base_G), so two base points differ by one global sign.
    ``flip`` is the deliberately wrong factor used as a negative control.
    """

    datum: EndoscopicDatumRank1
    base_H: LocalElement
    base_G: Sl2Element
    flip: bool = False

    def __post_init__(self):
        if not corresponds(self.datum, self.base_H, self.base_G):
            raise EndoscopyError("base points do not correspond")

    def sign(self, X_G: Sl2Element) -> int:
        s = self.datum.kappa(X_G)
        if self.flip and s == -1:
            s = 1
        return s

    def discriminant_exponent(self, y: LocalElement) -> Fraction:
        """d(X_H, X_G) = ord(D)/2, the exponent of the usual discriminant factor.

        It is reported but not applied: with Leray-normalized orbital
        integrals the factor |D|^(1/2) is already absorbed.
        """
        return Fraction(int(self.datum.char_point(y).ord()), 2)

    def __call__(self, y: LocalElement, X_G: Sl2Element) -> Fraction:
        if not corresponds(self.datum, y, X_G):
            return Fraction(0)
        return Fraction(self.sign(X_G) * self.sign(self.base_G))


def transfer_factor(X_H: LocalElement, X_G: Sl2Element, base_H: LocalElement, base_G: Sl2Element,
                    datum: EndoscopicDatumRank1) -> Fraction:
    return TransferFactorRank1(datum, base_H, base_G)(X_H, X_G)


def default_transfer_factor(datum: EndoscopicDatumRank1, spec: FieldSpec, flip: bool = False) -> TransferFactorRank1:
    """Base pair y = 1 with the companion matrix (delta = 1, a norm)."""
    y = spec.one()
    return TransferFactorRank1(datum, y, datum.stable_class(y)[0], flip)


# --- kappa orbital integrals ---------------------------------------------------------


def _support(f) -> Box:
    if isinstance(f, BarbaschMoyPair):
        return f.support()
    if isinstance(f, Box):
        return f
    raise EndoscopyError("test functions are lattice indicators (Box or Barbasch-Moy pair)")


def kappa_orbital_integral(y: LocalElement, f, Delta: TransferFactorRank1, depth: int | None = None) -> Fraction:
    """Sum over the rational classes of the stable class of Delta * O(Y, f)."""
    box = _support(f)
    total = Fraction(0)
    for Y in Delta.datum.stable_class(y):
        w = Delta(y, Y)
        if w:
            total += w * orbital_integral_box(Y, box)
    return total


def stable_orbital_integral_g(y: LocalElement, f, datum: EndoscopicDatumRank1) -> Fraction:
    box = _support(f)
    return sum((orbital_integral_box(Y, box) for Y in datum.stable_class(y)), Fraction(0))


@dataclass(frozen=True)
class AnnulusStep:
    """Step function on h = F: ``pieces`` are (lo, hi, value) on lo <= ord y <= hi (hi None: unbounded)."""

    pieces: tuple = ()

    @classmethod
    def constant_from(cls, lo: int, value) -> "AnnulusStep":
        return cls(((lo, None, Fraction(value)),))

    def __call__(self, y: LocalElement) -> Fraction:
        if y.is_zero:
            v = None
            for lo, hi, val in self.pieces:
                if hi is None:
                    return Fraction(val)
            raise EndoscopyError("0 is outside the declared domain")
        v = int(y.ord())
        for lo, hi, val in self.pieces:
            if v >= lo and (hi is None or v <= hi):
                return Fraction(val)
        raise EndoscopyError(f"ord {v} is outside the declared domain")

    def __add__(self, other: "AnnulusStep") -> "AnnulusStep":
        cuts = sorted({lo for lo, _, _ in self.pieces + other.pieces} | {hi + 1 for _, hi, _ in self.pieces + other.pieces if hi is not None})
        out = []
        for i, lo in enumerate(cuts):
            hi = cuts[i + 1] - 1 if i + 1 < len(cuts) else None
            a = self._at(lo)
            b = other._at(lo)
            if a is not None and b is not None:
                out.append((lo, hi, a + b))
        return AnnulusStep(tuple(out))

    def _at(self, v: int):
        for lo, hi, val in self.pieces:
            if v >= lo and (hi is None or v <= hi):
                return Fraction(val)
        return None

    def to_json(self) -> list:
        return [{"lo": lo, "hi": hi, "value": f"{Fraction(v).numerator}/{Fraction(v).denominator}"} for lo, hi, v in self.pieces]


def stable_orbital_integral_torus(y: LocalElement, fH: AnnulusStep) -> Fraction:
    """The torus orbit of y is a point, so the stable integral is f^H(y)."""
    return fH(y)


# --- matching ---------------------------------------------------------------------------


def sample_h(spec: FieldSpec, j: int, rng: random.Random, digits: int = 3) -> LocalElement:
    digs = [rng.randrange(1, spec.p)] + [rng.randrange(spec.p) for _ in range(digits - 1)]
    return LocalElement.from_digits(spec, digs).shift(j)


def h_valuations(datum: EndoscopicDatumRank1, a_range) -> dict[int, int]:
    """ord D = a  ->  ord y, for the a of the right parity."""
    off = datum.ord_offset()
    return {a: (a - off) // 2 for a in a_range if (a - off) % 2 == 0 and a - off >= 0}


@dataclass
class MatchingReport:
    datum: EndoscopicDatumRank1
    p: int
    field: str
    a_range: tuple
    tests: tuple  # labels of the test functions
    fH: dict  # label -> AnnulusStep
    annulus_values: dict  # label -> {ord y: value or None if inconsistent}
    residuals: dict  # label -> {a: max |O^kappa - f^H|}
    consistent: bool
    smooth: bool
    success: bool
    obstruction: dict = field(default_factory=dict)
    seed: int = 0
    flip: bool = False

    def to_json(self) -> dict:
        fr = lambda x: None if x is None else f"{Fraction(x).numerator}/{Fraction(x).denominator}"
        return {
            "datum": self.datum.to_json(),
            "p": self.p,
            "field": self.field,
            "a_range": list(self.a_range),
            "negative_control": self.flip,
            "success": self.success,
            "consistent": self.consistent,
            "smooth": self.smooth,
            "fH": {k: v.to_json() for k, v in self.fH.items()},
            "annulus_values": {k: {str(j): fr(x) for j, x in v.items()} for k, v in self.annulus_values.items()},
            "residuals": {k: {str(a): fr(x) for a, x in v.items()} for k, v in self.residuals.items()},
            "obstruction": {k: [fr(x) for x in v] for k, v in self.obstruction.items()},
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _tests_with_labels(tests) -> list[tuple[str, object]]:
    if isinstance(tests, BarbaschMoyTuple):
        return [(f"{pr.orbit.label}@{pr.f.value}", pr) for pr in tests]
    out = []
    for i, t in enumerate(tests):
        if isinstance(t, tuple) and len(t) == 2 and isinstance(t[0], str):
            out.append(t)
        elif isinstance(t, BarbaschMoyPair):
            out.append((f"{t.orbit.label}@{t.f.value}", t))
        else:
            out.append((f"test{i}", t))
    return out


def local_matching_check(tests, datum: EndoscopicDatumRank1, spec: FieldSpec, a_range, samples: int = 2,
                         seed: int = 0, flip: bool = False, Delta: TransferFactorRank1 | None = None) -> MatchingReport:
    """Solve for an annulus-step f^H per test function and check it.

    For every sampled y with ord(D) in ``a_range`` the equation is
    f^H(ord y) = O^kappa(y, f).  The system is consistent when each annulus
    receives one value.  A genuine transfer must be smooth at 0, so success
    also requires the solution to be one constant on all annuli of the range;
    otherwise the obstruction vector lists the annulus values minus the
    deepest one.
    """
    rng = random.Random(seed)
    Delta = Delta or default_transfer_factor(datum, spec, flip)
    labelled = _tests_with_labels(tests)
    vals = h_valuations(datum, a_range)
    if not vals:
        raise EndoscopyError("a_range contains no valuation of the datum's parity")
    ys = {a: [sample_h(spec, j, rng) for _ in range(samples)] for a, j in vals.items()}
    fH, annulus_values, residuals, obstruction = {}, {}, {}, {}
    consistent = smooth = True
    for label, f in labelled:
        per = {}
        ok = True
        for a, j in vals.items():
            got = {kappa_orbital_integral(y, f, Delta) for y in ys[a]}
            if len(got) == 1:
                per[j] = got.pop()
            else:
                per[j] = None
                ok = False
        annulus_values[label] = per
        consistent &= ok
        known = [v for v in per.values() if v is not None]
        deepest = per[max(per)] if per[max(per)] is not None else (known[-1] if known else Fraction(0))
        const = ok and len(set(known)) == 1
        smooth &= const
        lo = min(per)
        fH[label] = AnnulusStep.constant_from(lo, deepest) if const else AnnulusStep(
            tuple((j, j, v) for j, v in sorted(per.items()) if v is not None))
        candidate = AnnulusStep.constant_from(lo, deepest)
        residuals[label] = {
            a: max(abs(kappa_orbital_integral(y, f, Delta) - candidate(y)) for y in ys[a]) for a in vals
        }
        if not const:
            obstruction[label] = [(per[j] - deepest) if per[j] is not None else None for j in sorted(per)]
    return MatchingReport(datum, spec.p, spec.name, tuple(a_range), tuple(l for l, _ in labelled), fH,
                          annulus_values, residuals, consistent, smooth, consistent and smooth, obstruction, seed, flip)


def reverify(report: MatchingReport, tests, spec: FieldSpec, a_range, samples: int = 2, seed: int = 1,
             Delta: TransferFactorRank1 | None = None) -> bool:
    """Re-evaluate a found f^H at fresh samples on a (possibly shifted) range."""
    if not report.success:
        return False
    rng = random.Random(seed)
    Delta = Delta or default_transfer_factor(report.datum, spec, report.flip)
    for label, f in _tests_with_labels(tests):
        fH = report.fH[label]
        for a, j in h_valuations(report.datum, a_range).items():
            for _ in range(samples):
                y = sample_h(spec, j, rng)
                if kappa_orbital_integral(y, f, Delta) != stable_orbital_integral_torus(y, fH):
                    return False
    return True


# --- kappa germs --------------------------------------------------------------------------


@dataclass(frozen=True)
class KappaGermTable:
    y: LocalElement
    labels: tuple
    per_class: tuple  # (Delta, germs) per rational class
    stable: tuple
    kappa: tuple

    @property
    def zero_weight(self) -> Fraction:
        return sum((w for w, _ in self.per_class), Fraction(0))


def kappa_germ_table(theta: ThetaMatrix | None, datum: EndoscopicDatumRank1, y: LocalElement,
                     Delta: TransferFactorRank1 | None = None) -> KappaGermTable:
    """Delta-weighted combinations of the Shalika germs of the classes matching y."""
    spec = y.spec
    theta = theta or standard_theta(spec)
    Delta = Delta or default_transfer_factor(datum, spec)
    rows = []
    for Y in datum.stable_class(y):
        rows.append((Delta(y, Y), shalika_germs(Y, theta).germs))
    n = len(rows[0][1])
    stable = tuple(sum((g[i] for _, g in rows), Fraction(0)) for i in range(n))
    kappa = tuple(sum((w * g[i] for w, g in rows), Fraction(0)) for i in range(n))
    return KappaGermTable(y, tuple(theta.tuple_.labels), tuple(rows), stable, kappa)


def kappa_germ_samples(datum: EndoscopicDatumRank1, spec: FieldSpec, a_range, samples: int = 3, seed: int = 0,
                       theta: ThetaMatrix | None = None, torus_constants: bool = True) -> dict:
    """Rows for asymptotic_dependence_check: the regular kappa-germs, plus the constant 1.

    A dependence involving the constant column says the kappa-germs of the
    regular orbits are constant in y, i.e. they match constants on the torus.
    """
    rng = random.Random(seed)
    theta = theta or standard_theta(spec)
    out = {}
    for a, j in h_valuations(datum, a_range).items():
        rows = []
        for _ in range(samples):
            t = kappa_germ_table(theta, datum, sample_h(spec, j, rng))
            row = list(t.kappa[1:])
            if torus_constants:
                row.append(Fraction(1))
            rows.append(row)
        out[a] = rows
    return out
