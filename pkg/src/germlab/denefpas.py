"""A three-sorted Denef-Pas language: parser, printer, and evaluators.

Sorts are VF (valued field), RF (residue field) and VG (value group).
Quantifiers are bounded: RF over all residues, VG over an explicit
interval ``[lo..hi]``, VF over an explicit ball ``ball(center, radius)``.

Two evaluators share one tree walk:

* point semantics (``evaluate``): variables hold exact values;
* ball semantics (``evaluate_ball``): VF variables hold cosets
  ``c + pi^k O`` (inexact LocalElements) and the answer is True, False, or
  None when the coset is not decided.  ord is tracked as an interval.
"""
from __future__ import annotations

import itertools
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .localfield import INF, FieldSpec, LocalElement, PrecisionError


class Sort(str, Enum):
    VF = "vf"
    RF = "rf"
    VG = "vg"


class DPSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int = -1):
        super().__init__(f"{msg} at position {pos}" if pos >= 0 else msg)
        self.pos = pos


class SortError(ValueError):
    def __init__(self, msg: str, subterm=None):
        super().__init__(msg if subterm is None else f"{msg}: {to_text(subterm)}")
        self.subterm = subterm


class UnboundVariable(KeyError):
    pass


# --- syntax tree ---------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort | None = None


@dataclass(frozen=True)
class BinOp:
    op: str  # + - *
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Ord:
    arg: object


@dataclass(frozen=True)
class Ac:
    arg: object


@dataclass(frozen=True)
class Atom:
    op: str  # = != <= >= < >
    left: object
    right: object
    modulus: int | None = None


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class RFDomain:
    pass


@dataclass(frozen=True)
class IntervalDomain:
    lo: int
    hi: int


@dataclass(frozen=True)
class BallDomain:
    center: object
    radius: int


@dataclass(frozen=True)
class Quant:
    kind: str  # exists / forall
    var: Var
    domain: object
    body: object


TRUE = Atom("=", Const(0), Const(0))

# --- tokenizer / parser ------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[a-z][a-z0-9]*)|(?P<op>\.\.|&&|\|\||!=|<=|>=|[-+*=<>!();:,\[\]]))"
)
KEYWORDS = {"vf", "rf", "vg", "exists", "forall", "in", "ord", "ac", "ball", "mod", "RF"}


def _tokenize(text: str):
    out = []
    pos = 0
    text = text.replace("RF", "rfdom")
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise DPSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r}", pos)
        kind = m.lastgroup
        val = m.group(kind)
        out.append((kind, val, m.start(kind)))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.decls: dict[str, Sort] = {}

    def peek(self, k: int = 0):
        return self.toks[self.i + k]

    def take(self, val: str | None = None, kind: str | None = None):
        tok = self.peek()
        if val is not None and tok[1] != val:
            raise DPSyntaxError(f"expected {val!r}, found {tok[1] or 'end of input'!r}", tok[2])
        if kind is not None and tok[0] != kind:
            raise DPSyntaxError(f"expected {kind}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def program(self):
        while self.peek()[1] in ("vf", "rf", "vg") and self.peek(1)[0] == "name":
            sort = Sort(self.take()[1])
            while True:
                name = self.take(kind="name")[1]
                self.decls[name] = sort
                if self.peek()[1] == ",":
                    self.take(",")
                    continue
                break
            self.take(";")
        f = self.formula()
        if self.peek()[0] != "eof":
            tok = self.peek()
            raise DPSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return f

    def formula(self):
        left = self.conj()
        while self.peek()[1] == "||":
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.unary()
        while self.peek()[1] == "&&":
            self.take()
            left = And(left, self.unary())
        return left

    def unary(self):
        tok = self.peek()
        if tok[1] == "!":
            self.take()
            return Not(self.unary())
        if tok[1] in ("exists", "forall"):
            return self.quant()
        if tok[1] == "(":
            # parenthesized formula or a term starting with '('
            save = self.i
            self.take("(")
            try:
                f = self.formula()
                self.take(")")
                if self.peek()[1] in ("=", "!=", "<=", ">=", "<", ">", "+", "-", "*"):
                    raise DPSyntaxError("term", self.peek()[2])
                return f
            except DPSyntaxError:
                self.i = save
        return self.atom()

    def quant(self):
        kind = self.take()[1]
        name = self.take(kind="name")[1]
        self.take("in")
        tok = self.peek()
        if tok[1] == "rfdom":
            self.take()
            dom, sort = RFDomain(), Sort.RF
        elif tok[1] == "ball":
            self.take()
            self.take("(")
            center = self.term()
            self.take(",")
            neg = self.peek()[1] == "-"
            if neg:
                self.take()
            radius = int(self.take(kind="num")[1]) * (-1 if neg else 1)
            self.take(")")
            dom, sort = BallDomain(center, radius), Sort.VF
        elif tok[1] == "[":
            self.take()
            lo = self.signed_int()
            self.take("..")
            hi = self.signed_int()
            self.take("]")
            dom, sort = IntervalDomain(lo, hi), Sort.VG
        else:
            raise DPSyntaxError("expected RF, ball(...) or [lo..hi]", tok[2])
        self.take(":")
        saved = self.decls.get(name)
        self.decls[name] = sort
        body = self.unary() if self.peek()[1] in ("exists", "forall", "!") else self.formula_until_close()
        if saved is None:
            del self.decls[name]
        else:
            self.decls[name] = saved
        return Quant(kind, Var(name, sort), dom, body)

    def formula_until_close(self):
        return self.formula()

    def signed_int(self) -> int:
        neg = self.peek()[1] == "-"
        if neg:
            self.take()
        return int(self.take(kind="num")[1]) * (-1 if neg else 1)

    def atom(self):
        left = self.term()
        tok = self.peek()
        if tok[1] not in ("=", "!=", "<=", ">=", "<", ">"):
            raise DPSyntaxError(f"expected a relation, found {tok[1] or 'end of input'!r}", tok[2])
        op = self.take()[1]
        right = self.term()
        modulus = None
        if self.peek()[1] == "mod":
            self.take()
            modulus = int(self.take(kind="num")[1])
            if op != "=" or modulus < 1:
                raise DPSyntaxError("congruence needs '=' and a positive modulus", tok[2])
        return Atom(op, left, right, modulus)

    def term(self):
        left = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            left = BinOp(op, left, self.product())
        return left

    def product(self):
        left = self.factor()
        while self.peek()[1] == "*":
            self.take()
            left = BinOp("*", left, self.factor())
        return left

    def factor(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return Neg(self.factor())
        if tok[0] == "num":
            self.take()
            return Const(int(tok[1]))
        if tok[1] in ("ord", "ac"):
            self.take()
            self.take("(")
            arg = self.term()
            self.take(")")
            return Ord(arg) if tok[1] == "ord" else Ac(arg)
        if tok[1] == "(":
            self.take()
            t = self.term()
            self.take(")")
            return t
        if tok[0] == "name" and tok[1] not in KEYWORDS and tok[1] != "rfdom":
            self.take()
            return Var(tok[1], self.decls.get(tok[1]))
        raise DPSyntaxError(f"unexpected {tok[1] or 'end of input'!r}", tok[2])


# --- sort inference -------------------------------------------------------------------


class _Infer:
    """Unification of variable sorts; integer constants are polymorphic."""

    def __init__(self, fixed: dict[str, Sort]):
        self.sorts: dict[str, Sort] = dict(fixed)
        self.changed = True

    def bind(self, name: str, sort: Sort, node) -> None:
        have = self.sorts.get(name)
        if have is None:
            self.sorts[name] = sort
            self.changed = True
        elif have != sort:
            raise SortError(f"variable {name} has sort {have.value.upper()}, used as {sort.value.upper()}", node)

    def term(self, t, want: Sort | None, scope: dict) -> Sort | None:
        if isinstance(t, Const):
            return want
        if isinstance(t, Var):
            key = scope.get(t.name, t.name)
            if isinstance(key, Sort):
                if want is not None and want != key:
                    raise SortError(f"bound variable {t.name} has sort {key.value.upper()}", t)
                return key
            if t.sort is not None:
                self.bind(t.name, t.sort, t)
            if want is not None:
                self.bind(t.name, want, t)
            return self.sorts.get(t.name)
        if isinstance(t, Neg):
            return self.term(t.arg, want, scope)
        if isinstance(t, BinOp):
            s1 = self.term(t.left, want, scope)
            s2 = self.term(t.right, want or s1, scope)
            s1 = s1 or s2
            if s1 and s2 and s1 != s2:
                raise SortError("mixed sorts in arithmetic", t)
            if s1 is not None:
                self.term(t.left, s1, scope)
            if t.op == "*" and s1 == Sort.VG and not (_is_const(t.left) or _is_const(t.right)):
                raise SortError("VG terms admit multiplication by constants only", t)
            return s1
        if isinstance(t, Ord):
            self.term(t.arg, Sort.VF, scope)
            if want not in (None, Sort.VG):
                raise SortError("ord(...) is a VG term", t)
            return Sort.VG
        if isinstance(t, Ac):
            self.term(t.arg, Sort.VF, scope)
            if want not in (None, Sort.RF):
                raise SortError("ac(...) is an RF term", t)
            return Sort.RF
        raise SortError("not a term", t)

    def formula(self, f, scope: dict) -> None:
        if isinstance(f, Atom):
            s1 = self.term(f.left, None, scope)
            s2 = self.term(f.right, s1, scope)
            s = s1 or s2
            if s is not None:
                self.term(f.left, s, scope)
            if f.op in ("<=", ">=", "<", ">") or f.modulus is not None:
                if s is None:
                    s = Sort.VG
                    self.term(f.left, s, scope)
                    self.term(f.right, s, scope)
                if s != Sort.VG:
                    raise SortError("order and congruence atoms live in VG", f)
        elif isinstance(f, Not):
            self.formula(f.arg, scope)
        elif isinstance(f, (And, Or)):
            self.formula(f.left, scope)
            self.formula(f.right, scope)
        elif isinstance(f, Quant):
            if isinstance(f.domain, BallDomain):
                self.term(f.domain.center, Sort.VF, scope)
            inner = dict(scope)
            inner[f.var.name] = f.var.sort
            self.formula(f.body, inner)
        else:
            raise SortError("not a formula", f)


def _is_const(t) -> bool:
    if isinstance(t, Const):
        return True
    if isinstance(t, Neg):
        return _is_const(t.arg)
    if isinstance(t, BinOp):
        return _is_const(t.left) and _is_const(t.right)
    return False


def _const_value(t) -> int:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Neg):
        return -_const_value(t.arg)
    a, b = _const_value(t.left), _const_value(t.right)
    return a + b if t.op == "+" else a - b if t.op == "-" else a * b


def _annotate(node, sorts: dict, bound: dict):
    """Rebuild the tree with every variable carrying its sort."""
    if isinstance(node, Var):
        s = bound.get(node.name) or sorts.get(node.name) or Sort.VF
        return Var(node.name, s)
    if isinstance(node, Const):
        return node
    if isinstance(node, Quant):
        inner = dict(bound)
        inner[node.var.name] = node.var.sort
        dom = node.domain
        if isinstance(dom, BallDomain):
            dom = BallDomain(_annotate(dom.center, sorts, bound), dom.radius)
        return Quant(node.kind, node.var, dom, _annotate(node.body, sorts, inner))
    if isinstance(node, (BinOp,)):
        return BinOp(node.op, _annotate(node.left, sorts, bound), _annotate(node.right, sorts, bound))
    if isinstance(node, Atom):
        return Atom(node.op, _annotate(node.left, sorts, bound), _annotate(node.right, sorts, bound), node.modulus)
    if isinstance(node, (And, Or)):
        return type(node)(_annotate(node.left, sorts, bound), _annotate(node.right, sorts, bound))
    if isinstance(node, (Neg, Ord, Ac, Not)):
        return type(node)(_annotate(node.arg, sorts, bound))
    return node


def free_variables(node, bound: frozenset = frozenset()) -> dict[str, Sort]:
    out: dict[str, Sort] = {}

    def walk(n, b):
        if isinstance(n, Var):
            if n.name not in b:
                out.setdefault(n.name, n.sort)
        elif isinstance(n, Quant):
            if isinstance(n.domain, BallDomain):
                walk(n.domain.center, b)
            walk(n.body, b | {n.var.name})
        elif isinstance(n, (BinOp, Atom, And, Or)):
            walk(n.left, b)
            walk(n.right, b)
        elif isinstance(n, (Neg, Ord, Ac, Not)):
            walk(n.arg, b)

    walk(node, bound)
    return out


def parse_with_signature(text: str):
    """Parse a program; returns (formula, signature) with declared variables first."""
    ps = _Parser(text)
    f = ps.program()
    inf = _Infer(ps.decls)
    for _ in range(4):
        inf.changed = False
        inf.formula(f, {})
        if not inf.changed:
            break
    f = _annotate(f, inf.sorts, {})
    free = free_variables(f)
    sig = [(n, s) for n, s in ps.decls.items()] + [(n, s) for n, s in free.items() if n not in ps.decls]
    return f, tuple(sig)


def parse(text: str):
    return parse_with_signature(text)[0]


# --- printer ----------------------------------------------------------------------------


def to_text(node) -> str:
    if isinstance(node, Const):
        return str(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Neg):
        return f"-{to_text(node.arg)}"
    if isinstance(node, Ord):
        return f"ord({to_text(node.arg)})"
    if isinstance(node, Ac):
        return f"ac({to_text(node.arg)})"
    if isinstance(node, Atom):
        s = f"{to_text(node.left)} {node.op} {to_text(node.right)}"
        return s if node.modulus is None else f"{s} mod {node.modulus}"
    if isinstance(node, Not):
        return f"!({to_text(node.arg)})"
    if isinstance(node, And):
        return f"({to_text(node.left)} && {to_text(node.right)})"
    if isinstance(node, Or):
        return f"({to_text(node.left)} || {to_text(node.right)})"
    if isinstance(node, Quant):
        d = node.domain
        if isinstance(d, RFDomain):
            dom = "RF"
        elif isinstance(d, IntervalDomain):
            dom = f"[{d.lo}..{d.hi}]"
        else:
            dom = f"ball({to_text(d.center)}, {d.radius})"
        return f"({node.kind} {node.var.name} in {dom}: {to_text(node.body)})"
    if node is None:
        return "?"
    raise TypeError(f"cannot print {node!r}")


def print_program(f, signature=None) -> str:
    sig = signature if signature is not None else tuple(free_variables(f).items())
    decls = " ".join(f"{s.value} {n};" for n, s in sig)
    return (decls + " " if decls else "") + to_text(f)


# --- definable sets ---------------------------------------------------------------------


@dataclass(frozen=True)
class DefinableSet:
    formula: object
    signature: tuple  # ((name, Sort), ...)

    @classmethod
    def from_text(cls, text: str) -> "DefinableSet":
        f, sig = parse_with_signature(text)
        return cls(f, sig)

    @classmethod
    def from_file(cls, path: str | Path) -> "DefinableSet":
        path = Path(path)
        if path.suffix != ".dp":
            raise ValueError("Denef-Pas files use the .dp extension")
        return cls.from_text(path.read_text(encoding="utf-8"))

    @property
    def vf_vars(self) -> list[str]:
        return [n for n, s in self.signature if s == Sort.VF]

    def text(self) -> str:
        return print_program(self.formula, self.signature)

    def rename(self, mapping: dict[str, str]) -> "DefinableSet":
        return DefinableSet(_rename(self.formula, mapping), tuple((mapping.get(n, n), s) for n, s in self.signature))

    def contains(self, env: dict, spec: FieldSpec, depth: int | None = None) -> bool:
        return evaluate(self.formula, env, spec, depth)


def _rename(node, mapping):
    if isinstance(node, Var):
        return Var(mapping.get(node.name, node.name), node.sort)
    if isinstance(node, Const) or node is None:
        return node
    if isinstance(node, Quant):
        inner = {k: v for k, v in mapping.items() if k != node.var.name}
        dom = node.domain
        if isinstance(dom, BallDomain):
            dom = BallDomain(_rename(dom.center, mapping), dom.radius)
        return Quant(node.kind, node.var, dom, _rename(node.body, inner))
    if isinstance(node, BinOp):
        return BinOp(node.op, _rename(node.left, mapping), _rename(node.right, mapping))
    if isinstance(node, Atom):
        return Atom(node.op, _rename(node.left, mapping), _rename(node.right, mapping), node.modulus)
    if isinstance(node, (And, Or)):
        return type(node)(_rename(node.left, mapping), _rename(node.right, mapping))
    return type(node)(_rename(node.arg, mapping))


# --- evaluation --------------------------------------------------------------------------


@dataclass(frozen=True)
class VGInterval:
    """A value-group quantity known to lie in [lo, hi] (hi may be INF)."""

    lo: float
    hi: float

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    def __add__(self, o: "VGInterval") -> "VGInterval":
        return VGInterval(self.lo + o.lo, self.hi + o.hi)

    def __neg__(self) -> "VGInterval":
        return VGInterval(-self.hi, -self.lo)

    def scale(self, k: int) -> "VGInterval":
        a, b = self.lo * k if k else 0, self.hi * k if k else 0
        return VGInterval(min(a, b), max(a, b))


class _Eval:
    def __init__(self, spec: FieldSpec, depth: int | None, ball_mode: bool):
        self.spec = spec
        self.depth = depth
        self.ball = ball_mode

    def unknown(self, msg: str):
        if self.ball:
            return None
        raise PrecisionError(msg)

    def term(self, t, env, sort):
        spec = self.spec
        if isinstance(t, Const):
            if sort == Sort.VF:
                return spec(t.value)
            if sort == Sort.RF:
                return t.value % spec.p
            return VGInterval(t.value, t.value)
        if isinstance(t, Var):
            if t.name not in env:
                raise UnboundVariable(t.name)
            v = env[t.name]
            if sort == Sort.VG and isinstance(v, int):
                return VGInterval(v, v)
            if sort == Sort.VF and not isinstance(v, LocalElement):
                return spec(v)
            return v
        if isinstance(t, Neg):
            x = self.term(t.arg, env, sort)
            if x is None:
                return None
            return -x if sort != Sort.RF else (-x) % spec.p
        if isinstance(t, BinOp):
            a = self.term(t.left, env, sort)
            b = self.term(t.right, env, sort)
            if a is None or b is None:
                return None
            if sort == Sort.VG:
                if t.op == "+":
                    return a + b
                if t.op == "-":
                    return a + (-b)
                if _is_const(t.left):
                    return b.scale(_const_value(t.left))
                return a.scale(_const_value(t.right))
            if sort == Sort.RF:
                r = a + b if t.op == "+" else a - b if t.op == "-" else a * b
                return r % spec.p
            return a + b if t.op == "+" else a - b if t.op == "-" else a * b
        if isinstance(t, Ord):
            x = self.term(t.arg, env, Sort.VF)
            if x.is_zero:
                if x.is_exact_zero:
                    return VGInterval(INF, INF)
                if self.ball:
                    return VGInterval(x.absprec, INF)
                raise PrecisionError(f"ord of a near-zero term {to_text(t.arg)}")
            return VGInterval(x.valuation, x.valuation)
        if isinstance(t, Ac):
            x = self.term(t.arg, env, Sort.VF)
            if x.is_zero:
                if x.is_exact_zero:
                    return 0
                return self.unknown(f"ac of a near-zero term {to_text(t.arg)}")
            return x.ac()
        raise TypeError(f"not a term: {t!r}")

    def _sort_of(self, t, env):
        if isinstance(t, Var):
            return t.sort or Sort.VF
        if isinstance(t, Ord):
            return Sort.VG
        if isinstance(t, Ac):
            return Sort.RF
        if isinstance(t, (Neg,)):
            return self._sort_of(t.arg, env)
        if isinstance(t, BinOp):
            return self._sort_of(t.left, env) or self._sort_of(t.right, env)
        return None

    def atom(self, f: Atom, env):
        sort = self._sort_of(f.left, env) or self._sort_of(f.right, env) or Sort.VG
        a = self.term(f.left, env, sort)
        b = self.term(f.right, env, sort)
        if a is None or b is None:
            return None
        if sort == Sort.VF:
            d = a - b
            if d.is_zero:
                if d.is_exact_zero or not self.ball:
                    # point mode: values are exact up to the digit budget
                    res = True
                else:
                    return None
            else:
                res = False
            return res if f.op == "=" else not res
        if sort == Sort.RF:
            res = a == b
            if f.op == "=":
                return res
            if f.op == "!=":
                return not res
            raise SortError("RF admits only = and !=", f)
        # VG intervals
        lo, hi = a.lo - b.hi, a.hi - b.lo  # a - b in [lo, hi]
        if a.hi == INF and b.hi == INF:
            lo, hi = -INF, INF
            if a.exact and b.exact:
                lo = hi = 0
        if f.modulus is not None:
            if not (a.exact and b.exact):
                return None
            if a.lo == INF or b.lo == INF:
                return a.lo == b.lo
            return (a.lo - b.lo) % f.modulus == 0
        if a.exact and b.exact and a.lo == INF and b.lo == INF:
            lo = hi = 0
        ops = {
            "=": (lo == 0 and hi == 0, lo > 0 or hi < 0),
            "!=": (lo > 0 or hi < 0, lo == 0 and hi == 0),
            "<=": (hi <= 0, lo > 0),
            ">=": (lo >= 0, hi < 0),
            "<": (hi < 0, lo >= 0),
            ">": (lo > 0, hi <= 0),
        }
        yes, no = ops[f.op]
        if yes:
            return True
        if no:
            return False
        return None

    def formula(self, f, env):
        if isinstance(f, Atom):
            return self.atom(f, env)
        if isinstance(f, Not):
            v = self.formula(f.arg, env)
            return None if v is None else not v
        if isinstance(f, And):
            a = self.formula(f.left, env)
            if a is False:
                return False
            b = self.formula(f.right, env)
            if b is False:
                return False
            return True if (a and b) else None
        if isinstance(f, Or):
            a = self.formula(f.left, env)
            if a is True:
                return True
            b = self.formula(f.right, env)
            if b is True:
                return True
            return False if (a is False and b is False) else None
        if isinstance(f, Quant):
            want = f.kind == "exists"
            seen_unknown = False
            for val in self.domain_values(f.domain, env):
                inner = dict(env)
                inner[f.var.name] = val
                v = self.formula(f.body, inner)
                if v is None:
                    seen_unknown = True
                elif v == want:
                    return want
            return None if seen_unknown else (not want)
        raise TypeError(f"not a formula: {f!r}")

    def domain_values(self, dom, env):
        spec = self.spec
        if isinstance(dom, RFDomain):
            return range(spec.p)
        if isinstance(dom, IntervalDomain):
            return range(dom.lo, dom.hi + 1)
        center = self.term(dom.center, env, Sort.VF)
        depth = self.depth if self.depth is not None else dom.radius + 2
        return list(coset_points(spec, center, dom.radius, max(depth, dom.radius), as_balls=self.ball))


def coset_points(spec: FieldSpec, center: LocalElement, radius: int, depth: int, as_balls: bool = False):
    """Representatives (or balls) of the depth-``depth`` cosets of center + pi^radius O."""
    offs = [spec.zero()]
    for j in range(radius, depth):
        pj = spec.pi(j)
        offs = [o + spec(d) * pj if d else o for o in offs for d in range(spec.p)]
    for o in offs:
        x = center + o
        yield x._truncate(depth) if as_balls else x


def evaluate(f, env: dict, spec: FieldSpec, depth: int | None = None) -> bool:
    """Point semantics; raises PrecisionError when ord/ac meets a near-zero term."""
    v = _Eval(spec, depth, ball_mode=False).formula(f, env)
    if v is None:  # pragma: no cover - point mode never yields unknown
        raise PrecisionError("undecided")
    return v


def evaluate_ball(f, env: dict, spec: FieldSpec, depth: int | None = None):
    """Ball semantics: True/False if decided on the whole coset, else None."""
    return _Eval(spec, depth, ball_mode=True).formula(f, env)


def evaluate_with_stability(f, env: dict, spec: FieldSpec, depth: int) -> tuple[bool, bool]:
    """Point value with VF quantifiers at ``depth``; stable iff depth+1 agrees."""
    a = evaluate(f, env, spec, depth)
    b = evaluate(f, env, spec, depth + 1)
    return a, a == b


# --- point enumeration -----------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: LocalElement
    radius: int

    @classmethod
    def unit(cls, spec: FieldSpec) -> "Ball":
        return cls(spec.zero(), 0)


@dataclass
class PointSet:
    points: list
    stable: bool
    depth: int
    undecided: int = 0


def _grid(spec: FieldSpec, box, depth: int):
    per = [list(coset_points(spec, b.center, b.radius, depth)) for b in box]
    return itertools.product(*per)


def _membership_chunk(args):
    formula, names, spec, depth, pts, env = args
    ev = _Eval(spec, None, ball_mode=False)
    out = []
    for pt in pts:
        e = dict(env)
        e.update(zip(names, pt))
        try:
            out.append(ev.formula(formula, e))
        except PrecisionError:
            out.append(None)
    return out


def workers_from_env(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get("GERMLAB_WORKERS", default)))
    except ValueError:
        return default


def _map_chunks(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def enumerate_points(S: DefinableSet, box, depth: int, spec: FieldSpec, env: dict | None = None,
                     workers: int | None = None, sample: int = 64) -> PointSet:
    """Depth-k coset representatives of the box satisfying S, in lexicographic order.

    The stability flag compares each coset's membership with that of its
    depth-(k+1) children on a deterministic sample of cosets; cosets decided
    by ball evaluation are stable without sampling.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    names = S.vf_vars
    if len(box) != len(names):
        raise ValueError(f"box has {len(box)} balls but the signature has {len(names)} VF variables")
    env = dict(env or {})
    pts = list(_grid(spec, box, depth))
    workers = workers if workers is not None else workers_from_env()
    size = max(1, len(pts) // max(1, workers))
    jobs = [(S.formula, names, spec, depth, pts[i:i + size], env) for i in range(0, len(pts), size)]
    flags = [x for chunk in _map_chunks(_membership_chunk, jobs, workers) for x in chunk]
    members = [pt for pt, fl in zip(pts, flags) if fl]
    # stability on a deterministic sample of cosets
    stable = True
    undecided = 0
    step = max(1, len(pts) // sample)
    for idx in range(0, len(pts), step):
        pt = pts[idx]
        e = dict(env)
        e.update({n: x._truncate(depth) for n, x in zip(names, pt)})
        verdict = evaluate_ball(S.formula, e, spec, depth)
        if verdict is not None:
            continue
        undecided += 1
        child_box = [Ball(x, depth) for x in pt]
        children = _membership_chunk((S.formula, names, spec, depth + 1, list(_grid(spec, child_box, depth + 1)), env))
        if any(c != flags[idx] for c in children):
            stable = False
    return PointSet(members, stable, depth, undecided)
