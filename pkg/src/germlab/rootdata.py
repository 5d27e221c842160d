"""Root data, affine diagrams with finite group actions, and parahoric index sets.

Affine generalized Cartan matrices follow Kac's conventions:
``a[i][j] = <alpha_i^vee, alpha_j>``, node 0 is the extended node.  Untwisted
matrices are built from the finite ones via the highest root; twisted ones
are transposes of untwisted ones (with the A_{2l}^(2) family written out).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib


class RootDataError(ValueError):
    pass


Matrix = tuple  # tuple of tuples of ints

# --- finite Cartan matrices -----------------------------------------------------


def _chain(n: int) -> list[list[int]]:
    A = [[0] * n for _ in range(n)]
    for i in range(n):
        A[i][i] = 2
        if i + 1 < n:
            A[i][i + 1] = A[i + 1][i] = -1
    return A


def finite_cartan(kind: str, n: int) -> Matrix:
    """Cartan matrix a_ij = <alpha_i^vee, alpha_j> in Bourbaki numbering."""
    kind = kind.upper()
    if n < 1:
        raise RootDataError("rank must be positive")
    A = _chain(n)
    if kind == "A":
        pass
    elif kind == "B" and n >= 2:
        A[n - 1][n - 2] = -2  # alpha_n short
    elif kind == "C" and n >= 2:
        A[n - 2][n - 1] = -2  # alpha_n long
    elif kind == "D" and n >= 4:
        A[n - 2][n - 1] = A[n - 1][n - 2] = 0
        A[n - 3][n - 1] = A[n - 1][n - 3] = -1
    elif kind == "E" and n in (6, 7, 8):
        A = [[0] * n for _ in range(n)]
        edges = [(0, 2), (2, 3), (3, 4), (1, 3)] + [(i, i + 1) for i in range(4, n - 1)]
        for i in range(n):
            A[i][i] = 2
        for i, j in edges:
            A[i][j] = A[j][i] = -1
    elif kind == "F" and n == 4:
        A[2][1] = -2
    elif kind == "G" and n == 2:
        A[1][0] = -3
    else:
        raise RootDataError(f"no finite type {kind}{n}")
    return tuple(tuple(r) for r in A)


def _symmetrizer(A) -> list[Fraction]:
    """d_i with d_i a_ij = d_j a_ji (so d_i = (alpha_i, alpha_i)/2)."""
    n = len(A)
    d: list[Fraction | None] = [None] * n
    for start in range(n):
        if d[start] is not None:
            continue
        d[start] = Fraction(1)
        stack = [start]
        while stack:
            i = stack.pop()
            for j in range(n):
                if i != j and A[i][j] and d[j] is None:
                    d[j] = d[i] * A[i][j] / A[j][i]
                    stack.append(j)
    return d  # type: ignore[return-value]


def positive_roots(A) -> list[tuple[int, ...]]:
    """Positive roots in simple-root coordinates, by the string algorithm."""
    n = len(A)
    simple = [tuple(int(i == j) for j in range(n)) for i in range(n)]
    roots = set(simple)
    layer = list(simple)
    while layer:
        nxt = []
        for beta in layer:
            for i in range(n):
                # alpha_i-string through beta: p - q = <alpha_i^vee, beta>
                pair = sum(A[i][k] * beta[k] for k in range(n))
                q = 0
                down = list(beta)
                while True:
                    down[i] -= 1
                    if tuple(down) in roots:
                        q += 1
                    else:
                        break
                if q - pair > 0:
                    gamma = tuple(beta[k] + (k == i) for k in range(n))
                    if gamma not in roots:
                        roots.add(gamma)
                        nxt.append(gamma)
        layer = nxt
    return sorted(roots, key=lambda r: (sum(r), r))


def highest_root(A) -> tuple[int, ...]:
    return max(positive_roots(A), key=sum)


# --- root data -------------------------------------------------------------------


@dataclass(frozen=True)
class RootDatum:
    """Roots and coroots in fixed bases of X^* and X_*, with the pairing <x, y> = x^T P y."""

    name: str
    rank: int
    roots: tuple
    coroots: tuple
    pairing: Matrix
    form: str = "sc"

    def pair(self, x, y) -> int:
        return sum(x[i] * self.pairing[i][j] * y[j] for i in range(self.rank) for j in range(self.rank))

    def reflect(self, i: int, x) -> tuple:
        a, av = self.roots[i], self.coroots[i]
        c = self.pair(x, av)
        return tuple(xk - c * ak for xk, ak in zip(x, a))

    def check(self) -> None:
        for a, av in zip(self.roots, self.coroots):
            if self.pair(a, av) != 2:
                raise RootDataError(f"<alpha, alpha^vee> != 2 for {a}")
        rs = set(self.roots)
        for i in range(len(self.roots)):
            if {self.reflect(i, x) for x in rs} != rs:
                raise RootDataError("reflections do not permute the roots")

    @property
    def semisimple_type(self) -> str:
        return self.name


def root_datum(kind: str, n: int, form: str = "sc") -> RootDatum:
    """Root datum of the simply connected (``sc``) or adjoint (``adj``) group.

    sc: X_* has the coroot basis, so a root is its vector of pairings with
    simple coroots (a column of A); adj: X^* has the root basis.
    """
    A = finite_cartan(kind, n)
    pos = positive_roots(A)
    d = _symmetrizer(A)
    cor = []
    for beta in pos:
        norm = sum(beta[i] * beta[j] * d[i] * A[i][j] for i in range(n) for j in range(n))
        # beta^vee = sum beta_k (alpha_k, alpha_k)/(beta, beta) alpha_k^vee
        cor.append(tuple(int(beta[k] * 2 * d[k] / norm) for k in range(n)))
    identity = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    if form == "adj":
        # roots in root basis, coroots in the dual basis: <alpha_i, alpha_j^vee> = a_ji
        roots = [tuple(b) for b in pos]
        coroots = [tuple(sum(c[k] * A[k][j] for k in range(n)) for j in range(n)) for c in cor]
    elif form == "sc":
        roots = [tuple(sum(b[k] * A[j][k] for k in range(n)) for j in range(n)) for b in pos]
        coroots = [tuple(c) for c in cor]
    else:
        raise RootDataError("form must be 'sc' or 'adj'")
    roots += [tuple(-x for x in r) for r in roots]
    coroots += [tuple(-x for x in r) for r in coroots]
    rd = RootDatum(f"{kind.upper()}{n}", n, tuple(roots), tuple(coroots), identity, form)
    rd.check()
    return rd


def sl2_datum() -> RootDatum:
    return root_datum("A", 1, "sc")


def pgl2_datum() -> RootDatum:
    return root_datum("A", 1, "adj")


def trivial_datum() -> RootDatum:
    return RootDatum("trivial", 0, (), (), (), "sc")


def nilpotent_class_bound(datum: RootDatum, p: int) -> int:
    """Number of rational nilpotent classes in the Lie algebra, for the tabulated data.

    sl2 over a p-adic field (p odd): the zero orbit plus one regular orbit per
    square class, 1 + 4 = 5.  pgl2: conjugation by GL2 merges the regular
    orbits, 2.  Rank 0: the zero orbit.
    """
    from .localfield import is_prime

    if p % 2 == 0 or not is_prime(p):
        raise RootDataError("p must be an odd prime")
    if datum.rank == 0:
        return 1
    if datum.name == "A1":
        return 5 if datum.form == "sc" else 2
    raise RootDataError(f"no nilpotent-class table for {datum.name} ({datum.form})")


# --- affine diagrams --------------------------------------------------------------


def _untwisted(kind: str, n: int) -> Matrix:
    A = finite_cartan(kind, n)
    theta = highest_root(A)
    d = _symmetrizer(A)
    norm = sum(theta[i] * theta[j] * d[i] * A[i][j] for i in range(n) for j in range(n))
    theta_vee = [theta[k] * 2 * d[k] / norm for k in range(n)]
    M = [[0] * (n + 1) for _ in range(n + 1)]
    M[0][0] = 2
    for j in range(n):
        # a_0j = -<theta^vee, alpha_j>, a_j0 = -<alpha_j^vee, theta>
        M[0][j + 1] = int(-sum(theta_vee[k] * A[k][j] for k in range(n)))
        M[j + 1][0] = -sum(A[j][k] * theta[k] for k in range(n))
        for i in range(n):
            M[i + 1][j + 1] = A[i][j]
    if kind.upper() == "A" and n == 1:
        M = [[2, -2], [-2, 2]]
    return tuple(tuple(r) for r in M)


def _transpose(M) -> Matrix:
    return tuple(tuple(M[j][i] for j in range(len(M))) for i in range(len(M)))


def _a_even_twisted(l: int) -> Matrix:
    if l == 1:
        return ((2, -4), (-1, 2))
    M = [list(r) for r in _chain(l + 1)]
    M[0][1] = -2
    M[l - 1][l] = -2
    return tuple(tuple(r) for r in M)


LEGAL = {
    1: "A1+ B2+ C2+ D4+ E6 E7 E8 F4 G2",
    2: "A2+ D4+ E6",
    3: "D4",
}


def affine_cartan(kind: str, n: int, e: int) -> Matrix:
    kind = kind.upper()
    if e == 1:
        if (kind == "B" and n < 2) or (kind == "C" and n < 2) or (kind == "D" and n < 4):
            raise RootDataError(f"illegal pair ({kind}{n}, e=1)")
        return _untwisted(kind, n)
    if e == 2:
        if kind == "A" and n >= 2:
            if n % 2 == 0:
                return _a_even_twisted(n // 2)
            return _transpose(_untwisted("B", (n + 1) // 2))
        if kind == "D" and n >= 4:
            return _transpose(_untwisted("C", n - 1))
        if kind == "E" and n == 6:
            return _transpose(_untwisted("F", 4))
    if e == 3 and kind == "D" and n == 4:
        return _transpose(_untwisted("G", 2))
    raise RootDataError(f"illegal pair ({kind}{n}, e={e})")


def null_vector(M) -> tuple[int, ...]:
    """Primitive positive integer vector in the kernel of an affine Cartan matrix."""
    import sympy

    K = sympy.Matrix(M).nullspace()
    if len(K) != 1:
        raise RootDataError("affine Cartan matrix must have corank 1")
    v = K[0]
    den = sympy.ilcm(*[sympy.fraction(x)[1] for x in v])
    w = [int(x * den) for x in v]
    g = 0
    for x in w:
        g = sympy.igcd(g, x)
    w = [x // g for x in w]
    if w[0] < 0:
        w = [-x for x in w]
    if any(x <= 0 for x in w):
        raise RootDataError("kernel vector is not positive")
    return tuple(w)


Permutation = tuple  # image of node i at position i


@dataclass(frozen=True)
class AffineDiagram:
    name: str
    cartan: Matrix
    e: int = 1
    automorphisms: tuple = ()

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(range(len(self.cartan)))

    @property
    def extended_node(self) -> int:
        return 0

    def graph(self) -> nx.DiGraph:
        G = nx.DiGraph()
        G.add_nodes_from(self.nodes)
        for i, j in itertools.permutations(self.nodes, 2):
            if self.cartan[i][j]:
                G.add_edge(i, j, label=self.cartan[i][j])
        return G

    def edges(self) -> list[tuple[int, int, int]]:
        return [(i, j, self.cartan[i][j]) for i, j in itertools.permutations(self.nodes, 2) if self.cartan[i][j]]

    def is_automorphism(self, perm) -> bool:
        n = len(self.cartan)
        if sorted(perm) != list(range(n)):
            return False
        return all(self.cartan[perm[i]][perm[j]] == self.cartan[i][j] for i in range(n) for j in range(n))


def _automorphisms(M) -> tuple:
    n = len(M)
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    for i, j in itertools.permutations(range(n), 2):
        if M[i][j]:
            G.add_edge(i, j, label=M[i][j])
    gm = DiGraphMatcher(G, G, edge_match=lambda x, y: x["label"] == y["label"])
    perms = {tuple(m[i] for i in range(n)) for m in gm.isomorphisms_iter()}
    return tuple(sorted(perms))


def build_affine_diagram(kind: str, e: int = 1) -> AffineDiagram:
    """Affine diagram for a connected type like ``"A3"`` and twisting order e."""
    kind = kind.strip().upper()
    letter, rank = kind[0], int(kind[1:])
    M = affine_cartan(letter, rank, e)
    name = f"{letter}{rank}" + (f"^({e})" if e != 1 else "^(1)")
    return AffineDiagram(name, M, e, _automorphisms(M))


def compose(p, q) -> tuple:
    """(p o q)(i) = p[q[i]]."""
    return tuple(p[q[i]] for i in range(len(q)))


def node_orbits(d: AffineDiagram, phi) -> list[tuple[int, ...]]:
    """Orbits of the group generated by the given automorphism(s) on the nodes."""
    gens = [tuple(phi)] if phi and isinstance(phi[0], int) else [tuple(g) for g in phi]
    for g in gens:
        if not d.is_automorphism(g):
            raise RootDataError(f"{g} is not an automorphism of {d.name}")
    seen: set[int] = set()
    out = []
    for start in d.nodes:
        if start in seen:
            continue
        orb = {start}
        stack = [start]
        while stack:
            i = stack.pop()
            for g in gens:
                if g[i] not in orb:
                    orb.add(g[i])
                    stack.append(g[i])
        seen |= orb
        out.append(tuple(sorted(orb)))
    return out


# --- fixed choices and the parahoric index set -----------------------------------------


@dataclass(frozen=True)
class FiniteGroup:
    """Group on {0..n-1} (0 the identity) given by a multiplication table."""

    table: tuple

    @property
    def order(self) -> int:
        return len(self.table)

    def mul(self, x: int, y: int) -> int:
        return self.table[x][y]

    def check(self) -> None:
        n = self.order
        for x in range(n):
            if self.table[0][x] != x or self.table[x][0] != x:
                raise RootDataError("0 must be the identity")
            if sorted(self.table[x]) != list(range(n)):
                raise RootDataError("table row is not a permutation")
        for x, y, z in itertools.product(range(n), repeat=3):
            if self.mul(self.mul(x, y), z) != self.mul(x, self.mul(y, z)):
                raise RootDataError("multiplication is not associative")

    def generated(self, gens) -> frozenset:
        out = {0}
        frontier = [0]
        while frontier:
            x = frontier.pop()
            for g in gens:
                y = self.mul(x, g)
                if y not in out:
                    out.add(y)
                    frontier.append(y)
        return frozenset(out)

    def is_cyclic(self, subset) -> bool:
        subset = frozenset(subset)
        return any(self.generated([g]) == subset for g in subset)


def cyclic_group(n: int) -> FiniteGroup:
    return FiniteGroup(tuple(tuple((i + j) % n for j in range(n)) for i in range(n)))


@dataclass(frozen=True)
class Component:
    diagram: AffineDiagram
    phi: tuple  # phi[sigma] = node permutation


@dataclass(frozen=True)
class FixedChoices:
    """Sigma with inertia Sigma^t, a quasi-Frobenius qFr, and component actions phi_tau.

    ``components`` lists one representative per Sigma-orbit of components (the set A).
    """

    sigma: FiniteGroup
    inertia: frozenset
    qfr: int
    components: tuple

    def check(self) -> None:
        self.sigma.check()
        if not self.sigma.is_cyclic(self.inertia):
            raise RootDataError("inertia subgroup must be cyclic")
        # Sigma / Sigma^t is generated by the image of qFr
        cosets = {frozenset(self.sigma.mul(x, t) for t in self.inertia) for x in range(self.sigma.order)}
        reached = {frozenset(self.sigma.mul(x, t) for t in self.inertia) for x in self.sigma.generated([self.qfr] + list(self.inertia))}
        if reached != cosets:
            raise RootDataError("qFr does not generate Sigma / Sigma^t")
        for comp in self.components:
            if len(comp.phi) != self.sigma.order:
                raise RootDataError("phi must assign a permutation to every group element")
            for s in range(self.sigma.order):
                if not comp.diagram.is_automorphism(comp.phi[s]):
                    raise RootDataError(f"phi({s}) is not a diagram automorphism")
            for x, y in itertools.product(range(self.sigma.order), repeat=2):
                if compose(comp.phi[x], comp.phi[y]) != tuple(comp.phi[self.sigma.mul(x, y)]):
                    raise RootDataError("phi is not a homomorphism")


@dataclass(frozen=True)
class ParahoricIndexSet:
    factors: tuple  # per component: tuple of node orbits
    reading: str
    elements: tuple = field(default=())

    @property
    def S(self) -> list:
        return list(itertools.product(*self.factors))

    def __len__(self) -> int:
        return len(self.elements)

    def to_dict(self) -> dict:
        return {
            "reading": self.reading,
            "S": [[list(o) for o in s] for s in self.S],
            "F": [[[list(o) for o in s] for s in sorted(el)] for el in self.elements],
            "size": len(self.elements),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def parahoric_index_set(fc: FixedChoices, reading: str = "literal") -> ParahoricIndexSet:
    """Admissible subsets S' of S = prod_tau (phi_tau-orbits of nodes).

    ``literal``: every S' whose projection to each factor is nonempty.
    ``rectangle``: only products S'_1 x ... x S'_r of nonempty factor subsets.
    """
    fc.check()
    factors = []
    for comp in fc.components:
        gens = [comp.phi[s] for s in range(fc.sigma.order)]
        factors.append(tuple(node_orbits(comp.diagram, gens)))
    S = list(itertools.product(*factors))
    if reading == "literal":
        elems = []
        for r in range(1, len(S) + 1):
            for sub in itertools.combinations(S, r):
                if all({s[i] for s in sub} for i in range(len(factors))):
                    elems.append(frozenset(sub))
    elif reading == "rectangle":
        per = [
            [c for r in range(1, len(f) + 1) for c in itertools.combinations(f, r)]
            for f in factors
        ]
        elems = [frozenset(itertools.product(*choice)) for choice in itertools.product(*per)]
    else:
        raise RootDataError("reading must be 'literal' or 'rectangle'")
    return ParahoricIndexSet(tuple(factors), reading, tuple(elems))


def trivial_choices(*diagrams: AffineDiagram) -> FixedChoices:
    G = cyclic_group(1)
    comps = tuple(Component(d, (tuple(d.nodes),)) for d in diagrams)
    return FixedChoices(G, frozenset({0}), 0, comps)


# --- TOML input ----------------------------------------------------------------------


def load_fixed_choices(source: str | Path | dict) -> dict[str, FixedChoices]:
    """Read named fixed-choice definitions from TOML (path, text, or parsed dict)."""
    if isinstance(source, dict):
        data = source
    else:
        p = Path(source)
        text = p.read_text(encoding="utf-8") if p.suffix == ".toml" and p.exists() else str(source)
        data = tomllib.loads(text)
    out = {}
    for name, entry in data.items():
        order = int(entry.get("sigma_order", 1))
        G = FiniteGroup(tuple(tuple(r) for r in entry["table"])) if "table" in entry else cyclic_group(order)
        inertia = frozenset(entry.get("inertia", [0]))
        comps = []
        for c in entry["components"]:
            d = build_affine_diagram(c["type"], int(c.get("e", 1)))
            phi = c.get("phi")
            if phi is None:
                phi = [list(d.nodes)] * G.order
            comps.append(Component(d, tuple(tuple(x) for x in phi)))
        out[name] = FixedChoices(G, inertia, int(entry.get("qfr", 0)), tuple(comps))
    return out


@lru_cache(maxsize=None)
def builtin_fixed_choices() -> dict[str, FixedChoices]:
    text = resources.files("germlab").joinpath("data/fixed_choices.toml").read_text(encoding="utf-8")
    return load_fixed_choices(tomllib.loads(text))


def sl2_parahorics():
    """The parahorics of SL2, read off the index set of the split A1 diagram.

    {0} -> v0 (the hyperspecial vertex), {1} -> v1, {0, 1} -> the Iwahori.
    """
    from .sl2germs import Parahoric

    F = parahoric_index_set(builtin_fixed_choices()["A1"])
    names = {frozenset({0}): Parahoric.V0, frozenset({1}): Parahoric.V1, frozenset({0, 1}): Parahoric.IWAHORI}
    out = []
    for el in F.elements:
        nodes = frozenset(n for (orb,) in el for n in orb)
        out.append(names[nodes])
    return out
