from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from germlab.rootdata import (
    RootDataError,
    affine_cartan,
    build_affine_diagram,
    builtin_fixed_choices,
    finite_cartan,
    load_fixed_choices,
    nilpotent_class_bound,
    node_orbits,
    null_vector,
    parahoric_index_set,
    pgl2_datum,
    positive_roots,
    root_datum,
    sl2_datum,
    sl2_parahorics,
    trivial_choices,
)
from germlab.sl2germs import Parahoric

# number of positive roots per type (standard table)
POSITIVE = {("A", 1): 1, ("A", 4): 10, ("B", 3): 9, ("C", 3): 9, ("D", 4): 12, ("D", 5): 20,
            ("E", 6): 36, ("E", 7): 63, ("E", 8): 120, ("F", 4): 24, ("G", 2): 6}
# Coxeter numbers: sum of the marks of the untwisted affine diagram
COXETER = {("A", 3): 4, ("B", 3): 6, ("C", 3): 6, ("D", 4): 6, ("E", 6): 12, ("E", 7): 18, ("E", 8): 30,
           ("F", 4): 12, ("G", 2): 6}


@pytest.mark.parametrize("kind,n", sorted(POSITIVE))
def test_positive_root_count(kind, n):
    assert len(positive_roots(finite_cartan(kind, n))) == POSITIVE[(kind, n)]


@pytest.mark.parametrize("kind,n", sorted(COXETER))
def test_affine_marks_sum_to_coxeter_number(kind, n):
    assert sum(null_vector(affine_cartan(kind, n, 1))) == COXETER[(kind, n)]


@pytest.mark.parametrize("kind,n,e", [("A", 2, 2), ("A", 3, 2), ("A", 4, 2), ("D", 4, 2), ("D", 4, 3), ("E", 6, 2)])
def test_twisted_diagrams_have_corank_one(kind, n, e):
    v = null_vector(affine_cartan(kind, n, e))
    assert all(x > 0 for x in v)


@pytest.mark.parametrize("kind,n,e", [("B", 1, 1), ("D", 3, 1), ("A", 1, 2), ("B", 3, 2), ("E", 7, 3)])
def test_illegal_pairs(kind, n, e):
    with pytest.raises(RootDataError):
        affine_cartan(kind, n, e)


@pytest.mark.parametrize("name,order", [("A1", 2), ("A3", 8), ("A4", 10), ("D4", 24), ("E6", 6), ("E7", 2), ("E8", 1)])
def test_diagram_automorphism_groups(name, order):
    assert len(build_affine_diagram(name).automorphisms) == order


def test_sl2_and_pgl2_data():
    sc, adj = sl2_datum(), pgl2_datum()
    assert set(sc.roots) == {(2,), (-2,)} and set(sc.coroots) == {(1,), (-1,)}
    assert set(adj.roots) == {(1,), (-1,)} and set(adj.coroots) == {(2,), (-2,)}
    assert nilpotent_class_bound(sc, 5) == nilpotent_class_bound(sc, 7) == 5
    assert nilpotent_class_bound(adj, 5) == 2


def test_class_bound_rejects_bad_primes():
    with pytest.raises(RootDataError):
        nilpotent_class_bound(sl2_datum(), 2)
    with pytest.raises(RootDataError):
        nilpotent_class_bound(sl2_datum(), 9)


@pytest.mark.parametrize("kind,n", [("B", 3), ("C", 4), ("G", 2), ("F", 4)])
def test_root_datum_axioms(kind, n):
    for form in ("sc", "adj"):
        root_datum(kind, n, form).check()


def test_node_orbits_rotation():
    d = build_affine_diagram("A3")
    rot = (1, 2, 3, 0)
    assert node_orbits(d, [rot]) == [(0, 1, 2, 3)]
    assert node_orbits(d, [tuple(range(4))]) == [(0,), (1,), (2,), (3,)]


@pytest.mark.parametrize("name,literal,rect", [("A1", 3, 3), ("A1-swap", 1, 1), ("A1xA1", 15, 9),
                                               ("A2-rotation", 1, 1), ("A3-twisted", 3, 3)])
def test_builtin_index_set_sizes(name, literal, rect):
    fc = builtin_fixed_choices()[name]
    assert len(parahoric_index_set(fc, "literal")) == literal
    assert len(parahoric_index_set(fc, "rectangle")) == rect


@given(st.lists(st.integers(1, 3), min_size=1, max_size=2))
def test_index_set_counting(ranks):
    diagrams = [build_affine_diagram(f"A{r}") for r in ranks]
    fc = trivial_choices(*diagrams)
    S = 1
    rect = 1
    for r in ranks:
        S *= r + 1
        rect *= 2 ** (r + 1) - 1
    assert len(parahoric_index_set(fc, "literal")) == 2**S - 1
    assert len(parahoric_index_set(fc, "rectangle")) == rect


def test_sl2_parahorics_match():
    assert sorted(p.value for p in sl2_parahorics()) == sorted(p.value for p in
                                                               (Parahoric.V0, Parahoric.V1, Parahoric.IWAHORI))


def test_json_round_trip():
    F = parahoric_index_set(builtin_fixed_choices()["A1"])
    d = json.loads(F.to_json())
    assert d == F.to_dict() and d["size"] == 3


def test_toml_loader_rejects_non_homomorphism():
    bad = """
[bad]
sigma_order = 2
qfr = 1
components = [{ type = "A2", e = 1, phi = [[0, 1, 2], [1, 2, 0]] }]
"""
    fc = load_fixed_choices(bad)["bad"]
    with pytest.raises(RootDataError):
        parahoric_index_set(fc)


def test_toml_loader_rejects_non_automorphism():
    bad = """
[bad]
sigma_order = 2
qfr = 1
components = [{ type = "G2", e = 1, phi = [[0, 1, 2], [0, 2, 1]] }]
"""
    with pytest.raises(RootDataError):
        parahoric_index_set(load_fixed_choices(bad)["bad"])
