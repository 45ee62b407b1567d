"""Tests for obstructions, standard gadgets and K_R."""

import networkx as nx
import pytest

from modcsp.const import GUARD_ENV_VAR
from modcsp.core import make_relation, make_structure
from modcsp.exceptions import ConfigurationError, GuardExceededError, InstanceError
from modcsp.gadget import (
    BipartiteGraph,
    StandardGadget,
    anchored_isomorphic,
    build_KR,
    count_side_preserving_homs,
    find_rect_obstruction,
    find_standard_gadget,
    gadget_protection,
    gadget_reduction,
    graph_structure,
    is_p_protected,
    reduced_block_sizes,
    relation_structure,
    scan_relations,
)
from modcsp.oracle import count_solutions

CORNER = make_relation("R", ("H", "H"), [(0, 0), (0, 1), (1, 0)])
# left 1 sees the twins 0 and 1 on the right, left 0 sees everything
TWINS = make_relation("R", ("H", "H"), [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)])


@pytest.fixture
def corner_structure():
    return make_structure({"H": [0, 1]}, [CORNER])


@pytest.fixture
def corner_gadget():
    return find_standard_gadget(CORNER)


def test_obstruction():
    obstruction = find_rect_obstruction(CORNER, 1)
    assert (obstruction.a, obstruction.b, obstruction.c, obstruction.d) == ((0,), (1,), (0,), (1,))
    assert obstruction.is_valid()


def test_no_obstruction_for_product():
    square = make_relation("S", ("H", "H"), [(a, b) for a in (0, 1) for b in (0, 1)])
    assert find_rect_obstruction(square, 1) is None
    assert find_standard_gadget(square) is None


def test_standard_gadget_blocks(corner_gadget):
    assert corner_gadget.s == 1
    assert corner_gadget.blocks == {
        "A11": ((1,),),
        "A12": ((0,),),
        "A21": ((1,),),
        "A22": ((0,),),
    }
    assert corner_gadget.violations() == []


def test_gadget_violations():
    assert "empty-block" in StandardGadget(CORNER, 1, {}).violations()
    swapped = StandardGadget(
        CORNER, 1, {"A11": ((0,),), "A12": ((1,),), "A21": ((1,),), "A22": ((0,),)}
    )
    assert "A11xA21-meets-R" in swapped.violations()


def test_build_kr(corner_gadget):
    kr = build_KR(corner_gadget)
    assert kr.graph.number_of_nodes() == 4
    assert kr.graph.number_of_edges() == 3
    assert kr.blocks["A11"] == (BipartiteGraph.vertex(1, (1,)),)
    assert kr.neighbourhood(BipartiteGraph.vertex(1, (0,))) == frozenset(kr.right)


def test_graph_structure_needs_bipartite_graph():
    with pytest.raises(InstanceError):
        graph_structure(nx.cycle_graph(3))


def test_graph_structure_two_colouring():
    structure = graph_structure(nx.path_graph(4))
    assert len(structure.sorts["L"]) == 2
    assert len(structure.relation("E")) == 3


def test_anchored_isomorphic(corner_gadget):
    """Left and right ends of the path K_R are not swapped by a side-preserving map."""
    kr = build_KR(corner_gadget)
    a = BipartiteGraph.vertex(1, (0,))
    b = BipartiteGraph.vertex(1, (1,))
    assert anchored_isomorphic(kr, a, a)
    assert not anchored_isomorphic(kr, a, b)


def test_gadget_reduction_counts_homs(corner_gadget, corner_structure):
    """Solutions of the reduction correspond to homomorphisms into K_R."""
    graph = nx.path_graph(["a", "b", "c"])
    instance = gadget_reduction(graph, corner_gadget, left=["a", "c"])
    assert len(instance.variables) == 3
    kr = build_KR(corner_gadget)
    expected = count_side_preserving_homs(graph, kr, left=["a", "c"])
    assert expected == 5
    assert count_solutions(instance, corner_structure).exact == expected


def test_is_p_protected(edge):
    """The swap of an edge fixes nothing, so a vertex is not 2-protected."""
    assert not is_p_protected(edge, [(0,)], 2)
    assert is_p_protected(edge, [(0,)], 3)


def test_protection_guard(monkeypatch, edge):
    monkeypatch.setattr("modcsp.gadget.MAX_PROTECTED_CARRIER", 1)
    monkeypatch.delenv(GUARD_ENV_VAR, raising=False)
    with pytest.raises(GuardExceededError):
        is_p_protected(edge, [(0,)], 2)


def test_corner_gadget_is_protected(corner_gadget, corner_structure):
    graph_report = gadget_protection(corner_gadget, corner_structure, 2)
    assert graph_report.protected
    assert set(graph_report.verdicts) == {"A11", "A12", "A21", "A22"}
    relation_report = gadget_protection(corner_gadget, corner_structure, 2, mode="relation")
    assert set(relation_report.verdicts) == {"A11xA22", "A12xA21", "A12xA22"}
    assert relation_report.protected


def test_twin_block_is_not_protected():
    """Swapping the twins empties A22 modulo 2 but not modulo 3."""
    structure = make_structure({"H": [0, 1, 2]}, [TWINS])
    gadget = find_standard_gadget(TWINS)
    assert gadget.blocks["A22"] == ((0,), (1,))
    report = gadget_protection(gadget, structure, 2)
    assert report.verdicts == {"A11": True, "A12": True, "A21": True, "A22": False}
    assert not report.protected
    assert gadget_protection(gadget, structure, 3).protected
    assert reduced_block_sizes(gadget, 2)["A22"] == (2, 0)


def test_protection_rejects_unknown_mode(corner_gadget, corner_structure):
    with pytest.raises(ConfigurationError):
        gadget_protection(corner_gadget, corner_structure, 2, mode="both")


def test_relation_structure(corner_structure):
    assert relation_structure(CORNER, corner_structure) == corner_structure


def test_scan_relations(corner_structure):
    [entry] = scan_relations(corner_structure, 2)
    assert entry["relation"] == "R"
    assert entry["obstructions"] == [{"k": 1, "a": [0], "b": [1], "c": [0], "d": [1]}]
    assert entry["gadget"]["provenance"] == "relation"
    assert entry["gadget"]["blocks"]["A22"] == [[0]]
    assert entry["gadget"]["protection"]["protected"] is True
