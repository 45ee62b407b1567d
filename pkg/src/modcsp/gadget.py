"""Rectangularity obstructions, standard hardness gadgets and the graph K_R.

A standard gadget splits a relation R into a left part X = pr_[s] R and a
right part Y = pr_rest R, each cut into two blocks, such that

    A11×A22, A12×A21, A12×A22 ⊆ R  and  (A11×A21) ∩ R = ∅.

So R = X×Y minus A11×A21: left tuples in A12 see all of Y, those in A11
see exactly A22.
"""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cache
from typing import Any

import networkx as nx
from networkx.algorithms import bipartite

from modcsp.automorphism import fix_substructure, order_p_automorphisms, p_reduce
from modcsp.const import MAX_PROTECTED_CARRIER, guard_limit
from modcsp.core import find_isomorphism, make_relation, make_structure
from modcsp.exceptions import ConfigurationError, GuardExceededError, InstanceError
from modcsp.models import (
    Constraint,
    CspInstance,
    ElementTuple,
    MultiSortedStructure,
    Relation,
    element_label,
    sort_tuples,
    tuple_key,
)
from modcsp.oracle import count_hom, require_prime
from modcsp.properties import is_rectangular, prefix_view

logger = logging.getLogger(__name__)

LEFT_SORT = "L"
RIGHT_SORT = "R"
EDGE_RELATION = "E"
BLOCKS = ("A11", "A12", "A21", "A22")
INCLUDED_PRODUCTS = (("A11", "A22"), ("A12", "A21"), ("A12", "A22"))

Vertex = Any


@dataclass(frozen=True)
class Obstruction:
    """(a,c), (a,d), (b,c) ∈ R and (b,d) ∉ R for the split after coordinate k."""

    relation: Relation
    k: int
    a: ElementTuple
    b: ElementTuple
    c: ElementTuple
    d: ElementTuple

    def is_valid(self) -> bool:
        tuples = self.relation.tuple_set
        return (
            self.a + self.c in tuples
            and self.a + self.d in tuples
            and self.b + self.c in tuples
            and self.b + self.d not in tuples
        )


def find_rect_obstruction(relation: Relation, k: int) -> Obstruction | None:
    """Canonical-first obstruction for the split after k coordinates, or None.

    Raises:
        StructureError: Unless 1 <= k < arity
    """
    witness = is_rectangular(prefix_view(relation, k))
    if witness is None:
        return None
    return Obstruction(relation, k, witness.a, witness.b, witness.c, witness.d)


@dataclass(frozen=True)
class StandardGadget:
    """A relation with a split s and four blocks of projection tuples.

    Attributes:
        relation: The relation R (a relation of H or one defined by a formula)
        s: Number of left coordinates
        blocks: Block name (``"A11"`` ...) to its canonically ordered tuples
        provenance: ``"relation"`` or ``"formula"``
    """

    relation: Relation
    s: int
    blocks: dict[str, tuple[ElementTuple, ...]] = field(default_factory=dict)
    provenance: str = "relation"

    def left(self) -> tuple[ElementTuple, ...]:
        return self.relation.project(range(self.s))

    def right(self) -> tuple[ElementTuple, ...]:
        return self.relation.project(range(self.s, self.relation.arity))

    def violations(self) -> list[str]:
        """Conditions of the definition that fail; empty for a valid gadget."""
        problems: list[str] = []
        tuples = self.relation.tuple_set
        b = {name: set(self.blocks.get(name, ())) for name in BLOCKS}
        if any(not members for members in b.values()):
            problems.append("empty-block")
        if b["A11"] & b["A12"] or b["A21"] & b["A22"]:
            problems.append("blocks-overlap")
        if b["A11"] | b["A12"] != set(self.left()):
            problems.append("left-cover")
        if b["A21"] | b["A22"] != set(self.right()):
            problems.append("right-cover")
        for first, second in INCLUDED_PRODUCTS:
            if any(x + y not in tuples for x in b[first] for y in b[second]):
                problems.append(f"missing-{first}x{second}")
        if any(x + y in tuples for x in b["A11"] for y in b["A21"]):
            problems.append("A11xA21-meets-R")
        return problems


def find_standard_gadget(relation: Relation, provenance: str = "relation") -> StandardGadget | None:
    """First standard gadget over splits s = 1, ..., n-1, or None.

    A12 must be the left tuples adjacent to all of Y; every other left tuple
    must share one neighbourhood A22, a proper nonempty part of Y.
    """
    n = relation.arity
    for s in range(1, n):
        neighbours: dict[ElementTuple, set[ElementTuple]] = {}
        for t in relation.tuples:
            neighbours.setdefault(t[:s], set()).add(t[s:])
        right = set().union(*neighbours.values()) if neighbours else set()
        full = [x for x, ys in neighbours.items() if ys == right]
        partial = [x for x, ys in neighbours.items() if ys != right]
        if not full or not partial:
            continue
        shapes = {frozenset(neighbours[x]) for x in partial}
        if len(shapes) != 1:
            continue
        a22 = set(next(iter(shapes)))
        if not a22:
            continue
        blocks = {
            "A11": sort_tuples(partial),
            "A12": sort_tuples(full),
            "A21": sort_tuples(right - a22),
            "A22": sort_tuples(a22),
        }
        logger.debug("Standard gadget for %s at split %d", relation.name, s)
        return StandardGadget(relation, s, blocks, provenance)
    return None


@dataclass(frozen=True)
class BipartiteGraph:
    """The graph K_R of a gadget.

    Vertices are ``("u1", x)`` for left tuples and ``("u2", y)`` for right
    tuples; the vertex name itself is the labeling map.

    Attributes:
        graph: Undirected networkx graph, one edge per tuple of R
        left: Left vertices in canonical order
        right: Right vertices in canonical order
        blocks: Block name to the images A'_ij
    """

    graph: nx.Graph
    left: tuple[Vertex, ...]
    right: tuple[Vertex, ...]
    blocks: dict[str, tuple[Vertex, ...]]

    @staticmethod
    def vertex(side: int, values: ElementTuple) -> Vertex:
        return (f"u{side}", tuple(values))

    @staticmethod
    def label(vertex: Vertex) -> ElementTuple:
        return vertex[1]

    def neighbourhood(self, vertex: Vertex) -> frozenset:
        return frozenset(self.graph[vertex])


def build_KR(gadget: StandardGadget) -> BipartiteGraph:
    """K_R: left vertices pr_[s] R, right vertices the rest, edges the tuples of R."""
    s = gadget.s
    left = tuple(BipartiteGraph.vertex(1, x) for x in gadget.left())
    right = tuple(BipartiteGraph.vertex(2, y) for y in gadget.right())
    graph = nx.Graph()
    graph.add_nodes_from(left, bipartite=0)
    graph.add_nodes_from(right, bipartite=1)
    graph.add_edges_from(
        (BipartiteGraph.vertex(1, t[:s]), BipartiteGraph.vertex(2, t[s:]))
        for t in gadget.relation.tuples
    )
    blocks = {
        name: tuple(BipartiteGraph.vertex(1 if name.startswith("A1") else 2, x) for x in members)
        for name, members in gadget.blocks.items()
    }
    return BipartiteGraph(graph, left, right, blocks)


def graph_structure(
    graph: nx.Graph, left: Iterable[Vertex] | None = None
) -> MultiSortedStructure:
    """Bipartite graph as a two-sorted structure with E ⊆ L × R.

    Homomorphisms and automorphisms of the result keep the sides. When
    ``left`` is omitted the sides come from a 2-colouring.

    Raises:
        InstanceError: If the graph is not bipartite
    """
    if left is None:
        if not nx.is_bipartite(graph):
            raise InstanceError("Graph is not bipartite")
        colouring = bipartite.color(graph)
        left_side = {v for v, colour in colouring.items() if colour == 0}
    else:
        left_side = set(left)
    edges = []
    for u, v in graph.edges():
        if u in left_side and v not in left_side:
            edges.append((u, v))
        elif v in left_side and u not in left_side:
            edges.append((v, u))
        else:
            raise InstanceError(f"Edge {u!r}-{v!r} does not cross the bipartition")
    sorts = {
        LEFT_SORT: [v for v in graph.nodes if v in left_side],
        RIGHT_SORT: [v for v in graph.nodes if v not in left_side],
    }
    return make_structure(sorts, [make_relation(EDGE_RELATION, (LEFT_SORT, RIGHT_SORT), edges)])


def anchored_isomorphic(kr: BipartiteGraph, a: Vertex, b: Vertex) -> bool:
    """Whether some side-preserving automorphism of K_R maps a to b."""
    structure = graph_structure(kr.graph, kr.left)
    return find_isomorphism(structure, structure, (a,), (b,)) is not None


def relation_structure(
    relation: Relation, structure: MultiSortedStructure
) -> MultiSortedStructure:
    """The carrier sorts of R with R as the only relation."""
    sorts = {s: structure.elements(s) for s in dict.fromkeys(relation.symbol.sort_signature)}
    return make_structure(sorts, [relation])


def is_p_protected(
    structure: MultiSortedStructure, subset: Iterable[ElementTuple], p: int
) -> bool:
    """Whether S keeps a member under every sequence of order-p reductions.

    A member tuple survives a reduction when all of its elements are fixed.
    Every sequence is explored; substructures are memoized by their universe.

    Raises:
        GuardExceededError: If the carrier is larger than the guard allows
    """
    require_prime(p)
    limit = guard_limit(MAX_PROTECTED_CARRIER)
    if limit is not None and structure.universe_size > limit:
        raise GuardExceededError(
            f"Carrier of {structure.universe_size} elements exceeds guard {limit}",
            limit=limit,
            size=structure.universe_size,
        )
    members = [tuple(t) for t in subset]
    by_universe: dict[frozenset, MultiSortedStructure] = {}

    @cache
    def survives(universe: frozenset) -> bool:
        if not any(all(e in universe for e in t) for t in members):
            return False
        current = by_universe[universe]
        for automorphism in order_p_automorphisms(current, p):
            reduced = fix_substructure(current, automorphism)
            key = frozenset(reduced.universe)
            by_universe.setdefault(key, reduced)
            if not survives(key):
                return False
        return True

    start = frozenset(structure.universe)
    by_universe[start] = structure
    verdict = survives(start)
    logger.debug("Protection check over %d substructures: %s", len(by_universe), verdict)
    return verdict


@dataclass(frozen=True)
class ProtectionReport:
    """Protection verdicts of a gadget.

    Attributes:
        mode: ``"graph"`` (blocks of K_R) or ``"relation"`` (block products inside R)
        verdicts: Block or product name to its verdict
    """

    mode: str
    verdicts: dict[str, bool]

    @property
    def protected(self) -> bool:
        return all(self.verdicts.values())


def gadget_protection(
    gadget: StandardGadget,
    structure: MultiSortedStructure,
    p: int,
    mode: str = "graph",
) -> ProtectionReport:
    """Protection of a gadget against order-p reductions.

    In graph mode every block A'_ij must survive reductions of K_R. In
    relation mode each included product R ∩ (A_1i × A_2j) must survive
    reductions of the structure (carrier of R, R).
    """
    if mode == "graph":
        kr = build_KR(gadget)
        target = graph_structure(kr.graph, kr.left)
        verdicts = {
            name: is_p_protected(target, [(v,) for v in vertices], p)
            for name, vertices in kr.blocks.items()
        }
    elif mode == "relation":
        target = relation_structure(gadget.relation, structure)
        tuples = gadget.relation.tuple_set
        verdicts = {}
        for first, second in INCLUDED_PRODUCTS:
            product = [
                x + y
                for x in gadget.blocks[first]
                for y in gadget.blocks[second]
                if x + y in tuples
            ]
            verdicts[f"{first}x{second}"] = is_p_protected(target, product, p)
    else:
        raise ConfigurationError(f"mode must be 'graph' or 'relation', got {mode!r}")
    return ProtectionReport(mode, verdicts)


def reduced_block_sizes(gadget: StandardGadget, p: int) -> dict[str, tuple[int, int]]:
    """Block name to (|A'_ij|, size after reducing K_R to its p-rigid form)."""
    kr = build_KR(gadget)
    reduced, _ = p_reduce(graph_structure(kr.graph, kr.left), p)
    kept = set(reduced.universe)
    return {
        name: (len(vertices), sum(1 for v in vertices if v in kept))
        for name, vertices in kr.blocks.items()
    }


def gadget_reduction(
    graph: nx.Graph,
    gadget: StandardGadget,
    left: Iterable[Vertex] | None = None,
) -> CspInstance:
    """Instance over H whose solutions match side-preserving homs G → K_R.

    Each left vertex u becomes variables x[u,1..s], each right vertex v
    becomes y[v,1..t], and each edge one constraint on R. A vertex without
    edges keeps unconstrained variables ranging over whole sorts.

    Raises:
        InstanceError: If the graph is not bipartite
    """
    signature = gadget.relation.symbol.sort_signature
    s = gadget.s
    t = len(signature) - s
    sides = graph_structure(graph, left)
    left_side = set(sides.sorts[LEFT_SORT])

    def names(vertex: Vertex) -> list[str]:
        label = element_label(vertex)
        if vertex in left_side:
            return [f"x[{label},{i + 1}]" for i in range(s)]
        return [f"y[{label},{j + 1}]" for j in range(t)]

    variables: dict[str, str] = {}
    for vertex in graph.nodes:
        sorts = signature[:s] if vertex in left_side else signature[s:]
        variables.update(zip(names(vertex), sorts))
    constraints = [
        Constraint(tuple(names(u) + names(v)), gadget.relation.name)
        for u, v in sides.relations[EDGE_RELATION].tuples
    ]
    return CspInstance(variables, tuple(constraints))


def count_side_preserving_homs(
    graph: nx.Graph, kr: BipartiteGraph, left: Iterable[Vertex] | None = None
) -> int:
    """hom(G, K_R) for homomorphisms sending left to left and right to right."""
    source = graph_structure(graph, left)
    return count_hom(source, graph_structure(kr.graph, kr.left)).exact


def scan_relations(
    structure: MultiSortedStructure,
    p: int,
    relations: Mapping[str, Relation] | None = None,
    mode: str = "graph",
) -> list[dict]:
    """Obstructions and gadgets of the given relations (default: those of H).

    Each entry reports the first obstruction per split, the standard gadget
    if there is one, and its protection verdicts when the carrier is small
    enough to decide them.
    """
    require_prime(p)
    if relations is None:
        relations = {n: r for n, r in structure.relations.items() if r.arity >= 2}
        provenance = "relation"
    else:
        provenance = "formula"
    findings: list[dict] = []
    for name, relation in relations.items():
        entry: dict[str, Any] = {"relation": name, "obstructions": []}
        for k in range(1, relation.arity):
            obstruction = find_rect_obstruction(relation, k)
            if obstruction is not None:
                entry["obstructions"].append(
                    {
                        "k": k,
                        "a": list(obstruction.a),
                        "b": list(obstruction.b),
                        "c": list(obstruction.c),
                        "d": list(obstruction.d),
                    }
                )
        gadget = find_standard_gadget(relation, provenance) if relation.arity >= 2 else None
        if gadget is None:
            entry["gadget"] = None
        else:
            entry["gadget"] = {
                "s": gadget.s,
                "blocks": {
                    block: [list(x) for x in sorted(members, key=tuple_key)]
                    for block, members in gadget.blocks.items()
                },
                "provenance": gadget.provenance,
            }
            try:
                report = gadget_protection(gadget, structure, p, mode)
            except GuardExceededError as e:
                logger.warning("Protection of %s not decided: %s", name, e)
                entry["gadget"]["protection"] = None
            else:
                entry["gadget"]["protection"] = {
                    "mode": report.mode,
                    "verdicts": report.verdicts,
                    "protected": report.protected,
                }
        findings.append(entry)
    return findings
