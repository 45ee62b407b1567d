"""Rectangularity, balancedness and congruence permutability checks."""

import itertools
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import networkx as nx

from modcsp.exceptions import GuardExceededError, StructureError
from modcsp.expansion import find_maltsev
from modcsp.linalg import rank
from modcsp.models import (
    Element,
    ElementTuple,
    MultiSortedStructure,
    Relation,
    element_key,
    sort_elements,
    sort_tuples,
    tuple_key,
)
from modcsp.oracle import require_prime

logger = logging.getLogger(__name__)

Pair = tuple[Element, Element]


class RectangularityWitness(NamedTuple):
    """(a,c), (a,d), (b,c) ∈ R but (b,d) ∉ R."""

    a: ElementTuple
    b: ElementTuple
    c: ElementTuple
    d: ElementTuple


@dataclass(frozen=True)
class SplitView:
    """A relation seen as a binary relation between two groups of coordinates.

    Attributes:
        relation: The relation
        left: Positions of the left part; the rest form the right part
    """

    relation: Relation
    left: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", tuple(sorted(set(self.left))))
        n = self.relation.arity
        if not self.left or len(self.left) >= n:
            raise StructureError(f"Left part must be proper and nonempty, got {self.left}")
        if any(i < 0 or i >= n for i in self.left):
            raise StructureError(f"Positions out of range for arity {n}: {self.left}")

    @property
    def right(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.relation.arity) if i not in self.left)

    def pairs(self) -> set[tuple[ElementTuple, ElementTuple]]:
        return {
            (tuple(t[i] for i in self.left), tuple(t[i] for i in self.right))
            for t in self.relation.tuples
        }


def prefix_view(relation: Relation, k: int) -> SplitView:
    """The split into the first k coordinates and the rest."""
    return SplitView(relation, tuple(range(k)))


def is_rectangular(view: SplitView) -> RectangularityWitness | None:
    """None when rectangular, otherwise the canonical-first witness.

    Left values a < b are scanned in canonical order; c is the least common
    neighbour and d the least neighbour of a that b lacks.
    """
    neighbours: dict[ElementTuple, set[ElementTuple]] = {}
    for x, y in view.pairs():
        neighbours.setdefault(x, set()).add(y)
    lefts = sorted(neighbours, key=tuple_key)
    for a in lefts:
        for b in lefts:
            if a == b:
                continue
            common = neighbours[a] & neighbours[b]
            missing = neighbours[a] - neighbours[b]
            if common and missing:
                c = min(common, key=tuple_key)
                d = min(missing, key=tuple_key)
                return RectangularityWitness(a, b, c, d)
    return None


def rectangularity_by_quadruples(view: SplitView) -> RectangularityWitness | None:
    """Direct scan over all quadruples; slow reference for is_rectangular."""
    pairs = view.pairs()
    lefts = sort_tuples(x for x, _ in pairs)
    rights = sort_tuples(y for _, y in pairs)
    for a, b in itertools.permutations(lefts, 2):
        for c, d in itertools.product(rights, repeat=2):
            if (a, c) in pairs and (a, d) in pairs and (b, c) in pairs and (b, d) not in pairs:
                return RectangularityWitness(a, b, c, d)
    return None


@dataclass(frozen=True)
class CountMatrix:
    """Extension counts M[x, y] of a relation split into left, middle and rest.

    Attributes:
        rows: Projections onto the left coordinates, canonical order
        columns: Projections onto the middle coordinates, canonical order
        entries: Number of extensions of (x, y), reduced when ``modulus`` is set
        modulus: Prime the entries are reduced by, or None for exact counts
    """

    rows: tuple[ElementTuple, ...]
    columns: tuple[ElementTuple, ...]
    entries: tuple[tuple[int, ...], ...]
    modulus: int | None = None

    def entry(self, x: ElementTuple, y: ElementTuple) -> int:
        return self.entries[self.rows.index(x)][self.columns.index(y)]


def count_matrix(
    relation: Relation,
    left: Sequence[int],
    middle: Sequence[int],
    modulus: int | None = None,
) -> CountMatrix:
    """Build the count matrix of a relation for a three-way coordinate split."""
    left, middle = tuple(left), tuple(middle)
    if modulus is not None:
        require_prime(modulus)
    counts = Counter(
        (tuple(t[i] for i in left), tuple(t[i] for i in middle)) for t in relation.tuples
    )
    rows = sort_tuples(x for x, _ in counts)
    columns = sort_tuples(y for _, y in counts)
    entries = tuple(
        tuple(
            counts[(x, y)] % modulus if modulus else counts[(x, y)] for y in columns
        )
        for x in rows
    )
    return CountMatrix(rows, columns, entries, modulus)


def is_rank1_block(matrix: CountMatrix, modulus: int | None = None) -> bool:
    """Every connected block of the nonzero pattern has rank at most 1.

    Rank is taken over the rationals when ``modulus`` is None and over
    GF(modulus) otherwise.
    """
    if modulus is None:
        modulus = matrix.modulus
    entries = [
        [value % modulus if modulus else value for value in row] for row in matrix.entries
    ]
    graph = nx.Graph()
    for i, row in enumerate(entries):
        for j, value in enumerate(row):
            if value:
                graph.add_edge(("row", i), ("col", j))
    for component in nx.connected_components(graph):
        rows = sorted(i for kind, i in component if kind == "row")
        cols = sorted(j for kind, j in component if kind == "col")
        block = [[entries[i][j] for j in cols] for i in rows]
        if rank(block, modulus) > 1:
            logger.debug("Block on rows %s has rank above 1", rows)
            return False
    return True


def _three_way(relation: Relation, k: int, ell: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    n = relation.arity
    if n < 3 or k < 1 or ell < 1 or k + ell >= n:
        raise StructureError(f"Invalid split ({k}, {ell}) for arity {n}")
    return tuple(range(k)), tuple(range(k, k + ell))


def is_balanced(relation: Relation, k: int, ell: int) -> bool:
    """Rank-1 block test of the exact count matrix for the split k | ℓ | rest."""
    left, middle = _three_way(relation, k, ell)
    return is_rank1_block(count_matrix(relation, left, middle))


def is_p_balanced(relation: Relation, k: int, ell: int, p: int) -> bool:
    """Rank-1 block test of the count matrix reduced mod p."""
    left, middle = _three_way(relation, k, ell)
    return is_rank1_block(count_matrix(relation, left, middle, p), p)


def _as_pairs(relation: Relation | Iterable[Pair]) -> tuple[set[Pair], tuple[str, ...] | None]:
    if isinstance(relation, Relation):
        if relation.arity != 2:
            raise StructureError(f"Relation {relation.name} is not binary")
        return set(relation.tuples), relation.symbol.sort_signature
    return {tuple(pair) for pair in relation}, None


def _witness_counts(
    alpha: Relation | Iterable[Pair], beta: Relation | Iterable[Pair]
) -> Counter:
    left, left_sig = _as_pairs(alpha)
    right, right_sig = _as_pairs(beta)
    if left_sig and right_sig and left_sig[1] != right_sig[0]:
        raise StructureError(
            f"Cannot compose relations over sorts {left_sig} and {right_sig}"
        )
    by_first: dict[Element, list[Element]] = {}
    for c, b in right:
        by_first.setdefault(c, []).append(b)
    return Counter((a, b) for a, c in left for b in by_first.get(c, ()))


def compose(alpha: Relation | Iterable[Pair], beta: Relation | Iterable[Pair]) -> set[Pair]:
    """α ∘ β: pairs (a, b) with some c such that (a, c) ∈ α and (c, b) ∈ β."""
    return set(_witness_counts(alpha, beta))


def compose_p(
    alpha: Relation | Iterable[Pair], beta: Relation | Iterable[Pair], p: int
) -> set[Pair]:
    """α ∘_p β: pairs whose number of witnesses c is nonzero mod p."""
    require_prime(p)
    return {pair for pair, n in _witness_counts(alpha, beta).items() if n % p}


@dataclass(frozen=True)
class Congruence:
    """Equivalence relation on a sort.

    Attributes:
        name: Provenance, usually the relation the congruence comes from
        sort: Carrier sort
        carrier: Elements of the carrier
        pairs: Related pairs
    """

    name: str
    sort: str
    carrier: tuple[Element, ...]
    pairs: frozenset[Pair] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "carrier", sort_elements(self.carrier))
        object.__setattr__(self, "pairs", frozenset(tuple(p) for p in self.pairs))
        problem = equivalence_violation(self.pairs, self.carrier)
        if problem:
            raise StructureError(f"{self.name} is not an equivalence relation: {problem}")

    def classes(self) -> tuple[tuple[Element, ...], ...]:
        seen: set[Element] = set()
        classes = []
        for a in self.carrier:
            if a in seen:
                continue
            block = sort_elements(b for b in self.carrier if (a, b) in self.pairs)
            seen.update(block)
            classes.append(block)
        return tuple(classes)

    @classmethod
    def from_relation(cls, relation: Relation, structure: MultiSortedStructure) -> "Congruence":
        signature = relation.symbol.sort_signature
        if len(signature) != 2 or signature[0] != signature[1]:
            raise StructureError(f"{relation.name} is not a binary relation on one sort")
        return cls(relation.name, signature[0], structure.elements(signature[0]), frozenset(relation.tuples))

    @classmethod
    def from_classes(
        cls, name: str, sort: str, classes: Iterable[Iterable[Element]]
    ) -> "Congruence":
        blocks = [tuple(block) for block in classes]
        pairs = frozenset((a, b) for block in blocks for a in block for b in block)
        return cls(name, sort, tuple(e for block in blocks for e in block), pairs)


def equivalence_violation(pairs: Iterable[Pair], carrier: Iterable[Element]) -> str | None:
    """Name the first failed equivalence axiom, or None."""
    pairs = set(pairs)
    carrier = set(carrier)
    for a, b in pairs:
        if a not in carrier or b not in carrier:
            return f"pair {(a, b)!r} leaves the carrier"
    for a in sorted(carrier, key=element_key):
        if (a, a) not in pairs:
            return f"not reflexive at {a!r}"
    for a, b in pairs:
        if (b, a) not in pairs:
            return f"not symmetric at {(a, b)!r}"
    for a, b in pairs:
        for c in carrier:
            if (b, c) in pairs and (a, c) not in pairs:
                return f"not transitive at {(a, b, c)!r}"
    return None


def congruences_of(structure: MultiSortedStructure) -> list[Congruence]:
    """Binary relations of the structure that are equivalence relations on one sort."""
    found = []
    for relation in structure.relations.values():
        signature = relation.symbol.sort_signature
        if len(signature) != 2 or signature[0] != signature[1]:
            continue
        if equivalence_violation(relation.tuples, structure.elements(signature[0])) is None:
            found.append(Congruence.from_relation(relation, structure))
    return found


def check_p_permutability(
    congruences: Sequence[Congruence], p: int
) -> tuple[Congruence, Congruence, Pair] | None:
    """None when all pairs p-permute, otherwise the first offending pair of congruences.

    For the first pair (α, β) with α ∘_p β ≠ β ∘_p α, the witness is the
    canonical-first asymmetric pair related by neither congruence, falling
    back to the canonical-first asymmetric pair.
    """
    require_prime(p)
    for alpha, beta in itertools.combinations(congruences, 2):
        if alpha.sort != beta.sort:
            raise StructureError(
                f"Congruences {alpha.name} and {beta.name} live on different sorts"
            )
        forward = compose_p(alpha.pairs, beta.pairs, p)
        backward = compose_p(beta.pairs, alpha.pairs, p)
        asymmetric = sorted(forward ^ backward, key=tuple_key)
        if not asymmetric:
            continue
        outside = [x for x in asymmetric if x not in alpha.pairs and x not in beta.pairs]
        return alpha, beta, (outside or asymmetric)[0]
    return None


def check_permutability(
    congruences: Sequence[Congruence],
) -> tuple[Congruence, Congruence, Pair] | None:
    """Classical permutability α ∘ β = β ∘ α with the same witness rule."""
    for alpha, beta in itertools.combinations(congruences, 2):
        asymmetric = sorted(
            compose(alpha.pairs, beta.pairs) ^ compose(beta.pairs, alpha.pairs), key=tuple_key
        )
        if asymmetric:
            outside = [x for x in asymmetric if x not in alpha.pairs and x not in beta.pairs]
            return alpha, beta, (outside or asymmetric)[0]
    return None


def analyze_structure(
    structure: MultiSortedStructure, p: int, maltsev: bool = True
) -> dict[str, Any]:
    """Property report for every relation of a structure.

    Returns:
        Per-relation rectangularity and balancedness verdicts with witnesses,
        Mal'tsev existence, and the permutability verdicts of the structure's
        own congruences
    """
    require_prime(p)
    relations: dict[str, Any] = {}
    for name, relation in structure.relations.items():
        entry: dict[str, Any] = {"arity": relation.arity, "size": len(relation)}
        rect = {}
        for k in range(1, relation.arity):
            witness = is_rectangular(prefix_view(relation, k))
            rect[str(k)] = None if witness is None else witness._asdict()
        entry["rectangular"] = rect
        balanced = {}
        for k in range(1, relation.arity - 1):
            for ell in range(1, relation.arity - k):
                balanced[f"{k},{ell}"] = {
                    "balanced": is_balanced(relation, k, ell),
                    "p_balanced": is_p_balanced(relation, k, ell, p),
                }
        entry["balanced"] = balanced
        relations[name] = entry

    report: dict[str, Any] = {"modulus": p, "relations": relations}
    if maltsev:
        try:
            report["maltsev"] = find_maltsev(structure) is not None
        except GuardExceededError as e:
            logger.warning("Mal'tsev search skipped: %s", e)
            report["maltsev"] = None

    congruences = congruences_of(structure)
    report["congruences"] = [c.name for c in congruences]
    by_sort: dict[str, list[Congruence]] = {}
    for congruence in congruences:
        by_sort.setdefault(congruence.sort, []).append(congruence)
    permutability = {}
    for sort, group in by_sort.items():
        failure = check_p_permutability(group, p)
        permutability[sort] = (
            None
            if failure is None
            else {"congruences": [failure[0].name, failure[1].name], "pair": list(failure[2])}
        )
    report["p_permutability"] = permutability
    return report
