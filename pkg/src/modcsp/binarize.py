"""Binarization b(H) and the parsimonious translations between H and b(H).

The sorts of b(H) are the relations Q_1, ..., Q_n of H; an element of sort
Q_i is a pair ``(Q_i, t)`` with t a tuple of Q_i. The binary relation named
``R[Qi,Qj]_s,t`` holds the pairs whose tuples agree at positions s and t
(0-based).
"""

import itertools
import logging
from dataclasses import dataclass, field

from modcsp.automorphism import Automorphism
from modcsp.const import EQUALITY, SORT_RELATION_PREFIX
from modcsp.core import make_relation, make_structure
from modcsp.exceptions import InstanceError, StructureError
from modcsp.expansion import eliminate_equality
from modcsp.models import (
    Constraint,
    CspInstance,
    Element,
    MultiSortedStructure,
    Operation,
    Relation,
)

logger = logging.getLogger(__name__)

Link = tuple[str, str, int, int]


def link_name(first: str, second: str, s: int, t: int) -> str:
    return f"R[{first},{second}]_{s},{t}"


@dataclass(frozen=True)
class Binarization:
    """b(H) together with the data needed to translate back.

    Attributes:
        structure: b(H)
        source: H with a unary relation for every sort
        sort_relations: Sort of H to the unary relation of H listing it
        links: Binary relation name of b(H) to (Q_i, Q_j, s, t)
    """

    structure: MultiSortedStructure
    source: MultiSortedStructure
    sort_relations: dict[str, str] = field(default_factory=dict)
    links: dict[str, Link] = field(default_factory=dict)

    def link_for(self, first: str, s: int, second: str, t: int) -> tuple[str, bool]:
        """Relation name linking position s of Q_first to t of Q_second.

        Returns:
            The name and whether the two variables must be given in reverse order
        """
        order = list(self.source.relations)
        if order.index(first) <= order.index(second):
            return link_name(first, second, s, t), False
        return link_name(second, first, t, s), True


def _with_sort_relations(
    structure: MultiSortedStructure,
) -> tuple[MultiSortedStructure, dict[str, str]]:
    found: dict[str, str] = {}
    for name, relation in structure.relations.items():
        signature = relation.symbol.sort_signature
        if len(signature) == 1 and signature[0] not in found:
            if len(relation) == len(structure.sorts[signature[0]]):
                found[signature[0]] = name
    added = []
    for sort, elements in structure.sorts.items():
        if sort not in found:
            name = f"{SORT_RELATION_PREFIX}{sort}"
            added.append(make_relation(name, (sort,), ((a,) for a in elements)))
            found[sort] = name
    return structure.with_relations(added), found


def binarize(structure: MultiSortedStructure) -> Binarization:
    """Build b(H), adding a unary ``sort:<name>`` relation for uncovered sorts."""
    source, sort_relations = _with_sort_relations(structure)
    names = list(source.relations)
    sorts = {
        name: [(name, t) for t in source.relations[name].tuples] for name in names
    }
    relations: list[Relation] = []
    links: dict[str, Link] = {}
    for i, first in enumerate(names):
        left = source.relations[first]
        for second in names[i:]:
            right = source.relations[second]
            for s, sort_s in enumerate(left.symbol.sort_signature):
                for t, sort_t in enumerate(right.symbol.sort_signature):
                    if sort_s != sort_t:
                        continue
                    by_value: dict[Element, list] = {}
                    for b in right.tuples:
                        by_value.setdefault(b[t], []).append(b)
                    pairs = [
                        ((first, a), (second, b))
                        for a in left.tuples
                        for b in by_value.get(a[s], ())
                    ]
                    name = link_name(first, second, s, t)
                    relations.append(make_relation(name, (first, second), pairs))
                    links[name] = (first, second, s, t)
    logger.debug("b(H) has %d sorts and %d binary relations", len(sorts), len(relations))
    return Binarization(make_structure(sorts, relations), source, sort_relations, links)


def binarize_instance(instance: CspInstance, binarization: Binarization) -> CspInstance:
    """Instance over b(H) with one variable per constraint of P.

    Variables of P that occur in no constraint first get a sort-membership
    constraint. Every further occurrence of a variable is linked to its first
    occurrence.

    Raises:
        InstanceError: If a constraint names a relation unknown to H
    """
    if any(c.relation == EQUALITY for c in instance.constraints):
        instance = eliminate_equality(instance)
    source = binarization.source
    constraints = list(instance.constraints)
    used = instance.constrained_variables()
    for v, sort in instance.variables.items():
        if v not in used:
            constraints.append(Constraint((v,), binarization.sort_relations[sort]))
    variables: dict[str, str] = {}
    first_seen: dict[str, tuple[str, str, int]] = {}
    links: list[Constraint] = []
    for index, constraint in enumerate(constraints):
        if constraint.relation not in source.relations:
            raise InstanceError(f"Constraint uses unknown relation {constraint.relation}")
        w = f"c{index}"
        variables[w] = constraint.relation
        for position, v in enumerate(constraint.scope):
            if v not in first_seen:
                first_seen[v] = (w, constraint.relation, position)
                continue
            w0, relation0, position0 = first_seen[v]
            name, reverse = binarization.link_for(relation0, position0, constraint.relation, position)
            links.append(Constraint((w, w0) if reverse else (w0, w), name))
    return CspInstance(variables, tuple(links))


def debinarize_instance(instance: CspInstance, binarization: Binarization) -> CspInstance:
    """Instance over H whose variables are the classes of linked (w, position) pairs.

    Raises:
        InstanceError: If a constraint is not one of the linking relations
    """
    source = binarization.source
    parent: dict[tuple[str, int], tuple[str, int]] = {}
    order: dict[tuple[str, int], int] = {}
    for w, relation in instance.variables.items():
        for position in range(source.relations[relation].arity):
            parent[(w, position)] = (w, position)
            order[(w, position)] = len(order)

    def find(item: tuple[str, int]) -> tuple[str, int]:
        while parent[item] != item:
            parent[item] = parent[parent[item]]
            item = parent[item]
        return item

    for constraint in instance.constraints:
        link = binarization.links.get(constraint.relation)
        if link is None:
            raise InstanceError(f"{constraint.relation} is not a relation of b(H)")
        _, _, s, t = link
        a, b = find((constraint.scope[0], s)), find((constraint.scope[1], t))
        if a != b:
            keep, drop = sorted((a, b), key=order.__getitem__)
            parent[drop] = keep

    def name(item: tuple[str, int]) -> str:
        root = find(item)
        return f"{root[0]}.{root[1]}"

    variables: dict[str, str] = {}
    constraints: list[Constraint] = []
    for w, relation in instance.variables.items():
        signature = source.relations[relation].symbol.sort_signature
        scope = tuple(name((w, position)) for position in range(len(signature)))
        for v, sort in zip(scope, signature):
            variables.setdefault(v, sort)
        constraints.append(Constraint(scope, relation))
    return CspInstance(variables, tuple(constraints))


def transport_operation(operation: Operation, binarization: Binarization) -> Operation:
    """f^b: f applied coordinate-wise to tuples of each sort of b(H).

    Raises:
        StructureError: If f maps tuples of some Q_i outside Q_i
    """
    table: dict[tuple, Element] = {}
    for name, elements in binarization.structure.sorts.items():
        members = binarization.source.relations[name].tuple_set
        for args in itertools.product(elements, repeat=operation.arity):
            image = operation.apply(*(t for _, t in args))
            if image not in members:
                raise StructureError(f"Operation does not preserve {name}")
            table[args] = (name, image)
    return Operation(operation.arity, table)


def recover_operation(operation: Operation, binarization: Binarization) -> Operation:
    """Operation on H read off the unary sort relations of b(H)."""
    table: dict[tuple, Element] = {}
    for sort, relation in binarization.sort_relations.items():
        for args in itertools.product(binarization.source.sorts[sort], repeat=operation.arity):
            _, image = operation(*((relation, (a,)) for a in args))
            table[args] = image[0]
    return Operation(operation.arity, table)


def transport_automorphism(automorphism: Automorphism, binarization: Binarization) -> Automorphism:
    """π^b: (Q_i, t) ↦ (Q_i, π(t))."""
    return Automorphism(
        {
            (name, t): (name, automorphism.apply(t))
            for name, elements in binarization.structure.sorts.items()
            for _, t in elements
        }
    )


def recover_automorphism(automorphism: Automorphism, binarization: Binarization) -> Automorphism:
    """Automorphism of H read off the unary sort relations of b(H)."""
    mapping = {}
    for sort, relation in binarization.sort_relations.items():
        for a in binarization.source.sorts[sort]:
            _, image = automorphism((relation, (a,)))
            mapping[a] = image[0]
    return Automorphism(mapping)
