"""Operations on multi-sorted structures and CSP instances."""

import itertools
import logging
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping

from modcsp.const import CONSTANT_PREFIX, EQUALITY
from modcsp.exceptions import InstanceError, StructureError
from modcsp.models import (
    Constraint,
    CspInstance,
    DistinguishedStructure,
    Element,
    ElementMap,
    MultiSortedStructure,
    Relation,
    RelationSymbol,
    element_key,
    element_label,
    sort_elements,
)

logger = logging.getLogger(__name__)


def make_relation(
    name: str, sort_signature: Iterable[str], tuples: Iterable[Iterable[Element]]
) -> Relation:
    """Build a relation from plain Python values."""
    return Relation(
        RelationSymbol(name, tuple(sort_signature)), tuple(tuple(t) for t in tuples)
    )


def make_structure(
    sorts: Mapping[str, Iterable[Element]], relations: Iterable[Relation] = ()
) -> MultiSortedStructure:
    """Build a structure from a sort mapping and a list of relations."""
    return MultiSortedStructure(
        {name: tuple(elements) for name, elements in sorts.items()},
        {relation.name: relation for relation in relations},
    )


def validate_structure(structure: MultiSortedStructure) -> list[str]:
    """Check the type invariants of a structure.

    Args:
        structure: Structure to check

    Returns:
        One message per violation; empty when the structure is well formed
    """
    violations: list[str] = []
    seen: dict[Element, str] = {}
    for sort, elements in structure.sorts.items():
        for element in elements:
            if element in seen:
                violations.append(
                    f"sort-overlap: element {element_label(element)} is in sorts "
                    f"{seen[element]} and {sort}"
                )
            else:
                seen[element] = sort
    for name, relation in structure.relations.items():
        if relation.name != name:
            violations.append(f"name-mismatch: relation key {name} holds symbol {relation.name}")
        signature = relation.symbol.sort_signature
        unknown = [s for s in signature if s not in structure.sorts]
        if unknown:
            violations.append(f"unknown-sort: relation {name} uses sorts {unknown}")
            continue
        members = [set(structure.sorts[s]) for s in signature]
        for t in relation.tuples:
            if len(t) != len(signature):
                violations.append(
                    f"arity-mismatch: relation {name} tuple {element_label(t)} "
                    f"has length {len(t)}, expected {len(signature)}"
                )
                continue
            for position, (value, allowed) in enumerate(zip(t, members)):
                if value not in allowed:
                    violations.append(
                        f"unknown-element: relation {name} tuple {element_label(t)} "
                        f"position {position} is not in sort {signature[position]}"
                    )
    return violations


def validate_instance(instance: CspInstance, structure: MultiSortedStructure) -> list[str]:
    """Check an instance against the signature of a target structure."""
    violations: list[str] = []
    for variable, sort in instance.variables.items():
        if sort not in structure.sorts:
            violations.append(f"unknown-sort: variable {variable} has sort {sort}")
    for index, constraint in enumerate(instance.constraints):
        sorts = [instance.variables.get(v) for v in constraint.scope]
        if constraint.relation == EQUALITY and EQUALITY not in structure.relations:
            if len(sorts) != 2 or sorts[0] != sorts[1]:
                violations.append(
                    f"equality-mismatch: constraint {index} relates {constraint.scope}"
                )
            continue
        if constraint.relation not in structure.relations:
            violations.append(
                f"unknown-relation: constraint {index} uses {constraint.relation}"
            )
            continue
        signature = structure.relations[constraint.relation].symbol.sort_signature
        if len(signature) != len(sorts):
            violations.append(
                f"arity-mismatch: constraint {index} on {constraint.relation} "
                f"has {len(sorts)} variables, expected {len(signature)}"
            )
        elif tuple(sorts) != signature:
            violations.append(
                f"sort-mismatch: constraint {index} on {constraint.relation} "
                f"has sorts {tuple(sorts)}, expected {signature}"
            )
    return violations


def check_instance(instance: CspInstance, structure: MultiSortedStructure) -> None:
    """Raise InstanceError if the instance does not fit the structure."""
    violations = validate_instance(instance, structure)
    if violations:
        raise InstanceError("; ".join(violations))


def _require_similar(left: MultiSortedStructure, right: MultiSortedStructure) -> None:
    if not left.is_similar(right):
        raise StructureError("Structures are not similar (signature mismatch)")


def direct_product(
    left: MultiSortedStructure, right: MultiSortedStructure
) -> MultiSortedStructure:
    """Direct product; sort i is H_i × G_i and elements are pairs.

    Raises:
        StructureError: If the structures have different signatures
    """
    _require_similar(left, right)
    sorts = {
        name: [(a, b) for a in left.sorts[name] for b in right.sorts[name]]
        for name in left.sort_names
    }
    relations = []
    for name, relation in left.relations.items():
        other = right.relations[name]
        relations.append(
            Relation(
                relation.symbol,
                tuple(tuple(zip(t, u)) for t in relation.tuples for u in other.tuples),
            )
        )
    return make_structure(sorts, relations)


def power(structure: MultiSortedStructure, exponent: int) -> MultiSortedStructure:
    """The exponent-th direct power; elements are exponent-tuples.

    Raises:
        StructureError: If exponent is smaller than 1
    """
    if exponent < 1:
        raise StructureError(f"Power exponent must be positive, got {exponent}")
    sorts = {
        name: list(itertools.product(elements, repeat=exponent))
        for name, elements in structure.sorts.items()
    }
    relations = []
    for relation in structure.relations.values():
        relations.append(
            Relation(
                relation.symbol,
                tuple(
                    tuple(zip(*rows))
                    for rows in itertools.product(relation.tuples, repeat=exponent)
                ),
            )
        )
    return make_structure(sorts, relations)


def induced_substructure(
    structure: MultiSortedStructure, subsets: Mapping[str, Iterable[Element]]
) -> MultiSortedStructure:
    """Substructure induced by one subset per sort (missing sorts stay full).

    Raises:
        StructureError: If a subset element lies outside its sort
    """
    chosen: dict[str, tuple[Element, ...]] = {}
    for name, elements in structure.sorts.items():
        if name not in subsets:
            chosen[name] = elements
            continue
        subset = sort_elements(subsets[name])
        outside = set(subset) - set(elements)
        if outside:
            raise StructureError(
                f"Elements {sorted(map(element_label, outside))} are not in sort {name}"
            )
        chosen[name] = subset
    for name in subsets:
        if name not in structure.sorts:
            raise StructureError(f"Unknown sort: {name}")
    members = {name: set(elements) for name, elements in chosen.items()}
    relations = []
    for relation in structure.relations.values():
        signature = relation.symbol.sort_signature
        relations.append(
            Relation(
                relation.symbol,
                tuple(
                    t
                    for t in relation.tuples
                    if all(v in members[s] for v, s in zip(t, signature))
                ),
            )
        )
    return make_structure(chosen, relations)


def quotient_map(
    structure: MultiSortedStructure,
    partition: Mapping[str, Iterable[Iterable[Element]]],
) -> ElementMap:
    """Map each element to its class; a class is the tuple of its sorted members.

    Raises:
        StructureError: If the blocks of a sort do not partition it
    """
    mapping: ElementMap = {}
    for name, elements in structure.sorts.items():
        blocks = partition.get(name)
        if blocks is None:
            blocks = [[e] for e in elements]
        covered: list[Element] = []
        for block in blocks:
            members = sort_elements(block)
            if not members:
                raise StructureError(f"Empty block in partition of sort {name}")
            for member in members:
                mapping[member] = members
            covered.extend(block)
        if len(covered) != len(elements) or set(covered) != set(elements):
            raise StructureError(f"Blocks do not form an equivalence on sort {name}")
    return mapping


def factor_structure(
    structure: MultiSortedStructure,
    partition: Mapping[str, Iterable[Iterable[Element]]],
) -> MultiSortedStructure:
    """Factor structure H/θ for per-sort equivalences given as blocks.

    Sorts missing from ``partition`` are factored by equality.
    """
    mapping = quotient_map(structure, partition)
    sorts = {
        name: [mapping[e] for e in elements] for name, elements in structure.sorts.items()
    }
    relations = [
        Relation(relation.symbol, tuple(tuple(mapping[v] for v in t) for t in relation.tuples))
        for relation in structure.relations.values()
    ]
    return make_structure(sorts, relations)


def kernel(mapping: ElementMap, structure: MultiSortedStructure) -> dict[str, list[tuple]]:
    """Per-sort kernel partition of a map defined on the universe of a structure."""
    result: dict[str, list[tuple]] = {}
    for name, elements in structure.sorts.items():
        classes: dict[Element, list[Element]] = {}
        for element in elements:
            classes.setdefault(mapping[element], []).append(element)
        result[name] = [tuple(block) for block in classes.values()]
    return result


def compose_maps(first: ElementMap, second: ElementMap) -> ElementMap:
    """Return second ∘ first."""
    return {element: second[image] for element, image in first.items()}


def is_homomorphism(
    mapping: ElementMap, source: MultiSortedStructure, target: MultiSortedStructure
) -> bool:
    """Check whether a map preserves every relation.

    Raises:
        StructureError: If the structures are not similar or the map does not respect sorts
    """
    _require_similar(source, target)
    for name, elements in source.sorts.items():
        allowed = set(target.sorts[name])
        for element in elements:
            if element not in mapping or mapping[element] not in allowed:
                raise StructureError(
                    f"Map sends {element_label(element)} outside sort {name}"
                )
    for name, relation in source.relations.items():
        image = target.relations[name].tuple_set
        for t in relation.tuples:
            if tuple(mapping[v] for v in t) not in image:
                return False
    return True


def _profiles(structure: MultiSortedStructure) -> dict[Element, tuple]:
    counts: dict[Element, Counter] = {e: Counter() for e in structure.universe}
    for name, relation in structure.relations.items():
        for t in relation.tuples:
            for position, value in enumerate(t):
                counts[value][(name, position)] += 1
    return {e: tuple(sorted(c.items())) for e, c in counts.items()}


def iter_isomorphisms(
    source: MultiSortedStructure,
    target: MultiSortedStructure,
    fixed: Mapping[Element, Element] | None = None,
) -> Iterator[ElementMap]:
    """Enumerate isomorphisms in canonical backtracking order.

    Elements of ``source`` are assigned in canonical order and candidates are
    tried in canonical order, so the sequence is lexicographic in the images.
    ``fixed`` pre-assigns some elements (used for anchors).
    """
    if not source.is_similar(target):
        return
    for name in source.sort_names:
        if len(source.sorts[name]) != len(target.sorts[name]):
            return
    for name, relation in source.relations.items():
        if len(relation) != len(target.relations[name]):
            return

    source_profiles = _profiles(source)
    target_profiles = _profiles(target)
    order = [e for name in source.sort_names for e in source.sorts[name]]
    position = {e: i for i, e in enumerate(order)}

    # relation tuples checked at the element that completes them
    checks: list[list[tuple[frozenset, tuple]]] = [[] for _ in order]
    for name, relation in source.relations.items():
        image = target.relations[name].tuple_set
        for t in relation.tuples:
            if t:
                last = max(position[v] for v in t)
                checks[last].append((image, t))

    candidates: list[tuple[Element, ...]] = []
    for element in order:
        sort = source.sort_of(element)
        profile = source_profiles[element]
        candidates.append(
            tuple(c for c in target.sorts[sort] if target_profiles[c] == profile)
        )

    mapping: ElementMap = {}
    used: set[Element] = set()
    fixed = dict(fixed or {})
    for element, image in fixed.items():
        if element not in position:
            raise StructureError(f"Anchor {element_label(element)} not in source")
        if image not in candidates[position[element]]:
            return

    def extend(index: int) -> Iterator[ElementMap]:
        if index == len(order):
            yield dict(mapping)
            return
        element = order[index]
        options = (fixed[element],) if element in fixed else candidates[index]
        for image in options:
            if image in used:
                continue
            mapping[element] = image
            used.add(image)
            if all(tuple(mapping[v] for v in t) in image_set for image_set, t in checks[index]):
                yield from extend(index + 1)
            used.discard(image)
            del mapping[element]

    yield from extend(0)


def find_isomorphism(
    source: MultiSortedStructure,
    target: MultiSortedStructure,
    source_anchors: Iterable[Element] = (),
    target_anchors: Iterable[Element] = (),
) -> ElementMap | None:
    """Return the canonical-first isomorphism, optionally fixing anchors, or None."""
    source_anchors = tuple(source_anchors)
    target_anchors = tuple(target_anchors)
    if len(source_anchors) != len(target_anchors):
        return None
    fixed: dict[Element, Element] = {}
    for x, y in zip(source_anchors, target_anchors):
        if fixed.get(x, y) != y:
            return None
        fixed[x] = y
    if len(set(fixed.values())) != len(fixed):
        return None
    return next(iter_isomorphisms(source, target, fixed), None)


def element_variables(structure: MultiSortedStructure) -> dict[Element, str]:
    """Variable name for each element of a structure viewed as an instance.

    Raises:
        StructureError: If two elements render to the same name
    """
    names = {e: element_label(e) for e in structure.universe}
    if len(set(names.values())) != len(names):
        raise StructureError("Element labels are not unique; cannot name variables")
    return names


def structure_to_instance(structure: MultiSortedStructure) -> CspInstance:
    """Standard view of a structure: one variable per element, one constraint per tuple."""
    names = element_variables(structure)
    variables = {names[e]: structure.sort_of(e) for e in structure.universe}
    constraints = [
        Constraint(tuple(names[v] for v in t), name)
        for name, relation in structure.relations.items()
        for t in relation.tuples
    ]
    return CspInstance(variables, tuple(constraints))


def instance_to_structure(
    instance: CspInstance, target: MultiSortedStructure
) -> MultiSortedStructure:
    """Homomorphism view of an instance against the signature of ``target``.

    Raises:
        InstanceError: If a variable sort or a constraint symbol is unknown
    """
    for variable, sort in instance.variables.items():
        if sort not in target.sorts:
            raise InstanceError(f"Variable {variable} has unknown sort {sort}")
    grouped: dict[str, list[tuple[str, ...]]] = {name: [] for name in target.relations}
    for constraint in instance.constraints:
        if constraint.relation not in grouped:
            raise InstanceError(f"Constraint names unknown symbol {constraint.relation}")
        grouped[constraint.relation].append(constraint.scope)
    sorts = {
        name: [v for v, s in instance.variables.items() if s == name]
        for name in target.sort_names
    }
    relations = [
        Relation(target.relations[name].symbol, tuple(scopes))
        for name, scopes in grouped.items()
    ]
    return make_structure(sorts, relations)


def constant_name(element: Element) -> str:
    """Name of the constant relation C_a."""
    return f"{CONSTANT_PREFIX}{element_label(element)}"


def with_constants(structure: MultiSortedStructure) -> MultiSortedStructure:
    """Expansion H^c by every constant relation (existing ones are kept)."""
    constants = []
    for name, elements in structure.sorts.items():
        for element in elements:
            relation_name = constant_name(element)
            if relation_name not in structure.relations:
                constants.append(make_relation(relation_name, (name,), [(element,)]))
    return structure.with_relations(constants)


def has_all_constants(structure: MultiSortedStructure) -> bool:
    """Whether every element has its constant relation C_a = {(a)}."""
    for name, elements in structure.sorts.items():
        for element in elements:
            relation = structure.relations.get(constant_name(element))
            if relation is None or relation.tuples != ((element,),):
                return False
    return True


def anchored_product(
    left: DistinguishedStructure, right: DistinguishedStructure
) -> DistinguishedStructure:
    """Product (G,x)×(H,y) with anchors (x_i, y_i)."""
    if len(left.anchors) != len(right.anchors):
        raise StructureError("Anchor tuples have different lengths")
    return DistinguishedStructure(
        direct_product(left.structure, right.structure),
        tuple(zip(left.anchors, right.anchors)),
    )


def glue(left: DistinguishedStructure, right: DistinguishedStructure) -> DistinguishedStructure:
    """Gluing (G,x)⊙(H,y): disjoint union with every x_i identified with y_i.

    Elements of the result are ``("L", g)`` or ``("R", h)`` representatives.

    Raises:
        StructureError: On anchor length, sort, or signature mismatch
    """
    _require_similar(left.structure, right.structure)
    if len(left.anchors) != len(right.anchors):
        raise StructureError("Anchor tuples have different lengths")
    parent: dict[Element, Element] = {}

    def find(item: Element) -> Element:
        while parent[item] != item:
            parent[item] = parent[parent[item]]
            item = parent[item]
        return item

    for tag, structure in (("L", left.structure), ("R", right.structure)):
        for element in structure.universe:
            parent[(tag, element)] = (tag, element)
    for x, y in zip(left.anchors, right.anchors):
        if left.structure.sort_of(x) != right.structure.sort_of(y):
            raise StructureError(
                f"Anchors {element_label(x)} and {element_label(y)} have different sorts"
            )
        a, b = find(("L", x)), find(("R", y))
        if a != b:
            keep, drop = sorted((a, b), key=element_key)
            parent[drop] = keep

    sorts: dict[str, set] = {name: set() for name in left.structure.sort_names}
    relations: dict[str, set] = {name: set() for name in left.structure.relations}
    for tag, structure in (("L", left.structure), ("R", right.structure)):
        for name, elements in structure.sorts.items():
            sorts[name].update(find((tag, e)) for e in elements)
        for name, relation in structure.relations.items():
            relations[name].update(
                tuple(find((tag, v)) for v in t) for t in relation.tuples
            )
    glued = make_structure(
        sorts,
        [
            Relation(left.structure.relations[name].symbol, tuple(tuples))
            for name, tuples in relations.items()
        ],
    )
    return DistinguishedStructure(glued, tuple(find(("L", x)) for x in left.anchors))
