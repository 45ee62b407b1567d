"""Expansions: equality and constant elimination, indicator problems, polymorphisms."""

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cache

from modcsp.const import (
    ENDOMORPHISM_RELATION,
    EQUALITY,
    MAX_ENDOMORPHISMS,
    MAX_INDICATOR_CONSTRAINTS,
    MAX_MOBIUS_UNIVERSE,
    guard_limit,
)
from modcsp.core import constant_name, make_relation
from modcsp.automorphism import enumerate_automorphisms, is_p_rigid
from modcsp.exceptions import (
    FormulaError,
    GuardExceededError,
    InstanceError,
    NotPRigidError,
    OracleMismatchError,
    StructureError,
)
from modcsp.models import (
    Constraint,
    CspInstance,
    Element,
    MppFormula,
    MultiSortedStructure,
    Operation,
    Relation,
    element_label,
)
from modcsp.oracle import count_solutions, enumerate_homomorphisms, require_prime
from modcsp.partitions import (
    SortPartition,
    bell_number,
    mobius_by_recursion,
    mobius_from_bottom,
    set_partitions,
    sort_partitions,
)
from modcsp.search import TableConstraint, solve_first

logger = logging.getLogger(__name__)

CountOracle = Callable[[CspInstance, MultiSortedStructure], int]


def _oracle_count(instance: CspInstance, structure: MultiSortedStructure) -> int:
    return count_solutions(instance, structure).exact


def _check_guard(size: int, default: int, what: str) -> None:
    limit = guard_limit(default)
    if limit is not None and size > limit:
        raise GuardExceededError(f"{what} {size} exceeds guard {limit}", limit=limit, size=size)


def eliminate_equality(instance: CspInstance) -> CspInstance:
    """Remove ``=`` constraints by merging variables (union-find).

    The representative of a class is its first variable in instance order.

    Raises:
        InstanceError: If an equality relates variables of different sorts
    """
    parent = {v: v for v in instance.variables}
    index = {v: i for i, v in enumerate(instance.variables)}

    def find(v: str) -> str:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    kept: list[Constraint] = []
    for constraint in instance.constraints:
        if constraint.relation != EQUALITY:
            kept.append(constraint)
            continue
        if len(constraint.scope) != 2:
            raise InstanceError(f"Equality must be binary, got scope {constraint.scope}")
        u, v = constraint.scope
        if instance.variables[u] != instance.variables[v]:
            raise InstanceError(
                f"Equality between variables of different sorts: {u}, {v}"
            )
        a, b = find(u), find(v)
        if a != b:
            keep, drop = (a, b) if index[a] < index[b] else (b, a)
            parent[drop] = keep

    variables = {v: s for v, s in instance.variables.items() if find(v) == v}
    constraints = tuple(
        Constraint(tuple(find(v) for v in c.scope), c.relation) for c in kept
    )
    return CspInstance(variables, constraints)


def indicator_variable(args: Sequence[Element]) -> str:
    """Variable name of the indicator problem standing for f(args)."""
    return "f(" + ",".join(element_label(a) for a in args) + ")"


def indicator_problem(structure: MultiSortedStructure, n: int) -> CspInstance:
    """The n-th indicator problem; its solutions are the n-ary polymorphisms.

    Raises:
        StructureError: If n < 1
        GuardExceededError: If the number of constraints exceeds the guard
    """
    if n < 1:
        raise StructureError(f"Indicator arity must be positive, got {n}")
    size = sum(len(r) ** n for r in structure.relations.values())
    _check_guard(size, MAX_INDICATOR_CONSTRAINTS, "Indicator problem size")
    variables = {
        indicator_variable(args): sort
        for sort, elements in structure.sorts.items()
        for args in itertools.product(elements, repeat=n)
    }
    constraints: list[Constraint] = []
    seen: set[tuple] = set()
    for name, relation in structure.relations.items():
        for rows in itertools.product(relation.tuples, repeat=n):
            scope = tuple(indicator_variable(column) for column in zip(*rows))
            if (scope, name) not in seen:
                seen.add((scope, name))
                constraints.append(Constraint(scope, name))
    logger.debug("Indicator problem I_%d: %d variables, %d constraints", n, len(variables), len(constraints))
    return CspInstance(variables, tuple(constraints))


def operation_from_solution(
    solution: dict[str, Element], structure: MultiSortedStructure, n: int
) -> Operation:
    """Read an n-ary operation table off a solution of the indicator problem."""
    table = {
        args: solution[indicator_variable(args)]
        for elements in structure.sorts.values()
        for args in itertools.product(elements, repeat=n)
    }
    return Operation(n, table)


def is_polymorphism(structure: MultiSortedStructure, operation: Operation) -> bool:
    """Whether the operation preserves every relation of the structure."""
    for relation in structure.relations.values():
        tuples = relation.tuple_set
        for rows in itertools.product(relation.tuples, repeat=operation.arity):
            if operation.apply(*rows) not in tuples:
                return False
    return True


def satisfies_maltsev_identities(structure: MultiSortedStructure, operation: Operation) -> bool:
    """f(a,a,b) = f(b,a,a) = b on every sort."""
    if operation.arity != 3:
        return False
    for elements in structure.sorts.values():
        for a in elements:
            for b in elements:
                if operation(a, a, b) != b or operation(b, a, a) != b:
                    return False
    return True


def is_maltsev(structure: MultiSortedStructure, operation: Operation) -> bool:
    return satisfies_maltsev_identities(structure, operation) and is_polymorphism(
        structure, operation
    )


def _table_constraints(
    instance: CspInstance, structure: MultiSortedStructure
) -> list[TableConstraint]:
    return [
        TableConstraint(c.scope, structure.relations[c.relation].tuples)
        for c in instance.constraints
    ]


def find_maltsev(structure: MultiSortedStructure) -> Operation | None:
    """Search I_3(H) pinned by the Mal'tsev identities; None when none exists."""
    instance = indicator_problem(structure, 3)
    domains: dict[str, set[Element]] = {
        v: set(structure.elements(s)) for v, s in instance.variables.items()
    }
    for elements in structure.sorts.values():
        for a in elements:
            for b in elements:
                for args in ((a, a, b), (b, a, a)):
                    name = indicator_variable(args)
                    domains[name] &= {b}
    if any(not values for values in domains.values()):
        return None
    solution = solve_first(
        domains, _table_constraints(instance, structure), instance.variable_names
    )
    if solution is None:
        logger.debug("No Mal'tsev polymorphism")
        return None
    return operation_from_solution(solution, structure, 3)


def endomorphism_relation(structure: MultiSortedStructure) -> tuple[tuple[Element, ...], Relation]:
    """The relation Q of graphs of endomorphisms.

    Coordinates follow the universe order of the structure; each tuple lists
    φ(a) for every element a.

    Returns:
        The coordinate elements and the relation named ``Q_end``
    """
    _check_guard(structure.universe_size, MAX_MOBIUS_UNIVERSE, "Universe size")
    limit = guard_limit(MAX_ENDOMORPHISMS)
    coordinates = structure.universe
    tuples = []
    for mapping in enumerate_homomorphisms(structure, structure):
        tuples.append(tuple(mapping[a] for a in coordinates))
        if limit is not None and len(tuples) > limit:
            raise GuardExceededError(
                f"More than {limit} endomorphisms", limit=limit, size=len(tuples)
            )
    relation = make_relation(
        ENDOMORPHISM_RELATION, (structure.sort_of(a) for a in coordinates), tuples
    )
    return coordinates, relation


def conjunctive_expand(
    instance: CspInstance, relation_name: str, definition: MppFormula
) -> CspInstance:
    """Replace every ``relation_name`` constraint by the atoms of its definition.

    Raises:
        FormulaError: If the definition is quantified or its free variables do
            not match the constraint arity
    """
    if definition.blocks:
        raise FormulaError("Conjunctive definitions must be quantifier-free")
    free = tuple(definition.free)
    constraints: list[Constraint] = []
    for constraint in instance.constraints:
        if constraint.relation != relation_name:
            constraints.append(constraint)
            continue
        if len(constraint.scope) != len(free):
            raise FormulaError(
                f"Definition of {relation_name} has {len(free)} variables, "
                f"constraint has {len(constraint.scope)}"
            )
        substitution = dict(zip(free, constraint.scope))
        for atom in definition.atoms:
            constraints.append(
                Constraint(tuple(substitution[v] for v in atom.args), atom.relation)
            )
    expanded = CspInstance(instance.variables, tuple(constraints))
    if any(c.relation == EQUALITY for c in constraints):
        expanded = eliminate_equality(expanded)
    return expanded


@cache
def _cross_check_block_weights(size: int) -> None:
    """Compare the closed form with the recursion on the lattice of one block.

    The weight of a family factors over its blocks, so one check per block
    size covers every structure.
    """
    lattice = list(set_partitions(tuple(range(size))))
    expected = mobius_by_recursion([{"B": theta} for theta in lattice])[-1]
    actual = mobius_from_bottom({"B": lattice[-1]})
    if actual != expected:
        raise OracleMismatchError(
            f"Closed-form Möbius weight of a block of size {size} disagrees with recursion",
            expected=expected,
            actual=actual,
        )
    logger.debug("Möbius weight of a block of size %d cross-checked: %d", size, actual)


@dataclass(frozen=True)
class PartitionWeight:
    """Möbius weight w(θ) = μ(0̱, θ) of a per-sort partition."""

    partition: SortPartition
    weight: int


def partition_mobius_weights(
    structure: MultiSortedStructure, cross_check: bool = False
) -> list[PartitionWeight]:
    """Weights with N(0̱) = Σ_θ w(θ)·M(θ) over Part(H); the bottom comes first.

    The closed form is checked against the recursion once per block size and
    process. ``cross_check`` also runs the recursion on the whole product
    lattice of this structure.

    Raises:
        GuardExceededError: If the universe is larger than the guard allows
        OracleMismatchError: If ``cross_check`` finds the closed form wrong
    """
    _check_guard(structure.universe_size, MAX_MOBIUS_UNIVERSE, "Universe size")
    sizes = [len(elements) for elements in structure.sorts.values()]
    logger.debug(
        "Partition lattice has %d members", math.prod(bell_number(n) for n in sizes)
    )
    for size in range(2, max(sizes, default=0) + 1):
        _cross_check_block_weights(size)
    partitions = list(sort_partitions(structure.sorts))
    weights = [PartitionWeight(theta, mobius_from_bottom(theta)) for theta in partitions]
    if cross_check:
        recursive = mobius_by_recursion(partitions)
        for entry, expected in zip(weights, recursive):
            if entry.weight != expected:
                raise OracleMismatchError(
                    "Closed-form Möbius weight disagrees with recursion",
                    expected=expected,
                    actual=entry.weight,
                )
    return weights


def split_constants(
    structure: MultiSortedStructure,
) -> tuple[MultiSortedStructure, dict[str, Element]]:
    """Separate the constant relations C_a = {(a)} from the rest of a structure."""
    constants: dict[str, Element] = {}
    for element in structure.universe:
        name = constant_name(element)
        relation = structure.relations.get(name)
        if relation is not None and relation.tuples == ((element,),):
            constants[name] = element
    return structure.without_relations(constants), constants


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    while name in taken:
        name = "_" + name
    taken.add(name)
    return name


def count_with_constants(
    instance: CspInstance,
    structure: MultiSortedStructure,
    p: int,
    count_oracle: CountOracle | None = None,
) -> int:
    """Count solutions over H^c modulo p using only counts over H, =, and Q.

    ``structure`` is H^c; the base H is obtained by dropping its constant
    relations and must be p-rigid.

    Args:
        instance: Instance over H^c
        structure: H expanded by constants
        p: Prime modulus
        count_oracle: Exact counter for instances over H + Q (defaults to the brute-force oracle)

    Returns:
        The number of solutions modulo p

    Raises:
        NotPRigidError: If the base structure has an automorphism of order p
        OracleMismatchError: If N(0̱) is not divisible by |Aut(H)|, which means the
            count oracle is wrong
    """
    require_prime(p)
    count_oracle = count_oracle or _oracle_count
    base, constants = split_constants(structure)
    if not is_p_rigid(base, p):
        raise NotPRigidError(
            f"Structure has an automorphism of order {p}", condition="p-rigid"
        )
    group_order = len(enumerate_automorphisms(base))
    coordinates, q_relation = endomorphism_relation(base)
    target = base.with_relations([q_relation])

    taken = set(instance.variables)
    anchor = {a: _fresh(f"v[{element_label(a)}]", taken) for a in coordinates}
    variables = dict(instance.variables)
    variables.update({anchor[a]: base.sort_of(a) for a in coordinates})
    constraints: list[Constraint] = [
        Constraint(tuple(anchor[a] for a in coordinates), ENDOMORPHISM_RELATION)
    ]
    for constraint in instance.constraints:
        if constraint.relation in constants:
            element = constants[constraint.relation]
            constraints.append(Constraint((constraint.scope[0], anchor[element]), EQUALITY))
        else:
            constraints.append(constraint)
    extended = CspInstance(variables, tuple(constraints))

    injective = 0
    for entry in partition_mobius_weights(base):
        links = [
            Constraint((anchor[block[0]], anchor[other]), EQUALITY)
            for blocks in entry.partition.values()
            for block in blocks
            for other in block[1:]
        ]
        merged = eliminate_equality(extended.with_constraints(links))
        injective += entry.weight * count_oracle(merged, target)
    if injective % group_order:
        raise OracleMismatchError(
            f"N(0) = {injective} is not divisible by |Aut| = {group_order}",
            expected=0,
            actual=injective % group_order,
        )
    logger.debug("N(0) = %d, |Aut| = %d", injective, group_order)
    return (injective * pow(group_order, -1, p)) % p


__all__ = [
    "CountOracle",
    "PartitionWeight",
    "conjunctive_expand",
    "count_with_constants",
    "eliminate_equality",
    "endomorphism_relation",
    "find_maltsev",
    "indicator_problem",
    "indicator_variable",
    "is_maltsev",
    "is_polymorphism",
    "operation_from_solution",
    "partition_mobius_weights",
    "satisfies_maltsev_identities",
    "split_constants",
]
