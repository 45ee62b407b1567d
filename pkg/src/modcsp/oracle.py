"""Brute-force exact counting of CSP solutions and homomorphisms.

Every faster algorithm in the package is checked against these functions, so
they stay plain exhaustive search: variables are assigned in order of
decreasing constraint degree and each constraint is tested as soon as its
scope is fully assigned. Variables that occur in no constraint are not
enumerated; they multiply the count by the size of their domain.
"""

import itertools
import logging
from collections import Counter
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence

from modcsp.const import EQUALITY, MAX_SEARCH_NODES, guard_limit
from modcsp.core import (
    check_instance,
    element_variables,
    factor_structure,
    quotient_map,
    structure_to_instance,
)
from modcsp.exceptions import GuardExceededError, PreconditionError, StructureError
from modcsp.models import (
    Assignment,
    CspInstance,
    DistinguishedStructure,
    Element,
    ElementMap,
    ElementTuple,
    HomCount,
    MultiSortedStructure,
)
from modcsp.partitions import is_bottom, sort_partitions

logger = logging.getLogger(__name__)

HomOracle = Callable[[DistinguishedStructure, DistinguishedStructure], int]


def is_prime(p: int) -> bool:
    """Primality by trial division."""
    if p < 2:
        return False
    divisor = 2
    while divisor * divisor <= p:
        if p % divisor == 0:
            return False
        divisor += 1
    return True


def require_prime(p: int) -> None:
    """Raise PreconditionError unless p is prime."""
    if not is_prime(p):
        raise PreconditionError(f"Modulus {p} is not prime", condition="prime-modulus")


class _Search:
    """Backtracking search over one instance."""

    def __init__(
        self,
        instance: CspInstance,
        structure: MultiSortedStructure,
        domains: Mapping[str, Iterable[Element]] | None = None,
        injective: bool = False,
    ) -> None:
        check_instance(instance, structure)
        self.instance = instance
        self.injective = injective
        self.domains: dict[str, tuple[Element, ...]] = {}
        for variable, sort in instance.variables.items():
            allowed = structure.elements(sort)
            if domains is not None and variable in domains:
                chosen = set(domains[variable])
                allowed = tuple(e for e in allowed if e in chosen)
            self.domains[variable] = allowed

        degree = Counter(v for c in instance.constraints for v in c.scope)
        index = {v: i for i, v in enumerate(instance.variables)}
        searched = [v for v in instance.variables if degree[v] or injective]
        self.order = sorted(searched, key=lambda v: (-degree[v], index[v]))
        self.free = [v for v in instance.variables if v not in set(self.order)]
        position = {v: i for i, v in enumerate(self.order)}

        self.checks: list[list[tuple[tuple[str, ...], frozenset | None]]] = [
            [] for _ in self.order
        ]
        for constraint in instance.constraints:
            if not constraint.scope:
                continue
            if constraint.relation == EQUALITY and EQUALITY not in structure.relations:
                allowed_tuples = None
            else:
                allowed_tuples = structure.relations[constraint.relation].tuple_set
            last = max(position[v] for v in constraint.scope)
            self.checks[last].append((constraint.scope, allowed_tuples))
        self.empty_constraints = [
            c for c in instance.constraints if not c.scope
        ]
        self.structure = structure
        self.limit = guard_limit(MAX_SEARCH_NODES)
        self.nodes = 0

    def _nullary_ok(self) -> bool:
        for constraint in self.empty_constraints:
            if () not in self.structure.relations[constraint.relation].tuple_set:
                return False
        return True

    def _consistent(self, level: int, assignment: Assignment) -> bool:
        for scope, allowed in self.checks[level]:
            if allowed is None:
                if assignment[scope[0]] != assignment[scope[1]]:
                    return False
            elif tuple(assignment[v] for v in scope) not in allowed:
                return False
        return True

    def _tick(self) -> None:
        self.nodes += 1
        if self.limit is not None and self.nodes > self.limit:
            raise GuardExceededError(
                f"Search exceeded {self.limit} nodes", limit=self.limit, size=self.nodes
            )

    def partial_solutions(self) -> Iterator[Assignment]:
        """Assignments of the searched variables satisfying every constraint."""
        if not self._nullary_ok():
            return
        assignment: Assignment = {}
        used: set[Element] = set()

        def extend(level: int) -> Iterator[Assignment]:
            if level == len(self.order):
                yield dict(assignment)
                return
            variable = self.order[level]
            for value in self.domains[variable]:
                if self.injective and value in used:
                    continue
                self._tick()
                assignment[variable] = value
                if self._consistent(level, assignment):
                    used.add(value)
                    yield from extend(level + 1)
                    used.discard(value)
                del assignment[variable]

        yield from extend(0)

    def count(self) -> int:
        if not self._nullary_ok():
            return 0
        assignment: Assignment = {}
        used: set[Element] = set()

        def extend(level: int) -> int:
            if level == len(self.order):
                return 1
            variable = self.order[level]
            total = 0
            for value in self.domains[variable]:
                if self.injective and value in used:
                    continue
                self._tick()
                assignment[variable] = value
                if self._consistent(level, assignment):
                    used.add(value)
                    total += extend(level + 1)
                    used.discard(value)
                del assignment[variable]
            return total

        total = extend(0)
        for variable in self.free:
            total *= len(self.domains[variable])
        logger.debug(
            "Counted %d solutions over %d variables in %d nodes",
            total,
            len(self.instance.variables),
            self.nodes,
        )
        return total


def enumerate_solutions(
    instance: CspInstance,
    structure: MultiSortedStructure,
    domains: Mapping[str, Iterable[Element]] | None = None,
) -> Iterator[Assignment]:
    """Yield every solution, including all values of unconstrained variables."""
    search = _Search(instance, structure, domains)
    free_domains = [search.domains[v] for v in search.free]
    for partial in search.partial_solutions():
        for values in itertools.product(*free_domains):
            solution = dict(partial)
            solution.update(zip(search.free, values))
            yield {v: solution[v] for v in instance.variables}


def is_satisfiable(
    instance: CspInstance,
    structure: MultiSortedStructure,
    domains: Mapping[str, Iterable[Element]] | None = None,
) -> bool:
    search = _Search(instance, structure, domains)
    if any(not search.domains[v] for v in search.free):
        return False
    return next(search.partial_solutions(), None) is not None


def count_solutions(
    instance: CspInstance,
    structure: MultiSortedStructure,
    modulus: int | None = None,
    domains: Mapping[str, Iterable[Element]] | None = None,
) -> HomCount:
    """Exact number of solutions, optionally with a prime modulus attached.

    Raises:
        InstanceError: If the instance does not fit the structure
        PreconditionError: If the modulus is not prime
    """
    if modulus is not None:
        require_prime(modulus)
    return HomCount(_Search(instance, structure, domains).count(), modulus)


def _hom_instance(
    source: MultiSortedStructure, target: MultiSortedStructure
) -> tuple[CspInstance, dict[Element, str]]:
    if not source.is_similar(target):
        raise StructureError("Structures are not similar (signature mismatch)")
    return structure_to_instance(source), element_variables(source)


def count_hom(
    source: MultiSortedStructure,
    target: MultiSortedStructure,
    modulus: int | None = None,
) -> HomCount:
    """hom(G, H), the number of homomorphisms from source to target."""
    instance, _ = _hom_instance(source, target)
    return count_solutions(instance, target, modulus)


def count_hom_mod(source: MultiSortedStructure, target: MultiSortedStructure, p: int) -> int:
    return count_hom(source, target, p).reduced


def enumerate_homomorphisms(
    source: MultiSortedStructure, target: MultiSortedStructure
) -> Iterator[ElementMap]:
    instance, names = _hom_instance(source, target)
    for solution in enumerate_solutions(instance, target):
        yield {e: solution[names[e]] for e in source.universe}


def _anchor_domains(
    source: DistinguishedStructure, target: DistinguishedStructure
) -> dict[str, tuple[Element, ...]] | None:
    if len(source.anchors) != len(target.anchors):
        raise StructureError("Anchor tuples have different lengths")
    names = element_variables(source.structure)
    pinned: dict[Element, Element] = {}
    for x, y in zip(source.anchors, target.anchors):
        if pinned.get(x, y) != y:
            return None
        pinned[x] = y
    return {names[x]: (y,) for x, y in pinned.items()}


def count_hom_anchored(source: DistinguishedStructure, target: DistinguishedStructure) -> int:
    """Homomorphisms sending the i-th anchor of source to the i-th anchor of target."""
    instance, _ = _hom_instance(source.structure, target.structure)
    domains = _anchor_domains(source, target)
    if domains is None:
        return 0
    return _Search(instance, target.structure, domains).count()


def same_equality_type(left: Sequence[Element], right: Sequence[Element]) -> bool:
    if len(left) != len(right):
        return False
    return all(
        (left[i] == left[j]) == (right[i] == right[j])
        for i in range(len(left))
        for j in range(i + 1, len(left))
    )


def count_inj(source: DistinguishedStructure, target: DistinguishedStructure) -> int:
    """Injective homomorphisms respecting anchors; 0 when equality types differ."""
    if not same_equality_type(source.anchors, target.anchors):
        return 0
    instance, _ = _hom_instance(source.structure, target.structure)
    domains = _anchor_domains(source, target)
    if domains is None:
        return 0
    return _Search(instance, target.structure, domains, injective=True).count()


def inj_from_hom_by_mobius(
    source: DistinguishedStructure,
    target: DistinguishedStructure,
    hom_oracle: HomOracle = count_hom_anchored,
) -> int:
    """inj((K,z),(G,x)) from homomorphism counts on factor structures.

    Uses hom(K) = Σ_θ inj(K/θ) over per-sort partitions θ of K, so
    inj(K) = hom(K) - Σ_{θ ≠ 0̱} inj(K/θ).
    """
    structure = source.structure
    total = hom_oracle(source, target)
    for partition in sort_partitions(structure.sorts):
        if is_bottom(partition):
            continue
        mapping = quotient_map(structure, partition)
        factor = DistinguishedStructure(
            factor_structure(structure, partition),
            tuple(mapping[z] for z in source.anchors),
        )
        total -= inj_from_hom_by_mobius(factor, target, hom_oracle)
    return total


def count_ext(
    tuples: Iterable[ElementTuple], positions: Sequence[int], partial: Sequence[Element]
) -> int:
    """Number of tuples whose projection onto ``positions`` equals ``partial``."""
    positions = tuple(positions)
    partial = tuple(partial)
    return sum(1 for t in tuples if tuple(t[i] for i in positions) == partial)


def count_ext_mod(
    tuples: Iterable[ElementTuple],
    positions: Sequence[int],
    partial: Sequence[Element],
    p: int,
) -> int:
    require_prime(p)
    return count_ext(tuples, positions, partial) % p


def extension_counts(
    tuples: Iterable[ElementTuple], positions: Sequence[int]
) -> Counter:
    """Counter of projections onto ``positions`` (the #ext table)."""
    positions = tuple(positions)
    return Counter(tuple(t[i] for i in positions) for t in tuples)


def modular_projection(
    tuples: Iterable[ElementTuple], positions: Sequence[int], p: int
) -> set[ElementTuple]:
    """pr^p: projections whose extension count is nonzero mod p."""
    require_prime(p)
    return {x for x, n in extension_counts(tuples, positions).items() if n % p}
