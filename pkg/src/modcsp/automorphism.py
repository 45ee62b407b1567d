"""Automorphisms, order-p automorphisms and reduction to the p-rigid core."""

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from functools import cached_property
from math import lcm

from modcsp.core import induced_substructure, is_homomorphism, iter_isomorphisms
from modcsp.exceptions import ConfigurationError, StructureError
from modcsp.models import Element, ElementMap, MultiSortedStructure, element_key
from modcsp.oracle import require_prime

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Automorphism:
    """Permutation of the universe of a structure, one bijection per sort.

    Attributes:
        mapping: Element to image, defined on the whole universe
    """

    mapping: ElementMap

    def __call__(self, element: Element) -> Element:
        return self.mapping[element]

    def apply(self, values: Iterable[Element]) -> tuple[Element, ...]:
        return tuple(self.mapping[v] for v in values)

    def compose(self, other: "Automorphism") -> "Automorphism":
        """self ∘ other (apply ``other`` first)."""
        return Automorphism({e: self.mapping[other.mapping[e]] for e in other.mapping})

    def inverse(self) -> "Automorphism":
        return Automorphism({image: e for e, image in self.mapping.items()})

    def power(self, exponent: int) -> "Automorphism":
        base = self if exponent >= 0 else self.inverse()
        result = Automorphism({e: e for e in self.mapping})
        for _ in range(abs(exponent)):
            result = base.compose(result)
        return result

    @cached_property
    def cycles(self) -> tuple[tuple[Element, ...], ...]:
        """Cycles in canonical order, each starting at its least element."""
        seen: set[Element] = set()
        cycles = []
        for start in sorted(self.mapping, key=element_key):
            if start in seen:
                continue
            cycle = [start]
            seen.add(start)
            current = self.mapping[start]
            while current != start:
                cycle.append(current)
                seen.add(current)
                current = self.mapping[current]
            cycles.append(tuple(cycle))
        return tuple(cycles)

    @cached_property
    def order(self) -> int:
        return lcm(*(len(c) for c in self.cycles)) if self.cycles else 1

    @property
    def is_identity(self) -> bool:
        return all(e == image for e, image in self.mapping.items())

    def fixed_points(self) -> tuple[Element, ...]:
        return tuple(c[0] for c in self.cycles if len(c) == 1)

    def orbit_sizes(self, subset: Iterable[Element] | None = None) -> list[int]:
        """Cycle lengths, optionally only of cycles meeting ``subset``."""
        if subset is None:
            return [len(c) for c in self.cycles]
        chosen = set(subset)
        return [len(c) for c in self.cycles if chosen.intersection(c)]


@dataclass(frozen=True)
class ReductionStep:
    """One fixed-point reduction."""

    automorphism: Automorphism
    fixed: dict[str, tuple[Element, ...]]


@dataclass
class ReductionTrace:
    """Chain of reductions H = H_1 → H_2 → ... and its end result."""

    steps: list[ReductionStep] = field(default_factory=list)
    result: MultiSortedStructure | None = None


def iter_automorphisms(structure: MultiSortedStructure) -> Iterator[Automorphism]:
    """Automorphisms in canonical backtracking order; the identity comes first."""
    for mapping in iter_isomorphisms(structure, structure):
        yield Automorphism(mapping)


def enumerate_automorphisms(structure: MultiSortedStructure) -> list[Automorphism]:
    """Aut(H) by exhaustive search; suitable for universes of about ten elements."""
    automorphisms = list(iter_automorphisms(structure))
    logger.debug("Found %d automorphisms", len(automorphisms))
    return automorphisms


def order_p_automorphisms(structure: MultiSortedStructure, p: int) -> Iterator[Automorphism]:
    """Automorphisms whose every sort component is the identity or has order p."""
    require_prime(p)
    for automorphism in iter_automorphisms(structure):
        # p prime: component orders divide p, so order == p is exactly the condition
        if automorphism.order == p:
            yield automorphism


def find_order_p_automorphism(
    structure: MultiSortedStructure, p: int
) -> Automorphism | None:
    """Canonical-first automorphism of order p, or None when H is p-rigid."""
    return next(order_p_automorphisms(structure, p), None)


def is_p_rigid(structure: MultiSortedStructure, p: int) -> bool:
    return find_order_p_automorphism(structure, p) is None


def is_automorphism(automorphism: Automorphism, structure: MultiSortedStructure) -> bool:
    mapping = automorphism.mapping
    if set(mapping) != set(structure.universe):
        return False
    for elements in structure.sorts.values():
        if sorted(map(mapping.get, elements), key=element_key) != list(elements):
            return False
    return is_homomorphism(mapping, structure, structure)


def fix_substructure(
    structure: MultiSortedStructure, automorphism: Automorphism
) -> MultiSortedStructure:
    """Substructure induced by the fixed points of π.

    Raises:
        StructureError: If π is not an automorphism of the structure
    """
    if not is_automorphism(automorphism, structure):
        raise StructureError("Map is not an automorphism of the structure")
    return induced_substructure(structure, _fixed_by_sort(structure, automorphism))


def _fixed_by_sort(
    structure: MultiSortedStructure, automorphism: Automorphism
) -> dict[str, tuple[Element, ...]]:
    return {
        name: tuple(e for e in elements if automorphism(e) == e)
        for name, elements in structure.sorts.items()
    }


def p_reduce(
    structure: MultiSortedStructure, p: int, prefer: str = "first"
) -> tuple[MultiSortedStructure, ReductionTrace]:
    """Reduce H to the p-rigid structure H^{*p}.

    Args:
        structure: Structure to reduce
        p: Prime
        prefer: ``"first"`` applies the canonical-first order-p automorphism at
            every step, ``"last"`` the canonical-last one

    Returns:
        The p-rigid result and the trace of applied reductions
    """
    if prefer not in ("first", "last"):
        raise ConfigurationError(f"prefer must be 'first' or 'last', got {prefer!r}")
    require_prime(p)
    trace = ReductionTrace()
    current = structure
    while True:
        if prefer == "first":
            chosen = find_order_p_automorphism(current, p)
        else:
            chosen = None
            for chosen in order_p_automorphisms(current, p):
                pass
        if chosen is None:
            break
        fixed = _fixed_by_sort(current, chosen)
        trace.steps.append(ReductionStep(chosen, fixed))
        current = induced_substructure(current, fixed)
        logger.debug(
            "Reduction step %d: universe now %d elements",
            len(trace.steps),
            current.universe_size,
        )
    trace.result = current
    return current, trace
