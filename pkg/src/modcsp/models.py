"""Data models for relational structures and CSP instances."""

import itertools
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

from modcsp.exceptions import FormulaError, InstanceError, StructureError

Element = Any
"""An element of a sort: a string, an integer, or a tuple of elements."""

ElementTuple = tuple[Element, ...]


def element_key(element: Element) -> tuple:
    """Return the canonical sort key of an element.

    Integers sort before strings, strings before tuples; tuples compare
    element-wise.
    """
    if isinstance(element, bool):
        raise StructureError(f"Boolean is not a valid element: {element!r}")
    if isinstance(element, int):
        return (0, element, "")
    if isinstance(element, str):
        return (1, 0, element)
    if isinstance(element, tuple):
        return (2, tuple(element_key(item) for item in element))
    raise StructureError(f"Unsupported element type: {element!r}")


def tuple_key(values: Iterable[Element]) -> tuple:
    """Return the canonical sort key of a tuple of elements."""
    return tuple(element_key(value) for value in values)


def sort_elements(elements: Iterable[Element]) -> tuple[Element, ...]:
    """Deduplicate and canonically order elements."""
    return tuple(sorted(set(elements), key=element_key))


def sort_tuples(tuples: Iterable[ElementTuple]) -> tuple[ElementTuple, ...]:
    """Deduplicate and canonically order element tuples."""
    return tuple(sorted(set(tuples), key=tuple_key))


def element_label(element: Element) -> str:
    """Render an element as a compact human-readable string."""
    if isinstance(element, tuple):
        return "(" + ",".join(element_label(item) for item in element) + ")"
    return str(element)


@dataclass(frozen=True)
class RelationSymbol:
    """Relation symbol with its sort signature.

    Attributes:
        name: Symbol name, unique within a structure
        sort_signature: Sort name for each argument position
    """

    name: str
    sort_signature: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sort_signature", tuple(self.sort_signature))

    @property
    def arity(self) -> int:
        return len(self.sort_signature)


@dataclass(frozen=True)
class Relation:
    """Interpretation of a relation symbol: a canonically ordered tuple set."""

    symbol: RelationSymbol
    tuples: tuple[ElementTuple, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "tuples", sort_tuples(tuple(t) for t in self.tuples)
        )

    @property
    def name(self) -> str:
        return self.symbol.name

    @property
    def arity(self) -> int:
        return self.symbol.arity

    @cached_property
    def tuple_set(self) -> frozenset[ElementTuple]:
        return frozenset(self.tuples)

    def __contains__(self, item: object) -> bool:
        return item in self.tuple_set

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self) -> Iterator[ElementTuple]:
        return iter(self.tuples)

    def project(self, positions: Iterable[int]) -> tuple[ElementTuple, ...]:
        """Return the canonical projection onto the given 0-based positions."""
        positions = tuple(positions)
        return sort_tuples(tuple(t[i] for i in positions) for t in self.tuples)

    def renamed(self, name: str) -> "Relation":
        """Return the same tuples under a different symbol name."""
        return Relation(RelationSymbol(name, self.symbol.sort_signature), self.tuples)


@dataclass(frozen=True)
class MultiSortedStructure:
    """Finite multi-sorted relational structure.

    Attributes:
        sorts: Sort name to its canonically ordered elements; order of sorts is kept
        relations: Relation name to interpretation, ordered by name
    """

    sorts: dict[str, tuple[Element, ...]] = field(default_factory=dict)
    relations: dict[str, Relation] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "sorts",
            {name: sort_elements(elements) for name, elements in self.sorts.items()},
        )
        object.__setattr__(
            self,
            "relations",
            {name: self.relations[name] for name in sorted(self.relations)},
        )

    @property
    def sort_names(self) -> tuple[str, ...]:
        return tuple(self.sorts)

    def sort_index(self, sort: str) -> int:
        """Return the SortId of a sort name."""
        try:
            return self.sort_names.index(sort)
        except ValueError as e:
            raise StructureError(f"Unknown sort: {sort}") from e

    def elements(self, sort: str) -> tuple[Element, ...]:
        try:
            return self.sorts[sort]
        except KeyError as e:
            raise StructureError(f"Unknown sort: {sort}") from e

    @cached_property
    def universe(self) -> tuple[Element, ...]:
        return tuple(e for elements in self.sorts.values() for e in elements)

    @property
    def universe_size(self) -> int:
        return sum(len(elements) for elements in self.sorts.values())

    @cached_property
    def sort_map(self) -> dict[Element, str]:
        """Element to its sort (first declaring sort wins for malformed input)."""
        mapping: dict[Element, str] = {}
        for name, elements in self.sorts.items():
            for element in elements:
                mapping.setdefault(element, name)
        return mapping

    def sort_of(self, element: Element) -> str:
        try:
            return self.sort_map[element]
        except KeyError as e:
            raise StructureError(f"Element not in any sort: {element!r}") from e

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError as e:
            raise StructureError(f"Unknown relation: {name}") from e

    @property
    def signature(self) -> dict[str, tuple[str, ...]]:
        return {name: rel.symbol.sort_signature for name, rel in self.relations.items()}

    def is_similar(self, other: "MultiSortedStructure") -> bool:
        """Same sort names and same relation signatures."""
        return (
            set(self.sort_names) == set(other.sort_names)
            and self.signature == other.signature
        )

    def with_relations(self, relations: Iterable[Relation]) -> "MultiSortedStructure":
        """Return a copy with the given relations added or replaced."""
        merged = dict(self.relations)
        for relation in relations:
            merged[relation.name] = relation
        return replace(self, relations=merged)

    def without_relations(self, names: Iterable[str]) -> "MultiSortedStructure":
        dropped = set(names)
        return replace(
            self,
            relations={n: r for n, r in self.relations.items() if n not in dropped},
        )


@dataclass(frozen=True)
class Constraint:
    """Constraint ⟨scope, relation⟩ of a CSP instance."""

    scope: tuple[str, ...]
    relation: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "scope", tuple(self.scope))


@dataclass(frozen=True)
class CspInstance:
    """CSP instance in the standard view.

    Attributes:
        variables: Variable name to sort name; order is the coordinate order
        constraints: Constraints in input order
    """

    variables: dict[str, str] = field(default_factory=dict)
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", dict(self.variables))
        object.__setattr__(
            self,
            "constraints",
            tuple(
                c if isinstance(c, Constraint) else Constraint(*c)
                for c in self.constraints
            ),
        )
        for constraint in self.constraints:
            for variable in constraint.scope:
                if variable not in self.variables:
                    raise InstanceError(
                        f"Constraint {constraint.relation} uses untyped variable {variable}"
                    )

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(self.variables)

    def constrained_variables(self) -> set[str]:
        return {v for c in self.constraints for v in c.scope}

    def free_variables(self) -> tuple[str, ...]:
        used = self.constrained_variables()
        return tuple(v for v in self.variables if v not in used)

    def with_constraints(self, constraints: Iterable[Constraint]) -> "CspInstance":
        return CspInstance(self.variables, tuple(self.constraints) + tuple(constraints))


@dataclass(frozen=True)
class DistinguishedStructure:
    """Structure with a tuple of distinguished vertices (anchors)."""

    structure: MultiSortedStructure
    anchors: tuple[Element, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "anchors", tuple(self.anchors))
        for anchor in self.anchors:
            if anchor not in self.structure.sort_map:
                raise StructureError(f"Anchor {anchor!r} is not in the structure")


@dataclass(frozen=True)
class HomCount:
    """Exact homomorphism count, optionally with a modulus.

    Attributes:
        exact: Arbitrary-precision nonnegative count
        modulus: Prime modulus for the reduced residue, if requested
    """

    exact: int
    modulus: int | None = None

    @property
    def reduced(self) -> int | None:
        if self.modulus is None:
            return None
        return self.exact % self.modulus


Assignment = dict[str, Element]
"""Sort-respecting map from variables to elements."""

ElementMap = dict[Element, Element]
"""Sort-respecting map between universes (sorts are disjoint, so one flat dict)."""


@dataclass(frozen=True)
class Operation:
    """Finite operation given by its table.

    Sorts are disjoint, so one flat table serves a whole multi-sorted family:
    the key is the argument tuple (all arguments of one sort) and the value
    its image in the same sort.

    Attributes:
        arity: Number of arguments
        table: Argument tuple to value
    """

    arity: int
    table: dict[ElementTuple, Element] = field(default_factory=dict)

    def __call__(self, *args: Element) -> Element:
        try:
            return self.table[args]
        except KeyError as e:
            raise StructureError(
                f"Operation is undefined on {element_label(args)}"
            ) from e

    def apply(self, *rows: ElementTuple) -> ElementTuple:
        """Apply the operation coordinate-wise to ``arity`` equal-length tuples."""
        return tuple(self(*column) for column in zip(*rows))

    @classmethod
    def from_function(
        cls,
        structure: "MultiSortedStructure",
        arity: int,
        function: Callable[..., Element],
    ) -> "Operation":
        """Tabulate ``function(sort, *args)`` over every sort of a structure."""
        table: dict[ElementTuple, Element] = {}
        for sort, elements in structure.sorts.items():
            for args in itertools.product(elements, repeat=arity):
                table[args] = function(sort, *args)
        return cls(arity, table)


EXISTS = "exists"
MODULAR = "mod"


@dataclass(frozen=True)
class Atom:
    """Atomic formula ``relation(args)``; ``relation`` may be ``"="``."""

    relation: str
    args: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class QuantifierBlock:
    """Block of bound variables quantified together.

    Attributes:
        variables: Bound variable names
        mode: ``"exists"`` or ``"mod"``
        modulus: Prime p of a modular block, None for existential blocks
    """

    variables: tuple[str, ...]
    mode: str = MODULAR
    modulus: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.mode not in (EXISTS, MODULAR):
            raise FormulaError(f"Unknown quantifier mode: {self.mode}")
        if self.mode == MODULAR and self.modulus is None:
            raise FormulaError("Modular block needs a modulus")

    @property
    def is_modular(self) -> bool:
        return self.mode == MODULAR


@dataclass(frozen=True)
class MppFormula:
    """Prefix formula: quantifier blocks over a conjunction of atoms.

    Blocks are listed outermost first; evaluation eliminates the last block first.

    Attributes:
        free: Free variable name to sort name, in output coordinate order
        blocks: Quantifier blocks, outermost first
        atoms: Conjunction body
    """

    free: dict[str, str] = field(default_factory=dict)
    blocks: tuple[QuantifierBlock, ...] = ()
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "free", dict(self.free))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        seen = set(self.free)
        for block in self.blocks:
            for variable in block.variables:
                if variable in seen:
                    raise FormulaError(f"Variable {variable} is bound twice or also free")
                seen.add(variable)
        for atom in self.atoms:
            for variable in atom.args:
                if variable not in seen:
                    raise FormulaError(f"Atom {atom.relation} uses undeclared variable {variable}")

    @property
    def bound(self) -> tuple[str, ...]:
        return tuple(v for block in self.blocks for v in block.variables)

    @property
    def arity(self) -> int:
        return len(self.free)
