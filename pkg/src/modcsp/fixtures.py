"""Small structures with known behaviour, used by tests, the regression suite and the CLI."""

from collections.abc import Callable

from modcsp.core import make_relation, make_structure, with_constants
from modcsp.models import (
    MODULAR,
    Atom,
    CspInstance,
    MppFormula,
    MultiSortedStructure,
    Operation,
    QuantifierBlock,
)
from modcsp.refine import tp_refinement, tp_structure

__all__ = [
    "FIXTURE_INSTANCES",
    "FIXTURE_STRUCTURES",
    "congruence_pair_not_permutable",
    "congruence_pair_without_maltsev",
    "grouped_quantifier_formula",
    "odd_projection_maltsev",
    "odd_projection_structure",
    "permutation_graphs",
    "permutation_graphs_maltsev",
    "quantifier_order_structure",
    "rigid_digraph",
    "split_quantifier_formula",
    "tp_refinement",
    "tp_structure",
    "z2_affine",
    "z2_affine_maltsev",
    "z3_affine",
    "z3_affine_maltsev",
]

SORT = "H"


def quantifier_order_structure() -> MultiSortedStructure:
    """R = {(1,0,0), (1,1,0), (1,1,1), (2,2,2)} on {0, 1, 2}."""
    return make_structure(
        {SORT: [0, 1, 2]},
        [make_relation("R", (SORT,) * 3, [(1, 0, 0), (1, 1, 0), (1, 1, 1), (2, 2, 2)])],
    )


def split_quantifier_formula(p: int = 3) -> MppFormula:
    """∃^{≡p} y ∃^{≡p} z R(x, y, z), one block per variable."""
    return MppFormula(
        {"x": SORT},
        (QuantifierBlock(("y",), MODULAR, p), QuantifierBlock(("z",), MODULAR, p)),
        (Atom("R", ("x", "y", "z")),),
    )


def grouped_quantifier_formula(p: int = 3) -> MppFormula:
    """∃^{≡p} y, z R(x, y, z), both variables in one block."""
    return MppFormula(
        {"x": SORT},
        (QuantifierBlock(("y", "z"), MODULAR, p),),
        (Atom("R", ("x", "y", "z")),),
    )


ODD_PROJECTION_TUPLES = [(0, 0, 0), (0, 1, 1), (1, 0, 2), (1, 0, 3), (1, 1, 4)]


def odd_projection_structure(constants: bool = True) -> MultiSortedStructure:
    """Ternary R on {0..4} whose ∃^{≡2}z projection is not rectangular."""
    structure = make_structure(
        {SORT: range(5)}, [make_relation("R", (SORT,) * 3, ODD_PROJECTION_TUPLES)]
    )
    return with_constants(structure) if constants else structure


def odd_projection_maltsev(structure: MultiSortedStructure | None = None) -> Operation:
    """x+y+z mod 2 lifted through the labels of R.

    Every element e ends exactly one tuple (a, b, e) of R, and (a, b) is its
    label. Off the Mal'tsev identities the result is the element whose label
    is the sum of the three labels mod 2; label (1, 0) picks 2 over 3.
    """
    structure = structure or odd_projection_structure()
    labels = {t[2]: t[:2] for t in ODD_PROJECTION_TUPLES}
    by_label: dict[tuple[int, ...], int] = {}
    for element, label in labels.items():
        by_label.setdefault(label, element)

    def g(sort: str, x: int, y: int, z: int) -> int:
        if x == y:
            return z
        if y == z:
            return x
        label = tuple(sum(values) % 2 for values in zip(labels[x], labels[y], labels[z]))
        return by_label[label]

    return Operation.from_function(structure, 3, g)


def _equivalence(classes: list[list[str]]) -> list[tuple[str, str]]:
    return [(a, b) for block in classes for a in block for b in block]


def _congruence_pair(size: int, r_classes: list[list[int]], q_classes: list[list[int]]):
    elements = [f"a{i}" for i in range(1, size + 1)]

    def named(classes: list[list[int]]) -> list[list[str]]:
        return [[f"a{i}" for i in block] for block in classes]

    structure = make_structure(
        {SORT: elements},
        [
            make_relation("R", (SORT, SORT), _equivalence(named(r_classes))),
            make_relation("Q", (SORT, SORT), _equivalence(named(q_classes))),
        ],
    )
    return with_constants(structure)


def congruence_pair_not_permutable() -> MultiSortedStructure:
    """Seven elements; R classes {a1,a2,a3}, {a4..a7}; Q classes {a1,a2,a4,a5}, {a3,a6,a7}."""
    return _congruence_pair(7, [[1, 2, 3], [4, 5, 6, 7]], [[1, 2, 4, 5], [3, 6, 7]])


def congruence_pair_without_maltsev() -> MultiSortedStructure:
    """Six elements; R classes {a1..a4}, {a5,a6}; Q classes {a1,a2,a5,a6}, {a3,a4}."""
    return _congruence_pair(6, [[1, 2, 3, 4], [5, 6]], [[1, 2, 5, 6], [3, 4]])


def rigid_digraph() -> MultiSortedStructure:
    """Edges b→a, b→c, c→d: no nontrivial automorphism, yet its square has one."""
    return make_structure(
        {"V": ["a", "b", "c", "d"]},
        [make_relation("E", ("V", "V"), [("b", "a"), ("b", "c"), ("c", "d")])],
    )


def z2_affine() -> MultiSortedStructure:
    """x+y+z = 0 and x+y+z = 1 over Z_2 with both constants."""
    cube = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    structure = make_structure(
        {SORT: [0, 1]},
        [
            make_relation("lin0", (SORT,) * 3, [t for t in cube if sum(t) % 2 == 0]),
            make_relation("lin1", (SORT,) * 3, [t for t in cube if sum(t) % 2 == 1]),
        ],
    )
    return with_constants(structure)


def z2_affine_maltsev(structure: MultiSortedStructure | None = None) -> Operation:
    return Operation.from_function(
        structure or z2_affine(), 3, lambda sort, x, y, z: (x + y + z) % 2
    )


def z3_affine() -> MultiSortedStructure:
    """x+y+z = 0 and y = x+1 over Z_3 with all constants."""
    cube = [(x, y, z) for x in range(3) for y in range(3) for z in range(3)]
    structure = make_structure(
        {SORT: [0, 1, 2]},
        [
            make_relation("sum0", (SORT,) * 3, [t for t in cube if sum(t) % 3 == 0]),
            make_relation("succ", (SORT, SORT), [(x, (x + 1) % 3) for x in range(3)]),
        ],
    )
    return with_constants(structure)


def z3_affine_maltsev(structure: MultiSortedStructure | None = None) -> Operation:
    return Operation.from_function(
        structure or z3_affine(), 3, lambda sort, x, y, z: (x - y + z) % 3
    )


def permutation_graphs() -> MultiSortedStructure:
    """Graphs of the transposition (0 1) and the cycle (0 1 2) with all constants."""
    structure = make_structure(
        {SORT: [0, 1, 2]},
        [
            make_relation("swap01", (SORT, SORT), [(0, 1), (1, 0), (2, 2)]),
            make_relation("cycle", (SORT, SORT), [(0, 1), (1, 2), (2, 0)]),
        ],
    )
    return with_constants(structure)


def permutation_graphs_maltsev(structure: MultiSortedStructure | None = None) -> Operation:
    """z when x = y, else x."""
    return Operation.from_function(
        structure or permutation_graphs(), 3, lambda sort, x, y, z: z if x == y else x
    )


FIXTURE_STRUCTURES: dict[str, Callable[[], MultiSortedStructure]] = {
    "quantifier-order": quantifier_order_structure,
    "odd-projection": odd_projection_structure,
    "congruences-7": congruence_pair_not_permutable,
    "congruences-6": congruence_pair_without_maltsev,
    "rigid-digraph": rigid_digraph,
    "t2": lambda: tp_structure(2),
    "t3": lambda: tp_structure(3),
    "z2-affine": z2_affine,
    "z3-affine": z3_affine,
    "permutation-graphs": permutation_graphs,
}

FIXTURE_INSTANCES: dict[str, Callable[[], CspInstance]] = {
    "t-free3": lambda: CspInstance({"x": "T", "y": "T", "z": "T"}, ()),
    "t-path": lambda: CspInstance(
        {"x": "T", "y": "T", "z": "T"}, ((("x", "y"), "R"), (("y", "z"), "R"))
    ),
    "z2-chain": lambda: CspInstance(
        {v: SORT for v in "wxyz"},
        ((("w", "x", "y"), "lin0"), (("x", "y", "z"), "lin1"), (("z",), "C_1")),
    ),
}
