"""Tests for expansions, indicator problems and polymorphisms."""

import random

import pytest

from modcsp import expansion, fixtures
from modcsp.const import DEFAULT_SEED, ENDOMORPHISM_RELATION
from modcsp.core import with_constants
from modcsp.exceptions import (
    FormulaError,
    InstanceError,
    NotPRigidError,
    OracleMismatchError,
    StructureError,
)
from modcsp.expansion import (
    conjunctive_expand,
    count_with_constants,
    eliminate_equality,
    endomorphism_relation,
    find_maltsev,
    indicator_problem,
    is_maltsev,
    is_polymorphism,
    operation_from_solution,
    partition_mobius_weights,
    satisfies_maltsev_identities,
    split_constants,
)
from modcsp.models import Atom, Constraint, CspInstance, MppFormula, Operation, QuantifierBlock
from modcsp.oracle import count_solutions, enumerate_solutions


def test_eliminate_equality_merges_classes():
    """Variables joined by = collapse onto the first of their class."""
    instance = CspInstance(
        {"x": "V", "y": "V", "z": "V", "w": "V"},
        (
            Constraint(("y", "z"), "="),
            Constraint(("x", "y"), "="),
            Constraint(("z", "w"), "E"),
        ),
    )
    merged = eliminate_equality(instance)
    assert merged.variable_names == ("x", "w")
    assert merged.constraints == (Constraint(("x", "w"), "E"),)


def test_eliminate_equality_rejects_mixed_sorts():
    instance = CspInstance({"x": "A", "y": "B"}, (Constraint(("x", "y"), "="),))
    with pytest.raises(InstanceError):
        eliminate_equality(instance)


def test_indicator_problem_counts_endomorphisms(edge, triangle):
    """Solutions of the first indicator problem are the endomorphisms."""
    assert count_solutions(indicator_problem(edge, 1), edge).exact == 2
    assert count_solutions(indicator_problem(triangle, 1), triangle).exact == 3


def test_indicator_problem_rejects_zero_arity(edge):
    with pytest.raises(StructureError):
        indicator_problem(edge, 0)


def test_binary_polymorphisms_from_indicator(edge):
    """Every solution of I_2 reads back as a polymorphism."""
    instance = indicator_problem(edge, 2)
    for solution in enumerate_solutions(instance, edge):
        assert is_polymorphism(edge, operation_from_solution(solution, edge, 2))


def test_known_maltsev_operations():
    """x+y+z and x-y+z are Mal'tsev polymorphisms of the affine structures."""
    assert is_maltsev(fixtures.z2_affine(), fixtures.z2_affine_maltsev())
    assert is_maltsev(fixtures.z3_affine(), fixtures.z3_affine_maltsev())
    assert is_maltsev(fixtures.permutation_graphs(), fixtures.permutation_graphs_maltsev())


def test_odd_projection_maltsev_preserves_r():
    """The lifted sum maps (0,1,1), (0,0,0), (1,0,2) to (1,1,4) inside R."""
    structure = fixtures.odd_projection_structure()
    op = fixtures.odd_projection_maltsev(structure)
    assert is_maltsev(structure, op)
    assert op.apply((0, 1, 1), (0, 0, 0), (1, 0, 2)) == (1, 1, 4)


def test_projection_is_not_maltsev(z2_affine):
    """The first projection fails the identities."""
    projection = Operation.from_function(z2_affine, 3, lambda sort, x, y, z: x)
    assert is_polymorphism(z2_affine, projection)
    assert not satisfies_maltsev_identities(z2_affine, projection)


def test_find_maltsev(z2_affine, triangle):
    """Should find a Mal'tsev polymorphism when one exists."""
    found = find_maltsev(z2_affine)
    assert found is not None
    assert is_maltsev(z2_affine, found)
    assert find_maltsev(triangle) is not None


def test_find_maltsev_none_for_crossing_congruences():
    """Two congruences that do not permute rule out a Mal'tsev polymorphism."""
    assert find_maltsev(fixtures.congruence_pair_without_maltsev()) is None


def test_endomorphism_relation(edge):
    """Q lists the images of every element under each endomorphism."""
    coordinates, relation = endomorphism_relation(edge)
    assert coordinates == (0, 1)
    assert relation.name == ENDOMORPHISM_RELATION
    assert relation.tuple_set == {(0, 1), (1, 0)}


def test_conjunctive_expand():
    """A defined relation is replaced by the atoms of its definition."""
    definition = MppFormula(
        {"a": "V", "b": "V"}, (), (Atom("E", ("a", "b")), Atom("E", ("b", "a")))
    )
    instance = CspInstance({"x": "V", "y": "V"}, (Constraint(("x", "y"), "S"),))
    expanded = conjunctive_expand(instance, "S", definition)
    assert expanded.constraints == (
        Constraint(("x", "y"), "E"),
        Constraint(("y", "x"), "E"),
    )


def test_conjunctive_expand_rejects_quantified_definition():
    definition = MppFormula(
        {"a": "V"}, (QuantifierBlock(("b",), "exists"),), (Atom("E", ("a", "b")),)
    )
    instance = CspInstance({"x": "V"}, (Constraint(("x",), "S"),))
    with pytest.raises(FormulaError):
        conjunctive_expand(instance, "S", definition)


def test_partition_mobius_weights(triangle):
    """Weights on three elements: bottom 1, pairs -1, top 2."""
    weights = partition_mobius_weights(triangle, cross_check=True)
    assert len(weights) == 5
    assert weights[0].weight == 1
    assert sorted(w.weight for w in weights) == [-1, -1, -1, 1, 2]


def test_split_constants(z2_affine):
    base, constants = split_constants(z2_affine)
    assert constants == {"C_0": 0, "C_1": 1}
    assert set(base.relations) == {"lin0", "lin1"}


def test_count_with_constants_matches_oracle(z2_affine):
    """The constant-free reduction agrees with direct counting."""
    instance = fixtures.FIXTURE_INSTANCES["z2-chain"]()
    expected = count_solutions(instance, z2_affine).exact % 3
    assert count_with_constants(instance, z2_affine, 3) == expected


def test_count_with_constants_on_triangle(triangle):
    """Pinning one end of an arc of the directed 3-cycle leaves one solution."""
    structure = with_constants(triangle)
    instance = CspInstance(
        {"x": "V", "y": "V"},
        (Constraint(("x", "y"), "E"), Constraint(("x",), "C_0")),
    )
    assert count_with_constants(instance, structure, 2) == 1


def test_count_with_constants_requires_p_rigid(triangle):
    """The rotation of order 3 blocks the reduction modulo 3."""
    instance = CspInstance({"x": "V"}, ())
    with pytest.raises(NotPRigidError):
        count_with_constants(instance, with_constants(triangle), 3)


def test_count_with_constants_rejects_inconsistent_oracle():
    """A count oracle that breaks divisibility by |Aut(H)| should raise."""
    structure = fixtures.z3_affine()
    instance = CspInstance({"x": "H", "y": "H"}, (Constraint(("x", "y"), "succ"),))
    calls = []

    def inflated(instance, structure):
        calls.append(instance)
        exact = count_solutions(instance, structure).exact
        return exact + 1 if len(calls) == 1 else exact

    with pytest.raises(OracleMismatchError) as info:
        count_with_constants(instance, structure, 2, count_oracle=inflated)
    assert info.value.actual != 0


def test_count_with_constants_cross_checks_weights(monkeypatch, z2_affine):
    """A wrong closed form should be caught on the counting path."""
    expansion._cross_check_block_weights.cache_clear()
    monkeypatch.setattr(expansion, "mobius_from_bottom", lambda partition: 1)
    try:
        with pytest.raises(OracleMismatchError):
            count_with_constants(fixtures.FIXTURE_INSTANCES["z2-chain"](), z2_affine, 3)
    finally:
        expansion._cross_check_block_weights.cache_clear()


def test_weights_cross_checked_once_per_block_size(monkeypatch, triangle):
    expansion._cross_check_block_weights.cache_clear()
    calls = []
    original = expansion.mobius_by_recursion

    def counting(partitions):
        calls.append(len(partitions))
        return original(partitions)

    monkeypatch.setattr(expansion, "mobius_by_recursion", counting)
    partition_mobius_weights(triangle)
    partition_mobius_weights(triangle)
    assert calls == [2, 5]


def _random_instance(rng, structure, names):
    relations = sorted(structure.relations)
    constraints = []
    for _ in range(rng.randint(1, 3)):
        relation = structure.relation(rng.choice(relations))
        scope = tuple(rng.choice(names) for _ in range(relation.arity))
        constraints.append(Constraint(scope, relation.name))
    sort = next(iter(structure.sorts))
    return CspInstance({v: sort for v in names}, tuple(constraints))


@pytest.mark.slow
@pytest.mark.parametrize(
    "build, p",
    [
        (lambda: fixtures.tp_structure(2), 3),
        (fixtures.z3_affine, 2),
        (lambda: with_constants(fixtures.rigid_digraph()), 2),
        (lambda: with_constants(fixtures.rigid_digraph()), 3),
    ],
)
@pytest.mark.parametrize("seed", range(25))
def test_count_with_constants_random(build, p, seed):
    """Seeded instances agree with the oracle modulo p."""
    structure = build()
    rng = random.Random(DEFAULT_SEED + seed)
    instance = _random_instance(rng, structure, ["x", "y", "z"][: rng.randint(1, 3)])
    expected = count_solutions(instance, structure).exact % p
    assert count_with_constants(instance, structure, p) == expected
