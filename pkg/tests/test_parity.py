"""Tests for parity counting through witness functions."""

import random

import pytest

from modcsp import fixtures
from modcsp.core import make_relation, make_structure
from modcsp.exceptions import InstanceError, PreconditionError
from modcsp.frames import (
    enumerate_relation,
    fix_coordinate,
    project_last,
    validate_witness_function,
    witness_function_from_relation,
)
from modcsp.models import CspInstance, Operation
from modcsp.oracle import count_solutions, enumerate_solutions
from modcsp.parity import (
    ParityContext,
    build_witness_function,
    calculate_size,
    check_epsilon_class,
    derive_tilde_witness,
    par_relation,
    parity_count,
    tilde_relation,
)

# (constraints over variables w, x, y, z, expected number of solutions)
Z2_CASES = [
    ([(("x", "y", "z"), "lin1"), (("x",), "C_0"), (("y",), "C_0")], 2),
    ([(("w", "x", "y"), "lin0"), (("x", "y", "z"), "lin1"), (("z",), "C_1")], 2),
    ([(("x", "y", "z"), "lin0")], 8),
    (
        [
            (("x", "y", "z"), "lin0"),
            (("y", "z", "w"), "lin1"),
            (("w",), "C_1"),
            (("y",), "C_0"),
        ],
        1,
    ),
    ([(("x", "x", "y"), "lin0"), (("x",), "C_1")], 4),
    ([(("x", "y"), "="), (("x", "y", "z"), "lin1"), (("x",), "C_0")], 2),
    ([(("x",), "C_0"), (("x",), "C_1")], 0),
]


@pytest.fixture
def z2_ctx(z2_affine):
    return ParityContext(z2_affine, fixtures.z2_affine_maltsev(z2_affine))


def _instance(constraints):
    return CspInstance({v: "H" for v in "wxyz"}, tuple(constraints))


def test_context_rejects_non_maltsev(z2_affine):
    projection = Operation.from_function(z2_affine, 3, lambda sort, x, y, z: x)
    with pytest.raises(PreconditionError) as info:
        ParityContext(z2_affine, projection)
    assert info.value.condition == "maltsev"


def test_context_from_structure(z2_affine):
    assert ParityContext.from_structure(z2_affine).op is not None


def test_context_from_structure_without_maltsev():
    """A non-rectangular binary relation has no Mal'tsev polymorphism."""
    corner = make_structure({"H": [0, 1]}, [make_relation("R", ("H", "H"), [(0, 0), (0, 1), (1, 0)])])
    with pytest.raises(PreconditionError):
        ParityContext.from_structure(corner)


@pytest.mark.parametrize("constraints, exact", Z2_CASES)
def test_parity_matches_oracle(z2_ctx, z2_affine, constraints, exact):
    """Parity through frames agrees with brute-force counting."""
    instance = _instance(constraints)
    assert count_solutions(instance, z2_affine).exact == exact
    assert parity_count(z2_ctx, instance) == exact % 2


@pytest.mark.parametrize(
    "constraints, expected",
    [
        ([], 1),
        ([(("x", "y"), "swap01")], 1),
        ([(("x", "y"), "cycle"), (("y", "z"), "cycle")], 1),
        ([(("x", "y"), "swap01"), (("x",), "C_2")], 1),
        ([(("x", "y"), "swap01"), (("y", "z"), "cycle"), (("z",), "C_0")], 1),
        ([(("x", "y"), "swap01"), (("x",), "C_2"), (("y",), "C_0")], 0),
    ],
)
def test_parity_on_permutation_graphs(constraints, expected):
    structure = fixtures.permutation_graphs()
    ctx = ParityContext(structure, fixtures.permutation_graphs_maltsev(structure))
    variables = {v: "H" for v in sorted({v for scope, _ in constraints for v in scope}) or ["x"]}
    instance = CspInstance(variables, tuple(constraints))
    assert parity_count(ctx, instance) == expected
    assert count_solutions(instance, structure).exact % 2 == expected


def test_parity_without_variables(z2_ctx):
    assert parity_count(z2_ctx, CspInstance({}, ())) == 1


def test_build_witness_function_rejects_bad_instance(z2_ctx):
    instance = CspInstance({"x": "H"}, ((("x",), "missing"),))
    with pytest.raises(InstanceError):
        build_witness_function(z2_ctx, instance)


def test_build_witness_function_regenerates_solutions(z2_ctx, z2_affine):
    instance = _instance(Z2_CASES[1][0])
    omega = build_witness_function(z2_ctx, instance)
    order = list(instance.variables)
    expected = {
        values
        for values in _all_assignments(len(order))
        if _satisfies(dict(zip(order, values)), instance, z2_affine)
    }
    assert set(enumerate_relation(omega)) == expected


def _all_assignments(n):
    if n == 0:
        yield ()
        return
    for rest in _all_assignments(n - 1):
        for value in (0, 1):
            yield rest + (value,)


def _satisfies(solution, instance, structure):
    for constraint in instance.constraints:
        values = tuple(solution[v] for v in constraint.scope)
        if constraint.relation == "=":
            if values[0] != values[1]:
                return False
        elif values not in structure.relation(constraint.relation):
            return False
    return True


def test_brute_force_par_and_tilde():
    tuples = [(0, 0), (0, 1), (1, 0)]
    assert par_relation(tuples) == ((1, 0),)
    assert tilde_relation(tuples) == ((1,),)
    assert par_relation([]) == ()


def test_derive_tilde_witness_matches_brute_force():
    lin0 = [t for t in _all_assignments(3) if sum(t) % 2 == 0]
    omega = witness_function_from_relation(lin0, [[0, 1]] * 3, fixtures.z2_affine_maltsev())
    tilde = derive_tilde_witness(omega)
    assert set(enumerate_relation(tilde)) == set(tilde_relation(lin0))
    assert calculate_size(omega) == 0


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_random_instances_match_oracle(z2_ctx, z2_affine, seed):
    """Random instances on six variables."""
    rng = random.Random(seed)
    names = [f"v{i}" for i in range(6)]
    constraints = []
    for _ in range(rng.randint(1, 5)):
        relation = rng.choice(["lin0", "lin1", "C_0", "C_1"])
        arity = 3 if relation.startswith("lin") else 1
        constraints.append((tuple(rng.choice(names) for _ in range(arity)), relation))
    instance = CspInstance({v: "H" for v in names}, tuple(constraints))
    assert parity_count(z2_ctx, instance) == count_solutions(instance, z2_affine).exact % 2


def test_check_epsilon_class():
    """Related values get a witness with the shared prefix; missing ones get None."""
    op = fixtures.z2_affine_maltsev()
    lin0 = [t for t in _all_assignments(3) if sum(t) % 2 == 0]
    omega = witness_function_from_relation(lin0, [[0, 1]] * 3, op)
    assert check_epsilon_class(omega, (0, 0, 0), 0, 0, 1) == (0, 0, 0)
    assert check_epsilon_class(omega, (0, 0, 0), 0, 1, 1) == (0, 1, 1)
    pair = witness_function_from_relation([(0, 0, 0), (1, 1, 0)], [[0, 1]] * 3, op)
    assert check_epsilon_class(pair, (0, 0, 0), 0, 1, 1) is None


MALTSEV_FAMILIES = [
    (fixtures.z2_affine, fixtures.z2_affine_maltsev),
    (fixtures.z3_affine, fixtures.z3_affine_maltsev),
    (fixtures.permutation_graphs, fixtures.permutation_graphs_maltsev),
]


def _random_family_instance(rng, structure):
    names = [f"v{i}" for i in range(rng.randint(2, 5))]
    relations = sorted(structure.relations.values(), key=lambda r: r.name)
    constraints = []
    for _ in range(rng.randint(1, 4)):
        relation = rng.choice(relations)
        scope = tuple(rng.choice(names) for _ in range(relation.arity))
        constraints.append((scope, relation.name))
    return CspInstance({v: "H" for v in names}, tuple(constraints))


@pytest.mark.slow
@pytest.mark.parametrize("family", range(len(MALTSEV_FAMILIES)))
@pytest.mark.parametrize("seed", range(15))
def test_witness_functions_stay_valid(family, seed):
    """Built, fixed, projected and derived witness functions should describe their relations."""
    make, make_op = MALTSEV_FAMILIES[family]
    structure = make()
    ctx = ParityContext(structure, make_op(structure))
    instance = _random_family_instance(random.Random(seed), structure)
    order = list(instance.variables)
    omega = build_witness_function(ctx, instance)
    tuples = {tuple(s[v] for v in order) for s in enumerate_solutions(instance, structure)}
    assert set(enumerate_relation(omega)) == tuples
    if not tuples:
        return
    assert validate_witness_function(omega, tuples) == []
    projected = project_last(omega)
    assert validate_witness_function(projected, {t[:-1] for t in tuples}) == []
    for a in omega.projection(0):
        fixed = fix_coordinate(omega, 0, a)
        assert validate_witness_function(fixed, {t for t in tuples if t[0] == a}) == []
    while omega.arity > 1 and tuples:
        tilde_tuples = set(tilde_relation(tuples))
        tilde = derive_tilde_witness(omega)
        assert set(enumerate_relation(tilde)) == tilde_tuples
        if tilde_tuples:
            assert validate_witness_function(tilde, tilde_tuples) == []
        omega, tuples = tilde, tilde_tuples


@pytest.mark.slow
@pytest.mark.parametrize("family", range(len(MALTSEV_FAMILIES)))
@pytest.mark.parametrize("seed", range(15))
def test_tilde_levels_keep_parity(family, seed):
    """|R|, |PAR-R| and |tilde-R| should have equal parity at every level."""
    make, make_op = MALTSEV_FAMILIES[family]
    structure = make()
    ctx = ParityContext(structure, make_op(structure))
    instance = _random_family_instance(random.Random(seed), structure)
    order = list(instance.variables)
    tuples = [tuple(s[v] for v in order) for s in enumerate_solutions(instance, structure)]
    expected = len(tuples) % 2
    while tuples and len(tuples[0]) > 1:
        assert len(par_relation(tuples)) % 2 == expected
        tuples = tilde_relation(tuples)
        assert len(tuples) % 2 == expected
    assert parity_count(ctx, instance) == expected
