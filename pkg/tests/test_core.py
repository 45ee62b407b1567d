"""Tests for structure operations."""

import pytest

from modcsp.core import (
    anchored_product,
    check_instance,
    compose_maps,
    direct_product,
    factor_structure,
    find_isomorphism,
    glue,
    has_all_constants,
    induced_substructure,
    instance_to_structure,
    is_homomorphism,
    iter_isomorphisms,
    kernel,
    make_relation,
    make_structure,
    power,
    quotient_map,
    structure_to_instance,
    validate_instance,
    validate_structure,
    with_constants,
)
from modcsp.exceptions import InstanceError, StructureError
from modcsp.models import Constraint, CspInstance, DistinguishedStructure


def test_validate_structure_accepts_well_formed(triangle):
    """A well-formed structure should have no violations."""
    assert validate_structure(triangle) == []


def test_validate_structure_reports_overlap_and_unknown_elements():
    """Shared elements and tuples outside their sort should be reported."""
    structure = make_structure(
        {"A": [1], "B": [1]}, [make_relation("R", ("A",), [(2,)])]
    )
    violations = validate_structure(structure)
    assert any(v.startswith("sort-overlap") for v in violations)
    assert any(v.startswith("unknown-element") for v in violations)


def test_validate_instance_reports_problems(triangle):
    """Unknown relations, sorts and arity mismatches should be reported."""
    instance = CspInstance(
        {"x": "V", "y": "W"},
        (Constraint(("x",), "E"), Constraint(("x", "x"), "F")),
    )
    kinds = {v.split(":")[0] for v in validate_instance(instance, triangle)}
    assert kinds == {"unknown-sort", "arity-mismatch", "unknown-relation"}
    with pytest.raises(InstanceError):
        check_instance(instance, triangle)


def test_validate_instance_accepts_native_equality(triangle):
    """Equality needs no relation in the structure."""
    instance = CspInstance({"x": "V", "y": "V"}, (Constraint(("x", "y"), "="),))
    assert validate_instance(instance, triangle) == []


def test_direct_product_sizes(edge, triangle):
    """Product sorts and relations should multiply in size."""
    product = direct_product(edge, triangle)
    assert len(product.sorts["V"]) == 6
    assert len(product.relation("E")) == 6
    assert ((0, 0), (1, 1)) in product.relation("E")


def test_direct_product_requires_similar(triangle):
    """Structures with different signatures should be rejected."""
    other = make_structure({"V": [0]}, [make_relation("F", ("V",), [(0,)])])
    with pytest.raises(StructureError):
        direct_product(triangle, other)


def test_power(triangle):
    """The square of the 3-cycle has 9 vertices and 9 edges."""
    square = power(triangle, 2)
    assert len(square.sorts["V"]) == 9
    assert len(square.relation("E")) == 9
    with pytest.raises(StructureError):
        power(triangle, 0)


def test_induced_substructure(triangle):
    """Only tuples inside the subset should survive."""
    sub = induced_substructure(triangle, {"V": [0, 1]})
    assert sub.sorts["V"] == (0, 1)
    assert sub.relation("E").tuples == ((0, 1),)
    with pytest.raises(StructureError):
        induced_substructure(triangle, {"V": [0, 9]})


def test_factor_structure_merges_classes(edge):
    """Factoring the edge by the full relation gives a loop."""
    factor = factor_structure(edge, {"V": [[0, 1]]})
    assert factor.sorts["V"] == ((0, 1),)
    assert factor.relation("E").tuples == (((0, 1), (0, 1)),)


def test_quotient_map_rejects_non_partition(triangle):
    """Blocks that miss an element should be rejected."""
    with pytest.raises(StructureError):
        quotient_map(triangle, {"V": [[0, 1]]})


def test_kernel_and_compose(triangle):
    """Kernel should group elements with the same image."""
    mapping = {0: "x", 1: "x", 2: "y"}
    assert kernel(mapping, triangle) == {"V": [(0, 1), (2,)]}
    assert compose_maps({0: 1, 1: 2}, {1: "a", 2: "b"}) == {0: "a", 1: "b"}


def test_is_homomorphism(triangle):
    """The identity is a homomorphism, a constant map onto a loopless graph is not."""
    assert is_homomorphism({0: 0, 1: 1, 2: 2}, triangle, triangle)
    assert not is_homomorphism({0: 0, 1: 0, 2: 0}, triangle, triangle)
    with pytest.raises(StructureError):
        is_homomorphism({0: 0, 1: 1}, triangle, triangle)


def test_isomorphisms_of_cycle(triangle):
    """The directed 3-cycle has the three rotations, identity first."""
    found = list(iter_isomorphisms(triangle, triangle))
    assert len(found) == 3
    assert found[0] == {0: 0, 1: 1, 2: 2}
    assert find_isomorphism(triangle, triangle, (0,), (1,)) == {0: 1, 1: 2, 2: 0}


def test_find_isomorphism_none_for_different_sizes(triangle, edge):
    """Structures of different sizes are not isomorphic."""
    assert find_isomorphism(triangle, edge) is None


def test_structure_instance_round_trip(triangle):
    """Standard and homomorphism views should describe the same structure."""
    instance = structure_to_instance(triangle)
    assert set(instance.variables) == {"0", "1", "2"}
    assert len(instance.constraints) == 3
    back = instance_to_structure(instance, triangle)
    assert find_isomorphism(back, triangle) is not None


def test_instance_to_structure_rejects_unknown_symbol(triangle):
    """Constraints over unknown symbols cannot be turned into a structure."""
    instance = CspInstance({"x": "V"}, (Constraint(("x",), "U"),))
    with pytest.raises(InstanceError):
        instance_to_structure(instance, triangle)


def test_with_constants(triangle):
    """Every element should get its constant relation."""
    expanded = with_constants(triangle)
    assert has_all_constants(expanded)
    assert not has_all_constants(triangle)
    assert expanded.relation("C_1").tuples == ((1,),)


def test_glue_identifies_anchors(edge):
    """Gluing two edges at one endpoint gives a path on three vertices."""
    glued = glue(DistinguishedStructure(edge, (0,)), DistinguishedStructure(edge, (0,)))
    assert len(glued.structure.sorts["V"]) == 3
    assert len(glued.structure.relation("E")) == 4
    assert glued.anchors == (("L", 0),)


def test_anchored_product(edge):
    """Anchors of a product should be paired."""
    product = anchored_product(
        DistinguishedStructure(edge, (0, 1)), DistinguishedStructure(edge, (1, 1))
    )
    assert product.anchors == ((0, 1), (1, 1))
    with pytest.raises(StructureError):
        anchored_product(DistinguishedStructure(edge, (0,)), DistinguishedStructure(edge, ()))
