"""Tests for frames and witness functions."""

import dataclasses
import itertools

import pytest

from modcsp import fixtures
from modcsp.exceptions import FrameError
from modcsp.frames import (
    enumerate_relation,
    fix_coordinate,
    initial_frame,
    next_frame,
    nonempty,
    project_last,
    restrict_last,
    signature,
    validate_witness_function,
    witness_function_from_frame,
    witness_function_from_relation,
)

DOMAINS = [[0, 1]] * 3
LIN0 = {t for t in itertools.product((0, 1), repeat=3) if sum(t) % 2 == 0}


def even(proj):
    return sum(proj) % 2 == 0


@pytest.fixture
def op():
    return fixtures.z2_affine_maltsev()


@pytest.fixture
def omega(op):
    return witness_function_from_relation(LIN0, DOMAINS, op)


def test_initial_frame():
    """One base tuple plus every single-coordinate change."""
    assert initial_frame(DOMAINS) == ((0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0))
    assert initial_frame([[0], []]) == ()


def test_signature_forks():
    forks = signature(initial_frame(DOMAINS))
    assert forks[(0, 0, 1)] == ((0, 0, 0), (1, 0, 0))
    assert (2, 1, 0) in forks
    assert list(forks)[0] == (0, 0, 0)


def test_nonempty_searches_the_closure(op):
    """(1, 1, 1) is not in the frame but in the cube it generates."""
    frame = initial_frame(DOMAINS)
    assert nonempty(frame, (0, 1, 2), lambda proj: proj == (1, 1, 1), op) == (1, 1, 1)
    assert nonempty(frame, (0,), lambda proj: proj == (2,), op) is None


def test_brute_force_witness_function(omega):
    assert omega.classes == (((0, 1),), ((0, 1),), ((0,), (1,)))
    assert omega.witness(0, 1) == (1, 0, 1)
    assert validate_witness_function(omega, LIN0) == []
    assert set(enumerate_relation(omega)) == LIN0


def test_next_frame_regenerates_constrained_relation(op):
    """Restricting the cube to even tuples gives a frame of x + y + z = 0."""
    frame = next_frame(initial_frame(DOMAINS), (0, 1, 2), even, op)
    assert set(frame) <= LIN0
    generated = witness_function_from_frame(frame, DOMAINS, op)
    assert set(enumerate_relation(generated)) == LIN0
    assert validate_witness_function(generated, LIN0) == []


def test_next_frame_empty_when_nothing_accepted(op):
    frame = next_frame(initial_frame(DOMAINS), (0,), lambda proj: False, op)
    assert frame == ()
    empty = witness_function_from_frame(frame, DOMAINS, op)
    assert empty.is_empty
    assert list(enumerate_relation(empty)) == []


def test_fix_coordinate(omega):
    fixed = fix_coordinate(omega, 2, 1)
    assert set(enumerate_relation(fixed)) == {(0, 1, 1), (1, 0, 1)}


def test_project_last(omega):
    projected = project_last(omega)
    assert projected.arity == 2
    assert set(enumerate_relation(projected)) == set(itertools.product((0, 1), repeat=2))


def test_project_last_rejects_unary(op):
    unary = witness_function_from_relation([(0,), (1,)], [[0, 1]], op)
    with pytest.raises(FrameError):
        project_last(unary)


def test_restrict_last_marks_bottom(omega):
    restricted = restrict_last(omega, lambda block: block == (1,))
    assert restricted.classes[2] == ((1,),)
    assert restricted.witness(2, 0) is None
    assert restricted.witness(2, 1) is not None


def test_witness_function_rejects_non_rectangular():
    """Classes {0, 1} and {1, 2} merge but prefix 0 never reaches 2."""
    tuples = [(0, 0), (0, 1), (1, 1), (1, 2)]
    with pytest.raises(FrameError) as info:
        witness_function_from_relation(tuples, [[0, 1], [0, 1, 2]])
    assert info.value.condition == "rectangular"


def test_validate_reports_bad_witness(omega):
    broken = dataclasses.replace(omega, witnesses={**omega.witnesses, (0, 0): (0, 0, 1)})
    violations = validate_witness_function(broken, LIN0)
    assert any(v.startswith("witness:") for v in violations)
