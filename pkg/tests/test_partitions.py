"""Tests for set partitions and the Möbius function."""

import pytest

from modcsp.partitions import (
    bell_number,
    is_bottom,
    mobius_by_recursion,
    mobius_from_bottom,
    refines,
    set_partitions,
    sort_partitions,
)


def test_set_partitions_of_three():
    """Three elements have five partitions, bottom first."""
    found = list(set_partitions("abc"))
    assert len(found) == 5
    assert found[0] == (("a",), ("b",), ("c",))
    assert (("a", "b", "c"),) in found


def test_set_partitions_of_empty_set():
    """The empty set has exactly one partition."""
    assert list(set_partitions(())) == [()]


@pytest.mark.parametrize("n, expected", [(0, 1), (1, 1), (3, 5), (4, 15), (5, 52)])
def test_bell_numbers(n, expected):
    """Partition counts should be the Bell numbers."""
    assert bell_number(n) == expected
    assert len(list(set_partitions(range(n)))) == expected


def test_sort_partitions_multiply():
    """One partition per sort gives the product of the Bell numbers."""
    families = list(sort_partitions({"A": [1, 2], "B": ["x", "y", "z"]}))
    assert len(families) == 2 * 5
    assert is_bottom(families[0])
    assert not is_bottom(families[-1])


def test_refines():
    """The bottom refines the top, not the other way round."""
    bottom = {"A": ((1,), (2,))}
    top = {"A": ((1, 2),)}
    assert refines(bottom, top)
    assert not refines(top, bottom)


def test_mobius_closed_form_values():
    """μ(0, θ) is a product of (-1)^(k-1) (k-1)! over blocks."""
    assert mobius_from_bottom({"A": ((1,), (2,))}) == 1
    assert mobius_from_bottom({"A": ((1, 2),)}) == -1
    assert mobius_from_bottom({"A": ((1, 2, 3),)}) == 2
    assert mobius_from_bottom({"A": ((1, 2),), "B": (("x", "y"), ("z",))}) == 1


@pytest.mark.parametrize("sorts", [{"A": [1, 2, 3]}, {"A": [1, 2, 3, 4]}, {"A": [1, 2], "B": [3, 4]}])
def test_mobius_recursion_matches_closed_form(sorts):
    """The defining recursion should agree with the closed form on the whole lattice."""
    lattice = list(sort_partitions(sorts))
    assert mobius_by_recursion(lattice) == [mobius_from_bottom(t) for t in lattice]
