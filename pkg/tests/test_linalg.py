"""Tests for exact matrix rank."""

import numpy as np
import pytest

from modcsp.linalg import rank, rank_mod, rank_rational, rref_mod


@pytest.mark.parametrize(
    "matrix, expected",
    [
        ([[1, 2], [2, 4]], 1),
        ([[1, 0], [0, 1]], 2),
        ([[0, 0], [0, 0]], 0),
        ([[0, 1, 2], [0, 2, 4], [1, 0, 0]], 2),
        ([[1, 1, 0], [0, 1, 1], [1, 0, 1]], 3),
        ([], 0),
    ],
)
def test_rank_rational(matrix, expected):
    """Should compute the rank over Q."""
    assert rank_rational(matrix) == expected


def test_rank_mod_differs_from_rational():
    """Rows summing to zero mod 2 lose rank over GF(2)."""
    matrix = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
    assert rank_mod(matrix, 2) == 2
    assert rank_mod(matrix, 3) == 3


def test_rank_mod_reduces_entries():
    """Entries divisible by p vanish."""
    assert rank_mod([[2, 0], [0, 1]], 2) == 1
    assert rank([[2, 0], [0, 1]]) == 2
    assert rank([[2, 0], [0, 1]], 2) == 1


def test_rref_mod_pivots():
    """rref_mod should normalize pivots to 1 and clear their columns."""
    reduced, pivots = rref_mod(np.array([[2, 1, 0], [1, 2, 1]]), 3)
    assert pivots == [0, 2]
    assert reduced.tolist() == [[1, 2, 0], [0, 0, 1]]


def test_rank_rational_large_entries():
    """Entries beyond int64 keep their exact value."""
    big = 10**30
    assert rank_rational([[big, big + 1], [big + 1, big + 2]]) == 2
    assert rank_rational([[big, 2 * big], [1, 2]]) == 1
