"""Exact matrix rank over the rationals and over prime fields."""

from collections.abc import Sequence

import numpy as np


def _as_array(matrix: Sequence[Sequence[int]], dtype) -> np.ndarray | None:
    if len(matrix) == 0 or len(matrix[0]) == 0:
        return None
    return np.array([list(row) for row in matrix], dtype=dtype)


def rank_rational(matrix: Sequence[Sequence[int]]) -> int:
    """Rank over Q of an integer matrix by fraction-free (Bareiss) elimination.

    Entries are kept as Python integers (object dtype), so no value is
    rounded however large the minors grow.
    """
    work = _as_array(matrix, object)
    if work is None:
        return 0
    rows, cols = work.shape
    rank = 0
    previous = 1
    for col in range(cols):
        nonzero = np.flatnonzero(work[rank:, col] != 0)
        if nonzero.size == 0:
            continue
        pivot = rank + int(nonzero[0])
        work[[rank, pivot]] = work[[pivot, rank]]
        below = work[rank + 1 :, col + 1 :]
        work[rank + 1 :, col + 1 :] = (
            work[rank, col] * below - np.outer(work[rank + 1 :, col], work[rank, col + 1 :])
        ) // previous
        work[rank + 1 :, col] = 0
        previous = work[rank, col]
        rank += 1
        if rank == rows:
            break
    return rank


def rref_mod(matrix: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(p) and the pivot columns."""
    work = np.asarray(matrix, dtype=np.int64) % p
    rows, cols = work.shape
    pivots: list[int] = []
    row = 0
    for col in range(cols):
        nonzero = np.flatnonzero(work[row:, col])
        if nonzero.size == 0:
            continue
        pivot = row + int(nonzero[0])
        work[[row, pivot]] = work[[pivot, row]]
        work[row] = (work[row] * pow(int(work[row, col]), -1, p)) % p
        factors = work[:, col].copy()
        factors[row] = 0
        work = (work - np.outer(factors, work[row])) % p
        pivots.append(col)
        row += 1
        if row == rows:
            break
    return work, pivots


def rank_mod(matrix: Sequence[Sequence[int]], p: int) -> int:
    """Rank over GF(p)."""
    work = _as_array(matrix, np.int64)
    if work is None:
        return 0
    _, pivots = rref_mod(work, p)
    return len(pivots)


def rank(matrix: Sequence[Sequence[int]], modulus: int | None = None) -> int:
    """Rank over Q when ``modulus`` is None, over GF(modulus) otherwise."""
    if modulus is None:
        return rank_rational(matrix)
    return rank_mod(matrix, modulus)
