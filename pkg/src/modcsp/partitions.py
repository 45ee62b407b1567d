"""Set partitions and the Möbius function of the partition lattice."""

import itertools
from collections.abc import Iterator, Mapping, Sequence
from math import factorial

from modcsp.models import Element

Block = tuple[Element, ...]
SetPartition = tuple[Block, ...]
SortPartition = dict[str, SetPartition]
"""One set partition per sort."""


def set_partitions(elements: Sequence[Element]) -> Iterator[SetPartition]:
    """Enumerate all set partitions in restricted-growth order.

    The first partition is the bottom (all singletons), blocks keep the order
    of ``elements``.
    """
    elements = tuple(elements)
    if not elements:
        yield ()
        return

    def grow(index: int, labels: list[int], top: int) -> Iterator[list[int]]:
        if index == len(elements):
            yield labels
            return
        # new blocks first so the bottom partition comes out first
        for label in [top + 1, *range(top + 1)]:
            labels.append(label)
            yield from grow(index + 1, labels, max(top, label))
            labels.pop()

    for labels in grow(1, [0], 0):
        blocks: dict[int, list[Element]] = {}
        for element, label in zip(elements, labels):
            blocks.setdefault(label, []).append(element)
        yield tuple(tuple(block) for block in blocks.values())


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[0]


def sort_partitions(sorts: Mapping[str, Sequence[Element]]) -> Iterator[SortPartition]:
    """Enumerate families with one set partition per sort; the bottom comes first."""
    names = list(sorts)
    for combo in itertools.product(*(list(set_partitions(sorts[n])) for n in names)):
        yield dict(zip(names, combo))


def is_bottom(partition: Mapping[str, SetPartition]) -> bool:
    return all(len(block) == 1 for blocks in partition.values() for block in blocks)


def refines(finer: Mapping[str, SetPartition], coarser: Mapping[str, SetPartition]) -> bool:
    """Whether every block of ``finer`` lies inside a block of ``coarser``."""
    for name, blocks in finer.items():
        owner = {e: i for i, block in enumerate(coarser[name]) for e in block}
        for block in blocks:
            if len({owner[e] for e in block}) != 1:
                return False
    return True


def mobius_from_bottom(partition: Mapping[str, SetPartition]) -> int:
    """μ(0̱, θ) in the product of partition lattices.

    Closed form: product over all blocks of (-1)^(|B|-1) (|B|-1)!.
    """
    weight = 1
    for blocks in partition.values():
        for block in blocks:
            size = len(block)
            weight *= (-1) ** (size - 1) * factorial(size - 1)
    return weight


def mobius_by_recursion(
    partitions: Sequence[Mapping[str, SetPartition]],
) -> list[int]:
    """μ(0̱, θ) for each θ of the list by the defining recursion.

    ``partitions`` must contain the whole lattice with the bottom first.
    μ(0̱,0̱) = 1 and μ(0̱,θ) = -Σ_{η < θ} μ(0̱,η).
    """
    order = sorted(
        range(len(partitions)),
        key=lambda i: sum(len(b) for bs in partitions[i].values() for b in bs)
        - sum(len(bs) for bs in partitions[i].values()),
    )
    weights: dict[int, int] = {}
    for i in order:
        theta = partitions[i]
        below = [
            j
            for j in weights
            if j != i and refines(partitions[j], theta)
        ]
        weights[i] = 1 if not below else -sum(weights[j] for j in below)
    return [weights[i] for i in range(len(partitions))]
