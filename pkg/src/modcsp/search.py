"""Table-constraint search: generalized arc consistency plus backtracking.

Used where the search space is far too big for the counting oracle, such as
looking for polymorphisms through the indicator problem.
"""

import logging
from collections import deque
from collections.abc import Iterable, Iterator, Mapping, Sequence
from typing import NamedTuple

from modcsp.const import MAX_SEARCH_NODES, guard_limit
from modcsp.exceptions import GuardExceededError
from modcsp.models import Assignment, Element, ElementTuple, element_key

logger = logging.getLogger(__name__)

Domains = dict[str, set[Element]]


class TableConstraint(NamedTuple):
    """Scope plus the allowed tuples."""

    scope: tuple[str, ...]
    tuples: tuple[ElementTuple, ...]


def _watchers(constraints: Sequence[TableConstraint]) -> dict[str, list[int]]:
    watch: dict[str, list[int]] = {}
    for index, constraint in enumerate(constraints):
        for variable in set(constraint.scope):
            watch.setdefault(variable, []).append(index)
    return watch


def _revise(domains: Domains, constraint: TableConstraint) -> list[str] | None:
    """Prune unsupported values; return changed variables, or None on a wipe-out."""
    scope = constraint.scope
    supported: list[set[Element]] = [set() for _ in scope]
    for t in constraint.tuples:
        if all(value in domains[v] for v, value in zip(scope, t)):
            # repeated variables must agree
            if len(set(scope)) != len(scope):
                seen: dict[str, Element] = {}
                if any(seen.setdefault(v, value) != value for v, value in zip(scope, t)):
                    continue
            for position, value in enumerate(t):
                supported[position].add(value)
    changed: list[str] = []
    allowed: dict[str, set[Element]] = {}
    for v, values in zip(scope, supported):
        allowed[v] = allowed[v] & values if v in allowed else values
    for v, values in allowed.items():
        if values != domains[v]:
            if not values:
                return None
            domains[v] = values
            changed.append(v)
    return changed


def propagate(
    domains: Domains,
    constraints: Sequence[TableConstraint],
    watch: Mapping[str, list[int]] | None = None,
    queue: Iterable[int] | None = None,
) -> bool:
    """Enforce generalized arc consistency in place; False when a domain empties."""
    if watch is None:
        watch = _watchers(constraints)
    pending = deque(range(len(constraints)) if queue is None else queue)
    queued = set(pending)
    while pending:
        index = pending.popleft()
        queued.discard(index)
        changed = _revise(domains, constraints[index])
        if changed is None:
            return False
        for variable in changed:
            for other in watch.get(variable, ()):
                if other != index and other not in queued:
                    pending.append(other)
                    queued.add(other)
    return True


def iter_solutions(
    domains: Mapping[str, Iterable[Element]],
    constraints: Sequence[TableConstraint],
    order: Sequence[str] | None = None,
) -> Iterator[Assignment]:
    """Maintain-arc-consistency backtracking; yields complete solutions.

    The variable with the smallest domain is branched on first (ties broken
    by ``order``), values are tried in canonical order.

    Raises:
        GuardExceededError: If the search visits more nodes than the guard allows
    """
    order = list(order or ())
    order += [v for v in domains if v not in set(order)]
    rank = {v: i for i, v in enumerate(order)}
    watch = _watchers(constraints)
    limit = guard_limit(MAX_SEARCH_NODES)
    nodes = 0
    start: Domains = {v: set(values) for v, values in domains.items()}
    if not propagate(start, constraints, watch):
        return

    def branch(current: Domains) -> Iterator[Assignment]:
        nonlocal nodes
        open_vars = [v for v in current if len(current[v]) > 1]
        if not open_vars:
            yield {v: next(iter(current[v])) for v in order}
            return
        variable = min(open_vars, key=lambda v: (len(current[v]), rank[v]))
        for value in sorted(current[variable], key=element_key):
            nodes += 1
            if limit is not None and nodes > limit:
                raise GuardExceededError(
                    f"Search exceeded {limit} nodes", limit=limit, size=nodes
                )
            child = {v: set(values) for v, values in current.items()}
            child[variable] = {value}
            if propagate(child, constraints, watch, watch.get(variable, ())):
                yield from branch(child)

    yield from branch(start)
    logger.debug("Search finished after %d nodes", nodes)


def solve_first(
    domains: Mapping[str, Iterable[Element]],
    constraints: Sequence[TableConstraint],
    order: Sequence[str] | None = None,
) -> Assignment | None:
    """First solution in search order, or None."""
    return next(iter_solutions(domains, constraints, order), None)
