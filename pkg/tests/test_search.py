"""Tests for table-constraint search."""

import pytest

from modcsp.exceptions import GuardExceededError
from modcsp.search import TableConstraint, iter_solutions, propagate, solve_first

NOT_EQUAL = tuple((a, b) for a in range(3) for b in range(3) if a != b)


def test_propagate_prunes_unsupported_values():
    """x < y on {0, 1, 2} removes 2 from x and 0 from y."""
    less = TableConstraint(("x", "y"), ((0, 1), (0, 2), (1, 2)))
    domains = {"x": {0, 1, 2}, "y": {0, 1, 2}}
    assert propagate(domains, [less])
    assert domains == {"x": {0, 1}, "y": {1, 2}}


def test_propagate_detects_wipe_out():
    """An unsupported domain should make propagation fail."""
    constraint = TableConstraint(("x",), ((5,),))
    assert not propagate({"x": {0, 1}}, [constraint])


def test_repeated_variables_must_agree():
    """A scope (x, x) only keeps diagonal tuples."""
    constraint = TableConstraint(("x", "x"), ((0, 1), (1, 1)))
    domains = {"x": {0, 1}}
    assert propagate(domains, [constraint])
    assert domains == {"x": {1}}


def test_iter_solutions_colourings():
    """A triangle has 6 proper 3-colourings."""
    constraints = [
        TableConstraint(("a", "b"), NOT_EQUAL),
        TableConstraint(("b", "c"), NOT_EQUAL),
        TableConstraint(("a", "c"), NOT_EQUAL),
    ]
    domains = {v: range(3) for v in "abc"}
    solutions = list(iter_solutions(domains, constraints))
    assert len(solutions) == 6
    assert solutions[0] == {"a": 0, "b": 1, "c": 2}


def test_solve_first_none_when_unsatisfiable():
    """Four pairwise different values cannot fit in three."""
    variables = "abcd"
    constraints = [
        TableConstraint((u, v), NOT_EQUAL)
        for i, u in enumerate(variables)
        for v in variables[i + 1:]
    ]
    assert solve_first({v: range(3) for v in variables}, constraints) is None


def test_search_guard(monkeypatch):
    """The node budget should stop the search."""
    monkeypatch.setattr("modcsp.search.MAX_SEARCH_NODES", 1)
    monkeypatch.delenv("MODCSP_GUARD", raising=False)
    domains = {v: range(3) for v in "abc"}
    with pytest.raises(GuardExceededError):
        list(iter_solutions(domains, [TableConstraint(("a", "b"), NOT_EQUAL)]))
