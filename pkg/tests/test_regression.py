"""Tests for the regression suite."""

import pytest

from modcsp import fixtures
from modcsp.core import make_relation, make_structure
from modcsp.exceptions import StructureError
from modcsp.regression import REGRESSION_CHECKS, run_regression_suite

FAST_CHECKS = sorted(set(REGRESSION_CHECKS) - {"two_permuting_congruences_without_maltsev"})


@pytest.mark.parametrize("name", FAST_CHECKS)
def test_check_passes(name):
    summary = run_regression_suite([name])
    assert summary.passed, summary.failures


@pytest.mark.slow
def test_full_suite_passes():
    summary = run_regression_suite()
    assert summary.passed, summary.failures
    assert len(summary.results) == len(REGRESSION_CHECKS)


def test_mutated_fixture_fails_by_name(monkeypatch):
    """Dropping (2, 2, 2) changes what the split blocks keep."""

    def mutated():
        return make_structure(
            {"H": [0, 1, 2]},
            [make_relation("R", ("H",) * 3, [(1, 0, 0), (1, 1, 0), (1, 1, 1)])],
        )

    monkeypatch.setattr(fixtures, "quantifier_order_structure", mutated)
    summary = run_regression_suite(["split_quantifiers_keep_more_than_grouped"])
    assert not summary.passed
    [failure] = summary.failures
    assert failure.name == "split_quantifiers_keep_more_than_grouped"
    assert failure.detail.startswith("split blocks")


def test_library_error_counts_as_failure(monkeypatch):
    def broken(p):
        raise StructureError("broken refinement")

    monkeypatch.setattr(fixtures, "tp_refinement", broken)
    summary = run_regression_suite(["tp_refinement_reduces_to_two_and_one"])
    assert summary.failures[0].detail == "broken refinement"


def test_unknown_check():
    """Unknown check names should raise KeyError."""
    with pytest.raises(KeyError):
        run_regression_suite(["no_such_check"])


def test_summary_to_dict():
    document = run_regression_suite(["split_quantifiers_keep_more_than_grouped"]).to_dict()
    assert document == {
        "passed": True,
        "checks": [
            {"name": "split_quantifiers_keep_more_than_grouped", "passed": True, "detail": ""}
        ],
    }
