"""Regression suite over the worked-example fixtures.

Each check rebuilds its fixture through the ``fixtures`` module, so a
mutated builder makes the corresponding check fail by name.
"""

import logging
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

from modcsp import fixtures
from modcsp.automorphism import enumerate_automorphisms, is_p_rigid, order_p_automorphisms, p_reduce
from modcsp.binarize import binarize, binarize_instance, transport_operation
from modcsp.core import power
from modcsp.exceptions import ModCspError
from modcsp.expansion import find_maltsev, is_maltsev
from modcsp.models import Constraint, CspInstance
from modcsp.mpp import evaluate_formula, projection_formula
from modcsp.oracle import count_solutions
from modcsp.parity import ParityContext, parity_count
from modcsp.properties import check_p_permutability, congruences_of, is_rectangular, prefix_view
from modcsp.refine import solve_tp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one regression check.

    Attributes:
        name: What the check demonstrates
        passed: Whether the fixture behaved as expected
        detail: Divergent value on failure, empty on success
        seconds: Wall time of the check
    """

    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


@dataclass
class RegressionSummary:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": r.name, "passed": r.passed, "detail": r.detail}
                for r in self.results
            ],
        }


class CheckFailed(Exception):
    """Raised inside a check with the divergent value."""


def _expect(label: str, actual, expected) -> None:
    if actual != expected:
        raise CheckFailed(f"{label}: expected {expected!r}, got {actual!r}")


def split_quantifiers_keep_more_than_grouped() -> None:
    structure = fixtures.quantifier_order_structure()
    split = evaluate_formula(structure, fixtures.split_quantifier_formula(3))
    grouped = evaluate_formula(structure, fixtures.grouped_quantifier_formula(3))
    _expect("split blocks", split.tuple_set, {(1,), (2,)})
    _expect("grouped block", grouped.tuple_set, {(2,)})


def odd_projection_is_not_rectangular() -> None:
    structure = fixtures.odd_projection_structure()
    relation = structure.relation("R")
    projected = evaluate_formula(structure, projection_formula(relation, 2, p=2))
    _expect("mod-2 projection", projected.tuple_set, {(0, 0), (0, 1), (1, 1)})
    if is_rectangular(prefix_view(projected, 1)) is None:
        raise CheckFailed("mod-2 projection: expected a rectangularity witness, got none")


def odd_projection_structure_has_maltsev() -> None:
    structure = fixtures.odd_projection_structure()
    if not is_maltsev(structure, fixtures.odd_projection_maltsev(structure)):
        raise CheckFailed("explicit operation g is not a Mal'tsev polymorphism")
    if find_maltsev(structure) is None:
        raise CheckFailed("Mal'tsev search found nothing")


def congruences_fail_to_two_permute() -> None:
    structure = fixtures.congruence_pair_not_permutable()
    failure = check_p_permutability(congruences_of(structure), 2)
    _expect("witness pair", None if failure is None else failure[2], ("a1", "a6"))


def two_permuting_congruences_without_maltsev() -> None:
    structure = fixtures.congruence_pair_without_maltsev()
    failure = check_p_permutability(congruences_of(structure), 2)
    _expect("2-permutability failure", failure, None)
    if find_maltsev(structure) is not None:
        raise CheckFailed("Mal'tsev search: expected none, found one")


def rigid_digraph_square_is_not_rigid() -> None:
    structure = fixtures.rigid_digraph()
    automorphisms = enumerate_automorphisms(structure)
    _expect("automorphism count", len(automorphisms), 1)
    square = power(structure, 2)
    if not any(a(("a", "d")) == ("c", "d") for a in order_p_automorphisms(square, 2)):
        raise CheckFailed("square: no order-2 automorphism swaps (a,d) and (c,d)")


def tp_refinement_reduces_to_two_and_one() -> None:
    refinement = fixtures.tp_refinement(3)
    reduced, trace = p_reduce(refinement.structure, 3)
    sizes = {tag: len(elements) for tag, elements in reduced.sorts.items()}
    _expect("G-1 size", sizes.get("G-1"), 2)
    _expect("G6 size", sizes.get("G6"), 1)
    if not trace.steps:
        raise CheckFailed("reduction applied no automorphism")


def tp_pipeline_counts_free_and_pinned_variables() -> None:
    structure = fixtures.tp_structure(2)
    free = CspInstance({"x": "T", "y": "T", "z": "T"}, ())
    _expect("free count", count_solutions(free, structure).exact, 64)
    _expect("free residue", solve_tp(free, structure, 2), 0)
    structure = fixtures.tp_structure(3)
    pinned = CspInstance(
        {"x": "T", "y": "T"}, (Constraint(("x", "y"), "R"), Constraint(("y",), "C_3"))
    )
    expected = count_solutions(pinned, structure, 3).reduced
    _expect("pinned residue", solve_tp(pinned, structure, 3), expected)


def parity_matches_oracle_on_affine_structure() -> None:
    structure = fixtures.z2_affine()
    ctx = ParityContext(structure, fixtures.z2_affine_maltsev(structure))
    instance = CspInstance(
        {v: "H" for v in "xyzw"},
        (
            Constraint(("x", "y", "z"), "lin0"),
            Constraint(("y", "z", "w"), "lin1"),
            Constraint(("w",), "C_1"),
        ),
    )
    expected = count_solutions(instance, structure, 2).reduced
    _expect("parity", parity_count(ctx, instance), expected)


def binarization_keeps_maltsev_and_rigidity() -> None:
    structure = fixtures.z2_affine()
    b = binarize(structure)
    if not is_maltsev(b.structure, transport_operation(fixtures.z2_affine_maltsev(structure), b)):
        raise CheckFailed("transported operation is not Mal'tsev on b(H)")
    digraph = binarize(fixtures.rigid_digraph())
    _expect("2-rigid b(H)", is_p_rigid(digraph.structure, 2), True)
    instance = CspInstance(
        {v: "H" for v in "xyz"},
        (Constraint(("x", "y", "z"), "lin0"), Constraint(("z",), "C_0")),
    )
    _expect(
        "binarized count",
        count_solutions(binarize_instance(instance, b), b.structure).exact,
        count_solutions(instance, structure).exact,
    )


REGRESSION_CHECKS: dict[str, Callable[[], None]] = {
    check.__name__: check
    for check in (
        split_quantifiers_keep_more_than_grouped,
        odd_projection_is_not_rectangular,
        odd_projection_structure_has_maltsev,
        congruences_fail_to_two_permute,
        two_permuting_congruences_without_maltsev,
        rigid_digraph_square_is_not_rigid,
        tp_refinement_reduces_to_two_and_one,
        tp_pipeline_counts_free_and_pinned_variables,
        parity_matches_oracle_on_affine_structure,
        binarization_keeps_maltsev_and_rigidity,
    )
}


def run_regression_suite(checks: Iterable[str] | None = None) -> RegressionSummary:
    """Run the named checks (default: all) and collect their outcomes.

    Failures never propagate; a library error inside a check counts as a
    failure with the error message as detail.

    Raises:
        KeyError: If a requested check does not exist
    """
    names = list(REGRESSION_CHECKS) if checks is None else list(checks)
    summary = RegressionSummary()
    for name in names:
        check = REGRESSION_CHECKS[name]
        started = time.perf_counter()
        try:
            check()
        except (CheckFailed, ModCspError) as e:
            result = CheckResult(name, False, str(e), time.perf_counter() - started)
            logger.warning("Regression check %s failed: %s", name, e)
        else:
            result = CheckResult(name, True, "", time.perf_counter() - started)
            logger.debug("Regression check %s passed in %.3fs", name, result.seconds)
        summary.results.append(result)
    return summary
