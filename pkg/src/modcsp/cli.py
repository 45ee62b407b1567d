"""Command-line interface: ``modcsp <subcommand>``.

Structures and instances are JSON files, or bundled fixtures given as
``fixture:<name>``. ``--json`` prints a versioned Report instead of text.
"""

import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import click

from modcsp import __version__
from modcsp.automorphism import ReductionTrace, p_reduce
from modcsp.binarize import binarize, binarize_instance
from modcsp.const import (
    DEFAULT_SEED,
    EQUALITY,
    EXIT_DATAERR,
    EXIT_OK,
    EXIT_ORACLE_MISMATCH,
    EXIT_PRECONDITION,
    EXIT_USAGE,
    FIXTURE_PREFIX,
)
from modcsp.core import check_instance, instance_to_structure
from modcsp.exceptions import (
    ConfigurationError,
    FormulaError,
    GuardExceededError,
    InstanceError,
    ModCspError,
    OracleMismatchError,
    ParseError,
    PreconditionError,
    StructureError,
)
from modcsp.expansion import count_with_constants, eliminate_equality
from modcsp.fixtures import FIXTURE_INSTANCES, FIXTURE_STRUCTURES
from modcsp.gadget import scan_relations
from modcsp.models import (
    CspInstance,
    DistinguishedStructure,
    MultiSortedStructure,
    element_label,
    sort_tuples,
)
from modcsp.mpp import evaluate_formula, generate_formulas, is_strict
from modcsp.oracle import count_inj, count_solutions
from modcsp.parity import MODULUS, ParityContext, parity_count
from modcsp.parser import (
    dump_json,
    instance_to_dict,
    load_formula,
    load_instance,
    load_operation,
    load_structure,
    structure_to_dict,
)
from modcsp.properties import analyze_structure
from modcsp.refine import is_tp_structure, refine_and_reduce, solve_tp
from modcsp.regression import REGRESSION_CHECKS, run_regression_suite
from modcsp.report import Report

logger = logging.getLogger(__name__)

DATA_ERRORS = (ParseError, StructureError, InstanceError, FormulaError)
PRECONDITION_ERRORS = (PreconditionError, GuardExceededError)


@dataclass
class CliState:
    """Per-invocation settings and output shared by the subcommands."""

    as_json: bool = False
    verbose: bool = False
    seed: int = DEFAULT_SEED
    timings: bool = False
    report: Report | None = None
    lines: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK

    def say(self, line: str = "") -> None:
        self.lines.append(line)


class ModCspGroup(click.Group):
    """Group whose standalone entry point maps errors to exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode, **extra)
        code, _ = dispatch(args, prog_name)
        sys.exit(code)


def _fixture(kind: str, value: str, registry: dict):
    name = value[len(FIXTURE_PREFIX):]
    try:
        return registry[name]()
    except KeyError as e:
        raise click.BadParameter(
            f"unknown {kind} fixture {name!r}; choose from {', '.join(sorted(registry))}"
        ) from e


def _structure(state: CliState, value: str, role: str = "structure") -> MultiSortedStructure:
    if value.startswith(FIXTURE_PREFIX):
        state.report.inputs[role] = value
        return _fixture("structure", value, FIXTURE_STRUCTURES)
    structure = load_structure(value)
    state.report.add_input(role, value)
    return structure


def _instance(state: CliState, value: str) -> CspInstance:
    if value.startswith(FIXTURE_PREFIX):
        state.report.inputs["instance"] = value
        return _fixture("instance", value, FIXTURE_INSTANCES)
    instance = load_instance(value)
    state.report.add_input("instance", value)
    return instance


def _label_tuple(values) -> str:
    return " ".join(element_label(a) for a in values)


def _write(path: str, document) -> None:
    Path(path).write_text(dump_json(document), encoding="utf-8")


@click.group(cls=ModCspGroup)
@click.version_option(__version__, prog_name="modcsp")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON report instead of text.")
@click.option("--verbose", "-v", is_flag=True, help="Log progress to stderr.")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True,
              help="Seed for randomized generation.")
@click.option("--timings", is_flag=True, help="Include timings in the JSON report.")
@click.pass_context
def cli(ctx: click.Context, as_json: bool, verbose: bool, seed: int, timings: bool) -> None:
    """Counting constraint satisfaction problems modulo a prime."""
    state = ctx.ensure_object(CliState)
    state.as_json = as_json
    state.verbose = verbose
    state.seed = seed
    state.timings = timings
    state.report = Report(ctx.invoked_subcommand or "")
    if verbose:
        logging.basicConfig(
            level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
        )


structure_option = click.option(
    "--structure", "structure_path", required=True, metavar="PATH",
    help="Structure JSON file or fixture:<name>.",
)
instance_option = click.option(
    "--instance", "instance_path", required=True, metavar="PATH",
    help="Instance JSON file or fixture:<name>.",
)
modulus_option = click.option("--mod", "modulus", type=int, required=True, help="Prime modulus.")


def _count_injective(instance: CspInstance, structure: MultiSortedStructure) -> int:
    if any(c.relation == EQUALITY for c in instance.constraints):
        instance = eliminate_equality(instance)
    source = instance_to_structure(instance, structure)
    return count_inj(DistinguishedStructure(source), DistinguishedStructure(structure))


@cli.command()
@structure_option
@instance_option
@click.option("--mod", "modulus", type=int, help="Report the count modulo this prime.")
@click.option("--inj", is_flag=True, help="Count injective solutions only.")
@click.option("--via-constants-reduction", is_flag=True,
              help="Count over H^c through the constants reduction and compare with the oracle.")
@click.pass_obj
def count(
    state: CliState,
    structure_path: str,
    instance_path: str,
    modulus: int | None,
    inj: bool,
    via_constants_reduction: bool,
) -> Report:
    """Number of solutions of an instance."""
    structure = _structure(state, structure_path)
    instance = _instance(state, instance_path)
    check_instance(instance, structure)
    if via_constants_reduction:
        if modulus is None:
            raise click.UsageError("--via-constants-reduction needs --mod")
        value = count_with_constants(instance, structure, modulus)
        expected = count_solutions(instance, structure, modulus).reduced
        if value != expected:
            raise OracleMismatchError(
                f"Constants reduction gave {value}, oracle gave {expected} (mod {modulus})",
                expected=expected,
                actual=value,
            )
        method = "constants-reduction"
    elif inj:
        value = _count_injective(instance, structure)
        if modulus is not None:
            value %= modulus
        method = "injective"
    else:
        result = count_solutions(instance, structure, modulus)
        value = result.exact if modulus is None else result.reduced
        method = "oracle"
    state.report.results = {"count": value, "modulus": modulus, "method": method}
    state.say(str(value))
    return state.report


def _trace_dict(trace: ReductionTrace) -> dict:
    return {
        "steps": [
            {
                "cycles": [list(c) for c in step.automorphism.cycles],
                "fixed": {sort: list(elements) for sort, elements in step.fixed.items()},
            }
            for step in trace.steps
        ]
    }


@cli.command()
@structure_option
@modulus_option
@click.option("--trace", "trace_path", metavar="PATH", help="Write the reduction trace here.")
@click.option("--prefer", type=click.Choice(["first", "last"]), default="first", show_default=True,
              help="Which order-p automorphism to apply at each step.")
@click.pass_obj
def reduce(
    state: CliState, structure_path: str, modulus: int, trace_path: str | None, prefer: str
) -> Report:
    """Reduce a structure to its p-rigid reduct H^{*p}."""
    structure = _structure(state, structure_path)
    reduced, trace = p_reduce(structure, modulus, prefer)
    document = structure_to_dict(reduced)
    if trace_path:
        _write(trace_path, _trace_dict(trace))
    state.report.results = {
        "modulus": modulus,
        "steps": len(trace.steps),
        "universe_size": reduced.universe_size,
        "structure": document,
    }
    state.lines.extend(dump_json(document).splitlines())
    return state.report


@cli.command()
@structure_option
@modulus_option
@click.option("--no-maltsev", is_flag=True, help="Skip the Mal'tsev polymorphism search.")
@click.pass_obj
def analyze(state: CliState, structure_path: str, modulus: int, no_maltsev: bool) -> Report:
    """Rectangularity, balancedness, Mal'tsev and permutability report."""
    structure = _structure(state, structure_path)
    results = analyze_structure(structure, modulus, maltsev=not no_maltsev)
    state.report.results = results
    for name, entry in results["relations"].items():
        broken = [k for k, witness in entry["rectangular"].items() if witness is not None]
        unbalanced = [s for s, v in entry["balanced"].items() if not v["p_balanced"]]
        state.say(
            f"{name}: arity {entry['arity']}, {entry['size']} tuples, "
            f"{'rectangular' if not broken else 'not rectangular at k=' + ','.join(broken)}, "
            f"{'p-balanced' if not unbalanced else 'not p-balanced at ' + ' '.join(unbalanced)}"
        )
    if "maltsev" in results:
        verdict = {True: "yes", False: "no", None: "undecided"}[results["maltsev"]]
        state.say(f"Mal'tsev polymorphism: {verdict}")
    for sort, failure in results["p_permutability"].items():
        if failure is None:
            state.say(f"congruences on {sort}: {modulus}-permutable")
        else:
            alpha, beta = failure["congruences"]
            state.say(
                f"congruences on {sort}: {alpha} and {beta} do not {modulus}-permute, "
                f"witness ({_label_tuple(failure['pair'])})"
            )
    return state.report


@cli.command("eval-formula")
@structure_option
@click.option("--formula", "formula_path", required=True, metavar="PATH", help="Formula JSON file.")
@click.pass_obj
def eval_formula(state: CliState, structure_path: str, formula_path: str) -> Report:
    """Relation defined by a prefix formula."""
    structure = _structure(state, structure_path)
    formula = load_formula(formula_path)
    state.report.add_input("formula", formula_path)
    relation = evaluate_formula(structure, formula)
    strict = is_strict(structure, formula) if formula.blocks and formula.blocks[0].is_modular else None
    tuples = sort_tuples(relation.tuples)
    state.report.results = {
        "free": list(formula.free),
        "size": len(tuples),
        "tuples": tuples,
        "strict": strict,
    }
    for t in tuples:
        state.say(_label_tuple(t))
    return state.report


@cli.command()
@structure_option
@instance_option
@click.option("--operation", "operation_path", metavar="PATH",
              help="Mal'tsev operation JSON; searched for when omitted.")
@click.option("--verify-oracle", is_flag=True, help="Cross-check against the brute-force count.")
@click.pass_obj
def parity(
    state: CliState,
    structure_path: str,
    instance_path: str,
    operation_path: str | None,
    verify_oracle: bool,
) -> Report:
    """Number of solutions mod 2 by the witness-function algorithm."""
    structure = _structure(state, structure_path)
    instance = _instance(state, instance_path)
    if operation_path:
        op = load_operation(operation_path)
        state.report.add_input("operation", operation_path)
        ctx = ParityContext(structure, op)
    else:
        ctx = ParityContext.from_structure(structure)
    value = parity_count(ctx, instance)
    results = {"parity": value}
    if verify_oracle:
        expected = count_solutions(instance, structure, MODULUS).reduced
        results["oracle"] = expected
        if value != expected:
            raise OracleMismatchError(
                f"Parity algorithm gave {value}, oracle gave {expected}",
                expected=expected,
                actual=value,
            )
    state.report.results = results
    state.say(str(value))
    return state.report


@cli.command()
@structure_option
@instance_option
@modulus_option
@click.option("--method", type=click.Choice(["ac", "solver"]), default="ac", show_default=True,
              help="Domain pipeline: arc consistency or decision-oracle queries.")
@click.option("--output", "output_path", metavar="PATH",
              help="Write the refined structure and instance here.")
@click.pass_obj
def refine(
    state: CliState,
    structure_path: str,
    instance_path: str,
    modulus: int,
    method: str,
    output_path: str | None,
) -> Report:
    """Refine by domains, reduce the refinement and count mod p."""
    structure = _structure(state, structure_path)
    instance = _instance(state, instance_path)
    outcome = refine_and_reduce(instance, structure, modulus, method)
    results: dict = {"modulus": modulus, "count": outcome.residue, "method": outcome.method}
    if outcome.refined is not None:
        refined = outcome.refined
        pair = {
            "structure": structure_to_dict(refined.refinement.structure),
            "instance": instance_to_dict(refined.instance),
        }
        results["sort_map"] = dict(refined.sort_map)
        results["refined"] = pair
        if output_path:
            _write(output_path, pair)
    if is_tp_structure(structure, modulus):
        results["t_p_count"] = solve_tp(instance, structure, modulus)
    state.report.results = results
    if outcome.refined is not None:
        for v, tag in outcome.refined.sort_map.items():
            state.say(f"{v}: {tag}")
    state.say(f"count mod {modulus}: {outcome.residue} ({outcome.method})")
    return state.report


@cli.command("gadget-scan")
@structure_option
@modulus_option
@click.option("--formula", "formula_paths", multiple=True, metavar="PATH",
              help="Scan the relation this formula defines (repeatable).")
@click.option("--generate", "generated", type=int, default=0,
              help="Also scan relations of this many random p-mpp formulas (uses --seed).")
@click.option("--protection", type=click.Choice(["graph", "relation"]), default="graph",
              show_default=True, help="Protection check mode.")
@click.pass_obj
def gadget_scan(
    state: CliState,
    structure_path: str,
    modulus: int,
    formula_paths: tuple[str, ...],
    generated: int,
    protection: str,
) -> Report:
    """Rectangularity obstructions and standard hardness gadgets."""
    structure = _structure(state, structure_path)
    relations = {}
    for path in formula_paths:
        name = Path(path).stem
        relations[name] = evaluate_formula(structure, load_formula(path), name)
        state.report.add_input(f"formula:{name}", path)
    if generated:
        formulas = generate_formulas(structure, modulus, count=generated, seed=state.seed)
        for i, formula in enumerate(formulas):
            relation = evaluate_formula(structure, formula, f"generated{i}")
            if relation.arity >= 2 and len(relation):
                relations[relation.name] = relation
    findings = scan_relations(structure, modulus, relations or None, protection)
    state.report.results = {"modulus": modulus, "seed": state.seed, "relations": findings}
    for entry in findings:
        gadget = entry["gadget"]
        if gadget is None:
            verdict = "no gadget"
        elif gadget["protection"] is None:
            verdict = f"gadget at s={gadget['s']}, protection undecided"
        else:
            protected = "protected" if gadget["protection"]["protected"] else "not protected"
            verdict = f"gadget at s={gadget['s']}, {protected}"
        state.say(f"{entry['relation']}: {len(entry['obstructions'])} obstructions, {verdict}")
    return state.report


@cli.command("binarize")
@structure_option
@click.option("--instance", "instance_path", metavar="PATH",
              help="Also translate this instance (file or fixture:<name>).")
@click.pass_obj
def binarize_command(state: CliState, structure_path: str, instance_path: str | None) -> Report:
    """Binary structure b(H) and, optionally, the translated instance."""
    structure = _structure(state, structure_path)
    b = binarize(structure)
    document = {"structure": structure_to_dict(b.structure)}
    if instance_path:
        instance = _instance(state, instance_path)
        check_instance(instance, structure)
        document["instance"] = instance_to_dict(binarize_instance(instance, b))
    state.report.results = document
    state.lines.extend(dump_json(document).splitlines())
    return state.report


@cli.command()
@click.option("--check", "checks", multiple=True, type=click.Choice(sorted(REGRESSION_CHECKS)),
              help="Run only this check (repeatable).")
@click.pass_obj
def regress(state: CliState, checks: tuple[str, ...]) -> Report:
    """Run the regression suite over the bundled fixtures."""
    summary = run_regression_suite(checks or None)
    state.report.results = summary.to_dict()
    for result in summary.results:
        if result.passed:
            state.say(f"PASS {result.name}")
        else:
            state.say(f"FAIL {result.name}: {result.detail}")
    if not summary.passed:
        state.exit_code = EXIT_PRECONDITION
    return state.report


def _error_report(state: CliState, error: ModCspError, code: int) -> Report:
    report = state.report or Report("")
    details: dict = {"type": type(error).__name__, "message": str(error)}
    for attribute in ("condition", "source", "line", "column", "expected", "actual", "limit"):
        value = getattr(error, attribute, None)
        if value is not None:
            details[attribute] = value
    report.error = details
    report.exit_code = code
    return report


def _show_error(state: CliState, report: Report) -> None:
    if state.as_json:
        click.echo(report.to_json(state.timings), nl=False)
        return
    error = report.error
    message = f"Error: {error['message']}"
    if "condition" in error:
        message += f" (condition: {error['condition']})"
    if "line" in error:
        message += f" at {error.get('source', '<input>')}:{error['line']}:{error.get('column', 0)}"
    click.echo(message, err=True)


def dispatch(argv: list[str] | None = None, prog_name: str | None = None) -> tuple[int, Report | None]:
    """Run one CLI invocation.

    Returns:
        The exit code and the report of the subcommand (None for usage errors and help)
    """
    state = CliState()
    started = time.perf_counter()
    try:
        outcome = cli.main(args=argv, prog_name=prog_name or "modcsp", standalone_mode=False, obj=state)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE, None
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE, None
    except OracleMismatchError as e:
        code = EXIT_ORACLE_MISMATCH
        error = e
    except DATA_ERRORS as e:
        code = EXIT_DATAERR
        error = e
    except PRECONDITION_ERRORS as e:
        code = EXIT_PRECONDITION
        error = e
    except ConfigurationError as e:
        code = EXIT_USAGE
        error = e
    else:
        if not isinstance(outcome, Report):
            return outcome or EXIT_OK, None
        outcome.timings["total"] = time.perf_counter() - started
        outcome.exit_code = state.exit_code
        if state.as_json:
            click.echo(outcome.to_json(state.timings), nl=False)
        else:
            for line in state.lines:
                click.echo(line)
        return state.exit_code, outcome
    logger.debug("Command failed: %s", error)
    report = _error_report(state, error, code)
    report.timings["total"] = time.perf_counter() - started
    _show_error(state, report)
    return code, report


def main() -> None:
    """Console-script entry point."""
    cli()


if __name__ == "__main__":
    main()
