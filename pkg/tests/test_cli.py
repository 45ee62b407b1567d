"""Tests for the modcsp command line."""

import json

import pytest
from click.testing import CliRunner

from modcsp.cli import cli, dispatch
from modcsp.const import (
    EXIT_DATAERR,
    EXIT_OK,
    EXIT_ORACLE_MISMATCH,
    EXIT_PRECONDITION,
    EXIT_USAGE,
)


@pytest.fixture
def runner():
    return CliRunner()


def test_count_free_variables(runner):
    """Three free variables over T_2 have 4^3 solutions."""
    result = runner.invoke(cli, ["count", "--structure", "fixture:t2", "--instance", "fixture:t-free3"])
    assert result.exit_code == EXIT_OK
    assert result.output.strip() == "64"


def test_count_modulo(runner):
    result = runner.invoke(
        cli, ["count", "--structure", "fixture:t2", "--instance", "fixture:t-free3", "--mod", "3"]
    )
    assert result.output.strip() == "1"


def test_count_json_report(runner):
    """--json should print a versioned report without timings."""
    result = runner.invoke(
        cli, ["--json", "count", "--structure", "fixture:t2", "--instance", "fixture:t-free3"]
    )
    assert result.exit_code == EXIT_OK
    document = json.loads(result.output)
    assert document["command"] == "count"
    assert document["exit_code"] == 0
    assert document["inputs"] == {"instance": "fixture:t-free3", "structure": "fixture:t2"}
    assert document["results"] == {"count": 64, "modulus": None, "method": "oracle"}
    assert "timings" not in document


def test_count_json_report_with_timings(runner):
    result = runner.invoke(
        cli,
        ["--json", "--timings", "count", "--structure", "fixture:t2", "--instance", "fixture:t-free3"],
    )
    assert "total" in json.loads(result.output)["timings"]


def test_constants_reduction_needs_modulus(runner):
    result = runner.invoke(
        cli,
        ["count", "--structure", "fixture:z2-affine", "--instance", "fixture:z2-chain",
         "--via-constants-reduction"],
    )
    assert result.exit_code == EXIT_USAGE


def test_parity_verified_against_oracle(runner):
    result = runner.invoke(
        cli,
        ["parity", "--structure", "fixture:z2-affine", "--instance", "fixture:z2-chain",
         "--verify-oracle"],
    )
    assert result.exit_code == EXIT_OK
    assert result.output.strip() == "0"


def test_parity_mismatch_exit_code(monkeypatch):
    """A disagreeing algorithm is reported with the oracle mismatch code."""
    monkeypatch.setattr("modcsp.cli.parity_count", lambda ctx, instance: 1)
    code, report = dispatch(
        ["parity", "--structure", "fixture:z2-affine", "--instance", "fixture:z2-chain",
         "--verify-oracle"]
    )
    assert code == EXIT_ORACLE_MISMATCH
    assert report.error["type"] == "OracleMismatchError"
    assert report.error["expected"] == 0
    assert report.error["actual"] == 1


def test_unknown_subcommand(runner):
    """Unknown subcommands should exit with the usage code."""
    result = runner.invoke(cli, ["frobnicate"])
    assert result.exit_code == EXIT_USAGE


def test_unknown_fixture(runner):
    result = runner.invoke(cli, ["reduce", "--structure", "fixture:nope", "--mod", "2"])
    assert result.exit_code == EXIT_USAGE


def test_malformed_json(runner, tmp_path):
    """Malformed input files should exit with the data error code."""
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    result = runner.invoke(cli, ["reduce", "--structure", str(path), "--mod", "2"])
    assert result.exit_code == EXIT_DATAERR


def test_precondition_failure(runner):
    """A composite modulus should fail the prime-modulus precondition."""
    result = runner.invoke(cli, ["--json", "reduce", "--structure", "fixture:t2", "--mod", "4"])
    assert result.exit_code == EXIT_PRECONDITION
    document = json.loads(result.output)
    assert document["exit_code"] == EXIT_PRECONDITION
    assert document["error"]["type"] == "PreconditionError"
    assert document["error"]["condition"] == "prime-modulus"


def test_reduce_writes_trace(runner, tmp_path):
    """A rigid structure is its own reduct and the trace has no steps."""
    trace = tmp_path / "trace.json"
    result = runner.invoke(
        cli,
        ["--json", "reduce", "--structure", "fixture:rigid-digraph", "--mod", "2",
         "--trace", str(trace)],
    )
    assert result.exit_code == EXIT_OK
    assert json.loads(trace.read_text(encoding="utf-8")) == {"steps": []}
    assert json.loads(result.output)["results"]["steps"] == 0


def test_reduce_loads_structure_file(runner, write_json):
    path = write_json(
        "edge.json",
        {
            "sorts": {"V": [0, 1]},
            "relations": {"E": {"signature": ["V", "V"], "tuples": [[0, 1], [1, 0]]}},
        },
    )
    result = runner.invoke(cli, ["--json", "reduce", "--structure", path, "--mod", "2"])
    assert result.exit_code == EXIT_OK
    document = json.loads(result.output)
    assert document["inputs"]["structure"].startswith("sha256:")
    assert document["results"]["universe_size"] == 0


def test_refine_tp_path(runner):
    result = runner.invoke(
        cli,
        ["--json", "refine", "--structure", "fixture:t2", "--instance", "fixture:t-path",
         "--mod", "2"],
    )
    assert result.exit_code == EXIT_OK
    results = json.loads(result.output)["results"]
    assert results["count"] == 0
    assert results["t_p_count"] == 0


def test_analyze_reports_permutability(runner):
    result = runner.invoke(
        cli, ["analyze", "--structure", "fixture:congruences-7", "--mod", "2", "--no-maltsev"]
    )
    assert result.exit_code == EXIT_OK
    assert "do not 2-permute" in result.output


def test_regress_single_check(runner):
    result = runner.invoke(cli, ["regress", "--check", "split_quantifiers_keep_more_than_grouped"])
    assert result.exit_code == EXIT_OK
    assert result.output.strip() == "PASS split_quantifiers_keep_more_than_grouped"


def test_binarize_translates_instance(runner):
    result = runner.invoke(
        cli, ["binarize", "--structure", "fixture:z2-affine", "--instance", "fixture:z2-chain"]
    )
    assert result.exit_code == EXIT_OK
    document = json.loads(result.output)
    assert set(document) == {"structure", "instance"}


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == EXIT_OK
    assert "modcsp" in result.output
