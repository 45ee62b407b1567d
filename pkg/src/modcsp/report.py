"""Machine-readable report emitted by ``modcsp --json``."""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from modcsp.const import REPORT_SCHEMA_VERSION
from modcsp.parser import dump_json, encode_element


def file_digest(path: str | Path) -> str:
    """SHA-256 of a file's bytes, hex encoded."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def to_jsonable(value: Any) -> Any:
    """Turn tuples into lists and sets into sorted lists, recursively."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(value, key=repr)]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return encode_element(value)


@dataclass
class Report:
    """Result of one CLI invocation.

    Attributes:
        command: Subcommand name
        inputs: Input role (``structure``, ``instance``, ...) to file hash, or
            ``fixture:<name>`` for bundled fixtures
        results: Counts, verdicts and witnesses of the command
        exit_code: Process exit code the command finished with
        error: Error type and message on failure
        timings: Seconds per phase; excluded from deterministic output
        schema_version: Report format version
    """

    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0
    error: dict[str, Any] | None = None
    timings: dict[str, float] = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def add_input(self, role: str, path: str | Path) -> None:
        self.inputs[role] = f"sha256:{file_digest(path)}"

    def to_dict(self, with_timings: bool = False) -> dict[str, Any]:
        document: dict[str, Any] = {
            "schema_version": self.schema_version,
            "command": self.command,
            "inputs": dict(sorted(self.inputs.items())),
            "exit_code": self.exit_code,
            "results": to_jsonable(self.results),
        }
        if self.error is not None:
            document["error"] = to_jsonable(self.error)
        if with_timings:
            document["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return document

    def to_json(self, with_timings: bool = False) -> str:
        return dump_json(self.to_dict(with_timings))
