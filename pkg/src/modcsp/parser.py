"""JSON codecs for structures, instances, formulas and operations."""

import json
from pathlib import Path
from typing import Any

from modcsp.exceptions import FormulaError, InstanceError, ParseError, StructureError
from modcsp.models import (
    EXISTS,
    MODULAR,
    Atom,
    Constraint,
    CspInstance,
    Element,
    MppFormula,
    MultiSortedStructure,
    Operation,
    QuantifierBlock,
    Relation,
    RelationSymbol,
    sort_tuples,
)


def load_json(text: str, source: str | None = None) -> Any:
    """Decode a JSON document, keeping the error location.

    Raises:
        ParseError: If the text is not valid JSON
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(
            f"Malformed JSON: {e.msg}", source=source, line=e.lineno, column=e.colno
        ) from e


def dump_json(document: Any) -> str:
    """Encode a document deterministically (key order as built, two-space indent)."""
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def _check_fields(
    raw: Any, allowed: set[str], required: set[str], what: str, source: str | None
) -> dict:
    if not isinstance(raw, dict):
        raise ParseError(f"{what} must be a JSON object", source=source)
    unknown = set(raw) - allowed
    if unknown:
        raise ParseError(f"Unknown fields in {what}: {sorted(unknown)}", source=source)
    missing = required - set(raw)
    if missing:
        raise ParseError(f"Missing fields in {what}: {sorted(missing)}", source=source)
    return raw


def decode_element(raw: Any, source: str | None = None) -> Element:
    """JSON string or integer; arrays become tuple elements."""
    if isinstance(raw, bool) or raw is None or isinstance(raw, float):
        raise ParseError(f"Invalid element: {raw!r}", source=source)
    if isinstance(raw, (int, str)):
        return raw
    if isinstance(raw, list):
        return tuple(decode_element(item, source) for item in raw)
    raise ParseError(f"Invalid element: {raw!r}", source=source)


def encode_element(element: Element) -> Any:
    if isinstance(element, tuple):
        return [encode_element(item) for item in element]
    return element


def structure_from_dict(raw: Any, source: str | None = None) -> MultiSortedStructure:
    """Build a structure from decoded JSON.

    Raises:
        ParseError: If fields are missing, unknown, or of the wrong type
    """
    raw = _check_fields(raw, {"sorts", "relations"}, {"sorts"}, "structure", source)
    sorts_raw = raw["sorts"]
    if not isinstance(sorts_raw, dict):
        raise ParseError("'sorts' must map sort names to element lists", source=source)
    sorts: dict[str, tuple[Element, ...]] = {}
    for name, elements in sorts_raw.items():
        if not isinstance(elements, list):
            raise ParseError(f"Sort {name} must be a list of elements", source=source)
        sorts[name] = tuple(decode_element(e, source) for e in elements)

    relations: dict[str, Relation] = {}
    relations_raw = raw.get("relations", {})
    if not isinstance(relations_raw, dict):
        raise ParseError("'relations' must be an object", source=source)
    for name, body in relations_raw.items():
        body = _check_fields(
            body, {"signature", "tuples"}, {"signature"}, f"relation {name}", source
        )
        signature = body["signature"]
        if not isinstance(signature, list) or not all(isinstance(s, str) for s in signature):
            raise ParseError(f"Signature of {name} must list sort names", source=source)
        tuples_raw = body.get("tuples", [])
        if not isinstance(tuples_raw, list) or not all(isinstance(t, list) for t in tuples_raw):
            raise ParseError(f"Tuples of {name} must be a list of arrays", source=source)
        tuples = tuple(tuple(decode_element(v, source) for v in t) for t in tuples_raw)
        try:
            relations[name] = Relation(RelationSymbol(name, tuple(signature)), tuples)
        except StructureError as e:
            raise ParseError(f"Relation {name}: {e}", source=source) from e
    try:
        return MultiSortedStructure(sorts, relations)
    except StructureError as e:
        raise ParseError(str(e), source=source) from e


def structure_to_dict(structure: MultiSortedStructure) -> dict:
    return {
        "sorts": {
            name: [encode_element(e) for e in elements]
            for name, elements in structure.sorts.items()
        },
        "relations": {
            name: {
                "signature": list(relation.symbol.sort_signature),
                "tuples": [[encode_element(v) for v in t] for t in relation.tuples],
            }
            for name, relation in structure.relations.items()
        },
    }


def instance_from_dict(raw: Any, source: str | None = None) -> CspInstance:
    """Build an instance from decoded JSON.

    Raises:
        ParseError: If fields are malformed or a constraint uses an untyped variable
    """
    raw = _check_fields(raw, {"variables", "constraints"}, {"variables"}, "instance", source)
    variables = raw["variables"]
    if not isinstance(variables, dict) or not all(
        isinstance(s, str) for s in variables.values()
    ):
        raise ParseError("'variables' must map variable names to sort names", source=source)
    constraints = []
    for index, body in enumerate(raw.get("constraints", [])):
        body = _check_fields(
            body, {"scope", "relation"}, {"scope", "relation"}, f"constraint {index}", source
        )
        scope = body["scope"]
        if not isinstance(scope, list) or not all(isinstance(v, str) for v in scope):
            raise ParseError(f"Scope of constraint {index} must list variables", source=source)
        if not isinstance(body["relation"], str):
            raise ParseError(f"Relation of constraint {index} must be a name", source=source)
        constraints.append(Constraint(tuple(scope), body["relation"]))
    try:
        return CspInstance(dict(variables), tuple(constraints))
    except InstanceError as e:
        raise ParseError(str(e), source=source) from e


def instance_to_dict(instance: CspInstance) -> dict:
    return {
        "variables": dict(instance.variables),
        "constraints": [
            {"scope": list(c.scope), "relation": c.relation} for c in instance.constraints
        ],
    }


def formula_from_dict(raw: Any, source: str | None = None) -> MppFormula:
    """Build a formula from decoded JSON.

    Raises:
        ParseError: If fields are malformed or the formula is ill-formed
    """
    raw = _check_fields(raw, {"free", "blocks", "atoms"}, {"atoms"}, "formula", source)
    free = raw.get("free", {})
    if not isinstance(free, dict):
        raise ParseError("'free' must map variable names to sort names", source=source)
    blocks = []
    for index, body in enumerate(raw.get("blocks", [])):
        body = _check_fields(body, {"vars", "mode", "p"}, {"vars"}, f"block {index}", source)
        mode = body.get("mode", MODULAR)
        if mode not in (EXISTS, MODULAR):
            raise ParseError(f"Block {index} has unknown mode {mode!r}", source=source)
        modulus = body.get("p")
        if mode == MODULAR and not isinstance(modulus, int):
            raise ParseError(f"Modular block {index} needs an integer 'p'", source=source)
        blocks.append(
            QuantifierBlock(tuple(body["vars"]), mode, modulus if mode == MODULAR else None)
        )
    atoms = []
    for index, body in enumerate(raw["atoms"]):
        body = _check_fields(body, {"relation", "args"}, {"relation", "args"}, f"atom {index}", source)
        atoms.append(Atom(body["relation"], tuple(body["args"])))
    try:
        return MppFormula(dict(free), tuple(blocks), tuple(atoms))
    except FormulaError as e:
        raise ParseError(str(e), source=source) from e


def formula_to_dict(formula: MppFormula) -> dict:
    blocks = []
    for block in formula.blocks:
        body: dict[str, Any] = {"vars": list(block.variables), "mode": block.mode}
        if block.is_modular:
            body["p"] = block.modulus
        blocks.append(body)
    return {
        "free": dict(formula.free),
        "blocks": blocks,
        "atoms": [{"relation": a.relation, "args": list(a.args)} for a in formula.atoms],
    }


def operation_from_dict(raw: Any, source: str | None = None) -> Operation:
    """Operation table JSON: ``{"arity": 3, "table": [[[args...], value], ...]}``."""
    raw = _check_fields(raw, {"arity", "table"}, {"arity", "table"}, "operation", source)
    arity = raw["arity"]
    if not isinstance(arity, int) or isinstance(arity, bool) or arity < 1:
        raise ParseError("'arity' must be a positive integer", source=source)
    table: dict[tuple, Element] = {}
    for entry in raw["table"]:
        if not isinstance(entry, list) or len(entry) != 2 or not isinstance(entry[0], list):
            raise ParseError("Table entries must be [[args...], value]", source=source)
        args = tuple(decode_element(a, source) for a in entry[0])
        if len(args) != arity:
            raise ParseError(f"Table entry {entry!r} does not have arity {arity}", source=source)
        table[args] = decode_element(entry[1], source)
    return Operation(arity, table)


def operation_to_dict(operation: Operation) -> dict:
    return {
        "arity": operation.arity,
        "table": [
            [[encode_element(a) for a in args], encode_element(operation.table[args])]
            for args in sort_tuples(operation.table)
        ],
    }


def parse_structure(text: str, source: str | None = None) -> MultiSortedStructure:
    return structure_from_dict(load_json(text, source), source)


def parse_instance(text: str, source: str | None = None) -> CspInstance:
    return instance_from_dict(load_json(text, source), source)


def parse_formula(text: str, source: str | None = None) -> MppFormula:
    return formula_from_dict(load_json(text, source), source)


def parse_operation(text: str, source: str | None = None) -> Operation:
    return operation_from_dict(load_json(text, source), source)


def read_text(path: str | Path) -> str:
    """Read an input file.

    Raises:
        ParseError: If the file cannot be read
    """
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e.strerror}", source=str(path)) from e


def load_structure(path: str | Path) -> MultiSortedStructure:
    return parse_structure(read_text(path), str(path))


def load_instance(path: str | Path) -> CspInstance:
    return parse_instance(read_text(path), str(path))


def load_formula(path: str | Path) -> MppFormula:
    return parse_formula(read_text(path), str(path))


def load_operation(path: str | Path) -> Operation:
    return parse_operation(read_text(path), str(path))
