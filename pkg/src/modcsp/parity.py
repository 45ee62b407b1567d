"""Parity of the number of solutions through frames.

The solution set R of an instance is represented by a witness function only.
Its arity is reduced one coordinate at a time: tilde-R keeps the prefixes
with an odd number of extensions, and |tilde-R| ≡ |R| (mod 2). A unary
relation is counted directly.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass

from modcsp.const import EQUALITY
from modcsp.core import check_instance
from modcsp.exceptions import FrameError, PreconditionError
from modcsp.expansion import find_maltsev, is_maltsev
from modcsp.frames import (
    WitnessFunction,
    fix_coordinate,
    fix_prefix,
    initial_frame,
    next_frame,
    project_last,
    restrict_last,
    witness_function_from_frame,
)
from modcsp.models import (
    CspInstance,
    Element,
    ElementTuple,
    MultiSortedStructure,
    Operation,
    element_key,
    sort_tuples,
)
from modcsp.oracle import extension_counts

logger = logging.getLogger(__name__)

MODULUS = 2


@dataclass(frozen=True)
class ParityContext:
    """Structure plus a verified Mal'tsev polymorphism.

    Raises:
        PreconditionError: If ``op`` is not a Mal'tsev polymorphism of the structure
    """

    structure: MultiSortedStructure
    op: Operation

    def __post_init__(self) -> None:
        if not is_maltsev(self.structure, self.op):
            raise PreconditionError(
                "Operation is not a Mal'tsev polymorphism of the structure",
                condition="maltsev",
            )

    @classmethod
    def from_structure(cls, structure: MultiSortedStructure) -> "ParityContext":
        """Search for a Mal'tsev polymorphism and wrap it."""
        op = find_maltsev(structure)
        if op is None:
            raise PreconditionError(
                "Structure has no Mal'tsev polymorphism", condition="maltsev"
            )
        return cls(structure, op)


def _accept(structure: MultiSortedStructure, relation: str):
    if relation == EQUALITY and EQUALITY not in structure.relations:
        return lambda proj: proj[0] == proj[1]
    tuples = structure.relations[relation].tuple_set
    return lambda proj: proj in tuples


def build_witness_function(ctx: ParityContext, instance: CspInstance) -> WitnessFunction:
    """Witness function of the solution relation, one constraint at a time.

    Coordinates follow the variable order of the instance.

    Raises:
        InstanceError: If the instance does not fit the structure
    """
    check_instance(instance, ctx.structure)
    structure = ctx.structure
    position = {v: i for i, v in enumerate(instance.variables)}
    domains = [structure.elements(sort) for sort in instance.variables.values()]
    frame = initial_frame(domains)
    for constraint in instance.constraints:
        if not frame:
            break
        if not constraint.scope:
            if () not in structure.relations[constraint.relation].tuple_set:
                frame = ()
            continue
        coords = tuple(position[v] for v in constraint.scope)
        frame = next_frame(frame, coords, _accept(structure, constraint.relation), ctx.op)
    logger.debug("Solution frame has %d tuples over %d coordinates", len(frame), len(domains))
    return witness_function_from_frame(frame, domains, ctx.op)


def _odd_class(omega: WitnessFunction) -> tuple[Element, ...] | None:
    for block in omega.classes[omega.arity - 1]:
        if len(block) % MODULUS:
            return block
    return None


def check_epsilon_class(
    omega: WitnessFunction, x: ElementTuple, a: Element, b: Element, k: int
) -> ElementTuple | None:
    """Decide whether a ∼'_k b in PAR-R, where x ∈ PAR-R carries a at k.

    ``omega`` is a witness function of R and carries the Mal'tsev operation.
    ``a`` must equal x[k].

    S is R with coordinates before k fixed to those of x and coordinate k
    fixed to b. When S has a last-coordinate class of odd size, its witness
    is returned: a tuple of PAR-R agreeing with x before k and carrying b at k.
    """
    assert x[k] == a, f"x[{k}] = {x[k]!r}, expected {a!r}"
    restricted = fix_prefix(omega, tuple(x[:k]) + (b,))
    if restricted.is_empty:
        return None
    block = _odd_class(restricted)
    if block is None:
        return None
    return restricted.witness(omega.arity - 1, block[0])


def derive_tilde_witness(omega: WitnessFunction) -> WitnessFunction:
    """Witness function of tilde-R from one of R.

    First a witness function of PAR-R is assembled: the last coordinate keeps
    the odd classes of R; for every other coordinate k each value a is tried
    by fixing x_k = a and looking for an odd last class, and the values
    equivalent to a are collected with check_epsilon_class. Projecting away
    the last coordinate gives tilde-R.
    """
    n = omega.arity
    last = n - 1
    par = restrict_last(omega, lambda block: len(block) % MODULUS == 1)
    if not par.classes[last]:
        logger.debug("Every extension class is even")
        empty = tuple(() for _ in range(last))
        return WitnessFunction(last, omega.domains[:-1], empty, {}, omega.op)
    witnesses = {key: t for key, t in par.witnesses.items() if key[0] == last}
    classes: list[tuple[tuple[Element, ...], ...]] = []
    for k in range(last):
        pending = list(omega.projection(k))
        found: list[tuple[Element, ...]] = []
        while pending:
            a = pending.pop(0)
            fixed = fix_coordinate(omega, k, a)
            block = None if fixed.is_empty else _odd_class(fixed)
            if block is None:
                continue
            start = fixed.witness(last, block[0])
            witnesses[(k, a)] = start
            members = [a]
            for c in list(pending):
                y = check_epsilon_class(omega, start, a, c, k)
                if y is not None:
                    witnesses[(k, c)] = y
                    members.append(c)
                    pending.remove(c)
            found.append(tuple(sorted(members, key=element_key)))
        classes.append(tuple(sorted(found, key=lambda block: element_key(block[0]))))
    classes.append(par.classes[last])
    assembled = WitnessFunction(n, omega.domains, tuple(classes), witnesses, omega.op)
    check_witness_consistency(assembled)
    return project_last(assembled)


def calculate_size(omega: WitnessFunction) -> int:
    """|R| mod 2 by repeated tilde reduction down to a unary relation."""
    current = omega
    while current.arity > 1:
        if _odd_class(current) is None:
            return 0
        current = derive_tilde_witness(current)
        logger.debug("Reduced to arity %d", current.arity)
    return len(current.projection(0)) % MODULUS


def parity_count(ctx: ParityContext, instance: CspInstance) -> int:
    """Number of solutions mod 2.

    Correct when every relation 2-mpp-definable in the structure is
    rectangular and preserved by the context's Mal'tsev operation; this is
    assumed, not checked.
    """
    if not instance.variables:
        check_instance(instance, ctx.structure)
        satisfied = all(
            () in ctx.structure.relations[c.relation].tuple_set for c in instance.constraints
        )
        return int(satisfied)
    omega = build_witness_function(ctx, instance)
    if omega.is_empty:
        return 0
    return calculate_size(omega)


def par_relation(tuples: Iterable[ElementTuple], p: int = MODULUS) -> tuple[ElementTuple, ...]:
    """PAR-R by brute force: tuples whose prefix has extension count ≢ 0 mod p."""
    tuples = sort_tuples(tuples)
    if not tuples:
        return ()
    prefix = tuple(range(len(tuples[0]) - 1))
    counts = extension_counts(tuples, prefix)
    return tuple(t for t in tuples if counts[t[:-1]] % p)


def tilde_relation(tuples: Iterable[ElementTuple], p: int = MODULUS) -> tuple[ElementTuple, ...]:
    """tilde-R by brute force: prefixes with extension count ≢ 0 mod p."""
    tuples = sort_tuples(tuples)
    if not tuples:
        return ()
    prefix = tuple(range(len(tuples[0]) - 1))
    return sort_tuples(x for x, n in extension_counts(tuples, prefix).items() if n % p)


def check_witness_consistency(omega: WitnessFunction) -> None:
    """Raise FrameError if a class lacks witnesses."""
    for i, blocks in enumerate(omega.classes):
        for block in blocks:
            for a in block:
                if omega.witness(i, a) is None:
                    raise FrameError(
                        f"({i}, {a!r}) is in a class but has no witness",
                        condition="witness-function",
                    )
