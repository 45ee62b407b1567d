"""Frames and witness functions of relations with a Mal'tsev polymorphism.

A frame is a small subset of a relation R that contains, for every fork
(i, a, b), two tuples agreeing on the first i coordinates and carrying a and
b at coordinate i. Closing a frame under the Mal'tsev operation φ gives back
R, so every algorithm here works on frames only and never lists R itself.
Coordinates are 0-based.
"""

import logging
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field

from modcsp.exceptions import FrameError
from modcsp.models import (
    Element,
    ElementTuple,
    Operation,
    element_key,
    sort_elements,
    sort_tuples,
    tuple_key,
)

logger = logging.getLogger(__name__)

Frame = tuple[ElementTuple, ...]
Fork = tuple[int, Element, Element]
Accept = Callable[[ElementTuple], bool]


@dataclass(frozen=True)
class WitnessFunction:
    """Witness function ω of an n-ary relation together with its frame classes.

    Attributes:
        arity: Number of coordinates n
        domains: Candidate elements of every coordinate
        classes: For every coordinate i, the classes of ∼_i on pr_i R
        witnesses: (i, a) to ω(i, a); pairs with a ∉ pr_i R are absent (⊥)
        op: The Mal'tsev operation the frame is closed under
    """

    arity: int
    domains: tuple[tuple[Element, ...], ...]
    classes: tuple[tuple[tuple[Element, ...], ...], ...]
    witnesses: dict[tuple[int, Element], ElementTuple] = field(default_factory=dict)
    op: Operation | None = None

    def witness(self, i: int, a: Element) -> ElementTuple | None:
        return self.witnesses.get((i, a))

    def projection(self, i: int) -> tuple[Element, ...]:
        return tuple(a for block in self.classes[i] for a in block)

    def class_of(self, i: int, a: Element) -> tuple[Element, ...] | None:
        for block in self.classes[i]:
            if a in block:
                return block
        return None

    @property
    def frame(self) -> Frame:
        return sort_tuples(self.witnesses.values())

    @property
    def is_empty(self) -> bool:
        return not self.witnesses


def signature(frame: Iterable[ElementTuple]) -> dict[Fork, tuple[ElementTuple, ElementTuple]]:
    """Forks (i, a, b) of a frame, each with a pair of tuples witnessing it.

    The pair agrees on coordinates 0..i-1 and carries a, b at coordinate i.
    Forks (i, a, a) are included.
    """
    frame = list(frame)
    forks: dict[Fork, tuple[ElementTuple, ElementTuple]] = {}
    if not frame:
        return forks
    for i in range(len(frame[0])):
        groups: dict[ElementTuple, dict[Element, ElementTuple]] = {}
        for t in frame:
            groups.setdefault(t[:i], {}).setdefault(t[i], t)
        for by_value in groups.values():
            for a, ta in by_value.items():
                for b, tb in by_value.items():
                    forks.setdefault((i, a, b), (ta, tb))
    ordered = sorted(forks, key=lambda f: (f[0], element_key(f[1]), element_key(f[2])))
    return {fork: forks[fork] for fork in ordered}


def nonempty(
    frame: Iterable[ElementTuple],
    coords: Sequence[int],
    accept: Accept,
    op: Operation,
) -> ElementTuple | None:
    """A tuple of the relation generated by ``frame`` whose projection is accepted.

    The projection onto ``coords`` of the generated relation is the closure of
    the projected frame under φ; each projection keeps one full tuple
    producing it.
    """
    coords = tuple(coords)
    witness: dict[ElementTuple, ElementTuple] = {}
    order: list[ElementTuple] = []
    for t in frame:
        proj = tuple(t[i] for i in coords)
        if proj not in witness:
            witness[proj] = t
            order.append(proj)
            if accept(proj):
                return t
    done = 0
    while done < len(order):
        x = order[done]
        done += 1
        seen = order[:done]
        for y in seen:
            for z in seen:
                for triple in ((x, y, z), (y, x, z), (y, z, x)):
                    proj = op.apply(*triple)
                    if proj in witness:
                        continue
                    full = op.apply(*(witness[p] for p in triple))
                    witness[proj] = full
                    order.append(proj)
                    if accept(proj):
                        return full
    return None


def _dedupe(tuples: Iterable[ElementTuple]) -> Frame:
    return sort_tuples(tuples)


def fix_values(frame: Frame, prefix: Sequence[Element], op: Operation) -> Frame:
    """Frame of R restricted to tuples starting with ``prefix``."""
    current = frame
    for j, value in enumerate(prefix):
        if not current:
            return ()
        first = nonempty(current, (j,), lambda proj, v=value: proj == (v,), op)
        if first is None:
            return ()
        found: list[ElementTuple] = [first]
        starts: dict[tuple[int, Element], ElementTuple | None] = {}
        for (i, a, _), (ta, tb) in signature(current).items():
            if i <= j:
                continue
            if (i, a) not in starts:
                starts[(i, a)] = nonempty(
                    current, (j, i), lambda proj, v=value, a=a: proj == (v, a), op
                )
            t = starts[(i, a)]
            if t is not None:
                found.append(t)
                found.append(op.apply(t, ta, tb))
        current = _dedupe(found)
    return current


def next_frame(frame: Frame, coords: Sequence[int], accept: Accept, op: Operation) -> Frame:
    """Frame of R ∧ (projection onto ``coords`` is accepted)."""
    coords = tuple(coords)
    found: list[ElementTuple] = []
    starts: dict[tuple[int, Element], ElementTuple | None] = {}
    restricted: dict[ElementTuple, Frame] = {}
    for (i, a, b) in signature(frame):
        if (i, a) not in starts:
            starts[(i, a)] = nonempty(
                frame,
                coords + (i,),
                lambda proj, a=a: proj[-1] == a and accept(proj[:-1]),
                op,
            )
        t = starts[(i, a)]
        if t is None:
            continue
        if t[:i] not in restricted:
            restricted[t[:i]] = fix_values(frame, t[:i], op)
        u = nonempty(
            restricted[t[:i]],
            coords + (i,),
            lambda proj, b=b: proj[-1] == b and accept(proj[:-1]),
            op,
        )
        if u is not None:
            found.extend((t, u))
    result = _dedupe(found)
    logger.debug("Frame of %d tuples after constraint on %s", len(result), coords)
    return result


def initial_frame(domains: Sequence[Sequence[Element]]) -> Frame:
    """Frame of the full product of the domains."""
    domains = [sort_elements(d) for d in domains]
    if any(not d for d in domains):
        return ()
    base = tuple(d[0] for d in domains)
    return _dedupe(
        base[:i] + (a,) + base[i + 1 :] for i, d in enumerate(domains) for a in d
    )


def _classes_from_forks(forks: Iterable[Fork], arity: int) -> list[list[tuple[Element, ...]]]:
    parent: dict[tuple[int, Element], tuple[int, Element]] = {}

    def find(x: tuple[int, Element]) -> tuple[int, Element]:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, a, b in forks:
        ra, rb = find((i, a)), find((i, b))
        if ra != rb:
            parent[rb] = ra
    groups: dict[tuple[int, Element], list[Element]] = {}
    for node in list(parent):
        groups.setdefault(find(node), []).append(node[1])
    classes: list[list[tuple[Element, ...]]] = [[] for _ in range(arity)]
    for (i, _), members in groups.items():
        classes[i].append(sort_elements(members))
    for i in range(arity):
        classes[i].sort(key=lambda block: element_key(block[0]))
    return classes


def witness_function_from_frame(
    frame: Frame,
    domains: Sequence[Sequence[Element]],
    op: Operation,
) -> WitnessFunction:
    """Read ω and the frame classes off a frame.

    For each class the least element a0 gets the frame tuple t0 of fork
    (i, a0, a0); every other member b gets φ(t0, s, s') where (s, s')
    witnesses fork (i, a0, b).

    Raises:
        FrameError: If a fork needed by the construction is missing
    """
    arity = len(domains)
    domains = tuple(sort_elements(d) for d in domains)
    forks = signature(frame)
    classes = _classes_from_forks(forks, arity)
    witnesses: dict[tuple[int, Element], ElementTuple] = {}
    for i, blocks in enumerate(classes):
        for block in blocks:
            a0 = block[0]
            t0 = forks[(i, a0, a0)][0]
            witnesses[(i, a0)] = t0
            for b in block[1:]:
                pair = forks.get((i, a0, b))
                if pair is None:
                    raise FrameError(
                        f"No fork ({i}, {a0!r}, {b!r}); relation is not rectangular",
                        condition="rectangular",
                    )
                witnesses[(i, b)] = op.apply(t0, *pair)
    return WitnessFunction(
        arity,
        domains,
        tuple(tuple(blocks) for blocks in classes),
        witnesses,
        op,
    )


def fix_coordinate(omega: WitnessFunction, s: int, a: Element) -> WitnessFunction:
    """ω^{s←a}: witness function of R ∧ (x_s = a)."""
    frame = next_frame(omega.frame, (s,), lambda proj: proj == (a,), omega.op)
    return witness_function_from_frame(frame, omega.domains, omega.op)


def fix_coordinates(
    omega: WitnessFunction, positions: Sequence[int], values: Sequence[Element]
) -> WitnessFunction:
    """Iterated fix_coordinate over the given positions."""
    for s, a in zip(positions, values, strict=True):
        omega = fix_coordinate(omega, s, a)
    return omega


def fix_prefix(omega: WitnessFunction, prefix: Sequence[Element]) -> WitnessFunction:
    """Witness function of R restricted to tuples starting with ``prefix``."""
    frame = fix_values(omega.frame, prefix, omega.op)
    return witness_function_from_frame(frame, omega.domains, omega.op)


def project_last(omega: WitnessFunction) -> WitnessFunction:
    """Witness function of ∃y R(x, y).

    Raises:
        FrameError: If the relation is unary
    """
    if omega.arity < 2:
        raise FrameError("Cannot project a unary relation", condition="arity>=2")
    last = omega.arity - 1
    witnesses = {(i, a): t[:-1] for (i, a), t in omega.witnesses.items() if i < last}
    return WitnessFunction(
        last, omega.domains[:-1], omega.classes[:-1], witnesses, omega.op
    )


def restrict_last(
    omega: WitnessFunction, keep: Callable[[tuple[Element, ...]], bool]
) -> WitnessFunction:
    """Drop the last-coordinate classes that ``keep`` rejects, in place of ⊥."""
    last = omega.arity - 1
    blocks = tuple(block for block in omega.classes[last] if keep(block))
    kept = {a for block in blocks for a in block}
    witnesses = {
        key: t for key, t in omega.witnesses.items() if key[0] != last or key[1] in kept
    }
    return WitnessFunction(
        omega.arity, omega.domains, omega.classes[:last] + (blocks,), witnesses, omega.op
    )


def enumerate_relation(omega: WitnessFunction) -> Iterator[ElementTuple]:
    """All tuples of R, regenerated from the witness function by φ."""
    if omega.is_empty or omega.arity == 0:
        return
    op = omega.op
    start = omega.witness(0, omega.projection(0)[0])

    def extend(i: int, t: ElementTuple) -> Iterator[ElementTuple]:
        if i == omega.arity:
            yield t
            return
        current = t[i]
        block = omega.class_of(i, current)
        if block is None:
            raise FrameError(
                f"Value {current!r} at coordinate {i} has no frame class",
                condition="witness-function",
            )
        for b in block:
            if b == current:
                yield from extend(i + 1, t)
            else:
                moved = op.apply(t, omega.witness(i, current), omega.witness(i, b))
                yield from extend(i + 1, moved)

    yield from extend(0, start)


def _prefix_classes(
    tuples: Sequence[ElementTuple], arity: int
) -> list[list[tuple[Element, ...]]]:
    forks = []
    for i in range(arity):
        by_prefix: dict[ElementTuple, set[Element]] = {}
        for t in tuples:
            by_prefix.setdefault(t[:i], set()).add(t[i])
        for values in by_prefix.values():
            ordered = sort_elements(values)
            forks.extend((i, ordered[0], b) for b in ordered)
    return _classes_from_forks(forks, arity)


def witness_function_from_relation(
    tuples: Iterable[ElementTuple],
    domains: Sequence[Sequence[Element]],
    op: Operation | None = None,
) -> WitnessFunction:
    """Brute-force witness function of an explicitly listed relation.

    ω(i, b) is the least tuple carrying b at coordinate i among those sharing
    the prefix of the least tuple of b's class.

    Raises:
        FrameError: If the relation is not rectangular at some coordinate
    """
    tuples = sort_tuples(tuples)
    arity = len(domains)
    classes = _prefix_classes(tuples, arity)
    witnesses: dict[tuple[int, Element], ElementTuple] = {}
    for i, blocks in enumerate(classes):
        for block in blocks:
            members = set(block)
            prefix = next(t for t in tuples if t[i] in members)[:i]
            for b in block:
                chosen = next(
                    (t for t in tuples if t[:i] == prefix and t[i] == b), None
                )
                if chosen is None:
                    raise FrameError(
                        f"Prefix {prefix!r} does not extend to {b!r} at coordinate {i}",
                        condition="rectangular",
                    )
                witnesses[(i, b)] = chosen
    return WitnessFunction(
        arity,
        tuple(sort_elements(d) for d in domains),
        tuple(tuple(blocks) for blocks in classes),
        witnesses,
        op,
    )


def validate_witness_function(
    omega: WitnessFunction, tuples: Iterable[ElementTuple]
) -> list[str]:
    """Check conditions (i)-(iii) and the frame classes against the listed relation."""
    tuples = set(tuples)
    violations: list[str] = []
    expected = _prefix_classes(sort_tuples(tuples), omega.arity)
    for i in range(omega.arity):
        projection = {t[i] for t in tuples}
        for a in omega.domains[i]:
            w = omega.witness(i, a)
            if a not in projection:
                if w is not None:
                    violations.append(f"bottom: ({i}, {a!r}) has a witness off the projection")
                continue
            if w is None:
                violations.append(f"bottom: ({i}, {a!r}) lacks a witness")
            elif w not in tuples:
                violations.append(f"witness: ω({i}, {a!r}) = {w!r} is not in the relation")
            elif w[i] != a:
                violations.append(f"witness: ω({i}, {a!r}) carries {w[i]!r}")
        if sorted(expected[i], key=tuple_key) != sorted(omega.classes[i], key=tuple_key):
            violations.append(f"classes: coordinate {i} has {omega.classes[i]} expected {tuple(expected[i])}")
        for block in expected[i]:
            prefixes = {
                omega.witness(i, b)[:i] for b in block if omega.witness(i, b) is not None
            }
            if len(prefixes) > 1:
                violations.append(f"prefix: class {block} at coordinate {i} has differing witness prefixes")
    return violations
