"""Refinements: shrinking variable domains and re-typing them as new sorts.

Two domain pipelines are provided. Arc consistency removes tuples that have
no support in an overlapping constraint; the solver pipeline keeps exactly
the values taken by some solution. Either family of domains becomes the sort
set of a refined structure whose elements are tagged copies ``(tag, a)``.
"""

import itertools
import logging
from collections import deque
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field

from modcsp.automorphism import ReductionTrace, p_reduce
from modcsp.const import EQUALITY
from modcsp.core import (
    check_instance,
    constant_name,
    has_all_constants,
    make_relation,
    make_structure,
)
from modcsp.exceptions import ConfigurationError, PreconditionError, RefinementError
from modcsp.expansion import eliminate_equality
from modcsp.models import (
    Assignment,
    Constraint,
    CspInstance,
    Element,
    ElementTuple,
    MultiSortedStructure,
    Relation,
    element_label,
    sort_elements,
    sort_tuples,
)
from modcsp.oracle import count_solutions, is_satisfiable, require_prime

logger = logging.getLogger(__name__)

DecisionSolver = Callable[[CspInstance, MultiSortedStructure], bool]

TP_SORT = "T"
TP_RELATION = "R"


@dataclass(frozen=True)
class DomainAssignment:
    """Per-variable domains plus the reduced constraint tables.

    Attributes:
        domains: Variable to its domain D_v, canonically ordered
        tables: Remaining tuples of each constraint, aligned with the instance
        unsatisfiable: Set when some domain or table became empty
    """

    domains: dict[str, tuple[Element, ...]]
    tables: tuple[tuple[ElementTuple, ...], ...] = ()
    unsatisfiable: bool = False

    def singletons(self) -> dict[str, Element]:
        return {v: d[0] for v, d in self.domains.items() if len(d) == 1}

    def is_subset_of(self, other: "DomainAssignment") -> bool:
        """Whether every domain is contained in the other assignment's domain."""
        return all(set(d) <= set(other.domains.get(v, ())) for v, d in self.domains.items())


def _initial_table(
    instance: CspInstance, structure: MultiSortedStructure, constraint: Constraint
) -> set[ElementTuple]:
    scope = constraint.scope
    if constraint.relation == EQUALITY and EQUALITY not in structure.relations:
        tuples: Iterable[ElementTuple] = (
            (a, a) for a in structure.elements(instance.variables[scope[0]])
        )
    else:
        tuples = structure.relations[constraint.relation].tuples
    table = set()
    for t in tuples:
        values: dict[str, Element] = {}
        if all(values.setdefault(v, a) == a for v, a in zip(scope, t)):
            table.add(t)
    return table


def _restrict(
    table: Iterable[ElementTuple], scope: tuple[str, ...], domains: Mapping[str, Iterable[Element]]
) -> set[ElementTuple]:
    allowed = {v: set(domains[v]) for v in scope if v in domains}
    return {t for t in table if all(a in allowed.get(v, (a,)) for v, a in zip(scope, t))}


def _first_positions(scope: tuple[str, ...], shared: list[str]) -> tuple[int, ...]:
    return tuple(scope.index(v) for v in shared)


def arc_consistency(
    instance: CspInstance,
    structure: MultiSortedStructure,
    domains: Mapping[str, Iterable[Element]] | None = None,
) -> DomainAssignment:
    """Pairwise tuple-removal fixpoint over constraints with overlapping scopes.

    A tuple of one constraint is removed when no tuple of an overlapping
    constraint agrees with it on the shared variables. No solution is lost.

    Args:
        instance: Instance over the structure
        structure: Target structure
        domains: Optional starting domains; missing variables start from their sort

    Returns:
        The domains and reduced tables at the fixpoint
    """
    check_instance(instance, structure)
    start = {v: structure.elements(s) for v, s in instance.variables.items()}
    if domains is not None:
        for v, values in domains.items():
            chosen = set(values)
            start[v] = tuple(a for a in start[v] if a in chosen)
    constraints = instance.constraints
    tables = [
        _restrict(_initial_table(instance, structure, c), c.scope, start) for c in constraints
    ]

    watch: dict[str, list[int]] = {}
    for index, constraint in enumerate(constraints):
        for v in set(constraint.scope):
            watch.setdefault(v, []).append(index)
    neighbours: list[list[tuple[int, tuple[int, ...], tuple[int, ...]]]] = []
    for index, constraint in enumerate(constraints):
        linked = []
        others = sorted({j for v in set(constraint.scope) for j in watch[v]} - {index})
        for j in others:
            shared = [v for v in dict.fromkeys(constraint.scope) if v in constraints[j].scope]
            linked.append(
                (
                    j,
                    _first_positions(constraint.scope, shared),
                    _first_positions(constraints[j].scope, shared),
                )
            )
        neighbours.append(linked)

    pending = deque(range(len(constraints)))
    queued = set(pending)
    removed = 0
    while pending:
        index = pending.popleft()
        queued.discard(index)
        for j, mine, theirs in neighbours[index]:
            support = {tuple(t[i] for i in mine) for t in tables[index]}
            kept = {t for t in tables[j] if tuple(t[i] for i in theirs) in support}
            if len(kept) != len(tables[j]):
                removed += len(tables[j]) - len(kept)
                tables[j] = kept
                if j not in queued:
                    pending.append(j)
                    queued.add(j)

    result: dict[str, tuple[Element, ...]] = {}
    for v in instance.variables:
        values = set(start[v])
        for index in watch.get(v, ()):
            position = constraints[index].scope.index(v)
            values &= {t[position] for t in tables[index]}
        result[v] = sort_elements(values)
    unsatisfiable = any(not d for d in result.values()) or any(not t for t in tables)
    logger.debug(
        "Arc consistency removed %d tuples%s", removed, "; unsatisfiable" if unsatisfiable else ""
    )
    return DomainAssignment(result, tuple(sort_tuples(t) for t in tables), unsatisfiable)


def eliminate_singletons(
    instance: CspInstance, structure: MultiSortedStructure, assignment: DomainAssignment
) -> tuple[CspInstance, MultiSortedStructure]:
    """Substitute variables with a one-element domain into the reduced tables.

    The result keeps one relation per surviving constraint, named
    ``<relation>#<index>``, and the exact number of solutions. Variables that
    lost values but occur in no constraint get a unary ``dom[<v>]`` relation.
    """
    if assignment.unsatisfiable:
        empty = make_relation("false", (), ())
        return CspInstance({}, (Constraint((), "false"),)), make_structure(structure.sorts, [empty])
    fixed = assignment.singletons()
    variables = {v: s for v, s in instance.variables.items() if v not in fixed}
    constraints: list[Constraint] = []
    relations: list[Relation] = []
    for index, (constraint, table) in enumerate(zip(instance.constraints, assignment.tables)):
        keep = [i for i, v in enumerate(constraint.scope) if v not in fixed]
        rows = {
            tuple(t[i] for i in keep)
            for t in table
            if all(t[i] == fixed[v] for i, v in enumerate(constraint.scope) if v in fixed)
        }
        if not keep and rows:
            continue
        name = f"{constraint.relation}#{index}"
        scope = tuple(constraint.scope[i] for i in keep)
        relations.append(make_relation(name, (variables[v] for v in scope), rows))
        constraints.append(Constraint(scope, name))
    constrained = {v for c in constraints for v in c.scope}
    for v, sort in variables.items():
        if v not in constrained and len(assignment.domains[v]) != len(structure.elements(sort)):
            name = f"dom[{v}]"
            relations.append(make_relation(name, (sort,), ((a,) for a in assignment.domains[v])))
            constraints.append(Constraint((v,), name))
    logger.debug("Eliminated %d singleton variables", len(fixed))
    return CspInstance(variables, tuple(constraints)), make_structure(structure.sorts, relations)


def solver_based_domains(
    instance: CspInstance,
    structure: MultiSortedStructure,
    solver: DecisionSolver = is_satisfiable,
) -> DomainAssignment:
    """D_v = {a : P ∧ C_a(v) is satisfiable}, one decision call per candidate.

    Raises:
        PreconditionError: If the structure lacks some constant relation
    """
    check_instance(instance, structure)
    if not has_all_constants(structure):
        raise PreconditionError(
            "Solver-based domains need every constant relation", condition="constants"
        )
    if not solver(instance, structure):
        return DomainAssignment(
            {v: () for v in instance.variables},
            tuple(() for _ in instance.constraints),
            True,
        )
    domains: dict[str, tuple[Element, ...]] = {}
    for v, sort in instance.variables.items():
        domains[v] = tuple(
            a
            for a in structure.elements(sort)
            if solver(instance.with_constraints([Constraint((v,), constant_name(a))]), structure)
        )
    tables = tuple(
        sort_tuples(_restrict(_initial_table(instance, structure, c), c.scope, domains))
        for c in instance.constraints
    )
    return DomainAssignment(domains, tables, False)


@dataclass(frozen=True)
class Refinement:
    """Refined structure G of H with the copy maps ξ.

    Elements of G are pairs ``(tag, a)`` where ``tag`` names the refined sort
    and ``a`` = ξ((tag, a)) is the original element.

    Attributes:
        structure: The refined structure G
        origin: Refined sort to the original sort it copies from
        domains: Refined sort to its image ξ(G_i)
        provenance: Refined relation name to the original relation name
        relation_index: (original relation, refined sorts) to refined relation name
    """

    structure: MultiSortedStructure
    origin: dict[str, str]
    domains: dict[str, tuple[Element, ...]]
    provenance: dict[str, str] = field(default_factory=dict)
    relation_index: dict[tuple[str, tuple[str, ...]], str] = field(default_factory=dict)

    @staticmethod
    def xi(element: Element) -> Element:
        return element[1]

    def sort_for(self, sort: str, domain: Iterable[Element]) -> str | None:
        """Refined sort copying exactly ``domain`` out of ``sort``, if any."""
        wanted = sort_elements(domain)
        for tag, image in self.domains.items():
            if self.origin[tag] == sort and image == wanted:
                return tag
        return None

    def lift(self, assignment: Assignment, sort_map: Mapping[str, str]) -> Assignment:
        """ξ^{-1}∘φ for a solution φ of the original instance.

        Raises:
            RefinementError: If φ(v) has no copy in the refined sort of v
        """
        lifted: Assignment = {}
        for v, a in assignment.items():
            tag = sort_map[v]
            if a not in self.domains[tag]:
                raise RefinementError(
                    f"Value {element_label(a)} of {v} is outside refined sort {tag}",
                    condition="lossless",
                )
            lifted[v] = (tag, a)
        return lifted

    def project(self, assignment: Assignment) -> Assignment:
        """ξ∘ψ for a solution ψ of a refined instance."""
        return {v: self.xi(e) for v, e in assignment.items()}


def _relation_name(relation: str, tags: tuple[str, ...]) -> str:
    return f"{relation}[{','.join(tags)}]"


def build_refinement(
    structure: MultiSortedStructure,
    domains: Mapping[str, tuple[str, Iterable[Element]]],
) -> Refinement:
    """Construct the refinement with the given sorts.

    Every original relation R with signature (s_1, ..., s_l) yields one
    refined relation per choice of refined sorts G_1, ..., G_l with
    ξ(G_r) ⊆ H_{s_r} ∩ pr_r R, holding the tuples of R inside those copies.

    Args:
        structure: Original structure H
        domains: Refined sort tag to ``(original sort, subset)``

    Raises:
        RefinementError: If a subset is empty or not contained in its sort
    """
    origin: dict[str, str] = {}
    images: dict[str, tuple[Element, ...]] = {}
    for tag, (sort, subset) in domains.items():
        members = set(structure.elements(sort))
        subset = sort_elements(subset)
        if not subset:
            raise RefinementError(f"Refined sort {tag} is empty", condition="nonempty-domain")
        outside = [a for a in subset if a not in members]
        if outside:
            raise RefinementError(
                f"Domain of {tag} straddles sorts: {[element_label(a) for a in outside]} "
                f"are not in {sort}",
                condition="single-sort",
            )
        origin[tag] = sort
        images[tag] = subset

    relations: list[Relation] = []
    provenance: dict[str, str] = {}
    index: dict[tuple[str, tuple[str, ...]], str] = {}
    for name, relation in structure.relations.items():
        signature = relation.symbol.sort_signature
        columns = [set(relation.project((r,))) for r in range(relation.arity)]
        options = []
        for r, sort in enumerate(signature):
            options.append(
                [
                    tag
                    for tag in images
                    if origin[tag] == sort and all((a,) in columns[r] for a in images[tag])
                ]
            )
        for tags in itertools.product(*options):
            allowed = [set(images[tag]) for tag in tags]
            rows = [
                tuple((tag, a) for tag, a in zip(tags, t))
                for t in relation.tuples
                if all(a in allowed[r] for r, a in enumerate(t))
            ]
            refined = _relation_name(name, tags)
            relations.append(make_relation(refined, tags, rows))
            provenance[refined] = name
            index[(name, tags)] = refined
    refined_structure = make_structure(
        {tag: [(tag, a) for a in images[tag]] for tag in images}, relations
    )
    logger.debug(
        "Refinement has %d sorts and %d relations", len(images), len(relations)
    )
    return Refinement(refined_structure, origin, images, provenance, index)


def refine_instance(
    instance: CspInstance, refinement: Refinement, sort_map: Mapping[str, str]
) -> CspInstance:
    """The instance P^σ' over the refined structure.

    Raises:
        RefinementError: If a variable's refined sort copies the wrong sort, or
            no refined relation exists for a constraint's sorts
    """
    variables: dict[str, str] = {}
    for v, sort in instance.variables.items():
        tag = sort_map.get(v)
        if tag is None or refinement.origin.get(tag) != sort:
            raise RefinementError(
                f"Variable {v} of sort {sort} is mapped to refined sort {tag}",
                condition="sort-map",
            )
        variables[v] = tag
    constraints: list[Constraint] = []
    for constraint in instance.constraints:
        tags = tuple(variables[v] for v in constraint.scope)
        if constraint.relation == EQUALITY and (EQUALITY, tags) not in refinement.relation_index:
            if tags[0] != tags[1]:
                raise RefinementError(
                    f"Equality links refined sorts {tags[0]} and {tags[1]}",
                    condition="domain-inside-projection",
                )
            constraints.append(constraint)
            continue
        name = refinement.relation_index.get((constraint.relation, tags))
        if name is None:
            raise RefinementError(
                f"No refined {constraint.relation} over sorts {tags}",
                condition="domain-inside-projection",
            )
        constraints.append(Constraint(constraint.scope, name))
    return CspInstance(variables, tuple(constraints))


def _domain_tag(sort: str, domain: tuple[Element, ...]) -> str:
    return f"{sort}{{{','.join(element_label(a) for a in domain)}}}"


@dataclass(frozen=True)
class RefinedProblem:
    """A refinement together with the refined instance and the domains it came from."""

    refinement: Refinement
    instance: CspInstance
    sort_map: dict[str, str]
    assignment: DomainAssignment


def minimal_refinement(
    instance: CspInstance, structure: MultiSortedStructure, method: str = "ac"
) -> RefinedProblem:
    """Refine by pipeline domains: the original sorts plus every distinct D_v.

    Args:
        instance: Instance over the structure
        structure: Target structure
        method: ``"ac"`` for arc consistency, ``"solver"`` for decision-oracle queries

    Raises:
        RefinementError: If the instance has no solutions (some domain is empty)
        PreconditionError: If ``"solver"`` is used without constant relations
    """
    if method == "ac":
        assignment = arc_consistency(instance, structure)
    elif method == "solver":
        assignment = solver_based_domains(instance, structure)
    else:
        raise ConfigurationError(f"method must be 'ac' or 'solver', got {method!r}")
    if assignment.unsatisfiable:
        raise RefinementError("Instance has an empty domain", condition="satisfiable")
    domains: dict[str, tuple[str, tuple[Element, ...]]] = {
        sort: (sort, elements) for sort, elements in structure.sorts.items() if elements
    }
    sort_map: dict[str, str] = {}
    for v, sort in instance.variables.items():
        domain = assignment.domains[v]
        if domain == structure.elements(sort):
            sort_map[v] = sort
            continue
        tag = _domain_tag(sort, domain)
        domains.setdefault(tag, (sort, domain))
        sort_map[v] = tag
    refinement = build_refinement(structure, domains)
    refined = refine_instance(instance, refinement, sort_map)
    return RefinedProblem(refinement, refined, sort_map, assignment)


def tp_relation(p: int) -> set[ElementTuple]:
    """T_p² minus the pairs (i, p) for i < p."""
    universe = range(p + 2)
    return {(a, b) for a in universe for b in universe if not (b == p and a < p)}


def tp_structure(p: int) -> MultiSortedStructure:
    """T_p on {0, ..., p+1} with R and every constant relation."""
    require_prime(p)
    elements = list(range(p + 2))
    relations = [make_relation(TP_RELATION, (TP_SORT, TP_SORT), tp_relation(p))]
    relations += [make_relation(constant_name(a), (TP_SORT,), [(a,)]) for a in elements]
    return make_structure({TP_SORT: elements}, relations)


def tp_refinement(p: int) -> Refinement:
    """T*_p: sorts G-1 = T_p, Gi = {i}, G(p+2) = {p, p+1}, G(p+3) = {0..p-1, p+1}."""
    structure = tp_structure(p)
    domains: dict[str, tuple[str, tuple[Element, ...]]] = {
        "G-1": (TP_SORT, tuple(range(p + 2)))
    }
    for i in range(p + 2):
        domains[f"G{i}"] = (TP_SORT, (i,))
    domains[f"G{p + 2}"] = (TP_SORT, (p, p + 1))
    domains[f"G{p + 3}"] = (TP_SORT, tuple(range(p)) + (p + 1,))
    return build_refinement(structure, domains)


def is_tp_structure(structure: MultiSortedStructure, p: int) -> bool:
    """Exact structural recognition of T_p (any relation names)."""
    if len(structure.sorts) != 1 or not has_all_constants(structure):
        return False
    [(sort, elements)] = structure.sorts.items()
    if elements != tuple(range(p + 2)):
        return False
    expected = tp_relation(p)
    constants = {constant_name(a) for a in elements}
    others = [r for n, r in structure.relations.items() if n not in constants]
    return bool(others) and all(
        r.symbol.sort_signature == (sort, sort) and r.tuple_set == expected for r in others
    )


def solve_tp(instance: CspInstance, structure: MultiSortedStructure, p: int) -> int:
    """Number of solutions mod p over T_p in polynomial time.

    Arc consistency first; an empty domain gives 0. Then the values 0..p-1
    are dropped from every non-singleton domain containing them (their
    solutions come in groups of p) and consistency is re-established, until
    every remaining domain is {p, p+1}. The answer is 2^{|V'|} mod p for the
    V' variables left.

    Raises:
        PreconditionError: If the structure is not T_p
    """
    require_prime(p)
    if not is_tp_structure(structure, p):
        raise PreconditionError(f"Structure is not T_{p}", condition="t-p-structure")
    if any(c.relation == EQUALITY for c in instance.constraints):
        instance = eliminate_equality(instance)
    low = set(range(p))
    domains: dict[str, tuple[Element, ...]] | None = None
    rounds = 0
    while True:
        rounds += 1
        state = arc_consistency(instance, structure, domains)
        if state.unsatisfiable:
            logger.debug("Empty domain after %d rounds", rounds)
            return 0
        mixed = [v for v, d in state.domains.items() if len(d) > 1 and low & set(d)]
        if not mixed:
            break
        domains = {
            v: tuple(a for a in d if a not in low) if v in mixed else d
            for v, d in state.domains.items()
        }
    remaining = [v for v, d in state.domains.items() if len(d) > 1]
    logger.debug("T_%d pipeline: %d variables left after %d rounds", p, len(remaining), rounds)
    return pow(2, len(remaining), p)


@dataclass(frozen=True)
class RefineOutcome:
    """Result of refine_and_reduce.

    Attributes:
        residue: Number of solutions mod p
        method: ``"product"`` when every used relation of the reduced refined
            structure is a full product, ``"fallback"`` when the oracle counted,
            ``"empty"`` when the instance has no solutions
        refined: The refined problem, None for ``"empty"``
        reduced: The p-rigid reduct of the refined structure, None for ``"empty"``
        trace: Reduction steps
    """

    residue: int
    method: str
    refined: RefinedProblem | None = None
    reduced: MultiSortedStructure | None = None
    trace: ReductionTrace | None = None


def _is_full_product(structure: MultiSortedStructure, name: str) -> bool:
    relation = structure.relations[name]
    size = 1
    for sort in relation.symbol.sort_signature:
        size *= len(structure.sorts[sort])
    return len(relation) == size


def refine_and_reduce(
    instance: CspInstance,
    structure: MultiSortedStructure,
    p: int,
    method: str = "solver",
) -> RefineOutcome:
    """Refine, reduce the refined structure to its p-rigid reduct, then count.

    When every relation used by the refined instance is the full product of
    its (reduced) sorts, the count is the product of the sort sizes;
    otherwise the brute-force oracle counts over the reduct.
    """
    require_prime(p)
    try:
        refined = minimal_refinement(instance, structure, method)
    except RefinementError as e:
        if e.condition != "satisfiable":
            raise
        return RefineOutcome(0, "empty")
    reduced, trace = p_reduce(refined.refinement.structure, p)
    used = {c.relation for c in refined.instance.constraints if c.relation != EQUALITY}
    if all(_is_full_product(reduced, name) for name in used) and not any(
        c.relation == EQUALITY for c in refined.instance.constraints
    ):
        residue = 1
        for tag in refined.instance.variables.values():
            residue = residue * len(reduced.sorts[tag]) % p
        chosen = "product"
    else:
        residue = count_solutions(refined.instance, reduced, p).reduced
        chosen = "fallback"
    logger.debug(
        "Refine and reduce: %d reduction steps, method %s", len(trace.steps), chosen
    )
    return RefineOutcome(residue, chosen, refined, reduced, trace)
