"""Evaluation of pp- and p-modular-pp formulas and instance rewriting with them."""

import logging
import random
from collections import Counter
from collections.abc import Iterator

from modcsp.const import DEFAULT_SEED, EQUALITY, MAX_BOUND_VARIABLES, guard_limit
from modcsp.exceptions import FormulaError, GuardExceededError, InstanceError, PreconditionError
from modcsp.expansion import conjunctive_expand, eliminate_equality
from modcsp.models import (
    EXISTS,
    MODULAR,
    Atom,
    Constraint,
    CspInstance,
    MppFormula,
    MultiSortedStructure,
    QuantifierBlock,
    Relation,
    RelationSymbol,
)
from modcsp.oracle import enumerate_solutions, require_prime

logger = logging.getLogger(__name__)

DEFINED_RELATION = "R_def"


def formula_sorts(structure: MultiSortedStructure, formula: MppFormula) -> dict[str, str]:
    """Sorts of all variables: declared for free ones, inferred from atoms for bound ones.

    Raises:
        FormulaError: If an atom does not sort-check or a bound variable has no sort
    """
    sorts = dict(formula.free)
    for sort in sorts.values():
        if sort not in structure.sorts:
            raise FormulaError(f"Unknown sort: {sort}")
    pending_equalities: list[Atom] = []
    for atom in formula.atoms:
        if atom.relation == EQUALITY and EQUALITY not in structure.relations:
            if len(atom.args) != 2:
                raise FormulaError(f"Equality takes two arguments, got {atom.args}")
            pending_equalities.append(atom)
            continue
        if atom.relation not in structure.relations:
            raise FormulaError(f"Unknown relation in formula: {atom.relation}")
        signature = structure.relations[atom.relation].symbol.sort_signature
        if len(signature) != len(atom.args):
            raise FormulaError(
                f"Atom {atom.relation} has {len(atom.args)} arguments, expected {len(signature)}"
            )
        for variable, sort in zip(atom.args, signature):
            if sorts.setdefault(variable, sort) != sort:
                raise FormulaError(
                    f"Variable {variable} used with sorts {sorts[variable]} and {sort}"
                )
    # equalities may chain, so propagate until stable
    changed = True
    while changed:
        changed = False
        for atom in pending_equalities:
            u, v = atom.args
            if u in sorts and v not in sorts:
                sorts[v] = sorts[u]
                changed = True
            elif v in sorts and u not in sorts:
                sorts[u] = sorts[v]
                changed = True
    for atom in pending_equalities:
        u, v = atom.args
        if u in sorts and v in sorts and sorts[u] != sorts[v]:
            raise FormulaError(f"Equality between sorts {sorts[u]} and {sorts[v]}")
    for variable in formula.bound:
        if variable not in sorts:
            raise FormulaError(f"Cannot infer the sort of bound variable {variable}")
    return {v: sorts[v] for v in (*formula.free, *formula.bound)}


def body_instance(structure: MultiSortedStructure, formula: MppFormula) -> CspInstance:
    """The conjunction body as an instance over free then bound variables."""
    sorts = formula_sorts(structure, formula)
    return CspInstance(
        sorts, tuple(Constraint(atom.args, atom.relation) for atom in formula.atoms)
    )


def _keep(count: int, block: QuantifierBlock) -> bool:
    if block.is_modular:
        return count % block.modulus != 0
    return count > 0


def _outer_counts(
    structure: MultiSortedStructure, formula: MppFormula
) -> Counter:
    """Completion counts of the assignments to the variables outside the outermost block.

    Inner blocks are eliminated first; the returned counter maps each tuple
    over the free variables to the number of surviving completions of the
    outermost block (or 1 for quantifier-free formulas).
    """
    bound = formula.bound
    limit = guard_limit(MAX_BOUND_VARIABLES)
    if limit is not None and len(bound) > limit:
        raise GuardExceededError(
            f"Formula has {len(bound)} bound variables, guard is {limit}",
            limit=limit,
            size=len(bound),
        )
    for block in formula.blocks:
        if block.is_modular:
            require_prime(block.modulus)
    instance = body_instance(structure, formula)
    order = (*formula.free, *bound)
    # surviving tuples over free + variables of blocks[0..depth-1]
    survivors: Counter = Counter(
        tuple(solution[v] for v in order)
        for solution in enumerate_solutions(instance, structure)
    )
    width = len(order)
    for depth in range(len(formula.blocks) - 1, -1, -1):
        block = formula.blocks[depth]
        width -= len(block.variables)
        counts: Counter = Counter()
        for values in survivors:
            counts[values[:width]] += 1
        if depth == 0:
            return counts
        survivors = Counter({key: 1 for key, n in counts.items() if _keep(n, block)})
        logger.debug("Block %d leaves %d assignments", depth, len(survivors))
    return survivors


def evaluate_formula(
    structure: MultiSortedStructure, formula: MppFormula, name: str = DEFINED_RELATION
) -> Relation:
    """Relation on the free variables defined by the formula in the structure.

    Blocks are eliminated innermost first: a modular block keeps an assignment
    whose number of completions is nonzero modulo p, an existential block one
    with at least one completion.

    Args:
        structure: Structure the formula is interpreted in
        formula: Prefix formula
        name: Symbol name of the resulting relation

    Returns:
        The defined relation; its signature lists the sorts of the free variables

    Raises:
        FormulaError: If the formula does not sort-check
        GuardExceededError: If the formula has too many bound variables
    """
    counts = _outer_counts(structure, formula)
    if formula.blocks:
        outermost = formula.blocks[0]
        tuples = [t for t, n in counts.items() if _keep(n, outermost)]
    else:
        tuples = list(counts)
    return Relation(RelationSymbol(name, tuple(formula.free.values())), tuple(tuples))


def is_strict(structure: MultiSortedStructure, formula: MppFormula) -> bool:
    """Whether every defined tuple has completion count ≡ 1 mod p.

    Raises:
        FormulaError: If the outermost block is not modular
    """
    if not formula.blocks:
        return True
    outermost = formula.blocks[0]
    if not outermost.is_modular:
        raise FormulaError("Strictness needs a modular outermost block")
    counts = _outer_counts(structure, formula)
    return all(
        n % outermost.modulus == 1 for n in counts.values() if _keep(n, outermost)
    )


def _fresh(base: str, taken: set[str]) -> str:
    name, suffix = base, 0
    while name in taken:
        suffix += 1
        name = f"{base}#{suffix}"
    taken.add(name)
    return name


def mpp_expand_instance(
    instance: CspInstance,
    structure: MultiSortedStructure,
    relation_name: str,
    definition: MppFormula,
) -> CspInstance:
    """Replace every ``relation_name`` constraint by the body of a strict definition.

    Each occurrence gets its own fresh copies of the bound variables. The
    solution count of the result is congruent to the original modulo p.

    Args:
        instance: Instance over H expanded by the defined relation
        structure: H itself
        relation_name: Name of the defined relation in the instance
        definition: Strict definition with no blocks or exactly one modular block

    Raises:
        FormulaError: If the definition has several blocks, an existential
            block, or free variables not matching the constraint arity
        PreconditionError: If the definition is not strict
    """
    if not definition.blocks:
        return conjunctive_expand(instance, relation_name, definition)
    if len(definition.blocks) > 1:
        raise FormulaError("Only definitions with a single modular block can be expanded")
    if not definition.blocks[0].is_modular:
        raise FormulaError("Expansion needs a modular block")
    if not is_strict(structure, definition):
        raise PreconditionError(
            f"Definition of {relation_name} is not strict", condition="strict-definition"
        )
    sorts = formula_sorts(structure, definition)
    free = tuple(definition.free)
    taken = set(instance.variables)
    variables = dict(instance.variables)
    constraints: list[Constraint] = []
    for constraint in instance.constraints:
        if constraint.relation != relation_name:
            constraints.append(constraint)
            continue
        if len(constraint.scope) != len(free):
            raise FormulaError(
                f"Definition of {relation_name} has {len(free)} free variables, "
                f"constraint has {len(constraint.scope)}"
            )
        substitution = dict(zip(free, constraint.scope))
        for variable in definition.bound:
            fresh = _fresh(variable, taken)
            substitution[variable] = fresh
            variables[fresh] = sorts[variable]
        for atom in definition.atoms:
            constraints.append(
                Constraint(tuple(substitution[v] for v in atom.args), atom.relation)
            )
    try:
        expanded = CspInstance(variables, tuple(constraints))
    except InstanceError as e:
        raise FormulaError(f"Expansion produced an ill-typed instance: {e}") from e
    if any(c.relation == EQUALITY for c in constraints) and EQUALITY not in structure.relations:
        expanded = eliminate_equality(expanded)
    return expanded


def par_formula(relation: Relation, p: int = 2) -> MppFormula:
    """PAR-R(x, y) = R(x, y) ∧ ∃^{≡p} z R(x, z).

    Keeps the tuples of R whose prefix has a number of extensions nonzero mod p.
    """
    if relation.arity < 1:
        raise FormulaError("PAR needs a relation of positive arity")
    signature = relation.symbol.sort_signature
    prefix = [f"x{i}" for i in range(relation.arity - 1)]
    free = {v: s for v, s in zip(prefix, signature)}
    free["y"] = signature[-1]
    return MppFormula(
        free,
        (QuantifierBlock(("z",), MODULAR, p),),
        (Atom(relation.name, (*prefix, "y")), Atom(relation.name, (*prefix, "z"))),
    )


def tilde_formula(relation: Relation, p: int = 2) -> MppFormula:
    """tilde-R(x) = ∃^{≡p} y PAR-R(x, y): prefixes with an odd number of extensions."""
    par = par_formula(relation, p)
    free = {v: s for v, s in par.free.items() if v != "y"}
    return MppFormula(
        free,
        (QuantifierBlock(("y",), MODULAR, p), *par.blocks),
        par.atoms,
    )


def generate_formulas(
    structure: MultiSortedStructure,
    p: int,
    count: int = 20,
    max_atoms: int = 3,
    max_free: int = 2,
    max_bound: int = 2,
    seed: int = DEFAULT_SEED,
    split: bool = False,
) -> Iterator[MppFormula]:
    """Random p-mpp formulas over the relations of a structure.

    Bound variables go into one trailing modular block, or into one block per
    variable when ``split`` is set. Generation is deterministic for a seed.
    """
    require_prime(p)
    relations = [r for r in structure.relations.values() if r.arity > 0]
    if not relations:
        return
    rng = random.Random(seed)
    for _ in range(count):
        by_sort: dict[str, list[str]] = {}
        sorts: dict[str, str] = {}
        atoms: list[Atom] = []
        budget = max_free + max_bound
        for _ in range(rng.randint(1, max_atoms)):
            relation = rng.choice(relations)
            args = []
            for sort in relation.symbol.sort_signature:
                pool = by_sort.setdefault(sort, [])
                if pool and (len(sorts) >= budget or rng.random() < 0.5):
                    args.append(rng.choice(pool))
                else:
                    variable = f"v{len(sorts)}"
                    pool.append(variable)
                    sorts[variable] = sort
                    args.append(variable)
            atoms.append(Atom(relation.name, tuple(args)))
        names = list(sorts)
        rng.shuffle(names)
        high = min(max_bound, len(names))
        low = min(max(0, len(names) - max_free), high)
        n_bound = rng.randint(low, high)
        bound = sorted(names[:n_bound])
        free = {v: sorts[v] for v in sorted(names[n_bound:])}
        if not bound:
            blocks: tuple[QuantifierBlock, ...] = ()
        elif split:
            blocks = tuple(QuantifierBlock((v,), MODULAR, p) for v in bound)
        else:
            blocks = (QuantifierBlock(tuple(bound), MODULAR, p),)
        yield MppFormula(free, blocks, tuple(atoms))


def projection_formula(
    relation: Relation, keep: int, p: int | None = None
) -> MppFormula:
    """∃^{≡p} (or ∃ when p is None) over the coordinates after the first ``keep``."""
    signature = relation.symbol.sort_signature
    names = [f"x{i}" for i in range(relation.arity)]
    free = {v: s for v, s in zip(names[:keep], signature[:keep])}
    bound = tuple(names[keep:])
    if not bound:
        blocks: tuple[QuantifierBlock, ...] = ()
    elif p is None:
        blocks = (QuantifierBlock(bound, EXISTS),)
    else:
        blocks = (QuantifierBlock(bound, MODULAR, p),)
    return MppFormula(free, blocks, (Atom(relation.name, tuple(names)),))
