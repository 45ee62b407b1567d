"""Counting constraint satisfaction problems modulo a prime."""

from modcsp.models import (
    Atom,
    Constraint,
    CspInstance,
    DistinguishedStructure,
    HomCount,
    MppFormula,
    MultiSortedStructure,
    Operation,
    QuantifierBlock,
    Relation,
    RelationSymbol,
)
from modcsp.core import make_relation, make_structure, with_constants
from modcsp.oracle import count_hom, count_solutions
from modcsp.automorphism import Automorphism, is_p_rigid, p_reduce
from modcsp.expansion import count_with_constants, find_maltsev, is_maltsev
from modcsp.mpp import evaluate_formula
from modcsp.parity import ParityContext, parity_count
from modcsp.refine import refine_and_reduce, solve_tp
from modcsp.binarize import binarize, binarize_instance, debinarize_instance
from modcsp.parser import load_formula, load_instance, load_structure
from modcsp.exceptions import (
    ConfigurationError,
    FormulaError,
    FrameError,
    GuardExceededError,
    InstanceError,
    ModCspError,
    NotPRigidError,
    OracleMismatchError,
    ParseError,
    PreconditionError,
    RefinementError,
    StructureError,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Automorphism",
    "Constraint",
    "CspInstance",
    "DistinguishedStructure",
    "HomCount",
    "MppFormula",
    "MultiSortedStructure",
    "Operation",
    "ParityContext",
    "QuantifierBlock",
    "Relation",
    "RelationSymbol",
    "binarize",
    "binarize_instance",
    "count_hom",
    "count_solutions",
    "count_with_constants",
    "debinarize_instance",
    "evaluate_formula",
    "find_maltsev",
    "is_maltsev",
    "is_p_rigid",
    "load_formula",
    "load_instance",
    "load_structure",
    "make_relation",
    "make_structure",
    "p_reduce",
    "parity_count",
    "refine_and_reduce",
    "solve_tp",
    "with_constants",
    "ConfigurationError",
    "FormulaError",
    "FrameError",
    "GuardExceededError",
    "InstanceError",
    "ModCspError",
    "NotPRigidError",
    "OracleMismatchError",
    "ParseError",
    "PreconditionError",
    "RefinementError",
    "StructureError",
]
