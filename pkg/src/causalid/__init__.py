"""Causal identifiability engine.

Decides conditional-independence and identifiability questions on causal
graphs, derives do-free estimation formulas through adjustment criteria
and do-calculus rewriting, and verifies every derivation against an
exact discrete structural-causal-model oracle.
"""

from .graph import (CausalGraph, GraphError, Path, PartiallyDirectedGraph,
                    ScaleError, Variable)
from .dsep import (Statement, d_separated, d_separated_exhaustive,
                   implied_independencies, observationally_equivalent,
                   path_blocked, pattern)
from .scm import (Dataset, DiscreteModel, JointDistribution, Mechanism,
                  ModelError, PositivityError, StructuralEquationSpec,
                  compile_mechanism, dependence_gap, fit, graft_coin,
                  independent, random_model)
from .expr import (DerivationStep, Expr, ExprError, GuardFact, P, ProbTerm,
                   Product, Quotient, Sum, alpha_equal, canonicalize,
                   evaluate, is_do_free, parse, render)
from .identify import (IDENTIFIED, KNOWN_NON_IDENTIFIABLE,
                       NOT_WITHIN_BUDGET, IdentificationResult, Query,
                       backdoor_admissible, backdoor_formula,
                       find_backdoor_sets, frontdoor_admissible,
                       frontdoor_formula, identify, rule1_applicable,
                       rule2_applicable, rule3_applicable)
from .catalog import CorpusEntry, catalog, get_entry, run_entry, unavailable
from .dsl import (ParseError, graph_to_dsl, graph_to_json, model_to_dsl,
                  parse_graph, parse_model)

__version__ = "0.1.0"

__all__ = [
    "CausalGraph", "GraphError", "Path", "PartiallyDirectedGraph",
    "ScaleError", "Variable",
    "Statement", "d_separated", "d_separated_exhaustive",
    "implied_independencies", "observationally_equivalent", "path_blocked",
    "pattern",
    "Dataset", "DiscreteModel", "JointDistribution", "Mechanism",
    "ModelError", "PositivityError", "StructuralEquationSpec",
    "compile_mechanism", "dependence_gap", "fit", "graft_coin",
    "independent", "random_model",
    "DerivationStep", "Expr", "ExprError", "GuardFact", "P", "ProbTerm",
    "Product", "Quotient", "Sum", "alpha_equal", "canonicalize", "evaluate",
    "is_do_free", "parse", "render",
    "IDENTIFIED", "KNOWN_NON_IDENTIFIABLE", "NOT_WITHIN_BUDGET",
    "IdentificationResult", "Query", "backdoor_admissible",
    "backdoor_formula", "find_backdoor_sets", "frontdoor_admissible",
    "frontdoor_formula", "identify", "rule1_applicable", "rule2_applicable",
    "rule3_applicable",
    "CorpusEntry", "catalog", "get_entry", "run_entry", "unavailable",
    "ParseError", "graph_to_dsl", "graph_to_json", "model_to_dsl",
    "parse_graph", "parse_model",
]
