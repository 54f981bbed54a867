"""Closed-form solutions of Poisson-type boundary-value problems found by
grammatical evolution: integer chromosomes decode to expressions through a
BNF grammar, candidates are scored by collocation residuals plus Dirichlet
penalties, and a genetic algorithm evolves the population."""

from .expr import (
    Binary,
    Constant,
    EvalOutcome,
    Expression,
    ExpressionError,
    FuncKind,
    ParseError,
    UnboundVariableError,
    Unary,
    Variable,
    differentiate,
    evaluate,
    parse,
    serialize,
)
from .grammar import Grammar, GrammarError, MappingResult, default_grammar, map_genotype, parse_bnf
from .pde import (
    FitnessReport,
    Problem,
    boundary_penalty,
    compare_to_exact,
    fitness,
    load_problem,
    make_grid,
    residual_error,
    save_problem,
)
from .evolve import GaConfig, Individual, RunResult, run
from .suite import PROBLEM_NAMES, get_problem

__version__ = "0.1.0"
