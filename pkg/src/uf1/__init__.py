"""Decision procedure for the uniform one-dimensional fragment of first-order logic.

The pipeline turns a UF1 formula into its diagram normal form (DUF1), then
into a modal normal form (MUF1), and finally into an equisatisfiable monadic
first-order formula whose satisfiability is decided outright. Both directions
of the correctness argument are executable: a model of the input yields a
torus-indexed monadic model, and a monadic model is folded back into a
relational model of the input.
"""

from .budgets import Budgets, BudgetExceeded, default_budgets
from .formulas import Formula, RelationSymbol, Vocabulary
from .parser import ParseError, parse
from .structures import Structure, model_check, oracle_sat

__all__ = [
    "Budgets",
    "BudgetExceeded",
    "Formula",
    "ParseError",
    "RelationSymbol",
    "Structure",
    "Vocabulary",
    "default_budgets",
    "model_check",
    "oracle_sat",
    "parse",
]
