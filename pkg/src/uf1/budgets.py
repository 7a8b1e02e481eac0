"""Resource budgets guarding the translation pipeline's exponential corners."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, replace


class BudgetExceeded(Exception):
    """A configured budget was exceeded; never conflated with UNSAT."""

    def __init__(self, budget: str, limit: int, needed: int):
        super().__init__(f"budget '{budget}' exceeded: need {needed}, limit {limit}")
        self.budget = budget
        self.limit = limit
        self.needed = needed


@dataclass(frozen=True)
class Budgets:
    formula_nodes: int
    delta_count: int
    torus_points: int
    skeleton_atoms: int
    oracle_structures: int

    def check(self, budget: str, needed: int) -> None:
        limit = getattr(self, budget)
        if needed > limit:
            raise BudgetExceeded(budget, limit, needed)


DESK = Budgets(
    formula_nodes=5_000_000,
    delta_count=4096,
    torus_points=2000,
    skeleton_atoms=2_000_000,
    oracle_structures=1_000_000,
)

CI = Budgets(
    formula_nodes=1_000_000,
    delta_count=1024,
    torus_points=200,
    skeleton_atoms=100_000,
    oracle_structures=65_536,
)

UNBOUNDED = Budgets(
    formula_nodes=sys.maxsize,
    delta_count=sys.maxsize,
    torus_points=sys.maxsize,
    skeleton_atoms=sys.maxsize,
    oracle_structures=sys.maxsize,
)

PROFILES = {"desk": DESK, "ci": CI, "unbounded": UNBOUNDED}


def default_budgets() -> Budgets:
    """Budgets from the UF1_BUDGET_PROFILE env var (desk when unset)."""
    profile = os.environ.get("UF1_BUDGET_PROFILE", "desk")
    if profile not in PROFILES:
        raise ValueError(f"unknown budget profile {profile!r}; choose from {sorted(PROFILES)}")
    return PROFILES[profile]


def with_overrides(base: Budgets, **overrides: int) -> Budgets:
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})
