"""Syntactic membership checkers for UF1, GF1, and SUF2 with blame reporting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .formulas import (
    And,
    Atom,
    Bottom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Top,
    free_variables,
    print_formula,
)


@dataclass(frozen=True)
class Blame:
    subformula: Formula
    rule: str
    detail: str

    def __str__(self):
        return f"{self.rule}: {self.detail} in {print_formula(self.subformula)}"


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    blame: Optional[Blame] = None

    def __post_init__(self):
        assert (self.blame is None) == self.member

    def __bool__(self):
        return self.member


def atom_arity_class(atom: Atom) -> int:
    """Number of distinct variables among the arguments (the atom's m-arity)."""
    return len(set(atom.args))


def is_uniform_set(atoms: Iterable[Atom], variables: Iterable[str]) -> bool:
    """Whether every atom's variable set is exactly the given set.

    The empty set counts as uniform only for the empty variable set.
    """
    atoms = list(atoms)
    wanted = set(variables)
    if not atoms:
        return not wanted
    return all(set(a.args) == wanted for a in atoms)


_BOOLEAN = (Not, And, Or, Implies)


def boolean_leaves(f: Formula) -> list[Formula]:
    """Leaves of the Boolean skeleton: atoms, constants, quantified formulas."""
    out: list[Formula] = []
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, (And, Or, Implies)):
            stack.append(node.right)
            stack.append(node.left)
        else:
            out.append(node)
    return out


def collect_chain(f: Formula) -> tuple[list[str], Formula]:
    """Maximal same-kind quantifier chain; duplicate binders deduplicated."""
    kind = type(f)
    variables: list[str] = []
    node = f
    while isinstance(node, kind):
        if node.var not in variables:
            variables.append(node.var)
        node = node.body
    return variables, node


def _atom_list(atoms: list[Atom]) -> str:
    return "{" + ", ".join(print_formula(a) for a in atoms) + "}"


def _uniformity_blame(block: Formula, atoms: list[Atom], rule: str) -> Optional[Blame]:
    sets = {frozenset(a.args) for a in atoms}
    if len(sets) > 1:
        return Blame(block, rule, f"non-uniform atom set {_atom_list(atoms)}")
    return None


def _check(f: Formula, mode: str) -> Optional[Blame]:
    """Shared recursion for uf1 / gf1; returns blame or None."""
    if isinstance(f, (Top, Bottom)):
        return None
    if isinstance(f, Atom):
        if atom_arity_class(f) == 1:
            return None
        return Blame(f, "rule-i", f"{atom_arity_class(f)}-ary atom is not a formula on its own")
    if isinstance(f, _BOOLEAN):
        for part in ([f.sub] if isinstance(f, Not) else [f.left, f.right]):
            blame = _check(part, mode)
            if blame is not None:
                return blame
        return None
    if isinstance(f, (Exists, Forall)):
        _, matrix = collect_chain(f)
        free_after = free_variables(f)
        if len(free_after) > 1:
            return Blame(f, "one-dimensionality",
                         f"quantifier block leaves {len(free_after)} variables free")
        wide_atoms: list[Atom] = []
        for leaf in boolean_leaves(matrix):
            if isinstance(leaf, Atom) and atom_arity_class(leaf) >= 2:
                wide_atoms.append(leaf)
            else:
                blame = _check(leaf, mode)
                if blame is not None:
                    return blame
        if mode == "uf1":
            return _uniformity_blame(f, wide_atoms, "rule-iii-uniformity")
        return None
    return Blame(f, "unknown-node", "unsupported formula construct")


def check_uf1(f: Formula) -> MembershipReport:
    """Membership in the uniform one-dimensional fragment."""
    blame = _check(f, "uf1")
    return MembershipReport(blame is None, blame)


def check_gf1(f: Formula) -> MembershipReport:
    """Membership in the non-uniform (general) one-dimensional fragment."""
    blame = _check(f, "gf1")
    return MembershipReport(blame is None, blame)


def _check_suf2(f: Formula) -> Optional[Blame]:
    if isinstance(f, (Top, Bottom)):
        return None
    if isinstance(f, Atom):
        if atom_arity_class(f) <= 2:
            return None
        return Blame(f, "rule-i", f"{atom_arity_class(f)}-ary atom is not a formula on its own")
    if isinstance(f, _BOOLEAN):
        for part in ([f.sub] if isinstance(f, Not) else [f.left, f.right]):
            blame = _check_suf2(part)
            if blame is not None:
                return blame
        return None
    if isinstance(f, (Exists, Forall)):
        variables, matrix = collect_chain(f)
        free_after = free_variables(f)
        if len(free_after) > 2:
            return Blame(f, "two-dimensionality",
                         f"quantifier block leaves {len(free_after)} variables free")
        block_vars = set(variables) | set(free_after)
        if len(block_vars) <= 2:
            # rule (iii): free Boolean combinations over two variables
            for leaf in boolean_leaves(matrix):
                blame = _check_suf2(leaf)
                if blame is not None:
                    return blame
            return None
        # rule (iv): three or more variables need uniformity and
        # one-free-variable side formulas
        wide_atoms: list[Atom] = []
        for leaf in boolean_leaves(matrix):
            if isinstance(leaf, Atom) and atom_arity_class(leaf) >= 2:
                wide_atoms.append(leaf)
            else:
                blame = _check_suf2(leaf)
                if blame is not None:
                    return blame
                if len(free_variables(leaf)) > 1:
                    return Blame(f, "rule-iv-side-formula",
                                 "side formula of a wide block has more than one free variable")
        return _uniformity_blame(f, wide_atoms, "rule-iv-uniformity")
    return Blame(f, "unknown-node", "unsupported formula construct")


def check_suf2(f: Formula) -> MembershipReport:
    """Membership in the strongly uniform two-dimensional fragment."""
    blame = _check_suf2(f)
    return MembershipReport(blame is None, blame)
