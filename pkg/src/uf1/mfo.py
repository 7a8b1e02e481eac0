"""Complete satisfiability decision for equality-free monadic first-order logic.

The decision works in two phases. Quantifier elimination rewrites the input
into a propositional skeleton over witness atoms E_S, where S is a signed
cube of unary predicates and E_S reads "some element realizes S". A DPLL
search then looks for a skeleton assignment that is realizable: every true
witness atom extends to a full 1-type avoiding all false cubes. Realizable
assignments and structures induce each other exactly, so UNSAT is sound and
every SAT answer is replayed through the Tarski checker before returning.
"""

from __future__ import annotations

import gc
import itertools
from dataclasses import dataclass, field
from typing import Optional

from .budgets import Budgets, default_budgets
from .formulas import (
    And,
    Atom,
    BOTTOM,
    Bottom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    TOP,
    Top,
    free_variables,
    vocabulary_of,
)
from .normalizer import normalize_universals
from .structures import SemanticsError, Structure, make_checker, model_check


@dataclass(frozen=True)
class LiteralCube:
    """Signed set of unary predicates; a partial 1-type constraint."""

    pos: frozenset[str]
    neg: frozenset[str]

    def __post_init__(self):
        if self.pos & self.neg:
            raise ValueError("a predicate cannot be both positive and negative")

    def describe(self) -> str:
        parts = sorted(self.pos) + ["!" + p for p in sorted(self.neg)]
        return "{" + ",".join(parts) + "}"


# -- propositional skeleton ----------------------------------------------------

class PropFormula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class PTrue(PropFormula):
    pass


@dataclass(frozen=True, slots=True)
class PFalse(PropFormula):
    pass


@dataclass(frozen=True, slots=True)
class PVar(PropFormula):
    index: int


@dataclass(frozen=True, slots=True)
class PNot(PropFormula):
    sub: PropFormula


@dataclass(frozen=True, slots=True)
class PAnd(PropFormula):
    parts: tuple[PropFormula, ...]


@dataclass(frozen=True, slots=True)
class POr(PropFormula):
    parts: tuple[PropFormula, ...]


P_TRUE = PTrue()
P_FALSE = PFalse()


def p_and(parts: list[PropFormula]) -> PropFormula:
    flat = [p for p in parts if not isinstance(p, PTrue)]
    if any(isinstance(p, PFalse) for p in flat):
        return P_FALSE
    if not flat:
        return P_TRUE
    if len(flat) == 1:
        return flat[0]
    return PAnd(tuple(flat))


def p_or(parts: list[PropFormula]) -> PropFormula:
    flat = [p for p in parts if not isinstance(p, PFalse)]
    if any(isinstance(p, PTrue) for p in flat):
        return P_TRUE
    if not flat:
        return P_FALSE
    if len(flat) == 1:
        return flat[0]
    return POr(tuple(flat))


def p_not(p: PropFormula) -> PropFormula:
    if isinstance(p, PTrue):
        return P_FALSE
    if isinstance(p, PFalse):
        return P_TRUE
    if isinstance(p, PNot):
        return p.sub
    return PNot(p)


@dataclass
class Skeleton:
    """Propositional formula over witness atoms, plus the atom table."""

    prop: PropFormula
    atoms: list[LiteralCube]
    predicates: list[str]
    groups: list[frozenset[str]]

    def atom_index(self, pos=(), neg=()) -> Optional[int]:
        cube = LiteralCube(frozenset(pos), frozenset(neg))
        try:
            return self.atoms.index(cube)
        except ValueError:
            return None

    def describe(self) -> str:
        return _describe_prop(self.prop, self.atoms)


def _describe_prop(p: PropFormula, atoms: list[LiteralCube]) -> str:
    if isinstance(p, PTrue):
        return "true"
    if isinstance(p, PFalse):
        return "false"
    if isinstance(p, PVar):
        return "E" + atoms[p.index].describe()
    if isinstance(p, PNot):
        return "!" + _describe_prop(p.sub, atoms)
    if isinstance(p, PAnd):
        return "(" + " & ".join(_describe_prop(q, atoms) for q in p.parts) + ")"
    if isinstance(p, POr):
        return "(" + " | ".join(_describe_prop(q, atoms) for q in p.parts) + ")"
    raise ValueError(p)


@dataclass(frozen=True, slots=True)
class _PropLeaf(Formula):
    """Quantifier-free residue embedded back into a Formula during elimination."""

    prop: PropFormula


# -- exclusive-group detection ---------------------------------------------------

_GROUP_MIN = 6
_SPLIT_MIN = 8


def _exclusion_pairs(f: Formula) -> set[tuple[str, str]]:
    """Pairs (p, q) with a global conjunct stating no element has both."""
    pairs: set[tuple[str, str]] = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, And):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Exists):
            stack.append(node.body)
        elif isinstance(node, Forall) and isinstance(node.body, Not):
            stack.append(Not(Exists(node.var, node.body.sub)))
        elif isinstance(node, Not) and isinstance(node.sub, Exists):
            body = node.sub.body
            v = node.sub.var
            if isinstance(body, And) and isinstance(body.left, Atom) and isinstance(body.right, Atom):
                a, b = body.left, body.right
                if (a.args == (v,) and b.args == (v,) and a.symbol.arity == 1
                        and b.symbol.arity == 1 and a.symbol != b.symbol):
                    pairs.add(tuple(sorted((a.symbol.name, b.symbol.name))))
    return pairs


def _greedy_groups(pairs: set[tuple[str, str]]) -> list[frozenset[str]]:
    adjacency: dict[str, set[str]] = {}
    for a, b in pairs:
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    used: set[str] = set()
    groups = []
    for p in sorted(adjacency, key=lambda q: (-len(adjacency[q]), q)):
        if p in used:
            continue
        clique = {p}
        common = set(adjacency[p]) - used
        for q in sorted(common, key=lambda q: (-len(adjacency[q]), q)):
            if clique <= adjacency[q]:
                clique.add(q)
        if len(clique) >= _GROUP_MIN:
            groups.append(frozenset(clique))
            used |= clique
    return groups


# -- quantifier elimination ------------------------------------------------------

class _Skeletonizer:
    def __init__(self, budgets: Budgets, groups: list[frozenset[str]]):
        self.budgets = budgets
        self.groups = groups
        self.group_members: frozenset[str] = frozenset().union(*groups) if groups else frozenset()
        self.group_of: dict[str, int] = {}
        for i, g in enumerate(groups):
            for p in g:
                self.group_of[p] = i
        self.atom_table: dict[LiteralCube, int] = {}
        self.atoms: list[LiteralCube] = []
        self.fv_cache: dict[int, tuple[Formula, frozenset[str]]] = {}
        self.preds_cache: dict[int, tuple[Formula, frozenset]] = {}
        self.qe_cache: dict[int, tuple[Formula, Formula]] = {}

    def free(self, f: Formula) -> frozenset[str]:
        hit = self.fv_cache.get(id(f))
        if hit is not None and hit[0] is f:
            return hit[1]
        if isinstance(f, _PropLeaf):
            out = frozenset()
        elif isinstance(f, Atom):
            out = frozenset(f.args)
        elif isinstance(f, (Top, Bottom)):
            out = frozenset()
        elif isinstance(f, Not):
            out = self.free(f.sub)
        elif isinstance(f, (And, Or, Implies)):
            out = self.free(f.left) | self.free(f.right)
        else:
            out = self.free(f.body) - {f.var}
        self.fv_cache[id(f)] = (f, out)
        return out

    def atom(self, pos: frozenset[str], neg: frozenset[str]) -> PropFormula:
        if not pos and not neg:
            return P_TRUE  # E over the empty cube: nonempty domains
        cube = LiteralCube(pos, neg)
        index = self.atom_table.get(cube)
        if index is None:
            index = len(self.atoms)
            self.budgets.check("skeleton_atoms", index + 1)
            self.atom_table[cube] = index
            self.atoms.append(cube)
        return PVar(index)

    # quantifier elimination, innermost first; memoized across shared subterms
    def qe(self, f: Formula) -> Formula:
        hit = self.qe_cache.get(id(f))
        if hit is not None and hit[0] is f:
            return hit[1]
        if isinstance(f, (Atom, Top, Bottom, _PropLeaf)):
            out = f
        elif isinstance(f, Not):
            out = _not_f(self.qe(f.sub))
        elif isinstance(f, (And, Or, Implies)):
            left, right = self.qe(f.left), self.qe(f.right)
            out = f if (left is f.left and right is f.right) else type(f)(left, right)
        elif isinstance(f, Exists):
            out = self.eliminate(f.var, self.qe(f.body))
        elif isinstance(f, Forall):
            out = _not_f(self.eliminate(f.var, self.qe(_not_f(f.body))))
        else:
            raise SemanticsError(f"cannot eliminate quantifiers in {f!r}")
        self.qe_cache[id(f)] = (f, out)
        return out

    def eliminate(self, v: str, matrix: Formula) -> Formula:
        return self._elim(v, frozenset(), frozenset(), matrix)

    def _top_normalize(self, c: Formula) -> Formula:
        """Push one layer of negation / implication to expose And/Or structure."""
        while True:
            if isinstance(c, Not):
                s = c.sub
                if isinstance(s, Not):
                    c = s.sub
                elif isinstance(s, And):
                    return Or(_not_f(s.left), _not_f(s.right))
                elif isinstance(s, Or):
                    c = And(_not_f(s.left), _not_f(s.right))
                elif isinstance(s, Implies):
                    c = And(s.left, _not_f(s.right))
                elif isinstance(s, Top):
                    return BOTTOM
                elif isinstance(s, Bottom):
                    return TOP
                else:
                    return c
            elif isinstance(c, Implies):
                return Or(_not_f(c.left), c.right)
            else:
                return c

    def _conjuncts(self, matrix: Formula) -> Optional[list[Formula]]:
        """Flatten conjunction, exposing And layers under negations; None on bottom."""
        out: list[Formula] = []
        stack = [matrix]
        while stack:
            node = self._top_normalize(stack.pop())
            if isinstance(node, And):
                stack.append(node.right)
                stack.append(node.left)
            elif isinstance(node, Bottom):
                return None
            elif not isinstance(node, Top):
                out.append(node)
        out.reverse()
        return out

    _WIDE_OR = 16

    def _elim(self, v: str, fixed_pos: frozenset[str], fixed_neg: frozenset[str],
              matrix: Formula) -> Formula:
        matrix = self._group_context(v, fixed_pos, matrix)
        fixed_pos, fixed_neg, conjuncts = self._propagate_units(v, fixed_pos, fixed_neg, matrix)
        if conjuncts is None:
            return BOTTOM
        keep: list[Formula] = []
        outside: list[Formula] = []
        for c in conjuncts:
            (keep if v in self.free(c) else outside).append(c)
        if not keep:
            inner: Formula = _PropLeaf(self.atom(fixed_pos, fixed_neg))
            return _and_all(outside + [inner])
        # distribute the quantifier over a wide disjunctive conjunct
        widest: Optional[tuple[Formula, list[Formula]]] = None
        for c in keep:
            if isinstance(c, Or):
                ds = _flat_or(c)
                if widest is None or len(ds) > len(widest[1]):
                    widest = (c, ds)
        if widest is not None and (len(keep) == 1 or len(widest[1]) >= self._WIDE_OR):
            chosen, ds = widest
            others = [c for c in keep if c is not chosen]
            branches = [self._elim(v, fixed_pos, fixed_neg, _and_all([d] + others))
                        for d in ds]
            return _and_all(outside + [_or_all(branches)])
        # split on a large exclusive group, assembling branch bodies from
        # per-member buckets so shared conjuncts are not rebuilt per branch
        body = _and_all(keep)
        group = self._pick_group(v, body, fixed_pos, fixed_neg)
        if group is not None:
            memo: dict = {}
            gcache: dict = {}

            def subst(node: Formula, chosen: Optional[str]) -> Formula:
                return self._branch_substitute(node, v, group, chosen, memo, gcache)

            neutral: list[Formula] = []
            singles: dict[str, list[Formula]] = {}
            multi: list[Formula] = []
            for c in keep:
                rel = self._gpreds(c, v, group, gcache)
                if not rel:
                    neutral.append(c)
                elif len(rel) == 1:
                    singles.setdefault(next(iter(rel)), []).append(c)
                else:
                    multi.append(c)
            # all-false versions of single-member conjuncts; most fold to true
            exceptions: list[tuple[str, Formula, Formula]] = []
            for member, cs in singles.items():
                for c in cs:
                    af = subst(c, None)
                    if not isinstance(af, Top):
                        exceptions.append((member, c, af))
            shared = _and_all(neutral)
            branches = []
            for s in sorted(group):
                parts: list[Formula] = [shared]
                parts.extend(subst(c, s) for c in singles.get(s, ()))
                parts.extend(subst(c, s) for c in multi)
                parts.extend(af for m, _, af in exceptions if m != s)
                branches.append(self._elim(v, fixed_pos | {s}, fixed_neg,
                                           _and_all(parts)))
            rest_parts: list[Formula] = [shared]
            rest_parts.extend(subst(c, None) for cs in singles.values() for c in cs)
            rest_parts.extend(subst(c, None) for c in multi)
            branches.append(self._elim(v, fixed_pos, fixed_neg | group,
                                       _and_all(rest_parts)))
            return _and_all(outside + [_or_all(branches)])
        # base: cube expansion over the remaining atoms on v
        disjuncts = _absorb(self._dnf(body, v, True))
        out = []
        for pos, neg, residues in disjuncts:
            out.append(_and_all([_PropLeaf(self.atom(fixed_pos | pos, fixed_neg | neg))]
                                + residues))
        return _and_all(outside + [_or_all(out)])

    def _gpreds(self, node: Formula, v: str, group: frozenset[str],
                gcache: dict) -> frozenset[str]:
        """Group members occurring as atoms on v inside the node."""
        hit = gcache.get(id(node))
        if hit is not None and hit[0] is node:
            return hit[1]
        if isinstance(node, Atom):
            out = frozenset([node.symbol.name]) if (
                node.args == (v,) and node.symbol.name in group) else frozenset()
        elif isinstance(node, (Top, Bottom, _PropLeaf)):
            out = frozenset()
        elif isinstance(node, Not):
            out = self._gpreds(node.sub, v, group, gcache)
        elif isinstance(node, (And, Or, Implies)):
            out = (self._gpreds(node.left, v, group, gcache)
                   | self._gpreds(node.right, v, group, gcache))
        elif isinstance(node, Exists):
            out = frozenset() if node.var == v else self._gpreds(node.body, v, group, gcache)
        else:
            raise SemanticsError(f"unexpected node {node!r}")
        gcache[id(node)] = (node, out)
        return out

    def _branch_substitute(self, body: Formula, v: str, group: frozenset[str],
                           chosen: Optional[str], memo: dict, gcache: dict) -> Formula:
        """Substitute the group decision, sharing results across branches.

        A node's result depends only on whether the chosen member occurs in
        it, so substitution over all |group|+1 branches stays near-linear.
        """

        def gpreds(node: Formula) -> frozenset[str]:
            return self._gpreds(node, v, group, gcache)

        def go(node: Formula) -> Formula:
            rel = gpreds(node)
            if not rel:
                return node
            key = (id(node), chosen if chosen in rel else None)
            hit = memo.get(key)
            if hit is not None and hit[0] is node:
                return hit[1]
            if isinstance(node, Atom):
                out: Formula = TOP if node.symbol.name == chosen else BOTTOM
            elif isinstance(node, Not):
                out = _not_f(go(node.sub))
            elif isinstance(node, And):
                left, right = go(node.left), go(node.right)
                if isinstance(left, Bottom) or isinstance(right, Bottom):
                    out = BOTTOM
                elif isinstance(left, Top):
                    out = right
                elif isinstance(right, Top):
                    out = left
                else:
                    out = And(left, right)
            elif isinstance(node, Or):
                left, right = go(node.left), go(node.right)
                if isinstance(left, Top) or isinstance(right, Top):
                    out = TOP
                elif isinstance(left, Bottom):
                    out = right
                elif isinstance(right, Bottom):
                    out = left
                else:
                    out = Or(left, right)
            elif isinstance(node, Implies):
                left, right = go(node.left), go(node.right)
                if isinstance(left, Bottom) or isinstance(right, Top):
                    out = TOP
                elif isinstance(left, Top):
                    out = right
                elif isinstance(right, Bottom):
                    out = _not_f(left)
                else:
                    out = Implies(left, right)
            else:
                out = node
            memo[key] = (node, out)
            return out

        return go(body)

    def _group_context(self, v: str, fixed_pos: frozenset[str], matrix: Formula) -> Formula:
        """Under a chosen group member, other members of its group are false."""
        chosen_groups = {self.group_of[p]: p for p in fixed_pos if p in self.group_of}
        if not chosen_groups:
            return matrix
        values = {}
        for var, p in self._preds_on(matrix, v):
            if var != v:
                continue
            g = self.group_of.get(p)
            if g in chosen_groups and chosen_groups[g] != p:
                values[p] = False
        return self._substitute(matrix, v, values) if values else matrix

    def _propagate_units(self, v, fixed_pos, fixed_neg, matrix
                         ) -> tuple[frozenset, frozenset, Optional[list[Formula]]]:
        """Extract and apply literal conjuncts on v; None conjuncts mean bottom."""
        while True:
            units: dict[str, bool] = {}
            rest: list[Formula] = []
            conflict = False
            conjuncts = self._conjuncts(matrix)
            if conjuncts is None:
                return fixed_pos, fixed_neg, None
            for c in conjuncts:
                lit = _as_literal(c, v)
                if lit is None:
                    rest.append(c)
                    continue
                pred, sign = lit
                if units.get(pred, sign) != sign:
                    conflict = True
                    break
                units[pred] = sign
            if conflict:
                return fixed_pos, fixed_neg, None
            if not units:
                return fixed_pos, fixed_neg, conjuncts
            for pred, sign in units.items():
                if sign:
                    if pred in fixed_neg:
                        return fixed_pos, fixed_neg, None
                    fixed_pos = fixed_pos | {pred}
                else:
                    if pred in fixed_pos:
                        return fixed_pos, fixed_neg, None
                    fixed_neg = fixed_neg | {pred}
            if self._group_clash(fixed_pos):
                return fixed_pos, fixed_neg, None
            matrix = self._substitute(_and_all(rest), v, units)
            matrix = self._group_context(v, fixed_pos, matrix)
            if isinstance(matrix, Bottom):
                return fixed_pos, fixed_neg, None
            if isinstance(matrix, Top):
                return fixed_pos, fixed_neg, []

    def _group_clash(self, pos: frozenset[str]) -> bool:
        seen: dict[int, str] = {}
        for p in pos:
            g = self.group_of.get(p)
            if g is None:
                continue
            if g in seen and seen[g] != p:
                return True
            seen[g] = p
        return False

    def _preds_on(self, f: Formula, v: str) -> frozenset[tuple[str, str]]:
        """(variable, predicate) pairs of atoms below f, memoized across shares."""
        hit = self.preds_cache.get(id(f))
        if hit is not None and hit[0] is f:
            pairs = hit[1]
        else:
            if isinstance(f, Atom):
                pairs = frozenset([(f.args[0], f.symbol.name)]) if len(f.args) == 1 else frozenset()
            elif isinstance(f, (Top, Bottom, _PropLeaf)):
                pairs = frozenset()
            elif isinstance(f, Not):
                pairs = self._preds_on(f.sub, v)
            elif isinstance(f, (And, Or, Implies)):
                pairs = self._preds_on(f.left, v) | self._preds_on(f.right, v)
            elif isinstance(f, (Exists, Forall)):
                pairs = self._preds_on(f.body, v)
            else:
                raise SemanticsError(f"unexpected node {f!r}")
            self.preds_cache[id(f)] = (f, pairs)
        return pairs

    def _pick_group(self, v, body, fixed_pos, fixed_neg) -> Optional[frozenset[str]]:
        if not self.groups:
            return None
        preds = {p for var, p in self._preds_on(body, v) if var == v and p in self.group_members}
        best: Optional[frozenset[str]] = None
        for g in self.groups:
            occurring = frozenset(g & preds) - fixed_pos - fixed_neg
            if len(occurring) >= _SPLIT_MIN and (best is None or len(occurring) > len(best)):
                if not (fixed_pos & g):
                    best = occurring
        return best

    def _substitute(self, f: Formula, v: str, values: dict[str, bool]) -> Formula:
        if not values:
            return f
        memo: dict[int, tuple[Formula, Formula]] = {}

        def go(node: Formula) -> Formula:
            hit = memo.get(id(node))
            if hit is not None and hit[0] is node:
                return hit[1]
            out = _go(node)
            memo[id(node)] = (node, out)
            return out

        def _go(node: Formula) -> Formula:
            if isinstance(node, Atom):
                if node.args == (v,) and node.symbol.name in values:
                    return TOP if values[node.symbol.name] else BOTTOM
                return node
            if isinstance(node, (Top, Bottom, _PropLeaf)):
                return node
            if isinstance(node, Not):
                return _not_f(go(node.sub))
            if isinstance(node, And):
                left, right = go(node.left), go(node.right)
                if isinstance(left, Bottom) or isinstance(right, Bottom):
                    return BOTTOM
                if isinstance(left, Top):
                    return right
                if isinstance(right, Top):
                    return left
                return And(left, right)
            if isinstance(node, Or):
                left, right = go(node.left), go(node.right)
                if isinstance(left, Top) or isinstance(right, Top):
                    return TOP
                if isinstance(left, Bottom):
                    return right
                if isinstance(right, Bottom):
                    return left
                return Or(left, right)
            if isinstance(node, Implies):
                left, right = go(node.left), go(node.right)
                if isinstance(left, Bottom) or isinstance(right, Top):
                    return TOP
                if isinstance(left, Top):
                    return right
                if isinstance(right, Bottom):
                    return _not_f(left)
                return Implies(left, right)
            if isinstance(node, Exists):
                # a shadowing binder keeps its own atoms
                if node.var == v:
                    return node
                return Exists(node.var, go(node.body))
            raise SemanticsError(f"unexpected node {node!r}")

        return go(f)

    def _dnf(self, f: Formula, v: str, positive: bool
             ) -> list[tuple[frozenset[str], frozenset[str], list[Formula]]]:
        if v not in self.free(f):
            residue = f if positive else _not_f(f)
            if isinstance(residue, Top):
                return [(frozenset(), frozenset(), [])]
            if isinstance(residue, Bottom):
                return []
            return [(frozenset(), frozenset(), [residue])]
        if isinstance(f, Atom):
            assert f.args == (v,)
            name = f.symbol.name
            if positive:
                return [(frozenset([name]), frozenset(), [])]
            return [(frozenset(), frozenset([name]), [])]
        if isinstance(f, Not):
            return self._dnf(f.sub, v, not positive)
        if isinstance(f, And):
            if positive:
                return self._dnf_cross(self._dnf(f.left, v, True), self._dnf(f.right, v, True))
            return self._dnf(f.left, v, False) + self._dnf(f.right, v, False)
        if isinstance(f, Or):
            if positive:
                return self._dnf(f.left, v, True) + self._dnf(f.right, v, True)
            return self._dnf_cross(self._dnf(f.left, v, False), self._dnf(f.right, v, False))
        if isinstance(f, Implies):
            if positive:
                return self._dnf(f.left, v, False) + self._dnf(f.right, v, True)
            return self._dnf_cross(self._dnf(f.left, v, True), self._dnf(f.right, v, False))
        raise SemanticsError(f"quantifier inside an elimination matrix: {f!r}")

    def _dnf_cross(self, left, right):
        self.budgets.check("skeleton_atoms", len(self.atoms) + len(left) * len(right))
        out = []
        for pos_l, neg_l, res_l in left:
            for pos_r, neg_r, res_r in right:
                pos = pos_l | pos_r
                neg = neg_l | neg_r
                if pos & neg or self._group_clash(pos):
                    continue
                merged = res_l + [r for r in res_r if not any(r is q for q in res_l)]
                out.append((pos, neg, merged))
        # absorb eagerly: subsumed products would otherwise multiply
        return _absorb(out)

    def to_prop(self, f: Formula) -> PropFormula:
        if isinstance(f, _PropLeaf):
            return f.prop
        if isinstance(f, Top):
            return P_TRUE
        if isinstance(f, Bottom):
            return P_FALSE
        if isinstance(f, Not):
            return p_not(self.to_prop(f.sub))
        if isinstance(f, And):
            return p_and([self.to_prop(c) for c in _flat_and(f)])
        if isinstance(f, Or):
            return p_or([self.to_prop(c) for c in _flat_or(f)])
        if isinstance(f, Implies):
            return p_or([p_not(self.to_prop(f.left)), self.to_prop(f.right)])
        raise SemanticsError(f"individual atom survived elimination: {f!r}")


def _not_f(f: Formula) -> Formula:
    if isinstance(f, Top):
        return BOTTOM
    if isinstance(f, Bottom):
        return TOP
    if isinstance(f, Not):
        return f.sub
    return Not(f)


def _flat_and(f: Formula) -> list[Formula]:
    out = []
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, And):
            stack.append(node.right)
            stack.append(node.left)
        elif not isinstance(node, Top):
            out.append(node)
    # preserve left-to-right order
    return out


def _flat_or(f: Formula) -> list[Formula]:
    out = []
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Or):
            stack.append(node.right)
            stack.append(node.left)
        elif not isinstance(node, Bottom):
            out.append(node)
    return out


def _and_all(parts: list[Formula]) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Bottom):
            return BOTTOM
        if not isinstance(p, Top):
            flat.append(p)
    if not flat:
        return TOP
    while len(flat) > 1:  # balanced: keeps recursion shallow downstream
        flat = [And(flat[i], flat[i + 1]) if i + 1 < len(flat) else flat[i]
                for i in range(0, len(flat), 2)]
    return flat[0]


def _or_all(parts: list[Formula]) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Top):
            return TOP
        if not isinstance(p, Bottom):
            flat.append(p)
    if not flat:
        return BOTTOM
    while len(flat) > 1:
        flat = [Or(flat[i], flat[i + 1]) if i + 1 < len(flat) else flat[i]
                for i in range(0, len(flat), 2)]
    return flat[0]


def miniscope(f: Formula, budgets: Optional[Budgets] = None) -> Skeleton:
    """Quantifier-eliminated propositional skeleton of a monadic formula.

    A free variable is closed existentially first. Witness atoms are shared
    through a cube table; the propositional part is returned untouched.
    """
    budgets = budgets if budgets is not None else default_budgets()
    vocab = vocabulary_of(f)
    bad = [s for s in vocab if s.arity != 1]
    if bad:
        raise SemanticsError(f"non-monadic input: symbols {bad}")
    fv = sorted(free_variables(f))
    if len(fv) > 1:
        raise SemanticsError(f"at most one free variable allowed, got {fv}")
    closed = Exists(fv[0], f) if fv else f
    groups = _greedy_groups(_exclusion_pairs(closed))
    sk = _Skeletonizer(budgets, groups)
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        eliminated = sk.qe(closed)
        prop = sk.to_prop(eliminated)
    finally:
        if was_enabled:
            gc.enable()
    group_names = [frozenset(g) for g in groups]
    return Skeleton(prop, sk.atoms, sorted(s.name for s in vocab), group_names)


def _as_literal(c: Formula, v: str) -> Optional[tuple[str, bool]]:
    if isinstance(c, Atom) and c.args == (v,):
        return c.symbol.name, True
    if isinstance(c, Not) and isinstance(c.sub, Atom) and c.sub.args == (v,):
        return c.sub.symbol.name, False
    return None


_ABSORB_MAX = 512


def _absorb(disjuncts):
    """Drop cubes that extend another cube with no extra residues."""
    if len(disjuncts) > _ABSORB_MAX:
        return disjuncts
    keyed = sorted(
        ((pos, neg, res, frozenset(id(r) for r in res)) for pos, neg, res in disjuncts),
        key=lambda t: len(t[0]) + len(t[1]) + len(t[2]),
    )
    keep: list = []
    for pos, neg, res, rid in keyed:
        if any(p2 <= pos and n2 <= neg and r2 <= rid for p2, n2, _, r2 in keep):
            continue
        keep.append((pos, neg, res, rid))
    return [(p, n, r) for p, n, r, _ in keep]


# -- propositional search --------------------------------------------------------

class _Cnf:
    """Polarity-aware Tseitin encoding; variable 1 is the constant-true anchor.

    Only the implication direction actually used by each subformula's polarity
    is emitted, so the clause set stays free of spurious all-positive clauses
    and the default-false search only branches at genuine disjunctions.
    """

    def __init__(self, prop: PropFormula, atom_count: int):
        self.atom_count = atom_count
        self.var_count = atom_count + 1
        self.clauses: list[list[int]] = [[1]]
        self._aux: dict[int, tuple[PropFormula, int]] = {}
        self._done: set[tuple[int, int]] = set()
        root = self._lit(prop)
        self._encode(prop, 1)
        self.clauses.append([root])

    def atom_var(self, index: int) -> int:
        return index + 2

    def _lit(self, p: PropFormula) -> int:
        if isinstance(p, PTrue):
            return 1
        if isinstance(p, PFalse):
            return -1
        if isinstance(p, PVar):
            return p.index + 2
        if isinstance(p, PNot):
            return -self._lit(p.sub)
        hit = self._aux.get(id(p))
        if hit is not None and hit[0] is p:
            return hit[1]
        self.var_count += 1
        self._aux[id(p)] = (p, self.var_count)
        return self.var_count

    def _encode(self, p: PropFormula, polarity: int) -> None:
        stack = [(p, polarity)]
        while stack:
            node, pol = stack.pop()
            if isinstance(node, (PTrue, PFalse, PVar)):
                continue
            if isinstance(node, PNot):
                stack.append((node.sub, -pol))
                continue
            key = (id(node), pol)
            if key in self._done:
                continue
            self._done.add(key)
            g = self._lit(node)
            parts = [self._lit(q) for q in node.parts]
            if isinstance(node, PAnd):
                if pol >= 0:
                    for q in parts:
                        self.clauses.append([-g, q])
                if pol <= 0:
                    self.clauses.append([g] + [-q for q in parts])
            else:
                if pol >= 0:
                    self.clauses.append([-g] + parts)
                if pol <= 0:
                    for q in parts:
                        self.clauses.append([-q, g])
            for q in node.parts:
                stack.append((q, pol))


class _Dpll:
    """DPLL specialized for a default-false search: decisions happen only at
    clauses that the all-false completion would falsify, so the number of
    choice points tracks the handful of witness atoms a model needs."""

    def __init__(self, var_count: int, clauses: list[list[int]], atom_count: int = 0):
        self.var_count = var_count
        self.atom_count = atom_count
        self.assign: list[int] = [0] * (var_count + 1)  # 0 unknown, 1 true, -1 false
        self.trail: list[int] = []
        self.occurs: dict[int, list[int]] = {}
        self.clauses: list[list[int]] = []
        self.units: list[int] = []
        self.pending: list[int] = []
        self._head = 0
        for c in clauses:
            self._register(c)

    def _register(self, clause: list[int]) -> None:
        clause = sorted(set(clause), key=abs)
        index = len(self.clauses)
        self.clauses.append(clause)
        for lit in clause:
            self.occurs.setdefault(lit, []).append(index)
        if len(clause) == 1:
            self.units.append(clause[0])
        elif all(l > 0 for l in clause):
            self.pending.append(index)

    def value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def _set(self, lit: int) -> None:
        self.assign[abs(lit)] = 1 if lit > 0 else -1
        self.trail.append(lit)

    def propagate(self) -> bool:
        while self._head < len(self.trail):
            lit = self.trail[self._head]
            self._head += 1
            for ci in self.occurs.get(-lit, ()):
                clause = self.clauses[ci]
                unassigned = None
                open_count = 0
                satisfied = False
                negative_open = False
                for l in clause:
                    v = self.assign[abs(l)]
                    if l < 0:
                        v = -v
                    if v == 1:
                        satisfied = True
                        break
                    if v == 0:
                        open_count += 1
                        unassigned = l
                        if l < 0:
                            negative_open = True
                if satisfied:
                    continue
                if open_count == 0:
                    return False
                if open_count == 1:
                    self._set(unassigned)
                elif not negative_open:
                    self.pending.append(ci)
        return True

    def init_units(self) -> bool:
        for lit in self.units:
            if self.value(lit) == -1:
                return False
            if self.value(lit) == 0:
                self._set(lit)
        return self.propagate()

    def _clause_state(self, ci: int) -> Optional[list[int]]:
        """Positive open literals if the clause falsifies under default-false.

        Auxiliary definition variables come first: making one true is a free
        structural choice, while a witness atom carries a realizability
        obligation and is tried only when the structure leaves no way out.
        """
        decidable: list[int] = []
        for l in self.clauses[ci]:
            v = self.value(l)
            if v == 1:
                return None
            if v == 0:
                if l < 0:
                    return None  # an open negative literal: default satisfies
                decidable.append(l)
        decidable.sort(key=lambda l: (l <= self.atom_count + 1, l))
        return decidable

    def _find_violated(self) -> Optional[int]:
        while self.pending:
            ci = self.pending.pop()
            if self._clause_state(ci) is not None:
                return ci
        for ci in range(len(self.clauses)):
            if self._clause_state(ci) is not None:
                return ci
        return None

    def _undo_to(self, mark: int) -> None:
        for l in reversed(self.trail[mark:]):
            self.assign[abs(l)] = 0
        del self.trail[mark:]
        self._head = min(self._head, mark)

    def solve(self) -> bool:
        """Satisfy all clauses; unassigned variables read as false afterwards."""
        if not self.init_units():
            return False
        frames: list[tuple[int, int, list[int]]] = []  # (trail mark, clause, alternatives)
        while True:
            if not self.propagate():
                ok = self._backtrack(frames)
                if not ok:
                    return False
                continue
            ci = self._find_violated()
            if ci is None:
                return True
            alts = self._clause_state(ci)
            if alts is None:
                continue
            if not alts:
                ok = self._backtrack(frames)
                if not ok:
                    return False
                continue
            mark = len(self.trail)
            lit = alts.pop(0)
            frames.append((mark, ci, alts))
            self._set(lit)

    def _backtrack(self, frames: list[tuple[int, int, list[int]]]) -> bool:
        while frames:
            mark, ci, alts = frames.pop()
            self._undo_to(mark)
            self.pending.append(ci)
            while alts:
                lit = alts.pop(0)
                if self.value(lit) == -1:
                    continue
                frames.append((mark, ci, alts))
                if self.value(lit) == 0:
                    self._set(lit)
                return True
        return False

    def learn(self, clause: list[int]) -> None:
        """Add a clause and reset the search state."""
        self._undo_to(0)
        self.pending.clear()
        self._register(clause)
        for ci, c in enumerate(self.clauses):
            if len(c) > 1 and all(l > 0 for l in c):
                self.pending.append(ci)


class _Realizer:
    """Per-witness 1-type construction avoiding all false cubes."""

    def __init__(self, atoms: list[LiteralCube], groups: list[frozenset[str]],
                 budgets: Budgets):
        self.atoms = atoms
        self.groups = groups
        self.group_of: dict[str, int] = {}
        for i, g in enumerate(groups):
            for p in g:
                self.group_of[p] = i
        self.budgets = budgets
        self.steps = 0

    def _is_group_pair(self, cube: LiteralCube) -> bool:
        if len(cube.pos) != 2 or cube.neg:
            return False
        a, b = sorted(cube.pos)
        ga = self.group_of.get(a)
        return ga is not None and ga == self.group_of.get(b)

    def prepare(self, false_atoms: list[int]) -> None:
        """Index the false cubes; intra-group pairs are avoided by construction."""
        self.false_cubes: list[LiteralCube] = []
        self.cube_atom: list[int] = []
        self.by_pos: dict[str, list[int]] = {}
        self.no_pos: list[int] = []
        for a in false_atoms:
            cube = self.atoms[a]
            if self._is_group_pair(cube):
                continue
            index = len(self.false_cubes)
            self.false_cubes.append(cube)
            self.cube_atom.append(a)
            if cube.pos:
                for p in cube.pos:
                    self.by_pos.setdefault(p, []).append(index)
            else:
                self.no_pos.append(index)

    def witness_type(self, base: LiteralCube
                     ) -> tuple[Optional[frozenset[str]], set[int]]:
        """A set of true predicates extending base, or None plus the used core."""
        used: set[int] = set()
        result = self._search(frozenset(base.pos), frozenset(base.neg), used)
        return result, used

    def _active(self, pos: frozenset[str], neg: frozenset[str]) -> Optional[int]:
        """Index of a false cube the default-false completion of (pos, neg) realizes."""
        candidates: set[int] = set(self.no_pos)
        for p in pos:
            candidates.update(self.by_pos.get(p, ()))
        for ci in sorted(candidates):
            cube = self.false_cubes[ci]
            if cube.pos <= pos and not (cube.neg & pos):
                return ci
        return None

    def _group_ok(self, pos: frozenset[str]) -> bool:
        seen: dict[int, str] = {}
        for p in pos:
            g = self.group_of.get(p)
            if g is not None:
                if g in seen and seen[g] != p:
                    return False
                seen[g] = p
        return True

    def _search(self, pos: frozenset[str], neg: frozenset[str],
                used: set[int]) -> Optional[frozenset[str]]:
        self.steps += 1
        self.budgets.check("skeleton_atoms", self.steps)
        if pos & neg or not self._group_ok(pos):
            return None
        ci = self._active(pos, neg)
        if ci is None:
            return pos
        used.add(ci)
        cube = self.false_cubes[ci]
        # break the cube by making one of its negative predicates true
        for p in sorted(cube.neg):
            if p in neg or p in pos:
                continue
            out = self._search(pos | {p}, neg, used)
            if out is not None:
                return out
        return None


@dataclass(frozen=True)
class MfoResult:
    status: str  # "SAT" | "UNSAT"
    structure: Optional[Structure] = None
    witness: Optional[str] = None
    skeleton: Optional[Skeleton] = None
    types: tuple[frozenset[str], ...] = ()
    core: tuple[str, ...] = ()

    @property
    def sat(self) -> bool:
        return self.status == "SAT"


def _model_from_types(types: list[frozenset[str]], predicates: list[str]) -> Structure:
    distinct: list[frozenset[str]] = []
    for t in types:
        if t not in distinct:
            distinct.append(t)
    if not distinct:
        distinct.append(frozenset())
    domain = tuple(f"w{i}" for i in range(len(distinct)))
    from .formulas import RelationSymbol
    interp = {
        RelationSymbol(p, 1): frozenset(
            (domain[i],) for i, t in enumerate(distinct) if p in t
        )
        for p in predicates
    }
    return Structure(domain, interp)


def decide_mfo(f: Formula, budgets: Optional[Budgets] = None) -> MfoResult:
    """Decide satisfiability of a monadic formula; SAT answers carry a replayed model."""
    budgets = budgets if budgets is not None else default_budgets()
    skeleton = miniscope(f, budgets)
    atom_count = len(skeleton.atoms)
    cnf = _Cnf(skeleton.prop, atom_count)
    solver = _Dpll(cnf.var_count, cnf.clauses, atom_count)
    realizer = _Realizer(skeleton.atoms, skeleton.groups, budgets)
    core_log: list[str] = []
    while True:
        if not solver.solve():
            return MfoResult("UNSAT", skeleton=skeleton, core=tuple(core_log[-16:]))
        true_atoms = [i for i in range(atom_count)
                      if solver.value(cnf.atom_var(i)) == 1]
        false_atoms = [i for i in range(atom_count)
                       if solver.value(cnf.atom_var(i)) != 1]
        realizer.prepare(false_atoms)
        types: list[frozenset[str]] = []
        failure: Optional[tuple[Optional[int], set[int]]] = None
        for a in true_atoms:
            found, used = realizer.witness_type(skeleton.atoms[a])
            if found is None:
                failure = (a, used)
                break
            types.append(found)
        if failure is None and not true_atoms:
            found, used = realizer.witness_type(LiteralCube(frozenset(), frozenset()))
            if found is None:
                failure = (None, used)
            else:
                types.append(found)
        if failure is None:
            model = _model_from_types(types, skeleton.predicates)
            witness = _replay(model, f)
            return MfoResult("SAT", structure=model, witness=witness,
                             skeleton=skeleton, types=tuple(types))
        atom, used = failure
        clause = []
        if atom is not None:
            clause.append(-cnf.atom_var(atom))
            core_log.append("E" + skeleton.atoms[atom].describe())
        for ci in used:
            clause.append(cnf.atom_var(realizer.cube_atom[ci]))
            core_log.append("!E" + skeleton.atoms[realizer.cube_atom[ci]].describe())
        if not clause:
            return MfoResult("UNSAT", skeleton=skeleton, core=tuple(core_log[-16:]))
        solver.learn(clause)


def _replay(model: Structure, f: Formula) -> Optional[str]:
    """Hard assertion: the constructed model satisfies the input."""
    fv = sorted(free_variables(f))
    checker = make_checker(model)
    if not fv:
        assert model_check(model, {}, f, checker), "model replay failed"
        return None
    for e in model.domain:
        if model_check(model, {fv[0]: e}, f, checker):
            return e
    raise AssertionError("model replay failed: no witness element")


def extract_witness(result: MfoResult, f: Formula) -> str:
    """An element of the SAT model satisfying the single free variable of f."""
    if not result.sat:
        raise SemanticsError("extract_witness needs a SAT result")
    fv = sorted(free_variables(f))
    if not fv:
        raise SemanticsError("formula has no free variable")
    checker = make_checker(result.structure)
    for e in result.structure.domain:
        if model_check(result.structure, {fv[0]: e}, f, checker):
            return e
    raise AssertionError("SAT result does not satisfy the formula")
