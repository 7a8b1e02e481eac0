"""Normal forms: the UF1 -> DUF1 rewrite and the DUF1 -> MUF1 modal translation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .budgets import Budgets, default_budgets
from .diagrams import Diagram, diagram_from_signs, enumerate_y_atoms, standard_variables
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
    Vocabulary,
    conjoin,
    disjoin,
    exists_block,
    free_variables,
    print_formula,
    vocabulary_of,
)
from .fragments import Blame, MembershipReport, atom_arity_class, check_uf1
from .modal import (
    DiamondDelta,
    DiamondE,
    MUF_BOTTOM,
    MUF_TOP,
    MufAnd,
    MufBottom,
    MufFormula,
    MufNot,
    MufOr,
    MufTop,
    SymbolAtom,
)


class NotInFragment(Exception):
    def __init__(self, fragment: str, blame):
        super().__init__(f"formula is not in {fragment}: {blame}")
        self.fragment = fragment
        self.blame = blame


def normalize_universals(f: Formula) -> Formula:
    """Rewrite every universal block as a negated existential."""
    if isinstance(f, Forall):
        return Not(Exists(f.var, Not(normalize_universals(f.body))))
    if isinstance(f, Not):
        return Not(normalize_universals(f.sub))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(normalize_universals(f.left), normalize_universals(f.right))
    if isinstance(f, Exists):
        return Exists(f.var, normalize_universals(f.body))
    return f


def _not(f: Formula) -> Formula:
    if isinstance(f, Top):
        return BOTTOM
    if isinstance(f, Bottom):
        return TOP
    if isinstance(f, Not):
        return f.sub
    return Not(f)


# -- DNF over Boolean leaves ---------------------------------------------------

# A disjunct is (wide, units): wide maps >=2-variable atoms to their sign,
# units maps the remaining Boolean leaves to theirs.
_Disjunct = tuple[dict, dict]


class _Budget:
    def __init__(self, budgets: Budgets):
        self.budgets = budgets
        self.used = 0

    def spend(self, n: int) -> None:
        self.used += n
        self.budgets.check("formula_nodes", self.used)


def _cross(left: list[_Disjunct], right: list[_Disjunct], budget: _Budget) -> list[_Disjunct]:
    out: list[_Disjunct] = []
    budget.spend(len(left) * len(right))
    for wide_l, units_l in left:
        for wide_r, units_r in right:
            wide = dict(wide_l)
            units = dict(units_l)
            ok = True
            for key, sign in wide_r.items():
                if wide.get(key, sign) != sign:
                    ok = False
                    break
                wide[key] = sign
            if ok:
                for key, sign in units_r.items():
                    if units.get(key, sign) != sign:
                        ok = False
                        break
                    units[key] = sign
            if ok:
                out.append((wide, units))
    return out


def _dnf(f: Formula, positive: bool, budget: _Budget) -> list[_Disjunct]:
    if isinstance(f, Top):
        return [({}, {})] if positive else []
    if isinstance(f, Bottom):
        return [] if positive else [({}, {})]
    if isinstance(f, Not):
        return _dnf(f.sub, not positive, budget)
    if isinstance(f, And):
        if positive:
            return _cross(_dnf(f.left, True, budget), _dnf(f.right, True, budget), budget)
        return _dnf(f.left, False, budget) + _dnf(f.right, False, budget)
    if isinstance(f, Or):
        if positive:
            return _dnf(f.left, True, budget) + _dnf(f.right, True, budget)
        return _cross(_dnf(f.left, False, budget), _dnf(f.right, False, budget), budget)
    if isinstance(f, Implies):
        if positive:
            return _dnf(f.left, False, budget) + _dnf(f.right, True, budget)
        return _cross(_dnf(f.left, True, budget), _dnf(f.right, False, budget), budget)
    if isinstance(f, Atom) and atom_arity_class(f) >= 2:
        return [({f: positive}, {})]
    return [({}, {f: positive})]


def _expand_to_diagrams(wide: dict, ordered_vars: list[str], vocab: Vocabulary,
                        budget: _Budget) -> list[list[tuple[Atom, bool]]]:
    """All total sign choices over the block's atoms extending the given literals.

    Empty when the literals are contradictory; the caller treats that as bottom.
    """
    atoms = enumerate_y_atoms(vocab, ordered_vars)
    fixed: dict[Atom, bool] = {}
    for atom, sign in wide.items():
        if fixed.get(atom, sign) != sign:
            return []
        fixed[atom] = sign
    unknown = [a for a in atoms if a not in fixed]
    budget.spend(2 ** len(unknown) * len(atoms))
    out = []
    for mask in range(2 ** len(unknown)):
        choice = dict(fixed)
        for i, a in enumerate(unknown):
            choice[a] = bool(mask >> i & 1)
        out.append([(a, choice[a]) for a in atoms])
    return out


def to_duf1(f: Formula, budgets: Optional[Budgets] = None) -> Formula:
    """Equivalent DUF1 normal form, per the block-by-block diagram expansion."""
    report = check_uf1(f)
    if not report.member:
        raise NotInFragment("UF1", report.blame)
    budgets = budgets if budgets is not None else default_budgets()
    budget = _Budget(budgets)
    wide_vocab = Vocabulary(vocabulary_of(f).of_min_arity(2))
    memo: dict[Formula, Formula] = {}

    def tr(g: Formula) -> Formula:
        hit = memo.get(g)
        if hit is None:
            hit = _tr(g)
            memo[g] = hit
        return hit

    def _tr(g: Formula) -> Formula:
        if isinstance(g, (Atom, Top, Bottom)):
            return g
        if isinstance(g, Not):
            return _not(tr(g.sub))
        if isinstance(g, And):
            return conjoin([tr(g.left), tr(g.right)])
        if isinstance(g, Or):
            return disjoin([tr(g.left), tr(g.right)])
        if isinstance(g, Implies):
            return disjoin([_not(tr(g.left)), tr(g.right)])
        if isinstance(g, Exists):
            return tr_block(g)
        raise AssertionError(f"unnormalized node {g!r}")

    def tr_block(g: Exists) -> Formula:
        chain: list[str] = []
        node: Formula = g
        while isinstance(node, Exists):
            if node.var not in chain:
                chain.append(node.var)
            node = node.body
        matrix = node
        matrix_free = free_variables(matrix)
        chain = [v for v in chain if v in matrix_free]
        if not chain:
            return tr(matrix)
        block_free = sorted(matrix_free - set(chain))
        if not block_free:
            # closed chain: peel the outermost variable and re-quantify (rule iv)
            inner = tr_block_open(chain[0], chain[1:], matrix)
            return Exists(chain[0], inner) if chain[0] in free_variables(inner) else inner
        return tr_block_open(block_free[0], chain, matrix)

    def tr_block_open(y1: str, qvars: list[str], matrix: Formula) -> Formula:
        disjuncts = _dnf(matrix, True, budget)
        results = []
        for wide, units in disjuncts:
            results.append(tr_disjunct(y1, qvars, wide, units))
        return disjoin(results)

    def tr_disjunct(y1: str, qvars: list[str], wide: dict, units: dict) -> Formula:
        buckets: dict[str, list[Formula]] = {}
        beta: list[Formula] = []
        for leaf, sign in units.items():
            translated = tr(leaf) if sign else _not(tr(leaf))
            if isinstance(translated, Bottom):
                return BOTTOM
            if isinstance(translated, Top):
                continue
            fv = free_variables(translated)
            if len(fv) > 1:
                raise AssertionError(f"side formula with several free variables: {leaf}")
            if fv:
                buckets.setdefault(next(iter(fv)), []).append(translated)
            else:
                beta.append(translated)
        if not wide:
            parts = []
            if y1 in buckets:
                parts.append(conjoin(buckets[y1]))
            for v in qvars:
                if v in buckets:
                    parts.append(Exists(v, conjoin(buckets[v])))
            parts.extend(beta)
            return conjoin(parts)
        alpha_vars = set()
        for atom in wide:
            alpha_vars |= set(atom.args)
        order = ([y1] if y1 in alpha_vars else []) + [v for v in qvars if v in alpha_vars]
        assert set(order) == alpha_vars
        expansions = _expand_to_diagrams(wide, order, wide_vocab, budget)
        blocks = []
        for literals in expansions:
            inner_parts: list[Formula] = [
                atom if sign else Not(atom) for atom, sign in literals
            ]
            for v in order:
                if v in buckets:
                    inner_parts.append(conjoin(buckets[v]))
            if y1 in alpha_vars:
                blocks.append(exists_block(order[1:], conjoin(inner_parts)))
            else:
                inner = exists_block(order[1:], conjoin(inner_parts))
                blocks.append(Exists(order[0], inner))
        gamma = disjoin(blocks)
        outer: list[Formula] = [gamma]
        if y1 not in alpha_vars and y1 in buckets:
            outer.append(conjoin(buckets[y1]))
        for v in qvars:
            if v not in alpha_vars and v in buckets:
                outer.append(Exists(v, conjoin(buckets[v])))
        outer.extend(beta)
        return conjoin(outer)

    return tr(normalize_universals(f))


# -- DUF1 membership -----------------------------------------------------------

@dataclass(frozen=True)
class _BlockParts:
    free_var: str
    chain: list[str]
    literals: list[tuple[Atom, bool]]
    side: list[Formula]


class _DufBlame(Exception):
    def __init__(self, blame: Blame):
        self.blame = blame


def _duf_block_parts(f: Exists, wide_vocab: Vocabulary) -> Optional[_BlockParts]:
    """Classify an existential as rule (iv) (None) or a rule (iii) block."""
    body_free = free_variables(f.body)
    if body_free <= {f.var}:
        return None
    chain: list[str] = []
    node: Formula = f
    while isinstance(node, Exists):
        if node.var in chain:
            raise _DufBlame(Blame(f, "rule-iii", "duplicate bound variable in a block"))
        chain.append(node.var)
        node = node.body
    matrix = node
    free_after = free_variables(f)
    if len(free_after) != 1:
        raise _DufBlame(Blame(f, "rule-iii",
                              f"block leaves {len(free_after)} variables free"))
    y1 = next(iter(free_after))
    conjuncts = []
    stack = [matrix]
    while stack:
        c = stack.pop()
        if isinstance(c, And):
            stack.append(c.right)
            stack.append(c.left)
        else:
            conjuncts.append(c)
    literals: list[tuple[Atom, bool]] = []
    side: list[Formula] = []
    for c in conjuncts:
        if isinstance(c, Atom) and atom_arity_class(c) >= 2:
            literals.append((c, True))
        elif isinstance(c, Not) and isinstance(c.sub, Atom) and atom_arity_class(c.sub) >= 2:
            literals.append((c.sub, False))
        else:
            side.append(c)
    if not literals:
        raise _DufBlame(Blame(f, "rule-iii",
                              "chained quantifiers without a diagram matrix"))
    variables = set()
    for atom, _ in literals:
        variables |= set(atom.args)
    expected = set(chain) | {y1}
    if variables != expected or len(expected) != len(chain) + 1:
        raise _DufBlame(Blame(f, "rule-iii",
                              "diagram variables do not match the quantifier block"))
    sign_map: dict[Atom, bool] = {}
    for atom, sign in literals:
        if sign_map.get(atom, sign) != sign:
            raise _DufBlame(Blame(f, "rule-iii", "contradictory diagram literals"))
        sign_map[atom] = sign
    ordered = [y1] + chain
    needed = set(enumerate_y_atoms(wide_vocab, ordered))
    if set(sign_map) != needed:
        raise _DufBlame(Blame(f, "rule-iii",
                              "literal set is not a full uniform diagram"))
    for c in side:
        fv = free_variables(c)
        if len(fv) > 1:
            raise _DufBlame(Blame(f, "rule-iii",
                                  "conjunct has more than one free variable"))
        if not fv <= expected:
            raise _DufBlame(Blame(f, "rule-iii",
                                  "conjunct uses variables outside the block"))
    return _BlockParts(y1, chain, [(a, sign_map[a]) for a in sorted(
        sign_map, key=lambda a: (a.symbol.name, a.args))], side)


def check_duf1(f: Formula) -> MembershipReport:
    """Membership in the diagram normal form DUF1 (universals read as negated existentials)."""
    g = normalize_universals(f)
    wide_vocab = Vocabulary(vocabulary_of(g).of_min_arity(2))

    def go(node: Formula) -> Optional[Blame]:
        if isinstance(node, (Top, Bottom)):
            return None
        if isinstance(node, Atom):
            if atom_arity_class(node) == 1:
                return None
            return Blame(node, "rule-i", "higher-arity atom outside a diagram block")
        if isinstance(node, Not):
            return go(node.sub)
        if isinstance(node, (And, Or, Implies)):
            return go(node.left) or go(node.right)
        if isinstance(node, Exists):
            try:
                parts = _duf_block_parts(node, wide_vocab)
            except _DufBlame as e:
                return e.blame
            if parts is None:
                return go(node.body)
            for c in parts.side:
                blame = go(c)
                if blame is not None:
                    return blame
            return None
        return Blame(node, "unknown-node", "unsupported formula construct")

    blame = go(g)
    return MembershipReport(blame is None, blame)


# -- DUF1 -> MUF1 ---------------------------------------------------------------

def muf_conjoin(parts: list[MufFormula]) -> MufFormula:
    items = [p for p in parts if not isinstance(p, MufTop)]
    if any(isinstance(p, MufBottom) for p in items):
        return MUF_BOTTOM
    if not items:
        return MUF_TOP
    while len(items) > 1:
        items = [
            MufAnd(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def to_muf1(f: Formula, free_var: Optional[str] = None) -> MufFormula:
    """Modal normal form of a DUF1 formula with at most one free variable."""
    report = check_duf1(f)
    if not report.member:
        raise NotInFragment("DUF1", report.blame)
    g = normalize_universals(f)
    fv = free_variables(g)
    if len(fv) > 1:
        raise NotInFragment("DUF1", Blame(f, "free-variables",
                                          f"more than one free variable: {sorted(fv)}"))
    if free_var is None and fv:
        free_var = next(iter(fv))
    vocab = vocabulary_of(g)
    wide_vocab = Vocabulary(vocab.of_min_arity(2))

    def tr(node: Formula, var: Optional[str]) -> MufFormula:
        if isinstance(node, Atom):
            distinct = set(node.args)
            if len(distinct) != 1:
                raise AssertionError("higher-arity atom escaped the DUF1 check")
            arg = next(iter(distinct))
            if var is not None and arg != var:
                raise NotInFragment("DUF1", Blame(node, "free-variables",
                                                  f"atom uses {arg!r} where {var!r} is in scope"))
            return SymbolAtom(node.symbol)
        if isinstance(node, Top):
            return MUF_TOP
        if isinstance(node, Bottom):
            return MUF_BOTTOM
        if isinstance(node, Not):
            return MufNot(tr(node.sub, var))
        if isinstance(node, And):
            return MufAnd(tr(node.left, var), tr(node.right, var))
        if isinstance(node, Or):
            return MufOr(tr(node.left, var), tr(node.right, var))
        if isinstance(node, Implies):
            return MufOr(MufNot(tr(node.left, var)), tr(node.right, var))
        if isinstance(node, Exists):
            parts = _duf_block_parts(node, wide_vocab)
            if parts is None:
                return DiamondE(tr(node.body, node.var))
            return tr_diamond(parts)
        raise AssertionError(f"unnormalized node {node!r}")

    def tr_diamond(parts: _BlockParts) -> MufFormula:
        ordered = [parts.free_var] + parts.chain
        rename = dict(zip(ordered, standard_variables(len(ordered))))
        sign_map = {
            Atom(atom.symbol, tuple(rename[a] for a in atom.args)): sign
            for atom, sign in parts.literals
        }
        diagram = diagram_from_signs(wide_vocab, len(ordered), sign_map)
        buckets: dict[str, list[MufFormula]] = {}
        beta: list[MufFormula] = []
        for c in parts.side:
            fv_c = free_variables(c)
            if fv_c:
                v = next(iter(fv_c))
                buckets.setdefault(v, []).append(tr(c, v))
            else:
                beta.append(tr(c, None))
        args = tuple(muf_conjoin(buckets.get(v, [])) for v in ordered)
        diamond = DiamondDelta(diagram, args)
        return muf_conjoin([diamond] + beta) if beta else diamond

    return tr(g, free_var)
