"""Monadic translation: preprocessing, the psi*(x) emission, and both model constructions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .budgets import Budgets, BudgetExceeded, default_budgets
from .diagrams import (
    Diagram,
    enumerate_diagrams,
    enumerate_y_atoms,
    leq,
    project,
    standard_variables,
    surjections,
)
from .formulas import (
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    RelationSymbol,
    TOP,
    Top,
    Vocabulary,
    conjoin,
    disjoin,
    exists_block,
    forall_block,
    iff,
    node_count,
)
from .modal import (
    DiamondDelta,
    DiamondE,
    Muf1Evaluator,
    MufAnd,
    MufBottom,
    MufFormula,
    MufNot,
    MufOr,
    MufTop,
    SymbolAtom,
    muf1_diamonds,
    muf1_sub,
    muf1_text,
    muf1_vocabulary,
)
from .structures import Structure
from .torus import Hypertorus, TorusPoint, build_hypertorus


class PreconditionError(Exception):
    """A required conjunct of psi*(x) fails in the given monadic model."""

    def __init__(self, conjunct: str, detail: str):
        super().__init__(f"{conjunct} fails: {detail}")
        self.conjunct = conjunct


def diagram_symbols(m: MufFormula) -> list[RelationSymbol]:
    """Symbols occurring inside diamond diagrams, sorted by name."""
    out: set[RelationSymbol] = set()
    for dd in muf1_diamonds(m):
        for atom in dd.diagram.atoms:
            out.add(atom.symbol)
    return sorted(out, key=lambda s: s.name)


def _fresh_symbol_name(vocab: Vocabulary, base: str = "R0") -> str:
    name = base
    while vocab.get(name) is not None:
        name += "0"
    return name


def _extreme_diagram(vocab: Vocabulary, k: int, positive: bool) -> Diagram:
    variables = standard_variables(k)
    atoms = tuple(enumerate_y_atoms(vocab, variables))
    return Diagram(variables, atoms, tuple(positive for _ in atoms), vocab)


def _has_free_diagram(vocab: Vocabulary, k: int, diamond_diagrams: list[Diagram]) -> bool:
    """Whether some k-ary diagram has no diamond-carrying inverse projection.

    For such a diagram Cons is the empty conjunction and the k-ary part of
    psi_total folds away.
    """
    wide = [eta for eta in diamond_diagrams if eta.arity >= k]

    def free(delta: Diagram) -> bool:
        for eta in wide:
            for f in surjections(eta.arity, k):
                if leq(delta, f, eta):
                    return False
        return True

    for positive in (False, True):
        if free(_extreme_diagram(vocab, k, positive)):
            return True
    return any(free(delta) for delta in enumerate_diagrams(vocab, k))


def preprocess_muf1(m: MufFormula, budgets: Optional[Budgets] = None) -> MufFormula:
    """Normalize to the shape the monadic translation assumes.

    Ensures: some binary diamond occurs; no truth constants occur; every
    symbol in a diagram also occurs negated as a subformula; every diamond
    diagram is total over the final vocabulary.
    """
    budgets = budgets if budgets is not None else default_budgets()
    vocab = muf1_vocabulary(m)
    m = _totalize_diagrams(m, vocab, budgets)

    if not any(d.diagram.arity == 2 for d in muf1_diamonds(m)):
        if not vocab.of_min_arity(2):
            vocab.add(RelationSymbol(_fresh_symbol_name(vocab), 2))
        delta0 = _pick_tautology_diagram(vocab, m, budgets)
        seed = sorted(delta0.positive_symbols() | delta0.negative_symbols(),
                      key=lambda s: s.name)[0]
        theta = MufOr(SymbolAtom(seed), MufNot(SymbolAtom(seed)))
        diamond = DiamondDelta(delta0, (theta, theta))
        m = MufAnd(m, MufOr(diamond, MufNot(diamond)))

    m = _strip_constants(m)
    subs = set(muf1_sub(m))
    extras = []
    for sym in diagram_symbols(m):
        if MufNot(SymbolAtom(sym)) not in subs:
            extras.append(MufOr(SymbolAtom(sym), MufNot(SymbolAtom(sym))))
    for extra in extras:
        m = MufAnd(m, extra)
    return m


def _pick_tautology_diagram(vocab: Vocabulary, m: MufFormula, budgets: Budgets) -> Diagram:
    """A binary diagram for the tautological diamond conjunct.

    Prefers a candidate that keeps a constraint-free diagram in every arity
    class, which lets psi_total fold to a constant; any candidate is sound.
    """
    existing = [d.diagram for d in muf1_diamonds(m)]
    max_arity = max([2] + [d.arity for d in existing])
    candidates = [_extreme_diagram(vocab, 2, False), _extreme_diagram(vocab, 2, True)]
    try:
        for k in range(2, max_arity + 1):
            budgets.check("delta_count", 2 ** len(enumerate_y_atoms(vocab, standard_variables(k))))
        for cand in candidates:
            diagrams = existing + [cand]
            if all(_has_free_diagram(vocab, k, diagrams) for k in range(2, max_arity + 1)):
                return cand
    except BudgetExceeded:
        pass
    return candidates[0]


def _totalize_diagrams(m: MufFormula, vocab: Vocabulary, budgets: Budgets) -> MufFormula:
    """Expand partial diamond diagrams into disjunctions of total ones."""

    def go(node: MufFormula) -> MufFormula:
        if isinstance(node, (SymbolAtom, MufTop, MufBottom)):
            return node
        if isinstance(node, MufNot):
            return MufNot(go(node.sub))
        if isinstance(node, (MufAnd, MufOr)):
            return type(node)(go(node.left), go(node.right))
        if isinstance(node, DiamondE):
            return DiamondE(go(node.sub))
        if isinstance(node, DiamondDelta):
            args = tuple(go(a) for a in node.args)
            full = tuple(enumerate_y_atoms(vocab, node.diagram.variables))
            if node.diagram.atoms == full:
                return DiamondDelta(node.diagram, args)
            signs = node.diagram.sign_map()
            missing = [a for a in full if a not in signs]
            budgets.check("delta_count", 2 ** len(missing))
            expansions = []
            for mask in range(2 ** len(missing)):
                total = dict(signs)
                for i, a in enumerate(missing):
                    total[a] = bool(mask >> i & 1)
                diagram = Diagram(node.diagram.variables, full,
                                  tuple(total[a] for a in full), vocab)
                expansions.append(DiamondDelta(diagram, args))
            out = expansions[0]
            for e in expansions[1:]:
                out = MufOr(out, e)
            return out
        raise ValueError(f"cannot totalize {node!r}")

    return go(m)


def _strip_constants(m: MufFormula) -> MufFormula:
    """Replace truth constants by a tautology / contradiction on a canonical symbol."""
    symbols = diagram_symbols(m) or sorted(muf1_vocabulary(m).symbols(), key=lambda s: s.name)
    if not symbols:
        raise ValueError("cannot eliminate constants from a formula with no symbols")
    seed = SymbolAtom(symbols[0])
    top = MufOr(seed, MufNot(seed))
    bottom = MufAnd(seed, MufNot(seed))

    def go(node: MufFormula) -> MufFormula:
        if isinstance(node, MufTop):
            return top
        if isinstance(node, MufBottom):
            return bottom
        if isinstance(node, SymbolAtom):
            return node
        if isinstance(node, MufNot):
            return MufNot(go(node.sub))
        if isinstance(node, (MufAnd, MufOr)):
            return type(node)(go(node.left), go(node.right))
        if isinstance(node, DiamondE):
            return DiamondE(go(node.sub))
        if isinstance(node, DiamondDelta):
            return DiamondDelta(node.diagram, tuple(go(a) for a in node.args))
        raise ValueError(f"cannot rewrite {node!r}")

    return go(m)


@dataclass
class TranslationContext:
    """Everything the monadic translation fixes for one preprocessed formula."""

    psi: MufFormula
    vocabulary: Vocabulary
    diagram_vocabulary: Vocabulary
    max_arity: int
    dimension: int
    deltas: dict[int, list[Diagram]]
    torus: Hypertorus
    sub: list[MufFormula]
    p_sub: dict[MufFormula, RelationSymbol]
    p_t: dict[TorusPoint, RelationSymbol]
    relation_index: dict[Diagram, int]
    diamonds_by_diagram: dict[Diagram, list[DiamondDelta]]
    diamond_diagrams: list[Diagram]
    _inverse_table: Optional[dict] = field(default=None, repr=False)

    def all_diagrams(self) -> list[Diagram]:
        return [d for k in sorted(self.deltas) for d in self.deltas[k]]

    def inverse_table(self) -> dict[Diagram, list[tuple[Diagram, tuple[int, ...]]]]:
        """Per diagram, its diamond-carrying inverse projections (eta, f).

        Inverse projections through diamond-free diagrams contribute empty
        PreCons conjunctions and are omitted.
        """
        if self._inverse_table is None:
            table: dict[Diagram, list] = {d: [] for d in self.all_diagrams()}
            sign_maps = {d: d.sign_map() for d in self.all_diagrams()}
            for eta in self.diamond_diagrams:
                for k in self.deltas:
                    if k > eta.arity:
                        continue
                    for f in surjections(eta.arity, k):
                        projected = project(eta, f)
                        if projected.contradictory:
                            continue
                        for delta in self.deltas[k]:
                            signs = sign_maps[delta]
                            if all(signs[a] == s for a, s in projected.literals):
                                table[delta].append((eta, f))
            self._inverse_table = table
        return self._inverse_table

    def t_delta(self, diagram: Diagram) -> tuple[tuple[TorusPoint, ...], ...]:
        return self.torus.relation_restricted(self.relation_index[diagram], diagram.arity)

    def vstar(self) -> Vocabulary:
        return Vocabulary(list(self.p_sub.values()) + list(self.p_t.values()))

    def legend(self) -> list[tuple[str, str]]:
        out = [(self.p_sub[a].name, muf1_text(a)) for a in self.sub]
        out.extend((self.p_t[t].name, f"torus point ({t.a},{t.b},{t.c})") for t in self.torus.points)
        return out


def build_context(m: MufFormula, budgets: Optional[Budgets] = None) -> TranslationContext:
    """Fix the diagram tables, the hypertorus, and the fresh unary vocabulary."""
    budgets = budgets if budgets is not None else default_budgets()
    vocab = muf1_vocabulary(m)
    diamonds = muf1_diamonds(m)
    if not any(d.diagram.arity == 2 for d in diamonds):
        raise ValueError("preprocess_muf1 must run first: no binary diamond present")
    sub = muf1_sub(m)
    if any(isinstance(a, (MufTop, MufBottom)) for a in sub):
        raise ValueError("preprocess_muf1 must run first: truth constants present")
    sub_set = set(sub)
    for sym in diagram_symbols(m):
        if MufNot(SymbolAtom(sym)) not in sub_set:
            raise ValueError(f"preprocess_muf1 must run first: !{sym.name} is not a subformula")

    max_arity = max(d.diagram.arity for d in diamonds)
    deltas: dict[int, list[Diagram]] = {}
    total = 0
    for k in range(2, max_arity + 1):
        deltas[k] = enumerate_diagrams(vocab, k)
        total += len(deltas[k])
        budgets.check("delta_count", total)
    dimension = max(len(d) for d in deltas.values())
    assert dimension >= 2
    budgets.check("torus_points", 3 * dimension * max_arity)
    torus = build_hypertorus(dimension, max_arity)

    relation_index: dict[Diagram, int] = {}
    for k, diagrams in deltas.items():
        for i, d in enumerate(diagrams):
            relation_index[d] = i + 1

    p_sub = {a: RelationSymbol(f"P_sub{i}", 1) for i, a in enumerate(sub)}
    p_t = {t: RelationSymbol(f"P_t_{t.label()}", 1) for t in torus.points}

    diamonds_by_diagram: dict[Diagram, list[DiamondDelta]] = {}
    diamond_diagrams: list[Diagram] = []
    for dd in diamonds:
        if dd.diagram not in diamonds_by_diagram:
            diamonds_by_diagram[dd.diagram] = []
            diamond_diagrams.append(dd.diagram)
        diamonds_by_diagram[dd.diagram].append(dd)

    return TranslationContext(
        psi=m,
        vocabulary=vocab,
        diagram_vocabulary=Vocabulary(diagram_symbols(m)),
        max_arity=max_arity,
        dimension=dimension,
        deltas=deltas,
        torus=torus,
        sub=sub,
        p_sub=p_sub,
        p_t=p_t,
        relation_index=relation_index,
        diamonds_by_diagram=diamonds_by_diagram,
        diamond_diagrams=diamond_diagrams,
    )


class _StarBuilder:
    def __init__(self, ctx: TranslationContext, budgets: Budgets):
        self.ctx = ctx
        self.budgets = budgets
        self._pt_atoms: dict[tuple[TorusPoint, str], Atom] = {}

    def p(self, sub: MufFormula, var: str) -> Atom:
        return Atom(self.ctx.p_sub[sub], (var,))

    def pt(self, point: TorusPoint, var: str) -> Atom:
        key = (point, var)
        atom = self._pt_atoms.get(key)
        if atom is None:
            atom = Atom(self.ctx.p_t[point], (var,))
            self._pt_atoms[key] = atom
        return atom

    def precons(self, diagram: Diagram, variables: tuple[str, ...]) -> Formula:
        impls = []
        for dd in self.ctx.diamonds_by_diagram.get(diagram, []):
            premise = conjoin([self.p(chi, v) for chi, v in zip(dd.args, variables)])
            impls.append(Implies(premise, self.p(dd, variables[0])))
        return conjoin(impls)

    def cons(self, diagram: Diagram, variables: tuple[str, ...]) -> Formula:
        parts = []
        for eta, f in self.ctx.inverse_table()[diagram]:
            mapped = tuple(variables[f[i] - 1] for i in range(eta.arity))
            parts.append(self.precons(eta, mapped))
        return conjoin(parts)

    def diag(self, diagram: Diagram, variables: tuple[str, ...]) -> Formula:
        cons = self.cons(diagram, variables)
        tuples = self.ctx.t_delta(diagram)
        self.budgets.check("formula_nodes", len(tuples) * (diagram.arity + 2))
        disjuncts = []
        for tup in tuples:
            cube = [self.pt(point, v) for point, v in zip(tup, variables)]
            disjuncts.append(conjoin(cube + [cons]))
        return disjoin(disjuncts)

    def psi_total(self) -> Formula:
        parts = []
        for k in sorted(self.ctx.deltas):
            variables = standard_variables(k)
            cons_all = [self.cons(d, variables) for d in self.ctx.deltas[k]]
            body = disjoin(cons_all)
            if not isinstance(body, Top):
                parts.append(forall_block(variables, body))
        return conjoin(parts)

    def psi_uniq(self) -> Formula:
        points = self.ctx.torus.points
        self.budgets.check("formula_nodes", 3 * len(points) * (len(points) - 1))
        parts = []
        for i, t in enumerate(points):
            for s in points[i + 1:]:
                parts.append(Not(Exists("x", And(self.pt(t, "x"), self.pt(s, "x")))))
        return conjoin(parts)

    def psi_local(self) -> Formula:
        parts = []
        for diagram in self.ctx.all_diagrams():
            k = diagram.arity
            diagonal = self.precons(diagram, ("x",) * k)
            if isinstance(diagonal, Top):
                continue
            local = conjoin(
                [self.p(SymbolAtom(sym), "x")
                 for sym in sorted(diagram.positive_symbols(), key=lambda s: s.name)]
                + [self.p(MufNot(SymbolAtom(sym)), "x")
                   for sym in sorted(diagram.negative_symbols(), key=lambda s: s.name)]
            )
            parts.append(Forall("x", Implies(local, diagonal)))
        return conjoin(parts)

    def psi_sub(self) -> Formula:
        parts = []
        for alpha in self.ctx.sub:
            if isinstance(alpha, SymbolAtom):
                continue
            if isinstance(alpha, MufNot):
                body = iff(self.p(alpha, "x"), Not(self.p(alpha.sub, "x")))
                parts.append(Forall("x", body))
            elif isinstance(alpha, MufAnd):
                body = iff(self.p(alpha, "x"), And(self.p(alpha.left, "x"), self.p(alpha.right, "x")))
                parts.append(Forall("x", body))
            elif isinstance(alpha, MufOr):
                from .formulas import Or as FOr
                body = iff(self.p(alpha, "x"), FOr(self.p(alpha.left, "x"), self.p(alpha.right, "x")))
                parts.append(Forall("x", body))
            elif isinstance(alpha, DiamondE):
                body = iff(self.p(alpha, "x"), Exists("y", self.p(alpha.sub, "y")))
                parts.append(Forall("x", body))
            elif isinstance(alpha, DiamondDelta):
                k = alpha.diagram.arity
                variables = standard_variables(k)
                inner = conjoin(
                    [self.diag(alpha.diagram, variables)]
                    + [self.p(chi, v) for chi, v in zip(alpha.args, variables)]
                )
                rhs = exists_block(variables[1:], inner)
                parts.append(Forall(variables[0], iff(self.p(alpha, variables[0]), rhs)))
            else:
                raise ValueError(f"unexpected subformula {alpha!r}")
        return conjoin(parts)

    def build(self) -> Formula:
        out = conjoin([
            self.psi_total(),
            self.psi_uniq(),
            self.psi_local(),
            self.psi_sub(),
            self.p(self.ctx.psi, "x"),
        ])
        self.budgets.check("formula_nodes", node_count(out))
        return out


def translate_star(ctx: TranslationContext, budgets: Optional[Budgets] = None) -> Formula:
    """The monadic formula psi*(x) over the fresh unary vocabulary."""
    budgets = budgets if budgets is not None else default_budgets()
    return _StarBuilder(ctx, budgets).build()


def torus_element(u: str, t: TorusPoint) -> str:
    return f"{u}@{t.label()}"


def build_torus_model(s: Structure, ctx: TranslationContext,
                      budgets: Optional[Budgets] = None) -> Structure:
    """The product model on M x T whose unary predicates record truth and address."""
    budgets = budgets if budgets is not None else default_budgets()
    for sym in ctx.vocabulary:
        s.relation(sym)  # raises if uninterpreted
    points = ctx.torus.points
    budgets.check("torus_points", len(s.domain) * len(points))
    evaluator = Muf1Evaluator(s)
    domain = tuple(torus_element(u, t) for u in s.domain for t in points)
    interp: dict[RelationSymbol, frozenset] = {}
    for alpha in ctx.sub:
        extent = evaluator.extent(alpha)
        interp[ctx.p_sub[alpha]] = frozenset(
            (torus_element(u, t),) for u in extent for t in points
        )
    for t in points:
        interp[ctx.p_t[t]] = frozenset((torus_element(u, t),) for u in s.domain)
    return Structure(domain, interp)


class _InverseBuilder:
    def __init__(self, a: Structure, ctx: TranslationContext):
        self.a = a
        self.ctx = ctx
        self.member: dict[MufFormula, frozenset[str]] = {
            alpha: frozenset(e for (e,) in a.relation(sym)) for alpha, sym in ctx.p_sub.items()
        }
        self.tag: dict[str, Optional[TorusPoint]] = {}
        for u in a.domain:
            tags = [t for t, sym in ctx.p_t.items() if (u,) in a.relation(sym)]
            if len(tags) > 1:
                raise PreconditionError("psi_uniq", f"element {u!r} carries torus tags "
                                        f"{[t.label() for t in tags]}")
            self.tag[u] = tags[0] if tags else None
        # tag tuple -> torus relation index, per restriction arity
        self.tag_lookup: dict[int, dict[tuple, int]] = {}
        for k in range(2, ctx.max_arity + 1):
            table: dict[tuple, int] = {}
            for j in range(1, ctx.dimension + 1):
                for seq in ctx.torus.relation_restricted(j, k):
                    table[seq] = j
            self.tag_lookup[k] = table
        self.by_index: dict[int, dict[int, Diagram]] = {
            k: {self.ctx.relation_index[d]: d for d in ds} for k, ds in ctx.deltas.items()
        }

    def precons_holds(self, eta: Diagram, elems: tuple[str, ...]) -> bool:
        for dd in self.ctx.diamonds_by_diagram.get(eta, []):
            if all(u in self.member[chi] for u, chi in zip(elems, dd.args)):
                if elems[0] not in self.member[dd]:
                    return False
        return True

    def cons_holds(self, delta: Diagram, elems: tuple[str, ...]) -> bool:
        for eta, f in self.ctx.inverse_table()[delta]:
            mapped = tuple(elems[f[i] - 1] for i in range(eta.arity))
            if not self.precons_holds(eta, mapped):
                return False
        return True

    def diag_match(self, elems: tuple[str, ...]) -> Optional[Diagram]:
        """The diagram whose Diag the tuple satisfies, if any."""
        k = len(elems)
        tags = tuple(self.tag[u] for u in elems)
        if any(t is None for t in tags):
            return None
        j = self.tag_lookup[k].get(tags)
        if j is None:
            return None
        delta = self.by_index[k].get(j)
        if delta is None:
            return None
        if self.cons_holds(delta, elems):
            return delta
        return None

    def check_preconditions(self) -> None:
        ctx = self.ctx
        domain = self.a.domain
        table = ctx.inverse_table()
        for k in sorted(ctx.deltas):
            if any(not table[d] for d in ctx.deltas[k]):
                continue  # some Cons is the empty conjunction: psi_total holds trivially
            for elems in itertools.product(domain, repeat=k):
                if not any(self.cons_holds(d, elems) for d in ctx.deltas[k]):
                    raise PreconditionError("psi_total", f"tuple {elems} satisfies no Cons")
        for diagram in ctx.all_diagrams():
            pos = diagram.positive_symbols()
            neg = diagram.negative_symbols()
            for u in domain:
                local = all(u in self.member[SymbolAtom(s)] for s in pos) and all(
                    u in self.member[MufNot(SymbolAtom(s))] for s in neg
                )
                if local and not self.precons_holds(diagram, (u,) * diagram.arity):
                    raise PreconditionError("psi_local", f"element {u!r}, diagram "
                                            f"{diagram.describe()}")
        for alpha in ctx.sub:
            got = self.member[alpha]
            if isinstance(alpha, SymbolAtom):
                continue
            if isinstance(alpha, MufNot):
                want = frozenset(domain) - self.member[alpha.sub]
            elif isinstance(alpha, MufAnd):
                want = self.member[alpha.left] & self.member[alpha.right]
            elif isinstance(alpha, MufOr):
                want = self.member[alpha.left] | self.member[alpha.right]
            elif isinstance(alpha, DiamondE):
                want = frozenset(domain) if self.member[alpha.sub] else frozenset()
            elif isinstance(alpha, DiamondDelta):
                want = self._diamond_extent(alpha)
            else:
                raise PreconditionError("psi_sub", f"unexpected subformula {alpha!r}")
            if got != want:
                raise PreconditionError(
                    "psi_sub", f"clause for {muf1_text(alpha)} fails "
                    f"(P has {sorted(got)}, semantics gives {sorted(want)})"
                )

    def _diamond_extent(self, alpha: DiamondDelta) -> frozenset[str]:
        # Walk the diagram's torus tuples and the elements carrying those tags
        # rather than all domain tuples.
        by_tag: dict[TorusPoint, list[str]] = {}
        for u, t in self.tag.items():
            if t is not None:
                by_tag.setdefault(t, []).append(u)
        out = set()
        for seq in self.ctx.t_delta(alpha.diagram):
            pools = [by_tag.get(t, ()) for t in seq]
            if any(not pool for pool in pools):
                continue
            for elems in itertools.product(*pools):
                if not all(u in self.member[chi] for u, chi in zip(elems, alpha.args)):
                    continue
                if self.cons_holds(alpha.diagram, elems):
                    out.add(elems[0])
        return frozenset(out)

    def build(self) -> Structure:
        ctx = self.ctx
        interp: dict[RelationSymbol, set] = {sym: set() for sym in ctx.vocabulary}
        for sym in ctx.vocabulary:
            if sym.arity > 1 and sym not in ctx.diagram_vocabulary:
                raise ValueError(f"{sym} has arity > 1 but occurs in no diagram; "
                                 "preprocess_muf1 must run first")
        for u in self.a.domain:
            for sym in ctx.vocabulary:
                if u in self.member[SymbolAtom(sym)]:
                    interp[sym].add((u,) * sym.arity)
        order = {u: i for i, u in enumerate(self.a.domain)}
        wide_symbols = [s for s in ctx.diagram_vocabulary.symbols()]
        for q in range(2, ctx.max_arity + 1):
            for subset in itertools.combinations(self.a.domain, q):
                chosen = self._classify(subset, q)
                if chosen is None:
                    raise PreconditionError("psi_total",
                                            f"no diagram fits the set {subset}")
                tuple_u, nu = chosen
                for sym in wide_symbols:
                    if sym.arity < q:
                        continue
                    signs = nu.sign_map()
                    xs = standard_variables(q)
                    for f in surjections(sym.arity, q):
                        atom = Atom(sym, tuple(xs[f[i] - 1] for i in range(sym.arity)))
                        if signs[atom]:
                            interp[sym].add(tuple(tuple_u[f[i] - 1] for i in range(sym.arity)))
        return Structure(self.a.domain,
                         {sym: frozenset(ts) for sym, ts in interp.items()})

    def _classify(self, subset: tuple[str, ...], q: int):
        hits = []
        for perm in itertools.permutations(subset):
            delta = self.diag_match(perm)
            if delta is not None:
                hits.append((perm, delta))
        if len(hits) > 1:
            raise AssertionError(f"diagram uniqueness violated on {subset}: {hits}")
        if hits:
            return hits[0]
        for delta in self.ctx.deltas[q]:
            if self.cons_holds(delta, subset):
                return subset, delta
        return None


def build_inverse_model(a: Structure, ctx: TranslationContext) -> Structure:
    """Fold a model of psi*(x)'s closed part back into a relational model."""
    builder = _InverseBuilder(a, ctx)
    builder.check_preconditions()
    return builder.build()


def inverse_builder(a: Structure, ctx: TranslationContext) -> _InverseBuilder:
    """Expose the structured evaluators for tests of the intermediate lemmas."""
    return _InverseBuilder(a, ctx)
