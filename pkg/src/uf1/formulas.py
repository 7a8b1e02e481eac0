"""First-order formula AST over a relational vocabulary (no equality, no functions)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional


class FormulaError(Exception):
    pass


class ArityConflict(FormulaError):
    def __init__(self, name: str, arity_a: int, arity_b: int):
        super().__init__(f"relation symbol {name!r} used with arities {arity_a} and {arity_b}")
        self.name = name
        self.arities = (arity_a, arity_b)


@dataclass(frozen=True, slots=True, order=True)
class RelationSymbol:
    name: str
    arity: int

    def __post_init__(self):
        if self.arity < 1:
            raise FormulaError(f"arity of {self.name!r} must be >= 1, got {self.arity}")

    def __str__(self):
        return f"{self.name}/{self.arity}"


class Vocabulary:
    """Finite set of relation symbols; one arity per name."""

    def __init__(self, symbols: Iterable[RelationSymbol] = ()):
        self._by_name: dict[str, RelationSymbol] = {}
        for sym in symbols:
            self.add(sym)

    def add(self, sym: RelationSymbol) -> None:
        old = self._by_name.get(sym.name)
        if old is not None and old.arity != sym.arity:
            raise ArityConflict(sym.name, old.arity, sym.arity)
        self._by_name[sym.name] = sym

    def get(self, name: str) -> Optional[RelationSymbol]:
        return self._by_name.get(name)

    def symbols(self) -> list[RelationSymbol]:
        return sorted(self._by_name.values(), key=lambda s: s.name)

    def of_min_arity(self, arity: int) -> list[RelationSymbol]:
        return [s for s in self.symbols() if s.arity >= arity]

    def __contains__(self, sym: RelationSymbol) -> bool:
        return self._by_name.get(sym.name) == sym

    def __iter__(self) -> Iterator[RelationSymbol]:
        return iter(self.symbols())

    def __len__(self) -> int:
        return len(self._by_name)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self._by_name == other._by_name

    def __repr__(self):
        return "{" + ", ".join(str(s) for s in self.symbols()) + "}"


class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    symbol: RelationSymbol
    args: tuple[str, ...]

    def __post_init__(self):
        if len(self.args) != self.symbol.arity:
            raise FormulaError(
                f"{self.symbol} applied to {len(self.args)} arguments {self.args}"
            )


@dataclass(frozen=True, slots=True)
class Top(Formula):
    pass


@dataclass(frozen=True, slots=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True, slots=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    var: str
    body: Formula


TOP = Top()
BOTTOM = Bottom()

_BINARY = (And, Or, Implies)


def conjoin(parts: Iterable[Formula]) -> Formula:
    """Balanced conjunction; drops ⊤, collapses on ⊥, ⊤ when empty."""
    items = [p for p in parts if not isinstance(p, Top)]
    if any(isinstance(p, Bottom) for p in items):
        return BOTTOM
    return _balanced(items, And, TOP)


def disjoin(parts: Iterable[Formula]) -> Formula:
    """Balanced disjunction; drops ⊥, collapses on ⊤, ⊥ when empty."""
    items = [p for p in parts if not isinstance(p, Bottom)]
    if any(isinstance(p, Top) for p in items):
        return TOP
    return _balanced(items, Or, BOTTOM)


def _balanced(items: list[Formula], node, empty: Formula) -> Formula:
    # Balanced tree keeps recursion depth logarithmic for very wide families.
    if not items:
        return empty
    while len(items) > 1:
        items = [
            node(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def iff(a: Formula, b: Formula) -> Formula:
    return And(Implies(a, b), Implies(b, a))


def exists_block(variables: Iterable[str], body: Formula) -> Formula:
    f = body
    for v in reversed(list(variables)):
        f = Exists(v, f)
    return f


def forall_block(variables: Iterable[str], body: Formula) -> Formula:
    f = body
    for v in reversed(list(variables)):
        f = Forall(v, f)
    return f


def iter_nodes(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal; shared subterms visited once."""
    seen: set[int] = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        if isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, _BINARY):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, (Exists, Forall)):
            stack.append(node.body)


def node_count(f: Formula) -> int:
    """Distinct nodes (shared subterms counted once)."""
    return sum(1 for _ in iter_nodes(f))


def free_variables(f: Formula, _cache: Optional[dict[int, frozenset[str]]] = None) -> frozenset[str]:
    cache = _cache if _cache is not None else {}

    def go(node: Formula) -> frozenset[str]:
        hit = cache.get(id(node))
        if hit is not None:
            return hit
        if isinstance(node, Atom):
            out = frozenset(node.args)
        elif isinstance(node, (Top, Bottom)):
            out = frozenset()
        elif isinstance(node, Not):
            out = go(node.sub)
        elif isinstance(node, _BINARY):
            out = go(node.left) | go(node.right)
        else:
            out = go(node.body) - {node.var}
        cache[id(node)] = out
        return out

    return go(f)


def bound_variables(f: Formula) -> frozenset[str]:
    return frozenset(n.var for n in iter_nodes(f) if isinstance(n, (Exists, Forall)))


def fresh_variable(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    for i in itertools.count(2):
        cand = f"{base}{i}"
        if cand not in taken:
            return cand
    raise AssertionError


def substitute(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Replace free variables, renaming bound variables to avoid capture."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return f
    taken = set(free_variables(f)) | set(bound_variables(f)) | set(mapping.values())

    def go(node: Formula, m: Mapping[str, str]) -> Formula:
        if isinstance(node, Atom):
            args = tuple(m.get(a, a) for a in node.args)
            return node if args == node.args else Atom(node.symbol, args)
        if isinstance(node, (Top, Bottom)):
            return node
        if isinstance(node, Not):
            return Not(go(node.sub, m))
        if isinstance(node, _BINARY):
            return type(node)(go(node.left, m), go(node.right, m))
        inner = {k: v for k, v in m.items() if k != node.var}
        if not inner:
            return node
        if node.var in inner.values():
            new_var = fresh_variable(node.var, taken)
            taken.add(new_var)
            inner[node.var] = new_var
            return type(node)(new_var, go(node.body, inner))
        return type(node)(node.var, go(node.body, inner))

    return go(f, mapping)


def subformulas(f: Formula) -> list[Formula]:
    """All subformulas in pre-order, structurally deduplicated."""
    out: list[Formula] = []
    seen: set[Formula] = set()

    def go(node: Formula) -> None:
        if node in seen:
            return
        seen.add(node)
        out.append(node)
        if isinstance(node, Not):
            go(node.sub)
        elif isinstance(node, _BINARY):
            go(node.left)
            go(node.right)
        elif isinstance(node, (Exists, Forall)):
            go(node.body)

    go(f)
    return out


def vocabulary_of(f: Formula) -> Vocabulary:
    """All symbols occurring in f; raises ArityConflict on inconsistent use."""
    vocab = Vocabulary()
    for node in iter_nodes(f):
        if isinstance(node, Atom):
            vocab.add(node.symbol)
    return vocab


# -- printing ---------------------------------------------------------------

_PREC_QUANT = 0
_PREC_IMPLIES = 1
_PREC_OR = 2
_PREC_AND = 3
_PREC_NOT = 4
_PREC_ATOM = 5


def _prec(f: Formula) -> int:
    if isinstance(f, (Exists, Forall)):
        return _PREC_QUANT
    if isinstance(f, Implies):
        return _PREC_IMPLIES
    if isinstance(f, Or):
        return _PREC_OR
    if isinstance(f, And):
        return _PREC_AND
    if isinstance(f, Not):
        return _PREC_NOT
    return _PREC_ATOM


def print_formula(f: Formula) -> str:
    """Concrete syntax that re-parses to a structurally identical AST."""
    parts: list[str] = []

    def emit(node: Formula, parent_prec: int, right_of_same: bool) -> None:
        # right_of_same: parenthesize an equal-precedence child sitting where the
        # grammar's associativity would otherwise regroup it.
        prec = _prec(node)
        need = prec < parent_prec or (prec == parent_prec and right_of_same)
        if need:
            parts.append("(")
        if isinstance(node, Atom):
            parts.append(node.symbol.name)
            parts.append("(")
            parts.append(",".join(node.args))
            parts.append(")")
        elif isinstance(node, Top):
            parts.append("true")
        elif isinstance(node, Bottom):
            parts.append("false")
        elif isinstance(node, Not):
            parts.append("!")
            emit(node.sub, _PREC_NOT, False)
        elif isinstance(node, And):
            emit(node.left, _PREC_AND, False)
            parts.append(" & ")
            emit(node.right, _PREC_AND, True)
        elif isinstance(node, Or):
            emit(node.left, _PREC_OR, False)
            parts.append(" | ")
            emit(node.right, _PREC_OR, True)
        elif isinstance(node, Implies):
            # '->' is right-associative: the left operand regroups, not the right.
            emit(node.left, _PREC_IMPLIES + 1, False)
            parts.append(" -> ")
            emit(node.right, _PREC_IMPLIES, False)
        elif isinstance(node, Exists):
            parts.append(f"exists {node.var}. ")
            emit(node.body, _PREC_QUANT, False)
        elif isinstance(node, Forall):
            parts.append(f"forall {node.var}. ")
            emit(node.body, _PREC_QUANT, False)
        else:
            raise FormulaError(f"cannot print {node!r}")
        if need:
            parts.append(")")

    emit(f, _PREC_QUANT, False)
    return "".join(parts)
