"""Finite relational structures, Tarski semantics, and the brute-force oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

from .budgets import Budgets, default_budgets
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
    RelationSymbol,
    Top,
    Vocabulary,
    free_variables,
    vocabulary_of,
)

Assignment = Mapping[str, str]


class SemanticsError(Exception):
    pass


@dataclass(frozen=True)
class Structure:
    domain: tuple[str, ...]
    interp: Mapping[RelationSymbol, frozenset[tuple[str, ...]]]

    def __post_init__(self):
        if not self.domain:
            raise SemanticsError("domain must be nonempty")
        elems = set(self.domain)
        if len(elems) != len(self.domain):
            raise SemanticsError("domain elements must be distinct")
        for sym, tuples in self.interp.items():
            for t in tuples:
                if len(t) != sym.arity:
                    raise SemanticsError(f"tuple {t} has wrong length for {sym}")
                if not elems.issuperset(t):
                    raise SemanticsError(f"tuple {t} uses elements outside the domain")

    def relation(self, sym: RelationSymbol) -> frozenset[tuple[str, ...]]:
        try:
            return self.interp[sym]
        except KeyError:
            raise SemanticsError(f"symbol {sym} not interpreted") from None

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.interp.keys())

    def with_relation(self, sym: RelationSymbol, tuples: frozenset[tuple[str, ...]]) -> "Structure":
        interp = dict(self.interp)
        interp[sym] = tuples
        return Structure(self.domain, interp)


def make_structure(domain, relations: Mapping[RelationSymbol, set | frozenset]) -> Structure:
    return Structure(tuple(domain), {s: frozenset(ts) for s, ts in relations.items()})


class _OrIndex:
    """Dispatch index for a wide disjunction of unary-atom cubes.

    Built for Or-trees whose disjuncts are conjunctions led by unary atoms
    (the shape of Diag_delta). Disjuncts are bucketed by their first unary
    atom on a pivot variable, so evaluation inspects only the disjuncts
    whose pivot predicate actually holds at the assigned element.
    """

    def __init__(self, disjuncts: list[Formula]):
        pivot_counts: dict[str, set[RelationSymbol]] = {}
        keyed: list[tuple[Optional[tuple[str, RelationSymbol]], Formula]] = []
        for d in disjuncts:
            key = None
            for node in _conjuncts(d):
                if isinstance(node, Atom) and node.symbol.arity == 1:
                    key = (node.args[0], node.symbol)
                    pivot_counts.setdefault(node.args[0], set()).add(node.symbol)
                    break
            keyed.append((key, d))
        self.pivot = max(pivot_counts, key=lambda v: len(pivot_counts[v]), default=None)
        self.buckets: dict[RelationSymbol, list[Formula]] = {}
        self.rest: list[Formula] = []
        for key, d in keyed:
            if key is not None and self.pivot is not None and key[0] == self.pivot:
                self.buckets.setdefault(key[1], []).append(d)
            else:
                self.rest.append(d)


def _conjuncts(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, And):
            stack.append(node.right)
            stack.append(node.left)
        else:
            yield node


def _disjuncts(f: Formula) -> list[Formula]:
    out = []
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Or):
            stack.append(node.right)
            stack.append(node.left)
        else:
            out.append(node)
    return out


_OR_INDEX_MIN = 32


class _Checker:
    def __init__(self, structure: Structure):
        self.s = structure
        self.free_cache: dict[int, frozenset[str]] = {}
        self.closed_cache: dict[int, bool] = {}
        self.or_indexes: dict[int, _OrIndex] = {}
        self.unary_true: dict[tuple[str, RelationSymbol], bool] = {}

    def unary_holds(self, sym: RelationSymbol, elem: str) -> bool:
        key = (elem, sym)
        hit = self.unary_true.get(key)
        if hit is None:
            hit = (elem,) in self.s.relation(sym)
            self.unary_true[key] = hit
        return hit

    def eval(self, f: Formula, env: dict[str, str]) -> bool:
        fv = free_variables(f, self.free_cache)
        if not fv:
            hit = self.closed_cache.get(id(f))
            if hit is not None:
                return hit
            val = self._eval(f, env)
            self.closed_cache[id(f)] = val
            return val
        return self._eval(f, env)

    def _eval(self, f: Formula, env: dict[str, str]) -> bool:
        if isinstance(f, Atom):
            try:
                args = tuple(env[a] for a in f.args)
            except KeyError as e:
                raise SemanticsError(f"unbound variable {e.args[0]!r} in {f}") from None
            if f.symbol.arity == 1:
                return self.unary_holds(f.symbol, args[0])
            return args in self.s.relation(f.symbol)
        if isinstance(f, Top):
            return True
        if isinstance(f, Bottom):
            return False
        if isinstance(f, Not):
            return not self.eval(f.sub, env)
        if isinstance(f, And):
            return self.eval(f.left, env) and self.eval(f.right, env)
        if isinstance(f, Or):
            return self._eval_or(f, env)
        if isinstance(f, Implies):
            return (not self.eval(f.left, env)) or self.eval(f.right, env)
        if isinstance(f, Exists):
            return self._eval_quant(f, env, True)
        if isinstance(f, Forall):
            return self._eval_quant(f, env, False)
        raise SemanticsError(f"cannot evaluate {f!r}")

    def _eval_or(self, f: Or, env: dict[str, str]) -> bool:
        index = self.or_indexes.get(id(f))
        if index is None:
            disjuncts = _disjuncts(f)
            if len(disjuncts) < _OR_INDEX_MIN:
                return self.eval(f.left, env) or self.eval(f.right, env)
            index = _OrIndex(disjuncts)
            self.or_indexes[id(f)] = index
        for d in index.rest:
            if self.eval(d, env):
                return True
        pivot_elem = env.get(index.pivot) if index.pivot is not None else None
        if pivot_elem is None:
            candidates = [d for ds in index.buckets.values() for d in ds]
        else:
            candidates = []
            for sym, ds in index.buckets.items():
                if self.unary_holds(sym, pivot_elem):
                    candidates.extend(ds)
        return any(self.eval(d, env) for d in candidates)

    def _eval_quant(self, f: Formula, env: dict[str, str], existential: bool) -> bool:
        var, body = f.var, f.body
        saved = env.get(var, _MISSING)
        try:
            for e in self.s.domain:
                env[var] = e
                val = self.eval(body, env)
                if val == existential:
                    return existential
            return not existential
        finally:
            if saved is _MISSING:
                env.pop(var, None)
            else:
                env[var] = saved


_MISSING = object()


def model_check(structure: Structure, assignment: Assignment, f: Formula,
                checker: Optional[_Checker] = None) -> bool:
    """Tarski truth of f in the structure under the assignment."""
    fv = free_variables(f)
    missing = fv - set(assignment)
    if missing:
        raise SemanticsError(f"assignment misses free variables {sorted(missing)}")
    elems = set(structure.domain)
    for v in fv:
        if assignment[v] not in elems:
            raise SemanticsError(f"assignment maps {v!r} outside the domain")
    chk = checker if checker is not None else _Checker(structure)
    return chk.eval(f, dict(assignment))


def make_checker(structure: Structure) -> _Checker:
    """Reusable evaluator; caches closed-subformula values across calls."""
    return _Checker(structure)


def structure_count(vocab: Vocabulary, size: int) -> int:
    return 2 ** sum(size ** s.arity for s in vocab)


def enumerate_structures(vocab: Vocabulary, size: int,
                         budgets: Optional[Budgets] = None) -> Iterator[Structure]:
    """All structures on the fixed domain {e1..en}, deterministic order."""
    if size < 1:
        raise SemanticsError("domain size must be >= 1")
    budgets = budgets if budgets is not None else default_budgets()
    budgets.check("oracle_structures", structure_count(vocab, size))
    domain = tuple(f"e{i}" for i in range(1, size + 1))
    symbols = vocab.symbols()
    slots: list[tuple[RelationSymbol, list[tuple[str, ...]]]] = []
    for sym in symbols:
        tuples = sorted(_product(domain, sym.arity))
        slots.append((sym, tuples))
    total_bits = sum(len(ts) for _, ts in slots)
    for index in range(2 ** total_bits):
        interp = {}
        offset = 0
        for sym, tuples in slots:
            chosen = frozenset(
                t for j, t in enumerate(tuples) if index >> (offset + j) & 1
            )
            interp[sym] = chosen
            offset += len(tuples)
        yield Structure(domain, interp)


def _product(domain: tuple[str, ...], arity: int) -> list[tuple[str, ...]]:
    out = [()]
    for _ in range(arity):
        out = [t + (e,) for t in out for e in domain]
    return out


@dataclass(frozen=True)
class OracleResult:
    status: str  # "SAT" | "UNKNOWN"
    structure: Optional[Structure] = None
    assignment: Optional[dict[str, str]] = None

    @property
    def sat(self) -> bool:
        return self.status == "SAT"


def oracle_sat(f: Formula, max_size: int, budgets: Optional[Budgets] = None) -> OracleResult:
    """First model of size <= max_size, or UNKNOWN (never claims UNSAT)."""
    fv = sorted(free_variables(f))
    if len(fv) > 1:
        raise SemanticsError(f"oracle_sat needs at most one free variable, got {fv}")
    vocab = vocabulary_of(f)
    for size in range(1, max_size + 1):
        for s in enumerate_structures(vocab, size, budgets):
            chk = _Checker(s)
            if fv:
                for e in s.domain:
                    a = {fv[0]: e}
                    if model_check(s, a, f, chk):
                        return OracleResult("SAT", s, a)
            else:
                if model_check(s, {}, f, chk):
                    return OracleResult("SAT", s, {})
    return OracleResult("UNKNOWN")


def restrict_relation(rel: frozenset[tuple[str, ...]] | set, k: int) -> frozenset:
    """Length-k prefixes of the tuples in rel (the paper's R restricted to k)."""
    rel = frozenset(rel)
    for t in rel:
        if not 1 <= k <= len(t):
            raise SemanticsError(f"k={k} out of range for tuple of length {len(t)}")
    return frozenset(t[:k] for t in rel)


# -- JSON interchange ---------------------------------------------------------

def structure_to_json(s: Structure) -> str:
    relations = {
        sym.name: sorted(list(t) for t in tuples)
        for sym, tuples in sorted(s.interp.items(), key=lambda kv: kv[0].name)
    }
    return json.dumps({"domain": list(s.domain), "relations": relations}, indent=2)


def structure_from_json(text: str) -> Structure:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SemanticsError(f"invalid structure JSON: {e}") from None
    if not isinstance(data, dict) or "domain" not in data:
        raise SemanticsError("structure JSON must be an object with 'domain' and 'relations'")
    domain = data["domain"]
    if not isinstance(domain, list) or not all(isinstance(e, str) for e in domain):
        raise SemanticsError("'domain' must be a list of strings")
    interp: dict[RelationSymbol, frozenset] = {}
    for name, rows in data.get("relations", {}).items():
        if not isinstance(rows, list):
            raise SemanticsError(f"relation {name!r} must be a list of tuples")
        arity = None
        tuples = set()
        for row in rows:
            if not isinstance(row, list) or not all(isinstance(e, str) for e in row):
                raise SemanticsError(f"relation {name!r} has a malformed tuple {row!r}")
            if arity is None:
                arity = len(row)
            elif len(row) != arity:
                raise SemanticsError(f"relation {name!r} has ragged tuples")
            tuples.add(tuple(row))
        if arity is None:
            raise SemanticsError(f"relation {name!r} is empty; arity cannot be inferred")
        interp[RelationSymbol(name, arity)] = frozenset(tuples)
    return Structure(tuple(domain), interp)
