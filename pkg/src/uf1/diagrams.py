"""Uniform k-ary diagrams and their projection algebra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .formulas import Atom, RelationSymbol, Vocabulary
from .structures import Structure


STANDARD_PREFIX = "x"


def standard_variables(k: int) -> tuple[str, ...]:
    """The reserved variable family x1..xk fixing tuple order."""
    return tuple(f"{STANDARD_PREFIX}{i}" for i in range(1, k + 1))


def enumerate_y_atoms(vocab: Vocabulary, variables: Sequence[str]) -> list[Atom]:
    """All atoms whose argument variable set is exactly the given variables.

    Deterministic order: symbols by name, argument tuples lexicographically
    by position in the given variable order.
    """
    variables = tuple(variables)
    if len(set(variables)) != len(variables) or not variables:
        raise ValueError(f"variables must be distinct and nonempty, got {variables}")
    wanted = set(variables)
    out: list[Atom] = []
    for sym in vocab.symbols():
        if sym.arity < len(variables):
            continue
        for args in itertools.product(variables, repeat=sym.arity):
            if set(args) == wanted:
                out.append(Atom(sym, args))
    return out


@dataclass(frozen=True)
class Diagram:
    """Maximal signed choice over all Y-atoms for k distinct variables."""

    variables: tuple[str, ...]
    atoms: tuple[Atom, ...]
    signs: tuple[bool, ...]
    vocabulary: Vocabulary = field(compare=False, hash=False, repr=False, default=None)

    def __post_init__(self):
        if len(self.variables) < 2:
            raise ValueError("diagrams have arity at least two")
        if not self.atoms:
            raise ValueError("the empty set is not a uniform diagram")
        if len(self.atoms) != len(self.signs):
            raise ValueError("one sign per atom required")

    @property
    def arity(self) -> int:
        return len(self.variables)

    @property
    def index(self) -> int:
        """Canonical index: bit i set iff atom i is positive."""
        return sum(1 << i for i, sign in enumerate(self.signs) if sign)

    def sign_map(self) -> dict[Atom, bool]:
        return dict(zip(self.atoms, self.signs))

    def literals(self) -> list[tuple[Atom, bool]]:
        return list(zip(self.atoms, self.signs))

    def positive_symbols(self) -> set[RelationSymbol]:
        return {a.symbol for a, s in zip(self.atoms, self.signs) if s}

    def negative_symbols(self) -> set[RelationSymbol]:
        return {a.symbol for a, s in zip(self.atoms, self.signs) if not s}

    def is_standard(self) -> bool:
        return self.variables == standard_variables(self.arity)

    def describe(self) -> str:
        lits = [("" if s else "!") + f"{a.symbol.name}({','.join(a.args)})"
                for a, s in zip(self.atoms, self.signs)]
        return "{" + ", ".join(lits) + "}"


def enumerate_diagrams(vocab: Vocabulary, k: int) -> list[Diagram]:
    """All standard uniform k-ary diagrams over the vocabulary, index order.

    Empty when no symbol has arity >= k: then there are no Y-atoms, and the
    empty set does not count as a diagram.
    """
    if k < 2:
        raise ValueError("diagram arity must be >= 2")
    variables = standard_variables(k)
    atoms = tuple(enumerate_y_atoms(vocab, variables))
    if not atoms:
        return []
    out = []
    for index in range(2 ** len(atoms)):
        signs = tuple(bool(index >> i & 1) for i in range(len(atoms)))
        out.append(Diagram(variables, atoms, signs, vocab))
    return out


def diagram_from_signs(vocab: Vocabulary, k: int, sign_map: dict[Atom, bool]) -> Diagram:
    """The standard k-ary diagram carrying exactly the given total sign map."""
    variables = standard_variables(k)
    atoms = tuple(enumerate_y_atoms(vocab, variables))
    missing = [a for a in atoms if a not in sign_map]
    if missing or len(sign_map) != len(atoms):
        raise ValueError("sign map is not total over the Y-atoms")
    return Diagram(variables, atoms, tuple(sign_map[a] for a in atoms), vocab)


def surjections(p: int, k: int) -> Iterator[tuple[int, ...]]:
    """All surjections {1..p} -> {1..k} as 1-based image tuples."""
    if p < k:
        return
    full = set(range(1, k + 1))
    for image in itertools.product(range(1, k + 1), repeat=p):
        if set(image) == full:
            yield image


@dataclass(frozen=True)
class ProjectedLiterals:
    """Result of collapsing a diagram's literals along a surjection."""

    literals: tuple[tuple[Atom, bool], ...]
    contradictory: bool


def project(diagram: Diagram, t: Sequence[int]) -> ProjectedLiterals:
    """delta/t: substitute x_i by x_{t(i)}; flags a sign clash when it occurs."""
    if len(t) != diagram.arity:
        raise ValueError(f"surjection must cover all {diagram.arity} positions")
    q = max(t)
    if set(t) != set(range(1, q + 1)):
        raise ValueError(f"{t} is not a surjection onto an initial segment")
    target = standard_variables(q)
    rename = {diagram.variables[i]: target[t[i] - 1] for i in range(diagram.arity)}
    collapsed: dict[Atom, bool] = {}
    contradictory = False
    for atom, sign in zip(diagram.atoms, diagram.signs):
        new_atom = Atom(atom.symbol, tuple(rename[a] for a in atom.args))
        old = collapsed.get(new_atom)
        if old is None:
            collapsed[new_atom] = sign
        elif old != sign:
            contradictory = True
    items = tuple(sorted(collapsed.items(), key=lambda kv: (kv[0].symbol.name, kv[0].args)))
    return ProjectedLiterals(items, contradictory)


def leq(eta: Diagram, f: Sequence[int], delta: Diagram) -> bool:
    """eta <=_f delta: the conjunction of eta entails delta collapsed along f.

    Computed as literal containment: the collapse must be consistent and
    every collapsed literal must appear in eta with the same sign.
    """
    if len(f) != delta.arity or max(f) != eta.arity:
        raise ValueError("surjection shape does not match the diagrams")
    if not eta.is_standard() or not delta.is_standard():
        raise ValueError("leq is defined on standard diagrams")
    projected = project(delta, f)
    if projected.contradictory:
        return False
    signs = eta.sign_map()
    for atom, sign in projected.literals:
        if signs[atom] != sign:
            return False
    return True


def inverse_projections(delta: Diagram, all_diagrams: Sequence[Diagram]
                        ) -> list[tuple[Diagram, tuple[int, ...]]]:
    """All (eta, f) with eta p-ary, p >= arity(delta), f surjective, delta <=_f eta."""
    k = delta.arity
    out = []
    for eta in all_diagrams:
        if eta.arity < k:
            continue
        for f in surjections(eta.arity, k):
            if leq(delta, f, eta):
                out.append((eta, f))
    return out


def diagram_holds(structure: Structure, elements: Sequence[str], diagram: Diagram) -> bool:
    """Whether the element tuple satisfies the diagram under x_i -> elements[i]."""
    if len(elements) != diagram.arity:
        raise ValueError("tuple length must equal the diagram arity")
    env = dict(zip(diagram.variables, elements))
    for atom, sign in zip(diagram.atoms, diagram.signs):
        ground = tuple(env[a] for a in atom.args)
        if (ground in structure.relation(atom.symbol)) != sign:
            return False
    return True


def diagram_extent(structure: Structure, diagram: Diagram) -> set[tuple[str, ...]]:
    """All domain tuples satisfying the diagram (the paper's ||delta||)."""
    out = set()
    for tup in itertools.product(structure.domain, repeat=diagram.arity):
        if diagram_holds(structure, tup, diagram):
            out.add(tup)
    return out
