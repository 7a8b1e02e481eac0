"""Modal normal form: diamonds indexed by diagrams plus the universal modality."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .diagrams import Diagram
from .formulas import RelationSymbol, Vocabulary
from .structures import Structure


class MufFormula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class SymbolAtom(MufFormula):
    symbol: RelationSymbol


@dataclass(frozen=True, slots=True)
class MufTop(MufFormula):
    pass


@dataclass(frozen=True, slots=True)
class MufBottom(MufFormula):
    pass


@dataclass(frozen=True, slots=True)
class MufNot(MufFormula):
    sub: MufFormula


@dataclass(frozen=True, slots=True)
class MufAnd(MufFormula):
    left: MufFormula
    right: MufFormula


@dataclass(frozen=True, slots=True)
class MufOr(MufFormula):
    left: MufFormula
    right: MufFormula


@dataclass(frozen=True, slots=True)
class DiamondDelta(MufFormula):
    diagram: Diagram
    args: tuple[MufFormula, ...]

    def __post_init__(self):
        if len(self.args) != self.diagram.arity:
            raise ValueError("diamond needs one argument per diagram variable")
        if not self.diagram.is_standard():
            raise ValueError("diamond diagrams must be standard")


@dataclass(frozen=True, slots=True)
class DiamondE(MufFormula):
    sub: MufFormula


MUF_TOP = MufTop()
MUF_BOTTOM = MufBottom()

_MUF_BINARY = (MufAnd, MufOr)


def muf1_sub(m: MufFormula) -> list[MufFormula]:
    """All subterms in pre-order, structurally deduplicated."""
    out: list[MufFormula] = []
    seen: set[MufFormula] = set()

    def go(node: MufFormula) -> None:
        if node in seen:
            return
        seen.add(node)
        out.append(node)
        if isinstance(node, (MufNot, DiamondE)):
            go(node.sub)
        elif isinstance(node, _MUF_BINARY):
            go(node.left)
            go(node.right)
        elif isinstance(node, DiamondDelta):
            for a in node.args:
                go(a)

    go(m)
    return out


def muf1_diamonds(m: MufFormula) -> list[DiamondDelta]:
    return [n for n in muf1_sub(m) if isinstance(n, DiamondDelta)]


def muf1_diagrams(m: MufFormula) -> list[Diagram]:
    """Distinct diagrams occurring in diamonds, first-occurrence order."""
    out: list[Diagram] = []
    seen: set[Diagram] = set()
    for d in muf1_diamonds(m):
        if d.diagram not in seen:
            seen.add(d.diagram)
            out.append(d.diagram)
    return out


def muf1_vocabulary(m: MufFormula) -> Vocabulary:
    """Symbols occurring as atoms or inside diamond diagrams."""
    vocab = Vocabulary()
    for node in muf1_sub(m):
        if isinstance(node, SymbolAtom):
            vocab.add(node.symbol)
        elif isinstance(node, DiamondDelta):
            for atom in node.diagram.atoms:
                vocab.add(atom.symbol)
    return vocab


def muf1_text(m: MufFormula) -> str:
    """Text form for CLI dumps: <D k#idx>(...) diamonds, <E> for the universal modality."""
    if isinstance(m, SymbolAtom):
        return m.symbol.name
    if isinstance(m, MufTop):
        return "true"
    if isinstance(m, MufBottom):
        return "false"
    if isinstance(m, MufNot):
        return f"!{_wrap(m.sub)}"
    if isinstance(m, MufAnd):
        return f"{_wrap(m.left)} & {_wrap(m.right)}"
    if isinstance(m, MufOr):
        return f"{_wrap(m.left)} | {_wrap(m.right)}"
    if isinstance(m, DiamondDelta):
        inner = ",".join(muf1_text(a) for a in m.args)
        return f"<D {m.diagram.arity}#{m.diagram.index}>({inner})"
    if isinstance(m, DiamondE):
        return f"<E>{_wrap(m.sub)}"
    raise ValueError(f"cannot print {m!r}")


def _wrap(m: MufFormula) -> str:
    text = muf1_text(m)
    if isinstance(m, (MufAnd, MufOr)):
        return f"({text})"
    return text


class Muf1Evaluator:
    """Pointed-model evaluation with per-diagram extent caching."""

    def __init__(self, structure: Structure):
        self.s = structure
        self._by_head: dict[Diagram, dict[str, list[tuple[str, ...]]]] = {}

    def _heads(self, diagram: Diagram) -> dict[str, list[tuple[str, ...]]]:
        hit = self._by_head.get(diagram)
        if hit is not None:
            return hit
        by_head: dict[str, list[tuple[str, ...]]] = {e: [] for e in self.s.domain}
        env: dict[str, str] = {}
        variables = diagram.variables
        literals = diagram.literals()
        for tup in itertools.product(self.s.domain, repeat=diagram.arity):
            for v, e in zip(variables, tup):
                env[v] = e
            ok = True
            for atom, sign in literals:
                ground = tuple(env[a] for a in atom.args)
                if (ground in self.s.relation(atom.symbol)) != sign:
                    ok = False
                    break
            if ok:
                by_head[tup[0]].append(tup)
        self._by_head[diagram] = by_head
        return by_head

    def eval(self, w: str, m: MufFormula) -> bool:
        if isinstance(m, SymbolAtom):
            return (w,) * m.symbol.arity in self.s.relation(m.symbol)
        if isinstance(m, MufTop):
            return True
        if isinstance(m, MufBottom):
            return False
        if isinstance(m, MufNot):
            return not self.eval(w, m.sub)
        if isinstance(m, MufAnd):
            return self.eval(w, m.left) and self.eval(w, m.right)
        if isinstance(m, MufOr):
            return self.eval(w, m.left) or self.eval(w, m.right)
        if isinstance(m, DiamondDelta):
            return self.witness(w, m) is not None
        if isinstance(m, DiamondE):
            return any(self.eval(u, m.sub) for u in self.s.domain)
        raise ValueError(f"cannot evaluate {m!r}")

    def witness(self, w: str, m: DiamondDelta) -> Optional[tuple[str, ...]]:
        """A tuple in the diagram's extent starting at w whose members satisfy the arguments."""
        for tup in self._heads(m.diagram).get(w, ()):
            if all(self.eval(u, arg) for u, arg in zip(tup, m.args)):
                return tup
        return None

    def extent(self, m: MufFormula) -> frozenset[str]:
        return frozenset(u for u in self.s.domain if self.eval(u, m))


def eval_muf1(structure: Structure, w: str, m: MufFormula) -> bool:
    """Pointed-model truth; one-shot wrapper over Muf1Evaluator."""
    return Muf1Evaluator(structure).eval(w, m)
