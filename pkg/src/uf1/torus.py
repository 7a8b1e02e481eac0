"""The n-dimensional hypertorus of arity l: collision-free witness addressing."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True, slots=True, order=True)
class TorusPoint:
    a: int  # 1..n
    b: int  # 1..l
    c: int  # 0..2

    def label(self) -> str:
        return f"{self.a}_{self.b}_{self.c}"


class Hypertorus:
    """Points {1..n} x {1..l} x {0,1,2} with n l-ary good-sequence relations.

    The j-th good sequence from origin (m, m', m'') places, at position i,
    the point (p, p', p'') determined by
        p  - m  == j - 1  (mod n)
        p' - m' == i - 1  (mod l)
        p''- m''== 1      (mod 3).
    """

    def __init__(self, n: int, l: int):
        if n < 2 or l < 2:
            raise ValueError("hypertorus needs n >= 2 and l >= 2")
        self.n = n
        self.l = l
        self.points: tuple[TorusPoint, ...] = tuple(
            TorusPoint(a, b, c)
            for a in range(1, n + 1)
            for b in range(1, l + 1)
            for c in range(3)
        )
        self._relations: dict[int, tuple[tuple[TorusPoint, ...], ...]] = {}
        for j in range(1, n + 1):
            self._relations[j] = tuple(self.good_sequence(t, j) for t in self.points)

    def __len__(self) -> int:
        return len(self.points)

    def good_sequence(self, origin: TorusPoint, j: int) -> tuple[TorusPoint, ...]:
        """The unique tuple of R_j originating at the given point."""
        if not 1 <= j <= self.n:
            raise ValueError(f"j must be in 1..{self.n}")
        m, mp, mpp = origin.a, origin.b, origin.c
        seq = [origin]
        for i in range(2, self.l + 1):
            p = (m - 1 + j - 1) % self.n + 1
            pp = (mp - 1 + i - 1) % self.l + 1
            ppp = (mpp + 1) % 3
            seq.append(TorusPoint(p, pp, ppp))
        return tuple(seq)

    def relation(self, j: int) -> tuple[tuple[TorusPoint, ...], ...]:
        """R_j: one good sequence per origin, in point order."""
        return self._relations[j]

    def relation_restricted(self, j: int, k: int) -> tuple[tuple[TorusPoint, ...], ...]:
        """R_j restricted to length-k prefixes, origin order preserved."""
        if not 2 <= k <= self.l:
            raise ValueError(f"k must be in 2..{self.l}")
        return tuple(seq[:k] for seq in self._relations[j])


@lru_cache(maxsize=8)
def build_hypertorus(n: int, l: int) -> Hypertorus:
    return Hypertorus(n, l)
