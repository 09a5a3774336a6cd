"""Local matroids of a ranked hypercube and coherent complexes of matroids.

At each cube point a, the map X |-> rho(a) - rho(a + sum_{i in X} e_i) is the
rank function of a matroid on the available directions. The family of all of
them, subject to an axis normalization, a contraction/extension relation and
a bound on path sums, is equivalent data to the rank function itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .hypercube import RankFunction, cube_points, validate_rank_function


class PathInconsistent(ValueError):
    pass


class ConditionViolated(ValueError):
    def __init__(self, condition: str, message: str, *witness):
        super().__init__(f"condition ({condition}): {message}")
        self.condition = condition
        self.witness = tuple(witness)


@dataclass(frozen=True)
class LocalMatroid:
    ground: tuple[int, ...]          # direction indices, sorted
    rank_table: tuple[int, ...]      # indexed by bitmask over ground positions

    def _mask(self, subset: Iterable[int]) -> int:
        mask = 0
        for el in subset:
            mask |= 1 << self.ground.index(el)
        return mask

    def rank(self, subset: Iterable[int]) -> int:
        return self.rank_table[self._mask(subset)]

    @property
    def full_rank(self) -> int:
        return self.rank_table[-1]

    def is_loop(self, element: int) -> bool:
        return self.rank([element]) == 0

    def subsets(self):
        for k in range(len(self.rank_table)):
            yield [self.ground[i] for i in range(len(self.ground)) if k >> i & 1]

    def check_axioms(self) -> None:
        """Matroid rank axioms; a failure here is an internal error for
        matroids derived from valid rank functions."""
        n = len(self.ground)
        rt = self.rank_table
        if rt[0] != 0:
            raise AssertionError("rank of empty set is not 0")
        for mask in range(1 << n):
            for i in range(n):
                if mask >> i & 1:
                    continue
                up = mask | 1 << i
                if not rt[mask] <= rt[up] <= rt[mask] + 1:
                    raise AssertionError("unit-increment axiom fails")
        for a in range(1 << n):
            for b in range(1 << n):
                if rt[a] + rt[b] < rt[a | b] + rt[a & b]:
                    raise AssertionError("submodularity fails")

    def to_json_dict(self) -> dict:
        return {
            "ground": list(self.ground),
            "rank": {str(mask): v for mask, v in enumerate(self.rank_table)},
        }

    @staticmethod
    def from_json_dict(data: dict) -> "LocalMatroid":
        ground = tuple(int(g) for g in data["ground"])
        table = [0] * (1 << len(ground))
        for mask, v in data["rank"].items():
            table[int(mask)] = int(v)
        return LocalMatroid(ground, tuple(table))


@dataclass(frozen=True)
class MatroidComplex:
    delta: int
    r: int
    matroids: dict  # cube point -> LocalMatroid

    def __getitem__(self, point) -> LocalMatroid:
        return self.matroids[tuple(point)]


def local_matroid(rf: RankFunction, a: Sequence[int]) -> LocalMatroid:
    a = tuple(a)
    ground = tuple(i for i in range(rf.delta) if a[i] < rf.r)
    table = []
    for mask in range(1 << len(ground)):
        b = list(a)
        for pos, i in enumerate(ground):
            if mask >> pos & 1:
                b[i] += 1
        table.append(rf[a] - rf[tuple(b)])
    return LocalMatroid(ground, tuple(table))


def coherent_complex_from_rank(rf: RankFunction) -> MatroidComplex:
    return MatroidComplex(
        rf.delta,
        rf.r,
        {a: local_matroid(rf, a) for a in rf.points()},
    )


def export_local_matroids(rf: RankFunction) -> list[tuple[tuple[int, ...], LocalMatroid]]:
    """Dump of every local matroid, for external realizability study."""
    return [(a, local_matroid(rf, a)) for a in rf.points()]


def _step(a: tuple[int, ...], i: int) -> tuple[int, ...]:
    return a[:i] + (a[i] + 1,) + a[i + 1 :]


def rank_function_from_complex(c: MatroidComplex) -> RankFunction:
    """Reconstruct the rank function; validates conditions (i)-(iii) and the
    commutation identity that makes path sums well defined."""
    delta, r = c.delta, c.r
    pts = list(cube_points(delta, r))
    for a in pts:
        if tuple(a) not in c.matroids:
            raise ConditionViolated("i", f"missing matroid at {a}", a)

    # (i): axis normalization.
    for i in range(delta):
        for t in range(r):
            a = tuple(t if k == i else 0 for k in range(delta))
            if c[a].rank([i]) != 1:
                raise ConditionViolated("i", f"rank of {{{i}}} at {a} is not 1", a)

    # (ii): M_{a+e_i} extends/contracts M_a. Checked as the rank identity on
    # subsets avoiding i, which is how the correspondence proof uses it.
    for a in pts:
        ma = c[a]
        for i in ma.ground:
            b = _step(a, i)
            mb = c[b]
            expected_ground = tuple(g for g in ma.ground if a[g] + (g == i) < r)
            if mb.ground != expected_ground:
                raise ConditionViolated("ii", f"ground set mismatch at {b}", a, b)
            ri = ma.rank([i])
            for X in mb.subsets():
                if i in X:
                    continue
                if mb.rank(X) != ma.rank(list(X) + [i]) - ri:
                    raise ConditionViolated(
                        "ii", f"contraction identity fails at {a}+e_{i} on {X}", a, b
                    )

    # commutation identity (path independence of increments).
    for a in pts:
        ma = c[a]
        for i in ma.ground:
            for j in ma.ground:
                if j <= i:
                    continue
                lhs = ma.rank([i]) + c[_step(a, i)].rank([j])
                rhs = ma.rank([j]) + c[_step(a, j)].rank([i])
                if lhs != rhs:
                    raise PathInconsistent(
                        f"commutation fails at {a} for axes {i},{j}"
                    )

    # path sums by dynamic programming; with commutation verified the min and
    # max over paths agree, and the DP covers every increasing path at once.
    lo: dict[tuple[int, ...], int] = {(0,) * delta: 0}
    hi: dict[tuple[int, ...], int] = {(0,) * delta: 0}
    for a in pts:
        if a == (0,) * delta:
            continue
        lo_c, hi_c = [], []
        for i in range(delta):
            if a[i] == 0:
                continue
            prev = a[:i] + (a[i] - 1,) + a[i + 1 :]
            inc = c[prev].rank([i])
            lo_c.append(lo[prev] + inc)
            hi_c.append(hi[prev] + inc)
        lo[a], hi[a] = min(lo_c), max(hi_c)
        if lo[a] != hi[a]:
            raise PathInconsistent(f"path sums to {a} differ: {lo[a]} vs {hi[a]}")

    # (iii): total increments along paths to the far corner stay <= r+1.
    top = (r,) * delta
    if hi[top] > r + 1:
        raise ConditionViolated("iii", f"path sum {hi[top]} exceeds {r + 1}", top)

    values = [r - lo[a] for a in pts]
    return validate_rank_function(values, delta, r)
