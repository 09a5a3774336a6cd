"""Dot arrays and the bijection between permutation arrays and rank functions.

A dot array is a finite set of dotted positions inside a box. The upper
principal subarray P[x] consists of the dots >= x coordinate-wise; positions
are reported offset-subtracted, which does not affect ranks. A permutation
array is a totally rankable square
array of full rank with no dotted redundant position; those are exactly the
jump patterns of rank functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .hypercube import (
    RankFunction,
    jumps,
    meet,
    validate_rank_function,
)


class OutOfBounds(ValueError):
    pass


class ShapeNotSquare(ValueError):
    pass


class NotPermutationArray(ValueError):
    pass


@dataclass(frozen=True)
class DotArray:
    shape: tuple[int, ...]  # extents per axis
    dots: frozenset[tuple[int, ...]]

    def __post_init__(self):
        for d in self.dots:
            if len(d) != len(self.shape):
                raise OutOfBounds(f"dot {d} has wrong dimension")
            if any(c < 0 or c >= e for c, e in zip(d, self.shape)):
                raise OutOfBounds(f"dot {d} outside shape {self.shape}")

    @staticmethod
    def make(shape: Sequence[int], dots: Iterable[Sequence[int]]) -> "DotArray":
        return DotArray(tuple(shape), frozenset(tuple(d) for d in dots))

    def positions(self):
        return itertools.product(*(range(e) for e in self.shape))

    def upper_dots(self, origin: Sequence[int]) -> list[tuple[int, ...]]:
        """Dots of the upper principal subarray P[origin] (absolute coords)."""
        return [d for d in self.dots if all(dc >= oc for dc, oc in zip(d, origin))]

    def to_json_dict(self) -> dict:
        return {"shape": list(self.shape), "dots": sorted(list(d) for d in self.dots)}

    @staticmethod
    def from_json_dict(data: dict) -> "DotArray":
        return DotArray.make(data["shape"], data["dots"])


def rank_along_axis(P: DotArray, origin: Sequence[int], axis: int) -> int:
    """Number of distinct axis-coordinates hit by dots of P[origin].

    `axis` is 0-based.
    """
    origin = tuple(origin)
    if len(origin) != len(P.shape) or any(
        c < 0 or c >= e for c, e in zip(origin, P.shape)
    ):
        raise OutOfBounds(f"origin {origin} outside shape {P.shape}")
    if not 0 <= axis < len(P.shape):
        raise OutOfBounds(f"axis {axis} out of range")
    return len({d[axis] for d in P.upper_dots(origin)})


def is_totally_rankable(P: DotArray) -> bool:
    """True when every upper principal subarray has an axis-independent rank."""
    delta = len(P.shape)
    for origin in P.positions():
        ups = P.upper_dots(origin)
        ranks = {len({d[i] for d in ups}) for i in range(delta)}
        if len(ranks) != 1:
            return False
    return True


def rank_at(P: DotArray, origin: Sequence[int]) -> int:
    """Rank of P[origin] for a totally rankable array (axis 0 by convention)."""
    return rank_along_axis(P, origin, 0)


def redundant_positions(P: DotArray) -> frozenset[tuple[int, ...]]:
    """Positions x equal to the meet of >= 2 dots, each != x and sharing a
    coordinate with x.

    Every dot contributing to such a meet is >= x, so it is enough to take the
    meet of all qualifying dots above x.
    """
    out = []
    for x in P.positions():
        ys = [
            d
            for d in P.dots
            if d != x
            and all(dc >= xc for dc, xc in zip(d, x))
            and any(dc == xc for dc, xc in zip(d, x))
        ]
        if len(ys) < 2:
            continue
        m = ys[0]
        for y in ys[1:]:
            m = meet(m, y)
        if m == x:
            out.append(x)
    return frozenset(out)


def is_permutation_array(P: DotArray) -> bool:
    if len(set(P.shape)) != 1:
        raise ShapeNotSquare(f"shape {P.shape} is not square")
    extent = P.shape[0]
    if not is_totally_rankable(P):
        return False
    if rank_at(P, (0,) * len(P.shape)) != extent:
        return False
    if P.dots & redundant_positions(P):
        return False
    return True


def rank_function_from_array(P: DotArray) -> RankFunction:
    """rho_P(a) = rank(P[a]) - 1; inverse of array_from_rank_function."""
    if not is_permutation_array(P):
        raise NotPermutationArray("input is not a permutation array")
    r = P.shape[0] - 1
    delta = len(P.shape)
    values = [rank_at(P, a) - 1 for a in P.positions()]
    return validate_rank_function(values, delta, r)


def array_from_rank_function(rf: RankFunction) -> DotArray:
    """Dot the jumps, then strip the redundant ones."""
    J = jumps(rf)
    shape = (rf.r + 1,) * rf.delta
    dotted = DotArray(shape, J)
    return DotArray(shape, J - redundant_positions(dotted))
