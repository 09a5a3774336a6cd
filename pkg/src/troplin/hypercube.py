"""Ranked hypercubes.

A rank function on the cube [0..r]^delta is an integer table that is
non-increasing for the coordinate-wise order, normalized on the axes
(rho(t*e_i) = r - t), takes values in {-1, ..., r}, and is supermodular:

    rho(a) + rho(b) <= rho(a v b) + rho(a ^ b).

Jumps are the points where the value drops in every available direction;
they behave like the dot positions of a permutation array (see permarray).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

DEFAULT_CELL_CAP = 10**7


def _cell_cap() -> int:
    try:
        return int(os.environ.get("TROPLIN_CAP", DEFAULT_CELL_CAP))
    except ValueError:
        return DEFAULT_CELL_CAP


class RankFunctionError(ValueError):
    """Base class for rank-table rejections; carries witness coordinates."""

    def __init__(self, message: str, *witness):
        super().__init__(message)
        self.witness = tuple(witness)


class OutOfRange(RankFunctionError):
    pass


class AxisNormalization(RankFunctionError):
    pass


class NotMonotone(RankFunctionError):
    pass


class NotSupermodular(RankFunctionError):
    pass


class DimensionMismatch(ValueError):
    pass


class NotPartition(RuntimeError):
    """Internal-consistency failure: top jumps did not partition the axes."""


def meet(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """Coordinate-wise minimum."""
    if len(a) != len(b):
        raise DimensionMismatch(f"meet of points of dimension {len(a)} and {len(b)}")
    return tuple(min(x, y) for x, y in zip(a, b))


def join(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """Coordinate-wise maximum."""
    if len(a) != len(b):
        raise DimensionMismatch(f"join of points of dimension {len(a)} and {len(b)}")
    return tuple(max(x, y) for x, y in zip(a, b))


def cube_points(delta: int, r: int) -> Iterator[tuple[int, ...]]:
    """All points of [0..r]^delta in row-major order."""
    return itertools.product(range(r + 1), repeat=delta)


def _flatten_table(table, delta: int, r: int) -> list[int]:
    """Accept either a flat row-major list or nested sequences."""
    if delta >= 1 and isinstance(table, Sequence) and table and isinstance(table[0], int):
        flat = list(table)
        if len(flat) != (r + 1) ** delta:
            raise ValueError(
                f"flat table has {len(flat)} cells, expected {(r + 1) ** delta}"
            )
        return flat

    flat = []

    def rec(node, depth):
        if depth == delta:
            flat.append(int(node))
            return
        if len(node) != r + 1:
            raise ValueError(f"axis {depth} has extent {len(node)}, expected {r + 1}")
        for child in node:
            rec(child, depth + 1)

    rec(table, 0)
    return flat


@dataclass(frozen=True)
class RankFunction:
    """A validated rank function. Construct through validate_rank_function."""

    delta: int
    r: int
    values: tuple[int, ...]

    def index(self, point: Sequence[int]) -> int:
        idx = 0
        for c in point:
            idx = idx * (self.r + 1) + c
        return idx

    def __getitem__(self, point: Sequence[int]) -> int:
        return self.values[self.index(point)]

    def points(self) -> Iterator[tuple[int, ...]]:
        return cube_points(self.delta, self.r)

    def to_json_dict(self) -> dict:
        return {"delta": self.delta, "r": self.r, "values": list(self.values)}

    @staticmethod
    def from_json_dict(data: dict) -> "RankFunction":
        return validate_rank_function(data["values"], int(data["delta"]), int(data["r"]))


class _Table:
    """Raw table wrapper used during validation (no invariants assumed)."""

    def __init__(self, flat: Sequence[int], delta: int, r: int):
        self.flat = list(flat)
        self.delta = delta
        self.r = r

    def __getitem__(self, point) -> int:
        idx = 0
        for c in point:
            idx = idx * (self.r + 1) + c
        return self.flat[idx]


def _check_range(t: _Table):
    for a in cube_points(t.delta, t.r):
        if not (-1 <= t[a] <= t.r):
            raise OutOfRange(f"value {t[a]} at {a} outside {{-1..{t.r}}}", a)


def _check_axis_normalization(t: _Table):
    for i in range(t.delta):
        for s in range(t.r + 1):
            a = tuple(s if k == i else 0 for k in range(t.delta))
            if t[a] != t.r - s:
                raise AxisNormalization(
                    f"value {t[a]} at {a} on axis {i}, expected {t.r - s}", a
                )


def _check_monotone(t: _Table):
    # one-step monotonicity is equivalent to full monotonicity
    for a in cube_points(t.delta, t.r):
        for i in range(t.delta):
            if a[i] < t.r:
                b = a[:i] + (a[i] + 1,) + a[i + 1 :]
                if t[b] > t[a]:
                    raise NotMonotone(f"{t[a]} at {a} < {t[b]} at {b}", a, b)


def _check_supermodular_local(t: _Table):
    # simplified one-dimension distance-one form: for i != j,
    #   rho(a) - rho(a+e_i) >= rho(a+e_j) - rho(a+e_i+e_j)
    # which propagates to the full inequality on tables satisfying (1)-(3).
    for a in cube_points(t.delta, t.r):
        for i in range(t.delta):
            if a[i] >= t.r:
                continue
            ai = a[:i] + (a[i] + 1,) + a[i + 1 :]
            for j in range(t.delta):
                if j == i or a[j] >= t.r:
                    continue
                aj = a[:j] + (a[j] + 1,) + a[j + 1 :]
                aij = ai[:j] + (ai[j] + 1,) + ai[j + 1 :]
                if t[a] - t[ai] < t[aj] - t[aij]:
                    raise NotSupermodular(
                        f"drop along axis {i} increases from {a} to {aj}", a, aj
                    )


def is_supermodular_all_pairs(table, delta: int, r: int) -> bool:
    """Debug cross-check: the definition verbatim, over all pairs of points."""
    t = _Table(_flatten_table(table, delta, r), delta, r)
    pts = list(cube_points(delta, r))
    for a in pts:
        for b in pts:
            if t[a] + t[b] > t[join(a, b)] + t[meet(a, b)]:
                return False
    return True


def is_weakly_supermodular_11(table, delta: int, r: int) -> bool:
    """The weak supermodularity predicate, in its definitional form.

    For every axis i and every pair x <= y with x_i = y_i < r:
        rho(x) - rho(x + e_i) >= rho(y) - rho(y + e_i).
    The caller is expected to have checked range/normalization/monotonicity.
    """
    t = _Table(_flatten_table(table, delta, r), delta, r)
    pts = list(cube_points(delta, r))
    for i in range(delta):
        for x in pts:
            if x[i] >= r:
                continue
            xi = x[:i] + (x[i] + 1,) + x[i + 1 :]
            dx = t[x] - t[xi]
            for y in pts:
                if y[i] != x[i]:
                    continue
                if any(yc < xc for yc, xc in zip(y, x)):
                    continue
                yi = y[:i] + (y[i] + 1,) + y[i + 1 :]
                if dx < t[y] - t[yi]:
                    return False
    return True


def validate_rank_function(table, delta: int, r: int, *, cell_cap: int | None = None,
                           debug_all_pairs: bool = False) -> RankFunction:
    """Validate a dense integer table as a rank function.

    Checks run in the order range -> axis normalization -> monotonicity ->
    supermodularity so the raised witness is minimal. Supermodularity is
    established through the local (distance-one) inequality; pass
    debug_all_pairs=True to cross-check against the all-pairs definition.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if r < 0:
        raise ValueError("r must be >= 0")
    cap = _cell_cap() if cell_cap is None else cell_cap
    if (r + 1) ** delta > cap:
        raise ValueError(f"table of {(r + 1) ** delta} cells exceeds cap {cap}")
    flat = _flatten_table(table, delta, r)
    t = _Table(flat, delta, r)
    _check_range(t)
    _check_axis_normalization(t)
    _check_monotone(t)
    _check_supermodular_local(t)
    if debug_all_pairs and not is_supermodular_all_pairs(flat, delta, r):
        raise NotSupermodular("all-pairs cross-check failed after local check")
    return RankFunction(delta, r, tuple(flat))


def standard_rank_function(delta: int, r: int) -> RankFunction:
    """rho(i_1, ..., i_delta) = r - sum(i) when sum(i) <= r, else -1."""
    values = []
    for a in cube_points(delta, r):
        s = sum(a)
        values.append(r - s if s <= r else -1)
    return RankFunction(delta, r, tuple(values))


def jumps(rf: RankFunction) -> frozenset[tuple[int, ...]]:
    """Points where the value is >= 0 and drops by one in every direction."""
    out = []
    for a in rf.points():
        v = rf[a]
        if v < 0:
            continue
        ok = True
        for i in range(rf.delta):
            if a[i] < rf.r:
                b = a[:i] + (a[i] + 1,) + a[i + 1 :]
                if rf[b] != v - 1:
                    ok = False
                    break
        if ok:
            out.append(a)
    return frozenset(out)


def partition_top_jumps(rf: RankFunction) -> frozenset[frozenset[int]]:
    """Supports of the nonzero jumps of value r-1; a partition of the axes."""
    if rf.r < 1:
        raise ValueError("partition_top_jumps needs r >= 1")
    parts = []
    for a in jumps(rf):
        if a != (0,) * rf.delta and rf[a] == rf.r - 1:
            parts.append(frozenset(i for i, c in enumerate(a) if c > 0))
    seen: set[int] = set()
    for p in parts:
        if seen & p:
            raise NotPartition(f"overlapping supports in {parts}")
        seen |= p
    if seen != set(range(rf.delta)):
        raise NotPartition(f"supports {parts} do not cover all axes")
    return frozenset(parts)
