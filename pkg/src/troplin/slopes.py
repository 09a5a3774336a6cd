"""Slope structures on metric graphs.

A slope structure of order r fixes, for every oriented edge, a strictly
increasing list of r+1 allowed integer slopes (antisymmetric under
orientation reversal) and, at every vertex, a rank function on the cube over
the incident directions. Interior points implicitly carry the standard rank
function. Compatibility of a PL function, the crude rank search, and bounded
enumeration of structures live here.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .hypercube import (
    RankFunction,
    RankFunctionError,
    jumps,
    standard_rank_function,
    validate_rank_function,
)
from .metricgraph import (
    Divisor,
    GraphPoint,
    MetricGraph,
    PLFunction,
    Refinement,
    V,
    frac,
    refine_model,
)


class AntisymmetryViolated(ValueError):
    pass


class BadVertexRank(ValueError):
    pass


class EdgeListLengthMismatch(ValueError):
    pass


class GridTooCoarse(ValueError):
    pass


class ExplosionGuard(RuntimeError):
    pass


def _default_cap() -> int:
    try:
        return int(os.environ.get("TROPLIN_CAP", 100000))
    except ValueError:
        return 100000


class SlopeStructure:
    """Validated slope structure. Build through validate_slope_structure."""

    def __init__(self, graph: MetricGraph, r: int,
                 fwd_slopes: Sequence[Sequence[int]],
                 vertex_ranks: dict):
        self.graph = graph
        self.r = r
        self.fwd_slopes: tuple[tuple[int, ...], ...] = tuple(
            tuple(s) for s in fwd_slopes
        )
        self.vertex_ranks: dict[str, RankFunction] = dict(vertex_ranks)
        self._jump_cache: dict[str, frozenset] = {}

    def slope_list(self, germ: tuple[int, int]) -> tuple[int, ...]:
        e, sign = germ
        fwd = self.fwd_slopes[e]
        if sign == +1:
            return fwd
        return tuple(-s for s in reversed(fwd))

    def slope_index(self, germ: tuple[int, int], slope: int) -> Optional[int]:
        lst = self.slope_list(germ)
        try:
            return lst.index(slope)
        except ValueError:
            return None

    def jumps_at(self, vertex: str) -> frozenset:
        if vertex not in self._jump_cache:
            self._jump_cache[vertex] = jumps(self.vertex_ranks[vertex])
        return self._jump_cache[vertex]

    def germ_order(self, vertex: str) -> tuple[tuple[int, int], ...]:
        return self.graph.germs(vertex)

    def to_json_dict(self) -> dict:
        edge_slopes = {}
        counts: dict[tuple[str, str], int] = {}
        for i, e in enumerate(self.graph.edges):
            key = f"{e.u}->{e.v}"
            n = counts.get((e.u, e.v), 0)
            counts[(e.u, e.v)] = n + 1
            if sum(1 for x in self.graph.edges if (x.u, x.v) == (e.u, e.v)) > 1:
                key = f"{key}#{n}"
            edge_slopes[key] = list(self.fwd_slopes[i])
        return {
            "model": self.graph.to_json_dict(),
            "r": self.r,
            "edge_slopes": edge_slopes,
            "vertex_ranks": {
                v: rf.to_json_dict() for v, rf in sorted(self.vertex_ranks.items())
            },
        }

    @staticmethod
    def from_json_dict(data: dict) -> "SlopeStructure":
        graph = MetricGraph.from_json_dict(data["model"])
        return validate_slope_structure(
            graph, data["edge_slopes"], data["vertex_ranks"], int(data["r"])
        )


def _parse_edge_key(graph: MetricGraph, key) -> tuple[int, int]:
    """Resolve 'u->v' / 'u->v#k' / (edge, sign) keys to (edge, sign)."""
    if isinstance(key, tuple):
        return key
    name, _, idx = key.partition("#")
    u, _, v = name.partition("->")
    k = int(idx) if idx else 0
    n = 0
    for i, e in enumerate(graph.edges):
        if (e.u, e.v) == (u, v) or (e.v, e.u) == (u, v):
            if n == k:
                return (i, +1 if (e.u, e.v) == (u, v) else -1)
            n += 1
    raise ValueError(f"no edge matching key {key!r}")


def validate_slope_structure(graph: MetricGraph, edge_slopes: dict,
                             vertex_ranks: dict, r: int) -> SlopeStructure:
    """Check antisymmetry, list lengths and vertex rank functions."""
    if not graph.is_simple():
        raise ValueError("slope structures need a simple model; "
                         "subdivide with MetricGraph.simple_model first")
    fwd: list = [None] * len(graph.edges)
    rev_given: dict[int, tuple[int, ...]] = {}
    for key, lst in edge_slopes.items():
        e, sign = _parse_edge_key(graph, key)
        lst = tuple(int(s) for s in lst)
        if len(lst) != r + 1:
            raise EdgeListLengthMismatch(
                f"edge {key!r}: {len(lst)} slopes, expected {r + 1}"
            )
        if any(lst[i] >= lst[i + 1] for i in range(len(lst) - 1)):
            raise ValueError(f"edge {key!r}: slopes must be strictly increasing")
        if sign == +1:
            fwd[e] = lst
        else:
            rev_given[e] = lst
    for e, lst in rev_given.items():
        derived_fwd = tuple(-s for s in reversed(lst))
        if fwd[e] is None:
            fwd[e] = derived_fwd
        elif fwd[e] != derived_fwd:
            i = next(
                i for i in range(r + 1)
                if fwd[e][i] + lst[r - i] != 0
            )
            raise AntisymmetryViolated(
                f"edge {e}: s_{i} forward + s_{r - i} backward = "
                f"{fwd[e][i] + lst[r - i]} != 0"
            )
    for i, lst in enumerate(fwd):
        if lst is None:
            raise ValueError(f"edge {i} has no slope list")

    ranks: dict[str, RankFunction] = {}
    for name in graph.vertices:
        if name not in vertex_ranks:
            raise BadVertexRank(f"missing rank function at vertex {name}")
        raw = vertex_ranks[name]
        d = graph.degree(name)
        try:
            if isinstance(raw, RankFunction):
                rf = raw
                if rf.delta != d or rf.r != r:
                    raise BadVertexRank(
                        f"vertex {name}: rank function has (delta={rf.delta}, "
                        f"r={rf.r}), expected ({d}, {r})"
                    )
            elif isinstance(raw, dict):
                rf = validate_rank_function(raw["values"], int(raw["delta"]), int(raw["r"]))
                if rf.delta != d or rf.r != r:
                    raise BadVertexRank(f"vertex {name}: wrong dimensions")
            else:
                rf = validate_rank_function(raw, d, r)
        except RankFunctionError as exc:
            raise BadVertexRank(f"vertex {name}: {exc}") from exc
        ranks[name] = rf
    return SlopeStructure(graph, r, fwd, ranks)


# -- compatibility -----------------------------------------------------------


def _edge_segment_indices(S: SlopeStructure, f: PLFunction, edge: int):
    """Slope indices (forward list) of f's segments on an edge, or None."""
    fwd = S.fwd_slopes[edge]
    out = []
    bps = f.edge_bps[edge]
    for k in range(1, len(bps)):
        s = (bps[k][1] - bps[k - 1][1]) / (bps[k][0] - bps[k - 1][0])
        s = int(s)
        if s not in fwd:
            return None
        out.append(fwd.index(s))
    return out


def is_compatible(f: PLFunction, S: SlopeStructure) -> bool:
    """Every outgoing slope allowed, and every slope vector a jump."""
    per_edge = []
    for i in range(len(S.graph.edges)):
        idxs = _edge_segment_indices(S, f, i)
        if idxs is None:
            return False
        # interior points: standard rank function; the jump condition reads
        # index(after) + (r - index(before)) <= r
        for k in range(1, len(idxs)):
            if idxs[k] > idxs[k - 1]:
                return False
        per_edge.append(idxs)
    for name in S.graph.vertices:
        vec = []
        for e, sign in S.germ_order(name):
            vec.append(per_edge[e][0] if sign == +1 else S.r - per_edge[e][-1])
        if tuple(vec) not in S.jumps_at(name):
            return False
    return True


def in_rat_D_S(f: PLFunction, D: Divisor, S: SlopeStructure) -> bool:
    return is_compatible(f, S) and (D + f.divisor()).is_effective()


def translate_structure(S: SlopeStructure, f: PLFunction) -> SlopeStructure:
    """The structure shifted by the slopes of f (edge-wise linear f)."""
    fwd = []
    for i, e in enumerate(S.graph.edges):
        bps = f.edge_bps[i]
        if len(bps) != 2:
            raise ValueError(
                "translate_structure needs f linear per edge; refine the model"
            )
        s = int((bps[1][1] - bps[0][1]) / (bps[1][0] - bps[0][0]))
        fwd.append(tuple(x - s for x in S.fwd_slopes[i]))
    return SlopeStructure(S.graph, S.r, fwd, S.vertex_ranks)


def refine_structure(S: SlopeStructure, points: Iterable[GraphPoint]
                     ) -> tuple[Refinement, "SlopeStructure"]:
    """Subdivide the model; new interior vertices get the standard rank."""
    ref = refine_model(S.graph, points)
    fwd = [None] * len(ref.graph.edges)
    for old_e, pieces in enumerate(ref.edge_pieces):
        for ne, _ in pieces:
            fwd[ne] = S.fwd_slopes[old_e]
    ranks = dict(S.vertex_ranks)
    std2 = standard_rank_function(2, S.r)
    for name in ref.graph.vertices:
        if name not in ranks:
            ranks[name] = std2
    return ref, SlopeStructure(ref.graph, S.r, fwd, ranks)


def check_nonincreasing_slopes(D: Divisor, S: SlopeStructure
                               ) -> tuple[bool, Optional[str]]:
    """Slope vectors must not increase when passing through a divisor-free
    valence-2 vertex; necessary for the crude rank condition."""
    for name in S.graph.vertices:
        gs = S.graph.germs(name)
        if len(gs) != 2 or D[V(name)] != 0:
            continue
        (e1, s1), (e2, s2) = gs
        before = S.slope_list((e1, -s1))   # direction of travel, arriving
        after = S.slope_list((e2, s2))     # continuing away
        if any(a > b for a, b in zip(after, before)):
            return False, name
    return True, None


# -- crude rank verification -------------------------------------------------


@dataclass
class RankVerdict:
    status: str                     # verified | refuted | inconclusive
    witnesses: dict                 # divisor key -> PLFunction or note
    grid: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def grid_points(graph: MetricGraph, D: Divisor, denominator: int
                ) -> list[GraphPoint]:
    """Model vertices, the support of D, and all interior points whose offset
    is a multiple of 1/denominator."""
    for p in D.support():
        if not p.is_vertex() and denominator % p.offset.denominator != 0:
            raise GridTooCoarse(
                f"support point {p} has denominator {p.offset.denominator}"
            )
    pts = {V(name) for name in graph.vertices}
    pts |= set(D.support())
    step = Fraction(1, denominator)
    for i, e in enumerate(graph.edges):
        k = 1
        while k * step < e.length:
            pts.add(graph.at(i, k * step))
            k += 1
    return sorted(pts)


def _edge_grid(graph: MetricGraph, pts: Iterable[GraphPoint]
               ) -> list[list[Fraction]]:
    by_edge: list[set[Fraction]] = [
        {Fraction(0), e.length} for e in graph.edges
    ]
    for p in pts:
        if not p.is_vertex():
            by_edge[p.edge].add(p.offset)
    return [sorted(s) for s in by_edge]


def iter_crude_witnesses(D: Divisor, S: SlopeStructure, E: Divisor,
                         grid: Sequence[GraphPoint]) -> Iterator[PLFunction]:
    """All grid-breakpoint functions f with slope data allowed by S,
    rho_x(slopes of f at x) >= E(x) everywhere and D + div(f) - E >= 0.

    Depth-first over per-edge slope-index sequences with local pruning, then
    assembly along a spanning order with vertex-level checks.
    """
    graph = S.graph
    r = S.r
    offsets = _edge_grid(graph, list(grid) + list(E.support()))

    # per-edge admissible slope-index sequences
    edge_cands: list[list[tuple[tuple[int, ...], Fraction]]] = []
    for i, e in enumerate(graph.edges):
        nodes = offsets[i]
        segs = len(nodes) - 1
        fwd = S.fwd_slopes[i]
        interior = nodes[1:-1]
        e_coeff = [E[graph.at(i, p)] for p in interior]
        d_coeff = [D[graph.at(i, p)] for p in interior]
        cands = []

        def rec(k, seq, rise):
            if k == segs:
                cands.append((tuple(seq), rise))
                return
            for idx in range(r, -1, -1):
                if k > 0:
                    prev = seq[-1]
                    ek, dk = e_coeff[k - 1], d_coeff[k - 1]
                    if idx > prev - ek:
                        continue
                    if dk + fwd[prev] - fwd[idx] - ek < 0:
                        continue
                seq.append(idx)
                rec(k + 1, seq, rise + fwd[idx] * (nodes[k + 1] - nodes[k]))
                seq.pop()

        rec(0, [], Fraction(0))
        if not cands:
            return
        edge_cands.append(cands)

    # spanning order: BFS from the first vertex so each edge sees a known end
    order: list[int] = []
    known = {graph.vertices[0]}
    remaining = set(range(len(graph.edges)))
    while remaining:
        pick = next(
            (i for i in sorted(remaining)
             if graph.edges[i].u in known or graph.edges[i].v in known),
            None,
        )
        assert pick is not None, "graph is connected"
        order.append(pick)
        known |= {graph.edges[pick].u, graph.edges[pick].v}
        remaining.discard(pick)

    incident_last: dict[str, int] = {}
    for pos, i in enumerate(order):
        incident_last[graph.edges[i].u] = pos
        incident_last[graph.edges[i].v] = pos

    jump_sets = {name: S.jumps_at(name) for name in graph.vertices}

    def vertex_ok(name: str, chosen: dict[int, tuple[int, ...]]) -> bool:
        vec = []
        out_sum = 0
        for e, sign in graph.germs(name):
            seq = chosen[e]
            if sign == +1:
                vec.append(seq[0])
                out_sum += S.fwd_slopes[e][seq[0]]
            else:
                vec.append(r - seq[-1])
                out_sum += -S.fwd_slopes[e][seq[-1]]
        vec = tuple(vec)
        ev = E[V(name)]
        if vec not in jump_sets[name]:
            return False
        if S.vertex_ranks[name][vec] < ev:
            return False
        if D[V(name)] - out_sum - ev < 0:
            return False
        return True

    values: dict[str, Fraction] = {graph.vertices[0]: Fraction(0)}
    chosen: dict[int, tuple[int, ...]] = {}

    def assemble(pos: int) -> Iterator[PLFunction]:
        if pos == len(order):
            bps = []
            for i, e in enumerate(graph.edges):
                nodes = offsets[i]
                fwd = S.fwd_slopes[i]
                seq = chosen[i]
                val = values[e.u]
                pts = [(nodes[0], val)]
                for k, idx in enumerate(seq):
                    val = val + fwd[idx] * (nodes[k + 1] - nodes[k])
                    pts.append((nodes[k + 1], val))
                bps.append(pts)
            yield PLFunction(graph, bps)
            return
        i = order[pos]
        e = graph.edges[i]
        u_known, v_known = e.u in values, e.v in values
        for seq, rise in edge_cands[i]:
            if u_known and v_known:
                if values[e.v] - values[e.u] != rise:
                    continue
                added = None
            elif u_known:
                values[e.v] = values[e.u] + rise
                added = e.v
            else:
                values[e.u] = values[e.v] - rise
                added = e.u
            chosen[i] = seq
            ok = True
            for name in (e.u, e.v):
                if incident_last[name] == pos and not vertex_ok(name, chosen):
                    ok = False
                    break
            if ok:
                yield from assemble(pos + 1)
            del chosen[i]
            if added is not None:
                del values[added]

    yield from assemble(0)


def find_crude_witness(D: Divisor, S: SlopeStructure, E: Divisor,
                       grid: Sequence[GraphPoint]) -> Optional[PLFunction]:
    for f in iter_crude_witnesses(D, S, E, grid):
        return f
    return None


def _divisor_key(E: Divisor) -> str:
    return " + ".join(f"{c}*{p!r}" for p, c in sorted(E.coeffs.items())) or "0"


def effective_divisors(points: Sequence[GraphPoint], degree: int
                       ) -> Iterator[Divisor]:
    for combo in itertools.combinations_with_replacement(sorted(points), degree):
        yield Divisor.of(*((p, 1) for p in combo))


def crude_rank_check(D: Divisor, S: SlopeStructure, r: Optional[int] = None,
                     grid_denominator: int = 1,
                     witness_filter=None) -> RankVerdict:
    """Grid-relative check of the crude rank condition.

    For every effective divisor E of degree r supported on the grid, search
    for a witness. witness_filter (used by the series layer) may reject
    witnesses, e.g. by a membership test.
    """
    if r is None:
        r = S.r
    grid = grid_points(S.graph, D, grid_denominator)
    witnesses: dict[str, object] = {}
    status = "verified"
    for E in effective_divisors(grid, r):
        found = None
        for f in iter_crude_witnesses(D, S, E, grid):
            if witness_filter is None or witness_filter(f):
                found = f
                break
        key = _divisor_key(E)
        if found is None:
            witnesses[key] = "no witness at this grid"
            status = "refuted"
        else:
            witnesses[key] = found
    return RankVerdict(
        status=status,
        witnesses=witnesses,
        grid={"denominator": grid_denominator, "points": len(grid), "degree": r},
        notes=["grid-relative verdict; witnesses restricted to grid breakpoints"],
    )


# -- enumeration -------------------------------------------------------------


def _increasing_lists(r: int, k: int) -> list[tuple[int, ...]]:
    return [
        tuple(c) for c in itertools.combinations(range(-k, k + 1), r + 1)
    ]


_rank_enum_cache: dict[tuple[int, int], list[RankFunction]] = {}


def enumerate_rank_functions(delta: int, r: int) -> list[RankFunction]:
    """All rank functions on [0..r]^delta, by pruned search."""
    key = (delta, r)
    if key in _rank_enum_cache:
        return _rank_enum_cache[key]
    pts = list(itertools.product(range(r + 1), repeat=delta))
    forced: dict[tuple[int, ...], int] = {}
    for i in range(delta):
        for t in range(r + 1):
            forced[tuple(t if j == i else 0 for j in range(delta))] = r - t
    out: list[RankFunction] = []
    vals: dict[tuple[int, ...], int] = {}

    def upper(a) -> int:
        ub = r
        for i in range(delta):
            if a[i] > 0:
                prev = a[:i] + (a[i] - 1,) + a[i + 1 :]
                ub = min(ub, vals[prev])
        return ub

    def rec(n: int):
        if n == len(pts):
            flat = [vals[a] for a in pts]
            try:
                out.append(validate_rank_function(flat, delta, r))
            except RankFunctionError:
                pass
            return
        a = pts[n]
        if a in forced:
            ub = upper(a)
            if forced[a] > ub:
                return
            vals[a] = forced[a]
            rec(n + 1)
            del vals[a]
            return
        for v in range(-1, upper(a) + 1):
            vals[a] = v
            rec(n + 1)
        vals.pop(a, None)

    rec(0)
    _rank_enum_cache[key] = out
    return out


def _coarsen_signature(S: SlopeStructure, D: Divisor):
    """Canonical description after suppressing removable valence-2 vertices:
    divisor-free, standard rank, and slope list continuing unchanged."""
    graph = S.graph
    std = standard_rank_function(2, S.r) if S.r >= 0 else None
    removable = set()
    for name in graph.vertices:
        gs = graph.germs(name)
        if len(gs) != 2 or D[V(name)] != 0:
            continue
        (e1, s1), (e2, s2) = gs
        if S.vertex_ranks[name].values != standard_rank_function(2, S.r).values:
            continue
        if S.slope_list((e1, -s1)) == S.slope_list((e2, s2)):
            removable.add(name)
    # walk maximal chains through removable vertices
    segs = []
    visited_edges = set()
    for i, e in enumerate(graph.edges):
        if i in visited_edges:
            continue
        # extend in both directions
        chain = [(i, +1)]
        visited_edges.add(i)
        for direction in (0, 1):
            while True:
                germ = chain[-1] if direction == 0 else chain[0]
                end = (
                    graph.germ_target(germ)
                    if direction == 0
                    else graph.germ_base(germ)
                )
                if end not in removable:
                    break
                nxt = next(
                    g for g in graph.germs(end)
                    if g[0] != (chain[-1][0] if direction == 0 else chain[0][0])
                )
                if nxt[0] in visited_edges:
                    break
                visited_edges.add(nxt[0])
                if direction == 0:
                    chain.append(nxt)
                else:
                    chain.insert(0, (nxt[0], -nxt[1]))
        start = graph.germ_base(chain[0])
        end = graph.germ_target(chain[-1])
        length = sum(graph.edges[e].length for e, _ in chain)
        lst = S.slope_list(chain[0])
        key = ((start, end, length, lst), (end, start, length,
                                           S.slope_list((chain[0][0], -chain[0][1]))))
        segs.append(min(key))
    ranks = tuple(
        (name, S.vertex_ranks[name].values)
        for name in sorted(graph.vertices)
        if name not in removable
    )
    return (tuple(sorted(segs)), ranks)


def enumerate_slope_structures(graph: MetricGraph, D: Divisor, r: int, k: int,
                               cap: Optional[int] = None) -> list[SlopeStructure]:
    """All slope structures on the (simple model of the) graph with slopes in
    [-k, k], filtered by the non-increasing necessary condition and
    deduplicated up to suppressing removable subdivision vertices."""
    if cap is None:
        cap = _default_cap()
    if not graph.is_simple():
        ref = graph.simple_model()
        graph = ref.graph
        D = ref.map_divisor(D)
    lists = _increasing_lists(r, k)
    if not lists:
        return []
    per_vertex = {
        name: enumerate_rank_functions(graph.degree(name), r)
        for name in graph.vertices
    }
    out: list[SlopeStructure] = []
    seen = set()
    edge_choices = itertools.product(lists, repeat=len(graph.edges))
    for fwd in edge_choices:
        for ranks in itertools.product(
            *(per_vertex[name] for name in graph.vertices)
        ):
            S = SlopeStructure(
                graph, r, fwd, dict(zip(graph.vertices, ranks))
            )
            ok, _ = check_nonincreasing_slopes(D, S)
            if not ok:
                continue
            sig = _coarsen_signature(S, D)
            if sig in seen:
                continue
            seen.add(sig)
            out.append(S)
            if len(out) > cap:
                raise ExplosionGuard(f"more than {cap} structures")
    return out
