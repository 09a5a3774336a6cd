"""Finitely generated tropical semimodules as linear series.

A module is presented by a divisor, a slope structure and a finite generator
family inside Rat(D, S); its elements are exactly the minima of shifted
generators. On top of that presentation: membership by residuation,
extremals, reduced divisors, unsaturated cuts, tropical rank, rank
verification, jump realization, and the rank-one classification to metric
trees with its converse pullback along finite harmonic morphisms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .hypercube import RankFunction, validate_rank_function
from .metricgraph import (
    Divisor,
    GraphPoint,
    MetricGraph,
    PLFunction,
    Refinement,
    V,
    compose_refinements,
    frac,
    tropical_min,
    tropical_min_many,
)
from .slopes import (
    RankVerdict,
    SlopeStructure,
    crude_rank_check,
    grid_points,
    effective_divisors,
    is_compatible,
    in_rat_D_S,
    iter_crude_witnesses,
    refine_structure,
    _divisor_key,
)


class RadiusTooLarge(ValueError):
    pass


class SearchBoundExceeded(RuntimeError):
    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates


class MissingSubSeries(ValueError):
    pass


class NotFound(ValueError):
    pass


class NotRankOne(ValueError):
    pass


class NotRefined(ValueError):
    pass


class QuotientNotTree(ValueError):
    pass


class NotHarmonic(ValueError):
    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


@dataclass
class TropModule:
    """A finitely generated sub-semimodule of Rat(D, S)."""

    graph: MetricGraph
    divisor: Divisor
    structure: SlopeStructure
    generators: tuple

    def __post_init__(self):
        self.generators = tuple(self.generators)
        if not self.generators:
            raise ValueError("module needs at least one generator")
        for h in self.generators:
            if not in_rat_D_S(h, self.divisor, self.structure):
                raise ValueError(f"generator outside Rat(D, S): {h!r}")

    def to_json_dict(self) -> dict:
        return {
            "divisor": self.divisor.to_json_list(self.graph),
            "structure": self.structure.to_json_dict(),
            "generators": [h.to_json_list() for h in self.generators],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "TropModule":
        S = SlopeStructure.from_json_dict(data["structure"])
        graph = S.graph
        D = Divisor.from_json_list(graph, data["divisor"])
        gens = [PLFunction.from_json_list(graph, g) for g in data["generators"]]
        return TropModule(graph, D, S, tuple(gens))


def membership(M: TropModule, g: PLFunction) -> tuple[bool, Optional[list]]:
    """Residuation test: with c_i = max over the graph of (g - h_i), g lies
    in M iff min_i(h_i + c_i) equals g."""
    cs = [(g - h).max_value() for h in M.generators]
    combo = tropical_min_many(
        [h.add_constant(c) for h, c in zip(M.generators, cs)]
    )
    if combo == g:
        return True, cs
    return False, None


def f_v(M: TropModule, p: GraphPoint) -> PLFunction:
    """Pointwise minimum of the generators normalized to vanish at p."""
    return tropical_min_many(
        [h.add_constant(-h.value_at(p)) for h in M.generators]
    )


def reduced_divisor(M: TropModule, p: GraphPoint) -> Divisor:
    return M.divisor + f_v(M, p).divisor()


def _normalized(h: PLFunction, base: str) -> PLFunction:
    return h.add_constant(-h.vertex_value(base))


def extremals(M: TropModule) -> list[PLFunction]:
    """Irredundant generators, normalized to vanish at the first vertex."""
    base = M.graph.vertices[0]
    gens: list[PLFunction] = []
    for h in M.generators:
        n = _normalized(h, base)
        if n not in gens:
            gens.append(n)
    changed = True
    while changed and len(gens) > 1:
        changed = False
        for i in range(len(gens)):
            others = gens[:i] + gens[i + 1 :]
            sub = TropModule(M.graph, M.divisor, M.structure, tuple(others))
            if membership(sub, gens[i])[0]:
                gens.pop(i)
                changed = True
                break
    return gens


# -- cuts and reduced divisors ----------------------------------------------


@dataclass
class Cut:
    """Closed connected region given by vertices and closed edge intervals."""

    vertices: frozenset
    intervals: dict  # edge index -> tuple of (lo, hi) closed intervals

    def contains_vertex(self, name: str) -> bool:
        return name in self.vertices

    def contains(self, graph: MetricGraph, p: GraphPoint) -> bool:
        if p.is_vertex():
            return p.vertex in self.vertices
        for lo, hi in self.intervals.get(p.edge, ()):
            if lo <= p.offset <= hi:
                return True
        return False


def _min_locus_components(f: PLFunction) -> list[Cut]:
    graph = f.graph
    m = f.min_value()
    verts = {v for v in graph.vertices if f.vertex_value(v) == m}
    intervals: dict[int, list[tuple[Fraction, Fraction]]] = {}
    for i, bps in enumerate(f.edge_bps):
        cur: list[tuple[Fraction, Fraction]] = []
        run_start = None
        for k, (p, v) in enumerate(bps):
            if v == m:
                if run_start is None:
                    run_start = p
                if k == len(bps) - 1 or bps[k + 1][1] != m:
                    cur.append((run_start, p))
                    run_start = None
            else:
                run_start = None
        if cur:
            intervals[i] = cur
    # connected components over pieces
    pieces: list[tuple] = [("v", v) for v in sorted(verts)]
    for i in sorted(intervals):
        for iv in intervals[i]:
            pieces.append(("i", i, iv))
    parent = list(range(len(pieces)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        parent[find(a)] = find(b)

    for a, pa in enumerate(pieces):
        if pa[0] != "i":
            continue
        for b, pb in enumerate(pieces):
            if pb[0] == "v":
                e = graph.edges[pa[1]]
                lo, hi = pa[2]
                if (lo == 0 and e.u == pb[1]) or (hi == e.length and e.v == pb[1]):
                    union(a, b)
        # interval-interval adjacency happens through shared vertices only
    comps: dict[int, list[tuple]] = {}
    for a in range(len(pieces)):
        comps.setdefault(find(a), []).append(pieces[a])
    out = []
    for group in comps.values():
        vs = frozenset(p[1] for p in group if p[0] == "v")
        ivs: dict[int, list] = {}
        for p in group:
            if p[0] == "i":
                ivs.setdefault(p[1], []).append(p[2])
        out.append(Cut(vs, {k: tuple(sorted(v)) for k, v in ivs.items()}))
    return sorted(out, key=lambda c: (sorted(c.vertices), sorted(c.intervals)))


def find_unsaturated_cut(M: TropModule, p: GraphPoint
                         ) -> Optional[tuple[Cut, PLFunction]]:
    """None iff the divisor is reduced at p. Otherwise the min locus of f_p
    with the clipped witness min(f_p - min - eps, 0), eps = -min/2."""
    f = f_v(M, p)
    if f.is_zero():
        return None
    m = f.min_value()
    assert m < 0, "f_p <= 0 with f_p(p) = 0 for an effective module"
    eps = -m / 2
    witness = tropical_min(
        f.add_constant(-m - eps), PLFunction.constant(M.graph, 0)
    )
    comps = _min_locus_components(f)
    return comps[0], witness


# -- the explicit local step -------------------------------------------------


def refine_module(M: TropModule, points: Iterable[GraphPoint]
                  ) -> tuple[Refinement, TropModule]:
    ref, S = refine_structure(M.structure, points)
    return ref, TropModule(
        ref.graph,
        ref.map_divisor(M.divisor),
        S,
        tuple(ref.map_function(h) for h in M.generators),
    )


def _region_components(graph: MetricGraph, cut_vertices: set) -> list[frozenset]:
    """Edge sets of the components of the graph minus the given vertices."""
    parent: dict[int, int] = {i: i for i in range(len(graph.edges))}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    by_vertex: dict[str, list[int]] = {}
    for i, e in enumerate(graph.edges):
        for name in (e.u, e.v):
            if name not in cut_vertices:
                by_vertex.setdefault(name, []).append(i)
    for edges in by_vertex.values():
        for i in edges[1:]:
            parent[find(i)] = find(edges[0])
    comps: dict[int, set[int]] = {}
    for i in range(len(graph.edges)):
        comps.setdefault(find(i), set()).add(i)
    return sorted((frozenset(c) for c in comps.values()), key=sorted)


def _cut_from_edges(graph: MetricGraph, edges: frozenset, extra_vertex=None) -> Cut:
    vs = set()
    for i in edges:
        vs.add(graph.edges[i].u)
        vs.add(graph.edges[i].v)
    if extra_vertex is not None:
        vs.add(extra_vertex)
    return Cut(
        frozenset(vs),
        {i: ((Fraction(0), graph.edges[i].length),) for i in sorted(edges)},
    )


def _cut_boundary(graph: MetricGraph, cut: Cut) -> dict[str, list]:
    """Boundary vertices with their outgoing (leaving) germs."""
    out: dict[str, list] = {}
    for name in sorted(cut.vertices):
        leaving = [
            g
            for g in graph.germs(name)
            if g[0] not in cut.intervals
        ]
        if leaving:
            out[name] = leaving
    return out


def _build_cut_function(graph: MetricGraph, cut: Cut, slope_of: dict,
                        eps: Fraction) -> Optional[PLFunction]:
    """Value -eps on the cut, rising at the prescribed slopes along leaving
    germs until zero, zero elsewhere. None if eps does not fit."""
    bps = []
    for i, e in enumerate(graph.edges):
        if i in cut.intervals:
            bps.append([(Fraction(0), -eps), (e.length, -eps)])
            continue
        ramps = []  # (from_start: bool, run length, slope)
        for germ in ((i, +1), (i, -1)):
            if germ in slope_of:
                s = slope_of[germ]
                run = Fraction(eps, s)
                ramps.append((germ[1] == +1, run, s))
        if not ramps:
            bps.append([(Fraction(0), Fraction(0)), (e.length, Fraction(0))])
            continue
        lo_run = next((r for fs, r, _ in ramps if fs), Fraction(0))
        hi_run = next((r for fs, r, _ in ramps if not fs), Fraction(0))
        if lo_run + hi_run > e.length:
            return None
        pts = []
        start_val = -eps if lo_run else Fraction(0)
        pts.append((Fraction(0), start_val))
        if lo_run:
            pts.append((lo_run, Fraction(0)))
        if hi_run:
            pts.append((e.length - hi_run, Fraction(0)))
        pts.append((e.length, -eps if hi_run else Fraction(0)))
        merged = []
        for p, v in pts:
            if merged and merged[-1][0] == p:
                if merged[-1][1] != v:
                    return None
                continue
            merged.append((p, v))
        bps.append(merged)
    try:
        return PLFunction(graph, bps)
    except ValueError:
        return None


def _admissible_vectors(S: SlopeStructure, name: str, leaving: Sequence,
                        require_max: Optional[tuple] = None) -> list[tuple]:
    """Jump vectors at a vertex with positive slopes exactly on the leaving
    germs, as (index vector, germ -> slope) pairs sorted by index vector;
    optionally force the maximal slope on one germ."""
    germs = S.germ_order(name)
    out = []
    for a in sorted(S.jumps_at(name)):
        slopes = {
            g: S.slope_list(g)[a[k]] for k, g in enumerate(germs)
        }
        ok = all(
            (slopes[g] > 0) == (g in leaving) and (slopes[g] == 0) == (g not in leaving)
            for g in germs
        )
        if not ok:
            continue
        if require_max is not None and slopes[require_max] != S.slope_list(require_max)[S.r]:
            continue
        out.append((a, slopes))
    return out


def _meet_vector(S: SlopeStructure, name: str,
                 cands: Sequence[tuple]) -> dict:
    """Componentwise minimum of the index vectors, mapped back to slopes.
    Jump sets are closed under minima, so the meet is again admissible."""
    germs = S.germ_order(name)
    vecs = [a for a, _ in cands]
    meet = tuple(min(v[k] for v in vecs) for k in range(len(germs)))
    assert meet in S.jumps_at(name)
    return {g: S.slope_list(g)[meet[k]] for k, g in enumerate(germs)}


def _cut_is_unsaturated(M: TropModule, cut: Cut, claim_germ=None
                        ) -> Optional[dict]:
    """Slope choice witnessing unsaturation (minimal vectors), or None.
    claim_germ, when given, must carry its maximal slope at its base vertex."""
    graph, S, D = M.graph, M.structure, M.divisor
    boundary = _cut_boundary(graph, cut)
    per_vertex: dict[str, list[dict]] = {}
    for name, leaving in boundary.items():
        req = claim_germ if claim_germ and graph.germ_base(claim_germ) == name else None
        cand = [
            (a, sl)
            for a, sl in _admissible_vectors(S, name, leaving, require_max=req)
            if D[V(name)] - sum(sl.values()) >= 0
        ]
        if not cand:
            return None
        per_vertex[name] = cand
    # a small eps that fits every candidate ramp
    min_slope = min(
        s
        for cands in per_vertex.values()
        for _, sl in cands
        for s in sl.values()
        if s > 0
    )
    shortest = min(e.length for e in graph.edges)
    eps = shortest * min_slope / 4
    for combo in itertools.product(*(per_vertex[n] for n in sorted(per_vertex))):
        slope_of: dict = {}
        for _, sl in combo:
            slope_of.update(sl)
        f = _build_cut_function(graph, cut, slope_of, eps)
        if f is not None and membership(M, f)[0]:
            return slope_of
    return None


def local_reduced_step(M: TropModule, p: GraphPoint, germ: tuple[int, int],
                       distance) -> Divisor:
    """The explicit one-step formula: assemble the union X of the unsaturated
    cuts across the step, build f^u from minimal slope vectors with
    eps = s_r * distance, and return D + div(f^u)."""
    distance = frac(distance)
    if not p.is_vertex():
        raise ValueError("step from a model vertex; refine the model first")
    name = p.vertex
    graph, S, D = M.graph, M.structure, M.divisor
    if germ not in graph.germs(name):
        raise ValueError(f"{germ} is not a direction at {name}")
    if not f_v(M, p).is_zero():
        raise ValueError("divisor is not reduced at the base point")
    e = graph.edges[germ[0]]
    if distance <= 0 or distance >= e.length:
        raise RadiusTooLarge(f"distance {distance} outside the edge")
    u_off = distance if germ[1] == +1 else e.length - distance
    u = graph.at(germ[0], u_off)
    for q in D.support():
        if not q.is_vertex() and q.edge == germ[0]:
            between = (
                0 < q.offset <= u_off if germ[1] == +1 else u_off <= q.offset < e.length
            )
            if between:
                raise RadiusTooLarge("divisor support inside the step segment")

    s_max = S.slope_list(germ)[S.r]
    if s_max <= 0:
        raise ValueError("maximal slope toward the step direction must be positive")
    eps = s_max * distance

    # candidate cuts: unions of closures of components of the graph minus
    # supp(D) u {p}, together with isolated support vertices; boundary points
    # of an unsaturated cut always land in that vertex set
    cut_vertices = {name} | {
        q.vertex for q in D.support() if q.is_vertex()
    }
    comps = _region_components(graph, cut_vertices)
    comps = [c for c in comps if germ[0] not in c]  # the step segment stays outside
    candidates: list[Cut] = []
    for size in range(0, len(comps) + 1):
        for chosen in itertools.combinations(comps, size):
            edges = frozenset().union(frozenset(), *chosen)
            closure = {name}
            for i in edges:
                closure |= {graph.edges[i].u, graph.edges[i].v}
            extra = sorted(cut_vertices - closure)
            for k in range(len(extra) + 1):
                for verts in itertools.combinations(extra, k):
                    candidates.append(
                        Cut(
                            frozenset(closure | set(verts)),
                            {
                                i: ((Fraction(0), graph.edges[i].length),)
                                for i in sorted(edges)
                            },
                        )
                    )

    members: list[Cut] = []
    for cut in candidates:
        if _cut_is_unsaturated(M, cut, claim_germ=germ) is not None:
            members.append(cut)
    if not members:
        raise NotFound("no unsaturated cut across the step; module is not a series here")
    union_edges = frozenset().union(
        frozenset(), *(frozenset(c.intervals) for c in members)
    )
    union_verts = frozenset().union(*(c.vertices for c in members))
    X = Cut(
        union_verts,
        {
            i: ((Fraction(0), graph.edges[i].length),)
            for i in sorted(union_edges)
        },
    )
    if _cut_is_unsaturated(M, X, claim_germ=germ) is None:
        raise NotFound("union of unsaturated cuts is saturated; inconsistent input")

    # componentwise-minimal admissible vectors give the step witness
    slope_of: dict = {}
    for bname, leaving in _cut_boundary(graph, X).items():
        req = germ if graph.germ_base(germ) == bname else None
        cands = [
            (a, sl)
            for a, sl in _admissible_vectors(S, bname, leaving, require_max=req)
            if D[V(bname)] - sum(sl.values()) >= 0
        ]
        slope_of.update(_meet_vector(S, bname, cands))

    f_u = _build_cut_function(graph, X, slope_of, eps)
    if f_u is None:
        raise RadiusTooLarge("the ramp of length eps/slope does not fit the model")
    return D + f_u.divisor()


def _is_connected_region(graph: MetricGraph, cut: Cut) -> bool:
    items = sorted(cut.intervals)
    if not items:
        return True
    seen = {items[0]}
    stack = [items[0]]
    while stack:
        i = stack.pop()
        e = graph.edges[i]
        for j in items:
            if j in seen:
                continue
            f = graph.edges[j]
            if {e.u, e.v} & {f.u, f.v}:
                seen.add(j)
                stack.append(j)
    return len(seen) == len(items)


# -- tropical rank ------------------------------------------------------------


def _common_positions(fs: Sequence[PLFunction]) -> list[GraphPoint]:
    graph = fs[0].graph
    pts = {V(v) for v in graph.vertices}
    for f in fs:
        pts |= set(f.breakpoints())
    return sorted(pts)


def tropical_dependence(fs: Sequence[PLFunction], bound: int = 200000
                        ) -> Optional[list]:
    """Constants making the shifted minimum everywhere at-least-twice
    attained, or None. Candidates: pairwise value differences at breakpoints
    of the common refinement, chained through already-fixed constants."""
    if not fs:
        raise ValueError("empty family")
    graph = fs[0].graph
    n = len(fs)
    if n == 1:
        return None
    for i in range(n):
        for j in range(i + 1, n):
            if (fs[i] - fs[j]).max_value() == (fs[i] - fs[j]).min_value():
                cs = [Fraction(0)] * n
                cs[j] = (fs[i] - fs[j]).max_value()
                return cs
    pts = _common_positions(fs)
    searched = 0

    def verify(cs) -> bool:
        shifted = [f.add_constant(c) for f, c in zip(fs, cs)]
        m = tropical_min_many(shifted)
        for i in range(len(graph.edges)):
            pos = set()
            for g in shifted + [m]:
                pos |= {p for p, _ in g.edge_bps[i]}
            for g in shifted:
                diff = g - m
                for k in range(1, len(diff.edge_bps[i])):
                    (p0, v0), (p1, v1) = diff.edge_bps[i][k - 1], diff.edge_bps[i][k]
                    if (v0 > 0 > v1) or (v0 < 0 < v1):
                        pos.add(p0 + (p1 - p0) * v0 / (v0 - v1))
            pos = sorted(pos)
            for k in range(len(pos) - 1):
                mid = (pos[k] + pos[k + 1]) / 2
                gp = graph.at(i, mid)
                mv = m.value_at(gp)
                active = sum(1 for g in shifted if g.value_at(gp) == mv)
                if active < 2:
                    return False
        return True

    assigned: list = [Fraction(0)]

    def rec(i: int) -> Optional[list]:
        nonlocal searched
        if i == n:
            cs = list(assigned)
            return cs if verify(cs) else None
        cands = set()
        for j in range(i):
            for q in pts:
                cands.add(fs[j].value_at(q) + assigned[j] - fs[i].value_at(q))
        for c in sorted(cands):
            searched += 1
            if searched > bound:
                raise SearchBoundExceeded(
                    f"searched {searched} candidate constants", sorted(cands)
                )
            assigned.append(c)
            got = rec(i + 1)
            assigned.pop()
            if got is not None:
                return got
        return None

    return rec(1)


@dataclass
class RankReport:
    rank: Optional[int]
    status: str  # exact | lower-bound | inconclusive
    detail: str = ""


def tropical_rank(M: TropModule, r_max: int, bound: int = 200000) -> RankReport:
    """Least r <= r_max with every (r+2)-subset of the extremals dependent."""
    ext = extremals(M)
    inconclusive = False
    for r in range(r_max + 1):
        size = r + 2
        all_dep = True
        for combo in itertools.combinations(ext, size):
            try:
                if tropical_dependence(list(combo), bound=bound) is None:
                    all_dep = False
                    break
            except SearchBoundExceeded:
                inconclusive = True
                all_dep = False
                break
        if all_dep:
            return RankReport(r, "exact" if not inconclusive else "inconclusive")
    return RankReport(
        None,
        "inconclusive" if inconclusive else "lower-bound",
        detail=f"an independent {r_max + 2}-subset exists at the searched bound",
    )


# -- rank verification --------------------------------------------------------


def _rank_of_slope_vector(S: SlopeStructure, f: PLFunction, x: GraphPoint) -> int:
    if x.is_vertex():
        vec = []
        for germ in S.germ_order(x.vertex):
            idx = S.slope_index(germ, f.slopes_at(x)[germ])
            if idx is None:
                return -1
            vec.append(idx)
        return S.vertex_ranks[x.vertex][tuple(vec)]
    sl = f.slopes_at(x)
    i = S.slope_index((x.edge, +1), sl[(x.edge, +1)])
    j = S.slope_index((x.edge, -1), sl[(x.edge, -1)])
    if i is None or j is None:
        return -1
    return S.r - i - j if i + j <= S.r else -1


def satisfies_series_conditions(f: PLFunction, D: Divisor, S: SlopeStructure,
                                E: Divisor) -> bool:
    if not is_compatible(f, S):
        return False
    if not (D + f.divisor() - E).is_effective():
        return False
    for x, c in E.coeffs.items():
        if c > 0 and _rank_of_slope_vector(S, f, x) < c:
            return False
    return True


def check_linear_series(M: TropModule, grid_denominator: int = 1,
                        mode: str = "crude", sub_series: Optional[dict] = None,
                        dependence_bound: int = 200000) -> RankVerdict:
    """Witness search restricted to members of M; refined mode additionally
    pins the tropical rank; strongly-refined mode checks supplied sub-series."""
    r = M.structure.r

    def member(f: PLFunction) -> bool:
        return membership(M, f)[0]

    verdict = crude_rank_check(
        M.divisor, M.structure, r, grid_denominator, witness_filter=member
    )
    if mode == "crude":
        return verdict
    if mode in ("refined", "strongly-refined"):
        report = tropical_rank(M, r, bound=dependence_bound)
        verdict.notes.append(f"tropical rank: {report.rank} ({report.status})")
        if report.rank != r:
            verdict.status = (
                "refuted" if report.status in ("exact", "lower-bound")
                else "inconclusive"
            )
            verdict.notes.append(f"tropical rank differs from {r}")
    if mode == "strongly-refined":
        if sub_series is None:
            raise MissingSubSeries("strongly-refined mode needs sub-series data")
        grid = grid_points(M.graph, M.divisor, grid_denominator)
        for s in range(1, r + 1):
            for E in effective_divisors(grid, s):
                key = _divisor_key(E)
                if key not in sub_series:
                    raise MissingSubSeries(f"no sub-series for {key}")
                ME = sub_series[key]
                for h in ME.generators:
                    if not membership(M, h)[0] or not satisfies_series_conditions(
                        h, M.divisor, M.structure, E
                    ):
                        verdict.status = "refuted"
                        verdict.notes.append(f"sub-series fails at {key}")
                sub_rank = tropical_rank(ME, r - s, bound=dependence_bound)
                if sub_rank.rank != r - s:
                    verdict.status = (
                        "inconclusive" if sub_rank.status == "inconclusive"
                        else "refuted"
                    )
                    verdict.notes.append(
                        f"sub-series at {key}: rank {sub_rank.rank}, wanted {r - s}"
                    )
        verdict.notes.append("sub-series conditions checked on generators")
    return verdict


def realize_jump(M: TropModule, p: GraphPoint, a: Sequence[int],
                 grid_denominator: int = 2) -> PLFunction:
    """A member whose slope indices at p form the given jump vector."""
    a = tuple(a)
    if not p.is_vertex():
        raise ValueError("realize_jump expects a model vertex")
    S = M.structure
    name = p.vertex
    if a not in S.jumps_at(name):
        raise ValueError(f"{a} is not a jump at {name}")
    germs = S.germ_order(name)

    def index_vector(f: PLFunction) -> Optional[tuple]:
        vec = []
        for germ in germs:
            idx = S.slope_index(germ, f.slopes_at(p)[germ])
            if idx is None:
                return None
            vec.append(idx)
        return tuple(vec)

    pool = [h.add_constant(-h.value_at(p)) for h in M.generators]

    def attempt() -> Optional[PLFunction]:
        above = [
            h for h in pool
            if (vec := index_vector(h)) is not None
            and all(x >= y for x, y in zip(vec, a))
        ]
        if not above:
            return None
        f = tropical_min_many(above)
        if index_vector(f) == a:
            return f
        return None

    got = attempt()
    if got is not None:
        return got
    # fall back: harvest witnesses of grid divisors and retry with the pool
    grid = grid_points(M.graph, M.divisor, grid_denominator)
    for E in effective_divisors(grid, S.r):
        for f in iter_crude_witnesses(M.divisor, M.structure, E, grid):
            if membership(M, f)[0]:
                pool.append(f.add_constant(-f.value_at(p)))
                break
    got = attempt()
    if got is None:
        raise NotFound(f"no member realizes {a} at {name} on this grid")
    return got


# -- rank-one classification --------------------------------------------------


@dataclass
class QuotientTree:
    tree: MetricGraph
    base: str                       # tree vertex under the base point
    graph: MetricGraph              # refined source model
    refinement: Refinement          # from the module's model
    vertex_map: dict                # source vertex -> tree vertex
    edge_map: dict                  # source edge -> (tree edge, sign, scale)
    degree: int

    def project(self, q: GraphPoint) -> GraphPoint:
        if q.is_vertex():
            return V(self.vertex_map[q.vertex])
        te, sign, scale = self.edge_map[q.edge]
        off = q.offset * scale
        if sign == -1:
            off = self.tree.edges[te].length - off
        return self.tree.at(te, off)

    def fiber(self, tree_vertex: str) -> list[str]:
        return sorted(
            x for x, t in self.vertex_map.items() if t == tree_vertex
        )

    def to_dot(self) -> str:
        lines = ["graph quotient_tree {"]
        for v in self.tree.vertices:
            shape = "doublecircle" if v == self.base else "circle"
            lines.append(f'  "{v}" [shape={shape}];')
        for e in self.tree.edges:
            lines.append(f'  "{e.u}" -- "{e.v}" [label="{e.length}"];')
        lines.append("}")
        return "\n".join(lines)


def _away_orientation(S: SlopeStructure, edge: int) -> tuple[int, int]:
    """Orientation with slope set {0, positive}; raises NotRefined else."""
    fwd = S.fwd_slopes[edge]
    if len(fwd) != 2:
        raise NotRankOne("slope lists do not have order one")
    if fwd[0] == 0 and fwd[1] > 0:
        return +1, fwd[1]
    if fwd[1] == 0 and fwd[0] < 0:
        return -1, -fwd[0]
    raise NotRefined(
        f"edge {edge}: slope set {fwd} is not of the oriented form {{0, m}}"
    )


def classify_g1d(M: TropModule, base: str) -> QuotientTree:
    """Quotient a rank-one refined series to its metric tree.

    Two points are identified when all generators agree on them. The base
    point must be reduced (f_base = 0); callers translate first otherwise.
    """
    if M.structure.r != 1:
        raise NotRankOne(f"structure order is {M.structure.r}")
    if not f_v(M, V(base)).is_zero():
        raise ValueError("divisor is not reduced at the base point")
    report = tropical_rank(M, 1)
    if report.rank == 0:
        raise NotRankOne("tropical rank is 0")
    if report.rank != 1:
        raise NotRefined(f"tropical rank check: {report.status}")

    # refine so every generator is edge-wise linear
    pts = []
    for h in M.generators:
        pts.extend(q for q in h.breakpoints() if not q.is_vertex())
    ref, M1 = refine_module(M, pts)

    # iterative alignment: subdivide until glue-groups have equal lengths
    for _ in range(400):
        graph, S = M1.graph, M1.structure
        gens = [_normalized(h, base) for h in M1.generators]

        def phi(vname: str) -> tuple:
            return tuple(h.vertex_value(vname) for h in gens)

        groups: dict[tuple, list] = {}
        for i in range(len(graph.edges)):
            sign, lam = _away_orientation(S, i)
            g = (i, sign)
            tail = graph.germ_base(g)
            vec = tuple(
                Fraction(h.slope_at_germ(g), lam) for h in gens
            )
            if all(x == 0 for x in vec):
                raise NotRefined(f"edge {i} is contracted by every generator")
            tau = graph.edges[i].length * lam
            groups.setdefault((phi(tail), vec), []).append((i, sign, lam, tau))
        split_done = False
        for (_, _), members in groups.items():
            taus = {t for *_, t in members}
            if len(taus) == 1:
                continue
            tmin = min(taus)
            cuts = []
            for i, sign, lam, tau in members:
                if tau == tmin:
                    continue
                off = tmin / lam
                if sign == -1:
                    off = graph.edges[i].length - off
                cuts.append(graph.at(i, off))
            step_ref, M1 = refine_module(M1, cuts)
            ref = compose_refinements(ref, step_ref)
            split_done = True
            break
        if not split_done:
            break
    else:
        raise QuotientNotTree("alignment did not terminate; not a refined series")

    graph, S = M1.graph, M1.structure
    gens = [_normalized(h, base) for h in M1.generators]

    def phi(vname: str) -> tuple:
        return tuple(h.vertex_value(vname) for h in gens)

    classes: dict[tuple, str] = {}
    vertex_map: dict[str, str] = {}
    order = sorted(graph.vertices, key=phi)
    for vname in order:
        key = phi(vname)
        if key not in classes:
            classes[key] = f"t{len(classes)}"
        vertex_map[vname] = classes[key]

    groups: dict[tuple, list] = {}
    for i in range(len(graph.edges)):
        sign, lam = _away_orientation(S, i)
        g = (i, sign)
        tail = graph.germ_base(g)
        vec = tuple(Fraction(h.slope_at_germ(g), lam) for h in gens)
        tau = graph.edges[i].length * lam
        groups.setdefault((phi(tail), vec), []).append((i, sign, lam, tau))

    tree_edges = []
    edge_map: dict[int, tuple] = {}
    degrees = set()
    for (tail_phi, vec), members in sorted(groups.items()):
        taus = {t for *_, t in members}
        assert len(taus) == 1, "alignment loop left unequal lengths"
        tau = taus.pop()
        heads = {
            vertex_map[
                graph.germ_target((i, sign))
            ]
            for i, sign, _, _ in members
        }
        assert len(heads) == 1, "glued germs must share their head class"
        tail_class = classes[tail_phi]
        te = len(tree_edges)
        tree_edges.append((tail_class, heads.pop(), tau))
        for i, sign, lam, _ in members:
            edge_map[i] = (te, sign, lam)
        degrees.add(sum(lam for _, _, lam, _ in members))

    tree_vertices = sorted(set(vertex_map.values()), key=lambda t: int(t[1:]))
    try:
        tree = MetricGraph(tree_vertices, tree_edges)
    except ValueError as exc:
        raise QuotientNotTree(f"quotient graph invalid: {exc}") from exc
    if not tree.is_tree():
        raise QuotientNotTree(
            f"quotient has {len(tree_edges)} edges on {len(tree_vertices)} vertices"
        )
    if len(degrees) != 1:
        raise NotRefined(f"fiber degrees disagree across edges: {sorted(degrees)}")
    degree = int(degrees.pop())

    base_class = vertex_map[base]
    # indegree at most one when oriented by the slope data, root excluded
    heads_count: dict[str, int] = {}
    for te, (tu, tv, _) in enumerate(tree_edges):
        heads_count[tv] = heads_count.get(tv, 0) + 1
    if heads_count.get(base_class, 0) != 0 or any(
        c > 1 for c in heads_count.values()
    ):
        raise NotRefined("edge orientations do not flow away from the base")

    qt = QuotientTree(
        tree=tree,
        base=base_class,
        graph=graph,
        refinement=ref,
        vertex_map=vertex_map,
        edge_map=edge_map,
        degree=degree,
    )

    # the module must be the pullback of the tree's canonical series
    for y in tree.vertices:
        g_y = _tree_unit_function(tree, base_class, y)
        h = PLFunction.from_vertex_values(
            graph, {x: g_y[vertex_map[x]] for x in graph.vertices}
        )
        if not membership(M1, h)[0]:
            raise NotRefined(f"pullback of the tree function at {y} is missing")
    return qt


def _tree_unit_function(tree: MetricGraph, root: str, y: str) -> dict:
    """Vertex values of the function rising with slope one from root to y and
    constant elsewhere (distance to root, clipped at the branch to y)."""
    paths = _tree_paths(tree, root)
    path_y = paths[y]
    vals = {}
    for t in tree.vertices:
        path_t = paths[t]
        common = Fraction(0)
        for (e1, d1), (e2, d2) in zip(path_y, path_t):
            if e1 != e2:
                break
            common += tree.edges[e1].length
        vals[t] = common
    return vals


def _tree_paths(tree: MetricGraph, root: str) -> dict:
    """Edge paths from the root to every vertex."""
    paths = {root: []}
    stack = [root]
    while stack:
        x = stack.pop()
        for i, e in enumerate(tree.edges):
            for a, b in ((e.u, e.v), (e.v, e.u)):
                if a == x and b not in paths:
                    paths[b] = paths[x] + [(i, +1 if a == e.u else -1)]
                    stack.append(b)
    return paths


# -- harmonic morphisms and pullback ------------------------------------------


@dataclass
class HarmonicMorphism:
    """A finite morphism in edge-onto-edge normal form: every source edge
    maps onto one tree edge with a positive integer relative slope."""

    graph: MetricGraph
    tree: MetricGraph
    vertex_map: dict                # source vertex -> tree vertex
    edge_data: tuple                # per source edge: (tree edge, slope)

    def __post_init__(self):
        if not self.tree.is_tree():
            raise ValueError("target is not a tree")
        for i, e in enumerate(self.graph.edges):
            te, m = self.edge_data[i]
            t = self.tree.edges[te]
            if m < 1 or not isinstance(m, int):
                raise ValueError(f"edge {i}: relative slope must be a positive integer")
            if {self.vertex_map[e.u], self.vertex_map[e.v]} != {t.u, t.v}:
                raise ValueError(f"edge {i}: endpoints do not map onto the target edge")
            if t.length != m * e.length:
                raise ValueError(
                    f"edge {i}: length {e.length} * {m} != target {t.length}"
                )
        self._local_degrees = {}
        for x in self.graph.vertices:
            sums: dict[tuple, int] = {}
            for i, sign in self.graph.germs(x):
                te, m = self.edge_data[i]
                t = self.tree.edges[te]
                image_sign = +1 if self.vertex_map[x] == t.u else -1
                sums[(te, image_sign)] = sums.get((te, image_sign), 0) + m
            tx = self.vertex_map[x]
            expected = {
                (i, s)
                for i, s in self.tree.germs(tx)
            }
            if set(sums) != expected or len(set(sums.values())) != 1:
                raise NotHarmonic(f"local degree imbalance at {x}", vertex=x)
            self._local_degrees[x] = next(iter(sums.values()))

    def local_degree(self, x: str) -> int:
        return self._local_degrees[x]

    def degree(self) -> int:
        t0 = self.tree.vertices[0]
        return sum(
            self._local_degrees[x]
            for x in self.graph.vertices
            if self.vertex_map[x] == t0
        )

    def image_germ(self, germ: tuple[int, int]) -> tuple[int, int]:
        i, sign = germ
        te, _ = self.edge_data[i]
        base = self.graph.germ_base(germ)
        t = self.tree.edges[te]
        return (te, +1 if self.vertex_map[base] == t.u else -1)


def _partition_rank_function(delta: int, parts: Sequence[Sequence[int]]
                             ) -> RankFunction:
    """Order-one rank function whose nonzero jumps are the part indicators."""
    part_sets = [frozenset(p) for p in parts]
    values = []
    for a in itertools.product(range(2), repeat=delta):
        supp = frozenset(i for i, c in enumerate(a) if c)
        if not supp:
            values.append(1)
        elif any(supp <= p for p in part_sets):
            values.append(0)
        else:
            values.append(-1)
    return validate_rank_function(values, delta, 1)


def pullback_from_tree(psi: HarmonicMorphism, x0: str) -> TropModule:
    """The pullback of the tree's canonical rank-one series along psi."""
    graph, tree = psi.graph, psi.tree
    t0 = psi.vertex_map[x0]
    D = Divisor(
        {
            V(x): psi.local_degree(x)
            for x in graph.vertices
            if psi.vertex_map[x] == t0
        }
    )
    paths = _tree_paths(tree, t0)
    # orient tree edges away from the base
    away_sign_tree = {}
    for t in tree.vertices:
        for (i, sign) in paths[t][-1:]:
            away_sign_tree[i] = sign

    fwd = []
    for i, e in enumerate(graph.edges):
        te, m = psi.edge_data[i]
        t = tree.edges[te]
        away = away_sign_tree.get(te, +1)
        # source orientation pushing forward to the away direction
        src_away = +1 if (away == +1) == (psi.vertex_map[e.u] == t.u) else -1
        fwd.append((0, m) if src_away == +1 else (-m, 0))

    ranks = {}
    for x in graph.vertices:
        germs = graph.germs(x)
        by_image: dict[tuple, list[int]] = {}
        for k, g in enumerate(germs):
            by_image.setdefault(psi.image_germ(g), []).append(k)
        ranks[x] = _partition_rank_function(len(germs), list(by_image.values()))
    S = SlopeStructure(graph, 1, fwd, ranks)

    gens = []
    for y in sorted(tree.vertices):
        g_y = _tree_unit_function(tree, t0, y)
        gens.append(
            PLFunction.from_vertex_values(
                graph, {x: g_y[psi.vertex_map[x]] for x in graph.vertices}
            )
        )
    return TropModule(graph, D, S, tuple(gens))
