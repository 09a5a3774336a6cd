"""Metric graphs over the rationals.

A metric graph is given by a combinatorial model: named vertices and edges
with positive rational lengths. Points are either vertices or interior
positions (edge index, offset). Rational functions are continuous piecewise
affine maps with integer slopes, stored per edge as exact breakpoint lists.
Everything is Fraction arithmetic; no floats anywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, NamedTuple, Optional, Sequence


class GraphMismatch(ValueError):
    pass


class Edge(NamedTuple):
    u: str
    v: str
    length: Fraction


def frac(x) -> Fraction:
    """Parse rationals from int, Fraction or 'p/q' strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not a rational: {x!r}")


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


@dataclass(frozen=True, order=True)
class GraphPoint:
    """Vertex point (kind 0) or interior edge point (kind 1)."""

    kind: int
    vertex: str = ""
    edge: int = -1
    offset: Fraction = Fraction(0)

    def __repr__(self):
        if self.kind == 0:
            return f"V({self.vertex})"
        return f"P(e{self.edge}@{self.offset})"

    def is_vertex(self) -> bool:
        return self.kind == 0


def V(name: str) -> GraphPoint:
    return GraphPoint(0, vertex=name)


class MetricGraph:
    """Connected graph with positive rational edge lengths.

    Loops and parallel edges are allowed; simple_model() subdivides them away
    when a slope structure needs a simple model.
    """

    def __init__(self, vertices: Sequence[str], edges: Sequence[tuple]):
        self.vertices: tuple[str, ...] = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("duplicate vertex names")
        vs = set(self.vertices)
        es = []
        for e in edges:
            u, v, ln = e
            ln = frac(ln)
            if ln <= 0:
                raise ValueError(f"edge {u}-{v} has non-positive length {ln}")
            if u not in vs or v not in vs:
                raise ValueError(f"edge endpoint missing: {u}-{v}")
            es.append(Edge(u, v, ln))
        self.edges: tuple[Edge, ...] = tuple(es)
        self._germs: dict[str, tuple[tuple[int, int], ...]] = {}
        for name in self.vertices:
            g = []
            for i, e in enumerate(self.edges):
                if e.u == name:
                    g.append((i, +1))
                if e.v == name:
                    g.append((i, -1))
            self._germs[name] = tuple(sorted(g, key=lambda t: (t[0], -t[1])))
        if not self._connected():
            raise ValueError("graph is not connected")

    def _connected(self) -> bool:
        if not self.vertices:
            return False
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            x = stack.pop()
            for e in self.edges:
                for a, b in ((e.u, e.v), (e.v, e.u)):
                    if a == x and b not in seen:
                        seen.add(b)
                        stack.append(b)
        return len(seen) == len(self.vertices)

    # -- structure -----------------------------------------------------

    def germs(self, vertex: str) -> tuple[tuple[int, int], ...]:
        """Outgoing tangent directions at a vertex as (edge index, sign);
        sign +1 leaves along increasing position. Loops contribute both."""
        return self._germs[vertex]

    def degree(self, vertex: str) -> int:
        return len(self._germs[vertex])

    def germ_base(self, germ: tuple[int, int]) -> str:
        e = self.edges[germ[0]]
        return e.u if germ[1] == +1 else e.v

    def germ_target(self, germ: tuple[int, int]) -> str:
        e = self.edges[germ[0]]
        return e.v if germ[1] == +1 else e.u

    def is_simple(self) -> bool:
        seen = set()
        for e in self.edges:
            if e.u == e.v:
                return False
            key = tuple(sorted((e.u, e.v)))
            if key in seen:
                return False
            seen.add(key)
        return True

    def is_tree(self) -> bool:
        return len(self.edges) == len(self.vertices) - 1

    def total_length(self) -> Fraction:
        return sum((e.length for e in self.edges), Fraction(0))

    # -- points --------------------------------------------------------

    def point(self, name: str) -> GraphPoint:
        if name not in self._germs:
            raise ValueError(f"no vertex {name}")
        return V(name)

    def at(self, edge: int, offset) -> GraphPoint:
        offset = frac(offset)
        e = self.edges[edge]
        if offset == 0:
            return V(e.u)
        if offset == e.length:
            return V(e.v)
        if not 0 < offset < e.length:
            raise ValueError(f"offset {offset} outside edge of length {e.length}")
        return GraphPoint(1, edge=edge, offset=offset)

    def tangents(self, p: GraphPoint) -> tuple[tuple[int, int], ...]:
        if p.is_vertex():
            return self.germs(p.vertex)
        return ((p.edge, +1), (p.edge, -1))

    # -- derived models ------------------------------------------------

    def simple_model(self) -> "Refinement":
        """Subdivide loops (twice) and parallel edges (once) to a simple model."""
        points = []
        seen_pairs = set()
        for i, e in enumerate(self.edges):
            if e.u == e.v:
                points.append(self.at(i, e.length / 3))
                points.append(self.at(i, 2 * e.length / 3))
            else:
                key = tuple(sorted((e.u, e.v)))
                if key in seen_pairs:
                    points.append(self.at(i, e.length / 2))
                else:
                    seen_pairs.add(key)
        return refine_model(self, points)

    def to_json_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"u": e.u, "v": e.v, "len": frac_str(e.length)} for e in self.edges
            ],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "MetricGraph":
        return MetricGraph(
            data["vertices"],
            [(e["u"], e["v"], frac(e["len"])) for e in data["edges"]],
        )

    def __eq__(self, other):
        return (
            isinstance(other, MetricGraph)
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.vertices, self.edges))


class Divisor:
    """Finite integer combination of points; zero coefficients dropped."""

    def __init__(self, coeffs: Optional[dict] = None):
        self.coeffs: dict[GraphPoint, int] = {
            p: c for p, c in (coeffs or {}).items() if c != 0
        }

    @staticmethod
    def of(*pairs) -> "Divisor":
        d: dict[GraphPoint, int] = {}
        for p, c in pairs:
            d[p] = d.get(p, 0) + c
        return Divisor(d)

    def __getitem__(self, p: GraphPoint) -> int:
        return self.coeffs.get(p, 0)

    def degree(self) -> int:
        return sum(self.coeffs.values())

    def support(self) -> list[GraphPoint]:
        return sorted(self.coeffs)

    def is_effective(self) -> bool:
        return all(c >= 0 for c in self.coeffs.values())

    def __add__(self, other: "Divisor") -> "Divisor":
        d = dict(self.coeffs)
        for p, c in other.coeffs.items():
            d[p] = d.get(p, 0) + c
        return Divisor(d)

    def __sub__(self, other: "Divisor") -> "Divisor":
        d = dict(self.coeffs)
        for p, c in other.coeffs.items():
            d[p] = d.get(p, 0) - c
        return Divisor(d)

    def __neg__(self) -> "Divisor":
        return Divisor({p: -c for p, c in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, Divisor) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __repr__(self):
        if not self.coeffs:
            return "Divisor(0)"
        terms = " + ".join(f"{c}*{p}" for p, c in sorted(self.coeffs.items()))
        return f"Divisor({terms})"

    def to_json_list(self, graph: MetricGraph) -> list:
        out = []
        for p in self.support():
            out.append({"point": point_to_json(p), "coeff": self.coeffs[p]})
        return out

    @staticmethod
    def from_json_list(graph: MetricGraph, data: list) -> "Divisor":
        return Divisor.of(
            *((point_from_json(graph, row["point"]), int(row["coeff"])) for row in data)
        )


def point_to_json(p: GraphPoint):
    if p.is_vertex():
        return p.vertex
    return {"edge": p.edge, "offset": frac_str(p.offset)}


def point_from_json(graph: MetricGraph, data) -> GraphPoint:
    if isinstance(data, str):
        return graph.point(data)
    return graph.at(int(data["edge"]), frac(data["offset"]))


class PLFunction:
    """Piecewise affine function with integer slopes, exact rational data.

    Stored per edge as breakpoints ((pos, value), ...) from position 0 to the
    edge length. Canonical form merges collinear segments; equality is
    structural equality of canonical forms on the same graph.
    """

    def __init__(self, graph: MetricGraph, edge_bps: Sequence[Sequence[tuple]]):
        self.graph = graph
        if len(edge_bps) != len(graph.edges):
            raise ValueError("need one breakpoint list per edge")
        canon = []
        for i, bps in enumerate(edge_bps):
            e = graph.edges[i]
            bps = [(frac(p), frac(v)) for p, v in bps]
            if not bps or bps[0][0] != 0 or bps[-1][0] != e.length:
                raise ValueError(f"edge {i}: breakpoints must span [0, {e.length}]")
            merged = [bps[0]]
            for k in range(1, len(bps)):
                p0, v0 = merged[-1]
                p1, v1 = bps[k]
                if p1 == p0:
                    if v1 != v0:
                        raise ValueError(f"edge {i}: discontinuity at {p1}")
                    continue
                if p1 < p0:
                    raise ValueError(f"edge {i}: breakpoints out of order")
                s = (v1 - v0) / (p1 - p0)
                if s.denominator != 1:
                    raise ValueError(f"edge {i}: slope {s} is not an integer")
                if len(merged) >= 2:
                    pp, vv = merged[-2]
                    if (v0 - vv) / (p0 - pp) == s:
                        merged.pop()
                merged.append((p1, v1))
            canon.append(tuple(merged))
        self.edge_bps: tuple = tuple(canon)
        # vertex-value consistency
        vals: dict[str, Fraction] = {}
        for i, e in enumerate(graph.edges):
            for name, val in ((e.u, canon[i][0][1]), (e.v, canon[i][-1][1])):
                if name in vals:
                    if vals[name] != val:
                        raise ValueError(f"inconsistent values at vertex {name}")
                else:
                    vals[name] = val
        for name in graph.vertices:
            if name not in vals:  # isolated vertex: impossible in connected graph
                vals[name] = Fraction(0)
        self._vertex_values = vals

    # -- constructors ---------------------------------------------------

    @staticmethod
    def constant(graph: MetricGraph, c) -> "PLFunction":
        c = frac(c)
        return PLFunction(
            graph, [((Fraction(0), c), (e.length, c)) for e in graph.edges]
        )

    @staticmethod
    def from_vertex_values(graph: MetricGraph, values: dict) -> "PLFunction":
        """Edge-wise linear interpolation; slopes must come out integral."""
        bps = []
        for e in graph.edges:
            bps.append(((Fraction(0), frac(values[e.u])), (e.length, frac(values[e.v]))))
        return PLFunction(graph, bps)

    # -- queries ---------------------------------------------------------

    def vertex_value(self, name: str) -> Fraction:
        return self._vertex_values[name]

    def value_at(self, p: GraphPoint) -> Fraction:
        if p.is_vertex():
            return self._vertex_values[p.vertex]
        bps = self.edge_bps[p.edge]
        for k in range(1, len(bps)):
            p0, v0 = bps[k - 1]
            p1, v1 = bps[k]
            if p0 <= p.offset <= p1:
                return v0 + (v1 - v0) * (p.offset - p0) / (p1 - p0)
        raise AssertionError("offset not covered")

    def _slope_from(self, edge: int, pos: Fraction, sign: int) -> int:
        """Outgoing slope at position pos of an edge, in the given direction."""
        bps = self.edge_bps[edge]
        if sign == +1:
            for k in range(1, len(bps)):
                if bps[k - 1][0] <= pos < bps[k][0]:
                    return int(
                        (bps[k][1] - bps[k - 1][1]) / (bps[k][0] - bps[k - 1][0])
                    )
        else:
            for k in range(1, len(bps)):
                if bps[k - 1][0] < pos <= bps[k][0]:
                    return -int(
                        (bps[k][1] - bps[k - 1][1]) / (bps[k][0] - bps[k - 1][0])
                    )
        raise ValueError(f"no segment at e{edge} position {pos} sign {sign}")

    def slope_at_germ(self, germ: tuple[int, int]) -> int:
        e, sign = germ
        pos = Fraction(0) if sign == +1 else self.graph.edges[e].length
        return self._slope_from(e, pos, sign)

    def slopes_at(self, p: GraphPoint) -> dict:
        """Outgoing slopes per tangent direction, keyed by (edge, sign)."""
        if p.is_vertex():
            return {g: self.slope_at_germ(g) for g in self.graph.germs(p.vertex)}
        return {
            (p.edge, +1): self._slope_from(p.edge, p.offset, +1),
            (p.edge, -1): self._slope_from(p.edge, p.offset, -1),
        }

    def breakpoints(self) -> list[GraphPoint]:
        """All vertices plus interior breakpoints (canonical form)."""
        pts = [V(name) for name in self.graph.vertices]
        for i, bps in enumerate(self.edge_bps):
            for pos, _ in bps[1:-1]:
                pts.append(self.graph.at(i, pos))
        return pts

    def divisor(self) -> Divisor:
        coeffs: dict[GraphPoint, int] = {}
        for name in self.graph.vertices:
            s = -sum(self.slope_at_germ(g) for g in self.graph.germs(name))
            if s:
                coeffs[V(name)] = s
        for i, bps in enumerate(self.edge_bps):
            for k in range(1, len(bps) - 1):
                left = (bps[k][1] - bps[k - 1][1]) / (bps[k][0] - bps[k - 1][0])
                right = (bps[k + 1][1] - bps[k][1]) / (bps[k + 1][0] - bps[k][0])
                if left != right:
                    coeffs[self.graph.at(i, bps[k][0])] = int(left - right)
        return Divisor(coeffs)

    def is_zero(self) -> bool:
        return all(
            len(bps) == 2 and bps[0][1] == 0 and bps[1][1] == 0
            for bps in self.edge_bps
        )

    def min_value(self) -> Fraction:
        return min(v for bps in self.edge_bps for _, v in bps)

    def max_value(self) -> Fraction:
        return max(v for bps in self.edge_bps for _, v in bps)

    # -- arithmetic -------------------------------------------------------

    def add_constant(self, c) -> "PLFunction":
        c = frac(c)
        return PLFunction(
            self.graph,
            [tuple((p, v + c) for p, v in bps) for bps in self.edge_bps],
        )

    def __neg__(self) -> "PLFunction":
        return PLFunction(
            self.graph, [tuple((p, -v) for p, v in bps) for bps in self.edge_bps]
        )

    def __sub__(self, other: "PLFunction") -> "PLFunction":
        if self.graph != other.graph:
            raise GraphMismatch("functions live on different graphs")
        out = []
        for i in range(len(self.graph.edges)):
            pos = sorted(
                {p for p, _ in self.edge_bps[i]} | {p for p, _ in other.edge_bps[i]}
            )
            out.append(
                [
                    (p, self._eval_on_edge(i, p) - other._eval_on_edge(i, p))
                    for p in pos
                ]
            )
        return PLFunction(self.graph, out)

    def _eval_on_edge(self, edge: int, pos: Fraction) -> Fraction:
        bps = self.edge_bps[edge]
        for k in range(1, len(bps)):
            p0, v0 = bps[k - 1]
            p1, v1 = bps[k]
            if p0 <= pos <= p1:
                return v0 + (v1 - v0) * (pos - p0) / (p1 - p0)
        raise AssertionError("position outside edge")

    def __eq__(self, other):
        return (
            isinstance(other, PLFunction)
            and self.graph == other.graph
            and self.edge_bps == other.edge_bps
        )

    def __hash__(self):
        return hash((self.graph, self.edge_bps))

    def __repr__(self):
        return f"PLFunction({self.edge_bps})"

    def to_json_list(self) -> list:
        return [
            [[frac_str(p), frac_str(v)] for p, v in bps] for bps in self.edge_bps
        ]

    @staticmethod
    def from_json_list(graph: MetricGraph, data: list) -> "PLFunction":
        return PLFunction(
            graph, [[(frac(p), frac(v)) for p, v in bps] for bps in data]
        )


def add_constant(f: PLFunction, c) -> PLFunction:
    return f.add_constant(c)


def tropical_min(f: PLFunction, g: PLFunction) -> PLFunction:
    """Pointwise minimum; crossings introduce exact rational breakpoints."""
    if f.graph != g.graph:
        raise GraphMismatch("functions live on different graphs")
    out = []
    for i in range(len(f.graph.edges)):
        pos = sorted(
            {p for p, _ in f.edge_bps[i]} | {p for p, _ in g.edge_bps[i]}
        )
        pts = []
        for k, p in enumerate(pos):
            fv, gv = f._eval_on_edge(i, p), g._eval_on_edge(i, p)
            pts.append((p, min(fv, gv)))
            if k + 1 < len(pos):
                q = pos[k + 1]
                fq, gq = f._eval_on_edge(i, q), g._eval_on_edge(i, q)
                d0, d1 = fv - gv, fq - gq
                if (d0 > 0 > d1) or (d0 < 0 < d1):
                    t = p + (q - p) * d0 / (d0 - d1)
                    pts.append((t, f._eval_on_edge(i, t)))
        out.append(pts)
    return PLFunction(f.graph, out)


def tropical_min_many(fs: Sequence[PLFunction]) -> PLFunction:
    acc = fs[0]
    for f in fs[1:]:
        acc = tropical_min(acc, f)
    return acc


def divisor_of(f: PLFunction) -> Divisor:
    return f.divisor()


def slopes_at(f: PLFunction, p: GraphPoint) -> dict:
    return f.slopes_at(p)


# -- model refinement ------------------------------------------------------


class Refinement:
    """A subdivided model together with point/function/divisor transfer."""

    def __init__(self, old: MetricGraph, graph: MetricGraph,
                 edge_pieces: list[list[tuple[int, Fraction]]]):
        self.old = old
        self.graph = graph
        # per old edge: list of (new edge index, start offset on the old edge),
        # in increasing offset order; every new edge runs in the old direction.
        self.edge_pieces = edge_pieces

    def map_point(self, p: GraphPoint) -> GraphPoint:
        if p.is_vertex():
            return p
        pieces = self.edge_pieces[p.edge]
        for j, (ne, start) in enumerate(pieces):
            ln = self.graph.edges[ne].length
            if start <= p.offset <= start + ln:
                return self.graph.at(ne, p.offset - start)
        raise AssertionError("point not covered by refinement")

    def map_divisor(self, D: Divisor) -> Divisor:
        return Divisor({self.map_point(p): c for p, c in D.coeffs.items()})

    def map_function(self, f: PLFunction) -> PLFunction:
        bps = []
        for ne, e in enumerate(self.graph.edges):
            old_e, start = self._provenance[ne]
            old_bps = f.edge_bps[old_e]
            pos = sorted(
                {Fraction(0), e.length}
                | {
                    p - start
                    for p, _ in old_bps
                    if start < p < start + e.length
                }
            )
            bps.append(
                [(p, f._eval_on_edge(old_e, p + start)) for p in pos]
            )
        return PLFunction(self.graph, bps)

    @property
    def _provenance(self) -> dict[int, tuple[int, Fraction]]:
        prov = {}
        for old_e, pieces in enumerate(self.edge_pieces):
            for ne, start in pieces:
                prov[ne] = (old_e, start)
        return prov


def refine_model(graph: MetricGraph, points: Iterable[GraphPoint]) -> Refinement:
    """Subdivide so each given interior point becomes a vertex. Idempotent:
    vertex points are ignored; lengths are preserved."""
    cuts: dict[int, set[Fraction]] = {i: set() for i in range(len(graph.edges))}
    for p in points:
        if not p.is_vertex():
            cuts[p.edge].add(p.offset)
    new_vertices = list(graph.vertices)
    new_edges: list[tuple[str, str, Fraction]] = []
    edge_pieces: list[list[tuple[int, Fraction]]] = []
    for i, e in enumerate(graph.edges):
        offs = sorted(cuts[i])
        names = []
        for off in offs:
            name = f"@e{i}:{off.numerator}/{off.denominator}"
            while name in new_vertices:
                name += "'"
            new_vertices.append(name)
            names.append(name)
        chain = [(Fraction(0), e.u)] + list(zip(offs, names)) + [(e.length, e.v)]
        pieces = []
        for k in range(len(chain) - 1):
            (p0, n0), (p1, n1) = chain[k], chain[k + 1]
            pieces.append((len(new_edges), p0))
            new_edges.append((n0, n1, p1 - p0))
        edge_pieces.append(pieces)
    return Refinement(graph, MetricGraph(new_vertices, new_edges), edge_pieces)


def compose_refinements(first: Refinement, second: Refinement) -> Refinement:
    """The refinement first.old -> second.graph, where second refines
    first.graph."""
    if second.old is not first.graph and second.old != first.graph:
        raise GraphMismatch("refinements do not chain")
    pieces = []
    for old_e in range(len(first.old.edges)):
        combined = []
        for mid_e, start1 in first.edge_pieces[old_e]:
            for new_e, start2 in second.edge_pieces[mid_e]:
                combined.append((new_e, start1 + start2))
        combined.sort(key=lambda t: t[1])
        pieces.append(combined)
    return Refinement(first.old, second.graph, pieces)


# -- linear equivalence ----------------------------------------------------


def _solve_fraction(matrix: list[list[Fraction]], rhs: list[Fraction]):
    """Gaussian elimination over Fraction; returns solution or None."""
    n = len(matrix)
    m = len(matrix[0]) if n else 0
    A = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    piv_cols = []
    row = 0
    for col in range(m):
        piv = next((k for k in range(row, n) if A[k][col] != 0), None)
        if piv is None:
            continue
        A[row], A[piv] = A[piv], A[row]
        pv = A[row][col]
        A[row] = [x / pv for x in A[row]]
        for k in range(n):
            if k != row and A[k][col] != 0:
                fct = A[k][col]
                A[k] = [x - fct * y for x, y in zip(A[k], A[row])]
        piv_cols.append(col)
        row += 1
        if row == n:
            break
    for k in range(row, n):
        if A[k][m] != 0:
            return None
    sol = [Fraction(0)] * m
    for rr, col in enumerate(piv_cols):
        sol[col] = A[rr][m]
    return sol


def linear_equivalent(D1: Divisor, D2: Divisor, graph: MetricGraph) -> Optional[PLFunction]:
    """Witness f with D1 = D2 + div(f), or None.

    Works on a uniform subdivision fine enough to hold the supports, where
    principality reduces to an integer solution of the discrete Laplacian
    system (exact Fraction solve, then an integrality shift).
    """
    if D1.degree() != D2.degree():
        return None
    diff = D1 - D2
    if not diff.coeffs:
        return PLFunction.constant(graph, 0)

    ref = refine_model(graph, diff.support())
    rd = ref.map_divisor(diff)
    rg = ref.graph

    den = lcm(*(e.length.denominator for e in rg.edges))
    shortest = min(e.length for e in rg.edges)
    unit = Fraction(1, den)
    while shortest / unit < 3:
        unit /= 2
    # lattice nodes: vertices plus interior subdivision points per edge
    nodes: list = list(rg.vertices)
    node_ix = {n: k for k, n in enumerate(nodes)}
    adj: list[list[int]] = [[] for _ in nodes]

    def add_node(key):
        node_ix[key] = len(nodes)
        nodes.append(key)
        adj.append([])

    for i, e in enumerate(rg.edges):
        segs = int(e.length / unit)
        assert segs * unit == e.length
        prev = node_ix[e.u]
        for k in range(1, segs):
            add_node((i, k))
            cur = node_ix[(i, k)]
            adj[prev].append(cur)
            adj[cur].append(prev)
            prev = cur
        adj[prev].append(node_ix[e.v])
        adj[node_ix[e.v]].append(prev)

    b = [Fraction(0)] * len(nodes)
    for p, c in rd.coeffs.items():
        if p.is_vertex():
            b[node_ix[p.vertex]] = Fraction(c)
        else:
            k = int(p.offset / unit)
            assert k * unit == p.offset
            b[node_ix[(p.edge, k)]] = Fraction(c)

    # Laplacian L n = b with n[0] = 0 (drop variable 0).
    nn = len(nodes)
    mat = [[Fraction(0)] * (nn - 1) for _ in range(nn)]
    for x in range(nn):
        for y in adj[x]:
            if x > 0:
                mat[x][x - 1] += 1
            if y > 0:
                mat[x][y - 1] -= 1
    sol = _solve_fraction(mat, b)
    if sol is None:
        return None
    n_vals = [Fraction(0)] + sol
    # an integer solution exists iff all entries share one fractional part
    fpart = n_vals[0] - (n_vals[0].numerator // n_vals[0].denominator)
    n_int = [x - fpart for x in n_vals]
    if any(x.denominator != 1 for x in n_int):
        return None

    # rebuild the witness on the refined graph, then pull back to the original
    def node_value(i: int, k: int) -> Fraction:
        e = rg.edges[i]
        if k == 0:
            return n_int[node_ix[e.u]] * unit
        segs = int(e.length / unit)
        if k == segs:
            return n_int[node_ix[e.v]] * unit
        return n_int[node_ix[(i, k)]] * unit

    bps_new = []
    for i, e in enumerate(rg.edges):
        segs = int(e.length / unit)
        bps_new.append([(k * unit, node_value(i, k)) for k in range(segs + 1)])
    f_ref = PLFunction(rg, bps_new)

    # transfer back along the refinement
    bps_old = []
    for old_e_ix, e in enumerate(graph.edges):
        pieces = ref.edge_pieces[old_e_ix]
        pts: list[tuple[Fraction, Fraction]] = []
        for ne, start in pieces:
            for p, v in f_ref.edge_bps[ne]:
                pts.append((start + p, v))
        merged = []
        for p, v in pts:
            if not merged or merged[-1][0] != p:
                merged.append((p, v))
        bps_old.append(merged)
    f = PLFunction(graph, bps_old)
    assert f.divisor() == diff, "witness does not reproduce the divisor"
    return f
