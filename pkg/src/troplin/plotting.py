"""Matplotlib renderings of graphs, divisors and piecewise affine functions.

Layout is a fixed-seed spring embedding computed with plain numpy-free
Python, so repeated runs produce the same figure for the same input.
"""

from __future__ import annotations

import math
import random

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metricgraph import Divisor, MetricGraph, PLFunction  # noqa: E402


def _layout(graph: MetricGraph, iterations: int = 200) -> dict:
    rng = random.Random(0)
    pos = {
        v: (math.cos(2 * math.pi * i / len(graph.vertices)) + rng.uniform(-0.1, 0.1),
            math.sin(2 * math.pi * i / len(graph.vertices)) + rng.uniform(-0.1, 0.1))
        for i, v in enumerate(graph.vertices)
    }
    if len(graph.vertices) <= 2:
        return pos
    k = 1.0 / math.sqrt(len(graph.vertices))
    for step in range(iterations):
        disp = {v: [0.0, 0.0] for v in graph.vertices}
        for i, a in enumerate(graph.vertices):
            for b in graph.vertices[i + 1:]:
                dx = pos[a][0] - pos[b][0]
                dy = pos[a][1] - pos[b][1]
                d = max(math.hypot(dx, dy), 1e-6)
                f = k * k / d
                disp[a][0] += dx / d * f
                disp[a][1] += dy / d * f
                disp[b][0] -= dx / d * f
                disp[b][1] -= dy / d * f
        for e in graph.edges:
            dx = pos[e.u][0] - pos[e.v][0]
            dy = pos[e.u][1] - pos[e.v][1]
            d = max(math.hypot(dx, dy), 1e-6)
            f = d * d / k
            disp[e.u][0] -= dx / d * f
            disp[e.u][1] -= dy / d * f
            disp[e.v][0] += dx / d * f
            disp[e.v][1] += dy / d * f
        t = 0.1 * (1 - step / iterations)
        for v in graph.vertices:
            dx, dy = disp[v]
            d = max(math.hypot(dx, dy), 1e-6)
            pos[v] = (pos[v][0] + dx / d * min(d, t),
                      pos[v][1] + dy / d * min(d, t))
    return pos


def plot_graph(graph: MetricGraph, path: str, divisor: Divisor = None,
               title: str = "") -> None:
    pos = _layout(graph)
    fig, ax = plt.subplots(figsize=(5, 5))
    seen_pairs: dict = {}
    for e in graph.edges:
        n = seen_pairs.get((e.u, e.v), 0) + seen_pairs.get((e.v, e.u), 0)
        seen_pairs[(e.u, e.v)] = seen_pairs.get((e.u, e.v), 0) + 1
        (x0, y0), (x1, y1) = pos[e.u], pos[e.v]
        if e.u == e.v:
            ax.add_patch(plt.Circle((x0 + 0.08, y0 + 0.08), 0.08, fill=False))
        elif n == 0:
            ax.plot([x0, x1], [y0, y1], color="black", zorder=1)
        else:
            # bow out parallel edges
            mx, my = (x0 + x1) / 2, (y0 + y1) / 2
            nx_, ny_ = -(y1 - y0), (x1 - x0)
            norm = max(math.hypot(nx_, ny_), 1e-6)
            off = 0.12 * n
            cx, cy = mx + nx_ / norm * off, my + ny_ / norm * off
            ax.plot([x0, cx, x1], [y0, cy, y1], color="black", zorder=1)
        mx, my = (x0 + x1) / 2, (y0 + y1) / 2
        ax.annotate(str(e.length), (mx, my), fontsize=7, color="gray")
    for v, (x, y) in pos.items():
        ax.scatter([x], [y], s=120, color="#4477aa", zorder=2)
        ax.annotate(v, (x, y + 0.06), fontsize=9, ha="center")
    if divisor is not None:
        for p, c in sorted(divisor.coeffs.items()):
            if p.is_vertex():
                x, y = pos[p.vertex]
            else:
                e = graph.edges[p.edge]
                t = float(p.offset / e.length)
                x = pos[e.u][0] * (1 - t) + pos[e.v][0] * t
                y = pos[e.u][1] * (1 - t) + pos[e.v][1] * t
            ax.annotate(f"+{c}" if c > 0 else str(c), (x, y - 0.1),
                        fontsize=9, color="#cc3311", ha="center")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.axis("off")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_function(f: PLFunction, path: str, title: str = "") -> None:
    """Per-edge profiles on a grid of small axes."""
    n = len(f.graph.edges)
    cols = min(3, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.2 * rows),
                             squeeze=False)
    for i, e in enumerate(f.graph.edges):
        ax = axes[i // cols][i % cols]
        xs = [float(p) for p, _ in f.edge_bps[i]]
        ys = [float(v) for _, v in f.edge_bps[i]]
        ax.plot(xs, ys, marker="o", markersize=3)
        ax.set_title(f"{e.u} to {e.v}", fontsize=8)
        ax.tick_params(labelsize=7)
    for j in range(n, rows * cols):
        axes[j // cols][j % cols].axis("off")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
