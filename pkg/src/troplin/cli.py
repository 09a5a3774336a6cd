"""Command line front end.

Every subcommand prints a JSON report to stdout (or writes JSON + CSV next
to --out) and exits with 0 for verified/true, 1 for refuted/false, 2 for
inconclusive, 3 for input errors. Reports carry a null timing field by
default so repeated runs are byte-identical; pass --timing to fill it in.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time
from fractions import Fraction

import click

from . import matroidcomplex as mc
from . import permarray as pa
from .hypercube import (
    RankFunction,
    RankFunctionError,
    jumps,
    partition_top_jumps,
    validate_rank_function,
)
from .metricgraph import (
    Divisor,
    GraphPoint,
    MetricGraph,
    PLFunction,
    frac,
    point_to_json,
)
from .slopes import (
    ExplosionGuard,
    SlopeStructure,
    crude_rank_check,
    enumerate_slope_structures,
    in_rat_D_S,
)
from .series import (
    HarmonicMorphism,
    NotHarmonic,
    NotRankOne,
    NotRefined,
    QuotientNotTree,
    TropModule,
    check_linear_series,
    classify_g1d,
    f_v,
    local_reduced_step,
    pullback_from_tree,
    reduced_divisor,
    tropical_rank,
)

EXIT_TRUE = 0
EXIT_FALSE = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT = 3


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _report(command: str, inputs: dict, parameters: dict, verdict: str,
            detail: dict, timing) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "parameters": parameters,
        "verdict": verdict,
        "detail": detail,
        "timing": timing,
    }


def _flatten(prefix: str, obj, rows: list) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, "" if obj is None else str(obj)))


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        with open(out + ".json", "w") as fh:
            fh.write(text + "\n")
        rows: list = []
        _flatten("", report, rows)
        with open(out + ".csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            w.writerows(rows)
    click.echo(text)


def _parse_point(graph: MetricGraph, s: str) -> GraphPoint:
    """Vertex name, or 'e{i}@{offset}' for an interior point."""
    if s.startswith("e") and "@" in s:
        head, _, off = s.partition("@")
        try:
            return graph.at(int(head[1:]), frac(off))
        except (ValueError, IndexError):
            pass
    try:
        return graph.point(s)
    except ValueError:
        click.echo(f"input error: no point {s!r}", err=True)
        sys.exit(EXIT_INPUT)


def _function_from(graph: MetricGraph, data) -> PLFunction:
    try:
        return PLFunction.from_json_list(graph, data)
    except (ValueError, KeyError, TypeError) as exc:
        click.echo(f"input error: bad function data: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _module_from(data: dict) -> TropModule:
    try:
        return TropModule.from_json_dict(data)
    except (ValueError, KeyError, TypeError) as exc:
        click.echo(f"input error: bad module data: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _timing(flag: bool, t0: float):
    return round(time.monotonic() - t0, 6) if flag else None


def _divisor_json(D: Divisor, graph: MetricGraph) -> list:
    return D.to_json_list(graph)


common = [
    click.option("--out", type=click.Path(), default=None,
                 help="write report to OUT.json and OUT.csv"),
    click.option("--timing/--no-timing", default=False,
                 help="include wall time in the report"),
]


def _with_common(f):
    for opt in reversed(common):
        f = opt(f)
    return f


@click.group()
def main():
    """Exact computations with combinatorial linear series on metric graphs."""


@main.command("validate-rank")
@click.argument("path", type=click.Path(exists=True))
@_with_common
def cmd_validate_rank(path, out, timing):
    """Check a rank function table; report jumps and the axis partition."""
    t0 = time.monotonic()
    data = _load_json(path)
    try:
        delta, r = int(data["delta"]), int(data["r"])
    except (KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    try:
        rf = validate_rank_function(data["values"], delta, r)
    except RankFunctionError as exc:
        rep = _report("validate-rank", {path: _sha256(path)},
                      {"delta": delta, "r": r}, "refuted",
                      {"violation": type(exc).__name__, "message": str(exc),
                       "witness": [list(w) for w in exc.witness]},
                      _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_FALSE)
    parts = sorted(sorted(p) for p in partition_top_jumps(rf))
    rep = _report("validate-rank", {path: _sha256(path)},
                  {"delta": delta, "r": r}, "verified",
                  {"jumps": sorted(list(a) for a in jumps(rf)),
                   "axis_partition": parts},
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("perm-convert")
@click.argument("path", type=click.Path(exists=True))
@_with_common
def cmd_perm_convert(path, out, timing):
    """Convert between permutation arrays and rank functions (by file keys)."""
    t0 = time.monotonic()
    data = _load_json(path)
    try:
        if "dots" in data:
            P = pa.DotArray.from_json_dict(data)
            result = pa.rank_function_from_array(P).to_json_dict()
            direction = "array-to-rank"
        elif "values" in data:
            rf = validate_rank_function(
                data["values"], int(data["delta"]), int(data["r"])
            )
            result = pa.array_from_rank_function(rf).to_json_dict()
            direction = "rank-to-array"
        else:
            raise ValueError("expected 'dots' or 'values' in the input")
    except (pa.NotPermutationArray, RankFunctionError, ValueError) as exc:
        rep = _report("perm-convert", {path: _sha256(path)}, {}, "refuted",
                      {"error": type(exc).__name__, "message": str(exc)},
                      _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_FALSE)
    rep = _report("perm-convert", {path: _sha256(path)},
                  {"direction": direction}, "verified", {"result": result},
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("matroid-export")
@click.argument("path", type=click.Path(exists=True))
@click.option("--reconstruct", is_flag=True,
              help="treat the input as exported matroids and rebuild the rank function")
@_with_common
def cmd_matroid_export(path, out, timing, reconstruct):
    """Local matroids of a rank function, or the reverse reconstruction."""
    t0 = time.monotonic()
    data = _load_json(path)
    try:
        if reconstruct:
            complex_ = mc.MatroidComplex(
                int(data["delta"]), int(data["r"]),
                {
                    tuple(entry["point"]): mc.LocalMatroid.from_json_dict(entry)
                    for entry in data["matroids"]
                },
            )
            rf = mc.rank_function_from_complex(complex_)
            detail = {"rank_function": rf.to_json_dict()}
        else:
            rf = validate_rank_function(
                data["values"], int(data["delta"]), int(data["r"])
            )
            detail = {
                "delta": rf.delta,
                "r": rf.r,
                "matroids": [
                    dict(point=list(a), **m.to_json_dict())
                    for a, m in mc.export_local_matroids(rf)
                ],
            }
    except (mc.ConditionViolated, mc.PathInconsistent, RankFunctionError) as exc:
        rep = _report("matroid-export", {path: _sha256(path)},
                      {"reconstruct": reconstruct}, "refuted",
                      {"error": type(exc).__name__, "message": str(exc)},
                      _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_FALSE)
    except (KeyError, ValueError, TypeError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    rep = _report("matroid-export", {path: _sha256(path)},
                  {"reconstruct": reconstruct}, "verified", detail,
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("divisor-of")
@click.argument("path", type=click.Path(exists=True))
@click.option("--plots", type=click.Path(), default=None,
              help="directory for rendered figures")
@_with_common
def cmd_divisor_of(path, out, timing, plots):
    """Principal divisor of a piecewise affine function."""
    t0 = time.monotonic()
    data = _load_json(path)
    try:
        graph = MetricGraph.from_json_dict(data["model"])
        f = _function_from(graph, data["function"])
    except (KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    D = f.divisor()
    if plots:
        os.makedirs(plots, exist_ok=True)
        from .plotting import plot_function, plot_graph

        plot_graph(graph, os.path.join(plots, "divisor.png"), divisor=D,
                   title="principal divisor")
        plot_function(f, os.path.join(plots, "function.png"),
                      title="edge profiles")
    rep = _report("divisor-of", {path: _sha256(path)}, {}, "verified",
                  {"divisor": _divisor_json(D, graph), "degree": D.degree()},
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("check-compat")
@click.argument("structure", type=click.Path(exists=True))
@click.argument("function", type=click.Path(exists=True))
@click.option("--divisor", "divisor_path", type=click.Path(exists=True),
              default=None, help="also require D + div(f) >= 0")
@_with_common
def cmd_check_compat(structure, function, divisor_path, out, timing):
    """Is a function compatible with a slope structure (and a divisor)?"""
    t0 = time.monotonic()
    sdata = _load_json(structure)
    try:
        S = SlopeStructure.from_json_dict(sdata)
    except (KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    f = _function_from(S.graph, _load_json(function))
    inputs = {structure: _sha256(structure), function: _sha256(function)}
    if divisor_path:
        D = Divisor.from_json_list(S.graph, _load_json(divisor_path))
        inputs[divisor_path] = _sha256(divisor_path)
        ok = in_rat_D_S(f, D, S)
    else:
        from .slopes import is_compatible

        ok = is_compatible(f, S)
    rep = _report("check-compat", inputs,
                  {"with_divisor": divisor_path is not None},
                  "verified" if ok else "refuted", {"compatible": ok},
                  _timing(timing, t0))
    _emit(rep, out)
    sys.exit(EXIT_TRUE if ok else EXIT_FALSE)


@main.command("rank-check")
@click.argument("path", type=click.Path(exists=True))
@click.option("--grid-denominator", default=1, show_default=True)
@click.option("--mode", type=click.Choice(["crude", "refined"]),
              default="crude", show_default=True)
@click.option("--bound", default=200000, show_default=True,
              help="search bound for dependence constants (refined mode)")
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--plots", type=click.Path(), default=None)
@_with_common
def cmd_rank_check(path, grid_denominator, mode, bound, seed, jobs, plots,
                   out, timing):
    """Grid-relative rank verification for a divisor with a slope structure.

    The input is either a module (with generators, enabling membership
    filtering and refined mode) or a bare divisor + structure pair.
    """
    t0 = time.monotonic()
    data = _load_json(path)
    params = {
        "grid_denominator": grid_denominator, "mode": mode, "bound": bound,
        "seed": seed, "jobs": jobs,
    }
    try:
        if "generators" in data:
            M = _module_from(data)
            verdict = check_linear_series(
                M, grid_denominator=grid_denominator, mode=mode,
                dependence_bound=bound,
            )
            graph, D = M.graph, M.divisor
        else:
            S = SlopeStructure.from_json_dict(data["structure"])
            D = Divisor.from_json_list(S.graph, data["divisor"])
            if mode != "crude":
                click.echo("input error: refined mode needs generators", err=True)
                sys.exit(EXIT_INPUT)
            verdict = crude_rank_check(
                D, S, grid_denominator=grid_denominator
            )
            graph = S.graph
    except (KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    if plots:
        os.makedirs(plots, exist_ok=True)
        from .plotting import plot_graph

        plot_graph(graph, os.path.join(plots, "model.png"), divisor=D,
                   title=f"rank check: {verdict.status}")
    witness_repr = {
        k: (v.to_json_list() if isinstance(v, PLFunction) else v)
        for k, v in sorted(verdict.witnesses.items())
    }
    rep = _report("rank-check", {path: _sha256(path)}, params, verdict.status,
                  {"grid": verdict.grid, "notes": verdict.notes,
                   "witnesses": witness_repr},
                  _timing(timing, t0))
    _emit(rep, out)
    codes = {"verified": EXIT_TRUE, "refuted": EXIT_FALSE,
             "inconclusive": EXIT_INCONCLUSIVE}
    sys.exit(codes[verdict.status])


@main.command("enumerate-slopes")
@click.argument("path", type=click.Path(exists=True))
@click.option("--order", "r", default=1, show_default=True)
@click.option("--bound", "k", default=2, show_default=True,
              help="slopes searched in [-bound, bound]")
@click.option("--seed", default=0, show_default=True)
@_with_common
def cmd_enumerate_slopes(path, r, k, seed, out, timing):
    """Enumerate slope structures on a graph, up to removable subdivisions."""
    t0 = time.monotonic()
    data = _load_json(path)
    try:
        graph = MetricGraph.from_json_dict(data["model"])
        D = Divisor.from_json_list(graph, data.get("divisor", []))
    except (KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    params = {"order": r, "bound": k, "seed": seed}
    try:
        structures = enumerate_slope_structures(graph, D, r, k)
    except ExplosionGuard as exc:
        rep = _report("enumerate-slopes", {path: _sha256(path)}, params,
                      "inconclusive", {"error": str(exc)}, _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_INCONCLUSIVE)
    rep = _report("enumerate-slopes", {path: _sha256(path)}, params,
                  "verified",
                  {"count": len(structures),
                   "structures": [S.to_json_dict() for S in structures]},
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("reduce")
@click.argument("path", type=click.Path(exists=True))
@click.option("--at", "point_s", required=True,
              help="base point: vertex name or e{i}@{offset}")
@click.option("--step", default=None,
              help="explicit local step 'edge,sign,distance' from the base")
@click.option("--plots", type=click.Path(), default=None)
@_with_common
def cmd_reduce(path, point_s, step, plots, out, timing):
    """Reduced divisor at a point, or one explicit local step past it."""
    t0 = time.monotonic()
    M = _module_from(_load_json(path))
    p = _parse_point(M.graph, point_s)
    params = {"point": point_s, "step": step}
    try:
        if step:
            e, sign, dist = step.split(",")
            D = local_reduced_step(M, p, (int(e), int(sign)), frac(dist))
            detail = {"divisor": _divisor_json(D, M.graph)}
        else:
            f = f_v(M, p)
            D = reduced_divisor(M, p)
            detail = {"divisor": _divisor_json(D, M.graph),
                      "witness": f.to_json_list()}
    except (ValueError, KeyError) as exc:
        rep = _report("reduce", {path: _sha256(path)}, params, "refuted",
                      {"error": type(exc).__name__, "message": str(exc)},
                      _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_FALSE)
    if plots:
        os.makedirs(plots, exist_ok=True)
        from .plotting import plot_graph

        plot_graph(M.graph, os.path.join(plots, "reduced.png"), divisor=D,
                   title=f"reduced at {point_s}")
    rep = _report("reduce", {path: _sha256(path)}, params, "verified", detail,
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("classify-g1d")
@click.argument("path", type=click.Path(exists=True))
@click.option("--base", required=True, help="reduced base vertex")
@click.option("--plots", type=click.Path(), default=None)
@_with_common
def cmd_classify_g1d(path, base, plots, out, timing):
    """Quotient a rank-one refined series to its metric tree (with DOT)."""
    t0 = time.monotonic()
    M = _module_from(_load_json(path))
    try:
        qt = classify_g1d(M, base)
    except (NotRankOne, NotRefined, QuotientNotTree, ValueError) as exc:
        rep = _report("classify-g1d", {path: _sha256(path)}, {"base": base},
                      "refuted",
                      {"error": type(exc).__name__, "message": str(exc)},
                      _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_FALSE)
    if plots:
        os.makedirs(plots, exist_ok=True)
        from .plotting import plot_graph

        plot_graph(qt.tree, os.path.join(plots, "tree.png"),
                   title=f"quotient tree, degree {qt.degree}")
        plot_graph(qt.graph, os.path.join(plots, "source.png"),
                   divisor=M.divisor, title="source model")
    rep = _report("classify-g1d", {path: _sha256(path)}, {"base": base},
                  "verified",
                  {"tree": qt.tree.to_json_dict(), "base": qt.base,
                   "degree": qt.degree, "vertex_map": dict(sorted(qt.vertex_map.items())),
                   "dot": qt.to_dot()},
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("pullback")
@click.option("--morphism", "path", type=click.Path(exists=True), required=True)
@click.option("--base", required=True, help="source vertex over the tree base")
@click.option("--plots", type=click.Path(), default=None)
@_with_common
def cmd_pullback(path, base, plots, out, timing):
    """Pull back the tree's canonical rank-one series along a morphism."""
    t0 = time.monotonic()
    data = _load_json(path)
    try:
        graph = MetricGraph.from_json_dict(data["graph"])
        tree = MetricGraph.from_json_dict(data["tree"])
        vmap = dict(data["vertex_map"])
        edata = tuple((int(t), int(m)) for t, m in data["edges"])
        psi = HarmonicMorphism(graph, tree, vmap, edata)
    except NotHarmonic as exc:
        rep = _report("pullback", {path: _sha256(path)}, {"base": base},
                      "refuted", {"error": "NotHarmonic", "message": str(exc),
                                  "vertex": exc.vertex},
                      _timing(timing, t0))
        _emit(rep, out)
        sys.exit(EXIT_FALSE)
    except (KeyError, ValueError, TypeError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    M = pullback_from_tree(psi, base)
    if plots:
        os.makedirs(plots, exist_ok=True)
        from .plotting import plot_graph

        plot_graph(graph, os.path.join(plots, "source.png"),
                   divisor=M.divisor, title="pullback divisor")
        plot_graph(tree, os.path.join(plots, "tree.png"), title="target tree")
    rep = _report("pullback", {path: _sha256(path)}, {"base": base},
                  "verified",
                  {"module": M.to_json_dict(), "degree": psi.degree()},
                  _timing(timing, t0))
    _emit(rep, out)


@main.command("tropical-rank")
@click.argument("path", type=click.Path(exists=True))
@click.option("--max", "r_max", default=3, show_default=True)
@click.option("--bound", default=200000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_with_common
def cmd_tropical_rank(path, r_max, bound, seed, out, timing):
    """Least r with every (r+2)-subset of the extremals dependent."""
    t0 = time.monotonic()
    M = _module_from(_load_json(path))
    report = tropical_rank(M, r_max, bound=bound)
    params = {"max": r_max, "bound": bound, "seed": seed}
    verdict = ("verified" if report.status == "exact"
               else "inconclusive" if report.status == "inconclusive"
               else "refuted")
    rep = _report("tropical-rank", {path: _sha256(path)}, params, verdict,
                  {"rank": report.rank, "status": report.status,
                   "detail": report.detail},
                  _timing(timing, t0))
    _emit(rep, out)
    sys.exit({"verified": EXIT_TRUE, "refuted": EXIT_FALSE,
              "inconclusive": EXIT_INCONCLUSIVE}[verdict])


if __name__ == "__main__":
    main()
