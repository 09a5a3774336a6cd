import json
import os
from fractions import Fraction

import pytest
from click.testing import CliRunner

from troplin.cli import main
from troplin.hypercube import standard_rank_function, validate_rank_function
from troplin.metricgraph import Divisor, MetricGraph, PLFunction, V
from troplin.permarray import array_from_rank_function
from troplin.series import TropModule
from troplin.slopes import validate_slope_structure


@pytest.fixture
def runner():
    return CliRunner()


def path_module():
    g = MetricGraph(["u", "v", "w"], [("u", "v", 1), ("v", "w", 1)])
    leaf1 = validate_rank_function([1, 0], 1, 1)
    J = validate_rank_function([1, 0, 0, 0], 2, 1)
    S = validate_slope_structure(
        g, {(0, +1): (0, 1), (1, +1): (-1, 0)},
        {"u": leaf1, "v": J, "w": leaf1}, 1)
    D = Divisor.of((V("u"), 1), (V("v"), 2), (V("w"), 1))
    f1 = PLFunction.constant(g, 0)
    f2 = PLFunction.from_vertex_values(g, {"u": -1, "v": 0, "w": -1})
    return TropModule(g, D, S, (f1, f2))


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_validate_rank_verified(runner, tmp_path):
    rf = standard_rank_function(2, 2)
    path = write(tmp_path, "rf.json", rf.to_json_dict())
    res = runner.invoke(main, ["validate-rank", path])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["verdict"] == "verified"
    assert [0, 0] in rep["detail"]["jumps"]
    assert rep["timing"] is None


def test_validate_rank_refuted(runner, tmp_path):
    bad = {"delta": 2, "r": 1, "values": [1, 1, 1, 1]}
    path = write(tmp_path, "rf.json", bad)
    res = runner.invoke(main, ["validate-rank", path])
    assert res.exit_code == 1
    rep = json.loads(res.output)
    assert rep["verdict"] == "refuted"
    assert rep["detail"]["violation"]


def test_malformed_json_is_input_error(runner, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    for cmd in (["validate-rank", str(p)], ["tropical-rank", str(p)],
                ["reduce", str(p), "--at", "u"]):
        res = runner.invoke(main, cmd)
        assert res.exit_code == 3


def test_reports_are_byte_identical(runner, tmp_path):
    rf = standard_rank_function(2, 1)
    path = write(tmp_path, "rf.json", rf.to_json_dict())
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    r1 = runner.invoke(main, ["validate-rank", path, "--out", out1])
    r2 = runner.invoke(main, ["validate-rank", path, "--out", out2])
    assert r1.exit_code == r2.exit_code == 0
    assert open(out1 + ".json", "rb").read() == open(out2 + ".json", "rb").read()
    assert open(out1 + ".csv", "rb").read() == open(out2 + ".csv", "rb").read()


def test_out_writes_json_and_csv(runner, tmp_path):
    rf = standard_rank_function(2, 1)
    path = write(tmp_path, "rf.json", rf.to_json_dict())
    out = str(tmp_path / "rep")
    res = runner.invoke(main, ["validate-rank", path, "--out", out])
    assert res.exit_code == 0
    assert os.path.exists(out + ".json")
    lines = open(out + ".csv").read().splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("command,") for line in lines)


def test_timing_opt_in(runner, tmp_path):
    rf = standard_rank_function(2, 1)
    path = write(tmp_path, "rf.json", rf.to_json_dict())
    res = runner.invoke(main, ["validate-rank", path, "--timing"])
    rep = json.loads(res.output)
    assert isinstance(rep["timing"], float)


def test_perm_convert_round_trip(runner, tmp_path):
    rf = standard_rank_function(2, 2)
    P = array_from_rank_function(rf)
    p1 = write(tmp_path, "rf.json", rf.to_json_dict())
    res = runner.invoke(main, ["perm-convert", p1])
    assert res.exit_code == 0
    arr = json.loads(res.output)["detail"]["result"]
    assert sorted(map(tuple, arr["dots"])) == sorted(P.dots)
    p2 = write(tmp_path, "arr.json", arr)
    res = runner.invoke(main, ["perm-convert", p2])
    assert res.exit_code == 0
    back = json.loads(res.output)["detail"]["result"]
    assert back["values"] == rf.to_json_dict()["values"]


def test_matroid_export_and_reconstruct(runner, tmp_path):
    rf = standard_rank_function(2, 2)
    p1 = write(tmp_path, "rf.json", rf.to_json_dict())
    res = runner.invoke(main, ["matroid-export", p1])
    assert res.exit_code == 0
    detail = json.loads(res.output)["detail"]
    p2 = write(tmp_path, "mats.json", detail)
    res = runner.invoke(main, ["matroid-export", p2, "--reconstruct"])
    assert res.exit_code == 0
    got = json.loads(res.output)["detail"]["rank_function"]
    assert got["values"] == rf.to_json_dict()["values"]


def test_divisor_of_with_plots(runner, tmp_path):
    M = path_module()
    tent = M.generators[1]
    data = {"model": M.graph.to_json_dict(), "function": tent.to_json_list()}
    path = write(tmp_path, "fn.json", data)
    plots = str(tmp_path / "figs")
    res = runner.invoke(main, ["divisor-of", path, "--plots", plots])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["detail"]["degree"] == 0
    assert os.path.exists(os.path.join(plots, "divisor.png"))
    assert os.path.exists(os.path.join(plots, "function.png"))


def test_check_compat_exit_codes(runner, tmp_path):
    M = path_module()
    spath = write(tmp_path, "S.json", M.structure.to_json_dict())
    good = write(tmp_path, "good.json", M.generators[1].to_json_list())
    bad_f = PLFunction.from_vertex_values(M.graph, {"u": 0, "v": 0, "w": -1})
    bad = write(tmp_path, "bad.json", bad_f.to_json_list())
    assert runner.invoke(main, ["check-compat", spath, good]).exit_code == 0
    assert runner.invoke(main, ["check-compat", spath, bad]).exit_code == 1
    dpath = write(tmp_path, "D.json", M.divisor.to_json_list(M.graph))
    res = runner.invoke(main, ["check-compat", spath, good, "--divisor", dpath])
    assert res.exit_code == 0


def test_rank_check_module(runner, tmp_path):
    M = path_module()
    path = write(tmp_path, "M.json", M.to_json_dict())
    res = runner.invoke(main, ["rank-check", path, "--grid-denominator", "2",
                               "--mode", "refined"])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["verdict"] == "verified"
    assert any("tropical rank" in n for n in rep["detail"]["notes"])


def test_rank_check_refuted(runner, tmp_path):
    M = path_module()
    data = {"divisor": Divisor.of((V("u"), 1)).to_json_list(M.graph),
            "structure": M.structure.to_json_dict()}
    path = write(tmp_path, "DS.json", data)
    res = runner.invoke(main, ["rank-check", path, "--grid-denominator", "2"])
    assert res.exit_code == 1


def test_enumerate_slopes_and_cap(runner, tmp_path):
    g = MetricGraph(["u", "w"], [("u", "w", 1)])
    D = Divisor.of((V("u"), 1), (V("w"), 1))
    data = {"model": g.to_json_dict(), "divisor": D.to_json_list(g)}
    path = write(tmp_path, "g.json", data)
    res = runner.invoke(main, ["enumerate-slopes", path, "--order", "1",
                               "--bound", "1"])
    assert res.exit_code == 0
    assert json.loads(res.output)["detail"]["count"] == 3
    os.environ["TROPLIN_CAP"] = "1"
    try:
        res = runner.invoke(main, ["enumerate-slopes", path, "--order", "1",
                                   "--bound", "1"])
        assert res.exit_code == 2
    finally:
        del os.environ["TROPLIN_CAP"]


def test_reduce_at_point_and_step(runner, tmp_path):
    M = path_module()
    path = write(tmp_path, "M.json", M.to_json_dict())
    plots = str(tmp_path / "figs")
    res = runner.invoke(main, ["reduce", path, "--at", "e0@1/2",
                               "--plots", plots])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["verdict"] == "verified"
    assert os.path.exists(os.path.join(plots, "reduced.png"))
    res = runner.invoke(main, ["reduce", path, "--at", "u",
                               "--step", "0,1,1/4"])
    assert res.exit_code == 0
    # stepping from an unreduced base fails cleanly
    res = runner.invoke(main, ["reduce", path, "--at", "v",
                               "--step", "0,-1,1/4"])
    assert res.exit_code == 1
    res = runner.invoke(main, ["reduce", path, "--at", "nowhere"])
    assert res.exit_code == 3


def test_classify_g1d(runner, tmp_path):
    M = path_module()
    path = write(tmp_path, "M.json", M.to_json_dict())
    res = runner.invoke(main, ["classify-g1d", path, "--base", "u"])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["detail"]["degree"] == 2
    assert "graph quotient_tree" in rep["detail"]["dot"]
    # unreduced base is refused
    res = runner.invoke(main, ["classify-g1d", path, "--base", "v"])
    assert res.exit_code == 1


def test_pullback(runner, tmp_path):
    g = MetricGraph(["u", "v", "w"], [("u", "v", 1), ("v", "w", 1)])
    tree = MetricGraph(["t0", "t1"], [("t0", "t1", 1)])
    data = {"graph": g.to_json_dict(), "tree": tree.to_json_dict(),
            "vertex_map": {"u": "t0", "v": "t1", "w": "t0"},
            "edges": [[0, 1], [0, 1]]}
    path = write(tmp_path, "psi.json", data)
    res = runner.invoke(main, ["pullback", "--morphism", path, "--base", "u"])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["detail"]["degree"] == 2
    assert len(rep["detail"]["module"]["generators"]) == 2


def test_tropical_rank_command(runner, tmp_path):
    M = path_module()
    path = write(tmp_path, "M.json", M.to_json_dict())
    res = runner.invoke(main, ["tropical-rank", path, "--max", "2"])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["detail"]["rank"] == 1
    assert rep["detail"]["status"] == "exact"
