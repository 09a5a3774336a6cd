import itertools
import random
from fractions import Fraction

import pytest

from troplin.hypercube import validate_rank_function
from troplin.metricgraph import (
    Divisor,
    MetricGraph,
    PLFunction,
    V,
    tropical_min,
    tropical_min_many,
)
from troplin.series import (
    HarmonicMorphism,
    NotHarmonic,
    SearchBoundExceeded,
    TropModule,
    check_linear_series,
    classify_g1d,
    extremals,
    f_v,
    find_unsaturated_cut,
    local_reduced_step,
    membership,
    pullback_from_tree,
    realize_jump,
    reduced_divisor,
    refine_module,
    tropical_dependence,
    tropical_rank,
)
from troplin.slopes import is_compatible, validate_slope_structure

import oracles


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


def random_member(M, rng):
    cs = [Fraction(rng.randrange(-4, 5), rng.choice([1, 2]))
          for _ in M.generators]
    return tropical_min_many(
        [h.add_constant(c) for h, c in zip(M.generators, cs)])


def test_generators_are_validated():
    M = path_module()
    g = M.graph
    bad = PLFunction.from_vertex_values(g, {"u": 0, "v": 0, "w": -1})
    with pytest.raises(ValueError):
        TropModule(g, M.divisor, M.structure, (bad,))


def test_membership_of_min_combinations():
    M = path_module()
    rng = random.Random(5)
    for _ in range(40):
        f = random_member(M, rng)
        ok, cs = membership(M, f)
        assert ok
        combo = tropical_min_many(
            [h.add_constant(c) for h, c in zip(M.generators, cs)])
        assert combo == f


def test_membership_agrees_with_brute_oracle():
    M = path_module()
    g = M.graph
    rng = random.Random(6)
    probes = [random_member(M, rng) for _ in range(15)]
    probes += [
        PLFunction.from_vertex_values(g, {"u": 0, "v": 0, "w": 0}),
        PLFunction.from_vertex_values(g, {"u": -1, "v": 0, "w": 0}),
        PLFunction.from_vertex_values(g, {"u": -2, "v": 0, "w": -1}),
        PLFunction.from_vertex_values(g, {"u": 1, "v": 0, "w": -1}),
    ]
    for f in probes:
        assert membership(M, f)[0] == oracles.brute_membership(M.generators, f)


def test_min_stability():
    M = path_module()
    rng = random.Random(7)
    for _ in range(50):
        f, g = random_member(M, rng), random_member(M, rng)
        assert membership(M, tropical_min(f, g))[0]


def test_f_v_invariants():
    M = path_module()
    pts = [V("u"), V("v"), V("w"),
           M.graph.at(0, Fraction(1, 3)), M.graph.at(1, Fraction(1, 2))]
    for p in pts:
        f = f_v(M, p)
        assert f.value_at(p) == 0
        for h in M.generators:
            shifted = h.add_constant(-h.value_at(p))
            assert (f - shifted).max_value() <= 0


def test_reduced_divisor_effective_and_idempotent():
    M = path_module()
    for p in (V("u"), V("w"), M.graph.at(0, Fraction(1, 2))):
        Dp = reduced_divisor(M, p)
        assert Dp.is_effective()
        assert Dp.degree() == M.divisor.degree()
    # module already reduced at u: reduction is the identity there
    assert f_v(M, V("u")).is_zero()
    assert reduced_divisor(M, V("u")) == M.divisor


def test_unsaturated_cut_dual_route():
    M = path_module()
    # reduced base: no cut
    assert find_unsaturated_cut(M, V("u")) is None
    # not reduced at v: a cut exists, the witness is a nonpositive member
    # vanishing at v
    got = find_unsaturated_cut(M, V("v"))
    assert got is not None
    cut, witness = got
    assert not cut.contains(M.graph, V("v"))
    assert witness.value_at(V("v")) == 0
    assert witness.max_value() == 0
    assert witness.min_value() < 0
    assert membership(M, witness)[0]


def test_reduced_divisor_coefficient_formula():
    M = path_module()
    S = M.structure
    rng = random.Random(8)
    for _ in range(30):
        e = rng.randrange(2)
        off = Fraction(rng.randrange(1, 8), 8)
        x = M.graph.at(e, off)
        Dx = reduced_divisor(M, x)
        s0 = sum(S.slope_list((e, +1))[0] for e, _ in ((e, +1), (e, -1)))
        s0 = (S.slope_list((e, +1))[0] + S.slope_list((e, -1))[0])
        assert Dx[x] == M.divisor[x] - s0
        assert Dx[x] >= S.r


def test_red_non_contracting():
    M = path_module()
    rng = random.Random(9)
    offs = sorted({Fraction(rng.randrange(1, 16), 16) for _ in range(6)})
    for a, b in itertools.combinations(offs, 2):
        p, q = M.graph.at(0, a), M.graph.at(0, b)
        assert reduced_divisor(M, p) != reduced_divisor(M, q)


def test_local_step_matches_reduction_oracle():
    M = path_module()
    for dist in (Fraction(1, 4), Fraction(1, 3)):
        D_step = local_reduced_step(M, V("u"), (0, +1), dist)
        ref, M2 = refine_module(M, [M.graph.at(0, dist)])
        target = ref.map_point(M.graph.at(0, dist))
        direct = reduced_divisor(M2, target)
        mapped = Divisor({ref.map_point(p): c for p, c in D_step.coeffs.items()})
        assert mapped == direct


def test_extremals_drop_redundant_generators():
    M = path_module()
    g = M.graph
    f3 = tropical_min(M.generators[0], M.generators[1].add_constant(Fraction(1, 2)))
    M2 = TropModule(g, M.divisor, M.structure, M.generators + (f3,))
    assert len(extremals(M2)) == 2


def test_tropical_dependence_and_rank():
    M = path_module()
    f1, f2 = M.generators
    # two extremals plus a mixture are tropically dependent
    mix = tropical_min(f1, f2.add_constant(Fraction(1, 2)))
    cs = tropical_dependence([f1, f2, mix])
    assert cs is not None
    # an independent pair stays independent
    assert tropical_dependence([f1, f2]) is None
    report = tropical_rank(M, 2)
    assert report.rank == 1 and report.status == "exact"
    single = TropModule(M.graph, M.divisor, M.structure, (f1,))
    assert tropical_rank(single, 2).rank == 0


def test_dependence_bound_raises():
    M = path_module()
    f1, f2 = M.generators
    mix = tropical_min(f1, f2.add_constant(Fraction(1, 2)))
    with pytest.raises(SearchBoundExceeded):
        tropical_dependence([f1, f2, mix], bound=0)


def test_check_linear_series_modes():
    M = path_module()
    v = check_linear_series(M, grid_denominator=2, mode="crude")
    assert v.status == "verified"
    v = check_linear_series(M, grid_denominator=2, mode="refined")
    assert v.status == "verified"
    assert any("tropical rank: 1" in n for n in v.notes)
    # a rank-0 module fails the refined check
    single = TropModule(M.graph, M.divisor, M.structure, (M.generators[0],))
    v = check_linear_series(single, grid_denominator=2, mode="refined")
    assert v.status == "refuted"


def test_realize_jump():
    M = path_module()
    top = realize_jump(M, V("v"), (1, 1))
    assert membership(M, top)[0]
    bottom = realize_jump(M, V("v"), (0, 0))
    assert membership(M, bottom)[0]
    with pytest.raises(ValueError):
        realize_jump(M, V("v"), (1, 0))


def test_non_member_limit_function():
    # a function with the right slopes everywhere but a forbidden slope
    # vector at the middle vertex; no finitely generated truncation of the
    # compatible ramp family contains it
    M = path_module()
    g = M.graph
    f_x = PLFunction.from_vertex_values(g, {"u": 0, "v": 0, "w": -1})
    assert not is_compatible(f_x, M.structure)
    ramps = []
    for j in range(1, 7):
        a = Fraction(1, j + 1)
        ramp = PLFunction(g, [((Fraction(0), Fraction(0)), (Fraction(1), Fraction(0))),
                              ((Fraction(0), Fraction(0)),
                               (a, Fraction(0)),
                               (Fraction(1), a - 1))])
        assert is_compatible(ramp, M.structure)
        ramps.append(ramp)
    for j in range(1, len(ramps) + 1):
        T = TropModule(g, M.divisor, M.structure, tuple(ramps[:j]))
        assert not membership(T, f_x)[0]


def test_finite_point_determination():
    M = path_module()
    g = M.graph
    check = [V("u"), V("v"), V("w"),
             g.at(0, Fraction(1, 2)), g.at(1, Fraction(1, 2))]
    rng = random.Random(10)
    pairs = [(random_member(M, rng), random_member(M, rng)) for _ in range(60)]
    f0 = random_member(M, rng)
    pairs.append((f0, f0))
    hits = 0
    for f, h in pairs:
        if all(f.value_at(p) == h.value_at(p) for p in check):
            hits += 1
            assert f == h
    assert hits >= 1


def test_classify_path_module():
    M = path_module()
    qt = classify_g1d(M, "u")
    assert qt.tree.is_tree()
    assert len(qt.tree.vertices) == 2
    assert qt.degree == 2
    assert qt.base == qt.vertex_map["u"]
    assert qt.vertex_map["u"] == qt.vertex_map["w"]
    assert qt.vertex_map["v"] != qt.vertex_map["u"]
    assert sorted(qt.fiber(qt.base)) == ["u", "w"]
    dot = qt.to_dot()
    assert "doublecircle" in dot and "--" in dot


def test_pullback_and_round_trip():
    g = MetricGraph(["u", "v", "w"], [("u", "v", 1), ("v", "w", 1)])
    tree = MetricGraph(["t0", "t1"], [("t0", "t1", 1)])
    psi = HarmonicMorphism(g, tree, {"u": "t0", "v": "t1", "w": "t0"},
                           ((0, 1), (0, 1)))
    assert psi.degree() == 2
    assert psi.local_degree("v") == 2
    M = pullback_from_tree(psi, "u")
    assert M.divisor == Divisor.of((V("u"), 1), (V("w"), 1))
    assert tropical_rank(M, 2).rank == 1
    qt = classify_g1d(M, "u")
    assert oracles.trees_isometric(qt.tree, tree)
    assert qt.degree == 2


def test_harmonic_validation():
    g = MetricGraph(["u", "v", "w"], [("u", "v", 1), ("v", "w", 1)])
    tree = MetricGraph(["t0", "t1"], [("t0", "t1", 1)])
    with pytest.raises(NotHarmonic):
        # v sees two sheets on one side of its image but only one on the other
        tree2 = MetricGraph(["t0", "t1", "t2"], [("t0", "t1", 1), ("t1", "t2", 1)])
        g2 = MetricGraph(["u", "u2", "v", "w"],
                         [("u", "v", 1), ("u2", "v", 1), ("v", "w", 1)])
        HarmonicMorphism(g2, tree2,
                         {"u": "t0", "u2": "t0", "v": "t1", "w": "t2"},
                         ((0, 1), (0, 1), (1, 1)))
    with pytest.raises(ValueError):
        # wrong length scaling
        g3 = MetricGraph(["u", "v"], [("u", "v", 2)])
        HarmonicMorphism(g3, tree, {"u": "t0", "v": "t1"}, ((0, 1),))


def test_random_cover_round_trips():
    rng = random.Random(31)
    for _ in range(4):
        graph, tree, vmap, edata = oracles.random_harmonic_cover(rng)
        psi = HarmonicMorphism(graph, tree, vmap, edata)
        base = next(x for x in graph.vertices if vmap[x] == tree.vertices[0])
        M = pullback_from_tree(psi, base)
        qt = classify_g1d(M, base)
        assert oracles.trees_isometric(qt.tree, tree)
        assert qt.degree == psi.degree()
        assert tropical_rank(M, 1).rank == 1
