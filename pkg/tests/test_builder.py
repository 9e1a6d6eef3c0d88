import random
from collections import Counter

import numpy as np
import pytest

from hamrgg import builder, conn, fixtures, forestpack, geom, kdecomp, verify
from hamrgg.builder import BuilderConfig, StructuredFailure

# (k, holes) -> expected component cases; each fixture is built once per module
CASES = {
    (1, "lone"): ["j=1"],
    (1, "group"): ["broken-K(k+2)"],
    (1, "big"): ["transversal"],
    (2, "lone"): ["j=1"],
    (2, "group"): ["forestpack"],
    (2, "big"): ["transversal"],
    (3, "lone"): ["j=1"],
    (3, "group"): ["forestpack"],
    (4, "lone"): ["j=1"],
}

_cache = {}


def planted(k, kind, holes=None):
    key = (k, kind)
    if key not in _cache:
        ps, cfg, info = fixtures.hole_lattice(k, holes=holes or ((5, 5, kind),))
        ep = fixtures.fixture_edges(ps)
        rep = conn.threshold_radii(ep, k)
        stages = []
        res = builder.build(ps, k, ep, cfg, r_index=rep.conn_index, stages=stages)
        _cache[key] = (ps, ep, rep, res, stages, info)
    return _cache[key]


def colour_classes_ok(snap):
    """Every colour class of a stage snapshot is a union of paths and cycles."""
    for c, edges in snap.get("colours", {}).items():
        deg = Counter()
        for a, b, _ in edges:
            deg[a] += 1
            deg[b] += 1
        if deg and max(deg.values()) > 2:
            return f"stage {snap['stage']}: colour {c} has a vertex of degree {max(deg.values())}"
    return None


@pytest.mark.parametrize("k, kind", sorted(CASES))
def test_planted_build_is_verified(k, kind):
    ps, ep, rep, res, stages, info = planted(k, kind)
    assert not isinstance(res, StructuredFailure), res.to_json()
    assert verify.check_certificate(ps, k, res.r_index, res)
    assert res.r_index <= rep.conn_index
    assert len(res.cycles) == k // 2
    if k % 2:
        assert verify.check_perfect_matching(res.matching, ps.n)
    meta = res.meta["builder"]
    assert [c["case"] for c in meta["components"]] == CASES[(k, kind)]
    assert meta["big_outsider_cells"] == 1
    assert meta["outsiders"] > 0
    assert res.meta["max_edge_length"] <= rep.conn_length


@pytest.mark.parametrize("k, kind", [(2, "group"), (3, "group"), (1, "big")])
def test_stage_snapshots(k, kind):
    ps, ep, rep, res, stages, _ = planted(k, kind)
    names = [s["stage"] for s in stages]
    want = ["radii", "cells", "forests", "circuit", "in-cell", "splice", "outsiders"]
    assert names == want + ["matching"] * (k % 2) + ["assemble"]
    for snap in stages:
        assert colour_classes_ok(snap) is None
    # edges beyond the tessellation radius only come from forests or the matching
    pts = ps.points
    r = rep.conn_length
    for a, b, tag in [e for es in stages[-1]["colours"].values() for e in es]:
        if tag not in ("forest", "match"):
            assert geom.distance(pts[a], pts[b], ps.p) <= r


def test_two_holes_k2():
    ps, ep, rep, res, _, _ = planted(2, "two", holes=((2, 2, "lone"), (7, 7, "group")))
    assert not isinstance(res, StructuredFailure), res.to_json()
    assert verify.check_certificate(ps, 2, res.r_index, res)
    assert sorted(c["case"] for c in res.meta["builder"]["components"]) == ["forestpack", "j=1"]


def test_group_of_three_k2_uses_transversal():
    ps, ep, rep, res, _, _ = planted(2, "3")
    assert not isinstance(res, StructuredFailure), res.to_json()
    assert res.meta["builder"]["components"][0]["case"] == "transversal"


@pytest.mark.slow
def test_big_hole_k3():
    ps, ep, rep, res, _, _ = planted(3, "big")
    assert not isinstance(res, StructuredFailure), res.to_json()
    assert verify.check_certificate(ps, 3, res.r_index, res)
    assert res.meta["builder"]["components"][0]["case"] == "transversal"


def test_strict_uniform_reports_radius_window():
    ps = geom.generate_points(2000, 2, seed=3)
    res = builder.build(ps, 2)
    assert isinstance(res, StructuredFailure)
    assert (res.stage, res.prop, res.defect) == ("radius-window", "radius-window", False)
    assert set(res.witness) == {"r_l", "r_k"}
    obj = res.to_json()
    assert obj["stage"] == "radius-window"


def test_relaxed_uniform_has_no_dense_backbone():
    ps = geom.generate_points(2000, 2, seed=3)
    res = builder.build(ps, 2, cfg=BuilderConfig(2, strict=False, delta=0.02))
    assert isinstance(res, StructuredFailure) and not res.defect
    assert res.stage == "cells" and res.prop == "no-large-dense"


def test_single_ball_is_a_named_failure():
    pts = 0.5 + 0.02 * (np.random.default_rng(0).random((60, 2)) - 0.5)
    ps = geom.PointSet(pts, 2)
    res = builder.build(ps, 2, cfg=BuilderConfig(2, M=10, strict=False, delta=0.02))
    assert isinstance(res, StructuredFailure) and not res.defect
    assert res.prop == "no-large-dense"


def test_argument_errors():
    ps = geom.generate_points(11, 2, seed=0)
    with pytest.raises(ValueError):
        builder.build(ps, 3)
    with pytest.raises(ValueError):
        builder.build(ps, 2, cfg=BuilderConfig(3))
    with pytest.raises(ValueError):
        BuilderConfig(0)
    with pytest.raises(ValueError):
        BuilderConfig(2, lam0=-1)


# -- forests for one component, on crafted graphs ------------------------------

def clique_with_spokes(j, spokes):
    """K_j on 0..j-1 plus, for each (a, b), an edge from J-vertex a to outside vertex b."""
    i, jj = [], []
    for a in range(j):
        for b in range(a + 1, j):
            i.append(a)
            jj.append(b)
    for a, b in spokes:
        i.append(a)
        jj.append(b)
    n = max([j] + [b + 1 for _, b in spokes])
    return conn.Graph.from_edges(n, i, jj)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_single_vertex_component(k):
    g = clique_with_spokes(1, [(0, 1 + t) for t in range(k)])
    cf = builder.forests_for_component(g, [0], range(1, k + 1), k)
    assert cf.case == "j=1"
    for ps in cf.paths:
        assert len(ps) == 1 and len(ps[0]) == 3 and ps[0][1] == 0
    assert len(cf.matching) == k % 2


def test_big_component_k2():
    j, k = 5, 2
    g = clique_with_spokes(j, [(a, j + a) for a in range(j)])
    cf = builder.forests_for_component(g, range(j), range(j, 2 * j), k)
    assert cf.case == "transversal"
    [path] = cf.paths[0]
    inside = [v for v in path if v < j]
    assert sorted(inside) == list(range(j))
    # enters and leaves J once: only the two ends are outside
    assert path[0] >= j and path[-1] >= j and all(v < j for v in path[1:-1])
    # the path minus its ends is K_5's Hamilton cycle without one edge
    dec = kdecomp.decompose(j - 1)
    assert len(path) - 2 == len(dec.cycles[0])


def test_broken_k_plus_two_k3():
    k = 3
    j = k + 1
    g = clique_with_spokes(j, [(a, j + a) for a in range(j)])
    cf = builder.forests_for_component(g, range(j), range(j, 2 * j), k)
    assert cf.case == "broken-K(k+2)"
    assert len(cf.matching) == j // 2


@pytest.mark.parametrize("seed", range(12))
def test_forestpack_components_k5(seed):
    k = 5
    rng = random.Random(seed)
    inst = forestpack.random_instance(k, rng.randint(2, k), rng)
    J = list(inst.J)
    spokes = list(inst.H_edges)
    g = clique_with_spokes(len(J), spokes)
    cf = builder.forests_for_component(g, J, inst.B, k)
    assert cf.case == "forestpack"
    assert len(cf.Jpp) <= k * k


def test_missing_apex_is_named():
    k = 3
    # J = {0, 1}, each with exactly l = 2 private neighbours: all degrees are k
    g = clique_with_spokes(2, [(0, 2), (0, 3), (1, 4), (1, 5)])
    with pytest.raises(StructuredFailure) as ei:
        builder.forests_for_component(g, [0, 1], [2, 3, 4, 5], k)
    assert ei.value.prop == "extradeg" and not ei.value.defect


def test_non_clique_component_is_named():
    g = conn.Graph.from_edges(4, [0, 1], [2, 3])
    with pytest.raises(StructuredFailure) as ei:
        builder.forests_for_component(g, [0, 1], [2, 3], 2)
    assert ei.value.prop == "bad-clique"


def test_menger_shortfall_is_named():
    j, k = 5, 2
    g = clique_with_spokes(j, [(0, 5), (1, 5)])
    with pytest.raises(StructuredFailure) as ei:
        builder.forests_for_component(g, range(j), [5], k)
    assert ei.value.prop == "connectivity"
