import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamrgg import geom

coord = st.floats(0.0, 1.0, allow_nan=False)
pt = st.tuples(coord, coord)
norms = st.sampled_from([1.0, 2.0, math.inf])


def test_single_point():
    ps = geom.generate_points(1, "inf", seed=7)
    assert ps.n == 1
    assert np.all((ps.points >= 0) & (ps.points <= 1))


def test_same_seed_same_points():
    a = geom.generate_points(1000, 2, seed=42)
    b = geom.generate_points(1000, 2, seed=42)
    assert a.points.tobytes() == b.points.tobytes()
    c = geom.generate_points(1000, 2, seed=43)
    assert a.points.tobytes() != c.points.tobytes()


def test_mean_x_near_half():
    ps = geom.generate_points(1000, 2, seed=42)
    assert abs(ps.points[:, 0].mean() - 0.5) < 0.05


def test_general_position_small():
    ps = geom.generate_points(200, 1, seed=3)
    ep = geom.edge_process(ps)
    assert np.min(np.diff(ep.length)) > geom.GENERAL_POSITION_TOL


@pytest.mark.parametrize("p, want", [(2, math.sqrt(2)), (1, 2.0), ("inf", 1.0)])
def test_distance_corners(p, want):
    assert geom.distance((0, 0), (1, 1), p) == pytest.approx(want, abs=1e-15)


def test_unit_ball_area_exact():
    assert geom.unit_ball_area(1) == 2.0
    assert geom.unit_ball_area(2) == math.pi
    assert geom.unit_ball_area("inf") == 4.0


def test_unit_ball_area_p3_monte_carlo():
    a = geom.unit_ball_area(3)
    assert 2 <= a <= 4
    rng = np.random.default_rng(0)
    xy = rng.uniform(-1, 1, (4_000_000, 2))
    est = 4.0 * np.mean(np.abs(xy[:, 0]) ** 3 + np.abs(xy[:, 1]) ** 3 <= 1.0)
    assert abs(est - a) < 1e-3 * 4     # standard error at this size is ~7e-4


def test_parse_norm():
    assert geom.parse_norm("inf") == math.inf
    assert geom.parse_norm("∞") == math.inf
    assert geom.parse_norm(3) == 3.0
    with pytest.raises(ValueError):
        geom.parse_norm(0.5)


def test_three_collinear_points():
    ps = geom.PointSet(np.array([[0, 0], [0, 0.3], [0, 0.7]]), 2)
    ep = geom.edge_process(ps)
    assert np.allclose(ep.length, [0.3, 0.4, 0.7])
    assert list(zip(ep.i.tolist(), ep.j.tolist())) == [(0, 1), (1, 2), (0, 2)]


def test_empty_process():
    ps = geom.PointSet(np.array([[0.5, 0.5]]), 2)
    assert len(geom.edge_process(ps, cutoff=0.3)) == 0
    assert len(geom.edge_process(ps)) == 0


@pytest.mark.parametrize("p", [1, 2, "inf"])
def test_cutoff_matches_quadratic_scan(p):
    ps = geom.generate_points(2000, p, seed=11)
    ep = geom.edge_process(ps, cutoff=0.1)
    i, j = np.triu_indices(ps.n, 1)
    d = geom.pair_distances(ps.points, i, j, ps.p)
    keep = d <= 0.1
    want = set(zip(i[keep].tolist(), j[keep].tolist()))
    got = set(zip(ep.i.tolist(), ep.j.tolist()))
    assert got == want
    assert np.all(np.diff(ep.length) >= 0)


def test_index_of_radius_and_length_at():
    ps = geom.generate_points(50, 2, seed=1)
    ep = geom.edge_process(ps)
    t = 100
    r = ep.length_at(t)
    assert ep.index_of_radius(r) == t
    assert ep.length_at(0) == 0.0


def test_pointset_json_roundtrip(tmp_path):
    ps = geom.generate_points(30, "inf", seed=5)
    obj = ps.to_json()
    assert obj["p"] == "inf" and obj["n"] == 30 and obj["seed"] == 5
    path = tmp_path / "ps.json"
    ps.save(path)
    back = geom.PointSet.load(path)
    assert back.points.tobytes() == ps.points.tobytes()
    assert back.p == ps.p
    json.loads(ps.dumps())


def test_pointset_rejects_outside():
    with pytest.raises(ValueError):
        geom.PointSet(np.array([[1.5, 0.2]]))


def test_connectivity_scale():
    n, k = 1000, 2
    r = geom.connectivity_scale(n, k, 2)
    assert math.pi * n * r * r == pytest.approx(math.log(n) + math.log(math.log(n)))


@given(pt, pt, pt, norms)
def test_metric_axioms(a, b, c, p):
    dab = geom.distance(a, b, p)
    assert dab == geom.distance(b, a, p)
    assert geom.distance(a, c, p) <= dab + geom.distance(b, c, p) + 1e-12


@given(pt, pt)
def test_norm_monotone(a, b):
    dinf = geom.distance(a, b, "inf")
    d2 = geom.distance(a, b, 2)
    d1 = geom.distance(a, b, 1)
    assert dinf <= d2 + 1e-15 and d2 <= d1 + 1e-15


@given(st.integers(2, 120), st.floats(0.0, 0.6), norms, st.integers(0, 2**32 - 1))
def test_cutoff_is_filtered_full_process(n, c, p, seed):
    ps = geom.PointSet(np.random.default_rng(seed).random((n, 2)), p)
    full = geom.edge_process(ps)
    cut = geom.edge_process(ps, cutoff=c)
    keep = full.length <= c
    assert np.array_equal(cut.i, full.i[keep])
    assert np.array_equal(cut.j, full.j[keep])
    assert np.array_equal(cut.length, full.length[keep])


@given(st.integers(2, 60), norms, st.integers(0, 2**32 - 1))
def test_process_lengths_match_distances(n, p, seed):
    ps = geom.PointSet(np.random.default_rng(seed).random((n, 2)), p)
    ep = geom.edge_process(ps)
    assert len(ep) == n * (n - 1) // 2
    assert np.all(ep.i < ep.j)
    for t in range(0, len(ep), max(1, len(ep) // 20)):
        a, b = int(ep.i[t]), int(ep.j[t])
        assert ep.length[t] == geom.distance(ps.points[a], ps.points[b], p)
