import csv
import io
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamrgg import cells, conn, fixtures, geom


def lattice(N, keep=None):
    """One point at the centre of every cell of an N x N grid (optionally masked)."""
    ax = (np.arange(N) + 0.5) / N
    X, Y = np.meshgrid(ax, ax, indexing="xy")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    if keep is not None:
        pts = pts[keep(pts)]
    return geom.PointSet(pts, 2)


def test_cells_per_side_exact():
    assert cells.cells_per_side(0.01, 0.1) == 1000
    grid = cells.make_grid(geom.generate_points(10, 2, 0), 0.01, 0.1, 5)
    assert grid.side == Fraction(1, 1000)
    assert grid.side * grid.N == 1


def test_degenerate_inputs():
    ps = geom.generate_points(10, 2, 0)
    with pytest.raises(ValueError):
        cells.tessellate(ps, 100.0, 0.02)        # one cell per side
    with pytest.raises(ValueError):
        cells.tessellate(ps, 0.1, 0.05)          # 32 delta >= 1
    with pytest.raises(ValueError):
        cells.tessellate(ps, 0.0, 0.01)


def test_one_dense_cell_is_small():
    pts = 0.5 + 1e-4 * np.random.default_rng(0).random((50, 2))
    ps = geom.PointSet(pts, 2)
    cls = cells.tessellate(ps, 0.05, 0.02, M=20, check_delta=True)
    assert cls.dense.shape[0] == 1
    assert cls.D0.shape[0] == 0
    ok, why = cells.check_component_structure(cls)
    assert not ok and why["reason"] == "no-large-dense"
    # nothing is covered, so the first bad component is the whole grid and is large
    assert not cls.bad_complete and not cls.bad_components[0].small


def test_stencil_symmetric_and_contains_neighbours():
    for p in (1.0, 2.0, math.inf):
        off = cells.stencil(200, 0.1, p)
        s = {tuple(o) for o in off.tolist()}
        assert all((-a, -b) in s for a, b in s)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx or dy:
                    assert (dx, dy) in s
        g = cells.make_graph(200, 0.1, p)
        assert g.Delta == g.Delta_bound == len(s)


@given(st.integers(-30, 30), st.integers(-30, 30), st.sampled_from([1.0, 2.0, math.inf]))
def test_adjacency_is_worst_case_distance(dx, dy, p):
    N, r = 100, 0.15
    g = cells.make_graph(N, r, p)
    c1 = 50 * N + 50
    c2 = (50 + dy) * N + 50 + dx
    adj = g.adjacent(c1, c2, r, p)
    assert adj == g.adjacent(c2, c1, r, p)
    if dx == 0 and dy == 0:
        assert not adj
        return
    # farthest pair of points in the two cells
    far = geom.distance((0, 0), ((abs(dx) + 1) / N, (abs(dy) + 1) / N), p)
    assert adj == (far <= r)


@given(st.integers(1, 300), st.integers(0, 2**32 - 1), st.floats(0.02, 0.3))
def test_points_lie_in_their_cells(n, seed, r):
    ps = geom.PointSet(np.random.default_rng(seed).random((n, 2)), 2)
    grid = cells.make_grid(ps, r, 0.1, 3)
    for v in range(0, n, max(1, n // 25)):
        x0, x1, y0, y1 = grid.bounds(int(grid.cell_of[v]))
        x, y = ps.points[v]
        assert x0 <= x <= x1 and y0 <= y <= y1
    assert int(grid.counts().sum()) == n


def test_boundary_point_goes_lower_left():
    ps = geom.PointSet(np.array([[0.5, 0.25], [0.0, 0.0], [1.0, 1.0]]), 2)
    grid = cells.make_grid(ps, 0.25, 1.0, 1)       # N = 4
    assert grid.N == 4
    assert grid.xy(int(grid.cell_of[0])) == (1, 0)
    assert grid.xy(int(grid.cell_of[1])) == (0, 0)
    assert grid.xy(int(grid.cell_of[2])) == (3, 3)


def test_uniform_classification_invariants():
    ps = geom.generate_points(5000, 2, seed=1)
    r = geom.connectivity_scale(5000, 2, 2)
    cls = cells.tessellate(ps, r, 0.25, M=1, k=2, check_delta=False)
    ok, why = cells.check_classification(cls)
    assert ok, why
    assert cls.dense.shape[0] > 0 and cls.D0.shape[0] > 0
    # cells around bad components are sparse and adjacent to D0
    if cls.bad_complete and cls.bad_components:
        cov = cls.covered_mask()
        for b in cls.bad_components:
            for c in b.cells:
                for d in cls.graph.neighbours(int(c)):
                    if cov[d]:
                        assert cls.label(d) != cells.DENSE


def test_no_bad_components_means_no_rings():
    cls = cells.tessellate(lattice(200), 0.1, 0.05, M=1, check_delta=False)
    assert cls.bad_components == [] and cls.bad_complete
    assert cells.check_rings_disjoint([]) == (True, None)


def test_dense_coverage_all_dense():
    cls = cells.tessellate(lattice(200), 0.1, 0.05, M=1, check_delta=False)
    assert cls.dense.shape[0] == 200 * 200
    assert cells.check_dense_coverage(cls, 0.1) == (True, None)
    assert cells.check_component_structure(cls) == (True, None)


def test_dense_coverage_empty_disc():
    # small r keeps the 5r corner squares away from the centre
    r = 0.05
    hole = lambda pts: np.hypot(pts[:, 0] - 0.5, pts[:, 1] - 0.5) > 1.2 * r
    cls = cells.tessellate(lattice(400, hole), r, 0.05, M=1, check_delta=False)
    ok, w = cells.check_dense_coverage(cls, 0.1)
    assert not ok and w["statement"] == 1
    s, _ = cells.coverage_sizes(cls, 0.1)
    assert w["size"] >= s
    cx = np.array(w["cells"]) % cls.N
    cy = np.array(w["cells"]) // cls.N
    assert np.all(np.hypot((cx + 0.5) / cls.N - 0.5, (cy + 0.5) / cls.N - 0.5) <= 1.2 * r + 1 / cls.N)


def test_dense_coverage_corner():
    r = 0.1
    cut = lambda pts: ~((pts[:, 0] < 0.02) & (pts[:, 1] < 0.02))
    cls = cells.tessellate(lattice(200, cut), r, 0.05, M=1, check_delta=False)
    ok, w = cells.check_dense_coverage(cls, 0.1)
    assert not ok and w["statement"] == 3


def test_two_large_dense_blobs():
    sides = lambda pts: (pts[:, 0] < 0.3) | (pts[:, 0] > 0.7)
    cls = cells.tessellate(lattice(200, sides), 0.1, 0.05, M=1, check_delta=False)
    ok, w = cells.check_component_structure(cls)
    assert not ok and w["reason"] == "second-large-dense"
    xs = np.array(w["cells"]) % cls.N
    assert np.all(xs < 60) or np.all(xs >= 140)


def test_extradeg_vacuous_for_k1():
    ps = geom.generate_points(20, 2, 0)
    g = conn.graph_at(geom.edge_process(ps), radius=0.3)
    assert cells.check_extradeg_property(g, ps, 1, 0.5, 0.3) == (True, None)


def test_extradeg_close_pair_of_degree_k():
    # 0 and 1 sit together, each joined to the other and to one hub: degree 2 each
    pts = np.array([[0.5, 0.5], [0.5005, 0.5], [0.9, 0.9], [0.1, 0.1], [0.9, 0.1]])
    ps = geom.PointSet(pts, 2)
    g = conn.Graph.from_edges(5, [0, 0, 1, 2, 2, 3], [1, 2, 2, 3, 4, 4])
    ok, w = cells.check_extradeg_property(g, ps, 2, eta=0.1, r=0.1)
    assert not ok and w["J"] == [0, 1]
    # give vertex 0 an extra neighbour and the set is fine
    g2 = conn.Graph.from_edges(5, [0, 0, 0, 1, 2, 2, 3], [1, 2, 4, 2, 3, 4, 4])
    assert cells.check_extradeg_property(g2, ps, 2, eta=0.1, r=0.1)[0]


@pytest.fixture(scope="module")
def lone_hole():
    k = 2
    ps, cfg, _ = fixtures.hole_lattice(k, holes=((5, 5, "lone"),))
    ep = fixtures.fixture_edges(ps)
    rep = conn.threshold_radii(ep, k)
    cls = cells.tessellate(ps, rep.conn_length, fixtures.DELTA, cfg.M, k, check_delta=False)
    return ps, ep, rep, cls


def test_fixture_ring(lone_hole):
    ps, ep, rep, cls = lone_hole
    assert cells.check_classification(cls) == (True, None)
    assert cells.check_component_structure(cls) == (True, None)
    with_pts = [b for b in cls.bad_components if cells.points_of(cls, b.cells).shape[0]]
    assert len(with_pts) == 1
    b = with_pts[0]
    g = conn.graph_at(ep, index=rep.conn_index)
    ring = cells.build_ring(cls, b, rep.conn_length, g=g)
    assert ring.J.shape[0] == 1
    assert np.all(cls.labels[ring.R] == cells.DENSE)
    assert all(cls.in_D0(int(c)) for c in ring.R)
    assert set(ring.Jprime.tolist()) == {int(w) for w in g.neighbours(int(ring.J[0]))}
    # the same J' comes out of the geometric query
    ring2 = cells.build_ring(cls, b, rep.conn_length, ps=ps)
    assert np.array_equal(ring2.Jprime, ring.Jprime)
    obj = json.loads(cells.rings_json([ring]))
    assert obj[0]["J"] == ring.J.tolist()
    assert cells.check_rings_disjoint([ring]) == (True, None)
    v = cells.check_rings_disjoint([ring, ring])
    assert not v[0] and v[1]["prop"] == "ring-overlap"


def test_ring_radius_window(lone_hole):
    ps, ep, rep, cls = lone_hole
    b = [b for b in cls.bad_components if cells.points_of(cls, b.cells).shape[0]][0]
    with pytest.raises(cells.RingError) as ei:
        cells.build_ring(cls, b, 1.1 * rep.conn_length, ps=ps)
    assert ei.value.prop == "ring-radius"


def test_cells_csv(lone_hole):
    _, _, _, cls = lone_hole
    rows = list(csv.DictReader(io.StringIO(cells.cells_csv(cls))))
    assert {r["label"] for r in rows} >= {"dense", "sparse"}
    bad = [r for r in rows if r["bad"] == "1"]
    assert len(bad) == sum(b.size for b in cls.bad_components)
    assert sum(int(r["count"]) for r in rows) == cls.grid.counts().sum()


def test_policy_raises_M_with_bad_components(lone_hole):
    ps, _, rep, cls = lone_hole
    pol = cells.tessellate_with_policy(lattice(60), 0.1, 0.05, k=2, check_delta=False)
    assert pol.M == cells.default_M(2, pol.graph.Delta_bound, with_bad=True)
    assert cells.default_M(2, 10) == 4 * 2 * 10 + 6
