import numpy as np
from hypothesis import given, strategies as st

from hamrgg import conn, geom, kdecomp, verify
from hamrgg.certificate import CycleCertificate

from conftest import square_corners


def test_hamilton_cycle_checks():
    c4 = [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert verify.check_hamilton_cycle([0, 1, 2, 3], 4, edges=c4)
    v = verify.check_hamilton_cycle([0, 1, 1, 3], 4)
    assert not v and "repeated" in v.violation and "1" in v.violation
    assert not verify.check_hamilton_cycle([0, 2, 1, 3], 4, edges=c4)
    assert not verify.check_hamilton_cycle([0, 1, 2], 4)


def test_perfect_matching_checks():
    ps = geom.PointSet(np.array([[0.1, 0.1], [0.2, 0.1]]))
    assert verify.check_perfect_matching([(0, 1)], 2, ps=ps, r=0.2)
    assert not verify.check_perfect_matching([(0, 1)], 2, ps=ps, r=0.05)
    v = verify.check_perfect_matching([(0, 1)], 4)
    assert not v and "unmatched" in v.violation
    assert not verify.check_perfect_matching([(0, 1), (1, 2)], 4)


def test_edge_disjoint_checks():
    assert verify.check_edge_disjoint([[(0, 1), (1, 2)]])
    v = verify.check_edge_disjoint([[(0, 1)], [(1, 0)]])
    assert not v and "0-1" in v.violation


def test_linear_forest_checks():
    assert verify.check_linear_forest([], [], 2)
    assert not verify.check_linear_forest([(0, 1), (1, 2), (2, 0)])
    assert not verify.check_linear_forest([(0, 1), (0, 2), (0, 3)])
    assert verify.check_linear_forest([(0, 1), (1, 2)], [1], 2)
    assert not verify.check_linear_forest([(0, 1), (1, 2)], [0], 2)


def test_kdecomp_classes_disjoint():
    for k in range(1, 51):
        dec = kdecomp.decompose(k)
        assert verify.check_edge_disjoint(list(dec.classes().values()))


def test_square_certificate():
    ps = square_corners()
    cert = CycleCertificate(2, 4, [[0, 1, 2, 3]], [], r_index=4, r_length=1.0)
    assert verify.check_certificate(ps, 2, 4, cert)
    # the diagonal is longer than r
    bad = CycleCertificate(2, 4, [[0, 2, 1, 3]], [], r_index=4, r_length=1.0)
    v = verify.check_certificate(ps, 2, 4, bad)
    assert not v and "0-2" in v.violation


def test_certificate_index_consistency():
    ps = square_corners()
    cert = CycleCertificate(2, 4, [[0, 1, 2, 3]], [], r_length=1.0)
    assert not verify.check_certificate(ps, 2, 5, cert)
    assert not verify.check_certificate(ps, 3, 4, cert)


def test_certificate_ties_respect_index():
    # square side ties: index 3 admits only three of the four sides
    ps = square_corners()
    cert = CycleCertificate(2, 4, [[0, 1, 2, 3]], [], r_index=3, r_length=1.0)
    assert not verify.check_certificate(ps, 2, 3, cert)


def test_vertex_cut():
    edges = [(0, 1), (1, 2), (2, 3)]
    assert verify.check_vertex_cut(4, edges, [1])
    assert not verify.check_vertex_cut(4, edges, [])
    assert not verify.check_vertex_cut(4, edges, [0, 1, 2])


@given(st.integers(3, 200), st.sampled_from([1.0, 2.0, np.inf]), st.integers(0, 2**32 - 1),
       st.floats(0.01, 0.5))
def test_count_pairs_within_matches_process(n, p, seed, r):
    ps = geom.PointSet(np.random.default_rng(seed).random((n, 2)), p)
    ep = geom.edge_process(ps)
    lt, le, ties = verify.count_pairs_within(ps, r)
    assert le == ep.index_of_radius(r)
    assert lt == int(np.searchsorted(ep.length, r, side="left"))
    assert len(ties) == le - lt


@given(st.integers(6, 12).filter(lambda x: x % 2 == 0), st.sampled_from([1, 2, 3, 4]),
       st.integers(0, 2**32 - 1))
def test_certificate_edges_inside_graph(n, k, seed):
    ps = geom.generate_points(n, 2, seed=seed)
    ep = geom.edge_process(ps)
    rep = conn.threshold_radii(ep, k, with_packing_oracle=True)
    cert = rep.certificate
    assert verify.check_certificate(ps, k, rep.pack_index, cert)
    g = conn.graph_at(ep, index=rep.pack_index)
    for cl in cert.edge_classes():
        assert all(g.has_edge(int(a), int(b)) for a, b in cl)
    # one step earlier the last edge is missing, so a certificate using it must fail
    last = (int(ep.i[rep.pack_index - 1]), int(ep.j[rep.pack_index - 1]))
    used = {tuple(sorted((int(a), int(b)))) for cl in cert.edge_classes() for a, b in cl}
    if last in used:
        cert2 = CycleCertificate(k, n, cert.cycles, cert.matching,
                                 r_index=rep.pack_index - 1, r_length=ep.length_at(rep.pack_index - 1))
        assert not verify.check_certificate(ps, k, rep.pack_index - 1, cert2)


def test_certificate_json_roundtrip(tmp_path):
    cert = CycleCertificate(3, 4, [[0, 1, 2, 3]], [(0, 2), (1, 3)], r_index=6, r_length=1.5, meta={"x": 1})
    path = tmp_path / "c.json"
    cert.save(path)
    back = CycleCertificate.load(path)
    assert back.cycles == [[0, 1, 2, 3]] and [tuple(e) for e in back.matching] == [(0, 2), (1, 3)]
    assert back.r_index == 6 and back.meta == {"x": 1}
