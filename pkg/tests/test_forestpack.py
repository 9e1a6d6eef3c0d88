import random

import pytest
from hypothesis import given, strategies as st

from hamrgg import forestpack as fp
from hamrgg.kdecomp import STAR

from conftest import packing_violation


def inst(k, J, apex, nb):
    B = sorted({b for bs in nb.values() for b in bs})
    H = [(v, b) for v in J for b in nb.get(v, [])]
    return fp.CliqueBipartiteInstance(k, list(J), apex, B, H)


def test_hypotheses_j1():
    ok, why = fp.check_hypotheses(inst(3, [0], 0, {0: [1, 2, 3, 4]}))
    assert ok, why


def test_hypotheses_shared_neighbour():
    ok, why = fp.check_hypotheses(inst(2, [0, 1], 0, {0: [2, 3], 1: [2]}))
    assert ok
    ok, why = fp.check_hypotheses(inst(2, [0, 1], 0, {0: [2], 1: [2]}))
    assert not ok and why.startswith("(i)")
    bad = fp.CliqueBipartiteInstance(2, [0, 1], 0, [2, 3], [(0, 2), (0, 3), (1, 2)])
    assert fp.check_hypotheses(bad)[0]
    bad2 = fp.CliqueBipartiteInstance(4, [0, 1, 2], 0, [3, 4, 5, 6],
                                      [(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (2, 3), (2, 4)])
    ok, why = fp.check_hypotheses(bad2)
    assert not ok and why.startswith("(ii)")


def test_hypotheses_structure():
    assert not fp.check_hypotheses(inst(2, [0], 5, {0: [1, 2, 3]}))[0]
    assert not fp.check_hypotheses(inst(1, [0, 1], 0, {0: [2, 3], 1: [2]}))[0]
    with pytest.raises(fp.InstanceError):
        fp.pack(inst(2, [0, 1], 0, {0: [2], 1: [2]}))


def test_j1_k2_path_through_apex():
    # the apex needs l+1 = 3 neighbours; the path uses two of them
    pk = fp.pack_even(inst(2, [0], 0, {0: [1, 2, 3]}))
    assert len(pk.forests) == 1
    assert sorted(pk.forests[0]) == [(0, 1), (0, 2)]
    assert not fp.check_hypotheses(inst(2, [0], 0, {0: [1, 2]}))[0]


def test_j1_k1_single_matching_edge():
    pk = fp.pack_odd(inst(1, [0], 0, {0: [1, 2]}))
    assert pk.forests == [] and len(pk.matching) == 1 and 0 in pk.matching[0]


def test_j_equals_k_perfect_matching_k4():
    nb = {0: [4, 8], 1: [5], 2: [6], 3: [7]}
    I = inst(4, [0, 1, 2, 3], 0, nb)
    assert fp.check_hypotheses(I)[0]
    pk = fp.pack_even(I)
    assert packing_violation(I, pk) is None
    clique = [e for f in pk.forests for e in f if e[0] < 4 and e[1] < 4]
    assert len(clique) == 6


def test_k3_j2_clique_edge_in_one_class():
    I = inst(3, [0, 1], 0, {0: [2, 3, 4, 5], 1: [2, 4, 6]})
    pk = fp.pack_odd(I)
    assert len(pk.forests) == 1 and len(pk.matching) >= 1
    hits = sum((0, 1) in cls for cls in pk.classes())
    assert hits == 1
    assert packing_violation(I, pk) is None


def test_wrong_parity_rejected():
    with pytest.raises(ValueError):
        fp.pack_even(inst(3, [0], 0, {0: [1, 2, 3, 4]}))
    with pytest.raises(ValueError):
        fp.pack_odd(inst(2, [0], 0, {0: [1, 2]}))


@pytest.mark.parametrize("k", [2, 4, 6, 8, 10, 12])
def test_even_sweep(k):
    rng = random.Random(100 + k)
    for t in range(300):
        I = fp.random_instance(k, t % k + 1, rng)
        assert fp.check_hypotheses(I)[0]
        assert packing_violation(I, fp.pack_even(I)) is None


@pytest.mark.parametrize("k", [1, 3, 5, 7, 9, 11])
def test_odd_sweep(k):
    rng = random.Random(200 + k)
    for t in range(300):
        I = fp.random_instance(k, t % k + 1, rng)
        assert packing_violation(I, fp.pack_odd(I)) is None


@given(st.integers(1, 12), st.data())
def test_pack_random_instances(k, data):
    j = data.draw(st.integers(1, k))
    seed = data.draw(st.integers(0, 2**32 - 1))
    extra = data.draw(st.floats(0.0, 0.8))
    I = fp.random_instance(k, j, random.Random(seed), extra=extra)
    ok, why = fp.check_hypotheses(I)
    assert ok, why
    pk = fp.pack(I)
    assert packing_violation(I, pk) is None
    assert all(isinstance(s.line(), str) for s in pk.trace)


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_apex_free_fails_hypotheses(k, seed):
    rng = random.Random(seed)
    I = fp.random_instance(k, k, rng, extra=0.0, apex_free=True)
    ok, why = fp.check_hypotheses(I)
    # a collision fix may still hand the apex an extra neighbour
    if len(I.neighbours()[I.apex]) == I.ell:
        assert not ok and "(i)" in why


def test_missing_colour_totals():
    for k in range(2, 13):
        for j in range(1, k + 1):
            ell = k - j + 1
            mc = fp.missing_colours(k, j)
            assert sum(mc[STAR].values()) == ell
            for u, cnt in mc.items():
                assert sum(cnt.values()) == ell
                assert all(m in (1, 2) for m in cnt.values())


def test_instance_json_roundtrip():
    I = fp.random_instance(5, 3, random.Random(1))
    back = fp.CliqueBipartiteInstance.from_json(I.to_json())
    assert back == I
    pk = fp.pack(I)
    obj = pk.to_json()
    assert len(obj["forests"]) == 2 and "matching" in obj


def test_trace_records_every_step():
    I = fp.random_instance(6, 4, random.Random(7))
    pk = fp.pack(I)
    steps = [s for s in pk.trace if s.rule_ii != "stuck-backtrack"]
    h_edges = sum(len(s.edges) for s in steps)
    h_used = sum(1 for f in pk.forests for a, b in f if (a in I.J) != (b in I.J))
    assert h_edges == h_used
