import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HAMRGG_HYPOTHESIS_PROFILE", "default"))

from hamrgg import conn, geom  # noqa: E402


def square_corners(p=2):
    return geom.PointSet(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), p)


def random_graph(n, prob, rng):
    i, j = np.triu_indices(n, 1)
    keep = rng.random(i.shape[0]) < prob
    return conn.Graph.from_edges(n, i[keep], j[keep])


@pytest.fixture
def corners():
    return square_corners()


def decomposition_violation(dec):
    """First broken invariant of a decomposition of K_{k+1}, or None. Uses only verify."""
    from hamrgg import verify
    k, m = dec.k, dec.k + 1
    classes = [[(seq[t], seq[(t + 1) % m]) for t in range(m)] for seq in dec.cycles]
    for c, seq in enumerate(dec.cycles, 1):
        v = verify.check_hamilton_cycle(seq, m)
        if not v:
            return f"colour {c}: {v.violation}"
    if k % 2:
        v = verify.check_perfect_matching(dec.match_class, m)
        if not v:
            return f"match class: {v.violation}"
        classes.append(list(dec.match_class))
    elif dec.match_class:
        return "match class for even k"
    v = verify.check_edge_disjoint(classes)
    if not v:
        return v.violation
    if sum(len(c) for c in classes) != m * (m - 1) // 2:
        return "classes do not cover E(K_{k+1})"
    # the colour matrix agrees with the listed classes
    for c, es in enumerate(classes, 1):
        if any(int(dec.colours[a, b]) != c for a, b in es):
            return f"colour matrix disagrees with class {c}"
    T = [tuple(sorted(e)) for e in dec.transversal]
    if len(T) != len(dec.cycles):
        return "transversal size"
    ends = [x for e in T for x in e]
    if len(set(ends)) != len(ends):
        return "transversal is not a matching"
    match = {tuple(sorted(e)) for e in dec.match_class}
    for c, e in enumerate(T, 1):
        if e in match:
            return "transversal uses the match class"
        if e not in {tuple(sorted(x)) for x in classes[c - 1]}:
            return f"transversal edge {e} is not in cycle {c}"
    return None


def packing_violation(inst, pk):
    """First failed output check of a forest packing, or None. Uses only verify."""
    from hamrgg import verify
    k, J = inst.k, list(inst.J)
    if len(pk.forests) != k // 2:
        return f"{len(pk.forests)} forests, expected {k // 2}"
    allowed = {frozenset(e) for e in inst.H_edges}
    allowed |= {frozenset((a, b)) for a in J for b in J if a != b}
    classes = [list(f) for f in pk.forests]
    for c, f in enumerate(pk.forests, 1):
        v = verify.check_linear_forest(f, J, expect_J_degree=2)
        if not v:
            return f"forest {c}: {v.violation}"
    if k % 2:
        deg = {}
        for a, b in pk.matching:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        if any(d != 1 for d in deg.values()) or any(deg.get(v, 0) != 1 for v in J):
            return "matching is not J-saturating"
        classes.append(list(pk.matching))
    elif pk.matching:
        return "matching for even k"
    for es in classes:
        for e in es:
            if frozenset(e) not in allowed:
                return f"edge {e} is neither a clique nor an H edge"
    v = verify.check_edge_disjoint(classes)
    if not v:
        return v.violation
    used = {frozenset(e) for es in classes for e in es}
    for x in range(len(J)):
        for y in range(x + 1, len(J)):
            if frozenset((J[x], J[y])) not in used:
                return f"clique edge {J[x]}-{J[y]} uncovered"
    return None


def hamiltonian_by_permutations(g):
    """Exhaustive search over vertex orderings starting at 0, extending prefixes
    only along edges. Independent of the oracle's subset DP."""
    n = g.n
    if n < 3:
        return False
    adj = [set(int(w) for w in g.neighbours(v)) for v in range(n)]
    order = [0]
    used = [False] * n
    used[0] = True

    def ext():
        if len(order) == n:
            return 0 in adj[order[-1]]
        for w in adj[order[-1]]:
            if not used[w]:
                used[w] = True
                order.append(w)
                if ext():
                    return True
                order.pop()
                used[w] = False
        return False

    return ext()
