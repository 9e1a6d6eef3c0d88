"""Exact brute-force answers for small graphs.

Graphs are handled as adjacency bitmasks (n <= 30 in principle, capped far lower).

Hamiltonicity: subset DP. dp[S] is the set of vertices v such that some path
starts at vertex 0, visits exactly {0} u S and ends at v. dp[S] gains v in S iff
adj[v] meets dp[S - v]. A cycle exists iff dp[all] meets adj[0].

Packing ((k//2) edge-disjoint Hamilton cycles, plus a perfect matching for odd
k): the innermost layer is a perfect matching (k=1) or the DP above (k=2); for
k >= 3 we enumerate Hamilton cycles C and recurse on G - C with k-2.
Canonical form for the enumeration: every cycle is written starting at vertex 0
and only the orientation with path[1] < path[n-1] is generated, so each cycle
is produced once. A partial path is dropped when some unvisited vertex has
fewer than two neighbours among the unvisited vertices and the two path ends.
For k >= 5 the cycles of successive layers are taken in increasing
lexicographic order of their canonical sequences, which removes the (k//2)!
reorderings of the same packing.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._accel import njit
from .certificate import CycleCertificate


class OracleLimitExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    """Vertex caps. Rough single-core envelopes: Hamiltonicity DP at 20 takes
    about a second; packing searches at 16 and k <= 4 finish in well under a
    second on threshold-radius geometric graphs; cut enumeration at 12 is instant."""
    max_n_hamilton: int = 20
    max_n_packing: int = 16
    max_n_cuts: int = 12

    def __post_init__(self):
        for v in (self.max_n_hamilton, self.max_n_packing, self.max_n_cuts):
            if v <= 0:
                raise ValueError("oracle caps must be positive")


DEFAULT_LIMITS = OracleLimits()
# colouring-search nodes before packing_exists hands over to the MILP (~7 ms each at n=16)
SEARCH_NODES = 500


def adjacency_masks(g) -> np.ndarray:
    adj = np.zeros(g.n, dtype=np.int64)
    for v in range(g.n):
        for w in g.neighbours(v):
            adj[v] |= np.int64(1) << np.int64(w)
    return adj


# ---------------------------------------------------------------------------
# kernels (plain integer code so the interpreted fallback behaves identically)

@njit
def _ham_dp(adj, n):
    """dp over subsets of {1..n-1}; index bit (v-1) stands for vertex v."""
    size = 1 << (n - 1)
    dp = np.zeros(size, np.int64)
    a0 = adj[0]
    for v in range(1, n):
        if (a0 >> v) & 1:
            dp[1 << (v - 1)] = 1 << v
    for S in range(1, size):
        if dp[S] != 0:
            continue
        acc = 0
        rest = S
        while rest:
            low = rest & (-rest)
            b = 0
            while (low >> b) != 1:
                b += 1
            v = b + 1
            prev = S ^ low
            if prev != 0 and (adj[v] & dp[prev]) != 0:
                acc |= 1 << v
            rest ^= low
        dp[S] = acc
    return dp


@njit
def _ham_cycle(adj, n, out):
    """Writes a Hamilton cycle into out[0..n-1] and returns 1, else 0."""
    if n < 3:
        return 0
    dp = _ham_dp(adj, n)
    full = (1 << (n - 1)) - 1
    ends = dp[full] & adj[0]
    if ends == 0:
        return 0
    v = 0
    while not (ends >> v) & 1:
        v += 1
    S = full
    out[0] = 0
    pos = n - 1
    while True:
        out[pos] = v
        pos -= 1
        S ^= 1 << (v - 1)
        if S == 0:
            break
        cand = dp[S] & adj[v]
        w = 0
        while not (cand >> w) & 1:
            w += 1
        v = w
    return 1


@njit
def _perfect_matching(adj, n, mate):
    """Backtracking on the lowest unmatched vertex; mate[v] filled on success."""
    if n % 2:
        return 0
    full = (1 << n) - 1
    stack_u = np.empty(n, np.int64)
    stack_c = np.empty(n, np.int64)
    depth = 0
    used = 0
    if n == 0:
        return 1
    u = 0
    stack_u[0] = u
    stack_c[0] = adj[u] & ~(1 << u)
    used = 1 << u
    while depth >= 0:
        cand = stack_c[depth] & ~used
        if cand == 0:
            # undo this level and the pairing that led here
            used &= ~(1 << stack_u[depth])
            depth -= 1
            if depth >= 0:
                used &= ~(1 << mate[stack_u[depth]])
            continue
        low = cand & (-cand)
        w = 0
        while (low >> w) != 1:
            w += 1
        stack_c[depth] &= ~low
        mate[stack_u[depth]] = w
        used |= low
        if used == full:
            for d in range(depth + 1):
                mate[mate[stack_u[d]]] = stack_u[d]
            return 1
        nxt = 0
        free = full & ~used
        while not (free >> nxt) & 1:
            nxt += 1
        depth += 1
        stack_u[depth] = nxt
        stack_c[depth] = adj[nxt]
        used |= 1 << nxt
    return 0


@njit
def _remove_cycle(adj, path, n, rem):
    for v in range(n):
        rem[v] = adj[v]
    for t in range(n):
        a = path[t]
        b = path[(t + 1) % n]
        rem[a] &= ~(1 << b)
        rem[b] &= ~(1 << a)


@njit
def _enumerate_layer(adj, n, inner, out_cycle, out_inner, budget):
    """Searches for a Hamilton cycle C with inner(G - C) true.

    inner = 1: perfect matching of the remainder (written to out_inner as mates).
    inner = 2: Hamilton cycle of the remainder (written to out_inner).
    Returns 1 found, 0 none, -1 budget exhausted. budget[0] counts nodes.
    """
    path = np.empty(n, np.int64)
    cand = np.empty(n, np.int64)
    rem = np.empty(n, np.int64)
    full = (1 << n) - 1
    path[0] = 0
    visited = 1
    cand[0] = adj[0]
    depth = 0
    while depth >= 0:
        budget[0] -= 1
        if budget[0] < 0:
            return -1
        c = cand[depth] & ~visited
        if c == 0:
            if depth == 0:
                break
            visited &= ~(1 << path[depth])
            depth -= 1
            continue
        low = c & (-c)
        w = 0
        while (low >> w) != 1:
            w += 1
        cand[depth] &= ~low
        d1 = depth + 1
        path[d1] = w
        visited |= low
        if d1 == n - 1:
            if (adj[w] & 1) and path[1] < w:
                _remove_cycle(adj, path, n, rem)
                ok = 0
                if inner == 1:
                    ok = _perfect_matching(rem, n, out_inner)
                else:
                    ok = _ham_cycle(rem, n, out_inner)
                if ok:
                    for t in range(n):
                        out_cycle[t] = path[t]
                    return 1
            visited &= ~low
            continue
        # feasibility prune: each unvisited vertex needs two usable neighbours
        unv = full & ~visited
        ends = 1 | low
        okp = True
        r = unv
        while r:
            lb = r & (-r)
            x = 0
            while (lb >> x) != 1:
                x += 1
            usable = adj[x] & (unv | ends)
            # popcount >= 2
            if usable == 0 or (usable & (usable - 1)) == 0:
                okp = False
                break
            r ^= lb
        if not okp:
            visited &= ~low
            continue
        depth = d1
        cand[depth] = adj[w]
    return 0


# ---------------------------------------------------------------------------

def is_hamiltonian(g, limits: OracleLimits = DEFAULT_LIMITS):
    """(bool, cycle or None). Graphs on fewer than 3 vertices are not Hamiltonian."""
    n = g.n
    if n > limits.max_n_hamilton:
        raise OracleLimitExceeded(f"n={n} above max_n_hamilton={limits.max_n_hamilton}")
    if n < 3 or g.min_degree() < 2:
        return False, None
    out = np.zeros(n, np.int64)
    ok = _ham_cycle(adjacency_masks(g), n, out)
    return (True, [int(v) for v in out]) if ok else (False, None)


def _masks_to_pm(mate, n):
    return sorted((int(v), int(mate[v])) for v in range(n) if v < mate[v])


def _cycle_edges(seq):
    m = len(seq)
    return [(min(seq[t], seq[(t + 1) % m]), max(seq[t], seq[(t + 1) % m])) for t in range(m)]


def _masks_without(adj, edges):
    rem = adj.copy()
    for a, b in edges:
        rem[a] &= ~(np.int64(1) << np.int64(b))
        rem[b] &= ~(np.int64(1) << np.int64(a))
    return rem


def _hamilton_cycles(adj, n, lower=None):
    """All Hamilton cycles in canonical form, lexicographically above `lower`."""
    full = (1 << n) - 1
    path = [0]

    def rec(visited):
        last = path[-1]
        if len(path) == n:
            if (int(adj[last]) & 1) and path[1] < last:
                seq = tuple(path)
                if lower is None or seq > lower:
                    yield seq
            return
        unv = full & ~visited
        c = int(adj[last]) & unv
        while c:
            low = c & (-c)
            w = low.bit_length() - 1
            c ^= low
            ends = 1 | low
            un2 = unv & ~low
            bad = False
            r = un2
            while r:
                lb = r & (-r)
                x = lb.bit_length() - 1
                r ^= lb
                if bin(int(adj[x]) & (un2 | ends)).count("1") < 2:
                    bad = True
                    break
            if bad:
                continue
            path.append(w)
            yield from rec(visited | low)
            path.pop()

    yield from rec(1)


def _pack_generic(adj, n, k, lower=None):
    """Recursive search for k >= 5 (and the reference path); returns (cycles, matching) or None."""
    if k == 0:
        return [], []
    if k == 1:
        mate = np.zeros(n, np.int64)
        return ([], _masks_to_pm(mate, n)) if _perfect_matching(adj, n, mate) else None
    if k == 2 and lower is None:
        out = np.zeros(n, np.int64)
        return ([[int(v) for v in out]], []) if _ham_cycle(adj, n, out) else None
    for seq in _hamilton_cycles(adj, n, lower):
        rest = _pack_generic(_masks_without(adj, _cycle_edges(seq)), n, k - 2, seq)
        if rest is not None:
            return [list(seq)] + rest[0], rest[1]
    return None


def packing_exists(g, k: int, limits: OracleLimits = DEFAULT_LIMITS, budget: int = 10**9,
                   method: str = "colouring", search_nodes: Optional[int] = SEARCH_NODES):
    """(bool, CycleCertificate or None) for floor(k/2) edge-disjoint Hamilton
    cycles plus, for odd k, an edge-disjoint perfect matching.

    For k >= 3, method="colouring" runs the joint colouring search (handing over
    to packing_exists_milp after search_nodes nodes; None means no cap) and
    method="enumerate" the layer-by-layer cycle enumeration; all are exact, the
    first is much faster when the answer is no on dense graphs.
    """
    n = g.n
    if k < 1:
        raise ValueError("k must be positive")
    if n > limits.max_n_packing:
        raise OracleLimitExceeded(f"n={n} above max_n_packing={limits.max_n_packing}")
    if k % 2 and n % 2:
        raise ValueError("odd k needs an even number of vertices")
    if k >= 2 and n < 3:
        return False, None
    if g.min_degree() < k or g.m * 2 < n * k:
        return False, None
    adj = adjacency_masks(g)
    cycles, matching = None, None
    if k == 1:
        mate = np.zeros(n, np.int64)
        if _perfect_matching(adj, n, mate):
            cycles, matching = [], _masks_to_pm(mate, n)
    elif k == 2:
        out = np.zeros(n, np.int64)
        if _ham_cycle(adj, n, out):
            cycles, matching = [[int(v) for v in out]], []
    elif method == "colouring":
        try:
            got = packing_search(g, k, search_nodes)
        except OracleLimitExceeded:
            # a few structureless "no" instances defeat the search; integer programming settles them
            return packing_exists_milp(g, k)
        if got is not None:
            cycles, matching = got
    elif method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    elif k in (3, 4):
        cyc = np.zeros(n, np.int64)
        inner = np.zeros(n, np.int64)
        bud = np.array([budget], np.int64)
        res = _enumerate_layer(adj, n, 1 if k == 3 else 2, cyc, inner, bud)
        if res < 0:
            raise OracleLimitExceeded("search budget exhausted")
        if res == 1:
            first = [int(v) for v in cyc]
            if k == 3:
                cycles, matching = [first], _masks_to_pm(inner, n)
            else:
                cycles, matching = [first, [int(v) for v in inner]], []
    else:
        got = _pack_generic(adj, n, k)
        if got is not None:
            cycles, matching = got
    if cycles is None:
        return False, None
    return True, CycleCertificate(k=k, n=n, cycles=cycles, matching=matching)


def vertex_connectivity_exact(g, limits: OracleLimits = DEFAULT_LIMITS):
    """(kappa, minimum cut). Complete graphs give (n-1, None); a graph whose
    vertices cannot be separated otherwise is reported via the smallest subset S
    with G - S disconnected."""
    n = g.n
    if n > limits.max_n_cuts:
        raise OracleLimitExceeded(f"n={n} above max_n_cuts={limits.max_n_cuts}")
    if g.m == n * (n - 1) // 2:
        return max(n - 1, 0), None
    adj = [int(a) for a in adjacency_masks(g)]
    full = (1 << n) - 1

    def connected(alive):
        start = alive & (-alive)
        seen = start
        frontier = start
        while frontier:
            nxt = 0
            r = frontier
            while r:
                lb = r & (-r)
                nxt |= adj[lb.bit_length() - 1]
                r ^= lb
            nxt &= alive & ~seen
            seen |= nxt
            frontier = nxt
        return seen == alive

    for size in range(0, n - 1):
        for S in itertools.combinations(range(n), size):
            mask = 0
            for v in S:
                mask |= 1 << v
            if not connected(full & ~mask):
                return size, list(S)
    return n - 1, None


def small_vertex_cut(g, k: int):
    """A vertex set of size < k whose removal disconnects g (or leaves one
    vertex), or None when g is k-connected. Enumerates all sets of size < k,
    which stays cheap for the small k used here even when n reaches 16."""
    n = g.n
    if n <= k:
        return list(range(max(n - 1, 0)))
    adj = [int(a) for a in adjacency_masks(g)]
    full = (1 << n) - 1
    for size in range(0, k):
        for S in itertools.combinations(range(n), size):
            alive = full
            for v in S:
                alive &= ~(1 << v)
            start = alive & (-alive)
            seen = frontier = start
            while frontier:
                nxt = 0
                r = frontier
                while r:
                    lb = r & (-r)
                    nxt |= adj[lb.bit_length() - 1]
                    r ^= lb
                nxt &= alive & ~seen
                seen |= nxt
                frontier = nxt
            if seen != alive:
                return list(S)
    return None


def packing_exists_milp(g, k: int, max_rounds: int = 500):
    """Independent check via integer programming with lazy subtour cuts.

    Variables x[e, c] (edge e in cycle c) and y[e] (edge e in the matching).
    Each cycle class has degree 2 everywhere, the matching degree 1, every edge
    is used at most once. Solutions whose class c splits into several cycles get
    the cut sum_{e in delta(S)} x[e, c'] >= 2 for every component S and every c'.
    Returns (bool, CycleCertificate or None).
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    n = g.n
    if k % 2 and n % 2:
        raise ValueError("odd k needs an even number of vertices")
    h = k // 2
    odd = k % 2
    E = g.edge_list()
    m = len(E)
    if (h and n < 3) or g.min_degree() < k:
        return False, None
    nv = m * (h + odd)
    if nv == 0:
        return True, CycleCertificate(k=k, n=n, cycles=[], matching=[])

    def var(e, c):
        return c * m + e

    rows = []
    lo, hi = [], []
    for c in range(h + odd):
        need = 1 if c == h else 2
        for v in range(n):
            rows.append([var(e, c) for e, (a, b) in enumerate(E) if a == v or b == v])
            lo.append(need)
            hi.append(need)
    for e in range(m):
        rows.append([var(e, c) for c in range(h + odd)])
        lo.append(0)
        hi.append(1)
    cuts = []

    def solve():
        allrows = rows + [r for r, _ in cuts]
        A = lil_matrix((len(allrows), nv))
        for t, r in enumerate(allrows):
            for j in r:
                A[t, j] = 1
        lb = lo + [2] * len(cuts)
        ub = hi + [np.inf] * len(cuts)
        res = milp(np.zeros(nv), constraints=LinearConstraint(A.tocsr(), lb, ub),
                   integrality=np.ones(nv), bounds=Bounds(0, 1))
        return res

    for _ in range(max_rounds):
        res = solve()
        if res.status == 2:
            return False, None
        if res.status != 0 or res.x is None:
            raise RuntimeError(f"milp status {res.status}: {res.message}")
        x = np.round(res.x).astype(int)
        comps_all = []
        cycles = []
        for c in range(h):
            es = [E[e] for e in range(m) if x[var(e, c)]]
            comps = _components_of(n, es)
            if len(comps) > 1:
                comps_all.extend(comps)
            else:
                cycles.append(_trace(n, es))
        if not comps_all:
            matching = [E[e] for e in range(m) if odd and x[var(e, h)]]
            return True, CycleCertificate(k=k, n=n, cycles=cycles, matching=sorted(matching))
        for S in comps_all:
            Sset = set(S)
            bd = [e for e, (a, b) in enumerate(E) if (a in Sset) != (b in Sset)]
            for c in range(h):
                cuts.append(([var(e, c) for e in bd], 2))
    raise RuntimeError("subtour separation did not converge")


def packing_exists_flow(g, k: int):
    """Second integer model, used to confirm "no" answers: x[e, c] as in
    packing_exists_milp, but each cycle class is made connected by a single
    commodity flow (vertex 0 ships one unit to every other vertex along class-c
    edges, arc capacity (n-1) x[e, c]) instead of lazy subtour cuts. One solve,
    no separation loop. Returns (bool, CycleCertificate or None)."""
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    n = g.n
    if k % 2 and n % 2:
        raise ValueError("odd k needs an even number of vertices")
    h = k // 2
    odd = k % 2
    E = g.edge_list()
    m = len(E)
    if (h and n < 3) or g.min_degree() < k:
        return False, None
    nx_ = m * (h + odd)
    nf = 2 * m * h
    if nx_ == 0:
        return True, CycleCertificate(k=k, n=n, cycles=[], matching=[])

    def xv(e, c):
        return c * m + e

    def fv(e, c, d):
        # d = 0: flow a -> b, d = 1: b -> a
        return nx_ + (c * m + e) * 2 + d

    A = lil_matrix((n * (h + odd) + m + n * h + m * h, nx_ + nf))
    lb, ub = [], []
    row = 0
    for c in range(h + odd):
        need = 1 if c == h else 2
        for v in range(n):
            for e, (a, b) in enumerate(E):
                if v in (a, b):
                    A[row, xv(e, c)] = 1
            lb.append(need)
            ub.append(need)
            row += 1
    for e in range(m):
        for c in range(h + odd):
            A[row, xv(e, c)] = 1
        lb.append(0)
        ub.append(1)
        row += 1
    for c in range(h):
        for v in range(n):
            # inflow - outflow: -(n-1) at the root, +1 elsewhere
            for e, (a, b) in enumerate(E):
                if v == b:
                    A[row, fv(e, c, 0)] += 1
                    A[row, fv(e, c, 1)] -= 1
                elif v == a:
                    A[row, fv(e, c, 0)] -= 1
                    A[row, fv(e, c, 1)] += 1
            want = -(n - 1) if v == 0 else 1
            lb.append(want)
            ub.append(want)
            row += 1
        for e in range(m):
            A[row, fv(e, c, 0)] = 1
            A[row, fv(e, c, 1)] = 1
            A[row, xv(e, c)] = -(n - 1)
            lb.append(-np.inf)
            ub.append(0)
            row += 1
    integrality = np.r_[np.ones(nx_), np.zeros(nf)]
    upper = np.r_[np.ones(nx_), np.full(nf, n - 1.0)]
    res = milp(np.zeros(nx_ + nf), constraints=LinearConstraint(A.tocsr(), lb, ub),
               integrality=integrality, bounds=Bounds(0, upper))
    if res.status == 2:
        return False, None
    if res.status != 0 or res.x is None:
        raise RuntimeError(f"milp status {res.status}: {res.message}")
    x = np.round(res.x[:nx_]).astype(int)
    cycles = [_trace(n, [E[e] for e in range(m) if x[xv(e, c)]]) for c in range(h)]
    matching = sorted(E[e] for e in range(m) if odd and x[xv(e, h)])
    return True, CycleCertificate(k=k, n=n, cycles=cycles, matching=matching)


def _components_of(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    groups = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def _trace(n, edges):
    nb = {v: [] for v in range(n)}
    for a, b in edges:
        nb[a].append(b)
        nb[b].append(a)
    seq = [0]
    prev, cur = 0, nb[0][0]
    while cur != 0:
        seq.append(cur)
        a, b = nb[cur]
        prev, cur = cur, (b if a == prev else a)
    return seq


# ---------------------------------------------------------------------------
# joint colouring search

class _Infeasible(Exception):
    pass


class _State:
    """Partial assignment of edges to classes 1..C (0 = unused).

    Classes 1..h are Hamilton cycles, class h+1 (odd k) the perfect matching.
    For a cycle class, other[c][v] is the far end of the class path that ends at
    v and size[c][v] its vertex count; a class edge that would close a shorter
    cycle is removed from the domain at once.
    """
    __slots__ = ("dom", "val", "cnt", "other", "size", "used")

    def copy(self):
        s = _State.__new__(_State)
        s.dom = self.dom[:]
        s.val = self.val[:]
        s.cnt = [row[:] for row in self.cnt]
        s.other = [row[:] for row in self.other]
        s.size = [row[:] for row in self.size]
        s.used = self.used[:]
        return s


class _ColouringSearch:
    def __init__(self, n, edges, k, max_nodes=None):
        self.n = n
        self.max_nodes = max_nodes
        self.E = edges
        self.h = k // 2
        self.C = self.h + (k % 2)
        self.need = [0] + [2] * self.h + ([1] if k % 2 else [])
        self.inc = [[] for _ in range(n)]
        self.eid = {}
        for e, (a, b) in enumerate(edges):
            self.inc[a].append(e)
            self.inc[b].append(e)
            self.eid[(a, b)] = self.eid[(b, a)] = e
        self.nodes = 0
        self.cuts, self.hopeless = self._tight_cuts(3) if self.h else ([], False)

    def _tight_cuts(self, max_size):
        """Vertex sets S (2 <= |S| <= max_size) whose removal leaves exactly |S|
        components. A Hamilton cycle alternates between S and those components,
        so it has no edge inside S, two edges between S and each component, and
        the two edges at a vertex of S go to different components. More than
        |S| components (or a cut vertex) rules out any Hamilton cycle."""
        n = self.n
        nb = [set() for _ in range(n)]
        for a, b in self.E:
            nb[a].add(b)
            nb[b].add(a)
        cuts = []
        for size in range(1, min(max_size, n - 2) + 1):
            for S in itertools.combinations(range(n), size):
                Sset = set(S)
                comp = [-1] * n
                ncomp = 0
                for v in range(n):
                    if v in Sset or comp[v] >= 0:
                        continue
                    comp[v] = ncomp
                    stack = [v]
                    while stack:
                        x = stack.pop()
                        for y in nb[x]:
                            if y not in Sset and comp[y] < 0:
                                comp[y] = ncomp
                                stack.append(y)
                    ncomp += 1
                if ncomp > size:
                    return [], True
                if ncomp < size or size == 1:
                    continue
                inside = [self.eid[(a, b)] for a, b in itertools.combinations(S, 2) if (a, b) in self.eid]
                # per component: edges to S; per vertex of S: {component: edges}
                to_comp = [[] for _ in range(ncomp)]
                at = {v: {} for v in S}
                for v in S:
                    for w in nb[v]:
                        if w not in Sset:
                            e = self.eid[(v, w)]
                            to_comp[comp[w]].append(e)
                            at[v].setdefault(comp[w], []).append(e)
                cuts.append((inside, to_comp, [grp for v in S for grp in at[v].values()]))
        return cuts, False

    def _cut_rules(self, s, work):
        for inside, to_comp, groups in self.cuts:
            for c in range(1, self.h + 1):
                for e in inside:
                    self._remove(s, e, c, work)
                for es in to_comp:
                    on = [e for e in es if s.val[e] == c]
                    if len(on) > 2:
                        raise _Infeasible
                    open_ = [e for e in es if s.val[e] < 0 and (s.dom[e] >> c) & 1]
                    if len(on) + len(open_) < 2:
                        raise _Infeasible
                    if len(on) == 2:
                        for e in open_:
                            self._remove(s, e, c, work)
                    elif len(on) + len(open_) == 2:
                        for e in open_:
                            work.append((e, c))
                for es in groups:
                    on = [e for e in es if s.val[e] == c]
                    if len(on) > 1:
                        raise _Infeasible
                    if on:
                        for e in es:
                            if s.val[e] < 0:
                                self._remove(s, e, c, work)

    def initial(self):
        s = _State.__new__(_State)
        full = (1 << (self.C + 1)) - 1
        s.dom = [full] * len(self.E)
        s.val = [-1] * len(self.E)
        s.cnt = [[0] * (self.C + 1) for _ in range(self.n)]
        s.other = [list(range(self.n)) for _ in range(self.C + 1)]
        s.size = [[1] * self.n for _ in range(self.C + 1)]
        s.used = [False] * (self.C + 1)
        return s

    # -- propagation

    def _remove(self, s, e, c, work):
        if s.val[e] >= 0:
            if s.val[e] == c:
                raise _Infeasible
            return
        if not (s.dom[e] >> c) & 1:
            return
        s.dom[e] &= ~(1 << c)
        d = s.dom[e]
        if d == 0:
            raise _Infeasible
        if d & (d - 1) == 0:
            work.append((e, d.bit_length() - 1))
        a, b = self.E[e]
        work.append((-1, a))
        work.append((-1, b))

    def _set(self, s, e, c, work):
        if s.val[e] >= 0:
            if s.val[e] != c:
                raise _Infeasible
            return
        if not (s.dom[e] >> c) & 1:
            raise _Infeasible
        s.val[e] = c
        s.dom[e] = 1 << c
        a, b = self.E[e]
        work.append((-1, a))
        work.append((-1, b))
        if c == 0:
            return
        s.used[c] = True
        for v in (a, b):
            s.cnt[v][c] += 1
            if s.cnt[v][c] > self.need[c]:
                raise _Infeasible
        if c <= self.h:
            oth, sz = s.other[c], s.size[c]
            x, y = oth[a], oth[b]
            if x == b:
                # closes a cycle: only the full Hamilton cycle is allowed
                if sz[a] != self.n:
                    raise _Infeasible
                return
            tot = sz[a] + sz[b]
            oth[x], oth[y] = y, x
            sz[x] = sz[y] = tot
            if tot < self.n:
                f = self.eid.get((x, y))
                if f is not None and f != e:
                    self._remove(s, f, c, work)

    def _vertex(self, s, v, work):
        free = [e for e in self.inc[v] if s.val[e] < 0]
        demand = 0
        for c in range(1, self.C + 1):
            left = self.need[c] - s.cnt[v][c]
            demand += left
            cand = [e for e in free if (s.dom[e] >> c) & 1]
            if len(cand) < left:
                raise _Infeasible
            if left == 0:
                for e in cand:
                    self._remove(s, e, c, work)
            elif len(cand) == left:
                for e in cand:
                    work.append((e, c))
        if len(free) < demand:
            raise _Infeasible
        if len(free) == demand and demand:
            for e in free:
                self._remove(s, e, 0, work)

    def propagate(self, s, work):
        while work:
            e, c = work.pop()
            if e >= 0:
                self._set(s, e, c, work)
            else:
                self._vertex(s, c, work)

    # -- search

    def _pick(self, s):
        # edges that must be used come first: only their class is open
        forced = [e for e in range(len(self.E)) if s.val[e] < 0 and not s.dom[e] & 1]
        if forced:
            return [min(forced, key=lambda e: (bin(s.dom[e]).count("1"), e))]
        best, best_key = None, None
        for v in range(self.n):
            free = [e for e in self.inc[v] if s.val[e] < 0]
            if not free:
                continue
            demand = sum(self.need[c] - s.cnt[v][c] for c in range(1, self.C + 1))
            if demand == 0:
                continue
            key = (len(free) - demand, len(free))
            if best_key is None or key < best_key:
                best, best_key = free, key
        return best

    def _bridgeless(self, s, c):
        """The edges that may still carry cycle class c must form a connected
        bridgeless spanning graph, since a Hamilton cycle crosses every cut twice."""
        n = self.n
        nb = [[] for _ in range(n)]
        for e, (a, b) in enumerate(self.E):
            if s.val[e] == c or (s.val[e] < 0 and (s.dom[e] >> c) & 1):
                nb[a].append((b, e))
                nb[b].append((a, e))
        disc = [-1] * n
        low = [0] * n
        disc[0] = 0
        clock = 1
        stack = [(0, -1, iter(nb[0]))]
        while stack:
            v, pe, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    if low[v] > disc[u]:
                        return False
                    low[u] = min(low[u], low[v])
                continue
            w, e = nxt
            if e == pe:
                continue
            if disc[w] < 0:
                disc[w] = low[w] = clock
                clock += 1
                stack.append((w, e, iter(nb[w])))
            else:
                low[v] = min(low[v], disc[w])
        return clock == n

    def _usable_adjacency(self, s):
        nb = [[] for _ in range(self.n)]
        for e, (a, b) in enumerate(self.E):
            if s.val[e] != 0 and (s.dom[e] >> 1):
                nb[a].append(b)
                nb[b].append(a)
        return nb

    @staticmethod
    def _st_cut(nb, src, dst, cap):
        """Unit-capacity undirected max flow, stopping at cap; (value, source side)."""
        flow = {}
        value = 0
        while True:
            par = {src: None}
            queue = [src]
            for x in queue:
                if x == dst:
                    break
                for y in nb[x]:
                    if y not in par and flow.get((x, y), 0) < 1:
                        par[y] = x
                        queue.append(y)
            if dst not in par:
                return value, set(par)
            value += 1
            y = dst
            while par[y] is not None:
                x = par[y]
                flow[(x, y)] = flow.get((x, y), 0) + 1
                flow[(y, x)] = flow.get((y, x), 0) - 1
                y = x
            if value >= cap:
                return value, None

    def _cut_bound(self, s, work):
        """Every cut is crossed by >= 2 edges of each cycle class (and an odd
        side by one matching edge), so a lighter cut is infeasible; a tight cut
        forces all its undecided edges into use. Cuts come from Gusfield's
        Gomory-Hu construction, so a minimum cut separates every pair."""
        n = self.n
        if n < 2:
            return
        nb = self._usable_adjacency(s)
        base = 2 * self.h
        odd = self.C > self.h
        parent = [0] * n
        for v in range(1, n):
            t = parent[v]
            value, side = self._st_cut(nb, v, t, base + 2)
            if side is None:
                continue
            need = base + (1 if odd and len(side) % 2 else 0)
            if value < need:
                raise _Infeasible
            if value == need:
                for e, (a, b) in enumerate(self.E):
                    if (a in side) != (b in side) and s.val[e] < 0:
                        self._remove(s, e, 0, work)
            for u in range(v + 1, n):
                if parent[u] == t and u in side:
                    parent[u] = v

    def _class_masks(self, s, c):
        adj = np.zeros(self.n, np.int64)
        for e, (a, b) in enumerate(self.E):
            if s.val[e] == c or (s.val[e] < 0 and (s.dom[e] >> c) & 1):
                adj[a] |= 1 << b
                adj[b] |= 1 << a
        return adj

    def _classes_realisable(self, s):
        """Each cycle class alone still has a Hamilton cycle (and the matching
        class a perfect matching) among the edges open to it."""
        buf = np.zeros(self.n, np.int64)
        for c in range(1, self.C + 1):
            adj = self._class_masks(s, c)
            if c <= self.h:
                if not _ham_cycle(adj, self.n, buf):
                    return False
            elif not _perfect_matching(adj, self.n, buf):
                return False
        return True

    def solve(self, s):
        self.nodes += 1
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            raise OracleLimitExceeded(f"colouring search passed {self.max_nodes} nodes")
        for c in range(1, self.h + 1):
            if not self._bridgeless(s, c):
                return None
        if not self._classes_realisable(s):
            return None
        try:
            work = []
            self._cut_rules(s, work)
            if work:
                self.propagate(s, work)
            self._cut_bound(s, work)
            if work:
                self.propagate(s, work)
                for c in range(1, self.h + 1):
                    if not self._bridgeless(s, c):
                        return None
        except _Infeasible:
            return None
        free = self._pick(s)
        if free is None:
            return s
        e = free[0]
        options = [c for c in range(1, self.C + 1) if (s.dom[e] >> c) & 1]
        # unused cycle classes are interchangeable: open only the first one
        fresh_seen = False
        for c in options:
            if c <= self.h and not s.used[c]:
                if fresh_seen:
                    continue
                fresh_seen = True
            t = s.copy()
            try:
                self.propagate(t, [(e, c)])
            except _Infeasible:
                continue
            out = self.solve(t)
            if out is not None:
                return out
        if s.dom[e] & 1:
            t = s.copy()
            try:
                self.propagate(t, [(e, 0)])
            except _Infeasible:
                return None
            return self.solve(t)
        return None

    def run(self):
        if self.hopeless:
            return None
        s = self.initial()
        try:
            self.propagate(s, [(-1, v) for v in range(self.n)])
        except _Infeasible:
            return None
        s = self.solve(s)
        if s is None:
            return None
        cycles = []
        for c in range(1, self.h + 1):
            es = [self.E[e] for e in range(len(self.E)) if s.val[e] == c]
            cycles.append(_trace(self.n, es))
        matching = sorted(self.E[e] for e in range(len(self.E)) if self.C > self.h and s.val[e] == self.C)
        return cycles, matching


def packing_search(g, k: int, max_nodes: Optional[int] = None):
    """Joint colouring search; returns (cycles, matching) or None. With
    max_nodes, raises OracleLimitExceeded once that many nodes are visited."""
    srch = _ColouringSearch(g.n, g.edge_list(), k, max_nodes)
    return srch.run()
