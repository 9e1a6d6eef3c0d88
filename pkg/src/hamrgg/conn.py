"""Graphs, k-vertex-connectivity, bipartite Menger matchings and exact thresholds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ._accel import njit


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph in CSR form with sorted neighbour lists."""
    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, i, j) -> "Graph":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if i.size and (np.any(i == j)):
            raise ValueError("loops are not allowed")
        src = np.concatenate([i, j])
        dst = np.concatenate([j, i])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if src.size > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                keep = np.concatenate([[True], ~dup])
                src, dst = src[keep], dst[keep]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(n, indptr, dst.astype(np.int32))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        i, j = np.triu_indices(n, 1)
        return cls.from_edges(n, i, j)

    @property
    def m(self) -> int:
        return int(self.indices.shape[0] // 2)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def min_degree(self) -> int:
        return int(self.degree.min()) if self.n else 0

    def neighbours(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbours(u)
        t = int(np.searchsorted(row, v))
        return t < row.shape[0] and int(row[t]) == v

    def edges(self):
        src = np.repeat(np.arange(self.n), self.degree)
        sel = src < self.indices
        return src[sel], self.indices[sel].astype(np.int64)

    def edge_list(self) -> list:
        a, b = self.edges()
        return list(zip(a.tolist(), b.tolist()))

    @cached_property
    def reverse(self) -> np.ndarray:
        """reverse[e] is the arc index of (v -> u) for arc e = (u -> v)."""
        src = np.repeat(np.arange(self.n), self.degree)
        key_fwd = src * self.n + self.indices
        key_rev = self.indices.astype(np.int64) * self.n + src
        return np.searchsorted(key_fwd, key_rev).astype(np.int64)

    def subgraph(self, vertices):
        """Induced subgraph; returns (graph, list mapping new index -> old)."""
        vs = sorted(int(v) for v in vertices)
        pos = {v: t for t, v in enumerate(vs)}
        a, b = self.edges()
        ii, jj = [], []
        for x, y in zip(a.tolist(), b.tolist()):
            if x in pos and y in pos:
                ii.append(pos[x])
                jj.append(pos[y])
        return Graph.from_edges(len(vs), ii, jj), vs

    def without_edges(self, edges) -> "Graph":
        drop = {(min(a, b), max(a, b)) for a, b in edges}
        a, b = self.edges()
        keep = [t for t, e in enumerate(zip(a.tolist(), b.tolist())) if e not in drop]
        return Graph.from_edges(self.n, a[keep], b[keep])

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [[int(x), int(y)] for x, y in self.edge_list()]}

    @classmethod
    def from_json(cls, obj: dict) -> "Graph":
        e = np.asarray(obj.get("edges", []), dtype=np.int64).reshape(-1, 2)
        return cls.from_edges(int(obj["n"]), e[:, 0], e[:, 1])


def graph_at(ep, radius_or_index=None, *, index: Optional[int] = None, radius: Optional[float] = None) -> Graph:
    """Snapshot of the edge process: first `index` edges, or all edges of length <= radius.

    A bare int is read as an index, a float as a radius.
    """
    if radius_or_index is not None:
        if isinstance(radius_or_index, (int, np.integer)):
            index = int(radius_or_index)
        else:
            radius = float(radius_or_index)
    if index is None:
        if radius is None:
            index = len(ep)
        else:
            if ep.cutoff is not None and radius > ep.cutoff and not ep.complete:
                raise ValueError("radius beyond the edge process cutoff")
            index = ep.index_of_radius(radius)
    if index < 0 or index > len(ep):
        raise ValueError(f"index {index} outside 0..{len(ep)}")
    return Graph.from_edges(ep.n, ep.i[:index], ep.j[:index])


# ---------------------------------------------------------------------------
# kernels

@njit
def _mindeg_index(n, ei, ej, k):
    """Smallest t with min degree of the first t edges >= k, or -1."""
    deg = np.zeros(n, np.int64)
    short = n
    if k <= 0:
        return 0
    for t in range(ei.shape[0]):
        a = ei[t]
        b = ej[t]
        deg[a] += 1
        if deg[a] == k:
            short -= 1
        deg[b] += 1
        if deg[b] == k:
            short -= 1
        if short == 0:
            return t + 1
    return -1


@njit
def _components(n, indptr, indices, label):
    for v in range(n):
        label[v] = -1
    stack = np.empty(n, np.int64)
    nc = 0
    for v0 in range(n):
        if label[v0] >= 0:
            continue
        label[v0] = nc
        top = 0
        stack[0] = v0
        top = 1
        while top > 0:
            top -= 1
            x = stack[top]
            for e in range(indptr[x], indptr[x + 1]):
                y = indices[e]
                if label[y] < 0:
                    label[y] = nc
                    stack[top] = y
                    top += 1
        nc += 1
    return nc


@njit
def _is_adjacent(indptr, indices, u, v):
    lo = indptr[u]
    hi = indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[u + 1] and indices[lo] == v


@njit
def _common_count(indptr, indices, u, v, cap):
    a = indptr[u]
    a1 = indptr[u + 1]
    b = indptr[v]
    b1 = indptr[v + 1]
    c = 0
    while a < a1 and b < b1:
        x = indices[a]
        y = indices[b]
        if x == y:
            c += 1
            if c >= cap:
                return c
            a += 1
            b += 1
        elif x < y:
            a += 1
        else:
            b += 1
    return c


@njit
def _local_flow(indptr, indices, rev, s, t, k, flow, hflow, stamp, clock,
                pstate, parc, pkind, queue, touched, cut_out):
    """Vertex-disjoint s-t paths in the split digraph, capped at k.

    States 2v (in) and 2v+1 (out); arcs u_out->w_in have unbounded capacity,
    internal arcs v_in->v_out capacity 1. Returns (value, cut size); when the
    value is below k the minimum vertex cut is written to cut_out. All flow
    arrays are restored to zero before returning.
    """
    value = 0
    ntouch = 0
    ncut = 0
    while value < k:
        clock[0] += 1
        cur = clock[0]
        head = 0
        tail = 0
        src = 2 * s + 1
        stamp[src] = cur
        queue[tail] = src
        tail += 1
        found = -1
        while head < tail and found < 0:
            x = queue[head]
            head += 1
            v = x >> 1
            if x & 1:
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    if w == s:
                        continue
                    y = 2 * w
                    if stamp[y] != cur:
                        stamp[y] = cur
                        pstate[y] = x
                        parc[y] = e
                        pkind[y] = 0
                        if w == t:
                            found = y
                            break
                        queue[tail] = y
                        tail += 1
                if v != s and v != t and hflow[v] > 0:
                    y = 2 * v
                    if stamp[y] != cur:
                        stamp[y] = cur
                        pstate[y] = x
                        parc[y] = -1
                        pkind[y] = 3
                        queue[tail] = y
                        tail += 1
            else:
                if v != s and hflow[v] == 0:
                    y = 2 * v + 1
                    if stamp[y] != cur:
                        stamp[y] = cur
                        pstate[y] = x
                        parc[y] = -1
                        pkind[y] = 2
                        queue[tail] = y
                        tail += 1
                for e in range(indptr[v], indptr[v + 1]):
                    u = indices[e]
                    r = rev[e]
                    if flow[r] > 0:
                        y = 2 * u + 1
                        if stamp[y] != cur:
                            stamp[y] = cur
                            pstate[y] = x
                            parc[y] = r
                            pkind[y] = 1
                            queue[tail] = y
                            tail += 1
        if found < 0:
            for v in range(indptr.shape[0] - 1):
                if v != s and v != t and stamp[2 * v] == cur and stamp[2 * v + 1] != cur:
                    cut_out[ncut] = v
                    ncut += 1
            break
        y = found
        while y != src:
            kind = pkind[y]
            if kind == 0:
                flow[parc[y]] += 1
                touched[ntouch] = parc[y]
                ntouch += 1
            elif kind == 1:
                flow[parc[y]] -= 1
            elif kind == 2:
                hflow[y >> 1] += 1
            else:
                hflow[y >> 1] -= 1
            y = pstate[y]
        value += 1
    for q in range(ntouch):
        e = touched[q]
        flow[e] = 0
        u = indices[e]
        hflow[u] = 0
    return value, ncut


class _FlowWork:
    def __init__(self, g: Graph):
        n = g.n
        m2 = g.indices.shape[0]
        self.g = g
        self.rev = g.reverse
        self.flow = np.zeros(m2, np.int32)
        self.hflow = np.zeros(n, np.int32)
        self.stamp = np.zeros(2 * n, np.int64)
        self.clock = np.zeros(1, np.int64)
        self.pstate = np.zeros(2 * n, np.int64)
        self.parc = np.zeros(2 * n, np.int64)
        self.pkind = np.zeros(2 * n, np.int8)
        self.queue = np.zeros(2 * n + 1, np.int64)
        self.touched = np.zeros(2 * n + 1, np.int64)
        self.cut = np.zeros(n, np.int64)

    def local(self, s: int, t: int, k: int):
        g = self.g
        # the touched buffer must hold one entry per augmenting-path arc
        need = (k + 1) * (2 * g.n + 1)
        if self.touched.shape[0] < need:
            self.touched = np.zeros(need, np.int64)
        val, ncut = _local_flow(g.indptr, g.indices, self.rev, s, t, k, self.flow, self.hflow,
                                self.stamp, self.clock, self.pstate, self.parc, self.pkind,
                                self.queue, self.touched, self.cut)
        return int(val), [int(v) for v in self.cut[:ncut]]


def local_connectivity(g: Graph, s: int, t: int, cap: Optional[int] = None):
    """Number of internally disjoint s-t paths (capped) and a cut when below cap."""
    if s == t:
        raise ValueError("s == t")
    if g.has_edge(s, t):
        raise ValueError("s and t are adjacent")
    cap = g.n if cap is None else cap
    return _FlowWork(g).local(s, t, cap)


@dataclass
class ConnWitness:
    """Why a graph is not k-connected: a vertex cut (possibly empty) or too few vertices."""
    reason: str
    cut: list = field(default_factory=list)
    pair: Optional[tuple] = None


def is_connected(g: Graph) -> bool:
    if g.n <= 1:
        return True
    lab = np.empty(g.n, np.int64)
    return _components(g.n, g.indptr, g.indices, lab) == 1


def components(g: Graph) -> np.ndarray:
    lab = np.empty(g.n, np.int64)
    _components(g.n, g.indptr, g.indices, lab)
    return lab


@njit
def _pairs_scan(n, indptr, indices, rev, k, flow, hflow, stamp, clock, pstate, parc, pkind,
                queue, touched, cut_out, res):
    """Local-pair criterion. res <- (s, a, b, value, ncut) of the first failure, else s = -1."""
    res[0] = -1
    for s in range(n):
        d0 = indptr[s]
        na = min(k - 1, indptr[s + 1] - d0)
        for ia in range(na):
            a = indices[d0 + ia]
            for e in range(d0, indptr[s + 1]):
                b = indices[e]
                if b == a or _is_adjacent(indptr, indices, a, b):
                    continue
                if _common_count(indptr, indices, a, b, k) >= k:
                    continue
                val, ncut = _local_flow(indptr, indices, rev, a, b, k, flow, hflow, stamp,
                                        clock, pstate, parc, pkind, queue, touched, cut_out)
                if val < k:
                    res[0] = s
                    res[1] = a
                    res[2] = b
                    res[3] = val
                    res[4] = ncut
                    return


def is_k_connected(g: Graph, k: int, method: str = "local"):
    """(bool, witness). Exact.

    Convention: a graph on <= k vertices is never k-connected; K_{k+1} is.

    method="local": after the degree and connectivity checks, for every vertex
    s take its first k-1 neighbours a_i and require k disjoint a_i-b paths for
    each neighbour b of s not adjacent to a_i. If S is a minimum cut of size
    < k and s in S, some a_i avoids S and s has a neighbour b on another side,
    so the scan catches every failure. Pairs with >= k common neighbours are
    skipped without a flow.

    method="even": the classic scheme: fix a minimum-degree vertex v, test
    (v, u) for all u outside N[v] and all non-adjacent pairs inside N(v).
    """
    n = g.n
    if k <= 0:
        return True, None
    if n <= k:
        return False, ConnWitness("too-few-vertices")
    if g.m == n * (n - 1) // 2:
        return True, None
    lab = components(g)
    if lab.max() > 0:
        return False, ConnWitness("disconnected", [])
    if k == 1:
        return True, None
    deg = g.degree
    v = int(np.argmin(deg))
    if deg[v] < k:
        return False, ConnWitness("min-degree", [int(x) for x in g.neighbours(v)])
    work = _FlowWork(g)
    if method == "local":
        # cheap probe: a few flows out of a minimum-degree vertex catch most
        # small cuts around a sparse corner before the full scan
        nv = set(int(x) for x in g.neighbours(v))
        far = [u for u in range(0, n, max(1, n // 16)) if u != v and u not in nv][:8]
        for u in far:
            val, cut = work.local(v, u, k)
            if val < k:
                return False, ConnWitness("cut", cut, (v, u))
        res = np.zeros(5, np.int64)
        need = (k + 1) * (2 * n + 1)
        if work.touched.shape[0] < need:
            work.touched = np.zeros(need, np.int64)
        _pairs_scan(n, g.indptr, g.indices, work.rev, k, work.flow, work.hflow, work.stamp,
                    work.clock, work.pstate, work.parc, work.pkind, work.queue, work.touched,
                    work.cut, res)
        if res[0] < 0:
            return True, None
        cut = [int(x) for x in work.cut[: res[4]]]
        return False, ConnWitness("cut", cut, (int(res[1]), int(res[2])))
    if method != "even":
        raise ValueError(f"unknown method {method!r}")
    nv = set(int(x) for x in g.neighbours(v))
    for u in range(n):
        if u == v or u in nv:
            continue
        val, cut = work.local(v, u, k)
        if val < k:
            return False, ConnWitness("cut", cut, (v, u))
    nl = sorted(nv)
    for x_i, x in enumerate(nl):
        for y in nl[x_i + 1:]:
            if g.has_edge(x, y):
                continue
            val, cut = work.local(x, y, k)
            if val < k:
                return False, ConnWitness("cut", cut, (x, y))
    return True, None


class MengerInfeasible(Exception):
    def __init__(self, size, cover):
        super().__init__(f"only {size} disjoint J-J' edges; vertex cover {cover}")
        self.size = size
        self.cover = cover


def menger_matching(g: Graph, J, Jp, k: int) -> list:
    """k pairwise disjoint edges between J and Jp.

    For disjoint J and Jp the last J-vertex and first Jp-vertex of k disjoint
    J->Jp paths form such a matching, and a matching is k paths of length one,
    so a maximum bipartite matching on the J-Jp edges decides it. On failure the
    Konig vertex cover (size < k) is attached to the exception.
    """
    J = sorted(int(v) for v in J)
    Jp_set = set(int(v) for v in Jp)
    if Jp_set & set(J):
        raise ValueError("J and Jp must be disjoint")
    adj = {a: [int(b) for b in g.neighbours(a) if int(b) in Jp_set] for a in J}
    match_r = {}
    match_l = {}

    def augment(a, seen):
        for b in adj[a]:
            if b in seen:
                continue
            seen.add(b)
            if b not in match_r or augment(match_r[b], seen):
                match_r[b] = a
                match_l[a] = b
                return True
        return False

    for a in J:
        augment(a, set())
        if len(match_l) >= k:
            break
    if len(match_l) < k:
        # full maximum matching for the cover
        for a in J:
            if a not in match_l:
                augment(a, set())
        zl, zr = set(), set()
        stack = [a for a in J if a not in match_l]
        zl.update(stack)
        while stack:
            a = stack.pop()
            for b in adj[a]:
                if b not in zr:
                    zr.add(b)
                    a2 = match_r.get(b)
                    if a2 is not None and a2 not in zl:
                        zl.add(a2)
                        stack.append(a2)
        cover = sorted((set(J) - zl) | zr)
        raise MengerInfeasible(len(match_l), cover)
    pairs = sorted(match_l.items())[:k]
    return [(a, b) for a, b in pairs]


# ---------------------------------------------------------------------------
# thresholds

class ThresholdNotReached(ValueError):
    pass


@dataclass
class ThresholdReport:
    k: int
    n: int
    mindeg_index: Optional[int]
    mindeg_length: Optional[float]
    conn_index: Optional[int]
    conn_length: Optional[float]
    pack_index: Optional[int] = None
    pack_length: Optional[float] = None
    certificate: object = None

    def to_json(self) -> dict:
        d = {
            "k": self.k,
            "n": self.n,
            "r_mindeg": {"index": self.mindeg_index, "length": self.mindeg_length},
            "r_conn": {"index": self.conn_index, "length": self.conn_length},
        }
        if self.pack_index is not None:
            d["r_pack"] = {"index": self.pack_index, "length": self.pack_length}
            if self.certificate is not None:
                d["r_pack"]["certificate"] = self.certificate.to_json()
        return d


def mindeg_index(ep, k: int) -> Optional[int]:
    if ep.n == 0:
        return 0
    t = int(_mindeg_index(ep.n, ep.i, ep.j, k))
    return None if t < 0 else t


def first_true(prop, lo: int, hi: int) -> Optional[int]:
    """Smallest t in [lo, hi] with prop(t), for monotone prop; gallops up from lo."""
    if lo > hi:
        return None
    if prop(lo):
        return lo
    bad = lo
    step = 1
    good = None
    while True:
        t = min(bad + step, hi)
        if prop(t):
            good = t
            break
        bad = t
        if t == hi:
            return None
        step *= 2
    while good - bad > 1:
        mid = (bad + good) // 2
        if prop(mid):
            good = mid
        else:
            bad = mid
    return good


def threshold_radii(ep, k: int, with_packing_oracle: bool = False, limits=None) -> ThresholdReport:
    """Exact edge indices (and lengths) where min degree >= k, k-connectivity,
    and (optionally, via the oracle) the cycle/matching packing first appear."""
    n = ep.n
    E = len(ep)
    md = mindeg_index(ep, k)
    if md is None:
        if not ep.complete:
            raise ThresholdNotReached("minimum degree k not reached below the cutoff")
        return ThresholdReport(k, n, None, None, None, None)

    def conn_prop(t):
        return is_k_connected(graph_at(ep, index=t), k)[0]

    ci = first_true(conn_prop, md, E)
    if ci is None and not ep.complete:
        raise ThresholdNotReached("k-connectivity not reached below the cutoff")
    rep = ThresholdReport(k, n, md, ep.length_at(md), ci, None if ci is None else ep.length_at(ci))
    if with_packing_oracle:
        from . import oracle
        certs = {}

        def pack_prop(t):
            ok, cert = oracle.packing_exists(graph_at(ep, index=t), k, limits=limits or oracle.DEFAULT_LIMITS)
            if ok:
                certs[t] = cert
            return ok

        pi = first_true(pack_prop, md, E)
        if pi is None and not ep.complete:
            raise ThresholdNotReached("packing not reached below the cutoff")
        rep.pack_index = pi
        if pi is not None:
            rep.pack_length = ep.length_at(pi)
            cert = certs[pi]
            cert.r_index = pi
            cert.r_length = rep.pack_length
            rep.certificate = cert
    return rep
