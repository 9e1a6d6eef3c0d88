"""Independent certificate checkers.

Nothing here imports the producing modules: distances are recomputed from raw
coordinates and adjacency is rebuilt from scratch, so a bug upstream cannot
vouch for itself.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np


class Verdict(NamedTuple):
    ok: bool
    violation: Optional[str] = None

    def __bool__(self):
        return self.ok


OK = Verdict(True, None)


def _fail(msg: str) -> Verdict:
    return Verdict(False, msg)


def _coords(ps):
    pts = getattr(ps, "points", ps)
    return np.asarray(pts, dtype=np.float64)


def _norm(ps, p=None):
    if p is None:
        p = getattr(ps, "p", 2.0)
    if isinstance(p, str):
        p = math.inf if p.lower() in ("inf", "infinity") else float(p)
    return float(p)


def _dist(pts, a, b, p):
    dx = abs(pts[a, 0] - pts[b, 0])
    dy = abs(pts[a, 1] - pts[b, 1])
    if math.isinf(p):
        return max(dx, dy)
    if p == 1.0:
        return dx + dy
    if p == 2.0:
        return math.sqrt(dx * dx + dy * dy)
    return (dx ** p + dy ** p) ** (1.0 / p)


def _edge_checker(ps=None, r=None, edges=None, p=None):
    """Predicate for 'uv is an allowed edge' from points+radius or an explicit edge list."""
    if edges is not None:
        allowed = {(min(a, b), max(a, b)) for a, b in edges}
        return lambda a, b: (min(a, b), max(a, b)) in allowed, None
    if ps is not None and r is not None:
        pts = _coords(ps)
        q = _norm(ps, p)
        return lambda a, b: _dist(pts, a, b, q) <= r, lambda a, b: _dist(pts, a, b, q)
    return None, None


def check_hamilton_cycle(cycle, n: int, ps=None, r=None, edges=None, p=None) -> Verdict:
    """cycle is a vertex sequence (closing edge implied)."""
    seq = [int(v) for v in cycle]
    if len(seq) != n:
        return _fail(f"cycle has {len(seq)} vertices, expected {n}")
    if n < 3:
        return _fail(f"no Hamilton cycle on {n} vertices")
    seen = set()
    for v in seq:
        if not (0 <= v < n):
            return _fail(f"vertex {v} out of range")
        if v in seen:
            return _fail(f"vertex {v} repeated")
        seen.add(v)
    ok_edge, dist = _edge_checker(ps, r, edges, p)
    if ok_edge is not None:
        for t in range(n):
            a, b = seq[t], seq[(t + 1) % n]
            if not ok_edge(a, b):
                extra = f" (length {dist(a, b):.6g} > {r:.6g})" if dist else ""
                return _fail(f"edge {min(a, b)}-{max(a, b)} not allowed{extra}")
    return OK


def check_perfect_matching(matching, n: int, ps=None, r=None, edges=None, p=None) -> Verdict:
    cover = {}
    for a, b in matching:
        a, b = int(a), int(b)
        if a == b:
            return _fail(f"loop at {a}")
        for v in (a, b):
            if not (0 <= v < n):
                return _fail(f"vertex {v} out of range")
            if v in cover:
                return _fail(f"vertex {v} matched twice")
            cover[v] = (a, b)
    if len(cover) != n:
        missing = min(set(range(n)) - set(cover))
        return _fail(f"vertex {missing} unmatched")
    ok_edge, dist = _edge_checker(ps, r, edges, p)
    if ok_edge is not None:
        for a, b in matching:
            if not ok_edge(int(a), int(b)):
                extra = f" (length {dist(a, b):.6g} > {r:.6g})" if dist else ""
                return _fail(f"edge {min(a, b)}-{max(a, b)} not allowed{extra}")
    return OK


def check_edge_disjoint(classes) -> Verdict:
    owner = {}
    for ci, cls in enumerate(classes):
        for a, b in cls:
            e = (min(int(a), int(b)), max(int(a), int(b)))
            if e in owner:
                return _fail(f"edge {e[0]}-{e[1]} in classes {owner[e]} and {ci}")
            owner[e] = ci
    return OK


def check_linear_forest(edges, J=(), expect_J_degree: Optional[int] = None) -> Verdict:
    """Acyclic, max degree 2; optionally every vertex of J has the given degree."""
    deg = {}
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    seen = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            return _fail(f"loop at {a}")
        e = (min(a, b), max(a, b))
        if e in seen:
            return _fail(f"edge {e[0]}-{e[1]} repeated")
        seen.add(e)
        for v in (a, b):
            deg[v] = deg.get(v, 0) + 1
            if deg[v] > 2:
                return _fail(f"vertex {v} has degree {deg[v]}")
        ra, rb = find(a), find(b)
        if ra == rb:
            return _fail(f"edge {e[0]}-{e[1]} closes a cycle")
        parent[ra] = rb
    if expect_J_degree is not None:
        for v in J:
            if deg.get(int(v), 0) != expect_J_degree:
                return _fail(f"vertex {v} has degree {deg.get(int(v), 0)}, expected {expect_J_degree}")
    return OK


def count_pairs_within(ps, length: float, p=None):
    """(#pairs with d < length, #pairs with d <= length, sorted tie pairs with d == length)."""
    pts = _coords(ps)
    q = _norm(ps, p)
    n = pts.shape[0]
    order = np.argsort(pts[:, 0], kind="stable")
    xs = pts[order, 0]
    lt = le = 0
    ties = []
    hi = np.searchsorted(xs, xs + length, side="right")
    for a in range(n):
        b1 = hi[a]
        if b1 <= a + 1:
            continue
        u = order[a]
        vs = order[a + 1:b1]
        dx = np.abs(pts[vs, 0] - pts[u, 0])
        dy = np.abs(pts[vs, 1] - pts[u, 1])
        if math.isinf(q):
            d = np.maximum(dx, dy)
        elif q == 1.0:
            d = dx + dy
        elif q == 2.0:
            d = np.sqrt(dx * dx + dy * dy)
        else:
            d = (dx ** q + dy ** q) ** (1.0 / q)
        lt += int(np.count_nonzero(d < length))
        eq = vs[d == length]
        le += int(np.count_nonzero(d <= length))
        ties.extend((min(u, v), max(u, v)) for v in eq.tolist())
    return lt, le, sorted(ties)


def check_certificate(ps, k: int, r_index: Optional[int], cert, r_length: Optional[float] = None) -> Verdict:
    """Full check of a packing certificate against the raw point set.

    With r_index, every edge must be among the first r_index edges of the
    (length, i, j)-sorted process; r_length (default: the certificate's) is
    the length of edge number r_index and is cross-checked by counting.
    """
    pts = _coords(ps)
    n = pts.shape[0]
    q = _norm(ps)
    if int(cert.k) != int(k):
        return _fail(f"certificate is for k={cert.k}, expected {k}")
    if int(cert.n) != n:
        return _fail(f"certificate is for n={cert.n}, point set has {n}")
    if len(cert.cycles) != k // 2:
        return _fail(f"{len(cert.cycles)} cycles, expected {k // 2}")
    if k % 2 and n % 2:
        return _fail("odd k needs an even number of points")
    if r_length is None:
        r_length = cert.r_length
    if r_index is None:
        r_index = cert.r_index
    if r_length is None and r_index is not None:
        return _fail("r_index given without a length")
    for ci, seq in enumerate(cert.cycles):
        v = check_hamilton_cycle(seq, n)
        if not v:
            return _fail(f"cycle {ci}: {v.violation}")
    if k % 2:
        v = check_perfect_matching(cert.matching, n)
        if not v:
            return _fail(f"matching: {v.violation}")
    elif cert.matching:
        return _fail("matching present for even k")
    classes = []
    for seq in cert.cycles:
        m = len(seq)
        classes.append([(seq[t], seq[(t + 1) % m]) for t in range(m)])
    if k % 2:
        classes.append([tuple(e) for e in cert.matching])
    v = check_edge_disjoint(classes)
    if not v:
        return v
    if r_length is None:
        return OK
    used = {(min(int(a), int(b)), max(int(a), int(b))) for cls in classes for a, b in cls}
    at_limit = []
    for a, b in sorted(used):
        d = _dist(pts, a, b, q)
        if d > r_length:
            return _fail(f"edge {a}-{b} has length {d:.12g} > {r_length:.12g}")
        if d == r_length:
            at_limit.append((a, b))
    if r_index is None:
        return OK
    lt, le, ties = count_pairs_within(pts, r_length, q)
    if not (lt < r_index <= le) and not (r_index == 0 and le == 0):
        return _fail(f"r_index {r_index} inconsistent with r_length (pairs below: {lt}, up to: {le})")
    allowed = set(ties[: r_index - lt])
    for e in at_limit:
        if e not in allowed:
            return _fail(f"edge {e[0]}-{e[1]} ties the limit length but lies beyond index {r_index}")
    return OK


def check_vertex_cut(n: int, edges, cut) -> Verdict:
    """cut separates the graph (n - |cut| >= 2 and G - cut disconnected)."""
    cut = {int(v) for v in cut}
    rest = [v for v in range(n) if v not in cut]
    if len(rest) < 2:
        return _fail("cut leaves fewer than two vertices")
    adj = {v: [] for v in rest}
    for a, b in edges:
        a, b = int(a), int(b)
        if a in adj and b in adj:
            adj[a].append(b)
            adj[b].append(a)
    seen = {rest[0]}
    stack = [rest[0]]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) == len(rest):
        return _fail("graph minus cut is still connected")
    return OK
