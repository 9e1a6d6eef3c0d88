"""Deterministic construction of floor(k/2) edge-disjoint Hamilton cycles, plus a
perfect matching for odd k, inside the geometric graph at the k-connectivity
threshold.

Outline. Tessellate at the lower radius r_l, take a spanning tree of the big
dense component D0 and walk around it (each tree edge twice). Every dense cell
carries edge-disjoint Hamilton cycles of its points, one per colour. Each pass
of the walk through a cell breaks one in-cell edge of that colour ("spare
edge") and wires the walk's inter-cell edges to its endpoints, which merges all
dense cells into one cycle per colour. Bad components get linear forests inside
J + J' which are threaded into the walk through detours in their rings. The
remaining points ("outsiders") are spliced in through further spare edges. For
odd k the last colour becomes a perfect matching: a cycle through the dense
cells, matched pieces elsewhere, and waiting vertices attached through gates
with an odd-spacing choice along the cycle.

Spare edges are tracked per cell and colour. A vertex that receives an
inter-cell edge of colour i is owned by i and cannot be used by any other
colour, which keeps all classes edge-disjoint.
"""
from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cells, conn, forestpack, geom, kdecomp, verify
from ._accel import njit
from .certificate import CycleCertificate
from .kdecomp import STAR

FREE = -1
GATE = -2


class StructuredFailure(Exception):
    """Named reason a build did not produce a certificate.

    stage: where it stopped; prop: the violated property; defect: True when
    the failure contradicts the construction itself (never expected).
    """

    def __init__(self, stage: str, prop: str, witness=None, defect: bool = False, detail: str = ""):
        super().__init__(f"[{stage}] {prop}" + (f": {detail}" if detail else ""))
        self.stage = stage
        self.prop = prop
        self.witness = witness
        self.defect = defect
        self.detail = detail

    def to_json(self) -> dict:
        w = self.witness
        try:
            import json
            json.dumps(w)
        except (TypeError, ValueError):
            w = repr(w)
        return {"stage": self.stage, "prop": self.prop, "defect": self.defect,
                "detail": self.detail, "witness": w}


@dataclass(frozen=True)
class BuilderConfig:
    k: int
    lam0: float = 10.0
    delta: float = cells.DEFAULT_DELTA
    M: Optional[int] = None
    norm: Optional[float] = None
    strict: bool = True
    alpha: float = 0.1
    r_tess: Optional[float] = None      # relaxed mode only; default r_k
    verify: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if not self.lam0 > 0:
            raise ValueError("lam0 must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.M is not None and self.M < 1:
            raise ValueError("M must be positive")

    def radii(self, n: int, p) -> tuple:
        lo = geom.connectivity_scale(n, self.k, p, -self.lam0)
        hi = geom.connectivity_scale(n, self.k, p, self.lam0)
        return lo, hi


# ---------------------------------------------------------------------------
# forests for one bad component

@dataclass
class ComponentForests:
    J: list
    Jprime: list
    paths: list                     # paths[i]: vertex lists of colour i (ends in J')
    matching: list                  # odd k: edges saturating J
    Jpp: list                       # J' vertices used by some path or the matching
    case: str
    backtracks: int = 0


def _cycle_minus_edge(seq, p, q):
    """Hamilton path p ... q along seq without the edge pq."""
    L = len(seq)
    i = seq.index(p)
    if seq[(i + 1) % L] == q:
        return [seq[(i - t) % L] for t in range(L)]
    if seq[(i - 1) % L] == q:
        return [seq[(i + t) % L] for t in range(L)]
    raise AssertionError(f"{p}-{q} is not an edge of the cycle")


def _paths_of(edges):
    """Vertex sequences of a linear forest given by its edges."""
    nb = defaultdict(list)
    for a, b in edges:
        nb[a].append(b)
        nb[b].append(a)
    seen = set()
    out = []
    for v in sorted(nb):
        if v in seen or len(nb[v]) != 1:
            continue
        seq = [v]
        seen.add(v)
        prev, cur = None, v
        while True:
            nxt = [w for w in nb[cur] if w != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            seq.append(cur)
            seen.add(cur)
            if len(nb[cur]) == 1:
                break
        out.append(seq)
    if len(seen) != len(nb):
        raise AssertionError("forest contains a cycle")
    return out


def _menger(g, J, Jp, k):
    try:
        return conn.menger_matching(g, J, Jp, k)
    except conn.MengerInfeasible as exc:
        raise StructuredFailure("forests", "connectivity", {"cover": list(exc.cover)},
                                detail=f"only {exc.size} disjoint J-J' edges")


def forests_for_component(g, J, Jprime, k: int) -> ComponentForests:
    """Linear forests through J (and a matching saturating J for odd k)."""
    J = sorted(int(v) for v in J)
    Jp = sorted(int(v) for v in Jprime)
    j = len(J)
    h = k // 2
    odd = k % 2 == 1
    if j == 0:
        return ComponentForests(J, Jp, [[] for _ in range(h)], [], [], "empty")
    Js = set(J)
    for a in J:
        nb = set(int(w) for w in g.neighbours(a))
        miss = [b for b in J if b != a and b not in nb]
        if miss:
            raise StructuredFailure("forests", "bad-clique", {"pair": [a, miss[0]]},
                                    detail="bad component points are not a clique at r_k")
    paths = [[] for _ in range(h)]
    matching = []
    backtracks = 0
    if j == 1:
        v = J[0]
        nbrs = sorted(int(w) for w in g.neighbours(v) if int(w) not in Js)
        if len(nbrs) < k:
            raise StructuredFailure("forests", "connectivity", {"vertex": v}, detail="degree below k")
        for i in range(h):
            paths[i] = [[nbrs[2 * i], v, nbrs[2 * i + 1]]]
        if odd:
            matching = [(v, nbrs[2 * h])]
        case = "j=1"
    elif (not odd and j > k) or (odd and j > k + 1):
        T = _menger(g, J, Jp, k)
        dec = kdecomp.decompose(j - 1)
        ncyc = h + (1 if odd else 0)
        if len(dec.cycles) < ncyc:
            raise AssertionError("decomposition too small")
        ends = []
        for c in range(h):
            ends.extend(dec.transversal[c])
        label = {}
        tj = [a for a, _ in T]
        tmate = {a: b for a, b in T}
        for lab, v in zip(ends, tj):
            label[lab] = v
        p_last = None
        if odd:
            p_last = next(x for x in range(j) if x not in label)
            label[p_last] = tj[2 * h]
        rest = [v for v in J if v not in set(label.values())]
        for lab in range(j):
            if lab not in label:
                label[lab] = rest.pop(0)
        for c in range(h):
            p, q = dec.transversal[c]
            seq = _cycle_minus_edge(list(dec.cycles[c]), p, q)
            body = [label[x] for x in seq]
            paths[c] = [[tmate[body[0]]] + body + [tmate[body[-1]]]]
        if odd:
            seq = list(dec.cycles[h])
            if j % 2 == 0:
                matching = [(label[seq[t]], label[seq[t + 1]]) for t in range(0, j, 2)]
            else:
                i0 = seq.index(p_last)
                rot = [seq[(i0 + 1 + t) % j] for t in range(j - 1)]
                matching = [(label[rot[t]], label[rot[t + 1]]) for t in range(0, j - 1, 2)]
                matching.append((label[p_last], tmate[label[p_last]]))
        case = "transversal"
    elif odd and j == k + 1:
        T = _menger(g, J, Jp, k)
        dec = kdecomp.decompose(k + 1)
        label = {}
        tj = [a for a, _ in T]
        tmate = {a: b for a, b in T}
        ends = []
        for c in range(h):
            seq = dec.cycles[c]
            ends.extend([seq[1], seq[-1]])
        for lab, v in zip(ends, tj):
            label[lab] = v
        rest = [v for v in J if v not in set(label.values())]
        for lab in range(1, k + 2):
            if lab not in label:
                label[lab] = rest.pop(0)
        for c in range(h):
            body = [label[x] for x in dec.cycles[c][1:]]
            paths[c] = [[tmate[body[0]]] + body + [tmate[body[-1]]]]
        body = [label[x] for x in dec.cycles[h][1:]]
        matching = [(body[t], body[t + 1]) for t in range(0, j, 2)]
        case = "broken-K(k+2)"
    else:
        deg = g.degree
        apexes = [v for v in J if deg[v] >= k + 1]
        if not apexes:
            raise StructuredFailure("forests", "extradeg", {"J": J},
                                    detail="no vertex of degree >= k+1 in a component with j <= k")
        apex = max(apexes, key=lambda v: (deg[v], -v))
        H = [(a, int(b)) for a in J for b in g.neighbours(a) if int(b) not in Js]
        inst = forestpack.CliqueBipartiteInstance(k, J, apex, Jp, H)
        ok, why = forestpack.check_hypotheses(inst)
        if not ok:
            raise StructuredFailure("forests", "connectivity", {"J": J}, detail=why)
        try:
            pk = forestpack.pack(inst)
        except forestpack.ForestPackDefect as exc:
            raise StructuredFailure("forests", "forestpack", {"trace": [s.line() for s in exc.trace[-20:]]},
                                    defect=True, detail=str(exc))
        backtracks = pk.backtracks
        for c in range(h):
            paths[c] = _paths_of(pk.forests[c])
        matching = list(pk.matching) if odd else []
        case = "forestpack"
    Jps = set(Jp)
    used = set()
    for c in range(h):
        for P in paths[c]:
            used.update(v for v in P if v in Jps)
    for a, b in matching:
        used.update(v for v in (a, b) if v in Jps)
    out = ComponentForests(J, Jp, paths, [tuple(e) for e in matching], sorted(used), case, backtracks)
    _check_claim(g, out, k)
    return out


def _check_claim(g, cf: ComponentForests, k: int):
    Jps = set(cf.Jprime)
    Js = set(cf.J)
    allowed = Js | Jps
    seen = set()
    for c, ps in enumerate(cf.paths):
        edges = [(P[t], P[t + 1]) for P in ps for t in range(len(P) - 1)]
        v = verify.check_linear_forest(edges, cf.J, expect_J_degree=2)
        if not v:
            raise StructuredFailure("forests", "claim", {"colour": c}, defect=True, detail=v.violation)
        for P in ps:
            if P[0] not in Jps or P[-1] not in Jps:
                raise StructuredFailure("forests", "claim", {"path": P}, defect=True, detail="path end outside J'")
            if sum(1 for x in P if x in Jps) > 2 * k:
                raise StructuredFailure("forests", "claim", {"path": P}, defect=True, detail="too many J' vertices")
        for a, b in edges:
            e = (min(a, b), max(a, b))
            if a not in allowed or b not in allowed or not (a in Js or b in Js):
                raise StructuredFailure("forests", "claim", {"edge": e}, defect=True, detail="edge leaves G")
            if not g.has_edge(a, b):
                raise StructuredFailure("forests", "claim", {"edge": e}, defect=True, detail="edge not in graph")
            if e in seen:
                raise StructuredFailure("forests", "claim", {"edge": e}, defect=True, detail="forests share an edge")
            seen.add(e)
    if k % 2:
        cover = defaultdict(int)
        for a, b in cf.matching:
            e = (min(a, b), max(a, b))
            if not g.has_edge(a, b) or e in seen:
                raise StructuredFailure("forests", "claim", {"edge": e}, defect=True, detail="bad matching edge")
            seen.add(e)
            cover[a] += 1
            cover[b] += 1
        if any(cover[v] != 1 for v in cf.J) or any(x > 1 for x in cover.values()):
            raise StructuredFailure("forests", "claim", {"matching": cf.matching}, defect=True,
                                    detail="matching does not saturate J exactly once")
    if len(cf.Jpp) > max(k * k, 1):
        raise StructuredFailure("forests", "claim", {"Jpp": cf.Jpp}, defect=True, detail="|J''| > k^2")


# ---------------------------------------------------------------------------
# cell walks

@njit
def _dfs_tour(d0, N, offx, offy, root, out):
    m = d0.shape[0]
    nb = offx.shape[0]
    ptr = np.zeros(m, np.int64)
    seen = np.zeros(m, np.uint8)
    stack = np.empty(m, np.int64)
    top = 0
    stack[0] = root
    seen[root] = 1
    L = 0
    out[L] = root
    L += 1
    while top >= 0:
        u = stack[top]
        c = d0[u]
        cx = c % N
        cy = c // N
        advanced = False
        while ptr[u] < nb:
            t = ptr[u]
            ptr[u] += 1
            x = cx + offx[t]
            y = cy + offy[t]
            if x < 0 or y < 0 or x >= N or y >= N:
                continue
            d = y * N + x
            i = np.searchsorted(d0, d)
            if i < m and d0[i] == d and seen[i] == 0:
                seen[i] = 1
                top += 1
                stack[top] = i
                out[L] = i
                L += 1
                advanced = True
                break
        if not advanced:
            top -= 1
            if top >= 0:
                out[L] = stack[top]
                L += 1
    return L


@njit
def _bfs_path(cellset, N, offx, offy, s, t, parent):
    m = cellset.shape[0]
    for i in range(m):
        parent[i] = -1
    queue = np.empty(m, np.int64)
    head = 0
    tail = 1
    queue[0] = s
    parent[s] = s
    nb = offx.shape[0]
    while head < tail:
        u = queue[head]
        head += 1
        if u == t:
            return 1
        c = cellset[u]
        cx = c % N
        cy = c // N
        for q in range(nb):
            x = cx + offx[q]
            y = cy + offy[q]
            if x < 0 or y < 0 or x >= N or y >= N:
                continue
            d = y * N + x
            i = np.searchsorted(cellset, d)
            if i < m and cellset[i] == d and parent[i] < 0:
                parent[i] = u
                queue[tail] = i
                tail += 1
    return 0


def euler_tour(cls) -> list:
    """Closed walk over D0 traversing each edge of a depth-first spanning tree twice."""
    d0 = cls.D0.astype(np.int64)
    if d0.shape[0] <= 1:
        return [int(c) for c in d0]
    off = cls.graph.offsets
    out = np.empty(2 * d0.shape[0], np.int64)
    L = _dfs_tour(d0, cls.N, off[:, 0].copy(), off[:, 1].copy(), 0, out)
    tour = [int(d0[i]) for i in out[:L]]
    if len(set(tour)) != d0.shape[0]:
        raise StructuredFailure("circuit", "D0-disconnected", defect=True)
    return tour


def route_in(cls, cellset: np.ndarray, a: int, b: int) -> list:
    """Shortest cell path a .. b inside cellset."""
    cellset = np.sort(cellset.astype(np.int64))
    ia = int(np.searchsorted(cellset, a))
    ib = int(np.searchsorted(cellset, b))
    off = cls.graph.offsets
    parent = np.empty(cellset.shape[0], np.int64)
    if not _bfs_path(cellset, cls.N, off[:, 0].copy(), off[:, 1].copy(), ia, ib, parent):
        raise StructuredFailure("circuit", "ring-disconnected", {"cells": [a, b]}, defect=True)
    seq = [ib]
    while seq[-1] != ia:
        seq.append(int(parent[seq[-1]]))
    return [int(cellset[i]) for i in reversed(seq)]


@dataclass
class Circuit:
    tour: list                      # closed walk over D0 (first == last when nonempty)
    walks: list                     # per colour: list of hops (from_cell, to_cell, path or None)
    max_degree: int = 0
    degree_bound: int = 0


def _anchor(cls, ring_cells_xy, ring_cells, v) -> int:
    """A ring cell containing or adjacent to the cell of v, nearest first."""
    c = int(cls.grid.cell_of[v])
    N = cls.N
    x, y = c % N, c // N
    dx = np.abs(ring_cells_xy[:, 0] - x)
    dy = np.abs(ring_cells_xy[:, 1] - y)
    order = np.lexsort((ring_cells, np.maximum(dx, dy)))
    for t in order:
        cand = int(ring_cells[t])
        if cand == c or cls.graph.adjacent(c, cand, cls.r, cls.grid.p):
            return cand
    raise StructuredFailure("circuit", "ring-coverage", {"vertex": int(v)}, defect=True)


# ---------------------------------------------------------------------------
# colouring ledger

class _Defect(Exception):
    pass


class _Colouring:
    def __init__(self, n: int, ncol: int):
        self.n = n
        self.ncol = ncol
        self.nb = [[[-1, -1] for _ in range(n)] for _ in range(ncol)]
        self.edge = {}
        self.owner = [FREE] * n
        self.cell_edges = {}        # (cell, colour) -> list of in-cell edges
        self.ptr = {}
        self.spare_used = defaultdict(int)

    def add(self, c, a, b, tag):
        a, b = int(a), int(b)
        if a == b:
            raise _Defect(f"loop at {a}")
        e = (a, b) if a < b else (b, a)
        if e in self.edge:
            raise _Defect(f"edge {e} already has colour {self.edge[e]}, wanted {c}")
        for x, y in ((a, b), (b, a)):
            s = self.nb[c][x]
            if s[0] < 0:
                s[0] = y
            elif s[1] < 0:
                s[1] = y
            else:
                raise _Defect(f"vertex {x} would get degree 3 in colour {c}")
        self.edge[e] = (c, tag)

    def remove(self, c, a, b):
        e = (a, b) if a < b else (b, a)
        if self.edge.get(e, (None,))[0] != c:
            raise _Defect(f"edge {e} is not in colour {c}")
        del self.edge[e]
        for x, y in ((a, b), (b, a)):
            s = self.nb[c][x]
            if s[0] == y:
                s[0] = s[1]
                s[1] = -1
            elif s[1] == y:
                s[1] = -1
            else:
                raise _Defect("adjacency out of sync")

    def degree(self, c, v):
        s = self.nb[c][v]
        return (s[0] >= 0) + (s[1] >= 0)

    def spare(self, cell, c, mark):
        """First in-cell edge of colour c in cell whose endpoints are free or owned by c.

        Marks both endpoints with `mark` (a colour or GATE). None when exhausted.
        """
        key = (cell, c)
        lst = self.cell_edges.get(key)
        if not lst:
            return None
        t = self.ptr.get(key, 0)
        ok = (FREE, c)
        while t < len(lst):
            a, b = lst[t]
            e = (a, b) if a < b else (b, a)
            if self.edge.get(e) == (c, "cell") and self.owner[a] in ok and self.owner[b] in ok:
                self.ptr[key] = t + 1
                self.owner[a] = mark
                self.owner[b] = mark
                self.spare_used[cell] += 1
                return a, b
            t += 1
        self.ptr[key] = t
        return None

    def cycle(self, c, start):
        seq = [start]
        prev, cur = -1, start
        for _ in range(self.n + 1):
            s = self.nb[c][cur]
            nxt = s[1] if s[0] == prev else s[0]
            if nxt < 0:
                raise _Defect(f"colour {c} is not closed at {cur}")
            if nxt == start:
                return seq
            prev, cur = cur, nxt
            seq.append(cur)
        raise _Defect(f"colour {c} does not close")


# ---------------------------------------------------------------------------
# the build

@dataclass
class BuildStats:
    seconds: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)
    components: list = field(default_factory=list)
    outsiders: int = 0
    outsider_cells: int = 0
    big_outsider_cells: int = 0
    waiting: int = 0
    max_spare_per_cell: int = 0
    max_passages: int = 0

    def to_json(self) -> dict:
        return {"seconds": self.seconds, "cells": self.cells, "components": self.components,
                "outsiders": self.outsiders, "outsider_cells": self.outsider_cells,
                "big_outsider_cells": self.big_outsider_cells, "waiting": self.waiting,
                "max_spare_per_cell": self.max_spare_per_cell, "max_passages": self.max_passages}


class _Builder:
    def __init__(self, ps, k, ep, cfg, r_index, stages=None):
        self.stages = stages
        self.ps = ps
        self.k = k
        self.ep = ep
        self.cfg = cfg
        self.n = ps.n
        self.p = ps.p
        self.h = k // 2
        self.odd = k % 2 == 1
        self.ncol = (k + 1) // 2
        self.mc = self.h if self.odd else None      # index of the match colour
        self.r_index = r_index
        self.stats = BuildStats()
        self.t0 = time.perf_counter()

    def _tick(self, name):
        t = time.perf_counter()
        self.stats.seconds[name] = round(t - self.t0, 4)
        self.t0 = t
        if self.stages is not None:
            snap = {"stage": name}
            col = getattr(self, "col", None)
            if col is not None:
                per = defaultdict(list)
                for (a, b), (c, tag) in sorted(col.edge.items()):
                    per[int(c)].append([int(a), int(b), tag])
                snap["colours"] = {str(c): per[c] for c in sorted(per)}
            self.stages.append(snap)

    def _fail(self, stage, prop, witness=None, detail=""):
        raise StructuredFailure(stage, prop, witness, False, detail)

    def _spare_failure(self, where, cell):
        defect = self.cfg.strict
        raise StructuredFailure(where, "spare-edges", {"cell": int(cell)}, defect,
                                "no spare edge left" + (" under the M policy" if defect else ""))

    # -- stages ----------------------------------------------------------------

    def radii(self):
        ep, k = self.ep, self.k
        if self.r_index is None:
            rep = conn.threshold_radii(ep, k)
            self.r_index = rep.conn_index
        self.r_k = ep.length_at(self.r_index)
        self.g = conn.graph_at(ep, index=self.r_index)
        r_l, r_u = self.cfg.radii(self.n, self.p)
        self.r_l, self.r_u = r_l, r_u
        if self.cfg.strict:
            if not (math.isfinite(r_l) and r_l <= self.r_k <= (1 + 1 / 32) * r_l):
                self._fail("radius-window", "radius-window",
                           {"r_l": r_l, "r_k": self.r_k},
                           "r_k outside [r_l, (1+1/32) r_l]")
            self.r = r_l
        else:
            self.r = self.cfg.r_tess if self.cfg.r_tess is not None else self.r_k
            if not (self.r <= self.r_k <= (1 + 1 / 32) * self.r * (1 + 1e-12)):
                self._fail("radius-window", "radius-window", {"r": self.r, "r_k": self.r_k})
        self._tick("radii")

    def tessellate(self):
        cfg, k = self.cfg, self.k
        try:
            if cfg.M is None:
                cls = cells.tessellate_with_policy(self.ps, self.r, cfg.delta, k, check_delta=cfg.strict)
            else:
                cls = cells.tessellate(self.ps, self.r, cfg.delta, cfg.M, k, check_delta=cfg.strict)
        except ValueError as exc:
            self._fail("cells", "grid", None, str(exc))
        self.cls = cls
        self.stats.cells = cls.summary()
        if cfg.strict:
            ok, w = cells.check_dense_coverage(cls, cfg.alpha)
            if not ok:
                self._fail("cells", f"dense-coverage-{w['statement']}", w)
        ok, w = cells.check_component_structure(cls)
        if not ok:
            self._fail("cells", w["reason"], w)
        ok, msg = cells.check_classification(cls)
        if not ok:
            raise StructuredFailure("cells", "classification", None, True, msg)
        if cfg.strict:
            ok, w = cells.check_extradeg_property(self.g, self.ps, k, 32 * cfg.delta, self.r_k)
            if not ok:
                self._fail("cells", "extradeg", w)
        self._tick("cells")

    def components(self):
        cls = self.cls
        self.rings = []
        self.forests = []
        for b in cls.bad_components:
            J = cells.points_of(cls, b.cells)
            if J.shape[0] == 0:
                continue
            try:
                ring = cells.build_ring(cls, b, self.r_k, self.g)
            except cells.RingError as exc:
                self._fail("ring", exc.prop, exc.witness, str(exc))
            self.rings.append(ring)
        ok, w = cells.check_rings_disjoint(self.rings)
        if not ok:
            self._fail("ring", w["prop"], w)
        for ring in self.rings:
            cf = forests_for_component(self.g, ring.J, ring.Jprime, self.k)
            self.forests.append(cf)
            self.stats.components.append({"j": len(cf.J), "jprime": len(cf.Jprime), "jpp": len(cf.Jpp),
                                          "case": cf.case, "backtracks": cf.backtracks,
                                          "ring": int(ring.R.shape[0])})
        forest = set()
        for cf in self.forests:
            forest.update(cf.J)
            forest.update(cf.Jpp)
        self.forest_vertices = forest
        self._tick("forests")

    def circuits(self):
        cls = self.cls
        tour = euler_tour(cls)
        base = [(tour[t], tour[t + 1], None) for t in range(len(tour) - 1)]
        walks = []
        for c in range(self.ncol):
            walk = list(base)
            if c < self.h:
                for ring, cf in zip(self.rings, self.forests):
                    R = np.sort(ring.R)
                    Rxy = np.stack([R % cls.N, R // cls.N], axis=1)
                    used = set()
                    plist = []
                    for P in cf.paths[c]:
                        plist.append(list(P))
                        used.update(P)
                    for v in cf.Jpp:
                        if v not in used:
                            plist.append([v])
                    for P in plist:
                        cu = _anchor(cls, Rxy, R, P[0])
                        cv = _anchor(cls, Rxy, R, P[-1])
                        route = route_in(cls, R, cu, cv)
                        if len(route) > 10 / cls.grid.delta ** 2:
                            raise StructuredFailure("circuit", "route-length", None, True)
                        sub = [(route[t], route[t + 1], None) for t in range(len(route) - 1)]
                        sub.append((cv, cu, list(reversed(P))))
                        walk = _insert(walk, cu, sub)
            walks.append(walk)
        Delta = cls.graph.Delta
        bound = 2 * Delta + self.k ** 3
        mx = 0
        for walk in walks:
            deg = defaultdict(int)
            for a, b, _ in walk:
                deg[a] += 1
                deg[b] += 1
            if deg:
                mx = max(mx, max(deg.values()))
        if mx > bound:
            raise StructuredFailure("circuit", "degree-bound", {"max": mx, "bound": bound}, True)
        self.circuit = Circuit(tour, walks, mx, bound)
        self.stats.max_passages = mx // 2
        self._tick("circuit")

    def colour_cells(self):
        cls = self.cls
        n = self.n
        col = _Colouring(n, self.ncol)
        self.col = col
        fv = self.forest_vertices
        self.dense_points = []
        self.cell_points = {}
        for c in cls.D0:
            c = int(c)
            vs = [int(v) for v in sorted(cls.grid.points_in(c)) if int(v) not in fv]
            self.cell_points[c] = vs
            if (len(vs) - 1) // 2 < self.ncol or len(vs) < 3:
                raise StructuredFailure("cells", "dense-capacity", {"cell": c, "points": len(vs)},
                                        self.cfg.strict, "too few free points in a dense cell")
            cyc = kdecomp.complete_graph_cycles(vs, self.ncol)
            for i, seq in enumerate(cyc):
                es = [(seq[t], seq[(t + 1) % len(seq)]) for t in range(len(seq))]
                for a, b in es:
                    col.add(i, a, b, "cell")
                col.cell_edges[(c, i)] = es
            self.dense_points.extend(vs)
        self._tick("in-cell")

    def splice(self):
        col = self.col
        for i, walk in enumerate(self.circuit.walks):
            L = len(walk)
            if L == 0:
                continue
            at = defaultdict(list)
            for t, (frm, _, _) in enumerate(walk):
                at[frm].append(t)
            start = [None] * L
            end = [None] * L
            for cell, pos in at.items():
                for q, t in enumerate(pos):
                    z = col.spare(cell, i, i)
                    if z is None:
                        self._spare_failure("splice", cell)
                    a, b = z
                    col.remove(i, a, b)
                    nxt = pos[(q + 1) % len(pos)]
                    start[t] = a
                    end[(nxt - 1) % L] = b
            for t, (frm, to, path) in enumerate(walk):
                s, e = start[t], end[t]
                if path is None:
                    col.add(i, s, e, "hop")
                else:
                    col.add(i, s, path[0], "special")
                    for x in range(len(path) - 1):
                        col.add(i, path[x], path[x + 1], "forest")
                    col.add(i, path[-1], e, "special")
        self._tick("splice")

    def _adjacent_dense(self, cid):
        cls = self.cls
        N = cls.N
        x, y = cid % N, cid // N
        off = cls.graph.offsets
        xs = x + off[:, 0]
        ys = y + off[:, 1]
        ok = (xs >= 0) & (ys >= 0) & (xs < N) & (ys < N)
        ids = ys[ok] * N + xs[ok]
        out = []
        if cls.in_D0(cid):
            out.append(int(cid))
        hit = ids[cls.labels[ids] == cells.DENSE]
        out.extend(int(c) for c in hit if cls.in_D0(int(c)))
        return out

    def _spare_near(self, cands, c, mark):
        for cell in cands:
            z = self.col.spare(cell, c, mark)
            if z is not None:
                return z
        return None

    def outsiders(self):
        cls, col, k = self.cls, self.col, self.k
        fv = self.forest_vertices
        in_d0 = set(int(c) for c in cls.D0)
        groups = defaultdict(list)
        for v in range(self.n):
            if v in fv:
                continue
            c = int(cls.grid.cell_of[v])
            if c in in_d0:
                continue
            groups[c].append(v)
        self.waiting = []
        self.match_edges = []
        self.stats.outsiders = sum(len(g) for g in groups.values())
        self.stats.outsider_cells = len(groups)
        for cell in sorted(groups):
            vs = groups[cell]
            cands = self._adjacent_dense(cell)
            if not cands:
                raise StructuredFailure("outsiders", "outsider-not-adjacent", {"cell": cell}, True)
            if len(vs) <= 2 * k:
                for v in vs:
                    for i in range(self.h):
                        z = self._spare_near(cands, i, i)
                        if z is None:
                            self._spare_failure("outsiders", cands[0])
                        a, b = z
                        col.remove(i, a, b)
                        col.add(i, a, v, "attach")
                        col.add(i, v, b, "attach")
                    if self.odd:
                        self.waiting.append(v)
                continue
            self.stats.big_outsider_cells += 1
            ncyc = self.h + (1 if self.odd else 0)
            cyc = kdecomp.complete_graph_cycles(vs, ncyc)
            taken = set()
            picks = []
            for i in range(self.h):
                seq = cyc[i]
                es = [(seq[t], seq[(t + 1) % len(seq)]) for t in range(len(seq))]
                for a, b in es:
                    col.add(i, a, b, "outsider")
                e = next(((a, b) for a, b in es if a not in taken and b not in taken), None)
                if e is None:
                    raise StructuredFailure("outsiders", "independent-edges", {"cell": cell}, True)
                taken.update(e)
                picks.append(e)
            for i, (x, y) in enumerate(picks):
                z = self._spare_near(cands, i, i)
                if z is None:
                    self._spare_failure("outsiders", cands[0])
                a, b = z
                col.remove(i, a, b)
                col.remove(i, x, y)
                col.add(i, x, a, "attach")
                col.add(i, y, b, "attach")
            if self.odd:
                seq = cyc[self.h]
                m = len(seq)
                for t in range(0, m - 1, 2):
                    self._match_add(seq[t], seq[t + 1])
                if m % 2:
                    self.waiting.append(seq[-1])
        self._tick("outsiders")

    def _match_add(self, a, b):
        e = (min(a, b), max(a, b))
        if e in self.col.edge:
            raise _Defect(f"matching edge {e} already coloured {self.col.edge[e]}")
        self.col.edge[e] = (self.mc, "match")
        self.match_edges.append(e)

    def matching(self):
        if not self.odd:
            return
        col, cls = self.col, self.cls
        mc = self.mc
        for cf in self.forests:
            for a, b in cf.matching:
                self._match_add(a, b)
            sat = set(v for e in cf.matching for v in e)
            for v in cf.Jpp:
                if v not in sat:
                    self.waiting.append(v)
        self.stats.waiting = len(self.waiting)
        gates = {}
        for w in self.waiting:
            cands = self._adjacent_dense(int(cls.grid.cell_of[w]))
            z = self._spare_near(cands, mc, GATE)
            if z is None:
                self._spare_failure("gates", cands[0] if cands else -1)
            gates[w] = z
        # the match-colour cycle through the dense cells
        start = self.dense_points[0]
        seq = col.cycle(mc, start)
        L = len(seq)
        if L != len(self.dense_points):
            raise _Defect("match-colour cycle misses dense points")
        pos = {v: t for t, v in enumerate(seq)}
        items = []
        for w, (a, b) in gates.items():
            pa, pb = pos[a], pos[b]
            if (pa + 1) % L == pb:
                first = pa
            elif (pb + 1) % L == pa:
                first = pb
            else:
                raise _Defect("gate is not a cycle edge")
            items.append((first, w))
        items.sort()
        if (L - len(items)) % 2:
            raise _Defect("parity: cycle length and waiting set disagree")
        chosen = []
        prev = None
        for first, w in items:
            # unrolled positions; consecutive choices an odd distance apart
            q = first if prev is None or (first - prev) % 2 == 1 else first + 1
            chosen.append((q % L, w))
            prev = q
        # cycle order: remove all match-colour cycle edges and pair up
        for t in range(L):
            a, b = seq[t], seq[(t + 1) % L]
            col.remove(mc, a, b)
        if not chosen:
            for t in range(0, L, 2):
                self._match_add(seq[t], seq[t + 1])
        else:
            qs = [q for q, _ in chosen]
            for (q, w) in chosen:
                self._match_add(w, seq[q])
            for idx, q in enumerate(qs):
                q2 = qs[(idx + 1) % len(qs)]
                gap = (q2 - q) % L if len(qs) > 1 else L
                if gap % 2 == 0:
                    raise _Defect("even gap between gate vertices")
                for t in range(1, gap, 2):
                    self._match_add(seq[(q + t) % L], seq[(q + t + 1) % L])
        self._tick("matching")

    def certificate(self) -> CycleCertificate:
        col = self.col
        cycles = []
        for i in range(self.h):
            cycles.append(col.cycle(i, 0))
        self.stats.max_spare_per_cell = max(col.spare_used.values(), default=0)
        used_len = 0.0
        pts = self.ps.points
        for (a, b), (c, tag) in col.edge.items():
            d = geom.distance(pts[a], pts[b], self.p)
            if tag not in ("forest", "match") and d > self.r * (1 + 1e-12):
                raise _Defect(f"{tag} edge {a}-{b} longer than the tessellation radius")
            used_len = max(used_len, d)
        cert = CycleCertificate(self.k, self.n, cycles, sorted(self.match_edges) if self.odd else [],
                                self.r_index, self.r_k)
        self._tick("assemble")
        cert.meta = {"builder": self.stats.to_json(), "max_edge_length": used_len}
        return cert


def _insert(walk, cell, sub):
    """Splice the closed walk `sub` (starting and ending at cell) into walk."""
    if not walk:
        return list(sub)
    for t, (frm, _, _) in enumerate(walk):
        if frm == cell:
            return walk[:t] + list(sub) + walk[t:]
    raise StructuredFailure("circuit", "anchor-off-walk", {"cell": int(cell)}, defect=True)


def build(ps, k: int, ep=None, cfg: Optional[BuilderConfig] = None, r_index: Optional[int] = None,
          stages: Optional[list] = None):
    """CycleCertificate on success, StructuredFailure otherwise.

    ep must contain every edge up to the k-connectivity threshold; r_index
    (the threshold index) is computed when missing. A list passed as stages
    receives one colouring snapshot per finished stage.
    """
    cfg = cfg or BuilderConfig(k)
    if cfg.k != k:
        raise ValueError("config is for a different k")
    if cfg.norm is not None and geom.parse_norm(cfg.norm) != ps.p:
        raise ValueError("config norm differs from the point set")
    n = ps.n
    if n < k + 1:
        raise ValueError(f"need n >= k+1, got n={n}")
    if k % 2 and n % 2:
        raise ValueError("odd k needs an even number of points")
    if ep is None:
        ep = geom.edge_process(ps, cutoff=min(2.0, 4 * geom.connectivity_scale(n, k, ps.p, 10.0)))
    b = _Builder(ps, k, ep, cfg, r_index, stages)
    try:
        b.radii()
        b.tessellate()
        b.components()
        b.circuits()
        b.colour_cells()
        b.splice()
        b.outsiders()
        b.matching()
        cert = b.certificate()
    except StructuredFailure as exc:
        exc.stats = b.stats
        return exc
    except _Defect as exc:
        f = StructuredFailure("colouring", "defect", None, True, str(exc))
        f.stats = b.stats
        return f
    except conn.ThresholdNotReached as exc:
        f = StructuredFailure("radii", "threshold-not-reached", None, False, str(exc))
        f.stats = b.stats
        return f
    if cfg.verify:
        v = verify.check_certificate(ps, k, cert.r_index, cert)
        if not v:
            f = StructuredFailure("verify", "certificate", None, True, v.violation)
            f.stats = b.stats
            return f
    return cert
