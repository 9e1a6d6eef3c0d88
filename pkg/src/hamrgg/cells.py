"""Cell tessellation of the unit square, the cell graph and its classification.

Cells have side 1/N with N = ceil(1/(delta r)). Two cells are adjacent when
every point of one is within r of every point of the other, which only depends
on the offset (dx, dy) between them; the set of such offsets is the stencil.
Cells are addressed by id = y * N + x.

Grids can be large (N^2 in the tens of millions at desk scale), so per-cell
state lives in flat uint8 arrays and component searches run in kernels that
stop as soon as a component is known to violate a property.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import geom
from ._accel import njit

EMPTY, SPARSE, DENSE = 0, 1, 2
LABEL_NAMES = {EMPTY: "empty", SPARSE: "sparse", DENSE: "dense"}
SMALL_SIDE = 16
DEFAULT_DELTA = 1.0 / 64
MAX_CELLS = 1 << 26


class RingError(ValueError):
    """A ring invariant failed; prop names it and witness shows where."""

    def __init__(self, prop: str, witness=None, msg: str = ""):
        super().__init__(f"{prop}: {msg}" if msg else prop)
        self.prop = prop
        self.witness = witness


def cells_per_side(r: float, delta: float) -> int:
    x = 1.0 / (delta * r)
    n = math.ceil(x)
    # 1/(delta r) an integer up to rounding: keep it, do not jump to the next one
    if n - x > 1.0 - 1e-12 * max(1.0, x):
        n -= 1
    return max(int(n), 1)


def stencil(N: int, r: float, p: float) -> np.ndarray:
    """Offsets (dx, dy) != (0, 0) of adjacent cells, as an (m, 2) int64 array."""
    reach = int(math.floor(r * N)) + 1
    ax = np.arange(-reach, reach + 1)
    dx, dy = np.meshgrid(ax, ax, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    ex = (np.abs(dx) + 1) / N
    ey = (np.abs(dy) + 1) / N
    if math.isinf(p):
        d = np.maximum(ex, ey)
    elif p == 1.0:
        d = ex + ey
    elif p == 2.0:
        d = np.sqrt(ex * ex + ey * ey)
    else:
        d = (ex ** p + ey ** p) ** (1.0 / p)
    sel = (d <= r) & ~((dx == 0) & (dy == 0))
    return np.stack([dx[sel], dy[sel]], axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# kernels

@njit
def _grow(member, W, H, offx, offy, seed, visited, out, cap, limit):
    """Breadth-first component of `seed` among cells with member != 0.

    Marks visited, writes ids to out. Stops when cap cells are collected or
    (limit > 0) the bounding box gets wider or taller than limit.
    Returns (count, stopped, minx, maxx, miny, maxy, touches_side).
    """
    head = 0
    cnt = 1
    out[0] = seed
    visited[seed] = 1
    sx = seed % W
    sy = seed // W
    minx = sx
    maxx = sx
    miny = sy
    maxy = sy
    side = 1 if (sx == 0 or sy == 0 or sx == W - 1 or sy == H - 1) else 0
    m = offx.shape[0]
    while head < cnt:
        c = out[head]
        head += 1
        cx = c % W
        cy = c // W
        for t in range(m):
            x = cx + offx[t]
            y = cy + offy[t]
            if x < 0 or y < 0 or x >= W or y >= H:
                continue
            d = y * W + x
            if member[d] == 0 or visited[d] != 0:
                continue
            visited[d] = 1
            out[cnt] = d
            cnt += 1
            if x < minx:
                minx = x
            if x > maxx:
                maxx = x
            if y < miny:
                miny = y
            if y > maxy:
                maxy = y
            if x == 0 or y == 0 or x == W - 1 or y == H - 1:
                side = 1
            if cnt >= cap:
                return cnt, 1, minx, maxx, miny, maxy, side
            if limit > 0 and (maxx - minx + 1 > limit or maxy - miny + 1 > limit):
                return cnt, 1, minx, maxx, miny, maxy, side
    return cnt, 0, minx, maxx, miny, maxy, side


@njit
def _dilate(cells, W, H, offx, offy, mark):
    m = offx.shape[0]
    for i in range(cells.shape[0]):
        c = cells[i]
        cx = c % W
        cy = c // W
        mark[c] = 1
        for t in range(m):
            x = cx + offx[t]
            y = cy + offy[t]
            if x < 0 or y < 0 or x >= W or y >= H:
                continue
            mark[y * W + x] = 1


@njit
def _first_member(member, start):
    for c in range(start, member.shape[0]):
        if member[c] != 0:
            return c
    return -1


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True, eq=False)
class CellGrid:
    delta: float
    r: float
    N: int
    p: float
    M: int
    cell_of: np.ndarray                 # cell id of every point
    occupied: np.ndarray                # sorted ids of nonempty cells
    starts: np.ndarray                  # points of occupied[t] are order[starts[t]:starts[t+1]]
    order: np.ndarray
    points: np.ndarray = field(repr=False, default=None)

    @property
    def side(self) -> Fraction:
        return Fraction(1, self.N)

    @property
    def delta_prime(self) -> float:
        return 1.0 / (self.N * self.r)

    @property
    def ncells(self) -> int:
        return self.N * self.N

    def xy(self, cid: int):
        return int(cid) % self.N, int(cid) // self.N

    def cid(self, x: int, y: int) -> int:
        return int(y) * self.N + int(x)

    def bounds(self, cid: int):
        x, y = self.xy(cid)
        return x / self.N, (x + 1) / self.N, y / self.N, (y + 1) / self.N

    def _slot(self, cid):
        t = int(np.searchsorted(self.occupied, cid))
        if t < self.occupied.shape[0] and self.occupied[t] == cid:
            return t
        return -1

    def points_in(self, cid: int) -> np.ndarray:
        t = self._slot(cid)
        if t < 0:
            return np.empty(0, np.int64)
        return self.order[self.starts[t]:self.starts[t + 1]]

    def count(self, cid: int) -> int:
        t = self._slot(cid)
        return 0 if t < 0 else int(self.starts[t + 1] - self.starts[t])

    def counts(self) -> np.ndarray:
        return np.diff(self.starts)


@dataclass(frozen=True, eq=False)
class CellGraph:
    N: int
    offsets: np.ndarray
    Delta: int                          # measured maximum degree
    Delta_bound: int                    # stencil size

    def adjacent(self, c1: int, c2: int, r: float, p: float) -> bool:
        if c1 == c2:
            return False
        x1, y1 = c1 % self.N, c1 // self.N
        x2, y2 = c2 % self.N, c2 // self.N
        return _offset_adjacent(x2 - x1, y2 - y1, self.N, r, p)

    def neighbours(self, cid: int) -> list:
        x, y = cid % self.N, cid // self.N
        out = []
        for dx, dy in self.offsets:
            a, b = x + int(dx), y + int(dy)
            if 0 <= a < self.N and 0 <= b < self.N:
                out.append(b * self.N + a)
        return out


def _offset_adjacent(dx, dy, N, r, p) -> bool:
    if dx == 0 and dy == 0:
        return False
    return _corner_dist(abs(dx) + 1, abs(dy) + 1, N, p) <= r


def _corner_dist(ax, ay, N, p) -> float:
    ex, ey = ax / N, ay / N
    if math.isinf(p):
        return max(ex, ey)
    if p == 1.0:
        return ex + ey
    if p == 2.0:
        return math.sqrt(ex * ex + ey * ey)
    return (ex ** p + ey ** p) ** (1.0 / p)


@dataclass
class Component:
    cells: np.ndarray
    bbox: tuple                         # (minx, maxx, miny, maxy) in cell units
    small: bool
    complete: bool = True               # False when the search stopped early

    @property
    def size(self) -> int:
        return int(self.cells.shape[0])


@dataclass(eq=False)
class CellClassification:
    grid: CellGrid
    graph: CellGraph
    labels: np.ndarray                  # uint8 per cell id
    dense: np.ndarray                   # sorted dense ids
    dense_components: list
    D0: np.ndarray                      # sorted ids
    bad_components: list
    bad_complete: bool                  # False: enumeration stopped at a large bad component
    r: float = 0.0
    M: int = 0

    @property
    def N(self) -> int:
        return self.grid.N

    def label(self, cid: int) -> int:
        return int(self.labels[cid])

    def in_D0(self, cid: int) -> bool:
        t = int(np.searchsorted(self.D0, cid))
        return t < self.D0.shape[0] and int(self.D0[t]) == int(cid)

    def covered_mask(self) -> np.ndarray:
        """1 on D0 and N(D0)."""
        mark = np.zeros(self.grid.ncells, np.uint8)
        off = self.graph.offsets
        _dilate(self.D0.astype(np.int64), self.N, self.N, off[:, 0].copy(), off[:, 1].copy(), mark)
        return mark

    def bad_cell_ids(self) -> np.ndarray:
        if not self.bad_components:
            return np.empty(0, np.int64)
        return np.sort(np.concatenate([b.cells for b in self.bad_components]))

    def summary(self) -> dict:
        return {
            "N": self.N, "side": str(self.grid.side), "r": self.r, "delta": self.grid.delta,
            "M": self.M, "Delta": self.graph.Delta, "Delta_bound": self.graph.Delta_bound,
            "occupied": int(self.grid.occupied.shape[0]), "dense": int(self.dense.shape[0]),
            "dense_components": len(self.dense_components), "D0": int(self.D0.shape[0]),
            "bad_components": len(self.bad_components),
            "small_bad": sum(1 for b in self.bad_components if b.small),
            "bad_complete": self.bad_complete,
        }


@dataclass
class Ring:
    component: Component
    centre: tuple
    S: np.ndarray
    R: np.ndarray
    J: np.ndarray
    Jprime: np.ndarray
    rprime: float

    def to_json(self) -> dict:
        return {
            "bad_cells": [int(c) for c in self.component.cells],
            "centre": [float(self.centre[0]), float(self.centre[1])],
            "S_size": int(self.S.shape[0]),
            "R": [int(c) for c in self.R],
            "J": [int(v) for v in self.J],
            "Jprime": [int(v) for v in self.Jprime],
            "rprime": self.rprime,
        }


# ---------------------------------------------------------------------------
# construction

def make_grid(ps, r: float, delta: float, M: int) -> CellGrid:
    pts = ps.points if hasattr(ps, "points") else np.asarray(ps, float)
    p = ps.p if hasattr(ps, "p") else 2.0
    N = cells_per_side(r, delta)
    if N * N > MAX_CELLS:
        raise ValueError(f"grid of {N}x{N} cells is too fine")
    # boundary points go to the lower-left cell: index ceil(x N) - 1
    ix = np.clip(np.ceil(pts[:, 0] * N).astype(np.int64) - 1, 0, N - 1)
    iy = np.clip(np.ceil(pts[:, 1] * N).astype(np.int64) - 1, 0, N - 1)
    cid = iy * N + ix
    order = np.argsort(cid, kind="stable").astype(np.int64)
    occ, starts = np.unique(cid[order], return_index=True)
    starts = np.append(starts, cid.shape[0]).astype(np.int64)
    return CellGrid(float(delta), float(r), N, float(p), int(M), cid, occ.astype(np.int64),
                    starts, order, pts)


def make_graph(N: int, r: float, p: float) -> CellGraph:
    off = stencil(N, r, p)
    best = 0
    for x in {N // 2, (N - 1) // 2}:
        ok = (off[:, 0] + x >= 0) & (off[:, 0] + x < N) & (off[:, 1] + x >= 0) & (off[:, 1] + x < N)
        best = max(best, int(np.count_nonzero(ok)))
    return CellGraph(N, off, best, int(off.shape[0]))


def _components(member, N, off, seeds, limit=0, stop_on_large=False):
    """Components of the member cells reachable from seeds (in order)."""
    visited = np.zeros(N * N, np.uint8)
    offx, offy = off[:, 0].copy(), off[:, 1].copy()
    total = int(np.count_nonzero(member)) if limit == 0 else SMALL_SIDE * SMALL_SIDE + off.shape[0] + 2
    buf = np.empty(max(total, 1) + 1, np.int64)
    comps = []
    for s in seeds:
        s = int(s)
        if visited[s]:
            continue
        cnt, stopped, x0, x1, y0, y1, _ = _grow(member, N, N, offx, offy, s, visited, buf,
                                                buf.shape[0], limit)
        cells = np.sort(buf[:cnt].copy())
        small = (x1 - x0 + 1 <= SMALL_SIDE) and (y1 - y0 + 1 <= SMALL_SIDE) and not stopped
        comps.append(Component(cells, (int(x0), int(x1), int(y0), int(y1)), bool(small), not stopped))
        if stopped and stop_on_large:
            return comps, False
    return comps, True


def tessellate(ps, r: float, delta: float = DEFAULT_DELTA, M: Optional[int] = None, k: int = 2,
               check_delta: bool = True) -> CellClassification:
    """Grid, cell graph and classification at radius r.

    M defaults to 4 k Delta + 2 k + 2 with Delta the stencil size.
    """
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive and finite, got {r}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if check_delta and not 32 * delta < 1:
        raise ValueError(f"need 32 delta < 1, got delta={delta}")
    p = ps.p if hasattr(ps, "p") else 2.0
    N = cells_per_side(r, delta)
    if N < 2:
        raise ValueError(f"grid is trivial ({N} cell per side)")
    graph = make_graph(N, r, p)
    if M is None:
        M = default_M(k, graph.Delta_bound)
    grid = make_grid(ps, r, delta, M)
    labels = np.zeros(N * N, np.uint8)
    cnt = grid.counts()
    labels[grid.occupied] = np.where(cnt >= M, DENSE, SPARSE).astype(np.uint8)
    dense = grid.occupied[cnt >= M]
    dmask = (labels == DENSE).astype(np.uint8)
    dcomps, _ = _components(dmask, N, graph.offsets, dense)
    D0 = np.sort(np.concatenate([c.cells for c in dcomps if not c.small])) if any(
        not c.small for c in dcomps) else np.empty(0, np.int64)
    cls = CellClassification(grid, graph, labels, dense, dcomps, D0.astype(np.int64), [], True, r, M)
    covered = cls.covered_mask()
    bad = (covered == 0).astype(np.uint8)
    seeds = _bad_seeds(bad)
    bcomps, complete = _components(bad, N, graph.offsets, seeds, limit=SMALL_SIDE, stop_on_large=True)
    cls.bad_components = bcomps
    cls.bad_complete = complete
    return cls


def _bad_seeds(bad):
    c = _first_member(bad, 0)
    while c >= 0:
        yield c
        c = _first_member(bad, c + 1)


def default_M(k: int, Delta: int, with_bad: bool = False) -> int:
    if with_bad:
        return 2 * (2 * Delta + k ** 3) * k + 2 * k + 2
    return 4 * k * Delta + 2 * k + 2


def tessellate_with_policy(ps, r: float, delta: float = DEFAULT_DELTA, k: int = 2,
                           check_delta: bool = True) -> CellClassification:
    """Default M; re-tessellate with the raised M when bad components exist."""
    cls = tessellate(ps, r, delta, None, k, check_delta)
    if any(b.cells.shape[0] for b in cls.bad_components):
        M2 = default_M(k, cls.graph.Delta_bound, with_bad=True)
        cls = tessellate(ps, r, delta, M2, k, check_delta)
    return cls


# ---------------------------------------------------------------------------
# invariants and checkers

def check_classification(cls: CellClassification):
    """Definitional invariants; (ok, message)."""
    g = cls.grid
    if Fraction(1, g.N) * g.N != 1:
        return False, "grid does not tile the square"
    if g.delta_prime > g.delta * (1 + 1e-12):
        return False, "delta' exceeds delta"
    cnt = g.counts()
    lab = cls.labels[g.occupied]
    if np.any((cnt >= cls.M) != (lab == DENSE)) or np.any((cnt < cls.M) & (lab != SPARSE)):
        return False, "labels disagree with counts"
    if np.count_nonzero(cls.labels) != g.occupied.shape[0]:
        return False, "an empty cell is labelled"
    covered = cls.covered_mask()
    nd0 = covered.copy()
    nd0[cls.D0] = 0
    for b in cls.bad_components:
        if np.any(covered[b.cells]):
            return False, "bad cell inside D0 or N(D0)"
    if cls.bad_complete:
        nb = int(sum(b.size for b in cls.bad_components))
        if nb != int(np.count_nonzero(covered == 0)):
            return False, "bad components do not cover C minus D0 and N(D0)"
        # every non-bad neighbour of a bad cell is sparse and adjacent to D0
        bmask = (covered == 0).astype(np.uint8)
        ring = np.zeros_like(bmask)
        cells = cls.bad_cell_ids()
        off = cls.graph.offsets
        _dilate(cells, cls.N, cls.N, off[:, 0].copy(), off[:, 1].copy(), ring)
        ring[cells] = 0
        around = np.flatnonzero(ring)
        if np.any(cls.labels[around] == DENSE):
            return False, "a dense cell borders a bad component"
        if np.any(nd0[around] == 0):
            return False, "a cell bordering a bad component is not adjacent to D0"
    return True, None


def check_component_structure(cls: CellClassification):
    """Exactly one large dense component and only small bad components."""
    large = [c for c in cls.dense_components if not c.small]
    if not large:
        return False, {"reason": "no-large-dense", "cells": []}
    if len(large) > 1:
        return False, {"reason": "second-large-dense", "cells": [int(c) for c in large[1].cells]}
    for b in cls.bad_components:
        if not b.small:
            return False, {"reason": "large-bad", "cells": [int(c) for c in b.cells[:64]],
                           "bbox": list(b.bbox), "complete": b.complete}
    return True, None


def coverage_sizes(cls: CellClassification, alpha: float):
    """(s, s_side): cell counts behind the area bounds (1+alpha) pi_p r^2 and half of it."""
    dp = cls.grid.delta_prime
    s = math.ceil((1 + alpha) * geom.unit_ball_area(cls.grid.p) / dp ** 2)
    return s, math.ceil(s / 2)


def check_dense_coverage(cls: CellClassification, alpha: float = 0.1):
    """Dense-coverage statements on corners, interior and sides.

    A dense-free connected set of at least s cells exists iff some component of
    the non-dense cells has at least s cells (a connected graph on >= s vertices
    has a connected subgraph on exactly s), so the search over components is
    exact; likewise for side-touching sets and ceil(s/2) cells.
    """
    N, r = cls.N, cls.r
    # statement 3
    w = min(N, int(math.floor(5 * r * N + 1e-9)))
    if w > 0:
        ax = np.arange(w)
        for cx in (ax, N - 1 - ax):
            for cy in (ax, N - 1 - ax):
                ids = (cy[:, None] * N + cx[None, :]).ravel()
                bad = ids[cls.labels[ids] != DENSE]
                if bad.shape[0]:
                    return False, {"statement": 3, "cells": [int(c) for c in bad[:64]]}
    s, s2 = coverage_sizes(cls, alpha)
    member = (cls.labels != DENSE).astype(np.uint8)
    visited = np.zeros(N * N, np.uint8)
    off = cls.graph.offsets
    offx, offy = off[:, 0].copy(), off[:, 1].copy()
    buf = np.empty(s + off.shape[0] + 2, np.int64)
    c = _first_member(member, 0)
    while c >= 0:
        if not visited[c]:
            cnt, stopped, *_, side = _grow(member, N, N, offx, offy, c, visited, buf, s, 0)
            if cnt >= s:
                return False, {"statement": 1, "cells": [int(x) for x in buf[:min(cnt, 64)]], "size": int(cnt)}
            if side and cnt >= s2:
                return False, {"statement": 2, "cells": [int(x) for x in buf[:min(cnt, 64)]], "size": int(cnt)}
        c = _first_member(member, c + 1)
    return True, None


def check_extradeg_property(g, ps, k: int, eta: float, r: float):
    """Sets of 2..k vertices within eta r with all degrees >= k contain a degree >= k+1 vertex.

    A violating set has all degrees exactly k, and so does each of its pairs,
    so it suffices to look for two degree-k vertices within eta r.
    """
    if k < 2:
        return True, None
    from scipy.spatial import cKDTree
    deg = g.degree
    cand = np.flatnonzero(deg == k)
    if cand.shape[0] < 2:
        return True, None
    pts = ps.points[cand]
    pp = ps.p
    tree = cKDTree(pts)
    pairs = tree.query_pairs(eta * r, p=pp, output_type="ndarray")
    if pairs.shape[0] == 0:
        return True, None
    a, b = sorted((int(cand[pairs[0, 0]]), int(cand[pairs[0, 1]])))
    return False, {"J": [a, b], "degrees": [k, k]}


# ---------------------------------------------------------------------------
# rings

def _dist_to_box(ox, oy, x0, x1, y0, y1, p):
    """(min, max) l_p distance from (ox, oy) to the box."""
    nx = min(max(ox, x0), x1)
    ny = min(max(oy, y0), y1)
    fx = x0 if abs(ox - x0) > abs(ox - x1) else x1
    fy = y0 if abs(oy - y0) > abs(oy - y1) else y1
    return geom.distance((ox, oy), (nx, ny), p), geom.distance((ox, oy), (fx, fy), p)


def ring_centre(cls: CellClassification, b: Component):
    """Centre of a 16x16 grid of cells covering b, the grid centred on b's bounding box."""
    x0, x1, y0, y1 = b.bbox
    gx = x0 - (SMALL_SIDE - (x1 - x0 + 1)) // 2
    gy = y0 - (SMALL_SIDE - (y1 - y0 + 1)) // 2
    return (gx + SMALL_SIDE / 2) / cls.N, (gy + SMALL_SIDE / 2) / cls.N


def annulus_cells(cls: CellClassification, centre, r: float) -> np.ndarray:
    """Cells with some point at distance in [3r/4, 3r/2] from centre."""
    N, p = cls.N, cls.grid.p
    ox, oy = centre
    lo = max(0, int(math.floor((ox - 1.5 * r) * N)) - 1)
    hi = min(N - 1, int(math.ceil((ox + 1.5 * r) * N)) + 1)
    lo_y = max(0, int(math.floor((oy - 1.5 * r) * N)) - 1)
    hi_y = min(N - 1, int(math.ceil((oy + 1.5 * r) * N)) + 1)
    out = []
    for y in range(lo_y, hi_y + 1):
        for x in range(lo, hi + 1):
            dmin, dmax = _dist_to_box(ox, oy, x / N, (x + 1) / N, y / N, (y + 1) / N, p)
            if dmin <= 1.5 * r and dmax >= 0.75 * r:
                out.append(y * N + x)
    return np.array(out, np.int64)


def _cells_adjacent_any(cls, cid, targets_xy):
    """Is cid in or adjacent to some cell of targets_xy ((m,2) array)?"""
    N, r, p = cls.N, cls.r, cls.grid.p
    x, y = cid % N, cid // N
    ax = np.abs(targets_xy[:, 0] - x) + 1
    ay = np.abs(targets_xy[:, 1] - y) + 1
    same = (ax == 1) & (ay == 1)
    ex, ey = ax / N, ay / N
    if math.isinf(p):
        d = np.maximum(ex, ey)
    elif p == 1.0:
        d = ex + ey
    elif p == 2.0:
        d = np.sqrt(ex * ex + ey * ey)
    else:
        d = (ex ** p + ey ** p) ** (1.0 / p)
    return bool(np.any(same | (d <= r)))


def _connected_subset(cls, cells) -> bool:
    if cells.shape[0] <= 1:
        return True
    N = cls.N
    xs, ys = cells % N, cells // N
    x0, y0 = int(xs.min()), int(ys.min())
    W, H = int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1
    member = np.zeros(W * H, np.uint8)
    loc = (ys - y0) * W + (xs - x0)
    member[loc] = 1
    visited = np.zeros(W * H, np.uint8)
    off = cls.graph.offsets
    buf = np.empty(cells.shape[0] + 1, np.int64)
    cnt, *_ = _grow(member, W, H, off[:, 0].copy(), off[:, 1].copy(), int(loc[0]), visited, buf,
                    buf.shape[0], 0)
    return cnt == cells.shape[0]


def jprime(g, J) -> np.ndarray:
    Js = set(int(v) for v in J)
    out = set()
    for v in Js:
        for w in g.neighbours(v):
            w = int(w)
            if w not in Js:
                out.add(w)
    return np.array(sorted(out), np.int64)


def points_of(cls: CellClassification, cells) -> np.ndarray:
    parts = [cls.grid.points_in(int(c)) for c in cells]
    if not parts:
        return np.empty(0, np.int64)
    return np.sort(np.concatenate(parts)).astype(np.int64)


def build_ring(cls: CellClassification, b: Component, rprime: float, g=None, ps=None) -> Ring:
    """R(b), J(b) and J'(b, r') with every ring invariant checked.

    g is the graph at r'; without it J' is found geometrically from ps.
    Raises RingError naming the first violated invariant.
    """
    r = cls.r
    if not b.small:
        raise RingError("ring-large-component", [int(c) for c in b.cells[:64]])
    if not (r * (1 - 1e-12) <= rprime <= (1 + 1 / 32) * r * (1 + 1e-12)):
        raise RingError("ring-radius", rprime, f"r'={rprime} outside [r, (1+1/32) r] for r={r}")
    O = ring_centre(cls, b)
    S = annulus_cells(cls, O, r)
    R = S[cls.labels[S] == DENSE] if S.shape[0] else S
    J = points_of(cls, b.cells)
    if g is not None:
        Jp = jprime(g, J)
    else:
        from scipy.spatial import cKDTree
        tree = cKDTree(ps.points)
        hits = set()
        for v in J:
            hits.update(tree.query_ball_point(ps.points[v], rprime, p=ps.p))
        hits.difference_update(int(v) for v in J)
        Jp = np.array(sorted(hits), np.int64)
    ring = Ring(b, O, S, R, J, Jp, float(rprime))
    if R.shape[0] == 0:
        raise RingError("ring-empty", ring.to_json())
    if R.shape[0] > 10 / cls.grid.delta ** 2:
        raise RingError("ring-oversized", int(R.shape[0]))
    notin = [int(c) for c in R if not cls.in_D0(int(c))]
    if notin:
        raise RingError("ring-not-in-D0", notin[:64])
    if not _connected_subset(cls, R):
        raise RingError("ring-disconnected", [int(c) for c in R[:64]])
    Rxy = np.stack([R % cls.N, R // cls.N], axis=1)
    for v in Jp:
        c = int(cls.grid.cell_of[v])
        if not _cells_adjacent_any(cls, c, Rxy):
            raise RingError("ring-coverage", {"vertex": int(v), "cell": c})
    return ring


def check_rings_disjoint(rings):
    """(ok, witness) for pairwise disjoint R and J' sets, with J' avoiding other J sets."""
    seen_R, seen_Jp, seen_J = {}, {}, {}
    for t, rg in enumerate(rings):
        for v in rg.J:
            seen_J[int(v)] = t
    for t, rg in enumerate(rings):
        for c in rg.R:
            c = int(c)
            if c in seen_R:
                return False, {"prop": "ring-overlap", "cell": c, "rings": [seen_R[c], t]}
            seen_R[c] = t
        for v in rg.Jprime:
            v = int(v)
            if v in seen_Jp:
                return False, {"prop": "jprime-overlap", "vertex": v, "rings": [seen_Jp[v], t]}
            if v in seen_J and seen_J[v] != t:
                return False, {"prop": "jprime-overlap", "vertex": v, "rings": [seen_J[v], t]}
            seen_Jp[v] = t
    return True, None


# ---------------------------------------------------------------------------
# dumps

def cells_csv(cls: CellClassification) -> str:
    """Nonempty and bad cells: x, y, count, label, component id (dense comps d<i>, bad b<i>)."""
    comp = {}
    for i, c in enumerate(cls.dense_components):
        for cid in c.cells:
            comp[int(cid)] = f"d{i}"
    for i, c in enumerate(cls.bad_components):
        for cid in c.cells:
            comp[int(cid)] = f"b{i}"
    ids = sorted(set(int(c) for c in cls.grid.occupied) | set(comp))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "count", "label", "component", "bad"])
    bad = set(int(c) for c in cls.bad_cell_ids())
    for cid in ids:
        x, y = cls.grid.xy(cid)
        w.writerow([x, y, cls.grid.count(cid), LABEL_NAMES[cls.label(cid)], comp.get(cid, ""),
                    int(cid in bad)])
    return buf.getvalue()


def rings_json(rings) -> str:
    return json.dumps([rg.to_json() for rg in rings])
