"""Planted point sets on which the builder's preconditions hold at desk scale.

Uniform samples of feasible size have no dense cells at delta = 1/64 (a dense
cell needs about 4 k Delta points), so the end-to-end construction is
exercised on a lattice of tight clusters instead. The geometry is pinned to a
41 x 41 grid: clusters sit at the centres of cells 4a+2, a = 0..G-1, and a hole
is a 3 x 3 block of missing clusters with something planted at its centre.
The planted vertices are 8 cells from the nearest clusters, so they fix the
k-connectivity threshold near 8/41, and with delta = 0.127 the grid at that
radius has exactly 41 cells per side.
"""
from __future__ import annotations

import numpy as np

from . import geom
from .builder import BuilderConfig

GRID_N = 41
DELTA = 0.127
SPACING = 4


def _cell_centre(i):
    return (i + 0.5) / GRID_N


def hole_lattice(k: int, holes=((5, 5, "lone"),), scatter: int = 12, big_outsider: bool = True,
                 G: int = 10, M=None, m=None, seed: int = 0, jitter: float = 0.05):
    """(PointSet, BuilderConfig, info) for a cluster lattice with planted holes.

    holes: (a, b, kind) with kind 'lone' (one vertex), 'group' (2..k vertices,
    one nudged towards a cluster so it has the extra degree), 'big' (k+3 vertices)
    or an int giving the group size.
    """
    rng = np.random.default_rng(seed)
    s = 1.0 / GRID_N
    M = M or max(2 * k + 6, 10)
    m = m or 2 * M
    removed = set()
    for a, b, _ in holes:
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                removed.add((a + da, b + db))
    pts = []
    cluster_cells = []
    for a in range(G):
        for b in range(G):
            if (a, b) in removed:
                continue
            cx, cy = _cell_centre(SPACING * a + 2), _cell_centre(SPACING * b + 2)
            cluster_cells.append((SPACING * a + 2, SPACING * b + 2))
            ang = rng.uniform(0, 2 * np.pi, m)
            rad = jitter * s * np.sqrt(rng.uniform(0, 1, m))
            pts.append(np.stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)], axis=1))
    planted = []
    for a, b, kind in holes:
        cx, cy = _cell_centre(SPACING * a + 2), _cell_centre(SPACING * b + 2)
        if kind == "lone":
            j = 1
        elif kind == "group":
            j = max(2, k)
        elif kind == "big":
            j = k + 3
        else:
            j = int(kind)
        ang = rng.uniform(0, 2 * np.pi, j)
        rad = 0.02 * s * np.sqrt(rng.uniform(0, 1, j))
        grp = np.stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)], axis=1)
        if 2 <= j <= k:
            grp[0, 0] -= 0.1 * s
        planted.append(grp)
        pts.append(grp)
    free = [(SPACING * a + 4, SPACING * b + 2) for a in range(G - 1) for b in range(G)
            if (a, b) not in removed and (a + 1, b) not in removed]
    picks = rng.choice(len(free), size=min(len(free), scatter + (1 if big_outsider else 0)), replace=False)
    extra = []
    big_cell = None
    for t, idx in enumerate(picks):
        x, y = free[idx]
        cnt = 2 * k + 3 if (big_outsider and t == 0) else 1
        if cnt > 1:
            big_cell = (x, y)
        extra.append(np.stack([(x + rng.uniform(0.2, 0.8, cnt)) * s, (y + rng.uniform(0.2, 0.8, cnt)) * s], axis=1))
    pts.extend(extra)
    P = np.concatenate(pts)
    if k % 2 and P.shape[0] % 2:
        x, y = free[int(picks[-1])] if len(picks) else free[0]
        P = np.concatenate([P, [[(x + 0.5) * s, (y + 0.3) * s]]])
    ps = geom.PointSet(P, 2, seed)
    cfg = BuilderConfig(k, delta=DELTA, M=M, strict=False)
    info = {"M": M, "m": m, "clusters": len(cluster_cells), "holes": [list(h) for h in holes],
            "big_outsider_cell": big_cell, "n": ps.n}
    return ps, cfg, info


def fixture_edges(ps):
    """Edge process long enough for the planted threshold."""
    return geom.edge_process(ps, cutoff=10.0 / GRID_N)
