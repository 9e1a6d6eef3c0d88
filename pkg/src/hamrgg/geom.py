"""Point sets, l_p distances and the sorted edge process."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from ._accel import njit

# PCG64 through numpy's default_rng; recorded in every serialized point set.
RNG_NAME = "numpy.PCG64/v1"
GENERAL_POSITION_TOL = 1e-12
# full pairwise tie check is done up to this size, see general_position()
FULL_CHECK_MAX_N = 1000


def parse_norm(p) -> float:
    """Accept 1, 2, 'inf', '∞', floats >= 1; return a float with inf for l_inf."""
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "∞", "max"):
            return math.inf
        p = float(s)
    p = float(p)
    if not (p >= 1.0):
        raise ValueError(f"norm parameter must be >= 1 or inf, got {p}")
    return p


def norm_label(p: float):
    if math.isinf(p):
        return "inf"
    if p == 1.0:
        return "1"
    if p == 2.0:
        return "2"
    return p


def _pcode(p: float) -> int:
    # kernel dispatch code: 0 -> inf, 1 -> l1, 2 -> l2, 3 -> general p
    if math.isinf(p):
        return 0
    if p == 1.0:
        return 1
    if p == 2.0:
        return 2
    return 3


def distance(a, b, p) -> float:
    p = parse_norm(p)
    dx = abs(float(a[0]) - float(b[0]))
    dy = abs(float(a[1]) - float(b[1]))
    if math.isinf(p):
        return max(dx, dy)
    if p == 1.0:
        return dx + dy
    if p == 2.0:
        return math.sqrt(dx * dx + dy * dy)
    return (dx ** p + dy ** p) ** (1.0 / p)


def pair_distances(pts: np.ndarray, i: np.ndarray, j: np.ndarray, p: float) -> np.ndarray:
    dx = np.abs(pts[i, 0] - pts[j, 0])
    dy = np.abs(pts[i, 1] - pts[j, 1])
    if math.isinf(p):
        return np.maximum(dx, dy)
    if p == 1.0:
        return dx + dy
    if p == 2.0:
        return np.sqrt(dx * dx + dy * dy)
    return (dx ** p + dy ** p) ** (1.0 / p)


def unit_ball_area(p) -> float:
    """Area pi_p of the unit l_p ball: 4 Gamma(1+1/p)^2 / Gamma(1+2/p)."""
    p = parse_norm(p)
    if math.isinf(p):
        return 4.0
    if p == 2.0:
        return math.pi
    return 4.0 * math.gamma(1.0 + 1.0 / p) ** 2 / math.gamma(1.0 + 2.0 / p)


def connectivity_scale(n: int, k: int, p, lam: float = 0.0) -> float:
    """Radius r with pi_p n r^2 = log n + (k-1) log log n + lam (nan if <= 0)."""
    if n < 3:
        return float("nan")
    val = math.log(n) + (k - 1) * math.log(math.log(n)) + lam
    if val <= 0:
        return float("nan")
    return math.sqrt(val / (unit_ball_area(p) * n))


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    p: float = 2.0
    seed: Optional[int] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 2)
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise ValueError("coordinates must lie in [0,1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "p", parse_norm(self.p))

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": norm_label(self.p),
            "seed": self.seed,
            "rng": RNG_NAME,
            "points": self.points.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "PointSet":
        pts = obj.get("points", [])
        ps = cls(np.asarray(pts, dtype=np.float64).reshape(-1, 2), obj.get("p", 2), obj.get("seed"))
        if "n" in obj and int(obj["n"]) != ps.n:
            raise ValueError("point count does not match 'n'")
        return ps

    @classmethod
    def load(cls, path) -> "PointSet":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def general_position(pts: np.ndarray, p: float, tol: float = GENERAL_POSITION_TOL,
                     cutoff: Optional[float] = None) -> bool:
    """True when no two pairwise distances (up to cutoff) are within tol."""
    ps = PointSet(pts, p)
    ep = edge_process(ps, cutoff)
    if len(ep) < 2:
        return True
    return bool(np.min(np.diff(ep.length)) > tol)


def generate_points(n: int, p=2, seed: int = 0) -> PointSet:
    """n iid uniform points in the unit square, redrawn until in general position.

    For n <= FULL_CHECK_MAX_N every pair of distances must differ by more than
    1e-12. Beyond that a 1e-12 check over all pairs fails with high probability
    (there are ~n^4/8 distance pairs), so only exact ties among edges up to
    twice the connectivity scale are rejected.
    """
    if n < 1:
        raise ValueError("n must be positive")
    p = parse_norm(p)
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        pts = rng.random((n, 2))
        if n < 3:
            break
        if n <= FULL_CHECK_MAX_N:
            ok = general_position(pts, p)
        else:
            c = 2.0 * math.sqrt(math.log(n) / (unit_ball_area(p) * n))
            ok = general_position(pts, p, tol=0.0, cutoff=c)
        if ok:
            break
    else:
        raise RuntimeError("could not draw a point set in general position")
    return PointSet(pts, p, int(seed))


@dataclass(frozen=True)
class EdgeProcess:
    """All pairs (or pairs up to cutoff) sorted by (length, i, j).

    Graph "at index t" consists of the first t edges.
    """
    n: int
    i: np.ndarray
    j: np.ndarray
    length: np.ndarray
    p: float = 2.0
    cutoff: Optional[float] = None
    points: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return int(self.length.shape[0])

    @property
    def complete(self) -> bool:
        return self.cutoff is None or len(self) == self.n * (self.n - 1) // 2

    def index_of_radius(self, r: float) -> int:
        """Number of edges of length <= r."""
        return int(np.searchsorted(self.length, r, side="right"))

    def length_at(self, index: int) -> float:
        if index <= 0:
            return 0.0
        return float(self.length[index - 1])

    def edges(self, index: Optional[int] = None):
        t = len(self) if index is None else index
        return self.i[:t], self.j[:t]


@njit
def _bucket_scan(xs, ys, order, starts, nb, cutoff, pcode, pval, oi, oj, ol, fill):
    offx = (0, 1, -1, 0, 1)
    offy = (0, 0, 1, 1, 1)
    m = 0
    for cy in range(nb):
        for cx in range(nb):
            c = cy * nb + cx
            a0 = starts[c]
            a1 = starts[c + 1]
            if a0 == a1:
                continue
            for o in range(5):
                nx = cx + offx[o]
                ny = cy + offy[o]
                if nx < 0 or nx >= nb or ny >= nb:
                    continue
                d = ny * nb + nx
                b0 = starts[d]
                b1 = starts[d + 1]
                for s in range(a0, a1):
                    u = order[s]
                    t0 = b0
                    if o == 0:
                        t0 = s + 1
                    for t in range(t0, b1):
                        v = order[t]
                        ddx = abs(xs[u] - xs[v])
                        ddy = abs(ys[u] - ys[v])
                        if pcode == 0:
                            dist = max(ddx, ddy)
                        elif pcode == 1:
                            dist = ddx + ddy
                        elif pcode == 2:
                            dist = np.sqrt(ddx * ddx + ddy * ddy)
                        else:
                            dist = (ddx ** pval + ddy ** pval) ** (1.0 / pval)
                        if dist <= cutoff:
                            if fill:
                                oi[m] = min(u, v)
                                oj[m] = max(u, v)
                                ol[m] = dist
                            m += 1
    return m


def _bucket_pairs_kernel(xs, ys, order, starts, nb, cutoff, pcode, pval):
    e_i = np.empty(0, np.int32)
    e_l = np.empty(0, np.float64)
    m = _bucket_scan(xs, ys, order, starts, nb, cutoff, pcode, pval, e_i, e_i, e_l, False)
    oi = np.empty(m, np.int32)
    oj = np.empty(m, np.int32)
    ol = np.empty(m, np.float64)
    _bucket_scan(xs, ys, order, starts, nb, cutoff, pcode, pval, oi, oj, ol, True)
    return oi, oj, ol


def _bucket_pairs_numpy(pts, order, starts, nb, cutoff, p):
    counts = np.diff(starts)
    occupied = np.nonzero(counts)[0]
    cx = occupied % nb
    cy = occupied // nb
    out_i, out_j = [], []
    for ox, oy in ((0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)):
        nx, ny = cx + ox, cy + oy
        ok = (nx >= 0) & (nx < nb) & (ny < nb)
        a = occupied[ok]
        b = ny[ok] * nb + nx[ok]
        ca, cb = counts[a], counts[b]
        sizes = ca * cb
        keep = sizes > 0
        a, b, ca, cb, sizes = a[keep], b[keep], ca[keep], cb[keep], sizes[keep]
        if sizes.size == 0:
            continue
        pid = np.repeat(np.arange(sizes.size), sizes)
        first = np.cumsum(sizes) - sizes
        local = np.arange(int(sizes.sum())) - first[pid]
        la = local // cb[pid]
        lb = local % cb[pid]
        if ox == 0 and oy == 0:
            sel = la < lb
            pid, la, lb = pid[sel], la[sel], lb[sel]
        u = order[starts[a][pid] + la]
        v = order[starts[b][pid] + lb]
        dist = pair_distances(pts, u, v, p)
        sel = dist <= cutoff
        out_i.append(np.minimum(u, v)[sel])
        out_j.append(np.maximum(u, v)[sel])
    if not out_i:
        return np.empty(0, np.int32), np.empty(0, np.int32), np.empty(0)
    i = np.concatenate(out_i).astype(np.int32)
    j = np.concatenate(out_j).astype(np.int32)
    return i, j, pair_distances(pts, i, j, p)


def _sorted_process(n, i, j, length, p, cutoff, pts):
    order = np.lexsort((j, i, length))
    i, j, length = i[order], j[order], length[order]
    for a in (i, j, length):
        a.setflags(write=False)
    return EdgeProcess(n, i, j, length, p, cutoff, pts)


def edge_process(ps: PointSet, cutoff: Optional[float] = None) -> EdgeProcess:
    """Sorted candidate edges of ps; with a cutoff only pairs at distance <= cutoff.

    The cutoff path buckets points on a grid of side >= cutoff, which is exact
    for every l_p norm since l_p distance dominates l_inf distance.
    """
    pts = ps.points
    n = ps.n
    p = ps.p
    if cutoff is not None and cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    if n < 2:
        e = np.empty(0, np.int32)
        return _sorted_process(n, e, e.copy(), np.empty(0), p, cutoff, pts)
    if cutoff is None or cutoff >= 2.0:
        if n > 8000:
            warnings.warn(f"full edge process on n={n} materialises {n * (n - 1) // 2} pairs")
        i, j = np.triu_indices(n, 1)
        i = i.astype(np.int32)
        j = j.astype(np.int32)
        length = pair_distances(pts, i, j, p)
        if cutoff is not None:
            sel = length <= cutoff
            i, j, length = i[sel], j[sel], length[sel]
        return _sorted_process(n, i, j, length, p, cutoff, pts)
    # buckets wider than the cutoff stay exact; the cap keeps the index small
    cap = math.isqrt(4 * n) + 1
    nb = max(1, min(int(math.floor(1.0 / cutoff)) if cutoff * cap > 1.0 else cap, cap))
    cell = np.minimum((pts * nb).astype(np.int64), nb - 1)
    cid = cell[:, 1] * nb + cell[:, 0]
    order = np.argsort(cid, kind="stable").astype(np.int64)
    starts = np.searchsorted(cid[order], np.arange(nb * nb + 1)).astype(np.int64)
    # scan with a hair of slack, then recompute lengths with the same numpy
    # expression as the full scan so both paths agree bit for bit
    loose = float(cutoff) * (1.0 + 1e-9)
    if _accel.ENABLED:
        i, j, _ = _bucket_pairs_kernel(
            np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
            order, starts, nb, loose, _pcode(p), float(p) if math.isfinite(p) else 0.0)
    else:
        i, j, _ = _bucket_pairs_numpy(pts, order, starts, nb, loose, p)
    length = pair_distances(pts, i, j, p)
    sel = length <= cutoff
    i, j, length = i[sel], j[sel], length[sel]
    return _sorted_process(n, i, j, length, p, cutoff, pts)
