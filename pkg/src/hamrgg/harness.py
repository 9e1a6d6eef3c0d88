"""Monte Carlo driver: thresholds (and optionally builder runs) over seeded
uniform instances, CSV of trial records, JSON summary with Wilson intervals,
and a small SVG renderer for instances and certificates."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import builder, cells, conn, geom, oracle, verify

CSV_HEADER = "# hamrgg-trials v1"
COLUMNS = ["n", "k", "p", "t", "seed", "mindeg_index", "mindeg_length", "conn_index", "conn_length",
           "pack_index", "pack_length", "mindeg_eq_conn", "conn_eq_pack", "sharp", "counterexample",
           "builder"]
MODES = ("oracle", "builder", "both")


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("HAMRGG_WORKERS", "").strip()
    if not raw:
        return default
    w = int(raw)
    if w < 1:
        raise ValueError("HAMRGG_WORKERS must be positive")
    return w


@dataclass(frozen=True)
class ExperimentConfig:
    n: tuple
    k: tuple
    p: tuple = (2.0,)
    trials: int = 10
    seed: int = 0
    mode: str = "oracle"
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    max_n_oracle: int = oracle.DEFAULT_LIMITS.max_n_packing
    check_counterexamples: bool = True
    lam0: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(x) for x in np.atleast_1d(self.n)))
        object.__setattr__(self, "k", tuple(int(x) for x in np.atleast_1d(self.k)))
        object.__setattr__(self, "p", tuple(geom.parse_norm(x) for x in np.atleast_1d(np.asarray(self.p, dtype=object))))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        if any(k < 1 for k in self.k) or any(n < 2 for n in self.n):
            raise ValueError("need k >= 1 and n >= 2")
        if self.mode in ("oracle", "both") and max(self.n, default=0) > self.max_n_oracle:
            raise ValueError(f"oracle mode needs n <= {self.max_n_oracle}")

    def groups(self):
        """(n, k, p) triples in run order; odd k keeps even n only."""
        out = []
        for p in self.p:
            for k in self.k:
                for n in self.n:
                    if k % 2 and n % 2:
                        continue
                    if n <= k:
                        continue
                    out.append((n, k, p))
        return out

    def echo(self) -> dict:
        d = asdict(self)
        d["p"] = [geom.norm_label(p) for p in self.p]
        return d


def trial_seed(base: int, n: int, k: int, p: float, t: int) -> int:
    ss = np.random.SeedSequence([int(base), int(n), int(k), geom._pcode(p), int(t)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class TrialRecord:
    n: int
    k: int
    p: float
    t: int
    seed: int
    mindeg_index: Optional[int] = None
    mindeg_length: Optional[float] = None
    conn_index: Optional[int] = None
    conn_length: Optional[float] = None
    pack_index: Optional[int] = None
    pack_length: Optional[float] = None
    sharp: str = ""                 # "ok" or the first failed check
    counterexample: str = ""        # "" (equal), "verified" or what failed
    builder: str = ""               # "success" or "stage:prop"
    seconds: float = field(default=0.0, compare=False)

    @property
    def mindeg_eq_conn(self):
        if self.mindeg_index is None or self.conn_index is None:
            return None
        return self.mindeg_index == self.conn_index

    @property
    def conn_eq_pack(self):
        if self.pack_index is None or self.conn_index is None:
            return None
        return self.conn_index == self.pack_index

    def row(self) -> list:
        def f(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return "1" if x else "0"
            if isinstance(x, float):
                return repr(x)
            return str(x)
        vals = [self.n, self.k, geom.norm_label(self.p), self.t, self.seed, self.mindeg_index,
                self.mindeg_length, self.conn_index, self.conn_length, self.pack_index, self.pack_length,
                self.mindeg_eq_conn, self.conn_eq_pack, self.sharp, self.counterexample, self.builder]
        return [f(v) for v in vals]


# ---------------------------------------------------------------------------
# one trial

def _sharpness(ep, k, rep, ps) -> str:
    """Recheck each threshold: property true at its index and false one before."""
    g = lambda t: conn.graph_at(ep, index=t)
    md, ci, pi = rep.mindeg_index, rep.conn_index, rep.pack_index
    if md is not None:
        if g(md).min_degree() < k:
            return "mindeg-not-reached"
        if md > 0 and g(md - 1).min_degree() >= k:
            return "mindeg-not-first"
    if ci is not None:
        if oracle.small_vertex_cut(g(ci), k) is not None:
            return "conn-not-reached"
        if ci > 0 and oracle.small_vertex_cut(g(ci - 1), k) is None:
            return "conn-not-first"
    if pi is not None:
        v = verify.check_certificate(ps, k, pi, rep.certificate)
        if not v:
            return "pack-certificate: " + str(v.violation)
        if pi > 0:
            prev = g(pi - 1)
            # independent model: the flow formulation is used by neither the search nor its fallback
            if prev.min_degree() >= k and oracle.packing_exists_flow(prev, k)[0]:
                return "pack-not-first"
    return "ok"


def _counterexample(ep, k, rep, ps) -> str:
    """When r_conn != r_pack, exhibit and independently check why."""
    ci, pi = rep.conn_index, rep.pack_index
    if ci is None or pi is None or ci == pi:
        return ""
    if pi > ci:
        # k-connected one step before r_pack, yet no packing there
        t = pi - 1
        gt = conn.graph_at(ep, index=t)
        if oracle.small_vertex_cut(gt, k) is not None:
            return "cex-not-connected"
        ok, _ = oracle.packing_exists_flow(gt, k)
        return "cex-flow-found-packing" if ok else "verified"
    # packing at r_pack while not yet k-connected
    v = verify.check_certificate(ps, k, pi, rep.certificate)
    if not v:
        return "cex-bad-certificate"
    gt = conn.graph_at(ep, index=pi)
    cut = oracle.small_vertex_cut(gt, k)
    if cut is None:
        return "cex-connected"
    if len(cut) >= k or not verify.check_vertex_cut(gt.n, gt.edge_list(), cut):
        return "cex-bad-cut"
    return "verified"


def _builder_edges(ps, k, lam0):
    cutoff = min(2.0, 2.0 * geom.connectivity_scale(ps.n, k, ps.p, lam0))
    while True:
        ep = geom.edge_process(ps, cutoff=cutoff)
        try:
            return ep, conn.threshold_radii(ep, k)
        except conn.ThresholdNotReached:
            if cutoff >= 2.0:
                raise
            cutoff = min(2.0, cutoff * 1.5)


def run_trial(cfg: ExperimentConfig, n: int, k: int, p: float, t: int) -> TrialRecord:
    t0 = time.perf_counter()
    seed = trial_seed(cfg.seed, n, k, p, t)
    ps = geom.generate_points(n, p, seed)
    rec = TrialRecord(n, k, p, t, seed)
    oracle_mode = cfg.mode in ("oracle", "both")
    if oracle_mode:
        ep = geom.edge_process(ps)
        rep = conn.threshold_radii(ep, k, with_packing_oracle=True)
    else:
        ep, rep = _builder_edges(ps, k, cfg.lam0)
    rec.mindeg_index, rec.mindeg_length = rep.mindeg_index, rep.mindeg_length
    rec.conn_index, rec.conn_length = rep.conn_index, rep.conn_length
    rec.pack_index, rec.pack_length = rep.pack_index, rep.pack_length
    if oracle_mode:
        rec.sharp = _sharpness(ep, k, rep, ps)
        if cfg.check_counterexamples:
            rec.counterexample = _counterexample(ep, k, rep, ps)
    if cfg.mode in ("builder", "both"):
        res = builder.build(ps, k, ep, builder.BuilderConfig(k, lam0=cfg.lam0), r_index=rep.conn_index)
        if isinstance(res, builder.StructuredFailure):
            rec.builder = f"{res.stage}:{res.prop}" + (":defect" if res.defect else "")
        else:
            ok = verify.check_certificate(ps, k, res.r_index, res)
            within = res.r_index <= rep.conn_index
            rec.builder = "success" if ok and within else "unverified"
    rec.seconds = time.perf_counter() - t0
    return rec


def _run_task(args):
    cfg, n, k, p, t = args
    return run_trial(cfg, n, k, p, t)


# ---------------------------------------------------------------------------
# experiment

def wilson(successes: int, trials: int, level: float = 0.95):
    if trials == 0:
        return None
    from scipy.stats import binomtest
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return [float(ci.low), float(ci.high)]


def summarise(cfg: ExperimentConfig, records, seconds: float) -> dict:
    groups = []
    for n, k, p in cfg.groups():
        rs = [r for r in records if (r.n, r.k, r.p) == (n, k, p)]
        g = {"n": n, "k": k, "p": geom.norm_label(p), "trials": len(rs),
             "seconds": round(sum(r.seconds for r in rs), 3)}
        md = [r.mindeg_eq_conn for r in rs if r.mindeg_eq_conn is not None]
        g["mindeg_eq_conn"] = {"count": int(sum(md)), "of": len(md), "wilson95": wilson(int(sum(md)), len(md))}
        g["mindeg_le_conn"] = all(r.mindeg_index <= r.conn_index for r in rs
                                  if r.mindeg_index is not None and r.conn_index is not None)
        if cfg.mode in ("oracle", "both"):
            cp = [r.conn_eq_pack for r in rs if r.conn_eq_pack is not None]
            g["conn_eq_pack"] = {"count": int(sum(cp)), "of": len(cp), "wilson95": wilson(int(sum(cp)), len(cp))}
            g["mindeg_le_pack"] = all(r.mindeg_index <= r.pack_index for r in rs
                                      if r.mindeg_index is not None and r.pack_index is not None)
            g["sharp_failures"] = sum(r.sharp != "ok" for r in rs)
            g["counterexamples"] = sum(r.counterexample != "" for r in rs)
            g["counterexamples_verified"] = sum(r.counterexample == "verified" for r in rs)
        if cfg.mode in ("builder", "both"):
            tally = {}
            for r in rs:
                tally[r.builder] = tally.get(r.builder, 0) + 1
            succ = tally.get("success", 0)
            g["builder"] = {"outcomes": dict(sorted(tally.items())), "success": succ,
                            "wilson95": wilson(succ, len(rs))}
        groups.append(g)
    return {"format": "hamrgg-summary v1", "config": cfg.echo(), "groups": groups,
            "seconds": round(seconds, 3), "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "backend": _backend()}


def _backend():
    from ._accel import backend
    return backend()


def records_csv(records) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(path_or_text) -> list:
    text = path_or_text
    if "\n" not in text:
        with open(text) as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a hamrgg trial CSV")
    return list(csv.DictReader(lines[1:]))


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None, progress=None):
    """(records, summary). Records come back in task order whatever the worker count."""
    t0 = time.perf_counter()
    tasks = [(cfg, n, k, p, t) for (n, k, p) in cfg.groups() for t in range(cfg.trials)]
    workers = workers or workers_from_env()
    records = []
    if workers > 1 and len(tasks) > 1:
        import multiprocessing as mp
        with mp.get_context("fork").Pool(workers) as pool:
            for rec in pool.imap(_run_task, tasks, chunksize=4):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for task in tasks:
            rec = _run_task(task)
            records.append(rec)
            if progress:
                progress(rec)
    summary = summarise(cfg, records, time.perf_counter() - t0)
    if cfg.csv_path:
        with open(cfg.csv_path, "w") as fh:
            fh.write(records_csv(records))
    if cfg.json_path:
        with open(cfg.json_path, "w") as fh:
            json.dump(summary, fh, indent=2)
    return records, summary


# ---------------------------------------------------------------------------
# SVG

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]
CELL_FILL = {"dense": "#c7e9c0", "sparse": "#fdf1b8", "bad": "#f4a6a6"}


def plot_instance(ps, cert=None, cls=None, rings=(), size: int = 600, point_radius: float = None) -> str:
    """Static SVG of the points, the certificate's classes and an optional
    cell classification (dense / sparse / bad shading, ring outlines)."""
    pad = 10
    S = size - 2 * pad

    def X(x):
        return pad + x * S

    def Y(y):
        return pad + (1.0 - y) * S

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect x="{pad}" y="{pad}" width="{S}" height="{S}" fill="white" stroke="#888"/>']
    if cls is not None:
        grid = cls.grid
        side = S / grid.N
        bad = set(int(c) for c in cls.bad_cell_ids())
        out.append('<g class="cells">')
        for c in range(grid.ncells):
            cnt = grid.count(c)
            if c in bad:
                kind = "bad"
            elif cnt == 0:
                continue
            elif cls.label(c) == cells.DENSE:
                kind = "dense"
            else:
                kind = "sparse"
            cx, cy = grid.xy(c)
            out.append(f'<rect class="{kind}" x="{pad + cx * side:.2f}" y="{pad + (grid.N - 1 - cy) * side:.2f}" '
                       f'width="{side:.2f}" height="{side:.2f}" fill="{CELL_FILL[kind]}" stroke="none"/>')
        out.append("</g>")
        for ring in rings:
            out.append('<g class="ring">')
            for c in ring.R:
                cx, cy = grid.xy(int(c))
                out.append(f'<rect x="{pad + cx * side:.2f}" y="{pad + (grid.N - 1 - cy) * side:.2f}" '
                           f'width="{side:.2f}" height="{side:.2f}" fill="none" stroke="#3050c0" stroke-width="1"/>')
            out.append("</g>")
    pts = ps.points
    if cert is not None:
        for ci, seq in enumerate(cert.cycles):
            col = PALETTE[ci % len(PALETTE)]
            coords = " ".join(f"{X(pts[v][0]):.2f},{Y(pts[v][1]):.2f}" for v in seq)
            out.append(f'<polygon class="cycle" points="{coords}" fill="none" stroke="{col}" '
                       f'stroke-width="1" stroke-opacity="0.8"/>')
        col = PALETTE[len(cert.cycles) % len(PALETTE)]
        for a, b in cert.matching:
            out.append(f'<line class="matching" x1="{X(pts[a][0]):.2f}" y1="{Y(pts[a][1]):.2f}" '
                       f'x2="{X(pts[b][0]):.2f}" y2="{Y(pts[b][1]):.2f}" stroke="{col}" '
                       f'stroke-width="1.5" stroke-dasharray="3,2"/>')
    rad = point_radius or (3.0 if ps.n <= 100 else 1.2)
    out.append('<g class="points">')
    for x, y in pts:
        out.append(f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="{rad}" fill="black"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
