"""Command line interface: `hamrgg <subcommand> ...`.

Exit codes: 0 success, 1 check failed / property false, 2 build failure or bad input.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import builder, cells, conn, fixtures, forestpack, geom, harness, kdecomp, oracle, verify
from .certificate import CycleCertificate


def _emit(args, obj, text=None):
    if args.json or text is None:
        print(json.dumps(obj))
    else:
        print(text)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _edges_for(ps, k, cutoff=None):
    if cutoff is not None:
        return geom.edge_process(ps, cutoff=cutoff)
    if ps.n <= 3000:
        return geom.edge_process(ps)
    return harness._builder_edges(ps, k, 10.0)[0]


# ---------------------------------------------------------------------------

def cmd_generate(args):
    if args.planted:
        ps, cfg, info = fixtures.hole_lattice(args.k, holes=((5, 5, args.planted),), seed=args.seed)
        obj = ps.to_json()
        obj["builder"] = {"delta": cfg.delta, "M": cfg.M, "strict": False}
    else:
        ps = geom.generate_points(args.n, args.p, args.seed)
        obj = ps.to_json()
    _write(args.output, json.dumps(obj) + "\n")
    return 0


def cmd_thresholds(args):
    ps = geom.PointSet.load(args.instance)
    ep = _edges_for(ps, args.k, args.cutoff)
    try:
        rep = conn.threshold_radii(ep, args.k, with_packing_oracle=args.pack)
    except conn.ThresholdNotReached as exc:
        print(f"threshold not reached: {exc}", file=sys.stderr)
        return 2
    d = rep.to_json()
    lines = [f"r_mindeg index {rep.mindeg_index} length {rep.mindeg_length}",
             f"r_conn   index {rep.conn_index} length {rep.conn_length}"]
    if args.pack:
        lines.append(f"r_pack   index {rep.pack_index} length {rep.pack_length}")
    _emit(args, d, "\n".join(lines))
    return 0


def _planted_cfg(obj, args):
    b = obj.get("builder") or {}
    strict = not (args.relaxed or b.get("strict") is False)
    kw = {"k": args.k, "lam0": args.lam0, "strict": strict}
    delta = args.delta if args.delta is not None else b.get("delta")
    M = args.M if args.M is not None else b.get("M")
    if delta is not None:
        kw["delta"] = delta
    if M is not None:
        kw["M"] = M
    if args.r_tess is not None:
        kw["r_tess"] = args.r_tess
    return builder.BuilderConfig(**kw)


def cmd_build(args):
    with open(args.instance) as fh:
        obj = json.load(fh)
    ps = geom.PointSet.from_json(obj)
    cfg = _planted_cfg(obj, args)
    ep = _edges_for(ps, args.k, args.cutoff)
    stages = [] if args.dump_stages else None
    res = builder.build(ps, args.k, ep, cfg, stages=stages)
    if stages is not None:
        with open(args.dump_stages, "w") as fh:
            json.dump(stages, fh)
    if isinstance(res, builder.StructuredFailure):
        d = {"ok": False, "failure": res.to_json()}
        _emit(args, d, f"build failed at {res.stage}: {res.prop}" + (f" ({res.detail})" if res.detail else ""))
        return 2
    if not args.output:
        print(json.dumps(res.to_json()))
        return 0
    _write(args.output, json.dumps(res.to_json()) + "\n")
    m = res.meta.get("builder", {})
    _emit(args, {"ok": True, "r_index": res.r_index, "r_length": res.r_length, "stats": m},
          f"certificate written to {args.output}: {len(res.cycles)} cycles"
          + (", 1 matching" if args.k % 2 else "") + f", threshold index {res.r_index}")
    return 0


def cmd_verify(args):
    ps = geom.PointSet.load(args.instance)
    cert = CycleCertificate.load(args.certificate)
    k = args.k if args.k is not None else cert.k
    v = verify.check_certificate(ps, k, cert.r_index, cert)
    _emit(args, {"ok": bool(v), "violation": v.violation},
          "certificate ok" if v else f"violation: {v.violation}")
    return 0 if v else 1


def _load_graph(args):
    if args.graph:
        with open(args.graph) as fh:
            return conn.Graph.from_json(json.load(fh))
    ps = geom.PointSet.load(args.instance)
    ep = geom.edge_process(ps)
    if args.index is not None:
        return conn.graph_at(ep, index=args.index)
    return conn.graph_at(ep, radius=args.radius)


def cmd_oracle(args):
    g = _load_graph(args)
    try:
        if args.question == "pack":
            ok, cert = oracle.packing_exists(g, args.k)
            d = {"answer": ok, "certificate": cert.to_json() if cert else None}
        elif args.question == "ham":
            ok, cyc = oracle.is_hamiltonian(g)
            d = {"answer": ok, "cycle": cyc}
        else:
            kappa, cut = oracle.vertex_connectivity_exact(g)
            ok = kappa >= args.k and g.n > args.k
            d = {"answer": ok, "kappa": kappa, "cut": cut}
    except oracle.OracleLimitExceeded as exc:
        print(f"oracle limit: {exc}", file=sys.stderr)
        return 2
    _emit(args, d, json.dumps(d))
    return 0 if d["answer"] else 1


def cmd_decomp(args):
    dec = kdecomp.decompose(args.k)
    _emit(args, dec.to_json(), "\n".join(dec.lines()))
    return 0


def cmd_pack_forests(args):
    with open(args.instance) as fh:
        inst = forestpack.CliqueBipartiteInstance.from_json(json.load(fh))
    try:
        pk = forestpack.pack(inst)
    except forestpack.InstanceError as exc:
        print(f"instance violates the hypotheses: {exc}", file=sys.stderr)
        return 2
    if args.trace:
        for st in pk.trace:
            print(st.line(), file=sys.stderr if args.json else sys.stdout)
    print(json.dumps(pk.to_json()))
    return 0


def cmd_experiment(args):
    cfg = harness.ExperimentConfig(n=tuple(args.n), k=tuple(args.k), p=tuple(args.norms or [args.p]),
                                   trials=args.trials, seed=args.seed, mode=args.mode,
                                   csv_path=args.csv, json_path=args.summary, lam0=args.lam0)
    progress = None
    if args.verbose:
        progress = lambda r: print(" ".join(r.row()), file=sys.stderr)
    records, summary = harness.run_experiment(cfg, progress=progress)
    if not args.csv:
        sys.stdout.write(harness.records_csv(records))
    if args.json or not args.summary:
        print(json.dumps(summary), file=sys.stderr if not args.csv else sys.stdout)
    return 0


def cmd_plot(args):
    with open(args.instance) as fh:
        obj = json.load(fh)
    ps = geom.PointSet.from_json(obj)
    cert = CycleCertificate.load(args.certificate) if args.certificate else None
    cls = None
    rings = []
    if args.cells:
        r = args.radius
        if r is None:
            ep = _edges_for(ps, args.k)
            r = conn.threshold_radii(ep, args.k).conn_length
        b = obj.get("builder") or {}
        delta = args.delta or b.get("delta") or cells.DEFAULT_DELTA
        M = args.M or b.get("M")
        cls = cells.tessellate(ps, r, delta, M, args.k, check_delta=False)
        for comp in cls.bad_components:
            try:
                rings.append(cells.build_ring(cls, comp, r, ps=ps))
            except cells.RingError:
                pass
    _write(args.output, harness.plot_instance(ps, cert, cls, rings))
    return 0


# ---------------------------------------------------------------------------

def _norm(s):
    return geom.parse_norm(s)


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--p", type=_norm, default=argparse.SUPPRESS, help="norm: 1, 2 or inf")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")

    ap = argparse.ArgumentParser(prog="hamrgg", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--p", type=_norm, default=2.0)
    ap.add_argument("--json", action="store_true", default=False)
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("generate", parents=[common], help="uniform (or planted) point set as JSON")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--k", type=int, default=2, help="k for --planted")
    s.add_argument("--planted", choices=["lone", "group", "big"], help="cluster lattice with a planted hole")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_generate)

    s = sub.add_parser("thresholds", parents=[common], help="r_mindeg, r_conn (and r_pack) of an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--pack", action="store_true", help="also run the packing oracle (small n)")
    s.add_argument("--cutoff", type=float)
    s.set_defaults(fn=cmd_thresholds)

    s = sub.add_parser("build", parents=[common], help="run the construction at the threshold")
    s.add_argument("--instance", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--lam0", type=float, default=10.0)
    s.add_argument("--delta", type=float)
    s.add_argument("--M", type=int)
    s.add_argument("--relaxed", action="store_true", help="skip the radius window and a.a.s. checks")
    s.add_argument("--r-tess", type=float, dest="r_tess")
    s.add_argument("--cutoff", type=float)
    s.add_argument("--dump-stages", dest="dump_stages", help="write per-stage colouring snapshots (JSON)")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_build)

    s = sub.add_parser("verify", parents=[common], help="check a certificate against an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--certificate", required=True)
    s.add_argument("--k", type=int)
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("oracle", parents=[common], help="exact answers for small graphs")
    s.add_argument("question", choices=["pack", "ham", "conn"])
    s.add_argument("--k", type=int, default=2)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help='{"n": .., "edges": [[u, v], ..]}')
    g.add_argument("--instance")
    s.add_argument("--index", type=int)
    s.add_argument("--radius", type=float)
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("decomp", parents=[common], help="Hamilton decomposition of K_{k+1}")
    s.add_argument("--k", type=int, required=True)
    s.set_defaults(fn=cmd_decomp)

    s = sub.add_parser("pack-forests", parents=[common], help="linear forests for a clique-plus-bipartite instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--trace", action="store_true")
    s.set_defaults(fn=cmd_pack_forests)

    s = sub.add_parser("experiment", parents=[common], help="Monte Carlo threshold experiment")
    s.add_argument("--n", type=int, nargs="+", required=True)
    s.add_argument("--k", type=int, nargs="+", required=True)
    s.add_argument("--norms", type=_norm, nargs="+")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--mode", choices=harness.MODES, default="oracle")
    s.add_argument("--lam0", type=float, default=10.0)
    s.add_argument("--csv")
    s.add_argument("--summary")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(fn=cmd_experiment)

    s = sub.add_parser("plot", parents=[common], help="SVG of an instance, certificate and cells")
    s.add_argument("--instance", required=True)
    s.add_argument("--certificate")
    s.add_argument("--cells", action="store_true")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--radius", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--M", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_plot)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
