"""Time the hot kernels under numba and under the pure-Python fallback.

Each backend runs in its own interpreter (the switch is read at import time).
The numba column excludes compilation: every kernel is warmed up on a tiny
input first.

    python benchmarks/bench_kernels.py [--n 4000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from hamrgg import _accel, cells, conn, geom, oracle
n, repeat = int(sys.argv[1]), int(sys.argv[2])

def best(fn):
    fn()                                   # warm-up / compile
    ts = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); ts.append(time.perf_counter() - t)
    return min(ts)

ps = geom.generate_points(n, 2, seed=0)
cut = 2.5 * geom.connectivity_scale(n, 2, 2)
ep = geom.edge_process(ps, cutoff=cut)
r = conn.threshold_radii(ep, 2).conn_length
# Petersen graph: 3-regular, 3-connected, not Hamiltonian, so the DP runs to the end
outer = [(i, (i + 1) % 5) for i in range(5)]
spokes = [(i, i + 5) for i in range(5)]
inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
pe = outer + spokes + inner
petersen = conn.Graph.from_edges(10, [a for a, _ in pe], [b for _, b in pe])
out = {
    "backend": _accel.backend(),
    "edge_process": best(lambda: geom.edge_process(ps, cutoff=cut)),
    "threshold_radii k=2": best(lambda: conn.threshold_radii(ep, 2)),
    "tessellate": best(lambda: cells.tessellate(ps, r, 0.05, M=1, check_delta=False)),
    "hamiltonian petersen": best(lambda: oracle.is_hamiltonian(petersen)),
}
print(json.dumps(out))
"""


def run(disable, n, repeat):
    env = dict(os.environ)
    env.pop("HAMRGG_DISABLE_NUMBA", None)
    if disable:
        env["HAMRGG_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(n), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.n, args.repeat)
    slow = run(True, args.n, args.repeat)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':24s} {'numba':>10s} {'python':>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        a, b = fast[key], slow[key]
        print(f"{key:24s} {a:10.4f} {b:10.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
