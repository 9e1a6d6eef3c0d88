"""Greedy packing of linear forests into a clique on J plus a bipartite graph H.

Input: a clique on J (|J| = j <= k), a designated apex in J and bipartite edges
H between J and B, with every J-vertex of H-degree >= l = k - j + 1, the apex
of degree >= l + 1, and every pair of J-vertices jointly seeing >= l + 1
vertices of B. Output: floor(k/2) edge-disjoint linear forests (plus a matching
for odd k) covering the clique, each J-vertex of degree 2 in every forest and
degree 1 in the matching.

Even k. Label the apex * and the other J-vertices 1..j-1; colour the clique by
the K_{k+1} colouring and regard L = {j..k} as deleted. The colours on edges
from v to L are missing at v (with multiplicity) and must be placed on H-edges
at v. Non-apex vertices are treated in label order. At v, a missing colour whose
L-edges end at positions k-t (and k-t-1) is called i_t; colours are treated in
decreasing t, each put on delta uncoloured H-edges subject to
  (i)  the colour class stays a linear forest,
  (ii) the colour class is not connected unless every choice allowed by (i)
       makes it connected.
The apex goes last; its colours are handled in decreasing order of how many
H-edges already carry them, greedily under (i).

Odd k. Label the non-apex vertices c..c+j-2 with c = ceil(l/2). Add a new
J-vertex labelled c+j-1 with l edges to fresh dummy B-vertices, run the even
procedure for k+1 on the K_{k+2} colouring shifted by c-1 (so the deleted set is
{c-i mod (k+1) : 1 <= i <= l}), keep its colours on H, and colour the clique by
the K_{k+1} colouring with L = {c-i mod k}. Colour (k+1)/2 is the matching.
"""
from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from . import kdecomp
from .kdecomp import STAR, _rep


class InstanceError(ValueError):
    pass


class ForestPackDefect(AssertionError):
    """The greedy got stuck or an invariant broke; carries the full trace."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = list(trace or [])


@dataclass
class CliqueBipartiteInstance:
    k: int
    J: list
    apex: int
    B: list
    H_edges: list

    @property
    def j(self) -> int:
        return len(self.J)

    @property
    def ell(self) -> int:
        return self.k - self.j + 1

    def neighbours(self) -> dict:
        nb = {v: set() for v in self.J}
        for a, b in self.H_edges:
            nb[a].add(b)
        return nb

    def to_json(self) -> dict:
        return {"k": self.k, "j": self.j, "apex": self.apex, "J": list(self.J),
                "B": list(self.B), "H_edges": [[a, b] for a, b in self.H_edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "CliqueBipartiteInstance":
        k = int(obj["k"])
        if "J" in obj:
            J = [int(v) for v in obj["J"]]
        else:
            J = list(range(int(obj["j"])))
        H = [(int(a), int(b)) for a, b in obj.get("H_edges", [])]
        if "B" in obj:
            B = [int(v) for v in obj["B"]]
        else:
            B = sorted({b for _, b in H})
        apex = int(obj.get("apex", J[0] if J else 0))
        return cls(k, J, apex, B, H)


def check_hypotheses(inst: CliqueBipartiteInstance):
    """(ok, reason). reason names the first violated clause."""
    k, J, B = inst.k, inst.J, inst.B
    if k < 1:
        return False, "k must be positive"
    j = len(J)
    if not 1 <= j <= k:
        return False, f"need 1 <= j <= k, got j={j}"
    if len(set(J)) != j or len(set(B)) != len(B):
        return False, "repeated vertex"
    if set(J) & set(B):
        return False, "J and B overlap"
    if inst.apex not in J:
        return False, "apex not in J"
    Js, Bs = set(J), set(B)
    seen = set()
    for a, b in inst.H_edges:
        if a not in Js or b not in Bs:
            return False, f"H edge ({a},{b}) is not J-B"
        if (a, b) in seen:
            return False, f"H edge ({a},{b}) repeated"
        seen.add((a, b))
    ell = inst.ell
    nb = inst.neighbours()
    for v in J:
        need = ell + 1 if v == inst.apex else ell
        if len(nb[v]) < need:
            return False, f"(i) degree of {v} is {len(nb[v])} < {need}"
    for x in range(j):
        for y in range(x + 1, j):
            u, w = J[x], J[y]
            if len(nb[u] | nb[w]) < ell + 1:
                return False, f"(ii) joint neighbourhood of {u},{w} has size {len(nb[u] | nb[w])} < {ell + 1}"
    return True, None


@dataclass
class TraceStep:
    vertex: int
    colour: int
    t: Optional[int]
    delta: int
    edges: list
    rule_ii: str

    def line(self) -> str:
        es = " ".join(f"{a}-{b}" for a, b in self.edges)
        tt = "-" if self.t is None else str(self.t)
        return f"vertex {self.vertex} colour {self.colour} t={tt} delta={self.delta} edges {es} rule-ii {self.rule_ii}"


@dataclass
class ForestPacking:
    k: int
    forests: list                 # forests[i-1]: edges of colour i
    matching: list = field(default_factory=list)
    colour: dict = field(default_factory=dict)   # edge (a, b), a < b -> colour
    labels: dict = field(default_factory=dict)   # J-vertex -> label in the auxiliary complete graph
    trace: list = field(default_factory=list)
    backtracks: int = 0

    def classes(self) -> list:
        return list(self.forests) + ([self.matching] if self.k % 2 else [])

    def to_json(self) -> dict:
        out = {"k": self.k, "forests": [[list(e) for e in f] for f in self.forests]}
        if self.k % 2:
            out["matching"] = [list(e) for e in self.matching]
        return out


def _e(a, b):
    return (a, b) if a < b else (b, a)


class _DSU:
    def __init__(self):
        self.p = {}

    def find(self, x):
        p = self.p
        p.setdefault(x, x)
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[ra] = rb


class _ColourClass:
    """One colour class of G: union-find, degrees, count of non-trivial components."""

    def __init__(self):
        self.dsu = _DSU()
        self.deg = Counter()
        self.ncomp = 0

    def comp_delta(self, a, b):
        da, db = self.deg[a], self.deg[b]
        if da == 0 and db == 0:
            return 1
        if da == 0 or db == 0:
            return 0
        return -1

    def add(self, a, b):
        if self.deg[a] >= 2 or self.deg[b] >= 2 or self.dsu.find(a) == self.dsu.find(b):
            raise ForestPackDefect(f"edge {a}-{b} breaks the linear forest")
        self.ncomp += self.comp_delta(a, b)
        self.deg[a] += 1
        self.deg[b] += 1
        self.dsu.union(a, b)


def missing_colours(k: int, j: int, labels=None) -> dict:
    """Missing colours per retained label of K_{k+1}, with multiplicities.

    Default labels: * and 1..j-1 for even k, * and c..c+j-2 (c = ceil(l/2),
    taken mod k) for odd k. Explicit `labels` may be given; the deleted set L is
    then every non-star label not listed. Returns {label: Counter(colour -> mult)}.
    """
    ell = k - j + 1
    dec = kdecomp.decompose(k)
    if labels is None:
        if k % 2 == 0:
            labels = [STAR] + list(range(1, j))
        else:
            c0 = (ell + 1) // 2
            labels = [STAR] + [_rep(c0 + p, k) for p in range(j - 1)]
    labels = list(labels)
    L = [x for x in range(1, k + 1) if x not in labels]
    return {u: Counter(int(dec.colours[u, x]) for x in L) for u in labels}


def _labels_even(m, jp, shift):
    """Non-apex labels (treatment order) and deleted labels for K_{m+1} shifted by `shift`."""
    J_lab = [_rep(shift + p, m) for p in range(1, jp)]
    L = [_rep(shift + p, m) for p in range(jp, m + 1)]
    return J_lab, L


def _greedy_even(m, shift, order, apex, lab, B_all, Hnb, trace, check_bound=True,
                 max_nodes=200000, stats=None):
    """The even procedure on K_{m+1} shifted by `shift`.

    order: non-apex J-vertices in treatment order (labels shift+1, shift+2, ...).
    lab: J-vertex -> label. Hnb: J-vertex -> sorted list of B-neighbours.

    The rules leave freedom in which admissible edges are taken. The first
    branch always takes the lowest B-indices; if a later step has no admissible
    edge, the search backs up to the latest step with another choice the rules
    allow. Backtracks are counted in stats and logged in the trace; only when
    every rule-respecting execution is stuck is a defect raised.
    Returns hcolour[(v, b)] = colour.
    """
    dec = kdecomp.decompose(m)
    jp = len(order) + 1
    J_lab, L = _labels_even(m, jp, shift)
    pos = {x: (x - shift - 1) % m + 1 for x in range(1, m + 1)}
    J = list(order) + [apex]
    base = {c: [] for c in range(1, m // 2 + 1)}
    for x in range(len(J)):
        for y in range(x + 1, len(J)):
            u, w = J[x], J[y]
            base[int(dec.colours[lab[u], lab[w]])].append((u, w))

    # the step list does not depend on the choices made
    steps = []
    count_h = Counter()
    for v in order:
        ends = {}
        for x in L:
            ends.setdefault(int(dec.colours[lab[v], x]), []).append(pos[x])
        items = sorted(((m - max(ps), c, len(ps)) for c, ps in ends.items()), key=lambda z: (-z[0], z[1]))
        for t, c, delta in items:
            if check_bound and count_h[c] > 2 * t + 1:
                raise ForestPackDefect(
                    f"colour {c} already on {count_h[c]} H-edges > 2t+1={2 * t + 1} at vertex {v}", trace)
            steps.append((v, c, t, delta))
            count_h[c] += delta
    miss = Counter(int(dec.colours[STAR, x]) for x in L)
    for c in sorted(miss, key=lambda c: (-count_h[c], c)):
        for _ in range(miss[c]):
            steps.append((apex, c, None, 1))

    hcol = {}
    by_colour = {c: [] for c in base}
    chosen_at = [None] * len(steps)
    status_at = [None] * len(steps)

    def klass(c):
        cc = _ColourClass()
        for a, b in base[c]:
            cc.add(a, b)
        for a, b in by_colour[c]:
            cc.add(a, b)
        return cc

    def options(idx):
        v, c, t, delta = steps[idx]
        cc = klass(c)
        free = [b for b in Hnb[v] if (v, b) not in hcol and cc.deg[b] < 2]
        opts = []
        if delta == 1:
            if cc.deg[v] >= 2:
                raise ForestPackDefect(f"vertex {v} is already full in colour {c}", trace)
            rv = cc.dsu.find(v)
            opts = [(b,) for b in free if cc.dsu.find(b) != rv]
        else:
            if cc.deg[v] != 0:
                raise ForestPackDefect(f"vertex {v} misses colour {c} twice but has an edge of it", trace)
            for x in range(len(free)):
                rx = cc.dsu.find(free[x])
                for y in range(x + 1, len(free)):
                    if cc.dsu.find(free[y]) != rx:
                        opts.append((free[x], free[y]))
        if v == apex:
            return opts, "n/a"
        split = [o for o in opts if _components_after(cc, v, o) >= 2]
        # rule (ii): stay disconnected whenever some admissible choice allows it
        if split:
            return split, "ok"
        return opts, "forced-connected"

    nodes = 0
    backtracks = 0
    pending = [None] * len(steps)
    idx = 0
    while idx < len(steps):
        if pending[idx] is None:
            pending[idx] = options(idx)
            status_at[idx] = pending[idx][1]
            pending[idx] = list(pending[idx][0])
        nodes += 1
        if nodes > max_nodes:
            raise ForestPackDefect("search budget exhausted", trace)
        if not pending[idx]:
            v, c, t, delta = steps[idx]
            pending[idx] = None
            if idx == 0:
                raise ForestPackDefect(f"no admissible edges for colour {c} at vertex {v}", trace)
            backtracks += 1
            trace.append(TraceStep(v, c, t, delta, [], "stuck-backtrack"))
            idx -= 1
            pv, pc = steps[idx][0], steps[idx][1]
            for b in chosen_at[idx]:
                del hcol[(pv, b)]
                by_colour[pc].remove((pv, b))
            chosen_at[idx] = None
            continue
        o = pending[idx].pop(0)
        v, c = steps[idx][0], steps[idx][1]
        for b in o:
            hcol[(v, b)] = c
            by_colour[c].append((v, b))
        chosen_at[idx] = o
        idx += 1
    for idx, (v, c, t, delta) in enumerate(steps):
        trace.append(TraceStep(v, c, t, delta, [(v, b) for b in chosen_at[idx]], status_at[idx]))
    if stats is not None:
        stats["backtracks"] = stats.get("backtracks", 0) + backtracks
    return hcol


def _components_after(cc, v, bs):
    """Component count of the class after adding v-b for b in bs (valid choices only)."""
    n = cc.ncomp
    dv = cc.deg[v]
    roots = set()
    for b in bs:
        db = cc.deg[b]
        if dv == 0 and db == 0:
            n += 1
        elif dv == 0 or db == 0:
            pass
        else:
            n -= 1
        dv += 1
        roots.add(b)
    return n


def _verify_linear(k, J, classes_edges, matching, trace):
    for c, es in enumerate(classes_edges, 1):
        cc = _ColourClass()
        for a, b in es:
            try:
                cc.add(a, b)
            except ForestPackDefect:
                raise ForestPackDefect(f"colour {c} is not a linear forest at {a}-{b}", trace)
        for v in J:
            if cc.deg[v] != 2:
                raise ForestPackDefect(f"vertex {v} has degree {cc.deg[v]} in colour {c}", trace)
    if k % 2:
        deg = Counter()
        for a, b in matching:
            deg[a] += 1
            deg[b] += 1
        if any(d > 1 for d in deg.values()) or any(deg[v] != 1 for v in J):
            raise ForestPackDefect("match class is not a J-saturating matching", trace)


def _trivial_j1(inst, trace):
    k, v = inst.k, inst.apex
    bs = sorted(inst.neighbours()[v])
    h = k // 2
    forests = [[_e(v, bs[2 * i]), _e(v, bs[2 * i + 1])] for i in range(h)]
    matching = [_e(v, bs[2 * h])] if k % 2 else []
    for i, f in enumerate(forests, 1):
        trace.append(TraceStep(v, i, None, 2, [(v, bs[2 * i - 2]), (v, bs[2 * i - 1])], "n/a"))
    if k % 2:
        trace.append(TraceStep(v, h + 1, None, 1, [(v, bs[2 * h])], "n/a"))
    colour = {e: i for i, f in enumerate(forests, 1) for e in f}
    for e in matching:
        colour[e] = h + 1
    return ForestPacking(k, forests, matching, colour, {v: STAR}, trace)


def _prepare(inst):
    ok, why = check_hypotheses(inst)
    if not ok:
        raise InstanceError(why)
    nb = inst.neighbours()
    Hnb = {v: sorted(nb[v]) for v in inst.J}
    order = [v for v in inst.J if v != inst.apex]
    return Hnb, order


def pack_even(inst: CliqueBipartiteInstance) -> ForestPacking:
    k = inst.k
    if k % 2:
        raise ValueError("pack_even needs even k")
    Hnb, order = _prepare(inst)
    trace = []
    if inst.j == 1:
        return _trivial_j1(inst, trace)
    lab = {inst.apex: STAR}
    for p, v in enumerate(order, 1):
        lab[v] = p
    stats = {}
    hcol = _greedy_even(k, 0, order, inst.apex, lab, inst.B, Hnb, trace, stats=stats)
    dec = kdecomp.decompose(k)
    per = {c: [] for c in range(1, k // 2 + 1)}
    J = inst.J
    for x in range(len(J)):
        for y in range(x + 1, len(J)):
            per[int(dec.colours[lab[J[x]], lab[J[y]]])].append(_e(J[x], J[y]))
    for (v, b), c in hcol.items():
        per[c].append(_e(v, b))
    forests = [sorted(per[c]) for c in range(1, k // 2 + 1)]
    _verify_linear(k, J, forests, [], trace)
    colour = {e: c for c in per for e in per[c]}
    return ForestPacking(k, forests, [], colour, lab, trace, stats.get("backtracks", 0))


def pack_odd(inst: CliqueBipartiteInstance) -> ForestPacking:
    k = inst.k
    if k % 2 == 0:
        raise ValueError("pack_odd needs odd k")
    Hnb, order = _prepare(inst)
    trace = []
    if inst.j == 1:
        return _trivial_j1(inst, trace)
    j, ell = inst.j, inst.ell
    c0 = (ell + 1) // 2
    m = k + 1
    shift = c0 - 1
    # augmented instance: a new J-vertex with ell fresh B-neighbours
    used = set(inst.J) | set(inst.B) | {b for _, b in inst.H_edges}
    new_v = max(used) + 1
    fresh = list(range(new_v + 1, new_v + 1 + ell))
    Hnb2 = dict(Hnb)
    Hnb2[new_v] = fresh
    order2 = order + [new_v]
    lab2 = {inst.apex: STAR}
    for p, v in enumerate(order2, 1):
        lab2[v] = _rep(shift + p, m)
    # same missing multisets in both auxiliary graphs, as the reduction needs
    dec_o = kdecomp.decompose(k)
    dec_e = kdecomp.decompose(m)
    lab = {inst.apex: STAR}
    for p, v in enumerate(order):
        lab[v] = _rep(c0 + p, k)
    L_odd = [_rep(c0 - i, k) for i in range(1, ell + 1)]
    L_even = [_rep(c0 - i, m) for i in range(1, ell + 1)]
    for v in inst.J:
        mo = Counter(int(dec_o.colours[lab[v], x]) for x in L_odd)
        me = Counter(int(dec_e.colours[lab2[v], x]) for x in L_even)
        if mo != me:
            raise ForestPackDefect(f"missing colours differ at {v}: {dict(mo)} vs {dict(me)}", trace)
    stats = {}
    hcol = _greedy_even(m, shift, order2, inst.apex, lab2, inst.B, Hnb2, trace, stats=stats)
    h1 = (k + 1) // 2
    per = {c: [] for c in range(1, h1 + 1)}
    J = inst.J
    for x in range(len(J)):
        for y in range(x + 1, len(J)):
            per[int(dec_o.colours[lab[J[x]], lab[J[y]]])].append(_e(J[x], J[y]))
    for (v, b), c in hcol.items():
        if v != new_v:
            per[c].append(_e(v, b))
    forests = [sorted(per[c]) for c in range(1, h1)]
    matching = sorted(per[h1])
    _verify_linear(k, J, forests, matching, trace)
    colour = {e: c for c in per for e in per[c]}
    return ForestPacking(k, forests, matching, colour, lab, trace, stats.get("backtracks", 0))


def pack(inst: CliqueBipartiteInstance) -> ForestPacking:
    return pack_odd(inst) if inst.k % 2 else pack_even(inst)


def random_instance(k: int, j: Optional[int] = None, rng=None, extra: float = 0.3,
                    slack_b: int = 3, apex_free: bool = False) -> CliqueBipartiteInstance:
    """Random instance meeting the hypotheses by construction.

    Degrees are tight (l, apex l+1) except for random extras with probability
    `extra`. B has l+1+U{0..slack_b} vertices, so neighbourhoods collide often;
    two non-apex vertices may share their l-set only if one gets an extra
    neighbour, which is added deterministically. apex_free drops the apex bonus
    (the hypothesis then fails and check_hypotheses says so).
    """
    rng = rng if rng is not None else random.Random()
    if j is None:
        j = rng.randint(1, k)
    ell = k - j + 1
    nB = ell + 1 + rng.randint(0, slack_b)
    J = list(range(j))
    B = list(range(j, j + nB))
    apex = rng.choice(J)
    nb = {}
    seen_sets = set()
    for v in J:
        d = ell + (0 if apex_free or v != apex else 1)
        while d < nB and rng.random() < extra:
            d += 1
        s = frozenset(rng.sample(B, d))
        if len(s) == ell and s in seen_sets:
            s = s | {rng.choice([b for b in B if b not in s])}
        if len(s) == ell:
            seen_sets.add(s)
        nb[v] = s
    H = [(v, b) for v in J for b in sorted(nb[v])]
    return CliqueBipartiteInstance(k, J, apex, B, H)


def dumps_packing(pk: ForestPacking) -> str:
    return json.dumps(pk.to_json())
