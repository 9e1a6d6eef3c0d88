"""Hamiltonian decompositions of complete graphs with a transversal.

K_{k+1} has vertex labels 1..k plus a special vertex written ``*``; internally
``*`` is 0 so a decomposition lives on vertices 0..k.

Even k uses colours 1..k/2. Edge uv (u, v != *) gets colour ceil((u+v)/2) mod
k/2, and the two edges *-i, *-(i+k/2) get colour i. Every class is a Hamilton
cycle: * , i, i-1, i+1, i-2, i+2, ...

Odd k uses colours 1..(k+1)/2. Edge uv gets colour ceil(((u+v) mod k)/2), edge
*-i colour i for i <= (k-1)/2 and *-(k-i) colour (k+1)/2 - i. Colour (k+1)/2,
the match colour, is a perfect matching; the rest are Hamilton cycles.

Residues are mapped into 1..modulus with 0 -> modulus; ``mod`` is always the
nonnegative remainder.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

STAR = 0


def _label(x):
    if x == "*" or x == STAR:
        return STAR
    x = int(x)
    if x < 1:
        raise ValueError(f"bad vertex label {x}")
    return x


def _rep(x: int, mod: int) -> int:
    r = x % mod
    return mod if r == 0 else r


def _ceil_half(x: int) -> int:
    return (x + 1) // 2


def colour_of_edge(k: int, u, v) -> int:
    """Colour of edge uv in the standard colouring of K_{k+1}."""
    u, v = _label(u), _label(v)
    if u == v:
        raise ValueError("loop")
    if max(u, v) > k:
        raise ValueError("label out of range")
    if k % 2 == 0:
        h = k // 2
        if u == STAR or v == STAR:
            return _rep(u + v, h)
        return _rep(_ceil_half(u + v), h)
    h1 = (k + 1) // 2
    if u == STAR or v == STAR:
        w = u + v
        if w <= (k - 1) // 2:
            return w
        return h1 - (k - w)
    c = _ceil_half((u + v) % k)
    return h1 if c == 0 else c


def cycle_formula(k: int, i: int) -> list:
    """Colour-i class for even k as the vertex sequence v_0=*, v_t = i - (-1)^t floor(t/2)."""
    seq = [STAR]
    for t in range(1, k + 1):
        sign = -1 if t % 2 else 1
        seq.append(_rep(i - sign * (t // 2), k))
    return seq


def cycle_recurrence(k: int, i: int) -> list:
    """Same class via v_1 = i, v_{t+1} = v_t + (-1)^t t."""
    seq = [STAR, _rep(i, k)]
    v = i
    for t in range(1, k):
        v = v + (-1) ** t * t
        seq.append(_rep(v, k))
    return seq


def _even_transversal(k: int) -> list:
    def lab(x):
        return _rep(x, k)
    if k % 4 == 2:
        return [(lab(2 * i), lab(2 * i + 1)) for i in range(k // 2)]
    out = [(lab(2 * i), lab(2 * i + 1)) for i in range(k // 4)]
    out.append((STAR, k // 2))
    out += [(lab(k // 2 + 2 * i - 1), lab(k // 2 + 2 * i)) for i in range(1, k // 4)]
    return out


def _search_transversal(colour, k, cycles):
    """One edge per Hamilton cycle, pairwise disjoint; consecutive-label edges tried first."""
    h = len(cycles)
    cands = []
    for c in range(1, h + 1):
        seq = cycles[c - 1]
        edges = [(seq[t], seq[(t + 1) % len(seq)]) for t in range(len(seq))]
        edges = [tuple(sorted(e)) for e in edges]
        edges.sort(key=lambda e: (e[0] == STAR or abs(e[0] - e[1]) != 1, e))
        cands.append(edges)
    used = set()
    chosen = []

    def rec(c):
        if c == h:
            return True
        for a, b in cands[c]:
            if a in used or b in used:
                continue
            used.update((a, b))
            chosen.append((a, b))
            if rec(c + 1):
                return True
            chosen.pop()
            used.difference_update((a, b))
        return False

    if not rec(0):
        raise AssertionError(f"no transversal found for k={k}")
    return chosen


@dataclass(frozen=True)
class HamDecomposition:
    """Partition of E(K_{k+1}) on vertices 0..k (0 is *)."""
    k: int
    colours: np.ndarray          # (k+1, k+1) colour matrix, 0 on the diagonal
    cycles: tuple                # cycles[c-1]: vertex sequence of colour c
    match_class: tuple           # edges of the match colour (odd k)
    transversal: tuple           # transversal[c-1] is an edge of colour c
    shift: int = 0

    @property
    def m(self) -> int:
        return self.k + 1

    @property
    def ncolours(self) -> int:
        return (self.k + 1) // 2

    @property
    def match_colour(self):
        return (self.k + 1) // 2 if self.k % 2 else None

    def colour(self, u, v) -> int:
        return int(self.colours[_label(u), _label(v)])

    def classes(self) -> dict:
        out = {c: [] for c in range(1, self.ncolours + 1)}
        m = self.m
        for u in range(m):
            for v in range(u + 1, m):
                out[int(self.colours[u, v])].append((u, v))
        return out

    def to_json(self) -> dict:
        def name(v):
            return "*" if v == STAR else v
        return {
            "k": self.k,
            "shift": self.shift,
            "cycles": [[name(v) for v in c] for c in self.cycles],
            "match": [[name(a), name(b)] for a, b in self.match_class],
            "transversal": [[name(a), name(b)] for a, b in self.transversal],
        }

    def lines(self) -> list:
        def name(v):
            return "*" if v == STAR else str(v)
        out = []
        for c, seq in enumerate(self.cycles, 1):
            out.append(f"colour {c}: cycle " + " ".join(name(v) for v in seq))
        if self.k % 2:
            out.append(f"colour {self.match_colour}: matching "
                       + " ".join(f"{name(a)}-{name(b)}" for a, b in self.match_class))
        out.append("transversal: " + " ".join(f"{name(a)}-{name(b)}" for a, b in self.transversal))
        return out


def _walk_class(colours, c, start=STAR):
    m = colours.shape[0]
    nbrs = [[v for v in range(m) if v != u and colours[u, v] == c] for u in range(m)]
    if any(len(x) != 2 for x in nbrs):
        raise AssertionError(f"colour {c} is not 2-regular")
    seq = [start]
    prev, cur = start, min(nbrs[start])
    while cur != start:
        seq.append(cur)
        a, b = nbrs[cur]
        prev, cur = cur, (b if a == prev else a)
        if len(seq) > m:
            break
    if len(seq) != m:
        raise AssertionError(f"colour {c} is not a Hamilton cycle")
    return seq


@lru_cache(maxsize=512)
def decompose(k: int) -> HamDecomposition:
    if k < 1:
        raise ValueError("k must be positive")
    m = k + 1
    col = np.zeros((m, m), dtype=np.int16)
    for u in range(m):
        for v in range(u + 1, m):
            col[u, v] = col[v, u] = colour_of_edge(k, u, v)
    col.setflags(write=False)
    if k % 2 == 0:
        cycles = tuple(tuple(cycle_formula(k, i)) for i in range(1, k // 2 + 1))
        match = ()
        trans = tuple(tuple(sorted(e)) for e in _even_transversal(k))
        # list in colour order
        trans = tuple(sorted(trans, key=lambda e: col[e[0], e[1]]))
    else:
        h1 = (k + 1) // 2
        cycles = tuple(tuple(_walk_class(col, c)) for c in range(1, h1))
        match = tuple((u, v) for u in range(m) for v in range(u + 1, m) if col[u, v] == h1)
        trans = tuple(_search_transversal(col, k, cycles))
    return HamDecomposition(k, col, cycles, match, trans)


def transversal(k: int) -> list:
    return list(decompose(k).transversal)


def relabel(dec: HamDecomposition, perm) -> HamDecomposition:
    """Image of dec under the vertex map u -> perm[u] (perm[0] must be 0)."""
    perm = list(perm)
    m = dec.m
    if sorted(perm) != list(range(m)) or perm[0] != STAR:
        raise ValueError("perm must be a permutation fixing *")
    inv = np.empty(m, dtype=np.int64)
    inv[perm] = np.arange(m)
    col = dec.colours[np.ix_(inv, inv)].copy()
    col.setflags(write=False)
    cycles = tuple(tuple(perm[v] for v in seq) for seq in dec.cycles)
    match = tuple(tuple(sorted((perm[a], perm[b]))) for a, b in dec.match_class)
    trans = tuple(tuple(sorted((perm[a], perm[b]))) for a, b in dec.transversal)
    return HamDecomposition(dec.k, col, cycles, match, trans, dec.shift)


def shifted_decomposition(k: int, a: int) -> HamDecomposition:
    """decompose(k) with every non-star label moved by +a (mod k), so colour_a(u,v) = colour(u-a, v-a)."""
    if k % 2:
        raise ValueError("shifted decompositions are defined for even k")
    perm = [STAR] + [_rep(u + a, k) for u in range(1, k + 1)]
    d = relabel(decompose(k), perm)
    return HamDecomposition(d.k, d.colours, d.cycles, d.match_class, d.transversal, a % k)


def complete_graph_cycles(vertices, count: int, extra_match: bool = False):
    """`count` edge-disjoint Hamilton cycles on an explicit vertex list.

    Uses decompose(m-1) with label u -> vertices[u]. Returns list of vertex
    sequences; asks for at most floor((m-1)/2) cycles.
    """
    vs = list(vertices)
    m = len(vs)
    if m < 3:
        raise ValueError("need at least 3 vertices for a Hamilton cycle")
    dec = decompose(m - 1)
    if count > len(dec.cycles):
        raise ValueError(f"K_{m} has only {len(dec.cycles)} Hamilton cycles in the decomposition")
    return [[vs[u] for u in dec.cycles[c]] for c in range(count)]
