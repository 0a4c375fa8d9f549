"""Shortening, splitting and smoothing of representative cycles.

Cycles are GF(2) chains given as collections of simplex keys (edges for H1,
triangles for H2).  Shortening repeatedly replaces ``X_i`` by ``X_i ⊕ X_j``
when that gives the largest available decrease in length; smoothing adds
boundaries of small triangles/tetrahedra that share faces with the cycle.
"""

from __future__ import annotations

import math
from collections import defaultdict
from itertools import combinations

import networkx as nx

from .complex import Filtration, MissingEdgeError


# --------------------------------------------------------------------------
# greedy shortening


class _ShorteningState:
    """Cycles sorted by decreasing length plus the best-partner table ``f``
    and, optionally, the inverted index ``g`` (simplex -> cycles)."""

    def __init__(self, cycles, use_index: bool):
        self.X = [set(c) for c in cycles]
        self.use_index = use_index
        self.g = defaultdict(set)
        if use_index:
            for i, c in enumerate(self.X):
                for s in c:
                    self.g[s].add(i)
        self.partner = [None] * len(self.X)
        self.red = [0] * len(self.X)
        self.resort()

    def resort(self):
        X = self.X
        self.order = sorted(range(len(X)), key=lambda i: (-len(X[i]), i))
        self.pos = [0] * len(X)
        for p, i in enumerate(self.order):
            self.pos[i] = p

    def lengths(self):
        return [len(self.X[i]) for i in self.order]

    def reduction(self, i, j):
        # |X_i| - |X_i ⊕ X_j| = 2|X_i ∩ X_j| - |X_j|
        return 2 * len(self.X[i] & self.X[j]) - len(self.X[j])

    def scan(self, i, candidates, r, partner):
        """Best partner among ``candidates`` (ascending position) starting from (r, partner)."""
        X = self.X
        pos = self.pos
        pi = pos[i]
        for j in candidates:
            if pos[j] <= pi:
                continue
            lj = len(X[j])
            if lj < r or lj == 0:
                break
            red = self.reduction(i, j)
            if red > r or (red == r and red > 0 and pos[j] < pos[partner]):
                r, partner = red, j
        return r, partner

    def full_scan(self, i):
        return self.scan(i, self.order[self.pos[i] + 1:], 0, None)

    def index_scan(self, i):
        """Strategy 1: intersection sizes by walking ``g`` over the simplices of X_i."""
        pos = self.pos
        pi = pos[i]
        counts = defaultdict(int)
        for s in self.X[i]:
            for j in self.g[s]:
                if pos[j] > pi:
                    counts[j] += 1
        r, partner = 0, None
        for j, c in counts.items():
            red = 2 * c - len(self.X[j])
            if red > r or (red == r and red > 0 and pos[j] < pos[partner]):
                r, partner = red, j
        return r, partner

    def substitute(self, i, j):
        xi, xj = self.X[i], self.X[j]
        if self.use_index:
            for s in xj:
                if s in xi:
                    self.g[s].discard(i)
                else:
                    self.g[s].add(i)
        xi.symmetric_difference_update(xj)


def shorten_cycles(cycles, dim: int = 1, optimized: bool | None = None, history: list | None = None) -> list:
    """Greedy shortening of a cycle basis; returns sorted tuples in input order.

    With ``optimized`` (the default for H1) the best partners are maintained
    incrementally with the inverted index; otherwise all pairs are scanned in
    every iteration.  ``history`` receives the sorted length vector at the
    start of every iteration.
    """
    if optimized is None:
        optimized = dim == 1
    st = _ShorteningState(cycles, use_index=optimized)
    n = len(st.X)
    for i in st.order:
        st.red[i], st.partner[i] = st.full_scan(i)

    while True:
        if history is not None:
            history.append(st.lengths())
        r_m = max(st.red, default=0)
        if r_m <= 0:
            break
        subs = [i for i in st.order if st.red[i] == r_m]
        for i in subs:
            st.substitute(i, st.partner[i])
        updated = set(subs)
        st.resort()
        if not optimized:
            for i in st.order:
                st.red[i], st.partner[i] = st.full_scan(i)
            continue
        upd_sorted = [i for i in st.order if i in updated]
        for i in range(n):
            if i in updated:
                st.red[i], st.partner[i] = st.index_scan(i)                  # case 1
            elif st.red[i] == 0:
                st.red[i], st.partner[i] = st.scan(i, upd_sorted, 0, None)   # case 2
            elif st.partner[i] in updated:
                st.red[i], st.partner[i] = st.index_scan(i)                  # case 3
            else:
                st.red[i], st.partner[i] = st.scan(                          # case 4
                    i, upd_sorted, st.red[i], st.partner[i])
    return [tuple(sorted(c)) for c in st.X if c]


def max_pair_reduction(cycles) -> int:
    """Largest ``|X_i| - |X_i ⊕ X_j|`` over ordered pairs (0 when nothing shortens)."""
    sets = [set(c) for c in cycles]
    best = 0
    for a, b in combinations(range(len(sets)), 2):
        inter = len(sets[a] & sets[b])
        best = max(best, 2 * inter - len(sets[b]), 2 * inter - len(sets[a]))
    return best


# --------------------------------------------------------------------------
# connectedness


def split_disconnected(filtration: Filtration, chain, dim: int) -> list:
    """Split a cycle into basis cycles (H1) or face-connected pieces (H2)."""
    chain = list(chain)
    if not chain:
        return []
    if dim == 1:
        G = nx.Graph()
        G.add_edges_from(filtration.vertices(1, k) for k in chain)
        out = []
        for cyc in sorted(nx.cycle_basis(G), key=lambda c: sorted(c)):
            walk = _canonical_walk(cyc)
            out.append(walk_to_chain(filtration, walk))
        return sorted(out)
    if dim == 2:
        tris = {k: filtration.vertices(2, k) for k in chain}
        comps = triangle_components(tris.values())
        key_of = {v: k for k, v in tris.items()}
        return sorted(tuple(sorted(key_of[t] for t in comp)) for comp in comps)
    raise ValueError("dim must be 1 or 2")


def triangle_components(triangles) -> list:
    """Components of the graph joining triangles that share two vertices."""
    tris = [tuple(sorted(t)) for t in triangles]
    G = nx.Graph()
    G.add_nodes_from(tris)
    by_edge = defaultdict(list)
    for t in tris:
        for e in combinations(t, 2):
            by_edge[e].append(t)
    for ts in by_edge.values():
        G.add_edges_from(zip(ts, ts[1:]))
    return [sorted(c) for c in sorted(nx.connected_components(G), key=lambda c: min(c))]


def _canonical_walk(vertices):
    """Rotate/reflect a vertex cycle to start at its smallest vertex."""
    vs = list(vertices)
    k = vs.index(min(vs))
    vs = vs[k:] + vs[:k]
    if len(vs) > 2 and vs[-1] < vs[1]:
        vs = [vs[0]] + vs[1:][::-1]
    return vs


def walk_to_chain(filtration: Filtration, walk) -> tuple:
    """Edge keys (mod 2) of the closed walk ``walk``."""
    walk = list(walk)
    if len(walk) > 1 and walk[0] == walk[-1]:
        walk = walk[:-1]
    out = set()
    m = len(walk)
    if m < 2:
        return ()
    for i in range(m):
        a, b = walk[i], walk[(i + 1) % m]
        if a == b:
            continue
        out ^= {filtration.edge_key(a, b)}
    return tuple(sorted(out))


def chain_to_walk(filtration: Filtration, chain) -> list:
    """Vertex order of a simple edge cycle."""
    nbrs = defaultdict(list)
    for k in chain:
        a, b = filtration.vertices(1, k)
        nbrs[a].append(b)
        nbrs[b].append(a)
    if not nbrs:
        return []
    if any(len(v) != 2 for v in nbrs.values()):
        raise ValueError("chain is not a simple cycle")
    start = min(nbrs)
    walk = [start]
    prev, cur = start, min(nbrs[start])
    while cur != start:
        walk.append(cur)
        a, b = nbrs[cur]
        prev, cur = cur, (b if a == prev else a)
    if len(walk) != len(nbrs):
        raise ValueError("chain is not connected")
    return walk


# --------------------------------------------------------------------------
# smoothing


def _triangle_diameter(space, a, b, c) -> float:
    return max(space.distance(a, b), space.distance(a, c), space.distance(b, c))


def smooth_h1(walk, space, tau_u: float, moves: list | None = None) -> list:
    """Drop ``v_i`` while the triangle ``(v_{i-1}, v_i, v_{i+1})`` has diameter <= tau_u.

    The scan is cyclic from ``v_0`` and repeated until nothing changes.  A
    result of length 2 is degenerate.  Every removed triangle is appended to
    ``moves``.
    """
    w = list(walk)
    if len(w) > 1 and w[0] == w[-1]:
        w = w[:-1]
    changed = True
    while changed and len(w) > 2:
        changed = False
        i = 0
        while i < len(w) and len(w) > 2:
            a, b, c = w[i - 1], w[i], w[(i + 1) % len(w)]
            if _triangle_diameter(space, a, b, c) <= tau_u:
                del w[i]
                if moves is not None:
                    moves.append((a, b, c))
                changed = True
            else:
                i += 1
    return w


def is_degenerate(walk) -> bool:
    return len(walk) <= 2


def _tetra_diameter(space, vs) -> float:
    return max(space.distance(a, b) for a, b in combinations(vs, 2))


def smooth_h2(triangles, space, tau_u: float, moves: list | None = None) -> list:
    """Replace three faces of a small tetrahedron by its fourth face, to fixpoint.

    Among all candidate tetrahedra (diameter <= tau_u, exactly three faces in
    the cycle) the one with the smallest diameter is used first.  At the end,
    face-connected pieces of at most four triangles that bound a tetrahedron
    of diameter <= tau_u are removed.
    """
    B = {tuple(sorted(t)) for t in triangles}
    by_edge = defaultdict(set)
    for t in B:
        for e in combinations(t, 2):
            by_edge[e].add(t)

    def neighbours(t):
        out = set()
        for e in combinations(t, 2):
            out |= by_edge[e]
        out.discard(t)
        return out

    while True:
        best = None
        for t1 in B:
            nb = sorted(x for x in neighbours(t1) if x > t1)
            for t2, t3 in combinations(nb, 2):
                P = set(t1) | set(t2) | set(t3)
                if len(P) != 4 or len(set(t2) & set(t3)) != 2:
                    continue
                t4 = tuple(sorted(P - (set(t1) & set(t2) & set(t3))))
                if len(t4) != 3:
                    continue
                if t4 in B:
                    continue
                d = _tetra_diameter(space, P)
                if d <= tau_u:
                    cand = (d, t1, t2, t3, t4)
                    if best is None or cand < best:
                        best = cand
        if best is None:
            break
        d, t1, t2, t3, t4 = best
        for t in (t1, t2, t3):
            B.discard(t)
            for e in combinations(t, 2):
                by_edge[e].discard(t)
        B.add(t4)
        for e in combinations(t4, 2):
            by_edge[e].add(t4)
        if moves is not None:
            moves.append(tuple(sorted(set(t1) | set(t4))))

    out = set(B)
    for comp in triangle_components(B):
        if len(comp) > 4:
            continue
        P = sorted(set().union(*comp))
        if len(comp) == 4 and len(P) == 4 and _tetra_diameter(space, P) <= tau_u:
            out.difference_update(comp)
            if moves is not None:
                moves.append(tuple(P))
    return sorted(out)


def smooth_cycle(filtration: Filtration, chain, dim: int, tau_u: float, moves=None):
    """Smooth a chain of simplex keys; returns ``(chain, degenerate)``."""
    space = filtration.space
    if dim == 1:
        walk = smooth_h1(chain_to_walk(filtration, chain), space, tau_u, moves)
        if is_degenerate(walk):
            return (), True
        return walk_to_chain(filtration, walk), False
    tris = [filtration.vertices(2, k) for k in chain]
    out = smooth_h2(tris, space, tau_u, moves)
    try:
        keys = tuple(sorted(filtration.key_of(t) for t in out))
    except MissingEdgeError:  # pragma: no cover - smoothing only uses stored edges
        raise
    return keys, len(keys) == 0


# --------------------------------------------------------------------------
# checks


def chain_boundary(filtration: Filtration, dim: int, chain) -> set:
    """GF(2) boundary of a chain of ``dim``-simplex keys."""
    out = set()
    for k in chain:
        for f in filtration.boundary(dim, k):
            out ^= {f}
    return out


def is_cycle(filtration: Filtration, dim: int, chain) -> bool:
    return not chain_boundary(filtration, dim, chain)


def vertex_boundary_parity(triangles) -> bool:
    """True when every edge lies in an even number of the given triangles."""
    count = defaultdict(int)
    for t in triangles:
        for e in combinations(sorted(t), 2):
            count[e] += 1
    return all(c % 2 == 0 for c in count.values())


def longest_edge(filtration: Filtration, dim: int, chain) -> float:
    if not chain:
        return 0.0
    return max(filtration.diameter(dim, k) for k in chain)


def chain_birth(filtration: Filtration, dim: int, chain) -> float:
    return longest_edge(filtration, dim, chain) if chain else math.nan
