"""Covers of cycles in a spatial embedding and their graphical contraction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np

from .complex import Filtration, SparseMetricSpace
from .persistence import compute_persistence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SignificanceParams:
    """``tau_u`` bounds births, ``epsilon`` is the minimum persistence."""

    tau_u: float
    epsilon: float

    def __post_init__(self):
        if not (self.tau_u > 0 and math.isfinite(self.tau_u)):
            raise ValueError("tau_u must be positive and finite")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")

    @property
    def tau(self) -> float:
        return self.tau_u + self.epsilon


def as_embedding(X, n_vertices: int | None = None) -> np.ndarray:
    """Validate an (n, 2|3) coordinate array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] not in (2, 3):
        raise ValueError("embedding must have shape (n, 2) or (n, 3)")
    if not np.all(np.isfinite(X)):
        raise ValueError("embedding coordinates must be finite")
    if n_vertices is not None and X.shape[0] != n_vertices:
        raise ValueError(f"embedding has {X.shape[0]} points, expected {n_vertices}")
    return X


@dataclass
class Cover:
    lo: np.ndarray
    hi: np.ndarray
    members: tuple
    n_sig: int = -1
    cycles: list = field(default_factory=list)   # vertex sets of the cycles it came from

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def sort_key(self):
        return (self.size, tuple(self.lo.tolist()), tuple(self.hi.tolist()), self.members)

    def contains_point(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


def box_members(X: np.ndarray, lo, hi) -> tuple:
    inside = np.all((X >= lo) & (X <= hi), axis=1)
    return tuple(np.flatnonzero(inside).tolist())


def cover_of(cycle_vertices, X: np.ndarray) -> Cover:
    """Smallest axis-aligned box around the cycle points, with every point inside or on it."""
    vs = sorted(set(int(v) for v in cycle_vertices))
    if not vs:
        raise ValueError("cycle is empty")
    P = X[vs]
    lo, hi = P.min(axis=0), P.max(axis=0)
    return Cover(lo, hi, box_members(X, lo, hi), cycles=[tuple(vs)])


def _pairwise(vertices, space: SparseMetricSpace | None, X: np.ndarray | None):
    for a, b in combinations(vertices, 2):
        d = space.distance(a, b) if space is not None else math.inf
        if math.isinf(d) and X is not None:
            d = float(np.linalg.norm(X[a] - X[b]))
        yield d


def max_persistence_estimate(filtration: Filtration, dim: int, chain, X: np.ndarray | None = None) -> float:
    """Upper bound on the persistence of the class a cycle wraps.

    Equals (largest pairwise distance among the cycle's vertices) minus (the
    longest edge of the cycle).  Missing distances fall back to the
    embedding; without one they count as infinite.
    """
    chain = list(chain)
    if not chain:
        return 0.0
    vs = sorted({v for k in chain for v in filtration.vertices(dim, k)})
    longest = max(filtration.diameter(dim, k) for k in chain)
    far = max(_pairwise(vs, filtration.space, X), default=0.0)
    return far - longest


def induced_space(X: np.ndarray, members, threshold: float) -> SparseMetricSpace:
    return SparseMetricSpace.from_points(X[list(members)], threshold=threshold)


def count_significant(X: np.ndarray, members, params: SignificanceParams, dim: int) -> int:
    """Number of significant ``dim`` features among the points ``X[members]``."""
    members = list(members)
    if len(members) < dim + 2:
        return 0
    space = induced_space(X, members, params.tau)
    res = compute_persistence(Filtration(space, dim + 1), dims=(dim,), reduce_boundaries=False)
    return len(res.diagram.significant(dim, params.tau_u, params.epsilon, params.tau))


class SignificanceCounter:
    """Memoized :func:`count_significant` keyed by member set."""

    def __init__(self, X: np.ndarray, params: SignificanceParams, dim: int):
        self.X = X
        self.params = params
        self.dim = dim
        self.memo: dict = {}

    def __call__(self, members) -> int:
        key = frozenset(members)
        if key not in self.memo:
            self.memo[key] = count_significant(self.X, sorted(key), self.params, self.dim)
        return self.memo[key]


def cover_intersection_graph(covers) -> nx.Graph:
    """Nodes are cover indices; an edge joins covers that share a member."""
    G = nx.Graph()
    G.add_nodes_from(range(len(covers)))
    sets = [set(c.members) for c in covers]
    owners: dict = {}
    for i, s in enumerate(sets):
        for v in s:
            owners.setdefault(v, []).append(i)
    for idx in owners.values():
        G.add_edges_from(combinations(idx, 2))
    return G


def _intersect(a: Cover, b: Cover, members) -> Cover:
    return Cover(np.maximum(a.lo, b.lo), np.minimum(a.hi, b.hi), tuple(sorted(members)),
                 cycles=a.cycles + b.cycles)


def contract_covers(covers, counter, dim: int, log: list | None = None) -> list:
    """Rewrite overlapping covers until neither rule applies.

    Subset rule: if ``C_j ⊆ C_i`` with equal counts, ``C_i`` is dropped.
    Intersection rule: ``C_i`` (and/or ``C_j``) is replaced by ``C_i ∩ C_j``
    when the intersection keeps its count; intersections smaller than
    ``dim + 2`` points are not tried.  ``counter`` maps a member set to its
    number of significant features.
    """
    min_size = dim + 2
    C = sorted(covers, key=Cover.sort_key)
    for c in C:
        if c.n_sig < 0:
            c.n_sig = counter(c.members)
    if any(c.n_sig <= 0 for c in C):
        raise ValueError("every cover must contain a significant feature")

    def note(msg):
        if log is not None:
            log.append(msg)

    while True:
        changed = False
        G = cover_intersection_graph(C)
        sets = [set(c.members) for c in C]
        for comp in sorted(nx.connected_components(G), key=min):
            for i, j in combinations(sorted(comp), 2):
                if not G.has_edge(i, j):
                    continue
                ci, cj = C[i], C[j]
                si, sj = sets[i], sets[j]
                # subset rule, both orientations
                if sj <= si and ci.n_sig == cj.n_sig:
                    note(("subset", ci.members, cj.members))
                    del C[i]
                    changed = True
                    break
                if si <= sj and ci.n_sig == cj.n_sig:
                    note(("subset", cj.members, ci.members))
                    del C[j]
                    changed = True
                    break
                inter = si & sj
                if len(inter) < min_size or inter == si or inter == sj:
                    continue
                n_int = counter(inter)
                if n_int <= 0:
                    continue
                keep_i, keep_j = n_int == ci.n_sig, n_int == cj.n_sig
                if not (keep_i or keep_j):
                    continue
                new = _intersect(ci, cj, inter)
                new.n_sig = n_int
                note(("intersect", ci.members, cj.members, new.members))
                if keep_i and keep_j:
                    C = [c for k, c in enumerate(C) if k not in (i, j)] + [new]
                elif keep_i:
                    C[i] = new
                else:
                    C[j] = new
                changed = True
                break
            if changed:
                break
        if not changed:
            break
        C = sorted(C, key=Cover.sort_key)
    return C


def build_covers(cycle_vertex_sets, X: np.ndarray, counter) -> list:
    """Covers of the given cycles with their counts; covers with no significant feature are dropped."""
    out = []
    seen = {}
    for vs in cycle_vertex_sets:
        c = cover_of(vs, X)
        key = c.members
        if key in seen:
            seen[key].cycles.extend(c.cycles)
            continue
        c.n_sig = counter(c.members)
        if c.n_sig > 0:
            out.append(c)
            seen[key] = c
    return out
