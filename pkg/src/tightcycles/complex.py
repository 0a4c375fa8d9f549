"""Sparse metric input and the Vietoris-Rips filtration built on top of it.

Simplices are addressed by integer keys that carry their diameter
("paired indexing"):

* vertex ``v``            -> ``v``
* edge                    -> position of the edge in the sorted edge order
* triangle ``{a, b, c}``  -> ``k_p * n + k_s`` where ``k_p`` is the edge of the
  triangle that comes last in the edge order and ``k_s`` the opposite vertex
* tetrahedron             -> ``(k_p * n + x) * n + y`` with ``k_p`` the last
  edge and ``x < y`` the two remaining vertices

Sorting keys of one dimension therefore sorts simplices by diameter, and the
largest facet of a simplex is always the one containing its ``k_p`` edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

INDEX_LIMIT = 2**63 - 1


class CapacityError(OverflowError):
    """Raised when simplex keys would not fit the 64-bit index width."""


class MissingEdgeError(KeyError):
    """Raised when a simplex requires a pair that is not a stored edge."""


class SimplexId(NamedTuple):
    dim: int
    key: int


@dataclass(frozen=True, eq=False)
class SparseMetricSpace:
    """Vertices ``0..n_vertices-1`` and the finite distances among them.

    Pairs that are not listed are at distance +inf and never enter a complex.
    """

    n_vertices: int
    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    threshold: float = math.inf
    _lookup: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64).reshape(-1)
        v = np.asarray(self.v, dtype=np.int64).reshape(-1)
        d = np.asarray(self.d, dtype=np.float64).reshape(-1)
        if not (len(u) == len(v) == len(d)):
            raise ValueError("edge arrays must have equal length")
        if self.n_vertices < 0:
            raise ValueError("n_vertices must be non-negative")
        thr = float(self.threshold)
        if math.isnan(thr) or thr < 0:
            raise ValueError(f"invalid threshold {self.threshold!r}")
        if len(u):
            if np.any(u >= v):
                raise ValueError("edges must satisfy u < v")
            if u.min() < 0 or v.max() >= self.n_vertices:
                raise ValueError("edge endpoint out of range")
            if not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise ValueError("edge lengths must be finite and > 0")
            if np.any(d > thr):
                raise ValueError("edge longer than the threshold")
            pair = u * max(self.n_vertices, 1) + v
            if len(np.unique(pair)) != len(pair):
                raise ValueError("duplicate edge")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "threshold", thr)

    @property
    def n_edges(self) -> int:
        return len(self.d)

    @classmethod
    def from_edges(cls, n_vertices, edges, threshold=math.inf) -> "SparseMetricSpace":
        """Build from ``(u, v, d)`` triples; endpoints are normalized to u < v."""
        rows = [(min(a, b), max(a, b), float(w)) for a, b, w in edges]
        if rows:
            u, v, d = (np.array(c) for c in zip(*rows))
        else:
            u = v = np.zeros(0, dtype=np.int64)
            d = np.zeros(0)
        return cls(int(n_vertices), u, v, d, threshold)

    @classmethod
    def from_points(cls, points, threshold=math.inf) -> "SparseMetricSpace":
        """Euclidean distances among ``points`` that are at most ``threshold``."""
        X = np.asarray(points, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("points must be a 2-D array")
        n = len(X)
        if n < 2:
            return cls(n, np.zeros(0), np.zeros(0), np.zeros(0), threshold)
        if math.isinf(threshold):
            iu, iv = np.triu_indices(n, k=1)
            pairs = np.column_stack([iu, iv])
        else:
            pairs = cKDTree(X).query_pairs(r=threshold, output_type="ndarray")
            pairs = np.sort(pairs, axis=1)
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        d = np.linalg.norm(X[pairs[:, 0]] - X[pairs[:, 1]], axis=1)
        if np.any(d == 0):
            raise ValueError("coincident points give a zero distance")
        keep = d <= threshold
        return cls(n, pairs[keep, 0], pairs[keep, 1], d[keep], threshold)

    @classmethod
    def from_distance_matrix(cls, D, threshold=math.inf) -> "SparseMetricSpace":
        """Upper triangle of a square matrix; inf/NaN entries mean 'no edge'."""
        D = np.asarray(D, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("distance matrix must be square")
        iu, iv = np.triu_indices(len(D), k=1)
        d = D[iu, iv]
        keep = np.isfinite(d) & (d <= threshold)
        return cls(len(D), iu[keep], iv[keep], d[keep], threshold)

    def distance(self, a: int, b: int) -> float:
        """Stored distance between two vertices, +inf when the pair is absent."""
        if a == b:
            return 0.0
        if self._lookup is None:
            lk = {(int(x), int(y)): float(w) for x, y, w in zip(self.u, self.v, self.d)}
            object.__setattr__(self, "_lookup", lk)
        if a > b:
            a, b = b, a
        return self._lookup.get((a, b), math.inf)


class Filtration:
    """Vietoris-Rips filtration of a :class:`SparseMetricSpace` up to ``max_dim``.

    The order is (diameter, dimension, key).  Edges of equal diameter are
    ordered by ``(u, v)`` unless an explicit ``edge_order`` is given; higher
    simplices follow from the edge order through their keys.

    ``cutoff`` restricts the complex to the prefix of the order ending at the
    given ``(diameter, dim, key)`` triple, which is how the intermediate
    complexes ``D_k`` of a filtration are represented.
    """

    def __init__(self, space: SparseMetricSpace, max_dim: int = 2, edge_order=None, cutoff=None):
        if not 0 <= max_dim <= 3:
            raise ValueError("max_dim must be in 0..3")
        self.space = space
        self.max_dim = max_dim
        self.n = n = space.n_vertices
        self.cutoff = cutoff

        if edge_order is None:
            order = np.lexsort((space.v, space.u, space.d))
        else:
            order = np.asarray(edge_order, dtype=np.int64)
            if sorted(order.tolist()) != list(range(space.n_edges)):
                raise ValueError("edge_order must be a permutation of the edges")
            if np.any(np.diff(space.d[order]) < 0):
                raise ValueError("edge_order must be non-decreasing in length")
        if max_dim < 1:
            order = order[:0]
        eu = space.u[order]
        ev = space.v[order]
        ed = space.d[order]
        if cutoff is not None:
            keep = [(float(w), 1, k) <= cutoff for k, w in enumerate(ed)]
            keep = np.asarray(keep, dtype=bool)
            eu, ev, ed, order = eu[keep], ev[keep], ed[keep], order[keep]
        self.edge_order = order
        self.edge_u = eu.tolist()
        self.edge_v = ev.tolist()
        self.edge_diam = ed.tolist()
        self.n_edges = ne = len(self.edge_u)

        if max_dim >= 2 and ne * max(n, 1) > INDEX_LIMIT:
            raise CapacityError(f"triangle keys overflow 64 bits ({ne} edges, {n} vertices)")
        if max_dim >= 3 and ne * max(n, 1) ** 2 > INDEX_LIMIT:
            raise CapacityError(f"tetrahedron keys overflow 64 bits ({ne} edges, {n} vertices)")

        adj = [dict() for _ in range(n)]
        for k, (a, b) in enumerate(zip(self.edge_u, self.edge_v)):
            adj[a][b] = k
            adj[b][a] = k
        self._adj = adj
        self._apparent_cache: dict = {}

    # ------------------------------------------------------------------ keys

    def edge_key(self, a: int, b: int) -> int:
        k = self._adj[a].get(b)
        if k is None:
            raise MissingEdgeError((a, b))
        return k

    def triangle_key(self, a: int, b: int, c: int) -> int:
        adj = self._adj
        try:
            eab, eac, ebc = adj[a][b], adj[a][c], adj[b][c]
        except KeyError as exc:
            raise MissingEdgeError((a, b, c)) from exc
        if eab > eac and eab > ebc:
            return eab * self.n + c
        if eac > ebc:
            return eac * self.n + b
        return ebc * self.n + a

    def tetra_key(self, a: int, b: int, c: int, d: int) -> int:
        adj = self._adj
        vs = (a, b, c, d)
        best = -1
        pair = None
        try:
            for i, j in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
                k = adj[vs[i]][vs[j]]
                if k > best:
                    best, pair = k, (i, j)
        except KeyError as exc:
            raise MissingEdgeError(vs) from exc
        x, y = (vs[m] for m in range(4) if m not in pair)
        if x > y:
            x, y = y, x
        return (best * self.n + x) * self.n + y

    def key_of(self, vertices: Sequence[int]) -> int:
        vs = tuple(int(x) for x in vertices)
        if len(set(vs)) != len(vs):
            raise ValueError(f"repeated vertex in {vs}")
        if len(vs) == 1:
            return vs[0]
        if len(vs) == 2:
            return self.edge_key(*vs)
        if len(vs) == 3:
            return self.triangle_key(*vs)
        if len(vs) == 4:
            return self.tetra_key(*vs)
        raise ValueError("simplices above dimension 3 are not supported")

    def vertices(self, dim: int, key: int) -> tuple:
        """Sorted vertex tuple of a simplex."""
        if dim == 0:
            return (key,)
        if dim == 1:
            return (self.edge_u[key], self.edge_v[key])
        n = self.n
        if dim == 2:
            kp, ks = divmod(key, n)
            return tuple(sorted((self.edge_u[kp], self.edge_v[kp], ks)))
        rest, y = divmod(key, n)
        kp, x = divmod(rest, n)
        return tuple(sorted((self.edge_u[kp], self.edge_v[kp], x, y)))

    def diameter(self, dim: int, key: int) -> float:
        if dim == 0:
            return 0.0
        if dim == 1:
            return self.edge_diam[key]
        if dim == 2:
            return self.edge_diam[key // self.n]
        return self.edge_diam[key // (self.n * self.n)]

    def contains(self, dim: int, key: int) -> bool:
        """Membership test; only meaningful for keys built from stored edges."""
        if dim > self.max_dim:
            return False
        if self.cutoff is None:
            return True
        return (self.diameter(dim, key), dim, key) <= self.cutoff

    # ------------------------------------------------------------ incidences

    def boundary(self, dim: int, key: int) -> list:
        """Facet keys of a simplex in increasing order."""
        if dim == 0:
            return []
        if dim == 1:
            return [self.edge_u[key], self.edge_v[key]]
        vs = self.vertices(dim, key)
        if dim == 2:
            a, b, c = vs
            adj = self._adj
            return sorted((adj[a][b], adj[a][c], adj[b][c]))
        return sorted(self.triangle_key(*f) for f in combinations(vs, 3))

    def max_facet(self, dim: int, key: int) -> int:
        """The facet that comes last in the order (the low of the boundary column)."""
        if dim == 1:
            return self.edge_v[key]
        if dim == 2:
            return key // self.n
        n = self.n
        rest, y = divmod(key, n)
        kp = rest // n
        return kp * n + y

    def cofacets(self, dim: int, key: int) -> list:
        """Keys of the cofacets of a simplex present in the complex, increasing."""
        if dim >= self.max_dim:
            return []
        adj = self._adj
        if dim == 0:
            out = sorted(adj[key].values())
        elif dim == 1:
            a, b = self.edge_u[key], self.edge_v[key]
            na, nb = adj[a], adj[b]
            if len(na) > len(nb):
                na, nb = nb, na
            n = self.n
            out = []
            for w, k1 in na.items():
                k2 = nb.get(w)
                if k2 is None:
                    continue
                if key > k1 and key > k2:
                    out.append(key * n + w)
                elif k1 > k2:
                    # k1 joins w to one endpoint; the opposite vertex is the other one
                    other = b if (self.edge_u[k1] == a or self.edge_v[k1] == a) else a
                    out.append(k1 * n + other)
                else:
                    other = b if (self.edge_u[k2] == a or self.edge_v[k2] == a) else a
                    out.append(k2 * n + other)
            out.sort()
        else:
            a, b, c = self.vertices(2, key)
            na, nb, nc = adj[a], adj[b], adj[c]
            common = na.keys() & nb.keys() & nc.keys()
            out = sorted(self.tetra_key(a, b, c, x) for x in common)
        if self.cutoff is not None:
            out = [k for k in out if self.contains(dim + 1, k)]
        return out

    def iter_cofacets(self, dim: int, key: int) -> Iterator[int]:
        yield from self.cofacets(dim, key)

    def apparent_cofacet(self, dim: int, key: int):
        """Cofacet ``t`` such that ``(key, t)`` is a trivial persistence pair, else None.

        ``t`` must be the earliest cofacet of the simplex and the simplex must be
        the largest facet of ``t``.
        """
        cache = self._apparent_cache
        ck = (dim, key)
        if ck in cache:
            return cache[ck]
        cof = self.cofacets(dim, key)
        res = None
        if cof and self.max_facet(dim + 1, cof[0]) == key:
            res = cof[0]
        if len(cache) < 1 << 20:
            cache[ck] = res
        return res

    # ------------------------------------------------------------ enumeration

    def simplices(self, dim: int) -> Iterator[int]:
        """Keys of all ``dim``-simplices in increasing order."""
        if dim > self.max_dim:
            return
        if dim == 0:
            yield from range(self.n)
            return
        if dim == 1:
            yield from range(self.n_edges)
            return
        adj = self._adj
        n = self.n
        for k in range(self.n_edges):
            a, b = self.edge_u[k], self.edge_v[k]
            na, nb = adj[a], adj[b]
            if len(na) > len(nb):
                na, nb = nb, na
            if dim == 2:
                ws = sorted(w for w, k1 in na.items() if k1 < k and nb.get(w, k) < k)
                for w in ws:
                    t = k * n + w
                    if self.cutoff is None or self.contains(2, t):
                        yield t
                    else:
                        return
            else:
                ws = sorted(w for w, k1 in na.items() if k1 < k and nb.get(w, k) < k)
                for i, x in enumerate(ws):
                    nx = adj[x]
                    for y in ws[i + 1:]:
                        if nx.get(y, k) < k:
                            h = (k * n + x) * n + y
                            if self.cutoff is None or self.contains(3, h):
                                yield h
                            else:
                                return

    def count(self, dim: int) -> int:
        return sum(1 for _ in self.simplices(dim))

    def ordered(self) -> list:
        """Every simplex as :class:`SimplexId`, in filtration order."""
        items = []
        for dim in range(self.max_dim + 1):
            items.extend((self.diameter(dim, k), dim, k) for k in self.simplices(dim))
        items.sort()
        return [SimplexId(dim, k) for _, dim, k in items]

    def truncate(self, n_simplices: int) -> "Filtration":
        """The complex formed by the first ``n_simplices`` simplices of the order."""
        order = self.ordered()
        if not self.n <= n_simplices <= len(order):
            raise ValueError("prefix must keep every vertex and not exceed the complex")
        last = order[n_simplices - 1]
        cut = (self.diameter(*last), last.dim, last.key)
        return Filtration(self.space, self.max_dim, edge_order=self.edge_order, cutoff=cut)

    def with_edge_order(self, edge_order) -> "Filtration":
        return Filtration(self.space, self.max_dim, edge_order=edge_order)

    def equal_diameter_runs(self) -> list:
        """Maximal runs ``(start, stop)`` of edge positions sharing a bit-equal diameter."""
        runs = []
        ed = self.edge_diam
        start = 0
        for k in range(1, self.n_edges + 1):
            if k == self.n_edges or ed[k] != ed[start]:
                if k - start > 1:
                    runs.append((start, k))
                start = k
        return runs


def build_filtration(space: SparseMetricSpace, max_dim: int = 2) -> Filtration:
    return Filtration(space, max_dim)


def simplex_diameter(filtration: Filtration, simplex) -> float:
    """Longest edge among the vertices of ``simplex`` (a vertex tuple or SimplexId)."""
    if isinstance(simplex, SimplexId):
        return filtration.diameter(simplex.dim, simplex.key)
    vs = tuple(simplex)
    if len(vs) == 1:
        return 0.0
    return max(filtration.edge_diam[filtration.edge_key(a, b)] for a, b in combinations(vs, 2))


def coboundary(filtration: Filtration, simplex: SimplexId) -> Iterator[SimplexId]:
    for k in filtration.iter_cofacets(simplex.dim, simplex.key):
        yield SimplexId(simplex.dim + 1, k)


def chain_vertices(filtration: Filtration, dim: int, chain: Iterable[int]) -> set:
    out = set()
    for k in chain:
        out.update(filtration.vertices(dim, k))
    return out
