"""Persistence pairs over GF(2).

Pairs are found by reducing coboundary columns from the end of the filtration
(cohomology), skipping trivial pairs that need no reduction.  The boundary
matrix is then reduced only at the death simplices of the nontrivial pairs,
in batches, which yields the columns of R needed for representative cycles
and birth-cycles.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .complex import Filtration, SimplexId


class DualityError(RuntimeError):
    """A reduced boundary column disagrees with the pair found by cohomology."""


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth_simplex: SimplexId
    death_simplex: SimplexId | None
    birth: float
    death: float
    trivial: bool = False

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)


class PersistenceDiagram:
    """Multiset of ``(dim, birth, death)`` with ``death = inf`` for essential classes."""

    def __init__(self, pairs=()):
        self.pairs = list(pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def dims(self):
        return sorted({p.dim for p in self.pairs})

    def in_dim(self, dim: int) -> list:
        return [p for p in self.pairs if p.dim == dim]

    def as_array(self, dim: int) -> np.ndarray:
        rows = sorted((p.birth, p.death) for p in self.pairs if p.dim == dim)
        return np.array(rows, dtype=float).reshape(-1, 2)

    def values(self, dim: int | None = None) -> list:
        """Sorted ``(dim, birth, death)`` triples, the diagram as a multiset."""
        return sorted(
            (p.dim, p.birth, p.death) for p in self.pairs if dim is None or p.dim == dim
        )

    def significant(self, dim: int, tau_u: float, epsilon: float, tau: float | None = None) -> list:
        """Pairs born at most ``tau_u`` whose persistence is at least ``epsilon``.

        An essential class is credited with persistence ``tau - birth``.
        """
        if tau is None:
            tau = tau_u + epsilon
        out = []
        for p in self.pairs:
            if p.dim != dim or p.birth > tau_u:
                continue
            if p.essential:
                # born by tau_u and alive at tau: persistence tau - b >= epsilon
                if tau - p.birth >= epsilon or tau >= tau_u + epsilon:
                    out.append(p)
            elif p.persistence >= epsilon:
                out.append(p)
        return out

    def __eq__(self, other):
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return self.values() == other.values()

    def __repr__(self):
        return f"PersistenceDiagram({self.values()!r})"


class ReducedMatrix:
    """Reduced boundary columns R(σ) of one dimension, keyed by death simplex.

    Columns of trivial pairs are never stored; they equal the boundary of the
    simplex and are looked up on demand when ``apparent`` is set.
    """

    def __init__(self, filtration: Filtration, dim: int, apparent: bool = True):
        self.filtration = filtration
        self.dim = dim
        self.apparent = apparent and dim >= 2
        self.columns: dict = {}
        self.pivots: dict = {}

    def __len__(self):
        return len(self.columns)

    def owner(self, row: int):
        """Column whose low is ``row`` (stored or trivial), or None."""
        o = self.pivots.get(row)
        if o is not None:
            return o
        if self.apparent:
            return self.filtration.apparent_cofacet(self.dim - 1, row)
        return None

    def column(self, key: int) -> tuple:
        col = self.columns.get(key)
        if col is not None:
            return col
        if self.apparent and self.filtration.apparent_cofacet(
            self.dim - 1, self.filtration.max_facet(self.dim, key)
        ) == key:
            return tuple(self.filtration.boundary(self.dim, key))
        return ()

    def is_stored(self, key: int) -> bool:
        return key in self.columns

    def reduce(self, key: int, col: set) -> int:
        """Reduce ``col`` in place against the current columns; return #additions."""
        f = self.filtration
        dim = self.dim
        pivots = self.pivots
        columns = self.columns
        n_ops = 0
        while col:
            low = max(col)
            o = pivots.get(low)
            if o is not None and o < key:
                col.symmetric_difference_update(columns[o])
                n_ops += 1
                continue
            if self.apparent and o is None:
                t = f.apparent_cofacet(dim - 1, low)
                if t is not None and t != key:
                    col.symmetric_difference_update(f.boundary(dim, t))
                    n_ops += 1
                    continue
            break
        return n_ops

    def insert(self, key: int, col) -> None:
        tup = tuple(sorted(col))
        if tup:
            low = tup[-1]
            if low in self.pivots:
                raise DualityError(f"row {low} already owned by column {self.pivots[low]}")
            self.pivots[low] = key
        self.columns[key] = tup


def batch_reduce(columns, R: ReducedMatrix, batch_size: int = 1000, n_jobs: int = 1) -> ReducedMatrix:
    """Serial-parallel reduction of ``(key, chain)`` columns into ``R``.

    Each batch is first reduced column by column against the frozen ``R``
    (independent work), then the survivors are reduced against each other from
    left to right and merged.  The result equals a fully serial reduction.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    cols = sorted(((k, set(c)) for k, c in columns), key=lambda kc: kc[0])

    def phase1(item):
        key, col = item
        R.reduce(key, col)
        return key, col

    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        for start in range(0, len(cols), batch_size):
            batch = cols[start:start + batch_size]
            if pool is not None:
                batch = list(pool.map(phase1, batch))
            else:
                batch = [phase1(item) for item in batch]
            for key, col in batch:
                R.reduce(key, col)
                R.insert(key, col)
    finally:
        if pool is not None:
            pool.shutdown()
    return R


def zero_dim_pairs(filtration: Filtration) -> tuple:
    """H0 pairs by union-find (elder rule); returns ``(pairs, death_edges)``."""
    n = filtration.n
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = []
    deaths = []
    for k in range(filtration.n_edges):
        a, b = find(filtration.edge_u[k]), find(filtration.edge_v[k])
        if a == b:
            continue
        # roots are the oldest vertex of their component; the younger one dies
        young, old = (a, b) if a > b else (b, a)
        parent[young] = old
        deaths.append(k)
        pairs.append(
            PersistencePair(0, SimplexId(0, young), SimplexId(1, k), 0.0, filtration.edge_diam[k])
        )
    for v in range(n):
        if find(v) == v:
            pairs.append(PersistencePair(0, SimplexId(0, v), None, 0.0, math.inf))
    return pairs, deaths


def detect_trivial_pair_h1(filtration: Filtration, edge: int):
    """Triangle ``t`` with ``(edge, t)`` a trivial pair, else None."""
    return filtration.apparent_cofacet(1, edge)


def detect_trivial_pair_h2(filtration: Filtration, triangle: int):
    """Tetrahedron ``h`` with ``(triangle, h)`` a trivial pair, else None."""
    return filtration.apparent_cofacet(2, triangle)


@dataclass
class CohomologyResult:
    dim: int
    pairs: list                       # nontrivial finite pairs and essential classes
    trivial: list                     # trivial pairs, kept only for the diagram
    columns: dict                     # reduced coboundary columns, keyed by birth simplex
    pivots: dict                      # death simplex -> birth simplex (nontrivial only)
    n_reductions: int = 0


def reduce_coboundary(filtration: Filtration, dim: int, cleared=(), keep_trivial: bool = True) -> CohomologyResult:
    """Reduce coboundary columns of all ``dim``-simplices, last simplex first.

    ``cleared`` holds simplices already known to be deaths one dimension
    down; their columns reduce to zero and are skipped.
    """
    f = filtration
    if dim + 1 > f.max_dim:
        raise ValueError(f"filtration must reach dimension {dim + 1}")
    cleared = set(cleared)
    pivots: dict = {}
    columns: dict = {}
    pairs = []
    trivial = []
    n_ops = 0
    diam = f.diameter
    for s in reversed(list(f.simplices(dim))):
        if s in cleared:
            continue
        cof = f.cofacets(dim, s)
        if not cof:
            pairs.append(PersistencePair(dim, SimplexId(dim, s), None, diam(dim, s), math.inf))
            continue
        if f.max_facet(dim + 1, cof[0]) == s:
            if keep_trivial:
                b = diam(dim, s)
                trivial.append(
                    PersistencePair(dim, SimplexId(dim, s), SimplexId(dim + 1, cof[0]), b, diam(dim + 1, cof[0]), True)
                )
            continue
        col = set(cof)
        while col:
            low = min(col)
            o = pivots.get(low)
            if o is not None:
                col.symmetric_difference_update(columns[o])
                n_ops += 1
                continue
            g = f.max_facet(dim + 1, low)
            if g > s and g not in cleared and f.apparent_cofacet(dim, g) == low:
                col.symmetric_difference_update(f.cofacets(dim, g))
                n_ops += 1
                continue
            break
        if col:
            low = min(col)
            pivots[low] = s
            columns[s] = frozenset(col)
            pairs.append(
                PersistencePair(dim, SimplexId(dim, s), SimplexId(dim + 1, low), diam(dim, s), diam(dim + 1, low))
            )
        else:
            pairs.append(PersistencePair(dim, SimplexId(dim, s), None, diam(dim, s), math.inf))
    pairs.reverse()
    trivial.reverse()
    return CohomologyResult(dim, pairs, trivial, columns, pivots, n_ops)


def reduce_boundary_targeted(filtration: Filtration, dim: int, deaths, batch_size: int = 1000,
                             expected=None, n_jobs: int = 1) -> ReducedMatrix:
    """Reduce the boundary columns of exactly the simplices in ``deaths``.

    ``expected`` maps each death simplex to the birth simplex cohomology paired
    it with; a different pivot raises :class:`DualityError`.
    """
    R = ReducedMatrix(filtration, dim)
    cols = ((k, filtration.boundary(dim, k)) for k in sorted(deaths))
    batch_reduce(cols, R, batch_size=batch_size, n_jobs=n_jobs)
    if expected is not None:
        for death, birth in expected.items():
            col = R.columns.get(death)
            if not col or col[-1] != birth:
                raise DualityError(
                    f"R column of {dim}-simplex {death} has low {col[-1] if col else None}, expected {birth}"
                )
    return R


@dataclass
class PersistenceResult:
    filtration: Filtration
    diagram: PersistenceDiagram
    cohomology: dict = field(default_factory=dict)     # dim -> CohomologyResult
    reduced: dict = field(default_factory=dict)        # column dim -> ReducedMatrix
    h0_deaths: list = field(default_factory=list)

    def nontrivial_pairs(self, dim: int) -> list:
        if dim == 0:
            return [p for p in self.diagram.pairs if p.dim == 0]
        return list(self.cohomology[dim].pairs)

    def birth_simplices(self, dim: int, include_trivial: bool = False) -> list:
        """Birth simplices of ``dim`` features in filtration order.

        By default only nontrivial (finite or essential) features count; with
        ``include_trivial`` every positive simplex is returned.
        """
        keys = {p.birth_simplex.key for p in self.nontrivial_pairs(dim)}
        if include_trivial:
            f = self.filtration
            keys.update(
                s for s in f.simplices(dim)
                if f.apparent_cofacet(dim, s) is not None
                and f.max_facet(dim + 1, f.apparent_cofacet(dim, s)) == s
            )
        return sorted(keys)

    def death_of(self, dim: int, birth_key: int) -> float:
        for p in self.nontrivial_pairs(dim):
            if p.birth_simplex.key == birth_key:
                return p.death
        t = self.filtration.apparent_cofacet(dim, birth_key)
        if t is not None:
            return self.filtration.diameter(dim + 1, t)
        raise KeyError(birth_key)

    def representative(self, pair: PersistencePair) -> tuple:
        """Column R(death) for a finite pair: a cycle of ``pair.dim``-simplices."""
        if pair.essential:
            raise ValueError("essential classes have no R column")
        return self.reduced[pair.dim + 1].column(pair.death_simplex.key)


def compute_persistence(filtration: Filtration, dims=(1, 2), batch_size: int = 1000,
                        reduce_boundaries: bool = True, keep_trivial: bool = True,
                        n_jobs: int = 1) -> PersistenceResult:
    """Diagram in dimensions 0 and ``dims``; optionally the boundary columns R.

    ``reduced[d]`` holds R for boundary columns of d-simplices: ``reduced[1]``
    (edges) serves H1 birth-cycles, ``reduced[2]`` holds H1 representatives
    and serves H2 birth-cycles, ``reduced[3]`` holds H2 representatives.
    """
    dims = sorted(set(dims))
    for d in dims:
        if d not in (1, 2):
            raise ValueError("homology dimensions must be 1 and/or 2")
        if d + 1 > filtration.max_dim:
            raise ValueError(f"H{d} needs a filtration up to dimension {d + 1}")
    pairs0, deaths0 = zero_dim_pairs(filtration)
    all_pairs = list(pairs0)
    result = PersistenceResult(filtration, PersistenceDiagram(), h0_deaths=deaths0)
    cleared = set(deaths0)
    top = max(dims) if dims else 0
    for d in range(1, top + 1):
        coh = reduce_coboundary(filtration, d, cleared, keep_trivial=keep_trivial)
        result.cohomology[d] = coh
        if d in dims:
            all_pairs.extend(coh.pairs)
            all_pairs.extend(coh.trivial)
        # deaths in dimension d+1 are cleared when reducing dimension d+1
        cleared = set(coh.pivots)
        if d + 1 <= top:
            cleared.update(_apparent_deaths(filtration, d))
    result.diagram = PersistenceDiagram(all_pairs)
    if reduce_boundaries:
        if 1 in dims or 2 in dims:
            h0 = {p.death_simplex.key: p.birth_simplex.key for p in pairs0 if not p.essential}
            result.reduced[1] = reduce_boundary_targeted(
                filtration, 1, deaths0, batch_size, expected=h0, n_jobs=n_jobs
            )
        for d in range(1, top + 1):
            coh = result.cohomology[d]
            result.reduced[d + 1] = reduce_boundary_targeted(
                filtration, d + 1, coh.pivots.keys(), batch_size, expected=coh.pivots, n_jobs=n_jobs
            )
    return result


def _apparent_deaths(filtration: Filtration, dim: int) -> set:
    """(dim+1)-simplices that are the death of a trivial pair."""
    out = set()
    for s in filtration.simplices(dim + 1):
        g = filtration.max_facet(dim + 1, s)
        if filtration.apparent_cofacet(dim, g) == s:
            out.add(s)
    return out
