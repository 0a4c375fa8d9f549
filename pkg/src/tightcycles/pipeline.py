"""End-to-end stages shared by the command line and the estimators."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .birth_cycles import BirthCycle, BirthCycleBuilder
from .complex import Filtration, SparseMetricSpace
from .covers import (SignificanceCounter, SignificanceParams, build_covers, contract_covers,
                     cover_intersection_graph, cover_of, max_persistence_estimate)
from .persistence import PersistenceResult, compute_persistence
from .refinement import is_cycle, shorten_cycles, smooth_cycle, split_disconnected
from .stochastic import run_refinement

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cycle:
    dim: int
    birth: float
    simplices: tuple     # sorted vertex tuples

    @property
    def vertices(self) -> tuple:
        return tuple(sorted({v for s in self.simplices for v in s}))

    def __len__(self):
        return len(self.simplices)


def to_cycle(f: Filtration, dim: int, chain) -> Cycle:
    simplices = tuple(sorted(f.vertices(dim, k) for k in chain))
    birth = max((f.diameter(dim, k) for k in chain), default=0.0)
    return Cycle(dim, birth, simplices)


def persistence(space: SparseMetricSpace, dims=(1, 2), batch_size: int = 1000,
                reduce_boundaries: bool = True, n_jobs: int = 1) -> PersistenceResult:
    top = max(dims) if dims else 0
    return compute_persistence(Filtration(space, top + 1), dims=dims, batch_size=batch_size,
                               reduce_boundaries=reduce_boundaries, n_jobs=n_jobs)


@dataclass
class CycleStages:
    dim: int
    birth: list = field(default_factory=list)          # BirthCycle
    shortened: list = field(default_factory=list)      # key chains
    smoothed: list = field(default_factory=list)       # key chains
    nonsignificant: list = field(default_factory=list)  # (chain, estimate)
    degenerate: list = field(default_factory=list)     # chains smoothed away


def cycle_stages(result: PersistenceResult, dim: int, params: SignificanceParams,
                 X: np.ndarray | None = None, include_trivial: bool = True,
                 smooth: bool = True, builder_kwargs: dict | None = None) -> CycleStages:
    """Birth-cycles, then shortening, splitting, the max-persistence filter and smoothing.

    Shortening starts from the birth-cycles of nontrivial features born by
    ``tau_u``; later features cannot be significant, and leaving them out
    keeps every shortened simplex inside the ``tau_u`` complex.  Trivial
    features have zero persistence.  All birth cycles are reported when
    ``include_trivial`` is set.
    """
    f = result.filtration
    out = CycleStages(dim)
    builder = BirthCycleBuilder(f, result.reduced[dim], **(builder_kwargs or {}))
    deaths = {p.birth_simplex.key: p.death for p in result.nontrivial_pairs(dim)}
    for s in result.birth_simplices(dim, include_trivial):
        death = deaths.get(s)
        if death is None:
            death = result.death_of(dim, s)
        out.birth.append(BirthCycle(dim, s, builder.compute(s), f.diameter(dim, s), death))

    basis = [c.chain for c in out.birth if c.birth_simplex in deaths and c.birth <= params.tau_u]
    out.shortened = shorten_cycles(basis, dim)

    pieces = []
    for chain in out.shortened:
        pieces.extend(split_disconnected(f, chain, dim))
    kept = []
    for chain in pieces:
        est = max_persistence_estimate(f, dim, chain, X)
        if est < params.epsilon:
            out.nonsignificant.append((chain, est))
        else:
            kept.append(chain)
    for chain in kept:
        if not smooth:
            out.smoothed.append(tuple(chain))
            continue
        new, degenerate = smooth_cycle(f, chain, dim, params.tau_u)
        if degenerate:
            out.degenerate.append(tuple(chain))
        else:
            out.smoothed.append(new)
    out.smoothed = sorted(set(out.smoothed))
    for chain in out.smoothed:
        assert is_cycle(f, dim, chain)
    return out


@dataclass
class Localization:
    dim: int
    covers: list
    contracted: list
    contraction_log: list
    refined: list                      # RefinementResult per contracted cover
    graph: nx.Graph
    minimal_covers: list = field(default_factory=list)

    def minimal_cycles(self) -> list:
        out = []
        for r in self.refined:
            for chain in r.selection.representatives:
                out.append(chain)
        return out


def localize(X: np.ndarray, cycles, params: SignificanceParams, dim: int, n_pert: int = 1,
             n_perm: int = 1, seed: int = 0, budget: float = 5e7, m_max: int = 20,
             delta: float | None = None) -> Localization:
    """Covers of the given cycles, their contraction and per-cover refinement.

    ``cycles`` are vertex sets (or :class:`Cycle` objects) in the index
    space of ``X``.
    """
    vsets = [c.vertices if isinstance(c, Cycle) else tuple(sorted(set(c))) for c in cycles]
    counter = SignificanceCounter(X, params, dim)
    covers = build_covers(vsets, X, counter)
    log: list = []
    contracted = contract_covers(covers, counter, dim, log) if covers else []
    refined = []
    minimal = []
    for i, c in enumerate(contracted):
        r = run_refinement(X, c.members, params, dim, n_pert=n_pert, n_perm=n_perm, seed=seed,
                           cover_id=i, delta=delta, budget=budget, m_max=m_max)
        refined.append(r)
        verts = {v for chain in r.selection.representatives for s in chain for v in s}
        if verts:
            mc = cover_of(verts, X)
            mc.n_sig = counter(mc.members)
            minimal.append(mc)
    return Localization(dim, covers, contracted, log, refined, cover_intersection_graph(contracted), minimal)


def significant_count(result: PersistenceResult, dim: int, params: SignificanceParams) -> int:
    return len(result.diagram.significant(dim, params.tau_u, params.epsilon, params.tau))


def finite_or_inf(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))
