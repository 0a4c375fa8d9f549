"""Birth-cycles: columns V(σ) at birth simplices, rebuilt on demand from R.

V(σ) is the record of reductions that turn ∂σ into R(σ).  It is recovered
by reducing ∂σ against R and, for every stored column R(σ') used, appending
V(σ') recursively.  Only a few frequently requested, expensive columns are
kept in memory; everything else is recomputed.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

from .complex import Filtration
from .persistence import PersistenceResult, ReducedMatrix

logger = logging.getLogger(__name__)


class RecursionBudgetError(RuntimeError):
    """The recursive reconstruction of V(σ) exceeded its step budget."""


@dataclass(frozen=True)
class BirthCycle:
    dim: int
    birth_simplex: int
    chain: tuple
    birth: float
    death: float = float("inf")

    def __len__(self):
        return len(self.chain)


@dataclass
class VCacheEntry:
    simplex: int
    chain: tuple
    n_r: int
    n_u: int


class BirthCycleBuilder:
    """Computes V(σ) for ``dim``-simplices against the reduced matrix ``R``.

    ``R`` must hold the reduced boundary columns of ``dim``-simplices
    (``result.reduced[dim]``).  A column V(σ') enters the cache once it has
    been requested more than ``n_u_threshold`` times and took more than
    ``n_r_threshold`` reductions to build.
    """

    def __init__(self, filtration: Filtration, R: ReducedMatrix, n_u_threshold: int = 2,
                 n_r_threshold: int = 64, max_steps: int = 10_000_000, cache: bool = True):
        if R.dim < 1:
            raise ValueError("R must hold columns of dimension >= 1")
        self.filtration = filtration
        self.R = R
        self.dim = R.dim
        self.n_u_threshold = n_u_threshold
        self.n_r_threshold = n_r_threshold
        self.max_steps = max_steps
        self.use_cache = cache
        self.cache: dict = {}
        self.n_u: Counter = Counter()
        self.n_r: dict = {}

    def _trace(self, sigma: int):
        """Reduce ∂σ against R; return (trivial columns used, stored columns used, #adds)."""
        f = self.filtration
        R = self.R
        r = set(f.boundary(self.dim, sigma))
        trivial = []
        stored = []
        n_ops = 0
        while r:
            low = max(r)
            o = R.pivots.get(low)
            if o is not None:
                r.symmetric_difference_update(R.columns[o])
                n_ops += 1
                if o == sigma:
                    break
                stored.append(o)
                continue
            t = f.apparent_cofacet(self.dim - 1, low) if R.apparent else None
            if t is None:
                raise ValueError(f"{self.dim}-simplex {sigma}: row {low} has no pivot column")
            r.symmetric_difference_update(f.boundary(self.dim, t))
            n_ops += 1
            if t == sigma:
                break
            trivial.append(t)
        if r:
            raise ValueError(f"boundary of {sigma} did not reduce to zero")
        return trivial, stored, n_ops

    def compute(self, sigma: int) -> tuple:
        """Sorted chain V(σ) (simplices with odd coefficient)."""
        log = [sigma]
        ops = 0
        steps = 0
        # stack items: ("enter", simplex) or ("exit", simplex, log_start, ops_start)
        stack = []
        trivial, stored, n = self._trace(sigma)
        ops += n
        log.extend(trivial)
        for o in reversed(stored):
            stack.append(("enter", o))
        while stack:
            item = stack.pop()
            if item[0] == "exit":
                _, s, start, ops_start = item
                n_r = ops - ops_start
                self.n_r[s] = n_r
                if (self.use_cache and self.n_u[s] > self.n_u_threshold
                        and n_r > self.n_r_threshold and s not in self.cache):
                    self.cache[s] = _odd(log[start:])
                continue
            s = item[1]
            self.n_u[s] += 1
            cached = self.cache.get(s)
            if cached is not None:
                log.extend(cached)
                ops += self.n_r.get(s, 0)
                continue
            steps += 1
            if steps > self.max_steps:
                raise RecursionBudgetError(
                    f"V({sigma}) for {self.dim}-simplex exceeded {self.max_steps} recursion steps"
                )
            stack.append(("exit", s, len(log), ops))
            log.append(s)
            trivial, stored, n = self._trace(s)
            ops += n
            log.extend(trivial)
            for o in reversed(stored):
                stack.append(("enter", o))
        return _odd(log)

    def cache_entries(self) -> list:
        return [VCacheEntry(s, c, self.n_r.get(s, 0), self.n_u[s]) for s, c in self.cache.items()]


def _odd(items) -> tuple:
    return tuple(sorted(k for k, c in Counter(items).items() if c & 1))


def compute_birth_cycle(result: PersistenceResult, dim: int, sigma: int, **kwargs) -> BirthCycle:
    f = result.filtration
    builder = BirthCycleBuilder(f, result.reduced[dim], **kwargs)
    death = result.death_of(dim, sigma)
    return BirthCycle(dim, sigma, builder.compute(sigma), f.diameter(dim, sigma), death)


def compute_all_birth_cycles(result: PersistenceResult, dim: int, sink=None,
                             include_trivial: bool = True, **kwargs) -> int:
    """Emit the birth-cycle of every ``dim`` feature to ``sink``.

    Cycles are produced in birth filtration order and handed to ``sink`` (a
    callable) one at a time; with ``sink=None`` they are discarded and only
    counted.  ``include_trivial=False`` restricts the output to features from
    nontrivial pairs, which is what shortening starts from.
    """
    f = result.filtration
    builder = BirthCycleBuilder(f, result.reduced[dim], **kwargs)
    deaths = _death_lookup(result, dim)
    count = 0
    for sigma in result.birth_simplices(dim, include_trivial):
        death = deaths.get(sigma)
        if death is None:
            death = result.death_of(dim, sigma)
        cyc = BirthCycle(dim, sigma, builder.compute(sigma), f.diameter(dim, sigma), death)
        if sink is not None:
            sink(cyc)
        count += 1
    logger.debug("H%d: %d birth-cycles, %d cached V columns", dim, count, len(builder.cache))
    return count


def birth_cycles(result: PersistenceResult, dim: int, **kwargs) -> list:
    out = []
    compute_all_birth_cycles(result, dim, out.append, **kwargs)
    return out


def _death_lookup(result: PersistenceResult, dim: int) -> dict:
    return {p.birth_simplex.key: p.death for p in result.nontrivial_pairs(dim)}
