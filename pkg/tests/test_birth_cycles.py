import math

import numpy as np
import pytest

from oracles import gf2_rank
from tightcycles import Filtration, SparseMetricSpace, compute_persistence
from tightcycles.birth_cycles import (BirthCycleBuilder, RecursionBudgetError, birth_cycles,
                                      compute_all_birth_cycles, compute_birth_cycle)
from tightcycles.refinement import is_cycle


def result_for(seed, n=12, tau=0.6, dims=(1, 2)):
    X = np.random.default_rng(seed).uniform(0, 1, (n, 3))
    f = Filtration(SparseMetricSpace.from_points(X, tau), 3)
    return compute_persistence(f, dims=dims)


def test_square_prefix_birth_cycles(square_prefix):
    res = compute_persistence(square_prefix, dims=(1,))
    got = {c.birth_simplex: c.chain for c in birth_cycles(res, 1)}
    # the five edges have keys 0..4 in filtration order
    assert got == {3: (0, 1, 2, 3), 4: (0, 1, 4)}


def test_square_prefix_single(square_prefix):
    res = compute_persistence(square_prefix, dims=(1,))
    c = compute_birth_cycle(res, 1, 3)
    assert c.chain == (0, 1, 2, 3) and c.birth == 2.5 and math.isinf(c.death)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("dim", [1, 2])
def test_birth_cycles_are_cycles_ending_at_birth(seed, dim):
    res = result_for(seed)
    f = res.filtration
    for c in birth_cycles(res, dim, include_trivial=True):
        assert is_cycle(f, dim, c.chain)
        assert max(c.chain) == c.birth_simplex


@pytest.mark.parametrize("seed", range(5))
def test_essential_birth_cycles_independent_of_boundaries(seed):
    res = result_for(seed, n=10, tau=0.5, dims=(1,))
    f = res.filtration
    bds = [set(f.boundary(2, t)) for t in f.simplices(2)]
    ess = [set(c.chain) for c in birth_cycles(res, 1) if math.isinf(c.death)]
    assert gf2_rank(bds + ess) == gf2_rank(bds) + len(ess)


@pytest.mark.parametrize("seed", range(4))
def test_cache_does_not_change_results(seed):
    res = result_for(seed, n=14, tau=0.7)
    for dim in (1, 2):
        a = BirthCycleBuilder(res.filtration, res.reduced[dim], cache=False)
        b = BirthCycleBuilder(res.filtration, res.reduced[dim], n_u_threshold=0, n_r_threshold=0)
        for s in res.birth_simplices(dim):
            assert a.compute(s) == b.compute(s)


def test_recursion_budget():
    res = result_for(1, n=14, tau=0.8)
    b = BirthCycleBuilder(res.filtration, res.reduced[1], max_steps=0)
    with pytest.raises(RecursionBudgetError):
        for s in res.birth_simplices(1):
            b.compute(s)


def test_streaming_sink_counts():
    res = result_for(3)
    seen = []
    n = compute_all_birth_cycles(res, 1, sink=seen.append, include_trivial=False)
    assert n == len(seen) == len(res.nontrivial_pairs(1))
    assert [c.birth_simplex for c in seen] == sorted(c.birth_simplex for c in seen)
