import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from conftest import circle
from oracles import dense_distances, naive_diagram
from tightcycles import Filtration, SparseMetricSpace, compute_persistence
from tightcycles.covers import SignificanceParams, count_significant
from tightcycles.stochastic import (calibrate_delta, distinct_permutations, nn_radius, perturb_points,
                                    run_refinement, select_minimal_representatives, trial_rng, uniform_ball)


class TestPerturbation:
    def test_zero_radius_is_identity(self):
        X = np.random.default_rng(0).uniform(size=(10, 3))
        assert np.array_equal(perturb_points(X, 0.0, trial_rng(1)), X)

    @given(st.integers(0, 500), st.floats(0.001, 0.5))
    def test_displacement_bounded(self, seed, delta):
        X = np.random.default_rng(seed).uniform(size=(25, 3))
        r = nn_radius(X, delta)
        Y = perturb_points(X, r, trial_rng(seed))
        assert np.all(np.linalg.norm(Y - X, axis=1) <= r + 1e-12)
        assert np.all(r <= delta)

    def test_octants_uniform(self):
        P = uniform_ball(8000, 3, trial_rng(3))
        assert np.all(np.einsum("ij,ij->i", P, P) <= 1)
        octant = (P > 0).astype(int) @ [1, 2, 4]
        counts = np.bincount(octant, minlength=8)
        assert sps.chisquare(counts).pvalue > 1e-3

    def test_streams_reproducible(self):
        a = trial_rng(5, 1, 2).uniform(size=4)
        b = trial_rng(5, 1, 2).uniform(size=4)
        c = trial_rng(5, 1, 3).uniform(size=4)
        assert np.array_equal(a, b) and not np.array_equal(a, c)


class TestCalibration:
    def test_first_halving_accepted_on_clean_circle(self):
        X = circle(16, 1.0)
        p = SignificanceParams(0.7, 0.6)   # spacing 0.39 + 2 * 0.1 stays below 0.7
        cal = calibrate_delta(X, p, 1, n_pert=3, seed=2)
        assert cal.m == 1 and cal.delta == pytest.approx(p.epsilon / 6)
        assert len(cal.embeddings) == 3
        for Y in cal.embeddings:
            assert count_significant(Y, range(len(Y)), p, 1) == 1

    def test_no_perturbations(self):
        X = circle(8, 1.0)
        cal = calibrate_delta(X, SignificanceParams(1.0, 0.5), 1, n_pert=0)
        assert cal.delta == 0 and cal.embeddings[0] is X


def tie_grid(k=4):
    return np.array([[i, j] for i in range(k) for j in range(k)], float)


class TestPermutations:
    def test_identity_first_and_distinct(self):
        f = Filtration(SparseMetricSpace.from_points(tie_grid(), 1.5), 2)
        perms = distinct_permutations(f, 10, 0)
        assert np.array_equal(perms[0].edge_order, f.edge_order)
        keys = {tuple(g.edge_order.tolist()) for g in perms}
        assert len(keys) == len(perms)

    def test_small_run_dedup_bounded_by_factorial(self):
        # a single run of 3 tied edges: at most 3! orders
        sp = SparseMetricSpace.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
        f = Filtration(sp, 2)
        assert len(distinct_permutations(f, 50, 1)) <= len(list(permutations(range(3))))

    def test_no_ties_only_identity(self):
        X = np.random.default_rng(1).uniform(size=(8, 2))
        f = Filtration(SparseMetricSpace.from_points(X), 2)
        assert len(distinct_permutations(f, 5)) == 1

    @pytest.mark.parametrize("seed", range(3))
    def test_diagram_invariant(self, seed):
        X = tie_grid()
        sp = SparseMetricSpace.from_points(X, 2.0)
        f = Filtration(sp, 3)
        ref = sorted(compute_persistence(f, dims=(1, 2)).diagram.values())
        assert ref == naive_diagram(dense_distances(sp), 2.0)
        for g in distinct_permutations(f, 6, seed):
            assert sorted(compute_persistence(g, dims=(1, 2)).diagram.values()) == ref


class TestSelection:
    def test_strictly_smaller_wins(self):
        a = [tuple(range(9)), tuple(range(4))]
        b = [tuple(range(8)), tuple(range(10, 15))]
        sel = select_minimal_representatives([a, b])
        assert sel.tied == [1]
        assert sel.representatives == sorted(b)

    def test_tie_with_different_sets_gives_union(self):
        a = [tuple(range(8)), tuple(range(20, 25))]
        b = [tuple(range(1, 9)), tuple(range(20, 25))]
        sel = select_minimal_representatives([a, b])
        assert sel.tied == [0, 1]
        assert sel.representatives == [tuple(sorted(set(range(9)) | set(range(20, 25))))]

    def test_tie_with_same_sets(self):
        a = [(1, 2, 3)]
        sel = select_minimal_representatives([a, [(3, 2, 1)]])
        assert sel.representatives == [(1, 2, 3)]

    def test_padding(self):
        sel = select_minimal_representatives([[(1, 2, 3)], [(1, 2, 3), (4, 5)]])
        assert sel.tied == [0]

    def test_empty(self):
        assert select_minimal_representatives([]).representatives == []


class TestRunRefinement:
    def test_noisy_circle(self):
        rng = np.random.default_rng(4)
        X = circle(24, 2.0, noise=0.03, rng=rng)
        p = SignificanceParams(0.7, 0.8)
        res = run_refinement(X, range(24), p, 1, n_pert=2, n_perm=2, seed=1)
        assert res.n_trials >= 1 and res.n_failed == 0
        (rep,) = res.selection.best
        verts = {v for e in rep for v in e}
        assert len(verts) >= 20
        # every edge is a cycle edge: each vertex has even degree
        deg = np.zeros(24, int)
        for a, b in rep:
            deg[a] += 1
            deg[b] += 1
        assert np.all(deg % 2 == 0)

    def test_deterministic(self):
        X = circle(16, 1.5, noise=0.02, rng=np.random.default_rng(0))
        p = SignificanceParams(0.8, 0.5)
        a = run_refinement(X, range(16), p, 1, n_pert=2, n_perm=2, seed=7)
        b = run_refinement(X, range(16), p, 1, n_pert=2, n_perm=2, seed=7)
        assert a.selection.representatives == b.selection.representatives
        assert a.calibration.delta == b.calibration.delta

    def test_member_ids_are_global(self):
        X = np.vstack([[[50.0, 50.0]] * 1, circle(12, 1.0)])
        p = SignificanceParams(0.6, 0.5)
        res = run_refinement(X, range(1, 13), p, 1, delta=0)
        verts = {v for c in res.selection.representatives for e in c for v in e}
        assert verts <= set(range(1, 13)) and len(verts) == 12

    def test_budget_fallback(self):
        X = circle(12, 1.0)
        p = SignificanceParams(0.6, 0.5)
        res = run_refinement(X, range(12), p, 1, delta=0, budget=1)
        assert res.used_fallback
        assert len(res.selection.representatives) == 1
        assert math.isclose(len(res.selection.representatives[0]), 12)
