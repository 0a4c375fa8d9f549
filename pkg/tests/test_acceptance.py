"""End-to-end acceptance checks; each test reports one PASS/FAIL line."""

import math
import resource
import time
from itertools import combinations

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import fib_sphere, report_criterion
from oracles import any_pair_shortens, dense_distances, gf2_boundary, naive_diagram
from tightcycles import Filtration, SparseMetricSpace, compute_persistence
from tightcycles.birth_cycles import birth_cycles
from tightcycles.covers import SignificanceParams, cover_of
from tightcycles.persistence import PersistenceDiagram, PersistencePair
from tightcycles.pipeline import cycle_stages, localize, persistence, to_cycle
from tightcycles.refinement import max_pair_reduction, shorten_cycles, smooth_cycle
from tightcycles.stats import (features_of_cover, l0_distance, pseudo_p_value, spatial_sample,
                               spherical_uniformity)
from tightcycles.stochastic import distinct_permutations, trial_rng


def oracle_instances():
    """200 random clouds, n <= 25, with finite and infinite thresholds."""
    out = []
    for i in range(200):
        rng = np.random.default_rng(1000 + i)
        n = 4 + i % 22
        d = 2 + i % 2
        tau = math.inf if i % 2 == 0 else float(rng.uniform(0.3, 0.7))
        out.append((rng.uniform(0, 1, (n, d)), tau))
    return out


def test_criterion_1_worked_example(square_prefix):
    t0 = time.perf_counter()
    f = square_prefix
    res = compute_persistence(f, dims=(1,))
    diagram = sorted((b, d) for _, b, d in res.diagram.values(1))
    tri = f.key_of((0, 1, 2))
    r_col = res.reduced[2].column(tri)
    cycles = sorted(c.chain for c in birth_cycles(res, 1))
    elapsed = time.perf_counter() - t0
    # edges have keys 0..4 in filtration order; the triangle (0,1,2) kills the 2.75 class
    ok = (diagram == [(2.5, math.inf), (2.75, 2.75)] and r_col == (0, 1, 4)
          and cycles == [(0, 1, 2, 3), (0, 1, 4)] and elapsed < 1.0)
    report_criterion(1, ok, f"diagram={diagram}, R(triangle) keys={r_col}, {elapsed * 1000:.1f} ms")
    assert ok


def test_criterion_2_and_5_oracle_and_duality():
    t0 = time.perf_counter()
    mismatches, duality_failures = [], []
    for i, (X, tau) in enumerate(oracle_instances()):
        sp = SparseMetricSpace.from_points(X, tau)
        f = Filtration(sp, 3)
        res = compute_persistence(f, dims=(1, 2), reduce_boundaries=True)
        if sorted(res.diagram.values()) != naive_diagram(dense_distances(sp), tau):
            mismatches.append(i)
        for d in (1, 2):
            R = res.reduced[d + 1]
            lows = {k: col[-1] for k, col in R.columns.items() if col}
            pairs_ok = all(
                R.column(p.death_simplex.key)[-1] == p.birth_simplex.key
                for p in res.diagram.in_dim(d) if not p.essential)
            if lows != res.cohomology[d].pivots or len(set(lows.values())) != len(lows) or not pairs_ok:
                duality_failures.append((i, d))
    elapsed = time.perf_counter() - t0
    ok2 = not mismatches and elapsed < 120
    ok5 = not duality_failures
    report_criterion(2, ok2, f"200 clouds, {len(mismatches)} mismatches, {elapsed:.1f} s")
    report_criterion(5, ok5, f"{len(duality_failures)} pivot disagreements over 400 reductions")
    assert ok2 and ok5


def test_criterion_3_cycle_validity():
    failures = []
    runs = 0
    for seed in range(12):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 1, (28, 3))
        params = SignificanceParams(0.35, 0.1)
        sp = SparseMetricSpace.from_points(X, params.tau)
        res = persistence(sp, (1, 2))
        f = res.filtration
        for dim in (1, 2):
            runs += 1
            st = cycle_stages(res, dim, params, X=X, include_trivial=True)
            chains = [c.chain for c in st.birth] + list(st.shortened) + list(st.smoothed)
            for chain in chains:
                if gf2_boundary([f.vertices(dim, k) for k in chain]):
                    failures.append((seed, dim, "boundary"))
            for chain in st.shortened:
                moves = []
                smooth_cycle(f, chain, dim, params.tau_u, moves)
                for m in moves:
                    if max(sp.distance(a, b) for a, b in combinations(m, 2)) > params.tau_u:
                        failures.append((seed, dim, "move", m))
    ok = not failures
    report_criterion(3, ok, f"{runs} randomized runs, {len(failures)} violations")
    assert ok


def test_criterion_4_shortening():
    failures = []
    for seed in range(40):
        rng = np.random.default_rng(seed)
        universe = int(rng.integers(10, 60))
        cycles = [set(rng.choice(universe, size=int(rng.integers(2, universe // 2 + 2)), replace=False).tolist())
                  for _ in range(int(rng.integers(2, 25)))]
        for dim in (1, 2):
            hist = []
            out = shorten_cycles(cycles, dim, history=hist)
            monotone = all(b <= a for a, b in zip(hist, hist[1:]))
            if not monotone or max_pair_reduction(out) != 0 or any_pair_shortens(out):
                failures.append((seed, dim))
    ok = not failures
    report_criterion(4, ok, f"80 randomized cycle sets, {len(failures)} failures")
    assert ok


def test_criterion_6_permutation_invariance():
    X = np.array([[i, j, k] for i in range(3) for j in range(3) for k in range(2)], float)
    sp = SparseMetricSpace.from_points(X, 1.5)
    f = Filtration(sp, 3)
    ref = sorted(compute_persistence(f, dims=(1, 2)).diagram.values())
    perms = distinct_permutations(f, 30, 11)
    diffs = sum(sorted(compute_persistence(g, dims=(1, 2)).diagram.values()) != ref for g in perms)
    ok = len(perms) >= 20 and diffs == 0 and ref == naive_diagram(dense_distances(sp), 1.5)
    report_criterion(6, ok, f"{len(perms)} distinct tie orders, {diffs} differing diagrams")
    assert ok


def test_criterion_7_synthetic_localization():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    S = fib_sphere(60)
    B = rng.uniform(-5, 5, (2000, 3))
    B = B[np.linalg.norm(B, axis=1) > 1.6][:500]
    X = np.vstack([S, B])
    params = SignificanceParams(0.7, 0.5)
    res = persistence(SparseMetricSpace.from_points(X, params.tau), (2,))
    st = cycle_stages(res, 2, params, X=X, include_trivial=False)
    cycles = [to_cycle(res.filtration, 2, c) for c in st.smoothed]
    loc = localize(X, cycles, params, 2, n_pert=2, n_perm=2, seed=0)
    n_sig = sum(c.n_sig for c in loc.contracted)
    reps = loc.minimal_cycles()
    centered = [c for c in loc.contracted if c.contains_point(np.zeros(3))]
    frac = max((c.size for c in loc.minimal_covers), default=math.inf) / len(X)
    elapsed = time.perf_counter() - t0
    ok = (n_sig == 1 and len(reps) == 1 and len(centered) == 1 and len(loc.minimal_covers) == 1
          and loc.minimal_covers[0].contains_point(np.zeros(3)) and frac <= 0.15 and elapsed < 300)
    report_criterion(7, ok, f"significant={n_sig}, representatives={len(reps)}, "
                            f"cover fraction={frac:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_8_statistics():
    rng = np.random.default_rng(8)
    X = rng.uniform(0, 10, (3000, 3))
    c = np.full(3, 5.0)
    r = np.linalg.norm(X - c, axis=1)
    X, r = X[r > 2.0], r[r > 2.0]
    shell = np.flatnonzero(r <= 2.3)
    cover = cover_of(shell, X)
    bank = spatial_sample(X, [cover], 10_000, trial_rng(8, 1))
    p = pseudo_p_value(bank, features_of_cover(X, cover))

    P = rng.normal(size=(5000, 3))
    su = spherical_uniformity(P / np.linalg.norm(P, axis=1)[:, None], np.zeros(3))

    l0_bad = 0
    for k in range(100):
        g = np.random.default_rng(k)

        def random_diagram():
            pairs = []
            for _ in range(int(g.integers(0, 8))):
                b = float(g.uniform(0, 1.2))
                d = math.inf if g.random() < 0.2 else b + float(g.uniform(0, 1))
                pairs.append(PersistencePair(1, None, None, b, d))
            return PersistenceDiagram(pairs)

        a, b = random_diagram(), random_diagram()
        tau_u, eps = 1.0, 0.3
        tau = tau_u + eps

        def lengths(pd):
            out = []
            for q in pd.in_dim(1):
                life = (tau - q.birth) if math.isinf(q.death) else q.death - q.birth
                if q.birth <= tau_u and life >= eps:
                    out.append(life)
            return sorted(out, reverse=True)

        la, lb = lengths(a), lengths(b)
        m = max(len(la), len(lb))
        la += [0.0] * (m - len(la))
        lb += [0.0] * (m - len(lb))
        expect = max([abs(x - y) for x, y in zip(la, lb)], default=0.0)
        if l0_distance(a, b, 1, tau_u, eps) != expect:
            l0_bad += 1

    ok = p <= 0.05 and len(bank) == 10_000 and su >= 0.98 and l0_bad == 0
    report_criterion(8, ok, f"void p={p:.4g} over {len(bank)} samples, uniformity={su:.3f}, "
                            f"l0 mismatches={l0_bad}/100")
    assert ok


def test_criterion_9_performance_report():
    X = np.random.default_rng(9).uniform(size=(2000, 3))
    tau = float(np.quantile(pdist(X), 0.05))
    t0 = time.perf_counter()
    res = compute_persistence(Filtration(SparseMetricSpace.from_points(X, tau), 2), dims=(1,))
    cycles = [c.chain for c in birth_cycles(res, 1, include_trivial=False)]
    shorten_cycles(cycles, 1)
    elapsed = time.perf_counter() - t0
    peak_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    ok = elapsed < 60 and peak_mb < 1024
    # report-only: the soft target never fails the suite
    report_criterion(9, ok, f"{len(cycles)} H1 cycles, {elapsed:.1f} s, peak RSS {peak_mb:.0f} MB (soft target)")


@pytest.mark.parametrize("n", [0, 1])
def test_degenerate_inputs_do_not_crash(n):
    res = compute_persistence(Filtration(SparseMetricSpace.from_points(np.zeros((n, 3))), 3), dims=(1, 2))
    assert len(res.diagram.in_dim(1)) == 0
