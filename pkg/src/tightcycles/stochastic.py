"""Randomized refinement of representatives inside a cover.

Each trial perturbs the cover's points slightly and/or relabels edges of
equal length, recomputes representative boundaries and keeps the trial
whose boundaries are shortest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .birth_cycles import BirthCycleBuilder
from .complex import CapacityError, Filtration, SparseMetricSpace
from .covers import SignificanceParams, count_significant
from .persistence import compute_persistence
from .refinement import shorten_cycles

logger = logging.getLogger(__name__)


def trial_rng(seed: int, *stream) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def nn_radius(X: np.ndarray, delta: float) -> np.ndarray:
    """Per-point bound ``min(nn/3, delta)``."""
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        return np.full(len(X), float(delta))
    dist, _ = cKDTree(X).query(X, k=2)
    return np.minimum(dist[:, 1] / 3.0, delta)


def uniform_ball(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform in the closed unit ball, by rejection from the cube."""
    out = np.empty((n, d))
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 8)
        cand = rng.uniform(-1.0, 1.0, size=(m, d))
        cand = cand[np.einsum("ij,ij->i", cand, cand) <= 1.0]
        take = min(len(cand), n - filled)
        out[filled:filled + take] = cand[:take]
        filled += take
    return out


def perturb_points(X: np.ndarray, radius, rng: np.random.Generator) -> np.ndarray:
    """Displace each point uniformly inside a ball of its radius.

    ``radius`` is a scalar, an array with one radius per point, or a callable
    mapping the point array to such an array.
    """
    X = np.asarray(X, dtype=float)
    r = radius(X) if callable(radius) else radius
    r = np.broadcast_to(np.asarray(r, dtype=float), (len(X),))
    if np.any(r < 0):
        raise ValueError("radii must be non-negative")
    if not np.any(r > 0):
        return X.copy()
    return X + uniform_ball(len(X), X.shape[1], rng) * r[:, None]


@dataclass
class Calibration:
    delta: float
    m: int | None
    embeddings: list
    failed: bool = False


def calibrate_delta(X: np.ndarray, params: SignificanceParams, dim: int, n_pert: int,
                    target: int | None = None, seed: int = 0, cover_id: int = 0,
                    m_max: int = 20) -> Calibration:
    """Largest ``(epsilon/3) / 2**m`` whose perturbations keep the significant count.

    On failure after ``m_max`` halvings the cover is processed unperturbed.
    """
    X = np.asarray(X, dtype=float)
    if target is None:
        target = count_significant(X, range(len(X)), params, dim)
    if n_pert <= 0:
        return Calibration(0.0, None, [X])
    for m in range(1, m_max + 1):
        delta = (params.epsilon / 3.0) / 2 ** m
        radius = nn_radius(X, delta)
        embs = []
        ok = True
        for t in range(n_pert):
            Y = perturb_points(X, radius, trial_rng(seed, cover_id, m, t))
            if count_significant(Y, range(len(Y)), params, dim) != target:
                ok = False
                break
            embs.append(Y)
        if ok:
            return Calibration(delta, m, embs)
    logger.warning("cover %d: perturbation calibration failed after %d halvings", cover_id, m_max)
    return Calibration(0.0, None, [X], failed=True)


def permute_filtration(f: Filtration, rng: np.random.Generator) -> Filtration:
    """Same complex with edges of bit-equal length shuffled within their runs."""
    order = np.array(f.edge_order, copy=True)
    for start, stop in f.equal_diameter_runs():
        order[start:stop] = order[start:stop][rng.permutation(stop - start)]
    return f.with_edge_order(order)


def distinct_permutations(f: Filtration, n_perm: int, seed: int = 0, *stream) -> list:
    """Identity first, then up to ``n_perm - 1`` further distinct relabelings."""
    out = [f]
    seen = {tuple(f.edge_order.tolist())}
    if not f.equal_diameter_runs():
        return out
    for q in range(1, n_perm):
        g = permute_filtration(f, trial_rng(seed, *stream, q))
        key = tuple(g.edge_order.tolist())
        if key in seen:
            continue
        seen.add(key)
        out.append(g)
    return out


# --------------------------------------------------------------------------
# selection


def length_vector(chains) -> tuple:
    return tuple(sorted((len(c) for c in chains), reverse=True))


@dataclass
class MinimalSelection:
    representatives: list      # the chosen set, or [union] when minimal sets differ
    best: list                 # first minimal set
    union: tuple               # simplices of all tied minimal sets
    tied: list                 # indices of the tied trials
    vectors: list = field(default_factory=list)


def select_minimal_representatives(trial_sets) -> MinimalSelection:
    """Pick the trial whose zero-padded, decreasing length vector is smallest."""
    trial_sets = [list(s) for s in trial_sets]
    if not trial_sets:
        return MinimalSelection([], [], (), [], [])
    vecs = [length_vector(s) for s in trial_sets]
    width = max(len(v) for v in vecs)
    padded = [v + (0,) * (width - len(v)) for v in vecs]
    best_vec = min(padded)
    tied = [i for i, v in enumerate(padded) if v == best_vec]
    canon = [sorted(tuple(sorted(c)) for c in trial_sets[i]) for i in tied]
    union = tuple(sorted({s for i in tied for c in trial_sets[i] for s in c}))
    if all(c == canon[0] for c in canon):
        reps = canon[0]
    else:
        reps = [union]
    return MinimalSelection(reps, canon[0], union, tied, vecs)


# --------------------------------------------------------------------------
# trials


def projected_simplices(X: np.ndarray, threshold: float, top_dim: int) -> float:
    """Upper-bound estimate of the Rips complex size up to ``top_dim``."""
    n = len(X)
    if n == 0:
        return 0.0
    tree = cKDTree(X)
    deg = np.array([len(nb) - 1 for nb in tree.query_ball_point(X, threshold)], dtype=float)
    total = n + deg.sum() / 2
    for k in range(2, top_dim + 1):
        total += sum(comb(int(x), k) for x in deg) / (k + 1)
    return float(total)


def _significant_finite_reps(res, dim, params, global_ids):
    f = res.filtration
    out = []
    for p in res.diagram.significant(dim, params.tau_u, params.epsilon, params.tau):
        if p.essential:
            return None
        col = res.representative(p)
        out.append(tuple(sorted(tuple(global_ids[v] for v in f.vertices(dim, k)) for k in col)))
    return out


def representatives_at_max_threshold(X, params, dim, global_ids, filtration_fn=None,
                                     budget: float = 5e7, growth: float = 1.5):
    """Representative boundaries of significant features, or ``None`` if over budget.

    The threshold grows geometrically from tau until every significant class
    has died (or the largest pairwise distance is reached).  R columns of
    deaths at or below a threshold do not depend on larger thresholds, so this
    matches the computation at the largest pairwise distance.
    """
    far = float(pdist(X).max()) if len(X) > 1 else 0.0
    T = params.tau
    while True:
        T = min(T, far) if far >= params.tau else params.tau
        if projected_simplices(X, T, dim + 1) > budget:
            return None
        space = SparseMetricSpace.from_points(X, threshold=T)
        f = Filtration(space, dim + 1)
        if filtration_fn is not None:
            f = filtration_fn(f)
        res = compute_persistence(f, dims=(dim,))
        reps = _significant_finite_reps(res, dim, params, global_ids)
        if reps is not None or T >= far:
            return reps if reps is not None else _fallback_essential(res, dim, params, global_ids)
        T *= growth


def _fallback_essential(res, dim, params, global_ids):
    """Finite columns plus shortened birth-cycles for classes that never die."""
    f = res.filtration
    out = []
    sig = res.diagram.significant(dim, params.tau_u, params.epsilon, params.tau)
    builder = BirthCycleBuilder(f, res.reduced[dim])
    ess = []
    for p in sig:
        if p.essential:
            ess.append(builder.compute(p.birth_simplex.key))
        else:
            col = res.representative(p)
            out.append(tuple(sorted(tuple(global_ids[v] for v in f.vertices(dim, k)) for k in col)))
    for c in shorten_cycles(ess, dim):
        out.append(tuple(sorted(tuple(global_ids[v] for v in f.vertices(dim, k)) for k in c)))
    return out


def representatives_at_tau(X, params, dim, global_ids, filtration_fn=None):
    """Fallback path: shortened birth-cycles of significant features at tau."""
    space = SparseMetricSpace.from_points(X, threshold=params.tau)
    f = Filtration(space, dim + 1)
    if filtration_fn is not None:
        f = filtration_fn(f)
    res = compute_persistence(f, dims=(dim,))
    sig = res.diagram.significant(dim, params.tau_u, params.epsilon, params.tau)
    builder = BirthCycleBuilder(f, res.reduced[dim])
    cycles = [builder.compute(p.birth_simplex.key) for p in sig]
    return [tuple(sorted(tuple(global_ids[v] for v in f.vertices(dim, k)) for k in c))
            for c in shorten_cycles(cycles, dim)]


@dataclass
class RefinementResult:
    selection: MinimalSelection
    calibration: Calibration
    n_trials: int
    n_failed: int
    used_fallback: bool
    diagrams: list = field(default_factory=list)


def run_refinement(X_all: np.ndarray, members, params: SignificanceParams, dim: int,
                   n_pert: int = 1, n_perm: int = 1, seed: int = 0, cover_id: int = 0,
                   delta: float | None = None, budget: float = 5e7, m_max: int = 20) -> RefinementResult:
    """Minimal representative boundaries for the significant features of a cover.

    Trials are the unperturbed cover plus ``n_pert`` calibrated perturbations
    (identical embeddings are merged), each crossed with up to ``n_perm``
    distinct equal-length relabelings.  ``delta=0`` disables perturbation.
    """
    members = sorted(int(v) for v in members)
    X = np.asarray(X_all, dtype=float)[members]
    if delta is None:
        calib = calibrate_delta(X, params, dim, n_pert, seed=seed, cover_id=cover_id, m_max=m_max)
    elif delta == 0:
        calib = Calibration(0.0, None, [X] * max(n_pert, 1))
    else:
        radius = nn_radius(X, delta)
        calib = Calibration(delta, None, [perturb_points(X, radius, trial_rng(seed, cover_id, 0, t))
                                          for t in range(n_pert)])
    embeddings = [X]
    seen = {X.tobytes()}
    for Y in calib.embeddings:
        if Y.tobytes() not in seen:
            seen.add(Y.tobytes())
            embeddings.append(Y)

    trial_sets = []
    n_failed = 0
    fallback = False
    for p, Y in enumerate(embeddings):
        space = SparseMetricSpace.from_points(Y, threshold=params.tau)
        base = Filtration(space, dim + 1)
        perms = distinct_permutations(base, n_perm, seed, cover_id, p)
        for q, g in enumerate(perms):
            order = g.edge_order

            def relabel(f, order=order, base=base):
                # edge indices of the larger space extend those at tau
                if f.space.n_edges == base.space.n_edges:
                    return f.with_edge_order(order)
                return _extend_order(f, base, order)
            try:
                reps = representatives_at_max_threshold(Y, params, dim, members, relabel, budget)
                if reps is None:
                    fallback = True
                    reps = representatives_at_tau(Y, params, dim, members, relabel)
            except (CapacityError, MemoryError, RecursionError) as exc:
                logger.warning("cover %d trial (%d, %d) failed: %s", cover_id, p, q, exc)
                n_failed += 1
                continue
            trial_sets.append(reps)
    return RefinementResult(select_minimal_representatives(trial_sets), calib,
                            len(trial_sets), n_failed, fallback)


def _extend_order(f: Filtration, base: Filtration, order) -> Filtration:
    """Apply the tie order of ``base`` to the matching edges of a larger complex."""
    sp, bsp = f.space, base.space
    rank = {}
    for pos, e in enumerate(order):
        rank[(int(bsp.u[e]), int(bsp.v[e]))] = pos
    idx = np.arange(sp.n_edges)
    big = len(order)
    r = np.array([rank.get((int(a), int(b)), big) for a, b in zip(sp.u, sp.v)])
    new = np.lexsort((sp.v, sp.u, r, sp.d))
    return f.with_edge_order(idx[new])


