"""Diagram distance, void shape features and sampling-based pseudo p-values."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .covers import Cover, box_members

logger = logging.getLogger(__name__)

N_THETA, N_PHI = 10, 20
N_PIXELS = N_THETA * N_PHI


def significant_lengths(diagram, dim: int, tau_u: float, epsilon: float, tau: float | None = None) -> list:
    if tau is None:
        tau = tau_u + epsilon
    out = []
    for p in diagram.significant(dim, tau_u, epsilon, tau):
        out.append(tau - p.birth if p.essential else p.persistence)
    return out


def l0_from_lengths(a, b) -> float:
    """Largest gap between the decreasing, zero-padded length lists."""
    a = sorted(a, reverse=True)
    b = sorted(b, reverse=True)
    m = max(len(a), len(b))
    a += [0.0] * (m - len(a))
    b += [0.0] * (m - len(b))
    return max((abs(x - y) for x, y in zip(a, b)), default=0.0)


def l0_distance(pd_a, pd_b, dim: int, tau_u: float, epsilon: float, tau: float | None = None) -> float:
    return l0_from_lengths(significant_lengths(pd_a, dim, tau_u, epsilon, tau),
                           significant_lengths(pd_b, dim, tau_u, epsilon, tau))


def spherical_uniformity(points, center) -> float:
    """Fraction of the 10 x 20 (theta, phi) pixels hit by directions from ``center``."""
    P = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    r = np.linalg.norm(P, axis=1)
    if np.any(r == 0):
        logger.warning("%d point(s) at the center skipped", int(np.sum(r == 0)))
        P, r = P[r > 0], r[r > 0]
    if len(P) == 0:
        return 0.0
    theta = np.arccos(np.clip(P[:, 2] / r, -1.0, 1.0))
    phi = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2 * np.pi)
    step = np.pi / 10
    ti = np.minimum((theta / step).astype(int), N_THETA - 1)
    pj = np.minimum((phi / step).astype(int), N_PHI - 1)
    return len(set(zip(ti.tolist(), pj.tolist()))) / N_PIXELS


@dataclass(frozen=True)
class VoidFeatureSet:
    cover_size: int
    radius: float
    spherical_uniformity: float
    eccentricity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cover_size, self.radius, self.spherical_uniformity, self.eccentricity], float)


def features_of_box(X: np.ndarray, lo, hi, members=None) -> VoidFeatureSet:
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if members is None:
        members = box_members(X, lo, hi)
    members = list(members)
    center = (lo + hi) / 2
    P = X[members]
    if len(P):
        radius = float(np.min(np.linalg.norm(P - center, axis=1)))
    else:
        radius = float("nan")
    ext = hi - lo
    ecc = float(ext.max() / ext.min()) if ext.min() > 0 else math.inf
    su = spherical_uniformity(P, center) if X.shape[1] == 3 else float("nan")
    return VoidFeatureSet(len(members), radius, su, ecc)


def features_of_cover(X: np.ndarray, cover: Cover) -> VoidFeatureSet:
    return features_of_box(X, cover.lo, cover.hi, cover.members)


class SampleBank:
    """Feature vectors of random boxes with min/max rescaling and a PCA basis."""

    def __init__(self, features, attempts: int | None = None):
        self.features = list(features)
        if not self.features:
            raise ValueError("sample bank is empty")
        F = np.vstack([f.as_array() if isinstance(f, VoidFeatureSet) else np.asarray(f, float)
                       for f in self.features])
        if not np.all(np.isfinite(F)):
            raise ValueError("sample features must be finite")
        self.raw = F
        self.attempts = attempts
        self.fmin = F.min(axis=0)
        self.fmax = F.max(axis=0)
        U = self.rescale(F)
        cov = np.atleast_2d(np.cov(U, rowvar=False)) if len(U) > 1 else np.zeros((F.shape[1],) * 2)
        w, V = np.linalg.eigh(cov)
        idx = np.argsort(w)[::-1]
        w, V = np.clip(w[idx], 0, None), V[:, idx]
        for k in range(V.shape[1]):
            j = np.argmax(np.abs(V[:, k]))
            if V[j, k] < 0:
                V[:, k] = -V[:, k]
        self.basis = V
        total = w.sum()
        self.variance_ratio = w / total if total > 0 else np.full(len(w), 1.0 / len(w))
        self.mean = U.mean(axis=0)
        self.projected = (U - self.mean) @ V

    def __len__(self):
        return len(self.raw)

    def rescale(self, F) -> np.ndarray:
        span = np.where(self.fmax > self.fmin, self.fmax - self.fmin, 1.0)
        return (np.asarray(F, float) - self.fmin) / span

    def project(self, f) -> np.ndarray:
        v = f.as_array() if isinstance(f, VoidFeatureSet) else np.asarray(f, float)
        return (self.rescale(v) - self.mean) @ self.basis


def pseudo_p_value(bank: SampleBank, void) -> float:
    """Product over PCA axes of the fraction of samples strictly above the void."""
    if len(bank) == 0:
        raise ValueError("sample bank is empty")
    w = bank.project(void)
    n = len(bank)
    p = 1.0
    for d in range(len(w)):
        p *= np.count_nonzero(bank.projected[:, d] > w[d]) / n
    return float(p)


def neg_log10(p: float) -> float:
    return math.inf if p <= 0 else -math.log10(p)


def spatial_sample(X: np.ndarray, covers, n_samples: int, rng: np.random.Generator,
                   max_attempts: int | None = None) -> SampleBank:
    """Random boxes sized like the computed covers, centered in occupied voxels."""
    if not covers:
        raise ValueError("at least one cover is required")
    X = np.asarray(X, float)
    ext = np.vstack([c.extent for c in covers])
    dmin, dmax = ext.min(axis=0), ext.max(axis=0)
    n_min = min(c.size for c in covers)
    vox = np.where(dmin > 0, dmin, np.maximum(dmax, 1e-12))
    origin = X.min(axis=0)
    cells = np.floor((X - origin) / vox).astype(np.int64)
    occupied = np.unique(cells, axis=0)
    tree = cKDTree(X)
    half_diag = np.linalg.norm(dmax) / 2
    feats = []
    attempts = 0
    if max_attempts is None:
        max_attempts = 1000 * n_samples
    while len(feats) < n_samples and attempts < max_attempts:
        attempts += 1
        cell = occupied[rng.integers(len(occupied))]
        center = origin + (cell + rng.uniform(size=X.shape[1])) * vox
        dims = rng.uniform(dmin, dmax)
        lo, hi = center - dims / 2, center + dims / 2
        cand = tree.query_ball_point(center, half_diag + 1e-12)
        if len(cand) < n_min:
            continue
        cand = np.asarray(cand)
        inside = np.all((X[cand] >= lo) & (X[cand] <= hi), axis=1)
        members = np.sort(cand[inside])
        if len(members) < n_min:
            continue
        feats.append(features_of_box(X, lo, hi, members.tolist()))
    if len(feats) < n_samples:
        logger.warning("spatial sampling kept %d of %d requested boxes", len(feats), n_samples)
    return SampleBank(feats, attempts)


def neighborhood_graph(X: np.ndarray, radius: float) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(range(len(X)))
    G.add_edges_from(cKDTree(X).query_pairs(radius))
    return G


def grow_connected(G: nx.Graph, n: int, rng: np.random.Generator):
    """Random connected node set of size ``n`` grown from a random start, or None."""
    nodes = list(G.nodes)
    start = nodes[rng.integers(len(nodes))]
    chosen = [start]
    chosen_set = {start}
    frontier = sorted(set(G[start]))
    while len(chosen) < n:
        if not frontier:
            return None
        v = frontier[rng.integers(len(frontier))]
        chosen.append(v)
        chosen_set.add(v)
        frontier = sorted((set(frontier) | set(G[v])) - chosen_set)
    return chosen


def graphical_sample(X: np.ndarray, tau_u: float, size_range, n_samples: int,
                     rng: np.random.Generator, min_rate: float = 1e-3,
                     min_trials: int = 1000) -> SampleBank:
    """Random connected subgraphs of the tau_u-graph with minimum degree 3."""
    lo, hi = size_range
    if lo < 4 or hi < lo:
        raise ValueError("size range must satisfy 4 <= lo <= hi")
    X = np.asarray(X, float)
    G = neighborhood_graph(X, tau_u)
    feats = []
    attempts = 0
    while len(feats) < n_samples:
        attempts += 1
        if attempts >= min_trials and len(feats) / attempts < min_rate:
            raise RuntimeError(
                f"graphical sampling acceptance collapsed: {len(feats)} of {attempts} accepted")
        n = int(rng.integers(lo, hi + 1))
        nodes = grow_connected(G, n, rng)
        if nodes is None:
            continue
        H = G.subgraph(nodes)
        if min(d for _, d in H.degree) < 3:
            continue
        P = X[nodes]
        feats.append(features_of_box(X, P.min(axis=0), P.max(axis=0)))
    return SampleBank(feats, attempts)
