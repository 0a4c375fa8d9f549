"""scikit-learn style wrappers around the pipeline stages."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dims, check_points, check_seed, check_space, check_thresholds
from .covers import SignificanceParams
from .pipeline import cycle_stages, localize, persistence, to_cycle
from .stats import SampleBank, VoidFeatureSet, features_of_cover, pseudo_p_value, spatial_sample
from .stochastic import trial_rng


class RipsPersistence(BaseEstimator, TransformerMixin):
    """Persistence diagram of a point cloud (or distance matrix) up to tau_u + epsilon.

    ``transform`` returns the ``(dim, birth, death)`` rows of the input's
    diagram as an array, with ``inf`` deaths for essential classes.
    """

    def __init__(self, tau_u=1.0, epsilon=0.5, dims=(1, 2), metric="euclidean", batch_size=1000):
        self.tau_u = tau_u
        self.epsilon = epsilon
        self.dims = dims
        self.metric = metric
        self.batch_size = batch_size

    def _compute(self, X, reduce_boundaries):
        tau_u, eps = check_thresholds(self.tau_u, self.epsilon)
        dims = check_dims(self.dims)
        space, coords = check_space(X, self.metric, tau_u + eps)
        res = persistence(space, dims, batch_size=self.batch_size, reduce_boundaries=reduce_boundaries)
        return res, space, coords

    def fit(self, X, y=None):
        res, space, _ = self._compute(X, reduce_boundaries=False)
        self.result_ = res
        self.diagram_ = res.diagram
        self.n_edges_ = space.n_edges
        self.n_features_in_ = space.n_vertices
        return self

    def transform(self, X):
        check_is_fitted(self, "diagram_")
        res, _, _ = self._compute(X, reduce_boundaries=False)
        return _diagram_array(res.diagram, check_dims(self.dims))

    def significant(self, dim):
        check_is_fitted(self, "diagram_")
        return self.diagram_.significant(dim, self.tau_u, self.epsilon)


def _diagram_array(diagram, dims) -> np.ndarray:
    rows = [r for d in dims for r in diagram.values(d)]
    return np.asarray(sorted(rows), dtype=float).reshape(-1, 3)


class TightRepresentatives(BaseEstimator, TransformerMixin):
    """Birth-cycles, shortened and smoothed representatives for one homology dimension."""

    def __init__(self, tau_u=1.0, epsilon=0.5, dim=1, metric="euclidean", smooth=True,
                 include_trivial=False):
        self.tau_u = tau_u
        self.epsilon = epsilon
        self.dim = dim
        self.metric = metric
        self.smooth = smooth
        self.include_trivial = include_trivial

    def fit(self, X, y=None):
        tau_u, eps = check_thresholds(self.tau_u, self.epsilon)
        (dim,) = check_dims(self.dim)
        space, coords = check_space(X, self.metric, tau_u + eps)
        res = persistence(space, (dim,))
        st = cycle_stages(res, dim, SignificanceParams(tau_u, eps), X=coords,
                          include_trivial=self.include_trivial, smooth=self.smooth)
        f = res.filtration
        self.result_ = res
        self.stages_ = st
        self.birth_cycles_ = [to_cycle(f, dim, c.chain) for c in st.birth]
        self.shortened_cycles_ = [to_cycle(f, dim, c) for c in st.shortened]
        self.cycles_ = [to_cycle(f, dim, c) for c in st.smoothed]
        return self

    def transform(self, X=None):
        """The final representatives as lists of vertex tuples."""
        check_is_fitted(self, "cycles_")
        return [list(c.simplices) for c in self.cycles_]


class VoidLocalizer(BaseEstimator):
    """Covers, contraction and stochastic refinement on an embedded point cloud.

    ``predict`` labels each point with the index of the first contracted
    cover containing it, or -1.
    """

    def __init__(self, tau_u=1.0, epsilon=0.5, dim=2, n_pert=2, n_perm=2, random_state=0,
                 simplex_budget=5e7):
        self.tau_u = tau_u
        self.epsilon = epsilon
        self.dim = dim
        self.n_pert = n_pert
        self.n_perm = n_perm
        self.random_state = random_state
        self.simplex_budget = simplex_budget

    def fit(self, X, y=None):
        X = check_points(X, 2, 3)
        reps = TightRepresentatives(self.tau_u, self.epsilon, self.dim).fit(X)
        params = SignificanceParams(*check_thresholds(self.tau_u, self.epsilon))
        loc = localize(X, reps.cycles_, params, self.dim, n_pert=self.n_pert, n_perm=self.n_perm,
                       seed=check_seed(self.random_state), budget=self.simplex_budget)
        self.X_ = X
        self.localization_ = loc
        self.covers_ = loc.covers
        self.contracted_covers_ = loc.contracted
        self.minimal_covers_ = loc.minimal_covers
        self.representatives_ = loc.minimal_cycles()
        return self

    def predict(self, X):
        check_is_fitted(self, "contracted_covers_")
        X = check_points(X, 2, 3)
        labels = np.full(len(X), -1, dtype=int)
        for k in range(len(self.contracted_covers_) - 1, -1, -1):
            c = self.contracted_covers_[k]
            inside = np.all((X >= c.lo) & (X <= c.hi), axis=1)
            labels[inside] = k
        return labels

    def void_features(self) -> list:
        check_is_fitted(self, "contracted_covers_")
        return [features_of_cover(self.X_, c) for c in self.contracted_covers_]


class VoidSignificance(BaseEstimator):
    """Spatial sample bank fitted to an embedding and a list of covers.

    ``predict`` maps void feature sets (or 4-column arrays) to pseudo p-values.
    """

    def __init__(self, n_samples=1000, random_state=0):
        self.n_samples = n_samples
        self.random_state = random_state

    def fit(self, X, covers):
        X = check_points(X, 3, 3)
        if not covers:
            raise ValueError("at least one cover is required")
        self.bank_: SampleBank = spatial_sample(X, covers, self.n_samples,
                                                trial_rng(check_seed(self.random_state), 1))
        self.explained_variance_ratio_ = self.bank_.variance_ratio
        return self

    def predict(self, features):
        check_is_fitted(self, "bank_")
        if isinstance(features, VoidFeatureSet):
            features = [features]
        return np.array([pseudo_p_value(self.bank_, f) for f in features])
