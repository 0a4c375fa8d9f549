"""Persistent homology of Vietoris-Rips filtrations with tight representative cycles."""

from .birth_cycles import BirthCycle, BirthCycleBuilder, RecursionBudgetError, birth_cycles, compute_birth_cycle
from .complex import CapacityError, Filtration, MissingEdgeError, SimplexId, SparseMetricSpace
from .covers import Cover, SignificanceParams, contract_covers, count_significant, cover_of
from .estimators import RipsPersistence, TightRepresentatives, VoidLocalizer, VoidSignificance
from .persistence import DualityError, PersistenceDiagram, PersistencePair, compute_persistence
from .refinement import shorten_cycles, smooth_h1, smooth_h2, split_disconnected
from .stats import l0_distance, pseudo_p_value, spherical_uniformity
from .stochastic import run_refinement, select_minimal_representatives

__version__ = "0.1.0"

__all__ = [
    "BirthCycle", "BirthCycleBuilder", "CapacityError", "Cover", "DualityError", "Filtration",
    "MissingEdgeError", "PersistenceDiagram", "PersistencePair", "RecursionBudgetError",
    "RipsPersistence", "SignificanceParams", "SimplexId", "SparseMetricSpace",
    "TightRepresentatives", "VoidLocalizer", "VoidSignificance", "birth_cycles",
    "compute_birth_cycle", "compute_persistence", "contract_covers", "count_significant",
    "cover_of", "l0_distance", "pseudo_p_value", "run_refinement",
    "select_minimal_representatives", "shorten_cycles", "smooth_h1", "smooth_h2",
    "spherical_uniformity", "split_disconnected",
]
