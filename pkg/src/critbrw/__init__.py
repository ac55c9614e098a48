"""Monte Carlo toolkit for critical branching random walk traces in high
dimension: tree samplers, lattice traces, cut-point skeletons, effective
resistance, random walks and continuum tree comparisons."""
from .laws import OffspringLaw, from_pmf, get_law
from .trees import PlaneTree, sample_gw, sample_gw_height, sample_gw_size
from .trace import SpatialTree, TraceGraph, build_trace, embed_tree
from .cuts import CutStructure, find_cut_bonds, project_pi_n
from .resistance import ResistanceEngine, brute_resistance_oracle, effective_resistance
from .skeleton import build_GK, reduced_tree, sausage_stats, skeletonize
from .ibic import sample_ibic_window

__version__ = "0.1.0"

__all__ = [
    "CutStructure", "OffspringLaw", "PlaneTree", "ResistanceEngine", "SpatialTree", "TraceGraph",
    "brute_resistance_oracle", "build_GK", "build_trace", "effective_resistance", "embed_tree", "find_cut_bonds",
    "from_pmf", "get_law", "project_pi_n", "reduced_tree", "sample_gw", "sample_gw_height", "sample_gw_size",
    "sample_ibic_window", "sausage_stats", "skeletonize", "__version__",
]
