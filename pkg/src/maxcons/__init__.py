"""maxcons - simulation and bounds laboratory for max consensus under link noise."""

__version__ = "0.3.0"

from .bounds import compute_bounds_report
from .consensus import estimate_growth_rate, robust_max_consensus, run_noisy_max
from .graph import Graph, build_graph, diameter, spectral_radius
from .noise import make_noise

__all__ = [
    "Graph",
    "build_graph",
    "compute_bounds_report",
    "diameter",
    "estimate_growth_rate",
    "make_noise",
    "robust_max_consensus",
    "run_noisy_max",
    "spectral_radius",
]
