"""Diffusion- and VCA-assisted hyperspectral image segmentation.

Two entry points: ``run_dvis`` (unsupervised) seeds one label per class at
the top-ranked mode pixels and propagates; ``run_advis`` (active) spends a
budget of oracle label queries on the top-ranked pixels first, which
corrects the mode labels and everything propagated from them.
"""

from .evaluation import SweepResult, budget_sweep, nmi
from .graph import (DiffusionOperator, DisconnectedGraphError, KnnGraph,
                    build_knn, build_operator)
from .hsi import HsiCube, LabelMap, PointCloud, flatten, load_cube, load_labels
from .modes import (DensityVector, ModeRanking, dt_values, empirical_density,
                    rank_modes, zeta)
from .segmentation import (GroundTruthOracle, Pipeline, Provenance, RunConfig,
                           Segmentation, advis_label_modes, dvis_label_modes,
                           propagate, run_advis, run_dvis)
from .unmixing import (EndmemberSet, abundances, averaged_purity, hysime,
                       purity, vca)

__version__ = "0.1.0"

__all__ = [
    "HsiCube", "LabelMap", "PointCloud", "flatten", "load_cube", "load_labels",
    "KnnGraph", "DiffusionOperator", "DisconnectedGraphError",
    "build_knn", "build_operator",
    "EndmemberSet", "hysime", "vca", "abundances", "purity", "averaged_purity",
    "DensityVector", "ModeRanking", "empirical_density", "zeta",
    "dt_values", "rank_modes",
    "Provenance", "Segmentation", "GroundTruthOracle", "RunConfig", "Pipeline",
    "dvis_label_modes", "advis_label_modes", "propagate",
    "run_dvis", "run_advis",
    "nmi", "SweepResult", "budget_sweep",
    "__version__",
]
