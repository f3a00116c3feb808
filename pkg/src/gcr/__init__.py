"""Active-subspace estimation by generalized contour regression.

The package estimates the span of ``Phi`` in a multi-index model
``f(x) = g(Phi^T x)`` from labeled samples, then regresses ``g`` on the
projected inputs. SCR and SIR baselines and a sweep harness for the
synthetic examples are included.
"""

from .dataset import Dataset, Truth
from .estimators import (
    GcrFitReport,
    GcrParams,
    NoPairsError,
    gcr_connect,
    gcr_fit,
    scr_fit,
    scr_pairs,
    sir_fit,
)
from .geometry import Segment, TubeSpec, orthonormalize, projection_distance, tube_contains
from .harness import ExperimentConfig, SweepResult, TrialResult, run_sweep, run_trial
from .regression import ComposedModel, fit_kernel, fit_piecewise_poly, fit_stage_two
from .synthetic import EXAMPLES, get_example, make_example
from .tube import tube_variance

__version__ = "0.1.0"

__all__ = [
    "ComposedModel",
    "Dataset",
    "EXAMPLES",
    "ExperimentConfig",
    "GcrFitReport",
    "GcrParams",
    "NoPairsError",
    "Segment",
    "SweepResult",
    "TrialResult",
    "Truth",
    "TubeSpec",
    "fit_kernel",
    "fit_piecewise_poly",
    "fit_stage_two",
    "gcr_connect",
    "gcr_fit",
    "get_example",
    "make_example",
    "orthonormalize",
    "projection_distance",
    "run_sweep",
    "run_trial",
    "scr_fit",
    "scr_pairs",
    "sir_fit",
    "tube_contains",
    "tube_variance",
]
