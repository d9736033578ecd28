"""Bayesian dynamic function-on-scalars regression."""
from .basis import BasisSystem, build_basis, evaluate_basis
from .bands import BandSummary, simultaneous_band
from .data import FunctionalDataset, load_dataset, save_dataset
from .gibbs import McmcConfig, ModelState, PosteriorDraws, run_gibbs

__version__ = "0.1.0"

__all__ = [
    "BasisSystem", "build_basis", "evaluate_basis", "BandSummary", "simultaneous_band",
    "FunctionalDataset", "load_dataset", "save_dataset", "McmcConfig", "ModelState",
    "PosteriorDraws", "run_gibbs",
]
