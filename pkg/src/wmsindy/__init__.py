"""Sparse identification of ODEs from noisy data with joint noise estimation."""

from .dynamics import KnownModel, SystemSpec, Trajectory, get_system, simulate_truth
from .joint import JointConfig, IdentificationResult, run_msindy, run_nonzero_mean, run_wmsindy
from .library import LibrarySpec, build_library, evaluate_library
from .metrics import GroundTruth, RunMetrics, compute_metrics, success_rate
from .noise import NoiseSpec, generate_noise, noise_level
from .sparse import stls, wsindy_identify

__all__ = [
    "GroundTruth",
    "IdentificationResult",
    "JointConfig",
    "KnownModel",
    "LibrarySpec",
    "NoiseSpec",
    "RunMetrics",
    "SystemSpec",
    "Trajectory",
    "build_library",
    "compute_metrics",
    "evaluate_library",
    "generate_noise",
    "get_system",
    "noise_level",
    "run_msindy",
    "run_nonzero_mean",
    "run_wmsindy",
    "simulate_truth",
    "stls",
    "success_rate",
    "wsindy_identify",
]
