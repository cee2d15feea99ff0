"""Error metrics for one identification run and their aggregation over seeds."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import KnownModel, ModelField, rollout
from .library import LibrarySpec

METRIC_NAMES = ("e_noise", "e_field", "e_forward", "e_param")


@dataclass
class GroundTruth:
    states: np.ndarray
    noise: np.ndarray
    coeffs: np.ndarray
    spec: LibrarySpec
    known: KnownModel | None = None


@dataclass
class RunMetrics:
    e_noise: float
    e_field: float
    e_forward: float
    e_param: float
    success: bool

    def to_dict(self) -> dict:
        return asdict(self)


def noise_error(true_noise, estimate) -> float:
    diff = np.asarray(true_noise, dtype=float) - np.asarray(estimate, dtype=float)
    return float(np.sum(diff * diff) / diff.shape[0])


def field_error(truth: GroundTruth, coeffs) -> float:
    f = ModelField(truth.spec, truth.coeffs, truth.known)(truth.states)
    g = ModelField(truth.spec, coeffs, truth.known)(truth.states)
    return float(np.sum((f - g) ** 2) / np.sum(f * f))


def forward_error(truth: GroundTruth, coeffs, horizon: float, dt: float, start: int = 0) -> float:
    """Rollout mismatch over ``horizon`` seconds from the true state at ``start``, scaled by the window's squared Frobenius norm."""
    M = int(round(horizon / dt)) + 1
    if M < 2 or start + M > truth.states.shape[0]:
        raise ValueError("forecast horizon does not fit in the record")
    window = truth.states[start : start + M]
    pred = rollout(coeffs, truth.spec, truth.known, window[0], M - 1, dt)
    if not np.all(np.isfinite(pred)):
        return float("inf")
    return float(np.sum((window[1:] - pred[1:]) ** 2) / np.sum(window * window))


def parameter_error(true_coeffs, coeffs) -> float:
    true_coeffs = np.asarray(true_coeffs, dtype=float)
    return float(np.linalg.norm(true_coeffs - np.asarray(coeffs, dtype=float)) / np.linalg.norm(true_coeffs))


def support_match(true_coeffs, coeffs) -> bool:
    return bool(np.array_equal(np.asarray(true_coeffs) != 0, np.asarray(coeffs) != 0))


def compute_metrics(truth: GroundTruth, result, horizon: float, dt: float, start: int = 0) -> RunMetrics:
    """Metrics for anything with ``coeffs`` (array or SparseCoefficients) and ``noise`` (array or None).

    E_N is NaN for methods that do not estimate noise.
    """
    coeffs = getattr(result.coeffs, "xi", result.coeffs)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != truth.coeffs.shape:
        raise ValueError(f"coefficient shape {coeffs.shape} does not match the truth {truth.coeffs.shape}")
    if truth.states.shape != truth.noise.shape:
        raise ValueError("states and noise shapes differ")
    noise = getattr(result, "noise", None)
    if noise is not None and np.shape(noise) != truth.noise.shape:
        raise ValueError("noise estimate has the wrong shape")
    return RunMetrics(
        e_noise=noise_error(truth.noise, noise) if noise is not None else float("nan"),
        e_field=field_error(truth, coeffs),
        e_forward=forward_error(truth, coeffs, horizon, dt, start),
        e_param=parameter_error(truth.coeffs, coeffs),
        success=support_match(truth.coeffs, coeffs),
    )


def success_rate(runs) -> dict:
    """Fraction of successful runs plus median/min/max of each metric."""
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to aggregate")
    out = {"n_runs": len(runs), "success_rate": sum(bool(r.success) for r in runs) / len(runs)}
    for name in METRIC_NAMES:
        values = np.array([getattr(r, name) for r in runs], dtype=float)
        out[name] = {"median": float(np.median(values)), "min": float(values.min()), "max": float(values.max())}
    return out
