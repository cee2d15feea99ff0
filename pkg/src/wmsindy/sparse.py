"""Sequentially thresholded least squares, lambda selection, and the standalone weak-form identifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import KnownModel, Trajectory
from .library import LibrarySpec
from .testfn import TAU, TAU_HAT, TestFunction, test_functions_from_data
from .weak import WeakSystem, build_weak_system

log = logging.getLogger(__name__)

DEFAULT_GRID = np.logspace(-3, 1, 50)


@dataclass
class SparseCoefficients:
    xi: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.xi = np.where(self.active, self.xi, 0.0)

    @classmethod
    def from_columns(cls, columns) -> "SparseCoefficients":
        xi = np.column_stack([c[0] for c in columns])
        active = np.column_stack([c[1] for c in columns])
        return cls(xi, active)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())


def lstsq(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares."""
    return np.linalg.lstsq(A, y, rcond=None)[0]


def stls(G, b, lam: float, max_rounds: int = 25, return_history: bool = False):
    """Sequentially thresholded least squares for one column.

    Returns ``(xi, active)``; with ``return_history`` also the active-set size
    after every round.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if G.ndim != 2 or G.shape[0] != b.size or G.shape[0] < 1:
        raise ValueError("G must be (H, J) with H = len(b) >= 1")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(b))):
        raise ValueError("G and b must be finite")
    if lam < 0 or max_rounds < 1:
        raise ValueError("need lam >= 0 and max_rounds >= 1")
    J = G.shape[1]
    active = np.ones(J, dtype=bool)
    xi = np.zeros(J)
    history = []
    for _ in range(max_rounds):
        xi = np.zeros(J)
        if active.any():
            xi[active] = lstsq(G[:, active], b)
        keep = active & (np.abs(xi) >= lam)
        history.append(int(keep.sum()))
        if np.array_equal(keep, active):
            break
        active = keep
    else:
        # round cap hit: refit on the last support so active entries stay least-squares optimal
        xi = np.zeros(J)
        if active.any():
            xi[active] = lstsq(G[:, active], b)
    xi[~active] = 0.0
    if return_history:
        return xi, active, history
    return xi, active


def selection_loss(G, b, xi, active) -> float:
    return float(np.linalg.norm(G @ xi - b) / np.linalg.norm(b) + active.sum() / active.size)


def lambda_grid_search(G, b, grid=None, max_rounds: int = 25):
    """Pick lambda minimizing relative residual + support fraction; ties go to the larger lambda.

    Returns ``(lam, xi, active)``.
    """
    grid = np.sort(np.asarray(DEFAULT_GRID if grid is None else grid, dtype=float))
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if np.linalg.norm(b) == 0:
        J = G.shape[1]
        return float(grid[-1]), np.zeros(J), np.zeros(J, dtype=bool)
    fits = [stls(G, b, lam, max_rounds) for lam in grid]
    losses = np.array([selection_loss(G, b, xi, act) for xi, act in fits])
    best = losses.min()
    tied = np.flatnonzero(losses <= best + 1e-12 * max(1.0, abs(best)))
    i = int(tied[-1])
    return float(grid[i]), fits[i][0], fits[i][1]


@dataclass
class WSINDyResult:
    coeffs: SparseCoefficients
    testfns: list[TestFunction] = field(repr=False)
    weak_system: WeakSystem = field(repr=False)
    lambdas: list[float] = field(default_factory=list)

    @property
    def fallback_used(self) -> bool:
        return any(tf.fallback_used for tf in self.testfns)


def wsindy_identify(
    data: Trajectory,
    spec: LibrarySpec,
    tau: float = TAU,
    tau_hat: float = TAU_HAT,
    lam: float | None = None,
    known: KnownModel | None = None,
    grid=None,
) -> WSINDyResult:
    """Weak-form SINDy on the raw samples; fixed ``lam`` or a per-component grid search."""
    testfns = test_functions_from_data(data.states, data.dt, tau, tau_hat)
    ws = build_weak_system(data.states, spec, testfns, known)
    columns, lambdas = [], []
    for G, b in zip(ws.G, ws.b):
        if lam is None:
            chosen, xi, active = lambda_grid_search(G, b, grid)
        else:
            chosen = lam
            xi, active = stls(G, b, lam)
        columns.append((xi, active))
        lambdas.append(float(chosen))
    return WSINDyResult(SparseCoefficients.from_columns(columns), testfns, ws, lambdas)
