"""Discrete weak form: b = -<phi', x> and G = <phi, Theta(x)> at every valid query center."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .dynamics import KnownModel
from .library import LibrarySpec, evaluate_library
from .testfn import TestFunction


@dataclass(frozen=True)
class WeakSystem:
    b: list[np.ndarray] = field(repr=False)
    G: list[np.ndarray] = field(repr=False)
    centers: list[np.ndarray] = field(repr=False)

    @property
    def H(self) -> list[int]:
        return [len(b) for b in self.b]

    @property
    def D(self) -> int:
        return len(self.b)


def _valid_correlation(signal: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return np.correlate(signal, taps, mode="valid")


def build_weak_system(states, spec: LibrarySpec, testfns: Sequence[TestFunction], known: KnownModel | None = None) -> WeakSystem:
    X = np.asarray(states, dtype=float)
    N, D = X.shape
    if len(testfns) != D:
        raise ValueError(f"need one test function per component ({D}), got {len(testfns)}")
    theta = evaluate_library(spec, X)
    g = known(X) if known is not None else None
    bs, Gs, centers = [], [], []
    for d, tf in enumerate(testfns):
        if N <= 2 * tf.m:
            raise ValueError(f"component {d + 1}: test function support 2m+1={tf.width} exceeds record length {N}")
        b = -tf.dt * _valid_correlation(X[:, d], tf.dphi)
        G = tf.dt * np.column_stack([_valid_correlation(theta[:, j], tf.phi) for j in range(spec.J)])
        if g is not None:
            b = b - tf.dt * _valid_correlation(g[:, d], tf.phi)
        bs.append(b)
        Gs.append(G)
        centers.append(np.arange(tf.m, N - tf.m))
    return WeakSystem(bs, Gs, centers)


def weak_residual(ws: WeakSystem, coeffs) -> float:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[1] != ws.D:
        raise ValueError("coefficient matrix has the wrong number of columns")
    return float(sum(np.sum((G @ coeffs[:, d] - b) ** 2) for d, (G, b) in enumerate(zip(ws.G, ws.b))))


class WeakOperator:
    """FFT evaluation of the weak residual directly from (f(x), x), with its adjoint.

    For component d the residual is ``dt * (corr(f_d, phi_d) + corr(x_d, phi'_d))``
    over the valid centers, which equals ``G_d xi_d - b_d`` when
    f = g + Theta xi.  Agrees with :func:`build_weak_system` to rounding.
    """

    def __init__(self, testfns: Sequence[TestFunction], N: int):
        self.testfns = list(testfns)
        self.N = N
        self.D = len(testfns)
        widest = max(tf.width for tf in testfns)
        if N < widest:
            raise ValueError("record shorter than a test function support")
        self.L = sfft.next_fast_len(N + widest, real=True)
        self.dt = np.array([tf.dt for tf in testfns])
        self.m = [tf.m for tf in testfns]
        self.H = [N - 2 * m for m in self.m]
        # spectra of the taps (for the adjoint) and of the reversed taps (for the forward map)
        phi = np.zeros((self.L, self.D))
        dphi = np.zeros((self.L, self.D))
        for d, tf in enumerate(testfns):
            phi[: tf.width, d] = tf.phi
            dphi[: tf.width, d] = tf.dphi
        self._phi_hat = sfft.rfft(phi, axis=0)
        self._dphi_hat = sfft.rfft(dphi, axis=0)
        phi_rev = np.zeros_like(phi)
        dphi_rev = np.zeros_like(dphi)
        for d, tf in enumerate(testfns):
            phi_rev[: tf.width, d] = tf.phi[::-1]
            dphi_rev[: tf.width, d] = tf.dphi[::-1]
        self._phi_rev_hat = sfft.rfft(phi_rev, axis=0)
        self._dphi_rev_hat = sfft.rfft(dphi_rev, axis=0)

    def residual(self, F, X) -> list[np.ndarray]:
        full = sfft.irfft(
            sfft.rfft(F, n=self.L, axis=0) * self._phi_rev_hat + sfft.rfft(X, n=self.L, axis=0) * self._dphi_rev_hat,
            n=self.L,
            axis=0,
        )
        return [self.dt[d] * full[2 * m : self.N, d] for d, m in enumerate(self.m)]

    def adjoint(self, cotangents: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Pull per-component residual cotangents back to (dL/dF, dL/dX), each (N, D)."""
        C = np.zeros((self.L, self.D))
        for d, c in enumerate(cotangents):
            C[: self.H[d], d] = c * self.dt[d]
        C_hat = sfft.rfft(C, axis=0)
        gF = sfft.irfft(C_hat * self._phi_hat, n=self.L, axis=0)[: self.N]
        gX = sfft.irfft(C_hat * self._dphi_hat, n=self.L, axis=0)[: self.N]
        return gF, gX
