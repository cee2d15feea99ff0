"""Data-driven piecewise-polynomial test functions for the weak form.

Recipe per state component: spectrum corner k* -> support half-width m from
the closed-form root condition -> smallest degree parameter p meeting the
real-space decay tolerance -> sampled bump (1 - u^2)^p and its derivative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

log = logging.getLogger(__name__)

TAU = 1e-10
TAU_HAT = -2.0


@dataclass(frozen=True)
class TestFunction:
    m: int
    p: int
    dt: float
    phi: np.ndarray = field(repr=False)
    dphi: np.ndarray = field(repr=False)
    sigma: float
    k_star: int | None = None
    fallback_used: bool = False

    __test__ = False  # keep pytest from collecting this as a test class

    @property
    def width(self) -> int:
        return 2 * self.m + 1

    def diagnostics(self, component: int | None = None) -> dict:
        out = {"k_star": self.k_star, "m": self.m, "p": self.p, "sigma": self.sigma, "fallback_used": self.fallback_used}
        if component is not None:
            out = {"component": component, **out}
        return out


def _segment_sse(x: np.ndarray, y: np.ndarray):
    """Prefix sums giving the least-squares line SSE on any index range [a, b]."""
    zero = np.zeros(1)
    S1 = np.concatenate([zero, np.cumsum(np.ones_like(x))])
    Sx = np.concatenate([zero, np.cumsum(x)])
    Sy = np.concatenate([zero, np.cumsum(y)])
    Sxx = np.concatenate([zero, np.cumsum(x * x)])
    Sxy = np.concatenate([zero, np.cumsum(x * y)])
    Syy = np.concatenate([zero, np.cumsum(y * y)])

    def sse(a, b):
        # inclusive range [a, b], vectorized over arrays of endpoints
        n = S1[b + 1] - S1[a]
        sx = Sx[b + 1] - Sx[a]
        sy = Sy[b + 1] - Sy[a]
        vxx = (Sxx[b + 1] - Sxx[a]) - sx * sx / n
        vxy = (Sxy[b + 1] - Sxy[a]) - sx * sy / n
        vyy = (Syy[b + 1] - Syy[a]) - sy * sy / n
        return np.maximum(vyy - vxy * vxy / vxx, 0.0)

    return sse


def corner_index(c) -> int:
    """Breakpoint b minimizing the two-line fit error of c[0..b] and c[b..L-1]."""
    c = np.asarray(c, dtype=float)
    L = c.size
    if L < 4:
        raise ValueError("need at least 4 points to locate a corner")
    scale = np.max(np.abs(c))
    y = c / scale if scale > 0 else c
    x = np.arange(L) / L
    sse = _segment_sse(x, y)
    b = np.arange(1, L - 1)
    total = sse(np.zeros_like(b), b) + sse(b, np.full_like(b, L - 1))
    return int(b[np.argmin(total)])


def estimate_wavenumber(signal) -> tuple[int, bool]:
    """Corner wavenumber k* of one component, plus whether the fallback was used."""
    y = np.asarray(signal, dtype=float)
    N = y.size
    if N < 8:
        raise ValueError("need at least 8 samples to estimate a wavenumber")
    if not np.all(np.isfinite(y)):
        raise ValueError("signal must be finite")
    spectrum = np.abs(np.fft.rfft(y))
    band = spectrum[1 : N // 2 + 1]
    if band.max() <= 1e-12 * max(spectrum[0], np.abs(y).max() * N, np.finfo(float).tiny):
        log.warning("flat spectrum; falling back to k* = N/16")
        return max(1, N // 16), True
    # band index i holds wavenumber i + 1
    k = corner_index(np.cumsum(band)) + 1
    return int(min(max(k, 1), N // 2)), False


def support_residual(m, N: int, k_star: float, tau: float = TAU, tau_hat: float = TAU_HAT) -> float:
    """Root function linking support m to k*, N and both decay tolerances."""
    return math.log((2 * m - 1) / m**2) * (4 * math.pi**2 * k_star**2 * m**2 - 3 * N**2 * tau_hat**2) - 2 * N**2 * tau_hat**2 * math.log(tau)


def degree_for_support(m: int, tau: float = TAU) -> int:
    """Smallest p >= 1 with ((2m - 1) / m^2)^p <= tau."""
    r = (2 * m - 1) / m**2
    if r <= tau:
        return 1
    p = max(1, math.ceil(math.log(tau) / math.log(r)))
    while r**p > tau:
        p += 1
    while p > 1 and r ** (p - 1) <= tau:
        p -= 1
    return p


def solve_support_and_degree(N: int, k_star: int, tau: float = TAU, tau_hat: float = TAU_HAT) -> tuple[int, int, bool]:
    """Return (m, p, fallback_used)."""
    if tau_hat >= 0:
        raise ValueError("tau_hat must be negative")
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if not 1 <= k_star <= N / 2:
        raise ValueError(f"k_star={k_star} outside [1, N/2]")
    lo, hi = 2.0, (N - 1) / 2.0
    m_max = (N - 1) // 2
    if m_max < 2:
        raise ValueError("record too short for a test function")
    f_lo = support_residual(lo, N, k_star, tau, tau_hat)
    f_hi = support_residual(hi, N, k_star, tau, tau_hat)
    if f_lo * f_hi > 0:
        log.warning("no sign change on the support bracket; falling back to m = N/20")
        m = max(2, N // 20)
        fallback = True
    else:
        root = bisect(support_residual, lo, hi, args=(N, k_star, tau, tau_hat), xtol=1e-10)
        m = int(math.floor(root + 0.5))
        fallback = False
    m = min(max(m, 2), m_max)
    return m, degree_for_support(m, tau), fallback


def build_test_function(m: int, p: int, dt: float, k_star: int | None = None, fallback_used: bool = False) -> TestFunction:
    if m < 2 or p < 1:
        raise ValueError("need m >= 2 and p >= 1")
    u = np.arange(-m, m + 1) / m
    base = 1.0 - u * u
    phi = base**p
    dphi = -(2.0 * p / (m * dt)) * u * base ** (p - 1)
    norm = np.linalg.norm(phi)
    sigma = m * dt / math.sqrt(2 * p + 3)
    return TestFunction(m, p, dt, phi / norm, dphi / norm, sigma, k_star, fallback_used)


def test_function_for(signal, dt: float, tau: float = TAU, tau_hat: float = TAU_HAT) -> TestFunction:
    signal = np.asarray(signal, dtype=float)
    k_star, flat = estimate_wavenumber(signal)
    m, p, no_root = solve_support_and_degree(signal.size, k_star, tau, tau_hat)
    return build_test_function(m, p, dt, k_star, flat or no_root)


def test_functions_from_data(states, dt: float, tau: float = TAU, tau_hat: float = TAU_HAT) -> list[TestFunction]:
    """One test function per state component."""
    X = np.asarray(states, dtype=float)
    return [test_function_for(X[:, d], dt, tau, tau_hat) for d in range(X.shape[1])]


test_function_for.__test__ = False
test_functions_from_data.__test__ = False
