"""Compiled kernels for polynomial vector fields and the RK4 simulation error.

Point kernels are generated as straight-line source for each monomial table
and compiled with numba; the sample loops close over them.  They mirror the
numpy code paths in ``library`` and ``joint`` and are checked against them in
the test suite.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numba import njit


def _monomial(t) -> str:
    factors = [f"x{d}" for d in range(len(t)) for _ in range(t[d])]
    return " * ".join(factors) if factors else "1.0"


def _partial(t, d) -> str | None:
    if t[d] == 0:
        return None
    rest = list(t)
    rest[d] -= 1
    body = _monomial(rest)
    return body if t[d] == 1 else f"{t[d]}.0 * {body}"


def _point_source(terms) -> str:
    D = len(terms[0])
    K = len(terms)
    load = [f"    x{d} = x[{d}]" for d in range(D)]
    lines = ["def field(x, C, out):", *load]
    lines += [f"    t{k} = {_monomial(t)}" for k, t in enumerate(terms)]
    for d in range(D):
        lines.append(f"    out[{d}] = " + " + ".join(f"C[{k}, {d}] * t{k}" for k in range(K)))
    lines += ["", "", "def field_vjp(x, C, v, gx, gC):", *load]
    lines += [f"    v{d} = v[{d}]" for d in range(D)]
    lines += [f"    g{d} = 0.0" for d in range(D)]
    for k, t in enumerate(terms):
        lines.append(f"    t = {_monomial(t)}")
        lines += [f"    gC[{k}, {d}] += t * v{d}" for d in range(D)]
        partials = [(d, _partial(t, d)) for d in range(D)]
        if any(p for _, p in partials):
            lines.append(f"    w = " + " + ".join(f"C[{k}, {d}] * v{d}" for d in range(D)))
            lines += [f"    g{d} += w * {p}" for d, p in partials if p]
    lines += [f"    gx[{d}] += g{d}" for d in range(D)]
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def kernels(terms: tuple) -> "FieldKernels":
    return FieldKernels(terms)


class FieldKernels:
    """Compiled evaluation, vjp and simulation error for one monomial table."""

    def __init__(self, terms):
        self.terms = tuple(tuple(t) for t in terms)
        namespace: dict = {}
        exec(compile(_point_source(self.terms), f"<field kernels {len(self.terms)} terms>", "exec"), namespace)
        field = njit(namespace["field"])
        field_vjp = njit(namespace["field_vjp"])
        self.point_field = field
        self.point_vjp = field_vjp

        @njit
        def field_all(X, C):
            N, D = X.shape
            F = np.empty((N, D))
            for n in range(N):
                field(X[n], C, F[n])
            return F

        @njit
        def field_vjp_all(X, C, V, gX, gC):
            for n in range(X.shape[0]):
                field_vjp(X[n], C, V[n], gX[n], gC)

        @njit
        def simulation_error(X, F, C, q, dt, omega, clamp, grad, gX, gF, gC):
            N, D = X.shape
            xs = np.empty((q + 1, D))
            x2s = np.empty((q, D))
            x3s = np.empty((q, D))
            x4s = np.empty((q, D))
            k1 = np.empty(D)
            k2 = np.empty(D)
            k3 = np.empty(D)
            k4 = np.empty(D)
            xbar = np.empty(D)
            k1b = np.empty(D)
            k2b = np.empty(D)
            k3b = np.empty(D)
            k4b = np.empty(D)
            gtmp = np.empty(D)
            total = 0.0
            for j in range(q, N - q):
                for direction in range(2):
                    step = 1 if direction == 0 else -1
                    h = step * dt
                    for d in range(D):
                        xs[0, d] = X[j, d]
                    alive = q
                    for s in range(q):
                        x = xs[s]
                        x2 = x2s[s]
                        x3 = x3s[s]
                        x4 = x4s[s]
                        if s == 0:
                            for d in range(D):
                                k1[d] = F[j, d]
                        else:
                            field(x, C, k1)
                        for d in range(D):
                            x2[d] = x[d] + 0.5 * h * k1[d]
                        field(x2, C, k2)
                        for d in range(D):
                            x3[d] = x[d] + 0.5 * h * k2[d]
                        field(x3, C, k3)
                        for d in range(D):
                            x4[d] = x[d] + h * k3[d]
                        field(x4, C, k4)
                        xn = xs[s + 1]
                        ok = True
                        for d in range(D):
                            xn[d] = x[d] + h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d])
                            if not (math.isfinite(xn[d]) and abs(xn[d]) <= clamp):
                                ok = False
                        if not ok:
                            alive = s
                            break
                    for s in range(alive):
                        t = j + step * (s + 1)
                        acc = 0.0
                        for d in range(D):
                            e = X[t, d] - xs[s + 1, d]
                            acc += e * e
                        total += omega[s] * acc
                    for s in range(alive, q):
                        total += omega[s] * clamp * clamp
                    if not grad:
                        continue
                    for d in range(D):
                        xbar[d] = 0.0
                    for s in range(alive - 1, -1, -1):
                        t = j + step * (s + 1)
                        w = 2.0 * omega[s]
                        for d in range(D):
                            e = X[t, d] - xs[s + 1, d]
                            gX[t, d] += w * e
                            xbar[d] -= w * e
                            k4b[d] = h / 6.0 * xbar[d]
                            k3b[d] = h / 3.0 * xbar[d]
                            k2b[d] = h / 3.0 * xbar[d]
                            k1b[d] = h / 6.0 * xbar[d]
                            gtmp[d] = 0.0
                        field_vjp(x4s[s], C, k4b, gtmp, gC)
                        for d in range(D):
                            xbar[d] += gtmp[d]
                            k3b[d] += h * gtmp[d]
                            gtmp[d] = 0.0
                        field_vjp(x3s[s], C, k3b, gtmp, gC)
                        for d in range(D):
                            xbar[d] += gtmp[d]
                            k2b[d] += 0.5 * h * gtmp[d]
                            gtmp[d] = 0.0
                        field_vjp(x2s[s], C, k2b, gtmp, gC)
                        for d in range(D):
                            xbar[d] += gtmp[d]
                            k1b[d] += 0.5 * h * gtmp[d]
                        if s == 0:
                            for d in range(D):
                                gF[j, d] += k1b[d]
                        else:
                            for d in range(D):
                                gtmp[d] = 0.0
                            field_vjp(xs[s], C, k1b, gtmp, gC)
                            for d in range(D):
                                xbar[d] += gtmp[d]
                    for d in range(D):
                        gX[j, d] += xbar[d]
            return total

        self.field_all = field_all
        self.field_vjp_all = field_vjp_all
        self._simulation_error = simulation_error

    def simulation_error(self, X, F, C, q, dt, omega, clamp, grad, gX, gF, gC) -> float:
        """Forward/backward q-step RK4 mismatch from every start j in [q, N-q).

        ``F`` holds the field at every sample (reused as the first RK4 stage).
        When ``grad`` is set, cotangents are accumulated into gX, gF and gC.
        A rollout leaving the clamp box is stopped; each remaining step then
        costs omega_s * clamp**2 with no gradient.
        """
        return self._simulation_error(X, F, C, q, dt, omega, clamp, grad, gX, gF, gC)
