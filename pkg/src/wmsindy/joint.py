"""Joint denoising and sparse model discovery.

The optimizer learns a coefficient matrix Xi and a per-sample noise estimate
N~ by Adam on one of four losses built from three blocks:

* e_r  weak residual of the denoised states (test-function pairing),
* e_d  derivative residual using central differences of the denoised states,
* e_s  q-step forward/backward RK4 simulation error, weighted by
       omega_i = omega_base ** (|i| - 1).

Gradients are exact and hand-derived: reverse passes through RK4 stages, the
library monomials, the weak-form correlations and the difference stencil.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse as sp

from . import _kernels
from .dynamics import KnownModel, ModelField, Trajectory
from .library import LibrarySpec, evaluate_library, library_vjp
from .sparse import SparseCoefficients, lstsq, stls, wsindy_identify
from .testfn import TAU, TAU_HAT, TestFunction, test_functions_from_data
from .weak import WeakOperator, build_weak_system

log = logging.getLogger(__name__)

WEAK_VARIANTS = ("wmsindy", "wmsindy_no_er")
DERIVATIVE_VARIANTS = ("msindy", "msindy_no_ed")
VARIANTS = WEAK_VARIANTS + DERIVATIVE_VARIANTS


@dataclass
class JointConfig:
    n_loop: int = 6
    lam: float = 0.2
    q: int = 1
    learning_rate: float = 1e-3
    iters_per_loop: int = 5000
    omega_base: float = 0.9
    loss_variant: str = "wmsindy"
    tau: float = TAU
    tau_hat: float = TAU_HAT
    seed: int = 0
    clamp: float = 1e6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.n_loop < 1 or self.q < 1 or self.lam < 0:
            raise ValueError("need n_loop >= 1, q >= 1 and lam >= 0")
        if self.loss_variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.loss_variant!r}")

    @property
    def uses_weak_residual(self) -> bool:
        return self.loss_variant == "wmsindy"

    @property
    def uses_derivative_error(self) -> bool:
        return self.loss_variant == "msindy"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IdentificationResult:
    """``noise`` is None for methods that do not estimate it."""

    method: str
    coeffs: SparseCoefficients
    noise: np.ndarray | None
    data: np.ndarray = field(repr=False)
    loop_trace: list[dict] = field(default_factory=list)
    wall_time: float = 0.0
    empty_model: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def denoised(self) -> np.ndarray:
        return self.data if self.noise is None else self.data - self.noise


def omega_weights(q: int, omega_base: float = 0.9) -> dict[int, float]:
    return {i: omega_base ** (abs(i) - 1) for i in range(-q, q + 1) if i != 0}


# --- differentiation stencil ------------------------------------------------


def central_difference_matrix(N: int, dt: float) -> sp.csr_matrix:
    """Second-order central differences, second-order one-sided at both ends (same as np.gradient)."""
    if N < 3:
        raise ValueError("need N >= 3 for second-order differences")
    rows, cols, vals = [], [], []
    for i in range(1, N - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5, 0.5]
    rows += [0, 0, 0, N - 1, N - 1, N - 1]
    cols += [0, 1, 2, N - 3, N - 2, N - 1]
    vals += [-1.5, 2.0, -0.5, 0.5, -2.0, 1.5]
    return sp.csr_matrix((np.array(vals) / dt, (rows, cols)), shape=(N, N))


def central_difference(X, dt: float) -> np.ndarray:
    return np.gradient(np.asarray(X, dtype=float), dt, axis=0, edge_order=2)


# --- loss blocks --------------------------------------------------------------


def simulation_error(Y, noise, coeffs, spec: LibrarySpec, known: KnownModel | None, q: int, dt: float, omega_base: float = 0.9, clamp: float = 1e6) -> float:
    """Weighted forward/backward q-step RK4 mismatch (value only; see :class:`JointLoss` for gradients)."""
    Y = np.asarray(Y, dtype=float)
    if q + 1 > Y.shape[0] - q:
        raise ValueError("record too short for this prediction horizon")
    loss = JointLoss(Y, spec, dt, q=q, omega_base=omega_base, known=known, variant="wmsindy_no_er", clamp=clamp)
    return loss.value(coeffs, noise)


def derivative_error(states, spec: LibrarySpec, coeffs, dt: float, known: KnownModel | None = None) -> float:
    X = np.asarray(states, dtype=float)
    if X.shape[0] < 3:
        raise ValueError("need N >= 3")
    F = ModelField(spec, coeffs, known)(X)
    return float(np.sum((central_difference(X, dt) - F) ** 2))


class JointLoss:
    """One of the four joint losses with its exact gradient in (Xi, N~).

    Test functions are fixed for the lifetime of the object (they are rebuilt
    between outer loops); B and G are re-evaluated from the current denoised
    states on every call.
    """

    def __init__(
        self,
        Y,
        spec: LibrarySpec,
        dt: float,
        q: int = 1,
        omega_base: float = 0.9,
        known: KnownModel | None = None,
        testfns: list[TestFunction] | None = None,
        variant: str = "wmsindy",
        clamp: float = 1e6,
        backend: str = "compiled",
    ):
        if backend not in ("compiled", "numpy"):
            raise ValueError(f"unknown backend {backend!r}")
        if variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {variant!r}")
        self.Y = np.asarray(Y, dtype=float)
        self.N, self.D = self.Y.shape
        if spec.D != self.D:
            raise ValueError("library dimension does not match the data")
        if q + 1 > self.N - q:
            raise ValueError("record too short for this prediction horizon")
        self.spec, self.dt, self.q, self.known, self.variant, self.clamp = spec, dt, q, known, variant, clamp
        self.omega = [omega_base ** (s - 1) for s in range(1, q + 1)]
        self.weak_op = None
        if variant == "wmsindy":
            if testfns is None:
                raise ValueError("the weak residual needs test functions")
            self.weak_op = WeakOperator(testfns, self.N)
        self.diff_op = central_difference_matrix(self.N, dt) if variant == "msindy" else None
        M = self.N - 2 * q
        self._h = np.concatenate([np.full(M, dt), np.full(M, -dt)])[:, None]
        self.backend = backend
        terms = spec.terms + (known.library.terms if known is not None else ())
        self._kernels = _kernels.kernels(tuple(terms)) if backend == "compiled" else None
        self._known_coeffs = known.coeffs if known is not None else np.zeros((0, self.D))
        self._omega = np.array(self.omega)

    # field helpers work on the library directly to reuse Theta between value and gradient
    def _field(self, X, xi):
        theta = evaluate_library(self.spec, X)
        F = theta @ xi
        if self.known is not None:
            F = F + self.known(X)
        return theta, F

    def _field_vjp(self, X, theta, V, xi):
        gx = library_vjp(self.spec, X, V @ xi.T)
        if self.known is not None:
            gx = gx + self.known.vjp(X, V)
        return gx, theta.T @ V

    def evaluate(self, xi, noise, grad: bool = True):
        """Return ``(loss, parts, grad_xi, grad_noise)``; gradients are None when ``grad`` is False."""
        xi = np.asarray(xi, dtype=float)
        X = self.Y - np.asarray(noise, dtype=float)
        N, q, dt = self.N, self.q, self.dt
        compiled = self.backend == "compiled"
        if compiled:
            C = np.ascontiguousarray(np.vstack([xi, self._known_coeffs]))
            F = self._kernels.field_all(X, C)
        else:
            theta, F = self._field(X, xi)
        parts = {}
        gF = np.zeros_like(X) if grad else None
        gX = np.zeros_like(X) if grad else None

        if self.weak_op is not None:
            r = self.weak_op.residual(F, X)
            parts["e_r"] = float(sum(np.dot(rd, rd) for rd in r))
            if grad:
                aF, aX = self.weak_op.adjoint([2.0 * rd for rd in r])
                gF += aF
                gX += aX
        if self.diff_op is not None:
            res = self.diff_op @ X - F
            parts["e_d"] = float(np.sum(res * res))
            if grad:
                gX += self.diff_op.T @ (2.0 * res)
                gF -= 2.0 * res

        if compiled:
            gC = np.zeros_like(C)
            if not grad:
                gX = gF = np.zeros((1, 1))
            parts["e_s"] = self._kernels.simulation_error(X, F, C, q, dt, self._omega, self.clamp, grad, gX, gF, gC)
            total = sum(parts.values())
            if not grad:
                return total, parts, None, None
            self._kernels.field_vjp_all(X, C, gF, gX, gC)
            return total, parts, gC[: self.spec.J].copy(), -gX

        e_s, gX_s, gF_mid, gxi_s = self._simulation(X, xi, F[q : N - q], grad)
        parts["e_s"] = e_s
        total = sum(parts.values())
        if not grad:
            return total, parts, None, None

        gX += gX_s
        gF[q : N - q] += gF_mid
        gx_field, gxi = self._field_vjp(X, theta, gF, xi)
        gX += gx_field
        gxi += gxi_s
        return total, parts, gxi, -gX

    def value(self, xi, noise) -> float:
        return self.evaluate(xi, noise, grad=False)[0]

    def _simulation(self, X, xi, F_start, grad):
        N, q = self.N, self.q
        M = N - 2 * q
        h = self._h
        x = np.concatenate([X[q : N - q], X[q : N - q]])
        k1_first = np.concatenate([F_start, F_start])
        dead = np.zeros(2 * M, dtype=bool)
        tape = []
        total = 0.0
        residuals = []
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(1, q + 1):
                if s == 1:
                    th1, k1 = None, k1_first
                else:
                    th1, k1 = self._field(x, xi)
                x2 = x + 0.5 * h * k1
                th2, k2 = self._field(x2, xi)
                x3 = x + 0.5 * h * k2
                th3, k3 = self._field(x3, xi)
                x4 = x + h * k3
                th4, k4 = self._field(x4, xi)
                x_next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                bad = ~np.all(np.isfinite(x_next) & (np.abs(x_next) <= self.clamp), axis=1)
                newly = bad & ~dead
                dead |= bad
                if newly.any():
                    for arr in (x2, x3, x4, x_next):
                        arr[newly] = 0.0
                    for arr in (th1, th2, th3, th4):
                        if arr is not None:
                            arr[newly] = 0.0
                    if s > 1:
                        x[newly] = 0.0
                x_next[dead] = 0.0
                target = np.concatenate([X[q + s : N - q + s], X[q - s : N - q - s]])
                e = target - x_next
                e[dead] = 0.0
                total += self.omega[s - 1] * (float(np.sum(e * e)) + float(dead.sum()) * self.clamp**2)
                residuals.append(e)
                tape.append((x, x2, x3, x4, th1, th2, th3, th4, dead.copy()))
                x = x_next
        if not grad:
            return total, None, None, None

        gX = np.zeros_like(X)
        gxi = np.zeros_like(xi)
        xbar = np.zeros((2 * M, self.D))
        gk1_first = None
        for s in range(q, 0, -1):
            x, x2, x3, x4, th1, th2, th3, th4, dead_s = tape[s - 1]
            e = residuals[s - 1]
            w = 2.0 * self.omega[s - 1]
            gX[q + s : N - q + s] += w * e[:M]
            gX[q - s : N - q - s] += w * e[M:]
            xbar = xbar - w * e
            xbar[dead_s] = 0.0
            # reverse the RK4 step x_next = x + h/6 (k1 + 2 k2 + 2 k3 + k4)
            k4bar = h / 6.0 * xbar
            k3bar = h / 3.0 * xbar
            k2bar = h / 3.0 * xbar
            k1bar = h / 6.0 * xbar
            gx4, g = self._field_vjp(x4, th4, k4bar, xi)
            gxi += g
            xbar = xbar + gx4
            k3bar = k3bar + h * gx4
            gx3, g = self._field_vjp(x3, th3, k3bar, xi)
            gxi += g
            xbar = xbar + gx3
            k2bar = k2bar + 0.5 * h * gx3
            gx2, g = self._field_vjp(x2, th2, k2bar, xi)
            gxi += g
            xbar = xbar + gx2
            k1bar = k1bar + 0.5 * h * gx2
            if s == 1:
                gk1_first = k1bar
            else:
                gx1, g = self._field_vjp(x, th1, k1bar, xi)
                gxi += g
                xbar = xbar + gx1
        gX[q : N - q] += xbar[:M] + xbar[M:]
        gF_mid = gk1_first[:M] + gk1_first[M:]
        return total, gX, gF_mid, gxi


def total_loss(Y, noise, coeffs, spec, testfns, known, config: JointConfig, dt: float) -> float:
    loss = JointLoss(Y, spec, dt, config.q, config.omega_base, known, testfns, config.loss_variant, config.clamp)
    return loss.value(coeffs, noise)


def loss_gradient(Y, noise, coeffs, active, spec, testfns, known, config: JointConfig, dt: float):
    """Exact gradient of the configured loss; inactive coefficients get zero."""
    loss = JointLoss(Y, spec, dt, config.q, config.omega_base, known, testfns, config.loss_variant, config.clamp)
    _, _, gxi, gnoise = loss.evaluate(np.where(active, coeffs, 0.0), noise)
    return np.where(active, gxi, 0.0), gnoise


# --- optimizer -----------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(state: AdamState, params, grads, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update; returns (new params, new state)."""
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grads
    v = beta2 * state.v + (1 - beta2) * grads * grads
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


def optimize(loss: JointLoss, xi, active, noise, config: JointConfig):
    """Adam on the active coefficients and the noise; returns (xi, noise, loss history)."""
    n_xi = int(active.sum())
    params = np.concatenate([xi[active], noise.ravel()])
    state = AdamState.zeros_like(params)
    history = np.empty(config.iters_per_loop)
    work = np.zeros_like(xi)
    for it in range(config.iters_per_loop):
        work[active] = params[:n_xi]
        value, _, gxi, gnoise = loss.evaluate(work, params[n_xi:].reshape(noise.shape))
        history[it] = value
        grads = np.concatenate([gxi[active], gnoise.ravel()])
        params, state = adam_step(state, params, grads, config.learning_rate, config.beta1, config.beta2, config.eps)
    work[active] = params[:n_xi]
    return work.copy(), params[n_xi:].reshape(noise.shape).copy(), history


# --- identifiers -----------------------------------------------------------------


def _threshold(xi, active, lam):
    active = active & (np.abs(xi) >= lam)
    return np.where(active, xi, 0.0), active


def _weak_refit(X, dt, spec, known, xi, active, config):
    testfns = test_functions_from_data(X, dt, config.tau, config.tau_hat)
    ws = build_weak_system(X, spec, testfns, known)
    xi = np.zeros_like(xi)
    for d in range(spec.D):
        if active[:, d].any():
            xi[active[:, d], d] = lstsq(ws.G[d][:, active[:, d]], ws.b[d])
    return xi, testfns


def _derivative_targets(X, dt, known):
    dX = central_difference(X, dt)
    if known is not None:
        dX = dX - known(X)
    return dX


def _derivative_refit(X, dt, spec, known, xi, active):
    theta = evaluate_library(spec, X)
    dX = _derivative_targets(X, dt, known)
    xi = np.zeros_like(xi)
    for d in range(spec.D):
        if active[:, d].any():
            xi[active[:, d], d] = lstsq(theta[:, active[:, d]], dX[:, d])
    return xi


def sindy_identify(data: Trajectory, spec: LibrarySpec, lam: float, known: KnownModel | None = None) -> SparseCoefficients:
    """Plain SINDy: STLS of central-difference derivatives on the library."""
    theta = evaluate_library(spec, data.states)
    dX = _derivative_targets(data.states, data.dt, known)
    return SparseCoefficients.from_columns([stls(theta, dX[:, d], lam) for d in range(spec.D)])


def _run_joint(Y: Trajectory, spec: LibrarySpec, config: JointConfig, known: KnownModel | None, weak: bool) -> IdentificationResult:
    start = time.perf_counter()
    data = Y.states
    dt = Y.dt
    trace = []
    if weak:
        init = wsindy_identify(Y, spec, config.tau, config.tau_hat, lam=config.lam, known=known)
        xi = init.coeffs.xi.copy()
        testfns = init.testfns
        initial = {"active": init.coeffs.n_active, "testfns": [tf.diagnostics(d + 1) for d, tf in enumerate(testfns)]}
    else:
        init = sindy_identify(Y, spec, config.lam, known)
        xi = init.xi.copy()
        testfns = None
        initial = {"active": init.n_active}
    active = np.ones_like(xi, dtype=bool)
    noise = np.zeros_like(data)
    empty = False
    for loop in range(1, config.n_loop + 1):
        t_loop = time.perf_counter()
        loss = JointLoss(data, spec, dt, config.q, config.omega_base, known, testfns, config.loss_variant, config.clamp)
        xi, noise, history = optimize(loss, xi, active, noise, config)
        _, parts, _, _ = loss.evaluate(xi, noise, grad=False)
        xi, active = _threshold(xi, active, config.lam)
        X = data - noise
        if weak:
            xi, testfns = _weak_refit(X, dt, spec, known, xi, active, config)
        else:
            xi = _derivative_refit(X, dt, spec, known, xi, active)
        # intermediate refits stay unthresholded so a biased term can change sign
        if loop == config.n_loop:
            xi, active = _threshold(xi, active, config.lam)
        entry = {
            "loop": loop,
            "loss": float(history[-1]),
            "loss_min": float(history.min()),
            **{k: float(v) for k, v in parts.items()},
            "active": int(active.sum()),
            "seconds": time.perf_counter() - t_loop,
        }
        if weak:
            entry["testfns"] = [tf.diagnostics(d + 1) for d, tf in enumerate(testfns)]
        trace.append(entry)
        log.info("loop %d: loss %.6g, active %d", loop, entry["loss"], entry["active"])
        if not active.any():
            log.warning("every coefficient was thresholded away; stopping")
            empty = True
            break
    method = config.loss_variant
    return IdentificationResult(method, SparseCoefficients(xi, active), noise, data.copy(), trace, time.perf_counter() - start, empty, {"initial": initial})


def run_wmsindy(Y: Trajectory, spec: LibrarySpec, config: JointConfig, known: KnownModel | None = None) -> IdentificationResult:
    if config.loss_variant not in WEAK_VARIANTS:
        raise ValueError(f"run_wmsindy needs a weak variant, got {config.loss_variant!r}")
    return _run_joint(Y, spec, config, known, weak=True)


def run_msindy(Y: Trajectory, spec: LibrarySpec, config: JointConfig, known: KnownModel | None = None) -> IdentificationResult:
    if config.loss_variant not in DERIVATIVE_VARIANTS:
        raise ValueError(f"run_msindy needs a derivative variant, got {config.loss_variant!r}")
    return _run_joint(Y, spec, config, known, weak=False)


def run_identifier(Y: Trajectory, spec: LibrarySpec, config: JointConfig, known: KnownModel | None = None) -> IdentificationResult:
    if config.loss_variant in WEAK_VARIANTS:
        return run_wmsindy(Y, spec, config, known)
    return run_msindy(Y, spec, config, known)


def run_nonzero_mean(Y: Trajectory, spec: LibrarySpec, config: JointConfig, known: KnownModel | None = None, outer_iterations: int = 3) -> IdentificationResult:
    """Repeat identification, removing the mean of the learned noise from the data between passes."""
    if outer_iterations < 1:
        raise ValueError("outer_iterations must be >= 1")
    shift = np.zeros(Y.D)
    means = []
    current = Y
    for it in range(outer_iterations):
        result = run_identifier(current, spec, config, known)
        mean = result.noise.mean(axis=0)
        means.append(mean.tolist())
        if it < outer_iterations - 1:
            shift += mean
            current = Y.with_states(Y.states - shift)
    result.noise = result.noise + shift
    result.data = Y.states.copy()
    result.extra["noise_means"] = means
    result.extra["subtracted_mean"] = shift.tolist()
    return result
