"""Benchmark systems, ground-truth integration and the RK4 flow map of identified models."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .library import LibrarySpec, build_library, evaluate_library, library_vjp

TRUTH_TOL = 1e-12


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last valid time {last_time:.6g})")
        self.last_time = last_time


@dataclass(frozen=True)
class SystemSpec:
    """A named polynomial ODE.

    ``rhs`` works on arrays of shape (..., D).  ``terms`` lists the true
    coefficients per component as ``{exponent tuple: value}`` so the exact
    sparse matrix can be laid out on any library that contains them.
    """

    name: str
    D: int
    params: dict
    rhs: Callable[[np.ndarray], np.ndarray]
    terms: tuple[dict, ...]
    x0: tuple[float, ...] = ()
    t_total: float = 25.0
    max_degree: int = 2
    include_constant: bool = False

    def library(self) -> LibrarySpec:
        return build_library(self.D, self.max_degree, self.include_constant)

    def true_coefficients(self, spec: LibrarySpec | None = None) -> np.ndarray:
        spec = spec or self.library()
        xi = np.zeros((spec.J, self.D))
        for d, comp in enumerate(self.terms):
            for exps, value in comp.items():
                if tuple(exps) not in spec.terms:
                    raise ValueError(f"{self.name}: term {exps} missing from library")
                xi[spec.index(exps), d] = value
        return xi


@dataclass(frozen=True)
class Trajectory:
    t0: float
    dt: float
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise ValueError("a trajectory needs an (N, D) state matrix with N >= 2")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory contains non-finite values")
        object.__setattr__(self, "states", states)

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @property
    def D(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.N)

    def with_states(self, states) -> "Trajectory":
        return Trajectory(self.t0, self.dt, states)

    def to_csv(self, path) -> None:
        write_csv(path, ["t"] + [f"x{d + 1}" for d in range(self.D)], np.column_stack([self.times, self.states]))

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        if header[0] != "t":
            raise ValueError(f"{path}: first column must be 't'")
        t = body[:, 0]
        dt = float(np.mean(np.diff(t)))
        if not np.allclose(np.diff(t), dt, rtol=1e-8, atol=1e-12):
            raise ValueError(f"{path}: samples are not uniformly spaced")
        return cls(float(t[0]), dt, body[:, 1:])


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in np.atleast_2d(rows):
            writer.writerow(["%.17g" % v for v in row])


@dataclass(frozen=True)
class KnownModel:
    """Known part g(x) of the dynamics, stored as a polynomial so it can be differentiated."""

    library: LibrarySpec
    coeffs: np.ndarray = field(repr=False)

    def __call__(self, states) -> np.ndarray:
        return evaluate_library(self.library, states) @ self.coeffs

    def vjp(self, states, cotangent) -> np.ndarray:
        return library_vjp(self.library, states, np.asarray(cotangent) @ self.coeffs.T)

    @classmethod
    def from_system(cls, system: SystemSpec) -> "KnownModel":
        spec = system.library()
        return cls(spec, system.true_coefficients(spec))


# --- presets ----------------------------------------------------------------


def _e(D, *idx):
    exps = [0] * D
    for i in idx:
        exps[i] += 1
    return tuple(exps)


def lorenz(sigma=10.0, rho=28.0, beta=8.0 / 3.0) -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.stack(
            [sigma * (x[..., 1] - x[..., 0]), x[..., 0] * (rho - x[..., 2]) - x[..., 1], x[..., 0] * x[..., 1] - beta * x[..., 2]],
            axis=-1,
        )

    e = lambda *i: _e(3, *i)  # noqa: E731
    terms = (
        {e(0): -sigma, e(1): sigma},
        {e(0): rho, e(0, 2): -1.0, e(1): -1.0},
        {e(0, 1): 1.0, e(2): -beta},
    )
    return SystemSpec("lorenz", 3, dict(sigma=sigma, rho=rho, beta=beta), rhs, terms, (5.0, 5.0, 25.0), 25.0, 2, False)


def rossler(a=0.2, b=0.2, c=5.7) -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.stack(
            [-x[..., 1] - x[..., 2], x[..., 0] + a * x[..., 1], b + x[..., 2] * (x[..., 0] - c)],
            axis=-1,
        )

    e = lambda *i: _e(3, *i)  # noqa: E731
    terms = ({e(1): -1.0, e(2): -1.0}, {e(0): 1.0, e(1): a}, {e(): b, e(0, 2): 1.0, e(2): -c})
    return SystemSpec("rossler", 3, dict(a=a, b=b, c=c), rhs, terms, (3.0, 5.0, 0.0), 25.0, 2, True)


def lorenz96(F=8.0, D=6) -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return (np.roll(x, -1, axis=-1) - np.roll(x, 2, axis=-1)) * np.roll(x, 1, axis=-1) - x + F

    terms = []
    for i in range(D):
        comp = {_e(D, (i + 1) % D, (i - 1) % D): 1.0, _e(D, (i - 2) % D, (i - 1) % D): -1.0, _e(D, i): -1.0, _e(D): F}
        terms.append(comp)
    x0 = (1.0,) + (8.0,) * (D - 1)
    return SystemSpec("lorenz96", D, dict(F=F, S=D), rhs, tuple(terms), x0, 25.0, 2, True)


def vanderpol(mu=0.5) -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], mu * (1 - x[..., 0] ** 2) * x[..., 1] - x[..., 0]], axis=-1)

    e = lambda *i: _e(2, *i)  # noqa: E731
    terms = ({e(1): 1.0}, {e(1): mu, e(0, 0, 1): -mu, e(0): -1.0})
    return SystemSpec("vanderpol", 2, dict(mu=mu), rhs, terms, (-2.0, 1.0), 10.0, 3, False)


def duffing(p1=0.2, p2=0.1, p3=1.0) -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], -p1 * x[..., 1] - p2 * x[..., 0] - p3 * x[..., 0] ** 3], axis=-1)

    e = lambda *i: _e(2, *i)  # noqa: E731
    terms = ({e(1): 1.0}, {e(1): -p1, e(0): -p2, e(0, 0, 0): -p3})
    return SystemSpec("duffing", 2, dict(p1=p1, p2=p2, p3=p3), rhs, terms, (-2.0, 2.0), 25.0, 3, False)


def cubic(p1=-0.1, p2=2.0, p3=-2.0, p4=-1.0) -> SystemSpec:
    # second equation uses p3 on x^3; with p2 there the solution from (0, 2) blows up near t = 0.3
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.stack([p1 * x[..., 0] ** 3 + p2 * x[..., 1] ** 3, p3 * x[..., 0] ** 3 + p4 * x[..., 1] ** 3], axis=-1)

    e = lambda *i: _e(2, *i)  # noqa: E731
    terms = ({e(0, 0, 0): p1, e(1, 1, 1): p2}, {e(0, 0, 0): p3, e(1, 1, 1): p4})
    return SystemSpec("cubic", 2, dict(p1=p1, p2=p2, p3=p3, p4=p4), rhs, terms, (0.0, 2.0), 25.0, 3, False)


def lotka(p1=1.0, p2=0.5) -> SystemSpec:
    # predator death term is -2*p1*y; with -2*p1*x the prey escapes to infinity near t = 2.1
    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.stack([p1 * x[..., 0] - p2 * x[..., 0] * x[..., 1], p2 * x[..., 0] * x[..., 1] - 2 * p1 * x[..., 1]], axis=-1)

    e = lambda *i: _e(2, *i)  # noqa: E731
    terms = ({e(0): p1, e(0, 1): -p2}, {e(0, 1): p2, e(1): -2 * p1})
    return SystemSpec("lotka", 2, dict(p1=p1, p2=p2), rhs, terms, (1.0, 2.0), 10.0, 2, False)


def lorenz_modified() -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([-10 * X + 10 * Y + X * Y, 28 * X - X * Z - Y + 3 * Z, X * Y - 8.0 / 3.0 * Z], axis=-1)

    e = lambda *i: _e(3, *i)  # noqa: E731
    terms = (
        {e(0): -10.0, e(1): 10.0, e(0, 1): 1.0},
        {e(0): 28.0, e(0, 2): -1.0, e(1): -1.0, e(2): 3.0},
        {e(0, 1): 1.0, e(2): -8.0 / 3.0},
    )
    return SystemSpec("lorenz_modified", 3, {}, rhs, terms, (5.0, 5.0, 25.0), 30.0, 2, False)


def lorenz_known() -> SystemSpec:
    def rhs(x):
        x = np.asarray(x, dtype=float)
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([-9.5 * X + 10.5 * Y, 27.6 * X - 1.1 * X * Z - 0.9 * Y, 1.05 * X * Y - 2.6 * Z], axis=-1)

    e = lambda *i: _e(3, *i)  # noqa: E731
    terms = (
        {e(0): -9.5, e(1): 10.5},
        {e(0): 27.6, e(0, 2): -1.1, e(1): -0.9},
        {e(0, 1): 1.05, e(2): -2.6},
    )
    return SystemSpec("lorenz_known", 3, {}, rhs, terms, (5.0, 5.0, 25.0), 30.0, 2, False)


PRESETS: dict[str, Callable[[], SystemSpec]] = {
    "lorenz": lorenz,
    "rossler": rossler,
    "lorenz96": lorenz96,
    "vanderpol": vanderpol,
    "duffing": duffing,
    "cubic": cubic,
    "lotka": lotka,
    "lorenz_modified": lorenz_modified,
    "lorenz_known": lorenz_known,
}


def get_system(name: str) -> SystemSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(PRESETS)}") from None


def discrepancy_coefficients(full: SystemSpec, known: KnownModel, spec: LibrarySpec) -> np.ndarray:
    """Coefficients of the missing dynamics f - g on ``spec``."""
    return full.true_coefficients(spec) - _relayout(known, spec)


def _relayout(known: KnownModel, spec: LibrarySpec) -> np.ndarray:
    xi = np.zeros((spec.J, known.coeffs.shape[1]))
    for j, exps in enumerate(known.library.terms):
        if np.any(known.coeffs[j]):
            xi[spec.index(exps)] = known.coeffs[j]
    return xi


# --- evaluation and integration ---------------------------------------------


def eval_rhs(system: SystemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != system.D:
        raise ValueError(f"{system.name} expects states of length {system.D}, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    return system.rhs(x)


def simulate_truth(system: SystemSpec, x0, t_total: float, dt: float, tol: float = TRUTH_TOL) -> Trajectory:
    """Adaptive RK45 at tight tolerances, read off on the uniform grid via dense output."""
    if not (t_total > 0 and dt > 0):
        raise ValueError("t_total and dt must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.D,):
        raise ValueError(f"{system.name} expects an initial condition of length {system.D}")
    n_steps = int(round(t_total / dt))
    grid = dt * np.arange(n_steps + 1)
    sol = solve_ivp(lambda t, x: system.rhs(x), (0.0, grid[-1]), x0, method="RK45", t_eval=grid, rtol=tol, atol=tol)
    if sol.status != 0 or sol.y.shape[1] != grid.size or not np.all(np.isfinite(sol.y)):
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"{system.name}: {sol.message}", last)
    return Trajectory(0.0, dt, sol.y.T.copy())


def rk4_step(f: Callable, x, dt: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class ModelField:
    """Vector field g(x) + Theta(x) Xi of an identified model, with its vector-Jacobian products."""

    def __init__(self, spec: LibrarySpec, coeffs, known: KnownModel | None = None):
        self.spec = spec
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.known = known

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        shape = X.shape
        X2 = X.reshape(-1, self.spec.D)
        out = evaluate_library(self.spec, X2) @ self.coeffs
        if self.known is not None:
            out = out + self.known(X2)
        return out.reshape(shape)

    def vjp(self, X, V) -> tuple[np.ndarray, np.ndarray]:
        """Return (dL/dX, dL/dXi) given dL/df = V at states X, both (M, D)."""
        theta = evaluate_library(self.spec, X)
        gx = library_vjp(self.spec, X, V @ self.coeffs.T)
        if self.known is not None:
            gx = gx + self.known.vjp(X, V)
        return gx, theta.T @ V


def flow_map(coeffs, spec: LibrarySpec, known: KnownModel | None, x, q: int, dt: float, direction: str = "forward") -> np.ndarray:
    """q composed RK4 steps of the identified model; ``backward`` steps with -dt."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    h = dt if direction == "forward" else -dt
    field_ = ModelField(spec, coeffs, known)
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(q):
            x = rk4_step(field_, x, h)
    return x


def rollout(coeffs, spec: LibrarySpec, known: KnownModel | None, x0, n_steps: int, dt: float) -> np.ndarray:
    """Forward RK4 trajectory of the identified model, shape (n_steps + 1, D); non-finite once diverged."""
    field_ = ModelField(spec, coeffs, known)
    out = np.full((n_steps + 1, len(x0)), np.nan)
    out[0] = x0
    x = np.asarray(x0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_steps + 1):
            x = rk4_step(field_, x, dt)
            if not np.all(np.isfinite(x)):
                break
            out[k] = x
    return out
