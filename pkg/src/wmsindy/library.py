"""Polynomial candidate libraries.

A library is an ordered tuple of exponent tuples.  Terms are sorted by total
degree, then so that ``x1`` precedes ``x2`` within a degree (``x1, x2, x1^2,
x1*x2, x2^2`` for two states), which keeps serialized coefficient matrices
portable between runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np


def _exponent_tuples(D: int, max_degree: int, include_constant: bool) -> tuple[tuple[int, ...], ...]:
    start = 0 if include_constant else 1
    terms = []
    for degree in range(start, max_degree + 1):
        same_degree = [
            tuple(combo.count(d) for d in range(D))
            for combo in itertools.combinations_with_replacement(range(D), degree)
        ]
        terms.extend(sorted(same_degree, reverse=True))
    return tuple(terms)


@dataclass(frozen=True)
class LibrarySpec:
    D: int
    max_degree: int
    include_constant: bool = False
    terms: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        if self.D < 1 or self.max_degree < 1:
            raise ValueError(f"need D >= 1 and max_degree >= 1, got D={self.D}, max_degree={self.max_degree}")
        if not self.terms:
            object.__setattr__(self, "terms", _exponent_tuples(self.D, self.max_degree, self.include_constant))
        if any(len(t) != self.D for t in self.terms):
            raise ValueError("every exponent tuple must have length D")
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate exponent tuples in library")

    @property
    def J(self) -> int:
        return len(self.terms)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([sum(t) for t in self.terms], dtype=int)

    @cached_property
    def term_names(self) -> list[str]:
        return [term_name(t) for t in self.terms]

    def index(self, exponents) -> int:
        return self.terms.index(tuple(exponents))

    @cached_property
    def _groups(self):
        # (columns, variable indices per factor, one-hot scatter per factor) for each degree >= 1
        groups = []
        for degree in sorted(set(self.degrees.tolist()) - {0}):
            cols = np.flatnonzero(self.degrees == degree)
            idx = np.array(
                [[d for d in range(self.D) for _ in range(self.terms[c][d])] for c in cols],
                dtype=int,
            )
            scatter = []
            for p in range(degree):
                S = np.zeros((len(cols), self.D))
                S[np.arange(len(cols)), idx[:, p]] = 1.0
                scatter.append(S)
            groups.append((cols, idx, scatter))
        return groups

    @cached_property
    def _constant_cols(self) -> np.ndarray:
        return np.flatnonzero(self.degrees == 0)


def term_name(exponents) -> str:
    factors = []
    for d, e in enumerate(exponents):
        if e == 1:
            factors.append(f"x{d + 1}")
        elif e > 1:
            factors.append(f"x{d + 1}^{e}")
    return "*".join(factors) if factors else "1"


def build_library(D: int, max_degree: int, include_constant: bool = False) -> LibrarySpec:
    spec = LibrarySpec(D, max_degree, include_constant)
    assert spec.J == comb(D + max_degree, max_degree) - (0 if include_constant else 1)
    return spec


def _check_states(spec: LibrarySpec, states) -> np.ndarray:
    X = np.asarray(states, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != spec.D:
        raise ValueError(f"states must have {spec.D} columns, got shape {np.shape(states)}")
    return X


def evaluate_library(spec: LibrarySpec, states) -> np.ndarray:
    """Pointwise evaluation of every term, shape (N, J)."""
    X = _check_states(spec, states)
    theta = np.empty((X.shape[0], spec.J))
    theta[:, spec._constant_cols] = 1.0
    for cols, idx, _ in spec._groups:
        prod = X[:, idx[:, 0]]
        for p in range(1, idx.shape[1]):
            prod = prod * X[:, idx[:, p]]
        theta[:, cols] = prod
    return theta


def library_vjp(spec: LibrarySpec, states, cotangent) -> np.ndarray:
    """Pull a cotangent on the (N, J) library output back onto the (N, D) states."""
    X = _check_states(spec, states)
    W = np.asarray(cotangent, dtype=float)
    grad = np.zeros_like(X)
    for cols, idx, scatter in spec._groups:
        Wk = W[:, cols]
        degree = idx.shape[1]
        if degree == 1:
            grad += Wk @ scatter[0]
            continue
        factors = [X[:, idx[:, p]] for p in range(degree)]
        for p in range(degree):
            others = Wk
            for p2 in range(degree):
                if p2 != p:
                    others = others * factors[p2]
            grad += others @ scatter[p]
    return grad


def library_jacobian(spec: LibrarySpec, states) -> np.ndarray:
    """Analytic partials d theta_j / d x_d, shape (N, J, D)."""
    X = _check_states(spec, states)
    E = np.array(spec.terms, dtype=float)  # (J, D)
    jac = np.zeros((X.shape[0], spec.J, spec.D))
    for j, exps in enumerate(spec.terms):
        for d in range(spec.D):
            if exps[d] == 0:
                continue
            lowered = list(exps)
            lowered[d] -= 1
            col = np.ones(X.shape[0])
            for dd, e in enumerate(lowered):
                if e:
                    col = col * X[:, dd] ** e
            jac[:, j, d] = E[j, d] * col
    return jac


def coefficients_to_records(spec: LibrarySpec, coeffs) -> list[dict]:
    """Flatten a (J, D) coefficient matrix into JSON-ready rows."""
    coeffs = np.asarray(coeffs, dtype=float)
    return [
        {"component": d + 1, "term": spec.term_names[j], "value": float(coeffs[j, d])}
        for d in range(spec.D)
        for j in range(spec.J)
    ]
