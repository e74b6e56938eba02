"""Brute-force references for the test suite.

Nothing here is fast and nothing here imports :mod:`adag.constraints`; these
are the independent side of every dual-route check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CoefficientSeq:
    """Truncated power series c0 + sum_{i=1..K} c_i x^i with c_i > 0."""

    c0: float
    c: tuple[float, ...]

    def __post_init__(self):
        if any(not ci > 0 for ci in self.c):
            raise ValueError("series coefficients c_1..c_K must all be positive")

    @property
    def K(self) -> int:
        return len(self.c)

    def full(self) -> np.ndarray:
        return np.concatenate([[self.c0], np.asarray(self.c, dtype=float)])

    @classmethod
    def from_full(cls, coeffs) -> "CoefficientSeq":
        coeffs = [float(x) for x in coeffs]
        return cls(c0=coeffs[0], c=tuple(coeffs[1:]))


def exp_coefficients(K: int) -> CoefficientSeq:
    return CoefficientSeq.from_full([1.0 / math.factorial(i) for i in range(K + 1)])


def log_coefficients(K: int, s: float = 1.0) -> CoefficientSeq:
    """-log(1 - x/s): c_i = 1 / (i s^i), c0 = 0."""
    return CoefficientSeq.from_full([0.0] + [1.0 / (i * s**i) for i in range(1, K + 1)])


def inverse_power_coefficients(n: int, K: int, s: float = 1.0) -> CoefficientSeq:
    """(1 - x/s)^{-n}: c_i = C(n+i-1, i) / s^i."""
    return CoefficientSeq.from_full([math.comb(n + i - 1, i) / s**i for i in range(K + 1)])


def resolvent_coefficients(K: int, s: float = 1.0) -> CoefficientSeq:
    """1 / (s - x) = sum_i x^i / s^{i+1}."""
    return CoefficientSeq.from_full([1.0 / s ** (i + 1) for i in range(K + 1)])


def differentiate(seq: CoefficientSeq, n: int) -> CoefficientSeq:
    """Coefficients of the n-th derivative (truncated n terms shorter)."""
    full = seq.full()
    K = len(full) - 1
    out = [full[i + n] * math.factorial(i + n) / math.factorial(i) for i in range(K - n + 1)]
    return CoefficientSeq.from_full(out)


def add(a: CoefficientSeq, b: CoefficientSeq) -> CoefficientSeq:
    K = min(a.K, b.K)
    return CoefficientSeq.from_full(a.full()[: K + 1] + b.full()[: K + 1])


def multiply(a: CoefficientSeq, b: CoefficientSeq) -> CoefficientSeq:
    K = min(a.K, b.K)
    fa, fb = a.full(), b.full()
    out = [sum(fa[j] * fb[i - j] for j in range(i + 1)) for i in range(K + 1)]
    return CoefficientSeq.from_full(out)


def truncated_trace(coeffs: CoefficientSeq, Bt: np.ndarray) -> float:
    """c0*d + sum_i c_i tr(Bt^i), by plain repeated multiplication."""
    Bt = np.asarray(Bt, dtype=float)
    d = Bt.shape[0]
    total = coeffs.c0 * d
    P = np.eye(d)
    for ci in coeffs.c:
        P = P @ Bt
        total += ci * np.trace(P)
    return float(total)


def finite_diff_gradient(h, Bt: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences, one entry at a time."""
    Bt = np.array(Bt, dtype=float)
    G = np.zeros_like(Bt)
    for i in range(Bt.shape[0]):
        for j in range(Bt.shape[1]):
            orig = Bt[i, j]
            Bt[i, j] = orig + step
            hp = h(Bt)
            Bt[i, j] = orig - step
            hm = h(Bt)
            Bt[i, j] = orig
            G[i, j] = (hp - hm) / (2 * step)
    return G


def finite_diff_hessian(grad, Bt: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d^2 x d^2 Hessian from central differences of a gradient map (column-major vec)."""
    Bt = np.array(Bt, dtype=float)
    d = Bt.shape[0]
    H = np.zeros((d * d, d * d))
    for j in range(d):
        for i in range(d):
            E = np.zeros_like(Bt)
            E[i, j] = step
            col = (grad(Bt + E) - grad(Bt - E)) / (2 * step)
            H[:, j * d + i] = col.ravel(order="F")
    return H


def nilpotency_acyclic(Bt: np.ndarray) -> bool:
    """Pattern-level nilpotency test: the 0/1 pattern P is a DAG iff P^d = 0."""
    P = (np.asarray(Bt) != 0).astype(float)
    d = P.shape[0]
    result = np.eye(d)
    base = P
    e = d
    while e:
        if e & 1:
            result = np.minimum(result @ base, 1.0)
        base = np.minimum(base @ base, 1.0)
        e >>= 1
    return bool(np.max(result) <= 1e-12)


def commutation_matrix(d: int) -> np.ndarray:
    """0/1 matrix with K vec(A) = vec(A^T), built from the basis matrices E_ij."""
    K = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d))
            E[i, j] = 1.0
            K += np.outer(E.T.ravel(order="F"), E.ravel(order="F"))
    return K


def dense_inverse(Bt: np.ndarray, s: float) -> np.ndarray:
    d = Bt.shape[0]
    return np.linalg.solve(np.eye(d) - np.asarray(Bt) / s, np.eye(d))
