"""Analytic acyclicity constraints h(B~) and their gradients.

All constraints act on a nonnegative matrix ``Bt`` (usually ``B * B``) and
vanish exactly when the nonzero pattern of ``Bt`` is a DAG:

* ``exp``     h = tr exp(Bt) - d
* ``logdet``  h = -log det(I - Bt/s)
* ``inv``     h = tr (I - Bt/s)^{-n} - d

The finite-radius families share one cached quantity, the Neumann-series
inverse D = (I - Bt/s)^{-1}, computed by repeated squaring in
:func:`series_inverse`.  When the series does not converge inside the
doubling budget the scale ``s`` is raised above the spectral radius of
``Bt`` (or its spectral norm, ``reset_estimate="norm"``) and the evaluation restarts.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import binom

FAMILIES = ("exp", "logdet", "inv")
RESET_ESTIMATES = ("radius", "norm")

# preset name -> (family, inverse-power order)
PRESETS = {
    "exponential": ("exp", 0),
    "order1": ("logdet", 0),
    "order2": ("inv", 1),
    "order3": ("inv", 2),
    "order4": ("inv", 3),
}


# floor on the doubling counter k; a bare k < 2d budget truncates convergent
# series at small d and forces needless scale resets
MIN_TERM_CAP = 64


class SeriesDivergenceError(RuntimeError):
    """Raised when repeated s resets fail to make the Neumann series converge."""


@dataclass(frozen=True)
class ConstraintSpec:
    family: str = "logdet"
    n: int = 1
    s: float = 1.0
    eps: float = 1e-8
    xi: float | None = None
    max_doublings: int | None = None
    max_resets: int = 40
    compat_scaling: bool = False
    reset_estimate: str = "radius"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown constraint family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "inv" and self.n < 1:
            raise ValueError(f"inverse-power order must be >= 1, got {self.n}")
        if not self.s > 0:
            raise ValueError(f"scale s must be positive, got {self.s}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.xi is not None and not self.xi > 0:
            raise ValueError(f"reset margin xi must be positive, got {self.xi}")
        if self.reset_estimate not in RESET_ESTIMATES:
            raise ValueError(f"unknown reset estimate {self.reset_estimate!r}; expected one of {RESET_ESTIMATES}")

    @property
    def order_index(self) -> int:
        """Position in the Order-k ladder: log-det is 1, inverse power n is n + 1."""
        if self.family == "logdet":
            return 1
        if self.family == "inv":
            return self.n + 1
        return 0

    @property
    def reset_margin(self) -> float:
        if self.xi is not None:
            return self.xi
        return 0.1 * max(1, self.order_index)

    def with_s(self, s: float) -> "ConstraintSpec":
        return replace(self, s=s)


def exponential(**kw) -> ConstraintSpec:
    return ConstraintSpec(family="exp", **kw)


def logdet(s: float = 1.0, **kw) -> ConstraintSpec:
    return ConstraintSpec(family="logdet", s=s, **kw)


def inverse_power(n: int, s: float = 1.0, **kw) -> ConstraintSpec:
    return ConstraintSpec(family="inv", n=n, s=s, **kw)


def preset(name: str, s: float = 1.0, **kw) -> ConstraintSpec:
    key = name.lower().replace("-", "").replace("_", "")
    if key not in PRESETS:
        raise ValueError(f"unknown constraint preset {name!r}; expected one of {sorted(PRESETS)}")
    family, n = PRESETS[key]
    if family == "inv":
        return ConstraintSpec(family=family, n=n, s=s, **kw)
    return ConstraintSpec(family=family, s=s, **kw)


@dataclass
class SeriesInverseResult:
    D: np.ndarray
    s_used: float
    converged: bool
    residual: float
    doublings: int = 0
    resets: int = 0
    residuals: list[float] = field(default_factory=list)


@dataclass
class ConstraintEval:
    value: float
    gradient: np.ndarray
    s_used: float
    converged: bool = True
    doublings: int = 0
    resets: int = 0


def spectral_radius_estimate(M: np.ndarray) -> float:
    """Largest singular value of ``M``; an upper bound on its spectral radius."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus of ``M``."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(M)).max())


def _check_nonneg(Bt: np.ndarray) -> np.ndarray:
    Bt = np.asarray(Bt, dtype=float)
    if Bt.ndim != 2 or Bt.shape[0] != Bt.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Bt.shape}")
    if not np.all(np.isfinite(Bt)):
        raise ValueError("B~ has non-finite entries")
    if np.any(Bt < 0):
        raise ValueError("B~ must be elementwise nonnegative")
    return Bt


def _doubling_inverse(A: np.ndarray, eps: float, cap: int):
    """Sum the Neumann series of A by repeated squaring.

    With D = sum_{i<2k} A^i we have D(I - A) - I = -A^{2k}, so the norm of the
    next squared power is the residual of the current D.
    """
    d = A.shape[0]
    eye = np.eye(d)
    D = eye + A
    W = A
    k = 1
    history = []
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            P = W @ W
            r = float(np.linalg.norm(P))
            history.append(r)
            if r <= eps:
                # P is already paid for; folding it in squares the residual
                if r > 0:
                    D = D + D @ P
                    k *= 2
                break
            if not math.isfinite(r) or k >= cap:
                break
            W = P
            D = D + D @ P
            k *= 2
        residual = float(np.linalg.norm(D @ (eye - A) - eye))
    converged = math.isfinite(residual) and residual <= eps
    return D, converged, residual, int(math.log2(k)), history


def series_inverse(Bt: np.ndarray, spec: ConstraintSpec, s: float | None = None) -> SeriesInverseResult:
    """(I - Bt/s)^{-1} by doubling, raising ``s`` until the series converges."""
    Bt = _check_nonneg(Bt)
    d = Bt.shape[0]
    s = spec.s if s is None else float(s)
    cap = max(2 * d, MIN_TERM_CAP) if spec.max_doublings is None else 2 ** spec.max_doublings
    radius = None
    for attempt in range(spec.max_resets + 1):
        D, ok, residual, doublings, history = _doubling_inverse(Bt / s, spec.eps, cap)
        if ok:
            return SeriesInverseResult(D=D, s_used=s, converged=True, residual=residual,
                                       doublings=doublings, resets=attempt, residuals=history)
        if radius is None:
            # the norm can exceed rho by orders of magnitude on strongly non-normal
            # inputs, which would all but switch the constraint off
            radius = spectral_radius(Bt) if spec.reset_estimate == "radius" else spectral_radius_estimate(Bt)
        margin = spec.reset_margin * 2.0 ** attempt
        s_new = radius + margin
        if s_new <= s:
            s_new = s + margin
        s = s_new
    raise SeriesDivergenceError(
        f"Neumann series failed to converge after {spec.max_resets} scale resets "
        f"(last s={s:.6g}, radius estimate {radius:.6g})"
    )


def expm_taylor(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring a Taylor kernel."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    norm = np.linalg.norm(A, 1)
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    X = A / 2.0 ** squarings
    E = np.eye(d)
    term = np.eye(d)
    # ||X||_1 <= 1/2, so the remainder after term k is below 2 * ||term_k||
    for k in range(1, 60):
        term = term @ X / k
        E = E + term
        if np.linalg.norm(term, 1) <= 1e-18 * np.linalg.norm(E, 1):
            break
    for _ in range(squarings):
        E = E @ E
    return E


def _from_inverse(spec: ConstraintSpec, Bt: np.ndarray, res: SeriesInverseResult) -> ConstraintEval:
    D, s = res.D, res.s_used
    d = Bt.shape[0]
    if spec.family == "logdet":
        sign, logabsdet = np.linalg.slogdet(np.eye(d) - Bt / s)
        value = -logabsdet if sign > 0 else math.inf
        gradient = D.T / s
    else:
        n = spec.n
        Dn = np.linalg.matrix_power(D, n)
        value = float(np.trace(Dn)) - d
        if spec.compat_scaling:
            gradient = n * np.linalg.matrix_power(D.T / s, n + 1)
        else:
            gradient = (n / s) * (Dn @ D).T
    return ConstraintEval(value=float(value), gradient=gradient, s_used=s, converged=res.converged,
                          doublings=res.doublings, resets=res.resets)


def eval_constraint(spec: ConstraintSpec, Bt: np.ndarray, s: float | None = None) -> ConstraintEval:
    """Value and gradient (w.r.t. ``Bt``) of the constraint described by ``spec``.

    ``s`` overrides ``spec.s``; the scale actually used (after any reset) is
    reported in ``s_used``.
    """
    Bt = _check_nonneg(Bt)
    if spec.family == "exp":
        E = expm_taylor(Bt)
        return ConstraintEval(value=float(np.trace(E)) - Bt.shape[0], gradient=E.T, s_used=math.inf)
    res = series_inverse(Bt, spec, s=s)
    return _from_inverse(spec, Bt, res)


class Constraint:
    """Stateful evaluator that carries ``s`` across calls and caches the last result.

    The optimizer keeps one instance per outer iteration so that a scale reset
    persists for the remaining inner steps.  Not thread-safe.
    """

    def __init__(self, spec: ConstraintSpec, s: float | None = None):
        self.spec = spec
        self.s = spec.s if s is None else float(s)
        self.resets = 0
        self._key = None
        self._last = None

    def __call__(self, Bt: np.ndarray) -> ConstraintEval:
        Bt = np.ascontiguousarray(Bt, dtype=float)
        key = (hashlib.blake2b(Bt.tobytes(), digest_size=16).digest(), Bt.shape, self.s)
        if key == self._key:
            return self._last
        out = eval_constraint(self.spec, Bt, s=self.s)
        if self.spec.family != "exp" and out.s_used != self.s:
            self.resets += out.resets
            self.s = out.s_used
        self._key = (key[0], key[1], self.s)
        self._last = out
        return out


def family_coefficients(spec: ConstraintSpec, K: int, s: float | None = None) -> np.ndarray:
    """Power-series coefficients c_0..c_K of the function whose trace is ``spec``'s constraint."""
    s = spec.s if s is None else s
    i = np.arange(K + 1, dtype=float)
    if spec.family == "exp":
        return np.array([1.0 / math.factorial(k) for k in range(K + 1)])
    if spec.family == "logdet":
        c = np.zeros(K + 1)
        c[1:] = 1.0 / (i[1:] * s ** i[1:])
        return c
    return binom(spec.n + i - 1, i) / s ** i


def commutation_permutation(d: int) -> np.ndarray:
    """Row permutation realising the commutation matrix: (K @ H) == H[perm]."""
    return np.arange(d * d).reshape(d, d).T.ravel()


def hessian_dense(spec: ConstraintSpec, Bt: np.ndarray, K: int | None = None,
                  coefficients: np.ndarray | None = None, tol: float = 1e-10) -> np.ndarray:
    """Truncated Hessian of tr f(Bt) as a d^2 x d^2 matrix (column-major vec).

    ``coefficients`` replaces the family's c_0..c_K.  Raises ValueError when the
    geometric extrapolation of the dropped terms exceeds ``tol`` relative to
    the Hessian (unless ``Bt`` is nilpotent and K covers every nonzero term).
    """
    Bt = _check_nonneg(Bt)
    d = Bt.shape[0]
    if d > 12:
        raise ValueError(f"dense Hessian is limited to d <= 12, got d={d}")
    if coefficients is not None:
        c = np.asarray(coefficients, dtype=float)
        K = len(c) - 1
    else:
        K = 2 * d + 4 if K is None else K
        c = family_coefficients(spec, K)
    if K < 2:
        raise ValueError(f"truncation order must be >= 2, got {K}")

    powers = [np.eye(d)]
    for _ in range(K - 2):
        powers.append(powers[-1] @ Bt)
    nilpotent = np.count_nonzero(np.linalg.matrix_power((Bt > 0).astype(float), d)) == 0

    H = np.zeros((d * d, d * d))
    term_norms = []
    for i in range(2, K + 1):
        S = np.zeros_like(H)
        for j in range(i - 1):
            S += np.kron(powers[j].T, powers[i - 2 - j])
        T = i * c[i] * S
        term_norms.append(float(np.linalg.norm(T)))
        H += T
    H = H[commutation_permutation(d)]

    exact = nilpotent and K >= 2 * d
    if not exact and len(term_norms) >= 2 and term_norms[-1] > 0:
        ratio = term_norms[-1] / term_norms[-2] if term_norms[-2] > 0 else math.inf
        tail = term_norms[-1] * ratio / (1 - ratio) if ratio < 1 else math.inf
        if tail > tol * max(1.0, float(np.linalg.norm(H))):
            raise ValueError(
                f"truncation order K={K} leaves an estimated tail of {tail:.3g}; increase K"
            )
    return H
