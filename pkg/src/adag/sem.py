"""Linear SEM simulation, normalization and correlation masking."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .graphs import topological_order

NOISE_FAMILIES = ("gaussian", "exponential", "gumbel")


def _check_noise(noise: str) -> str:
    key = noise.lower()
    if key not in NOISE_FAMILIES:
        raise ValueError(f"unknown noise family {noise!r}; expected one of {NOISE_FAMILIES}")
    return key


@dataclass(frozen=True)
class SemDataset:
    X: np.ndarray
    noise: str = "gaussian"
    normalized: bool = False
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class EdgeMask:
    allowed: np.ndarray
    threshold: float


def draw_noise(noise: str, size: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    # unit-parameter families, used raw (exponential and gumbel are not re-centred)
    noise = _check_noise(noise)
    if noise == "gaussian":
        return rng.standard_normal(size)
    if noise == "exponential":
        return rng.exponential(1.0, size)
    return rng.gumbel(0.0, 1.0, size)


def sample_sem(B: np.ndarray, n: int, noise: str = "gaussian", seed: int | None = None) -> SemDataset:
    """Draw ``n`` rows of x = B^T x + e by propagating along a topological order."""
    B = np.asarray(B, dtype=float)
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    order = topological_order(B)
    if order is None:
        raise ValueError("B is cyclic; a linear SEM needs a DAG")
    noise = _check_noise(noise)
    rng = np.random.default_rng(seed)
    d = B.shape[0]
    X = draw_noise(noise, (n, d), rng)
    for j in order:
        parents = np.flatnonzero(B[:, j])
        if parents.size:
            X[:, j] += X[:, parents] @ B[parents, j]
    return SemDataset(X=X, noise=noise, normalized=False, seed=seed)


def normalize(ds: SemDataset) -> SemDataset:
    X = ds.X
    std = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise ValueError(f"column {int(bad[0])} has zero sample standard deviation")
    Xn = (X - X.mean(axis=0)) / std
    return replace(ds, X=Xn, normalized=True)


def pearson(X: np.ndarray) -> np.ndarray:
    """Correlation matrix with constant columns given zero correlation."""
    Xc = X - X.mean(axis=0)
    std = Xc.std(axis=0, ddof=1)
    safe = np.where(std > 0, std, 1.0)
    Z = Xc / safe
    corr = Z.T @ Z / (X.shape[0] - 1)
    const = std <= 0
    corr[const, :] = 0.0
    corr[:, const] = 0.0
    return corr


def correlation_mask(ds: SemDataset, threshold: float = 0.1) -> EdgeMask:
    if ds.n < 2:
        raise ValueError("correlation mask needs at least 2 samples")
    allowed = np.abs(pearson(ds.X)) > threshold
    np.fill_diagonal(allowed, False)
    return EdgeMask(allowed=allowed, threshold=threshold)


def save_dataset(directory: str | Path, ds: SemDataset, stem: str = "X") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{stem}.csv"
    np.savetxt(path, ds.X, delimiter=",", fmt="%.17g")
    meta = {"noise": ds.noise, "seed": ds.seed, "normalized": ds.normalized, "n": ds.n, "d": ds.d}
    (directory / f"{stem}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_dataset(path: str | Path) -> SemDataset:
    path = Path(path)
    X = np.loadtxt(path, delimiter=",", ndmin=2)
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        return SemDataset(X=X, noise=meta.get("noise", "gaussian"),
                          normalized=bool(meta.get("normalized", False)), seed=meta.get("seed"))
    return SemDataset(X=X)
