"""Structure-recovery metrics between an estimated and a true DAG."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class GraphMetrics:
    shd: int
    tpr: float
    fdr: float
    edges_true: int
    edges_est: int
    tpr_by_convention: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def _binary_pair(est, truth) -> tuple[np.ndarray, np.ndarray]:
    E = np.asarray(est) != 0
    T = np.asarray(truth) != 0
    if E.shape != T.shape or E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ValueError(f"adjacency shapes differ or are not square: {E.shape} vs {T.shape}")
    return E, T


def shd(est, truth) -> int:
    """Structural Hamming distance with a reversed edge counted once.

    Every unordered node pair whose edge state (none, i->j, j->i) differs
    between the two graphs contributes 1, which is extra + missing + reversed.
    """
    E, T = _binary_pair(est, truth)
    iu = np.triu_indices(E.shape[0], k=1)
    same = (E[iu] == T[iu]) & (E.T[iu] == T.T[iu])
    return int(np.count_nonzero(~same))


def tpr_fdr(est, truth) -> tuple[float, float]:
    E, T = _binary_pair(est, truth)
    n_true = int(T.sum())
    n_est = int(E.sum())
    correct = int((E & T).sum())
    tpr = correct / n_true if n_true else 1.0
    fdr = (n_est - correct) / max(1, n_est)
    return tpr, fdr


def count_accuracy(est, truth) -> GraphMetrics:
    E, T = _binary_pair(est, truth)
    tpr, fdr = tpr_fdr(E, T)
    return GraphMetrics(shd=shd(E, T), tpr=tpr, fdr=fdr, edges_true=int(T.sum()),
                        edges_est=int(E.sum()), tpr_by_convention=not T.any())
