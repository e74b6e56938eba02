"""Path-following minimisation of mu * [S(B, X) + lambda1 |B|_1] + h(B * B).

Each outer iteration fixes the constraint scale ``s`` from a schedule, runs a
fixed number of first-order steps and then shrinks ``mu`` by ``alpha`` so the
acyclicity term increasingly dominates.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import ConstraintSpec, eval_constraint, preset
from .graphs import find_cycle
from .sem import EdgeMask, SemDataset

log = logging.getLogger(__name__)

STEP_RULES = ("adam", "gd")


class OptimizationDiverged(RuntimeError):
    def __init__(self, outer: int, inner: int, norm: float):
        super().__init__(f"iterate diverged at outer={outer}, inner={inner} (|B|_F={norm:.3g})")
        self.outer = outer
        self.inner = inner
        self.norm = norm


@dataclass
class PathFollowConfig:
    mu0: float = 1.0
    alpha: float = 0.1
    lambda1: float = 0.1
    T_outer: int = 5
    T_inner: int = 20000
    gamma: float = 3e-4
    s_schedule: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7, 0.6)
    omega: float = 0.3
    constraint: ConstraintSpec = field(default_factory=lambda: preset("order1"))
    seed: int = 0
    step_rule: str = "adam"
    beta1: float = 0.99
    beta2: float = 0.999
    adaptive: bool = False
    chain_rule: bool = True
    center: bool = True
    checkpoint_every: int = 100
    divergence_limit: float = 1e6

    def __post_init__(self):
        self.s_schedule = tuple(float(s) for s in self.s_schedule)
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.T_outer != len(self.s_schedule):
            raise ValueError(
                f"T_outer={self.T_outer} but s_schedule has {len(self.s_schedule)} entries"
            )
        if not self.gamma > 0:
            raise ValueError(f"step size gamma must be positive, got {self.gamma}")
        if self.lambda1 < 0:
            raise ValueError(f"lambda1 must be >= 0, got {self.lambda1}")
        if any(not s > 0 for s in self.s_schedule):
            raise ValueError("every scheduled s must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step_rule!r}; expected one of {STEP_RULES}")
        if self.T_inner < 1 or self.checkpoint_every < 1:
            raise ValueError("T_inner and checkpoint_every must be >= 1")


@dataclass
class Checkpoint:
    outer: int
    inner: int
    mu: float
    s_used: float
    score: float
    h: float
    l1: float
    objective: float
    masked_max: float = 0.0


@dataclass
class OuterRecord:
    outer: int
    mu: float
    s_used: float
    score: float
    h: float
    inner_steps: int
    resets: int


@dataclass
class LearnResult:
    B_cont: np.ndarray
    B_bin: np.ndarray
    trace: list[OuterRecord]
    checkpoints: list[Checkpoint]
    wall_time: float
    s_resets: int
    converged: bool

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outer", "inner_checkpoint", "mu", "s_used", "score", "h", "l1", "objective"])
            for c in self.checkpoints:
                w.writerow([c.outer, c.inner, repr(c.mu), repr(c.s_used), repr(c.score),
                            repr(c.h), repr(c.l1), repr(c.objective)])


def mse_score(B: np.ndarray, X) -> tuple[float, np.ndarray]:
    """(1/2n) |X - XB|_F^2 and its gradient -(1/n) X^T (X - XB)."""
    X = X.X if isinstance(X, SemDataset) else np.asarray(X, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.shape != (X.shape[1], X.shape[1]):
        raise ValueError(f"B has shape {B.shape}, expected ({X.shape[1]}, {X.shape[1]})")
    n = X.shape[0]
    R = X - X @ B
    return 0.5 / n * float(np.sum(R * R)), -(X.T @ R) / n


def _cov_score(B: np.ndarray, cov: np.ndarray) -> float:
    # (1/2n)|X - XB|^2 = 1/2 tr((I - B)^T cov (I - B)) with cov = X^T X / n
    R = np.eye(B.shape[0]) - B
    return 0.5 * float(np.sum(R * (cov @ R)))


def threshold(B: np.ndarray, omega: float = 0.3) -> np.ndarray:
    """Keep |B_ij| > omega, then drop the weakest edge of each remaining cycle."""
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    B = np.asarray(B, dtype=float)
    W = np.where(np.abs(B) > omega, np.abs(B), 0.0)
    np.fill_diagonal(W, 0.0)
    while (cycle := find_cycle(W)) is not None:
        i, j = min(cycle, key=lambda e: W[e])
        W[i, j] = 0.0
    return (W > 0).astype(int)


def path_follow(X, config: PathFollowConfig | None = None, mask: EdgeMask | np.ndarray | None = None,
                on_checkpoint=None) -> LearnResult:
    config = config or PathFollowConfig()
    X = X.X if isinstance(X, SemDataset) else np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix has non-finite entries")
    n, d = X.shape
    if config.center:
        X = X - X.mean(axis=0, keepdims=True)
    cov = X.T @ X / n

    allowed = None
    if mask is not None:
        allowed = np.asarray(mask.allowed if isinstance(mask, EdgeMask) else mask, dtype=bool)
        if allowed.shape != (d, d):
            raise ValueError(f"mask has shape {allowed.shape}, expected ({d}, {d})")
    keep = np.ones((d, d)) if allowed is None else allowed.astype(float)
    np.fill_diagonal(keep, 0.0)

    spec = config.constraint
    factor = 2.0 if config.chain_rule else 1.0
    lam = config.lambda1
    B = np.zeros((d, d))
    mu = config.mu0
    total_resets = 0
    trace, checkpoints = [], []
    t_start = time.perf_counter()

    for outer, s_sched in enumerate(config.s_schedule):
        s = s_sched
        gamma = config.gamma
        m1 = np.zeros((d, d))
        m2 = np.zeros((d, d))
        resets_here = 0
        prev_obj = np.inf
        h_val = 0.0
        for inner in range(config.T_inner):
            ev = eval_constraint(spec, B * B, s=s)
            if spec.family != "exp" and ev.s_used != s:
                resets_here += ev.resets
                log.debug("outer %d inner %d: s reset %.4g -> %.4g", outer, inner, s, ev.s_used)
                s = ev.s_used
            h_val = ev.value

            if inner % config.checkpoint_every == 0:
                score = _cov_score(B, cov)
                l1 = float(np.abs(B).sum())
                obj = mu * (score + lam * l1) + h_val
                cp = Checkpoint(outer, inner, mu, s, score, h_val, l1, obj,
                                masked_max=float(np.abs(B[keep == 0]).max(initial=0.0)))
                checkpoints.append(cp)
                if on_checkpoint is not None:
                    on_checkpoint(cp, B)
                if config.step_rule == "gd" and config.adaptive and obj > prev_obj:
                    gamma *= 0.5
                prev_obj = obj

            grad = mu * (cov @ B - cov + lam * np.sign(B)) + factor * ev.gradient * B
            if config.step_rule == "adam":
                t = inner + 1
                m1 = config.beta1 * m1 + (1 - config.beta1) * grad
                m2 = config.beta2 * m2 + (1 - config.beta2) * grad * grad
                m1_hat = m1 / (1 - config.beta1**t)
                m2_hat = m2 / (1 - config.beta2**t)
                B = B - gamma * m1_hat / (np.sqrt(m2_hat) + 1e-8)
            else:
                B = B - gamma * grad
            B *= keep

            norm = float(np.linalg.norm(B))
            if not np.isfinite(norm) or norm > config.divergence_limit:
                raise OptimizationDiverged(outer, inner, norm)

        final = eval_constraint(spec, B * B, s=s)
        if spec.family != "exp" and final.s_used != s:
            resets_here += final.resets
            s = final.s_used
        trace.append(OuterRecord(outer=outer, mu=mu, s_used=s, score=_cov_score(B, cov),
                                 h=final.value, inner_steps=config.T_inner, resets=resets_here))
        total_resets += resets_here
        log.info("outer %d: mu=%.3g s=%.3g h=%.3g resets=%d", outer, mu, s, final.value, resets_here)
        mu *= config.alpha

    B_bin = threshold(B, config.omega)
    return LearnResult(B_cont=B, B_bin=B_bin, trace=trace, checkpoints=checkpoints,
                       wall_time=time.perf_counter() - t_start, s_resets=total_resets, converged=True)
