"""Random ground-truth DAGs (Erdos-Renyi and scale-free) and acyclicity checks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FAMILIES = ("ER", "SF")


@dataclass(frozen=True)
class GraphGenSpec:
    family: str = "ER"
    d: int = 10
    k: float = 2.0
    weight_low: float = 0.5
    weight_high: float = 2.0
    seed: int = 0

    def __post_init__(self):
        family = self.family.upper()
        if family not in FAMILIES:
            raise ValueError(f"unknown graph family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if self.d < 2:
            raise ValueError(f"need at least 2 nodes, got d={self.d}")
        if self.k < 0:
            raise ValueError(f"edge multiplier k must be >= 0, got {self.k}")
        if not 0 < self.weight_low <= self.weight_high:
            raise ValueError(
                f"weight range must satisfy 0 < low <= high, got [{self.weight_low}, {self.weight_high}]"
            )


def er_edge_probability(d: int, k: float) -> float:
    # p over unordered pairs, so E[#edges] = p * d(d-1)/2 = k * d
    return 2.0 * k / (d - 1)


def _er_pattern(d: int, k: float, rng: np.random.Generator) -> np.ndarray:
    p = er_edge_probability(d, k)
    if p > 1.0:
        raise ValueError(f"ER{k:g} needs edge probability {p:.3f} > 1 at d={d}")
    return np.triu(rng.random((d, d)) < p, k=1)


def _sf_pattern(d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Barabasi-Albert growth; node t attaches to min(m, t) earlier nodes, edges old -> new."""
    pattern = np.zeros((d, d), dtype=bool)
    degree = np.zeros(d)
    for t in range(1, d):
        n_attach = min(m, t)
        weights = degree[:t] + 1.0
        targets = rng.choice(t, size=n_attach, replace=False, p=weights / weights.sum())
        pattern[targets, t] = True
        degree[targets] += 1
        degree[t] += n_attach
    return pattern


def generate_dag(spec: GraphGenSpec) -> np.ndarray:
    """Sample a weighted DAG; entry (i, j) is the weight of edge i -> j.

    Edges are drawn on a triangular pattern and then relabelled by a uniform
    random permutation, so the result is acyclic but not triangular.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    if spec.family == "ER":
        pattern = _er_pattern(d, spec.k, rng)
    else:
        m = int(round(spec.k))
        if m < 1 or m != spec.k:
            raise ValueError(f"SF graphs need an integer k >= 1, got {spec.k}")
        pattern = _sf_pattern(d, m, rng)

    perm = rng.permutation(d)
    pattern = pattern[np.ix_(perm, perm)]
    magnitude = rng.uniform(spec.weight_low, spec.weight_high, size=(d, d))
    sign = rng.choice([-1.0, 1.0], size=(d, d))
    B = np.where(pattern, magnitude * sign, 0.0)
    np.fill_diagonal(B, 0.0)
    return B


def topological_order(adj: np.ndarray) -> list[int] | None:
    """Kahn's algorithm on the nonzero pattern; None when a cycle exists."""
    pattern = np.asarray(adj) != 0
    d = pattern.shape[0]
    indeg = pattern.sum(axis=0).astype(int)
    queue = deque(np.flatnonzero(indeg == 0).tolist())
    order = []
    while queue:
        i = queue.popleft()
        order.append(i)
        for j in np.flatnonzero(pattern[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(int(j))
    return order if len(order) == d else None


def is_acyclic(adj: np.ndarray) -> bool:
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adj.shape}")
    return topological_order(adj) is not None


def find_cycle(adj: np.ndarray) -> list[tuple[int, int]] | None:
    """Return the edges of one directed cycle, or None if the pattern is acyclic."""
    pattern = np.asarray(adj) != 0
    d = pattern.shape[0]
    color = np.zeros(d, dtype=int)  # 0 unseen, 1 on stack, 2 done
    parent = -np.ones(d, dtype=int)
    for root in range(d):
        if color[root]:
            continue
        stack = [(root, iter(np.flatnonzero(pattern[root]).tolist()))]
        color[root] = 1
        while stack:
            node, children = stack[-1]
            for child in children:
                if color[child] == 0:
                    color[child] = 1
                    parent[child] = node
                    stack.append((child, iter(np.flatnonzero(pattern[child]).tolist())))
                    break
                if color[child] == 1:
                    cycle = [(node, child)]
                    cur = node
                    while cur != child:
                        cycle.append((parent[cur], cur))
                        cur = parent[cur]
                    return [(int(a), int(b)) for a, b in reversed(cycle)]
            else:
                color[node] = 2
                stack.pop()
    return None


def edge_count(adj: np.ndarray) -> int:
    return int(np.count_nonzero(adj))


def save_adjacency_csv(path: str | Path, adj: np.ndarray) -> None:
    np.savetxt(path, np.asarray(adj, dtype=float), delimiter=",", fmt="%.17g")


def load_adjacency_csv(path: str | Path) -> np.ndarray:
    adj = np.loadtxt(path, delimiter=",", ndmin=2)
    if adj.shape[0] != adj.shape[1]:
        raise ValueError(f"{path}: adjacency is not square ({adj.shape})")
    return adj


def save_edge_list(path: str | Path, adj: np.ndarray) -> None:
    rows, cols = np.nonzero(adj)
    with open(path, "w") as fh:
        for i, j in zip(rows, cols):
            fh.write(f"{i},{j},{adj[i, j]:.17g}\n")
