"""Config-driven benchmark runs: generate, simulate, learn, score, write results."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .constraints import ConstraintSpec, preset
from .graphs import GraphGenSpec, generate_dag, is_acyclic
from .metrics import count_accuracy
from .optimizer import PathFollowConfig, path_follow
from .sem import correlation_mask, normalize, sample_sem

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["seed", "d", "family", "preset", "shd", "tpr", "fdr", "wall_time_s", "s_resets", "converged"]
SUMMARY_METRICS = ["shd", "tpr", "fdr", "wall_time_s", "s_resets"]
THREADS_ENV = "ADAG_THREADS"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph: GraphGenSpec = field(default_factory=GraphGenSpec)
    noise: str = "gaussian"
    n_samples: int = 1000
    normalized: bool = False
    mask_threshold: float | None = None
    preset: str = "order1"
    constraint: ConstraintSpec = field(default_factory=lambda: preset("order1"))
    optimizer: PathFollowConfig = field(default_factory=PathFollowConfig)
    replicates: int = 1
    base_seed: int = 0
    out_dir: str = "results"

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        self.optimizer.constraint = self.constraint


def _reject_unknown(section: str, given: dict, allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        where = f" in [{section}]" if section else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(unknown)}")


_TOP_KEYS = {"graph", "noise", "n_samples", "normalized", "mask_threshold", "constraint",
             "optimizer", "replicates", "base_seed", "out_dir"}
_CONSTRAINT_KEYS = {"preset", "s", "eps", "xi", "max_doublings", "max_resets", "compat_scaling",
                    "reset_estimate"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _reject_unknown("", raw, _TOP_KEYS)

    graph_raw = dict(raw.get("graph", {}))
    _reject_unknown("graph", graph_raw, [f.name for f in fields(GraphGenSpec) if f.name != "seed"])
    graph = GraphGenSpec(**graph_raw)

    con_raw = raw.get("constraint", "order1")
    if isinstance(con_raw, str):
        con_raw = {"preset": con_raw}
    con_raw = dict(con_raw)
    _reject_unknown("constraint", con_raw, _CONSTRAINT_KEYS)
    preset_name = con_raw.pop("preset", "order1")
    constraint = preset(preset_name, **con_raw)

    opt_raw = dict(raw.get("optimizer", {}))
    opt_keys = [f.name for f in fields(PathFollowConfig) if f.name not in ("constraint", "seed")]
    _reject_unknown("optimizer", opt_raw, opt_keys)
    if "s_schedule" in opt_raw and "T_outer" not in opt_raw:
        opt_raw["T_outer"] = len(opt_raw["s_schedule"])
    optimizer = PathFollowConfig(constraint=constraint, **opt_raw)

    mask_threshold = raw.get("mask_threshold")
    return ExperimentConfig(
        graph=graph,
        noise=str(raw.get("noise", "gaussian")).lower(),
        n_samples=int(raw.get("n_samples", 1000)),
        normalized=bool(raw.get("normalized", False)),
        mask_threshold=None if mask_threshold is None else float(mask_threshold),
        preset=preset_name.lower().replace("-", "").replace("_", ""),
        constraint=constraint,
        optimizer=optimizer,
        replicates=int(raw.get("replicates", 1)),
        base_seed=int(raw.get("base_seed", 0)),
        out_dir=str(raw.get("out_dir", "results")),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return config_from_dict(raw)


def _sem_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def run_replicate(cfg: ExperimentConfig, r: int) -> dict:
    seed = cfg.base_seed + r
    row = {"seed": seed, "d": cfg.graph.d, "family": f"{cfg.graph.family}{cfg.graph.k:g}",
           "preset": cfg.preset, "shd": "", "tpr": "", "fdr": "", "wall_time_s": "",
           "s_resets": "", "converged": False}
    t0 = time.perf_counter()
    try:
        spec = GraphGenSpec(family=cfg.graph.family, d=cfg.graph.d, k=cfg.graph.k,
                            weight_low=cfg.graph.weight_low, weight_high=cfg.graph.weight_high, seed=seed)
        B_true = generate_dag(spec)
        ds = sample_sem(B_true, cfg.n_samples, cfg.noise, seed=_sem_seed(seed))
        mask = None
        if cfg.normalized:
            ds = normalize(ds)
        if cfg.mask_threshold is not None:
            mask = correlation_mask(ds, cfg.mask_threshold)
        result = path_follow(ds, cfg.optimizer, mask=mask)
        if not is_acyclic(result.B_bin):
            raise RuntimeError("thresholded graph is cyclic")
        if mask is not None and np.any(result.B_bin[~mask.allowed]):
            raise RuntimeError("estimated graph has an edge outside the correlation mask")
        m = count_accuracy(result.B_bin, B_true != 0)
        row.update(shd=m.shd, tpr=m.tpr, fdr=m.fdr, s_resets=result.s_resets, converged=result.converged)
    except Exception as exc:  # one bad replicate must not sink the sweep
        log.error("replicate seed=%d failed: %s", seed, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time_s"] = time.perf_counter() - t0
    return row


def _worker_count(replicates: int) -> int:
    env = os.environ.get(THREADS_ENV)
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, replicates))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summarize(rows: list[dict]) -> dict:
    ok = [r for r in rows if r["converged"] is True and r["shd"] != ""]
    summary = {"replicates": len(rows), "completed": len(ok), "failed": len(rows) - len(ok)}
    for key in SUMMARY_METRICS:
        vals = np.array([float(r[key]) for r in ok])
        summary[key] = {
            "mean": float(vals.mean()) if vals.size else math.nan,
            "std": float(vals.std()) if vals.size else math.nan,
        }
    return summary


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list[dict], dict]:
    """Run every replicate and write results.csv / summary.json into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = _worker_count(cfg.replicates) if workers is None else workers
    indices = range(cfg.replicates)
    if workers == 1:
        rows = [run_replicate(cfg, r) for r in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_replicate, [cfg] * cfg.replicates, indices))

    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    summary = summarize(rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return rows, summary


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
