import csv

import numpy as np
import pytest

from adag import constraints as C
from adag.graphs import GraphGenSpec, generate_dag, is_acyclic
from adag.oracles import finite_diff_gradient
from adag.optimizer import (
    OptimizationDiverged,
    PathFollowConfig,
    mse_score,
    path_follow,
    threshold,
)
from adag.sem import EdgeMask, sample_sem


def quick_config(**kw):
    base = dict(T_inner=1500, T_outer=3, s_schedule=(1.0, 0.9, 0.8), gamma=3e-3)
    base.update(kw)
    return PathFollowConfig(**base)


def er_data(d, k, n=1000, seed=0, noise="gaussian"):
    B = generate_dag(GraphGenSpec("ER", d=d, k=k, seed=seed))
    return B, sample_sem(B, n, noise, seed=seed + 1000)


# --- score --------------------------------------------------------------------


def test_mse_at_zero(rng):
    X = rng.standard_normal((50, 4))
    value, _ = mse_score(np.zeros((4, 4)), X)
    assert value == pytest.approx(np.sum(X**2) / 100)


def test_mse_exact_fit():
    B = generate_dag(GraphGenSpec("ER", d=6, k=2, seed=3))
    value, grad = mse_score(B, np.zeros((40, 6)))
    assert value == 0 and not grad.any()
    # with noise the residual at the true B is exactly the noise
    ds = sample_sem(B, 40, seed=1)
    E = ds.X - ds.X @ B
    value, grad = mse_score(B, ds)
    assert value == pytest.approx(np.sum(E**2) / 80, rel=1e-12)
    assert np.allclose(grad, -ds.X.T @ E / 40)


def test_mse_gradient_finite_differences(rng):
    for _ in range(10):
        d = int(rng.integers(2, 8))
        X = rng.standard_normal((30, d))
        B = rng.standard_normal((d, d))
        _, g = mse_score(B, X)
        fd = finite_diff_gradient(lambda M: mse_score(M, X)[0], B, 1e-5)
        assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd))) <= 1e-6


def test_mse_shape_check():
    with pytest.raises(ValueError):
        mse_score(np.zeros((3, 3)), np.zeros((10, 4)))


# --- threshold ----------------------------------------------------------------


def test_threshold_examples():
    assert not threshold(np.zeros((3, 3))).any()
    B = np.array([[0, 0.1, 0], [0, 0, 0.5], [0, 0, 0]])
    assert np.array_equal(threshold(B, 0.3), [[0, 0, 0], [0, 0, 1], [0, 0, 0]])
    two_cycle = np.array([[0, 0.4], [-0.9, 0]])
    assert np.array_equal(threshold(two_cycle, 0.3), [[0, 0], [1, 0]])
    with pytest.raises(ValueError):
        threshold(B, -1)


def test_threshold_always_acyclic(rng):
    for _ in range(100):
        d = int(rng.integers(2, 15))
        B = rng.standard_normal((d, d))
        out = threshold(B, 0.3)
        assert is_acyclic(out)
        assert np.all(np.abs(B[out == 1]) > 0.3)
        assert not np.any(np.diag(out))


# --- config -------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(alpha=1.0), dict(alpha=0.0), dict(gamma=0), dict(lambda1=-1),
                                dict(T_outer=4), dict(s_schedule=(1, 0, 1, 1, 1)), dict(step_rule="lbfgs"),
                                dict(T_inner=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        PathFollowConfig(**kw)


def test_config_defaults():
    cfg = PathFollowConfig()
    assert (cfg.mu0, cfg.alpha, cfg.lambda1, cfg.T_outer) == (1.0, 0.1, 0.1, 5)
    assert cfg.s_schedule == (1.0, 0.9, 0.8, 0.7, 0.6)
    assert cfg.omega == 0.3 and cfg.constraint.family == "logdet"


# --- path following -----------------------------------------------------------


def test_recovers_small_chain():
    B = np.zeros((4, 4))
    B[0, 1], B[1, 2], B[2, 3] = 1.5, -1.0, 1.2
    ds = sample_sem(B, 2000, seed=0)
    res = path_follow(ds, quick_config())
    assert np.array_equal(res.B_bin, (B != 0).astype(int))
    assert res.converged and res.s_resets == 0
    assert [r.mu for r in res.trace] == pytest.approx([1.0, 0.1, 0.01])


def test_mask_blocks_everything_but_one_pair():
    B, ds = er_data(6, 2, seed=4)
    allowed = np.zeros((6, 6), dtype=bool)
    allowed[1, 3] = allowed[3, 1] = True
    seen = []
    res = path_follow(ds, quick_config(), mask=EdgeMask(allowed, 0.1),
                      on_checkpoint=lambda cp, M: seen.append(M[~allowed].copy()))
    off = res.B_cont.copy()
    off[1, 3] = off[3, 1] = 0
    assert np.array_equal(off, np.zeros((6, 6)))
    assert all(np.all(m == 0) for m in seen)
    assert all(cp.masked_max == 0 for cp in res.checkpoints)


def test_mask_shape_checked():
    _, ds = er_data(5, 1)
    with pytest.raises(ValueError):
        path_follow(ds, quick_config(), mask=np.ones((4, 4), dtype=bool))


def test_rejects_non_finite_data():
    X = np.ones((10, 3))
    X[0, 0] = np.nan
    with pytest.raises(ValueError):
        path_follow(X, quick_config())


def test_deterministic_trace():
    _, ds = er_data(8, 2, seed=5)
    a = path_follow(ds, quick_config())
    b = path_follow(ds, quick_config())
    assert np.array_equal(a.B_cont, b.B_cont)
    assert a.checkpoints == b.checkpoints
    assert a.trace == b.trace


@pytest.mark.parametrize("preset", ["exponential", "order1", "order2", "order3", "order4"])
def test_every_preset_runs(preset):
    B, ds = er_data(8, 1, seed=2)
    res = path_follow(ds, quick_config(constraint=C.preset(preset)))
    assert is_acyclic(res.B_bin)
    assert np.all(np.abs(res.B_cont[res.B_bin == 1]) > 0.3)


def test_gd_and_printed_update_variants_run():
    _, ds = er_data(6, 1, seed=3)
    for kw in (dict(step_rule="gd", gamma=3e-3), dict(step_rule="gd", adaptive=True), dict(chain_rule=False)):
        res = path_follow(ds, quick_config(**kw))
        assert is_acyclic(res.B_bin)


def test_divergence_guard_reports_position():
    _, ds = er_data(5, 1, seed=0)
    with pytest.raises(OptimizationDiverged, match=r"outer=0, inner=\d+") as info:
        path_follow(ds, quick_config(step_rule="gd", gamma=50.0, divergence_limit=1e3))
    assert info.value.outer == 0 and info.value.norm > 1e3


def test_trace_csv(tmp_path):
    _, ds = er_data(5, 1, seed=0)
    res = path_follow(ds, quick_config(T_inner=300))
    res.write_trace(tmp_path / "trace.csv")
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["outer", "inner_checkpoint", "mu", "s_used", "score", "h", "l1", "objective"]
    assert len(rows) == 1 + 3 * 3
    assert rows[4][:2] == ["1", "0"]


def test_small_l1_never_resets():
    # a heavy l1 weight keeps sum |B| below s, which bounds rho(B*B) below s
    for seed in range(3):
        B = generate_dag(GraphGenSpec("ER", d=10, k=2, weight_low=0.1, weight_high=0.3, seed=seed))
        ds = sample_sem(B, 1000, seed=seed)
        res = path_follow(ds, quick_config(lambda1=0.3, alpha=0.9, checkpoint_every=1))
        assert all(cp.l1 < cp.s_used for cp in res.checkpoints)
        assert res.s_resets == 0


def test_tiny_scale_triggers_resets():
    _, ds = er_data(10, 2, seed=8)
    res = path_follow(ds, quick_config(s_schedule=(0.05, 0.05, 0.05)))
    assert res.s_resets > 0
    assert all(r.s_used > 0.05 for r in res.trace)


@pytest.mark.slow
def test_near_empty_recovery_on_independent_noise():
    counts = []
    for seed in range(10):
        ds = sample_sem(np.zeros((10, 10)), 1000, "gaussian", seed=seed)
        counts.append(int(path_follow(ds, PathFollowConfig()).B_bin.sum()))
    assert max(counts) <= 2


@pytest.fixture(scope="module")
def er2_d30_runs():
    out = []
    for seed in range(10):
        _, ds = er_data(30, 2, seed=seed)
        out.append(path_follow(ds, PathFollowConfig()))
    return out


@pytest.mark.slow
def test_constraint_value_non_increasing_across_outer(er2_d30_runs):
    monotone = 0
    for res in er2_d30_runs:
        h = [r.h for r in res.trace]
        monotone += all(b <= a + 1e-12 for a, b in zip(h, h[1:]))
    assert monotone >= 9


def objective_decrease_fraction(runs):
    good = total = 0
    for res in runs:
        for outer in range(len(res.trace)):
            obj = [c.objective for c in res.checkpoints if c.outer == outer]
            diffs = np.diff(obj)
            total += diffs.size
            good += int(np.sum(diffs <= 0))
    return good / total


@pytest.mark.slow
def test_objective_mostly_decreases_plain_gd():
    # fixed-step gradient descent at the default step; runs stopped by the
    # divergence guard (very high-variance data) contribute no intervals
    runs, diverged = [], 0
    for seed in range(10):
        _, ds = er_data(30, 2, seed=seed)
        try:
            runs.append(path_follow(ds, PathFollowConfig(step_rule="gd")))
        except OptimizationDiverged:
            diverged += 1
    assert len(runs) >= 5
    assert objective_decrease_fraction(runs) >= 0.95


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="Adam's fixed-size steps chatter at l1 kinks once an outer "
                                       "iteration settles; ~67% of intervals are non-increasing, "
                                       "increases are below 1e-5 relative")
def test_objective_mostly_decreases_adam_default(er2_d30_runs):
    assert objective_decrease_fraction(er2_d30_runs) >= 0.95
