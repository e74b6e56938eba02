"""Command-line entry point: ``adag {gen,learn,bench,gradcheck,hessian}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import constraints as C
from . import oracles
from .experiment import ConfigError, load_config, run_experiment
from .graphs import GraphGenSpec, generate_dag, load_adjacency_csv, save_adjacency_csv, save_edge_list
from .metrics import count_accuracy
from .optimizer import PathFollowConfig, path_follow
from .sem import correlation_mask, load_dataset, normalize, sample_sem, save_dataset


def cmd_gen(args) -> int:
    spec = GraphGenSpec(family=args.family, d=args.d, k=args.k, seed=args.seed)
    B = generate_dag(spec)
    ds = sample_sem(B, args.n, args.noise, seed=args.seed)
    if args.normalize:
        ds = normalize(ds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_adjacency_csv(out / "B.csv", B)
    save_edge_list(out / "edges.csv", B)
    save_dataset(out, ds, stem="X")
    print(f"wrote {out / 'B.csv'} ({np.count_nonzero(B)} edges) and {out / 'X.csv'} ({ds.n}x{ds.d})")
    return 0


def cmd_learn(args) -> int:
    ds = load_dataset(args.data)
    if args.normalize:
        ds = normalize(ds)
    mask = correlation_mask(ds, args.mask_threshold) if args.mask_threshold is not None else None
    spec = C.preset(args.preset, s=args.s)
    schedule = tuple(args.s_schedule) if args.s_schedule else PathFollowConfig.s_schedule
    config = PathFollowConfig(constraint=spec, T_inner=args.T_inner, lambda1=args.lambda1,
                              gamma=args.gamma, omega=args.omega, step_rule=args.step_rule,
                              s_schedule=schedule, T_outer=len(schedule))
    result = path_follow(ds, config, mask=mask)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_adjacency_csv(out / "B_cont.csv", result.B_cont)
    np.savetxt(out / "B_bin.csv", result.B_bin, delimiter=",", fmt="%d")
    result.write_trace(out / "trace.csv")
    report = {"wall_time_s": result.wall_time, "s_resets": result.s_resets,
              "edges": int(result.B_bin.sum())}
    if args.truth:
        truth = load_adjacency_csv(args.truth) != 0
        report.update(count_accuracy(result.B_bin, truth).as_dict())
    (out / "metrics.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report))
    return 0


def cmd_bench(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg.out_dir = args.out
    rows, summary = run_experiment(cfg, workers=args.workers)
    print(json.dumps(summary))
    failed = summary["failed"]
    if failed:
        print(f"{failed} of {len(rows)} replicates failed", file=sys.stderr)
        return min(failed, 125)
    return 0


def _random_in_domain(rng, d: int, s: float, radius_frac: float) -> np.ndarray:
    # entries stay away from 0 so central differences never leave the domain
    Bt = rng.uniform(0.2, 1.0, (d, d))
    rho = max(abs(np.linalg.eigvals(Bt)))
    return Bt * (rng.uniform(0.05, radius_frac) * s / rho)


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    specs = [C.exponential(), C.logdet(args.s)] + [C.inverse_power(n, args.s) for n in (1, 2, 3)]
    worst_all = 0.0
    print("family,n,trials,max_rel_err")
    for spec in specs:
        worst = 0.0
        for _ in range(args.trials):
            d = int(rng.integers(2, args.d + 1))
            Bt = _random_in_domain(rng, d, spec.s, 0.5)
            analytic = C.eval_constraint(spec, Bt).gradient
            numeric = oracles.finite_diff_gradient(lambda M: C.eval_constraint(spec, M).value, Bt, args.step)
            err = np.max(np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1.0))
            worst = max(worst, float(err))
        worst_all = max(worst_all, worst)
        print(f"{spec.family},{spec.n if spec.family == 'inv' else ''},{args.trials},{worst:.3e}")
    return 0 if worst_all <= args.tol else 1


def cmd_hessian(args) -> int:
    if args.matrix:
        Bt = load_adjacency_csv(args.matrix)
        if args.square:
            Bt = Bt * Bt
    else:
        Bt = _random_in_domain(np.random.default_rng(args.seed), args.d, args.s, 0.5)
    if np.any(Bt < 0):
        print("matrix has negative entries; pass --square to use B*B", file=sys.stderr)
        return 2
    rho_bt = float(np.max(np.abs(np.linalg.eigvals(Bt)))) if Bt.size else 0.0
    if rho_bt >= args.s:
        print(f"spectral radius {rho_bt:.4g} is not below s={args.s:g}", file=sys.stderr)
        return 2
    lines = []
    try:
        for name, spec in [("exp", C.exponential()), ("logdet", C.logdet(args.s)),
                           ("inv", C.inverse_power(1, args.s))]:
            H = C.hessian_dense(spec, Bt, K=args.K)
            lines.append(f"{name},{float(np.max(np.abs(np.linalg.eigvalsh(H))))!r}")
    except ValueError as exc:
        print(f"hessian: {exc}", file=sys.stderr)
        return 2
    print("family,spectral_radius")
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adag", description="DAG learning with analytic acyclicity constraints")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random DAG and a linear SEM dataset")
    g.add_argument("--family", default="er", choices=["er", "sf", "ER", "SF"])
    g.add_argument("--d", type=int, default=20)
    g.add_argument("--k", type=float, default=2)
    g.add_argument("--noise", default="gaussian", choices=["gaussian", "exponential", "gumbel"])
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--normalize", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    lp = sub.add_parser("learn", help="learn a DAG from one dataset")
    lp.add_argument("--data", required=True)
    lp.add_argument("--truth")
    lp.add_argument("--preset", default="order1", choices=sorted(C.PRESETS))
    lp.add_argument("--s", type=float, default=1.0)
    lp.add_argument("--s-schedule", type=float, nargs="+")
    lp.add_argument("--T-inner", type=int, default=20000)
    lp.add_argument("--lambda1", type=float, default=0.1)
    lp.add_argument("--gamma", type=float, default=3e-4)
    lp.add_argument("--omega", type=float, default=0.3)
    lp.add_argument("--step-rule", default="adam", choices=["adam", "gd"])
    lp.add_argument("--normalize", action="store_true")
    lp.add_argument("--mask-threshold", type=float)
    lp.add_argument("--out", required=True)
    lp.set_defaults(func=cmd_learn)

    b = sub.add_parser("bench", help="run a full experiment config")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench)

    gc = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    gc.add_argument("--trials", type=int, default=50)
    gc.add_argument("--d", type=int, default=8)
    gc.add_argument("--s", type=float, default=1.0)
    gc.add_argument("--step", type=float, default=1e-6)
    gc.add_argument("--tol", type=float, default=1e-5)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_gradcheck)

    h = sub.add_parser("hessian", help="Hessian spectral radii of the constraint families")
    h.add_argument("--matrix")
    h.add_argument("--square", action="store_true")
    h.add_argument("--d", type=int, default=5)
    h.add_argument("--s", type=float, default=1.0)
    h.add_argument("--K", type=int, default=60)
    h.add_argument("--seed", type=int, default=0)
    h.set_defaults(func=cmd_hessian)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
