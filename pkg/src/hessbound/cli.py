"""Command line entry point: ``hessbound {verify,train-sweep,analyze,slice}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .activations import ActivationKind
from .bound import jacobi_eigh, spectrum_report
from .experiment import (
    ExperimentConfig,
    generate_dataset,
    load_config,
    load_points,
    loss_slice,
    reanalyse,
    run_experiment,
    write_report,
)
from .hessian import hessian_from_batch
from .loss_grad import grad_total, total_loss
from .network import Dataset, NetworkShape, forward_batch, unflatten
from .oracle import FDConfig, fd_gradient, fd_hessian, frobenius_diff, matrix_sq_trace, matrix_trace
from .traces import trace_bundle

GRAD_TOL = 1e-6
HESS_TOL = 1e-4
TRACE_TOL = 1e-8
BOUND_TOL = 1e-9


def _verify_instance(rng, kind, M, N, I):
    shape = NetworkShape(M, N)
    data = Dataset(rng.uniform(-1.0, 1.0, (M, I)), rng.integers(0, 2, I))
    theta = rng.uniform(-2.0, 2.0, shape.D)
    params = unflatten(theta, shape)

    def lossfn(t):
        return total_loss(unflatten(t, shape), kind, data)

    batch = forward_batch(params, kind, data)
    H = hessian_from_batch(params, batch).assembled
    g_err = float(np.max(np.abs(grad_total(params, kind, data) - fd_gradient(lossfn, theta))))
    h_err = frobenius_diff(H, fd_hessian(lossfn, theta, FDConfig()))
    tb = trace_bundle(batch, params)
    tr_m, trsq_m = matrix_trace(H), matrix_sq_trace(H)
    t_err = max(abs(tb.tr_total - tr_m) / max(1.0, abs(tr_m)), abs(tb.tr_sq_total - trsq_m) / max(1.0, abs(trsq_m)))
    rep = spectrum_report(H, tb)
    gap = rep.lambda1 - rep.lambda_sup
    return {
        "grad": (g_err, g_err <= GRAD_TOL),
        "hessian": (h_err, h_err <= HESS_TOL),
        "traces": (t_err, t_err <= TRACE_TOL),
        "bound": (gap, gap <= BOUND_TOL * max(1.0, abs(rep.lambda_sup))),
    }


def cmd_verify(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    kinds = list(ActivationKind) if args.kind == "all" else [ActivationKind.parse(args.kind)]
    worst: dict[str, float] = {}
    failures = 0
    for kind in kinds:
        for _ in range(args.samples):
            I = int(rng.integers(1, 9))
            for name, (err, ok) in _verify_instance(rng, kind, args.M, args.N, I).items():
                worst[name] = max(worst.get(name, -np.inf), err)
                failures += not ok
    for name, err in worst.items():
        print(f"{name:8s} worst={err:.3e}")
    print("PASS" if failures == 0 else f"FAIL ({failures} breaches)")
    return 0 if failures == 0 else 1


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        M=args.M,
        N=args.N,
        I_train=args.I_train,
        I_test=args.I_test,
        seeds=args.seeds,
        T_max=args.tmax,
        eps_converge=args.eps,
        learning_rate=args.lr,
        init_range=args.init_range,
        activation=args.activation,
        variance=args.variance,
        rng_seed=args.rng_seed,
        trajectory_seeds=args.trajectory_seeds,
        trajectory_stride=args.trajectory_stride,
    )


def cmd_train_sweep(args) -> int:
    cfg = _config_from_args(args)

    def progress(seed, result):
        if not args.quiet:
            status = "ok" if hasattr(result, "spectrum") else "--"
            print(f"seed {seed:4d} {status}", file=sys.stderr)

    report = run_experiment(cfg, progress)
    write_report(report, args.out)
    summary = report.summary()
    summary.pop("unique_seeds")
    print(json.dumps(summary, indent=1))
    return 0


def cmd_analyze(args) -> int:
    summary = reanalyse(args.dir).summary()
    summary.pop("unique_seeds")
    print(json.dumps(summary, indent=1))
    return 0


def cmd_slice(args) -> int:
    cfg = load_config(args.dir)
    matches = [p for p in load_points(args.dir) if p.seed == args.seed]
    if not matches:
        print(f"no critical point for seed {args.seed}", file=sys.stderr)
        return 2
    params = unflatten(matches[0].theta, cfg.shape)
    data = generate_dataset(cfg, "train")
    H = hessian_from_batch(params, forward_batch(params, cfg.kind, data)).assembled
    w, U = jacobi_eigh(H, vectors=True)
    if not 0 <= args.eig_index < len(w):
        print(f"eigenvector index must be in [0, {len(w)})", file=sys.stderr)
        return 2
    u = U[:, args.eig_index]
    u = u / np.linalg.norm(u)
    alphas = np.linspace(-args.radius, args.radius, args.points)
    rows = loss_slice(params, cfg.kind, data, u, alphas)
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["alpha", "loss"])
        for a, L in rows:
            writer.writerow([repr(a), repr(L)])
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"eigenvalue {w[args.eig_index]!r}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hessbound", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check analytic derivatives and the bound against numeric oracles")
    p.add_argument("--kind", default="all", help="activation name or 'all'")
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--samples", type=int, default=10, help="random instances per activation")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    d = ExperimentConfig()
    p = sub.add_parser("train-sweep", help="train from many random starts and write figure data")
    p.add_argument("--seeds", type=int, default=d.seeds)
    p.add_argument("--M", type=int, default=d.M)
    p.add_argument("--N", type=int, default=d.N)
    p.add_argument("--I-train", dest="I_train", type=int, default=d.I_train)
    p.add_argument("--I-test", dest="I_test", type=int, default=d.I_test)
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--tmax", type=int, default=d.T_max)
    p.add_argument("--eps", type=float, default=d.eps_converge)
    p.add_argument("--init-range", dest="init_range", type=float, default=d.init_range)
    p.add_argument("--variance", type=float, default=d.variance)
    p.add_argument("--activation", default=d.activation)
    p.add_argument("--rng-seed", dest="rng_seed", type=int, default=d.rng_seed)
    p.add_argument("--trajectory-seeds", dest="trajectory_seeds", type=int, default=d.trajectory_seeds)
    p.add_argument("--trajectory-stride", dest="trajectory_stride", type=int, default=d.trajectory_stride)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train_sweep)

    p = sub.add_parser("analyze", help="recompute spectra and statistics for a sweep directory")
    p.add_argument("dir", type=Path)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("slice", help="loss along a Hessian eigenvector at a saved critical point")
    p.add_argument("dir", type=Path)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eig-index", dest="eig_index", type=int, default=0, help="0 = largest eigenvalue")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_slice)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
