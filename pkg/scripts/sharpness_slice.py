"""Train one seed and print the loss along the top and bottom Hessian
eigenvectors, next to the bound and the largest eigenvalue.

    python3 scripts/sharpness_slice.py [--seed 0] [--radius 0.5]
"""

import argparse

import numpy as np

from hessbound.bound import jacobi_eigh
from hessbound.experiment import CriticalPoint, ExperimentConfig, generate_dataset, initial_theta, loss_slice, train_gd
from hessbound.hessian import hessian_total
from hessbound.network import unflatten

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--radius", type=float, default=0.5)
    args = ap.parse_args()

    cfg = ExperimentConfig(seeds=1, I_test=200)
    data = generate_dataset(cfg, "train")
    result, _ = train_gd(cfg, data, initial_theta(cfg, args.seed), seed=args.seed)
    if not isinstance(result, CriticalPoint):
        raise SystemExit(f"seed {args.seed} did not converge: {result.reason}")
    params = unflatten(result.theta, cfg.shape)
    w, U = jacobi_eigh(hessian_total(params, cfg.kind, data).assembled, vectors=True)
    print(f"epochs {result.epochs}  loss {result.final_loss:.4f}  "
          f"lambda1 {w[0]:.4f}  lambda_sup {result.spectrum.lambda_sup:.4f}")
    alphas = np.linspace(-args.radius, args.radius, 11)
    top = loss_slice(params, cfg.kind, data, U[:, 0] / np.linalg.norm(U[:, 0]), alphas)
    low = loss_slice(params, cfg.kind, data, U[:, -1] / np.linalg.norm(U[:, -1]), alphas)
    print("alpha      L(top)     L(bottom)")
    for (a, lt), (_, lb) in zip(top, low):
        print(f"{a:+.3f}  {lt:10.5f}  {lb:10.5f}")
