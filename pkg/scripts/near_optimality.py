#!/usr/bin/env python3
"""Compare path-following solutions with exhaustive search on small problems."""

import argparse

import numpy as np

from mlfgm.baseline import brute_force_qap
from mlfgm.factorization import factorize
from mlfgm.objective import ObjectiveContext, f_gm, uniform_confidence
from mlfgm.solver import SolverConfig, solve_mlfgm
from mlfgm.synthetic import SyntheticParams, generate_synthetic_pair


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--inliers", type=int, default=5)
    p.add_argument("--attributes", type=int, default=3)
    p.add_argument("--deformation", type=float, default=0.05)
    p.add_argument("--no-confidence-update", action="store_true")
    args = p.parse_args()
    cfg = SolverConfig(confidence_update=not args.no_confidence_update)
    ratios = []
    for seed in range(args.instances):
        prob = generate_synthetic_pair(SyntheticParams(
            n_inliers=args.inliers, n_outliers=0, n_attributes=args.attributes,
            deformation=args.deformation, seed=seed))
        fp, mapping = factorize(prob)
        X = solve_mlfgm(fp, cfg, mapping).assignment.matrix
        _, best = brute_force_qap(fp)
        ratios.append(f_gm(X, ObjectiveContext(fp, uniform_confidence(fp.n_layers))) / best)
    ratios = np.array(ratios)
    print(f"instances: {len(ratios)}")
    print(f"ratio >= 0.95: {int(np.sum(ratios >= 0.95))}")
    print(f"optimal (ratio >= 1 - 1e-9): {int(np.sum(ratios >= 1 - 1e-9))}")
    print(f"min / median ratio: {ratios.min():.4f} / {np.median(ratios):.4f}")


if __name__ == "__main__":
    main()
