#!/usr/bin/env python3
"""Sweep ensemble size and grid resolution against a closed-form reference
solution, printing a small convergence table.

Usage:
    python scripts/run_convergence_study.py [--kind coordinate|square]
"""

import argparse

import bsde_lab as bl


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--kind", choices=("coordinate", "square"),
                        default="coordinate")
    parser.add_argument("--seed", type=int, default=20240817)
    parser.add_argument("--m-values", type=int, nargs="+",
                        default=[1024, 4096, 16384])
    parser.add_argument("--n-values", type=int, nargs="+",
                        default=[10, 25, 50])
    args = parser.parse_args()

    gen = bl.zero_generator(1, 1)
    if args.kind == "coordinate":
        term = bl.coordinate_terminal(0)
        inst = bl.OracleInstance("martingale_coordinate", T=1.0)
    else:
        term = bl.square_norm_terminal()
        inst = bl.OracleInstance("martingale_square", T=1.0)

    print(f"{'M':>6} {'N':>4} {'sp_error':>10} {'z_rms':>10}")
    for m in args.m_values:
        for n in args.n_values:
            ens = bl.generate_ensemble(M=m, N=n, d=1, T=1.0, seed=args.seed)
            sol, _ = bl.picard_solve(gen, term, ens, bl.BasisSpec(degree=3))
            errs = bl.compare_to_oracle(sol, inst, ens, p=2.0)
            print(f"{m:>6} {n:>4} {errs.sp_error:10.5f} "
                  f"{errs.z_rms_error:10.5f}")


if __name__ == "__main__":
    main()
