#!/usr/bin/env python3
"""Iterate the fixed-point solver on the logarithmic-driver problem and print
the per-iteration contraction curve (distance between successive iterates).

Usage:
    python scripts/run_contraction_study.py [--m 16384] [--n 50] [--iters 8]
"""

import argparse

import bsde_lab as bl


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--m", type=int, default=16384, help="path count")
    parser.add_argument("--n", type=int, default=50, help="time steps")
    parser.add_argument("--iters", type=int, default=8)
    parser.add_argument("--seed", type=int, default=20240817)
    parser.add_argument("--p", type=float, default=2.0)
    parser.add_argument("--out", default=None, help="optional CSV target")
    args = parser.parse_args()

    ens = bl.generate_ensemble(M=args.m, N=args.n, d=1, T=1.0, seed=args.seed)
    gen = bl.example1_generator(p=args.p, d=1)
    _, report = bl.picard_solve(gen, bl.coordinate_terminal(0), ens,
                                bl.BasisSpec(degree=3), p=args.p,
                                tol=1e-14, max_iter=args.iters)

    print(f"{'iter':>4} {'dist_y':>12} {'dist_z':>12} {'sp_norm':>10} {'ratio':>8}")
    prev = None
    for e in report.entries:
        ratio = "" if prev is None else f"{e.dist_y / prev:8.4f}"
        print(f"{e.iteration:>4} {e.dist_y:12.4e} {e.dist_z:12.4e} "
              f"{e.sp_norm:10.5f} {ratio:>8}")
        prev = e.dist_y

    if args.out:
        from bsde_lab.solver import save_picard_report_csv
        save_picard_report_csv(report, args.out)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
