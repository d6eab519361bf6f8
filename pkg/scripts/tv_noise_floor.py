"""Sampling floor of the cell-mass total-variation check for the stationary density.

For a perfect model p on N cells and n iid draws, E TV(empirical, p) is about
sum_c sqrt(2 p_c n / pi) / (2 n) ~ sqrt(N / (2 pi n)) when p is near uniform.  The
script prints that prediction next to a direct multinomial simulation so the size of
the floor can be read off for any (cells, samples) pair.
"""
import argparse
import math

import numpy as np

from plab.stationary import build_grid, transfer_fixed_point
from plab.experiments import walk_setup, family_fn
from plab.cli import parse_config


def predicted(p: np.ndarray, n: int) -> float:
    return float(np.sum(np.sqrt(2 * p * n / math.pi)) / n / 2)


def simulated(p: np.ndarray, n: int, rng, reps: int = 5) -> float:
    return float(np.mean([0.5 * np.abs(rng.multinomial(n, p) / n - p).sum() for _ in range(reps)]))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, nargs="*", default=[200, 2000, 20000])
    ap.add_argument("--samples", type=float, nargs="*", default=[1e6, 4e6, 1.6e7])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = parse_config("kind = stationary\nr = 0.05\ns = 0.3\n")
    group, _, mubar = walk_setup(cfg)
    rho = family_fn(cfg, group)(0.05)
    rng = np.random.default_rng(args.seed)
    print(f"{'cells':>7s} {'samples':>10s} {'predicted':>10s} {'simulated':>10s}")
    for N in args.cells:
        phi = transfer_fixed_point(rho, mubar, build_grid(N), tol=1e-11).density
        p = phi.cell_masses()
        p = p / p.sum()
        for n in args.samples:
            n = int(n)
            print(f"{N:7d} {n:10d} {predicted(p, n):10.5f} {simulated(p, n, rng):10.5f}")
    need = 20000 / (2 * math.pi * 0.02 ** 2)
    print(f"\nsamples needed for a 0.02 floor at 20000 cells: about {need:.2e}")


if __name__ == "__main__":
    main()
