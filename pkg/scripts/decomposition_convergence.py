"""Residual of the multiplication decomposition against the Fourier multiplier.

Prints the windowed operator-norm residual for both kernel choices and a
sequence of grids, for the unimodular symbol ``(xi - i) / (xi + i)``.

Usage: python3 scripts/decomposition_convergence.py [--L 20]
"""
import argparse

import numpy as np

from gammabdm.fiber import FiberGrid, fourier_multiplier, multiplication_decomposition


def residual(grid, a, kernel):
    D = multiplication_decomposition(grid, a, kernel=kernel).matrix[:-1, :-1]
    C = fourier_multiplier(grid, a).matrix[:-1, :-1]
    w = np.abs(grid.nodes) < grid.L / 2
    return np.linalg.norm((D - C)[np.ix_(w, w)], 2)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=20.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512, 1024])
    args = ap.parse_args()
    a = lambda xi: (xi - 1j) / (xi + 1j)
    print(f"{'N':>6s} {'lattice':>12s} {'continuum':>12s}")
    for N in args.sizes:
        g = FiberGrid(N, args.L)
        print(f"{N:6d} {residual(g, a, 'lattice'):12.3e} {residual(g, a, 'continuum'):12.3e}")


if __name__ == "__main__":
    main()
