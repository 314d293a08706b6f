"""Trap-energy convergence of the disk quadrature against the exact Bessel matching.

    python3 scripts/convergence_study.py --beta 3 --orders 4 8 12 16 24
"""
import argparse
import math
import time

from scipy.optimize import brentq
from scipy.special import j0, j1, k0, k1

from softguide.bs_core import trap_eigenvalues
from softguide.measure import Disk, area_measure


def disk_ground_state(beta, a=1.0):
    """Ground state of -Laplacian - beta on a disk of radius a (s-wave J0/K0 matching)."""

    def match(kappa):
        q = math.sqrt(beta - kappa**2)
        return q * j1(q * a) * k0(kappa * a) - kappa * j0(q * a) * k1(kappa * a)

    top = math.sqrt(beta)
    kappa = brentq(match, 1e-12 * top, top * (1 - 1e-12), xtol=1e-15, rtol=1e-15)
    return -kappa**2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=3.0)
    ap.add_argument("--radius", type=float, default=1.0)
    ap.add_argument("--orders", type=int, nargs="+", default=[4, 8, 12, 16, 24])
    args = ap.parse_args()
    ref = disk_ground_state(args.beta, args.radius)
    print(f"exact E = {ref!r}")
    print(f"{'order':>5} {'nodes':>6} {'E':>22} {'rel err':>10} {'seconds':>8}")
    for order in args.orders:
        m = area_measure(Disk((0.0, 0.0), args.radius), order)
        t = time.perf_counter()
        E = trap_eigenvalues(m, args.beta)[0].energy
        dt = time.perf_counter() - t
        print(f"{order:>5} {m.size:>6} {E:>22.15f} {abs(E - ref) / abs(ref):>10.2e} {dt:>8.2f}")


if __name__ == "__main__":
    main()
