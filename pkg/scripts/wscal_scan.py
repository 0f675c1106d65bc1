"""Volume quotient Q(r) at smooth points and at pulled points.

Prints the fitted limit for round spheres (exact value 6K) and the quotient
times r^|s| at pulled points, where Q ~ c r^s blows up.

    python3 scripts/wscal_scan.py --M 1000000
"""

import argparse

import numpy as np

from scrunch.core_metric import ModelSpace
from scrunch.pulled import BASEPOINT, EquatorialSphere, GeodesicCircle, PulledSpace
from scrunch.scalar import bishop_gromov_density, wscal_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for K in (1.0, 0.25):
        S = ModelSpace.sphere(K)
        radii = S.radius * np.array([0.5, 0.4, 0.3, 0.2, 0.1])
        prof = wscal_estimate(S, np.array([S.radius, 0, 0, 0]), radii, args.M, args.seed)
        print(f"S^3 K={K}: limit {prof.fit.limit:.4f} (exact {6 * K})")

    S = ModelSpace.sphere(1.0)
    radii = np.array([0.2, 0.15, 0.1, 0.05])
    for name, A in (("equator", EquatorialSphere(S)), ("great circle", GeodesicCircle(S))):
        Y = PulledSpace(S, A)
        prof = wscal_estimate(Y, BASEPOINT, radii, args.M, args.seed)
        print(f"pulled {name}: exponent {prof.fit.exponent:.3f}")
        for r, q, s in zip(prof.r, prof.Q, prof.sigma):
            k = -prof.fit.exponent
            print(f"  r={r:.3f}  Q={q:12.1f} +- {s:8.1f}   Q r^{k:.2f}={q * r**k:8.2f}")
        bg = bishop_gromov_density(Y, BASEPOINT, [0.1, 0.5], args.M, args.seed)
        print(f"  density theta = {np.round(bg.theta, 3).tolist()}  exceeds one: {bg.exceeds_one}")


if __name__ == "__main__":
    main()
