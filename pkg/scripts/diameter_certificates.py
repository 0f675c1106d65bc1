"""Random sewing plans on a circle and an equatorial sphere, each checked
against the edited-region diameter bound 16 r + 3 h.

    python3 scripts/diameter_certificates.py --plans 10
"""

import argparse

import numpy as np

from scrunch.core_metric import ModelSpace
from scrunch.pulled import EquatorialSphere, GeodesicCircle
from scrunch.sewing import build_sewn_space, edited_region_diameter, sample_edited_region


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--plans", type=int, default=10)
    ap.add_argument("--n-edit", type=int, default=300)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    S = ModelSpace.sphere(1.0)
    rng = np.random.default_rng(args.seed)
    print("region    r       delta    nbar   mode        diameter  bound    slack")
    for i in range(args.plans):
        A = GeodesicCircle(S) if i % 2 == 0 else EquatorialSphere(S)
        r = rng.uniform(0.1, 0.4)
        N = build_sewn_space(S, A, r, rng.uniform(0.02, 0.2) * r)
        cert = edited_region_diameter(N, sample_edited_region(N, args.n_edit, i))
        print(f"{A.kind[:8]:9s} {r:.4f}  {N.plan.delta:.5f}  {N.plan.n_bar:5d}  {N.mode:10s}  "
              f"{cert.diameter:.4f}    {cert.bound:.4f}   {cert.slack:.4f}  {'ok' if cert.ok else 'VIOLATED'}")


if __name__ == "__main__":
    main()
