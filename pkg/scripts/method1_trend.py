"""Sew a region of the unit 3-sphere ever more tightly and watch the GH bound
to the pulled space shrink.

    python3 scripts/method1_trend.py --region equator --J 4 --out runs/method1
"""

import argparse
from pathlib import Path

from scrunch.harness import Method1Config, run_method1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--region", default="equator", choices=["circle", "equator", "ball"])
    ap.add_argument("--J", type=int, default=4)
    ap.add_argument("--r0", type=float, default=0.4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/method1")
    args = ap.parse_args()

    cfg = Method1Config(region=args.region, J=args.J, r0=args.r0, seed=args.seed)
    show = lambda row: print(  # noqa: E731
        f"j={row['j']}  r={row['r_j']:.4f}  nbar={row['n_bar']:5d}  "
        f"eps_dis={row['eps_dis']:.4f}  eps_cov={row['eps_cov']:.4f}  gh<={row['gh_bound']:.4f}  "
        f"diam={row['diameter']:.3f}/{row['diameter_bound']:.3f}",
        flush=True,
    )
    rep = run_method1(cfg, progress=show)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.write(out / f"method1_{args.region}.csv")
    for k, v in rep.summary.items():
        print(f"{k}: {v}")


if __name__ == "__main__":
    main()
