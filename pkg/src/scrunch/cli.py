"""Command line entry point: ``scrunch <command> --config cfg --seed s --out dir``."""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_metric import DomainError, ModelSpace
from .harness import ConvergenceReport, Method1Config, Method2Config, _Config, run_method1, run_method2
from .pulled import (
    BASEPOINT,
    EquatorialSphere,
    GeodesicCircle,
    LatitudeSphere,
    PulledSpace,
    RoundBall,
    pulled_ball_volume,
    pulled_total_volume,
    tubular_scaling_exponent,
    write_pulled_space,
)
from .rotsym import (
    adm_mass,
    check_admissible,
    embed,
    flat_profile,
    hawking_from_graph,
    scalar_curvature,
    scalar_curvature_graph,
    schwarzschild,
    stripe_profile,
    write_graph_csv,
    write_hawking_csv,
)
from .scalar import BudgetError, bishop_gromov_density, wscal_estimate, write_density_csv, write_wscal_csv
from .sewing import (
    build_sewn_space,
    check_plan,
    edited_region_diameter,
    sample_edited_region,
    sewn_volume,
    write_hub_matrix,
    write_sewing_plan,
)

EXIT_OK, EXIT_PRECONDITION, EXIT_BUDGET = 0, 2, 3


@dataclass
class PullConfig(_Config):
    set: str = "equator"  # circle | equator | latitude | ball
    K: float = 1.0
    theta: float = math.pi / 2
    ball_radius: float = 0.5
    radii: tuple = (0.2, 0.14, 0.1, 0.07, 0.05, 0.035, 0.02)
    M: int = 1_000_000
    seed: int = 0


@dataclass
class SewConfig(_Config):
    region: str = "circle"
    K: float = 1.0
    theta: float = math.pi / 2
    ball_radius: float = 0.5
    r: float = 0.2
    delta: float = 0.02
    h_factor: float = 3.0
    n_edit: int = 300
    seed: int = 0


@dataclass
class RotsymConfig(_Config):
    profile: str = "schwarzschild"  # schwarzschild | stripe | flat
    m0: float = 1.0
    K: float = 0.25
    a: float = 1.0
    b: float = 1.5
    r_min: float = 0.0
    r_max: float = 10.0
    alpha: float = 0.5
    grid: int = 10_001
    probe: float = 4.0
    seed: int = 0


@dataclass
class WscalConfig(_Config):
    space: str = "sphere"  # sphere | euclid | pulled
    K: float = 1.0
    set: str = "equator"
    theta: float = math.pi / 2
    ball_radius: float = 0.5
    radii: tuple = ()
    bg_radii: tuple = (0.5,)
    M: int = 1_000_000
    seed: int = 0


def sphere_region(name: str, space: ModelSpace, theta: float = math.pi / 2, ball_radius: float = 0.5):
    if name == "circle":
        return GeodesicCircle(space, theta)
    if name == "equator":
        return EquatorialSphere(space)
    if name == "latitude":
        return LatitudeSphere(space, theta)
    if name == "ball":
        return RoundBall(space, (space.radius, 0.0, 0.0, 0.0), ball_radius)
    raise DomainError(f"unknown region {name!r}")


def _write_kv(path: Path, rows: dict) -> None:
    with open(path, "w") as fh:
        fh.write("key,value\n")
        for k, v in rows.items():
            fh.write(f"{k},{_fmt(v)}\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def cmd_pull(cfg: PullConfig, out: Path) -> None:
    S = ModelSpace.sphere(cfg.K)
    A = sphere_region(cfg.set, S, cfg.theta, cfg.ball_radius)
    Y = PulledSpace(S, A)
    write_pulled_space(Y, out / "space.txt")
    radii = sorted(cfg.radii, reverse=True)
    with open(out / "volumes.csv", "w") as fh:
        fh.write("r,volume,se,exact\n")
        for i, r in enumerate(radii):
            v = pulled_ball_volume(Y, r, cfg.M, cfg.seed + i)
            fh.write(f"{r!r},{v.value!r},{v.se!r},{v.exact}\n")
    fit = tubular_scaling_exponent(S, A, radii, cfg.M, cfg.seed)
    _write_kv(out / "report.csv", {
        "set": A.kind, "dimension": A.dim, "total_volume": pulled_total_volume(Y),
        "exponent": fit.exponent, "coefficient": fit.coefficient, "residual": fit.residual,
    })


def cmd_sew(cfg: SewConfig, out: Path) -> None:
    S = ModelSpace.sphere(cfg.K)
    A = sphere_region(cfg.region, S, cfg.theta, cfg.ball_radius)
    N = build_sewn_space(S, A, cfg.r, cfg.delta, cfg.h_factor)
    write_sewing_plan(N.plan, out / "plan.csv", N.h)
    if N.mode == "exact":
        write_hub_matrix(N, out / "hub.csv")
    cert = edited_region_diameter(N, sample_edited_region(N, cfg.n_edit, cfg.seed))
    rep = check_plan(N.plan)
    _write_kv(out / "report.csv", {
        "n_bar": N.plan.n_bar, "n": N.plan.n, "r": cfg.r, "delta_requested": cfg.delta,
        "delta": N.plan.delta, "h": N.h, "mode": N.mode, "plan_ok": rep.ok,
        "diameter": cert.diameter, "diameter_bound": cert.bound, "slack": cert.slack,
        "sewn_volume": sewn_volume(N), "base_volume": S.total_volume,
        "removed_ball_error_budget": math.pi * N.plan.delta,
    })


def cmd_rotsym(cfg: RotsymConfig, out: Path) -> None:
    if cfg.profile == "schwarzschild":
        p, _ = schwarzschild(cfg.m0, cfg.r_max, cfg.grid)
    elif cfg.profile == "stripe":
        p = stripe_profile(cfg.K, cfg.a, cfg.b, cfg.r_min, cfg.r_max, cfg.alpha, cfg.grid)
    elif cfg.profile == "flat":
        p = flat_profile(cfg.r_max, cfg.grid)
    else:
        raise DomainError(f"unknown profile {cfg.profile!r}")
    adm = check_admissible(p)
    g = embed(p)
    back = hawking_from_graph(g)
    R = scalar_curvature(p)
    Rg = scalar_curvature_graph(g)
    write_hawking_csv(p, out / "hawking.csv")
    write_graph_csv(g, out / "graph.csv")
    with open(out / "curvature.csv", "w") as fh:
        fh.write("r,R,R_graph\n")
        for a, b, c in zip(R.r, R.R, Rg.R):
            fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
    m = adm_mass(p)
    _write_kv(out / "report.csv", {
        "profile": cfg.profile, "admissible": adm.ok, "adm_mass": m.value, "adm_exact": m.exact,
        "roundtrip_sup": float(np.max(np.abs(back.m - p.m))),
        "z_probe_r": cfg.probe, "z_probe": float(np.interp(cfg.probe, g.r, g.z)),
        "R_min": float(np.nanmin(R.R)), "R_max": float(np.nanmax(R.R)), "axis_flag": R.axis_flag,
    })


def default_wscal_radii(space: str, K: float) -> tuple:
    if space == "pulled":
        return (0.2, 0.15, 0.1, 0.05)
    scale = K**-0.5 if space == "sphere" else 1.0
    return tuple(scale * t for t in (0.5, 0.4, 0.3, 0.2, 0.1))


def cmd_wscal(cfg: WscalConfig, out: Path) -> None:
    radii = cfg.radii or default_wscal_radii(cfg.space, cfg.K)
    if cfg.space == "sphere":
        space = ModelSpace.sphere(cfg.K)
        p = np.array([space.radius, 0.0, 0.0, 0.0])
    elif cfg.space == "euclid":
        space, p = ModelSpace.euclid(), np.zeros(3)
    elif cfg.space == "pulled":
        S = ModelSpace.sphere(cfg.K)
        space, p = PulledSpace(S, sphere_region(cfg.set, S, cfg.theta, cfg.ball_radius)), BASEPOINT
    else:
        raise DomainError(f"unknown space {cfg.space!r}")
    prof = wscal_estimate(space, p, radii, cfg.M, cfg.seed)
    write_wscal_csv(prof, out / "wscal.csv")
    bg = bishop_gromov_density(space, p, cfg.bg_radii, cfg.M, cfg.seed + 1000)
    write_density_csv(bg, out / "density.csv")
    f = prof.fit
    _write_kv(out / "report.csv", {
        "space": cfg.space, "fit": f.kind, "limit": f.limit, "r2_coefficient": f.r2_coefficient,
        "exponent": f.exponent, "coefficient": f.coefficient, "residual": f.residual,
        "density_exceeds_one": bg.exceeds_one,
    })


def _run_report(fn, cfg, out: Path) -> None:
    rep: ConvergenceReport = fn(cfg)
    rep.write(out / "report.csv")


COMMANDS = {
    "pull": (PullConfig, cmd_pull),
    "sew": (SewConfig, cmd_sew),
    "rotsym": (RotsymConfig, cmd_rotsym),
    "wscal": (WscalConfig, cmd_wscal),
    "method1": (Method1Config, lambda c, o: _run_report(run_method1, c, o)),
    "method2": (Method2Config, lambda c, o: _run_report(run_method2, c, o)),
}


def load_config(path: str | None, command: str) -> dict:
    """Key/value pairs from the ``[command]`` section (or the only section)."""
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case (K vs k)
    with open(path) as fh:
        cp.read_file(fh)
    if cp.has_section(command):
        return dict(cp.items(command))
    secs = cp.sections()
    if len(secs) == 1:
        return dict(cp.items(secs[0]))
    if not secs:
        return {}
    raise DomainError(f"config has no [{command}] section")


def write_manifest(out: Path, command: str, cfg) -> None:
    with open(out / "manifest.txt", "w") as fh:
        fh.write(f"command = {command}\n")
        for k, v in cfg.items():
            fh.write(f"{k} = {v}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scrunch", description="Pulled spaces, sewing and rotationally symmetric manifolds.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value file with [section] headers")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default="out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cls, fn = COMMANDS[args.command]
    try:
        kv = load_config(args.config, args.command)
        if args.seed is not None:
            kv["seed"] = args.seed
        cfg = cls.from_mapping(kv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, args.command, cfg)
        fn(cfg, out)
    except BudgetError as err:
        print(f"scrunch: numerical budget: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except (DomainError, ValueError, KeyError) as err:
        print(f"scrunch: precondition failed: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
