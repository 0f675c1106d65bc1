"""Experiment pipelines: sewing sequences converging to pulled spaces.

Method I sews a region of a round sphere ever more tightly; Method II
first deforms a rotationally symmetric manifold towards flat space (a
constant-curvature stripe whose curvature and mass vanish along the
sequence) and then sews a region inside the stripe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .core_metric import DomainError, ModelSpace, euclid_ball_volume
from .pulled import (
    BASEPOINT,
    CompactSet,
    EquatorialSphere,
    EuclidCircle,
    EuclidSphere,
    GeodesicCircle,
    LatitudeSphere,
    PulledSpace,
    RoundBall,
    pulled_ball_volume,
    pulled_total_volume,
)
from .rotsym import GraphProfile, embed, flat_graph, stripe_profile
from .scalar import bishop_gromov_density, wscal_estimate
from .sewing import (
    RegionTooSmall,
    build_sewn_space,
    defect_sample,
    edited_region_diameter,
    sample_edited_region,
    scrunch_map_defect,
    sewn_volume,
)


def _coerce(value, typ):
    if typ in (float, "float"):
        return float(value)
    if typ in (int, "int"):
        return int(value)
    if typ in (bool, "bool"):
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if typ in ("tuple", "tuple[float, ...]"):
        if isinstance(value, str):
            return tuple(float(t) for t in value.replace(",", " ").split())
        return tuple(float(t) for t in value)
    return str(value)


class _Config:
    @classmethod
    def from_mapping(cls, kv: dict):
        known = {f.name: f for f in fields(cls)}
        extra = set(kv) - set(known)
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        return cls(**{k: _coerce(v, known[k].type) for k, v in kv.items()})

    def items(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = " ".join(repr(t) for t in v)
            elif isinstance(v, float):
                v = repr(v)
            yield f.name, v


@dataclass
class Method1Config(_Config):
    region: str = "equator"  # circle | equator | ball
    K: float = 1.0
    r0: float = 0.4
    J: int = 4
    delta_ratio: float = 0.1
    h_factor: float = 3.0
    ball_radius: float = 0.5
    n_uniform: int = 250
    n_tube: int = 250
    tube: float = 0.4
    n_edit: int = 200
    probe_radius: float = 0.1
    wscal_radii: tuple = (0.2, 0.15, 0.1, 0.05)
    M: int = 1_000_000
    seed: int = 0


@dataclass
class Method2Config(_Config):
    region: str = "ring"  # ring | sphere | ball
    alpha0: float = 4.0 * math.pi
    D: float = 1.5
    J: int = 5
    kappa: float = 0.5
    grid: int = 10_001
    r_start: float = 0.4
    delta_ratio: float = 0.1
    h_factor: float = 3.0
    max_halvings: int = 20
    n_uniform: int = 200
    n_tube: int = 200
    tube: float = 0.4
    bg_radius: float = 0.5
    M: int = 1_000_000
    seed: int = 0


@dataclass
class ConvergenceReport:
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, **row):
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([row.get(name, math.nan) for row in self.rows], dtype=float)

    def lines(self) -> list[str]:
        out = [",".join(self.columns)]
        for row in self.rows:
            out.append(",".join(_fmt(row.get(c, math.nan)) for c in self.columns))
        for k, v in self.summary.items():
            out.append(f"# {k} = {_fmt(v)}")
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.lines()) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


REPORT_COLUMNS = [
    "j", "r_j", "delta_j", "h_j", "eps_dis", "eps_cov", "gh_bound", "vol_Nj", "vol_limit", "L_j",
]


# ---------------------------------------------------------------- Method I


def method1_region(cfg: Method1Config, space: ModelSpace) -> CompactSet:
    if cfg.region == "circle":
        return GeodesicCircle(space)
    if cfg.region == "equator":
        return EquatorialSphere(space)
    if cfg.region == "ball":
        return RoundBall(space, (space.radius, 0.0, 0.0, 0.0), cfg.ball_radius)
    raise DomainError(f"unknown region {cfg.region!r}")


class StageError(DomainError):
    def __init__(self, j: int, err: Exception):
        super().__init__(f"stage j={j}: {err}")
        self.j = j


def run_method1(cfg: Method1Config, progress=None) -> ConvergenceReport:
    space = ModelSpace.sphere(cfg.K)
    A0 = method1_region(cfg, space)
    Y = PulledSpace(space, A0)
    sample = defect_sample(A0, cfg.n_uniform, cfg.n_tube, cfg.tube, cfg.seed)
    rep = ConvergenceReport(REPORT_COLUMNS + ["n_bar", "diameter", "diameter_bound", "lipschitz"])
    vol_limit = pulled_total_volume(Y)
    for j in range(cfg.J + 1):
        r = cfg.r0 * 2.0**-j
        try:
            N = build_sewn_space(space, A0, r, cfg.delta_ratio * r, cfg.h_factor)
            d = scrunch_map_defect(N, Y, sample)
            cert = edited_region_diameter(N, sample_edited_region(N, cfg.n_edit, cfg.seed + 100 + j))
        except DomainError as err:
            raise StageError(j, err) from err
        rep.add(
            j=j, r_j=r, delta_j=N.tunnel.delta, h_j=N.h, eps_dis=d.eps_dis, eps_cov=d.eps_cov,
            gh_bound=d.gh_bound, vol_Nj=sewn_volume(N), vol_limit=vol_limit, L_j=math.nan,
            n_bar=N.plan.n_bar, diameter=cert.diameter, diameter_bound=cert.bound, lipschitz=d.lipschitz,
        )
        if progress:
            progress(rep.rows[-1])
    probe = pulled_ball_volume(Y, cfg.probe_radius, cfg.M, cfg.seed + 7)
    ws = wscal_estimate(Y, BASEPOINT, cfg.wscal_radii, cfg.M, cfg.seed + 11)
    rep.summary.update(
        limit_ball_radius=cfg.probe_radius, limit_ball_volume=probe.value, limit_ball_se=probe.se,
        wscal_fit=ws.fit.kind, wscal_exponent=ws.fit.exponent, wscal_coefficient=ws.fit.coefficient,
    )
    return rep


# ---------------------------------------------------------------- Method II


@dataclass(frozen=True)
class BiLipschitz:
    lip: float
    lip_inv: float

    @property
    def L(self) -> float:
        return math.log(self.lip) + math.log(self.lip_inv)

    @property
    def D(self) -> float:
        return max(math.log(self.lip), math.log(self.lip_inv))

    def __iter__(self):
        return iter((self.lip, self.lip_inv, self.L))


def bilip_distortion(gj: GraphProfile, ginf: GraphProfile, r_window: tuple[float, float]) -> BiLipschitz:
    """Lipschitz constants of the radial matching between two graph metrics
    ``(1 + z'^2) dr^2 + r^2 g_round`` on ``r_window``."""
    lo, hi = r_window
    for g in (gj, ginf):
        if lo < g.r[0] - 1e-12 or hi > g.r[-1] + 1e-12:
            raise DomainError("profile does not cover the radial window")
    grid = np.union1d(gj.r[(gj.r >= lo) & (gj.r <= hi)], ginf.r[(ginf.r >= lo) & (ginf.r <= hi)])
    fj = 1.0 + np.interp(grid, gj.r, gj.zp_sq)
    fi = 1.0 + np.interp(grid, ginf.r, ginf.zp_sq)
    ratio = np.sqrt(fj / fi)
    return BiLipschitz(max(1.0, float(ratio.max())), max(1.0, float((1.0 / ratio).max())))


@dataclass
class Method2Geometry:
    r0: float
    r1: float
    outer: float  # radius of the compact piece T_D(Sigma_0)
    limit_set: CompactSet
    limit: PulledSpace


def method2_geometry(cfg: Method2Config) -> Method2Geometry:
    if cfg.alpha0 <= 0 or cfg.D <= 0:
        raise DomainError("need alpha0 > 0 and D > 0")
    r0 = math.sqrt(cfg.alpha0 / (4.0 * math.pi))
    r1 = r0 - cfg.D / 2.0 if r0 - cfg.D >= 0 else r0 / 2.0
    if cfg.region == "ball" and cfg.D <= r0:
        raise DomainError("the ball case needs D > r0")
    outer = r0 + cfg.D
    E = ModelSpace.euclid()
    if cfg.region == "ring":
        A = EuclidCircle(E, r1)
    elif cfg.region == "sphere":
        A = EuclidSphere(E, r1)
    elif cfg.region == "ball":
        A = RoundBall(E, (0.0, 0.0, 0.0), r0 / 4.0)
    else:
        raise DomainError(f"unknown region {cfg.region!r}")
    inner = max(r0 - cfg.D, 0.0)
    vol = euclid_ball_volume(outer) - euclid_ball_volume(inner)
    return Method2Geometry(r0, r1, outer, A, PulledSpace(E, A, vol))


@dataclass
class StripeStage:
    K: float
    a: float
    b: float
    cap: float
    graph: GraphProfile
    volume: float


def method2_stripe(cfg: Method2Config, geo: Method2Geometry, j: int) -> StripeStage:
    cap = 1.0 / j
    if cfg.region == "ball":
        a, b = 0.0, geo.r0 / 2.0
    else:
        w = min(1.0 / (2.0 * j), geo.r1 / 2.0)
        a, b = geo.r1 - w, geo.r1 + w
    K = cfg.kappa / (j * b * b)
    prof = stripe_profile(K, a, b, 0.0, geo.outer, cap, cfg.grid)
    g = embed(prof)
    dens = 4.0 * math.pi * g.r**2 * np.sqrt(1.0 + g.zp_sq)
    inner = max(geo.r0 - cfg.D, 0.0)
    keep = g.r >= inner
    vol = float(np.trapezoid(dens[keep], g.r[keep]))
    return StripeStage(K, a, b, cap, g, vol)


def stripe_model_region(cfg: Method2Config, geo: Method2Geometry, st: StripeStage) -> CompactSet:
    """The pulled region inside the stripe, in the round sphere of curvature
    ``K`` that the stripe is locally isometric to."""
    S = ModelSpace.sphere(st.K)
    rho = S.radius
    if cfg.region == "ring":
        c = 0.5 * (st.a + st.b)
        return GeodesicCircle(S, math.asin(c / rho))
    if cfg.region == "sphere":
        return LatitudeSphere(S, math.asin(0.5 * (st.a + st.b) / rho))
    return RoundBall(S, (rho, 0.0, 0.0, 0.0), rho * math.asin(min(1.0, geo.r0 / 4.0 / rho)))


def run_method2(cfg: Method2Config, progress=None) -> ConvergenceReport:
    geo = method2_geometry(cfg)
    ginf = flat_graph(0.0, geo.outer, cfg.grid)
    window = (max(geo.r0 - cfg.D, 0.0), geo.outer)
    diam_inf = 2.0 * geo.outer
    rep = ConvergenceReport(
        REPORT_COLUMNS + ["K_j", "lip", "lip_inv", "L_sum", "eps_dis_sew", "eps_cov_sew", "gh_sew", "halvings", "n_bar"]
    )
    vol_limit = pulled_total_volume(geo.limit)
    r_sew = cfg.r_start
    halvings = 0
    for j in range(1, cfg.J + 1):
        try:
            st = method2_stripe(cfg, geo, j)
            bl = bilip_distortion(st.graph, ginf, window)
            A = stripe_model_region(cfg, geo, st)
            S = A.space
            Y = PulledSpace(S, A)
            sample = defect_sample(A, cfg.n_uniform, cfg.n_tube, cfg.tube * S.radius, cfg.seed + j)
            while True:
                try:
                    N = build_sewn_space(S, A, r_sew, cfg.delta_ratio * r_sew, cfg.h_factor)
                except RegionTooSmall:
                    if halvings >= cfg.max_halvings:
                        raise
                    r_sew *= 0.5
                    halvings += 1
                    continue
                d = scrunch_map_defect(N, Y, sample)
                if d.gh_bound < 1.0 / j or halvings >= cfg.max_halvings:
                    break
                r_sew *= 0.5
                halvings += 1
        except DomainError as err:
            raise StageError(j, err) from err
        stretch = max(bl.lip - 1.0, 1.0 - 1.0 / bl.lip_inv)
        eps_dis = d.eps_dis + stretch * bl.lip_inv * diam_inf
        eps_cov = bl.lip * d.eps_cov
        rep.add(
            j=j, r_j=r_sew, delta_j=N.tunnel.delta, h_j=N.h, eps_dis=eps_dis, eps_cov=eps_cov,
            gh_bound=2.0 * max(eps_dis, eps_cov), vol_Nj=st.volume, vol_limit=vol_limit, L_j=bl.D,
            K_j=st.K, lip=bl.lip, lip_inv=bl.lip_inv, L_sum=bl.L, eps_dis_sew=d.eps_dis,
            eps_cov_sew=d.eps_cov, gh_sew=d.gh_bound, halvings=halvings, n_bar=N.plan.n_bar,
        )
        if progress:
            progress(rep.rows[-1])
    bg = bishop_gromov_density(geo.limit, BASEPOINT, [cfg.bg_radius], cfg.M, cfg.seed + 13)
    rep.summary.update(
        r0=geo.r0, r1=geo.r1, outer_radius=geo.outer, limit_volume=vol_limit,
        bg_radius=cfg.bg_radius, bg_theta=float(bg.theta[0]), bg_sigma=float(bg.sigma[0]),
        bg_flag=bg.exceeds_one,
    )
    return rep
