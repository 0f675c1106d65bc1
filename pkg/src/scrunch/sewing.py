"""Sewing a region of a round 3-sphere with short tunnels.

A maximal ``2r``-separated set of centers ``v_k`` is chosen in the region
``A0``.  Around each center, ``nbar - 1`` mouths sit on the sphere of radius
``r - delta``, one for every other center, and mouth ``v_kj`` is joined to
``v_jk`` by a tunnel of length ``h``.  Sewn distances are shortest paths in
the base metric that may jump through tunnels.

Mouth coordinates are generated on demand, since ``nbar (nbar - 1)`` grows
quickly as ``r`` shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import floyd_warshall
from scipy.spatial import cKDTree

from .core_metric import (
    MEMBERSHIP_TOL,
    DomainError,
    ModelSpace,
    PointCloud,
    _as_points,
    _sphere_angle,
    exp_sphere,
    fibonacci_sphere,
    model_ball_volume,
    pairwise_distances,
    tangent_frame,
)
from .pulled import CompactSet, PulledSpace, RoundBall

HUB_MAX_MOUTHS = 600
NEAR_CENTERS = 8
DEFAULT_H_FACTOR = 3.0


class RegionTooSmall(DomainError):
    """Fewer than two packing centers fit in the region."""


@dataclass(frozen=True)
class TunnelModel:
    delta: float
    h: float
    vol: float

    @classmethod
    def default(cls, space: ModelSpace, delta: float, h_factor: float = DEFAULT_H_FACTOR, vol_factor: float = 1.0):
        return cls(delta, h_factor * delta, vol_factor * 2.0 * model_ball_volume(space, delta / 2.0))


def _chord(geo: float, rho: float) -> float:
    return 2.0 * rho * math.sin(min(geo, math.pi * rho) / (2.0 * rho))


def _region_sample(A0: CompactSet, mesh: float) -> np.ndarray:
    if A0.dim == 0:
        return A0.sample(0)
    n = int(math.ceil(A0.measure() / mesh**A0.dim))
    return A0.sample(max(n, 16))


@dataclass(eq=False)
class SewingPlan:
    space: ModelSpace
    region: CompactSet
    r: float
    delta: float
    centers: np.ndarray
    directions: np.ndarray
    frames: np.ndarray = field(repr=False)
    delta_requested: float = 0.0
    mesh: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_bar(self) -> int:
        return len(self.centers)

    @property
    def n(self) -> int:
        return self.n_bar * (self.n_bar - 1)

    @property
    def rho(self) -> float:
        return self.space.radius

    def mouths(self, k, j) -> np.ndarray:
        """Coordinates of mouths ``v_kj`` (broadcasting over index arrays)."""
        k = np.asarray(k)
        j = np.asarray(j)
        if np.any(k == j):
            raise DomainError("mouth v_kk does not exist")
        idx = j - (j > k)
        t = (self.r - self.delta) / self.rho
        tang = np.einsum("...ab,...b->...a", self.frames[k], self.directions[idx])
        return math.cos(t) * self.centers[k] + self.rho * math.sin(t) * tang

    def mouths_of(self, k: int) -> np.ndarray:
        js = np.array([j for j in range(self.n_bar) if j != k])
        return self.mouths(np.full(js.shape, k), js)

    def mouth_index(self):
        """``(k, j)`` for every mouth, in the storage order of :meth:`all_mouths`."""
        kk, jj = np.meshgrid(np.arange(self.n_bar), np.arange(self.n_bar), indexing="ij")
        keep = kk != jj
        return kk[keep], jj[keep]

    def all_mouths(self) -> np.ndarray:
        k, j = self.mouth_index()
        return self.mouths(k, j)

    def tunnels(self) -> list[tuple[int, int]]:
        """Unordered center pairs ``(k, j)``, ``k < j``, in pairing order."""
        return [(k, j) for k in range(self.n_bar) for j in range(k + 1, self.n_bar)]

    def mouth_separation(self) -> float:
        """Smallest distance between two mouths of one center."""
        return _mouth_separation(self.directions, self.r - self.delta, self.rho)


def _mouth_separation(dirs: np.ndarray, s: float, rho: float) -> float:
    if len(dirs) < 2:
        return math.inf
    # same geometry at every center: mouths exp_v(s u) for unit u
    pts = exp_sphere(np.array([rho, 0.0, 0.0, 0.0]), s * dirs, rho, np.eye(4)[:, 1:])
    d, _ = cKDTree(pts).query(pts, k=2)
    chord = float(d[:, 1].min())
    return 2.0 * rho * math.asin(min(1.0, chord / (2.0 * rho)))


def plan_sewing(
    space: ModelSpace,
    A0: CompactSet,
    r: float,
    delta: float,
    mesh: float | None = None,
    shrink_delta: bool = True,
) -> SewingPlan:
    """Greedy maximal ``2r``-packing of ``A0`` with mouths for every pair.

    If the requested ``delta`` would make the mouth balls of one center
    overlap, it is reduced (when ``shrink_delta``) until they are disjoint.
    """
    if space.kind != "sphere3":
        raise DomainError("sewing is implemented on round 3-spheres")
    if A0.space != space:
        raise DomainError("region must live in the base space")
    if isinstance(A0, RoundBall) and A0.radius >= math.pi * space.radius:
        raise DomainError("region must be a proper subset of the space")
    if not (0.0 < delta < r):
        raise DomainError("need 0 < delta < r")
    rho = space.radius
    mesh = r / 4.0 if mesh is None else mesh
    pts = _region_sample(A0, mesh)
    chord_pts = pts / rho
    tree = cKDTree(chord_pts)
    blocked = np.zeros(len(pts), dtype=bool)
    rad = _chord(2.0 * r, rho) / rho * (1.0 - 1e-12)
    chosen = []
    for i in range(len(pts)):
        if blocked[i]:
            continue
        chosen.append(i)
        blocked[tree.query_ball_point(chord_pts[i], rad)] = True
    if len(chosen) < 2:
        raise RegionTooSmall("region too small to sew at this r")
    centers = pts[chosen]
    dirs = fibonacci_sphere(len(centers) - 1)
    d_used = delta
    if shrink_delta:
        for _ in range(200):
            sep = _mouth_separation(dirs, r - d_used, rho)
            if sep >= 2.0 * d_used:
                break
            d_used = 0.5 * sep * (1.0 - 1e-9)
    frames = np.stack([tangent_frame(c) for c in centers])
    meta = {"inf_scal_region": 6.0 / rho**2, "tunnels_preserve_scal_sign": True}
    return SewingPlan(space, A0, r, d_used, centers, dirs, frames, delta, mesh, meta)


@dataclass
class PlanReport:
    min_center_separation: float
    maximal: bool
    mouths_disjoint: bool
    mouths_inside: bool
    n_even: bool

    @property
    def ok(self) -> bool:
        return (
            self.min_center_separation >= 0.0
            and self.maximal
            and self.mouths_disjoint
            and self.mouths_inside
            and self.n_even
        )


def check_plan(plan: SewingPlan, sample: np.ndarray | None = None) -> PlanReport:
    """Independent re-check of the packing and mouth invariants."""
    sp = plan.space
    D = pairwise_distances(sp, plan.centers)
    np.fill_diagonal(D, np.inf)
    sep = float(D.min() - 2.0 * plan.r)
    sample = _region_sample(plan.region, plan.mesh) if sample is None else sample
    far = pairwise_distances(sp, sample, plan.centers).min(axis=1)
    maximal = bool(np.all(far < 2.0 * plan.r))
    disjoint = plan.mouth_separation() >= 2.0 * plan.delta * (1.0 - 1e-9)
    k = np.arange(min(plan.n_bar, 8))
    inside = True
    for kk in k:
        dm = pairwise_distances(sp, plan.centers[kk], plan.mouths_of(int(kk)))
        inside &= bool(np.all(dm + plan.delta <= plan.r * (1 + 1e-12)))
    return PlanReport(sep, maximal, bool(disjoint), inside, plan.n % 2 == 0)


# ---------------------------------------------------------------- sewn space


@dataclass(eq=False)
class SewnSpace:
    """Base sphere with the tunnels of ``plan`` attached.

    With at most ``HUB_MAX_MOUTHS`` mouths the all-pairs tunnel network is
    solved exactly; beyond that, routes through a single tunnel between the
    ``NEAR_CENTERS`` nearest balls of each endpoint are closed under
    concatenation at sample points, which gives an upper bound on the sewn
    distance.  ``active`` optionally switches tunnels off (exact mode only).
    """

    plan: SewingPlan
    tunnel: TunnelModel
    active: np.ndarray | None = None
    mode: str = "auto"
    _hub: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode == "auto":
            self.mode = "exact" if self.plan.n <= HUB_MAX_MOUTHS else "restricted"
        if self.mode == "restricted" and self.active is not None:
            raise DomainError("tunnel masks need the exact hub mode")
        self._tree = cKDTree(self.plan.centers / self.plan.rho)

    @property
    def base(self) -> ModelSpace:
        return self.plan.space

    @property
    def region(self) -> CompactSet:
        return self.plan.region

    @property
    def h(self) -> float:
        return self.tunnel.h

    # -- removed balls

    def removed_mask(self, pts) -> np.ndarray:
        """True for points inside a removed ball ``B(v_kj, delta/2)``
        (mouth points themselves stand for the tunnel ends and are allowed)."""
        pts = _as_points(pts)
        p = self.plan
        _, k = self._tree.query(pts / p.rho)
        k = np.atleast_1d(k)
        dc = _sphere_angle(pts, p.centers[k]) * p.rho
        out = np.zeros(len(pts), dtype=bool)
        for i in np.flatnonzero(dc < p.r):
            dm = pairwise_distances(p.space, pts[i], p.mouths_of(int(k[i])))[0]
            out[i] = bool(np.any((dm < p.delta / 2.0) & (dm > MEMBERSHIP_TOL)))
        return out

    def valid_mask(self, pts) -> np.ndarray:
        return ~self.removed_mask(pts)

    # -- hub network

    def hub(self) -> np.ndarray:
        if self.mode != "exact":
            raise DomainError("hub matrix is only materialised in exact mode")
        if self._hub is None:
            P = self.plan.all_mouths()
            W = pairwise_distances(self.base, P)
            k, j = self.plan.mouth_index()
            pos = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(k, j))}
            for t, (a, b) in enumerate(self.plan.tunnels()):
                if self.active is not None and not self.active[t]:
                    continue
                u, v = pos[(a, b)], pos[(b, a)]
                W[u, v] = W[v, u] = min(W[u, v], self.h)
            self._hub = floyd_warshall(W, directed=False)
        return self._hub

    def distance_matrix(self, pts) -> np.ndarray:
        pts = _as_points(pts)
        D = pairwise_distances(self.base, pts)
        if self.mode == "exact":
            P = self.plan.all_mouths()
            DM = pairwise_distances(self.base, pts, P)
            G = _minplus(DM, self.hub())
            out = np.minimum(D, _minplus(G, DM.T))
        else:
            out = np.minimum(D, self._single_tunnel(pts, pts))
            out = floyd_warshall(out, directed=False)
        out = np.minimum(out, out.T)
        np.fill_diagonal(out, 0.0)
        return out

    def distances_from(self, center, pts) -> np.ndarray:
        c = np.asarray(center, dtype=float)
        pts = _as_points(pts)
        D = pairwise_distances(self.base, c, pts)[0]
        if self.mode == "exact":
            P = self.plan.all_mouths()
            G = _minplus(pairwise_distances(self.base, c, P), self.hub())
            best = D
            step = max(1, (1 << 22) // max(1, len(P)))
            for s in range(0, len(pts), step):
                DM = pairwise_distances(self.base, pts[s : s + step], P)
                best[s : s + step] = np.minimum(best[s : s + step], (DM + G).min(axis=1))
            return best
        return np.minimum(D, self._single_tunnel(c[None, :], pts)[0])

    def _near(self, pts) -> np.ndarray:
        m = min(NEAR_CENTERS, self.plan.n_bar)
        _, k = self._tree.query(pts / self.plan.rho, k=m)
        return np.asarray(k).reshape(len(pts), m)

    def _single_tunnel(self, X, Y) -> np.ndarray:
        """Best route x -> v_kj -> tunnel -> v_jk -> y with k, j among the
        nearest centers of x and y respectively."""
        p = self.plan
        nx, ny = self._near(X), self._near(Y)
        mx, my = nx.shape[1], ny.shape[1]
        out = np.full((len(X), len(Y)), np.inf)
        rho = p.rho
        for i in range(len(X)):
            k = np.broadcast_to(nx[i][:, None, None], (mx, len(Y), my))
            j = np.broadcast_to(ny[None, :, :], (mx, len(Y), my))
            same = k == j
            jj = np.where(same, (k + 1) % p.n_bar, j)
            a = _sphere_angle(p.mouths(k, jj), X[i]) * rho
            b = _sphere_angle(p.mouths(jj, k), Y[:, None, :]) * rho
            cost = np.where(same, np.inf, a + b)
            out[i] = cost.min(axis=(0, 2)) + self.h
        return out


def _minplus(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``C[i, j] = min_k A[i, k] + B[k, j]``."""
    out = np.empty((A.shape[0], B.shape[1]))
    step = max(1, (1 << 23) // max(1, A.shape[1] * B.shape[1]))
    for s in range(0, A.shape[0], step):
        out[s : s + step] = (A[s : s + step, :, None] + B[None, :, :]).min(axis=1)
    return out


def build_sewn_space(
    space: ModelSpace, A0: CompactSet, r: float, delta: float, h_factor: float = DEFAULT_H_FACTOR, **kw
) -> SewnSpace:
    plan = plan_sewing(space, A0, r, delta, **kw)
    return SewnSpace(plan, TunnelModel.default(space, plan.delta, h_factor))


def sewn_distance(N: SewnSpace, x, y) -> float:
    pts = np.vstack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
    if N.removed_mask(pts).any():
        raise DomainError("point lies inside a removed ball")
    return float(N.distance_matrix(pts)[0, 1])


def sewn_distance_matrix(N: SewnSpace, pts) -> np.ndarray:
    pts = _as_points(pts)
    if N.removed_mask(pts).any():
        raise DomainError("point lies inside a removed ball")
    return N.distance_matrix(pts)


# ---------------------------------------------------------------- certificates


def diameter_bound(r: float, h: float) -> float:
    return 16.0 * r + 3.0 * h


def sample_tube(A0: CompactSet, radius: float, n: int, seed: int) -> np.ndarray:
    """Points within ``radius`` of ``A0``: a random point of a dense sample of
    ``A0`` moved along a random direction by a random length."""
    sp = A0.space
    rho = sp.radius
    rng = np.random.default_rng(seed)
    base = _region_sample(A0, min(radius, 0.05 * rho) / 2.0)
    q = base[rng.integers(0, len(base), n)]
    u = rng.standard_normal((n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = radius * rng.random(n) ** (1.0 / 3.0)
    out = np.empty((n, 4))
    for i in range(n):
        out[i] = exp_sphere(q[i], t[i] * u[i], rho)[0]
    return out


def sample_edited_region(N: SewnSpace, n: int, seed: int, n_tunnels: int = 4) -> PointCloud:
    """Sample of ``A_r'``: tube points outside the removed balls plus both
    mouths of a few tunnels."""
    p = N.plan
    pts = sample_tube(p.region, p.r * (1 - 1e-9), n, seed)
    pts = pts[~N.removed_mask(pts)]
    rng = np.random.default_rng(seed + 1)
    pairs = p.tunnels()
    pick = rng.choice(len(pairs), size=min(n_tunnels, len(pairs)), replace=False)
    ends = []
    for t in sorted(pick):
        a, b = pairs[t]
        ends.append(p.mouths(a, b))
        ends.append(p.mouths(b, a))
    cloud = PointCloud.from_coords(pts, "tube")
    return cloud.concat(PointCloud.from_coords(np.array(ends), "mouth"))


@dataclass(frozen=True)
class DiameterCertificate:
    diameter: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.diameter

    @property
    def ok(self) -> bool:
        return self.diameter <= self.bound


def edited_region_diameter(N: SewnSpace, sample: PointCloud) -> DiameterCertificate:
    if len(sample) == 0:
        raise DomainError("empty sample")
    pts = sample.coords
    in_tube = N.region.dist_to_set(pts) < N.plan.r
    if not in_tube.all():
        raise DomainError("sample must lie in the edited region T_r(A0)")
    D = sewn_distance_matrix(N, pts)
    return DiameterCertificate(float(D.max()), diameter_bound(N.plan.r, N.h))


@dataclass(frozen=True)
class DefectReport:
    eps_dis: float
    eps_cov: float
    gh_bound: float
    lipschitz: float
    n_points: int

    def __iter__(self):
        return iter((self.eps_dis, self.eps_cov, self.gh_bound))


def defect_sample(A0: CompactSet, n_uniform: int = 250, n_tube: int = 250, tube: float = 0.4, seed: int = 0):
    """Fixed sample for comparing sewn spaces with the pulled limit: uniform
    points of the sphere plus points concentrated near ``A0``."""
    sp = A0.space
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_uniform, 4))
    uni = sp.radius * x / np.linalg.norm(x, axis=1, keepdims=True)
    near = sample_tube(A0, tube * sp.radius, n_tube, seed + 1)
    return PointCloud.from_coords(uni, "uniform").concat(PointCloud.from_coords(near, "tube"))


def _same_region(a: CompactSet, b: CompactSet) -> bool:
    return type(a) is type(b) and a.space == b.space and repr(a.params()) == repr(b.params())


def scrunch_map_defect(N: SewnSpace, Y: PulledSpace, sample: PointCloud) -> DefectReport:
    """Distortion and covering radius of the map ``F: N -> Y`` collapsing
    ``A_r'`` to the basepoint.  Sample points in removed balls are dropped."""
    if Y.base != N.base or not _same_region(Y.set, N.region):
        raise DomainError("sewn and pulled spaces must share base and region")
    pts = sample.coords
    pts = pts[~N.removed_mask(pts)]
    if len(pts) < 2:
        raise DomainError("sample too small")
    dN = N.distance_matrix(pts)
    dk = Y.dist_to_set(pts)
    collapsed = dk < N.plan.r
    # image distances in Y
    fk = np.where(collapsed, 0.0, dk)
    dY = np.minimum(pairwise_distances(Y.base, pts), fk[:, None] + fk[None, :])
    both = collapsed[:, None] & collapsed[None, :]
    one = collapsed[:, None] ^ collapsed[None, :]
    dY = np.where(both, 0.0, np.where(one, fk[:, None] + fk[None, :], dY))
    eps_dis = float(np.abs(dY - dN).max())
    # covering: images plus the collapsed points seen as points of Y
    ref_extra = pts[collapsed & ~Y.set.member(pts)]
    cov = 0.0
    if len(ref_extra):
        img = pts[~collapsed]
        to_p0 = Y.dist_to_set(ref_extra)
        best = to_p0 if collapsed.any() else np.full(len(ref_extra), np.inf)
        if len(img):
            dd = Y.distance_matrix(ref_extra, img)
            best = np.minimum(best, dd.min(axis=1))
        cov = float(best.max())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dN > 0, dY / dN, 0.0)
    return DefectReport(eps_dis, cov, 2.0 * max(eps_dis, cov), float(ratio.max()), len(pts))


def sewn_volume(N: SewnSpace | None = None, *, base_volume: float | None = None, n: int | None = None,
                delta: float | None = None, tunnel_vol: float | None = None, space: ModelSpace | None = None) -> float:
    """``Vol(M) - n Vol(B(delta/2)) + (n/2) vol(tunnel)``.

    The edit term is formed first so that the default tunnel model returns the
    base volume bit for bit.
    """
    if N is not None:
        space = N.base
        n = N.plan.n
        delta = N.tunnel.delta
        tunnel_vol = N.tunnel.vol if tunnel_vol is None else tunnel_vol
    if base_volume is None:
        base_volume = space.total_volume
    if not n:
        return float(base_volume)
    ball = model_ball_volume(space, delta / 2.0)
    vol = 2.0 * ball if tunnel_vol is None else tunnel_vol
    return float(base_volume + ((n // 2) * vol - n * ball))


# ---------------------------------------------------------------- serialization

MAX_MOUTH_ROWS = 200_000


def write_sewing_plan(plan: SewingPlan, path, h: float | None = None) -> None:
    h = DEFAULT_H_FACTOR * plan.delta if h is None else h
    with open(path, "w") as fh:
        fh.write(f"# r = {plan.r!r}\n# delta = {plan.delta!r}\n# h = {h!r}\n")
        fh.write(f"# delta_requested = {plan.delta_requested!r}\n# K = {plan.space.K!r}\n")
        for k, c in enumerate(plan.centers):
            fh.write("C," + str(k) + "," + ",".join(repr(float(v)) for v in c) + "\n")
        if plan.n > MAX_MOUTH_ROWS:
            fh.write(f"# mouths omitted: {plan.n} rows; regenerate from centers and directions\n")
            return
        k, j = plan.mouth_index()
        for a, b, m in zip(k, j, plan.all_mouths()):
            fh.write(f"M,{a},{b}," + ",".join(repr(float(v)) for v in m) + "\n")


def read_sewing_plan(path, region: CompactSet) -> SewingPlan:
    """Rebuild a plan from its CSV (mouths are regenerated from the centers)."""
    meta, centers = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") and "=" in line:
                k, v = line[1:].split("=", 1)
                meta[k.strip()] = float(v)
            elif line.startswith("C,"):
                centers.append([float(v) for v in line.split(",")[2:]])
    space = ModelSpace.sphere(meta["K"])
    centers = np.array(centers)
    frames = np.stack([tangent_frame(c) for c in centers])
    return SewingPlan(
        space, region, meta["r"], meta["delta"], centers, fibonacci_sphere(len(centers) - 1), frames,
        meta["delta_requested"], 0.0,
    )


def write_hub_matrix(N: SewnSpace, path) -> None:
    T = N.hub()
    with open(path, "w") as fh:
        fh.write(f"{len(T)}\n")
        for row in T:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
