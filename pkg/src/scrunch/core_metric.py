"""Model-space distances, samplers, Monte Carlo ball volumes and finite metrics.

Points are plain numpy vectors:

* ``sphere3``: ambient coordinates in R^4 with ``|x| = rho = K**-0.5``;
* ``euclid3``: coordinates in R^3;
* ``rotsym``: ``(r, w0, w1, w2)`` with ``w`` a unit direction in R^3.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .rotsym import GraphProfile

MEMBERSHIP_TOL = 1e-8
TRIANGLE_TOL = 1e-9
MC_CHUNK = 1 << 18


class DomainError(ValueError):
    """Input outside the domain of an operation."""


@dataclass(frozen=True)
class ModelSpace:
    kind: str
    K: float | None = None
    graph: "GraphProfile | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("sphere3", "euclid3", "rotsym"):
            raise DomainError(f"unknown space kind {self.kind!r}")
        if self.kind == "sphere3" and (self.K is None or self.K <= 0):
            raise DomainError("sphere3 needs curvature K > 0")
        if self.kind == "rotsym" and self.graph is None:
            raise DomainError("rotsym needs a graph profile")

    @classmethod
    def sphere(cls, K: float = 1.0) -> "ModelSpace":
        if K <= 0:
            raise DomainError("sphere3 needs curvature K > 0")
        return cls("sphere3", float(K))

    @classmethod
    def euclid(cls) -> "ModelSpace":
        return cls("euclid3")

    @classmethod
    def rotsym(cls, graph: "GraphProfile") -> "ModelSpace":
        return cls("rotsym", None, graph)

    @property
    def radius(self) -> float:
        if self.kind != "sphere3":
            return math.inf
        return self.K ** -0.5

    @property
    def ambient_dim(self) -> int:
        return 3 if self.kind == "euclid3" else 4

    @property
    def total_volume(self) -> float | None:
        if self.kind == "sphere3":
            return 2.0 * math.pi**2 * self.radius**3
        return None

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "sphere3":
            out["K"] = repr(self.K)
        return out


def sphere_ball_volume(r: float, rho: float = 1.0) -> float:
    """Volume of a geodesic ball of radius ``r`` in the round 3-sphere of radius ``rho``."""
    r = min(max(r, 0.0), math.pi * rho)
    t = r / rho
    return math.pi * rho**3 * (2.0 * t - math.sin(2.0 * t))


def euclid_ball_volume(r: float) -> float:
    return 4.0 / 3.0 * math.pi * r**3


def model_ball_volume(space: ModelSpace, r: float) -> float:
    if space.kind == "sphere3":
        return sphere_ball_volume(r, space.radius)
    if space.kind == "euclid3":
        return euclid_ball_volume(r)
    raise DomainError("no closed-form ball volume for rotsym spaces")


# ---------------------------------------------------------------- point clouds


@dataclass
class PointCloud:
    ids: np.ndarray
    coords: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords.reshape(0, 4) if self.coords.size == 0 else self.coords[None, :]
        if not self.labels:
            self.labels = [frozenset() for _ in range(len(self.ids))]
        self.labels = [frozenset(lb) for lb in self.labels]
        if len(self.ids) != len(self.coords) or len(self.labels) != len(self.ids):
            raise ValueError("ids, coords and labels must have equal length")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("point ids must be unique")

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_coords(cls, coords, label: str | None = None) -> "PointCloud":
        coords = np.asarray(coords, dtype=float)
        labels = [frozenset([label]) if label else frozenset() for _ in range(len(coords))]
        return cls(np.arange(len(coords)), coords, labels)

    def subset(self, mask) -> "PointCloud":
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return PointCloud(self.ids[idx], self.coords[idx], [self.labels[i] for i in idx])

    def concat(self, other: "PointCloud") -> "PointCloud":
        offset = int(self.ids.max()) + 1 if len(self) else 0
        return PointCloud(
            np.concatenate([self.ids, other.ids + offset]),
            np.vstack([self.coords, other.coords]),
            self.labels + other.labels,
        )


def write_point_cloud(cloud: PointCloud, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x0", "x1", "x2", "x3", "labels"])
        for i, x, lb in zip(cloud.ids, cloud.coords, cloud.labels):
            xs = [repr(float(v)) for v in x] + [""] * (4 - len(x))
            w.writerow([int(i), *xs, "|".join(sorted(lb))])


def read_point_cloud(path) -> PointCloud:
    ids, coords, labels = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ids.append(int(row["id"]))
            xs = [row[f"x{k}"] for k in range(4)]
            coords.append([float(v) for v in xs if v != ""])
            labels.append(frozenset(s for s in row["labels"].split("|") if s))
    return PointCloud(np.array(ids, dtype=np.int64), np.array(coords, dtype=float), labels)


# ---------------------------------------------------------------- distances


def _as_points(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q[None, :] if q.ndim == 1 else q


def on_space(space: ModelSpace, pts, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    pts = _as_points(pts)
    if pts.shape[1] != space.ambient_dim:
        return np.zeros(len(pts), dtype=bool)
    if space.kind == "sphere3":
        rho = space.radius
        return np.abs(np.linalg.norm(pts, axis=1) - rho) <= tol * max(rho, 1.0)
    if space.kind == "rotsym":
        g = space.graph
        r_ok = (pts[:, 0] >= g.r[0] - tol) & (pts[:, 0] <= g.r[-1] + tol)
        return r_ok & (np.abs(np.linalg.norm(pts[:, 1:], axis=1) - 1.0) <= tol)
    return np.all(np.isfinite(pts), axis=1)


def _sphere_angle(a, b) -> np.ndarray:
    # 2*atan2(|a-b|, |a+b|) keeps full precision for nearby and antipodal pairs
    return 2.0 * np.arctan2(np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1))


def distances(space: ModelSpace, p, qs) -> np.ndarray:
    """Vectorised intrinsic distance from ``p`` to each row of ``qs``."""
    p = np.asarray(p, dtype=float)
    qs = _as_points(qs)
    if space.kind == "sphere3":
        return _sphere_angle(qs, p[None, :]) * space.radius
    if space.kind == "euclid3":
        return np.linalg.norm(qs - p, axis=1)
    from .rotsym import rotsym_distances_from

    return rotsym_distances_from(space.graph, p, qs)


def pairwise_distances(space: ModelSpace, P, Q=None) -> np.ndarray:
    P = _as_points(P)
    Q = P if Q is None else _as_points(Q)
    if space.kind in ("sphere3", "euclid3"):
        out = np.empty((len(P), len(Q)))
        step = max(1, (1 << 22) // max(1, len(Q)))
        for s in range(0, len(P), step):
            blk = P[s : s + step, None, :]
            if space.kind == "sphere3":
                out[s : s + step] = _sphere_angle(blk, Q[None, :, :]) * space.radius
            else:
                out[s : s + step] = np.linalg.norm(blk - Q[None, :, :], axis=-1)
        return out
    return np.vstack([distances(space, p, Q) for p in P])


def geodesic_distance(space: ModelSpace, p, q) -> float:
    if not on_space(space, np.vstack([p, q])).all():
        raise DomainError("point does not lie in the space")
    return float(distances(space, p, np.asarray(q, dtype=float)[None, :])[0])


# ---------------------------------------------------------------- sampling


def _sphere_points(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    x = rng.standard_normal((n, 4))
    return rho * x / np.linalg.norm(x, axis=1, keepdims=True)


def sample_sphere(K: float, N: int, seed: int) -> PointCloud:
    if K <= 0:
        raise DomainError("curvature must be positive")
    if N < 0:
        raise DomainError("sample count must be nonnegative")
    rng = np.random.default_rng(seed)
    pts = _sphere_points(rng, N, K ** -0.5) if N else np.empty((0, 4))
    return PointCloud(np.arange(N), pts)


def tangent_frame(p: np.ndarray) -> np.ndarray:
    """Orthonormal basis (4x3) of the tangent space of S^3 at ``p``."""
    u = p / np.linalg.norm(p)
    basis = np.eye(4)
    order = np.argsort(np.abs(u))  # least aligned axes first
    vecs = [u]
    for k in order:
        v = basis[k] - sum(np.dot(basis[k], w) * w for w in vecs)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            vecs.append(v / nv)
        if len(vecs) == 4:
            break
    return np.stack(vecs[1:], axis=1)


def exp_sphere(p: np.ndarray, V: np.ndarray, rho: float, frame: np.ndarray | None = None) -> np.ndarray:
    """Exponential map at ``p`` of tangent vectors ``V`` (rows, length units, frame coordinates)."""
    frame = tangent_frame(p) if frame is None else frame
    V = _as_points(V)
    n = np.linalg.norm(V, axis=1)
    t = n / rho
    with np.errstate(invalid="ignore", divide="ignore"):
        dirs = np.where(n[:, None] > 0, V / np.where(n > 0, n, 1.0)[:, None], 0.0)
    return np.cos(t)[:, None] * p[None, :] + (rho * np.sin(t))[:, None] * (dirs @ frame.T)


def sample_region(space: ModelSpace, M: int, rng: np.random.Generator, region=None):
    """Uniform samples of the base measure; returns ``(points, weights)`` such
    that the mean of ``weights * indicator`` estimates a volume."""
    if space.kind == "sphere3":
        return _sphere_points(rng, M, space.radius), np.full(M, space.total_volume)
    if space.kind == "euclid3":
        if region is None:
            raise DomainError("euclid3 Monte Carlo needs a bounding box")
        lo, hi = (np.asarray(b, dtype=float) for b in region)
        pts = lo + (hi - lo) * rng.random((M, 3))
        return pts, np.full(M, float(np.prod(hi - lo)))
    if region is None:
        raise DomainError("rotsym Monte Carlo needs a radial interval")
    r_lo, r_hi = region
    g = space.graph
    r = r_lo + (r_hi - r_lo) * rng.random(M)
    w = rng.standard_normal((M, 3))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    dens = np.sqrt(1.0 + np.interp(r, g.r, g.zp_sq)) * r**2
    pts = np.column_stack([r, w])
    return pts, 4.0 * math.pi * (r_hi - r_lo) * dens


def _space_hooks(space, center):
    """Return (base ModelSpace, distance-from-center fn, validity-mask fn)."""
    if isinstance(space, ModelSpace):
        return space, (lambda pts: distances(space, center, pts)), None
    return space.base, (lambda pts: space.distances_from(center, pts)), space.valid_mask


def ball_volume_mc(space, center, r: float, M: int, seed: int, region=None) -> tuple[float, float]:
    """Monte Carlo volume of the metric ball ``B(center, r)``.

    ``space`` is a :class:`ModelSpace` or any object with ``base``,
    ``distances_from(center, pts)`` and ``valid_mask(pts)`` (pulled and sewn
    spaces).  Returns ``(estimate, one-sigma standard error)``.
    """
    if r <= 0:
        raise DomainError("radius must be positive")
    if M < 1:
        raise DomainError("need at least one sample")
    base, dist, valid = _space_hooks(space, center)
    if region is None and hasattr(space, "default_region"):
        region = space.default_region(center, r)
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < M:
        m = min(MC_CHUNK, M - done)
        pts, w = sample_region(base, m, rng, region)
        hit = dist(pts) < r
        if valid is not None:
            hit &= valid(pts)
        vals = np.where(hit, w, 0.0)
        s1 += vals.sum()
        s2 += (vals * vals).sum()
        done += m
    mean = s1 / M
    var = max(s2 / M - mean * mean, 0.0)
    return float(mean), float(math.sqrt(var / M))


def ball_deficit_mc(space: ModelSpace, center, r: float, M: int, seed: int) -> tuple[float, float]:
    """Estimate ``Vol_E(B(0,r)) - Vol(B(center,r))`` on a model space.

    Samples the box ``[-r, r]^3`` of the exponential chart at ``center`` and
    uses the Euclidean ball in the chart as a control variate, so the
    estimator is unbiased with variance of order ``r^4`` relative to the
    ball volume.  Returns ``(deficit, standard error)``.
    """
    if space.kind not in ("sphere3", "euclid3"):
        raise DomainError("chart sampling is available on sphere3 and euclid3 only")
    if r <= 0 or M < 1:
        raise DomainError("need r > 0 and M >= 1")
    center = np.asarray(center, dtype=float)
    rng = np.random.default_rng(seed)
    box = (2.0 * r) ** 3
    frame = tangent_frame(center) if space.kind == "sphere3" else None
    s1 = s2 = 0.0
    done = 0
    while done < M:
        m = min(MC_CHUNK, M - done)
        v = rng.uniform(-r, r, size=(m, 3))
        n = np.linalg.norm(v, axis=1)
        if space.kind == "sphere3":
            rho = space.radius
            pts = exp_sphere(center, v, rho, frame)
            with np.errstate(invalid="ignore", divide="ignore"):
                jac = np.where(n > 0, (rho * np.sin(n / rho) / np.where(n > 0, n, 1.0)) ** 2, 1.0)
        else:
            pts = center + v
            jac = np.ones(m)
        in_chart = n < r
        in_ball = distances(space, center, pts) < r
        vals = box * (in_chart.astype(float) - jac * in_ball)
        s1 += vals.sum()
        s2 += (vals * vals).sum()
        done += m
    mean = s1 / M
    var = max(s2 / M - mean * mean, 0.0)
    return float(mean), float(math.sqrt(var / M))


# ---------------------------------------------------------------- finite metrics


@dataclass
class FiniteMetric:
    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.d.ndim != 2 or self.d.shape[0] != self.d.shape[1]:
            raise ValueError("distance matrix must be square")

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def restrict(self, idx: Sequence[int]) -> "FiniteMetric":
        idx = np.asarray(idx)
        return FiniteMetric(self.d[np.ix_(idx, idx)])


@dataclass
class MetricReport:
    symmetry: list = field(default_factory=list)
    diagonal: list = field(default_factory=list)
    triangle: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.symmetry or self.diagonal or self.triangle)


def check_metric(m: FiniteMetric, tol: float = TRIANGLE_TOL) -> MetricReport:
    d = m.d
    rep = MetricReport()
    n = m.n
    for i in range(n):
        if abs(d[i, i]) > tol:
            rep.diagonal.append(i)
        for j in range(i + 1, n):
            if abs(d[i, j] - d[j, i]) > tol:
                rep.symmetry.append((i, j))
    # d[i,k] > d[i,j] + d[j,k] for some j
    for i in range(n):
        excess = d[i][None, :] - (d[i][:, None] + d)  # [j, k]
        for j, k in zip(*np.nonzero(excess > tol)):
            rep.triangle.append((i, int(j), int(k)))
    return rep


def write_finite_metric(m: FiniteMetric, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{m.n}\n")
        for row in m.d:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_finite_metric(path) -> FiniteMetric:
    lines = Path(path).read_text().strip().splitlines()
    n = int(lines[0])
    d = np.array([[float(v) for v in ln.split(",")] for ln in lines[1 : n + 1]])
    return FiniteMetric(d.reshape(n, n))


GH_MAX_POINTS = 7


def gh_exact_small(X: FiniteMetric, Y: FiniteMetric) -> float:
    """Exact Gromov-Hausdorff distance between two metric spaces of at most 7 points.

    Every correspondence contains one of the form ``graph(f) U graph(g)^T``
    with ``f: X -> Y`` and ``g`` defined on the points of ``Y`` missed by
    ``f``; such a sub-correspondence never has larger distortion, so a
    branch-and-bound over ``(f, g)`` is exact.
    """
    n, m = X.n, Y.n
    if n > GH_MAX_POINTS or m > GH_MAX_POINTS:
        raise DomainError(f"exhaustive GH is limited to {GH_MAX_POINTS} points per side")
    if n == 0 or m == 0:
        raise DomainError("spaces must be nonempty")
    dx = X.d.tolist()
    dy = Y.d.tolist()
    best = [max(max(map(max, dx)), max(map(max, dy)))]  # distortion of X x Y
    pairs: list[tuple[int, int]] = []

    def added_dis(a, b, cur):
        worst = cur
        for a2, b2 in pairs:
            e = abs(dx[a][a2] - dy[b][b2])
            if e > worst:
                worst = e
        return worst

    def cover_y(missing, k, cur):
        if k == len(missing):
            best[0] = min(best[0], cur)
            return
        b = missing[k]
        for a in range(n):
            dis = added_dis(a, b, cur)
            if dis < best[0]:
                pairs.append((a, b))
                cover_y(missing, k + 1, dis)
                pairs.pop()

    def assign_x(a, cur, hit):
        if a == n:
            cover_y([b for b in range(m) if not hit[b]], 0, cur)
            return
        for b in range(m):
            dis = added_dis(a, b, cur)
            if dis < best[0]:
                pairs.append((a, b))
                was = hit[b]
                hit[b] = True
                assign_x(a + 1, dis, hit)
                hit[b] = was
                pairs.pop()

    assign_x(0, 0.0, [False] * m)
    return 0.5 * best[0]


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly equidistributed unit vectors in R^3 (golden-angle spiral)."""
    if n <= 0:
        return np.empty((0, 3))
    k = np.arange(n) + 0.5
    zc = 1.0 - 2.0 * k / n
    rad = np.sqrt(np.maximum(0.0, 1.0 - zc * zc))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * np.arange(n)
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), zc])


def cube_grid_in_ball(radius: float, n_target: int) -> np.ndarray:
    """Cubic lattice points of the closed ball of ``radius`` about 0 in R^3,
    with spacing chosen to give roughly ``n_target`` points (origin first)."""
    h = radius * (4.0 * math.pi / (3.0 * max(n_target, 1))) ** (1.0 / 3.0)
    k = int(math.floor(radius / h))
    ax = h * np.arange(-k, k + 1)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    g = g[np.linalg.norm(g, axis=1) <= radius + 1e-12]
    return g[np.argsort(np.linalg.norm(g, axis=1), kind="stable")]
