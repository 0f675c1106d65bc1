"""Pulled metric spaces: a compact set ``K`` collapsed to a basepoint ``p0``.

The quotient distance is ``d_Y(x, p0) = d(x, K)`` and
``d_Y(x1, x2) = min(d(x1, x2), d(x1, K) + d(x2, K))``; volumes are those of
the base with ``K`` removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core_metric import (
    MEMBERSHIP_TOL,
    DomainError,
    ModelSpace,
    _as_points,
    _sphere_angle,
    ball_volume_mc,
    cube_grid_in_ball,
    distances,
    exp_sphere,
    fibonacci_sphere,
    model_ball_volume,
    on_space,
    pairwise_distances,
)


class _Basepoint:
    """Token standing for the collapsed point ``p0``."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "BASEPOINT"


BASEPOINT = _Basepoint()


def _is_basepoint(x) -> bool:
    return x is BASEPOINT


# ---------------------------------------------------------------- compact sets


@dataclass(frozen=True, eq=False)
class CompactSet:
    """A compact subset of a model space.

    Subclasses provide ``dist_to_set``; everything else has defaults.
    ``mesh`` bounds the error of ``dist_to_set`` when it is computed from a
    finite sample of the set (0 for closed forms).
    """

    space: ModelSpace
    kind = "abstract"
    dim = 0
    mesh = 0.0

    def dist_to_set(self, x) -> np.ndarray:
        raise NotImplementedError

    def member(self, x, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        return self.dist_to_set(x) <= tol

    def measure(self) -> float:
        """``dim``-dimensional Hausdorff measure of the set."""
        return 0.0

    def volume(self) -> float:
        return self.measure() if self.dim == 3 else 0.0

    def shell_volume(self, r: float) -> float | None:
        """``H^3(T_r(K) \\ K)`` in closed form, or ``None`` if unavailable."""
        return None

    def sample(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def basepoint(self) -> np.ndarray:
        return self.sample(1)[0]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self.sample(512)
        return pts.min(axis=0), pts.max(axis=0)

    def params(self) -> dict:
        return {}


def _check_space(space: ModelSpace, kind: str, what: str) -> None:
    if space.kind != kind:
        raise DomainError(f"{what} lives in {kind}, got {space.kind}")


@dataclass(frozen=True, eq=False)
class GeodesicCircle(CompactSet):
    """Circle ``{rho (cos t0, sin t0 cos t, sin t0 sin t, 0)}`` at polar angle
    ``theta`` from ``e0``; ``theta = pi/2`` is a great circle."""

    theta: float = math.pi / 2
    kind = "geodesic_circle"
    dim = 1

    def __post_init__(self):
        _check_space(self.space, "sphere3", "a geodesic circle")
        if not (0.0 < self.theta < math.pi):
            raise DomainError("polar angle must lie in (0, pi)")

    def _nearest(self, x: np.ndarray) -> np.ndarray:
        rho = self.space.radius
        xy = x[:, 1:3]
        n = np.linalg.norm(xy, axis=1, keepdims=True)
        u = np.where(n > 0, xy / np.where(n > 0, n, 1.0), np.array([[1.0, 0.0]]))
        s, c = math.sin(self.theta), math.cos(self.theta)
        return rho * np.column_stack([np.full(len(x), c), s * u, np.zeros(len(x))])

    def dist_to_set(self, x) -> np.ndarray:
        x = _as_points(x)
        return _sphere_angle(x, self._nearest(x)) * self.space.radius

    def measure(self) -> float:
        return 2.0 * math.pi * self.space.radius * math.sin(self.theta)

    def shell_volume(self, r: float) -> float | None:
        if abs(self.theta - math.pi / 2) > 1e-15:
            return None
        rho = self.space.radius
        t = min(r / rho, math.pi / 2)
        return 2.0 * math.pi**2 * rho**3 * math.sin(t) ** 2

    def sample(self, n: int) -> np.ndarray:
        t = 2.0 * math.pi * np.arange(n) / max(n, 1)
        rho, s, c = self.space.radius, math.sin(self.theta), math.cos(self.theta)
        return rho * np.column_stack([np.full(n, c), s * np.cos(t), s * np.sin(t), np.zeros(n)])

    def params(self) -> dict:
        return {"theta": self.theta}


@dataclass(frozen=True, eq=False)
class EquatorialSphere(CompactSet):
    """The totally geodesic 2-sphere ``{x3 = 0}``."""

    kind = "equatorial_sphere"
    dim = 2

    def __post_init__(self):
        _check_space(self.space, "sphere3", "the equatorial sphere")

    def dist_to_set(self, x) -> np.ndarray:
        x = _as_points(x)
        rho = self.space.radius
        q = x.copy()
        q[:, 3] = 0.0
        n = np.linalg.norm(q, axis=1, keepdims=True)
        q = np.where(n > 0, rho * q / np.where(n > 0, n, 1.0), np.array([[rho, 0.0, 0.0, 0.0]]))
        return _sphere_angle(x, q) * rho

    def measure(self) -> float:
        return 4.0 * math.pi * self.space.radius**2

    def shell_volume(self, r: float) -> float:
        rho = self.space.radius
        t = min(r, math.pi * rho / 2)
        return 4.0 * math.pi * rho**2 * (t + 0.5 * rho * math.sin(2.0 * t / rho))

    def sample(self, n: int) -> np.ndarray:
        u = fibonacci_sphere(n)
        return self.space.radius * np.column_stack([u, np.zeros(n)])


@dataclass(frozen=True, eq=False)
class LatitudeSphere(CompactSet):
    """The 2-sphere ``{x0 = rho cos(theta)}`` at polar angle ``theta`` from ``e0``."""

    theta: float = math.pi / 2
    kind = "latitude_sphere"
    dim = 2

    def __post_init__(self):
        _check_space(self.space, "sphere3", "a latitude sphere")
        if not (0.0 < self.theta < math.pi):
            raise DomainError("polar angle must lie in (0, pi)")

    def dist_to_set(self, x) -> np.ndarray:
        x = _as_points(x)
        rho = self.space.radius
        w = x[:, 1:]
        n = np.linalg.norm(w, axis=1, keepdims=True)
        u = np.where(n > 0, w / np.where(n > 0, n, 1.0), np.array([[1.0, 0.0, 0.0]]))
        q = rho * np.column_stack([np.full(len(x), math.cos(self.theta)), math.sin(self.theta) * u])
        return _sphere_angle(x, q) * rho

    def measure(self) -> float:
        return 4.0 * math.pi * (self.space.radius * math.sin(self.theta)) ** 2

    def shell_volume(self, r: float) -> float:
        rho = self.space.radius
        lo = max(0.0, self.theta - r / rho)
        hi = min(math.pi, self.theta + r / rho)
        F = lambda t: 0.5 * t - 0.25 * math.sin(2.0 * t)  # noqa: E731
        return 4.0 * math.pi * rho**3 * (F(hi) - F(lo))

    def sample(self, n: int) -> np.ndarray:
        rho = self.space.radius
        u = fibonacci_sphere(n)
        return rho * np.column_stack([np.full(n, math.cos(self.theta)), math.sin(self.theta) * u])

    def params(self) -> dict:
        return {"theta": self.theta}


@dataclass(frozen=True, eq=False)
class RoundBall(CompactSet):
    """Closed metric ball ``B(center, radius)`` of a sphere or Euclidean space."""

    center: tuple = (1.0, 0.0, 0.0, 0.0)
    radius: float = 0.5
    kind = "round_ball"
    dim = 3

    def __post_init__(self):
        if self.space.kind not in ("sphere3", "euclid3"):
            raise DomainError("round balls are supported on sphere3 and euclid3")
        c = np.asarray(self.center, dtype=float)
        if not on_space(self.space, c).all():
            raise DomainError("ball center is not in the space")
        if self.radius <= 0:
            raise DomainError("ball radius must be positive")

    def dist_to_set(self, x) -> np.ndarray:
        d = distances(self.space, np.asarray(self.center, dtype=float), _as_points(x))
        return np.maximum(d - self.radius, 0.0)

    def member(self, x, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        d = distances(self.space, np.asarray(self.center, dtype=float), _as_points(x))
        return d <= self.radius + tol

    def measure(self) -> float:
        return model_ball_volume(self.space, self.radius)

    def shell_volume(self, r: float) -> float:
        return model_ball_volume(self.space, self.radius + r) - model_ball_volume(self.space, self.radius)

    def sample(self, n: int) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        grid = cube_grid_in_ball(self.radius, n)
        if self.space.kind == "sphere3":
            return exp_sphere(c, grid, self.space.radius)
        return c + grid

    def basepoint(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def bbox(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def params(self) -> dict:
        return {"center": tuple(float(v) for v in self.center), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class EuclidCircle(CompactSet):
    """Circle of ``radius`` about the origin in the ``x0 x1`` plane of R^3."""

    radius: float = 1.0
    kind = "euclid_circle"
    dim = 1

    def __post_init__(self):
        _check_space(self.space, "euclid3", "a planar circle")

    def dist_to_set(self, x) -> np.ndarray:
        x = _as_points(x)
        return np.hypot(np.hypot(x[:, 0], x[:, 1]) - self.radius, x[:, 2])

    def measure(self) -> float:
        return 2.0 * math.pi * self.radius

    def shell_volume(self, r: float) -> float | None:
        # solid torus (Pappus) until the tube reaches the axis
        return 2.0 * math.pi**2 * self.radius * r * r if r <= self.radius else None

    def sample(self, n: int) -> np.ndarray:
        t = 2.0 * math.pi * np.arange(n) / max(n, 1)
        return self.radius * np.column_stack([np.cos(t), np.sin(t), np.zeros(n)])

    def bbox(self):
        R = self.radius
        return np.array([-R, -R, 0.0]), np.array([R, R, 0.0])

    def params(self) -> dict:
        return {"radius": self.radius}


@dataclass(frozen=True, eq=False)
class EuclidSphere(CompactSet):
    """Round 2-sphere of ``radius`` about the origin of R^3."""

    radius: float = 1.0
    kind = "euclid_sphere"
    dim = 2

    def __post_init__(self):
        _check_space(self.space, "euclid3", "a round sphere")

    def dist_to_set(self, x) -> np.ndarray:
        return np.abs(np.linalg.norm(_as_points(x), axis=1) - self.radius)

    def measure(self) -> float:
        return 4.0 * math.pi * self.radius**2

    def shell_volume(self, r: float) -> float:
        R = self.radius
        return 4.0 / 3.0 * math.pi * ((R + r) ** 3 - max(R - r, 0.0) ** 3)

    def sample(self, n: int) -> np.ndarray:
        return self.radius * fibonacci_sphere(n)

    def bbox(self):
        return np.full(3, -self.radius), np.full(3, self.radius)

    def params(self) -> dict:
        return {"radius": self.radius}


@dataclass(frozen=True, eq=False)
class RadialRing(CompactSet):
    """The coordinate sphere ``{r = c}`` of a rotationally symmetric space.

    Points are ``(r, w0, w1, w2)`` with ``w`` a unit direction.
    """

    c: float = 1.0
    kind = "radial_ring"
    dim = 2

    def __post_init__(self):
        _check_space(self.space, "rotsym", "a radial ring")
        g = self.space.graph
        if not (g.r[0] <= self.c <= g.r[-1]):
            raise DomainError("ring radius outside the profile grid")

    def dist_to_set(self, x) -> np.ndarray:
        x = _as_points(x)
        g = self.space.graph
        s = g.arclength
        return np.abs(np.interp(x[:, 0], g.r, s) - float(np.interp(self.c, g.r, s)))

    def measure(self) -> float:
        return 4.0 * math.pi * self.c**2

    def shell_volume(self, r: float) -> float:
        g = self.space.graph
        s = g.arclength
        sc = float(np.interp(self.c, g.r, s))
        lo = np.interp(sc - r, s, g.r)
        hi = np.interp(sc + r, s, g.r)
        rr = np.linspace(lo, hi, 4001)
        dens = 4.0 * math.pi * rr**2 * np.sqrt(1.0 + np.interp(rr, g.r, g.zp_sq))
        return float(np.trapezoid(dens, rr))

    def sample(self, n: int) -> np.ndarray:
        return np.column_stack([np.full(n, self.c), fibonacci_sphere(n)])

    def params(self) -> dict:
        return {"c": self.c}


@dataclass(frozen=True, eq=False)
class PointList(CompactSet):
    """Explicit finite set, or a dense sample standing in for a set without a
    closed-form distance (``mesh`` then records the sample's covering radius)."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    mesh: float = 0.0
    kind = "point_list"
    dim = 0

    def __post_init__(self):
        pts = _as_points(self.points)
        if len(pts) == 0:
            raise DomainError("point list must be nonempty")
        if not on_space(self.space, pts).all():
            raise DomainError("listed points must lie in the space")
        object.__setattr__(self, "points", pts)

    def dist_to_set(self, x) -> np.ndarray:
        return pairwise_distances(self.space, _as_points(x), self.points).min(axis=1)

    def shell_volume(self, r: float) -> float | None:
        if len(self.points) == 1 and self.space.kind in ("sphere3", "euclid3"):
            return model_ball_volume(self.space, r)
        return None

    def sample(self, n: int) -> np.ndarray:
        return self.points[: max(n, 1)]

    def basepoint(self) -> np.ndarray:
        return self.points[0]

    def params(self) -> dict:
        return {"points": self.points.tolist(), "mesh": self.mesh}


SET_KINDS = {
    cls.kind: cls
    for cls in (GeodesicCircle, EquatorialSphere, LatitudeSphere, RoundBall, EuclidCircle, EuclidSphere, RadialRing, PointList)
}


# ---------------------------------------------------------------- pulled space


@dataclass(eq=False)
class PulledSpace:
    """Quotient of ``base`` collapsing ``set`` to ``BASEPOINT``.

    ``base_volume`` overrides the base measure for unbounded bases (the
    volume of the compact truncation that is actually modelled).
    """

    base: ModelSpace
    set: CompactSet
    base_volume: float | None = None

    def __post_init__(self):
        if self.set.space != self.base or self.set.space.graph is not self.base.graph:
            raise DomainError("the collapsed set must live in the base space")

    @property
    def p0_coords(self) -> np.ndarray:
        return self.set.basepoint()

    def dist_to_set(self, x) -> np.ndarray:
        return self.set.dist_to_set(x)

    def valid_mask(self, pts) -> np.ndarray:
        return ~self.set.member(pts)

    def distances_from(self, center, pts) -> np.ndarray:
        pts = _as_points(pts)
        dk = self.set.dist_to_set(pts)
        if _is_basepoint(center):
            return dk
        c = np.asarray(center, dtype=float)
        dkc = float(self.set.dist_to_set(c)[0])
        return np.minimum(distances(self.base, c, pts), dkc + dk)

    def distance_matrix(self, P, Q=None) -> np.ndarray:
        P = _as_points(P)
        Q = P if Q is None else _as_points(Q)
        dp = self.set.dist_to_set(P)
        dq = dp if Q is P else self.set.dist_to_set(Q)
        out = np.minimum(pairwise_distances(self.base, P, Q), dp[:, None] + dq[None, :])
        if Q is P:
            np.fill_diagonal(out, 0.0)
        return out

    def default_region(self, center, r: float):
        if self.base.kind == "sphere3":
            return None
        if self.base.kind == "euclid3":
            lo, hi = self.set.bbox()
            lo, hi = lo - r, hi + r
            if not _is_basepoint(center):
                c = np.asarray(center, dtype=float)
                lo, hi = np.minimum(lo, c - r), np.maximum(hi, c + r)
            return lo, hi
        g = self.base.graph
        return float(g.r[0]), float(g.r[-1])

    def describe(self) -> str:
        lines = [f"{k} = {v}" for k, v in self.base.describe().items()]
        lines.append(f"set = {self.set.kind}")
        for k, v in self.set.params().items():
            if isinstance(v, (list, tuple)):
                v = " ".join(repr(float(t)) for t in np.ravel(v))
            lines.append(f"set.{k} = {v!r}" if not isinstance(v, str) else f"set.{k} = {v}")
        if self.base_volume is not None:
            lines.append(f"base_volume = {self.base_volume!r}")
        lines.append("basepoint = " + " ".join(repr(float(t)) for t in self.p0_coords))
        return "\n".join(lines) + "\n"


def _check_argument(Y: PulledSpace, x) -> None:
    if _is_basepoint(x):
        return
    x = np.asarray(x, dtype=float)
    if not on_space(Y.base, x).all():
        raise DomainError("point does not lie in the base space")
    if Y.set.member(x)[0]:
        raise DomainError("points of the collapsed set exist only as the basepoint token")


def pulled_distance(Y: PulledSpace, x1, x2) -> float:
    _check_argument(Y, x1)
    _check_argument(Y, x2)
    if _is_basepoint(x1) and _is_basepoint(x2):
        return 0.0
    if _is_basepoint(x1):
        x1, x2 = x2, x1
    return float(Y.distances_from(x2, np.asarray(x1, dtype=float))[0])


def pulled_total_volume(Y: PulledSpace) -> float:
    base = Y.base_volume if Y.base_volume is not None else Y.base.total_volume
    if base is None or not math.isfinite(base):
        raise DomainError("base volume is unknown; pass base_volume for unbounded bases")
    return base - Y.set.volume()


class VolumeEstimate(NamedTuple):
    value: float
    se: float
    exact: bool


def pulled_ball_volume(Y: PulledSpace, r: float, M: int = 1_000_000, seed: int = 0) -> VolumeEstimate:
    """Volume of ``B_Y(p0, r)``, i.e. ``H^3(T_r(K) \\ K)`` in the base."""
    if r <= 0:
        raise DomainError("radius must be positive")
    exact = Y.set.shell_volume(r)
    if exact is not None:
        total = Y.base.total_volume
        if total is not None and math.isfinite(total):
            exact = min(exact, total - Y.set.volume())
        return VolumeEstimate(float(exact), 0.0, True)
    v, se = ball_volume_mc(Y, BASEPOINT, r, M, seed)
    return VolumeEstimate(v, se, False)


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    coefficient: float
    residual: float


def tubular_scaling_exponent(
    base: ModelSpace, K: CompactSet, r_list, M: int = 1_000_000, seed: int = 0
) -> ScalingFit:
    """Least-squares slope of ``log Vol(T_r(K) \\ K)`` against ``log r``."""
    r = np.asarray(r_list, dtype=float)
    if r.size < 4:
        raise DomainError("need at least four radii")
    if np.any(np.diff(r) >= 0) or np.any(r <= 0):
        raise DomainError("radii must be positive and strictly decreasing")
    Y = PulledSpace(base, K)
    vols = np.array([pulled_ball_volume(Y, float(t), M, seed + i).value for i, t in enumerate(r)])
    if np.ptp(vols) == 0.0 or np.any(vols <= 0):
        raise DomainError("degenerate regression: tube volumes are constant or zero")
    A = np.column_stack([np.log(r), np.ones_like(r)])
    coef, *_ = np.linalg.lstsq(A, np.log(vols), rcond=None)
    res = float(np.max(np.abs(A @ coef - np.log(vols))))
    return ScalingFit(float(coef[0]), float(math.exp(coef[1])), res)


# ---------------------------------------------------------------- serialization


def write_pulled_space(Y: PulledSpace, path) -> None:
    with open(path, "w") as fh:
        fh.write(Y.describe())


def read_pulled_space(path, graph=None) -> PulledSpace:
    kv = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
    kind = kv["kind"]
    if kind == "sphere3":
        base = ModelSpace.sphere(float(kv["K"]))
    elif kind == "euclid3":
        base = ModelSpace.euclid()
    else:
        if graph is None:
            raise DomainError("rotsym bases need their graph profile")
        base = ModelSpace.rotsym(graph)
    cls = SET_KINDS[kv["set"]]
    params = {}
    for k, v in kv.items():
        if k.startswith("set."):
            name = k[4:]
            nums = [float(t) for t in v.split()]
            if name == "points":
                params[name] = np.array(nums).reshape(-1, base.ambient_dim)
            elif name == "center":
                params[name] = tuple(nums)
            else:
                params[name] = nums[0]
    bv = float(kv["base_volume"]) if "base_volume" in kv else None
    return PulledSpace(base, cls(base, **params), bv)
