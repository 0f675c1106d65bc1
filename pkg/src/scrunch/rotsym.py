"""Rotationally symmetric 3-manifolds of nonnegative scalar curvature.

A manifold in this class is described either by its Hawking mass function
``m(r)`` on ``[r_min, r_max]`` or by the height ``z(r)`` of its graphical
embedding, with metric ``(1 + z'(r)^2) dr^2 + r^2 g_round``.  The two are
related by ``m = (r/2) z'^2 / (1 + z'^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator, RegularGridInterpolator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .core_metric import DomainError

DEFAULT_GRID = 10_001
ADMISSIBLE_TOL = 1e-10


@dataclass
class HawkingProfile:
    r: np.ndarray
    m: np.ndarray
    stripes: list = field(default_factory=list)
    func: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.r.ndim != 1 or self.r.size == 0 or self.r.shape != self.m.shape:
            raise ValueError("r and m must be equal-length nonempty vectors")
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    def __call__(self, x):
        """Hawking mass at arbitrary radii (exact if the profile is analytic)."""
        if self.func is not None:
            return self.func(np.asarray(x, dtype=float))
        if self.r.size < 2:
            return np.full_like(np.asarray(x, dtype=float), self.m[0])
        return PchipInterpolator(self.r, self.m, extrapolate=True)(x)


@dataclass
class GraphProfile:
    r: np.ndarray
    z: np.ndarray
    zp: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.zp = np.asarray(self.zp, dtype=float)

    @property
    def zp_sq(self) -> np.ndarray:
        """``z'^2`` with an infinite endpoint slope replaced by its neighbour."""
        out = self.zp**2
        bad = ~np.isfinite(out)
        if bad.any() and (~bad).any():
            out = out.copy()
            out[bad] = np.interp(self.r[bad], self.r[~bad], out[~bad])
        return out

    def radial_length(self, r1: float, r2: float) -> float:
        """Arc length of the radial segment between ``r1`` and ``r2``."""
        lo, hi = sorted((r1, r2))
        return abs(float(np.interp(hi, self.r, self.arclength) - np.interp(lo, self.r, self.arclength)))

    @property
    def arclength(self) -> np.ndarray:
        # s(r) = int sqrt(1 + z'^2) dr; the chord length of the graph is exact for a
        # piecewise linear z and converges at second order otherwise
        if getattr(self, "_s", None) is None:
            seg = np.hypot(np.diff(self.r), np.diff(self.z))
            self._s = np.concatenate([[0.0], np.cumsum(seg)])
        return self._s


# ---------------------------------------------------------------- admissibility


@dataclass
class AdmissibilityReport:
    boundary_ok: bool
    strict: list = field(default_factory=list)
    monotone: list = field(default_factory=list)
    stripes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.boundary_ok and not (self.strict or self.monotone or self.stripes)

    def summary(self) -> str:
        if self.ok:
            return "admissible"
        parts = []
        if not self.boundary_ok:
            parts.append("m_H(r_min) != r_min/2")
        if self.strict:
            parts.append(f"m_H(r) < r/2 violated at {len(self.strict)} points (first r={self.strict[0][1]:.6g})")
        if self.monotone:
            parts.append(f"m_H decreasing at {len(self.monotone)} points")
        if self.stripes:
            parts.append(f"stripe formula off at {len(self.stripes)} points")
        return "; ".join(parts)


def check_admissible(p: HawkingProfile, tol: float = ADMISSIBLE_TOL) -> AdmissibilityReport:
    r, m = p.r, p.m
    rep = AdmissibilityReport(abs(m[0] - r[0] / 2.0) <= tol)
    for i in np.flatnonzero(r[1:] / 2.0 - m[1:] <= 0.0) + 1:
        rep.strict.append((int(i), float(r[i])))
    for i in np.flatnonzero(np.diff(m) < -tol):
        rep.monotone.append((int(i), float(r[i])))
    for a, b, K in p.stripes:
        inside = (r > a) & (r < b)
        off = np.abs(m - r**3 * K / 2.0) > tol * np.maximum(1.0, np.abs(m))
        for i in np.flatnonzero(inside & off):
            rep.stripes.append((int(i), float(r[i])))
    return rep


def _require_admissible(p: HawkingProfile) -> None:
    rep = check_admissible(p)
    if not rep.ok:
        raise DomainError(f"inadmissible Hawking profile: {rep.summary()}")


# ---------------------------------------------------------------- embedding

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _slope(m, r):
    with np.errstate(divide="ignore", invalid="ignore"):
        zp = np.sqrt(2.0 * m / (r - 2.0 * m))
    zp = np.where((m == 0.0), 0.0, zp)
    return np.where((r - 2.0 * m <= 0.0) & (m > 0.0), np.inf, zp)


def embed(p: HawkingProfile, z_min: float = 0.0) -> GraphProfile:
    """Graph height ``z(r) = z_min + int_{r_min}^r sqrt(2m / (s - 2m)) ds``.

    The integrand blows up like ``(s - r_min)^(-1/2)`` when ``m(r_min) > 0``;
    integrating in ``u = sqrt(s - r_min)`` removes the singularity, and
    Gauss-Legendre nodes never touch the endpoint.
    """
    _require_admissible(p)
    r0 = p.r_min
    u = np.sqrt(p.r - r0)
    lo, hi = u[:-1], u[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_X[None, :]
    s = r0 + nodes**2
    m = np.asarray(p(s), dtype=float)
    gap = s - 2.0 * m
    if np.any(gap <= 0.0):
        raise DomainError("inadmissible Hawking profile: m >= r/2 inside the grid")
    integrand = 2.0 * nodes * np.sqrt(np.maximum(2.0 * m, 0.0) / gap)
    pieces = (integrand * _GL_W[None, :]).sum(axis=1) * half
    z = z_min + np.concatenate([[0.0], np.cumsum(pieces)])
    return GraphProfile(p.r.copy(), z, _slope(p.m, p.r))


def hawking_from_graph(g: GraphProfile) -> HawkingProfile:
    if np.any(g.zp < 0):
        raise DomainError("graph slope must be nonnegative")
    zp = g.zp
    with np.errstate(invalid="ignore"):
        frac = np.where(np.isinf(zp), 1.0, zp**2 / (1.0 + zp**2))
    return HawkingProfile(g.r.copy(), g.r / 2.0 * frac)


# ---------------------------------------------------------------- curvature


@dataclass
class CurvatureSamples:
    r: np.ndarray
    R: np.ndarray
    axis_flag: bool = False


def scalar_curvature(p: HawkingProfile) -> CurvatureSamples:
    """``R = 4 m'(r) / r^2`` with second-order finite differences."""
    if p.r.size < 3:
        raise DomainError("need at least three grid points")
    dm = np.gradient(p.m, p.r, edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = 4.0 * dm / p.r**2
    axis = bool(np.any(p.r == 0.0))
    R = np.where(p.r == 0.0, np.nan, R)
    return CurvatureSamples(p.r.copy(), R, axis)


def scalar_curvature_graph(g: GraphProfile) -> CurvatureSamples:
    """Graph-side formula ``2/(1+z'^2) (z'/r) (z'/r + 2 z''/(1+z'^2))``."""
    zp = g.zp
    finite = np.isfinite(zp)
    zpp = np.full_like(zp, np.nan)
    zpp[finite] = np.gradient(zp[finite], g.r[finite], edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = 1.0 + zp**2
        R = 2.0 / q * (zp / g.r) * (zp / g.r + 2.0 * zpp / q)
    R = np.where(finite & (g.r > 0), R, np.nan)
    return CurvatureSamples(g.r.copy(), R, bool(np.any(g.r == 0.0)))


# ---------------------------------------------------------------- model profiles


def schwarzschild(m0: float, r_max: float, n: int = DEFAULT_GRID) -> tuple[HawkingProfile, GraphProfile]:
    if m0 <= 0:
        raise DomainError("Schwarzschild mass must be positive")
    if r_max <= 2.0 * m0:
        raise DomainError("r_max must exceed the horizon radius 2*m0")
    r = np.linspace(2.0 * m0, r_max, n)
    prof = HawkingProfile(r, np.full(n, float(m0)), func=lambda x: np.full_like(np.asarray(x, float), m0))
    z = np.sqrt(8.0 * m0 * np.maximum(r - 2.0 * m0, 0.0))
    return prof, GraphProfile(r, z, _slope(prof.m, r))


def flat_profile(r_max: float, n: int = DEFAULT_GRID, r_min: float = 0.0) -> HawkingProfile:
    """Zero Hawking mass (Euclidean space); only ``r_min = 0`` is admissible."""
    r = np.linspace(r_min, r_max, n)
    return HawkingProfile(r, np.zeros(n), func=lambda x: np.zeros_like(np.asarray(x, float)))


def flat_graph(r_min: float, r_max: float, n: int = DEFAULT_GRID) -> GraphProfile:
    r = np.linspace(r_min, r_max, n)
    return GraphProfile(r, np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class StripePieces:
    """Closed-form pieces of a stripe profile, exposed for inspection."""

    K: float
    a: float
    b: float
    r_min: float
    m_cap: float
    taper: float
    inner: Callable

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        mb = self.b**3 * self.K / 2.0
        out = np.where(x < self.a, self.inner(np.clip(x, self.r_min, self.a)), x**3 * self.K / 2.0)
        tail = self.m_cap - (self.m_cap - mb) * np.exp(-(x - self.b) / self.taper)
        return np.where(x > self.b, tail, out)


def stripe_profile(
    K: float,
    a: float,
    b: float,
    r_min: float,
    r_max: float,
    alpha: float,
    n: int = DEFAULT_GRID,
) -> HawkingProfile:
    """Admissible profile of constant sectional curvature ``K`` on ``(a, b)``.

    Inside ``[r_min, a]`` a cubic Hermite segment joins ``m(r_min) = r_min/2``
    to the stripe with matching slope; beyond ``b`` the mass relaxes
    exponentially (C^1 at ``b``) to a value below both ``alpha`` and ``b/2``.
    """
    if not (r_min <= a < b <= r_max):
        raise DomainError("need r_min <= a < b <= r_max")
    if K <= 0:
        raise DomainError("stripe curvature must be positive")
    if b * b * K >= 1.0:
        raise DomainError("stripe violates admissibility: b must be below K^-1/2")
    mb = b**3 * K / 2.0
    if mb >= alpha:
        raise DomainError("mass cap too small for this stripe")
    ma = a**3 * K / 2.0
    if ma < r_min / 2.0:
        raise DomainError("stripe mass at a is below m(r_min) = r_min/2")
    s1 = 1.5 * a * a * K
    if a > r_min:
        delta = (ma - r_min / 2.0) / (a - r_min)
        if delta == 0.0 or (s1 / delta) ** 2 > 9.0:
            raise DomainError("no monotone C^1 inner join; move a away from r_min")
        inner = CubicHermiteSpline([r_min, a], [r_min / 2.0, ma], [0.0, s1])
    else:
        inner = lambda x: np.full_like(np.asarray(x, float), ma)  # noqa: E731
    m_cap = min(0.5 * (mb + alpha), 0.5 * (mb + b / 2.0))
    taper = (m_cap - mb) / (1.5 * b * b * K)
    f = StripePieces(K, a, b, r_min, m_cap, taper, inner)
    r = np.linspace(r_min, r_max, n)
    prof = HawkingProfile(r, f(r), stripes=[(a, b, K)], func=f)
    _require_admissible(prof)
    return prof


@dataclass(frozen=True)
class AdmMass:
    value: float
    lower_bound: bool
    exact: bool


def adm_mass(p: HawkingProfile, tail_fraction: float = 0.01) -> AdmMass:
    _require_admissible(p)
    k = max(1, int(len(p.m) * tail_fraction))
    tail = p.m[-k - 1 :]
    exact = bool(np.ptp(tail) <= 1e-12 * max(1.0, abs(tail[-1])))
    return AdmMass(float(p.m[-1]), True, exact)


# ---------------------------------------------------------------- distances

STENCIL_RADIUS = 5
DIST_TARGET = 0.01


def _stencil(radius: int) -> list[tuple[int, int]]:
    out = []
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            if (di, dj) != (0, 0) and math.gcd(abs(di), abs(dj)) == 1:
                out.append((di, dj))
    return out


def _split_grid(lo: float, hi: float, at: float, n: int) -> np.ndarray:
    """Grid on [lo, hi] with ``at`` as a node and roughly uniform spacing."""
    if hi - lo <= 0:
        return np.array([lo])
    k = int(round((n - 1) * (at - lo) / (hi - lo)))
    left = np.linspace(lo, at, k + 1) if k > 0 else np.array([at])
    right = np.linspace(at, hi, n - k) if n - k > 1 else np.array([])
    return np.concatenate([left, right[1:]]) if right.size else left


def rotsym_distance_field(g: GraphProfile, r_src: float, r_hi: float, n_r: int = 120, n_phi: int | None = None):
    """Dijkstra distances from ``(r_src, phi=0)`` over an ``(r, phi)`` grid on
    ``[r_min, r_hi] x [0, pi]`` for ``ds^2 = (1 + z'^2) dr^2 + r^2 dphi^2``.

    By default the angular spacing at ``r_hi`` matches the radial spacing, so
    the stencil directions are not squeezed towards the radial axis.
    """
    r_lo = float(g.r[0])
    rs = _split_grid(r_lo, r_hi, r_src, n_r)
    if n_phi is None:
        dr = (r_hi - r_lo) / max(n_r - 1, 1)
        n_phi = int(np.clip(math.ceil(math.pi * r_hi / dr) + 1 if dr > 0 else n_r, n_r, 8 * n_r))
    ph = np.linspace(0.0, math.pi, n_phi)
    f2 = g.zp_sq
    nr, nph = rs.size, ph.size
    idx = np.arange(nr * nph).reshape(nr, nph)
    rows, cols, w = [], [], []
    gx = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
    for di, dj in _stencil(STENCIL_RADIUS):
        i0 = slice(max(0, -di), nr - max(0, di))
        j0 = slice(max(0, -dj), nph - max(0, dj))
        i1 = slice(max(0, di), nr - max(0, -di) if di < 0 else nr)
        j1 = slice(max(0, dj), nph - max(0, -dj) if dj < 0 else nph)
        a = idx[i0, j0]
        if a.size == 0:
            continue
        b = idx[i1, j1]
        r_a = rs[i0][:, None]
        r_b = rs[i1][:, None]
        dphi = ph[j1][None, :] - ph[j0][None, :]
        dr = r_b - r_a
        length = 0.0
        for t in gx:  # two-point Gauss along the straight segment in (r, phi)
            rm = r_a + t * dr
            fm = np.interp(rm, g.r, f2)
            length = length + 0.5 * np.sqrt((1.0 + fm) * dr**2 + rm**2 * dphi**2)
        length = np.broadcast_to(length, a.shape)
        rows.append(a.ravel())
        cols.append(b.ravel())
        w.append(length.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    w = np.concatenate(w)
    # zero-length edges (on the axis) must survive as explicit tiny weights
    w = np.maximum(w, 1e-300)
    graph = coo_matrix((w, (rows, cols)), shape=(nr * nph,) * 2).tocsr()
    src = int(np.searchsorted(rs, r_src))
    src = min(src, nr - 1)
    dist = dijkstra(graph, directed=True, indices=idx[src, 0])
    return rs, ph, dist.reshape(nr, nph)


@dataclass(frozen=True)
class RotsymDistance:
    value: float
    coarse_value: float
    coarse_warning: bool


def _field_cached(g: GraphProfile, r_src: float, r_hi: float, n: int):
    cache = g.__dict__.setdefault("_fields", {})
    key = (float(r_src), float(r_hi), n)
    if key not in cache:
        rs, ph, d = rotsym_distance_field(g, r_src, r_hi, n)
        cache[key] = RegularGridInterpolator((rs, ph), d, bounds_error=False, fill_value=None)
    return cache[key]


def rotsym_distance(g: GraphProfile, a: tuple[float, float], b: tuple[float, float], n: int = 120) -> RotsymDistance:
    """Distance between ``(r1, phi)`` and ``(r2, 0)``; refines once and flags
    a coarse/fine disagreement above 1%."""
    (r1, phi), (r2, _) = a, b
    lo, hi = g.r[0], g.r[-1]
    for rr in (r1, r2):
        if not (lo - 1e-12 <= rr <= hi + 1e-12):
            raise DomainError("radius outside the profile grid")
    if not (0.0 <= phi <= math.pi + 1e-12):
        raise DomainError("angle must lie in [0, pi]")
    r_hi = max(r1, r2)
    vals = []
    for k in (n // 2, n):
        interp = _field_cached(g, r2, r_hi, k)
        vals.append(float(interp([[r1, phi]])[0]))
    coarse, fine = vals
    warn = abs(coarse - fine) > DIST_TARGET * max(fine, 1e-12)
    return RotsymDistance(fine, coarse, warn)


def rotsym_distances_from(g: GraphProfile, p, qs, n: int = 120) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    qs = np.atleast_2d(np.asarray(qs, dtype=float))
    r_hi = float(g.r[-1])
    interp = _field_cached(g, float(p[0]), r_hi, n)
    cosang = np.clip(qs[:, 1:] @ p[1:], -1.0, 1.0)
    pts = np.column_stack([qs[:, 0], np.arccos(cosang)])
    return np.asarray(interp(pts), dtype=float)


# ---------------------------------------------------------------- serialization


def write_hawking_csv(p: HawkingProfile, path) -> None:
    with open(path, "w") as fh:
        for a, b, K in p.stripes:
            fh.write(f"#stripe {a!r} {b!r} {K!r}\n")
        fh.write("r,m\n")
        for r, m in zip(p.r, p.m):
            fh.write(f"{float(r)!r},{float(m)!r}\n")


def read_hawking_csv(path) -> HawkingProfile:
    stripes, r, m = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#stripe"):
                stripes.append(tuple(float(v) for v in line.split()[1:4]))
            elif line and not line.startswith(("#", "r,")):
                a, b = line.split(",")
                r.append(float(a))
                m.append(float(b))
    return HawkingProfile(np.array(r), np.array(m), stripes)


def write_graph_csv(g: GraphProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write("r,z,zp\n")
        for r, z, zp in zip(g.r, g.z, g.zp):
            fh.write(f"{float(r)!r},{float(z)!r},{float(zp)!r}\n")


def read_graph_csv(path) -> GraphProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GraphProfile(data[:, 0], data[:, 1], data[:, 2])


def random_admissible_profile(seed: int, r_max: float = 5.0, n: int = DEFAULT_GRID) -> HawkingProfile:
    """Admissible profile with a random smooth slope ``m' in (0, 0.45)``.

    ``m(r) - r/2 = int (m' - 1/2) < 0`` beyond ``r_min``, so admissibility
    holds by construction.
    """
    rng = np.random.default_rng(seed)
    r_min = float(rng.uniform(0.0, 1.0))
    r = np.linspace(r_min, r_max, n)
    amp = rng.normal(0.0, 1.5, 4)
    freq = rng.uniform(0.3, 3.0, 4)
    phase = rng.uniform(0.0, 2.0 * math.pi, 4)

    def slope(x):
        x = np.asarray(x, dtype=float)
        w = np.sum(amp[:, None] * np.sin(freq[:, None] * x.ravel()[None, :] + phase[:, None]), axis=0)
        return (0.45 / (1.0 + np.exp(-w))).reshape(x.shape)

    # fine cumulative quadrature so the callable and the grid agree
    fine = np.linspace(r_min, r_max, 8 * (n - 1) + 1)
    s = slope(fine)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(fine))])
    mass = PchipInterpolator(fine, r_min / 2.0 + cum)
    return HawkingProfile(r, mass(r), func=lambda x: mass(np.asarray(x, dtype=float)))
