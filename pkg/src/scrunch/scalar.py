"""Volume-based curvature diagnostics.

``Q(r) = 30 (V_E(r) - V(r)) / (r^2 V_E(r))`` tends to the scalar curvature at
smooth points and diverges at a pulled point; ``theta(r) = V(r) / V_E(r)``
exceeds 1 where a point carries more volume than Euclidean space allows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_metric import DomainError, ModelSpace, ball_deficit_mc, ball_volume_mc, euclid_ball_volume

FINITE_SLOPE = -0.5
BUDGET_FRACTION = 0.1


class BudgetError(RuntimeError):
    """The Monte Carlo error cannot meet the requested budget."""

    def __init__(self, msg: str, required_M: int):
        super().__init__(f"{msg}; need M >= {required_M}")
        self.required_M = required_M


@dataclass
class WScalFit:
    kind: str  # "finite" or "divergent"
    limit: float = math.nan
    r2_coefficient: float = math.nan
    exponent: float = math.nan
    coefficient: float = math.nan
    residual: float = math.nan


@dataclass
class WScalProfile:
    r: np.ndarray
    Q: np.ndarray
    sigma: np.ndarray
    fit: WScalFit = field(default_factory=lambda: WScalFit("finite"))

    def lines(self) -> list[str]:
        out = ["r,Q,sigma"]
        out += [f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(self.r, self.Q, self.sigma)]
        f = self.fit
        out.append(f"# fit = {f.kind}")
        if f.kind == "finite":
            out.append(f"# limit = {f.limit!r}")
            out.append(f"# r2_coefficient = {f.r2_coefficient!r}")
        else:
            out.append(f"# exponent = {f.exponent!r}")
            out.append(f"# coefficient = {f.coefficient!r}")
        out.append(f"# residual = {f.residual!r}")
        return out


def _check_radii(r_list) -> np.ndarray:
    r = np.asarray(r_list, dtype=float)
    if r.size < 2:
        raise DomainError("need at least two radii")
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise DomainError("radii must be positive and strictly decreasing")
    return r


def _rotsym_region(space: ModelSpace, p, r: float):
    g = space.graph
    return max(float(g.r[0]), float(p[0]) - r), min(float(g.r[-1]), float(p[0]) + r)


def _deficit(space, p, r: float, M: int, seed: int) -> tuple[float, float]:
    """``V_E(r) - V(B(p, r))`` and its standard error."""
    if isinstance(space, ModelSpace) and space.kind in ("sphere3", "euclid3"):
        return ball_deficit_mc(space, p, r, M, seed)
    region = _rotsym_region(space, p, r) if isinstance(space, ModelSpace) else None
    v, se = ball_volume_mc(space, p, r, M, seed, region=region)
    return euclid_ball_volume(r) - v, se


def _fit(r: np.ndarray, Q: np.ndarray, sig: np.ndarray) -> WScalFit:
    if np.all(Q > 0) or np.all(Q < 0):
        A = np.column_stack([np.log(r), np.ones_like(r)])
        (s, logc), *_ = np.linalg.lstsq(A, np.log(np.abs(Q)), rcond=None)
        if s < FINITE_SLOPE:
            res = float(np.max(np.abs(A @ np.array([s, logc]) - np.log(np.abs(Q)))))
            c = math.copysign(math.exp(logc), Q[0])
            return WScalFit("divergent", exponent=float(s), coefficient=c, residual=res)
    w = 1.0 / np.maximum(sig, 1e-12 * max(1.0, float(np.abs(Q).max())))
    A = np.column_stack([np.ones_like(r), r * r])
    coef, *_ = np.linalg.lstsq(A * w[:, None], Q * w, rcond=None)
    res = float(np.max(np.abs(A @ coef - Q)))
    return WScalFit("finite", limit=float(coef[0]), r2_coefficient=float(coef[1]), residual=res)


def wscal_estimate(space, p, r_list, M: int = 1_000_000, seed: int = 0) -> WScalProfile:
    """Quotients ``Q(r_i)`` and a finite-limit or power-law fit.

    Raises :class:`BudgetError` when a deficit is clearly nonzero but its
    error exceeds 10% of it.
    """
    r = _check_radii(r_list)
    if M < 1:
        raise DomainError("need M >= 1")
    Q = np.empty_like(r)
    sig = np.empty_like(r)
    for i, t in enumerate(r):
        d, se = _deficit(space, p, float(t), M, seed + i)
        if abs(d) > 3.0 * se and se > BUDGET_FRACTION * abs(d):
            need = int(math.ceil(M * (se / (BUDGET_FRACTION * abs(d))) ** 2))
            raise BudgetError(f"MC error {se:.3g} exceeds 10% of deficit {abs(d):.3g} at r={t:g}", need)
        scale = 30.0 / (t * t * euclid_ball_volume(t))
        Q[i] = scale * d
        sig[i] = scale * se
    return WScalProfile(r, Q, sig, _fit(r, Q, sig))


def closed_form_quotient(volume: float, r: float) -> float:
    ve = euclid_ball_volume(r)
    return 30.0 * (ve - volume) / (r * r * ve)


@dataclass
class DensityProfile:
    r: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray

    @property
    def exceeds_one(self) -> bool:
        return bool(np.any(self.theta > 1.0 + 3.0 * self.sigma))


def bishop_gromov_density(space, p, r_list, M: int = 1_000_000, seed: int = 0) -> DensityProfile:
    """``theta(r) = Vol(B(p, r)) / ((4/3) pi r^3)`` with one-sigma errors."""
    r = np.asarray(r_list, dtype=float)
    if r.size == 0 or np.any(r <= 0):
        raise DomainError("radii must be positive")
    th = np.empty_like(r)
    sig = np.empty_like(r)
    for i, t in enumerate(r):
        d, se = _deficit(space, p, float(t), M, seed + i)
        ve = euclid_ball_volume(t)
        th[i] = (ve - d) / ve
        sig[i] = se / ve
    return DensityProfile(r, th, sig)


def write_wscal_csv(prof: WScalProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(prof.lines()) + "\n")


def write_density_csv(prof: DensityProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write("r,theta,sigma\n")
        for a, b, c in zip(prof.r, prof.theta, prof.sigma):
            fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
        fh.write(f"# exceeds_one = {prof.exceeds_one}\n")
