"""Independent reference computations used by the tests.

Nothing here calls into the package's algorithms; each oracle recomputes a
quantity from its definition by a different route.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np
from scipy import integrate


def gh_bruteforce(dX: np.ndarray, dY: np.ndarray) -> float:
    """Half the minimal distortion over every relation R in X x Y whose
    projections are onto (all 2^(|X||Y|) subsets, so keep spaces tiny)."""
    nx, ny = len(dX), len(dY)
    pairs = list(itertools.product(range(nx), range(ny)))
    best = math.inf
    for mask in range(1, 1 << len(pairs)):
        rel = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if len({a for a, _ in rel}) < nx or len({b for _, b in rel}) < ny:
            continue
        dis = max(abs(dX[a, c] - dY[b, d]) for (a, b) in rel for (c, d) in rel)
        best = min(best, dis)
    return 0.5 * best


def sphere_dist(p, q, rho=1.0) -> float:
    c = float(np.dot(p, q)) / rho**2
    return rho * math.acos(max(-1.0, min(1.0, c)))


def dijkstra_sewn(points, mouths, tunnels, h, rho=1.0) -> np.ndarray:
    """All-pairs sewn distances among ``points`` by heap Dijkstra on the
    complete graph over points and mouths plus tunnel edges of length h."""
    nodes = list(points) + list(mouths)
    n = len(nodes)
    w = [[sphere_dist(nodes[a], nodes[b], rho) for b in range(n)] for a in range(n)]
    off = len(points)
    for a, b in tunnels:
        u, v = off + a, off + b
        w[u][v] = w[v][u] = min(w[u][v], h)
    out = np.zeros((len(points), len(points)))
    for s in range(len(points)):
        dist = [math.inf] * n
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v in range(n):
                nd = d + w[u][v]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        out[s] = dist[: len(points)]
    return out


def sphere_ball_volume_quad(r: float, rho: float = 1.0) -> float:
    r = min(r, math.pi * rho)
    return integrate.quad(lambda t: 4.0 * math.pi * rho**2 * math.sin(t / rho) ** 2, 0.0, r)[0]


def equator_slab_quad(r: float) -> float:
    return integrate.quad(lambda t: 4.0 * math.pi * math.cos(t) ** 2, -r, r)[0]


def great_circle_tube_quad(r: float) -> float:
    # Fermi coordinates: circle of length 2 pi cos t, normal disk circle 2 pi sin t
    return integrate.quad(lambda t: (2.0 * math.pi * math.cos(t)) * (2.0 * math.pi * math.sin(t)), 0.0, r)[0]


def graph_height_quad(m, r_min: float, r: float) -> float:
    """``int sqrt(2 m / (s - 2 m)) ds`` by adaptive quadrature (the endpoint
    singularity is integrable and quad copes with it)."""
    f = lambda s: math.sqrt(max(2.0 * m(s), 0.0) / (s - 2.0 * m(s)))  # noqa: E731
    return integrate.quad(f, r_min, r, limit=200)[0]


def radial_length_quad(zp_sq, r1: float, r2: float) -> float:
    return integrate.quad(lambda s: math.sqrt(1.0 + zp_sq(s)), r1, r2, limit=200)[0]


def greedy_circle_count(n_samples: int, r: float, rho: float = 1.0) -> int:
    """Greedy 2r-packing of the great circle sampled at angles 2 pi k / n,
    computed with plain angle arithmetic."""
    chosen = []
    for k in range(n_samples):
        t = 2.0 * math.pi * k / n_samples
        ok = True
        for c in chosen:
            d = abs(t - c) % (2.0 * math.pi)
            d = min(d, 2.0 * math.pi - d) * rho
            if d < 2.0 * r * (1 - 1e-12):
                ok = False
                break
        if ok:
            chosen.append(t)
    return len(chosen)
