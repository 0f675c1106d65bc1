import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dijkstra_sewn, greedy_circle_count, sphere_dist
from scrunch.core_metric import (
    DomainError,
    FiniteMetric,
    ModelSpace,
    PointCloud,
    gh_exact_small,
    model_ball_volume,
    pairwise_distances,
    sample_sphere,
)
from scrunch.pulled import EquatorialSphere, GeodesicCircle, PulledSpace, RoundBall
from scrunch.sewing import (
    RegionTooSmall,
    SewnSpace,
    TunnelModel,
    build_sewn_space,
    check_plan,
    defect_sample,
    diameter_bound,
    edited_region_diameter,
    plan_sewing,
    read_sewing_plan,
    sample_edited_region,
    sample_tube,
    scrunch_map_defect,
    sewn_distance,
    sewn_volume,
    write_hub_matrix,
    write_sewing_plan,
)

S3 = ModelSpace.sphere(1.0)
CIRCLE = GeodesicCircle(S3)
E0 = np.array([1.0, 0.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def circle_quarter():
    return build_sewn_space(S3, CIRCLE, math.pi / 4, 0.01)


def test_circle_packing_count(circle_quarter):
    p = circle_quarter.plan
    n_samples = len(CIRCLE.sample(int(math.ceil(CIRCLE.measure() / p.mesh))))
    assert p.n_bar == greedy_circle_count(n_samples, math.pi / 4) == 4
    assert p.n == 12 and len(p.tunnels()) == 6
    assert p.delta == 0.01


def test_equator_plan_invariants():
    p = plan_sewing(S3, EquatorialSphere(S3), 0.5, 0.01)
    rep = check_plan(p)
    assert rep.maximal and rep.mouths_disjoint and rep.mouths_inside and rep.n_even
    assert rep.min_center_separation >= -1e-9
    assert p.n == p.n_bar * (p.n_bar - 1)


def test_mouths_sit_on_inner_sphere(circle_quarter):
    p = circle_quarter.plan
    for k in range(p.n_bar):
        d = [sphere_dist(p.centers[k], m) for m in p.mouths_of(k)]
        assert np.allclose(d, p.r - p.delta, atol=1e-12)
    with pytest.raises(DomainError):
        p.mouths(1, 1)


def test_delta_shrinks_when_mouths_crowd():
    p = plan_sewing(S3, EquatorialSphere(S3), 0.1, 0.05)
    assert p.delta < 0.05 and p.delta_requested == 0.05
    assert p.mouth_separation() >= 2 * p.delta * (1 - 1e-9)


def test_plan_errors():
    with pytest.raises(RegionTooSmall, match="region too small"):
        plan_sewing(S3, RoundBall(S3, E0, 0.1), 0.5, 0.01)
    with pytest.raises(DomainError):
        plan_sewing(S3, CIRCLE, 0.2, 0.2)
    with pytest.raises(DomainError):
        plan_sewing(ModelSpace.euclid(), CIRCLE, 0.2, 0.02)


def test_tunnel_ends_are_h_apart(circle_quarter):
    N = circle_quarter
    p = N.plan
    for a, b in p.tunnels():
        assert sewn_distance(N, p.mouths(a, b), p.mouths(b, a)) <= N.h + 1e-15


def test_antipodal_points_get_shortcut(circle_quarter):
    N = circle_quarter
    x = np.array([0.0, 1.0, 0.0, 0.0])
    d = sewn_distance(N, x, -x)
    assert d < math.pi
    assert d <= 2 * (math.pi / 4) + N.h + 1e-12


def _mouth_pairs(plan):
    k, j = plan.mouth_index()
    pos = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(k, j))}
    return [(pos[(a, b)], pos[(b, a)]) for a, b in plan.tunnels()]


def test_hub_matches_dijkstra_oracle(circle_quarter):
    N = circle_quarter
    x = sample_sphere(1.0, 12, 4).coords
    x = x[N.valid_mask(x)]
    want = dijkstra_sewn(x, N.plan.all_mouths(), _mouth_pairs(N.plan), N.h)
    assert np.allclose(N.distance_matrix(x), want, atol=1e-12)


def test_restricted_mode_is_an_upper_bound():
    exact = build_sewn_space(S3, CIRCLE, 0.3, 0.03)
    assert exact.mode == "exact"
    loose = SewnSpace(exact.plan, exact.tunnel, mode="restricted")
    x = np.vstack([sample_tube(CIRCLE, 0.3, 40, 2), sample_sphere(1.0, 20, 3).coords])
    x = x[exact.valid_mask(x)]
    assert np.all(loose.distance_matrix(x) >= exact.distance_matrix(x) - 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_adding_tunnels_never_increases_distance(seed):
    base = build_sewn_space(S3, CIRCLE, 0.3, 0.03)
    rng = np.random.default_rng(seed)
    t = len(base.plan.tunnels())
    fewer = rng.random(t) < 0.5
    more = fewer | (rng.random(t) < 0.5)
    x = np.vstack([sample_tube(CIRCLE, 0.3, 20, seed), sample_sphere(1.0, 10, seed).coords])
    x = x[base.valid_mask(x)]
    d_few = SewnSpace(base.plan, base.tunnel, fewer).distance_matrix(x)
    d_more = SewnSpace(base.plan, base.tunnel, more).distance_matrix(x)
    d_none = SewnSpace(base.plan, base.tunnel, np.zeros(t, bool)).distance_matrix(x)
    assert np.all(d_more <= d_few + 1e-15)
    assert np.all(d_few <= d_none + 1e-15)


@pytest.mark.parametrize("mode", ["exact", "restricted"])
def test_sewn_distance_is_a_metric(mode):
    N0 = build_sewn_space(S3, CIRCLE, 0.3, 0.03)
    N = SewnSpace(N0.plan, N0.tunnel, mode=mode)
    x = np.vstack([sample_tube(CIRCLE, 0.3, 40, 7), sample_sphere(1.0, 20, 8).coords])
    x = x[N.valid_mask(x)]
    D = N.distance_matrix(x)
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0)
    tri = D[:, None, :] - (D[:, :, None] + D[None, :, :])
    assert tri.max() <= 1e-9


def test_far_points_keep_base_distance(circle_quarter):
    x = E0
    y = np.array([math.cos(0.1), 0.0, 0.0, math.sin(0.1)])
    assert sewn_distance(circle_quarter, x, y) == pytest.approx(0.1, abs=1e-15)


def test_removed_ball_rejected(circle_quarter):
    p = circle_quarter.plan
    m = p.mouths(0, 1)
    inside = np.cos(p.delta / 4) * m + np.sin(p.delta / 4) * np.array([0.0, 0.0, 0.0, 1.0])
    inside /= np.linalg.norm(inside)
    assert circle_quarter.removed_mask(inside[None])[0]
    assert not circle_quarter.removed_mask(m[None])[0]
    with pytest.raises(DomainError):
        sewn_distance(circle_quarter, inside, E0)


@pytest.mark.parametrize("region", [CIRCLE, EquatorialSphere(S3)], ids=["circle", "equator"])
def test_edited_diameter_certificate(region):
    N = build_sewn_space(S3, region, 0.2, 0.02)
    cert = edited_region_diameter(N, sample_edited_region(N, 200, 0))
    assert cert.bound == diameter_bound(0.2, N.h) == pytest.approx(16 * 0.2 + 3 * N.h)
    assert N.h <= cert.diameter <= cert.bound
    assert cert.ok and cert.slack > 0


def test_edited_diameter_rejects_outside_points(circle_quarter):
    with pytest.raises(DomainError):
        edited_region_diameter(circle_quarter, PointCloud.from_coords(E0[None]))


def test_volume_identities(circle_quarter):
    N = circle_quarter
    assert sewn_volume(N) == S3.total_volume
    eps = 0.3
    ball = model_ball_volume(S3, N.tunnel.delta / 2)
    v = sewn_volume(N, tunnel_vol=(1 + eps) * 2 * ball)
    assert v == pytest.approx(S3.total_volume + N.plan.n / 2 * eps * 2 * ball, rel=1e-14)
    assert v <= (1 + eps) * S3.total_volume
    assert sewn_volume(base_volume=5.0, n=0, space=S3) == 5.0


def test_tunnel_model_defaults():
    t = TunnelModel.default(S3, 0.02)
    assert t.h == pytest.approx(0.06) and t.delta == 0.02


def test_defect_and_small_gh():
    N = build_sewn_space(S3, CIRCLE, 0.2, 0.02)
    Y = PulledSpace(S3, CIRCLE)
    cloud = defect_sample(CIRCLE, 60, 60, 0.4, 1)
    rep = scrunch_map_defect(N, Y, cloud)
    assert rep.gh_bound == 2 * max(rep.eps_dis, rep.eps_cov)
    eps_dis, eps_cov, gh = rep
    assert gh == rep.gh_bound
    # GH between a 6-point sample and its image is at most half the distortion
    pts = cloud.coords[~N.removed_mask(cloud.coords)]
    rng = np.random.default_rng(0)
    for _ in range(5):
        sub = pts[rng.choice(len(pts), 6, replace=False)]
        dN = N.distance_matrix(sub)
        dk = Y.dist_to_set(sub)
        gone = dk < N.plan.r
        fk = np.where(gone, 0.0, dk)
        dY = np.minimum(pairwise_distances(S3, sub), fk[:, None] + fk[None, :])
        dY[gone[:, None] & gone[None, :]] = 0.0
        assert gh_exact_small(FiniteMetric(dN), FiniteMetric(dY)) <= rep.gh_bound + 1e-12


def test_defect_requires_matching_region():
    N = build_sewn_space(S3, CIRCLE, 0.3, 0.03)
    with pytest.raises(DomainError):
        scrunch_map_defect(N, PulledSpace(S3, EquatorialSphere(S3)), defect_sample(CIRCLE, 10, 10))


def test_plan_roundtrip(tmp_path, circle_quarter):
    p = circle_quarter.plan
    write_sewing_plan(p, tmp_path / "plan.csv", circle_quarter.h)
    back = read_sewing_plan(tmp_path / "plan.csv", CIRCLE)
    assert np.array_equal(back.centers, p.centers) and back.delta == p.delta
    assert np.allclose(back.all_mouths(), p.all_mouths(), atol=1e-15)
    write_hub_matrix(circle_quarter, tmp_path / "hub.csv")
    rows = (tmp_path / "hub.csv").read_text().splitlines()
    assert rows[0] == "12" and len(rows) == 13
