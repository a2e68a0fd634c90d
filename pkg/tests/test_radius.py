import math

import numpy as np
import pytest

from conftest import flat_metric, random_spd
from evth.errors import NonPositiveDefinite, ScaleTooLarge
from evth.grid import GridSpec
from evth.oracles import tt_direction
from evth.radius import (
    NEIGHBOURS,
    chart_radius,
    geodesic_distances,
    radius_report,
    volume_radius,
)

BALL = 4 * math.pi / 3
# worst-case plain-graph overestimates: 8-neighbour plane and 26-neighbour space
BOUND_2D = math.sqrt(1 + (math.sqrt(2) - 1) ** 2)
BOUND_3D = math.sqrt(1 + (math.sqrt(2) - 1) ** 2 + (math.sqrt(3) - math.sqrt(2)) ** 2)


def euclid_ratio(grid, d):
    e = grid.periodic_distance((0.0, 0.0, 0.0))
    far = e > 0.25 * grid.period
    return d[far] / e[far], far


def wave_metric(grid, amp, m=2):
    """``delta`` plus a transverse-traceless wave of amplitude ``amp``."""
    x = grid.mesh()[0] / grid.period
    e = tt_direction((1, 0, 0))
    g = flat_metric(grid)
    w = amp * np.sin(2 * math.pi * m * x)
    g[3] += w * e[1, 1]
    g[5] += w * e[2, 2]
    return g


class TestGeodesics:
    def test_neighbours(self):
        assert len(NEIGHBOURS) == 26 and not np.any(np.all(NEIGHBOURS == 0, axis=1))

    @pytest.mark.parametrize("any_angle", [False, True])
    def test_axis_neighbour_is_h(self, grid8, any_angle):
        d = geodesic_distances(flat_metric(grid8), (0, 0, 0), grid8, any_angle=any_angle)
        h = grid8.spacing
        assert d[0, 0, 0] == 0.0
        assert d[1, 0, 0] == h and d[0, 7, 0] == h and d[0, 0, 1] == h

    def test_plain_graph_metrication_bounds(self):
        grid = GridSpec(32)
        d = geodesic_distances(flat_metric(grid), (0, 0, 0), grid)
        ratio, far = euclid_ratio(grid, d)
        x = grid.mesh()
        in_plane = np.zeros(grid.shape, bool)
        for a in range(3):
            in_plane |= x[a] == 0.0
        assert ratio.min() >= 1.0 - 1e-12
        assert ratio.max() == pytest.approx(BOUND_3D, abs=2e-3)
        assert ratio.max() <= BOUND_3D + 1e-12
        assert (d[far & in_plane] / grid.periodic_distance((0, 0, 0))[far & in_plane]).max() <= BOUND_2D + 1e-12

    @pytest.mark.xfail(strict=True, reason="26-neighbour metrication error reaches 12.8% off-axis")
    def test_plain_graph_within_8_percent(self):
        grid = GridSpec(32)
        ratio, _ = euclid_ratio(grid, geodesic_distances(flat_metric(grid), (0, 0, 0), grid))
        assert ratio.max() <= 1.08

    def test_any_angle_flat_is_euclidean(self):
        grid = GridSpec(32)
        d = geodesic_distances(flat_metric(grid), (0, 0, 0), grid, any_angle=True)
        ratio, _ = euclid_ratio(grid, d)
        assert np.abs(ratio - 1).max() <= 1e-12

    @pytest.mark.parametrize("any_angle", [False, True])
    def test_scaled_metric_doubles(self, grid16, any_angle):
        d1 = geodesic_distances(flat_metric(grid16), (0.3, 0.1, 0.7), grid16, any_angle=any_angle)
        d4 = geodesic_distances(flat_metric(grid16, 4.0), (0.3, 0.1, 0.7), grid16, any_angle=any_angle)
        assert np.allclose(d4, 2 * d1, rtol=1e-15, atol=0)

    def test_triangle_inequality(self, rng):
        grid = GridSpec(8)
        g = random_spd(rng, grid.shape, 0.3)
        pts = [tuple(rng.integers(0, 8, 3) * grid.spacing) for _ in range(6)]
        dist = {p: geodesic_distances(g, p, grid) for p in pts}
        for a in pts:
            for b in pts:
                ib = grid.nearest_index(b)
                # d(a, x) <= d(a, b) + d(b, x) for every node x
                assert np.all(dist[a] <= dist[a][ib] + dist[b] + 1e-12)

    def test_limit(self, grid16):
        d = geodesic_distances(flat_metric(grid16), (0, 0, 0), grid16, limit=0.2)
        assert np.isinf(d).any() and np.nanmax(d[np.isfinite(d)]) <= 0.2

    def test_rejects_degenerate(self, grid8):
        with pytest.raises(NonPositiveDefinite):
            geodesic_distances(flat_metric(grid8, -1.0), (0, 0, 0), grid8)


class TestVolumeRadius:
    def test_flat_64_at_12h(self):
        grid = GridSpec(64)
        rep = volume_radius(flat_metric(grid), (0.5, 0.5, 0.5), grid, [12 * grid.spacing])
        assert rep.volume_radius_ratio == pytest.approx(BALL, rel=0.10)
        assert rep.unreliable_scales == []

    def test_scale_invariance(self, grid16):
        s = 3 * grid16.spacing
        a = volume_radius(flat_metric(grid16), (0.5, 0.5, 0.5), grid16, [s])
        b = volume_radius(flat_metric(grid16, 4.0), (0.5, 0.5, 0.5), grid16, [2 * s])
        assert b.volume_radius_ratio == pytest.approx(a.volume_radius_ratio, rel=1e-14)

    def test_unreliable_small_scales(self, grid16):
        h = grid16.spacing
        rep = volume_radius(flat_metric(grid16), (0.5, 0.5, 0.5), grid16, [1.5 * h, 3 * h])
        assert rep.unreliable_scales == [1.5 * h]
        assert rep.volume_radius_ratio == rep.ratios[1]
        only = volume_radius(flat_metric(grid16), (0.5, 0.5, 0.5), grid16, [1.5 * h])
        assert only.volume_radius_ratio == only.ratios[0]

    def test_scale_too_large(self, grid16):
        with pytest.raises(ScaleTooLarge):
            volume_radius(flat_metric(grid16), (0, 0, 0), grid16, [0.3])
        # a larger metric shrinks the coordinate reach of the same geodesic scale
        volume_radius(flat_metric(grid16, 4.0), (0, 0, 0), grid16, [0.3])

    def test_bad_arguments(self, grid8):
        with pytest.raises(ValueError):
            volume_radius(flat_metric(grid8), (0, 0, 0), grid8, [])
        with pytest.raises(ValueError):
            volume_radius(flat_metric(grid8), (0, 0, 0), grid8, [-0.1])
        with pytest.raises(ValueError):
            volume_radius(flat_metric(grid8), (0, 0, 0), grid8, [0.2], weighting="fuzzy")

    def test_smooth_weighting_converges(self):
        errs = []
        for n in (32, 64):
            grid = GridSpec(n)
            rep = volume_radius(flat_metric(grid), (0.5, 0.5, 0.5), grid, [0.1875], weighting="smooth")
            errs.append(abs(rep.ratios[0] - BALL))
        assert errs[1] < 0.02 * BALL
        assert errs[0] / errs[1] >= 1.5

    @pytest.mark.xfail(strict=True, reason="sharp lattice-point counts do not converge monotonically")
    def test_sharp_weighting_converges(self):
        errs = []
        for n in (32, 64):
            grid = GridSpec(n)
            rep = volume_radius(flat_metric(grid), (0.5, 0.5, 0.5), grid, [0.1875])
            errs.append(abs(rep.ratios[0] - BALL))
        assert errs[0] / errs[1] >= 1.5


class TestChartRadius:
    def test_flat_is_max(self, grid16):
        assert chart_radius(flat_metric(grid16), (0.5, 0.5, 0.5), grid16) == 0.25
        assert chart_radius(flat_metric(grid16), (0.5, 0.5, 0.5), grid16, l=1, max_r=0.2) == 0.2

    def test_spectrum_violation_is_zero(self, grid16):
        assert chart_radius(flat_metric(grid16, 3.0), (0.5, 0.5, 0.5), grid16) == 0.0

    def test_rejects_l(self, grid8):
        with pytest.raises(ValueError):
            chart_radius(flat_metric(grid8), (0, 0, 0), grid8, l=2)

    @pytest.mark.parametrize("l", [0, 1])
    def test_bisection_interior(self, l):
        grid = GridSpec(32)
        r = chart_radius(wave_metric(grid, 0.3), (0.5, 0.5, 0.5), grid, l=l)
        assert 2 * grid.spacing < r < 0.25

    @pytest.mark.parametrize("amp", [0.2, 0.3, 0.5])
    def test_scaling(self, amp):
        # lam^2 g in chart coordinates scaled by lam has the components of g on a lam-times larger box
        lam = 2.0
        grid = GridSpec(32)
        big = GridSpec(32, lam)
        g = wave_metric(grid, amp)
        r = chart_radius(g, (0.5, 0.5, 0.5), grid)
        r_lam = chart_radius(g, (lam * 0.5,) * 3, big)
        assert abs(r_lam - lam * r) <= grid.spacing

    def test_monotone_under_worsening(self):
        grid = GridSpec(32)
        x, y, z = grid.mesh()
        bump = np.exp(-((x - 0.65) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2) / 0.005)
        base = wave_metric(grid, 1.0) - flat_metric(grid)
        radii = []
        for t in (0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2):
            g = flat_metric(grid) + t * (0.4 * base + 0.9 * bump * flat_metric(grid))
            radii.append(chart_radius(g, (0.5, 0.5, 0.5), grid))
        assert all(b <= a for a, b in zip(radii, radii[1:]))
        assert radii[0] == 0.25 and radii[-1] < radii[1]


class TestReport:
    def test_flat(self, grid16):
        rep = radius_report(flat_metric(grid16), (0.5, 0.5, 0.5), grid16, [0.125, 0.1875])
        assert rep.chart_radius == 0.25
        assert rep.scales_tested == [0.125, 0.1875]
        assert rep.volume_radius_ratio == min(rep.ratios)
        assert rep.volume_radius_ratio >= 0 and rep.chart_radius >= 0
