import math

import numpy as np
import pytest

from wedgeheat.errors import NonConvergentError
from wedgeheat.geometry import AngularDomain, GridSpec, PolarPoint
from wedgeheat.kernel import (
    KernelConfig,
    heat_kernel,
    heat_kernel_array,
    image_kernel_oracle,
    kernel_mass,
    series_argument_cap,
)
from wedgeheat.special import bessel_i_scaled


def oracle_cloud(kappa0, n, seed, z_cap=500.0, cond=1e-9):
    """(t, x, y) samples spanning t, r in [1e-3, 10] on which the image
    oracle is float64-representable to well below 1e-8."""
    dom = AngularDomain(kappa0)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t = 10.0 ** rng.uniform(-3, 1)
        x = PolarPoint(10.0 ** rng.uniform(-3, 1), rng.uniform(0.03, 0.97) * kappa0)
        y = PolarPoint(10.0 ** rng.uniform(-3, 1), rng.uniform(0.03, 0.97) * kappa0)
        z = x.r * y.r / (2 * t)
        if z > z_cap:
            continue
        o = image_kernel_oracle(kappa0, t, x, y)
        if o <= 0.0:
            continue
        # conditioning: the series partial sums must admit a float64
        # representation of the value at the target accuracy
        log_sum = math.log(o) + math.log(kappa0 * t) + (x.r - y.r) ** 2 / (4 * t)
        peak = bessel_i_scaled(dom.critical_exponent, z) if z > 0 else 1.0
        if math.log(64 * 2.3e-16 * max(peak, 1e-300)) > math.log(cond) + log_sum:
            continue
        out.append((t, x, y, o))
    return out


class TestHeatKernelBasics:
    def test_halfplane_coincident_point(self, half_plane_cfg):
        x = PolarPoint(1.0, math.pi / 2)
        expected = (1.0 - math.exp(-1.0)) / (4.0 * math.pi)
        assert heat_kernel(half_plane_cfg, 1.0, x, x) == pytest.approx(expected, rel=1e-9)

    def test_boundary_rays_exact_zero(self, quadrant_cfg):
        kap = quadrant_cfg.domain.kappa0
        y = PolarPoint(1.0, kap / 2)
        assert heat_kernel(quadrant_cfg, 0.5, PolarPoint(1.0, 0.0), y) == 0.0
        assert heat_kernel(quadrant_cfg, 0.5, PolarPoint(1.0, kap), y) == 0.0
        assert heat_kernel(quadrant_cfg, 0.5, y, PolarPoint(1.0, 0.0)) == 0.0

    def test_vertex_zero(self, half_plane_cfg):
        y = PolarPoint(1.0, 0.7)
        assert heat_kernel(half_plane_cfg, 0.5, PolarPoint(0.0, 0.3), y) == 0.0

    def test_rejects_invalid_inputs(self, half_plane_cfg):
        x = PolarPoint(1.0, 1.0)
        with pytest.raises(ValueError):
            heat_kernel(half_plane_cfg, -1.0, x, x)
        with pytest.raises(ValueError):
            heat_kernel(half_plane_cfg, 1.0, PolarPoint(1.0, 4.0), x)

    def test_argument_cap_raises(self, half_plane_cfg):
        cap = series_argument_cap(half_plane_cfg.bessel_acc)
        x = PolarPoint(10.0, 1.5)
        t = 10.0 * 10.0 / (2.0 * cap) * 0.5  # z = 2 * cap
        with pytest.raises(NonConvergentError):
            heat_kernel(half_plane_cfg, t, x, x)


class TestImageOracle:
    def test_halfplane_cartesian_value(self):
        # x = y = (0, 1): K(0) - K(dist 2) at t = 1
        x = PolarPoint(1.0, math.pi / 2)
        expected = (1.0 - math.exp(-1.0)) / (4.0 * math.pi)
        assert image_kernel_oracle(math.pi, 1.0, x, x) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.050302, abs=1e-6)

    def test_boundary_cancellation(self):
        assert image_kernel_oracle(math.pi, 0.7, PolarPoint(1.0, 0.0), PolarPoint(1.0, 1.0)) == 0.0

    def test_gaussian_decay_in_time(self):
        x = PolarPoint(1.0, 1.0)
        y = PolarPoint(2.0, 2.0)
        vals = [image_kernel_oracle(math.pi, t, x, y) for t in (5.0, 20.0, 80.0, 320.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_rejects_other_angles(self):
        with pytest.raises(ValueError):
            image_kernel_oracle(1.0, 1.0, PolarPoint(1.0, 0.5), PolarPoint(1.0, 0.5))


class TestSeriesAgainstImages:
    @pytest.mark.parametrize("kappa0", [math.pi, math.pi / 2])
    def test_oracle_agreement(self, kappa0):
        cfg = KernelConfig(AngularDomain(kappa0), series_rel_tol=1e-12)
        worst = 0.0
        for t, x, y, o in oracle_cloud(kappa0, 120, seed=4):
            g = heat_kernel(cfg, t, x, y)
            worst = max(worst, abs(g - o) / o)
        assert worst <= 1e-8

    def test_quadrant_spot_value(self, quadrant_cfg):
        x = PolarPoint(0.8, 0.9)
        y = PolarPoint(1.1, 0.4)
        g = heat_kernel(quadrant_cfg, 0.5, x, y)
        o = image_kernel_oracle(math.pi / 2, 0.5, x, y)
        assert g == pytest.approx(o, rel=1e-8)


class TestKernelInvariants:
    def test_symmetry_sample_cloud(self, quadrant_cfg):
        rng = np.random.default_rng(11)
        kap = quadrant_cfg.domain.kappa0
        n = 500
        t = 10.0 ** rng.uniform(-1.5, 0.8, n)
        xr = 10.0 ** rng.uniform(-1.5, 0.8, n)
        yr = 10.0 ** rng.uniform(-1.5, 0.8, n)
        xt = rng.uniform(0.05, 0.95, n) * kap
        yt = rng.uniform(0.05, 0.95, n) * kap
        g1 = heat_kernel_array(quadrant_cfg, t, xr, xt, yr, yt)
        g2 = heat_kernel_array(quadrant_cfg, t, yr, yt, xr, xt)
        denom = np.maximum(g1, 1e-300)
        assert np.max(np.abs(g1 - g2) / denom) <= 1e-12

    def test_nonnegative(self, reflex):
        cfg = KernelConfig(reflex)
        rng = np.random.default_rng(3)
        n = 400
        t = 10.0 ** rng.uniform(-1.5, 0.8, n)
        xr = 10.0 ** rng.uniform(-2, 0.8, n)
        yr = 10.0 ** rng.uniform(-2, 0.8, n)
        xt = rng.uniform(0.0, 1.0, n) * reflex.kappa0
        yt = rng.uniform(0.0, 1.0, n) * reflex.kappa0
        g = heat_kernel_array(cfg, t, xr, xt, yr, yt)
        assert np.min(g) >= -1e-12

    @pytest.mark.parametrize("a", [0.125, 0.5, 2.0, 16.0])
    def test_dilation_invariance(self, reflex, a):
        cfg = KernelConfig(reflex)
        x = PolarPoint(0.9, 1.2)
        y = PolarPoint(1.4, 3.1)
        base = heat_kernel(cfg, 0.6, x, y)
        scaled = a * a * heat_kernel(
            cfg, a * a * 0.6, PolarPoint(a * x.r, x.theta), PolarPoint(a * y.r, y.theta)
        )
        assert scaled == pytest.approx(base, rel=1e-12)

    def test_vertex_decay_slope(self, quadrant_cfg):
        # log G against log r near the vertex has slope pi/kappa0
        r = np.logspace(-5, -2, 8)
        kap = quadrant_cfg.domain.kappa0
        logs = heat_kernel_array(
            quadrant_cfg, 1.0, r, np.full_like(r, kap / 2), 1.0, kap / 2, return_log=True
        )
        slope = np.polyfit(np.log(r), logs, 1)[0]
        assert slope == pytest.approx(quadrant_cfg.domain.critical_exponent, abs=0.02)


class TestKernelMass:
    def test_halfplane_erf_value(self, half_plane_cfg):
        m = kernel_mass(
            half_plane_cfg, 1.0, PolarPoint(1.0, math.pi / 2), GridSpec(1e-4, 12.0, 1024, 512, 3.0)
        )
        assert m == pytest.approx(math.erf(0.5), abs=1e-6)
        assert m == pytest.approx(0.5204998778, abs=1e-6)

    def test_small_time_mass_near_one(self, quadrant_cfg):
        t = 0.01
        x = PolarPoint(1.0, math.pi / 4)
        m = kernel_mass(quadrant_cfg, t, x, GridSpec(1e-4, 1.0 + 10.5 * math.sqrt(t), 1024, 256, 1.0))
        assert m == pytest.approx(1.0, abs=1e-3)
        assert m <= 1.0 + 1e-6

    def test_vertex_absorption(self, quadrant_cfg):
        grid = GridSpec(1e-5, 12.0, 512, 128, 3.0)
        masses = [
            kernel_mass(quadrant_cfg, 1.0, PolarPoint(r, math.pi / 4), grid)
            for r in (1.0, 0.1, 0.01)
        ]
        assert masses[0] > masses[1] > masses[2]
        assert masses[2] < 0.01

    def test_short_grid_rejected(self, half_plane_cfg):
        with pytest.raises(ValueError):
            kernel_mass(half_plane_cfg, 1.0, PolarPoint(1.0, 1.0), GridSpec(1e-4, 2.0, 64, 16, 3.0))
