import math

import numpy as np
import pytest

from wedgeheat.convolution import (
    CounterexampleSpec,
    NoiseMode,
    NoiseSpec,
    RadialProfile,
    SourceSpec,
    counterexample_integral,
    det_convolve,
    det_convolve_separable,
    lhs_weighted_moment,
    mc_sample_w,
    radial_semigroup,
    rhs_g_norm,
    variance_field,
)
from wedgeheat.geometry import AngularDomain, GridSpec, PolarPoint, graded_polar_grid
from wedgeheat.kernel import KernelConfig, heat_kernel_array
from wedgeheat.quadrature import TimeQuadSpec, panel_gauss_nodes
from wedgeheat.special import gaussian_abs_moment


@pytest.fixture(scope="module")
def slit_cfg(slit_plane):
    return KernelConfig(slit_plane)


@pytest.fixture(scope="module")
def vertex_noise(slit_plane):
    profile = RadialProfile(
        gamma=slit_plane.critical_exponent, taper_start=0.125, taper_end=0.25
    )
    return NoiseSpec.single(profile)


class TestRadialProfile:
    def test_power_and_taper(self):
        prof = RadialProfile(gamma=0.5, taper_start=0.5, taper_end=1.0)
        assert prof(0.25) == pytest.approx(0.5)
        assert prof(2.0) == 0.0
        assert 0.0 < prof(0.75) < math.sqrt(0.75)

    def test_derivative_matches_fd(self):
        prof = RadialProfile(gamma=1.5, taper_start=0.4, taper_end=0.9, c=2.0)
        r = np.linspace(0.05, 1.2, 200)
        h = 1e-6
        fd = (prof(r + h) - prof(r - h)) / (2 * h)
        assert np.max(np.abs(fd - prof.derivative(r))) < 1e-5


class TestRadialSemigroup:
    def test_zero_time_identity(self, slit_cfg):
        prof = RadialProfile(gamma=0.5, taper_start=0.25, taper_end=0.5)
        r = np.array([0.01, 0.1, 0.3])
        assert radial_semigroup(slit_cfg, 1, prof, 0.0, r) == pytest.approx(prof(r))

    def test_small_time_preserves_harmonic_core(self, slit_cfg):
        # r^{pi/kappa0} sin(pi th/kappa0) is caloric; before heat from the
        # taper region reaches the core the semigroup acts as identity
        prof = RadialProfile(
            gamma=slit_cfg.domain.critical_exponent, taper_start=0.25, taper_end=0.5
        )
        r = np.array([1e-3, 1e-2, 0.05])
        h = radial_semigroup(slit_cfg, 1, prof, 1e-4, r)
        assert h == pytest.approx(prof(r), rel=1e-8)

    def test_matches_full_kernel_quadrature(self, slit_cfg):
        # independent oracle: 2D quadrature of G against the separable field
        dom = slit_cfg.domain
        beta = dom.critical_exponent
        prof = RadialProfile(gamma=beta, taper_start=0.25, taper_end=0.5)
        tau = 0.07
        x = PolarPoint(0.4, 0.6 * dom.kappa0)
        grid = graded_polar_grid(dom, GridSpec(1e-4, 0.5 + 10.5 * math.sqrt(tau), 512, 256, 2.0))
        r_n, th_n, w_n = grid.mesh()
        g_vals = heat_kernel_array(slit_cfg, tau, x.r, x.theta, r_n, th_n)
        field = prof(r_n) * np.sin(beta * th_n)
        brute = float(np.dot(g_vals * field, w_n))
        fast = radial_semigroup(slit_cfg, 1, prof, tau, np.array([x.r]))[0] * math.sin(
            beta * x.theta
        )
        assert fast == pytest.approx(brute, rel=1e-4)


class TestDetConvolve:
    def test_zero_source(self, half_plane_cfg):
        grid = graded_polar_grid(half_plane_cfg.domain, GridSpec(1e-3, 4.0, 256, 64, 2.0))
        v = det_convolve(
            half_plane_cfg, lambda s, r, th: 0.0 * r, 0.5, PolarPoint(1.0, 1.0), grid
        )
        assert v == 0.0

    def test_coarse_grid_rejected(self, half_plane_cfg):
        grid = graded_polar_grid(half_plane_cfg.domain, GridSpec(1e-3, 4.0, 48, 16, 2.0))
        with pytest.raises(ValueError, match="too coarse"):
            det_convolve(
                half_plane_cfg, lambda s, r, th: 0.0 * r, 0.5, PolarPoint(1.0, 1.0), grid
            )

    def test_semigroup_identity_for_laplacian_source(self, half_plane_cfg):
        # f = Lap h  =>  v(t, .) = e^{t Lap} h - h
        cfg = half_plane_cfg
        w2 = 0.2**2
        cx, cy = 0.0, 1.2

        def h(r, th):
            y1, y2 = r * np.cos(th), r * np.sin(th)
            return np.exp(-((y1 - cx) ** 2 + (y2 - cy) ** 2) / w2)

        def lap_h(s, r, th):
            y1, y2 = r * np.cos(th), r * np.sin(th)
            q = (y1 - cx) ** 2 + (y2 - cy) ** 2
            return np.exp(-q / w2) * (4.0 * q / w2**2 - 4.0 / w2)

        t = 0.3
        x = PolarPoint(0.9, 1.3)
        grid = graded_polar_grid(cfg.domain, GridSpec(1e-3, 3.5, 220, 110, 2.0))
        v = det_convolve(cfg, lap_h, t, x, grid)
        r_n, th_n, w_n = grid.mesh()
        g_vals = heat_kernel_array(cfg, t, x.r, x.theta, r_n, th_n)
        semigroup = float(np.dot(g_vals * h(r_n, th_n), w_n))
        expected = semigroup - h(np.array([x.r]), np.array([x.theta]))[0]
        assert v == pytest.approx(expected, rel=1e-4)

    def test_linearity_in_source(self, half_plane_cfg):
        cfg = half_plane_cfg
        grid = graded_polar_grid(cfg.domain, GridSpec(1e-3, 3.0, 160, 80, 2.0))
        x = PolarPoint(0.8, 1.2)
        f1 = lambda s, r, th: np.exp(-(((r - 1.0) / 0.3) ** 2)) * np.sin(th)
        f2 = lambda s, r, th: r * np.exp(-r) * np.sin(th) ** 2
        v1 = det_convolve(cfg, f1, 0.4, x, grid)
        v2 = det_convolve(cfg, f2, 0.4, x, grid)
        v12 = det_convolve(cfg, lambda s, r, th: 2.0 * f1(s, r, th) - 0.5 * f2(s, r, th), 0.4, x, grid)
        assert v12 == pytest.approx(2.0 * v1 - 0.5 * v2, rel=1e-10)

    def test_separable_path_matches_general(self, slit_cfg):
        dom = slit_cfg.domain
        src = SourceSpec(RadialProfile(gamma=dom.critical_exponent, taper_start=0.3, taper_end=0.6))
        x = PolarPoint(0.5, 0.45 * dom.kappa0)
        t = 0.25
        grid = graded_polar_grid(dom, GridSpec(1e-3, 3.0, 256, 128, 2.0))
        fast = det_convolve(slit_cfg, src, t, x, grid)
        general = det_convolve(
            slit_cfg, src.as_callable(dom), t, x, grid, TimeQuadSpec(14, 5)
        )
        assert fast == pytest.approx(general, rel=2e-4)

    def test_grid_refinement_stability(self, slit_cfg):
        dom = slit_cfg.domain
        src = SourceSpec(RadialProfile(gamma=dom.critical_exponent, taper_start=0.3, taper_end=0.6))
        x = PolarPoint(0.5, 0.5 * dom.kappa0)
        coarse = det_convolve_separable(slit_cfg, src, 0.25, np.array([x.r]),
                                        TimeQuadSpec(20, 6))[0]
        fine = det_convolve_separable(slit_cfg, src, 0.25, np.array([x.r]),
                                      TimeQuadSpec(40, 8), n_quad=96)[0]
        assert fine == pytest.approx(coarse, rel=1e-4)


class TestVarianceField:
    def test_zero_noise(self, slit_cfg):
        grid = graded_polar_grid(slit_cfg.domain, GridSpec(1e-3, 2.0, 16, 8, 2.0))
        vf = variance_field(slit_cfg, NoiseSpec(modes=()), [0.5], grid)
        assert np.all(vf.values == 0.0)

    def test_two_identical_modes_double(self, slit_cfg, vertex_noise):
        grid = graded_polar_grid(slit_cfg.domain, GridSpec(1e-3, 2.0, 32, 16, 2.0))
        single = variance_field(slit_cfg, vertex_noise, [0.4], grid)
        double = variance_field(
            slit_cfg, NoiseSpec(modes=vertex_noise.modes * 2), [0.4], grid
        )
        assert double.values == pytest.approx(2.0 * single.values, rel=1e-13)

    def test_brute_force_oracle_at_probes(self, slit_cfg, vertex_noise):
        # independent route: Var(t,x) = int_0^t (e^{s Lap} g)(x)^2 ds with the
        # semigroup from full 2D kernel quadrature and plain Gauss panels
        dom = slit_cfg.domain
        beta = dom.critical_exponent
        mode = vertex_noise.modes[0]
        t = 0.4
        probes = [PolarPoint(0.08, 0.5 * dom.kappa0), PolarPoint(0.3, 0.3 * dom.kappa0)]
        grid = graded_polar_grid(dom, GridSpec(1e-5, 0.25 + 10.5 * math.sqrt(t), 384, 160, 3.0))
        r_n, th_n, w_n = grid.mesh()
        field = mode.profile(r_n) * np.sin(beta * th_n)
        # tau in [tau0, t] integrated on the grid (cells resolve sqrt(tau0));
        # the [0, tau0] layer contributes tau0 g(x)^2 + O(tau0^2) since the
        # semigroup tends to the identity there
        tau0 = 1e-3
        tau_nodes, tau_w = panel_gauss_nodes(np.geomspace(tau0, t, 11).tolist(), 5)
        from wedgeheat.convolution import _mode_variance_radial

        for pt in probes:
            g_here = float(mode.profile(pt.r) * math.sin(beta * pt.theta))
            brute = tau0 * g_here**2
            for tau, wq in zip(tau_nodes, tau_w):
                g_vals = heat_kernel_array(slit_cfg, tau, pt.r, pt.theta, r_n, th_n)
                semi = float(np.dot(g_vals * field, w_n))
                brute += wq * semi * semi
            fast = _mode_variance_radial(
                slit_cfg, mode, t, np.array([pt.r]), TimeQuadSpec(24, 8)
            )[0] * math.sin(beta * pt.theta) ** 2
            assert fast == pytest.approx(brute, rel=1e-3)

    def test_schedule_switch_respected(self, slit_cfg):
        # amplitude 1 on (0, 0.2], 0 afterwards: variance stops growing
        prof = RadialProfile(gamma=0.5, taper_start=0.25, taper_end=0.5)
        mode_on = NoiseMode(profile=prof, switch_times=(0.0, 0.2, math.inf), amplitudes=(1.0, 0.0))
        grid = graded_polar_grid(slit_cfg.domain, GridSpec(1e-3, 2.0, 48, 16, 2.0))
        vf = variance_field(slit_cfg, NoiseSpec(modes=(mode_on,)), [0.2, 0.6], grid)
        early, late = vf.values[0].max(), vf.values[1].max()
        assert late < early  # diffusion only decays the stopped variance


class TestWeightedMoments:
    def test_p2_moment_factor_is_one(self, slit_cfg, vertex_noise):
        grid = graded_polar_grid(slit_cfg.domain, GridSpec(1e-4, 2.0, 128, 48, 3.0))
        times = np.array([0.25, 0.75])
        tw = np.array([0.5, 0.5])
        vf = variance_field(slit_cfg, vertex_noise, times, grid, time_weights=tw)
        lhs = lhs_weighted_moment(vf, __import__("wedgeheat.fields", fromlist=["WeightParams"]).WeightParams(2.0, 2.0))
        # direct sum with moment factor 1
        r, _, w = grid.mesh()
        direct = sum(
            float(tw[i] * np.sum(vf.values[i].ravel() * r ** (2.0 - 4.0) * w))
            for i in range(2)
        )
        assert lhs == pytest.approx(direct, rel=1e-13)

    def test_zero_variance(self, slit_cfg):
        from wedgeheat.fields import WeightParams

        grid = graded_polar_grid(slit_cfg.domain, GridSpec(1e-3, 2.0, 16, 8, 2.0))
        vf = variance_field(slit_cfg, NoiseSpec(modes=()), [0.5], grid, time_weights=[1.0])
        assert lhs_weighted_moment(vf, WeightParams(2.0, 2.0)) == 0.0

    def test_rejects_p_below_two(self, slit_cfg, vertex_noise):
        from wedgeheat.fields import WeightParams

        grid = graded_polar_grid(slit_cfg.domain, GridSpec(1e-3, 2.0, 16, 8, 2.0))
        vf = variance_field(slit_cfg, vertex_noise, [0.5], grid, time_weights=[1.0])
        with pytest.raises(ValueError):
            lhs_weighted_moment(vf, WeightParams(1.5, 2.0))

    def test_rhs_time_constant_mode_separates(self, slit_cfg, vertex_noise):
        # time-constant single mode: E int int = T * ||g||_{L_p_theta}^p
        from wedgeheat.fields import WeightParams, weighted_lp_norm

        dom = slit_cfg.domain
        grid = graded_polar_grid(dom, GridSpec(1e-4, 1.0, 256, 128, 3.0))
        params = WeightParams(2.0, 2.0)
        T = 1.0
        t_nodes, t_w = panel_gauss_nodes([0.0, T], 8)
        rhs = rhs_g_norm(vertex_noise, params, grid, t_nodes, t_w, dom)
        mode = vertex_noise.modes[0]
        beta = dom.critical_exponent
        norm = weighted_lp_norm(
            lambda r, th: mode.profile(r) * np.sin(beta * th), params, grid
        )
        assert rhs == pytest.approx(T * norm**params.p, rel=1e-12)


class TestCounterexample:
    def make_spec(self, dom, p, theta, T=1.0, eps=1.0):
        return CounterexampleSpec(
            dom, T=T, p=p, theta=theta, epsilon=eps,
            delta_sequence=tuple(np.logspace(-1, -12, 10)),
        )

    def test_slit_plane_closed_form(self, slit_plane):
        # kappa0=2pi, p=2, theta=2: moment 1, time 1/2, angular pi, radial 1
        spec = self.make_spec(slit_plane, 2.0, 2.0)
        val = counterexample_integral(spec, 1e-12)
        assert val == pytest.approx(math.pi / 2.0, rel=1e-9)

    def test_threshold_is_log_divergent(self, slit_plane):
        # theta = 1 = p(1 - pi/kappa0): q = 0, pure log growth in 1/delta
        spec = self.make_spec(slit_plane, 2.0, 1.0)
        v1 = counterexample_integral(spec, 1e-4)
        v2 = counterexample_integral(spec, 1e-8)
        v3 = counterexample_integral(spec, 1e-12)
        assert v2 - v1 == pytest.approx(v3 - v2, rel=1e-10)
        c = gaussian_abs_moment(2.0) * 0.5 * math.pi
        assert v2 - v1 == pytest.approx(c * math.log(1e4), rel=1e-9)

    def test_nonincreasing_in_delta_and_slope(self, slit_plane):
        spec = self.make_spec(slit_plane, 2.0, 0.6)  # q = -0.4
        deltas = np.logspace(-2, -10, 9)
        vals = [counterexample_integral(spec, d) for d in deltas]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        slope = np.polyfit(np.log(1.0 / deltas[-4:]), np.log(vals[-4:]), 1)[0]
        assert slope == pytest.approx(0.4, abs=0.05)

    def test_convergent_above_threshold(self, slit_plane):
        spec = self.make_spec(slit_plane, 2.0, 3.0)  # q = 2
        v1 = counterexample_integral(spec, 1e-3)
        v2 = counterexample_integral(spec, 1e-6)
        assert abs(v2 - v1) <= 1e-6 * v2

    def test_rejects_delta_outside(self, slit_plane):
        spec = self.make_spec(slit_plane, 2.0, 2.0)
        with pytest.raises(ValueError):
            counterexample_integral(spec, 1.5)

    def test_profile_is_harmonic(self, slit_plane):
        # 5-point FD Laplacian of r^{pi/kappa0} sin(pi th/kappa0) on a
        # Cartesian patch away from the vertex -> 0 at second order
        beta = slit_plane.critical_exponent

        def u(x, y):
            r = np.hypot(x, y)
            th = np.arctan2(y, x) % (2 * math.pi)
            return r**beta * np.sin(beta * th)

        x0, y0 = 0.8, 0.9
        resid = []
        for h in (1e-2, 5e-3, 2.5e-3):
            lap = (
                u(x0 + h, y0) + u(x0 - h, y0) + u(x0, y0 + h) + u(x0, y0 - h)
                - 4 * u(x0, y0)
            ) / h**2
            resid.append(abs(lap))
        assert resid[1] < resid[0] / 3.0
        assert resid[2] < resid[1] / 3.0


class TestMonteCarlo:
    def test_zero_noise_gives_zero(self, slit_cfg):
        res = mc_sample_w(
            slit_cfg, NoiseSpec(modes=()), 0.5, [PolarPoint(0.3, math.pi)], 200, seed=1
        )
        assert np.all(res.abs_moments == 0.0)

    def test_matches_analytic_variance(self, slit_cfg, vertex_noise):
        probes = [
            PolarPoint(0.05, math.pi),
            PolarPoint(0.3, math.pi / 2),
            PolarPoint(1.0, math.pi),
        ]
        res = mc_sample_w(slit_cfg, vertex_noise, 0.5, probes, 4000, seed=42)
        from wedgeheat.convolution import _mode_variance_radial

        beta = slit_cfg.domain.critical_exponent
        mode = vertex_noise.modes[0]
        w_rad = _mode_variance_radial(
            slit_cfg, mode, 0.5, np.array([p.r for p in probes]), TimeQuadSpec(20, 6)
        )
        ana = w_rad * np.sin(beta * np.array([p.theta for p in probes])) ** 2
        assert np.all(np.abs(res.variance - ana) <= 3.0 * res.variance_se)

    def test_gaussian_kurtosis(self, slit_cfg, vertex_noise):
        res = mc_sample_w(slit_cfg, vertex_noise, 0.5, [PolarPoint(0.2, math.pi)], 4000, seed=9)
        se_kurt = math.sqrt(24.0 / res.n_paths)
        assert abs(res.kurtosis[0] - 3.0) <= 5.0 * se_kurt

    def test_bit_identical_reruns(self, slit_cfg, vertex_noise):
        probes = [PolarPoint(0.2, math.pi), PolarPoint(0.6, math.pi / 3)]
        a = mc_sample_w(slit_cfg, vertex_noise, 0.4, probes, 300, seed=7, p_moments=(2.0, 4.0))
        b = mc_sample_w(slit_cfg, vertex_noise, 0.4, probes, 300, seed=7, p_moments=(2.0, 4.0))
        assert np.array_equal(a.abs_moments, b.abs_moments)
        assert np.array_equal(a.variance, b.variance)
        c = mc_sample_w(slit_cfg, vertex_noise, 0.4, probes, 300, seed=8)
        assert not np.array_equal(a.variance, c.variance)

    def test_rejects_tiny_path_count(self, slit_cfg, vertex_noise):
        with pytest.raises(ValueError):
            mc_sample_w(slit_cfg, vertex_noise, 0.4, [PolarPoint(0.2, 1.0)], 50, seed=1)
