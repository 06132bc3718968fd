import math

import mpmath as mp
import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from wedgeheat.errors import NonConvergentError
from wedgeheat.special import (
    BesselAccuracy,
    bessel_i_scaled,
    gamma_ln,
    gaussian_abs_moment,
)


class TestGammaLn:
    @pytest.mark.parametrize(
        "x,expected",
        [(1.0, 0.0), (2.0, 0.0), (0.5, 0.5 * math.log(math.pi))],
    )
    def test_exact_values(self, x, expected):
        assert gamma_ln(x) == pytest.approx(expected, abs=1e-13)

    @given(x=st.floats(min_value=1e-3, max_value=170.0))
    @settings(max_examples=300, deadline=None)
    def test_against_stdlib(self, x):
        assert gamma_ln(x) == pytest.approx(math.lgamma(x), rel=1e-12, abs=1e-12)

    def test_rejects_nonpositive(self):
        for x in (0.0, -1.0):
            with pytest.raises(ValueError):
                gamma_ln(x)


class TestGaussianAbsMoment:
    @pytest.mark.parametrize(
        "p,expected",
        [(2.0, 1.0), (4.0, 3.0), (1.0, math.sqrt(2.0 / math.pi))],
    )
    def test_known_moments(self, p, expected):
        assert gaussian_abs_moment(p) == pytest.approx(expected, rel=1e-12)

    def test_rejects_small_p(self):
        with pytest.raises(ValueError):
            gaussian_abs_moment(0.5)

    def test_monte_carlo_consistency(self):
        rng = np.random.default_rng(123)
        z = rng.standard_normal(100_000)
        for p in (1.5, 2.0, 3.0):
            vals = np.abs(z) ** p
            se = vals.std(ddof=1) / math.sqrt(vals.size)
            assert abs(gaussian_abs_moment(p) - vals.mean()) <= 3.0 * se


class TestBesselIScaled:
    def test_at_zero(self):
        assert bessel_i_scaled(0.0, 0.0) == 1.0
        assert bessel_i_scaled(0.5, 0.0) == 0.0
        assert bessel_i_scaled(3.0, 0.0) == 0.0

    def test_half_order_closed_form(self):
        # Itilde_{1/2}(z) = e^{-z} sqrt(2/(pi z)) sinh z
        z = 1.0
        expected = math.exp(-1.0) * math.sqrt(2.0 / math.pi) * math.sinh(1.0)
        assert bessel_i_scaled(0.5, z) == pytest.approx(expected, rel=1e-12)

    def test_large_argument_value(self):
        # asymptotic-series oracle (2 pi 100)^(-1/2) (1 + 1/800 + ...)
        assert bessel_i_scaled(0.0, 100.0) == pytest.approx(0.0399444, rel=1e-5)
        mp.mp.dps = 30
        ref = float(mp.besseli(0, 100) * mp.exp(-100))
        assert bessel_i_scaled(0.0, 100.0) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("nu", [0.5, 1.5])
    def test_half_integer_closed_forms_over_range(self, nu):
        # scaled closed forms: e^{-z} sinh z = (1 - e^{-2z})/2 etc.; the
        # nu=3/2 combination cancels catastrophically for tiny z, so the
        # oracle switches to its Taylor form there
        for z in np.logspace(-6, 3, 40):
            esinh = 0.5 * (1.0 - math.exp(-2.0 * z))
            ecosh = 0.5 * (1.0 + math.exp(-2.0 * z))
            if nu == 0.5:
                closed = math.sqrt(2.0 / (math.pi * z)) * esinh
            elif z < 0.1:
                gamma_52 = 3.0 * math.sqrt(math.pi) / 4.0
                closed = (
                    math.exp(-z)
                    * (0.5 * z) ** 1.5
                    / gamma_52
                    * (1.0 + z**2 / 10.0 + z**4 / 280.0)
                )
            else:
                closed = math.sqrt(2.0 / (math.pi * z)) * (ecosh - esinh / z)
            if closed < 1e-280:
                continue
            assert bessel_i_scaled(nu, z) == pytest.approx(closed, rel=1e-10)

    def test_against_scipy_grid(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            nu = rng.uniform(0.0, 40.0)
            z = 10.0 ** rng.uniform(-6, 2.8)
            ref = sp.ive(nu, z)
            if ref < 1e-290:
                continue
            assert bessel_i_scaled(nu, z) == pytest.approx(ref, rel=5e-12)

    def test_monotone_decreasing_in_order(self):
        for z in np.logspace(-1, 2, 12):
            vals = [bessel_i_scaled(nu, z) for nu in np.linspace(0.0, 10.0, 21)]
            assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_recurrence_residual(self):
        # I_{nu-1}(z) - I_{nu+1}(z) = (2 nu / z) I_nu(z), scaled form
        rng = np.random.default_rng(5)
        for _ in range(60):
            nu = rng.uniform(1.0, 8.0)
            z = 10.0 ** rng.uniform(-0.3, 2.3)
            lhs = bessel_i_scaled(nu - 1.0, z) - bessel_i_scaled(nu + 1.0, z)
            rhs = 2.0 * nu / z * bessel_i_scaled(nu, z)
            assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-280)

    def test_vectorized_matches_scalar(self):
        z = np.array([0.0, 0.1, 3.0, 50.0, 700.0])
        vec = bessel_i_scaled(1.25, z)
        for zi, vi in zip(z, vec):
            assert vi == bessel_i_scaled(1.25, float(zi))

    def test_nonconvergent_region_raises(self):
        # nu^2 > 2z and power series infeasible: neither regime applies
        with pytest.raises(NonConvergentError):
            bessel_i_scaled(200.0, 2500.0, BesselAccuracy(max_terms=300))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            bessel_i_scaled(-1.0, 1.0)
        with pytest.raises(ValueError):
            bessel_i_scaled(1.0, -1.0)

    def test_accuracy_validation(self):
        with pytest.raises(ValueError):
            BesselAccuracy(rel_tol=1e-20)
        with pytest.raises(ValueError):
            BesselAccuracy(max_terms=10)
