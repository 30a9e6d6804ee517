import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracsse import fbm, qnoise
from fracsse.errors import DomainError
from fracsse.fraccalc import (FracConfig, SampledFunction, chain_rule_residual,
                              default_alpha, fubini_residual, lambda_alpha,
                              stieltjes_integral, stochastic_integral,
                              w_alpha1_norm, weyl_left, weyl_right,
                              weyl_right_series, young_riemann,
                              young_trapezoid)

GRID = np.linspace(0.0, 1.0, 4097)


def monomial_left(exponent: float, alpha: float, t: float) -> float:
    """Riemann-Liouville closed form for D^alpha of t^exponent."""
    return math.gamma(exponent + 1.0) / math.gamma(exponent + 1.0 - alpha) \
        * t ** (exponent - alpha)


class TestWeylLeft:
    def test_constant(self):
        f = SampledFunction(GRID, np.full_like(GRID, 3.0))
        got = weyl_left(f, 0.3, 0.5)
        assert got == pytest.approx(3.0 / (math.gamma(0.7) * 0.5 ** 0.3),
                                    rel=1e-10)

    def test_linear_monomial(self):
        f = SampledFunction(GRID, GRID.copy())
        # Gamma(2)/Gamma(1.5) = 2/sqrt(pi) ~ 1.128379
        assert weyl_left(f, 0.5, 1.0) == pytest.approx(
            2.0 / math.sqrt(math.pi), rel=1e-8)

    def test_quadratic_monomial(self):
        f = SampledFunction(GRID, GRID ** 2)
        # Gamma(3)/Gamma(2.5) ~ 1.504506
        assert weyl_left(f, 0.5, 1.0) == pytest.approx(
            monomial_left(2.0, 0.5, 1.0), rel=1e-5)

    def test_quadrature_oracle(self):
        # independent adaptive singular quadrature of the Marchaud form
        alpha, t = 0.4, 0.8

        def f(s):
            return np.sin(2.0 * s)

        tail, err = integrate.quad(
            lambda s: (f(t) - f(s)) * (t - s) ** (-alpha - 1.0), 0.0, t,
            points=[t], limit=200)
        assert err < 1e-9
        expected = (f(t) / t ** alpha + alpha * tail) / math.gamma(1 - alpha)
        sampled = SampledFunction(GRID, np.sin(2.0 * GRID))
        idx = int(round(t / (GRID[1] - GRID[0])))
        got = weyl_left(sampled, alpha, GRID[idx])
        assert got == pytest.approx(expected, rel=2e-4)

    def test_singular_at_origin(self):
        f = SampledFunction(GRID, GRID.copy())
        with pytest.raises(DomainError):
            weyl_left(f, 0.5, 0.0)

    def test_alpha_domain(self):
        f = SampledFunction(GRID, GRID.copy())
        for alpha in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(DomainError):
                weyl_left(f, alpha, 0.5)


class TestWeylRight:
    def test_constant(self):
        g = SampledFunction(GRID, np.full_like(GRID, 2.0))
        got = weyl_right(g, 0.5, 0.75)
        assert got == pytest.approx(2.0 / (math.gamma(0.5) * 0.25 ** 0.5),
                                    rel=1e-10)

    def test_mirrored_monomial(self):
        g = SampledFunction(GRID, 1.0 - GRID)
        assert weyl_right(g, 0.5, 0.0) == pytest.approx(
            2.0 / math.sqrt(math.pi), rel=1e-8)

    def test_singular_at_horizon(self):
        g = SampledFunction(GRID, GRID.copy())
        with pytest.raises(DomainError):
            weyl_right(g, 0.5, 1.0)

    def test_limit_alpha_to_one_on_smooth_path(self):
        # for C^1 data the right derivative tends to minus the slope
        t = np.linspace(0.0, 1.0, 2049)
        g = SampledFunction(t, (1.0 - t) ** 2)
        target = 2.0 * (1.0 - 0.25)  # -g'(0.25)
        gaps = []
        for alpha in (0.9, 0.99):
            gaps.append(abs(weyl_right(g, alpha, 0.25) - target))
        assert gaps[1] < gaps[0]
        assert gaps[1] < 0.05 * target

    def test_composition_on_monomials(self):
        # D^(a+b) = D^a o D^b for right-sided monomials (T-t)^2
        coarse = np.linspace(0.0, 1.0, 2049)
        a, b = 0.4, 0.3
        g = SampledFunction(coarse, (1.0 - coarse) ** 2)
        inner = weyl_right_series(g, b)
        inner[-1] = 0.0  # limit of D^b (T-t)^2 at t=T for b < 2
        composed = weyl_right_series(SampledFunction(coarse, inner), a)
        direct = math.gamma(3.0) / math.gamma(3.0 - a - b) \
            * (1.0 - coarse) ** (2.0 - a - b)
        interior = slice(200, -200)
        assert np.allclose(composed[interior], direct[interior], rtol=2e-3)


class TestLambdaAlpha:
    def test_constant_vanishes(self):
        t = np.linspace(0.0, 1.0, 513)
        g = SampledFunction(t, np.full(513, 4.2))
        assert lambda_alpha(g, 0.4) == 0.0

    def test_linear_increases_with_alpha(self):
        t = np.linspace(0.0, 1.0, 513)
        g = SampledFunction(t, t.copy())
        lo = lambda_alpha(g, 0.3)
        hi = lambda_alpha(g, 0.45)
        assert 0.0 < lo < hi

    def test_fbm_finite(self):
        t = np.linspace(0.0, 1.0, 513)
        g = SampledFunction(t, fbm.sample_fbm(0.75, t, 3).values)
        value = lambda_alpha(g, 0.4)
        assert np.isfinite(value) and value > 0


class TestWalpha1:
    def test_zero(self):
        f = SampledFunction(GRID[:257], np.zeros(257))
        assert w_alpha1_norm(f, 0.5) == 0.0

    def test_constant_closed_form(self):
        f = SampledFunction(GRID, np.ones_like(GRID))
        assert w_alpha1_norm(f, 0.5) == pytest.approx(2.0, rel=1e-12)

    def test_holder_path_finite(self):
        t = np.linspace(0.0, 1.0, 1025)
        f = SampledFunction(t, fbm.sample_fbm(0.75, t, 9).values)
        assert np.isfinite(w_alpha1_norm(f, 0.4))


class TestStieltjes:
    def test_indicator_of_total_increment(self):
        g = SampledFunction(GRID, np.sin(3.0 * GRID) + GRID ** 2)
        f = SampledFunction(GRID, np.ones_like(GRID))
        expected = g.values[-1] - g.values[0]
        assert stieltjes_integral(f, g, 0.4) == pytest.approx(
            expected, abs=2e-5)

    def test_classical_pair(self):
        f = SampledFunction(GRID, GRID.copy())
        g = SampledFunction(GRID, GRID ** 2)
        assert stieltjes_integral(f, g, 0.4) == pytest.approx(
            2.0 / 3.0, abs=1e-4)

    def test_matches_young_on_fbm(self):
        t = np.linspace(0.0, 1.0, 4097)
        g = SampledFunction(t, fbm.sample_fbm(0.75, t, 42,
                                              method="circulant").values)
        f = SampledFunction(t, 1.0 + np.cos(2.0 * np.pi * t))
        ours = stieltjes_integral(f, g, 0.4, refine=2)
        oracle = young_riemann(f, g)
        assert abs(ours - oracle) / abs(oracle) < 1e-3

    def test_alpha_independence(self):
        t = np.linspace(0.0, 1.0, 4097)
        g = SampledFunction(t, fbm.sample_fbm(0.75, t, 42,
                                              method="circulant").values)
        f = SampledFunction(t, 1.0 + np.cos(2.0 * np.pi * t))
        vals = [stieltjes_integral(f, g, a, refine=2)
                for a in (0.30, 0.40, 0.45)]
        spread = (max(vals) - min(vals)) / max(abs(v) for v in vals)
        assert spread < 1e-3

    def test_complex_linearity(self):
        t = GRID[:1025]
        g = SampledFunction(t, t ** 2)
        fr = SampledFunction(t, np.cos(t))
        fi = SampledFunction(t, np.sin(3 * t))
        fc = SampledFunction(t, fr.values + 1j * fi.values)
        combined = stieltjes_integral(fc, g, 0.4)
        assert combined == pytest.approx(
            stieltjes_integral(fr, g, 0.4)
            + 1j * stieltjes_integral(fi, g, 0.4), rel=1e-12)

    def test_rejects_complex_integrator(self):
        t = GRID[:257]
        with pytest.raises(DomainError):
            stieltjes_integral(SampledFunction(t, t.copy()),
                               SampledFunction(t, 1j * t), 0.4)

    def test_estimate_bound_randomized(self):
        # |int f dg| <= |f|_{alpha,1} * Lambda_alpha(g) on random pairs
        t = np.linspace(0.0, 1.0, 513)
        for trial in range(20):
            rng = fbm.make_generator(900 + trial)
            coeffs = rng.standard_normal(4)
            fv = sum(c * np.cos((k + 1) * np.pi * t)
                     for k, c in enumerate(coeffs))
            f = SampledFunction(t, fv)
            g = SampledFunction(
                t, fbm.sample_fbm(0.75, t, 7000 + trial).values)
            lhs = abs(stieltjes_integral(f, g, 0.4))
            rhs = w_alpha1_norm(f, 0.4) * lambda_alpha(g, 0.4)
            assert lhs <= rhs


class TestYoung:
    def test_indicator(self):
        g = SampledFunction(GRID, GRID ** 3)
        f = SampledFunction(GRID, np.ones_like(GRID))
        assert young_riemann(f, g) == pytest.approx(1.0, rel=1e-12)

    def test_classical_pair_refinement(self):
        f = SampledFunction(GRID, GRID.copy())
        g = SampledFunction(GRID, GRID ** 2)
        assert young_riemann(f, g) == pytest.approx(2.0 / 3.0, abs=1e-3)
        assert young_trapezoid(f, g) == pytest.approx(2.0 / 3.0, abs=1e-7)

    @settings(max_examples=25, deadline=None)
    @given(scale=st.floats(-3.0, 3.0))
    def test_antisymmetry_and_scaling(self, scale):
        t = np.linspace(0.0, 1.0, 65)
        f = SampledFunction(t, np.cos(t))
        g = SampledFunction(t, np.sin(2 * t))
        g_scaled = SampledFunction(t, scale * g.values)
        assert young_riemann(f, g_scaled) == pytest.approx(
            scale * young_riemann(f, g), rel=1e-9, abs=1e-12)


@pytest.fixture(scope="module")
def tiny_field():
    spec = qnoise.build_spectrum(1, 2.0 * np.pi, 8)
    times = np.linspace(0.0, 1.0, 513)
    return qnoise.sample_field(spec, 0.75, times, 11, 64)


class TestStochasticIntegral:
    def test_zero_integrand(self, tiny_field):
        arr = np.zeros((8, tiny_field.times.size))
        out = stochastic_integral(arr, tiny_field, 0.4)
        assert out.value == 0.0
        assert np.all(out.partial_sums == 0.0)

    def test_single_mode_reduction(self):
        spec = qnoise.build_spectrum(1, 2.0 * np.pi, 1)
        times = np.linspace(0.0, 1.0, 257)
        field = qnoise.sample_field(spec, 0.75, times, 4, 32)
        fvals = np.sin(times)[None, :]
        out = stochastic_integral(fvals, field, 0.4)
        direct = field.spectrum.amplitudes[0] * stieltjes_integral(
            SampledFunction(times, np.sin(times)),
            SampledFunction(times, field.paths[0]), 0.4)
        assert out.value == pytest.approx(direct, rel=1e-12)

    def test_matches_young_oracle_per_mode(self):
        spec = qnoise.build_spectrum(1, 2.0 * np.pi, 8)
        times = np.linspace(0.0, 1.0, 2049)
        field = qnoise.sample_field(spec, 0.75, times, 11, 64)
        arr = np.array([1.0 + np.cos((p + 1) * times) for p in range(8)])
        out = stochastic_integral(arr, field, 0.4, refine=4)
        oracle = sum(
            field.spectrum.amplitudes[p] * young_riemann(
                SampledFunction(times, arr[p]),
                SampledFunction(times, field.paths[p]))
            for p in range(8))
        assert abs(out.value - oracle) / abs(oracle) < 1e-3

    def test_partial_sums_reported(self, tiny_field):
        arr = np.ones((8, tiny_field.times.size))
        out = stochastic_integral(arr, tiny_field, 0.4)
        assert out.partial_sums.shape == (8,)
        assert out.partial_sums[-1] == pytest.approx(out.value)
        assert isinstance(out.tail_warning, bool)


class _PointEval:
    """F(b, t) = b(x0): linear in the noise, time independent."""

    def __init__(self, index):
        self.index = index

    def value(self, b, t):
        return b.flat[self.index]

    def noise_derivative(self, b, t, direction):
        return direction.flat[self.index]

    def time_derivative(self, b, t):
        return 0.0


class _TimeOnly:
    def value(self, b, t):
        return t

    def noise_derivative(self, b, t, direction):
        return 0.0

    def time_derivative(self, b, t):
        return 1.0


class _SquareEval(_PointEval):
    def value(self, b, t):
        return b.flat[self.index] ** 2

    def noise_derivative(self, b, t, direction):
        return 2.0 * b.flat[self.index] * direction.flat[self.index]


class TestChainRule:
    def test_linear_functional(self):
        # linear F: residual is pure quadrature error, vanishing under refine
        spec = qnoise.build_spectrum(1, 2.0 * np.pi, 1)
        times = np.linspace(0.0, 1.0, 1025)
        field = qnoise.sample_field(spec, 0.75, times, 6, 32)
        coarse = chain_rule_residual(_PointEval(3), field, 0, 1024, 0.4)
        fine = chain_rule_residual(_PointEval(3), field, 0, 1024, 0.4,
                                   refine=4)
        assert fine < 2e-4
        assert fine < coarse

    def test_time_only(self, tiny_field):
        res = chain_rule_residual(_TimeOnly(), tiny_field, 0, 512, 0.4)
        assert res < 1e-12

    def test_quadratic_refines(self, tiny_field):
        residuals = []
        for stride in (8, 4, 2, 1):
            residuals.append(chain_rule_residual(
                _SquareEval(5), tiny_field, 0, 512, 0.4, stride=stride))
        assert residuals[-1] < residuals[0]
        dts = [8, 4, 2, 1]
        slope = np.polyfit(np.log(dts), np.log(residuals), 1)[0]
        assert slope > 0.2


class TestFubini:
    def test_zero_family(self, tiny_field):
        def family(e_grid, times):
            return np.zeros((times.size,) + e_grid.shape)

        assert fubini_residual(family, tiny_field, 0, 64, 0.4) == 0.0

    def test_separable_single_mode(self):
        spec = qnoise.build_spectrum(1, 2.0 * np.pi, 1)
        times = np.linspace(0.0, 1.0, 129)
        field = qnoise.sample_field(spec, 0.75, times, 2, 32)

        def family(e_grid, tw):
            return np.sin(tw)[:, None] * e_grid[None, :]

        assert fubini_residual(family, field, 0, 128, 0.4) < 1e-12

    def test_generic_smooth_family(self):
        spec = qnoise.build_spectrum(1, 2.0 * np.pi, 16)
        times = np.linspace(0.0, 1.0, 129)
        field = qnoise.sample_field(spec, 0.75, times, 5, 64)
        x = field.grid.axis_coordinates()

        def family(e_grid, tw):
            return (np.exp(-tw)[:, None]
                    * (e_grid * np.cos(x))[None, :]
                    + tw[:, None] ** 2 * e_grid[None, :])

        assert fubini_residual(family, field, 0, 128, 0.4) < 1e-10


class TestConfig:
    def test_default_alpha(self):
        assert default_alpha(0.75) == 0.4
        # H = 0.55: admissible window (0.45, 0.5); default is its midpoint
        assert default_alpha(0.55) == pytest.approx(0.475)

    def test_stochastic_window(self):
        FracConfig(alpha=0.4).validate_stochastic(0.75)
        with pytest.raises(Exception):
            FracConfig(alpha=0.2).validate_stochastic(0.75)

    def test_alpha_bounds(self):
        with pytest.raises(DomainError):
            FracConfig(alpha=1.2)
