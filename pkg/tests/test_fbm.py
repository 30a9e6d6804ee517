import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsse import fbm
from fracsse.errors import DomainError, EstimationError, NumericalError


class TestCovariance:
    def test_equal_times(self):
        assert fbm.fbm_covariance(1.0, 1.0, 0.75) == pytest.approx(1.0)

    def test_zero_time(self):
        assert fbm.fbm_covariance(0.0, 0.7, 0.75) == 0.0
        assert fbm.fbm_covariance(0.0, 123.0, 0.9) == 0.0

    def test_direct_evaluation(self):
        # (2^1.5 + 1 - 1)/2 = sqrt(2)
        assert fbm.fbm_covariance(2.0, 1.0, 0.75) == pytest.approx(
            np.sqrt(2.0), rel=1e-12)

    @pytest.mark.parametrize("hurst", [0.5, 1.0, 0.3, 1.2, -0.1])
    def test_hurst_domain(self, hurst):
        with pytest.raises(DomainError):
            fbm.fbm_covariance(1.0, 1.0, hurst)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            fbm.fbm_covariance(-1.0, 1.0, 0.75)

    @given(t=st.floats(0.0, 10.0), s=st.floats(0.0, 10.0),
           hurst=st.floats(0.55, 0.95))
    def test_symmetry_and_diagonal(self, t, s, hurst):
        c_ts = fbm.fbm_covariance(t, s, hurst)
        assert c_ts == pytest.approx(fbm.fbm_covariance(s, t, hurst))
        # variance on the diagonal is t^(2H)
        assert fbm.fbm_covariance(t, t, hurst) == pytest.approx(
            t ** (2 * hurst), abs=1e-12)


class TestSampling:
    def test_determinism(self):
        t = np.linspace(0.0, 1.0, 65)
        for method in ("cholesky", "circulant"):
            a = fbm.sample_fbm(0.75, t, 42, method=method)
            b = fbm.sample_fbm(0.75, t, 42, method=method)
            assert np.array_equal(a.values, b.values)

    def test_seed_changes_path(self):
        t = np.linspace(0.0, 1.0, 65)
        a = fbm.sample_fbm(0.75, t, 1)
        b = fbm.sample_fbm(0.75, t, 2)
        assert not np.array_equal(a.values, b.values)

    def test_stream_changes_path(self):
        t = np.linspace(0.0, 1.0, 65)
        a = fbm.sample_fbm(0.75, t, 1, stream=0)
        b = fbm.sample_fbm(0.75, t, 1, stream=1)
        assert not np.array_equal(a.values, b.values)

    def test_single_point_grid(self):
        path = fbm.sample_fbm(0.75, np.array([0.0]), 3)
        assert path.values.tolist() == [0.0]

    def test_starts_at_zero(self):
        t = np.linspace(0.0, 2.0, 33)
        assert fbm.sample_fbm(0.6, t, 9).values[0] == 0.0

    def test_circulant_needs_uniform_grid(self):
        t = np.array([0.0, 0.1, 0.3, 0.35, 1.0])
        with pytest.raises(DomainError, match="uniform"):
            fbm.sample_fbm(0.75, t, 1, method="circulant")

    def test_cholesky_handles_nonuniform(self):
        t = np.array([0.0, 0.1, 0.3, 0.35, 1.0])
        path = fbm.sample_fbm(0.75, t, 1, method="cholesky")
        assert np.all(np.isfinite(path.values))

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            fbm.sample_fbm(0.75, np.linspace(0, 1, 9), 1, method="midpoint")

    def test_near_degenerate_grid_raises_numerical(self):
        # two nearly equal times make the covariance numerically singular
        t = np.array([0.0, 0.5, 0.5 + 1e-14, 1.0])
        with pytest.raises((NumericalError, DomainError)):
            fbm.sample_fbm(0.75, t, 1, method="cholesky")

    def test_covariance_small_ensemble(self):
        # Monte-Carlo oracle against the analytic covariance
        t = np.linspace(0.0, 1.0, 65)
        ens = fbm.sample_fbm_ensemble(0.75, t, 11, 4000)
        for i, j in [(16, 16), (32, 48), (64, 8)]:
            emp = np.mean(ens[:, i] * ens[:, j])
            ref = fbm.fbm_covariance(t[i], t[j], 0.75)
            assert emp == pytest.approx(ref, rel=0.12)

    def test_methods_agree_in_law(self):
        # marginal variances of the two exact samplers agree within MC error
        t = np.linspace(0.0, 1.0, 129)
        var_c = fbm.sample_fbm_ensemble(0.75, t, 5, 4000).var(axis=0)
        var_d = fbm.sample_fbm_ensemble(0.75, t, 6, 4000,
                                        method="circulant").var(axis=0)
        ref = t ** 1.5
        assert np.allclose(var_c[1:], ref[1:], rtol=0.15)
        assert np.allclose(var_d[1:], ref[1:], rtol=0.15)

    def test_increment_stationarity(self):
        # variance of increments over a fixed lag does not depend on position
        t = np.linspace(0.0, 1.0, 257)
        ens = fbm.sample_fbm_ensemble(0.75, t, 21, 4000, method="circulant")
        lag = 32
        h = t[lag] - t[0]
        for start in (0, 64, 128, 192):
            inc = ens[:, start + lag] - ens[:, start]
            assert np.var(inc) == pytest.approx(h ** 1.5, rel=0.15)


class TestPathType:
    def test_validation(self):
        t = np.linspace(0.0, 1.0, 16)
        with pytest.raises(DomainError):
            fbm.FbmPath(hurst=0.75, times=t, values=np.ones(16))  # v[0] != 0
        with pytest.raises(DomainError):
            fbm.FbmPath(hurst=0.75, times=t[::-1], values=np.zeros(16))
        with pytest.raises(DomainError):
            fbm.FbmPath(hurst=0.3, times=t, values=np.zeros(16))

    def test_csv_roundtrip(self, tmp_path):
        path = fbm.sample_fbm(0.75, np.linspace(0, 1, 33), 4)
        target = tmp_path / "path.csv"
        path.to_csv(target)
        data = np.loadtxt(target, delimiter=",", skiprows=1)
        assert np.allclose(data[:, 0], path.times)
        assert np.allclose(data[:, 1], path.values)


class TestHolderEstimator:
    def test_fbm_path(self):
        t = np.linspace(0.0, 1.0, 2 ** 14 + 1)
        path = fbm.sample_fbm(0.75, t, 17, method="circulant")
        est = fbm.estimate_holder(path)
        assert 0.70 <= est <= 0.80

    def test_linear_path(self):
        t = np.linspace(0.0, 1.0, 2 ** 12 + 1)
        est = fbm.structure_function_exponent(t, t.copy())
        assert est == pytest.approx(1.0, abs=1e-10)

    def test_brownian_input(self):
        # H = 1/2 is outside the solver pipeline but the estimator handles it
        rng = fbm.make_generator(5)
        n = 2 ** 14
        values = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n))])
        values *= np.sqrt(1.0 / n)
        t = np.linspace(0.0, 1.0, n + 1)
        assert fbm.structure_function_exponent(t, values) == pytest.approx(
            0.5, abs=0.05)

    def test_degenerate_path(self):
        t = np.linspace(0.0, 1.0, 2 ** 11 + 1)
        with pytest.raises(EstimationError, match="degenerate"):
            fbm.structure_function_exponent(t, np.zeros_like(t))

    def test_short_path_rejected(self):
        t = np.linspace(0.0, 1.0, 100)
        with pytest.raises(EstimationError):
            fbm.structure_function_exponent(t, t.copy())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_sampling_is_pure(seed):
    t = np.linspace(0.0, 1.0, 33)
    a = fbm.sample_fbm(0.8, t, seed)
    b = fbm.sample_fbm(0.8, t, seed)
    assert np.array_equal(a.values, b.values)
