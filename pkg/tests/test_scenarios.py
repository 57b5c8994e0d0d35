import math

import numpy as np
import pytest

from bregshift.core import RngStream
from bregshift.scenarios import (SOURCE, TARGET, DomainSample, GammaShiftSpec, RegressionSpec, f0,
                                 gen_domain, gen_gamma_shift, gen_regression, read_dataset,
                                 true_ratio, write_dataset)


class TestTrueRatio:
    def test_examples(self):
        assert true_ratio(GammaShiftSpec(1), [1.0]) == 2.0
        assert true_ratio(GammaShiftSpec(2), [0.5, 2.0]) == 2.0
        assert true_ratio(GammaShiftSpec(2), [1.0, 1.0]) == 2.0

    def test_matches_density_quotient(self):
        # ratio of product Gamma densities with rate 2, written out independently
        from scipy.stats import gamma as G
        x = np.array([[0.3, 1.1, 2.0, 0.7, 3.2]])
        q = np.prod([G.pdf(x[0, j], j + 2, scale=0.5) for j in range(5)])
        p = np.prod([G.pdf(x[0, j], j + 1, scale=0.5) for j in range(5)])
        assert true_ratio(GammaShiftSpec(5), x)[0] == pytest.approx(q / p, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            true_ratio(GammaShiftSpec(1), [0.0])

    def test_rejects_wrong_dimension(self):
        with pytest.raises(ValueError):
            true_ratio(GammaShiftSpec(2), [1.0])


class TestGammaShift:
    def test_means_d1(self):
        s = gen_gamma_shift(GammaShiftSpec(1), 100_000, 100_000, RngStream(1))
        n = 100_000
        # Gamma(k, rate 2) has sd sqrt(k) / 2
        assert abs(s.source_X.mean() - 0.5) < 3 * 0.5 / math.sqrt(n)
        assert abs(s.target_X.mean() - 1.0) < 3 * math.sqrt(2) / 2 / math.sqrt(n)

    def test_last_source_column_d5(self):
        X = gen_domain(GammaShiftSpec(5), 50_000, SOURCE, RngStream(2))
        assert abs(X[:, 4].mean() - 2.5) < 3 * math.sqrt(5) / 2 / math.sqrt(50_000)

    def test_shapes(self):
        assert GammaShiftSpec(3).shapes(SOURCE) == [1, 2, 3]
        assert GammaShiftSpec(3).shapes(TARGET) == [2, 3, 4]

    def test_positive(self):
        s = gen_gamma_shift(GammaShiftSpec(5), 20_000, 20_000, RngStream(3))
        assert np.all(s.source_X > 0) and np.all(s.target_X > 0)

    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_ratio_has_unit_source_mean(self, d):
        X = gen_domain(GammaShiftSpec(d), 200_000, SOURCE, RngStream(4 + d))
        r = true_ratio(GammaShiftSpec(d), X)
        assert abs(r.mean() - 1.0) < 3 * r.std() / math.sqrt(r.size)

    def test_change_of_measure_second_moment(self):
        spec = GammaShiftSpec(1)
        s = gen_gamma_shift(spec, 200_000, 200_000, RngStream(9))
        rs, rt = true_ratio(spec, s.source_X), true_ratio(spec, s.target_X)
        # E_P[r0^2] = E_Q[r0] = 2 for d = 1
        assert np.mean(rs**2) == pytest.approx(2.0, rel=0.03)
        assert rt.mean() == pytest.approx(2.0, rel=0.03)

    def test_column_mismatch_rejected(self):
        with pytest.raises(ValueError):
            DomainSample(np.ones((3, 2)), np.ones((3, 1)))


class TestF0:
    def test_zero_case(self):
        np.testing.assert_allclose(f0([1, 1, 0, 0, 0]), [0.0, 0.0], atol=1e-15)

    def test_direct_value(self):
        np.testing.assert_allclose(f0([1.5, 1, 1, 3, 0]), [math.log(2), math.exp(-1)], rtol=1e-14)

    def test_indicator_is_strict(self):
        assert f0([1, 1, 1, 2.0, 1])[1] == 0.0
        assert f0([1, 1, 1, np.nextafter(2.0, 3.0), 1])[1] == pytest.approx(math.exp(-1))

    def test_batch_matches_rows(self):
        X = gen_domain(GammaShiftSpec(5), 10, SOURCE, RngStream(1))
        np.testing.assert_array_equal(f0(X), np.vstack([f0(x) for x in X]))

    def test_needs_five_coordinates(self):
        with pytest.raises(ValueError):
            f0([1, 2, 3])


class TestRegression:
    def test_noiseless(self):
        d = gen_regression(RegressionSpec(0.0), 100, SOURCE, RngStream(1))
        assert np.array_equal(d.Y, d.F)
        np.testing.assert_array_equal(d.F, f0(d.X))

    def test_noise_cancels_in_sum(self):
        d = gen_regression(RegressionSpec(0.7), 1000, TARGET, RngStream(2))
        np.testing.assert_allclose(d.Y.sum(axis=1), d.F.sum(axis=1), rtol=0, atol=1e-14)
        res = d.Y - d.F
        np.testing.assert_allclose(res[:, 0], -res[:, 1], rtol=0, atol=1e-14)

    def test_residual_covariance(self):
        nu = 0.5
        d = gen_regression(RegressionSpec(nu), 100_000, SOURCE, RngStream(3))
        C = np.cov((d.Y - d.F).T)
        np.testing.assert_allclose(C, nu**2 * np.array([[1, -1], [-1, 1]]), atol=5 * nu**2 * math.sqrt(2 / 1e5))

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            RegressionSpec(-0.1)

    def test_subset(self):
        d = gen_regression(RegressionSpec(0.1), 10, SOURCE, RngStream(4))
        s = d.subset([1, 3])
        assert s.n == 2 and np.array_equal(s.X[1], d.X[3])


class TestDatasetCsv:
    def test_round_trip_plain(self, tmp_path):
        s = gen_gamma_shift(GammaShiftSpec(2), 5, 4, RngStream(1))
        path = tmp_path / "d.csv"
        write_dataset(s, path)
        assert path.read_text().splitlines()[0] == "domain,x1,x2"
        back = read_dataset(path)
        assert np.array_equal(back.source_X, s.source_X)
        assert np.array_equal(back.target_X, s.target_X)
        assert back.source_Y is None

    def test_round_trip_with_responses(self, tmp_path):
        src = gen_regression(RegressionSpec(0.1), 6, SOURCE, RngStream(2))
        tgt = gen_domain(GammaShiftSpec(5), 3, TARGET, RngStream(3))
        path = tmp_path / "r.csv"
        write_dataset(DomainSample(src.X, tgt, src.Y), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "domain,x1,x2,x3,x4,x5,y1,y2"
        assert lines[-1].endswith(",,")
        back = read_dataset(path)
        assert np.array_equal(back.source_Y, src.Y)
        assert np.array_equal(back.target_X, tgt)
