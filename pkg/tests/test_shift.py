import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregshift.core import RngStream
from bregshift.scenarios import SOURCE, TARGET, RegressionSpec, f0, gen_regression, true_ratio
from bregshift.shift import (RiskReport, ShiftConfig, best_iteration, cross_validate_iters, eval_risks,
                             fit_corrected, fit_source, holdout_split, replicate, train_regression,
                             validation_curve)


class TrueMean:
    def __call__(self, X):
        return f0(X)


@pytest.fixture(scope="module")
def small():
    return gen_regression(RegressionSpec(0.1), 120, SOURCE, RngStream(3))


SMALL = ShiftConfig(iteration_grid=(20, 40, 60), n_test=200)


class TestBestIteration:
    def test_decreasing_curve_takes_last(self):
        assert best_iteration({1000: 0.5, 2000: 0.4, 3000: 0.3, 4000: 0.2, 5000: 0.1}) == 5000

    def test_planted_valley(self):
        curve = {k: (k - 3000) ** 2 / 1e6 + 0.1 for k in (1000, 2000, 3000, 4000, 5000)}
        assert best_iteration(curve) == 3000

    def test_ties_prefer_fewer_steps(self):
        assert best_iteration({3000: 0.2, 1000: 0.2, 2000: 0.3}) == 1000

    def test_empty(self):
        with pytest.raises(ValueError):
            best_iteration({})


class TestCrossValidation:
    def test_singleton_grid(self, small):
        assert cross_validate_iters(small, [4321], SMALL, seed=0) == 4321

    def test_empty_grid(self, small):
        with pytest.raises(ValueError):
            cross_validate_iters(small, [], SMALL, seed=0)

    def test_needs_ten_samples(self, small):
        with pytest.raises(ValueError, match="at least 10"):
            cross_validate_iters(small.subset(range(9)), [1, 2], SMALL, seed=0)

    @settings(max_examples=8, deadline=None)
    @given(st.lists(st.integers(1, 40), min_size=2, max_size=4, unique=True), st.integers(0, 1000))
    def test_result_is_in_grid(self, small, grid, seed):
        assert cross_validate_iters(small, grid, SMALL, seed) in grid

    def test_curve_has_every_grid_value(self, small):
        curve = validation_curve(small, SMALL.iteration_grid, SMALL, seed=1)
        assert sorted(curve) == [20, 40, 60]
        assert all(v > 0 and math.isfinite(v) for v in curve.values())

    def test_checkpoint_equals_separate_run(self, small):
        """A grid value's checkpoint is the same model a separate shorter run produces."""
        from bregshift.bregman import weighted_sq_loss
        from bregshift.shift import derive_seed
        curve = validation_curve(small, [15, 30], SMALL, seed=4)
        tr, va = holdout_split(small.n, SMALL.holdout, RngStream(4))
        m = train_regression(small.subset(tr), np.ones(tr.size), 15, SMALL, derive_seed(4, "fit"),
                             n_schedule=small.n)
        val = small.subset(va)
        assert curve[15] == weighted_sq_loss(m(val.X), val.Y)


def test_holdout_split():
    tr, va = holdout_split(100, 0.2, RngStream(1))
    assert tr.size == 80 and va.size == 20
    assert sorted(np.concatenate([tr, va]).tolist()) == list(range(100))


class TestCorrected:
    def test_unit_weights_match_source_fit(self, small):
        a = fit_source(small, SMALL, seed=9)
        b = fit_corrected(small, np.ones(small.n), SMALL, seed=9)
        assert a.params.flat.tobytes() == b.params.flat.tobytes()
        assert a.iterations == b.iterations

    def test_weight_scale_invariance(self, small):
        # Adam's step is invariant to loss scaling except through epsilon; with
        # epsilon negligible the full-batch trajectories for w and 2w coincide
        cfg = ShiftConfig(batch_size=small.n, adam_epsilon=1e-30)
        w = true_ratio(RegressionSpec().covariates, small.X)
        a = train_regression(small, w, 100, cfg, seed=5)
        b = train_regression(small, 2 * w, 100, cfg, seed=5)
        assert np.max(np.abs(a.params.flat - b.params.flat)) < 1e-6

    def test_weight_scale_with_default_epsilon(self, small):
        # parameters whose gradients shrink toward epsilon do feel the scale;
        # the drift stays small next to the parameters themselves
        cfg = ShiftConfig(batch_size=small.n)
        w = true_ratio(RegressionSpec().covariates, small.X)
        a = train_regression(small, w, 100, cfg, seed=5)
        b = train_regression(small, 2 * w, 100, cfg, seed=5)
        assert np.max(np.abs(a.params.flat - b.params.flat)) < 1e-2 * np.max(np.abs(a.params.flat))

    def test_true_weights_positive(self, small):
        assert np.all(true_ratio(RegressionSpec().covariates, small.X) > 0)

    def test_zero_weights_rejected(self, small):
        with pytest.raises(ValueError, match="zero"):
            fit_corrected(small, np.zeros(small.n), SMALL)

    def test_negative_weights_rejected(self, small):
        w = np.ones(small.n)
        w[0] = -1
        with pytest.raises(ValueError):
            fit_corrected(small, w, SMALL)

    def test_weight_length_checked(self, small):
        with pytest.raises(ValueError):
            fit_corrected(small, np.ones(3), SMALL)

    def test_outputs_within_bounds(self, small):
        model = fit_source(small, SMALL, seed=1)
        bound = math.log(small.n) ** 1.5
        out = model(100 * RngStream(2).uniform((500, 5)))
        assert np.all(np.abs(out) <= bound)
        assert model.spec.out_hi == pytest.approx(bound)


def test_noise_level_ordering():
    cfg = ShiftConfig(iteration_grid=(1500,))
    clean = gen_regression(RegressionSpec(0.0), 1000, SOURCE, RngStream(11))
    noisy = gen_regression(RegressionSpec(1.0), 1000, SOURCE, RngStream(11))
    test = gen_regression(RegressionSpec(0.0), 1000, SOURCE, RngStream(12))
    a = eval_risks(fit_source(clean, cfg, 1), TrueMean(), TrueMean(), test, test)
    b = eval_risks(fit_source(noisy, cfg, 1), TrueMean(), TrueMean(), test, test)
    assert a.sers < b.sers


class TestRisks:
    def test_oracle_is_zero(self):
        s = gen_regression(RegressionSpec(0.0), 50, SOURCE, RngStream(1))
        t = gen_regression(RegressionSpec(0.0), 50, TARGET, RngStream(2))
        m = TrueMean()
        assert eval_risks(m, m, m, s, t).as_dict() == {"sers": 0.0, "sert": 0.0, "edrc": 0.0, "odrc": 0.0}

    def test_elementwise_mean(self):
        s = gen_regression(RegressionSpec(0.0), 4, SOURCE, RngStream(1))

        class Shifted:
            def __call__(self, X):
                return f0(X) + np.array([1.0, 3.0])

        r = eval_risks(Shifted(), Shifted(), Shifted(), s, s)
        assert r.sers == pytest.approx((1 + 9) / 2)

    def test_replicate_smoke(self):
        cfg = ShiftConfig(n11=60, n12=60, iteration_grid=(20, 40), n_test=100, seed=3)
        rep = replicate(cfg)
        assert isinstance(rep, RiskReport)
        assert all(v > 0 and math.isfinite(v) for v in rep.as_dict().values())
        assert replicate(cfg) == rep


def test_config_validation():
    with pytest.raises(ValueError):
        ShiftConfig(iteration_grid=())
    with pytest.raises(ValueError):
        ShiftConfig(iteration_grid=(0, 10))
