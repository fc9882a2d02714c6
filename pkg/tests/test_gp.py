import numpy as np
import pytest

from intentplan.gp import (
    NoisyInputParams,
    SpgpHyperparams,
    model_from_dict,
    model_to_dict,
    spgp_predict,
    spgp_predict_noisy,
    spgp_train,
)
from intentplan.motion import TrainingWindow


def _window(x, y, n_f=2, joints=1):
    """Wrap a scalar-channel pair into a TrainingWindow-shaped sample."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    next_positions = np.broadcast_to(y.reshape(1, 1, 1), (n_f, joints, 3)).copy()
    return TrainingWindow(
        prev_features=x,
        progress=(0,),
        current_action=0,
        next_positions=next_positions,
        next_offsets=0.1 * np.arange(1, n_f + 1),
    )


def _toy_group(seed=0, n=10, spread=4.0):
    """Well-separated scalar sequences; their DTW gram is comfortably PD."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, spread, n) + rng.normal(0, 0.01, n)
    ys = np.sin(xs)
    return [_window([x, x + 0.1, x + 0.2], y) for x, y in zip(xs, ys)]


FIXED = SpgpHyperparams(gamma=1.0, signal_var=1.0, noise_var=1e-16)


class TestInterpolation:
    def test_full_model_interpolates_targets(self):
        windows = _toy_group()
        model = spgp_train(windows, num_pseudo=len(windows), seed=0,
                           fixed_hyperparams=FIXED)
        for w in windows:
            mean, _ = spgp_predict(model, w.prev_features)
            np.testing.assert_allclose(mean, w.next_positions.ravel(), atol=1e-5)

    def test_zero_targets_give_zero_mean_and_prior_far_away(self):
        windows = [_window([x, x + 0.1, x + 0.2], 0.0) for x in np.linspace(0, 3, 8)]
        model = spgp_train(windows, num_pseudo=8, seed=0,
                           fixed_hyperparams=SpgpHyperparams(1.0, 1.0, 1e-6))
        mean, _ = spgp_predict(model, windows[3].prev_features)
        np.testing.assert_allclose(mean, 0.0, atol=1e-6)
        far = np.asarray([[50.0], [50.1], [50.2]])
        _, var = spgp_predict(model, far)
        prior = model.hyper.signal_var * model.y_scale[0] ** 2
        assert np.all(var >= 0.9 * prior)

    def test_sparse_close_to_full_on_heldout(self):
        rng = np.random.default_rng(3)
        xs = np.linspace(0, 6, 60)
        windows = [_window([x, x + 0.1, x + 0.2], np.sin(x) + rng.normal(0, 0.05))
                   for x in xs]
        hyper = SpgpHyperparams(gamma=1.0, signal_var=1.0, noise_var=0.01)
        full = spgp_train(windows, num_pseudo=60, seed=0, fixed_hyperparams=hyper)
        sparse = spgp_train(windows, num_pseudo=15, seed=0, fixed_hyperparams=hyper)
        test_xs = np.linspace(0.5, 5.5, 17)
        err_full, err_sparse = [], []
        for x in test_xs:
            q = np.asarray([[x], [x + 0.1], [x + 0.2]])
            mf, _ = spgp_predict(full, q)
            ms, _ = spgp_predict(sparse, q)
            err_full.append((mf[0] - np.sin(x)) ** 2)
            err_sparse.append((ms[0] - np.sin(x)) ** 2)
        rms_full = np.sqrt(np.mean(err_full))
        rms_sparse = np.sqrt(np.mean(err_sparse))
        assert rms_sparse <= 2.0 * rms_full + 1e-6

    def test_pseudo_count_clamped_with_warning(self):
        windows = _toy_group(n=5)
        with pytest.warns(UserWarning):
            model = spgp_train(windows, num_pseudo=50, seed=0, fixed_hyperparams=FIXED)
        assert model.num_pseudo == 5
        assert model.clamped

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            spgp_train([], num_pseudo=3, seed=0)


class TestNoisyInput:
    def _model(self):
        return spgp_train(_toy_group(n=12), num_pseudo=8, seed=1,
                          fixed_hyperparams=SpgpHyperparams(1.0, 1.0, 0.01))

    def test_sigma_zero_is_bit_identical(self):
        model = self._model()
        q = np.asarray([[1.3], [1.4], [1.5]])
        m0, v0 = spgp_predict(model, q)
        m1, v1 = spgp_predict_noisy(model, q, NoisyInputParams(sigma=0.0, velocity_limit=2.0))
        assert np.array_equal(m0, m1)
        assert np.array_equal(v0, v1)

    def test_variance_monotone_in_sigma_and_velocity(self):
        model = self._model()
        q = np.asarray([[2.0], [2.1], [2.2]])
        grid = np.linspace(0.0, 0.1, 5)
        for v_lim in np.linspace(0.0, 2.0, 5):
            variances = [
                spgp_predict_noisy(model, q, NoisyInputParams(s, v_lim))[1][0]
                for s in grid
            ]
            assert all(b >= a - 1e-15 for a, b in zip(variances, variances[1:]))
        for s in grid:
            variances = [
                spgp_predict_noisy(model, q, NoisyInputParams(s, v))[1][0]
                for v in np.linspace(0.0, 2.0, 5)
            ]
            assert all(b >= a - 1e-15 for a, b in zip(variances, variances[1:]))

    def test_variance_strictly_positive(self):
        model = self._model()
        for x in np.linspace(-2, 8, 13):
            q = np.asarray([[x], [x + 0.1], [x + 0.2]])
            _, var = spgp_predict_noisy(model, q, NoisyInputParams(0.01, 1.0))
            assert np.all(var > 0)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            NoisyInputParams(sigma=-0.1)
        with pytest.raises(ValueError):
            NoisyInputParams(sigma=0.1, velocity_limit=-1.0)


class TestArchive:
    def test_roundtrip_preserves_predictions(self):
        model = spgp_train(_toy_group(n=9), num_pseudo=6, seed=2,
                           fixed_hyperparams=SpgpHyperparams(1.0, 1.0, 0.01))
        clone = model_from_dict(model_to_dict(model))
        q = np.asarray([[1.0], [1.1], [1.2]])
        m0, v0 = spgp_predict(model, q)
        m1, v1 = spgp_predict(clone, q)
        np.testing.assert_allclose(m0, m1, rtol=1e-12)
        np.testing.assert_allclose(v0, v1, rtol=1e-12)

    def test_bad_archive_rejected(self):
        model = spgp_train(_toy_group(n=6), num_pseudo=4, seed=0,
                           fixed_hyperparams=FIXED)
        doc = model_to_dict(model)
        doc["y_scale"] = [0.0] * len(doc["y_scale"])
        with pytest.raises(ValueError):
            model_from_dict(doc)

    def test_grid_search_runs(self):
        model = spgp_train(_toy_group(n=10), num_pseudo=6, seed=3)
        assert model.hyper.gamma > 0
        assert model.hyper.noise_var > 0
