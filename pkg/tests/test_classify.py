import numpy as np
import pytest

from intentplan.classify import (
    ImportVectorClassifier,
    IvmParams,
    ivm_classify,
    ivm_train,
    softmax,
)
from intentplan.motion import TrainingWindow


def _window(seq, action):
    seq = np.asarray(seq, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    return TrainingWindow(
        prev_features=seq,
        progress=(0,),
        current_action=action,
        next_positions=np.zeros((1, 1, 3)),
        next_offsets=np.array([0.1]),
    )


def _two_blob_windows(rng, n_per=12, sep=4.0):
    out = []
    for k, center in enumerate((-sep / 2, sep / 2)):
        for _ in range(n_per):
            base = center + rng.normal(0, 0.3)
            out.append(_window([base, base + 0.1, base + 0.2], k))
    return out


class TestSoftmax:
    def test_uniform_when_equal(self):
        np.testing.assert_allclose(softmax(np.zeros(4)), 0.25)

    def test_two_class_closed_form(self):
        p = softmax(np.array([1.0, 0.0]))
        e = np.exp(1.0)
        np.testing.assert_allclose(p, [e / (e + 1), 1 / (e + 1)], rtol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            s = rng.normal(size=5)
            np.testing.assert_allclose(softmax(s), softmax(s + 17.3), atol=1e-12)


class TestIvmTrain:
    def test_single_class_degenerate(self):
        windows = [_window([0.0, 0.1], 3) for _ in range(5)]
        clf = ivm_train({(0,): windows}, IvmParams(), 0)[(0,)]
        probs = ivm_classify(clf, np.array([[5.0], [5.1]]))
        assert probs == {3: 1.0}

    def test_mirror_symmetric_classes(self):
        rng = np.random.default_rng(1)
        windows = []
        for _ in range(8):
            base = rng.uniform(1.0, 2.0)
            seq = [base, base + 0.1, base + 0.2]
            windows.append(_window(seq, 1))
            windows.append(_window([-v for v in seq], 0))
        clf = ivm_train({(0,): windows}, IvmParams(max_imports=16, reg_weight=0.01), 0)[(0,)]
        probs = ivm_classify(clf, np.zeros((3, 1)))
        assert abs(probs[0] - 0.5) < 1e-6
        assert abs(probs[1] - 0.5) < 1e-6

    def test_well_separated_accuracy(self):
        rng = np.random.default_rng(2)
        windows = _two_blob_windows(rng)
        clf = ivm_train({(0,): windows}, IvmParams(), 0)[(0,)]
        correct = 0
        for w in windows:
            probs = ivm_classify(clf, w.prev_features)
            correct += max(probs, key=probs.get) == w.current_action
        assert correct / len(windows) >= 0.95

    def test_import_budget_respected(self):
        rng = np.random.default_rng(3)
        windows = _two_blob_windows(rng, n_per=30)
        clf = ivm_train({(0,): windows}, IvmParams(max_imports=7), 0)[(0,)]
        assert clf.import_points.shape[0] <= 7

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            ivm_train({(0,): []}, IvmParams(), 0)
        with pytest.raises(ValueError):
            ivm_train({}, IvmParams(), 0)


class TestIvmClassify:
    def _clf(self):
        rng = np.random.default_rng(4)
        return ivm_train({(0,): _two_blob_windows(rng)}, IvmParams(), 0)[(0,)]

    def test_distribution_sums_to_one(self):
        clf = self._clf()
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.normal(0, 3, size=(3, 1))
            probs = ivm_classify(clf, x)
            assert abs(sum(probs.values()) - 1.0) < 1e-12
            assert all(p >= 0 for p in probs.values())

    def test_wrong_window_shape_rejected(self):
        clf = self._clf()
        with pytest.raises(ValueError):
            ivm_classify(clf, np.zeros((5, 1)))
        with pytest.raises(ValueError):
            ivm_classify(clf, np.zeros((3, 2)))

    def test_alpha_shift_invariance(self):
        clf = self._clf()
        shifted = ImportVectorClassifier(
            import_points=clf.import_points,
            alpha=clf.alpha + 3.7,  # adds a constant to every class score
            classes=clf.classes,
            gamma=clf.gamma,
            band=clf.band,
            window_shape=clf.window_shape,
        )
        x = np.array([[0.3], [0.4], [0.5]])
        a = ivm_classify(clf, x)
        b = ivm_classify(shifted, x)
        for k in a:
            assert abs(a[k] - b[k]) < 1e-9
