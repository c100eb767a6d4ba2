import numpy as np
import pytest

from csdl_aed.classifier import (
    ClassifierBank, FeatureScaler, LinearClassifier, TrainConfig, frame_label_sets, predict_frames,
    train_binary, train_ovr,
)
from csdl_aed.errors import ConfigError, DimensionError, FingerprintMismatch, FormatError
from csdl_aed.events import Event


def toy(seed, n=100):
    """Positives near (1, 0), negatives near (0, 1); margin 0.5 along x - y."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    base = np.where(y > 0, [[1.0], [0.0]], [[0.0], [1.0]])
    X = base + rng.uniform(-0.2, 0.2, (2, n))
    return X, y


@pytest.mark.parametrize("seed", range(5))
def test_separable_toy_zero_training_error(seed):
    X, y = toy(seed)
    clf = train_binary(X, y, TrainConfig(C=10.0, max_epochs=300))
    assert np.all(np.sign(clf.decision(X)) == y)


@pytest.mark.parametrize("seed", range(5))
def test_objective_trace_monotone(seed):
    X, y = toy(seed)
    t = np.array(train_binary(X, y, TrainConfig()).objective_trace)
    assert np.all(t[1:] <= t[:-1] + 1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_positive_weight_raises_recall(seed):
    # 1:9 imbalance, overlapping classes two standard deviations apart
    rng = np.random.default_rng(seed)
    n = 400
    y = np.where(np.arange(n) < n // 10, 1.0, -1.0)
    X = np.vstack([np.where(y > 0, 2.0, 0.0) + rng.normal(0, 1, n), rng.normal(0, 1, n)])

    def recall(w):
        clf = train_binary(X, y, TrainConfig(positive_class_weight=w, seed=0))
        return np.mean(clf.decision(X)[y > 0] > 0)

    assert recall(3.0) > recall(1.0)


def test_zero_feature_gets_zero_weight():
    X, y = toy(1)
    X = np.vstack([X, np.zeros(X.shape[1])])
    clf = train_binary(X, y, TrainConfig())
    assert abs(clf.weights[2]) < 1e-6


def test_deterministic():
    X, y = toy(2)
    a = train_binary(X, y, TrainConfig(seed=3))
    b = train_binary(X, y, TrainConfig(seed=3))
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(C=0)
    with pytest.raises(ConfigError):
        TrainConfig(positive_class_weight=-1)
    with pytest.raises(ValueError):
        TrainConfig(feature_scaling="zscore")


def bank_from(weights, biases, labels=("a", "b")):
    clfs = [LinearClassifier(np.asarray(w, float), b, lab) for w, b, lab in zip(weights, biases, labels)]
    return ClassifierBank(clfs, FeatureScaler("none"), list(labels))


def test_boundary_is_inactive():
    bank = bank_from([[1.0, -1.0]], [0.0], ["a"])
    roll = predict_frames(bank, np.array([[1.0, 2.0], [1.0, 1.0]]))
    assert roll.roll.tolist() == [[0, 1]]


def test_zero_column_follows_bias():
    bank = bank_from([[1.0, 1.0], [1.0, 1.0]], [0.5, -0.5])
    roll = predict_frames(bank, np.zeros((2, 3)))
    assert roll.roll.tolist() == [[1, 1, 1], [0, 0, 0]]


def test_predict_dimension_mismatch():
    bank = bank_from([[1.0, 1.0]], [0.0], ["a"])
    with pytest.raises(DimensionError):
        predict_frames(bank, np.zeros((3, 4)))


def test_ovr_on_toy_reproduces_labels_and_is_separable_per_event():
    X, y = toy(4)
    sets = [{"pos"} if v > 0 else {"neg"} for v in y]
    bank = train_ovr(X, sets, TrainConfig(C=10.0, max_epochs=300), labels=["pos", "neg"])
    roll = predict_frames(bank, X).roll
    assert np.array_equal(roll[0], (y > 0).astype(np.uint8))
    assert np.array_equal(roll[1], (y < 0).astype(np.uint8))


def test_ovr_classifiers_independent():
    X, y = toy(5)
    sets = [{"pos"} if v > 0 else {"neg"} for v in y]
    full = train_ovr(X, sets, labels=["pos", "neg"])
    one = train_ovr(X, sets, labels=["pos"])
    assert np.array_equal(full.classifiers[0].weights, one.classifiers[0].weights)
    assert np.array_equal(predict_frames(full, X).roll[0], predict_frames(one, X).roll[0])


def test_single_class_event_skipped():
    X, _ = toy(6)
    sets = [{"always"} for _ in range(X.shape[1])]
    bank = train_ovr(X, sets, labels=["always", "never"])
    assert bank.skipped == ["always", "never"]
    assert bank.classifiers == []
    assert predict_frames(bank, X).roll.sum() == 0


def test_label_count_mismatch():
    with pytest.raises(DimensionError):
        train_ovr(np.zeros((2, 5)), [set()] * 4)


def test_scaler_per_dim_max():
    X = np.array([[1.0, 4.0], [0.0, 0.0]])
    s = FeatureScaler.fit(X, "per_dim_max")
    assert np.allclose(s(X), [[0.25, 1.0], [0.0, 0.0]])
    assert np.allclose(FeatureScaler.fit(X, "log_compress")(X), np.log1p(X))


def test_json_roundtrip_and_fingerprint(tmp_path):
    X, y = toy(7)
    sets = [{"pos"} if v > 0 else set() for v in y]
    bank = train_ovr(X, sets, labels=["pos"], fingerprint="abc123")
    bank.save(tmp_path / "m.json")
    back = ClassifierBank.load(tmp_path / "m.json")
    assert np.array_equal(predict_frames(bank, X).roll, predict_frames(back, X).roll)
    back.check_fingerprint("abc123")
    with pytest.raises(FingerprintMismatch):
        back.check_fingerprint("zzz")


def test_malformed_model(tmp_path):
    (tmp_path / "m.json").write_text('{"labels": []}')
    with pytest.raises(FormatError):
        ClassifierBank.load(tmp_path / "m.json")
    (tmp_path / "n.json").write_text("{not json")
    with pytest.raises(FormatError):
        ClassifierBank.load(tmp_path / "n.json")


def test_frame_label_sets_uses_centres():
    sets = frame_label_sets([Event(0.1, 0.3, "x"), Event(0.25, 0.4, "y")], [0.05, 0.1, 0.28, 0.3, 0.35])
    assert sets == [set(), {"x"}, {"x", "y"}, {"y"}, {"y"}]
