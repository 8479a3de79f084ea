import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eventseg.core import DatasetStats
from eventseg.lstm import (
    LstmModel,
    TrainingConfig,
    TrainingDiverged,
    WindowBatch,
    backward,
    compute_target_weight,
    forward,
    loss,
    make_targets,
    train,
)

from .oracles import finite_difference_gradients, reference_forward


def random_model(rng, D, H, L):
    m = LstmModel.init(D, H, L, seed=int(rng.integers(1 << 30)))
    # break the init symmetry of biases so every gate path is exercised
    m.b[:] = rng.normal(scale=0.5, size=m.b.shape)
    m.by[:] = rng.normal(size=2)
    return m


def random_window(rng, D, L, omega=2.0, masked_tail=0):
    X = rng.normal(size=(L, D))
    T = make_targets(rng.random(L) < 0.3, omega)
    M = np.ones(L, dtype=bool)
    if masked_tail:
        M[-masked_tail:] = False
    return X, T, M


# -- target weight --------------------------------------------------------


def test_target_weight_paper_counts():
    assert compute_target_weight(DatasetStats(6843, 435)) == pytest.approx(3.838, abs=1e-3)


def test_target_weight_trivial_cases():
    assert compute_target_weight(DatasetStats(100, 50)) == 1.0
    assert compute_target_weight(DatasetStats(10, 10)) == 0.0
    with pytest.raises(ZeroDivisionError):
        compute_target_weight(DatasetStats(10, 0))


@given(st.integers(1, 10**6).flatmap(lambda b: st.tuples(st.integers(b, 10**7), st.just(b))))
def test_target_weight_matches_arithmetic(pair):
    total, bnd = pair
    assert math.isclose(compute_target_weight(DatasetStats(total, bnd)), ((total - bnd) / bnd) ** 0.5, abs_tol=1e-9)


# -- forward ----------------------------------------------------------------


def test_zero_model_outputs_bias():
    m = LstmModel.zeros(4, 3, 5)
    m.by[:] = [0.25, -1.5]
    out = forward(m, np.random.default_rng(0).normal(size=(5, 4)))
    assert np.all(out == np.array([0.25, -1.5]))


def test_forward_deterministic():
    m = LstmModel.init(4, 3, 5, seed=7)
    X = np.random.default_rng(1).normal(size=(5, 4))
    assert np.array_equal(forward(m, X), forward(LstmModel.init(4, 3, 5, seed=7), X))


def test_forward_matches_reference():
    rng = np.random.default_rng(11)
    m = random_model(rng, 4, 3, 5)
    X = rng.normal(size=(5, 4))
    np.testing.assert_allclose(forward(m, X), reference_forward(m, X), rtol=0, atol=1e-10)


def test_forward_batch_equals_single():
    rng = np.random.default_rng(2)
    m = random_model(rng, 5, 4, 6)
    X = rng.normal(size=(3, 6, 5))
    batched = forward(m, X)
    for k in range(3):
        np.testing.assert_allclose(batched[k], forward(m, X[k]), atol=1e-14)


def test_forward_rejects_bad_input():
    m = LstmModel.init(4, 3, 5)
    with pytest.raises(ValueError, match="width"):
        forward(m, np.zeros((5, 3)))
    X = np.zeros((5, 4))
    X[2, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        forward(m, X)


# -- loss -------------------------------------------------------------------


def test_loss_examples():
    T = make_targets(np.array([True, False]), 3.0)
    assert loss(T, T, np.ones(2, bool)) == 0.0
    assert loss(np.zeros((1, 2)), make_targets(np.array([True]), 3.0), np.ones(1, bool)) == 9.0
    assert loss(np.ones((4, 2)) * 7, T.repeat(2, axis=0), np.zeros(4, bool)) == 0.0


def test_targets():
    T = make_targets(np.array([True, False]), 3.5)
    assert T.tolist() == [[3.5, 0.0], [0.0, 1.0]]


# -- backward ---------------------------------------------------------------


def test_gradient_zero_at_zero_loss():
    m = LstmModel.zeros(3, 2, 4)
    m.by[:] = [0.0, 1.0]
    X = np.random.default_rng(0).normal(size=(4, 3))
    value, grads = backward(m, X, make_targets(np.zeros(4, bool), 1.0), np.ones(4, bool))
    assert value == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    m = random_model(rng, 4, 3, 5)
    X, T, M = random_window(rng, 4, 5)
    _, grads = backward(m, X, T, M)
    numeric = finite_difference_gradients(m, X, T, M, h=1e-5)
    for k in grads:
        rel = np.abs(grads[k] - numeric[k]) / np.maximum(np.abs(grads[k]) + np.abs(numeric[k]), 1e-8)
        assert rel.max() < 1e-4, k


@pytest.mark.parametrize("omega", [1.0, 2.0])
def test_gradient_boundary_only_window_tracks_omega(omega):
    rng = np.random.default_rng(9)
    m = random_model(rng, 3, 2, 4)
    X = rng.normal(size=(4, 3))
    T = make_targets(np.ones(4, bool), omega)
    M = np.ones(4, bool)
    _, grads = backward(m, X, T, M)
    numeric = finite_difference_gradients(m, X, T, M, h=1e-5)
    np.testing.assert_allclose(grads["by"], numeric["by"], rtol=1e-6)
    # d/d by0 of sum_t (y_t0 - omega)^2 is linear in omega with slope -2L
    Y = forward(m, X)
    assert grads["by"][0] == pytest.approx(2 * np.sum(Y[:, 0] - omega))


def test_padding_is_neutral():
    rng = np.random.default_rng(3)
    m = random_model(rng, 4, 3, 5)
    X, T, M = random_window(rng, 4, 5)
    Xp = np.vstack([X, np.zeros((3, 4))])
    Tp = np.vstack([T, make_targets(np.zeros(3, bool), 2.0)])
    Mp = np.concatenate([M, np.zeros(3, bool)])
    v1, g1 = backward(m, X, T, M)
    v2, g2 = backward(m, Xp, Tp, Mp)
    # only summation order differs
    assert v2 == pytest.approx(v1, rel=1e-13)
    for k in g1:
        np.testing.assert_allclose(g2[k], g1[k], rtol=1e-12, atol=1e-14)


# -- training ---------------------------------------------------------------


def overfit_samples():
    rng = np.random.default_rng(0)
    X, T, M = random_window(rng, 4, 6, omega=2.0)
    return WindowBatch(np.repeat(X[None], 20, 0), np.repeat(T[None], 20, 0), np.repeat(M[None], 20, 0))


def test_overfit_one_window():
    samples = overfit_samples()
    model = LstmModel.init(4, 8, 6, seed=1)
    cfg = TrainingConfig(learning_rate=1e-2, epochs=200, batch_size=20, seed=0)
    res = train(model, samples, cfg)
    assert res.final_cost < 0.01 * res.initial_cost


def test_zero_learning_rate_keeps_parameters():
    samples = overfit_samples()
    model = LstmModel.init(4, 3, 6, seed=1)
    res = train(model, samples, TrainingConfig(learning_rate=0.0, epochs=3, batch_size=7))
    for k, v in model.params().items():
        np.testing.assert_array_equal(res.model.params()[k], v)


@pytest.mark.parametrize("optimizer", ["adam", "sgd"])
def test_training_deterministic(optimizer):
    samples = overfit_samples()
    cfg = TrainingConfig(learning_rate=1e-2, epochs=5, batch_size=6, seed=4, optimizer=optimizer)
    a = train(LstmModel.init(4, 3, 6, seed=1), samples, cfg)
    b = train(LstmModel.init(4, 3, 6, seed=1), samples, cfg)
    for k in a.model.params():
        np.testing.assert_array_equal(a.model.params()[k], b.model.params()[k])
    assert a.cost_curve == b.cost_curve
    assert a.final_cost <= a.initial_cost


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_divergence_names_epoch():
    samples = overfit_samples()
    cfg = TrainingConfig(learning_rate=1e200, epochs=3, batch_size=20, optimizer="sgd", clip_norm=None)
    with pytest.raises(TrainingDiverged, match=r"epoch \d+"):
        train(LstmModel.init(4, 3, 6, seed=1), samples, cfg)


def test_early_stopping_restores_best():
    samples = overfit_samples()
    scores = iter([0.5, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1])
    cfg = TrainingConfig(learning_rate=1e-2, epochs=10, batch_size=20, patience=2)
    res = train(LstmModel.init(4, 3, 6, seed=1), samples, cfg, validate=lambda m: next(scores))
    assert res.best_epoch == 2
    assert res.stopped_early and len(res.cost_curve) == 4


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(omega=-1)
    with pytest.raises(ValueError):
        TrainingConfig(learning_rate=-0.1)
    with pytest.raises(ValueError):
        TrainingConfig(optimizer="rmsprop")
    with pytest.raises(ValueError):
        train(LstmModel.init(2, 2, 3), WindowBatch(np.zeros((0, 3, 2)), np.zeros((0, 3, 2)), np.zeros((0, 3))),
              TrainingConfig())


# -- persistence ------------------------------------------------------------


def test_model_file_roundtrip(tmp_path):
    m = LstmModel.init(25, 6, 60, seed=3, augmentation="people+light")
    m.omega = 3.1
    m.save(tmp_path / "m.json")
    back = LstmModel.load(tmp_path / "m.json")
    assert back.augmentation == "people+light" and back.omega == 3.1
    for k in m.params():
        np.testing.assert_array_equal(back.params()[k], m.params()[k])
    X = np.random.default_rng(0).random((60, 25))
    assert np.array_equal(forward(back, X), forward(m, X))


def test_model_file_rejects_other_formats(tmp_path):
    d = LstmModel.init(3, 2, 4).to_dict()
    d["version"] = 99
    with pytest.raises(ValueError):
        LstmModel.from_dict(d)
    d = LstmModel.init(3, 2, 4).to_dict()
    d["hidden_width"] = 5
    with pytest.raises(ValueError):
        LstmModel.from_dict(d)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(2, 6), st.integers(0, 10**6))
def test_gradient_property(D, H, L, seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, D, H, L)
    X, T, M = random_window(rng, D, L, omega=float(rng.uniform(0, 4)))
    _, grads = backward(m, X, T, M)
    numeric = finite_difference_gradients(m, X, T, M)
    for k in grads:
        err = np.abs(grads[k] - numeric[k]) / np.maximum(np.abs(grads[k]) + np.abs(numeric[k]), 1e-8)
        assert err.max() < 1e-4
