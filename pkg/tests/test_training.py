import numpy as np
import pytest

from khronos_mf.baseline import MlpModel
from khronos_mf.errors import (
    ConfigurationError,
    DegenerateWeightsError,
    DimensionError,
    TrainingDivergedError,
)
from khronos_mf.khronos import KernelConfig, KhronosModel
from khronos_mf.training import (
    AdamState,
    TrainConfig,
    adam_step,
    grid_sweep,
    lr_at,
    train,
    weighted_mse,
)


class FakeClock:
    """Advances by ``tick`` seconds on every read."""

    def __init__(self, tick):
        self.t = 0.0
        self.tick = tick

    def __call__(self):
        self.t += self.tick
        return self.t


def test_weighted_mse_examples():
    assert weighted_mse(np.ones((3, 2)), np.ones((3, 2))) == 0.0
    assert weighted_mse([[2.0]], [[0.0]], [1.0]) == 4.0
    assert weighted_mse([[1.0], [0.0]], [[0.0], [0.0]], [10.0, 1.0]) == pytest.approx(10 / 11)


def test_weighted_mse_errors():
    with pytest.raises(DegenerateWeightsError):
        weighted_mse([[1.0]], [[0.0]], [0.0])
    with pytest.raises(DimensionError):
        weighted_mse([[1.0, 2.0]], [[0.0]])


def test_lr_schedule():
    cfg = TrainConfig(peak_lr=0.01, warmup_fraction=0.1)
    total = 1000
    assert lr_at(cfg, 0, total) == 0.0
    assert lr_at(cfg, 100, total) == 0.01
    assert abs(lr_at(cfg, total, total)) <= 1e-12
    assert lr_at(cfg, 550, total) == pytest.approx(0.005, abs=1e-9)
    values = [lr_at(cfg, s, total) for s in range(100, total + 1)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_adam_zero_gradient_leaves_params():
    params = {"w": np.array([1.0, -2.0])}
    state = AdamState.like(params)
    adam_step(params, {"w": np.zeros(2)}, state, 0.1)
    np.testing.assert_array_equal(params["w"], [1.0, -2.0])


def test_adam_first_step_is_sign_step():
    params = {"w": np.zeros(3)}
    g = np.array([5.0, -3.0, 100.0])
    adam_step(params, {"w": g}, AdamState.like(params), 0.01)
    np.testing.assert_allclose(params["w"], -0.01 * np.sign(g), rtol=1e-6)


def test_adam_second_moment_grows():
    params = {"w": np.zeros(1)}
    state = AdamState.like(params)
    adam_step(params, {"w": np.ones(1)}, state, 0.01)
    v1 = state.v["w"].copy()
    adam_step(params, {"w": np.ones(1)}, state, 0.01)
    assert state.v["w"][0] > v1[0]


def test_adam_rejects_nonfinite():
    params = {"w": np.zeros(1)}
    with pytest.raises(TrainingDivergedError):
        adam_step(params, {"w": np.array([np.nan])}, AdamState.like(params), 0.1)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(peak_lr=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(epochs=-1)
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(bias_init="zero")


def toy_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 2))
    Y = np.column_stack([np.sin(3 * X[:, 0]) * X[:, 1], X[:, 0] + X[:, 1] ** 2])
    return X, Y


def test_zero_epochs_leaves_model_unchanged():
    X, Y = toy_data()
    model = KhronosModel.create(KernelConfig(2, 5, 2, 2), seed=0)
    before = model.params.flatten()
    result = train(model, X, Y, TrainConfig(epochs=0))
    np.testing.assert_array_equal(model.params.flatten(), before)
    assert result.steps == 0 and result.losses == []


def test_constant_target_converges():
    X, _ = toy_data()
    Y = np.full((X.shape[0], 2), 3.0)
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2), seed=0)
    result = train(model, X, Y, TrainConfig(peak_lr=3e-2, epochs=500, bias_init="keep"))
    assert result.losses[-1] < 1e-4 * result.losses[0]
    np.testing.assert_allclose(model.predict(X), 3.0, atol=1e-2)


def test_training_reduces_loss_for_both_families():
    X, Y = toy_data()
    for model in (KhronosModel.create(KernelConfig(2, 8, 3, 2), seed=0),
                  MlpModel.create((2, 16, 16, 2), seed=0)):
        result = train(model, X, Y, TrainConfig(peak_lr=1e-2, epochs=200))
        assert result.losses[-1] < 0.2 * result.losses[0]


def test_training_is_deterministic():
    X, Y = toy_data()
    runs = []
    for _ in range(2):
        model = KhronosModel.create(KernelConfig(2, 5, 2, 2), seed=4)
        runs.append(train(model, X, Y, TrainConfig(epochs=50, batch_size=32, seed=1)).losses)
    assert runs[0] == runs[1]


def test_minibatch_step_count():
    X, Y = toy_data(n=100)
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2))
    result = train(model, X, Y, TrainConfig(epochs=3, batch_size=30))
    assert result.steps == 12


def test_time_budget_with_fake_clock():
    X, Y = toy_data()
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2))
    result = train(model, X, Y, TrainConfig(epochs=1000), time_budget=10.0, clock=FakeClock(1.0))
    assert result.budget_exhausted
    assert result.steps == 10
    assert not result.single_step


def test_tiny_budget_runs_one_step():
    X, Y = toy_data()
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2))
    result = train(model, X, Y, TrainConfig(epochs=1000), time_budget=1e-9, clock=FakeClock(1.0))
    assert result.steps == 1 and result.single_step


def test_hf_weights_pull_fit():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(40, 1))
    Y = np.zeros((40, 1))
    Y[:20] = 1.0  # two conflicting label sets on the same inputs
    X[20:] = X[:20]
    heavy = np.where(np.arange(40) < 20, 10.0, 1.0)
    model = KhronosModel.create(KernelConfig(1, 3, 1, 1), seed=0)
    train(model, X, Y, TrainConfig(peak_lr=1e-2, epochs=400), weights=heavy)
    assert model.predict(X[:20]).mean() == pytest.approx(10 / 11, abs=0.05)


def test_divergence_raises_with_epoch():
    X, Y = toy_data()
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2))
    model.params.head[:] = np.inf
    with pytest.raises(TrainingDivergedError) as info:
        train(model, X, Y, TrainConfig(epochs=5))
    assert info.value.epoch == 1


def test_train_input_errors():
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2))
    with pytest.raises(DimensionError):
        train(model, np.zeros((3, 2)), np.zeros((4, 2)), TrainConfig(epochs=1))
    with pytest.raises(DegenerateWeightsError):
        train(model, np.zeros((3, 2)), np.zeros((3, 2)), TrainConfig(epochs=1), weights=np.zeros(3))


def test_history_and_summary(tmp_path):
    X, Y = toy_data()
    model = KhronosModel.create(KernelConfig(2, 3, 2, 2))
    cfg = TrainConfig(epochs=5)
    result = train(model, X, Y, cfg)
    result.write_history(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss,lr" and len(lines) == 6
    summary = result.summary(cfg)
    assert summary["epochs"] == 5 and summary["param_count"] == model.param_count()


def test_grid_sweep_cartesian():
    space = {"a": [1, 2, 3], "b": [10, 20, 30, 40]}
    calls = []
    scored = grid_sweep(space, lambda c: calls.append(c) or c["a"] * c["b"])
    assert len(calls) == 12
    assert scored[0] == ({"a": 1, "b": 10}, 10.0)


def test_grid_sweep_khronos_lf_axes():
    space = {"k": [2, 3, 4, 5], "r": [2, 4, 6, 8], "lr": [1e-3, 3e-3, 1e-2, 3e-2],
             "epochs": [250, 500, 1000, 2000]}
    assert len(grid_sweep(space, lambda c: 0.0)) == 256


def test_grid_sweep_budget_and_errors():
    space = {"a": list(range(10)), "b": list(range(10))}
    assert len(grid_sweep(space, lambda c: 0.0, budget=7, seed=1)) == 7
    with pytest.raises(ConfigurationError):
        grid_sweep({"a": []}, lambda c: 0.0)
    best = grid_sweep({"a": [1, 5, 3]}, lambda c: c["a"], maximize=True)
    assert [c["a"] for c, _ in best] == [5, 3, 1]
