"""Gradient-based training shared by the KHRONOS and MLP models.

Models are trained in min-max normalized input and output space with a
per-sample weighted mean-squared error, Adam, and a linear-warmup / cosine
learning-rate schedule. A model only needs ``parameters()``,
``_forward(X) -> (out, cache)`` and ``_backward(cache, G) -> grads``.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateWeightsError,
    DimensionError,
    TrainingDivergedError,
)
from .fields import NormStats

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 3e-3
    epochs: int = 1000
    batch_size: int | str = "full"
    w_hf: float = 10.0
    seed: int = 0
    warmup_fraction: float = 0.05
    bias_init: str = "mean"

    def __post_init__(self):
        if not self.peak_lr > 0:
            raise ConfigurationError("peak_lr must be positive")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ConfigurationError("epochs must be a nonnegative integer")
        if self.batch_size != "full" and (int(self.batch_size) != self.batch_size
                                          or self.batch_size < 1):
            raise ConfigurationError("batch_size must be a positive integer or 'full'")
        if not self.w_hf >= 0:
            raise ConfigurationError("w_hf must be nonnegative")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigurationError("warmup_fraction must lie in [0, 1)")
        if self.bias_init not in ("mean", "keep"):
            raise ConfigurationError("bias_init must be 'mean' or 'keep'")


def weighted_mse(pred, target, weights=None) -> float:
    """``sum_s w_s * mean_m (pred - target)**2 / sum_s w_s``."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {target.shape}")
    w = np.ones(pred.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (pred.shape[0],):
        raise DimensionError("one weight per sample required")
    if np.any(w < 0):
        raise DegenerateWeightsError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise DegenerateWeightsError("weights are all zero")
    per_sample = np.mean((pred - target) ** 2, axis=1)
    return float(w @ per_sample / total)


def _weighted_mse_grad(pred, target, w):
    diff = pred - target
    loss = float(w @ np.mean(diff * diff, axis=1) / w.sum())
    G = (2.0 / (pred.shape[1] * w.sum())) * w[:, None] * diff
    return loss, G


def lr_at(config: TrainConfig, step: int, total_steps: int) -> float:
    """Linear warmup to ``peak_lr`` then cosine decay to zero at ``total_steps``."""
    if total_steps <= 0:
        return config.peak_lr
    step = min(max(step, 0), total_steps)
    warmup = int(config.warmup_fraction * total_steps)
    if step < warmup:
        return config.peak_lr * step / warmup
    progress = (step - warmup) / max(total_steps - warmup, 1)
    return config.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.items()},
                   {k: np.zeros_like(a) for k, a in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for {name}", state.step)
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient shape mismatch for {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if lr != 0.0:
            params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class TrainResult:
    model: object
    losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0
    budget_exhausted: bool = False
    single_step: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.losses)

    def write_history(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "lr"])
            for epoch, (loss, lr) in enumerate(zip(self.losses, self.lrs), start=1):
                writer.writerow([epoch, repr(loss), repr(lr)])

    def summary(self, config: TrainConfig) -> dict:
        return {
            "final_loss": self.losses[-1] if self.losses else None,
            "initial_loss": self.losses[0] if self.losses else None,
            "epochs": self.epochs_run,
            "steps": self.steps,
            "seconds": self.seconds,
            "param_count": self.model.param_count(),
            "seed": config.seed,
            "budget_exhausted": self.budget_exhausted,
            "config": asdict(config),
        }

    def write_summary(self, path, config: TrainConfig):
        Path(path).write_text(json.dumps(self.summary(config), indent=2))


def train(model, X, Y, config: TrainConfig, weights=None, time_budget=None,
          clock: Callable[[], float] = time.perf_counter) -> TrainResult:
    """Train ``model`` in place on raw inputs ``X`` and targets ``Y``.

    Normalization statistics are fitted from ``X``/``Y`` when the model has
    none yet; on that first fit the output bias also starts at the weighted
    mean normalized target (``bias_init="mean"``), which keeps the rank modes
    from being spent on the constant offset. With ``time_budget`` (seconds on
    ``clock``) training stops at the first step boundary past the budget; at
    least one step always runs.
    The learning-rate schedule always spans ``config.epochs``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = X.shape[0]
    if n == 0:
        raise ConfigurationError("empty training set")
    if Y.shape[0] != n:
        raise DimensionError("X and Y must have the same number of samples")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise DegenerateWeightsError("weights must be nonnegative, one per sample, not all zero")

    if model.input_norm is None:
        model.input_norm = NormStats.fit(X)
    fresh = model.output_norm is None
    if fresh:
        model.output_norm = NormStats.fit(Y)
    Xn = model.input_norm.apply(X)
    Yn = model.output_norm.apply(Y)
    if fresh and config.bias_init == "mean" and config.epochs > 0:
        model.output_bias()[:] = w @ Yn / w.sum()

    batch = n if config.batch_size == "full" else min(int(config.batch_size), n)
    per_epoch = math.ceil(n / batch)
    total = config.epochs * per_epoch
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = AdamState.like(params)
    result = TrainResult(model)

    start = clock()
    step = 0
    for epoch in range(config.epochs):
        order = np.arange(n) if batch == n else rng.permutation(n)
        epoch_loss = seen = 0.0
        for b in range(per_epoch):
            idx = order[b * batch:(b + 1) * batch]
            pred, cache = model._forward(Xn[idx])
            loss, G = _weighted_mse_grad(pred, Yn[idx], w[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError("non-finite training loss", epoch + 1)
            lr = lr_at(config, step, total)
            adam_step(params, model._backward(cache, G), state, lr)
            epoch_loss += loss * w[idx].sum()
            seen += w[idx].sum()
            step += 1
            if time_budget is not None and clock() - start >= time_budget:
                result.budget_exhausted = True
                result.single_step = step == 1
                break
        # loss is measured before each update, so it lags the parameters by one step
        result.losses.append(epoch_loss / seen if seen > 0 else 0.0)
        result.lrs.append(lr)
        if result.budget_exhausted:
            break
    result.steps = step
    result.seconds = clock() - start
    logger.debug("trained %s for %d steps in %.2fs", getattr(model, "kind", "model"),
                 step, result.seconds)
    return result


def grid_sweep(space: dict, evaluate: Callable[[dict], float], budget: int | None = None,
               seed: int = 0, maximize: bool = False) -> list:
    """Score every Cartesian combination of ``space`` (or a seeded subsample).

    Returns ``(config, score)`` pairs sorted best first. Ties keep
    enumeration order.
    """
    if not space:
        raise ConfigurationError("empty search space")
    for axis, values in space.items():
        if len(values) == 0:
            raise ConfigurationError(f"axis {axis!r} has no candidate values")
    names = list(space)
    combos = [dict(zip(names, values)) for values in itertools.product(*space.values())]
    if budget is not None and budget < len(combos):
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(combos), size=budget, replace=False))
        combos = [combos[i] for i in keep]
    scored = [(cfg, float(evaluate(cfg))) for cfg in combos]
    return sorted(scored, key=lambda item: -item[1] if maximize else item[1])
