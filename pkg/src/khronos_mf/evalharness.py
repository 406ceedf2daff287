"""Metrics, k-fold protocol, budget experiments and result tables."""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DimensionError, UndefinedVarianceError
from .baseline import LF_HIDDEN
from .mfpipe import (BenchmarkData, assemble_lf_input, build_cases, fit_surrogate, make_model,
                     predict_mf)
from .training import TrainConfig, train

R2_EDGES = (0.7, 0.8, 0.9)

# Single-stage LF settings for the budget experiment. KHRONOS: best of a
# budget-aware validation sweep on a train-split holdout. MLP: the selected
# LF MLP settings unchanged.
BUDGET_PRESETS = {
    "khronos": ({"k": 8, "r": 10}, TrainConfig(peak_lr=3e-2, epochs=3000)),
    "mlp": ({"hidden": LF_HIDDEN}, TrainConfig(peak_lr=3e-3, epochs=3500)),
}
# size knobs for the parameter sweep: KHRONOS rank at k=3, MLP width at depth 4
SWEEP_KNOBS = {
    "khronos": (1, 2, 4, 8, 16),
    "mlp": (4, 8, 16, 32),
}
SWEEP_TRAIN = {
    "khronos": TrainConfig(peak_lr=1e-2, epochs=1000),
    "mlp": TrainConfig(peak_lr=3e-3, epochs=1000),
}


# -- metrics ----------------------------------------------------------------------

def _pair(y, y_hat):
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise DimensionError(f"shape mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size < 2:
        raise DimensionError("need at least two values")
    return y, y_hat


def r_squared(y, y_hat) -> float:
    """Coefficient of determination over all entries, pooled."""
    y, y_hat = _pair(y, y_hat)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0.0:
        raise UndefinedVarianceError("R^2 is undefined for a constant target")
    return float(1.0 - np.sum((y - y_hat) ** 2) / ss_tot)


def nrmse(y, y_hat) -> float:
    """Root-mean-square error divided by the target range."""
    y, y_hat = _pair(y, y_hat)
    span = y.max() - y.min()
    if span == 0.0:
        raise UndefinedVarianceError("NRMSE is undefined for a zero-range target")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)) / span)


def per_case_r2(Y, Y_hat) -> np.ndarray:
    """R^2 of each row (case) separately."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Y_hat = np.atleast_2d(np.asarray(Y_hat, dtype=float))
    if Y.shape != Y_hat.shape:
        raise DimensionError("shape mismatch")
    return np.array([r_squared(y, p) for y, p in zip(Y, Y_hat)])


def bin_r2(scores, edges=R2_EDGES) -> tuple:
    """Counts below ``edges[0]``, in each ``[edges[i], edges[i+1])`` and above the last."""
    scores = np.asarray(scores, dtype=float).ravel()
    if not np.all(np.isfinite(scores)):
        raise ConfigurationError("scores must be finite")
    if list(edges) != sorted(edges):
        raise ConfigurationError("edges must be ascending")
    bins = np.searchsorted(np.asarray(edges, dtype=float), scores, side="right")
    return tuple(int(c) for c in np.bincount(bins, minlength=len(edges) + 1))


def fraction_above(counts) -> float:
    """Share of scores at or above the first edge."""
    n = sum(counts)
    return 1.0 - counts[0] / n if n else 0.0


# -- folds ------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    K: int
    seed: int
    permutation: np.ndarray
    membership: np.ndarray    # fold id per case

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.membership == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.membership != fold)

    @property
    def sizes(self) -> list:
        return np.bincount(self.membership, minlength=self.K).tolist()


def kfold_plan(n_cases: int, K: int = 5, seed: int = 0) -> FoldPlan:
    """Seeded shuffle cut into ``K`` contiguous chunks; the first
    ``n_cases % K`` chunks are one larger."""
    if K < 2:
        raise ConfigurationError("K must be at least 2")
    if n_cases < K:
        raise ConfigurationError(f"need at least K={K} cases, got {n_cases}")
    perm = np.random.default_rng(seed).permutation(n_cases)
    membership = np.empty(n_cases, dtype=int)
    for fold, chunk in enumerate(np.array_split(perm, K)):
        membership[chunk] = fold
    return FoldPlan(K, seed, perm, membership)


# -- records and tables -------------------------------------------------------------

@dataclass
class EvalRecord:
    model_id: str
    fold: int
    r2: float
    nrmse: float
    param_count: int
    train_seconds: float
    infer_ms_per_sample: float
    config_digest: str
    r2_per_case_mean: float = float("nan")
    bins: tuple = (0, 0, 0, 0)

    def __post_init__(self):
        if self.r2 > 1.0:
            raise ConfigurationError("R^2 cannot exceed 1")
        if self.param_count < 1 or self.train_seconds < 0 or self.infer_ms_per_sample < 0:
            raise ConfigurationError("invalid record")

    def row(self) -> dict:
        out = asdict(self)
        out["bins"] = "/".join(str(c) for c in self.bins)
        return out


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def aggregate(records) -> dict:
    """Mean of every numeric metric per model id; bins are summed."""
    out = {}
    for model_id in dict.fromkeys(r.model_id for r in records):
        rows = [r for r in records if r.model_id == model_id]
        summary = {key: float(np.mean([getattr(r, key) for r in rows]))
                   for key in ("r2", "nrmse", "param_count", "train_seconds",
                               "infer_ms_per_sample", "r2_per_case_mean")}
        bins = tuple(int(sum(col)) for col in zip(*(r.bins for r in rows)))
        summary.update(folds=len(rows), bins=list(bins), fraction_r2_above_0_7=fraction_above(bins),
                       per_fold_r2=[r.r2 for r in rows])
        out[model_id] = summary
    return out


def write_records_csv(path, records):
    rows = [r.row() for r in records]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["model_id"])
        writer.writeheader()
        writer.writerows(rows)


def write_summary_json(path, records, extra=None):
    Path(path).write_text(json.dumps({**(extra or {}), "models": aggregate(records)}, indent=2))


def write_curve_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])


def time_inference(predict: Callable, X, repeats: int = 5, clock=time.perf_counter) -> float:
    """Median wall time of ``repeats`` passes over ``X``, in ms per sample."""
    X = np.atleast_2d(X)
    times = []
    for _ in range(repeats):
        start = clock()
        predict(X)
        times.append(clock() - start)
    return 1000.0 * statistics.median(times) / X.shape[0]


# -- k-fold evaluation of the two-stage pipeline ------------------------------------

def _eval_fold(args):
    data, plan, fold, hf_ratio, seed, family, fit_kwargs = args
    ds = build_cases(data, hf_ratio, seed=seed, test_idx=plan.test_indices(fold))
    start = time.perf_counter()
    fit = fit_surrogate(ds, family, seed=seed, **fit_kwargs)
    seconds = time.perf_counter() - start
    te = ds.test_idx
    x = assemble_lf_input(data.features[te], data.U[te], data.aoa[te], fit.surrogate.input_stats)
    y = data.cp_hf[te] if np.all(data.hf_available[te]) else data.cp_lf[te]
    pred = predict_mf(fit.surrogate, x)
    scores = per_case_r2(y, pred)
    n_params = fit.surrogate.lf_model.param_count()
    if fit.surrogate.delta_model is not None:
        n_params += fit.surrogate.delta_model.param_count()
    digest = config_digest({"family": family, "hf_ratio": hf_ratio, "seed": seed, **fit_kwargs})
    return EvalRecord(family, fold, r_squared(y, pred), nrmse(y, pred), n_params, seconds,
                      time_inference(lambda X: predict_mf(fit.surrogate, X), x), digest,
                      float(scores.mean()), bin_r2(scores))


def kfold_evaluate(data: BenchmarkData, family="khronos", hf_ratio=0.0, K=5, seed=0,
                   jobs=1, **fit_kwargs) -> list:
    """Retrain the two-stage surrogate on each of ``K`` folds and score the held-out fold
    against HF labels (LF labels where HF is missing).

    Records come back in fold order regardless of ``jobs``.
    """
    plan = kfold_plan(data.n_cases, K, seed)
    tasks = [(data, plan, fold, hf_ratio, seed, family, fit_kwargs) for fold in range(K)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_eval_fold, tasks))
    return [_eval_fold(t) for t in tasks]


# -- budget experiments -------------------------------------------------------------

@dataclass
class SplitTask:
    """A fixed train/test split for a single-stage regression."""

    X_train: np.ndarray
    Y_train: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray

    @classmethod
    def lf_from_benchmark(cls, data: BenchmarkData, seed=0, test_fraction=0.2) -> "SplitTask":
        """Predict LF Cp from ``[features, U, AoA]`` on the benchmark's split."""
        ds = build_cases(data, 0.0, seed=seed, test_fraction=test_fraction)
        X = np.column_stack([data.features, data.U, data.aoa])
        tr, te = ds.train_idx, ds.test_idx
        return cls(X[tr], data.cp_lf[tr], X[te], data.cp_lf[te])


@dataclass
class CurvePoint:
    x: float
    error: float
    param_count: int
    epochs: int
    steps: int
    seconds: float
    single_step: bool = False
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "extra"} | self.extra


def budget_run(factory: Callable[[], object], task: SplitTask, budgets, config: TrainConfig,
               clock: Callable[[], float] = time.perf_counter) -> list:
    """Train a fresh model per budget (seconds on ``clock``) and record test ``1 - R^2``.

    The learning-rate schedule spans ``config.epochs`` for every budget.
    Points where the budget ran out after a single step are flagged.
    """
    budgets = [float(b) for b in budgets]
    if not budgets or any(b <= 0 for b in budgets) or budgets != sorted(budgets):
        raise ConfigurationError("budgets must be positive and ascending")
    curve = []
    for budget in budgets:
        model = factory()
        result = train(model, task.X_train, task.Y_train, config, time_budget=budget, clock=clock)
        error = 1.0 - r_squared(task.Y_test, model.predict(task.X_test))
        curve.append(CurvePoint(budget, error, model.param_count(), result.epochs_run,
                                result.steps, result.seconds, result.single_step))
    return curve


def param_sweep_run(factory: Callable[[object], object], knobs, task: SplitTask,
                    config: TrainConfig) -> list:
    """Train ``factory(knob)`` for each knob with a fixed protocol; the x value is
    the instantiated model's true parameter count."""
    knobs = list(knobs)
    if not knobs:
        raise ConfigurationError("knob list is empty")
    curve = []
    for knob in knobs:
        model = factory(knob)
        result = train(model, task.X_train, task.Y_train, config)
        error = 1.0 - r_squared(task.Y_test, model.predict(task.X_test))
        curve.append(CurvePoint(model.param_count(), error, model.param_count(),
                                result.epochs_run, result.steps, result.seconds,
                                extra={"knob": str(knob)}))
    return curve


def budget_curves(task: SplitTask, budgets, families=("khronos", "mlp"), seed=0,
                  clock: Callable[[], float] = time.perf_counter) -> dict:
    """:func:`budget_run` for each family with its :data:`BUDGET_PRESETS` entry."""
    n_in, n_out = task.X_train.shape[1], task.Y_train.shape[1]
    curves = {}
    for family in families:
        hyper, config = BUDGET_PRESETS[family]
        config = TrainConfig(**{**asdict(config), "seed": seed})
        curves[family] = budget_run(lambda: make_model(family, n_in, n_out, seed, **hyper),
                                    task, budgets, config, clock)
    return curves


def sweep_curves(task: SplitTask, families=("khronos", "mlp"), knobs=None, seed=0) -> dict:
    """:func:`param_sweep_run` over KHRONOS rank (k=3) and MLP hidden width (4 layers)."""
    n_in, n_out = task.X_train.shape[1], task.Y_train.shape[1]
    curves = {}
    for family in families:
        family_knobs = (knobs or {}).get(family, SWEEP_KNOBS[family])
        if family == "khronos":
            factory = lambda r: make_model("khronos", n_in, n_out, seed, k=3, r=r)
        else:
            factory = lambda w: make_model("mlp", n_in, n_out, seed, hidden=(w,) * 4)
        config = TrainConfig(**{**asdict(SWEEP_TRAIN[family]), "seed": seed})
        curves[family] = param_sweep_run(factory, family_knobs, task, config)
    return curves
