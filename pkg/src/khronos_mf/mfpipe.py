"""Multi-fidelity delta learning for surface Cp fields.

A low-fidelity (LF) model maps ``[geometry features, U, AoA]`` to Cp at a
fixed set of surface stations. A delta model, trained on the high-fidelity
(HF) cases only, maps the LF input with the normalized LF prediction appended
to the residual ``y_HF - y_LF_pred``. The multi-fidelity prediction is the sum
of the two.

The synthetic benchmark stands in for a CFD/panel-code dataset pair: it
perturbs a fitted NACA 0012 control polygon and evaluates a closed-form
pseudo-Cp field with a leading-edge suction peak. Its coefficients:

* stagnation bump ``exp(-x/0.015)``;
* thickness suction ``-0.45 (t/0.12) (27/4) x (1-x)^2``;
* flat-plate loading ``-+ 2 a sqrt((1-x)/(x+0.02)) (0.95 + 0.05 u)`` with ``a``
  the AoA in radians and ``u = (U - 25)/50``;
* camber loading ``-+ 16 m sqrt(x(1-x))``;
* upper-side suction peak ``-1.2 (max(AoA, 0)/15)^2 (1 + 0.1 u) exp(-x/0.04)``;
* trailing-edge recovery ``0.12 (t/0.12) x^6``.

LF bias profiles: ``none`` (LF = HF), ``offset`` (LF = HF + shift) and
``suction-damped`` (negative Cp over the first quarter chord of the upper side
is scaled by ``1 - damping * w(x)``, ``w`` a cosine taper from 1 at the
leading edge to 0 at x = 0.25).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import DELTA_HIDDEN, LF_HIDDEN, MlpModel
from .errors import ConfigurationError, DataError, DimensionError
from .fields import NormStats, interpolate_to_stations, parse_case_meta, read_case_csv
from .geometry import AirfoilCurve, BSplineCurve, fit_bspline_lsq, geometry_features, naca4
from .khronos import KernelConfig, KhronosModel
from .training import TrainConfig, train

N_CP = 81
BIAS_PROFILES = ("none", "offset", "suction-damped")
U_RANGE = (25.0, 75.0)
AOA_RANGE = (-5.0, 15.0)
MANIFEST = "manifest.json"


def station_grid(n_stations=N_CP):
    """Cosine-spaced stations: upper side TE to LE, then lower side LE to TE.

    Returns ``(x, side)`` with side +1 for upper and -1 for lower; the
    leading edge belongs to the upper side.
    """
    if n_stations < 3 or n_stations % 2 == 0:
        raise ConfigurationError("n_stations must be odd and >= 3")
    n_side = (n_stations + 1) // 2
    xs = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, n_side)))
    x = np.concatenate([xs[::-1], xs[1:]])
    side = np.concatenate([np.ones(n_side), -np.ones(n_side - 1)])
    return x, side


@dataclass
class BenchmarkData:
    """Paired LF/HF Cp fields for a set of cases.

    ``cp_hf`` rows are NaN where no HF label exists.
    """

    features: np.ndarray
    U: np.ndarray
    aoa: np.ndarray
    cp_lf: np.ndarray
    cp_hf: np.ndarray
    station_x: np.ndarray
    station_side: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.features.shape[0]
        for name in ("U", "aoa"):
            if getattr(self, name).shape != (n,):
                raise DimensionError(f"{name} must have one value per case")
        for name in ("cp_lf", "cp_hf"):
            if getattr(self, name).shape != (n, self.station_x.size):
                raise DimensionError(f"{name} must be (n_cases, n_stations)")

    @property
    def n_cases(self) -> int:
        return self.features.shape[0]

    @property
    def n_stations(self) -> int:
        return self.station_x.size

    @property
    def hf_available(self) -> np.ndarray:
        return ~np.isnan(self.cp_hf).any(axis=1)

    def save(self, out_dir, extra_manifest=None):
        """Directory with ``manifest.json`` and one CSV per case."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cases = []
        for i in range(self.n_cases):
            name = f"case_{i:05d}.csv"
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["station", "x", "side", "Cp_LF", "Cp_HF"])
                for s in range(self.n_stations):
                    hf = self.cp_hf[i, s]
                    writer.writerow([s, repr(float(self.station_x[s])), int(self.station_side[s]),
                                     repr(float(self.cp_lf[i, s])),
                                     "" if np.isnan(hf) else repr(float(hf))])
            cases.append({"id": i, "file": name, "U": float(self.U[i]),
                          "aoa": float(self.aoa[i]),
                          "features": [float(v) for v in self.features[i]],
                          "hf": bool(self.hf_available[i])})
        manifest = {"format": "mf-dataset", "version": 1, "n_cases": self.n_cases,
                    "n_stations": self.n_stations,
                    "station_x": self.station_x.tolist(),
                    "station_side": self.station_side.astype(int).tolist(),
                    **self.meta, **(extra_manifest or {}), "cases": cases}
        (out / MANIFEST).write_text(json.dumps(manifest, indent=1))
        return out

    @classmethod
    def load(cls, in_dir) -> "BenchmarkData":
        src = Path(in_dir)
        try:
            manifest = json.loads((src / MANIFEST).read_text())
        except FileNotFoundError:
            raise DataError(f"no {MANIFEST} in {src}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed manifest: {exc}") from None
        cases = manifest["cases"]
        n_st = manifest["n_stations"]
        cp_lf = np.full((len(cases), n_st), np.nan)
        cp_hf = np.full((len(cases), n_st), np.nan)
        for i, case in enumerate(cases):
            with open(src / case["file"], newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
            if len(rows) != n_st:
                raise DataError(f"{case['file']}: expected {n_st} stations, got {len(rows)}")
            cp_lf[i] = [float(r["Cp_LF"]) for r in rows]
            cp_hf[i] = [float(r["Cp_HF"]) if r.get("Cp_HF") else np.nan for r in rows]
        meta = {k: v for k, v in manifest.items()
                if k not in ("cases", "station_x", "station_side", "n_cases", "n_stations",
                             "format", "version")}
        return cls(np.array([c["features"] for c in cases], dtype=float),
                   np.array([c["U"] for c in cases], dtype=float),
                   np.array([c["aoa"] for c in cases], dtype=float),
                   cp_lf, cp_hf, np.array(manifest["station_x"], dtype=float),
                   np.array(manifest["station_side"], dtype=float), meta)


_BASE_CURVE = None


def _base_curve() -> AirfoilCurve:
    global _BASE_CURVE
    if _BASE_CURVE is None:
        _BASE_CURVE, _ = fit_bspline_lsq(naca4("0012"), 16)
    return _BASE_CURVE


def _camber_line(x, m, p=0.4):
    x = np.clip(x, 0.0, 1.0)
    return np.where(x < p, m / p ** 2 * (2 * p * x - x ** 2),
                    m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x ** 2))


def hf_cp(x, side, aoa_deg, U, thickness, camber):
    """Closed-form pseudo-Cp of the synthetic benchmark (one case)."""
    a = np.deg2rad(aoa_deg)
    u = (U - U_RANGE[0]) / (U_RANGE[1] - U_RANGE[0])
    stag = np.exp(-x / 0.015)
    thick = -0.45 * (thickness / 0.12) * 6.75 * x * (1 - x) ** 2
    load = 2.0 * a * np.sqrt((1 - x) / (x + 0.02)) * (0.95 + 0.05 * u)
    camb = 16.0 * camber * np.sqrt(x * (1 - x))
    peak = 1.2 * (max(aoa_deg, 0.0) / 15.0) ** 2 * (1 + 0.1 * u) * np.exp(-x / 0.04)
    recovery = 0.12 * (thickness / 0.12) * x ** 6
    return stag + thick + recovery - side * (load + camb) - (side > 0) * peak


def apply_bias(cp_hf, station_x, station_side, profile, shift=0.2, damping=0.8):
    if profile == "none":
        return cp_hf.copy()
    if profile == "offset":
        return cp_hf + shift
    if profile == "suction-damped":
        taper = 0.5 * (1 + np.cos(np.pi * np.minimum(station_x / 0.25, 1.0)))
        w = damping * taper * (station_side > 0)
        return cp_hf - w * np.minimum(cp_hf, 0.0)
    raise ConfigurationError(f"unknown bias profile {profile!r}; use one of {BIAS_PROFILES}")


def synth_benchmark(n_cases, n_stations=N_CP, bias_profile="suction-damped", seed=0,
                    layout="y-only", shift=0.2, damping=0.8) -> BenchmarkData:
    """Deterministic synthetic LF/HF dataset; see the module docstring."""
    if int(n_cases) != n_cases or n_cases < 1:
        raise ConfigurationError("n_cases must be a positive integer")
    if bias_profile not in BIAS_PROFILES:
        raise ConfigurationError(f"unknown bias profile {bias_profile!r}; use one of {BIAS_PROFILES}")
    rng = np.random.default_rng(seed)
    base = _base_curve()
    basis = base.upper.basis
    sx, sside = station_grid(n_stations)

    feats, Us, aoas, hf = [], [], [], []
    for _ in range(n_cases):
        scale = rng.uniform(0.6, 1.5)
        camber = rng.uniform(0.0, 0.05)
        wiggle = rng.normal(0.0, 0.002, size=(2, 2))
        U = rng.uniform(*U_RANGE)
        aoa = rng.uniform(*AOA_RANGE)
        sides = []
        for k, ctrl in enumerate((base.upper.ctrl, base.lower.ctrl)):
            x = ctrl[:, 0]
            bump = wiggle[k, 0] * np.sin(np.pi * x) + wiggle[k, 1] * np.sin(2 * np.pi * x)
            bump[[0, -1]] = 0.0
            y = scale * ctrl[:, 1] + _camber_line(x, camber) + bump
            sides.append(BSplineCurve(basis, np.column_stack([x, y])))
        curve = AirfoilCurve(sides[0], sides[1], base.chord, base.origin)
        feats.append(geometry_features(curve, layout))
        Us.append(U)
        aoas.append(aoa)
        hf.append(hf_cp(sx, sside, aoa, U, 0.12 * scale, camber))

    cp_hf = np.array(hf)
    cp_lf = apply_bias(cp_hf, sx, sside, bias_profile, shift, damping)
    meta = {"generator": "synthetic", "bias_profile": bias_profile, "seed": seed,
            "layout": layout, "shift": shift, "damping": damping}
    return BenchmarkData(np.array(feats), np.array(Us), np.array(aoas), cp_lf, cp_hf,
                         sx, sside, meta)


def surface_to_stations(points, cp, station_x, station_side):
    """Transfer Cp sampled along an ordered outline to the station grid.

    The outline is cut at its minimum-x point; x is rescaled to [0, 1] by
    the chord before per-side linear interpolation.
    """
    pts = np.asarray(points, dtype=float)
    cp = np.asarray(cp, dtype=float)
    if pts.shape[0] != cp.size:
        raise DimensionError("one Cp value per surface point is required")
    x0, chord = pts[:, 0].min(), np.ptp(pts[:, 0])
    if chord <= 0:
        raise DataError("surface has zero chord")
    i_le = int(np.argmin(pts[:, 0]))
    idx = np.arange(pts.shape[0])
    a, b = idx[i_le::-1], idx[i_le:]
    upper, lower = (a, b) if pts[a, 1].mean() >= pts[b, 1].mean() else (b, a)
    per_side = []
    for sel in (upper, lower):
        xs = (pts[sel, 0] - x0) / chord
        xs, first = np.unique(xs, return_index=True)
        per_side += [xs, cp[sel][first]]
    return interpolate_to_stations(*per_side, station_x, station_side)


def ingest_cases(lf_dir, hf_dir=None, meta=None, n_ctrl=16, layout="y-only",
                 n_stations=N_CP) -> BenchmarkData:
    """Build a dataset from per-case surface files ``x, y, p, Cp``.

    Every ``*.csv`` in ``lf_dir`` is one case; a file of the same name in
    ``hf_dir`` supplies its HF labels. U and AoA come from the file name
    (``<id>_U<speed>_A<aoa>.csv``) unless ``meta`` overrides them. Geometry
    features come from a B-spline fit of the LF outline.
    """
    files = sorted(Path(lf_dir).glob("*.csv"))
    if not files:
        raise DataError(f"no case files in {lf_dir}")
    sx, sside = station_grid(n_stations)
    feats, Us, aoas, lf, hf = [], [], [], [], []
    for path in files:
        U, aoa = parse_case_meta(path, meta)
        case = read_case_csv(path)
        pts = np.column_stack([case["x"], case["y"]])
        curve, _ = fit_bspline_lsq(pts, n_ctrl)
        feats.append(geometry_features(curve, layout))
        Us.append(U)
        aoas.append(aoa)
        lf.append(surface_to_stations(pts, case["cp"], sx, sside))
        hf_path = Path(hf_dir) / path.name if hf_dir is not None else None
        if hf_path is not None and hf_path.exists():
            hcase = read_case_csv(hf_path)
            hf.append(surface_to_stations(np.column_stack([hcase["x"], hcase["y"]]),
                                          hcase["cp"], sx, sside))
        else:
            hf.append(np.full(n_stations, np.nan))
    meta_out = {"generator": "ingest", "layout": layout, "n_ctrl": n_ctrl,
                "case_files": [p.name for p in files]}
    return BenchmarkData(np.array(feats), np.array(Us), np.array(aoas), np.array(lf),
                         np.array(hf), sx, sside, meta_out)


def _round_half_up(x) -> int:
    return int(np.floor(x + 0.5))


@dataclass
class MfDataset:
    data: BenchmarkData
    train_idx: np.ndarray
    test_idx: np.ndarray
    hf_idx: np.ndarray
    hf_ratio: float
    seed: int

    @property
    def n_cp(self) -> int:
        return self.data.n_stations

    def manifest(self) -> dict:
        return {"hf_ratio": self.hf_ratio, "seed": self.seed,
                "train": self.train_idx.tolist(), "test": self.test_idx.tolist(),
                "hf": self.hf_idx.tolist()}


def split_indices(n_cases, test_fraction=0.2, seed=0):
    """Seeded train/test split; the test set depends only on ``seed``."""
    perm = np.random.default_rng(seed).permutation(n_cases)
    n_test = _round_half_up(test_fraction * n_cases)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def hf_subset(train_idx, hf_ratio, seed=0, eligible=None):
    """First ``round(hf_ratio * n_train)`` training cases of a seeded shuffle.

    Subsets for increasing ratios are nested.
    """
    if not 0.0 <= hf_ratio <= 1.0:
        raise ConfigurationError(f"hf_ratio must lie in [0, 1], got {hf_ratio}")
    train_idx = np.asarray(train_idx)
    n_hf = _round_half_up(hf_ratio * train_idx.size)
    pool = train_idx[np.random.default_rng(seed + 1).permutation(train_idx.size)]
    if eligible is not None:
        pool = pool[eligible[pool]]
    if n_hf > pool.size:
        raise DataError(f"need {n_hf} HF cases but only {pool.size} have HF labels")
    return np.sort(pool[:n_hf])


def build_cases(data: BenchmarkData, hf_ratio, seed=0, test_fraction=0.2,
                test_idx=None) -> MfDataset:
    if not 0.0 <= hf_ratio <= 1.0:
        raise ConfigurationError(f"hf_ratio must lie in [0, 1], got {hf_ratio}")
    if data.n_cases < 10:
        raise ConfigurationError("at least 10 cases are required")
    if test_idx is None:
        train_idx, test_idx = split_indices(data.n_cases, test_fraction, seed)
    else:
        test_idx = np.sort(np.asarray(test_idx, dtype=int))
        train_idx = np.setdiff1d(np.arange(data.n_cases), test_idx)
    hf_idx = hf_subset(train_idx, hf_ratio, seed, data.hf_available)
    return MfDataset(data, train_idx, test_idx, hf_idx, float(hf_ratio), seed)


# -- input assembly and residuals ---------------------------------------------

def raw_lf_inputs(features, U, aoa) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    U = np.atleast_1d(np.asarray(U, dtype=float))
    aoa = np.atleast_1d(np.asarray(aoa, dtype=float))
    return np.column_stack([features, U, aoa])


def assemble_lf_input(features, U, aoa, stats: NormStats) -> np.ndarray:
    """``[geometry features, U, AoA]`` min-max normalized with training stats."""
    single = np.ndim(features) == 1
    X = stats.apply(raw_lf_inputs(features, U, aoa))
    return X[0] if single else X


def assemble_delta_input(x_lf, lf_prediction, n_cp=None) -> np.ndarray:
    """Append the normalized LF Cp prediction to the LF input."""
    x_lf = np.asarray(x_lf, dtype=float)
    lf_prediction = np.asarray(lf_prediction, dtype=float)
    if lf_prediction.shape[-1] == 0:
        raise DimensionError("empty LF prediction")
    if n_cp is not None and lf_prediction.shape[-1] != n_cp:
        raise DimensionError(f"LF prediction has {lf_prediction.shape[-1]} stations, expected {n_cp}")
    if x_lf.shape[:-1] != lf_prediction.shape[:-1]:
        raise DimensionError("x_lf and lf_prediction disagree on the number of cases")
    return np.concatenate([x_lf, lf_prediction], axis=-1)


def compute_residuals(y_hf, lf_pred) -> np.ndarray:
    y_hf = np.asarray(y_hf, dtype=float)
    lf_pred = np.asarray(lf_pred, dtype=float)
    if y_hf.shape != lf_pred.shape:
        raise DimensionError(f"misaligned HF {y_hf.shape} and LF {lf_pred.shape} arrays")
    return y_hf - lf_pred


# -- models and surrogate ---------------------------------------------------------

CASE_RATIOS = {1: 0.0, 2: 0.1, 3: 0.3}
MODEL_FAMILIES = ("khronos", "mlp")

# stage defaults from the selected grid-search hyperparameters
DEFAULT_HYPER = {
    ("khronos", "lf"): {"k": 3, "r": 4},
    ("khronos", "delta"): {"k": 3, "r": 6},
    ("mlp", "lf"): {"hidden": LF_HIDDEN},
    ("mlp", "delta"): {"hidden": DELTA_HIDDEN},
}
DEFAULT_TRAIN = {
    ("khronos", "lf"): TrainConfig(peak_lr=3e-3, epochs=1000),
    ("khronos", "delta"): TrainConfig(peak_lr=1e-3, epochs=1500),
    ("mlp", "lf"): TrainConfig(peak_lr=3e-3, epochs=3500),
    ("mlp", "delta"): TrainConfig(peak_lr=1e-3, epochs=4000),
}


def make_model(family, n_in, n_out, seed=0, zero_head=False, **hyper):
    """Fresh, untrained model of the given family.

    KHRONOS takes ``k`` and ``r``; the MLP takes ``hidden`` (a width tuple).
    ``zero_head`` starts the model as a constant, as used for delta models.
    """
    if family == "khronos":
        config = KernelConfig(n_in, int(hyper.get("k", 3)), int(hyper.get("r", 4)), n_out)
        return KhronosModel.create(config, seed, zero_head=zero_head)
    if family == "mlp":
        hidden = tuple(int(h) for h in hyper.get("hidden", LF_HIDDEN))
        return MlpModel.create((n_in, *hidden, n_out), seed, zero_head=zero_head)
    raise ConfigurationError(f"unknown model family {family!r}; use one of {MODEL_FAMILIES}")


def load_model(path):
    """Load a KHRONOS or MLP checkpoint, dispatching on its format tag."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    fmt = data.get("format")
    if fmt == "khronos-checkpoint":
        return KhronosModel.from_dict(data)
    if fmt == "mlp-checkpoint":
        return MlpModel.from_dict(data)
    raise DataError(f"{path}: unknown checkpoint format {fmt!r}")


@dataclass
class MfSurrogate:
    """LF model plus an optional delta model.

    Both stages take normalized LF inputs ``x_LF``; the LF model's own
    input statistics are the training-split statistics.
    """

    lf_model: object
    delta_model: object = None

    @property
    def input_stats(self) -> NormStats:
        return self.lf_model.input_norm

    def lf_predict(self, x_lf):
        return self.lf_model.predict_normalized(x_lf)

    def delta_input(self, x_lf, lf_pred=None):
        if lf_pred is None:
            lf_pred = self.lf_predict(x_lf)
        return assemble_delta_input(x_lf, self.lf_model.output_norm.apply(lf_pred),
                                    self.lf_model.n_out)

    def delta_predict(self, x_lf, lf_pred=None):
        return self.delta_model.predict_normalized(self.delta_input(x_lf, lf_pred))

    def predict_cases(self, features, U, aoa):
        return predict_mf(self, assemble_lf_input(features, U, aoa, self.input_stats))


def predict_mf(surrogate: MfSurrogate, x_lf):
    """LF prediction plus the delta correction (if the surrogate has one)."""
    lf = surrogate.lf_predict(x_lf)
    if surrogate.delta_model is None:
        return lf
    return lf + surrogate.delta_predict(x_lf, lf)


@dataclass
class FitResult:
    surrogate: MfSurrogate
    lf_history: object
    delta_history: object = None


def fit_surrogate(ds: MfDataset, family="khronos", lf_hyper=None, delta_hyper=None,
                  lf_train=None, delta_train=None, seed=0, hf_in_lf=False) -> FitResult:
    """Two-stage training on ``ds``.

    Stage one fits the LF model on the LF labels of every training case.
    With ``hf_in_lf`` the HF-labelled training cases contribute their HF
    labels instead, weighted by ``w_hf``. Stage two, skipped when the
    dataset has no HF cases, fits the delta model on
    ``y_HF - y_LF_pred`` over the HF cases. Residuals stay in physical Cp.
    """
    data = ds.data
    lf_hyper = lf_hyper or DEFAULT_HYPER[(family, "lf")]
    delta_hyper = delta_hyper or DEFAULT_HYPER[(family, "delta")]
    lf_train = lf_train or DEFAULT_TRAIN[(family, "lf")]
    delta_train = delta_train or DEFAULT_TRAIN[(family, "delta")]

    tr = ds.train_idx
    X_raw = raw_lf_inputs(data.features[tr], data.U[tr], data.aoa[tr])
    stats = NormStats.fit(X_raw)
    Y = data.cp_lf[tr].copy()
    weights = None
    if hf_in_lf and ds.hf_idx.size:
        is_hf = np.isin(tr, ds.hf_idx)
        Y[is_hf] = data.cp_hf[tr[is_hf]]
        weights = np.where(is_hf, lf_train.w_hf, 1.0)

    lf_model = make_model(family, X_raw.shape[1], data.n_stations, seed, **lf_hyper)
    lf_model.input_norm = stats
    lf_hist = train(lf_model, X_raw, Y, lf_train, weights=weights)
    surrogate = MfSurrogate(lf_model)
    if ds.hf_idx.size == 0:
        return FitResult(surrogate, lf_hist)

    hf = ds.hf_idx
    x_lf = assemble_lf_input(data.features[hf], data.U[hf], data.aoa[hf], stats)
    lf_pred = surrogate.lf_predict(x_lf)
    residual = compute_residuals(data.cp_hf[hf], lf_pred)
    surrogate.delta_model, delta_hist = fit_delta(surrogate, x_lf, residual, family,
                                                  delta_hyper, delta_train, seed + 1, lf_pred)
    return FitResult(surrogate, lf_hist, delta_hist)


def fit_delta(surrogate: MfSurrogate, x_lf, residual, family="khronos", hyper=None,
              config=None, seed=1, lf_pred=None):
    """Train a delta model on ``residual`` targets for normalized inputs ``x_lf``.

    The output head starts at zero, so the correction starts as the mean
    residual and zero residuals leave it exactly zero.
    """
    hyper = hyper or DEFAULT_HYPER[(family, "delta")]
    config = config or DEFAULT_TRAIN[(family, "delta")]
    x_delta = surrogate.delta_input(x_lf, lf_pred)
    model = make_model(family, x_delta.shape[1], residual.shape[1], seed, zero_head=True, **hyper)
    # x_delta is already in normalized units
    model.input_norm = NormStats(np.zeros(x_delta.shape[1]), np.ones(x_delta.shape[1]))
    history = train(model, x_delta, residual, config)
    return model, history


def save_surrogate(surrogate: MfSurrogate, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "lf_model.json"]
    surrogate.lf_model.save(paths[0])
    if surrogate.delta_model is not None:
        paths.append(out / "delta_model.json")
        surrogate.delta_model.save(paths[1])
    return paths


def load_surrogate(in_dir) -> MfSurrogate:
    src = Path(in_dir)
    delta = src / "delta_model.json"
    return MfSurrogate(load_model(src / "lf_model.json"),
                       load_model(delta) if delta.exists() else None)
