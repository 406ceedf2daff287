"""Field post-processing for airfoil cases.

Reduced (kinematic) pressure from an incompressible solver is only defined up
to an additive constant. The reference level and the effective freestream
speed are recovered from an annular band of interior points far from the
airfoil, after which dimensional pressure and Cp follow directly.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DimensionError,
    DomainError,
    InsufficientFarfieldError,
    InterpolationError,
    ParseError,
)

RHO = 1.225
P_INF = 101325.0
MU_AIR = 1.81e-5


@dataclass
class AirfoilCase:
    """One airfoil at one operating point.

    ``internal`` is an optional ``(n, 5)`` array with columns
    ``x, y, p_bar, u, v``. ``surface_p_bar`` / ``surface_cp`` are aligned
    with ``surface`` when present.
    """

    surface: np.ndarray
    U: float
    aoa: float
    internal: np.ndarray | None = None
    surface_p_bar: np.ndarray | None = None
    surface_cp: np.ndarray | None = None
    rho: float = RHO
    p_inf: float = P_INF
    mu: float = MU_AIR

    def __post_init__(self):
        self.surface = np.asarray(self.surface, dtype=float)
        if self.surface.ndim != 2 or self.surface.shape[1] != 2:
            raise DimensionError("surface must be an (n, 2) array of x, y")
        if not self.U > 0:
            raise DomainError("freestream speed U must be positive")
        if not self.chord > 0:
            raise DomainError("chord must be positive")
        if self.internal is not None:
            self.internal = np.asarray(self.internal, dtype=float)
            if self.internal.ndim != 2 or self.internal.shape[1] != 5:
                raise DimensionError("internal points need columns x, y, p_bar, u, v")

    @property
    def chord(self) -> float:
        x = self.surface[:, 0]
        return float(x.max() - x.min())


@dataclass(frozen=True)
class FreestreamState:
    p_bar_inf: float
    U_inf: float
    band: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        if not self.U_inf > 0:
            raise DomainError("effective freestream speed must be positive")


def farfield_band(case: AirfoilCase, margin_fraction=0.5, outlier_quantile=0.99,
                  min_points=100) -> np.ndarray:
    """Indices of interior points forming the far-field band.

    Candidates lie beyond the outermost surface point (measured from the
    bounding-box center) by at least ``margin_fraction`` chords. Radii above
    the ``outlier_quantile`` of the candidate radii are dropped.
    """
    if case.internal is None or len(case.internal) == 0:
        raise InsufficientFarfieldError("case has no internal points")
    xs, ys = case.surface[:, 0], case.surface[:, 1]
    xc = 0.5 * (xs.max() + xs.min())
    yc = 0.5 * (ys.max() + ys.min())
    r_surf = np.hypot(xs - xc, ys - yc).max()
    r = np.hypot(case.internal[:, 0] - xc, case.internal[:, 1] - yc)

    cand = np.flatnonzero(r >= r_surf + margin_fraction * case.chord)
    if cand.size == 0:
        raise InsufficientFarfieldError("no internal points beyond the far-field margin")
    cutoff = np.quantile(r[cand], outlier_quantile)
    band = cand[r[cand] <= cutoff]
    if band.size < min_points:
        raise InsufficientFarfieldError(
            f"far-field band has {band.size} points, need {min_points}")
    return band


def freestream_state(p_bar, u, v, band=None) -> FreestreamState:
    """Band means of reduced pressure and flow speed."""
    p_bar = np.asarray(p_bar, dtype=float)
    if p_bar.size == 0:
        raise InsufficientFarfieldError("empty far-field band")
    speed = np.hypot(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if band is None:
        band = np.arange(p_bar.size)
    return FreestreamState(float(p_bar.mean()), float(speed.mean()), np.asarray(band))


def case_freestream(case: AirfoilCase, **band_kwargs) -> FreestreamState:
    band = farfield_band(case, **band_kwargs)
    pts = case.internal[band]
    return freestream_state(pts[:, 2], pts[:, 3], pts[:, 4], band)


def reconstruct_pressure(p_bar, fs: FreestreamState, rho=RHO, p_inf=P_INF):
    """Dimensional pressure with the band mean pinned to ``p_inf``."""
    return p_inf + rho * (np.asarray(p_bar, dtype=float) - fs.p_bar_inf)


def cp_from_pressure(p, fs: FreestreamState, rho=RHO, p_inf=P_INF):
    if not fs.U_inf > 0:
        raise DomainError("dynamic pressure is zero")
    q = 0.5 * rho * fs.U_inf ** 2
    return (np.asarray(p, dtype=float) - p_inf) / q


def pressure_from_cp(cp, U, rho=RHO, p_inf=P_INF):
    return p_inf + 0.5 * rho * U ** 2 * np.asarray(cp, dtype=float)


def cp_from_edge_velocity(ratio):
    """Inviscid outer-flow relation ``Cp = 1 - (u_e / u_inf)**2``."""
    ratio = np.asarray(ratio, dtype=float)
    return 1.0 - ratio * ratio


def reynolds(case: AirfoilCase) -> float:
    return case.rho * case.U * case.chord / case.mu


def surface_cp(case: AirfoilCase, **band_kwargs) -> np.ndarray:
    """Cp on the surface of a case carrying reduced pressure."""
    if case.surface_p_bar is None:
        raise DataError("case has no surface reduced pressure")
    fs = case_freestream(case, **band_kwargs)
    p = reconstruct_pressure(case.surface_p_bar, fs, case.rho, case.p_inf)
    return cp_from_pressure(p, fs, case.rho, case.p_inf)


@dataclass(frozen=True)
class NormStats:
    """Per-feature min-max statistics.

    Constant features (``max == min``) are shifted to 0.5 with unit scale, so
    the transform stays invertible for them as well.
    """

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.max, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionError("min and max must have equal length")
        if np.any(hi < lo):
            raise DataError("max must be >= min for every feature")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def fit(cls, X) -> "NormStats":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(X.min(axis=0), X.max(axis=0))

    def __len__(self):
        return self.min.size

    @property
    def _scale(self):
        span = self.max - self.min
        const = span == 0
        return np.where(const, 1.0, span), np.where(const, 0.5, 0.0)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.min.size:
            raise DimensionError(
                f"expected {self.min.size} features, got {X.shape[-1]}")
        return X

    def apply(self, X):
        X = self._check(X)
        scale, shift = self._scale
        return (X - self.min) / scale + shift

    def invert(self, Xn):
        Xn = self._check(Xn)
        scale, shift = self._scale
        return (Xn - shift) * scale + self.min

    def to_dict(self):
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, data) -> "NormStats":
        return cls(np.array(data["min"], dtype=float), np.array(data["max"], dtype=float))


def minmax_fit_apply(train, *others):
    """Fit on ``train``; return the stats and every array normalized."""
    stats = NormStats.fit(train)
    return (stats, stats.apply(train), *(stats.apply(o) for o in others))


def interpolate_to_stations(src_upper_x, cp_upper, src_lower_x, cp_lower,
                            target_x, target_y):
    """Piecewise-linear transfer of Cp from per-side stations to target points.

    The side of each target is chosen by the sign of its ``y`` (``y >= 0`` is
    the upper surface). Targets beyond the station hull take the end value.
    """
    sides = []
    for xs, cp in ((src_upper_x, cp_upper), (src_lower_x, cp_lower)):
        xs = np.asarray(xs, dtype=float)
        cp = np.asarray(cp, dtype=float)
        if xs.size < 2 or xs.shape != cp.shape:
            raise InterpolationError("each side needs at least 2 stations with values")
        if np.any(np.diff(xs) <= 0):
            raise InterpolationError("station positions must be strictly increasing")
        sides.append((xs, cp))
    tx = np.asarray(target_x, dtype=float)
    ty = np.asarray(target_y, dtype=float)
    upper = ty >= 0
    out = np.empty_like(tx)
    out[upper] = np.interp(tx[upper], *sides[0])
    out[~upper] = np.interp(tx[~upper], *sides[1])
    return out


# -- per-case surface files ----------------------------------------------------------

CASE_COLUMNS = ("x", "y", "p", "cp")
# e.g. ``naca2412_U42.5_A-3.0.csv``: freestream speed in m/s, AoA in degrees
CASE_NAME_PATTERN = re.compile(
    r"_U(?P<U>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)"
    r"_A(?P<aoa>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\.csv$")


def parse_case_meta(filename, overrides=None) -> tuple:
    """``(U, aoa)`` for a case file, from ``overrides[name]`` or the filename.

    ``overrides`` maps a file name to ``{"U": ..., "aoa": ...}``.
    """
    name = Path(filename).name
    if overrides and name in overrides:
        entry = overrides[name]
        try:
            return float(entry["U"]), float(entry["aoa"])
        except (KeyError, TypeError, ValueError):
            raise DataError(f"meta entry for {name} needs numeric U and aoa") from None
    match = CASE_NAME_PATTERN.search(name)
    if match is None:
        raise DataError(f"cannot read U and AoA from {name!r}; expected <id>_U<speed>_A<aoa>.csv "
                        "or a meta override")
    return float(match["U"]), float(match["aoa"])


def read_case_csv(path) -> dict:
    """Surface samples ``x, y, p, Cp`` (header required, any column order).

    Returns float arrays keyed by lower-case column name.
    """
    cols = {c: [] for c in CASE_COLUMNS}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        missing = [c for c in CASE_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", 1)
        index = {c: header.index(c) for c in CASE_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                for c, i in index.items():
                    cols[c].append(float(row[i]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    if len(cols["x"]) < 4:
        raise ParseError("need at least 4 surface samples", 2)
    return {c: np.array(v) for c, v in cols.items()}


def write_case_json(path, case: dict):
    """Processed case (arrays become lists)."""
    out = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in case.items()}
    Path(path).write_text(json.dumps(out, indent=1))
