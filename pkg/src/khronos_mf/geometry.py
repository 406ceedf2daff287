"""Cubic B-spline airfoil parameterization.

The suction and pressure sides are fitted as two clamped cubic B-splines, both
running from the leading edge (zeta = 0) to the trailing edge (zeta = 1).
They share their first control point (leading edge) and last control point
(trailing edge). The second control point of each side is pinned to the
leading-edge x-coordinate, which makes the nose tangent vertical and joins the
two sides smoothly there. ``n_ctrl`` counts the distinct control points, so a
16-point airfoil uses 9 control points per side.

Constraints are eliminated exactly: the fit solves for the free coordinates
only, and every full control polygon is a linear image of them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    DomainError,
    IllConditionedFitError,
    ParseError,
)
from .splines import ClampedBasis, cox_de_boor_eval

DEGREE = 3
MAX_CONDITION = 1e12
FEATURE_MODES = ("xy-flat", "y-only")


@dataclass
class BSplineCurve:
    basis: ClampedBasis
    ctrl: np.ndarray  # (n, 2)

    def evaluate(self, zeta) -> np.ndarray:
        return cox_de_boor_eval(self.basis, zeta) @ self.ctrl


@dataclass
class AirfoilCurve:
    """Upper and lower splines plus the frame used to chord-normalize them."""

    upper: BSplineCurve
    lower: BSplineCurve
    chord: float
    origin: tuple = (0.0, 0.0)

    @property
    def n_ctrl(self) -> int:
        return 2 * self.upper.ctrl.shape[0] - 2

    def control_points(self) -> np.ndarray:
        """Distinct control points: LE, upper interior, TE, lower interior."""
        u, lo = self.upper.ctrl, self.lower.ctrl
        return np.vstack([u[:1], u[1:-1], u[-1:], lo[1:-1]])

    def to_dict(self) -> dict:
        return {
            "degree": self.upper.basis.degree,
            "knots": self.upper.basis.knots.tolist(),
            "chord": self.chord,
            "origin": list(self.origin),
            "upper": self.upper.ctrl.tolist(),
            "lower": self.lower.ctrl.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "AirfoilCurve":
        basis = ClampedBasis(int(data["degree"]), np.array(data["knots"], dtype=float))
        return cls(BSplineCurve(basis, np.array(data["upper"], dtype=float)),
                   BSplineCurve(basis, np.array(data["lower"], dtype=float)),
                   float(data["chord"]), tuple(data["origin"]))


@dataclass
class FitReport:
    rmse: float
    residuals: np.ndarray
    zeta_upper: np.ndarray
    zeta_lower: np.ndarray
    condition: float = float("nan")

    @property
    def n_points(self) -> int:
        return self.residuals.size

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["side", "zeta", "residual"])
            nu = self.zeta_upper.size
            for i, z in enumerate(self.zeta_upper):
                writer.writerow(["upper", repr(float(z)), repr(float(self.residuals[i]))])
            for i, z in enumerate(self.zeta_lower):
                writer.writerow(["lower", repr(float(z)), repr(float(self.residuals[nu + i]))])


def parameterize_points(points) -> np.ndarray:
    """Chord-length (cumulative polyline length) parameters in [0, 1].

    Repeated consecutive points receive the same parameter.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DegenerateGeometryError("need at least two points")
    seg = np.hypot(*np.diff(pts, axis=0).T)
    total = seg.sum()
    if total == 0:
        raise DegenerateGeometryError("all points are identical")
    zeta = np.concatenate([[0.0], np.cumsum(seg)]) / total
    zeta[-1] = 1.0
    return zeta


def split_surfaces(points, ordered=True):
    """Split an airfoil outline into (upper, lower), each ordered LE to TE.

    ``ordered`` outlines (e.g. Selig order, either direction) are cut at the
    minimum-x point; the side with the larger mean y is the upper one.
    Unordered clouds are split by the sign of y and sorted by x. Both sides
    contain the leading-edge point.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise DegenerateGeometryError("need an (n >= 4, 2) array of surface points")
    i_le = int(np.argmin(pts[:, 0]))
    if ordered:
        a, b = pts[i_le::-1], pts[i_le:]
        if a.shape[0] < 2 or b.shape[0] < 2:
            raise DegenerateGeometryError("leading edge at the end of an ordered outline")
        return (a, b) if a[:, 1].mean() >= b[:, 1].mean() else (b, a)
    le = pts[i_le]
    rest = np.delete(pts, i_le, axis=0)
    upper = rest[rest[:, 1] >= 0]
    lower = rest[rest[:, 1] < 0]
    upper = np.vstack([le, upper[np.argsort(upper[:, 0], kind="stable")]])
    lower = np.vstack([le, lower[np.argsort(lower[:, 0], kind="stable")]])
    return upper, lower


def _constraint_map(n_side: int) -> np.ndarray:
    """Linear map from free coordinates to [Ux, Uy, Lx, Ly] control vectors.

    Free coordinates: LE x, LE y, TE x, TE y, U1 y, L1 y, then (x, y) of the
    upper interior points 2..n-2, then the same for the lower side.
    """
    n = n_side
    n_inner = n - 3
    n_free = 6 + 4 * n_inner
    T = np.zeros((4 * n, n_free))
    ux, uy, lx, ly = (np.arange(n) + off for off in (0, n, 2 * n, 3 * n))
    for xs, ys, y1 in ((ux, uy, 4), (lx, ly, 5)):
        T[xs[0], 0] = T[ys[0], 1] = 1.0          # shared leading edge
        T[xs[-1], 2] = T[ys[-1], 3] = 1.0        # shared trailing edge
        T[xs[1], 0] = 1.0                        # x pinned to the leading edge
        T[ys[1], y1] = 1.0
    col = 6
    for xs, ys in ((ux, uy), (lx, ly)):
        for i in range(2, n - 1):
            T[xs[i], col] = 1.0
            T[ys[i], col + 1] = 1.0
            col += 2
    return T


def fit_airfoil(upper, lower, n_ctrl=16, zeta_upper=None, zeta_lower=None):
    """Constrained least-squares fit of both sides; see module docstring."""
    if n_ctrl % 2 or n_ctrl < 6:
        raise ConfigurationError("n_ctrl must be an even number >= 6")
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    n_side = n_ctrl // 2 + 1
    if upper.shape[0] + lower.shape[0] < n_ctrl or min(upper.shape[0], lower.shape[0]) < n_side:
        raise ConfigurationError(
            f"not enough surface points for {n_ctrl} control points "
            f"(got {upper.shape[0]} upper, {lower.shape[0]} lower)")
    zu = parameterize_points(upper) if zeta_upper is None else np.asarray(zeta_upper, float)
    zl = parameterize_points(lower) if zeta_lower is None else np.asarray(zeta_lower, float)

    basis = ClampedBasis.uniform(n_side, DEGREE)
    Bu = cox_de_boor_eval(basis, zu)
    Bl = cox_de_boor_eval(basis, zl)
    nu, nl = Bu.shape[0], Bl.shape[0]
    A = np.zeros((2 * nu + 2 * nl, 4 * n_side))
    A[:nu, :n_side] = Bu
    A[nu:2 * nu, n_side:2 * n_side] = Bu
    A[2 * nu:2 * nu + nl, 2 * n_side:3 * n_side] = Bl
    A[2 * nu + nl:, 3 * n_side:] = Bl
    rhs = np.concatenate([upper[:, 0], upper[:, 1], lower[:, 0], lower[:, 1]])

    T = _constraint_map(n_side)
    M = A @ T
    z, _, rank, sv = np.linalg.lstsq(M, rhs, rcond=None)
    condition = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if rank < M.shape[1] or condition > MAX_CONDITION:
        raise IllConditionedFitError("rank-deficient B-spline design matrix", condition)

    c = T @ z
    ctrl_u = np.column_stack([c[:n_side], c[n_side:2 * n_side]])
    ctrl_l = np.column_stack([c[2 * n_side:3 * n_side], c[3 * n_side:]])
    pts = np.vstack([upper, lower])
    i_le = int(np.argmin(pts[:, 0]))
    chord = float(pts[:, 0].max() - pts[:, 0].min())
    if chord <= 0:
        raise DegenerateGeometryError("zero chord")
    curve = AirfoilCurve(BSplineCurve(basis, ctrl_u), BSplineCurve(basis, ctrl_l),
                         chord, (float(pts[i_le, 0]), float(pts[i_le, 1])))

    fitted = np.vstack([Bu @ ctrl_u, Bl @ ctrl_l])
    residuals = np.hypot(*(fitted - pts).T)
    rmse = float(np.sqrt(np.mean(residuals ** 2)))
    return curve, FitReport(rmse, residuals, zu, zl, float(condition))


def fit_bspline_lsq(points, n_ctrl=16, ordered=True):
    """Fit an airfoil outline with ``n_ctrl`` distinct control points."""
    upper, lower = split_surfaces(points, ordered=ordered)
    return fit_airfoil(upper, lower, n_ctrl)


def reconstruct_curve(curve, zeta):
    """Evaluate a fitted curve at parameters ``zeta`` in [0, 1].

    A :class:`BSplineCurve` gives an ``(m, 2)`` array; an
    :class:`AirfoilCurve` gives an ``(upper, lower)`` pair of them.
    """
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0) or np.any(z > 1):
        raise DomainError("zeta must lie in [0, 1]")
    if isinstance(curve, BSplineCurve):
        return curve.evaluate(z)
    return curve.upper.evaluate(z), curve.lower.evaluate(z)


def geometry_features(curve: AirfoilCurve, mode="xy-flat") -> np.ndarray:
    """Chord-normalized control-point features in a fixed order.

    Points are ordered as in :meth:`AirfoilCurve.control_points` and shifted
    so the leading-edge data point is the origin. ``xy-flat`` interleaves
    ``x0, y0, x1, y1, ...``; ``y-only`` keeps the y values.
    """
    if mode not in FEATURE_MODES:
        raise ConfigurationError(f"unknown feature layout {mode!r}; use one of {FEATURE_MODES}")
    pts = (curve.control_points() - np.asarray(curve.origin)) / curve.chord
    return pts.ravel() if mode == "xy-flat" else pts[:, 1].copy()


def naca4(code: str, n_per_side=201, closed_te=True, chord=1.0) -> np.ndarray:
    """Analytic NACA 4-digit outline in Selig order (TE, upper, LE, lower, TE).

    Uses cosine spacing along the chord; ``closed_te`` selects the
    ``-0.1036`` quartic coefficient that closes the trailing edge.
    """
    if len(code) != 4 or not code.isdigit():
        raise ConfigurationError(f"not a NACA 4-digit code: {code!r}")
    m = int(code[0]) / 100.0
    p = int(code[1]) / 10.0
    t = int(code[2:]) / 100.0
    beta = np.linspace(0.0, np.pi, n_per_side)
    x = 0.5 * (1.0 - np.cos(beta))
    a4 = -0.1036 if closed_te else -0.1015
    yt = 5 * t * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x ** 2 + 0.2843 * x ** 3 + a4 * x ** 4)
    yc = np.zeros_like(x)
    dyc = np.zeros_like(x)
    if m > 0 and p > 0:
        fore = x < p
        yc[fore] = m / p ** 2 * (2 * p * x[fore] - x[fore] ** 2)
        yc[~fore] = m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x[~fore] - x[~fore] ** 2)
        dyc[fore] = 2 * m / p ** 2 * (p - x[fore])
        dyc[~fore] = 2 * m / (1 - p) ** 2 * (p - x[~fore])
    theta = np.arctan(dyc)
    upper = np.column_stack([x - yt * np.sin(theta), yc + yt * np.cos(theta)])
    lower = np.column_stack([x + yt * np.sin(theta), yc - yt * np.cos(theta)])
    return chord * np.vstack([upper[::-1], lower[1:]])


def read_surface_csv(path):
    """Read ``x, y`` columns (header required); an optional ``zeta`` column
    and ``side`` column let a reconstructed outline be refitted exactly.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        if "x" not in header or "y" not in header:
            raise ParseError("header must contain x and y columns", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            rec = dict(zip(header, (c.strip() for c in row)))
            try:
                parsed = {"x": float(rec["x"]), "y": float(rec["y"])}
                if "zeta" in rec:
                    parsed["zeta"] = float(rec["zeta"])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if "side" in rec:
                parsed["side"] = rec["side"]
            rows.append(parsed)
    if not rows:
        raise ParseError("no data rows", 2)
    return rows


def fit_from_rows(rows, n_ctrl=16, ordered=True):
    """Fit from parsed CSV rows, reusing their zeta values when present."""
    if all("zeta" in r and "side" in r for r in rows):
        sides = {}
        for name in ("upper", "lower"):
            sel = [r for r in rows if r["side"] == name]
            if len(sel) < 2:
                raise ParseError(f"too few {name} rows")
            sides[name] = (np.array([[r["x"], r["y"]] for r in sel]),
                           np.array([r["zeta"] for r in sel]))
        (up, zu), (lo, zl) = sides["upper"], sides["lower"]
        return fit_airfoil(up, lo, n_ctrl, zu, zl)
    pts = np.array([[r["x"], r["y"]] for r in rows])
    if pts.shape[0] < n_ctrl:
        raise ConfigurationError(f"{pts.shape[0]} points cannot determine {n_ctrl} control points")
    return fit_bspline_lsq(pts, n_ctrl, ordered=ordered)


def write_reconstruction_csv(path, curve: AirfoilCurve, report: FitReport):
    """Curve sampled at the fit's own parameters, with side and zeta columns."""
    up, lo = reconstruct_curve(curve, report.zeta_upper)[0], \
        reconstruct_curve(curve, report.zeta_lower)[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "zeta", "side"])
        for side, pts, zs in (("upper", up, report.zeta_upper), ("lower", lo, report.zeta_lower)):
            for (x, y), z in zip(pts, zs):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(z)), side])


def write_curve_json(path, curve: AirfoilCurve, report: FitReport | None = None):
    data = curve.to_dict()
    if report is not None:
        data["rmse"] = report.rmse
    Path(path).write_text(json.dumps(data, indent=2))
