import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from khronos_mf.errors import (
    DataError,
    DimensionError,
    DomainError,
    InsufficientFarfieldError,
    InterpolationError,
    ParseError,
)
from khronos_mf.fields import (
    AirfoilCase,
    FreestreamState,
    NormStats,
    case_freestream,
    cp_from_edge_velocity,
    cp_from_pressure,
    farfield_band,
    freestream_state,
    interpolate_to_stations,
    parse_case_meta,
    pressure_from_cp,
    read_case_csv,
    reconstruct_pressure,
    reynolds,
    surface_cp,
)

SURFACE = np.array([[0.0, 0.0], [0.5, 0.01], [1.0, 0.0], [0.5, -0.01]])


def disc_case(n=10_000, seed=0, shift=(0.0, 0.0), p_const=0.0, U=30.0):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(0, 1, n)) * 10.0
    t = rng.uniform(0, 2 * np.pi, n)
    x, y = r * np.cos(t) + 0.5, r * np.sin(t)
    p_bar = 0.05 * np.sin(x) + p_const
    u = U + 0.01 * np.cos(y)
    v = 0.01 * np.sin(x)
    internal = np.column_stack([x, y, p_bar, u, v])
    internal[:, :2] += shift
    surface = SURFACE + shift
    surf_p = np.array([0.5, -0.3, 0.1, 0.2]) * U ** 2 + p_const
    return AirfoilCase(surface, U, 2.0, internal, surf_p)


def brute_force_band(case, margin=0.5, q=0.99):
    xs, ys = case.surface[:, 0], case.surface[:, 1]
    xc, yc = (xs.max() + xs.min()) / 2, (ys.max() + ys.min()) / 2
    r_surf = max(np.hypot(x - xc, y - yc) for x, y in case.surface)
    radii = [np.hypot(p[0] - xc, p[1] - yc) for p in case.internal]
    cand = [i for i, r in enumerate(radii) if r >= r_surf + margin * case.chord]
    cutoff = np.quantile([radii[i] for i in cand], q)
    return [i for i in cand if radii[i] <= cutoff]


def test_farfield_band_matches_brute_force():
    case = disc_case()
    np.testing.assert_array_equal(farfield_band(case), brute_force_band(case))


def test_farfield_band_translation_invariant():
    a = farfield_band(disc_case())
    b = farfield_band(disc_case(shift=(37.0, -4.5)))
    np.testing.assert_array_equal(a, b)


def test_farfield_band_errors():
    case = disc_case()
    case.internal[:, :2] *= 0.01
    with pytest.raises(InsufficientFarfieldError):
        farfield_band(case)
    with pytest.raises(InsufficientFarfieldError):
        farfield_band(AirfoilCase(SURFACE, 10.0, 0.0))
    with pytest.raises(InsufficientFarfieldError):
        farfield_band(disc_case(n=50))


def test_freestream_examples():
    fs = freestream_state(np.full(5, 2.5), np.full(5, 7.0), np.zeros(5))
    assert fs.p_bar_inf == 2.5 and fs.U_inf == 7.0
    assert freestream_state([0.0, 0.0], [3.0, 0.0], [0.0, 5.0]).U_inf == 4.0
    with pytest.raises(InsufficientFarfieldError):
        freestream_state([], [], [])
    with pytest.raises(DomainError):
        FreestreamState(0.0, 0.0)


def test_pressure_reconstruction_examples():
    fs = FreestreamState(3.0, 20.0)
    assert reconstruct_pressure(3.0, fs) == 101325.0
    assert reconstruct_pressure(103.0, fs) == pytest.approx(101447.5, abs=1e-9)


def test_cp_examples():
    fs = FreestreamState(0.0, 40.0)
    assert cp_from_pressure(101325.0, fs) == 0.0
    assert cp_from_pressure(101325.0 + 0.5 * 1.225 * 1600, fs) == pytest.approx(1.0)
    assert cp_from_pressure(101325.0 + 490.0, fs) == pytest.approx(0.5, abs=1e-12)


def test_edge_velocity_examples():
    assert cp_from_edge_velocity(1.0) == 0.0
    assert cp_from_edge_velocity(0.0) == 1.0
    assert cp_from_edge_velocity(1.2) == pytest.approx(-0.44, abs=1e-12)


def test_reynolds_example():
    case = AirfoilCase(np.array([[0.0, 0.0], [1.0, 0.0]]), 30.0, 0.0)
    assert reynolds(case) == pytest.approx(2.0304e6, rel=1e-4)


def test_case_validation():
    with pytest.raises(DomainError):
        AirfoilCase(SURFACE, 0.0, 0.0)
    with pytest.raises(DimensionError):
        AirfoilCase(np.zeros((4, 3)), 1.0, 0.0)
    with pytest.raises(DataError):
        surface_cp(AirfoilCase(SURFACE, 10.0, 0.0))


@pytest.mark.parametrize("C", [1.0, -250.0, 1e4, 3.7e5])
def test_gauge_invariance_of_surface_cp(C):
    base = surface_cp(disc_case())
    shifted = surface_cp(disc_case(p_const=C))
    assert np.max(np.abs(shifted - base)) <= 1e-12 * max(1.0, 1e-4 * abs(C))


def test_pressure_cp_roundtrip():
    rng = np.random.default_rng(0)
    cp = rng.uniform(-3, 1, 1000)
    U = 47.3
    p = pressure_from_cp(cp, U)
    back = cp_from_pressure(p, FreestreamState(0.0, U))
    p2 = pressure_from_cp(back, U)
    assert np.max(np.abs(p2 - p) / np.abs(p)) <= 1e-9
    np.testing.assert_allclose(back, cp, atol=1e-9)


def test_case_freestream_recovers_speed():
    fs = case_freestream(disc_case(U=30.0))
    assert fs.U_inf == pytest.approx(30.0, abs=0.02)


def test_normstats_examples():
    X = np.array([[0.0, 5.0], [2.0, 5.0], [1.0, 5.0]])
    stats = NormStats.fit(X)
    Xn = stats.apply(X)
    np.testing.assert_array_equal(Xn[:, 0], [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(Xn[:, 1], 0.5)
    np.testing.assert_array_equal(stats.invert(Xn), X)
    with pytest.raises(DimensionError):
        stats.apply(np.zeros((2, 3)))
    again = NormStats.from_dict(stats.to_dict())
    np.testing.assert_array_equal(again.min, stats.min)
    np.testing.assert_array_equal(again.max, stats.max)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
def test_normstats_roundtrip_property(seed, scale):
    X = np.random.default_rng(seed).normal(size=(30, 4)) * scale
    stats = NormStats.fit(X)
    Xn = stats.apply(X)
    assert Xn.min() >= 0.0 and Xn.max() <= 1.0
    assert np.max(np.abs(stats.invert(Xn) - X)) <= 1e-12 * max(1.0, scale)


def test_interpolation_examples():
    xs = np.array([0.0, 0.5, 1.0])
    up, lo = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.0, 4.0])
    out = interpolate_to_stations(xs, up, xs, lo, [0.5, 0.25, 0.75], [1.0, 1.0, -1.0])
    np.testing.assert_allclose(out, [2.0, 1.5, 2.0])


def test_interpolation_linear_precision():
    xs = np.linspace(0, 1, 7)
    tx = np.random.default_rng(0).uniform(0, 1, 500)
    ty = np.where(np.arange(500) % 2, 1.0, -1.0)
    out = interpolate_to_stations(xs, 2 * xs - 1, xs, -xs + 0.3, tx, ty)
    np.testing.assert_allclose(out, np.where(ty >= 0, 2 * tx - 1, -tx + 0.3), atol=1e-12)


def test_interpolation_errors():
    with pytest.raises(InterpolationError):
        interpolate_to_stations([0.0], [1.0], [0.0, 1.0], [0.0, 1.0], [0.5], [1.0])
    with pytest.raises(InterpolationError):
        interpolate_to_stations([1.0, 0.0], [1.0, 2.0], [0.0, 1.0], [0.0, 1.0], [0.5], [1.0])


def test_case_meta_from_filename_and_override():
    assert parse_case_meta("dir/naca2412_U42.5_A-3.0.csv") == (42.5, -3.0)
    assert parse_case_meta("foo.csv", {"foo.csv": {"U": 30, "aoa": 2}}) == (30.0, 2.0)
    with pytest.raises(DataError):
        parse_case_meta("foo.csv")


def test_read_case_csv(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("cp,x,y,p\n" + "".join(f"{i},{i / 4},0,{i}\n" for i in range(5)))
    case = read_case_csv(path)
    np.testing.assert_array_equal(case["x"], np.arange(5) / 4)
    path.write_text("x,y,p,cp\n0,0,0,0\n1,2,x,4\n")
    with pytest.raises(ParseError) as info:
        read_case_csv(path)
    assert info.value.line == 3
