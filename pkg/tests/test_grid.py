import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from bukhgeim.exceptions import GridError, GridMismatch, NonFiniteSample, OddGridSize, SupportTooClose
from bukhgeim.grid import (
    ComplexField,
    ConductivityPreset,
    GridSpec,
    TestFunction,
    integrate,
    make_grid,
    read_cfld,
    sample,
    write_cfld,
    write_csv,
)


def test_gridspec_small_example():
    g = GridSpec(1.0, 4)
    assert g.spacing == 0.5
    assert g.node(0, 0) == -1 - 1j


def test_make_grid_example():
    g = make_grid(2.0, 8)
    assert g.spacing == 0.5
    assert g.nodes().size == 64
    assert g.spacing * g.points_per_side == 2 * g.half_width


@pytest.mark.parametrize("N, exc", [(7, OddGridSize), (4, GridError), (0, GridError)])
def test_make_grid_rejects(N, exc):
    with pytest.raises(exc):
        make_grid(1.0, N)


def test_make_grid_rejects_nonpositive_length():
    with pytest.raises(GridError):
        make_grid(0.0, 8)


def test_nodes_row_major_and_inside_square():
    g = make_grid(1.5, 16)
    Z = g.nodes()
    assert Z[3, 5] == g.node(3, 5)
    assert np.all(Z.real >= -1.5) and np.all(Z.real < 1.5)
    assert np.all(Z.imag >= -1.5) and np.all(Z.imag < 1.5)
    assert g.index_of(Z[3, 5] + 0.01) == (3, 5)


def test_sample_examples():
    g4 = GridSpec(1.0, 4)
    assert sample(lambda z: np.zeros_like(z), g4).max_abs() == 0.0
    assert sample(lambda z: z, g4).values[0, 0] == -1 - 1j
    g = make_grid(1.0, 64)
    b = TestFunction("gaussian_bump", 0j, 0.5).sample(g)
    j, k = g.index_of(0j)
    assert b.values[j, k] == 1.0
    assert np.all(b.values[np.abs(g.nodes()) > 0.5] == 0)


def test_sample_rejects_nan():
    with pytest.raises(NonFiniteSample):
        sample(lambda z: np.full(z.shape, np.nan), make_grid(1.0, 8))


def test_integrate_constant_and_zero():
    g = make_grid(1.0, 32)
    assert integrate(ComplexField.constant(g, 1.0)) == pytest.approx(4.0, abs=1e-14)
    assert integrate(ComplexField.zeros(g)) == 0


def test_integrate_gaussian_against_radial_oracle():
    g = make_grid(4.0, 256)
    f = sample(lambda z: np.exp(-np.abs(z) ** 2), g)
    oracle, _ = sint.quad(lambda r: 2 * np.pi * r * np.exp(-r * r), 0, np.inf)
    assert abs(integrate(f) - oracle) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       seed=st.integers(0, 2 ** 31))
def test_integrate_linear(a, b, seed):
    g = make_grid(1.0, 16)
    rng = np.random.default_rng(seed)
    f = ComplexField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    h = ComplexField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    lhs = integrate(f * a + h * b)
    rhs = a * integrate(f) + b * integrate(h)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


@pytest.mark.parametrize("kind", ["gaussian_bump", "cosine_bump", "two_bump"])
def test_integral_independent_of_domain(kind):
    tf = TestFunction(kind, 0.1 - 0.05j, 0.5, 0.7 + 0.2j)
    a = integrate(tf.sample(make_grid(1.0, 64)))
    b = integrate(tf.sample(make_grid(2.0, 128)))
    assert abs(a - b) <= 1e-12 * abs(a)


def test_sample_deterministic():
    g = make_grid(1.0, 32)
    p = ConductivityPreset("complex_bump")
    assert p.sample(g).values.tobytes() == p.sample(g).values.tobytes()


@pytest.mark.parametrize("kind", ["gaussian_bump", "cosine_bump", "two_bump"])
def test_test_function_support_and_peak(kind):
    tf = TestFunction(kind, 0.2 + 0.1j, 0.4, 2.0 - 1j)
    z = tf.center + 0.4 * np.exp(1j * np.linspace(0, 2 * np.pi, 50)) * np.linspace(1.0, 1.5, 50)
    assert np.all(tf(z) == 0)
    assert tf(np.array([tf.center]))[0] == pytest.approx(2.0 - 1j)


@pytest.mark.parametrize("kind", ["unit", "real_bump", "complex_bump", "two_bump"])
def test_presets_equal_one_off_support(kind):
    g = make_grid(1.0, 64)
    gam = ConductivityPreset(kind).sample(g)
    outside = np.abs(g.nodes()) > 0.6
    assert np.all(gam.values[outside] == 1.0)
    assert np.abs(gam.values).min() > 0.1


def test_preset_too_close_to_frame():
    with pytest.raises(SupportTooClose):
        ConductivityPreset("real_bump", center=0.5, radius=0.6).sample(make_grid(1.0, 32))


def test_preset_unknown_kind():
    with pytest.raises(ValueError):
        ConductivityPreset("triple_bump")


def test_preset_dict_roundtrip():
    p = ConductivityPreset("complex_bump", 0.1 + 0.2j, 0.5, 0.3 - 0.1j)
    assert ConductivityPreset.from_dict(p.to_dict()) == p


def test_field_arithmetic_checks_grid():
    a = ComplexField.zeros(make_grid(1.0, 8))
    b = ComplexField.zeros(make_grid(1.0, 16))
    with pytest.raises(GridMismatch):
        a + b


def test_field_values_read_only():
    f = ComplexField.zeros(make_grid(1.0, 8))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_cfld_roundtrip(tmp_path):
    g = make_grid(1.25, 16)
    f = ConductivityPreset("complex_bump", radius=0.5).sample(g)
    p = tmp_path / "f.cfld"
    write_cfld(f, p)
    raw = p.read_bytes()
    assert raw[:4] == b"CFLD"
    assert len(raw) == 4 + 4 + 4 + 8 + 16 * 16 * 16
    back = read_cfld(p)
    assert back.grid == g
    assert back == f


def test_csv_export(tmp_path):
    g = make_grid(1.0, 8)
    f = sample(lambda z: z, g)
    p = tmp_path / "f.csv"
    write_csv(f, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,y,re,im"
    assert len(lines) == 65
    x, y, re, im = map(float, lines[2].split(","))
    assert (x, y) == (re, im) == (-1.0, -0.75)
