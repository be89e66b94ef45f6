import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from bukhgeim.cauchy import (
    CauchyKernel,
    _quadrant_integral,
    cauchy_oracle,
    cauchy_transform,
    dbar,
    partial,
    singular_cell_weight,
)
from bukhgeim.exceptions import GridMismatch, SupportTooClose
from bukhgeim.grid import ComplexField, TestFunction, make_grid, sample


def rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def disk(a):
    return lambda z: (np.abs(z) <= a).astype(complex)


SIGMA = 0.2


def window(z):
    """Gaussian window, below 1e-10 on the frame of the unit square."""
    return np.exp(-np.abs(z) ** 2 / SIGMA ** 2)


def random_density(grid, seed):
    rng = np.random.default_rng(seed)
    f = ComplexField.zeros(grid)
    for _ in range(3):
        c = complex(*rng.uniform(-0.25, 0.25, 2))
        a = complex(*rng.normal(size=2))
        f = f + TestFunction("gaussian_bump", c, rng.uniform(0.3, 0.5), a).sample(grid)
    return f


def test_quadrant_integral_matches_numerical():
    a = 0.3
    re, _ = sint.dblquad(lambda y, x: x / (x * x + y * y), 0, a, 0, a)
    im, _ = sint.dblquad(lambda y, x: -y / (x * x + y * y), 0, a, 0, a)
    assert _quadrant_integral(a) == pytest.approx(re + 1j * im, rel=1e-8)


def test_singular_cell_weight_vanishes():
    assert abs(singular_cell_weight(0.1)) < 1e-15


def test_kernel_padding():
    k = CauchyKernel(make_grid(1.0, 32))
    assert k.padded_size >= 64
    assert k.kernel_hat.shape == (k.padded_size, k.padded_size)


def test_zero_density():
    g = make_grid(1.0, 32)
    f = ComplexField.zeros(g)
    assert cauchy_transform(f).max_abs() == 0.0
    assert cauchy_oracle(f, 0.3 + 0.1j) == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fast_matches_oracle(seed):
    g = make_grid(1.0, 32)
    f = random_density(g, seed)
    fast = cauchy_transform(f).values
    Z = g.nodes()
    slow = np.array([[cauchy_oracle(f, Z[j, k]) for k in range(32)] for j in range(32)])
    assert rel_l2(fast, slow) <= 1e-3


def test_fast_matches_oracle_uncorrected():
    g = make_grid(1.0, 32)
    f = random_density(g, 5)
    fast = cauchy_transform(f, CauchyKernel(g, corrected=False)).values
    Z = g.nodes()
    slow = np.array([[cauchy_oracle(f, Z[j, k], corrected=False) for k in range(32)] for j in range(32)])
    assert rel_l2(fast, slow) <= 1e-12


def test_unit_disk_analytic():
    g = make_grid(2.0, 256)
    f = sample(disk(1.0), g)
    C = cauchy_transform(f).values
    Z = g.nodes()
    r = np.abs(Z)
    exact = np.where(r <= 1, np.conj(Z), 1 / np.where(r == 0, 1, Z))
    keep = np.abs(r - 1) > 3 * g.spacing
    assert rel_l2(C[keep], exact[keep]) <= 0.02


def test_half_disk_analytic():
    a = 0.5
    g = make_grid(1.0, 128)
    C = cauchy_transform(sample(disk(a), g)).values
    Z = g.nodes()
    keep = np.abs(Z) > a + 3 * g.spacing
    assert rel_l2(C[keep], a * a / Z[keep]) <= 0.02


def test_oracle_unit_disk_far_point():
    g = make_grid(2.0, 256)
    assert cauchy_oracle(sample(disk(1.0), g), 2.0) == pytest.approx(0.5, rel=0.01)


def test_dbar_partial_of_conj_z():
    # dbar(conj(z) G) = G (1 - |z|^2/s^2), partial(conj(z) G) = -conj(z)^2 G / s^2
    g = make_grid(1.0, 128)
    Z = g.nodes()
    G = window(Z)
    f = sample(lambda z: np.conj(z) * window(z), g)
    assert np.abs(dbar(f).values - G * (1 - np.abs(Z) ** 2 / SIGMA ** 2)).max() <= 1e-8
    assert np.abs(partial(f).values + np.conj(Z) ** 2 * G / SIGMA ** 2).max() <= 1e-8
    j, k = g.index_of(0j)
    assert abs(dbar(f).values[j, k] - 1) <= 1e-8


def test_dbar_partial_of_z():
    g = make_grid(1.0, 128)
    Z = g.nodes()
    G = window(Z)
    f = sample(lambda z: z * window(z), g)
    assert np.abs(partial(f).values - G * (1 - np.abs(Z) ** 2 / SIGMA ** 2)).max() <= 1e-8
    assert np.abs(dbar(f).values + Z ** 2 * G / SIGMA ** 2).max() <= 1e-8


def test_fd_mode_on_linear_field():
    g = make_grid(1.0, 32)
    f = sample(lambda z: 2 * z + 3j * np.conj(z), g)
    assert np.allclose(partial(f, "fd").values, 2)
    assert np.allclose(dbar(f, "fd").values, 3j)


def test_unknown_mode():
    with pytest.raises(ValueError):
        dbar(ComplexField.zeros(make_grid(1.0, 8)), "magic")


@pytest.mark.parametrize("seed", [0, 3])
def test_dbar_inverts_cauchy(seed):
    g = make_grid(1.0, 128)
    f = random_density(g, seed)
    back = dbar(cauchy_transform(f), "fd")
    assert rel_l2(back.values, f.values) <= 1e-3


@settings(max_examples=10, deadline=None)
@given(a=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       seed=st.integers(0, 1000))
def test_linearity(a, seed):
    g = make_grid(1.0, 32)
    f, h = random_density(g, seed), random_density(g, seed + 1)
    k = CauchyKernel(g)
    lhs = cauchy_transform(f * a + h, k).values
    rhs = a * cauchy_transform(f, k).values + cauchy_transform(h, k).values
    assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(rhs).max())


def test_translation_equivariance():
    g = make_grid(1.0, 64)
    f = TestFunction("cosine_bump", 0.05, 0.4, 1 + 1j).sample(g)
    shifted = TestFunction("cosine_bump", 0.05 + g.spacing, 0.4, 1 + 1j).sample(g)
    a = cauchy_transform(f).values
    b = cauchy_transform(shifted).values
    err = np.abs(b[1:-1, :] - a[:-2, :]).max() / np.abs(a).max()
    assert err <= 1e-10


def test_support_check():
    g = make_grid(1.0, 32)
    with pytest.raises(SupportTooClose):
        cauchy_transform(ComplexField.constant(g, 1.0))


def test_kernel_grid_mismatch():
    f = ComplexField.zeros(make_grid(1.0, 16))
    with pytest.raises(GridMismatch):
        cauchy_transform(f, CauchyKernel(make_grid(1.0, 32)))
