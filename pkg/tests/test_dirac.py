import numpy as np
import pytest

from bukhgeim.dirac import (
    DiracPotential,
    conductivity_to_potential,
    log_conductivity,
    potential_to_conductivity,
)
from bukhgeim.exceptions import BranchAmbiguity, NonDecayingSolution, VanishingConductivity
from bukhgeim.grid import ComplexField, ConductivityPreset, TestFunction, make_grid, sample

WINDOW = TestFunction("cosine_bump", 0j, 0.75)


def rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_unit_conductivity_gives_zero_potential():
    g = make_grid(1.0, 64)
    Q = conductivity_to_potential(ConductivityPreset("unit").sample(g))
    assert Q.is_zero()
    assert np.all(potential_to_conductivity(Q).values == 1.0)


@pytest.mark.parametrize("log_gamma, q12, q21", [
    (lambda z: z.real, -0.25, -0.25),
    (lambda z: 1j * z.imag, -0.25, 0.25),
])
def test_wirtinger_examples(log_gamma, q12, q21):
    # the window has a flat maximum at 0, so log(gamma) is linear to second order there
    g = make_grid(1.0, 128)
    gamma = sample(lambda z: np.exp(log_gamma(z) * WINDOW(z)), g)
    Q = conductivity_to_potential(gamma)
    j, k = g.index_of(0j)
    assert Q.Q12.values[j, k] == pytest.approx(q12, abs=1e-9)
    assert Q.Q21.values[j, k] == pytest.approx(q21, abs=1e-9)


@pytest.mark.parametrize("kind", ["real_bump", "complex_bump", "two_bump"])
def test_roundtrip(kind):
    g = make_grid(1.0, 256)
    gamma = ConductivityPreset(kind).sample(g)
    back = potential_to_conductivity(conductivity_to_potential(gamma))
    assert rel_l2(back.values, gamma.values) <= 1e-3


def test_roundtrip_fd_mode():
    g = make_grid(1.0, 256)
    gamma = ConductivityPreset("complex_bump").sample(g)
    back = potential_to_conductivity(conductivity_to_potential(gamma, mode="fd"))
    assert rel_l2(back.values, gamma.values) <= 1e-3


def test_real_conductivity_links_entries():
    g = make_grid(1.0, 128)
    Q = conductivity_to_potential(ConductivityPreset("real_bump").sample(g))
    assert np.abs(Q.Q21.values - Q.Q12.values).max() <= 1e-14


@pytest.mark.parametrize("mode, radius", [("spectral", 1), ("fd", 2)])
def test_support_within_stencil(mode, radius):
    from scipy.ndimage import binary_dilation

    g = make_grid(1.0, 64)
    gamma = ConductivityPreset("two_bump").sample(g)
    Q = conductivity_to_potential(gamma, mode)
    allowed = binary_dilation(gamma.values != 1.0, iterations=radius)
    assert not np.any(Q.support_mask() & ~allowed)


def test_vanishing_conductivity():
    g = make_grid(1.0, 32)
    gamma = sample(lambda z: 1 - TestFunction("gaussian_bump", 0j, 0.5)(z), g)
    with pytest.raises(VanishingConductivity):
        conductivity_to_potential(gamma)


def test_branch_ambiguity_when_phase_is_unresolved():
    g = make_grid(1.0, 16)
    with pytest.raises(BranchAmbiguity):
        log_conductivity(ConductivityPreset("complex_bump", amplitude=10j).sample(g))


def test_log_branch_continuous():
    g = make_grid(1.0, 128)
    gamma = ConductivityPreset("complex_bump", amplitude=0.5 + 4j).sample(g)
    lg = log_conductivity(gamma)
    assert np.abs(np.exp(lg.values) - gamma.values).max() < 1e-12
    assert lg.values.imag.max() > np.pi


def test_non_decaying_solution():
    g = make_grid(1.0, 32)
    q = np.zeros(g.shape, complex)
    q[4:-4, 4:-4] = 1.0
    Q = DiracPotential(ComplexField.zeros(g), ComplexField(g, q))
    with pytest.raises(NonDecayingSolution):
        potential_to_conductivity(Q)


def test_save_load(tmp_path):
    g = make_grid(1.0, 32)
    Q = conductivity_to_potential(ConductivityPreset("complex_bump").sample(g))
    paths = Q.save(tmp_path / "q", {"preset": "complex_bump"})
    assert [p.name for p in paths] == ["q.Q12.cfld", "q.Q21.cfld", "q.json"]
    back = DiracPotential.load(tmp_path / "q")
    assert back.Q12 == Q.Q12 and back.Q21 == Q.Q21
    assert np.all(back.matrix()[[0, 1], [0, 1]] == 0)
