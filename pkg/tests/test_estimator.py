import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from bukhgeim.dirac import conductivity_to_potential
from bukhgeim.estimator import (
    AnnulusReconstructor,
    DiracMap,
    ScatteringTransform,
    check_dataset,
    check_field,
    check_potential,
)
from bukhgeim.exceptions import GridMismatch
from bukhgeim.grid import ComplexField, ConductivityPreset, make_grid
from bukhgeim.reconstruction import reconstruct
from bukhgeim.scattering import ScatteringDataset

G = make_grid(1.0, 64)
GAMMA = ConductivityPreset("complex_bump").sample(G)


@pytest.fixture(scope="module")
def dataset():
    Q = conductivity_to_potential(GAMMA)
    st = ScatteringTransform(R=20, n_r=1, n_theta=4, w_stride=4, w_radius=0.7).fit()
    return Q, st.transform(Q)


def test_params_and_clone():
    st = ScatteringTransform(R=40, n_theta=16)
    p = st.get_params()
    assert p["R"] == 40 and p["n_theta"] == 16 and p["conj_mode"] == "conjugated"
    c = clone(st).set_params(R=10)
    assert c.R == 10 and st.R == 40
    assert clone(DiracMap(mode="fd")).mode == "fd"
    assert AnnulusReconstructor(with_gamma=False).get_params() == {"with_gamma": False, "frame_tol": 1e-2}


def test_not_fitted():
    with pytest.raises(NotFittedError):
        DiracMap().transform(GAMMA)
    with pytest.raises(NotFittedError):
        ScatteringTransform().transform(conductivity_to_potential(GAMMA))
    with pytest.raises(NotFittedError):
        AnnulusReconstructor().predict()


def test_bad_params_raise_on_fit():
    with pytest.raises(ValueError):
        DiracMap(mode="magic").fit()
    with pytest.raises(ValueError):
        ScatteringTransform(conj_mode="both").fit()
    with pytest.raises(ValueError):
        ScatteringTransform(method="circle").fit()


def test_dirac_map_roundtrip():
    dm = DiracMap().fit(GAMMA)
    Q = dm.transform(GAMMA)
    direct = conductivity_to_potential(GAMMA)
    assert Q.Q12 == direct.Q12 and Q.Q21 == direct.Q21
    back = dm.inverse_transform(Q)
    assert np.linalg.norm(back.values - GAMMA.values) / np.linalg.norm(GAMMA.values) <= 1e-2


def test_pipeline_transform_matches_manual(dataset):
    Q, ds = dataset
    pipe = make_pipeline(DiracMap(), ScatteringTransform(R=20, n_r=1, n_theta=4, w_stride=4, w_radius=0.7))
    ds2 = pipe.fit(GAMMA).transform(GAMMA)
    assert isinstance(ds2, ScatteringDataset)
    assert ds2.h.tobytes() == ds.h.tobytes()


def test_reconstructor(dataset):
    Q, ds = dataset
    rec = AnnulusReconstructor().fit(ds)
    ref = reconstruct(ds)
    assert rec.R_ == 20
    assert rec.Q_.Q12 == ref.Q_recovered.Q12
    assert rec.diag_noise_floor_ == ref.diag_noise_floor
    assert rec.gamma_ is not None and rec.gamma_.grid == rec.Q_.grid
    assert rec.predict() is rec.Q_
    s = rec.score(ds, Q)
    assert -1.0 < s < 0.0
    assert AnnulusReconstructor(with_gamma=False).fit(ds).gamma_ is None


def test_checkers():
    assert check_field(GAMMA) is GAMMA
    f = check_field(np.ones(G.shape), G)
    assert isinstance(f, ComplexField) and f.grid == G
    with pytest.raises(TypeError):
        check_field(np.ones(G.shape))
    with pytest.raises(GridMismatch):
        check_field(GAMMA, make_grid(1.0, 32))
    with pytest.raises(TypeError):
        check_potential(GAMMA)
    with pytest.raises(TypeError):
        check_dataset(GAMMA)
