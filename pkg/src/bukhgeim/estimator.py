"""Estimator-style wrappers around the pipeline.

Each stage is a scikit-learn compatible object (``get_params`` /
``set_params``, ``fit`` returning ``self``, learned state in trailing
underscore attributes), so stages can be configured, cloned and chained
the usual way.  Inputs are package objects rather than feature matrices;
the ``check_*`` helpers validate them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cgo import DEFAULT_MAX_ITER, DEFAULT_TOL
from .dirac import DiracPotential, conductivity_to_potential, potential_to_conductivity
from .exceptions import GridMismatch
from .grid import ComplexField, GridSpec
from .reconstruction import error_metrics, reconstruct, w_grid
from .scattering import CONJ_MODES, METHODS, Annulus, ScatteringDataset, compute_dataset, w_lattice

__all__ = [
    "DiracMap",
    "ScatteringTransform",
    "AnnulusReconstructor",
    "check_field",
    "check_potential",
    "check_dataset",
]


def check_field(f, grid: GridSpec | None = None) -> ComplexField:
    """Accept a :class:`ComplexField` (or a square array together with ``grid``)."""
    if isinstance(f, ComplexField):
        if grid is not None and f.grid != grid:
            raise GridMismatch(f"field lives on {f.grid}, expected {grid}")
        return f
    if grid is None:
        raise TypeError("a bare array needs a grid")
    return ComplexField(grid, np.asarray(f))


def check_potential(Q) -> DiracPotential:
    if not isinstance(Q, DiracPotential):
        raise TypeError(f"expected a DiracPotential, got {type(Q).__name__}")
    return Q


def check_dataset(ds) -> ScatteringDataset:
    if not isinstance(ds, ScatteringDataset):
        raise TypeError(f"expected a ScatteringDataset, got {type(ds).__name__}")
    return ds


class DiracMap(TransformerMixin, BaseEstimator):
    """Conductivity to Dirac potential; ``inverse_transform`` goes back.

    Parameters
    ----------
    mode : {"spectral", "fd"}
        Differentiation used for the Wirtinger derivatives.
    frame_tol : float
        Tolerance of the frame check in the inverse map.
    """

    def __init__(self, mode: str = "spectral", frame_tol: float = 1e-2):
        self.mode = mode
        self.frame_tol = frame_tol

    def fit(self, gamma=None, y=None):
        if self.mode not in ("spectral", "fd"):
            raise ValueError(f"mode must be 'spectral' or 'fd', got {self.mode!r}")
        self.fitted_ = True
        return self

    def transform(self, gamma) -> DiracPotential:
        check_is_fitted(self)
        return conductivity_to_potential(check_field(gamma), self.mode)

    def inverse_transform(self, Q) -> ComplexField:
        check_is_fitted(self)
        return potential_to_conductivity(check_potential(Q), frame_tol=self.frame_tol)


class ScatteringTransform(TransformerMixin, BaseEstimator):
    """Potential to scattering dataset over one annulus and a ``w`` lattice."""

    def __init__(self, R: float = 20.0, n_r: int = 4, n_theta: int = 8, w_stride: int = 8,
                 w_radius: float | None = 0.7, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, conj_mode: str = "conjugated",
                 method: str = "volume", parallel_width: int = 1):
        self.R = R
        self.n_r = n_r
        self.n_theta = n_theta
        self.w_stride = w_stride
        self.w_radius = w_radius
        self.tol = tol
        self.max_iter = max_iter
        self.conj_mode = conj_mode
        self.method = method
        self.parallel_width = parallel_width

    def fit(self, Q=None, y=None):
        if self.conj_mode not in CONJ_MODES:
            raise ValueError(f"conj_mode must be one of {CONJ_MODES}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.annulus_ = Annulus(self.R, None, self.n_r, self.n_theta)
        return self

    def transform(self, Q) -> ScatteringDataset:
        check_is_fitted(self)
        Q = check_potential(Q)
        ws = w_lattice(Q.grid, self.w_stride, self.w_radius)
        return compute_dataset(Q, self.annulus_, ws, self.tol, self.max_iter, self.parallel_width,
                               self.conj_mode, self.method, self.w_stride)


class AnnulusReconstructor(BaseEstimator):
    """Pointwise annulus-average reconstruction.

    After ``fit(dataset)``: ``Q_`` (potential on the ``w`` lattice),
    ``gamma_`` (conductivity, if ``with_gamma``), ``diag_noise_floor_``
    and ``result_`` (the full :class:`ReconstructionResult`).
    """

    def __init__(self, with_gamma: bool = True, frame_tol: float = 1e-2):
        self.with_gamma = with_gamma
        self.frame_tol = frame_tol

    def fit(self, ds, y=None):
        ds = check_dataset(ds)
        self.result_ = reconstruct(ds, with_gamma=self.with_gamma, frame_tol=self.frame_tol)
        self.Q_ = self.result_.Q_recovered
        self.gamma_ = self.result_.gamma
        self.diag_noise_floor_ = self.result_.diag_noise_floor
        self.R_ = self.result_.R_used
        return self

    def predict(self, ds=None) -> DiracPotential:
        if ds is not None:
            self.fit(ds)
        check_is_fitted(self)
        return self.Q_

    def score(self, ds, Q_true: DiracPotential) -> float:
        """Negative relative L2 error of the potential on the ``w`` lattice."""
        ds = check_dataset(ds)
        Q_true = check_potential(Q_true)
        Q_rec = self.predict(ds)
        _, stride = w_grid(ds)
        sub = DiracPotential(ComplexField(Q_rec.grid, Q_true.Q12.values[::stride, ::stride]),
                             ComplexField(Q_rec.grid, Q_true.Q21.values[::stride, ::stride]))
        return -error_metrics(Q_rec, sub).rel_l2
