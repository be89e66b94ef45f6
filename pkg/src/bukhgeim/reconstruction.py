"""Annulus-averaged recovery of the potential and the conductivity.

The weak formula pairs the data with a test function ``g``:

    integral g Q dsigma ~ 1/(4 pi^2 ln 2) * sum_lam wt_lam |lam|^-1 sum_w A g(w) h(lam, w),

where ``A`` is the cell area of the ``w`` lattice.  Dropping the ``w``
integration gives the pointwise estimate ``Q_rec(w)``.  Both rest on the
stationary-phase limit

    integral e^{-i Im[lam (z-w)^2] / 2} g(w) dsigma_w ~ (2 pi / |lam|) g(z),

and ``integral_R^{2R} r^-1 dr * 2 pi * 2 pi = 4 pi^2 ln 2`` over one octave.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.ndimage import binary_dilation

from .cauchy import CauchyKernel
from .cgo import SpectralPoint, _phase
from .dirac import DiracPotential, potential_to_conductivity
from .exceptions import GridError, GridMismatch, PartialDataset, SupportNotCovered
from .grid import ComplexField, GridSpec, TestFunction, integrate, make_grid
from .scattering import ScatteringDataset

__all__ = [
    "RECONSTRUCTION_CONSTANT",
    "ErrorMetrics",
    "ReconstructionResult",
    "StationaryPhaseTable",
    "annulus_average",
    "reconstruct_weak",
    "reconstruct_pointwise",
    "reconstruct",
    "recover_gamma",
    "stationary_phase_check",
    "error_metrics",
    "pairing",
    "w_grid",
]

RECONSTRUCTION_CONSTANT = 4.0 * math.pi ** 2 * math.log(2.0)


def _require_complete(ds: ScatteringDataset) -> None:
    if not ds.is_complete:
        fails = ds.failures
        raise PartialDataset(f"{len(fails)} of {ds.n_samples} samples failed, first: {fails[0]}")


def _radial_weights(ds: ScatteringDataset) -> np.ndarray:
    return ds.weights / np.abs(ds.lambdas)


def annulus_average(ds: ScatteringDataset, weights: np.ndarray | None = None) -> np.ndarray:
    """``1/(4 pi^2 ln 2) sum_lam wt_lam |lam|^-1 h(lam, w)`` for every ``w``; shape ``(n_w, 2, 2)``.

    The sum over ``lam`` runs in storage order for reproducibility.
    """
    wl = _radial_weights(ds) if weights is None else weights
    return np.einsum("l,lwij->wij", wl, ds.h) / RECONSTRUCTION_CONSTANT


def w_grid(ds: ScatteringDataset) -> tuple[GridSpec, int]:
    """Coarse grid formed by the ``w`` lattice and its stride on the data grid."""
    idx = ds.w_index
    stride = ds.w_stride
    if stride is None:
        stride = int(reduce(math.gcd, idx.ravel().tolist(), 0)) or 1
    if np.any(idx % stride):
        raise GridError(f"w samples are not on a stride-{stride} lattice")
    return ds.grid.subgrid(stride), stride


def reconstruct_pointwise(ds: ScatteringDataset) -> DiracPotential:
    """Pointwise potential on the ``w`` lattice; zero at lattice nodes without samples.

    ``h12`` maps to ``Q12`` and ``h21`` to ``Q21``; see :func:`reconstruct`
    for the diagonal noise floor.

    Raises
    ------
    PartialDataset
        Some sample failed or its two forms disagreed.
    """
    _require_complete(ds)
    coarse, stride = w_grid(ds)
    avg = annulus_average(ds)
    q12 = np.zeros(coarse.shape, dtype=np.complex128)
    q21 = np.zeros(coarse.shape, dtype=np.complex128)
    j = ds.w_index[:, 0] // stride
    k = ds.w_index[:, 1] // stride
    q12[j, k] = avg[:, 0, 1]
    q21[j, k] = avg[:, 1, 0]
    return DiracPotential(ComplexField(coarse, q12), ComplexField(coarse, q21))


def _covered(ds: ScatteringDataset, g: TestFunction) -> bool:
    coarse, stride = w_grid(ds)
    have = {tuple(ij) for ij in (ds.w_index // stride).tolist()}
    reach = g.radius + coarse.spacing
    x = coarse.axis
    for j in range(coarse.points_per_side):
        for k in range(coarse.points_per_side):
            if abs(complex(x[j], x[k]) - g.center) <= reach and (j, k) not in have:
                return False
    return True


def reconstruct_weak(ds: ScatteringDataset, g: TestFunction) -> np.ndarray:
    """Weak-form estimate of ``integral g Q dsigma`` as a 2x2 matrix.

    Raises
    ------
    SupportNotCovered
        Some lattice node within one lattice spacing of ``supp g`` has no sample.
    """
    _require_complete(ds)
    if not _covered(ds, g):
        raise SupportNotCovered(
            f"w samples do not cover the support of g (center {g.center}, radius {g.radius})"
        )
    coarse, _ = w_grid(ds)
    gw = g(ds.w_samples)
    area = coarse.spacing ** 2
    inner = np.einsum("w,lwij->lij", area * gw, ds.h)
    return np.einsum("l,lij->ij", _radial_weights(ds), inner) / RECONSTRUCTION_CONSTANT


def pairing(Q: DiracPotential, g: TestFunction) -> np.ndarray:
    """Direct ``integral g Q dsigma`` on the potential's grid (zero diagonal)."""
    gv = g.sample(Q.grid)
    out = np.zeros((2, 2), dtype=np.complex128)
    out[0, 1] = integrate(gv * Q.Q12)
    out[1, 0] = integrate(gv * Q.Q21)
    return out


def recover_gamma(ds: ScatteringDataset, kernel: CauchyKernel | None = None,
                  frame_tol: float = 1e-2) -> ComplexField:
    """Conductivity on the ``w`` lattice from the pointwise potential."""
    return potential_to_conductivity(reconstruct_pointwise(ds), kernel, frame_tol)


# -- error metrics ---------------------------------------------------------------

@dataclass(frozen=True)
class ErrorMetrics:
    """Relative errors; the ``*_support`` variants are restricted to ``supp(ref - background)`` dilated by 2 cells."""

    rel_l2: float
    rel_linf: float
    rel_l2_support: float
    rel_linf_support: float

    def to_dict(self) -> dict:
        return {"rel_l2": self.rel_l2, "rel_linf": self.rel_linf,
                "rel_l2_support": self.rel_l2_support, "rel_linf_support": self.rel_linf_support}


def _rel(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def _as_values(f) -> tuple[GridSpec, np.ndarray]:
    if isinstance(f, DiracPotential):
        return f.grid, np.stack([f.Q12.values, f.Q21.values])
    return f.grid, f.values[None]


def error_metrics(f, ref, background: complex = 0.0, dilate: int = 2) -> ErrorMetrics:
    """Relative L2 and Linf errors of ``f`` against ``ref``.

    Accepts two :class:`ComplexField` or two :class:`DiracPotential` (both
    entries pooled).  ``background`` is the value ``ref`` takes off its
    support (1 for conductivities).

    Raises
    ------
    GridMismatch
        ``f`` and ``ref`` live on different grids.
    """
    gf, a = _as_values(f)
    gr, b = _as_values(ref)
    if gf != gr or a.shape != b.shape:
        raise GridMismatch(f"cannot compare fields on {gf} and {gr}")
    d = a - b
    mask = np.any(np.abs(b - background) > 0.0, axis=0)
    if dilate > 0 and mask.any():
        mask = binary_dilation(mask, iterations=dilate)
    m = np.broadcast_to(mask, d.shape)
    return ErrorMetrics(
        rel_l2=_rel(float(np.linalg.norm(d)), float(np.linalg.norm(b))),
        rel_linf=_rel(float(np.abs(d).max()), float(np.abs(b).max())),
        rel_l2_support=_rel(float(np.linalg.norm(d[m])), float(np.linalg.norm(b[m]))) if mask.any() else 0.0,
        rel_linf_support=_rel(float(np.abs(d[m]).max()), float(np.abs(b[m]).max())) if mask.any() else 0.0,
    )


# -- full result -------------------------------------------------------------------

@dataclass(eq=False)
class ReconstructionResult:
    """Pointwise reconstruction with diagnostics.

    ``quadrature_residual[w]`` compares the full annulus rule with the rule
    on every other angle (a quadrature-error indicator per ``w``).
    ``diag_noise_floor`` is ``max |diag| / max |off-diag|`` of the annulus
    average.
    """

    Q_recovered: DiracPotential
    R_used: float
    diagonal: np.ndarray
    diag_noise_floor: float
    quadrature_residual: np.ndarray
    gamma: ComplexField | None = None
    errors: dict = field(default_factory=dict)


def _coarse_angle_weights(ds: ScatteringDataset) -> np.ndarray | None:
    n_t = ds.annulus.n_theta
    if n_t < 2 or n_t % 2:
        return None
    wl = _radial_weights(ds).reshape(ds.annulus.n_r, n_t).copy()
    wl[:, 1::2] = 0.0
    wl[:, 0::2] *= 2.0
    return wl.ravel()


def reconstruct(ds: ScatteringDataset, truth: DiracPotential | None = None,
                gamma_truth: ComplexField | None = None, with_gamma: bool = True,
                frame_tol: float = 1e-2) -> ReconstructionResult:
    """Pointwise reconstruction, optional conductivity recovery and error metrics.

    ``truth`` is compared on the ``w`` lattice (sampled at the lattice nodes
    of its own grid, which must be the dataset grid); ``gamma_truth`` must
    live on the lattice grid.
    """
    Q_rec = reconstruct_pointwise(ds)
    avg = annulus_average(ds)
    diag = avg[:, [0, 1], [0, 1]]
    off = float(max(np.abs(avg[:, 0, 1]).max(initial=0.0), np.abs(avg[:, 1, 0]).max(initial=0.0)))
    dmax = float(np.abs(diag).max(initial=0.0))
    floor = _rel(dmax, off)
    wc = _coarse_angle_weights(ds)
    if wc is None:
        resid = np.zeros(len(ds.w_index))
    else:
        resid = np.abs(annulus_average(ds, wc) - avg).reshape(len(ds.w_index), -1).max(axis=1)
    result = ReconstructionResult(Q_rec, ds.annulus.r_inner, diag, floor, resid)
    if with_gamma:
        result.gamma = potential_to_conductivity(Q_rec, None, frame_tol)
    if truth is not None:
        if truth.grid != ds.grid:
            raise GridMismatch("ground-truth potential must live on the dataset grid")
        coarse, stride = w_grid(ds)
        sub = DiracPotential(ComplexField(coarse, truth.Q12.values[::stride, ::stride]),
                             ComplexField(coarse, truth.Q21.values[::stride, ::stride]))
        result.errors["Q"] = error_metrics(Q_rec, sub)
    if gamma_truth is not None and result.gamma is not None:
        result.errors["gamma"] = error_metrics(result.gamma, gamma_truth, background=1.0)
    return result


# -- stationary phase ---------------------------------------------------------------

@dataclass
class StationaryPhaseTable:
    """Rows ``(|lam|, lhs, leading term, abs error)`` and the fitted log-log slope of the error."""

    z: complex
    rows: list
    slope: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["abs_lambda", "lhs_re", "lhs_im", "leading_re", "leading_im", "abs_error"])
            for r, lhs, lead, err in self.rows:
                w.writerow([repr(float(r)), repr(lhs.real), repr(lhs.imag),
                            repr(lead.real), repr(lead.imag), repr(float(err))])
            w.writerow(["slope", repr(float(self.slope)), "", "", "", ""])


def stationary_phase_check(g: TestFunction, z: complex, lambda_list: Sequence[complex],
                           grid: GridSpec | None = None) -> StationaryPhaseTable:
    """Compare ``integral e^{-i rho} g dsigma`` with ``(2 pi / |lam|) g(z)``.

    ``rho = Im[lam (w - z)^2] / 2`` with the integration variable ``w``.
    The slope is a least-squares fit of ``log(abs error)`` against
    ``log |lam|``; NaN when fewer than two errors are positive.
    """
    if grid is None:
        grid = make_grid(1.0, 256)
    gv = g.sample(grid)
    gz = complex(g(np.array([complex(z)]))[0])
    rows = []
    for lam in lambda_list:
        _, em, _ = _phase(grid.nodes(), SpectralPoint(lam, z))
        lhs = complex(integrate(ComplexField(grid, em * gv.values)))
        lead = 2.0 * math.pi / abs(lam) * gz
        rows.append((abs(lam), lhs, lead, abs(lhs - lead)))
    r = np.array([row[0] for row in rows])
    e = np.array([row[3] for row in rows])
    pos = e > 0
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(r[pos]), np.log(e[pos]), 1)[0])
    else:
        slope = float("nan")
    return StationaryPhaseTable(complex(z), rows, slope)
