"""Generalised scattering data ``h(lam, w)`` and batched datasets.

Two independent evaluations are provided:

* volume form   ``h = integral e^{-i rho} Q conj(mu) dsigma``  (``conj_mode="conjugated"``)
  or the unconjugated reading ``Q mu`` (``conj_mode="plain"``);
* boundary form ``h = (1/2i) closed-integral mu dz`` on a square contour of
  grid lines enclosing ``supp Q``.

Because ``mu = I + h / (pi z) + O(|z|^-2)`` at infinity, the boundary form
picks out the coefficient of ``1/z``; the conjugated volume form is the one
that matches it.  :func:`compute_dataset` evaluates both for every sample and
records how well each volume reading agrees with the contour.
"""

from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cgo import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    WINDOW_MARGIN,
    MuSolution,
    PotentialWindow,
    SpectralPoint,
    _phase,
)
from .dirac import DiracPotential
from .exceptions import (
    ContourTooTight,
    GridError,
    MaxIterations,
    NotContractive,
    NotConverged,
)
from .grid import ComplexField, GridSpec
from .quadrature import annulus_quadrature

__all__ = [
    "Annulus",
    "SquareContour",
    "ScatteringDataset",
    "T_lambda",
    "scattering_volume",
    "scattering_boundary",
    "compute_dataset",
    "w_lattice",
    "potential_hash",
    "CONJ_MODES",
    "METHODS",
    "AGREEMENT_RTOL",
]

CONJ_MODES = ("conjugated", "plain")
METHODS = ("volume", "boundary")
#: relative volume/boundary disagreement above which a sample is rejected
AGREEMENT_RTOL = 0.05
#: guards the relative difference when ``h`` vanishes
AGREEMENT_EPS = 1e-12
#: the contour must keep more than this many cells from ``supp Q``
CONTOUR_MIN_CELLS = 3

# per-sample status codes stored in datasets
STATUS_OK = 0
STATUS_NOT_CONTRACTIVE = 1
STATUS_MAX_ITERATIONS = 2
STATUS_DISAGREE = 3
STATUS_NAMES = {
    STATUS_OK: "ok",
    STATUS_NOT_CONTRACTIVE: "not_contractive",
    STATUS_MAX_ITERATIONS: "max_iterations",
    STATUS_DISAGREE: "forms_disagree",
}


# -- T^lambda and the two forms -------------------------------------------------

def _as_matrix(G, grid: GridSpec) -> np.ndarray:
    """``G`` as a ``(2, 2, N, N)`` array, or ``(N, N)`` for a scalar field."""
    if isinstance(G, MuSolution):
        return G.matrix()
    if isinstance(G, ComplexField):
        if G.grid != grid:
            raise GridError("G and Q live on different grids")
        return G.values
    arr = np.asarray(G, dtype=np.complex128)
    N = grid.points_per_side
    if arr.shape not in ((N, N), (2, 2, N, N)):
        raise ValueError(f"G must have shape (N, N) or (2, 2, N, N), got {arr.shape}")
    return arr


def T_lambda(G, Q: DiracPotential, sp: SpectralPoint) -> np.ndarray:
    """``integral e^{-i rho} Q G dsigma`` as a 2x2 complex matrix.

    ``G`` may be a scalar field (then ``Q G`` is ``Q`` scaled entrywise and
    the diagonal of the result is exactly zero), a ``(2, 2, N, N)`` array or
    a :class:`MuSolution`.
    """
    grid = Q.grid
    g = _as_matrix(G, grid)
    _, em, _ = _phase(grid.nodes(), sp)
    h2 = grid.spacing ** 2
    a = em * Q.Q12.values
    b = em * Q.Q21.values
    out = np.zeros((2, 2), dtype=np.complex128)
    if g.ndim == 2:
        out[0, 1] = h2 * np.sum(a * g)
        out[1, 0] = h2 * np.sum(b * g)
        return out
    # (Q G)_ij = Q_i,1-i G_1-i,j for off-diagonal Q
    out[0, 0] = h2 * np.sum(a * g[1, 0])
    out[0, 1] = h2 * np.sum(a * g[1, 1])
    out[1, 0] = h2 * np.sum(b * g[0, 0])
    out[1, 1] = h2 * np.sum(b * g[0, 1])
    return out


def scattering_volume(Q: DiracPotential, mu: MuSolution,
                      conj_mode: str = "conjugated") -> np.ndarray:
    """Volume form of the scattering data, ``T^lam[conj(mu)]`` (or ``T^lam[mu]``).

    Raises
    ------
    NotConverged
        ``mu`` carries no convergence certificate.
    """
    if conj_mode not in CONJ_MODES:
        raise ValueError(f"conj_mode must be one of {CONJ_MODES}, got {conj_mode!r}")
    if not mu.converged:
        raise NotConverged(
            f"mu at lam={mu.spectral.lam} has residual {mu.final_residual:.3e} > tol {mu.tol:.1e}"
        )
    m = mu.matrix()
    return T_lambda(np.conj(m) if conj_mode == "conjugated" else m, Q, mu.spectral)


@dataclass(frozen=True)
class SquareContour:
    """Axis-aligned contour through grid nodes ``j0..j1`` x ``k0..k1`` (inclusive)."""

    j0: int
    j1: int
    k0: int
    k1: int

    def __post_init__(self):
        for name in ("j0", "j1", "k0", "k1"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if not (self.j1 > self.j0 and self.k1 > self.k0):
            raise ValueError(f"degenerate contour {self}")

    @classmethod
    def around(cls, Q: DiracPotential, offset: int = CONTOUR_MIN_CELLS + 1) -> "SquareContour":
        """Smallest square with ``offset`` cells of clearance around ``supp Q``.

        An empty potential gets the square just inside the frame band.
        """
        N = Q.grid.points_per_side
        mask = Q.support_mask()
        if not mask.any():
            m = Q.grid.margin_cells
            return cls(m, N - 1 - m, m, N - 1 - m)
        jj, kk = np.nonzero(mask)
        j0, j1 = jj.min() - offset, jj.max() + offset
        k0, k1 = kk.min() - offset, kk.max() + offset
        side = max(j1 - j0, k1 - k0)
        j0 -= (side - (j1 - j0)) // 2
        k0 -= (side - (k1 - k0)) // 2
        if min(j0, k0) < 0 or max(j0, k0) + side > N - 1:
            raise ContourTooTight(f"no square with {offset}-cell clearance fits in the grid")
        return cls(int(j0), int(j0 + side), int(k0), int(k0 + side))

    def node_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Closed counterclockwise node path (first node repeated at the end)."""
        j0, j1, k0, k1 = self.j0, self.j1, self.k0, self.k1
        rj = np.arange(j0, j1)
        rk = np.arange(k0, k1)
        J = np.concatenate([rj, np.full(k1 - k0, j1), rj[::-1] + 1, np.full(k1 - k0, j0), [j0]])
        K = np.concatenate([np.full(j1 - j0, k0), rk, np.full(j1 - j0, k1), rk[::-1] + 1, [k0]])
        return J, K

    def clearance(self, mask: np.ndarray) -> int | None:
        """Cells between the contour and the nearest ``True`` node; negative when outside."""
        if not mask.any():
            return None
        jj, kk = np.nonzero(mask)
        return int(min(jj.min() - self.j0, self.j1 - jj.max(), kk.min() - self.k0, self.k1 - kk.max()))

    def check(self, Q: DiracPotential) -> None:
        N = Q.grid.points_per_side
        if self.j0 < 0 or self.k0 < 0 or self.j1 >= N or self.k1 >= N:
            raise GridError(f"contour {self} leaves the {N}x{N} grid")
        c = self.clearance(Q.support_mask())
        if c is not None and c <= CONTOUR_MIN_CELLS:
            raise ContourTooTight(
                f"supp Q comes within {c} cells of the contour (need > {CONTOUR_MIN_CELLS})"
            )

    def to_dict(self) -> dict:
        return {"j0": self.j0, "j1": self.j1, "k0": self.k0, "k1": self.k1}


def _contour_integral(values: np.ndarray, z: np.ndarray, contour: SquareContour,
                      origin: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Trapezoidal ``closed-integral values dz`` over the leading axes of ``values``.

    ``values`` and ``z`` are indexed by grid node minus ``origin``.
    """
    J, K = contour.node_indices()
    J = J - origin[0]
    K = K - origin[1]
    zs = z[J, K]
    fs = values[..., J, K]
    dz = np.diff(zs)
    return (0.5 * (fs[..., 1:] + fs[..., :-1]) * dz).sum(axis=-1)


def scattering_boundary(mu: MuSolution, contour: SquareContour | None = None,
                        Q: DiracPotential | None = None) -> np.ndarray:
    """Boundary form ``(1/2i) closed-integral mu dz`` as a 2x2 matrix.

    Counterclockwise trapezoidal rule on the grid nodes of ``contour``.  When
    ``Q`` is given the contour defaults to :meth:`SquareContour.around` and is
    checked to keep more than three cells from ``supp Q``.

    Raises
    ------
    ContourTooTight
        ``supp Q`` touches or comes within three cells of the contour.
    """
    if contour is None:
        if Q is None:
            raise ValueError("need a contour or the potential to build one")
        contour = SquareContour.around(Q)
    if Q is not None:
        contour.check(Q)
    m = mu.matrix()
    return _contour_integral(m, mu.grid.nodes(), contour) / 2j


# -- datasets ------------------------------------------------------------------

@dataclass(frozen=True)
class Annulus:
    """Polar sampling of ``r_inner < |lam| < r_outer`` (``r_outer`` defaults to ``2 r_inner``)."""

    r_inner: float
    r_outer: float | None = None
    n_r: int = 4
    n_theta: int = 8

    def __post_init__(self):
        r_out = 2.0 * self.r_inner if self.r_outer is None else self.r_outer
        object.__setattr__(self, "r_inner", float(self.r_inner))
        object.__setattr__(self, "r_outer", float(r_out))
        object.__setattr__(self, "n_r", int(self.n_r))
        object.__setattr__(self, "n_theta", int(self.n_theta))
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError(f"need 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}")
        if self.n_r < 1 or self.n_theta < 1:
            raise ValueError("n_r and n_theta must be positive")

    @property
    def area(self) -> float:
        return np.pi * (self.r_outer ** 2 - self.r_inner ** 2)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        return annulus_quadrature(self.r_inner, self.r_outer, self.n_r, self.n_theta)

    def to_dict(self) -> dict:
        return {"r_inner": self.r_inner, "r_outer": self.r_outer,
                "n_r": self.n_r, "n_theta": self.n_theta}


def w_lattice(grid: GridSpec, stride: int, radius: float | None = None,
              center: complex = 0j) -> list[complex]:
    """Nodes ``(j, k)`` with ``j, k`` multiples of ``stride``, optionally within a disk."""
    x = grid.axis
    out = []
    for j in range(0, grid.points_per_side, stride):
        for k in range(0, grid.points_per_side, stride):
            z = complex(x[j], x[k])
            if radius is None or abs(z - center) <= radius + 1e-12:
                out.append(z)
    return out


def potential_hash(Q: DiracPotential) -> str:
    """Git-style blob SHA-1 of the potential's grid and values."""
    payload = (json.dumps(Q.grid.to_dict(), sort_keys=True).encode()
               + np.ascontiguousarray(Q.Q12.values, dtype="<c16").tobytes()
               + np.ascontiguousarray(Q.Q21.values, dtype="<c16").tobytes())
    return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()


_DATASET_MAGIC = b"BKSD"
_DATASET_VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")
_META_DTYPE = np.dtype([
    ("iterations", "<i4"),
    ("status", "<i4"),
    ("residual", "<f8"),
    ("disagreement", "<f8"),
    ("disagreement_alt", "<f8"),
])


@dataclass(eq=False)
class ScatteringDataset:
    """``h(lam, w)`` on an annulus of ``lam`` and a set of grid nodes ``w``.

    Samples are ordered ``lam``-major: sample ``i * n_w + j`` pairs
    ``lambdas[i]`` with ``w_samples[j]``.  ``h`` has shape ``(n_lam, n_w, 2, 2)``
    and holds zeros where ``status != 0``.  ``meta`` is a structured array of
    shape ``(n_lam, n_w)`` with fields ``iterations``, ``status``,
    ``residual`` (final solver step), ``disagreement`` (relative
    volume/boundary mismatch for the dataset's conj_mode) and
    ``disagreement_alt`` (same, for the other reading of the volume form).
    """

    grid: GridSpec
    annulus: Annulus
    w_index: np.ndarray
    h: np.ndarray
    meta: np.ndarray
    method: str = "volume"
    conj_mode: str = "conjugated"
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    potential_sha1: str = ""
    w_stride: int | None = None
    contour: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w_index = np.asarray(self.w_index, dtype=np.int64).reshape(-1, 2)
        lam, wts = self.annulus.quadrature()
        self.lambdas = lam
        self.weights = wts
        n = (len(lam), len(self.w_index))
        if self.h.shape != n + (2, 2):
            raise ValueError(f"h has shape {self.h.shape}, expected {n + (2, 2)}")
        if self.meta.shape != n:
            raise ValueError(f"meta has shape {self.meta.shape}, expected {n}")

    @property
    def w_samples(self) -> np.ndarray:
        x = self.grid.axis
        return x[self.w_index[:, 0]] + 1j * x[self.w_index[:, 1]]

    @property
    def n_samples(self) -> int:
        return self.h.shape[0] * self.h.shape[1]

    @property
    def failures(self) -> list[dict]:
        out = []
        for i, j in zip(*np.nonzero(self.meta["status"] != STATUS_OK)):
            lam, w = complex(self.lambdas[i]), complex(self.w_samples[j])
            out.append({"lambda": [lam.real, lam.imag], "w": [w.real, w.imag],
                        "status": STATUS_NAMES[int(self.meta["status"][i, j])]})
        return out

    @property
    def is_complete(self) -> bool:
        return bool((self.meta["status"] == STATUS_OK).all())

    @property
    def any_not_contractive(self) -> bool:
        return bool((self.meta["status"] == STATUS_NOT_CONTRACTIVE).any())

    def agreement(self) -> dict:
        """Volume/boundary agreement statistics for both volume readings."""
        ok = self.meta["status"] != STATUS_NOT_CONTRACTIVE
        ok &= self.meta["status"] != STATUS_MAX_ITERATIONS
        stats = {}
        for mode, col in ((self.conj_mode, "disagreement"),
                          (_other_mode(self.conj_mode), "disagreement_alt")):
            d = self.meta[col][ok]
            stats[mode] = {
                "max": float(d.max()) if d.size else 0.0,
                "median": float(np.median(d)) if d.size else 0.0,
            }
        best = min(CONJ_MODES, key=lambda m: (stats[m]["median"], m != "conjugated"))
        return {"per_mode": stats, "winning_mode": best, "samples": int(ok.sum())}

    def header(self) -> dict:
        return {
            "format": "bukhgeim-scattering-dataset",
            "version": _DATASET_VERSION,
            "grid": self.grid.to_dict(),
            "annulus": self.annulus.to_dict(),
            "quadrature": "Gauss-Legendre radii x uniform angles from 0, weights r dr dtheta",
            "w_index": self.w_index.tolist(),
            "w_stride": self.w_stride,
            "method": self.method,
            "conj_mode": self.conj_mode,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "agreement_rtol": AGREEMENT_RTOL,
            "contour": self.contour,
            "potential_sha1": self.potential_sha1,
            "layout": "h: float64 (n_lam, n_w, 4 entries 11,12,21,22, re/im); then meta records",
        }

    def save(self, path) -> Path:
        """Write the binary dataset file and return its path.

        Layout: ``b"BKSD"``, version (u32), header length (u64), UTF-8 JSON
        header, then ``h`` as little-endian float64 ``(re, im)`` pairs with 4
        entries per sample (sample-major), then the per-sample meta records.
        """
        header = json.dumps(self.header(), sort_keys=True).encode()
        body = np.ascontiguousarray(self.h, dtype="<c16").tobytes()
        meta = np.ascontiguousarray(self.meta, dtype=_META_DTYPE).tobytes()
        p = Path(path)
        p.write_bytes(_PREAMBLE.pack(_DATASET_MAGIC, _DATASET_VERSION, len(header)) + header + body + meta)
        return p

    @classmethod
    def load(cls, path) -> "ScatteringDataset":
        raw = Path(path).read_bytes()
        magic, version, hlen = _PREAMBLE.unpack_from(raw)
        if magic != _DATASET_MAGIC:
            raise ValueError(f"{path}: not a scattering dataset")
        if version != _DATASET_VERSION:
            raise ValueError(f"{path}: unsupported dataset version {version}")
        off = _PREAMBLE.size
        hdr = json.loads(raw[off:off + hlen])
        off += hlen
        grid = GridSpec(hdr["grid"]["half_width"], hdr["grid"]["points_per_side"])
        ann = Annulus(**hdr["annulus"])
        w_index = np.array(hdr["w_index"], dtype=np.int64).reshape(-1, 2)
        n = (ann.n_r * ann.n_theta, len(w_index))
        nh = 16 * 4 * n[0] * n[1]
        h = np.frombuffer(raw[off:off + nh], dtype="<c16").reshape(n + (2, 2)).copy()
        off += nh
        meta = np.frombuffer(raw[off:], dtype=_META_DTYPE)
        if meta.size != n[0] * n[1]:
            raise ValueError(f"{path}: truncated dataset")
        return cls(grid, ann, w_index, h, meta.reshape(n).copy(), method=hdr["method"],
                   conj_mode=hdr["conj_mode"], tol=hdr["tol"], max_iter=hdr["max_iter"],
                   potential_sha1=hdr["potential_sha1"], w_stride=hdr["w_stride"],
                   contour=hdr["contour"])

    def to_csv(self, path) -> None:
        """CSV with ``re_lambda, im_lambda, re_w, im_w``, the 8 parts of ``h`` and ``residual``."""
        import csv

        cols = ["re_lambda", "im_lambda", "re_w", "im_w"]
        for e in ("h11", "h12", "h21", "h22"):
            cols += [f"{e}_re", f"{e}_im"]
        cols.append("residual")
        ws = self.w_samples
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(cols)
            for i, lam in enumerate(self.lambdas):
                for j, w in enumerate(ws):
                    row = [lam.real, lam.imag, w.real, w.imag]
                    for v in self.h[i, j].ravel():
                        row += [v.real, v.imag]
                    row.append(self.meta["residual"][i, j])
                    wr.writerow([repr(float(v)) for v in row])

    def with_h(self, h: np.ndarray) -> "ScatteringDataset":
        """Copy with replaced ``h`` values (same sampling and metadata)."""
        return ScatteringDataset(self.grid, self.annulus, self.w_index, np.asarray(h, dtype=np.complex128),
                                 self.meta.copy(), self.method, self.conj_mode, self.tol,
                                 self.max_iter, self.potential_sha1, self.w_stride, dict(self.contour))


def _other_mode(mode: str) -> str:
    return "plain" if mode == "conjugated" else "conjugated"


def _rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(np.abs(a).max(), AGREEMENT_EPS))


def _window_forms(window: PotentialWindow, mu: np.ndarray, em: np.ndarray,
                  contour: SquareContour) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Volume (both readings) and boundary forms from a windowed solution."""
    h2 = window.spacing ** 2
    vol_c = (h2 * window.density(mu, em).sum(axis=(-2, -1))).reshape(2, 2)
    vol_p = (h2 * window.density(np.conj(mu), em).sum(axis=(-2, -1))).reshape(2, 2)
    bnd = (_contour_integral(mu, window.z, contour, (window.j0, window.k0)) / 2j).reshape(2, 2)
    return vol_c, vol_p, bnd


def compute_dataset(Q: DiracPotential, annulus: Annulus, w_samples: Sequence[complex],
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    parallel_width: int = 1, conj_mode: str = "conjugated",
                    method: str = "volume", w_stride: int | None = None) -> ScatteringDataset:
    """Solve for ``mu`` at every ``(lam, w)`` and store the scattering data.

    Both forms are evaluated for each sample.  A sample whose solver raises
    :class:`NotContractive` or :class:`MaxIterations`, or whose forms differ
    by more than 5% (relative to ``max |h_vol|``), is recorded with a
    non-zero status and ``h = 0``; such a dataset is partial.

    Parameters
    ----------
    Q : DiracPotential
    annulus : Annulus
    w_samples : sequence of complex
        Snapped to the nearest grid nodes.
    parallel_width : int
        Worker threads; results land in preallocated slots, so the output
        does not depend on it.
    conj_mode : {"conjugated", "plain"}
        Reading of the volume form.
    method : {"volume", "boundary"}
        Which form is stored as ``h``.
    w_stride : int, optional
        Lattice stride of ``w_samples`` (recorded for pointwise reconstruction).
    """
    if conj_mode not in CONJ_MODES:
        raise ValueError(f"conj_mode must be one of {CONJ_MODES}, got {conj_mode!r}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    grid = Q.grid
    w_index = np.array([grid.index_of(complex(w)) for w in w_samples], dtype=np.int64).reshape(-1, 2)
    lams, _ = annulus.quadrature()
    n_lam, n_w = len(lams), len(w_index)
    h = np.zeros((n_lam, n_w, 2, 2), dtype=np.complex128)
    meta = np.zeros((n_lam, n_w), dtype=_META_DTYPE)

    window = PotentialWindow(Q, WINDOW_MARGIN)
    if window.empty:
        contour = SquareContour.around(Q)
    else:
        # grid lines one cell inside the window edge
        s = window.size
        contour = SquareContour(window.j0 + 1, window.j0 + s - 2, window.k0 + 1, window.k0 + s - 2)
        contour.check(Q)
    nodes = grid.nodes()
    x = grid.axis
    ws = x[w_index[:, 0]] + 1j * x[w_index[:, 1]]

    def run(idx: int) -> None:
        i, j = divmod(idx, n_w)
        sp = SpectralPoint(lams[i], ws[j])
        rec = meta[i, j]
        try:
            mu, em, iters, res = window.solve(sp, tol, max_iter)
        except NotContractive as exc:
            rec["status"], rec["iterations"] = STATUS_NOT_CONTRACTIVE, len(exc.residuals)
            rec["residual"] = exc.residuals[-1] if exc.residuals else np.inf
            return
        except MaxIterations as exc:
            rec["status"], rec["iterations"] = STATUS_MAX_ITERATIONS, len(exc.residuals)
            rec["residual"] = exc.residuals[-1]
            return
        rec["iterations"], rec["residual"] = iters, res[-1]
        if window.empty:
            zero = np.zeros((2, 2), dtype=np.complex128)
            vol_c = vol_p = zero
            one = np.zeros((4,) + nodes.shape, dtype=np.complex128)
            one[0] = one[3] = 1.0
            bnd = (_contour_integral(one, nodes, contour) / 2j).reshape(2, 2)
        else:
            vol_c, vol_p, bnd = _window_forms(window, mu, em, contour)
        vol, other = (vol_c, vol_p) if conj_mode == "conjugated" else (vol_p, vol_c)
        d = _rel_diff(vol, bnd)
        rec["disagreement"] = d
        rec["disagreement_alt"] = _rel_diff(other, bnd)
        if d > AGREEMENT_RTOL:
            rec["status"] = STATUS_DISAGREE
            return
        h[i, j] = vol if method == "volume" else bnd

    total = n_lam * n_w
    width = max(1, int(parallel_width))
    if width == 1:
        for idx in range(total):
            run(idx)
    else:
        with ThreadPoolExecutor(max_workers=width) as pool:
            list(pool.map(run, range(total)))

    return ScatteringDataset(grid, annulus, w_index, h, meta, method=method, conj_mode=conj_mode,
                             tol=tol, max_iter=max_iter, potential_sha1=potential_hash(Q),
                             w_stride=w_stride, contour=contour.to_dict())
