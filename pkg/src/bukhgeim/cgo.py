"""Complex geometrical optics (CGO) solutions of the Dirac system.

For a spectral point ``(lam, w)`` the bounded CGO matrix ``mu`` solves

    mu = I + C[ e^{-i rho} Q conj(mu) ],    rho(z) = Im[lam (z - w)^2] / 2,

with ``C`` the Cauchy transform applied entrywise.  The ``(1,1)`` entry also
solves the scalar equation ``(I - M)(mu11 - 1) = M 1`` with
``M = L Q12 conj(L) conj(Q21)``, where ``L phi = C[e^{-i rho} phi]``.

The fixed point is iterated only on a square window around the support of
``Q`` (the density vanishes elsewhere), then extended to the whole grid by
one more transform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cauchy import CauchyKernel, _apply_block, cauchy_transform
from .dirac import DiracPotential
from .exceptions import ExponentialOverflow, GridMismatch, MaxIterations, NotContractive
from .grid import ComplexField, GridSpec, integrate
from .quadrature import annulus_quadrature, lp_norm

__all__ = [
    "SpectralPoint",
    "MuSolution",
    "PotentialWindow",
    "DecayReport",
    "bukhgeim_phase",
    "apply_L_lambda",
    "apply_M",
    "solve_mu",
    "solve_mu11_via_M",
    "assemble_psi",
    "decay_diagnostics",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
#: consecutive non-decreasing residuals that count as "not contractive"
STALL_LIMIT = 5
#: cells kept around supp Q in the solver window (boundary contour fits inside)
WINDOW_MARGIN = 5
#: largest admissible Re[lam (z - w)^2] / 4 before exp() overflows
OVERFLOW_BUDGET = 700.0

_IDENTITY = np.array([1.0, 0.0, 0.0, 1.0])[:, None, None]


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter ``lam`` (any complex value) and spatial parameter ``w``."""

    lam: complex
    w: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "w", complex(self.w))


def _phase(z: np.ndarray, sp: SpectralPoint):
    rho = np.imag(sp.lam * (z - sp.w) ** 2) / 2.0
    c, s = np.cos(rho), np.sin(rho)
    return rho, c - 1j * s, c + 1j * s


def bukhgeim_phase(grid: GridSpec, sp: SpectralPoint):
    """``rho = Im[lam (z-w)^2]/2`` and the unimodular factors ``e^{-i rho}``, ``e^{+i rho}``.

    Returns ``(rho, e_minus, e_plus)``; ``rho`` is a real ndarray, the others
    are :class:`ComplexField` built from ``cos``/``sin`` of ``rho``.
    """
    rho, em, ep = _phase(grid.nodes(), sp)
    return rho, ComplexField(grid, em), ComplexField(grid, ep)


def apply_L_lambda(phi: ComplexField, sp: SpectralPoint,
                   kernel: CauchyKernel | None = None) -> ComplexField:
    """``L phi = C[e^{-i rho} phi]``."""
    _, em, _ = bukhgeim_phase(phi.grid, sp)
    return cauchy_transform(em * phi, kernel)


def apply_M(f: ComplexField, Q: DiracPotential, sp: SpectralPoint,
            kernel: CauchyKernel | None = None) -> ComplexField:
    """``M f = L[Q12 conj(L[Q21 conj(f)])]`` (linear in ``f``)."""
    if f.grid != Q.grid:
        raise GridMismatch("f and Q live on different grids")
    inner = apply_L_lambda(Q.Q21 * f.conj(), sp, kernel)
    return apply_L_lambda(Q.Q12 * inner.conj(), sp, kernel)


@dataclass(frozen=True, eq=False)
class MuSolution:
    """Converged (or last) iterate of the CGO fixed point on the full grid."""

    mu11: ComplexField
    mu12: ComplexField
    mu21: ComplexField
    mu22: ComplexField
    spectral: SpectralPoint
    iterations: int
    final_residual: float
    converged: bool
    tol: float = DEFAULT_TOL
    residuals: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> GridSpec:
        return self.mu11.grid

    def matrix(self) -> np.ndarray:
        """``(2, 2, N, N)`` array of the four entries."""
        return np.array([[self.mu11.values, self.mu12.values],
                         [self.mu21.values, self.mu22.values]])


class PotentialWindow:
    """Square block of the grid containing ``supp Q`` plus a margin.

    Holds the windowed potential and runs the CGO fixed point there.  Read
    only after construction, so one instance can serve many spectral points
    concurrently.
    """

    def __init__(self, Q: DiracPotential, margin: int = WINDOW_MARGIN):
        self.Q = Q
        grid = Q.grid
        N = grid.points_per_side
        mask = Q.support_mask()
        self.empty = not mask.any()
        if self.empty:
            j0 = k0 = 0
            S = 0
        else:
            jj, kk = np.nonzero(mask)
            j0, j1 = jj.min() - margin, jj.max() + 1 + margin
            k0, k1 = kk.min() - margin, kk.max() + 1 + margin
            S = min(max(j1 - j0, k1 - k0), N)
            j0 = int(np.clip(j0, 0, N - S))
            k0 = int(np.clip(k0, 0, N - S))
        self.j0, self.k0, self.size = j0, k0, S
        self.spacing = grid.spacing
        sl = self.slices
        self.z = grid.nodes()[sl]
        self.q12 = Q.Q12.values[sl]
        self.q21 = Q.Q21.values[sl]

    @property
    def slices(self):
        return (slice(self.j0, self.j0 + self.size), slice(self.k0, self.k0 + self.size))

    def density(self, mu: np.ndarray, em: np.ndarray) -> np.ndarray:
        """Entries of ``e^{-i rho} Q conj(mu)`` in the order 11, 12, 21, 22."""
        a = em * self.q12
        b = em * self.q21
        mb = np.conj(mu)
        return np.stack([a * mb[2], a * mb[3], b * mb[0], b * mb[1]])

    def solve(self, sp: SpectralPoint, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER):
        """Fixed-point iteration on the window.

        Returns ``(mu, em, iterations, residuals)`` where ``mu`` has shape
        ``(4, S, S)`` (entries 11, 12, 21, 22).

        Raises
        ------
        NotContractive
            The sup-norm step fails to shrink for ``STALL_LIMIT`` consecutive
            iterations (|lam| below the contraction radius).
        MaxIterations
            ``tol`` not reached within ``max_iter`` iterations.
        """
        S = self.size
        if self.empty:
            return np.zeros((4, 0, 0), dtype=np.complex128), None, 1, [0.0]
        _, em, _ = _phase(self.z, sp)
        mu = np.zeros((4, S, S), dtype=np.complex128)
        mu[0] = 1.0
        mu[3] = 1.0
        residuals = []
        stalled = 0
        for it in range(1, max_iter + 1):
            new = _apply_block(self.density(mu, em), self.spacing)
            new += _IDENTITY
            r = float(np.abs(new - mu).max())
            mu = new
            residuals.append(r)
            if not np.isfinite(r):
                raise NotContractive(f"iteration diverged at lam={sp.lam}", residuals)
            if r <= tol:
                return mu, em, it, residuals
            if len(residuals) > 1 and r >= residuals[-2]:
                stalled += 1
                if stalled >= STALL_LIMIT:
                    raise NotContractive(
                        f"residual stopped decreasing at lam={sp.lam} (|lam|={abs(sp.lam):.3g})",
                        residuals,
                    )
            else:
                stalled = 0
        raise MaxIterations(f"no convergence in {max_iter} iterations at lam={sp.lam}", residuals)

    def extend(self, mu: np.ndarray, em: np.ndarray, kernel: CauchyKernel) -> np.ndarray:
        """Evaluate ``I + C[e^{-i rho} Q conj(mu)]`` on the full grid."""
        N = self.Q.grid.points_per_side
        full = np.zeros((4, N, N), dtype=np.complex128)
        if not self.empty:
            full[(slice(None),) + self.slices] = self.density(mu, em)
            full = kernel.apply(full)
        full += _IDENTITY
        return full


def solve_mu(Q: DiracPotential, sp: SpectralPoint, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER, kernel: CauchyKernel | None = None,
             window: PotentialWindow | None = None) -> MuSolution:
    """Solve the Lippmann-Schwinger equation for the CGO matrix at one ``(lam, w)``.

    Iterates ``mu <- I + C[e^{-i rho} Q conj(mu)]`` until successive iterates
    differ by at most ``tol`` in sup norm.  Errors are those of
    :meth:`PotentialWindow.solve`.
    """
    grid = Q.grid
    if kernel is None:
        kernel = CauchyKernel(grid)
    elif kernel.grid != grid:
        raise GridMismatch("kernel and potential live on different grids")
    if window is None:
        window = PotentialWindow(Q)
    mu_w, em, iters, residuals = window.solve(sp, tol, max_iter)
    full = window.extend(mu_w, em, kernel)
    f = [ComplexField(grid, full[i]) for i in range(4)]
    return MuSolution(*f, spectral=sp, iterations=iters, final_residual=residuals[-1],
                      converged=residuals[-1] <= tol, tol=tol, residuals=tuple(residuals))


def solve_mu11_via_M(Q: DiracPotential, sp: SpectralPoint, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER,
                     kernel: CauchyKernel | None = None) -> ComplexField:
    """``mu11 = 1 + sum_{k>=1} M^k 1`` (Neumann series), stopped when a term is below ``tol``."""
    grid = Q.grid
    if kernel is None:
        kernel = CauchyKernel(grid)
    one = ComplexField.constant(grid, 1.0)
    if Q.is_zero():
        return one
    term = apply_M(one, Q, sp, kernel)
    total = one + term
    sizes = [term.max_abs()]
    stalled = 0
    for _ in range(max_iter):
        if sizes[-1] <= tol:
            return total
        term = apply_M(term, Q, sp, kernel)
        total = total + term
        sizes.append(term.max_abs())
        if sizes[-1] >= sizes[-2]:
            stalled += 1
            if stalled >= STALL_LIMIT:
                raise NotContractive(f"Neumann series terms do not shrink at lam={sp.lam}", sizes)
        else:
            stalled = 0
    raise MaxIterations(f"Neumann series not converged in {max_iter} terms", sizes)


def assemble_psi(mu: MuSolution) -> np.ndarray:
    """Unnormalised CGO solution ``psi = mu * exp(lam (z - w)^2 / 4)`` as ``(2, 2, N, N)``."""
    sp = mu.spectral
    expo = sp.lam * (mu.grid.nodes() - sp.w) ** 2 / 4.0
    worst = float(expo.real.max())
    if worst > OVERFLOW_BUDGET:
        raise ExponentialOverflow(worst)
    return mu.matrix() * np.exp(expo)


# -- decay diagnostics --------------------------------------------------------

DECAY_QUANTITIES = ("M1", "mu11-1", "T_M1")


@dataclass
class DecayReport:
    """Empirical ``L^p`` norms over annular shells of the spectral plane.

    ``norms[q][i]`` is the sup over the sampled ``(z, w)`` (or ``w``) of the
    polar-quadrature ``L^p`` norm of quantity ``q`` over ``shells[i]``.
    """

    p: float
    shells: list
    norms: dict
    quadrature: str = ""

    def is_strictly_decreasing(self, quantity: str) -> bool:
        v = self.norms[quantity]
        return all(b < a for a, b in zip(v, v[1:]))

    def rows(self):
        for q, vals in self.norms.items():
            for (r1, _), v in zip(self.shells, vals):
                yield (r1, q, v)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["shell_R", "quantity", "norm"])
            for r1, q, v in self.rows():
                w.writerow([repr(float(r1)), q, repr(float(v))])


def _node_indices(grid: GridSpec, points: Iterable[complex]):
    return [grid.index_of(complex(z)) for z in points]


def decay_diagnostics(Q: DiracPotential, shells: Sequence[tuple[float, float]], p: float,
                      z_samples: Sequence[complex], w_samples: Sequence[complex],
                      kernel: CauchyKernel | None = None, n_r: int = 4, n_theta: int = 8,
                      quantities: Sequence[str] = DECAY_QUANTITIES,
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> DecayReport:
    """Shell-wise ``L^p_lambda`` norms of ``M1``, ``mu11 - 1`` and ``T^lam[M1]``.

    Sample points are snapped to the nearest grid nodes.  ``T_M1`` is
    measured by the largest entry of the 2x2 matrix and is sup'ed over ``w``
    only.  Monotonicity is left to the caller.
    """
    for q in quantities:
        if q not in DECAY_QUANTITIES:
            raise ValueError(f"unknown quantity {q!r}")
    shells = sorted((float(a), float(b)) for a, b in shells)
    grid = Q.grid
    if kernel is None:
        kernel = CauchyKernel(grid)
    z_idx = tuple(np.array(_node_indices(grid, z_samples)).T)
    w_nodes = [grid.node(*ij) for ij in _node_indices(grid, w_samples)]
    window = PotentialWindow(Q)
    one = ComplexField.constant(grid, 1.0)
    norms = {q: [] for q in quantities}
    for r1, r2 in shells:
        lams, wts = annulus_quadrature(r1, r2, n_r, n_theta)
        vals = {q: [] for q in quantities}
        for lam in lams:
            per_w = {q: [] for q in quantities}
            for w in w_nodes:
                sp = SpectralPoint(lam, w)
                if Q.is_zero():
                    for q in quantities:
                        per_w[q].append(np.zeros(len(z_idx[0])) if q != "T_M1" else 0.0)
                    continue
                if "M1" in quantities or "T_M1" in quantities:
                    m1 = apply_M(one, Q, sp, kernel)
                    if "M1" in quantities:
                        per_w["M1"].append(np.abs(m1.values[z_idx]))
                    if "T_M1" in quantities:
                        _, em, _ = bukhgeim_phase(grid, sp)
                        t12 = integrate(em * Q.Q12 * m1)
                        t21 = integrate(em * Q.Q21 * m1)
                        per_w["T_M1"].append(max(abs(t12), abs(t21)))
                if "mu11-1" in quantities:
                    mu = solve_mu(Q, sp, tol, max_iter, kernel, window)
                    per_w["mu11-1"].append(np.abs(mu.mu11.values[z_idx] - 1.0))
            for q in quantities:
                vals[q].append(np.array(per_w[q]))
        for q in quantities:
            arr = np.array(vals[q])  # (n_lam, n_w[, n_z])
            norms[q].append(float(lp_norm(arr, wts, p, axis=0).max()))
    desc = f"tensor polar rule: {n_r} Gauss-Legendre radii x {n_theta} uniform angles, weights r dr dtheta"
    return DecayReport(p=float(p), shells=shells, norms=norms, quadrature=desc)
