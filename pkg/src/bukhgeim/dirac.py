"""Changes of variables between a conductivity and its Dirac potential.

For ``div(gamma grad u) = 0`` the off-diagonal potential is

    Q12 = -1/2 * partial(log gamma),    Q21 = conj(-1/2 * dbar(log gamma)),

and the inverse map recovers ``log gamma`` as the Cauchy transform of
``-2 conj(Q21)``, normalised so that ``gamma -> 1`` at the grid frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from .cauchy import CauchyKernel, cauchy_transform, dbar, partial
from .exceptions import (
    BranchAmbiguity,
    GridMismatch,
    NonDecayingSolution,
    SupportTooClose,
    VanishingConductivity,
)
from .grid import ComplexField, GridSpec, read_cfld, write_cfld

__all__ = [
    "DiracPotential",
    "log_conductivity",
    "conductivity_to_potential",
    "potential_to_conductivity",
    "potential_to_log_conductivity",
]

GAMMA_MIN = 1e-3
# cells by which the support of log(gamma) is dilated before masking Q
_STENCIL_RADIUS = {"spectral": 1, "fd": 2}


@dataclass(frozen=True, eq=False)
class DiracPotential:
    """Off-diagonal Dirac potential ``[[0, Q12], [Q21, 0]]`` on one grid."""

    Q12: ComplexField
    Q21: ComplexField

    def __post_init__(self):
        if self.Q12.grid != self.Q21.grid:
            raise GridMismatch("Q12 and Q21 live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.Q12.grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> "DiracPotential":
        z = ComplexField.zeros(grid)
        return cls(z, z)

    def matrix(self) -> np.ndarray:
        """Values as a ``(2, 2, N, N)`` array with zero diagonal."""
        N = self.grid.points_per_side
        out = np.zeros((2, 2, N, N), dtype=np.complex128)
        out[0, 1] = self.Q12.values
        out[1, 0] = self.Q21.values
        return out

    def support_mask(self) -> np.ndarray:
        return (self.Q12.values != 0) | (self.Q21.values != 0)

    def is_zero(self) -> bool:
        return not self.support_mask().any()

    def max_abs(self) -> float:
        return max(self.Q12.max_abs(), self.Q21.max_abs())

    def save(self, path, provenance: dict | None = None) -> list[Path]:
        """Write ``<path>.Q12.cfld``, ``<path>.Q21.cfld`` and a JSON sidecar."""
        base = Path(path)
        p12 = base.with_name(base.name + ".Q12.cfld")
        p21 = base.with_name(base.name + ".Q21.cfld")
        side = base.with_name(base.name + ".json")
        write_cfld(self.Q12, p12)
        write_cfld(self.Q21, p21)
        meta = {
            "grid": self.grid.to_dict(),
            "Q12": p12.name,
            "Q21": p21.name,
            "provenance": provenance or {},
        }
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return [p12, p21, side]

    @classmethod
    def load(cls, path) -> "DiracPotential":
        base = Path(path)
        side = base if base.suffix == ".json" else base.with_name(base.name + ".json")
        meta = json.loads(side.read_text())
        Q12 = read_cfld(side.with_name(meta["Q12"]))
        Q21 = read_cfld(side.with_name(meta["Q21"]))
        return cls(Q12, Q21)


def log_conductivity(gamma: ComplexField, gamma_min: float = GAMMA_MIN) -> ComplexField:
    """Single-valued ``log gamma`` continued from ``log 1 = 0`` at the frame.

    The argument is unwrapped along both grid directions; the two
    continuations must agree, otherwise gamma winds around the origin.
    """
    g = gamma.values
    if np.abs(g).min() < gamma_min:
        raise VanishingConductivity(
            f"min |gamma| = {np.abs(g).min():.3e} is below {gamma_min:g}"
        )
    frame = gamma.grid.frame_mask(1)
    if np.abs(g[frame] - 1.0).max() > 1e-12:
        raise SupportTooClose("gamma must equal 1 on the grid frame")
    angle = np.angle(g)
    along_x = np.unwrap(angle, axis=0)
    along_y = np.unwrap(angle, axis=1)
    if np.abs(along_x - along_y).max() > np.pi or np.abs(along_x[-1]).max() > np.pi:
        raise BranchAmbiguity("gamma winds around 0 along a grid line")
    return ComplexField(gamma.grid, np.log(np.abs(g)) + 1j * along_x)


def _support_of(f: ComplexField, dilate: int) -> np.ndarray:
    mask = np.abs(f.values) > 0.0
    if dilate > 0 and mask.any():
        mask = binary_dilation(mask, iterations=dilate)
    return mask


def conductivity_to_potential(gamma: ComplexField, mode: str = "spectral",
                              gamma_min: float = GAMMA_MIN) -> DiracPotential:
    """Dirac potential of a conductivity that equals 1 near the grid frame.

    ``Q`` is set to zero outside the support of ``log gamma`` dilated by the
    differentiation stencil radius, so spectral ringing does not leak out.
    """
    log_g = log_conductivity(gamma, gamma_min)
    mask = _support_of(log_g, _STENCIL_RADIUS[mode])
    Q12 = -0.5 * partial(log_g, mode).values
    q21 = -0.5 * dbar(log_g, mode).values
    Q12 = np.where(mask, Q12, 0.0)
    Q21 = np.where(mask, np.conj(q21), 0.0)
    return DiracPotential(ComplexField(gamma.grid, Q12), ComplexField(gamma.grid, Q21))


def potential_to_log_conductivity(Q: DiracPotential, kernel: CauchyKernel | None = None,
                                  frame_tol: float = 1e-2) -> ComplexField:
    """Solve ``dbar log gamma = -2 conj(Q21)`` with ``log gamma -> 0`` at infinity.

    Raises :class:`NonDecayingSolution` when ``|log gamma|`` on the frame
    exceeds ``frame_tol`` times ``max(1, max |log gamma|)``.
    """
    rhs = -2.0 * Q.Q21.conj()
    log_g = cauchy_transform(rhs, kernel)
    scale = max(1.0, log_g.max_abs())
    edge = log_g.frame_max(1)
    if edge > frame_tol * scale:
        raise NonDecayingSolution(
            f"|log gamma| reaches {edge:.3e} on the grid frame (tolerance {frame_tol * scale:.3e})"
        )
    return log_g


def potential_to_conductivity(Q: DiracPotential, kernel: CauchyKernel | None = None,
                              frame_tol: float = 1e-2) -> ComplexField:
    """Conductivity ``exp(log gamma)`` recovered from the potential."""
    log_g = potential_to_log_conductivity(Q, kernel, frame_tol)
    return ComplexField(log_g.grid, np.exp(log_g.values))
