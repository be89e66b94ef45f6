"""Uniform square grids, complex fields on them, and analytic presets.

A grid of ``N`` points per side on ``[-L, L)^2`` has nodes

    z_jk = (-L + j h) + i (-L + k h),    h = 2L / N,

stored in ``values[j, k]`` (``j`` runs along x, ``k`` along y, row-major).
Integrals use the cell (midpoint) rule ``h^2 * sum(values)``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .exceptions import (
    GridError,
    GridMismatch,
    NonFiniteSample,
    OddGridSize,
    SupportTooClose,
)

__all__ = [
    "GridSpec",
    "ComplexField",
    "TestFunction",
    "ConductivityPreset",
    "make_grid",
    "sample",
    "integrate",
    "write_cfld",
    "read_cfld",
    "write_csv",
    "MARGIN_FRACTION",
]

#: Conductivity supports must stay this fraction of ``L`` away from the frame.
MARGIN_FRACTION = 0.1

CFLD_MAGIC = b"CFLD"
CFLD_VERSION = 1
_CFLD_HEADER = struct.Struct("<4sIId")


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``N x N`` grid on the square ``[-L, L)^2``."""

    half_width: float
    points_per_side: int

    def __post_init__(self):
        L = float(self.half_width)
        N = int(self.points_per_side)
        if not np.isfinite(L) or L <= 0:
            raise GridError(f"half_width must be positive, got {self.half_width!r}")
        if N != self.points_per_side or N < 2:
            raise GridError(f"points_per_side must be an integer >= 2, got {self.points_per_side!r}")
        if N % 2:
            raise OddGridSize(f"points_per_side must be even, got {N}")
        object.__setattr__(self, "half_width", L)
        object.__setattr__(self, "points_per_side", N)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_side

    @property
    def shape(self) -> tuple[int, int]:
        return (self.points_per_side, self.points_per_side)

    @property
    def axis(self) -> np.ndarray:
        """1-D node coordinates ``-L + j h``."""
        return -self.half_width + self.spacing * np.arange(self.points_per_side)

    def nodes(self) -> np.ndarray:
        x = self.axis
        return x[:, None] + 1j * x[None, :]

    def node(self, j: int, k: int) -> complex:
        x = self.axis
        return complex(x[j], x[k])

    @property
    def margin_cells(self) -> int:
        """Width (in cells) of the band next to the frame that must stay empty."""
        return int(np.ceil(MARGIN_FRACTION * self.half_width / self.spacing))

    def index_of(self, z: complex) -> tuple[int, int]:
        """Indices of the node nearest to ``z``."""
        h, L = self.spacing, self.half_width
        j = int(round((z.real + L) / h))
        k = int(round((z.imag + L) / h))
        if not (0 <= j < self.points_per_side and 0 <= k < self.points_per_side):
            raise GridError(f"point {z} lies outside the grid")
        return j, k

    def subgrid(self, stride: int) -> "GridSpec":
        """Grid made of every ``stride``-th node (same square, coarser spacing)."""
        stride = int(stride)
        if stride < 1 or self.points_per_side % stride:
            raise GridError(f"stride {stride} does not divide N={self.points_per_side}")
        return GridSpec(self.half_width, self.points_per_side // stride)

    def frame_mask(self, cells: int | None = None) -> np.ndarray:
        """Boolean mask of nodes within ``cells`` of the grid frame."""
        c = self.margin_cells if cells is None else int(cells)
        N = self.points_per_side
        idx = np.arange(N)
        edge = (idx < c) | (idx >= N - c)
        return edge[:, None] | edge[None, :]

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "points_per_side": self.points_per_side}


def make_grid(half_width: float, points_per_side: int) -> GridSpec:
    """Validated grid constructor; refuses grids smaller than 8 x 8."""
    if int(points_per_side) != points_per_side:
        raise GridError(f"points_per_side must be an integer, got {points_per_side!r}")
    if points_per_side % 2:
        raise OddGridSize(f"points_per_side must be even, got {points_per_side}")
    if points_per_side < 8:
        raise GridError(f"points_per_side must be >= 8, got {points_per_side}")
    return GridSpec(half_width, int(points_per_side))


Scalar = Union[int, float, complex]


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples on every node of a grid; read-only once built."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            arr = np.broadcast_to(arr, self.grid.shape).copy()
        if not np.all(np.isfinite(arr)):
            raise NonFiniteSample("field contains NaN or Inf values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def constant(cls, grid: GridSpec, value: Scalar) -> "ComplexField":
        return cls(grid, np.full(grid.shape, value, dtype=np.complex128))

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))

    def frame_max(self, cells: int | None = None) -> float:
        """Largest modulus inside the frame band of width ``cells``."""
        return float(np.abs(self.values[self.grid.frame_mask(cells)]).max())

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def _other(self, other):
        if isinstance(other, ComplexField):
            if other.grid != self.grid:
                raise GridMismatch(f"{other.grid} != {self.grid}")
            return other.values
        return other

    def __add__(self, other):
        return ComplexField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ComplexField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ComplexField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ComplexField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def __eq__(self, other):
        if not isinstance(other, ComplexField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None


def sample(f: Callable[[np.ndarray], np.ndarray], grid: GridSpec) -> ComplexField:
    """Evaluate a vectorised descriptor ``f(z)`` at every node of ``grid``."""
    with np.errstate(all="ignore"):
        vals = np.asarray(f(grid.nodes()), dtype=np.complex128)
    vals = np.broadcast_to(vals, grid.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("descriptor produced NaN/Inf on the grid")
    return ComplexField(grid, vals)


def integrate(f: ComplexField) -> complex:
    """Cell-rule quadrature ``h^2 * sum(f)`` over the grid square."""
    return complex(f.grid.spacing ** 2 * f.values.sum())


# -- analytic presets ---------------------------------------------------------

def _smooth_bump(z, center, radius):
    """C-infinity bump equal to 1 at ``center`` and 0 for ``|z - center| >= radius``."""
    s2 = np.abs(np.asarray(z) - center) ** 2 / radius ** 2
    out = np.zeros(np.shape(s2))
    inside = s2 < 1.0
    out[inside] = np.exp(-s2[inside] / (1.0 - s2[inside]))
    return out


def _cosine_bump(z, center, radius):
    s = np.abs(np.asarray(z) - center) / radius
    out = np.zeros(np.shape(s))
    inside = s < 1.0
    out[inside] = np.cos(0.5 * np.pi * s[inside]) ** 6
    return out


TEST_FUNCTION_KINDS = ("gaussian_bump", "cosine_bump", "two_bump")

# secondary lobe of ``two_bump``: offset, radius and weight relative to the primary
_TWO_BUMP_OFFSET = 0.55
_TWO_BUMP_RADIUS = 0.4
_TWO_BUMP_WEIGHT = 0.75


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported bump, zero outside the disk ``|z - center| < radius``.

    ``two_bump`` is a primary bump of radius ``radius/2`` at ``center`` plus a
    smaller lobe on the positive real side; both sit inside the same disk and
    the value at ``center`` is still ``amplitude``.
    """

    __test__ = False  # not a pytest class

    kind: str = "gaussian_bump"
    center: complex = 0j
    radius: float = 0.5
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.kind not in TEST_FUNCTION_KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    def __call__(self, z):
        c, r, a = self.center, self.radius, self.amplitude
        if self.kind == "gaussian_bump":
            return a * _smooth_bump(z, c, r)
        if self.kind == "cosine_bump":
            return a * _cosine_bump(z, c, r)
        primary = _smooth_bump(z, c, 0.5 * r)
        lobe = _smooth_bump(z, c + _TWO_BUMP_OFFSET * r, _TWO_BUMP_RADIUS * r)
        return a * (primary + _TWO_BUMP_WEIGHT * lobe)

    def sample(self, grid: GridSpec) -> ComplexField:
        return sample(self, grid)

    def inside(self, grid: GridSpec, margin: float | None = None) -> bool:
        """True when the support disk keeps ``margin`` (default 10% of L) from the frame."""
        L = grid.half_width
        m = MARGIN_FRACTION * L if margin is None else margin
        c, r = self.center, self.radius
        return (abs(c.real) + r <= L - m) and (abs(c.imag) + r <= L - m)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }


CONDUCTIVITY_KINDS = ("unit", "real_bump", "complex_bump", "two_bump")

_DEFAULT_AMPLITUDE = {
    "unit": 0.0,
    "real_bump": 0.8,
    "complex_bump": 0.6 + 0.4j,
    "two_bump": 0.6,
}


@dataclass(frozen=True)
class ConductivityPreset:
    """Conductivity ``gamma = exp(bump)``; identically 1 outside the bump support.

    ``amplitude=None`` selects the preset default (0.8 for ``real_bump``,
    0.6+0.4i for ``complex_bump``, 0.6 for ``two_bump``).
    """

    kind: str = "real_bump"
    center: complex = 0j
    radius: float = 0.6
    amplitude: complex | None = None

    def __post_init__(self):
        if self.kind not in CONDUCTIVITY_KINDS:
            raise ValueError(
                f"unknown conductivity preset {self.kind!r}; expected one of {CONDUCTIVITY_KINDS}"
            )
        amp = _DEFAULT_AMPLITUDE[self.kind] if self.amplitude is None else self.amplitude
        if self.kind == "real_bump" and complex(amp).imag != 0:
            raise ValueError("real_bump needs a real amplitude")
        object.__setattr__(self, "amplitude", complex(amp))
        object.__setattr__(self, "center", complex(self.center))

    @property
    def bump(self) -> TestFunction:
        kind = "two_bump" if self.kind == "two_bump" else "gaussian_bump"
        return TestFunction(kind, self.center, self.radius, self.amplitude)

    def log_gamma(self, z):
        if self.kind == "unit":
            return np.zeros(np.shape(z), dtype=np.complex128)
        return self.bump(z)

    def __call__(self, z):
        return np.exp(self.log_gamma(z))

    def sample(self, grid: GridSpec) -> ComplexField:
        if self.kind != "unit" and not self.bump.inside(grid):
            raise SupportTooClose(
                f"preset support (center {self.center}, radius {self.radius}) "
                f"is within {MARGIN_FRACTION:.0%} of L of the grid frame"
            )
        return sample(self, grid)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConductivityPreset":
        amp = d.get("amplitude")
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        c = d.get("center", 0j)
        if isinstance(c, (list, tuple)):
            c = complex(c[0], c[1])
        return cls(d["kind"], c, float(d.get("radius", 0.6)), amp)


# -- serialisation ------------------------------------------------------------

def write_cfld(f: ComplexField, path) -> None:
    """Write the flat binary CFLD format.

    Header ``b"CFLD"``, version (u32), N (u32), L (f64), little endian; then
    N^2 interleaved float64 (re, im) pairs in row-major node order.
    """
    N = f.grid.points_per_side
    header = _CFLD_HEADER.pack(CFLD_MAGIC, CFLD_VERSION, N, f.grid.half_width)
    payload = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    Path(path).write_bytes(header + payload)


def read_cfld(path) -> ComplexField:
    raw = Path(path).read_bytes()
    if len(raw) < _CFLD_HEADER.size:
        raise ValueError(f"{path}: truncated CFLD header")
    magic, version, N, L = _CFLD_HEADER.unpack_from(raw)
    if magic != CFLD_MAGIC:
        raise ValueError(f"{path}: not a CFLD file")
    if version != CFLD_VERSION:
        raise ValueError(f"{path}: unsupported CFLD version {version}")
    body = raw[_CFLD_HEADER.size:]
    if len(body) != 16 * N * N:
        raise ValueError(f"{path}: payload size does not match N={N}")
    vals = np.frombuffer(body, dtype="<c16").reshape(N, N)
    return ComplexField(GridSpec(L, N), vals)


def write_csv(f: ComplexField, path) -> None:
    """Plot-ready CSV with columns ``x, y, re, im`` in node order."""
    x = f.grid.axis
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "re", "im"])
        for j in range(len(x)):
            for k in range(len(x)):
                v = f.values[j, k]
                w.writerow([repr(float(x[j])), repr(float(x[k])), repr(float(v.real)), repr(float(v.imag))])
