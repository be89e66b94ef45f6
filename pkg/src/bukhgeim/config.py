"""Experiment configuration: one JSON document, every default explicit."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .cgo import DEFAULT_MAX_ITER, DEFAULT_TOL
from .exceptions import ConfigError
from .grid import CONDUCTIVITY_KINDS, TEST_FUNCTION_KINDS, ConductivityPreset, TestFunction, make_grid
from .scattering import CONJ_MODES, METHODS, Annulus

__all__ = ["ExperimentConfig", "load_config"]


def _pair(c) -> list[float]:
    c = complex(c)
    return [c.real, c.imag]


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex values are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


@dataclass
class ExperimentConfig:
    """All knobs of one experiment.

    Complex numbers are stored as ``[re, im]`` pairs so the JSON form is
    lossless.  ``sweep_presets`` and ``sweep_radii`` drive ``roundtrip``
    (empty means just ``preset`` and ``annulus_R``).
    """

    half_width: float = 1.0
    points_per_side: int = 128
    preset: str = "complex_bump"
    preset_center: list = field(default_factory=lambda: [0.0, 0.0])
    preset_radius: float = 0.6
    preset_amplitude: list | None = None
    annulus_R: float = 20.0
    n_r: int = 4
    n_theta: int = 8
    w_stride: int = 8
    w_radius: float | None = 0.7
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    conj_mode: str = "conjugated"
    method: str = "volume"
    parallel_width: int = 1
    output_dir: str = "out"
    seed: int = 0
    sweep_presets: list = field(default_factory=list)
    sweep_radii: list = field(default_factory=list)
    test_function: str = "gaussian_bump"
    test_center: list = field(default_factory=lambda: [0.05, 0.1])
    test_radius: float = 0.45
    diag_shells: list = field(default_factory=lambda: [[10.0, 20.0], [20.0, 40.0], [40.0, 80.0]])
    diag_p: float = 4.0
    diag_z: list = field(default_factory=lambda: [[0.0, 0.0], [0.2, -0.1], [-0.3, 0.25]])
    diag_w: list = field(default_factory=lambda: [[0.0, 0.0], [0.1, 0.05]])
    stationary_lambdas: list = field(default_factory=lambda: [16.0, 32.0, 64.0, 128.0])
    stationary_z: list = field(default_factory=lambda: [0.1, 0.05])

    def __post_init__(self):
        try:
            self.validate()
        except TypeError as exc:
            raise ConfigError(f"bad value type: {exc}") from None

    def validate(self) -> None:
        try:
            make_grid(self.half_width, self.points_per_side)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        N = self.points_per_side
        if N & (N - 1):
            warnings.warn(f"points_per_side={N} is not a power of two", stacklevel=3)
        for kind in [self.preset, *self.sweep_presets]:
            if kind not in CONDUCTIVITY_KINDS:
                raise ConfigError(f"unknown preset {kind!r}; expected one of {CONDUCTIVITY_KINDS}")
        if self.test_function not in TEST_FUNCTION_KINDS:
            raise ConfigError(f"unknown test function {self.test_function!r}")
        if self.conj_mode not in CONJ_MODES:
            raise ConfigError(f"conj_mode must be one of {CONJ_MODES}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.w_stride < 1 or N % self.w_stride or (N // self.w_stride) % 2:
            raise ConfigError(f"w_stride={self.w_stride} must divide N={N} into an even count")
        if self.annulus_R <= 0 or any(r <= 0 for r in self.sweep_radii):
            raise ConfigError("annulus radii must be positive")
        if self.n_r < 1 or self.n_theta < 1:
            raise ConfigError("n_r and n_theta must be positive")
        if not (self.tol > 0 and self.max_iter >= 1):
            raise ConfigError("need tol > 0 and max_iter >= 1")
        if self.parallel_width < 1:
            raise ConfigError("parallel_width must be >= 1")
        if self.diag_p <= 1:
            raise ConfigError("diag_p must exceed 1")

    # -- derived objects ----------------------------------------------------

    @property
    def grid(self):
        return make_grid(self.half_width, self.points_per_side)

    def conductivity(self, kind: str | None = None) -> ConductivityPreset:
        amp = None if self.preset_amplitude is None else _cplx(self.preset_amplitude)
        kind = kind or self.preset
        if kind != self.preset:
            amp = None
        return ConductivityPreset(kind, _cplx(self.preset_center), self.preset_radius, amp)

    def annulus(self, R: float | None = None) -> Annulus:
        return Annulus(self.annulus_R if R is None else R, None, self.n_r, self.n_theta)

    def g(self) -> TestFunction:
        return TestFunction(self.test_function, _cplx(self.test_center), self.test_radius)

    def presets(self) -> list[str]:
        return list(self.sweep_presets) or [self.preset]

    def radii(self) -> list[float]:
        return [float(r) for r in self.sweep_radii] or [self.annulus_R]

    # -- serialisation ----------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        d = dict(d)
        for key in ("preset_center", "test_center", "stationary_z"):
            if key in d:
                d[key] = _pair(_cplx(d[key]))
        if d.get("preset_amplitude") is not None:
            d["preset_amplitude"] = _pair(_cplx(d["preset_amplitude"]))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return ExperimentConfig.from_json(text)
