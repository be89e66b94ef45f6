"""Bukhgeim-type inverse scattering for the 2D conductivity equation.

Pipeline: conductivity -> Dirac potential -> CGO solutions -> scattering
data -> annulus-averaged reconstruction of the potential and conductivity.
"""

__version__ = "0.1.0"

from .cauchy import CauchyKernel, cauchy_oracle, cauchy_transform, dbar, partial
from .cgo import (
    DecayReport,
    MuSolution,
    SpectralPoint,
    apply_L_lambda,
    apply_M,
    assemble_psi,
    bukhgeim_phase,
    decay_diagnostics,
    solve_mu,
    solve_mu11_via_M,
)
from .config import ExperimentConfig, load_config
from .dirac import DiracPotential, conductivity_to_potential, potential_to_conductivity
from .estimator import AnnulusReconstructor, DiracMap, ScatteringTransform
from .exceptions import *  # noqa: F401,F403
from .grid import (
    ComplexField,
    ConductivityPreset,
    GridSpec,
    TestFunction,
    integrate,
    make_grid,
    read_cfld,
    sample,
    write_cfld,
    write_csv,
)
from .quadrature import annulus_quadrature
from .reconstruction import (
    ErrorMetrics,
    ReconstructionResult,
    error_metrics,
    reconstruct,
    reconstruct_pointwise,
    reconstruct_weak,
    recover_gamma,
    stationary_phase_check,
)
from .scattering import (
    Annulus,
    ScatteringDataset,
    SquareContour,
    T_lambda,
    compute_dataset,
    scattering_boundary,
    scattering_volume,
    w_lattice,
)
