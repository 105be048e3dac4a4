"""Gap solitons of periodic Gross-Pitaevskii equations via coupled mode equations.

Modules
-------
bloch         Bloch waves of the periodic Schroedinger operator.
cme           Coupled mode equation coefficients and models.
dispersion    CME dispersion relation, spectral gaps and band edges.
nls_seed      Effective NLS at a band edge and its ground state.
petviashvili  Stationary CME solutions and continuation in Omega.
dynamics      Time evolution of the CME and the GP, approximation errors.
io, pipeline, cli
              File formats, staged pipeline and command line interface.
"""

from .bloch import BlochMode, PerturbationPotential, PeriodicPotential, band_structure, solve_bloch
from .cme import CarrierSet, CmeModel, gamma_tensor, kappa_matrix, symmetric_four_mode_model
from .dispersion import band_edge, locate_band_edge, moving_frame_scan, scan_gap
from .errors import (
    ConfigError,
    DegenerateModeError,
    GapSolitonError,
    NumericalError,
    ResolutionError,
    SingularSymbolError,
    StageError,
)
from .grid import UniformGrid, VectorField
from .nls_seed import NlsProblem, build_cme_ansatz, effective_nls_coeffs, shoot_radial
from .petviashvili import continue_in_omega, petviashvili_solve, solve_resolved

__version__ = "0.1.0"
