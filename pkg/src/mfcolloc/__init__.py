"""Multi-fidelity sparse-grid stochastic collocation for the forced 1D Burgers equation.

High-fidelity solves use a group finite element discretization; nearby
collocation nodes reuse them through group-POD reduced models whose bases
are extrapolated with analytic mode sensitivities.
"""

from .errors import MfcError, InputError, NumericalError
from .forcing import ForcingSpec, RandomPoint
from .fem import Mesh1D, SolverConfig, solve_gfe
from .rom import assemble_rom, build_pod_basis, solve_rom
from .sensitivity import compute_bundle, improve_basis
from .sparse_grid import interpolate, moments, smolyak_plan
from .multifid import reference_full_run, run_multifid
from .mc import McConfig, mc_moments, sample_point

__version__ = "0.1.0"
