"""Free-boundary price formation: equilibria, simulation and linear stability."""
from .errors import *  # noqa: F401,F403
from .grid import (Grid, GridFunction, derivative_at, deposit_delta, discrete_norms, integrate,
                   interpolate, make_grid, read_csv, sample, write_csv)
from .manifold import (KernelCoords, NRemainder, h_map, invert_h, n_remainder, pair_measure,
                       predict_limit, project_kernel, smallness_exponent, stationarity_check)
from .model import (Equilibrium, Geometry, MassPair, ModelParams, admissible,
                    equilibrium_from_masses, eval_equilibrium, masses_of_equilibrium,
                    validate_params)
from .solver import SimState, Trajectory, find_root, init_state, run, step
from .spectral import (EigenPair, analytic_spectrum, assemble_discrete_operator,
                       classify_symmetric, discrete_spectrum, eigenfunction_eval,
                       eigenvalue_candidates, kernel_basis, matching_rank, spectral_gap)

__version__ = "0.1.0"
