"""Exact solutions of time-fractional reaction-diffusion equations with delay.

Closed-form delayed Prabhakar series for the coefficient equations, a
numerical invariant-subspace catalog, and independent oracles (fractional
ABM delay solver, L1 Caputo residuals) to check them against.
"""

from ._backend import BACKEND
from .caputo import UniformGrid, caputo_l1
from .delay_series import (DelaySeriesProblem, HistoryFunction, coefficient,
                           coefficient_multi_delay, convolve_history, forced_term,
                           heaviside, homogeneous_kernel, impulse_kernel)
from .errors import *  # noqa: F401,F403
from .oracle import (OracleSystem, Trajectory, compatible_step, method_of_steps,
                     solve_fdde, system_from_problem)
from .pde_verify import (AssembledSolution, convergence_table, named_solution,
                         pde_residual)
from .special import (PrabhakarParams, gamma_fn, kahan_sum, ml_two, pochhammer,
                      prabhakar)
from .subspace import (OperatorSpec, Subspace, apply_operator, catalog,
                       check_invariance, reduce_to_fdde)

__version__ = "0.1.0"
