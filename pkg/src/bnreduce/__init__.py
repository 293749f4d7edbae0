"""Numerical tools for the slightly subcritical perturbation of the critical
Lane-Emden problem on bounded domains: Green and Robin functions, the
finite-dimensional reduced energy, bubble projections, radial shooting and
checks of blow-up asymptotics."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .green import (Ball, BallGreen, Generic, MFSGreen, build_provider,  # noqa: F401
                    domain_from_dict, omega, singular_S)
from .reduced import (Config, Constants, ProblemParams, bubble_constants,  # noqa: F401
                      constants, find_critical, grad_phi, hessian_phi,
                      interaction_matrix, lowest_eigenpair, phi, rate_constant,
                      single_peak_lambda, unique_lambda)
from .bubbles import (BubbleParams, ansatz_residual, bubble, interaction_integral,  # noqa: F401
                      projection_psi, sobolev_energy)
from .radial import (RadialProfile, epsilon_for_height, integrate_ivp,  # noqa: F401
                     solve_on_ball, sweep)
