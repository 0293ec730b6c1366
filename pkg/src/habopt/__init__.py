"""Total-population maximization for the steady logistic-diffusive equation."""

__version__ = "0.1.0"

from .adjoint import GradientBundle, fd_validate, gradient, solve_adjoint  # noqa: E402
from .evolution import EvolutionOptions, evolve  # noqa: E402
from .grid import (Grid, ScalarField, build_grid, integrate, laplacian_apply,  # noqa: E402
                   solve_shifted)
from .optimizer import (OptimOptions, OptimRun, multistart, optimize,  # noqa: E402
                        threshold_to_volume)
from .resource import (ConstraintSet, ResourceField, bang_bang_fraction,  # noqa: E402
                       distance_to_boundary_crenel, fragment_count_1d, make_crenel_1d,
                       make_random, monotone_concentration_defect, project_admissible)
from .steady import SteadyOptions, SteadySolution, residual_norm, solve_steady  # noqa: E402
