"""Higher-order lubrication expansions for thin periodic Stokes flow.

Modules: ``basis`` (partition basis and sparse operators), ``matrices``
(expansion recursion), ``constants`` (universal constants), ``geometry``
(shapes and moments), ``fields`` (evaluation of the truncated expansion),
``bounds`` (a priori error bounds), ``solver`` (spectral reference solver)
and ``cli``.
"""

__version__ = "0.1.0"

from .basis import Basis, generate_bases, get_basis, partition_count  # noqa: E402
from .bounds import ErrorBudget, gamma_k_profile, star_bound  # noqa: E402
from .constants import universal_constants  # noqa: E402
from .fields import BoundaryData, EvalContext, truncated_fields  # noqa: E402
from .geometry import moments, parse_shape  # noqa: E402
from .matrices import expansion_stack  # noqa: E402
from .solver import SolverConfig, convergence_study, solve_stokes  # noqa: E402

__all__ = [
    "Basis", "generate_bases", "get_basis", "partition_count", "ErrorBudget", "gamma_k_profile",
    "star_bound", "universal_constants", "BoundaryData", "EvalContext", "truncated_fields",
    "moments", "parse_shape", "expansion_stack", "SolverConfig", "convergence_study",
    "solve_stokes",
]
