"""Numerical approximation of regular Sasakian structures on radial models.

Monomial norms, Bergman densities, induced potentials, D-homotheties and
eta-Einstein constants for the cylinder, punctured disc and Fubini-Study
models (or user-supplied radial potentials).
"""

__version__ = "0.1.0"

from .bergman import (
    ConvergenceReport,
    EpsilonPoint,
    convergence_report,
    epsilon_function,
    epsilon_periodicity_check,
    induced_potential,
    pullback_coordinate,
)
from .errors import *  # noqa: F401,F403
from .models import (
    RadialPolarizedModel,
    builtin_model,
    contact_check,
    cylinder,
    fubini_study,
    punctured_disc,
    transverse_curvature,
    transverse_form_density,
    transverse_kahler_deform,
)
from .numerics import LogSum, QuadratureSpec, integrate, log_gamma, log_sum_exp
from .sasaki import (
    EtaEinsteinConstants,
    SasakianStructureParams,
    d_homothety,
    eta_einstein_constants,
    homothety_of_constants,
    induced_structure,
)
from .sections import (
    MonomialNormTable,
    allowed_indices,
    gram_offdiagonal,
    monomial_log_norm,
    norm_table,
    orthonormal_coefficients,
)
