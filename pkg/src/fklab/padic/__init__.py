"""Q_p arithmetic, the radial jump density, its process, and a finite model."""

from .numbers import (
    DEFAULT_PRECISION,
    PadicNumber,
    PrecisionExhaustedError,
    character,
    padic_add,
    padic_mul,
    padic_neg,
    padic_norm,
)
from .density import (
    MomentBoundReport,
    RadialDensitySpec,
    absolute_moment,
    ball_mass,
    convolve_radial,
    moment_and_bound_checks,
    positive_definiteness_check,
    radial_density,
    radius_distribution,
    semigroup_convolution_check,
    sphere_character_integral,
    sphere_mass,
    upper_tail,
)
from .process import (
    RejectionBudgetError,
    padic_fk_kernel,
    sample_increment,
    sample_padic_bridge,
    sample_padic_path,
)
from .vladimirov import (
    VladimirovSpec,
    coset_norms,
    vladimirov_hamiltonian,
    vladimirov_kernel_matrix,
)

__all__ = [
    "DEFAULT_PRECISION",
    "PadicNumber",
    "PrecisionExhaustedError",
    "character",
    "padic_add",
    "padic_mul",
    "padic_neg",
    "padic_norm",
    "MomentBoundReport",
    "RadialDensitySpec",
    "absolute_moment",
    "ball_mass",
    "convolve_radial",
    "moment_and_bound_checks",
    "positive_definiteness_check",
    "radial_density",
    "radius_distribution",
    "semigroup_convolution_check",
    "sphere_character_integral",
    "sphere_mass",
    "upper_tail",
    "RejectionBudgetError",
    "padic_fk_kernel",
    "sample_increment",
    "sample_padic_bridge",
    "sample_padic_path",
    "VladimirovSpec",
    "coset_norms",
    "vladimirov_hamiltonian",
    "vladimirov_kernel_matrix",
]
