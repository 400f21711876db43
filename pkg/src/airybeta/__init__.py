"""Computational toolkit for edge moments of Gaussian beta ensembles.

Exact symmetrized Dunkl-operator moment evaluation (corners and Dyson-dynamic
joint moments), the combinatorial walk expansion of those moments, lattice
path counting with its continuum kernel limits, conditioned-path Monte Carlo
for the Gaussian-kernel functionals, the continuum blocks integral L_beta,
and random-matrix samplers for independent cross-checks.
"""

from .errors import ValidationError, ResourceLimitError
from .dunkl import (
    MomentQuery,
    DunklEngine,
    corners_moment,
    dbm_moment,
    fixed_index_product,
    check_commutation,
    check_nested_commutator,
    bessel_beta2,
    eigenrelation_residual_beta2,
    scaled_edge_moment,
)
from .walks import (
    Walk,
    enumerate_walks,
    validate_walk,
    walk_weight,
    walk_weight_factored,
    expansion_check,
    to_discrete_blocks,
    preimage_walks,
    DiscreteBlocks,
    BlocksRejection,
)
from .paths import (
    count_paths,
    catalan_count,
    weighted_sum_I,
    log_count_paths,
    asymptotic_count_check,
    kernel_scaling_check,
)
from .bridges import (
    gauss_F,
    gauss_F0,
    gauss_F00,
    I_mc,
    I0_mc,
    I00_mc,
    sample_path,
)
from .blocks import (
    BlockFunction,
    BlockProcess,
    VirtualBlocks,
    BlockHeight,
    Blocks,
    validate_blocks,
    xi_partition,
    integrand,
    enumerate_strata,
    l_beta_truncated,
    epsilon_extrapolate,
)
from .ensembles import (
    sample_gbe,
    gbe_sum_sq_mean,
    corners_level_down,
    corners_step_beta,
    sample_gbe_corners,
    simulate_dbm,
    mc_joint_moment,
    edge_rescale_moment,
    largest_eigenvalue_scaled,
)

__version__ = "0.1.0"
