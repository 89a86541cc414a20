"""Numerical laboratory for curvature-dimension bounds with negative
generalized dimension on one-dimensional metric measure spaces."""

from .cdcheck import (
    CdReport,
    CdRow,
    ConvexityReport,
    OmegaTable,
    SuiteReport,
    cd_suite,
    default_nprime_grid,
    estimate_omega,
    hierarchy_check,
    kn_convexity_check,
    omega_to_Omega,
    regular_intervals,
    richardson_check,
    sample_pair_specs,
    t_functional,
    verify_cd,
)
from .distortion import sigma_kappa, sigma_KN, tau_KN, tau_KN_vec
from .errors import *  # noqa: F401,F403
from .extreal import INF
from .geodesics1d import (
    GeodesicSlice,
    displacement_interpolate,
    jacobi_density,
    union_refined_grid,
)
from .ikrw import (
    ConvergenceRow,
    ConvergenceTable,
    PlateauBump,
    convergence_experiment,
    extrinsic_gap,
    glued_drift_space,
    hausdorff_distance,
    ikrw,
    ikrw_fm,
    make_test_family,
    truncated_power_space,
    weak_convergence_gap,
)
from .measure import (
    DensityWrtM,
    DiscreteMeasure,
    bump,
    conjugate_coefficient,
    entropy_from_masses,
    explicit,
    f_star,
    legendre_entropy,
    measure_from_dict,
    mixture,
    optimal_test_function,
    radon_nikodym,
    renyi_entropy,
    uniform_block,
)
from .mmspace import (
    Grid1D,
    ModelSpec,
    PointedSpace1D,
    build_model_space,
    cut_weights,
    detect_singular_set,
    f_cut,
    k_cut,
    load_space,
    normalize_cut,
    refine,
    regular_set,
    space_from_dict,
    space_summary,
    total_mass,
)
from .transport import (
    CostSpec,
    Coupling,
    MonotoneMap,
    monotone_map,
    optimal_coupling_lp,
    w2_block_1d,
    w2_quantile_1d,
    wc_distance,
    weighted_marginalization,
)

__version__ = "0.1.0"
