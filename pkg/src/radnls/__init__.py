"""Radial focusing NLS in two dimensions: ground states, threshold tests,
Morawetz instrumentation and scattering diagnostics."""

from .config import ExperimentConfig, load_config, preset, save_config
from .diagnostics import (
    VerdictReport,
    blowup_probe,
    run_experiment,
    scattering_metric,
    spacetime_2p_norm,
)
from .errors import *  # noqa: F401,F403
from .evolve import (
    EvolveConfig,
    Trajectory,
    conservation_report,
    evolve,
    linear_propagate,
    step,
)
from .grid import (
    NormBundle,
    RadialField,
    RadialGrid,
    grad_l2_sq,
    lp_norm,
    make_grid,
    norm_bundle,
    radial_laplacian,
    radial_sobolev_ratio,
)
from .groundstate import (
    GroundStateProfile,
    gn_constant,
    pohozaev_residuals,
    shoot_ground_state,
    threshold_quantities,
)
from .morawetz import (
    MorawetzSeries,
    WeightPair,
    coercive_lower_bound_check,
    make_weights,
    morawetz_action,
    rate_decomposition,
    spacetime_estimate,
)
from .variational import (
    ThresholdReport,
    classify,
    coercivity_margin,
    coercivity_trajectory_check,
    rescale_to_unit,
)

ComplexRadialField = RadialField

__version__ = "0.1.0"
