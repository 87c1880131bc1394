"""stochray: path-loss prediction for 2D random-lattice wireless channels.

The package models non-line-of-sight propagation through cluttered
environments as stochastic rays bouncing through a site-percolation lattice,
and evaluates the resulting mean received power through mutually
cross-checking series, quadrature, closed-form and asymptotic routes.
"""

from .calibrate import (
    EnvironmentDescription,
    MeasurementSet,
    derive_lattice_params,
    fit_decay_shape,
    fit_reflection_loss,
    predict_at_distances,
    read_measurements,
    rms_error,
    sensitivity_sweep,
    suggest_reflection_loss,
    write_measurements,
)
from .distributions import (
    RayModel,
    collision_profile,
    mean_travel_distance,
    pdf_generic,
    pdf_random_walk,
    radial_cdf_generic,
    radial_cdf_random_walk,
    random_walk_equivalence,
)
from .errors import (
    DomainError,
    FarFieldViolation,
    InsufficientSamples,
    LengthMismatch,
    MissingSpacing,
    NonConvergence,
    SourceInClosedCell,
    StochrayError,
    UnsupportedBeta,
)
from .lattice import (
    PERCOLATION_THRESHOLD,
    Lattice,
    LatticeSpec,
    PercRegime,
    Regime,
    classify_regime,
    generate_lattice,
    lattice_from_text,
    lattice_to_text,
    mean_obstacle_spacing,
)
from .montecarlo import (
    DeterministicLoss,
    FixedStepWalk,
    SimConfig,
    UniformLoss,
    collision_radii,
    empirical_collision_density,
    empirical_power,
    goodness_of_fit,
    mean_free_path,
    nearest_open_cell_center,
    trace_ray,
)
from .pathloss import (
    ROUTES,
    ChannelParams,
    PowerResult,
    mean_power,
    mean_power_asymptotic,
    mean_power_closed,
    mean_power_integral,
    mean_power_series,
    path_loss_curve,
    write_curve_csv,
    xi_from_reflection_loss,
)
from .specfun import (
    QuadratureSpec,
    asymptotic_k,
    bessel_k0,
    bessel_k0_scaled,
    bessel_k1,
    bessel_k1_scaled,
    integrate,
)

__version__ = "0.1.0"
