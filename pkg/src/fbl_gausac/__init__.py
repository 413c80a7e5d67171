"""Finite-blocklength achievable rates and Monte Carlo simulation for the Gaussian
multiple-access and random-access channels."""

from .dispersion import (
    PowerAllocation,
    analysis_constants,
    capacity,
    capacity_vector,
    cross_dispersion,
    dispersion_matrix,
    dispersion_v,
)
from .errors import ConfigError, DomainError, FblError, MatrixError, ScheduleError, SizeError
from .estimate import EstimateWithCI
from .gaussian_region import (
    RateTuple,
    Verdict,
    achievable_logM_symmetric,
    boundary_along_ray,
    lower_orthant_prob,
    min_n0,
    mvn_sample,
    rate_tuple_achievable,
    stam_bound,
    tv_gaussian_bound,
)
from .mac_sim import MacConfig, decode_mac_ml, generate_codebooks, rcu_mc_estimate, simulate_mac
from .rac_sim import (
    ErrorBreakdown,
    RacSchedule,
    TrialOutcome,
    build_rac_schedule,
    power_typical,
    run_epoch,
    simulate_rac,
    wrong_time_bound,
)
from .specfun import chi2_tail_bounds, gaussian_q, gaussian_q_inv, sphere_coord_cdf
from .sphere import inner_product_q, sample_concat_sphere, sample_sphere

__version__ = "0.1.0"
