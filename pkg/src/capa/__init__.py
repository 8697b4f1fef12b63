"""Channel, capacity and operator-level analysis of continuous-aperture
array (CAPA) uplinks with one or two users."""

from .capacity import (
    CapacityRegion,
    LinkBudget,
    RatePair,
    SicOrder,
    asymptotic_sum_rate,
    capacity_region,
    gamma2_sic,
    lambda_star,
    rates_for_order,
    single_user_capacity,
    sum_rate_capacity,
    sum_rate_upper_bound,
)
from .channel import Wave, channel_response_h, green_full, green_radiating, kernel_g, projected_aperture_factor
from .errors import CapaError, ConvergenceError, DomainError, UsageError
from .geometry import PlanarRect, SpdGrid, UserSource, occupation_ratio, spd_element_centers, user_position
from .quadrature import (
    QuadratureSpec,
    TwoUserChannel,
    channel_gain,
    channel_statistics,
    closed_form_gain_planar,
    correlation_rho,
    integrate,
    spd_gain_approx,
)

__version__ = "0.1.0"
