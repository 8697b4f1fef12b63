"""Closed-form rates for the single-user and two-user CAPA uplink.

All rates are in bits/s/Hz. Transmit SNRs are dimensionless linear values
(use :meth:`LinkBudget.from_db` for dB inputs).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import Wave
from .errors import DomainError, UsageError
from .quadrature import RHO_U_SLACK, TwoUserChannel


@dataclass(frozen=True)
class LinkBudget:
    gamma_bar: float

    def __post_init__(self):
        if not self.gamma_bar >= 0:
            raise UsageError(f"transmit SNR must be non-negative, got {self.gamma_bar}")

    @classmethod
    def from_db(cls, snr_db: float) -> "LinkBudget":
        return cls(10.0 ** (snr_db / 10.0))

    @classmethod
    def from_physical(cls, current_density_mag: float, tx_area: float, wave: Wave, sigma2: float) -> "LinkBudget":
        """``|J|^2 |A|^2 k0^2 eta^2 / (4 pi sigma^2)``."""
        if not sigma2 > 0:
            raise UsageError("noise spectral density must be positive")
        g = (current_density_mag * tx_area * wave.k0 * wave.eta) ** 2 / (4 * math.pi * sigma2)
        return cls(g)

    @property
    def db(self) -> float:
        return 10 * math.log10(self.gamma_bar) if self.gamma_bar > 0 else -math.inf


class SicOrder(enum.Enum):
    """Decoding order; ``TWO_THEN_ONE`` decodes user 2 first."""

    ONE_THEN_TWO = "1->2"
    TWO_THEN_ONE = "2->1"


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float
    order: SicOrder

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise DomainError(f"rates must be non-negative, got ({self.r1}, {self.r2})")

    @property
    def total(self) -> float:
        return self.r1 + self.r2


def single_user_capacity(lb: LinkBudget, a_R: float) -> float:
    if a_R < 0:
        raise DomainError(f"array gain must be non-negative, got {a_R}")
    return math.log2(1 + lb.gamma_bar * a_R)


def lambda_star(gamma_bar_1: float, a1: float) -> tuple[float, float]:
    """Both roots of the whitening quadratic, canonical ('+') root first.

    The canonical root lies in ``(-1/a1, 0]`` and reduces to 0 when the
    interferer is silent.
    """
    if not a1 > 0:
        raise DomainError(f"interferer gain must be positive, got {a1}")
    if gamma_bar_1 < 0:
        raise DomainError("transmit SNR must be non-negative")
    x = gamma_bar_1 * a1
    sq = math.sqrt(1 + x)
    # conjugate form of -1/a1 + 1/(a1 sq); the direct one cancels for small x
    plus = -x / (a1 * sq * (sq + 1))
    minus = -1.0 / a1 - 1.0 / (a1 * sq)
    return plus, minus


def whitening_quadratic(lam: float, gamma_bar_1: float, a1: float) -> float:
    """Residual of ``2 l + g + 2 l g a + l^2 a + g l^2 a^2``; zero at both roots."""
    g = gamma_bar_1
    return 2 * lam + g + 2 * lam * g * a1 + lam * lam * a1 + g * lam * lam * a1 * a1


def gamma2_sic(lb2: LinkBudget, ch: TwoUserChannel, lam: float) -> float:
    """Post-whitening SNR of the user decoded first (user 2)."""
    return lb2.gamma_bar * (ch.a2 + ch.abs_rho2 * (lam * lam * ch.a1 + 2 * lam))


def gamma2_sic_simplified(lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel) -> float:
    """Root-free form ``g2 (a2 - |rho|^2 g1 / (1 + g1 a1))``."""
    g1 = lb1.gamma_bar
    return lb2.gamma_bar * (ch.a2 - ch.abs_rho2 * g1 / (1 + g1 * ch.a1))


def naive_mrc_sinr(lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel) -> float:
    """SINR of user 2 with plain matched filtering, user 1 treated as noise."""
    return lb2.gamma_bar * ch.a2**2 / (ch.a2 + lb1.gamma_bar * ch.abs_rho2)


def rates_for_order(lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel, order: SicOrder) -> RatePair:
    """Achievable rates under successive interference cancellation."""
    order = SicOrder(order)
    if order is SicOrder.TWO_THEN_ONE:
        r1 = math.log2(1 + lb1.gamma_bar * ch.a1)
        r2 = math.log2(1 + max(gamma2_sic_simplified(lb1, lb2, ch), 0.0))
    else:
        r2 = math.log2(1 + lb2.gamma_bar * ch.a2)
        r1 = math.log2(1 + max(gamma2_sic_simplified(lb2, lb1, ch.swapped()), 0.0))
    return RatePair(r1, r2, order)


def _checked_rho_u2(ch: TwoUserChannel) -> float:
    ru = abs(ch.rho) / math.sqrt(ch.a1 * ch.a2)
    if ru > 1 + RHO_U_SLACK:
        raise DomainError(f"|rho_u|={ru} exceeds 1; channel statistics are inconsistent")
    return min(ru, 1.0) ** 2


def sum_rate_capacity(lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel) -> float:
    g1a1 = lb1.gamma_bar * ch.a1
    g2a2 = lb2.gamma_bar * ch.a2
    return math.log2(1 + g1a1 + g2a2 + g1a1 * g2a2 * (1 - _checked_rho_u2(ch)))


def sum_rate_upper_bound(lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel) -> float:
    """Sum rate with inter-user correlation neglected."""
    return math.log2(1 + lb1.gamma_bar * ch.a1) + math.log2(1 + lb2.gamma_bar * ch.a2)


def asymptotic_sum_rate(gamma1: float, gamma2: float, mu_oc: float = 1.0) -> float:
    """Infinite-aperture limit; ``mu_oc = 1`` is the continuous aperture."""
    if not 0 < mu_oc <= 1:
        raise DomainError(f"occupation ratio must lie in (0, 1], got {mu_oc}")
    return math.log2(1 + mu_oc * gamma1 / 2) + math.log2(1 + mu_oc * gamma2 / 2)


@dataclass(frozen=True)
class CapacityRegion:
    """Two-user pentagon: single-user box cut by the sum-rate line."""

    corner_21: RatePair
    corner_12: RatePair
    c1_max: float
    c2_max: float
    sum_capacity: float

    def segment(self, k: int = 11) -> np.ndarray:
        """``k`` time-sharing points from ``corner_12`` to ``corner_21``, shape (k, 2)."""
        if k < 2:
            raise UsageError("segment needs at least two points")
        t = np.linspace(0.0, 1.0, k)[:, None]
        a = np.array([self.corner_12.r1, self.corner_12.r2])
        b = np.array([self.corner_21.r1, self.corner_21.r2])
        return (1 - t) * a + t * b

    @property
    def cut_length(self) -> float:
        """Length of the sum-rate facet; zero when the region is a rectangle."""
        return math.hypot(self.corner_21.r1 - self.corner_12.r1, self.corner_21.r2 - self.corner_12.r2)

    def contains(self, r1: float, r2: float, tol: float = 1e-12) -> bool:
        return (
            -tol <= r1 <= self.c1_max + tol
            and -tol <= r2 <= self.c2_max + tol
            and r1 + r2 <= self.sum_capacity + tol
        )


def capacity_region(lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel) -> CapacityRegion:
    return CapacityRegion(
        corner_21=rates_for_order(lb1, lb2, ch, SicOrder.TWO_THEN_ONE),
        corner_12=rates_for_order(lb1, lb2, ch, SicOrder.ONE_THEN_TWO),
        c1_max=single_user_capacity(lb1, ch.a1),
        c2_max=single_user_capacity(lb2, ch.a2),
        sum_capacity=sum_rate_capacity(lb1, lb2, ch),
    )
