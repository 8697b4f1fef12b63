"""Receive apertures and user positions.

The receive surface always lies in the x-z plane, centred at the origin.
Two variants exist: a contiguous rectangle (:class:`PlanarRect`) and a grid of
square radiating elements (:class:`SpdGrid`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import UsageError

_DEFAULT_NORMAL = (0.0, 1.0, 0.0)


def _check_normal(normal) -> tuple[float, float, float]:
    n = tuple(float(v) for v in normal)
    if len(n) != 3 or abs(math.sqrt(sum(v * v for v in n)) - 1.0) > 1e-12:
        raise UsageError(f"aperture normal must be a unit 3-vector, got {normal!r}")
    return n


@dataclass(frozen=True)
class UserSource:
    """A point transmitter at spherical coordinates (r, phi, theta).

    ``phi`` is the azimuth and ``theta`` the elevation, both in radians on
    [0, pi]. ``current_density_mag`` and ``tx_aperture_area`` are optional
    physical inputs; the rate formulas only consume the transmit SNR.
    """

    r: float
    phi: float
    theta: float
    current_density_mag: float | None = None
    tx_aperture_area: float | None = None

    def __post_init__(self):
        if not self.r > 0:
            raise UsageError(f"user distance must be positive, got {self.r}")
        for name in ("phi", "theta"):
            v = getattr(self, name)
            if not 0.0 <= v <= math.pi:
                raise UsageError(f"{name} must lie in [0, pi], got {v}")
        if self.current_density_mag is not None and self.current_density_mag < 0:
            raise UsageError("current density magnitude must be non-negative")
        if self.tx_aperture_area is not None and not self.tx_aperture_area > 0:
            raise UsageError("transmit aperture area must be positive")

    @property
    def Phi(self) -> float:
        return math.cos(self.phi) * math.sin(self.theta)

    @property
    def Psi(self) -> float:
        return math.sin(self.phi) * math.sin(self.theta)

    @property
    def Theta(self) -> float:
        return math.cos(self.theta)

    @property
    def position(self) -> np.ndarray:
        return user_position(self)

    def aperture_area(self, wavelength: float) -> float:
        """Transmit aperture area; an isotropic antenna has lambda^2 / (4 pi)."""
        if self.tx_aperture_area is not None:
            return self.tx_aperture_area
        return wavelength**2 / (4 * math.pi)


def user_position(u: UserSource) -> np.ndarray:
    """Cartesian centre ``[r Phi, r Psi, r Theta]`` of a user."""
    return np.array([u.r * u.Phi, u.r * u.Psi, u.r * u.Theta])


@dataclass(frozen=True)
class PlanarRect:
    """Contiguous rectangle ``{[x, 0, z] : |x| <= lx/2, |z| <= lz/2}``."""

    lx: float
    lz: float
    normal: tuple = field(default=_DEFAULT_NORMAL)

    def __post_init__(self):
        if not (self.lx > 0 and self.lz > 0):
            raise UsageError(f"rectangle sides must be positive, got {self.lx} x {self.lz}")
        object.__setattr__(self, "normal", _check_normal(self.normal))

    @property
    def area(self) -> float:
        return self.lx * self.lz

    def rectangles(self) -> np.ndarray:
        """Integration domains as rows ``[x0, x1, z0, z1]``."""
        return np.array([[-self.lx / 2, self.lx / 2, -self.lz / 2, self.lz / 2]])


@dataclass(frozen=True)
class SpdGrid:
    """Spatially discrete array of ``mx * mz`` square elements.

    Element centres sit at ``(m_x d, 0, m_z d)`` with symmetric integer
    indices; each element has side ``element_side`` (``sqrt(A)``).
    Even element counts are rejected.
    """

    mx: int
    mz: int
    spacing: float
    element_side: float
    normal: tuple = field(default=_DEFAULT_NORMAL)

    def __post_init__(self):
        for name in ("mx", "mz"):
            m = getattr(self, name)
            if int(m) != m or m < 1 or m % 2 == 0:
                raise UsageError(f"{name} must be a positive odd integer, got {m}")
        if not self.spacing > 0:
            raise UsageError(f"element spacing must be positive, got {self.spacing}")
        if not self.element_side > 0:
            raise UsageError(f"element side must be positive, got {self.element_side}")
        # tolerate float round-off from sqrt(mu_oc) * d
        if self.element_side > self.spacing * (1 + 1e-12):
            raise UsageError(
                f"element side {self.element_side} exceeds spacing {self.spacing} (elements overlap)"
            )
        object.__setattr__(self, "normal", _check_normal(self.normal))

    @property
    def element_area(self) -> float:
        return self.element_side**2

    @property
    def area(self) -> float:
        return self.mx * self.mz * self.element_area

    @property
    def lx(self) -> float:
        return self.mx * self.spacing

    @property
    def lz(self) -> float:
        return self.mz * self.spacing

    def rectangles(self) -> np.ndarray:
        c = spd_element_centers(self)
        h = self.element_side / 2
        return np.column_stack([c[:, 0] - h, c[:, 0] + h, c[:, 2] - h, c[:, 2] + h])


ApertureRegion = Union[PlanarRect, SpdGrid]


def spd_element_centers(a: SpdGrid) -> np.ndarray:
    """Element centres, shape ``(mx * mz, 3)``, x index varying slowest."""
    if not isinstance(a, SpdGrid):
        raise UsageError(f"element centres are only defined for SpdGrid, got {type(a).__name__}")
    ix = np.arange(-(a.mx // 2), a.mx // 2 + 1) * a.spacing
    iz = np.arange(-(a.mz // 2), a.mz // 2 + 1) * a.spacing
    X, Z = np.meshgrid(ix, iz, indexing="ij")
    return np.column_stack([X.ravel(), np.zeros(X.size), Z.ravel()])


def occupation_ratio(a: SpdGrid) -> float:
    """Fraction ``A / d^2`` of the bounding box covered by elements."""
    if not isinstance(a, SpdGrid):
        raise UsageError(f"occupation ratio is only defined for SpdGrid, got {type(a).__name__}")
    if a.element_side == a.spacing:
        return 1.0
    return (a.element_side / a.spacing) ** 2


def spd_grid_for_aperture(lx: float, spacing: float, element_side: float, lz: float | None = None) -> SpdGrid:
    """Square-ish SPD grid whose bounding box ``M d`` is closest to ``lx`` (odd ``M``)."""
    lz = lx if lz is None else lz

    def odd(L):
        m = max(1, int(round(L / spacing)))
        if m % 2 == 0:
            m += 1 if (m + 1) * spacing - L <= L - (m - 1) * spacing else -1
        return max(m, 1)

    return SpdGrid(odd(lx), odd(lz), spacing, element_side)
