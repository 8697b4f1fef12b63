"""Panel Gauss-Legendre quadrature over apertures and the resulting channel
statistics (gains ``a_k`` and correlation ``rho``), plus the closed-form
planar gain used to cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .channel import Wave, kernel_g, kernel_g_abs2
from .errors import ConvergenceError, DomainError, UsageError
from .geometry import ApertureRegion, PlanarRect, SpdGrid, UserSource, occupation_ratio

# points evaluated per vectorised call; bounds peak memory to a few hundred MB
_CHUNK_POINTS = 1 << 20
# Cauchy-Schwarz slack tolerated from quadrature noise before clamping |rho_u| to 1
RHO_U_SLACK = 1e-9


@dataclass(frozen=True)
class QuadratureSpec:
    panel_order: int = 16
    rel_tol: float = 1e-8
    max_refinements: int = 12
    max_panels: int = 1 << 24

    def __post_init__(self):
        if self.panel_order < 2:
            raise UsageError(f"panel_order must be >= 2, got {self.panel_order}")
        if not self.rel_tol > 0:
            raise UsageError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_refinements < 1:
            raise UsageError("max_refinements must be >= 1")


@dataclass(frozen=True)
class TwoUserChannel:
    """Sufficient statistics of the two-user uplink: gains and correlation."""

    a1: float
    a2: float
    rho: complex = 0j

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise DomainError(f"channel gains must be positive, got a1={self.a1}, a2={self.a2}")
        object.__setattr__(self, "rho", complex(self.rho))
        if abs(self.rho) > math.sqrt(self.a1 * self.a2) * (1 + RHO_U_SLACK):
            raise DomainError(
                f"|rho|={abs(self.rho):.6g} violates Cauchy-Schwarz bound sqrt(a1 a2)="
                f"{math.sqrt(self.a1 * self.a2):.6g}"
            )

    @property
    def rho_u(self) -> complex:
        """Normalised correlation ``rho / sqrt(a1 a2)`` (magnitude clamped to 1)."""
        ru = self.rho / math.sqrt(self.a1 * self.a2)
        m = abs(ru)
        return ru / m if m > 1 else ru

    @property
    def abs_rho_u(self) -> float:
        return min(abs(self.rho) / math.sqrt(self.a1 * self.a2), 1.0)

    @property
    def abs_rho2(self) -> float:
        """``|rho|^2`` consistent with the clamped correlation factor."""
        return self.abs_rho_u**2 * self.a1 * self.a2

    def swapped(self) -> "TwoUserChannel":
        return TwoUserChannel(self.a2, self.a1, self.rho.conjugate())


@lru_cache(maxsize=None)
def _gauss_legendre(order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    return t, w


def _level_estimate(f, rects: np.ndarray, nx: int, nz: int, order: int):
    t, w = _gauss_legendre(order)
    hx = rects[0, 1] - rects[0, 0]
    hz = rects[0, 3] - rects[0, 2]
    hx, hz = hx / nx, hz / nz
    # local node offsets within one base rectangle, panel by panel
    ox = (np.arange(nx)[:, None] * hx + (t[None, :] + 1) * hx / 2).ravel()
    oz = (np.arange(nz)[:, None] * hz + (t[None, :] + 1) * hz / 2).ravel()
    wx = np.tile(w * hx / 2, nx)
    wz = np.tile(w * hz / 2, nz)
    NX, NZ = ox.size, oz.size

    per_rect = NX * NZ
    if per_rect <= _CHUNK_POINTS:
        rblock, xblock = max(1, _CHUNK_POINTS // per_rect), NX
    else:
        rblock, xblock = 1, max(1, _CHUNK_POINTS // NZ)

    partial = []
    for b0 in range(0, len(rects), rblock):
        R = rects[b0 : b0 + rblock]
        xs = R[:, 0:1] + ox[None, :]
        zs = R[:, 2:3] + oz[None, :]
        for x0 in range(0, NX, xblock):
            X = xs[:, x0 : x0 + xblock]
            P = np.zeros((len(R), X.shape[1], NZ, 3))
            P[..., 0] = X[:, :, None]
            P[..., 2] = zs[:, None, :]
            vals = f(P)
            partial.append(np.einsum("bxz,x,z->", vals, wx[x0 : x0 + xblock], wz))
    return np.sum(np.asarray(partial))


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: ApertureRegion,
    q: QuadratureSpec | None = None,
    *,
    max_panel_width: float | tuple[float, float] | None = None,
    abs_tol: float = 0.0,
):
    """Integrate ``f`` over the aperture by uniformly refined tensor Gauss-Legendre.

    ``f`` receives an array of points with trailing axis 3 and must return
    values of the matching leading shape. Each base rectangle (the whole
    plate, or every SPD element) is split into equal panels, starting from
    the coarsest split honouring ``max_panel_width``; the split is doubled per
    axis until two successive whole-integral estimates agree to
    ``q.rel_tol`` (relative) or ``abs_tol``.

    Raises :class:`ConvergenceError` after ``q.max_refinements`` doublings or
    if the panel count would exceed ``q.max_panels``.
    """
    q = q or QuadratureSpec()
    rects = np.asarray(a.rectangles(), dtype=float)
    wx = rects[0, 1] - rects[0, 0]
    wz = rects[0, 3] - rects[0, 2]
    if max_panel_width is None:
        px = pz = math.inf
    elif np.ndim(max_panel_width) == 0:
        px = pz = float(max_panel_width)
    else:
        px, pz = (float(v) for v in max_panel_width)
    nx0 = max(1, math.ceil(wx / px)) if math.isfinite(px) else 1
    nz0 = max(1, math.ceil(wz / pz)) if math.isfinite(pz) else 1

    prev = None
    for level in range(q.max_refinements + 1):
        nx, nz = nx0 << level, nz0 << level
        if len(rects) * nx * nz > q.max_panels:
            raise ConvergenceError(
                f"panel count {len(rects) * nx * nz} exceeds cap {q.max_panels} before convergence",
                (prev, None),
            )
        est = _level_estimate(f, rects, nx, nz, q.panel_order)
        if prev is not None and abs(est - prev) <= max(q.rel_tol * abs(est), abs_tol):
            return complex(est) if np.iscomplexobj(est) else float(est)
        prev_prev, prev = prev, est
    raise ConvergenceError(
        f"no convergence to rel_tol={q.rel_tol} after {q.max_refinements} refinements",
        (prev_prev, prev),
    )


def channel_gain(w: Wave, a: ApertureRegion, u: UserSource, q: QuadratureSpec | None = None) -> float:
    """Channel gain ``a_k``: integral of ``|g(r, s_k)|^2`` over the aperture."""
    s = u.position
    return float(integrate(lambda p: kernel_g_abs2(w, a, p, s), a, q))


def _phase_panel_width(w: Wave, a: ApertureRegion, s1, s2, samples: int = 129):
    """Panel widths (x, z) spanning one period of ``exp(j k0 (D1 - D2))``.

    The in-plane phase gradient is sampled over the bounding box; a 1.5x
    safety factor covers the sampling gap.
    """
    hx, hz = a.lx / 2, a.lz / 2
    X, Z = np.meshgrid(np.linspace(-hx, hx, samples), np.linspace(-hz, hz, samples), indexing="ij")
    P = np.stack([X, np.zeros_like(X), Z], axis=-1)
    v1, v2 = P - s1, P - s2
    d1 = np.linalg.norm(v1, axis=-1)[..., None]
    d2 = np.linalg.norm(v2, axis=-1)[..., None]
    grad = w.k0 * np.abs(v1 / d1 - v2 / d2)
    gx = 1.5 * grad[..., 0].max()
    gz = 1.5 * grad[..., 2].max()
    period = 2 * math.pi
    return (period / gx if gx > 0 else math.inf, period / gz if gz > 0 else math.inf)


def correlation_rho(
    w: Wave,
    a: ApertureRegion,
    u1: UserSource,
    u2: UserSource,
    q: QuadratureSpec | None = None,
    *,
    max_panel_width: float | tuple[float, float] | None = None,
) -> complex:
    """Correlation ``rho``: integral of ``conj(g(r, s1)) g(r, s2)``.

    Panels are capped at one period of the integrand's oscillation
    unless ``max_panel_width`` is given.
    """
    s1, s2 = u1.position, u2.position
    if max_panel_width is None:
        max_panel_width = _phase_panel_width(w, a, s1, s2)

    def f(p):
        return np.conj(kernel_g(w, a, p, s1)) * kernel_g(w, a, p, s2)

    if u1 == u2:
        return complex(channel_gain(w, a, u1, q))
    return complex(integrate(f, a, q, max_panel_width=max_panel_width))


def channel_statistics(
    w: Wave, a: ApertureRegion, u1: UserSource, u2: UserSource, q: QuadratureSpec | None = None
) -> TwoUserChannel:
    return TwoUserChannel(channel_gain(w, a, u1, q), channel_gain(w, a, u2, q), correlation_rho(w, a, u1, u2, q))


def closed_form_gain_planar(lx: float, lz: float, u: UserSource) -> float:
    """Closed-form gain of a centred ``lx x lz`` plate in the x-z plane.

    Sum over the four sign combinations of
    ``arctan(x z / (Psi sqrt(Psi^2 + x^2 + z^2)))`` with
    ``x = lx/(2r) +- Phi`` and ``z = lz/(2r) +- Theta``, divided by 4 pi.
    """
    Psi = u.Psi
    if not Psi > 0:
        raise DomainError(f"user must lie in front of the aperture plane (Psi > 0), got Psi={Psi}")
    total = 0.0
    for x in (lx / (2 * u.r) + u.Phi, lx / (2 * u.r) - u.Phi):
        for z in (lz / (2 * u.r) + u.Theta, lz / (2 * u.r) - u.Theta):
            total += math.atan(x * z / (Psi * math.sqrt(Psi * Psi + x * x + z * z)))
    return total / (4 * math.pi)


def spd_gain_approx(a_c: float, mu_oc: float) -> float:
    """SPD gain approximated as occupation ratio times the contiguous-plate gain."""
    return mu_oc * a_c


def closed_form_gain(a: ApertureRegion, u: UserSource) -> float:
    """Closed-form gain for either aperture variant (SPD via the occupancy shortcut)."""
    if isinstance(a, PlanarRect):
        return closed_form_gain_planar(a.lx, a.lz, u)
    if isinstance(a, SpdGrid):
        return spd_gain_approx(closed_form_gain_planar(a.lx, a.lz, u), occupation_ratio(a))
    raise UsageError(f"unknown aperture type {type(a).__name__}")
