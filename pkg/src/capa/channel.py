"""Scalar line-of-sight channel kernels between a source and receive points.

All functions broadcast over leading axes: ``r`` and ``s`` are arrays whose
last axis has length 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .geometry import ApertureRegion

ETA0 = 120 * math.pi
"""Free-space impedance used throughout, in ohms."""

_SINGULAR_FRACTION = 1e-9


@dataclass(frozen=True)
class Wave:
    wavelength: float

    def __post_init__(self):
        if not self.wavelength > 0:
            raise UsageError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def eta(self) -> float:
        return ETA0

    @property
    def h_over_g(self) -> complex:
        """Constant ``j k0 eta / sqrt(4 pi)`` relating h to g (radiating kernel)."""
        return 1j * self.k0 * self.eta / math.sqrt(4 * math.pi)


def _distance(w: Wave, r, s) -> np.ndarray:
    d = np.linalg.norm(np.asarray(r, dtype=float) - np.asarray(s, dtype=float), axis=-1)
    if np.any(d < _SINGULAR_FRACTION * w.wavelength):
        raise DomainError("source and receive points coincide; the kernel is singular there")
    return d


def reactive_factor(k0d):
    """Bracket ``1 + j/(k0 D) - 1/(k0 D)^2`` of the full Green's function."""
    t = 1.0 / np.asarray(k0d, dtype=float)
    return 1 + 1j * t - t * t


def green_full(w: Wave, r, s):
    """Free-space scalar Green's function including reactive terms."""
    d = _distance(w, r, s)
    return 1j * w.k0 * w.eta * np.exp(-1j * w.k0 * d) / (4 * math.pi * d) * reactive_factor(w.k0 * d)


def green_radiating(w: Wave, r, s):
    """Radiating-field approximation ``j k0 eta exp(-j k0 D) / (4 pi D)``."""
    d = _distance(w, r, s)
    return 1j * w.k0 * w.eta * np.exp(-1j * w.k0 * d) / (4 * math.pi * d)


def projected_aperture_factor(a: ApertureRegion, r, s, *, wavelength: float | None = None):
    """Obliquity factor ``sqrt(|e_r . (s - r)| / |r - s|)``, in [0, 1]."""
    v = np.asarray(s, dtype=float) - np.asarray(r, dtype=float)
    d = np.linalg.norm(v, axis=-1)
    floor = _SINGULAR_FRACTION * (wavelength if wavelength is not None else 1.0)
    if np.any(d < floor) or np.any(d == 0):
        raise DomainError("source and receive points coincide; the kernel is singular there")
    proj = np.abs(v @ np.asarray(a.normal, dtype=float))
    return np.sqrt(np.minimum(proj / d, 1.0))


def kernel_g(w: Wave, a: ApertureRegion, r, s):
    """Normalised kernel ``exp(-j k0 D) / (sqrt(4 pi) D) * h_pa``."""
    d = _distance(w, r, s)
    hpa = projected_aperture_factor(a, r, s, wavelength=w.wavelength)
    return np.exp(-1j * w.k0 * d) / (math.sqrt(4 * math.pi) * d) * hpa


def kernel_g_abs2(w: Wave, a: ApertureRegion, r, s):
    """``|g|^2 = |e_r . (s - r)| / (4 pi D^3)`` without forming complex values."""
    v = np.asarray(s, dtype=float) - np.asarray(r, dtype=float)
    d = _distance(w, r, s)
    proj = np.abs(v @ np.asarray(a.normal, dtype=float))
    return proj / (4 * math.pi * d**3)


def channel_response_h(w: Wave, a: ApertureRegion, r, s, use_reactive: bool = False):
    """Spatial channel response ``h_em * h_pa``.

    With ``use_reactive=False`` (the default) the radiating Green's function
    is used, so ``h == w.h_over_g * kernel_g``.
    """
    em = green_full(w, r, s) if use_reactive else green_radiating(w, r, s)
    return em * projected_aperture_factor(a, r, s, wavelength=w.wavelength)
