"""Experiment configuration: INI-style ``key = value`` text with sections.

See ``docs/config.md`` for the grammar. Every key is optional; defaults
reproduce the reference scenario (two users on the same bearing at 10 m and
20 m, 30/40 dB transmit SNR, 0.0107 m wavelength, half-wavelength SPD
spacing with isotropic-aperture elements).
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .capacity import LinkBudget
from .channel import Wave
from .errors import UsageError
from .geometry import PlanarRect, SpdGrid, UserSource, spd_grid_for_aperture
from .quadrature import QuadratureSpec

DEFAULT_WAVELENGTH = 0.0107

_KNOWN = {
    "wave": {"wavelength"},
    "user1": {"r", "phi", "phi_deg", "theta", "theta_deg", "snr_db"},
    "user2": {"r", "phi", "phi_deg", "theta", "theta_deg", "snr_db"},
    "aperture": {"kind", "lx", "lz", "side", "mx", "mz", "spacing", "spacing_wavelengths", "element_side", "mu_oc"},
    "sweep": {"values", "start", "stop", "points", "scale", "spd", "segment_points"},
    "quadrature": {"panel_order", "spd_panel_order", "rel_tol", "max_refinements"},
    "oracle": {"grid", "trials", "seed", "lambda_scale", "geometries", "side"},
    "output": {"path"},
}


@dataclass(frozen=True)
class UserConfig:
    source: UserSource
    snr_db: float

    @property
    def budget(self) -> LinkBudget:
        return LinkBudget.from_db(self.snr_db)


@dataclass(frozen=True)
class ApertureConfig:
    kind: str = "planar"
    lx: float = 0.5
    lz: float = 0.5
    spacing: float = DEFAULT_WAVELENGTH / 2
    element_side: float = DEFAULT_WAVELENGTH / math.sqrt(4 * math.pi)
    mx: int | None = None
    mz: int | None = None

    def region(self):
        if self.kind == "planar":
            return PlanarRect(self.lx, self.lz)
        if self.mx is not None:
            return SpdGrid(self.mx, self.mz if self.mz is not None else self.mx, self.spacing, self.element_side)
        return spd_grid_for_aperture(self.lx, self.spacing, self.element_side, self.lz)

    def spd_grid(self, element_side: float | None = None) -> SpdGrid:
        """SPD grid for occupancy sweeps, whatever ``kind`` is."""
        side = self.element_side if element_side is None else element_side
        if self.mx is not None:
            return SpdGrid(self.mx, self.mz if self.mz is not None else self.mx, self.spacing, side)
        return spd_grid_for_aperture(self.lx, self.spacing, side, self.lz)


@dataclass(frozen=True)
class OracleConfig:
    grid: int = 64
    trials: int = 10_000
    seed: int = 0
    lambda_scale: float = 1.0
    geometries: int = 1
    side: float = 0.16


@dataclass(frozen=True)
class ExperimentConfig:
    wavelength: float = DEFAULT_WAVELENGTH
    users: tuple = ()
    aperture: ApertureConfig = field(default_factory=ApertureConfig)
    sweep_values: tuple | None = None
    spd_variant: bool = False
    segment_points: int = 11
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    spd_quadrature: QuadratureSpec = field(default_factory=lambda: QuadratureSpec(panel_order=4))
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: str | None = None

    @property
    def wave(self) -> Wave:
        return Wave(self.wavelength)

    def require_two_users(self):
        if len(self.users) != 2:
            raise UsageError(f"this command needs exactly two users, config has {len(self.users)}")
        return self.users


def default_users(wavelength: float = DEFAULT_WAVELENGTH) -> tuple[UserConfig, UserConfig]:
    return (
        UserConfig(UserSource(10.0, math.pi / 3, math.pi / 6), 30.0),
        UserConfig(UserSource(20.0, math.pi / 3, math.pi / 6), 40.0),
    )


def default_aperture_sweep() -> tuple:
    return tuple(np.geomspace(0.05, 2.0, 20))


def default_occupancy_sweep() -> tuple:
    return tuple(np.linspace(0.05, 1.0, 20))


class _Reader:
    """Typed access to a parsed INI document with line-aware diagnostics."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise UsageError(f"{source}: malformed config: {exc}") from None
        for sec in self.cp.sections():
            if sec not in _KNOWN:
                raise UsageError(f"{self._where(sec)}: unknown section [{sec}]")
            for key in self.cp[sec]:
                if key not in _KNOWN[sec]:
                    raise UsageError(f"{self._where(sec, key)}: unknown key '{key}' in [{sec}]")

    def _where(self, section: str, key: str | None = None) -> str:
        in_sec = False
        for n, line in enumerate(self.text.splitlines(), 1):
            s = line.strip()
            if s.startswith("["):
                in_sec = s == f"[{section}]"
                if in_sec and key is None:
                    return f"{self.source}:{n}"
            elif in_sec and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
                return f"{self.source}:{n}"
        return self.source

    def has(self, section, key) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section, key):
        return self.cp.get(section, key) if self.has(section, key) else None

    def _conv(self, section, key, fn, what):
        v = self.raw(section, key)
        if v is None:
            return None
        try:
            return fn(v.strip())
        except (ValueError, TypeError):
            raise UsageError(f"{self._where(section, key)}: [{section}] {key} = {v!r} is not {what}") from None

    def float(self, section, key, default=None):
        v = self._conv(section, key, float, "a number")
        return default if v is None else v

    def int(self, section, key, default=None):
        v = self._conv(section, key, int, "an integer")
        return default if v is None else v

    def bool(self, section, key, default=False):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise UsageError(f"{self._where(section, key)}: [{section}] {key} = {v!r} is not a boolean") from None

    def floats(self, section, key):
        def parse(s):
            parts = [p for p in re.split(r"[,\s]+", s) if p]
            return tuple(float(p) for p in parts)

        return self._conv(section, key, parse, "a list of numbers")

    def fail(self, section, key, msg):
        raise UsageError(f"{self._where(section, key)}: {msg}")


def _angle(rd: _Reader, sec: str, name: str, default: float) -> float:
    if rd.has(sec, name) and rd.has(sec, name + "_deg"):
        rd.fail(sec, name, f"give either {name} or {name}_deg, not both")
    if rd.has(sec, name + "_deg"):
        return math.radians(rd.float(sec, name + "_deg"))
    return rd.float(sec, name, default)


def _sweep(rd: _Reader):
    sec = "sweep"
    if rd.has(sec, "values"):
        if any(rd.has(sec, k) for k in ("start", "stop", "points")):
            rd.fail(sec, "values", "give either values or start/stop/points, not both")
        vals = rd.floats(sec, "values")
    elif any(rd.has(sec, k) for k in ("start", "stop", "points")):
        start, stop = rd.float(sec, "start"), rd.float(sec, "stop")
        points = rd.int(sec, "points")
        if start is None or stop is None or points is None:
            rd.fail(sec, "start", "start, stop and points must all be given")
        scale = (rd.raw(sec, "scale") or "log").strip().lower()
        if scale not in ("log", "linear"):
            rd.fail(sec, "scale", f"scale must be 'log' or 'linear', got {scale!r}")
        if points < 1 or (scale == "log" and start <= 0):
            rd.fail(sec, "points", "invalid sweep range")
        vals = tuple(np.geomspace(start, stop, points) if scale == "log" else np.linspace(start, stop, points))
    else:
        return None
    if len(vals) == 0:
        rd.fail(sec, "values", "sweep grid is empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        rd.fail(sec, "values", "sweep grid must be strictly increasing")
    return tuple(float(v) for v in vals)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    rd = _Reader(text, source)
    wavelength = rd.float("wave", "wavelength", DEFAULT_WAVELENGTH)
    if not wavelength > 0:
        rd.fail("wave", "wavelength", "wavelength must be positive")

    defaults = default_users(wavelength)
    users = []
    user_secs = [s for s in ("user1", "user2") if rd.cp.has_section(s)]
    if user_secs == ["user2"]:
        rd.fail("user2", None, "[user2] given without [user1]")
    n_users = 2 if not user_secs else len(user_secs)
    for i in range(n_users):
        sec, dflt = f"user{i + 1}", defaults[i]
        try:
            src = UserSource(
                rd.float(sec, "r", dflt.source.r),
                _angle(rd, sec, "phi", dflt.source.phi),
                _angle(rd, sec, "theta", dflt.source.theta),
            )
        except UsageError as exc:
            raise UsageError(f"{rd._where(sec)}: [{sec}] {exc}") from None
        users.append(UserConfig(src, rd.float(sec, "snr_db", dflt.snr_db)))

    sec = "aperture"
    kind = (rd.raw(sec, "kind") or "planar").strip().lower()
    if kind not in ("planar", "spd"):
        rd.fail(sec, "kind", f"kind must be 'planar' or 'spd', got {kind!r}")
    side = rd.float(sec, "side")
    lx = rd.float(sec, "lx", side if side is not None else 0.5)
    lz = rd.float(sec, "lz", side if side is not None else lx)
    if rd.has(sec, "spacing") and rd.has(sec, "spacing_wavelengths"):
        rd.fail(sec, "spacing", "give either spacing or spacing_wavelengths")
    spacing = rd.float(sec, "spacing")
    if spacing is None:
        spacing = rd.float(sec, "spacing_wavelengths", 0.5) * wavelength
    if rd.has(sec, "element_side") and rd.has(sec, "mu_oc"):
        rd.fail(sec, "element_side", "give either element_side or mu_oc")
    if rd.has(sec, "mu_oc"):
        mu = rd.float(sec, "mu_oc")
        if not 0 < mu <= 1:
            rd.fail(sec, "mu_oc", f"mu_oc must lie in (0, 1], got {mu}")
        element_side = spacing * math.sqrt(mu)
    else:
        element_side = rd.float(sec, "element_side", wavelength / math.sqrt(4 * math.pi))
    if element_side > spacing * (1 + 1e-12):
        rd.fail(sec, "element_side", f"element_side {element_side} exceeds spacing {spacing}")
    aperture = ApertureConfig(kind, lx, lz, spacing, element_side, rd.int(sec, "mx"), rd.int(sec, "mz"))
    try:
        aperture.region()
    except UsageError as exc:
        raise UsageError(f"{rd._where(sec)}: [aperture] {exc}") from None

    order = rd.int("quadrature", "panel_order", 16)
    spd_order = rd.int("quadrature", "spd_panel_order", 4)
    rel_tol = rd.float("quadrature", "rel_tol", 1e-8)
    max_ref = rd.int("quadrature", "max_refinements", 12)
    try:
        quad = QuadratureSpec(order, rel_tol, max_ref)
        spd_quad = QuadratureSpec(spd_order, rel_tol, max_ref)
    except UsageError as exc:
        raise UsageError(f"{rd._where('quadrature')}: [quadrature] {exc}") from None

    sec = "oracle"
    oracle = OracleConfig(
        grid=rd.int(sec, "grid", 64),
        trials=rd.int(sec, "trials", 10_000),
        seed=rd.int(sec, "seed", 0),
        lambda_scale=rd.float(sec, "lambda_scale", 1.0),
        geometries=rd.int(sec, "geometries", 1),
        side=rd.float(sec, "side", 0.16),
    )
    if oracle.grid < 2:
        rd.fail(sec, "grid", "grid must be >= 2")
    if oracle.trials < 2:
        rd.fail(sec, "trials", "trials must be >= 2")

    segment_points = rd.int("sweep", "segment_points", 11)
    if segment_points < 2:
        rd.fail("sweep", "segment_points", "segment_points must be >= 2")

    return ExperimentConfig(
        wavelength=wavelength,
        users=tuple(users),
        aperture=aperture,
        sweep_values=_sweep(rd),
        spd_variant=rd.bool("sweep", "spd", False),
        segment_points=segment_points,
        quadrature=quad,
        spd_quadrature=spd_quad,
        oracle=oracle,
        output=rd.raw("output", "path"),
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config("", "<defaults>")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
