"""Sweep runners and oracle suites behind the command-line tool.

Every function returns plain rows (lists of dicts or dataclasses); writing
them out is left to :mod:`capa.report`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .capacity import (
    LinkBudget,
    SicOrder,
    capacity_region,
    gamma2_sic,
    lambda_star,
    rates_for_order,
    sum_rate_capacity,
    sum_rate_upper_bound,
)
from .channel import Wave, kernel_g
from .config import ExperimentConfig, default_aperture_sweep, default_occupancy_sweep
from .errors import ConvergenceError, DomainError, UsageError
from .geometry import PlanarRect, SpdGrid, UserSource, occupation_ratio, spd_grid_for_aperture
from .operator_lab import (
    NoiseModel,
    autocorrelation_Rzz,
    discretize,
    inverse_residual,
    inverse_whitening_kernel,
    projected_noise,
    run_sic_pipeline,
    whitened_channel_hbar,
    whitening_kernel,
    whitening_residual,
)
from .quadrature import QuadratureSpec, TwoUserChannel, channel_gain, channel_statistics, closed_form_gain

RESULT_COLUMNS = ("value", "a1", "a2", "rho_u", "R1_12", "R2_12", "R1_21", "R2_21", "C", "C_upper")


class RowInvariantError(DomainError):
    """A computed row breaks the rate identities; output is aborted."""


@dataclass(frozen=True)
class ResultRow:
    value: float
    a1: float
    a2: float
    rho_u: float
    R1_12: float
    R2_12: float
    R1_21: float
    R2_21: float
    C: float
    C_upper: float

    def check(self, tol: float = 1e-9) -> "ResultRow":
        if self.C > self.C_upper + tol:
            raise RowInvariantError(f"row {self.value}: C={self.C} exceeds upper bound {self.C_upper}")
        for s in (self.R1_12 + self.R2_12, self.R1_21 + self.R2_21):
            if abs(s - self.C) > tol:
                raise RowInvariantError(f"row {self.value}: corner sum {s} differs from C={self.C}")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


def result_row(value: float, lb1: LinkBudget, lb2: LinkBudget, ch: TwoUserChannel) -> ResultRow:
    p12 = rates_for_order(lb1, lb2, ch, SicOrder.ONE_THEN_TWO)
    p21 = rates_for_order(lb1, lb2, ch, SicOrder.TWO_THEN_ONE)
    return ResultRow(
        value, ch.a1, ch.a2, ch.abs_rho_u, p12.r1, p12.r2, p21.r1, p21.r2,
        sum_rate_capacity(lb1, lb2, ch), sum_rate_upper_bound(lb1, lb2, ch),
    ).check()


def _spec_for(cfg: ExperimentConfig, region) -> QuadratureSpec:
    return cfg.spd_quadrature if isinstance(region, SpdGrid) else cfg.quadrature


def _stats(cfg: ExperimentConfig, region) -> TwoUserChannel:
    (c1, c2) = cfg.require_two_users()
    return channel_statistics(cfg.wave, region, c1.source, c2.source, _spec_for(cfg, region))


def _region_for_value(cfg: ExperimentConfig, side: float):
    ap = cfg.aperture
    if ap.kind == "planar":
        return PlanarRect(side, side)
    return spd_grid_for_aperture(side, ap.spacing, ap.element_side)


def gain_rows(cfg: ExperimentConfig) -> list[dict]:
    """Quadrature gain against the closed form for every user and geometry."""
    if cfg.sweep_values is None:
        regions = [(None, cfg.aperture.region())]
    else:
        regions = [(v, _region_for_value(cfg, v)) for v in cfg.sweep_values]
    rows = []
    for value, region in regions:
        spd = isinstance(region, SpdGrid)
        for k, uc in enumerate(cfg.users, 1):
            row = {
                "value": value if value is not None else region.lx,
                "user": k,
                "kind": "spd" if spd else "planar",
                "lx": region.lx,
                "lz": region.lz,
                "mu_oc": occupation_ratio(region) if spd else 1.0,
            }
            cf = closed_form_gain(region, uc.source)
            try:
                qg = channel_gain(cfg.wave, region, uc.source, _spec_for(cfg, region))
                status = "ok"
            except ConvergenceError:
                qg, status = math.nan, "convergence-error"
            row.update(quad_gain=qg, closed_form_gain=cf, rel_gap=abs(qg - cf) / cf, status=status)
            rows.append(row)
    return rows


def sweep_aperture_rows(cfg: ExperimentConfig) -> list[dict]:
    """Rates and sum capacity over square aperture sides (CAPA, optional SPD)."""
    (c1, c2) = cfg.require_two_users()
    lb1, lb2 = c1.budget, c2.budget
    values = cfg.sweep_values or default_aperture_sweep()
    rows = []
    for v in values:
        row = result_row(v, lb1, lb2, _stats(cfg, PlanarRect(v, v))).as_dict()
        if cfg.spd_variant:
            grid = spd_grid_for_aperture(v, cfg.aperture.spacing, cfg.aperture.element_side)
            spd = result_row(v, lb1, lb2, _stats(cfg, grid))
            row["spd_lx"] = grid.lx
            row.update({f"spd_{k}": x for k, x in spd.as_dict().items() if k != "value"})
        rows.append(row)
    return rows


def sweep_occupancy_rows(cfg: ExperimentConfig) -> list[dict]:
    """SPD sum capacity over occupation ratios at fixed spacing, with the CAPA reference."""
    (c1, c2) = cfg.require_two_users()
    lb1, lb2 = c1.budget, c2.budget
    values = cfg.sweep_values or default_occupancy_sweep()
    for mu in values:
        if not 0 < mu <= 1:
            raise UsageError(f"occupation ratio {mu} outside (0, 1]: element side would exceed spacing")
    d = cfg.aperture.spacing
    base = cfg.aperture.spd_grid()
    capa = result_row(1.0, lb1, lb2, _stats(cfg, PlanarRect(base.lx, base.lz)))
    rows = []
    for mu in values:
        side = d if mu == 1 else d * math.sqrt(mu)
        grid = cfg.aperture.spd_grid(element_side=side)
        row = result_row(mu, lb1, lb2, _stats(cfg, grid)).as_dict()
        row.update(element_side=side, lx=grid.lx, C_capa=capa.C, C_upper_capa=capa.C_upper)
        rows.append(row)
    return rows


def region_rows(cfg: ExperimentConfig) -> list[dict]:
    """Capacity-region boundary points per aperture side."""
    (c1, c2) = cfg.require_two_users()
    lb1, lb2 = c1.budget, c2.budget
    values = cfg.sweep_values or default_aperture_sweep()
    rows = []
    variants = [("capa", lambda v: PlanarRect(v, v))]
    if cfg.spd_variant:
        ap = cfg.aperture
        variants.append(("spd", lambda v: spd_grid_for_aperture(v, ap.spacing, ap.element_side)))
    for v in values:
        for name, make in variants:
            reg = capacity_region(lb1, lb2, _stats(cfg, make(v)))
            pts = [
                ("axis_r1", 0, reg.c1_max, 0.0),
                ("corner_21", 0, reg.corner_21.r1, reg.corner_21.r2),
                *(("segment", i, p[0], p[1]) for i, p in enumerate(reg.segment(cfg.segment_points))),
                ("corner_12", 0, reg.corner_12.r1, reg.corner_12.r2),
                ("axis_r2", 0, 0.0, reg.c2_max),
                ("box", 0, reg.c1_max, reg.c2_max),
            ]
            for point, idx, r1, r2 in pts:
                rows.append(
                    {"array": name, "value": v, "point": point, "index": idx, "R1": r1, "R2": r2,
                     "C": reg.sum_capacity, "cut_length": reg.cut_length}
                )
    return rows


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class SuiteResult:
    suite: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""


def _verify_setup(cfg: ExperimentConfig):
    (c1, c2) = cfg.require_two_users()
    side = cfg.oracle.side
    region = PlanarRect(side, side)
    d = discretize(region, cfg.oracle.grid)
    return c1, c2, region, d


def suite_noise(cfg: ExperimentConfig) -> list[SuiteResult]:
    """Detector-projected noise is CN(0, sigma2 * int |v|^2)."""
    c1, _, region, d = _verify_setup(cfg)
    w = cfg.wave
    v = w.h_over_g * kernel_g(w, region, d.grid_points, c1.source.position)
    nm = NoiseModel(1.0, cfg.oracle.seed)
    x = projected_noise(d, v, nm, cfg.oracle.trials)
    target = nm.sigma2 * d.cell_area * np.sum(np.abs(v) ** 2)
    var_err = abs(np.mean(np.abs(x) ** 2) / target - 1)
    mean_err = abs(np.mean(x)) / math.sqrt(target / cfg.oracle.trials)

    def kurt(y):
        y = y - y.mean()
        return float(np.mean(y**4) / np.mean(y**2) ** 2)

    kr, ki = kurt(x.real), kurt(x.imag)
    return [
        SuiteResult("noise_variance", var_err, 0.03, var_err <= 0.03, f"trials={cfg.oracle.trials}"),
        SuiteResult("noise_mean", mean_err, 4.0, mean_err <= 4.0, "|mean| in standard errors"),
        SuiteResult("noise_kurtosis", max(abs(kr - 3), abs(ki - 3)), 0.2,
                    2.8 <= kr <= 3.2 and 2.8 <= ki <= 3.2, f"real={kr:.4f} imag={ki:.4f}"),
    ]


def suite_inverse(cfg: ExperimentConfig, n_functions: int = 100) -> list[SuiteResult]:
    c1, _, region, d = _verify_setup(cfg)
    lb1 = c1.budget
    g1 = kernel_g(cfg.wave, region, d.grid_points, c1.source.position)
    rng = np.random.default_rng(cfg.oracle.seed)
    us = rng.standard_normal((d.n, n_functions)) + 1j * rng.standard_normal((d.n, n_functions))
    out = []
    for b, lam in enumerate(lambda_star(lb1.gamma_bar, d.gain(g1))):
        lam *= cfg.oracle.lambda_scale
        res = inverse_residual(whitening_kernel(d, g1, lam), inverse_whitening_kernel(d, g1, lam), us)
        out.append(SuiteResult(f"inverse_kernel_branch{b}", res, 1e-8, res <= 1e-8, f"functions={n_functions}"))
    return out


def random_user_pairs(n: int, seed: int) -> list[tuple[UserSource, UserSource]]:
    """Seeded two-user geometries in front of the aperture (Psi >= 0.2)."""
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < n:
        us = []
        while len(us) < 2:
            phi, theta = rng.uniform(0, math.pi, 2)
            if math.sin(phi) * math.sin(theta) >= 0.2:
                us.append(UserSource(float(rng.uniform(2, 30)), float(phi), float(theta)))
        pairs.append(tuple(us))
    return pairs


def whitening_check(
    wave: Wave, region, d, users, budgets, lambda_scale: float = 1.0, sigma2: float = 1.0
) -> list[tuple[int, float, float]]:
    """``(branch, off-diagonal residual, diagonal deviation)`` for both roots."""
    g1 = kernel_g(wave, region, d.grid_points, users[0].position)
    gb1 = budgets[0].gamma_bar
    R = autocorrelation_Rzz(d, g1, gb1, sigma2)
    out = []
    for b, lam in enumerate(lambda_star(gb1, d.gain(g1))):
        off, dev = whitening_residual(whitening_kernel(d, g1, lam * lambda_scale), R, sigma2)
        out.append((b, off, dev))
    return out


def suite_whitening(cfg: ExperimentConfig) -> list[SuiteResult]:
    c1, c2, region, d = _verify_setup(cfg)
    pairs = [(c1.source, c2.source)]
    if cfg.oracle.geometries > 1:
        pairs += random_user_pairs(cfg.oracle.geometries - 1, cfg.oracle.seed)
    out = []
    for gi, users in enumerate(pairs):
        for b, off, dev in whitening_check(cfg.wave, region, d, users, (c1.budget, c2.budget), cfg.oracle.lambda_scale):
            out.append(SuiteResult(f"whitening_geom{gi}_branch{b}", off, 1e-6, off <= 1e-6 and dev <= 1e-6,
                                   f"n={d.n} diag_dev={dev:.3e}"))
    return out


def discretized_gamma2(wave: Wave, region, d, users, budgets, branch: int = 0) -> float:
    """Post-whitening SNR of user 2 from the grid norm of the whitened channel."""
    g1 = kernel_g(wave, region, d.grid_points, users[0].position)
    h2 = wave.h_over_g * kernel_g(wave, region, d.grid_points, users[1].position)
    lam = lambda_star(budgets[0].gamma_bar, d.gain(g1))[branch]
    hbar = whitened_channel_hbar(d, whitening_kernel(d, g1, lam), h2)
    return budgets[1].gamma_bar * d.gain(hbar) / abs(wave.h_over_g) ** 2


def suite_whitened_snr(cfg: ExperimentConfig) -> list[SuiteResult]:
    c1, c2, region, d = _verify_setup(cfg)
    users, budgets = (c1.source, c2.source), (c1.budget, c2.budget)
    ch = channel_statistics(cfg.wave, region, *users, cfg.quadrature)
    lam = lambda_star(c1.budget.gamma_bar, ch.a1)[0]
    closed = gamma2_sic(c2.budget, ch, lam)
    out = []
    for b in (0, 1):
        disc = discretized_gamma2(cfg.wave, region, d, users, budgets, b)
        err = abs(disc / closed - 1)
        out.append(SuiteResult(f"whitened_snr_branch{b}", err, 0.01, err <= 0.01,
                               f"grid={disc:.9g} closed={closed:.9g}"))
    return out


def random_channel_tuples(n: int, seed: int):
    """Seeded ``(lb1, lb2, ch)`` samples spanning several decades."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        g1, g2 = 10 ** rng.uniform(-2, 6, 2)
        a1, a2 = 10 ** rng.uniform(-6, math.log10(0.5), 2)
        mag = math.sqrt(a1 * a2) * rng.uniform(0, 1)
        out.append((LinkBudget(g1), LinkBudget(g2), TwoUserChannel(a1, a2, mag * np.exp(1j * rng.uniform(0, 2 * math.pi)))))
    return out


def suite_sum_rate(cfg: ExperimentConfig, n: int = 10_000) -> list[SuiteResult]:
    worst_order = worst_closed = 0.0
    for lb1, lb2, ch in random_channel_tuples(n, cfg.oracle.seed):
        s21 = rates_for_order(lb1, lb2, ch, SicOrder.TWO_THEN_ONE).total
        s12 = rates_for_order(lb1, lb2, ch, SicOrder.ONE_THEN_TWO).total
        worst_order = max(worst_order, abs(s21 - s12))
        worst_closed = max(worst_closed, abs(s21 - sum_rate_capacity(lb1, lb2, ch)))
    return [
        SuiteResult("sic_order_invariance", worst_order, 1e-9, worst_order <= 1e-9, f"tuples={n}"),
        SuiteResult("sum_rate_closed_form", worst_closed, 1e-9, worst_closed <= 1e-9, f"tuples={n}"),
    ]


def suite_sic_pipeline(cfg: ExperimentConfig) -> list[SuiteResult]:
    c1, c2, region, _ = _verify_setup(cfg)
    users, budgets = (c1.source, c2.source), (c1.budget, c2.budget)
    # dense whitening of every trial scales as grid^4; a 32-point grid keeps it tractable
    d = discretize(region, min(cfg.oracle.grid, 32))
    st = run_sic_pipeline(d, cfg.wave, region, users, budgets, n_trials=cfg.oracle.trials, seed=cfg.oracle.seed)
    ch = channel_statistics(cfg.wave, region, *users, cfg.quadrature)
    g1 = c1.budget.gamma_bar * ch.a1
    g2 = gamma2_sic(c2.budget, ch, lambda_star(c1.budget.gamma_bar, ch.a1)[0])
    e2 = abs(st.snr_first / g2 - 1)
    e1 = abs(st.snr_second_genie / g1 - 1)
    quiet = run_sic_pipeline(
        d, cfg.wave, region, users, (LinkBudget(1e12), LinkBudget(1e12)),
        n_trials=min(cfg.oracle.trials, 2000), seed=cfg.oracle.seed,
    )
    errs = quiet.ser_first + quiet.ser_second
    return [
        SuiteResult("pipeline_snr_user2", e2, 0.05, e2 <= 0.05, f"empirical={st.snr_first:.6g} closed={g2:.6g}"),
        SuiteResult("pipeline_snr_user1", e1, 0.05, e1 <= 0.05, f"empirical={st.snr_second_genie:.6g} closed={g1:.6g}"),
        SuiteResult("pipeline_noiseless_errors", errs, 0.0, errs == 0, "symbol error rate, noiseless control"),
    ]


SUITES = {
    "noise": suite_noise,
    "inverse": suite_inverse,
    "whitening": suite_whitening,
    "whitened_snr": suite_whitened_snr,
    "sum_rate": suite_sum_rate,
    "sic_pipeline": suite_sic_pipeline,
}


def verify(cfg: ExperimentConfig, suites=None) -> list[SuiteResult]:
    results = []
    for name in suites or SUITES:
        results.extend(SUITES[name](cfg))
    return results
