"""Numerical probe of the two-sided stability between potential distance
and flux-measurement distance.

For a baseline (p, p_gamma) and sampled perturbations (q, q_gamma), the
experiment forms r = ||flux difference||_{H1(0,T)} / ||(q - p, q_gamma -
p_gamma)||, where the denominator combines the L2 norm in x with the
boundary scalar.  Finite positive ratios bounded above and below across an
ensemble are the discrete face of Lipschitz stability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cbrec import _materialize
from .core import Potentials, RunConfig
from .extension import time_derivative
from .forward import flux_at_right, solve_forward


@dataclass(frozen=True)
class EnsembleSpec:
    """Seeded random smooth perturbation family around a baseline."""

    n_members: int = 20
    amplitude: float = 0.1
    n_modes: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_members < 1:
            raise ValueError("n_members must be >= 1")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")


@dataclass(frozen=True)
class RatioRow:
    member: int
    numerator: float
    denominator: float
    ratio: float | None
    flag: str = ""


@dataclass(frozen=True)
class LipschitzTable:
    rows: tuple[RatioRow, ...]

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows if r.ratio is not None])


def h1_norm(series, dt: float) -> float:
    """sqrt( trapezoid(|f|^2) + trapezoid(|f'|^2) ) on a uniform grid."""
    f = np.asarray(series, dtype=complex)
    if f.ndim != 1 or f.shape[0] < 3:
        raise ValueError(f"need a series of length >= 3, got shape {f.shape}")
    df = time_derivative(f, dt)
    return float(np.sqrt(np.trapezoid(np.abs(f) ** 2, dx=dt)
                         + np.trapezoid(np.abs(df) ** 2, dx=dt)))


def perturbation_ensemble(baseline: Potentials, spec: EnsembleSpec,
                          x: np.ndarray) -> list[tuple[np.ndarray, float]]:
    """Sampled (q, q_gamma) members: baseline plus a truncated sine series
    with seeded coefficients and an independent boundary scalar.

    The draw sequence does not depend on the amplitude, so two specs
    differing only in amplitude perturb along identical directions.
    """
    rng = np.random.default_rng(spec.seed)
    members = []
    for _ in range(spec.n_members):
        coeff = rng.standard_normal(spec.n_modes)
        c_bnd = rng.standard_normal()
        dp = np.zeros_like(np.asarray(x, dtype=float))
        for k in range(1, spec.n_modes + 1):
            dp += coeff[k - 1] * np.sin(k * np.pi * x / x[-1]) / k
        members.append((baseline.p + spec.amplitude * dp,
                        baseline.p_gamma + spec.amplitude * c_bnd))
    return members


def pair_ratio(pot_a: Potentials, pot_b: Potentials,
               config: RunConfig) -> RatioRow:
    """Flux-distance over potential-distance for one pair, under the
    config's initial data and sources."""
    grid, y0, y_gamma0, _, sources = _materialize(config)
    qx = np.full(grid.nx + 1, grid.dx)
    qx[0] = qx[-1] = grid.dx / 2.0
    denom = float(np.sqrt(np.sum(qx * (pot_a.p - pot_b.p) ** 2)
                          + (pot_a.p_gamma - pot_b.p_gamma) ** 2))
    if denom == 0.0:
        return RatioRow(member=0, numerator=0.0, denominator=0.0, ratio=None,
                        flag="zero denominator (identical potentials)")
    try:
        flux_a = flux_at_right(solve_forward(grid, config.d, pot_a, sources,
                                             y0.astype(complex), y_gamma0))
        flux_b = flux_at_right(solve_forward(grid, config.d, pot_b, sources,
                                             y0.astype(complex), y_gamma0))
    except RuntimeError as exc:
        return RatioRow(member=0, numerator=np.nan, denominator=denom,
                        ratio=None, flag=f"solve failed: {exc}")
    num = h1_norm(flux_a - flux_b, grid.dt)
    return RatioRow(member=0, numerator=num, denominator=denom,
                    ratio=num / denom)


def lipschitz_experiment(baseline: Potentials, spec: EnsembleSpec,
                         config: RunConfig, threads: int = 1) -> LipschitzTable:
    """Ratio table over the perturbation ensemble around the baseline.

    Members whose forward solve fails, or which coincide with the baseline
    (zero denominator), are flagged and carry ratio = None; everything
    else must come out finite and positive.  Members are independent; with
    threads > 1 they are solved concurrently (the draws are made up front,
    so the result does not depend on the thread count).
    """
    grid, y0, y_gamma0, p1, sources = _materialize(config)
    qx = np.full(grid.nx + 1, grid.dx)
    qx[0] = qx[-1] = grid.dx / 2.0
    base_flux = flux_at_right(solve_forward(grid, config.d, baseline, sources,
                                            y0.astype(complex), y_gamma0))
    members = perturbation_ensemble(baseline, spec, grid.x)

    def eval_member(item):
        i, (q, q_gamma) = item
        denom = float(np.sqrt(np.sum(qx * (q - baseline.p) ** 2)
                              + (q_gamma - baseline.p_gamma) ** 2))
        if denom == 0.0:
            return RatioRow(member=i, numerator=0.0, denominator=0.0,
                            ratio=None, flag="zero denominator")
        try:
            flux_q = flux_at_right(solve_forward(
                grid, config.d, Potentials(p=q, p_gamma=q_gamma, p1=p1),
                sources, y0.astype(complex), y_gamma0))
        except RuntimeError as exc:
            return RatioRow(member=i, numerator=np.nan, denominator=denom,
                            ratio=None, flag=f"solve failed: {exc}")
        num = h1_norm(flux_q - base_flux, grid.dt)
        return RatioRow(member=i, numerator=num, denominator=denom,
                        ratio=num / denom)

    items = list(enumerate(members))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(eval_member, items))
    else:
        rows = [eval_member(item) for item in items]
    return LipschitzTable(rows=tuple(rows))
