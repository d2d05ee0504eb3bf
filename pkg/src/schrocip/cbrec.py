"""Iterative reconstruction of the interior and boundary potentials from a
single flux measurement at x = ell.

Each iteration: (1) solve the forward problem with the current potentials
and form the time derivative of the flux mismatch, extended to the full
window by odd-conjugate reflection; (2) minimize the Carleman-weighted
functional with that series as the observation target; (3) read the
potential corrections off the minimizer's t = 0 trace; (4) clamp to the
[-m, m] box.  A trajectory of the literal time-derivative update variant
can be recorded for comparison via config.update = "literal".
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .config import config_to_dict, sample_on_t, sample_on_x, sample_on_xt
from .core import Grid1D, Potentials, RunConfig
from .extension import extend_odd_conjugate, time_derivative
from .forward import Measurement, SourceData, flux_at_right, solve_forward, \
    synthesize_measurement
from .functional import CGOptions, JData, minimize_J
from .weights import CarlemanParams, default_alpha, weight_e2sphi


def truncate_potential(value, m: float):
    """Clamp to the admissible box [-m, m], pointwise for arrays."""
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    if np.isscalar(value):
        return float(np.clip(value, -m, m))
    return np.clip(np.asarray(value, dtype=float), -m, m)


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    j_value: float
    el_residual: float
    cg_iterations: int
    cg_converged: bool
    rel_re_h0: float            # |Re h(0)| / max|h|, scheme-error indicator
    x: np.ndarray               # flattened minimizer unknowns (warm start)
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class IterationRecord:
    k: int
    error: float | None         # weighted L2 error vs truth, None without truth
    error_gamma: float | None
    j_value: float
    el_residual: float
    cg_iterations: int
    step_norm: float


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    records: tuple[IterationRecord, ...]
    errors: np.ndarray | None           # e_0 .. e_K including the initial guess
    rho: float | None                   # least-squares geometric rate, >= 3 iters
    stopping_reason: str
    final: Potentials
    config: RunConfig
    config_hash: str
    warnings: tuple[str, ...] = ()
    weighted_t0_errors: np.ndarray | None = None


def _carleman_params(config: RunConfig) -> CarlemanParams:
    alpha = config.alpha
    if alpha is None:
        alpha = default_alpha(config.lam, config.a, config.ell)
    return CarlemanParams(s=config.s, lam=config.lam, alpha=alpha, a=config.a)


def _materialize(config: RunConfig):
    """Sample config expressions on the grid: fields used by every step."""
    grid = config.grid()
    y0 = np.real(np.asarray(sample_on_x(config.y0, grid.x))).astype(float)
    y_gamma0 = complex(config.y_gamma0)
    p1 = np.real(np.asarray(sample_on_x(config.p1, grid.x))).astype(float)
    g = sample_on_xt(config.g, grid.x, grid.t_half)
    g_gamma = sample_on_t(config.g_gamma, grid.t_half)
    sources = SourceData(g=g, g_gamma=g_gamma)
    return grid, y0, y_gamma0, p1, sources


def true_potentials(config: RunConfig) -> Potentials:
    """The config's potential expressions sampled on the grid."""
    grid = config.grid()
    p = np.real(np.asarray(sample_on_x(config.p, grid.x))).astype(float)
    p1 = np.real(np.asarray(sample_on_x(config.p1, grid.x))).astype(float)
    return Potentials(p=p, p_gamma=float(config.p_gamma), p1=p1)


def weighted_t0_error(p, p_gamma: float, truth: Potentials,
                      params: CarlemanParams, grid: Grid1D) -> float:
    """Carleman-weighted t = 0 error functional of an iterate against truth.

    sum e^{-2 s phi(x,0)} |p - p_true|^2 dx (trapezoid)
      + e^{-2 s phi(0,0)} |p_gamma - p_gamma_true|^2
    """
    w0 = weight_e2sphi(grid.x, 0.0, params, grid.T)
    qx = np.full(grid.nx + 1, grid.dx)
    qx[0] = qx[-1] = grid.dx / 2.0
    dp = np.asarray(p, dtype=float) - truth.p
    return float(np.sum(w0 * qx * dp ** 2)
                 + w0[0] * (p_gamma - truth.p_gamma) ** 2)


def cbrec_step(p_k, p_gamma_k: float, measurement: Measurement,
               config: RunConfig, x0: np.ndarray | None = None):
    """One reconstruction iteration; returns (p, p_gamma, diagnostics).

    The warm start x0 is the flattened minimizer vector from the previous
    step; passing it back shortens the inner CG solve considerably.
    """
    grid, y0, y_gamma0, p1, sources = _materialize(config)
    nx = grid.nx
    p_k = np.asarray(p_k, dtype=float)
    if p_k.shape != (nx + 1,):
        raise ValueError(f"p_k shape {p_k.shape} does not match grid ({nx + 1},)")
    if measurement.flux.shape != (grid.nt_half + 1,):
        raise ValueError(
            f"measurement length {measurement.flux.shape[0]} does not match "
            f"time sub-grid ({grid.nt_half + 1})")
    warnings = []
    low = np.abs(y0[:nx]) < config.r0
    if np.any(low):
        idx = int(np.flatnonzero(low)[0])
        warnings.append(
            f"|y0| < r0 at {int(np.sum(low))} node(s), first at i={idx} "
            f"(x={grid.x[idx]:.6g}); updates there are unreliable")

    pot_k = Potentials(p=p_k, p_gamma=p_gamma_k, p1=p1)
    traj = solve_forward(grid, config.d, pot_k, sources, y0.astype(complex),
                         y_gamma0)
    dflux = flux_at_right(traj) - measurement.flux
    h_half = time_derivative(dflux, grid.dt)
    scale = float(np.max(np.abs(h_half)))
    rel_re_h0 = abs(float(np.real(h_half[0]))) / scale if scale > 0 else 0.0
    h = extend_odd_conjugate(h_half, tol=config.extension_tol)

    params = _carleman_params(config)
    nt = grid.n_times
    jdata = JData(zeta=np.zeros((nt, nx + 1), dtype=complex),
                  zeta_gamma=np.zeros(nt, dtype=complex), h=h,
                  params=params, potentials=pot_k, d=config.d, eps=config.eps)
    options = CGOptions(tol=config.cg_tol, max_iter=config.cg_max_iter, x0=x0)
    result = minimize_J(jdata, grid, options)

    u0 = result.u[grid.nt_half]                      # t = 0 row, full columns
    if config.update == "literal":
        up = result.u[grid.nt_half + 1]
        um = result.u[grid.nt_half - 1]
        upd = np.real((up - um) / (2.0 * grid.dt) / np.where(y0 == 0, 1.0, y0))
    else:
        upd = np.real(1j * u0 / np.where(y0 == 0, 1.0, y0))
    upd = np.where(np.abs(y0) < 1e-6, 0.0, upd)      # no update where y0 ~ 0
    p_next = truncate_potential(p_k + upd, config.m)
    p_next[nx] = p_next[nx - 1]    # Dirichlet node carries no information
    if config.update == "literal":
        g_upd = float(np.real((result.u_gamma[grid.nt_half + 1]
                               - result.u_gamma[grid.nt_half - 1])
                              / (2.0 * grid.dt) / y_gamma0))
    else:
        g_upd = float(np.real(1j * result.u_gamma[grid.nt_half] / y_gamma0))
    p_gamma_next = truncate_potential(p_gamma_k + g_upd, config.m)

    diag = StepDiagnostics(
        j_value=result.j_value, el_residual=result.el_residual,
        cg_iterations=result.n_iter, cg_converged=result.converged,
        rel_re_h0=rel_re_h0,
        x=result.u[:, :nx].ravel(), warnings=tuple(warnings))
    return p_next, p_gamma_next, diag


def _hash_token(obj):
    """Stable JSON stand-in for config values json cannot encode.

    Callables hash by qualified name, not repr, so the hash does not
    depend on interpreter memory addresses.
    """
    if callable(obj):
        return getattr(obj, "__qualname__", obj.__class__.__name__)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return repr(obj)


def run_cbrec(config: RunConfig, measurement: Measurement | None = None,
              truth: Potentials | None = None,
              guess: tuple[np.ndarray, float] | None = None) -> ReconstructionReport:
    """Drive the reconstruction loop to a stopping condition.

    With measurement = None the config's potential expressions are taken as
    the truth, the measurement is synthesized from them (with config.sigma
    noise), and errors are tracked against them.  Stopping: relative step
    size below config.stop_tol, config.max_iter reached, or the truth error
    increasing for 3 consecutive steps.
    """
    grid, y0, y_gamma0, p1, sources = _materialize(config)
    nx = grid.nx
    params = _carleman_params(config)
    if measurement is None:
        if truth is None:
            truth = true_potentials(config)
        measurement = synthesize_measurement(
            grid, config.d, truth, sources, y0.astype(complex), y_gamma0,
            sigma=config.sigma, seed=config.seed)

    warnings: list[str] = []
    if truth is not None and (np.max(np.abs(truth.p)) > config.m
                              or abs(truth.p_gamma) > config.m):
        warnings.append(
            f"m too small: truth sup-norm "
            f"{max(float(np.max(np.abs(truth.p))), abs(truth.p_gamma)):.6g} "
            f"exceeds the truncation bound m = {config.m:.6g}; iterates are "
            "clamped and the error will plateau")

    qx = np.full(nx + 1, grid.dx)
    qx[0] = qx[-1] = grid.dx / 2.0

    def werr(p, pg):
        if truth is None:
            return None, None
        e = float(np.sqrt(np.sum(qx * (np.asarray(p) - truth.p) ** 2)
                          + (pg - truth.p_gamma) ** 2))
        return e, abs(pg - truth.p_gamma)

    if guess is not None:
        p_cur = np.asarray(guess[0], dtype=float).copy()
        pg_cur = float(guess[1])
    else:
        p_cur = np.zeros(nx + 1)
        pg_cur = 0.0

    errors = []
    t0_errors = []
    e0, _ = werr(p_cur, pg_cur)
    if truth is not None:
        errors.append(e0)
        t0_errors.append(weighted_t0_error(p_cur, pg_cur, truth, params, grid))
    records: list[IterationRecord] = []
    x_warm = None
    increases = 0
    reason = "max iterations reached"
    for k in range(config.max_iter):
        p_next, pg_next, diag = cbrec_step(p_cur, pg_cur, measurement, config,
                                           x0=x_warm)
        for w in diag.warnings:
            if w not in warnings:
                warnings.append(w)
        x_warm = diag.x
        step = float(np.sqrt(np.sum(qx * (p_next - p_cur) ** 2)
                             + (pg_next - pg_cur) ** 2))
        denom = max(float(np.sqrt(np.sum(qx * p_next ** 2) + pg_next ** 2)), 1.0)
        e_k, eg_k = werr(p_next, pg_next)
        records.append(IterationRecord(
            k=k + 1, error=e_k, error_gamma=eg_k, j_value=diag.j_value,
            el_residual=diag.el_residual, cg_iterations=diag.cg_iterations,
            step_norm=step))
        if truth is not None:
            errors.append(e_k)
            t0_errors.append(weighted_t0_error(p_next, pg_next, truth, params,
                                               grid))
            if e_k > errors[-2]:
                increases += 1
                if increases >= 3:
                    p_cur, pg_cur = p_next, pg_next
                    reason = "error increased for 3 consecutive steps"
                    break
            else:
                increases = 0
        p_cur, pg_cur = p_next, pg_next
        if step < config.stop_tol * denom:
            reason = "step size below tolerance"
            break

    rho = None
    if len(records) >= 3 and truth is not None:
        e_arr = np.array(errors[1:])
        k_arr = np.arange(1, e_arr.size + 1)
        slope = np.polyfit(k_arr, np.log(np.maximum(e_arr, 1e-300)), 1)[0]
        rho = float(np.exp(slope))

    payload = json.dumps(config_to_dict(config), sort_keys=True,
                         default=_hash_token)
    config_hash = hashlib.sha256(payload.encode()).hexdigest()[:16]
    return ReconstructionReport(
        records=tuple(records),
        errors=np.array(errors) if truth is not None else None,
        rho=rho, stopping_reason=reason,
        final=Potentials(p=p_cur, p_gamma=pg_cur, p1=p1),
        config=config, config_hash=config_hash, warnings=tuple(warnings),
        weighted_t0_errors=np.array(t0_errors) if truth is not None else None)
