"""Numerical interrogation of the 1-D Carleman machinery: the conjugated
operator decomposition and the weighted inequality it produces.

Conjugating the principal operator i d/dt + d d2/dx2 by e^{s phi} splits it
into a symmetric and an antisymmetric part in the interior,

  P1 w = d s^2 (phi_x)^2 w + d w_xx + i w_t
  P2 w = d s phi_xx w + 2 d s phi_x w_x + i s phi_t w

and, for the boundary operator i d/dt + d d/dx at x = 0,

  Q1 w = i w_t(0,.),   Q2 w = d s phi_x(0,.) w(0,.) + i s phi_t(0,.) w(0,.),
  R_G w = d w_x(0,.)

with the same flux convention as the forward solver.  The weighted
inequality bounds interior and boundary energies of a test field by the
operator images plus one observation term at x = ell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid1D
from .weights import EXP_CLAMP, CarlemanParams, psi_1d

_SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class DecompositionResiduals:
    interior: float     # quadrature L2 norm of the interior identity residual
    boundary: float     # same for the boundary identity


@dataclass(frozen=True)
class RatioResult:
    lhs: float
    rhs: float
    ratio: float | None   # None when rhs == 0 (undefined, not an error)

    @property
    def defined(self) -> bool:
        return self.ratio is not None


def _phi_tables(grid: Grid1D, lam: float, alpha: float, a: float):
    """phi, theta and the analytic phi derivatives on interior time rows.

    Row arrays cover rows 1..nt-2 (the window-end rows are excluded; the
    weight vanishes there and phi itself diverges).
    """
    x, t = grid.x, grid.t[1:-1]
    psi = psi_1d(x, a)
    elam = np.exp(lam * psi)
    denom = (grid.T + t) * (grid.T - t)          # > 0 on interior rows
    theta = elam[None, :] / denom[:, None]
    phi = (alpha - elam[None, :]) / denom[:, None]
    dpsi = 2.0 * (x + a)
    phi_x = -lam * dpsi[None, :] * theta
    phi_xx = -lam * (2.0 + lam * dpsi ** 2)[None, :] * theta
    phi_t = phi * (2.0 * t[:, None]) / denom[:, None]
    return phi, theta, phi_x, phi_xx, phi_t


def _check_test_field(w, grid: Grid1D) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if w.shape != (grid.n_times, grid.nx + 1):
        raise ValueError(
            f"test field shape {w.shape} does not match full window "
            f"({grid.n_times}, {grid.nx + 1})")
    scale = float(np.max(np.abs(w)))
    if scale == 0.0:
        return w
    if max(float(np.max(np.abs(w[0]))), float(np.max(np.abs(w[-1])))) \
            > _SUPPORT_TOL * scale:
        raise ValueError("test field must vanish at the window-end time rows")
    if float(np.max(np.abs(w[:, -1]))) > _SUPPORT_TOL * scale:
        raise ValueError("test field must vanish at x = ell")
    return w


def _dx_full(w, dx: float) -> np.ndarray:
    """d/dx over all columns: centered interior, one-sided second order ends."""
    out = np.empty_like(w)
    out[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2.0 * dx)
    out[:, 0] = (-3.0 * w[:, 0] + 4.0 * w[:, 1] - w[:, 2]) / (2.0 * dx)
    out[:, -1] = (3.0 * w[:, -1] - 4.0 * w[:, -2] + w[:, -3]) / (2.0 * dx)
    return out


def apply_P1(w, s: float, lam: float, alpha: float, a: float, d: float,
             grid: Grid1D) -> np.ndarray:
    """Symmetric conjugated part on interior nodes; zero elsewhere.

    Accepts lam = 0, where the formula collapses to d w_xx + i w_t.
    """
    w = _check_test_field(w, grid)
    _, _, phi_x, _, _ = _phi_tables(grid, lam, alpha, a)
    dx, dt = grid.dx, grid.dt
    out = np.zeros_like(w)
    out[1:-1, 1:-1] = (
        d * s ** 2 * phi_x[:, 1:-1] ** 2 * w[1:-1, 1:-1]
        + d * (w[1:-1, 2:] - 2 * w[1:-1, 1:-1] + w[1:-1, :-2]) / dx ** 2
        + 1j * (w[2:, 1:-1] - w[:-2, 1:-1]) / (2 * dt))
    return out


def apply_P2(w, s: float, lam: float, alpha: float, a: float, d: float,
             grid: Grid1D) -> np.ndarray:
    """Antisymmetric conjugated part on interior nodes; zero elsewhere."""
    w = _check_test_field(w, grid)
    _, _, phi_x, phi_xx, phi_t = _phi_tables(grid, lam, alpha, a)
    dx = grid.dx
    out = np.zeros_like(w)
    wx = (w[1:-1, 2:] - w[1:-1, :-2]) / (2 * dx)
    out[1:-1, 1:-1] = (
        d * s * phi_xx[:, 1:-1] * w[1:-1, 1:-1]
        + 2 * d * s * phi_x[:, 1:-1] * wx
        + 1j * s * phi_t[:, 1:-1] * w[1:-1, 1:-1])
    return out


def apply_Q1(w, grid: Grid1D) -> np.ndarray:
    """i d/dt of the boundary trace on interior rows; zero at the ends."""
    w = _check_test_field(w, grid)
    out = np.zeros(grid.n_times, dtype=complex)
    out[1:-1] = 1j * (w[2:, 0] - w[:-2, 0]) / (2 * grid.dt)
    return out


def apply_Q2(w, s: float, lam: float, alpha: float, a: float, d: float,
             grid: Grid1D) -> np.ndarray:
    """Multiplicative conjugated boundary part on interior rows."""
    w = _check_test_field(w, grid)
    _, _, phi_x, _, phi_t = _phi_tables(grid, lam, alpha, a)
    out = np.zeros(grid.n_times, dtype=complex)
    out[1:-1] = (d * s * phi_x[:, 0] + 1j * s * phi_t[:, 0]) * w[1:-1, 0]
    return out


def apply_R_gamma(w, d: float, grid: Grid1D) -> np.ndarray:
    """d times the one-sided d/dx at x = 0 on interior rows."""
    w = _check_test_field(w, grid)
    dx = grid.dx
    out = np.zeros(grid.n_times, dtype=complex)
    out[1:-1] = d * (-3.0 * w[1:-1, 0] + 4.0 * w[1:-1, 1] - w[1:-1, 2]) / (2 * dx)
    return out


def conjugated_decomposition_check(w, params: CarlemanParams, d: float,
                                   grid: Grid1D) -> DecompositionResiduals:
    """Residuals of the interior and boundary conjugation identities.

    Forms v = e^{s phi} w, pushes v through the discrete principal
    operators, scales back by e^{-s phi}, and subtracts the P/Q/R images
    of w.  Exact in the continuum; the returned quadrature norms measure
    pure discretization error and drop at second order under refinement.
    """
    w = _check_test_field(w, grid)
    s, lam, alpha, a = params.s, params.lam, params.alpha, params.a
    phi, _, _, _, _ = _phi_tables(grid, lam, alpha, a)
    dx, dt = grid.dx, grid.dt
    nt = grid.n_times

    v = np.zeros_like(w)
    inner = w[1:-1]
    v[1:-1] = np.where(inner == 0, 0.0,
                       np.exp(np.minimum(s * phi, EXP_CLAMP)) * inner)
    back = np.exp(-np.minimum(s * phi, EXP_CLAMP))

    Pv = np.zeros_like(w)
    Pv[1:-1, 1:-1] = (
        1j * (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dt)
        + d * (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / dx ** 2)
    r_int = np.zeros_like(w)
    r_int[1:-1, 1:-1] = (back[:, 1:-1] * Pv[1:-1, 1:-1]
                         - (apply_P1(w, s, lam, alpha, a, d, grid)
                            + apply_P2(w, s, lam, alpha, a, d, grid))[1:-1, 1:-1])

    Bv = np.zeros(nt, dtype=complex)
    Bv[1:-1] = (1j * (v[2:, 0] - v[:-2, 0]) / (2 * dt)
                + d * (-3.0 * v[1:-1, 0] + 4.0 * v[1:-1, 1] - v[1:-1, 2]) / (2 * dx))
    r_bnd = np.zeros(nt, dtype=complex)
    r_bnd[1:-1] = (back[:, 0] * Bv[1:-1]
                   - (apply_Q1(w, grid)
                      + apply_Q2(w, s, lam, alpha, a, d, grid)
                      + apply_R_gamma(w, d, grid))[1:-1])

    qx = np.full(grid.nx + 1, dx)
    qx[0] = qx[-1] = dx / 2.0
    interior = float(np.sqrt(np.sum(np.abs(r_int) ** 2 * qx[None, :]) * dt))
    boundary = float(np.sqrt(np.sum(np.abs(r_bnd) ** 2) * dt))
    return DecompositionResiduals(interior=interior, boundary=boundary)


def _weight_rows(params: CarlemanParams, grid: Grid1D):
    """e^{-2 s phi} and theta on interior time rows (ends carry weight 0)."""
    phi, theta, _, _, _ = _phi_tables(grid, params.lam, params.alpha, params.a)
    w2 = np.exp(np.minimum(-2.0 * params.s * phi, 0.0))
    return w2, theta


def carleman_ratio(v, params: CarlemanParams, d: float, q0, q1, q_gamma0: float,
                   grid: Grid1D) -> RatioResult:
    """LHS, RHS and their ratio in the weighted 1-D inequality.

    LHS: interior s^3 lam^4 theta^3 |v|^2 + s lam^2 theta |v_x|^2 and
    boundary s^3 lam^3 theta^3 |v(0)|^2 + s lam theta |v_x(0)|^2, all under
    e^{-2 s phi}.  RHS: weighted images of the full operators (potentials
    q0, q1, q_gamma0) plus the observation term s lam theta(ell) |v_x(ell)|^2.
    The ratio is undefined (None) when v vanishes identically.
    """
    v = _check_test_field(v, grid)
    s, lam = params.s, params.lam
    nx, dx, dt = grid.nx, grid.dx, grid.dt
    q0 = np.broadcast_to(np.asarray(q0, dtype=float), (nx + 1,))
    q1 = np.broadcast_to(np.asarray(q1, dtype=float), (nx + 1,))
    w2, theta = _weight_rows(params, grid)
    vin = v[1:-1]
    vx = _dx_full(vin, dx)
    qx = np.full(nx + 1, dx)
    qx[0] = qx[-1] = dx / 2.0

    lhs_interior = float(np.sum(
        w2 * (s ** 3 * lam ** 4 * theta ** 3 * np.abs(vin) ** 2
              + s * lam ** 2 * theta * np.abs(vx) ** 2) * qx[None, :]) * dt)
    lhs_boundary = float(np.sum(
        w2[:, 0] * (s ** 3 * lam ** 3 * theta[:, 0] ** 3 * np.abs(vin[:, 0]) ** 2
                    + s * lam * theta[:, 0] * np.abs(vx[:, 0]) ** 2)) * dt)

    Lv = (1j * (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dt)
          + d * (vin[:, 2:] - 2 * vin[:, 1:-1] + vin[:, :-2]) / dx ** 2
          + q1[None, 1:-1] * (vin[:, 2:] - vin[:, :-2]) / (2 * dx)
          + q0[None, 1:-1] * vin[:, 1:-1])
    LGv = (1j * (v[2:, 0] - v[:-2, 0]) / (2 * dt)
           + d * (-3.0 * vin[:, 0] + 4.0 * vin[:, 1] - vin[:, 2]) / (2 * dx)
           + q_gamma0 * vin[:, 0])
    obs = (3.0 * vin[:, -1] - 4.0 * vin[:, -2] + vin[:, -3]) / (2 * dx)
    rhs = float(np.sum(w2[:, 1:-1] * np.abs(Lv) ** 2) * dx * dt
                + np.sum(w2[:, 0] * np.abs(LGv) ** 2) * dt
                + s * lam * np.sum(w2[:, -1] * theta[:, -1] * np.abs(obs) ** 2) * dt)

    lhs = lhs_interior + lhs_boundary
    return RatioResult(lhs=lhs, rhs=rhs,
                       ratio=(lhs / rhs) if rhs > 0 else None)


def t0_trace_ratio(v, params: CarlemanParams, d: float,
                   grid: Grid1D) -> RatioResult:
    """Weighted t = 0 trace energy against the principal operator images.

    LHS: s^{3/2} lam^{3/2} (weighted |v(., 0)|^2 in x + weighted |v(0, 0)|^2).
    RHS: weighted principal images (no potentials) plus the observation term.
    """
    v = _check_test_field(v, grid)
    s, lam = params.s, params.lam
    nx, dx, dt = grid.nx, grid.dx, grid.dt
    w2, theta = _weight_rows(params, grid)
    vin = v[1:-1]
    M = grid.nt_half
    w0 = w2[M - 1]              # row offset: w2 covers rows 1..nt-2
    qx = np.full(nx + 1, dx)
    qx[0] = qx[-1] = dx / 2.0
    lhs = s ** 1.5 * lam ** 1.5 * float(
        np.sum(w0 * qx * np.abs(v[M]) ** 2) + w0[0] * np.abs(v[M, 0]) ** 2)

    Lv = (1j * (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dt)
          + d * (vin[:, 2:] - 2 * vin[:, 1:-1] + vin[:, :-2]) / dx ** 2)
    LGv = (1j * (v[2:, 0] - v[:-2, 0]) / (2 * dt)
           + d * (-3.0 * vin[:, 0] + 4.0 * vin[:, 1] - vin[:, 2]) / (2 * dx))
    obs = (3.0 * vin[:, -1] - 4.0 * vin[:, -2] + vin[:, -3]) / (2 * dx)
    rhs = float(np.sum(w2[:, 1:-1] * np.abs(Lv) ** 2) * dx * dt
                + np.sum(w2[:, 0] * np.abs(LGv) ** 2) * dt
                + s * lam * np.sum(w2[:, -1] * theta[:, -1] * np.abs(obs) ** 2) * dt)
    return RatioResult(lhs=lhs, rhs=rhs,
                       ratio=(lhs / rhs) if rhs > 0 else None)


def time_bump(t, T: float, support: float = 0.9) -> np.ndarray:
    """Smooth compactly supported bump on |t| < support * T, exactly 0 outside."""
    tau = np.asarray(t, dtype=float) / (support * T)
    out = np.zeros_like(tau)
    inside = np.abs(tau) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - tau[inside] ** 2))
    return out


def admissible_ensemble(grid: Grid1D, n_members: int, seed: int,
                        n_modes: int = 4) -> list[np.ndarray]:
    """Seeded random smooth test fields vanishing at x = ell and near |t| = T.

    Spatial modes sin(k pi x / ell) (interior-dominated) and
    cos((k - 1/2) pi x / ell) (boundary-active, still zero at ell), each
    carried by a compact time bump with a random phase velocity.
    """
    rng = np.random.default_rng(seed)
    x, t = grid.x, grid.t
    bump = time_bump(t, grid.T)
    members = []
    for _ in range(n_members):
        v = np.zeros((grid.n_times, grid.nx + 1), dtype=complex)
        for k in range(1, n_modes + 1):
            c_sin = (rng.standard_normal() + 1j * rng.standard_normal()) / k
            c_cos = (rng.standard_normal() + 1j * rng.standard_normal()) / k
            omega = rng.uniform(-2.0, 2.0)
            tmod = bump * np.exp(1j * omega * t)
            v += np.outer(tmod, c_sin * np.sin(k * np.pi * x / grid.ell)
                          + c_cos * np.cos((k - 0.5) * np.pi * x / grid.ell))
        members.append(v)
    return members


def localized_member(grid: Grid1D, width: float = 0.05) -> np.ndarray:
    """A test field concentrated near the observation end x = ell."""
    x, t = grid.x, grid.t
    prof = ((x - grid.ell) / grid.ell) * np.exp(
        -((x - grid.ell) / (width * grid.ell)) ** 2)
    return np.outer(time_bump(t, grid.T).astype(complex), prof)


def implied_psi_convexity(a: float) -> float:
    """Lower bound gamma on psi', psi'' over [0, ell] implied by psi = (x+a)^2."""
    return min(2.0 * a, 2.0)
