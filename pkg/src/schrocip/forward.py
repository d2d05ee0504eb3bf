"""Crank-Nicolson solver for the 1-D Schrodinger system with a dynamic
boundary condition at x = 0 and a homogeneous Dirichlet condition at x = ell.

Interior equation   i dy/dt + d y_xx - p1(x) y_x + p(x) y = g(x, t)
Boundary equation   i dy_gamma/dt + d y_x(0, t) + p_gamma y_gamma = g_gamma(t)
Coupling            y(0, t) = y_gamma(t);   y(ell, t) = 0.

The boundary equation carries + d y_x(0, .): with the outward normal at
x = 0 pointing in -x, this is the flux convention under which the g = 0
system conserves the combined mass  int |y|^2 dx + |y_gamma|^2  (checked to
scheme order by the conservation tests).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import Grid1D, Potentials, Trajectory


@dataclass(frozen=True, eq=False)
class SourceData:
    """Sources sampled on the forward sub-grid [0, T]."""

    g: np.ndarray          # shape (nt_half + 1, nx + 1)
    g_gamma: np.ndarray    # shape (nt_half + 1,)

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=complex)
        g_gamma = np.asarray(self.g_gamma, dtype=complex)
        if g.ndim != 2 or g_gamma.ndim != 1 or g.shape[0] != g_gamma.shape[0]:
            raise ValueError(f"inconsistent source shapes {g.shape}, {g_gamma.shape}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(g_gamma))):
            raise ValueError("sources contain non-finite entries")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_gamma", g_gamma)

    @classmethod
    def zeros(cls, grid: Grid1D) -> "SourceData":
        return cls(g=np.zeros((grid.nt_half + 1, grid.nx + 1), dtype=complex),
                   g_gamma=np.zeros(grid.nt_half + 1, dtype=complex))


@dataclass(frozen=True, eq=False)
class Measurement:
    """Flux series d/dx y(ell, t_j) on [0, T] with noise metadata."""

    flux: np.ndarray
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        flux = np.asarray(self.flux, dtype=complex)
        if flux.ndim != 1:
            raise ValueError("flux must be a 1-D series")
        if not np.all(np.isfinite(flux)):
            raise ValueError("flux contains non-finite entries")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "flux", flux)


def _spatial_operator(grid: Grid1D, d: float, pot: Potentials) -> np.ndarray:
    """Dense (nx+1)^2 matrix of the spatial part, boundary rows included.

    Row 0 holds the boundary operator d*y_x(0) + p_gamma*y_0 with the
    second-order one-sided stencil; row nx is the Dirichlet pin.
    """
    nx, dx = grid.nx, grid.dx
    S = np.zeros((nx + 1, nx + 1), dtype=complex)
    idx = np.arange(1, nx)
    S[idx, idx - 1] = d / dx ** 2 + pot.p1[idx] / (2 * dx)
    S[idx, idx] = -2 * d / dx ** 2 + pot.p[idx]
    S[idx, idx + 1] = d / dx ** 2 - pot.p1[idx] / (2 * dx)
    S[0, 0] = d * (-3.0) / (2 * dx) + pot.p_gamma
    S[0, 1] = d * 4.0 / (2 * dx)
    S[0, 2] = d * (-1.0) / (2 * dx)
    return S


def _banded(matrix: np.ndarray, kl: int, ku: int) -> np.ndarray:
    """Pack a dense banded matrix into solve_banded's diagonal layout."""
    n = matrix.shape[0]
    ab = np.zeros((kl + ku + 1, n), dtype=complex)
    for offset in range(-kl, ku + 1):
        row = ku - offset
        diag = np.diagonal(matrix, offset)
        if offset >= 0:
            ab[row, offset:offset + diag.size] = diag
        else:
            ab[row, :diag.size] = diag
    return ab


def solve_forward(grid: Grid1D, d: float, potentials: Potentials,
                  sources: SourceData, y0, y_gamma0: complex) -> Trajectory:
    """March the coupled system on [0, T] with Crank-Nicolson steps.

    Each step solves one complex banded system (bandwidth (1, 2)); the
    Dirichlet and coupling identities are exact rows of that system.
    """
    if d <= 0:
        raise ValueError(f"d must be positive, got {d}")
    nx, n_half = grid.nx, grid.nt_half
    y0 = np.asarray(y0, dtype=complex)
    if y0.shape != (nx + 1,):
        raise ValueError(f"y0 shape {y0.shape} does not match grid ({nx + 1},)")
    if sources.g.shape != (n_half + 1, nx + 1):
        raise ValueError(
            f"sources shape {sources.g.shape} does not match grid "
            f"({n_half + 1}, {nx + 1})")

    S = _spatial_operator(grid, d, potentials)
    c = 1j / grid.dt
    # rows 0..nx-1 evolve; row nx pins y(ell) = 0
    A = 0.5 * S.copy()
    B = -0.5 * S
    A[np.arange(nx), np.arange(nx)] += c
    B[np.arange(nx), np.arange(nx)] += c
    A[nx, :] = 0.0
    A[nx, nx] = 1.0
    B[nx, :] = 0.0
    ab = _banded(A, 1, 2)

    y = np.empty((n_half + 1, nx + 1), dtype=complex)
    y[0] = y0
    y[0, 0] = y_gamma0          # coupling identifies the first unknown
    y[0, nx] = 0.0              # Dirichlet node
    for n in range(n_half):
        rhs = B @ y[n] + 0.5 * (sources.g[n] + sources.g[n + 1])
        rhs[0] = (B @ y[n])[0] + 0.5 * (sources.g_gamma[n] + sources.g_gamma[n + 1])
        rhs[nx] = 0.0
        try:
            y[n + 1] = scipy.linalg.solve_banded((1, 2), ab, rhs)
        except scipy.linalg.LinAlgError as exc:
            raise RuntimeError(f"linear solve failed at time index {n + 1}: {exc}")
        if not np.all(np.isfinite(y[n + 1])):
            raise RuntimeError(f"non-finite state at time index {n + 1}")
    return Trajectory(y=y, y_gamma=y[:, 0].copy(), grid=grid, window="half")


def flux_at_right(trajectory: Trajectory) -> np.ndarray:
    """One-sided second-order d/dx at x = ell for every stored time node."""
    y = trajectory.y
    dx = trajectory.grid.dx
    return (3.0 * y[:, -1] - 4.0 * y[:, -2] + y[:, -3]) / (2.0 * dx)


def synthesize_measurement(grid: Grid1D, d: float, potentials: Potentials,
                           sources: SourceData, y0, y_gamma0: complex,
                           sigma: float = 0.0, seed: int = 0) -> Measurement:
    """Solve with the true potentials and add per-sample complex noise.

    Noise standard deviation is sigma times the RMS of the clean flux,
    split evenly between real and imaginary parts; sigma = 0 returns the
    clean flux unchanged.
    """
    flux = flux_at_right(solve_forward(grid, d, potentials, sources, y0, y_gamma0))
    if sigma > 0:
        rng = np.random.default_rng(seed)
        rms = float(np.sqrt(np.mean(np.abs(flux) ** 2)))
        scale = sigma * rms / np.sqrt(2.0)
        flux = flux + scale * (rng.standard_normal(flux.size)
                               + 1j * rng.standard_normal(flux.size))
    return Measurement(flux=flux, sigma=sigma, seed=seed)


def mass_series(trajectory: Trajectory) -> np.ndarray:
    """Trapezoid mass int |y|^2 dx + |y_gamma|^2 at every stored time node."""
    grid = trajectory.grid
    qx = np.full(grid.nx + 1, grid.dx)
    qx[0] = qx[-1] = grid.dx / 2.0
    return (np.abs(trajectory.y) ** 2 @ qx
            + np.abs(trajectory.y_gamma) ** 2)


def drift_sign_report(potentials: Potentials) -> list[str]:
    """Report (not enforce) the endpoint sign condition on the drift p1.

    The regularity theory behind the forward problem wants the drift field
    to point inward at the boundary: p1(0) >= 0 and p1(ell) <= 0.
    """
    notes = []
    if potentials.p1[0] < 0:
        notes.append(f"p1(0) = {potentials.p1[0]:.6g} < 0 violates the "
                     "inward-drift condition at x = 0")
    if potentials.p1[-1] > 0:
        notes.append(f"p1(ell) = {potentials.p1[-1]:.6g} > 0 violates the "
                     "inward-drift condition at x = ell")
    return notes
