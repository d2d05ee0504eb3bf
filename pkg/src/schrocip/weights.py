"""Exponential space-time weights and convex-body geometry helpers.

The 1-D weights are built from psi(x) = (x + a)^2 anchored left of the
domain.  The n-D helpers evaluate the gauge (Minkowski) functional of a
ball or ellipse and classify boundary points by the sign of the outward
normal derivative of psi = mu^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid1D

# Overflow guard for exp() in conjugation helpers (float64 overflows ~709).
EXP_CLAMP = 700.0

# Margin multiplier for the default offset alpha; the offset must exceed
# max e^(lambda*psi) strictly and 1% keeps the weight scale undistorted.
ALPHA_MARGIN = 1.01


def psi_1d(x, a: float):
    """Quadratic anchor profile (x + a)^2."""
    x = np.asarray(x, dtype=float)
    out = (x + a) ** 2
    return out if out.shape else float(out)


def theta(x, t, lam: float, a: float, T: float):
    """Singular time envelope e^(lambda*psi) / ((T+t)(T-t)); needs |t| < T."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) >= T):
        raise ValueError("theta is defined on the open window |t| < T")
    out = np.exp(lam * psi_1d(x, a)) / ((T + t) * (T - t))
    return out if out.shape else float(out)


def varphi(x, t, lam: float, alpha: float, a: float, T: float):
    """Weight exponent (alpha - e^(lambda*psi)) / ((T+t)(T-t)); needs |t| < T."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) >= T):
        raise ValueError("varphi is defined on the open window |t| < T")
    out = (alpha - np.exp(lam * psi_1d(x, a))) / ((T + t) * (T - t))
    return out if out.shape else float(out)


@dataclass(frozen=True)
class CarlemanParams:
    """Parameters (s, lambda, alpha, a) of the weight e^(-2*s*varphi)."""

    s: float
    lam: float
    alpha: float
    a: float

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError(f"s must be positive, got {self.s}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.a <= 0:
            raise ValueError(f"a must be positive, got {self.a}")

    def check_alpha(self, grid: Grid1D) -> None:
        emax = float(np.max(np.exp(self.lam * psi_1d(grid.x, self.a))))
        if self.alpha <= emax:
            raise ValueError(
                f"alpha = {self.alpha:.6g} must strictly exceed "
                f"max e^(lambda*psi) = {emax:.6g} on the grid")


def default_alpha(lam: float, a: float, ell: float) -> float:
    """Offset with a 1% margin over the grid maximum of e^(lambda*psi)."""
    return ALPHA_MARGIN * float(np.exp(lam * (ell + a) ** 2))


def weight_e2sphi(x, t, params: CarlemanParams, T: float):
    """Evaluate e^(-2*s*varphi(x,t)), 0 at t = +-T, capped at 1.

    Computed in log space; the exponent is clamped to be nonpositive so the
    weight never overflows even where alpha < e^(lambda*psi).
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > T):
        raise ValueError("weight is defined on |t| <= T")
    scalar = x.shape == () and t.shape == ()
    x, t = np.broadcast_arrays(x, t)
    out = np.zeros(x.shape, dtype=float)
    inside = np.abs(t) < T
    if np.any(inside):
        phi = (params.alpha - np.exp(params.lam * psi_1d(x[inside], params.a))) \
            / ((T + t[inside]) * (T - t[inside]))
        out[inside] = np.exp(np.minimum(-2.0 * params.s * phi, 0.0))
    return float(out) if scalar else out


def weight_table(params: CarlemanParams, grid: Grid1D) -> np.ndarray:
    """Sample e^(-2*s*varphi) on the full (time, space) grid; endpoint rows 0."""
    return weight_e2sphi(grid.x[None, :], grid.t[:, None], params, grid.T)


def theta_table(params: CarlemanParams, grid: Grid1D) -> np.ndarray:
    """Sample theta on the full grid; endpoint rows are +inf in the continuum
    and excluded from every quadrature, stored here as 0."""
    out = np.zeros((grid.n_times, grid.nx + 1))
    out[1:-1, :] = theta(grid.x[None, :], grid.t[1:-1, None],
                         params.lam, params.a, grid.T)
    return out


@dataclass(frozen=True)
class ConvexBody:
    """Origin-centered ball or axis-aligned ellipse in dimension 2 or 3."""

    shape: str              # "ball" or "ellipse"
    radii: tuple            # semi-axes, length = dimension

    def __post_init__(self) -> None:
        if self.shape not in ("ball", "ellipse"):
            raise ValueError(f"shape must be 'ball' or 'ellipse', got {self.shape!r}")
        radii = tuple(float(r) for r in self.radii)
        if len(radii) not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if any(r <= 0 for r in radii):
            raise ValueError("semi-axes must be positive")
        if self.shape == "ball" and len(set(radii)) != 1:
            raise ValueError("a ball needs equal semi-axes")
        object.__setattr__(self, "radii", radii)

    @property
    def dim(self) -> int:
        return len(self.radii)


def minkowski_mu(point, body: ConvexBody):
    """Gauge functional: mu(x) = sqrt(sum (x_k / r_k)^2); 1 on the boundary.

    Accepts a single point (length-dim array) or a stack (npts, dim).
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    if pts.shape[-1] != body.dim:
        raise ValueError(f"point dimension {pts.shape[-1]} != body dimension {body.dim}")
    r = np.asarray(body.radii)
    mu = np.sqrt(np.sum((pts / r) ** 2, axis=-1))
    return float(mu[0]) if np.asarray(point).ndim == 1 else mu


def grad_psi_nd(point, body: ConvexBody) -> np.ndarray:
    """Analytic gradient of psi = mu^2: grad psi = 2 * x_k / r_k^2."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    r = np.asarray(body.radii)
    out = 2.0 * pts / r ** 2
    return out[0] if np.asarray(point).ndim == 1 else out


def classify_gamma_star(points, normals, body: ConvexBody) -> np.ndarray:
    """Flag boundary samples where the normal derivative of psi is >= 0.

    points: (npts, dim) sample positions; normals: matching unit outward
    normals.  Returns a boolean array; pair with `normal_derivative_psi`
    for the underlying values.
    """
    return normal_derivative_psi(points, normals, body) >= 0.0


def normal_derivative_psi(points, normals, body: ConvexBody) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    if pts.shape != nrm.shape:
        raise ValueError("points and normals must have matching shapes")
    return np.sum(grad_psi_nd(pts, body) * nrm, axis=-1)
