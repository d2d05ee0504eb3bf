"""Grids, fields, and run configuration shared by every solver module.

The space-time grid covers the full window [-T, T] with t = 0 as an exact
interior node; forward solves use the sub-grid [0, T] while the weighted
minimization uses the whole window.  All types are immutable after
construction and safe to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

# Minimum resolutions: one-sided second-order stencils need a handful of
# nodes, and refinement studies halve from here.
MIN_NX = 8
MIN_NT_HALF = 8

# Constructors accept data violating an exact identity up to this relative
# tolerance (covers roundoff in externally assembled fields).
CONSTRUCT_TOL = 1e-12

Scalar = Union[int, float]
FieldSpec = Union[str, float, int, list]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform grid on (0, ell) x (-T, T) with t = 0 at index nt_half."""

    nx: int
    ell: float
    nt_half: int
    T: float
    dx: float
    dt: float
    x: np.ndarray          # nodes x_i = i*dx, i = 0..nx
    t: np.ndarray          # nodes t_j = (j - nt_half)*dt, j = 0..2*nt_half

    @property
    def n_times(self) -> int:
        """Node count of the full window."""
        return 2 * self.nt_half + 1

    @property
    def t_half(self) -> np.ndarray:
        """Time nodes of [0, T] (forward-solver sub-grid)."""
        return self.x_view(self.t[self.nt_half:])

    @staticmethod
    def x_view(arr: np.ndarray) -> np.ndarray:
        view = arr.view()
        view.flags.writeable = False
        return view


def build_grid(nx: int, ell: float, nt_half: int, T: float) -> Grid1D:
    """Build the uniform space-time grid.

    The t = 0 node is exact by construction: t_j = (j - nt_half) * dt.
    """
    if nx < MIN_NX:
        raise ValueError(f"nx must be >= {MIN_NX}, got {nx}")
    if nt_half < MIN_NT_HALF:
        raise ValueError(f"nt_half must be >= {MIN_NT_HALF}, got {nt_half}")
    if ell <= 0:
        raise ValueError(f"ell must be positive, got {ell}")
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    dx = ell / nx
    dt = T / nt_half
    x = _freeze(np.arange(nx + 1) * dx)
    t = _freeze((np.arange(2 * nt_half + 1) - nt_half) * dt)
    return Grid1D(nx=int(nx), ell=float(ell), nt_half=int(nt_half), T=float(T),
                  dx=dx, dt=dt, x=x, t=t)


@dataclass(frozen=True, eq=False)
class Potentials:
    """Interior potential p(x), boundary potential p_gamma, drift p1(x)."""

    p: np.ndarray
    p_gamma: float
    p1: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        p1 = np.asarray(self.p1, dtype=float)
        if not np.all(np.isfinite(p)):
            raise ValueError("p contains non-finite entries")
        if not np.all(np.isfinite(p1)):
            raise ValueError("p1 contains non-finite entries")
        if not np.isfinite(self.p_gamma):
            raise ValueError("p_gamma is not finite")
        if p.shape != p1.shape:
            raise ValueError(f"p and p1 shapes differ: {p.shape} vs {p1.shape}")
        object.__setattr__(self, "p", _freeze(p))
        object.__setattr__(self, "p_gamma", float(self.p_gamma))
        object.__setattr__(self, "p1", _freeze(p1))

    @classmethod
    def zeros(cls, nx: int) -> "Potentials":
        return cls(p=np.zeros(nx + 1), p_gamma=0.0, p1=np.zeros(nx + 1))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State y(x, t) with boundary trace y_gamma(t) on half or full window.

    Invariants checked on construction: y(ell, .) = 0 (Dirichlet) and
    y(0, .) = y_gamma (coupling), both to CONSTRUCT_TOL relative.
    """

    y: np.ndarray          # shape (n time nodes, nx + 1)
    y_gamma: np.ndarray    # shape (n time nodes,)
    grid: Grid1D
    window: str            # "half" for [0, T], "full" for [-T, T]

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=complex)
        y_gamma = np.asarray(self.y_gamma, dtype=complex)
        if self.window not in ("half", "full"):
            raise ValueError(f"window must be 'half' or 'full', got {self.window!r}")
        n_rows = self.grid.nt_half + 1 if self.window == "half" else self.grid.n_times
        if y.shape != (n_rows, self.grid.nx + 1):
            raise ValueError(
                f"y shape {y.shape} does not match grid ({n_rows}, {self.grid.nx + 1})")
        if y_gamma.shape != (n_rows,):
            raise ValueError(
                f"y_gamma shape {y_gamma.shape} does not match grid ({n_rows},)")
        scale = max(1.0, float(np.max(np.abs(y)))) if y.size else 1.0
        dir_err = float(np.max(np.abs(y[:, -1]))) if y.size else 0.0
        if dir_err > CONSTRUCT_TOL * scale:
            raise ValueError(
                f"Dirichlet violation: max |y(ell,.)| = {dir_err:.3e}")
        cpl_err = float(np.max(np.abs(y[:, 0] - y_gamma))) if y.size else 0.0
        if cpl_err > CONSTRUCT_TOL * scale:
            raise ValueError(
                f"coupling violation: max |y(0,.) - y_gamma| = {cpl_err:.3e}")
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "y_gamma", _freeze(y_gamma))

    @property
    def times(self) -> np.ndarray:
        return self.grid.t_half if self.window == "half" else self.grid.t


@dataclass
class RunConfig:
    """Complete description of a run; round-trips through a YAML file.

    Spatial inputs (p, p1, y0, g, ...) may be numbers, node-value lists, or
    expression strings in x (and t for sources) evaluated on the grid.
    """

    # grid
    nx: int = 200
    ell: float = 1.0
    nt_half: int = 200
    T: float = 2.0
    # physics
    d: float = 1.0
    p: FieldSpec = 0.0
    p_gamma: float = 0.0
    p1: FieldSpec = 0.0
    # initial data
    y0: FieldSpec = 1.0
    y_gamma0: float = 1.0
    # sources
    g: FieldSpec = 0.0
    g_gamma: FieldSpec = 0.0
    # weight parameters (attribute lam is serialized as "lambda")
    s: float = 2.0
    lam: float = 1.0
    alpha: Optional[float] = None
    a: float = 0.5
    # algorithm knobs
    m: float = 2.0
    r0: float = 0.1
    max_iter: int = 30
    stop_tol: float = 1e-6
    cg_tol: float = 1e-8
    cg_max_iter: Optional[int] = None
    eps: float = 0.0
    # step-1 data passes through a time-antisymmetric extension whose
    # purely-imaginary-at-t=0 precondition holds only up to O(dt) scheme
    # error, hence a looser default than the standalone extension op
    extension_tol: float = 0.1
    update: str = "trace"   # "trace" or "literal"
    sigma: float = 0.0
    seed: int = 0

    def grid(self) -> Grid1D:
        return build_grid(self.nx, self.ell, self.nt_half, self.T)


def validate_config(config: RunConfig, reconstruction: bool = True) -> list[str]:
    """Check config invariants; return one message per violation.

    Positivity and realness of the initial data are required only when the
    run feeds a reconstruction (reconstruction=True); a plain forward solve
    accepts any initial state.
    """
    from .config import sample_on_x   # local import to avoid a cycle

    violations: list[str] = []
    if config.d <= 0:
        violations.append("d must be positive")
    if config.nx < MIN_NX:
        violations.append(f"nx must be >= {MIN_NX}")
    if config.nt_half < MIN_NT_HALF:
        violations.append(f"nt_half must be >= {MIN_NT_HALF}")
    if config.ell <= 0:
        violations.append("ell must be positive")
    if config.T <= 0:
        violations.append("T must be positive")
    if config.s <= 0:
        violations.append("s must be positive")
    if config.lam <= 0:
        violations.append("lambda must be positive")
    if config.a <= 0:
        violations.append("a must be positive")
    if config.m <= 0:
        violations.append("m must be positive")
    if config.r0 <= 0:
        violations.append("r0 must be positive")
    if config.eps < 0:
        violations.append("eps must be nonnegative")
    if config.sigma < 0:
        violations.append("sigma must be nonnegative")
    if config.cg_tol <= 0:
        violations.append("cg_tol must be positive")
    if config.max_iter < 1:
        violations.append("max_iter must be >= 1")
    if config.stop_tol <= 0:
        violations.append("stop_tol must be positive")
    if config.update not in ("trace", "literal"):
        violations.append("update must be 'trace' or 'literal'")
    if violations:
        return violations

    grid = config.grid()
    if config.alpha is not None:
        emax = float(np.max(np.exp(config.lam * (grid.x + config.a) ** 2)))
        if config.alpha <= emax:
            violations.append(
                f"alpha must exceed the grid maximum of e^(lambda*psi) = {emax:.6g}")

    try:
        y0 = np.asarray(sample_on_x(config.y0, grid.x))
    except Exception as exc:
        violations.append(f"y0 cannot be evaluated: {exc}")
        return violations
    if not np.all(np.isfinite(y0)):
        violations.append("y0 has non-finite values")
        return violations

    if reconstruction:
        if np.iscomplexobj(y0) and np.max(np.abs(np.imag(y0))) > 0:
            violations.append("y0 must be real-valued for reconstruction")
        if np.iscomplex(config.y_gamma0):
            violations.append("y_gamma0 must be real-valued for reconstruction")
        # positivity |y0| >= r0 holds a.e. on the open interval, so the
        # Dirichlet node x = ell (where compatible data must vanish) is exempt
        interior = np.abs(np.real(y0[:-1]))
        bad = np.nonzero(interior < config.r0)[0]
        if bad.size:
            violations.append(
                f"y0: |y0(x_i)| < r0 at {bad.size} node(s), "
                f"first at i={bad[0]} (x={grid.x[bad[0]]:.6g})")
        if abs(config.y_gamma0) < config.r0:
            violations.append("y_gamma0: |y_gamma0| < r0")
    return violations
