"""Discrete Carleman-weighted quadratic functional, its normal equations,
and a Jacobi-preconditioned conjugate-gradient minimizer.

The functional measures, over the full window (-T, T),

  J(u) = (1/2s) sum w |N(u) - zeta|^2        (interior nodes)
       + (1/2s) sum w(0,.) |N_G(u) - zeta_gamma|^2
       + (1/2)  sum w(ell,.) |d/dx u(ell,.) - h|^2
       + (eps/2) [sum w |u|^2 + sum w(0,.) |u_gamma|^2]

with w = e^{-2 s phi} and trapezoid quadrature.  N is the interior equation
operator built from the current iterate's potentials; N_G is the boundary
operator with the same flux convention as the forward solver.  Unknowns are
the field values at columns 0..nx-1 of every time row (column nx is pinned
to zero by the Dirichlet condition, column 0 doubles as the boundary trace).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import Grid1D, Potentials
from .weights import CarlemanParams, weight_table

DIAG_FLOOR = 1e-13        # Jacobi preconditioner floor, relative to max diagonal
_TINY = 1e-300


@dataclass(frozen=True, eq=False)
class JData:
    """Targets and coefficients defining one instance of the functional."""

    zeta: np.ndarray           # (2M+1, nx+1) interior target
    zeta_gamma: np.ndarray     # (2M+1,) boundary target
    h: np.ndarray              # (2M+1,) flux target at x = ell
    params: CarlemanParams
    potentials: Potentials     # iterate potentials entering N and N_G
    d: float
    eps: float = 0.0

    def __post_init__(self) -> None:
        zeta = np.asarray(self.zeta, dtype=complex)
        zg = np.asarray(self.zeta_gamma, dtype=complex)
        h = np.asarray(self.h, dtype=complex)
        if zeta.ndim != 2:
            raise ValueError(f"zeta must be a 2-D field, got shape {zeta.shape}")
        nt = zeta.shape[0]
        if zg.shape != (nt,) or h.shape != (nt,):
            raise ValueError(
                f"series shapes {zg.shape}, {h.shape} do not match zeta rows ({nt},)")
        if zeta.shape[1] != self.potentials.p.shape[0]:
            raise ValueError(
                f"zeta columns {zeta.shape[1]} do not match potentials "
                f"({self.potentials.p.shape[0]})")
        for name, arr in (("zeta", zeta), ("zeta_gamma", zg), ("h", h)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.d <= 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "zeta_gamma", zg)
        object.__setattr__(self, "h", h)

    @classmethod
    def zeros(cls, grid: Grid1D, params: CarlemanParams, potentials: Potentials,
              d: float, eps: float = 0.0) -> "JData":
        nt = grid.n_times
        return cls(zeta=np.zeros((nt, grid.nx + 1), dtype=complex),
                   zeta_gamma=np.zeros(nt, dtype=complex),
                   h=np.zeros(nt, dtype=complex),
                   params=params, potentials=potentials, d=d, eps=eps)


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    u: np.ndarray              # (2M+1, nx+1), column nx identically zero
    u_gamma: np.ndarray        # u[:, 0]
    j_value: float
    el_residual: float         # relative normal-equation residual
    n_iter: int
    converged: bool
    j_history: np.ndarray | None = None


@dataclass
class CGOptions:
    tol: float = 1e-8
    max_iter: int | None = None    # None resolves to 20 * unknown count
    track_j: bool = False
    x0: np.ndarray | None = None   # warm start, flattened unknown vector


def apply_N(u, potentials: Potentials, d: float, grid: Grid1D) -> np.ndarray:
    """Interior operator i u_t + d u_xx - p1 u_x + p u on the full window.

    Output is zero on the first/last time rows and the boundary columns;
    only interior nodes enter the functional (their neighbors exist and the
    window-end rows carry zero weight anyway).
    """
    u = _check_field(u, grid)
    dx, dt = grid.dx, grid.dt
    out = np.zeros_like(u)
    p = potentials.p[1:-1]
    p1 = potentials.p1[1:-1]
    out[1:-1, 1:-1] = (
        1j * (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dt)
        + d * (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / dx ** 2
        - p1[None, :] * (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dx)
        + p[None, :] * u[1:-1, 1:-1])
    return out


def apply_N_gamma(u, p_gamma: float, d: float, grid: Grid1D) -> np.ndarray:
    """Boundary operator i u_gamma_t + d u_x(0,.) + p_gamma u_gamma.

    Same flux convention and one-sided stencil as the forward solver's
    boundary row.  Zero on the first/last time rows.
    """
    u = _check_field(u, grid)
    dx, dt = grid.dx, grid.dt
    out = np.zeros(u.shape[0], dtype=complex)
    out[1:-1] = (
        1j * (u[2:, 0] - u[:-2, 0]) / (2 * dt)
        + d * (-3.0 * u[1:-1, 0] + 4.0 * u[1:-1, 1] - u[1:-1, 2]) / (2 * dx)
        + p_gamma * u[1:-1, 0])
    return out


def observation_series(u, grid: Grid1D) -> np.ndarray:
    """One-sided second-order d/dx at x = ell for every time row of a field."""
    u = _check_field(u, grid)
    return (3.0 * u[:, -1] - 4.0 * u[:, -2] + u[:, -3]) / (2.0 * grid.dx)


def _check_field(u, grid: Grid1D) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (grid.n_times, grid.nx + 1):
        raise ValueError(
            f"field shape {u.shape} does not match full window "
            f"({grid.n_times}, {grid.nx + 1})")
    return u


def _quadrature_weights(jdata: JData, grid: Grid1D):
    """Diagonal weights for the four quadratic terms, quadrature absorbed.

    Returns (wN over (nt, nx+1) nodes, wG over rows, wB over rows,
    w_eps over the flattened unknown vector).
    """
    nt, nx = grid.n_times, grid.nx
    dx, dt = grid.dx, grid.dt
    s = jdata.params.s
    w2 = weight_table(jdata.params, grid)
    wN = np.zeros((nt, nx + 1))
    wN[1:-1, 1:nx] = (1.0 / s) * w2[1:-1, 1:nx] * dx * dt
    wG = np.zeros(nt)
    wG[1:-1] = (1.0 / s) * w2[1:-1, 0] * dt
    wB = np.zeros(nt)
    wB[1:-1] = w2[1:-1, nx] * dt
    w_eps = np.zeros((nt, nx))
    if jdata.eps > 0:
        qx = np.full(nx, dx)
        qx[0] = dx / 2.0                           # trapezoid; column nx is pinned
        w_eps = jdata.eps * w2[:, :nx] * qx[None, :] * dt
        w_eps[:, 0] += jdata.eps * w2[:, 0] * dt   # boundary-trace part of the norm
        w_eps[0] = w_eps[-1] = 0.0
    return wN, wG, wB, w_eps.ravel()


def _build_operators(jdata: JData, grid: Grid1D):
    """Sparse N, N_G, B acting on the flattened unknowns (row-major j*nx+i)."""
    nt, nx = grid.n_times, grid.nx
    dx, dt = grid.dx, grid.dt
    d = jdata.d
    p = jdata.potentials.p
    p1 = jdata.potentials.p1
    p_gamma = jdata.potentials.p_gamma

    def fidx(j, i):
        return j * nx + i

    nfree = nt * nx
    jj, ii = np.meshgrid(np.arange(1, nt - 1), np.arange(1, nx), indexing="ij")
    jj = jj.ravel()
    ii = ii.ravel()
    out = jj * (nx + 1) + ii
    rows = [out, out, out, out]
    cols = [fidx(jj + 1, ii), fidx(jj - 1, ii), fidx(jj, ii - 1), fidx(jj, ii)]
    vals = [np.full(out.size, 1j / (2 * dt)),
            np.full(out.size, -1j / (2 * dt)),
            d / dx ** 2 + p1[ii] / (2 * dx) + 0j,
            -2 * d / dx ** 2 + p[ii] + 0j]
    keep = ii + 1 < nx                        # column nx is pinned, not an unknown
    rows.append(out[keep])
    cols.append(fidx(jj, ii + 1)[keep])
    vals.append(d / dx ** 2 - p1[ii[keep]] / (2 * dx) + 0j)
    Nmat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nt * (nx + 1), nfree))

    j = np.arange(1, nt - 1)
    rows = [j, j, j, j, j]
    cols = [fidx(j + 1, 0), fidx(j - 1, 0), fidx(j, 0), fidx(j, 1), fidx(j, 2)]
    vals = [np.full(j.size, 1j / (2 * dt)),
            np.full(j.size, -1j / (2 * dt)),
            np.full(j.size, d * (-3.0) / (2 * dx) + p_gamma + 0j),
            np.full(j.size, d * 4.0 / (2 * dx) + 0j),
            np.full(j.size, d * (-1.0) / (2 * dx) + 0j)]
    NG = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nt, nfree))

    j = np.arange(nt)
    B = sp.csr_matrix(
        (np.concatenate([np.full(nt, -4.0 / (2 * dx)), np.full(nt, 1.0 / (2 * dx))]),
         (np.concatenate([j, j]), np.concatenate([fidx(j, nx - 1), fidx(j, nx - 2)]))),
        shape=(nt, nfree))
    return Nmat, NG, B


def assemble_normal_system(jdata: JData, grid: Grid1D):
    """Normal equations A u = b of the functional.

    Returns (A sparse Hermitian PSD, b, c) with J(u) = 1/2 u'Au - Re<b,u> + c
    on the flattened unknowns.
    """
    wN, wG, wB, w_eps = _quadrature_weights(jdata, grid)
    Nmat, NG, B = _build_operators(jdata, grid)
    wNf = wN.ravel()
    A = (Nmat.conj().T.tocsr() @ sp.diags(wNf) @ Nmat
         + NG.conj().T.tocsr() @ sp.diags(wG) @ NG
         + B.conj().T.tocsr() @ sp.diags(wB) @ B)
    if np.any(w_eps > 0):
        A = A + sp.diags(w_eps.astype(complex))
    A = A.tocsr()
    zf = jdata.zeta.ravel()
    b = (Nmat.conj().T @ (wNf * zf)
         + NG.conj().T @ (wG * jdata.zeta_gamma)
         + B.conj().T @ (wB * jdata.h))
    c = 0.5 * float(np.sum(wNf * np.abs(zf) ** 2)
                    + np.sum(wG * np.abs(jdata.zeta_gamma) ** 2)
                    + np.sum(wB * np.abs(jdata.h) ** 2))
    return A, b, c


def eval_J(jdata: JData, u, grid: Grid1D) -> float:
    """Evaluate the functional at a full-window field (column nx ignored as 0)."""
    u = _check_field(u, grid)
    wN, wG, wB, w_eps = _quadrature_weights(jdata, grid)
    rN = apply_N(u, jdata.potentials, jdata.d, grid) - jdata.zeta
    rG = apply_N_gamma(u, jdata.potentials.p_gamma, jdata.d, grid) - jdata.zeta_gamma
    rB = observation_series(u, grid) - jdata.h
    val = 0.5 * (np.sum(wN * np.abs(rN) ** 2)
                 + np.sum(wG * np.abs(rG) ** 2)
                 + np.sum(wB * np.abs(rB) ** 2)
                 + np.sum(w_eps * np.abs(u[:, :grid.nx].ravel()) ** 2))
    return float(val)


def j_gradient(jdata: JData, u, grid: Grid1D) -> np.ndarray:
    """Gradient of J under the real pairing Re<., .>, as a full-window field.

    Column nx (not an unknown) is returned as zero.  Finite differences of
    eval_J along any direction v must match Re<gradient, v>.
    """
    u = _check_field(u, grid)
    A, b, _ = assemble_normal_system(jdata, grid)
    g = A @ u[:, :grid.nx].ravel() - b
    out = np.zeros_like(u)
    out[:, :grid.nx] = g.reshape(grid.n_times, grid.nx)
    return out


def _pcg(A, b, diag, x0, tol, max_iter):
    """Jacobi-preconditioned CG on a Hermitian PSD system.

    Returns (x, iterations, relative residual, converged, rel-residual
    history).  A breakdown (zero curvature or stalled preconditioned
    product) restarts once from the current iterate, then raises.
    """
    bn = float(np.linalg.norm(b))
    x = x0.copy()
    r = b - A @ x
    z = r / diag
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    restarted = False
    history = [float(np.linalg.norm(r)) / bn]
    it = 0
    while it < max_iter and history[-1] > tol:
        Ap = A @ p
        pAp = float(np.vdot(p, Ap).real)
        if not np.isfinite(pAp) or pAp <= _TINY * float(np.vdot(p, p).real):
            if restarted:
                raise RuntimeError("conjugate-gradient breakdown after restart")
            restarted = True
            r = b - A @ x
            z = r / diag
            p = z.copy()
            rz = float(np.vdot(r, z).real)
            continue
        step = rz / pAp
        x += step * p
        r -= step * Ap
        z = r / diag
        rz_new = float(np.vdot(r, z).real)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        history.append(float(np.linalg.norm(r)) / bn)
    return x, it, history[-1], history[-1] <= tol, history


def minimize_J(jdata: JData, grid: Grid1D,
               options: CGOptions | None = None) -> MinimizerResult:
    """Solve the normal equations of the functional by preconditioned CG.

    Non-convergence within the iteration budget returns the last iterate
    with converged = False; the caller decides whether that is acceptable.
    """
    if options is None:
        options = CGOptions()
    nt, nx = grid.n_times, grid.nx
    nfree = nt * nx
    A, b, c = assemble_normal_system(jdata, grid)
    bn = float(np.linalg.norm(b))
    if bn == 0.0:
        u = np.zeros((nt, nx + 1), dtype=complex)
        return MinimizerResult(u=u, u_gamma=u[:, 0].copy(), j_value=c,
                               el_residual=0.0, n_iter=0, converged=True,
                               j_history=np.array([c]) if options.track_j else None)
    diag = A.diagonal().real
    diag = np.maximum(diag, DIAG_FLOOR * float(diag.max()))
    max_iter = options.max_iter if options.max_iter is not None else 20 * nfree
    if options.x0 is not None:
        x0 = np.asarray(options.x0, dtype=complex)
        if x0.shape != (nfree,):
            raise ValueError(f"warm start shape {x0.shape} != ({nfree},)")
    else:
        x0 = np.zeros(nfree, dtype=complex)

    if options.track_j:
        j_hist = []
        x = x0.copy()
        r = b - A @ x
        z = r / diag
        p = z.copy()
        rz = float(np.vdot(r, z).real)
        restarted = False
        it = 0
        rel = float(np.linalg.norm(r)) / bn

        def record():
            # J along iterates via the quadratic form; A x = b - r
            j_hist.append(c - 0.5 * float(np.vdot(x, b).real)
                          - 0.5 * float(np.vdot(x, r).real))

        record()
        while it < max_iter and rel > options.tol:
            Ap = A @ p
            pAp = float(np.vdot(p, Ap).real)
            if not np.isfinite(pAp) or pAp <= _TINY * float(np.vdot(p, p).real):
                if restarted:
                    raise RuntimeError("conjugate-gradient breakdown after restart")
                restarted = True
                r = b - A @ x
                z = r / diag
                p = z.copy()
                rz = float(np.vdot(r, z).real)
                continue
            step = rz / pAp
            x += step * p
            r -= step * Ap
            z = r / diag
            rz_new = float(np.vdot(r, z).real)
            p = z + (rz_new / rz) * p
            rz = rz_new
            it += 1
            rel = float(np.linalg.norm(r)) / bn
            record()
        converged = rel <= options.tol
        history = np.array(j_hist)
    else:
        x, it, rel, converged, _ = _pcg(A, b, diag, x0, options.tol, max_iter)
        history = None

    u = np.zeros((nt, nx + 1), dtype=complex)
    u[:, :nx] = x.reshape(nt, nx)
    return MinimizerResult(u=u, u_gamma=u[:, 0].copy(),
                           j_value=eval_J(jdata, u, grid),
                           el_residual=rel, n_iter=it, converged=converged,
                           j_history=history)
