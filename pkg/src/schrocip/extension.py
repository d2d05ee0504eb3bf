"""Reflection of time series from the half window [0, T] to (-T, T).

The reconstruction functional lives on the symmetric window.  Data are
produced on [0, T] and extended backwards by conjugate reflection, which
preserves the governing equations when the coefficients are real:

  odd   w(-t) = -conj(w(t))   (requires Re w(0) = 0)
  even  w(-t) = +conj(w(t))   (requires Im w(0) = 0)

A half-window series has nt_half + 1 samples; the extension has
2*nt_half + 1 samples with the shared t = 0 sample in the middle.
"""
from __future__ import annotations

import numpy as np


def _check_axis0_series(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if w.ndim not in (1, 2) or w.shape[0] < 2:
        raise ValueError(f"need a time series with >= 2 samples on axis 0, got shape {w.shape}")
    return w


def extend_odd_conjugate(w, tol: float = 1e-8) -> np.ndarray:
    """Extend to (-T, T) by w(-t) = -conj(w(t)); axis 0 is time.

    Compatibility demands Re w(0) = 0 up to tol * max|w|; the measured
    relative real part is quoted in the error message when it is not.
    """
    w = _check_axis0_series(w)
    scale = float(np.max(np.abs(w)))
    if scale > 0:
        bad = float(np.max(np.abs(np.real(w[0]))))
        if bad > tol * scale:
            raise ValueError(
                f"odd-conjugate extension needs Re w(0) = 0; measured "
                f"max|Re w(0)| / max|w| = {bad / scale:.3e} exceeds tol = {tol:g}")
    return np.concatenate([-np.conj(w[1:][::-1]), w], axis=0)


def extend_conjugate_even(w, tol: float = 1e-8) -> np.ndarray:
    """Extend to (-T, T) by w(-t) = +conj(w(t)); axis 0 is time.

    Compatibility demands Im w(0) = 0 up to tol * max|w|.
    """
    w = _check_axis0_series(w)
    scale = float(np.max(np.abs(w)))
    if scale > 0:
        bad = float(np.max(np.abs(np.imag(w[0]))))
        if bad > tol * scale:
            raise ValueError(
                f"even-conjugate extension needs Im w(0) = 0; measured "
                f"max|Im w(0)| / max|w| = {bad / scale:.3e} exceeds tol = {tol:g}")
    return np.concatenate([np.conj(w[1:][::-1]), w], axis=0)


def time_derivative(w, dt: float) -> np.ndarray:
    """Centered d/dt on axis 0, one-sided second order at the ends."""
    w = _check_axis0_series(w)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = np.empty_like(w)
    if w.shape[0] == 2:
        out[0] = out[1] = (w[1] - w[0]) / dt
        return out
    out[1:-1] = (w[2:] - w[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dt)
    out[-1] = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dt)
    return out
