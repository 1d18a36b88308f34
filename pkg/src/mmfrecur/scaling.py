"""Detrended fluctuation analysis and its multifractal generalisation."""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "DfaResult",
    "MfdfaResult",
    "default_scales",
    "default_q_values",
    "window_variances",
    "dfa",
    "average_exponent",
    "mfdfa",
    "singularity_width",
]

RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class DfaResult:
    scales: np.ndarray
    fluctuations: np.ndarray
    exponent: float
    fit_window: tuple
    intercept: float = 0.0


@dataclass(frozen=True)
class MfdfaResult:
    q_values: np.ndarray
    h_of_q: np.ndarray
    tau_of_q: np.ndarray
    alpha: np.ndarray
    f_of_alpha: np.ndarray
    width: float
    scales: np.ndarray = None
    fq: np.ndarray = None  # shape (len(q_values), len(scales))


def default_scales(n, count=20, smallest=10):
    """Log-spaced window sizes from ``smallest`` up to ``n // 4``."""
    largest = n // 4
    if largest < smallest:
        raise ParameterError(f"series of length {n} too short for windows of {smallest}")
    scales = np.unique(np.round(np.geomspace(smallest, largest, count)).astype(int))
    return scales


def default_q_values():
    return np.linspace(-4.0, 4.0, 41)


def _default_fit_window(scales):
    # drop the two largest scales, they rest on very few windows
    if len(scales) > 4:
        return int(scales[0]), int(scales[-3])
    return int(scales[0]), int(scales[-1])


def _detrend_basis(s, order):
    t = np.arange(s, dtype=float) / s
    basis = np.vander(t, order + 1, increasing=True)
    q, _ = np.linalg.qr(basis)
    return q


def window_variances(series, scales, detrend_order=1):
    """Per-window mean squared residual of the detrended profile.

    For each scale ``s`` the profile is cut into ``floor(N/s)`` windows from
    the start and as many from the end; a polynomial of ``detrend_order`` is
    removed from each. Returns one array of length ``2*floor(N/s)`` per scale.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    scales = np.asarray(scales, dtype=int)
    if detrend_order < 0:
        raise ParameterError("detrend_order must be >= 0")
    if scales.size == 0 or scales.min() <= detrend_order + 1:
        raise ParameterError("every scale must exceed detrend_order + 1")
    if n < 4 * scales.max():
        raise ParameterError(f"series length {n} < 4 x largest scale {scales.max()}")
    profile = np.cumsum(x - x.mean())
    out = []
    for s in scales:
        nw = n // s
        basis = _detrend_basis(s, detrend_order)
        segs = np.concatenate(
            [profile[: nw * s].reshape(nw, s), profile[n - nw * s :].reshape(nw, s)]
        )
        resid = segs - (segs @ basis) @ basis.T
        out.append(np.mean(resid * resid, axis=1))
    return out


def _slope(scales, values, fit_window):
    lo, hi = fit_window
    mask = (scales >= lo) & (scales <= hi)
    if mask.sum() < 2:
        raise ParameterError(f"fit window {fit_window} holds fewer than two scales")
    slope, intercept = np.polyfit(np.log(scales[mask]), np.log(values[mask]), 1)
    return float(slope), float(intercept)


def dfa(series, detrend_order=1, scales=None, fit_window=None):
    """Detrended fluctuation function F(s) and its log-log slope.

    ``F(s)`` is the root mean square of the detrended profile residuals over
    all windows of size ``s``; the exponent is the least-squares slope of
    ``log F`` against ``log s`` over ``fit_window`` (inclusive bounds).
    """
    x = np.asarray(series, dtype=float)
    scales = default_scales(x.size) if scales is None else np.asarray(scales, dtype=int)
    if fit_window is None:
        fit_window = _default_fit_window(scales)
    f2 = window_variances(x, scales, detrend_order)
    fluct = np.sqrt(np.array([v.mean() for v in f2]))
    # affine-invariant: a zero fluctuation only occurs for a polynomial profile
    with np.errstate(divide="ignore"):
        slope, intercept = _slope(scales, np.maximum(fluct, np.finfo(float).tiny), fit_window)
    return DfaResult(scales=scales, fluctuations=fluct, exponent=slope,
                     fit_window=tuple(fit_window), intercept=intercept)


def average_exponent(exponents):
    """Arithmetic mean of per-run exponents."""
    values = np.asarray(exponents, dtype=float)
    if values.size == 0:
        raise ParameterError("no exponents to average")
    return float(values.mean())


def spectrum_from_h(q_values, h_of_q):
    """Mass exponents and singularity spectrum from a sampled h(q).

    The derivative h'(q) uses central differences in the interior of the q
    grid and one-sided differences at its ends.
    """
    q = np.asarray(q_values, dtype=float)
    h = np.asarray(h_of_q, dtype=float)
    tau = q * h - 1.0
    dh = np.gradient(h, q)
    alpha = h + q * dh
    f = q * (alpha - h) + 1.0
    return tau, alpha, f


def mfdfa(series, q_values=None, scales=None, detrend_order=1, fit_window=None):
    x = np.asarray(series, dtype=float)
    q = default_q_values() if q_values is None else np.asarray(q_values, dtype=float)
    if q.ndim != 1 or q.size < 3:
        raise ParameterError("need at least three q values")
    if not (q.min() < 0 < q.max()):
        raise ParameterError("q grid must span negative and positive values")
    if np.any(np.diff(q) <= 0):
        raise ParameterError("q grid must be strictly increasing")
    scales = default_scales(x.size) if scales is None else np.asarray(scales, dtype=int)
    if fit_window is None:
        fit_window = _default_fit_window(scales)
    floor = RESIDUAL_FLOOR * x.var()
    f2 = [np.maximum(v, floor) if floor > 0 else v for v in window_variances(x, scales, detrend_order)]

    fq = np.empty((q.size, scales.size))
    for j, v in enumerate(f2):
        logv = np.log(v)
        for i, qi in enumerate(q):
            if qi == 0:
                fq[i, j] = np.exp(0.5 * logv.mean())
            else:
                # log-sum-exp keeps large |q| moments in range
                a = 0.5 * qi * logv
                amax = a.max()
                fq[i, j] = np.exp((amax + np.log(np.mean(np.exp(a - amax)))) / qi)
    h = np.array([_slope(scales, fq[i], fit_window)[0] for i in range(q.size)])
    tau, alpha, f = spectrum_from_h(q, h)
    return MfdfaResult(q_values=q, h_of_q=h, tau_of_q=tau, alpha=alpha, f_of_alpha=f,
                       width=float(alpha.max() - alpha.min()), scales=scales, fq=fq)


def singularity_width(result):
    alpha = np.asarray(result.alpha, dtype=float)
    if alpha.size == 0:
        raise ParameterError("empty singularity spectrum")
    return float(alpha.max() - alpha.min())
