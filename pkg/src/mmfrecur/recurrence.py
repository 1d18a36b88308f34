"""Recurrence intervals above a threshold, their scaled PDF and its fit.

Intervals are measured in units of recorded returns. The scaled PDF of
intervals pooled across runs is fitted by the generalized Gamma density

    p(x) = A x**(-beta) * exp(-gamma * x**delta)

normalised on (0, inf).
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import EmptyIntervalsError, FitError, ParameterError

__all__ = [
    "IntervalSeries",
    "ScaledPdf",
    "GammaFit",
    "extract_intervals",
    "pool_and_scale",
    "pooled_spacing",
    "scaled_pdf",
    "gamma_norm",
    "gamma_pdf",
    "fit_generalized_gamma",
]


@dataclass(frozen=True)
class IntervalSeries:
    q_threshold: float
    intervals: np.ndarray
    mean_interval: float

    def __len__(self):
        return len(self.intervals)


@dataclass(frozen=True)
class ScaledPdf:
    bin_centers: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    bin_edges: np.ndarray

    @property
    def widths(self):
        """Widths of the occupied bins, aligned with ``bin_centers``."""
        lo = self.bin_edges[:-1]
        hi = self.bin_edges[1:]
        keep = np.isin(np.sqrt(lo * hi), self.bin_centers)
        return (hi - lo)[keep]


@dataclass(frozen=True)
class GammaFit:
    beta: float
    gamma: float
    delta: float
    norm_a: float
    fit_range: tuple
    goodness: float
    n_bins: int = 0


def extract_intervals(series, q):
    """Gaps between successive indices where ``series > q``.

    ``series`` is a ``ReturnSeries`` or any 1-d array. Stretches before the
    first and after the last exceedance are discarded.
    """
    if not q > 0:
        raise ParameterError(f"threshold must be positive, got {q}")
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if values.size == 0:
        raise ParameterError("empty return series")
    hits = np.flatnonzero(values > q)
    if hits.size < 2:
        raise EmptyIntervalsError(f"{hits.size} exceedance(s) of Q={q}; need at least 2")
    intervals = np.diff(hits)
    return IntervalSeries(q_threshold=float(q), intervals=intervals,
                          mean_interval=float(intervals.mean()))


def _check_same_q(runs):
    if not runs:
        raise ParameterError("no interval series to pool")
    qs = {r.q_threshold for r in runs}
    if len(qs) != 1:
        raise ParameterError(f"interval series have different thresholds: {sorted(qs)}")
    for r in runs:
        if len(r.intervals) == 0:
            raise ParameterError("cannot pool an empty interval series")


def pool_and_scale(runs):
    """Divide each run by its own mean interval, then concatenate."""
    _check_same_q(runs)
    return np.concatenate([np.asarray(r.intervals, dtype=float) / r.mean_interval for r in runs])


def pooled_spacing(runs):
    """Lattice spacing ``1/<r>`` of every pooled value, aligned with ``pool_and_scale``."""
    _check_same_q(runs)
    return np.concatenate([np.full(len(r.intervals), 1.0 / r.mean_interval) for r in runs])


def _log_edges(lo, hi, bins_per_decade):
    start = np.floor(np.log10(lo) * bins_per_decade + 1e-9)
    stop = np.ceil(np.log10(hi) * bins_per_decade - 1e-9)
    if stop <= start:
        stop = start + 1
    return 10.0 ** (np.arange(start, stop + 1) / bins_per_decade)


def _merge_narrow(edges, min_width):
    # coalesce consecutive log bins until each spans at least one lattice step
    kept = [edges[0]]
    for e in edges[1:-1]:
        if e - kept[-1] >= min_width * (1 - 1e-9):
            kept.append(e)
    if edges[-1] - kept[-1] < min_width * (1 - 1e-9) and len(kept) > 1:
        kept.pop()
    kept.append(edges[-1])
    return np.asarray(kept)


def scaled_pdf(scaled, bins_per_decade=10, spacing=None):
    """Log-binned density of positive scaled values; empty bins are dropped.

    Intervals are integers, so scaled values sit on a lattice of step
    ``1/<r>``. When ``spacing`` (scalar or per value) is given, each value
    is spread uniformly over ``[v - spacing/2, v + spacing/2]`` before
    binning, and log bins narrower than the lattice step are merged with
    their neighbours; this removes the aliasing of narrow bins against the
    lattice. The log grid then starts at the lower edge of the smeared
    support, and bins reaching past its upper edge are dropped.
    Without it the plain histogram is returned.
    """
    x = np.asarray(scaled, dtype=float)
    if x.size == 0:
        raise ParameterError("no values to bin")
    if np.any(x <= 0):
        raise ParameterError("scaled values must be positive")
    if spacing is None:
        edges = _log_edges(x.min(), x.max(), bins_per_decade)
        counts = np.histogram(x, bins=edges)[0].astype(float)
    else:
        half = 0.5 * np.broadcast_to(np.asarray(spacing, dtype=float), x.shape)
        if np.any(half <= 0) or np.any(half >= x):
            raise ParameterError("spacing must be positive and below twice each value")
        lo, hi = x - half, x + half
        # grid anchored at the support edge so the first bin is fully covered
        n_bins = max(1, int(np.ceil(np.log10(hi.max() / lo.min()) * bins_per_decade - 1e-9)))
        edges = lo.min() * 10.0 ** (np.arange(n_bins + 1) / bins_per_decade)
        edges = _merge_narrow(edges, 2 * half.max())
        # mass of each smeared value inside each bin, via the cumulative overlap
        cum = np.zeros(edges.size)
        for j, e in enumerate(edges):
            cum[j] = np.sum(np.clip((e - lo) / (hi - lo), 0.0, 1.0))
        counts = np.diff(cum)
    widths = np.diff(edges)
    dens = counts / (x.size * widths)
    keep = counts > 1e-12
    if spacing is not None:
        keep &= edges[1:] <= hi.max() * (1 + 1e-12)
    centers = np.sqrt(edges[:-1] * edges[1:])
    return ScaledPdf(bin_centers=centers[keep], densities=dens[keep],
                     counts=counts[keep], bin_edges=edges)


def _check_gamma_params(beta, gamma, delta):
    if not beta < 1:
        raise ParameterError(f"beta must be < 1, got {beta}")
    if not gamma > 0 or not delta > 0:
        raise ParameterError(f"gamma and delta must be positive, got {gamma}, {delta}")


def _log_norm(beta, gamma, delta):
    k = (1.0 - beta) / delta
    return np.log(delta) + k * np.log(gamma) - special.gammaln(k)


def gamma_norm(beta, gamma, delta):
    """Normalisation ``A = delta / (gamma**((beta-1)/delta) * Gamma((1-beta)/delta))``."""
    _check_gamma_params(beta, gamma, delta)
    return float(np.exp(_log_norm(beta, gamma, delta)))


def _log_gamma_pdf(x, beta, gamma, delta):
    return _log_norm(beta, gamma, delta) - beta * np.log(x) - gamma * x ** delta


def gamma_pdf(x, beta, gamma, delta):
    _check_gamma_params(beta, gamma, delta)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ParameterError("gamma_pdf is defined for x > 0")
    out = np.exp(_log_gamma_pdf(x, beta, gamma, delta))
    return float(out) if out.ndim == 0 else out


_BETA_STARTS = (-0.5, 0.0, 0.3, 0.6, 0.9)
_DELTA_STARTS = (0.3, 0.6, 1.0, 2.0)
_BETA_MAX = 1.0 - 1e-6


def fit_generalized_gamma(pdf, fit_min=1e-2, fit_max=None, min_bins=8, weighted=False):
    """Least-squares fit of log density against the log generalized Gamma.

    Only bins with ``fit_min <= center <= fit_max`` enter the fit. With
    ``weighted`` each log-density residual is scaled by the square root of
    the bin count, its inverse standard error under Poisson counting. The
    optimiser is started from every point of a coarse (beta, delta) grid and
    the lowest residual is kept; gamma and delta are optimised on a log
    scale to stay positive.
    """
    centers = np.asarray(pdf.bin_centers, dtype=float)
    dens = np.asarray(pdf.densities, dtype=float)
    mask = (centers >= fit_min) & (dens > 0)
    if fit_max is not None:
        mask &= centers <= fit_max
    if mask.sum() < min_bins:
        raise FitError(f"only {int(mask.sum())} occupied bins in the fit range, need {min_bins}")
    xs, logd = centers[mask], np.log(dens[mask])
    w = np.sqrt(np.asarray(pdf.counts, dtype=float)[mask]) if weighted else np.ones(xs.size)

    def resid(theta):
        beta, lg, ld = theta
        return w * (_log_gamma_pdf(xs, beta, np.exp(lg), np.exp(ld)) - logd)

    best = None
    failures = []
    for b0 in _BETA_STARTS:
        for d0 in _DELTA_STARTS:
            try:
                sol = optimize.least_squares(
                    resid, x0=[b0, 0.0, np.log(d0)],
                    bounds=([-10.0, -20.0, np.log(0.02)], [_BETA_MAX, 20.0, np.log(20.0)]),
                    method="trf", x_scale=1.0,
                )
            except (ValueError, FloatingPointError) as exc:
                failures.append(str(exc))
                continue
            if not np.all(np.isfinite(sol.fun)):
                continue
            if best is None or sol.cost < best.cost - 1e-14:
                best = sol
    if best is None:
        raise FitError(f"generalized Gamma fit failed from every start: {failures[:3]}")
    beta, lg, ld = best.x
    gamma, delta = float(np.exp(lg)), float(np.exp(ld))
    return GammaFit(beta=float(beta), gamma=gamma, delta=delta,
                    norm_a=gamma_norm(beta, gamma, delta),
                    fit_range=(float(xs.min()), float(xs.max())),
                    goodness=float(np.sqrt(np.mean((best.fun / w) ** 2))),
                    n_bins=int(mask.sum()))
