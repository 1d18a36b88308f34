"""Seeded random inputs of the order-flow model.

Fractional Gaussian noise drives the order signs; heavy-tailed Student
draws supply the relative order prices, which are then reordered so their
ranks follow an independent fGn reference (amplitude-adjusted surrogate).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "FgnSeries",
    "RelativePriceSeries",
    "StudentParams",
    "fgn_autocovariance",
    "gen_fgn",
    "gen_order_signs",
    "sample_student",
    "aaft_correlate",
]

# Below this length the exact Cholesky factorisation is cheap and is used
# whenever the circulant embedding is not non-negative definite.
_CHOLESKY_MAX_N = 4096


@dataclass(frozen=True)
class StudentParams:
    degrees_of_freedom: float = 1.3
    scale: float = 0.0024

    def __post_init__(self):
        if not self.degrees_of_freedom > 0:
            raise ParameterError(f"degrees_of_freedom must be > 0, got {self.degrees_of_freedom}")
        if not self.scale > 0:
            raise ParameterError(f"scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class FgnSeries:
    values: np.ndarray
    hurst: float
    seed: int

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class RelativePriceSeries:
    values: np.ndarray
    hurst_x: float

    def __len__(self):
        return len(self.values)


def _check_hurst(hurst):
    if not 0.0 < hurst < 1.0:
        raise ParameterError(f"Hurst index must lie in (0, 1), got {hurst}")


def fgn_autocovariance(lags, hurst):
    """Autocovariance of unit-variance fGn at integer ``lags``."""
    k = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** two_h - 2 * k ** two_h + np.abs(k - 1) ** two_h)


def _fgn_cholesky(n, hurst, rng):
    lags = np.arange(n)
    cov = fgn_autocovariance(lags[:, None] - lags[None, :], hurst)
    chol = np.linalg.cholesky(cov)
    return chol @ rng.standard_normal(n)


def _fgn_davies_harte(n, hurst, rng):
    # power-of-two circulant of size >= 2(n-1)
    m = 1 << max(1, int(np.ceil(np.log2(2 * (n - 1)))))
    half = m // 2
    row = np.empty(m)
    row[: half + 1] = fgn_autocovariance(np.arange(half + 1), hurst)
    row[half + 1 :] = row[1:half][::-1]
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        return None
    eig = np.clip(eig, 0.0, None)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(np.sqrt(eig / m) * w).real[:n]


def gen_fgn(n, hurst, seed, method="davies-harte"):
    """Generate ``n`` samples of unit-variance fractional Gaussian noise.

    The circulant-embedding (Davies-Harte) synthesis reproduces the exact
    fGn autocovariance; ``method="cholesky"`` gives the same law by direct
    factorisation of the covariance matrix and is meant for small ``n``.
    Output is a pure function of ``(n, hurst, seed, method)``.
    """
    _check_hurst(hurst)
    n = int(n)
    if n < 2:
        raise ParameterError(f"need n >= 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    if method == "cholesky":
        values = _fgn_cholesky(n, hurst, rng)
    elif method == "davies-harte":
        values = _fgn_davies_harte(n, hurst, rng)
        if values is None:
            if n > _CHOLESKY_MAX_N:
                raise ParameterError(f"circulant embedding is not positive for n={n}, H={hurst}")
            values = _fgn_cholesky(n, hurst, np.random.default_rng(seed))
    else:
        raise ParameterError(f"unknown fGn method {method!r}")
    return FgnSeries(values=values, hurst=float(hurst), seed=seed)


def gen_order_signs(n, hurst_s, seed):
    """Order directions (+1 buy, -1 sell) from the signs of fGn increments.

    A zero increment maps to +1.
    """
    fgn = gen_fgn(n, hurst_s, seed)
    return np.where(fgn.values >= 0.0, 1, -1).astype(np.int8)


def sample_student(n, params, seed):
    """``n`` iid draws of ``params.scale`` times a standard Student-t variate."""
    n = int(n)
    if n < 1:
        raise ParameterError(f"need n >= 1 draws, got {n}")
    rng = np.random.default_rng(seed)
    return params.scale * rng.standard_t(params.degrees_of_freedom, size=n)


def aaft_correlate(raw, hurst_x, seed):
    """Reorder ``raw`` so that its ranks follow an fGn reference of Hurst ``hurst_x``.

    This is the amplitude-adjustment step of the AAFT surrogate applied
    once: the k-th smallest value of ``raw`` is placed where the reference
    series has its k-th smallest value. The output is an exact permutation
    of the input.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size < 4:
        raise ParameterError(f"need a 1-d series of length >= 4, got shape {raw.shape}")
    _check_hurst(hurst_x)
    reference = gen_fgn(raw.size, hurst_x, seed).values
    out = np.empty_like(raw)
    out[np.argsort(reference, kind="stable")] = np.sort(raw, kind="stable")
    return RelativePriceSeries(values=out, hurst_x=float(hurst_x))
