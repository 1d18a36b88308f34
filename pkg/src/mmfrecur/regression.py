"""Planar least-squares law beta = a + b*H_x + c*H_s with coefficient tests."""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterError

__all__ = ["SurfaceFit", "fit_beta_surface", "permutation_pvalues", "TABLE_BETA", "table_points"]

# Fitted beta per (H_x row, H_s column) of the published sweep.
TABLE_HX = (0.5, 0.6, 0.7, 0.8, 0.9)
TABLE_HS = (0.5, 0.6, 0.7, 0.8, 0.9)
TABLE_BETA = np.array([
    [0.466, 0.509, 0.619, 0.629, 0.610],
    [0.567, 0.646, 0.638, 0.643, 0.606],
    [0.694, 0.717, 0.730, 0.643, 0.677],
    [0.774, 0.803, 0.773, 0.759, 0.744],
    [0.835, 0.868, 0.858, 0.823, 0.785],
])


def table_points():
    """The 25 published (h_x, h_s, beta) triples."""
    return [(hx, hs, float(TABLE_BETA[i, j]))
            for i, hx in enumerate(TABLE_HX) for j, hs in enumerate(TABLE_HS)]


@dataclass(frozen=True)
class SurfaceFit:
    a: float
    b: float
    c: float
    p_values: tuple
    r_squared: float
    degenerate: bool = False
    n_points: int = 0
    std_errors: tuple = ()

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c,
                "p_a": self.p_values[0], "p_b": self.p_values[1], "p_c": self.p_values[2],
                "r_squared": self.r_squared, "degenerate": self.degenerate,
                "n_points": self.n_points}


def _design(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ParameterError("points must be a sequence of (h_x, h_s, beta) triples")
    if arr.shape[0] < 4:
        raise ParameterError(f"need at least 4 points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("points must be finite")
    X = np.column_stack([np.ones(len(arr)), arr[:, 0], arr[:, 1]])
    if np.linalg.matrix_rank(X) < 3:
        raise ParameterError("design is rank deficient: points are collinear in (h_x, h_s)")
    return X, arr[:, 2]


def _t_stats(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(y) - 3
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    return coef, resid, se, dof


def fit_beta_surface(points):
    """Ordinary least squares of beta on (1, h_x, h_s).

    p-values are two-sided Student-t tests of each coefficient against
    zero with ``n - 3`` degrees of freedom. If the residuals vanish the
    p-values are returned as 0 and ``degenerate`` is set.
    """
    X, y = _design(points)
    coef, resid, se, dof = _t_stats(X, y)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    scale = max(1.0, float(np.max(np.abs(y))))
    degenerate = ss_res <= (1e-12 * scale) ** 2 * len(y)
    if degenerate:
        p = (0.0, 0.0, 0.0)
    else:
        t = coef / se
        p = tuple(float(2.0 * special.stdtr(dof, -abs(ti))) for ti in t)
    return SurfaceFit(a=float(coef[0]), b=float(coef[1]), c=float(coef[2]),
                      p_values=p, r_squared=float(r2), degenerate=bool(degenerate),
                      n_points=len(y), std_errors=tuple(float(s) for s in se))


def permutation_pvalues(points, n_perm=1000, seed=0):
    """Permutation p-values of |t| for each coefficient, shuffling beta labels."""
    X, y = _design(points)
    coef, _, se, _ = _t_stats(X, y)
    t_obs = np.abs(coef / se)
    rng = np.random.default_rng(seed)
    exceed = np.zeros(3)
    for _ in range(int(n_perm)):
        c, _, s, _ = _t_stats(X, rng.permutation(y))
        exceed += np.abs(c / s) >= t_obs
    return tuple(float(v) for v in (exceed + 1.0) / (n_perm + 1.0))
