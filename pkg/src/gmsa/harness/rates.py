"""Convergence-rate experiments for tree thresholding.

Errors are exact: coefficients come from closed-form cell means and the
error of each tree approximant follows from Parseval.  Fits are least
squares on base-10 log-log points, and ``residual`` is the root mean
square of the fit residuals in decades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..approximation import threshold, tree_error
from ..wavelets import CoeffTree, decompose
from .functions import SyntheticFunction, get_function

__all__ = [
    "RateFit",
    "RateTable",
    "eta_grid",
    "fit_loglog",
    "rate_experiment_N",
    "rate_experiment_eta",
    "threshold_table",
]


@dataclass(frozen=True)
class RateFit:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    slope: float
    intercept: float
    residual: float
    exact: bool = False

    def to_csv(self, xname: str = "x", yname: str = "y") -> str:
        lines = [f"{xname},{yname}"]
        lines += [f"{format(a, '.17g')},{format(b, '.17g')}" for a, b in zip(self.x, self.y)]
        lines.append(
            f"# slope={format(self.slope, '.17g')} intercept={format(self.intercept, '.17g')} "
            f"residual={format(self.residual, '.17g')} exact={self.exact}"
        )
        return "\n".join(lines) + "\n"


def fit_loglog(x, y) -> RateFit:
    """Least-squares line through ``(log10 x, log10 y)`` over positive pairs.

    When every ``y`` is zero the fit is skipped and flagged ``exact``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    if np.all(y == 0.0):
        return RateFit(x, y, math.nan, math.nan, 0.0, exact=True)
    keep = (x > 0) & (y > 0)
    lx, ly = np.log10(x[keep]), np.log10(y[keep])
    if len(lx) < 3 or np.ptp(lx) == 0.0:
        raise ValueError("need at least three distinct positive points to fit a rate")
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    return RateFit(x, y, float(slope), float(intercept), float(np.sqrt(np.mean(res**2))))


def eta_grid(eta_min: float, eta_max: float, points: int = 30) -> np.ndarray:
    if not 0 < eta_min < eta_max:
        raise ValueError("need 0 < eta_min < eta_max")
    if points < 3:
        raise ValueError("need at least three thresholds")
    return np.geomspace(eta_max, eta_min, points)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(list(grid), dtype=float)
    if grid.size < 3 or np.any(grid <= 0):
        raise ValueError("threshold grid needs at least three positive values")
    if grid.max() / grid.min() < 100.0 - 1e-9:
        raise ValueError("threshold grid must span at least two decades")
    return grid


@dataclass(frozen=True)
class RateTable:
    eta: np.ndarray
    n_cubes: np.ndarray
    error: np.ndarray

    def to_csv(self) -> str:
        lines = ["eta,N,error"]
        for e, n, err in zip(self.eta, self.n_cubes, self.error):
            lines.append(f"{format(e, '.17g')},{int(n)},{format(err, '.17g')}")
        return "\n".join(lines) + "\n"


def threshold_table(coeffs: CoeffTree, grid) -> RateTable:
    grid = _check_grid(grid)
    ns, errs = [], []
    for eta in grid:
        res = threshold(coeffs, eta)
        ns.append(res.n_terms)
        errs.append(tree_error(coeffs, res))
    return RateTable(grid, np.asarray(ns), np.asarray(errs))


def _coeffs(f, J: int, Q: int) -> CoeffTree:
    if isinstance(f, str):
        f = get_function(f)
    if isinstance(f, CoeffTree):
        return f
    return decompose(f, J, Q=Q, dim=getattr(f, "dim", None))


def rate_experiment_eta(f: str | SyntheticFunction | CoeffTree, J: int, grid, Q: int = 4):
    """Error against ``eta`` and cube count against ``1/eta``.

    Returns ``(error_fit, count_fit, table)``.  The slope of
    ``count_fit`` estimates the sparsity exponent ``lambda``.
    """
    table = threshold_table(_coeffs(f, J, Q), grid)
    err_fit = fit_loglog(table.eta, table.error)
    count_fit = fit_loglog(1.0 / table.eta, table.n_cubes)
    return err_fit, count_fit, table


def rate_experiment_N(f: str | SyntheticFunction | CoeffTree, J: int, grid, Q: int = 4):
    """Error against the number of cubes ``N``; returns ``(fit, table)``."""
    table = threshold_table(_coeffs(f, J, Q), grid)
    return fit_loglog(table.n_cubes, table.error), table
