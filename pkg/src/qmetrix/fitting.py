"""Least-squares fits of the two standard-deviation curve families.

Both families are fit in the y = stddev**(-2) ordinate, where the
quadratic family (a x^2 + b x + c) is an ordinary linear problem and the
rational family (a x^2 + b x + c) / (x + d) is linear once d is fixed.
Fitting the inverse-square ordinate avoids the nonconvexity of fitting an
inverse square root directly; both the transformed-space and the
original-space residual norms are reported, and the minimized one is the
transformed-space norm.

The quadratic fitter also supports a direct stddev ordinate behind the
``ordinate`` flag, for data sets whose published parameters only make
sense in that reading.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np


class FitFamily(str, enum.Enum):
    QUADRATIC_INV_SQRT = "quadratic_inv_sqrt"
    RATIONAL_INV_SQRT = "rational_inv_sqrt"


class QuadraticOrdinate(str, enum.Enum):
    INV_SQUARE = "inv_square"  # fit stddev**(-2) = a x^2 + b x + c
    DIRECT = "direct"          # fit stddev       = a x^2 + b x + c


@dataclass(frozen=True)
class FitResult:
    family: FitFamily
    params: tuple[float, ...]
    residual_norm: float
    original_residual_norm: float
    points_used: int
    ordinate: str = QuadraticOrdinate.INV_SQUARE.value
    converged: bool = True

    def stddev(self, x: np.ndarray) -> np.ndarray:
        """Fitted standard-deviation curve evaluated at x."""
        x = np.asarray(x, dtype=float)
        if self.family == FitFamily.QUADRATIC_INV_SQRT:
            a, b, c = self.params
            poly = a * x**2 + b * x + c
            if self.ordinate == QuadraticOrdinate.DIRECT.value:
                return poly
            return poly**-0.5
        a, b, c, d = self.params
        return ((a * x**2 + b * x + c) / (x + d)) ** -0.5


def _validate_points(points, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (x, stddev) pairs")
    if len(pts) < minimum:
        raise ValueError(f"need at least {minimum} points, got {len(pts)}")
    x, s = pts[:, 0], pts[:, 1]
    if len(np.unique(x)) < minimum:
        raise ValueError(f"need at least {minimum} distinct x values")
    if np.any(s <= 0):
        raise ValueError("stddev values must be positive")
    return x, s


def fit_quadratic(
    points, ordinate: QuadraticOrdinate | str = QuadraticOrdinate.INV_SQUARE
) -> FitResult:
    """Linear least squares of a quadratic against (x, stddev) pairs.

    The default ordinate fits stddev**(-2) against (x^2, x, 1); the direct
    ordinate fits stddev itself. Exact (residual below 1e-8) on noiseless
    data generated from the same family, and independent of point order.
    """
    ordinate = QuadraticOrdinate(ordinate)
    x, s = _validate_points(points, 3)
    y = s**-2 if ordinate == QuadraticOrdinate.INV_SQUARE else s
    design = np.stack([x**2, x, np.ones_like(x)], axis=1)
    if np.linalg.matrix_rank(design) < 3:
        raise ValueError("rank-deficient design matrix")
    params, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    fitted_y = design @ params
    res = FitResult(
        family=FitFamily.QUADRATIC_INV_SQRT,
        params=tuple(float(p) for p in params),
        residual_norm=float(np.linalg.norm(fitted_y - y)),
        original_residual_norm=0.0,
        points_used=len(x),
        ordinate=ordinate.value,
    )
    return _with_original_residual(res, x, s)


def _with_original_residual(res: FitResult, x: np.ndarray, s: np.ndarray) -> FitResult:
    try:
        orig = float(np.linalg.norm(res.stddev(x) - s))
    except (FloatingPointError, ValueError):
        orig = float("inf")
    return dataclasses.replace(res, original_residual_norm=orig)


def _rational_inner(x: np.ndarray, y: np.ndarray, d: float):
    """Best (a, b, c) and SSE for fixed denominator offset d."""
    basis = np.stack([x**2, x, np.ones_like(x)], axis=1) / (x + d)[:, None]
    coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
    r = basis @ coef - y
    return coef, float(r @ r)


def fit_rational(points, d_bracket: tuple[float, float] = (1e-3, 10.0)) -> FitResult:
    """Fit y = stddev**(-2) = (a x^2 + b x + c) / (x + d), deterministically.

    The denominator offset d is scanned over a bracket with the inner
    linear problem solved exactly at each value, then all four parameters
    are polished by damped Gauss-Newton. The denominator must stay
    positive over the data; a fit that fails to improve under polishing is
    returned with ``converged`` cleared.
    """
    x, s = _validate_points(points, 4)
    y = s**-2
    if float(np.ptp(y)) < 1e-12 * max(1.0, float(np.abs(y).max())):
        raise ValueError("degenerate fit: ordinate is constant")
    d_lo = max(d_bracket[0], -float(x.min()) + 1e-6)
    if d_bracket[1] <= d_lo:
        raise ValueError("no denominator bracket with positive values")

    best_d, best_coef, best_sse = None, None, np.inf
    for d in np.geomspace(d_lo, d_bracket[1], 200):
        coef, sse = _rational_inner(x, y, float(d))
        if sse < best_sse:
            best_d, best_coef, best_sse = float(d), coef, sse
    assert best_coef is not None and best_d is not None

    params = np.array([*best_coef, best_d])
    sse = best_sse
    converged = True
    for _ in range(60):
        a, b, c, d = params
        denom = x + d
        model = (a * x**2 + b * x + c) / denom
        r = model - y
        jac = np.stack([x**2 / denom, x / denom, 1.0 / denom, -model / denom], axis=1)
        g = jac.T @ r
        h = jac.T @ jac
        try:
            step = np.linalg.solve(h + 1e-12 * np.eye(4), g)
        except np.linalg.LinAlgError:
            converged = False
            break
        improved = False
        for damp in (1.0, 0.5, 0.25, 0.1, 0.01):
            trial = params - damp * step
            if trial[3] <= -float(x.min()):
                continue
            _, _, trial_sse = _rational_eval(x, y, trial)
            if trial_sse < sse:
                params, sse = trial, trial_sse
                improved = True
                break
        if not improved:
            break
        if np.linalg.norm(damp * step) < 1e-14:
            break

    res = FitResult(
        family=FitFamily.RATIONAL_INV_SQRT,
        params=tuple(float(p) for p in params),
        residual_norm=float(np.sqrt(sse)),
        original_residual_norm=0.0,
        points_used=len(x),
        ordinate=QuadraticOrdinate.INV_SQUARE.value,
        converged=converged,
    )
    return _with_original_residual(res, x, s)


def _rational_eval(x, y, params):
    a, b, c, d = params
    model = (a * x**2 + b * x + c) / (x + d)
    r = model - y
    return model, r, float(r @ r)
