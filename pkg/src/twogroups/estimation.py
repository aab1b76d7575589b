"""Fitting the two-groups model from observed panels.

Three estimators: a parametric EM for (p0, m, v) with a normal mixing
distribution, a nonparametric maximum-likelihood EM for grid weights, and a
central-matching fit of an empirical null.  Both EM fits ascend the marginal
likelihood monotonically, which the tests assert.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    BoundaryFitWarning,
    EmpiricalNullError,
    GridBoundaryWarning,
    InsufficientDataError,
    InvalidInputError,
)
from .model import MixingDistribution, NullComponent, TwoGroupsModel, ZPanel

__all__ = ["FitResult", "fit_parametric", "fit_npmle_grid", "fit_empirical_null"]

_V_FLOOR = 1e-8


@dataclass
class FitResult:
    """Outcome of a likelihood fit: the model plus convergence diagnostics."""

    model: TwoGroupsModel
    log_likelihood: float
    iterations: int
    converged: bool
    trace: np.ndarray = field(repr=False)
    method: str = ""


def _panel_arrays(panel: ZPanel, default_variance: float = 1.0):
    v = panel.resolve_variances(default_variance)
    return np.asarray(panel.z, dtype=float), v


def _result_default_variance(v: np.ndarray) -> float:
    return float(v[0]) if np.all(v == v[0]) else 1.0


def fit_parametric(
    panel: ZPanel,
    null: NullComponent | None = None,
    init: tuple | None = None,
    nonnegative_mean: bool = True,
    tol: float = 1e-9,
    max_iter: int = 2000,
) -> FitResult:
    """Maximum-likelihood fit of (p0, m, v) by EM with the null held fixed.

    The complete-data formulation treats both the null indicator and the
    latent effect as missing: the E-step computes per-unit responsibilities
    ``1 - fdr_i`` and conditional effect moments, the M-step updates ``m``
    and ``v`` from responsibility-weighted moments that account for the
    per-unit sampling variances, and ``p0`` from the mean responsibility.
    Stops when the relative log-likelihood change drops below ``tol``.

    ``nonnegative_mean`` keeps the fitted effect mean at or above zero
    (upper-tail effects); pass False to lift the guard.
    """
    if len(panel) < 10:
        raise InsufficientDataError(f"parametric fit needs at least 10 units, got {len(panel)}")
    null = null or NullComponent.theoretical()
    z, V = _panel_arrays(panel)
    n = z.size
    if init is not None:
        p0, m, v = (float(x) for x in init)
        if not (0.0 <= p0 <= 1.0) or v <= 0:
            raise InvalidInputError("init must satisfy 0 <= p0 <= 1 and v > 0")
    else:
        p0 = 0.9
        top = z[z >= np.quantile(z, 0.9)]
        m = float(top.mean())
        if nonnegative_mean:
            m = max(m, 0.0)
        v = 1.0

    f0 = null.density(z, V)
    trace = []
    ll_prev = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f1 = stats.norm.pdf(z, m, np.sqrt(V + v))
        num1 = (1.0 - p0) * f1
        fz = p0 * f0 + num1
        if np.any(fz == 0.0):
            raise InvalidInputError("marginal likelihood underflows; rescale the inputs")
        ll = float(np.sum(np.log(fz)))
        trace.append(ll)
        if it > 1 and abs(ll - ll_prev) <= tol * abs(ll_prev):
            converged = True
            break
        ll_prev = ll
        r = num1 / fz
        total = r.sum()
        p0 = float(np.clip(1.0 - total / n, 0.0, 1.0))
        if total > 1e-12:
            post_mean = (v * z + m * V) / (v + V)
            post_var = v * V / (v + V)
            m_new = float(np.sum(r * post_mean) / total)
            if nonnegative_mean and m_new < 0.0:
                m_new = 0.0
            v_new = float(np.sum(r * (post_var + (post_mean - m_new) ** 2)) / total)
            m = m_new
            v = max(v_new, _V_FLOOR)
    clamped = v <= 2.0 * _V_FLOOR
    if clamped:
        warnings.warn(
            f"fitted effect variance collapsed to the {_V_FLOOR} clamp",
            BoundaryFitWarning,
            stacklevel=2,
        )
    model = TwoGroupsModel(
        p0=p0,
        null=null,
        g=MixingDistribution.normal(m, v),
        default_sampling_variance=_result_default_variance(V),
    )
    return FitResult(
        model=model,
        log_likelihood=trace[-1],
        iterations=it,
        converged=converged,
        trace=np.asarray(trace),
        method="parametric-em",
    )


def fit_npmle_grid(
    panel: ZPanel,
    null: NullComponent | None = None,
    grid=None,
    fixed_p0: float | None = None,
    tol: float = 1e-9,
    max_iter: int = 20000,
) -> FitResult:
    """Nonparametric MLE of the mixing distribution on a fixed support grid.

    Plain EM over the finite mixture of normal kernels centred at the grid
    points.  With ``fixed_p0=None`` the null weight is free: the null is one
    more mixture component, and for a theoretical null any grid point at
    exactly zero is that component, so its fitted mass reports as ``p0``
    rather than as part of ``g``.

    Emits :class:`GridBoundaryWarning` when a quarter or more of the fitted
    mixing weight piles onto an extreme grid point.
    """
    if grid is None:
        raise InvalidInputError("an explicit support grid is required")
    null = null or NullComponent.theoretical()
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise InvalidInputError("grid must contain finite support points")
    if np.any(np.diff(grid) <= 0):
        raise InvalidInputError("grid support points must be strictly increasing")
    z, V = _panel_arrays(panel)
    sd = np.sqrt(V)

    free_p0 = fixed_p0 is None
    if free_p0 and null.kind == "theoretical":
        grid = grid[grid != 0.0]
    if free_p0:
        cols = [null.density(z, V)] + [stats.norm.pdf(z, u, sd) for u in grid]
        K = np.column_stack(cols)
        pi = np.full(K.shape[1], 1.0 / K.shape[1])
    else:
        fixed_p0 = float(fixed_p0)
        if not (0.0 <= fixed_p0 <= 1.0):
            raise InvalidInputError("fixed p0 must lie in [0, 1]")
        if grid.size == 0:
            raise InvalidInputError("grid must keep at least one support point")
        K = np.column_stack([stats.norm.pdf(z, u, sd) for u in grid])
        f0 = null.density(z, V)
        pi = np.full(K.shape[1], 1.0 / K.shape[1])

    trace = []
    ll_prev = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if free_p0:
            fz = K @ pi
        else:
            fz = fixed_p0 * f0 + (1.0 - fixed_p0) * (K @ pi)
        if np.any(fz == 0.0):
            raise InvalidInputError("marginal likelihood underflows; widen the grid")
        ll = float(np.sum(np.log(fz)))
        trace.append(ll)
        if it > 1 and abs(ll - ll_prev) <= tol * abs(ll_prev):
            converged = True
            break
        ll_prev = ll
        if free_p0:
            pi = (K * pi / fz[:, None]).mean(axis=0)
        else:
            resp = (1.0 - fixed_p0) * K * pi / fz[:, None]
            total = resp.sum()
            if total > 0:
                pi = resp.sum(axis=0) / total

    if free_p0:
        p0_hat = float(pi[0])
        w = pi[1:]
        wsum = w.sum()
        weights = w / wsum if wsum > 0 else np.full(grid.size, 1.0 / grid.size)
    else:
        p0_hat = fixed_p0
        weights = pi / pi.sum()
    weights = np.clip(weights, 0.0, None)
    weights = weights / weights.sum()
    if weights.size >= 4 and max(weights[0], weights[-1]) >= 0.25:
        warnings.warn(
            "at least 25% of the mixing weight sits on an extreme grid point; "
            "the grid may not cover the data-supported effect range",
            GridBoundaryWarning,
            stacklevel=2,
        )
    model = TwoGroupsModel(
        p0=p0_hat,
        null=null,
        g=MixingDistribution.grid(grid, weights),
        default_sampling_variance=_result_default_variance(V),
    )
    return FitResult(
        model=model,
        log_likelihood=trace[-1],
        iterations=it,
        converged=converged,
        trace=np.asarray(trace),
        method="npmle-em",
    )


def fit_empirical_null(panel: ZPanel, center_fraction: float = 0.5, bins: int = 100) -> NullComponent:
    """Empirical null by central matching.

    Histogram the central ``center_fraction`` of the data (by quantiles),
    fit a quadratic to the log counts by count-weighted least squares, and
    read (delta0, sigma0) off the vertex and curvature.  The right bump of
    non-null mass stays outside the fitting window, so a contaminated upper
    tail does not inflate the null scale.

    Raises
    ------
    EmpiricalNullError
        If the central log-density is not concave; use the theoretical null.
    """
    if len(panel) < 200:
        raise InsufficientDataError(
            f"empirical null needs at least 200 units, got {len(panel)}"
        )
    if not (0.0 < center_fraction <= 1.0):
        raise InvalidInputError("center_fraction must lie in (0, 1]")
    z = np.asarray(panel.z, dtype=float)
    lo, hi = np.quantile(z, [(1.0 - center_fraction) / 2.0, (1.0 + center_fraction) / 2.0])
    if not hi > lo:
        raise EmpiricalNullError("central window is degenerate")
    counts, edges = np.histogram(z, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    keep = counts > 0
    if keep.sum() < 3:
        raise EmpiricalNullError("too few occupied bins in the central window")
    x, c = centers[keep], counts[keep].astype(float)
    quad, lin, _ = np.polyfit(x, np.log(c), 2, w=np.sqrt(c))
    if quad >= 0.0:
        raise EmpiricalNullError(
            "central log-density is not concave; fall back to the theoretical null"
        )
    sigma0 = float(np.sqrt(-1.0 / (2.0 * quad)))
    delta0 = float(-lin / (2.0 * quad))
    return NullComponent.empirical(delta0, sigma0)
