"""Moderated z-scores from raw expression matrices.

Per-row sample standard deviations based on a few degrees of freedom easily
come out randomly small and produce spuriously large t-statistics.  Treating
the rows as exchangeable in their variances justifies shrinking each sample
variance toward a common value before forming the t denominator:
``s_i^2 | sigma_i^2 ~ sigma_i^2 chi2_df / df`` with a scaled-inverse-chi-square
(d0, s0^2) prior gives the closed-form posterior-scale shrinkage
``s_shrunk^2 = (df s^2 + d0 s0^2) / (df + d0)`` and a moderated t that is
referred to a t distribution with ``df + d0`` degrees of freedom.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import InsufficientDataError, InvalidInputError, TotalShrinkageWarning
from .model import ZPanel

__all__ = [
    "ExpressionMatrix",
    "TwoSampleScores",
    "ModeratedScores",
    "two_sample_scores",
    "shrink_variances",
    "moderated_pipeline",
    "inverse_trigamma",
]

_Z_CLIP = 40.0


@dataclass(eq=False)
class ExpressionMatrix:
    """N-by-n data matrix with two column groups; missing values are rejected."""

    row_ids: list
    column_labels: list
    values: np.ndarray

    def __post_init__(self) -> None:
        self.row_ids = [str(r) for r in self.row_ids]
        self.column_labels = [str(c) for c in self.column_labels]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InvalidInputError("values must be a 2-d matrix")
        n_rows, n_cols = self.values.shape
        if len(self.row_ids) != n_rows or len(self.column_labels) != n_cols:
            raise InvalidInputError("row_ids / column_labels must match the matrix shape")
        if len(set(self.row_ids)) != n_rows:
            raise InvalidInputError("row ids must be unique")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("missing or non-finite values are rejected, not imputed")
        groups = list(dict.fromkeys(self.column_labels))
        if len(groups) != 2:
            raise InvalidInputError(f"exactly two column groups required, got {groups}")
        for g in groups:
            if self.column_labels.count(g) < 2:
                raise InvalidInputError(f"group {g!r} needs at least 2 columns")
        self.groups = groups

    def group_columns(self, label: str) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.column_labels) if c == label])


@dataclass
class TwoSampleScores:
    """Pooled two-sample t per row; flagged rows have zero pooled variance."""

    ids: list
    mean_diff: np.ndarray
    t: np.ndarray
    df: int
    s_raw: np.ndarray
    flagged: np.ndarray


@dataclass
class ModeratedScores:
    """Raw and moderated statistics per retained row, plus the prior fit."""

    ids: list
    raw_t: np.ndarray
    df: int
    s_raw: np.ndarray
    s_shrunk: np.ndarray
    moderated_t: np.ndarray
    z: np.ndarray
    d0: float
    s0: float
    flagged_ids: list = field(default_factory=list)


def two_sample_scores(matrix: ExpressionMatrix) -> TwoSampleScores:
    """Pooled-variance two-sample t row by row.

    ``s_raw`` is the standard error of the group mean difference (the pooled
    sd on the difference scale), so ``t = mean_diff / s_raw`` with
    ``df = n1 + n2 - 2``.  Rows whose pooled within-group variance is zero
    cannot form a t and come back flagged; statistics for them are NaN.
    """
    g1 = matrix.values[:, matrix.group_columns(matrix.groups[0])]
    g2 = matrix.values[:, matrix.group_columns(matrix.groups[1])]
    n1, n2 = g1.shape[1], g2.shape[1]
    df = n1 + n2 - 2
    mean_diff = g1.mean(axis=1) - g2.mean(axis=1)
    ss = ((g1 - g1.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    ss += ((g2 - g2.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    pooled = ss / df
    flagged = pooled == 0.0
    s_raw = np.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(flagged, np.nan, mean_diff / s_raw)
    s_raw = np.where(flagged, np.nan, s_raw)
    return TwoSampleScores(
        ids=list(matrix.row_ids), mean_diff=mean_diff, t=t, df=df, s_raw=s_raw, flagged=flagged
    )


def inverse_trigamma(y: float, iterations: int = 200) -> float:
    """Solve ``trigamma(x) = y`` for ``x > 0`` by bisection in log space."""
    if y <= 0 or not np.isfinite(y):
        raise InvalidInputError("inverse trigamma needs a positive finite value")
    lo, hi = 1e-12, 1e12
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if special.polygamma(1, mid) > y:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def shrink_variances(s_raw, df: int):
    """Shrink sample standard deviations toward their common centre.

    Fits (d0, s0) by matching the first two moments of ``log s^2``: the
    spread in excess of the pure chi-square floor ``trigamma(df/2)`` pins
    ``d0`` through a trigamma inversion, and the centre pins ``s0`` after
    removing the chi-square and inverse-chi-square log biases.  When the
    observed spread is at or below the floor, ``d0`` is infinite and every
    value shrinks completely to the common centre (the geometric mean, so
    identical inputs are a fixed point); that regime warns, it is not an
    error.

    Returns
    -------
    (ndarray, float, float)
        Shrunken standard deviations, ``d0``, and ``s0``.
    """
    s = np.asarray(s_raw, dtype=float)
    if s.ndim != 1 or s.size < 30:
        raise InsufficientDataError(
            f"variance shrinkage needs at least 30 units, got {s.size}"
        )
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise InvalidInputError("standard deviations must be positive and finite")
    if df < 1:
        raise InvalidInputError("df must be a positive integer")
    e = np.log(s**2)
    spread = float(np.var(e, ddof=1))
    floor = float(special.polygamma(1, df / 2.0))
    gap = spread - floor
    if gap <= 0.0:
        warnings.warn(
            "log-variance spread is at the pure chi-square floor; "
            "shrinking every variance fully to the common centre",
            TotalShrinkageWarning,
            stacklevel=2,
        )
        s0 = float(np.exp(np.mean(e) / 2.0))
        return np.full_like(s, s0), math.inf, s0
    d0 = 2.0 * inverse_trigamma(gap)
    log_s02 = (
        float(np.mean(e))
        - (float(special.digamma(df / 2.0)) - math.log(df / 2.0))
        - (math.log(d0 / 2.0) - float(special.digamma(d0 / 2.0)))
    )
    s02 = math.exp(log_s02)
    s_shrunk = np.sqrt((df * s**2 + d0 * s02) / (df + d0))
    return s_shrunk, d0, math.sqrt(s02)


def _t_to_z(t: np.ndarray, df: float) -> np.ndarray:
    """Probit transform of the t reference distribution, kept finite."""
    if math.isinf(df):
        return np.clip(t, -_Z_CLIP, _Z_CLIP)
    z = np.empty_like(t)
    pos = t >= 0
    tiny = np.nextafter(0.0, 1.0)
    z[pos] = stats.norm.isf(np.maximum(stats.t.sf(t[pos], df), tiny))
    z[~pos] = stats.norm.ppf(np.maximum(stats.t.cdf(t[~pos], df), tiny))
    return np.clip(z, -_Z_CLIP, _Z_CLIP)


def moderated_pipeline(matrix: ExpressionMatrix):
    """Raw matrix to moderated z-scores and a panel ready for selection.

    Composes :func:`two_sample_scores`, :func:`shrink_variances` on the
    retained rows, the moderated t with ``df + d0`` degrees of freedom, and
    the probit map ``z = Phi^-1(F_t(t))``.  Flagged rows are excluded from
    the fit and from the panel and reported on the result.

    Returns
    -------
    (ZPanel, ModeratedScores)
    """
    scores = two_sample_scores(matrix)
    good = ~scores.flagged
    if not np.any(good):
        raise InsufficientDataError("every row was flagged; nothing to moderate")
    ids = [scores.ids[i] for i in np.flatnonzero(good)]
    s_raw = scores.s_raw[good]
    diff = scores.mean_diff[good]
    raw_t = scores.t[good]
    s_shrunk, d0, s0 = shrink_variances(s_raw, scores.df)
    moderated_t = diff / s_shrunk
    z = _t_to_z(moderated_t, scores.df + d0)
    panel = ZPanel(ids=ids, z=z)
    mod = ModeratedScores(
        ids=ids,
        raw_t=raw_t,
        df=scores.df,
        s_raw=s_raw,
        s_shrunk=s_shrunk,
        moderated_t=moderated_t,
        z=z,
        d0=d0,
        s0=s0,
        flagged_ids=[scores.ids[i] for i in np.flatnonzero(scores.flagged)],
    )
    return panel, mod
