"""Posterior inference for single units and ranked selection reports.

Given the two-groups model, the posterior of the effect ``mu`` given an
observed ``z`` is an atom at zero with mass ``fdr(z)`` plus a continuous
part ``h(mu | z) = phi_V(z - mu) g(mu) / f1(z)`` carrying the rest.  The
exceedance probability ``P(mu > k | z)`` is the proposed criterion for
flagging effects that are large, not merely non-null.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .errors import DegeneratePointError, InvalidInputError
from .model import TwoGroupsModel, ZPanel

__all__ = [
    "local_fdr",
    "tail_fdr",
    "HPosterior",
    "h_posterior",
    "exceedance_probability",
    "two_tailed_exceedance",
    "PosteriorSummary",
    "SelectionReport",
    "select_and_rank",
    "KSensitivity",
    "ranking_k_sensitivity",
    "expected_exceedance_in_tail",
]


def _scalarize(x):
    arr = np.asarray(x)
    return float(arr) if arr.shape == () else arr


def local_fdr(model: TwoGroupsModel, z, sampling_variance=None):
    """Posterior probability of the null given the exact observed value.

    ``fdr(z) = p0 f0(z) / (p0 f0(z) + (1 - p0) f1(z))``.

    Raises
    ------
    DegeneratePointError
        If the marginal density underflows to zero at some requested z.
    """
    f0 = model.null_density(z, sampling_variance)
    f1 = model.alt_marginal_density(z, sampling_variance)
    num = model.p0 * f0
    den = num + model.p1 * f1
    bad = np.asarray(den) == 0.0
    if np.any(bad):
        zbad = np.asarray(z, dtype=float)[bad] if np.ndim(z) else z
        raise DegeneratePointError(f"marginal density underflows at z = {zbad}")
    return _scalarize(num / den)


def tail_fdr(model: TwoGroupsModel, z, sampling_variance=None, tail: str = "upper"):
    """Tail-area false discovery rate ``P(H0 | Z in tail beyond z)``.

    lower: ``p0 F0(z) / F(z)``;  upper: ``p0 (1 - F0(z)) / (1 - F(z))``.
    """
    if tail not in ("upper", "lower"):
        raise InvalidInputError(f"tail must be 'upper' or 'lower', got {tail!r}")
    v = sampling_variance
    if tail == "upper":
        num = model.p0 * model.null.sf(np.asarray(z, float), model._resolve_v(v))
        den = model.marginal_upper_tail(z, v)
    else:
        num = model.p0 * model.null.cdf(np.asarray(z, float), model._resolve_v(v))
        den = model.marginal_cdf(z, v)
    bad = np.asarray(den) == 0.0
    if np.any(bad):
        raise DegeneratePointError(f"{tail} tail mass underflows at z = {z}")
    return _scalarize(num / den)


@dataclass(frozen=True)
class HPosterior:
    """Conditional posterior of the effect given z under the alternative.

    For normal g this is the conjugate Normal((v z + m V)/(v + V), v V/(v + V));
    for grid g it is the reweighted set of support atoms.
    """

    kind: str
    mean: float
    variance: float
    support: np.ndarray | None = None
    probs: np.ndarray | None = None

    def pdf(self, mu):
        """Density (normal g) or point mass at matching atoms (grid g)."""
        if self.kind == "normal":
            return stats.norm.pdf(mu, self.mean, np.sqrt(self.variance))
        mu = np.asarray(mu, dtype=float)
        out = np.zeros(mu.shape if mu.shape else (1,))
        for u, p in zip(self.support, self.probs):
            out[np.isclose(mu, u, rtol=0.0, atol=1e-12)] += p
        return _scalarize(out if mu.shape else out[0])

    def survival(self, k):
        """``P(mu > k)`` under the continuous part, strict at atoms."""
        if self.kind == "normal":
            return _scalarize(stats.norm.sf(k, self.mean, np.sqrt(self.variance)))
        k = np.asarray(k, dtype=float)
        out = np.where(
            k[..., None] < self.support, self.probs, 0.0
        ).sum(axis=-1)
        return _scalarize(out)


def h_posterior(model: TwoGroupsModel, z, sampling_variance=None) -> HPosterior:
    """Posterior of ``mu`` given ``z`` conditional on the alternative."""
    z = float(z)
    v = float(np.asarray(model._resolve_v(sampling_variance)))
    if model.g.kind == "normal":
        gv, gm = model.g.variance, model.g.mean
        mean = (gv * z + gm * v) / (gv + v)
        var = gv * v / (gv + v)
        return HPosterior(kind="normal", mean=mean, variance=var)
    kern = stats.norm.pdf(z, model.g.support, np.sqrt(v))
    raw = model.g.weights * kern
    total = raw.sum()
    if total == 0.0:
        raise DegeneratePointError(f"alternative marginal underflows at z = {z}")
    probs = raw / total
    mean = float(np.sum(probs * model.g.support))
    var = float(np.sum(probs * (model.g.support - mean) ** 2))
    return HPosterior(kind="grid", mean=mean, variance=var, support=model.g.support, probs=probs)


def _h_survival(model: TwoGroupsModel, z: np.ndarray, v: np.ndarray, k: float) -> np.ndarray:
    """Vectorised ``P_h(mu > k | z)`` over arrays of z and V."""
    if model.g.kind == "normal":
        gv, gm = model.g.variance, model.g.mean
        mean = (gv * z + gm * v) / (gv + v)
        sd = np.sqrt(gv * v / (gv + v))
        return stats.norm.sf(k, mean, sd)
    kern = stats.norm.pdf(z[:, None], model.g.support, np.sqrt(v)[:, None])
    raw = kern * model.g.weights
    total = raw.sum(axis=1)
    if np.any(total == 0.0):
        raise DegeneratePointError(
            f"alternative marginal underflows at z = {z[total == 0.0]}"
        )
    mask = (model.g.support > k).astype(float)
    return (raw @ mask) / total


def exceedance_probability(model: TwoGroupsModel, z, sampling_variance=None, k: float = 0.0):
    """``P(mu > k | z)`` under the atom-plus-continuous posterior.

    The atom at zero contributes only when ``k < 0``; at ``k = 0`` the
    inequality is strict, so the atom is excluded.
    """
    if not np.isfinite(k):
        raise InvalidInputError("threshold k must be finite")
    zarr = np.atleast_1d(np.asarray(z, dtype=float))
    varr = np.broadcast_to(model._resolve_v(sampling_variance), zarr.shape).astype(float)
    fdr = np.atleast_1d(local_fdr(model, zarr, varr))
    tail_h = _h_survival(model, zarr, varr, float(k))
    out = (1.0 - fdr) * tail_h
    if k < 0:
        out = out + fdr
    return _scalarize(out if np.ndim(z) else out[0])


def two_tailed_exceedance(model: TwoGroupsModel, z, sampling_variance=None, k: float = 0.0):
    """``P(|mu| > k | z)`` for ``k >= 0``; the atom never counts."""
    if k < 0 or not np.isfinite(k):
        raise InvalidInputError("two-tailed threshold k must be nonnegative and finite")
    zarr = np.atleast_1d(np.asarray(z, dtype=float))
    varr = np.broadcast_to(model._resolve_v(sampling_variance), zarr.shape).astype(float)
    fdr = np.atleast_1d(local_fdr(model, zarr, varr))
    upper = _h_survival(model, zarr, varr, float(k))
    # P_h(mu < -k) = 1 - P_h(mu > -k) - P_h(mu == -k); atoms at -k stay out
    lower = 1.0 - _h_survival(model, zarr, varr, -float(k))
    if model.g.kind == "grid":
        at = np.isclose(model.g.support, -float(k), rtol=0.0, atol=1e-12)
        if np.any(at):
            kern = stats.norm.pdf(zarr[:, None], model.g.support, np.sqrt(varr)[:, None])
            raw = kern * model.g.weights
            lower = lower - (raw @ at.astype(float)) / raw.sum(axis=1)
    out = (1.0 - fdr) * (upper + lower)
    return _scalarize(out if np.ndim(z) else out[0])


@dataclass
class PosteriorSummary:
    """Per-unit posterior quantities produced by selection."""

    id: str
    z: float
    sampling_variance: float
    fdr: float
    exceedance: dict
    h_mean: float
    h_variance: float


@dataclass
class SelectionReport:
    """Units selected beyond a z threshold, ranked by exceedance probability."""

    threshold_z: float
    k: float
    tail: str
    selected: list
    averaged_exceedance: float | None
    expected_true_exceedances: float | None
    averaged_by_k: dict = field(default_factory=dict)

    @property
    def n_selected(self) -> int:
        return len(self.selected)


def select_and_rank(
    model: TwoGroupsModel,
    panel: ZPanel,
    threshold_z: float,
    k: float,
    tail: str = "upper",
    extra_ks: tuple = (),
) -> SelectionReport:
    """Select units beyond a z threshold and rank them by ``P(mu > k | z)``.

    Selection keeps ``z >= threshold_z`` for the upper tail (mirrored for
    the lower tail).  Each unit is evaluated at its own sampling variance.
    Ties in exceedance break by |z| descending, then id ascending, so the
    output is invariant to the panel's input order.  An empty selection is
    reported with absent averages, not an error.
    """
    if len(panel) == 0:
        raise InvalidInputError("panel must be nonempty")
    if tail not in ("upper", "lower"):
        raise InvalidInputError(f"tail must be 'upper' or 'lower', got {tail!r}")
    ks = [float(k)] + [float(x) for x in extra_ks]
    if len(set(ks)) != len(ks):
        raise InvalidInputError("exceedance thresholds must be distinct")
    mask = panel.z >= threshold_z if tail == "upper" else panel.z <= threshold_z
    idx = np.flatnonzero(mask)
    v_all = panel.resolve_variances(model.default_sampling_variance)
    z_sel, v_sel = panel.z[idx], v_all[idx]
    summaries: list[PosteriorSummary] = []
    if idx.size:
        fdr = np.atleast_1d(local_fdr(model, z_sel, v_sel))
        exceed = {kk: np.atleast_1d(exceedance_probability(model, z_sel, v_sel, kk)) for kk in ks}
        for j, i in enumerate(idx):
            hp = h_posterior(model, float(z_sel[j]), float(v_sel[j]))
            summaries.append(
                PosteriorSummary(
                    id=panel.ids[i],
                    z=float(z_sel[j]),
                    sampling_variance=float(v_sel[j]),
                    fdr=float(fdr[j]),
                    exceedance={kk: float(exceed[kk][j]) for kk in ks},
                    h_mean=hp.mean,
                    h_variance=hp.variance,
                )
            )
        summaries.sort(key=lambda s: (-s.exceedance[ks[0]], -abs(s.z), s.id))
    if summaries:
        averaged_by_k = {kk: float(np.mean([s.exceedance[kk] for s in summaries])) for kk in ks}
        avg = averaged_by_k[ks[0]]
        expected = avg * len(summaries)
    else:
        averaged_by_k = {kk: None for kk in ks}
        avg = expected = None
    return SelectionReport(
        threshold_z=float(threshold_z),
        k=ks[0],
        tail=tail,
        selected=summaries,
        averaged_exceedance=avg,
        expected_true_exceedances=expected,
        averaged_by_k=averaged_by_k,
    )


@dataclass
class KSensitivity:
    """Exceedance rankings at several thresholds k, plus a swap indicator."""

    ks: list
    rankings: dict
    any_order_change: bool


def ranking_k_sensitivity(model: TwoGroupsModel, panel: ZPanel, ks) -> KSensitivity:
    """Rank the whole panel by exceedance for each k and flag order swaps.

    ``any_order_change`` is true when some pair of units has strictly
    opposite exceedance order under two different thresholds.  With equal
    sampling variances the ordering coincides with the z ordering for every
    k, so no swaps occur; unequal variances can reorder units as k moves.
    """
    ks = [float(x) for x in ks]
    if len(set(ks)) < 2:
        raise InvalidInputError("need at least two distinct k values")
    v = panel.resolve_variances(model.default_sampling_variance)
    E = np.column_stack(
        [np.atleast_1d(exceedance_probability(model, panel.z, v, kk)) for kk in ks]
    )
    rankings = {}
    for col, kk in enumerate(ks):
        order = sorted(
            range(len(panel)),
            key=lambda i: (-E[i, col], -abs(panel.z[i]), panel.ids[i]),
        )
        rankings[kk] = [panel.ids[i] for i in order]
    changed = False
    for a in range(len(ks)):
        for b in range(a + 1, len(ks)):
            da = E[:, None, a] - E[None, :, a]
            db = E[:, None, b] - E[None, :, b]
            if np.any((da > 0) & (db < 0)):
                changed = True
                break
        if changed:
            break
    return KSensitivity(ks=ks, rankings=rankings, any_order_change=changed)


def expected_exceedance_in_tail(
    model: TwoGroupsModel,
    threshold_z: float,
    k: float,
    sampling_variance=None,
    tail: str = "upper",
) -> float:
    """Population average ``E[P(mu > k | Z) | Z beyond threshold]`` by quadrature.

    This is the deterministic limit of a selection report's averaged
    exceedance as the panel grows.
    """
    v = float(np.asarray(model._resolve_v(sampling_variance)))
    span = 12.0 * np.sqrt(v + max(model.g.effect_variance, 1.0))
    if tail == "upper":
        lo, hi = threshold_z, model.g.max_effect() + span
        denom = float(model.marginal_upper_tail(threshold_z, v))
    elif tail == "lower":
        lo, hi = min(model.g.min_effect(), model.null.delta0) - span, threshold_z
        denom = float(model.marginal_cdf(threshold_z, v))
    else:
        raise InvalidInputError(f"tail must be 'upper' or 'lower', got {tail!r}")
    if denom == 0.0:
        raise DegeneratePointError(f"tail mass underflows beyond z = {threshold_z}")

    def integrand(z):
        return exceedance_probability(model, z, v, k) * model.marginal_density(z, v)

    num, _ = integrate.quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200)
    return num / denom
