"""The two-groups generative model and its densities.

Each unit carries a latent effect ``mu`` that is exactly zero with prior
probability ``p0`` and is drawn from a mixing distribution ``g`` otherwise.
The observed score is ``z ~ Normal(mu, V)`` with per-unit sampling variance
``V``.  The null component generalises Normal(0, 1) to an empirical null
Normal(delta0, sigma0^2); with per-unit variances the null scale multiplies
``V``, so the theoretical null for a unit with variance ``V`` is
Normal(0, V), matching the generative draw ``z ~ Normal(0, V)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidInputError

__all__ = [
    "NullComponent",
    "MixingDistribution",
    "TwoGroupsModel",
    "ZPanel",
]

_WEIGHT_TOL = 1e-12


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite, got {arr!r}")
    return arr


def _check_variances(v: np.ndarray) -> None:
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise InvalidInputError("sampling variances must be positive and finite")


@dataclass(frozen=True)
class NullComponent:
    """Location/scale of the null distribution of z-scores.

    ``kind`` is "theoretical" for the fixed Normal(0, 1) null and
    "empirical" when (delta0, sigma0) were estimated from the centre of the
    data.  For a unit with sampling variance ``V`` the null density is
    Normal(delta0, sigma0^2 * V).
    """

    delta0: float = 0.0
    sigma0: float = 1.0
    kind: str = "theoretical"

    def __post_init__(self) -> None:
        if self.sigma0 <= 0 or not np.isfinite(self.sigma0) or not np.isfinite(self.delta0):
            raise InvalidInputError("null component needs finite delta0 and sigma0 > 0")
        if self.kind not in ("theoretical", "empirical"):
            raise InvalidInputError(f"unknown null kind {self.kind!r}")
        if self.kind == "theoretical" and (self.delta0 != 0.0 or self.sigma0 != 1.0):
            raise InvalidInputError("theoretical null must have delta0=0, sigma0=1")

    @classmethod
    def theoretical(cls) -> "NullComponent":
        return cls()

    @classmethod
    def empirical(cls, delta0: float, sigma0: float) -> "NullComponent":
        return cls(delta0=float(delta0), sigma0=float(sigma0), kind="empirical")

    def scale(self, sampling_variance) -> np.ndarray:
        return self.sigma0 * np.sqrt(sampling_variance)

    def density(self, z, sampling_variance):
        return stats.norm.pdf(z, self.delta0, self.scale(sampling_variance))

    def cdf(self, z, sampling_variance):
        return stats.norm.cdf(z, self.delta0, self.scale(sampling_variance))

    def sf(self, z, sampling_variance):
        return stats.norm.sf(z, self.delta0, self.scale(sampling_variance))


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """Distribution of the non-null effects.

    Either a normal with given ``mean`` and ``variance`` or a discrete
    distribution on strictly increasing ``support`` points with nonnegative
    ``weights`` summing to one.
    """

    kind: str
    mean: float | None = None
    variance: float | None = None
    support: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind == "normal":
            if self.mean is None or self.variance is None:
                raise InvalidInputError("normal mixing needs mean and variance")
            if not np.isfinite(self.mean) or not (self.variance > 0) or not np.isfinite(self.variance):
                raise InvalidInputError("normal mixing needs finite mean and variance > 0")
        elif self.kind == "grid":
            u = _as_float_array(self.support, "support")
            w = _as_float_array(self.weights, "weights")
            if u.ndim != 1 or u.size == 0 or u.shape != w.shape:
                raise InvalidInputError("grid mixing needs matching 1-d support and weights")
            if u.size > 1 and np.any(np.diff(u) <= 0):
                raise InvalidInputError("grid support points must be strictly increasing")
            if np.any(w < 0) or abs(w.sum() - 1.0) > _WEIGHT_TOL:
                raise InvalidInputError("grid weights must be nonnegative and sum to one")
            object.__setattr__(self, "support", u)
            object.__setattr__(self, "weights", w)
        else:
            raise InvalidInputError(f"unknown mixing kind {self.kind!r}")

    @classmethod
    def normal(cls, mean: float, variance: float) -> "MixingDistribution":
        return cls(kind="normal", mean=float(mean), variance=float(variance))

    @classmethod
    def grid(cls, support, weights) -> "MixingDistribution":
        return cls(kind="grid", support=support, weights=weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixingDistribution) or self.kind != other.kind:
            return NotImplemented if not isinstance(other, MixingDistribution) else False
        if self.kind == "normal":
            return self.mean == other.mean and self.variance == other.variance
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.weights, other.weights
        )

    @property
    def effect_mean(self) -> float:
        if self.kind == "normal":
            return self.mean
        return float(np.sum(self.weights * self.support))

    @property
    def effect_variance(self) -> float:
        if self.kind == "normal":
            return self.variance
        m = self.effect_mean
        return float(np.sum(self.weights * (self.support - m) ** 2))

    def max_effect(self) -> float:
        """Upper end of the effect range, used to size integration domains."""
        if self.kind == "normal":
            return self.mean + 10.0 * np.sqrt(self.variance)
        return float(self.support[-1])

    def min_effect(self) -> float:
        if self.kind == "normal":
            return self.mean - 10.0 * np.sqrt(self.variance)
        return float(self.support[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.mean, np.sqrt(self.variance), size)
        idx = rng.choice(self.support.size, size=size, p=self.weights)
        return self.support[idx]


@dataclass(frozen=True, eq=False)
class TwoGroupsModel:
    """Full generative specification: ``f(z) = p0 f0(z) + (1 - p0) f1(z)``."""

    p0: float
    null: NullComponent = field(default_factory=NullComponent.theoretical)
    g: MixingDistribution = field(default_factory=lambda: MixingDistribution.normal(2.5, 0.5))
    default_sampling_variance: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p0 <= 1.0):
            raise InvalidInputError(f"p0 must lie in [0, 1], got {self.p0}")
        if not (self.default_sampling_variance > 0) or not np.isfinite(
            self.default_sampling_variance
        ):
            raise InvalidInputError("default_sampling_variance must be positive and finite")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TwoGroupsModel):
            return NotImplemented
        return (
            self.p0 == other.p0
            and self.null == other.null
            and self.g == other.g
            and self.default_sampling_variance == other.default_sampling_variance
        )

    @property
    def p1(self) -> float:
        return 1.0 - self.p0

    # -- density / tail evaluations ------------------------------------------------

    def _resolve_v(self, sampling_variance):
        v = self.default_sampling_variance if sampling_variance is None else sampling_variance
        v = np.asarray(v, dtype=float)
        _check_variances(v)
        return v

    def null_density(self, z, sampling_variance=None):
        z = _as_float_array(z, "z")
        return self.null.density(z, self._resolve_v(sampling_variance))

    def alt_marginal_density(self, z, sampling_variance=None):
        """Marginal density of z under the alternative.

        ``f1(z) = int phi_V(z - mu) g(dmu)``: for normal g this is the
        Normal(mean, V + variance) density, for grid g the weighted sum of
        Normal(u_j, V) densities.
        """
        z = _as_float_array(z, "z")
        v = self._resolve_v(sampling_variance)
        if self.g.kind == "normal":
            return stats.norm.pdf(z, self.g.mean, np.sqrt(v + self.g.variance))
        zz, vv = np.broadcast_arrays(z, v)
        dens = stats.norm.pdf(
            zz[..., None], self.g.support, np.sqrt(vv)[..., None]
        )
        out = dens @ self.g.weights
        return out if out.shape else float(out)

    def marginal_density(self, z, sampling_variance=None):
        """``f(z) = p0 f0(z) + (1 - p0) f1(z)``."""
        z = _as_float_array(z, "z")
        v = self._resolve_v(sampling_variance)
        return self.p0 * self.null.density(z, v) + self.p1 * self.alt_marginal_density(z, v)

    def alt_upper_tail(self, z, sampling_variance=None):
        z = _as_float_array(z, "z")
        v = self._resolve_v(sampling_variance)
        if self.g.kind == "normal":
            return stats.norm.sf(z, self.g.mean, np.sqrt(v + self.g.variance))
        zz, vv = np.broadcast_arrays(z, v)
        tails = stats.norm.sf(zz[..., None], self.g.support, np.sqrt(vv)[..., None])
        out = tails @ self.g.weights
        return out if out.shape else float(out)

    def marginal_upper_tail(self, z, sampling_variance=None):
        """``P(Z >= z) = p0 (1 - F0(z)) + (1 - p0)(1 - F1(z))``."""
        z = _as_float_array(z, "z")
        v = self._resolve_v(sampling_variance)
        return self.p0 * self.null.sf(z, v) + self.p1 * self.alt_upper_tail(z, v)

    def marginal_cdf(self, z, sampling_variance=None):
        z = _as_float_array(z, "z")
        v = self._resolve_v(sampling_variance)
        if self.g.kind == "normal":
            alt = stats.norm.cdf(z, self.g.mean, np.sqrt(v + self.g.variance))
        else:
            zz, vv = np.broadcast_arrays(z, v)
            alt = stats.norm.cdf(zz[..., None], self.g.support, np.sqrt(vv)[..., None]) @ self.g.weights
        return self.p0 * self.null.cdf(z, v) + self.p1 * alt

    # -- sampling ------------------------------------------------------------------

    def sample_panel(self, n_units: int, sampling_variances=None, seed=None, id_prefix: str = "u"):
        """Draw a panel of ``n_units`` observations plus their true effects.

        Each unit independently is null (``mu = 0``, ``z ~ f0``) with
        probability ``p0``, otherwise ``mu ~ g`` and ``z ~ Normal(mu, V)``.
        Deterministic for a fixed ``seed``.

        Returns
        -------
        (ZPanel, ndarray)
            The sampled panel and the vector of true effects ``mu``.
        """
        if n_units < 1:
            raise InvalidInputError("n_units must be at least 1")
        explicit_v = sampling_variances is not None
        v = self._resolve_v(sampling_variances)
        v = np.broadcast_to(v, (n_units,)).astype(float)
        rng = np.random.default_rng(seed)
        is_null = rng.random(n_units) < self.p0
        effects = self.g.sample(rng, n_units)
        mu = np.where(is_null, 0.0, effects)
        eps = rng.standard_normal(n_units)
        z = np.where(
            is_null,
            self.null.delta0 + self.null.sigma0 * np.sqrt(v) * eps,
            mu + np.sqrt(v) * eps,
        )
        width = max(6, len(str(n_units)))
        ids = [f"{id_prefix}{i:0{width}d}" for i in range(n_units)]
        panel = ZPanel(ids=ids, z=z, sampling_variance=v.copy() if explicit_v else None)
        return panel, mu


@dataclass(eq=False)
class ZPanel:
    """Observed units: ids, z-values, and optional per-unit variance or size.

    A unit may carry an explicit ``sampling_variance`` or a ``sample_size``
    (never both); sizes convert to variances as ``sigma2 / n_i`` using the
    panel-level per-observation variance ``sigma2``.  Absent entries are NaN.
    """

    ids: list
    z: np.ndarray
    sampling_variance: np.ndarray | None = None
    sample_size: np.ndarray | None = None
    sigma2: float = 1.0

    def __post_init__(self) -> None:
        self.ids = [str(i) for i in self.ids]
        self.z = _as_float_array(self.z, "z")
        if self.z.ndim != 1 or len(self.ids) != self.z.size:
            raise InvalidInputError("ids and z must be 1-d and of equal length")
        if len(set(self.ids)) != len(self.ids):
            raise InvalidInputError("panel ids must be unique")
        if self.sigma2 <= 0 or not np.isfinite(self.sigma2):
            raise InvalidInputError("sigma2 must be positive and finite")
        for name in ("sampling_variance", "sample_size"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != self.z.shape:
                    raise InvalidInputError(f"{name} must match the shape of z")
                present = ~np.isnan(arr)
                if np.any(arr[present] <= 0) or not np.all(np.isfinite(arr[present])):
                    raise InvalidInputError(f"{name} entries must be positive and finite")
                setattr(self, name, arr)
        if self.sampling_variance is not None and self.sample_size is not None:
            both = ~np.isnan(self.sampling_variance) & ~np.isnan(self.sample_size)
            if np.any(both):
                raise InvalidInputError(
                    "a unit may carry a sampling variance or a sample size, not both"
                )

    def __len__(self) -> int:
        return self.z.size

    def resolve_variances(self, default: float = 1.0) -> np.ndarray:
        """Per-unit sampling variances with ``default`` filling absent entries."""
        if default <= 0 or not np.isfinite(default):
            raise InvalidInputError("default sampling variance must be positive")
        out = np.full(self.z.shape, float(default))
        if self.sample_size is not None:
            present = ~np.isnan(self.sample_size)
            out[present] = self.sigma2 / self.sample_size[present]
        if self.sampling_variance is not None:
            present = ~np.isnan(self.sampling_variance)
            out[present] = self.sampling_variance[present]
        return out

    def subset(self, mask: np.ndarray) -> "ZPanel":
        idx = np.flatnonzero(mask)
        return ZPanel(
            ids=[self.ids[i] for i in idx],
            z=self.z[idx],
            sampling_variance=None if self.sampling_variance is None else self.sampling_variance[idx],
            sample_size=None if self.sample_size is None else self.sample_size[idx],
            sigma2=self.sigma2,
        )
