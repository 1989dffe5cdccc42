"""Separation, isolation, and strain statistics for connectivity kernels.

Separation measures how much lower the tie log-odds of a dyad (x, y) are
than the within-type baseline (y, y).  For a linear kernel it splits
exactly into one contribution per feature, with the bias contributing
zero, so the statistics are invariant to overall edge density.
Averaging separation over a population gives per-individual isolation;
averaging isolation gives the population strain.

The two-block closed forms (``sbm_*``) mirror the same quantities for
the stochastic block model and anchor the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .features import (
    AttributeTable,
    FeatureConfig,
    Standardization,
    apply_standardization,
    evaluate_features,
    evaluate_pair_features,
)
from .kernel import KernelParams, SbmSpec, logit

__all__ = [
    "SeparationMatrix",
    "StrainReport",
    "ViolationReport",
    "social_separation",
    "separation_contributions",
    "separation_matrix",
    "social_isolation",
    "isolation_profile",
    "social_strain",
    "sbm_separation",
    "sbm_isolation",
    "sbm_strain",
    "dispersion_index",
    "check_semimetric",
    "check_metric",
    "triple_sampler",
]


def _theta_of(params) -> np.ndarray:
    return params.theta if isinstance(params, KernelParams) else np.asarray(params, float)


def _exclusion_mask(config: FeatureConfig, exclude) -> np.ndarray:
    """1.0 per kept feature, 0.0 per excluded one; bias cannot be excluded."""
    keep = np.ones(config.p)
    for name in exclude or ():
        k = config.index(name)
        if config.entries[k].kind == "bias":
            raise ConfigError("the bias feature cannot be excluded")
        keep[k] = 0.0
    return keep


def _delta_features(
    raw: np.ndarray, config: FeatureConfig, std: Standardization
) -> np.ndarray:
    """Standardized f(y, y) - f(x, y) per dyad.

    Self-pair features are constant across individuals, and the
    standardization mean cancels in the difference, so only the scale
    enters.  The bias column is exactly zero, which is what makes every
    statistic downstream invariant to shifts of the bias coefficient.
    """
    return (config.self_values() - raw) / std.scale


def separation_contributions(
    x, y, params, config: FeatureConfig, std: Standardization
) -> np.ndarray:
    """Per-feature separation contributions for the dyad (x, y)."""
    raw = evaluate_features(x, y, config)
    return _theta_of(params) * _delta_features(raw, config, std)


def social_separation(
    x, y, params, config: FeatureConfig, std: Standardization
) -> float:
    """Separation of the dyad (x, y): the log-odds gap between the
    within-type baseline (y, y) and the observed pairing (x, y)."""
    return float(separation_contributions(x, y, params, config, std).sum())


@dataclass(frozen=True)
class SeparationMatrix:
    """Pairwise separation over a population: symmetric with zero diagonal."""

    ids: tuple[str, ...]
    values: np.ndarray
    theta_source: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        n = len(self.ids)
        if values.shape != (n, n):
            raise ValueError("separation matrix shape does not match ids")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))

    @property
    def n(self) -> int:
        return len(self.ids)


def _pair_separations(
    table: AttributeTable,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    theta: np.ndarray,
    config: FeatureConfig,
    std: Standardization,
    keep: np.ndarray,
) -> np.ndarray:
    raw = evaluate_pair_features(table, i_idx, j_idx, config)
    return _delta_features(raw, config, std) @ (theta * keep)


def separation_matrix(
    table: AttributeTable,
    params,
    config: FeatureConfig,
    std: Standardization,
    *,
    exclude=(),
    theta_source: str = "",
    block: int = 256,
) -> SeparationMatrix:
    """Full pairwise separation matrix, computed in row blocks."""
    theta = _theta_of(params)
    keep = _exclusion_mask(config, exclude)
    n = table.n
    values = np.zeros((n, n))
    all_idx = np.arange(n)
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        ii = np.repeat(rows, n)
        jj = np.tile(all_idx, rows.size)
        values[rows] = _pair_separations(
            table, ii, jj, theta, config, std, keep
        ).reshape(rows.size, n)
    np.fill_diagonal(values, 0.0)
    return SeparationMatrix(table.ids, values, theta_source=theta_source)


def social_isolation(
    x, population: AttributeTable, params, config: FeatureConfig, std: Standardization
) -> float:
    """Average separation of x from a population.

    ``x`` may be an id of a population member (its own row is then left
    out of the average, and weights renormalize over the rest) or an
    attribute-row mapping for an individual outside the table.  The
    average uses the table's weights when present.
    """
    theta = _theta_of(params)
    keep = np.ones(config.p)
    n = population.n
    j_idx = np.arange(n)
    if isinstance(x, str) or (not isinstance(x, dict) and x in population):
        i = population.index(x)
        j_idx = j_idx[j_idx != i]
        i_idx = np.full(j_idx.size, i)
        seps = _pair_separations(population, i_idx, j_idx, theta, config, std, keep)
    else:
        raw = np.array(
            [evaluate_features(x, population.row(int(j)), config) for j in j_idx]
        )
        seps = _delta_features(raw, config, std) @ theta
    w = population.weights
    if w is None:
        return float(seps.mean())
    w = w[j_idx]
    return float((seps * w).sum() / w.sum())


def isolation_profile(
    table: AttributeTable,
    params,
    config: FeatureConfig,
    std: Standardization,
    *,
    exclude=(),
    block: int = 256,
) -> np.ndarray:
    """Isolation of every table member within the table's own population,
    self-pairs excluded, weighted by the table's weights when present."""
    theta = _theta_of(params)
    keep = _exclusion_mask(config, exclude)
    n = table.n
    if n < 2:
        raise ValueError("isolation needs at least 2 individuals")
    w = table.weights if table.weights is not None else np.ones(n)
    out = np.empty(n)
    all_idx = np.arange(n)
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        ii = np.repeat(rows, n)
        jj = np.tile(all_idx, rows.size)
        seps = _pair_separations(table, ii, jj, theta, config, std, keep)
        seps = seps.reshape(rows.size, n)
        for r, i in enumerate(rows):
            mask = all_idx != i
            wm = w[mask]
            out[i] = (seps[r, mask] * wm).sum() / wm.sum()
    return out


@dataclass(frozen=True)
class StrainReport:
    """Population strain split into per-feature contributions.

    ``total`` is computed through the full linear form and equals the sum
    of ``contributions`` up to floating-point roundoff.  When a posterior
    chain is supplied, ``lower``/``upper`` bracket each contribution at
    the requested central interval level.
    """

    feature_names: tuple[str, ...]
    contributions: np.ndarray
    total: float
    n_pairs: int
    theta_source: str = ""
    interval_level: float | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    total_interval: tuple[float, float] | None = None


def _strain_pair_indices(
    n: int, weights: np.ndarray | None, max_exact: int, pair_sample: int, seed
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    if n <= max_exact:
        i_idx, j_idx = np.triu_indices(n, k=1)
        if weights is None:
            pw = np.ones(i_idx.size)
        else:
            pw = weights[i_idx] * weights[j_idx]
        return i_idx, j_idx, pw, i_idx.size
    rng = np.random.default_rng(seed)
    i_idx = rng.integers(0, n, size=pair_sample)
    j_idx = rng.integers(0, n - 1, size=pair_sample)
    j_idx = j_idx + (j_idx >= i_idx)  # distinct pairs, uniform over ordered pairs
    if weights is None:
        pw = np.ones(pair_sample)
    else:
        pw = weights[i_idx] * weights[j_idx]
    return i_idx, j_idx, pw, pair_sample


def social_strain(
    table: AttributeTable,
    params,
    config: FeatureConfig,
    std: Standardization,
    *,
    exclude=(),
    chain: np.ndarray | None = None,
    interval_level: float = 0.95,
    quantiles: tuple[float, float] | None = None,
    max_exact: int = 2000,
    pair_sample: int = 200_000,
    seed=None,
    theta_source: str = "",
) -> StrainReport:
    """Population strain with its exact per-feature decomposition.

    All distinct pairs are used up to ``max_exact`` individuals; larger
    populations are estimated from ``pair_sample`` uniformly drawn
    distinct pairs.  Pair weights are products of individual weights when
    the table carries them.
    """
    theta = _theta_of(params)
    keep = _exclusion_mask(config, exclude)
    n = table.n
    if n < 2:
        raise ValueError("strain needs at least 2 individuals")
    i_idx, j_idx, pw, n_pairs = _strain_pair_indices(
        n, table.weights, max_exact, pair_sample, seed
    )
    total_w = pw.sum()
    mean_delta = np.zeros(config.p)
    chunk = 500_000
    acc_total = 0.0
    for start in range(0, i_idx.size, chunk):
        sl = slice(start, start + chunk)
        raw = evaluate_pair_features(table, i_idx[sl], j_idx[sl], config)
        delta = _delta_features(raw, config, std)
        mean_delta += pw[sl] @ delta
        acc_total += float((delta @ (theta * keep)) @ pw[sl])
    mean_delta /= total_w
    contributions = theta * keep * mean_delta
    total = acc_total / total_w

    lower = upper = total_interval = level = None
    if chain is not None:
        chain = np.asarray(chain, dtype=float)
        if chain.ndim != 2 or chain.shape[1] != config.p:
            raise ValueError("chain shape does not match feature config")
        if quantiles is not None:
            lo_q, hi_q = float(quantiles[0]), float(quantiles[1])
            if not (0.0 <= lo_q < hi_q <= 1.0):
                raise ValueError("quantiles must satisfy 0 <= lo < hi <= 1")
            interval_level = hi_q - lo_q
        else:
            if not (0.0 < interval_level < 1.0):
                raise ValueError("interval level must lie in (0, 1)")
            lo_q, hi_q = (1 - interval_level) / 2, (1 + interval_level) / 2
        draws = (chain * keep) * mean_delta  # per-draw contributions
        lower = np.quantile(draws, lo_q, axis=0)
        upper = np.quantile(draws, hi_q, axis=0)
        totals = draws.sum(axis=1)
        total_interval = (float(np.quantile(totals, lo_q)), float(np.quantile(totals, hi_q)))
        level = interval_level

    return StrainReport(
        feature_names=config.names,
        contributions=contributions,
        total=total,
        n_pairs=n_pairs,
        theta_source=theta_source,
        interval_level=level,
        lower=lower,
        upper=upper,
        total_interval=total_interval,
    )


# -- two-block closed forms -------------------------------------------------

def dispersion_index(block_probs) -> float:
    """1 - sum of squared block shares: 0 for one dominant block, rising
    toward 1 as the population spreads over many blocks."""
    p = np.asarray(block_probs, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("block probabilities must be non-negative and sum to 1")
    return float(1.0 - (p * p).sum())


def _sbm_gap(spec: SbmSpec) -> float:
    return float(logit(spec.rho_same) - logit(spec.rho_diff))


def sbm_separation(spec: SbmSpec, x: int, y: int) -> float:
    """Closed-form separation between members of blocks x and y."""
    x, y = spec.check_block(x), spec.check_block(y)
    return 0.0 if x == y else _sbm_gap(spec)


def sbm_isolation(spec: SbmSpec, x: int) -> float:
    """Closed-form isolation of a block-x member: the share of the
    population outside the block times the log-odds gap."""
    x = spec.check_block(x)
    return (1.0 - spec.block_probs[x - 1]) * _sbm_gap(spec)


def sbm_strain(spec: SbmSpec) -> float:
    """Closed-form population strain: dispersion index times the gap."""
    return dispersion_index(spec.block_probs) * _sbm_gap(spec)


# -- distance-property checks ----------------------------------------------

@dataclass(frozen=True)
class ViolationReport:
    """Counts of sampled distance-property violations.

    ``triangle`` is None for semimetric checks, which do not test it.
    """

    trials: int
    tolerance: float
    non_negativity: int
    symmetry: int
    identity: int
    indiscernibility: int
    triangle: int | None = None
    worst_triangle_gap: float = 0.0

    @property
    def violations(self) -> int:
        total = self.non_negativity + self.symmetry + self.identity + self.indiscernibility
        if self.triangle is not None:
            total += self.triangle
        return total

    @property
    def ok(self) -> bool:
        return self.violations == 0


TripleSampler = Callable[[np.random.Generator, int], tuple]


def triple_sampler(table: AttributeTable) -> TripleSampler:
    """Sampler drawing independent row triples from a table, with
    replacement.  Returns (table, ix, iy, iz) index arrays."""

    def sample(rng: np.random.Generator, m: int):
        idx = rng.integers(0, table.n, size=(3, m))
        return table, idx[0], idx[1], idx[2]

    return sample


def _check_properties(
    params,
    config: FeatureConfig,
    std: Standardization,
    sampler: TripleSampler,
    trials: int,
    seed,
    tol: float,
    with_triangle: bool,
    batch_size: int = 20_000,
) -> ViolationReport:
    theta = _theta_of(params)
    keep = np.ones(config.p)
    rng = np.random.default_rng(seed)
    nonneg = sym = ident = indis = tri = 0
    worst = 0.0
    done = 0
    while done < trials:
        m = min(batch_size, trials - done)
        table, ix, iy, iz = sampler(rng, m)
        raw_xy = evaluate_pair_features(table, ix, iy, config)
        delta_xy = _delta_features(raw_xy, config, std)
        phi_xy = delta_xy @ theta
        phi_yx = _pair_separations(table, iy, ix, theta, config, std, keep)
        phi_xx = _pair_separations(table, ix, ix, theta, config, std, keep)
        nonneg += int(np.sum(phi_xy < -tol))
        sym += int(np.sum(np.abs(phi_xy - phi_yx) > tol))
        ident += int(np.sum(np.abs(phi_xx) > tol))
        # indiscernibility: zero separation despite a feature-visible difference
        visible = np.max(np.abs(delta_xy), axis=1) > 1e-6
        indis += int(np.sum((np.abs(phi_xy) <= tol) & visible))
        if with_triangle:
            phi_yz = _pair_separations(table, iy, iz, theta, config, std, keep)
            phi_xz = _pair_separations(table, ix, iz, theta, config, std, keep)
            gap = phi_xz - (phi_xy + phi_yz)
            tri += int(np.sum(gap > tol))
            if gap.size:
                worst = max(worst, float(gap.max()))
        done += m
    return ViolationReport(
        trials=trials,
        tolerance=tol,
        non_negativity=nonneg,
        symmetry=sym,
        identity=ident,
        indiscernibility=indis,
        triangle=tri if with_triangle else None,
        worst_triangle_gap=worst if with_triangle else 0.0,
    )


def check_semimetric(
    params,
    config: FeatureConfig,
    std: Standardization,
    sampler: TripleSampler,
    trials: int,
    *,
    seed=0,
    tol: float = 1e-9,
) -> ViolationReport:
    """Sample dyads and report violations of non-negativity, symmetry,
    identity, and indiscernibility of the separation."""
    if trials < 1:
        raise ValueError("trials must be positive")
    return _check_properties(params, config, std, sampler, trials, seed, tol, False)


def check_metric(
    params,
    config: FeatureConfig,
    std: Standardization,
    sampler: TripleSampler,
    trials: int,
    *,
    seed=0,
    tol: float = 1e-9,
) -> ViolationReport:
    """Semimetric checks plus the triangle inequality over sampled triples.

    Every non-bias feature must declare affine-metric metadata (it is
    ``a * d + b`` for a metric ``d`` with ``a > 0``); the check refuses to
    run otherwise, since the triangle inequality has no reason to hold
    and a clean sample would prove nothing.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    for e in config.entries:
        if e.kind != "bias" and e.affine is None:
            raise ConfigError(
                f"feature {e.name!r} declares no affine metric metadata; "
                "the triangle check requires it"
            )
    return _check_properties(params, config, std, sampler, trials, seed, tol, True)
