"""Synthetic benchmark networks and coverage validation of the inference.

The benchmark population lives on the unit square with a three-feature
kernel: a bias plus the two coordinate distances, each standardized in
closed form (a uniform coordinate gap has mean 1/3 and standard
deviation 1/(3 sqrt 2), so scaling by twice the sd gives sd 1/2).  At
the default coefficients the expected degree is n * sigma(-7), about 1.8
ties per individual at n = 2000.

Coverage validation repeats the whole pipeline - draw true coefficients,
simulate a network, collect an ego-centred case-control sample, fit -
and checks that the quadratic form of the estimation error under the
fitted curvature is chi-square distributed, i.e. that credible sets
cover at their nominal rate.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .errors import ConvergenceError, NumericError
from .features import (
    AttributeSchema,
    AttributeTable,
    ColumnSpec,
    FeatureConfig,
    FeatureSpec,
    Standardization,
    standardized_pair_features,
)
from .inference import (
    DyadRecord,
    PriorSpec,
    estimate_prevalence_ratio,
    fit_map,
)
from .kernel import KernelParams, sigmoid

__all__ = [
    "SyntheticConfig",
    "CoverageReport",
    "SimulationResult",
    "coordinate_design",
    "position_table",
    "sample_positions",
    "generate_network",
    "sample_ego_dataset",
    "simulate_dataset",
    "chi_squared_statistic",
    "chi2_quantile",
    "run_coverage",
]

DEFAULT_THETA_MEAN = (-7.0, 0.0, 0.0)


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic benchmark.

    ``theta_distribution`` selects how true coefficients are produced per
    replication: ``"normal"`` draws them around ``theta_mean`` with
    spherical sd ``theta_sd``; ``"fixed"`` uses the mean itself.
    """

    n_individuals: int = 2000
    n_egos: int = 100
    negatives_per_positive: float = 3.0
    theta_mean: tuple[float, float, float] = DEFAULT_THETA_MEAN
    theta_sd: float = 1.0
    theta_distribution: str = "normal"

    def __post_init__(self) -> None:
        if self.n_individuals < 2:
            raise ValueError("need at least 2 individuals")
        if not (1 <= self.n_egos <= self.n_individuals):
            raise ValueError("n_egos must lie in 1..n_individuals")
        if len(self.theta_mean) != 3:
            raise ValueError("theta_mean must have 3 entries (bias + 2 distances)")
        if self.negatives_per_positive <= 0:
            raise ValueError("negatives_per_positive must be positive")
        if self.theta_sd < 0:
            raise ValueError("theta_sd must be non-negative")
        if self.theta_distribution not in ("normal", "fixed"):
            raise ValueError("theta_distribution must be 'normal' or 'fixed'")

    def draw_theta(self, rng: np.random.Generator) -> np.ndarray:
        mean = np.asarray(self.theta_mean, dtype=float)
        if self.theta_distribution == "fixed":
            return mean
        return mean + self.theta_sd * rng.standard_normal(mean.size)


def coordinate_design() -> tuple[FeatureConfig, Standardization]:
    """The benchmark feature design: bias plus the two coordinate gaps,
    with the closed-form unit-square standardization (mean 1/3, scale
    twice 1/(3 sqrt 2)) instead of a fitted one."""
    schema = AttributeSchema(
        columns=(
            ColumnSpec(name="x1", kind="continuous"),
            ColumnSpec(name="x2", kind="continuous"),
        )
    )
    config = FeatureConfig(
        schema=schema,
        entries=(
            FeatureSpec(name="bias", kind="bias"),
            FeatureSpec(name="x1_distance", kind="abs_diff", column="x1"),
            FeatureSpec(name="x2_distance", kind="abs_diff", column="x2"),
        ),
    )
    scale = 2.0 / (3.0 * np.sqrt(2.0))
    std = Standardization(
        mean=np.array([0.0, 1.0 / 3.0, 1.0 / 3.0]),
        scale=np.array([1.0, scale, scale]),
        binary=np.array([False, False, False]),
        source="closed form: uniform unit-square coordinate gaps",
    )
    return config, std


def sample_positions(n: int, rng) -> np.ndarray:
    """n positions uniform on the unit square."""
    return np.random.default_rng(rng).random((n, 2))


def position_table(positions: np.ndarray) -> AttributeTable:
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValueError("positions must be an (n, 2) array")
    return AttributeTable(
        coordinate_design()[0].schema,
        ids=[str(i) for i in range(positions.shape[0])],
        columns={"x1": positions[:, 0], "x2": positions[:, 1]},
    )


def generate_network(
    table: AttributeTable,
    params,
    config: FeatureConfig,
    std: Standardization,
    seed=None,
    chunk: int = 500_000,
) -> np.ndarray:
    """Simulate an undirected network: every unordered pair is tied
    independently with its kernel probability.  Returns an (m, 2) array
    of index pairs with i < j; identical seeds give identical edges
    regardless of chunk size.
    """
    theta = params.theta if isinstance(params, KernelParams) else np.asarray(params, float)
    rng = np.random.default_rng(seed)
    n = table.n
    i_all, j_all = np.triu_indices(n, k=1)
    kept = []
    for start in range(0, i_all.size, chunk):
        sl = slice(start, start + chunk)
        f = standardized_pair_features(table, i_all[sl], j_all[sl], config, std)
        prob = sigmoid(f @ theta)
        u = rng.random(prob.size)
        hit = u < prob
        kept.append(np.column_stack((i_all[sl][hit], j_all[sl][hit])))
    if kept:
        return np.vstack(kept).astype(np.int64)
    return np.empty((0, 2), dtype=np.int64)


def sample_ego_dataset(
    edges: np.ndarray,
    table: AttributeTable,
    config: FeatureConfig,
    std: Standardization,
    *,
    n_egos: int,
    negatives_per_positive: float = 3.0,
    seed=None,
) -> list[DyadRecord]:
    """Ego-centred case-control sample from a simulated network.

    Egos are drawn uniformly without replacement; every tie incident to
    an ego becomes a positive record (each dyad once, even when both ends
    are egos).  Negatives are distinct ego pairs drawn without
    replacement at the requested multiple of the positive count, never
    duplicating a positive dyad; when fewer candidate pairs exist than
    requested, all of them are used.
    """
    rng = np.random.default_rng(seed)
    n = table.n
    if not (1 <= n_egos <= n):
        raise ValueError("n_egos must lie in 1..n")
    if negatives_per_positive <= 0:
        raise ValueError("negatives_per_positive must be positive")
    edges = np.asarray(edges)
    egos = rng.choice(n, size=n_egos, replace=False)

    adjacency: dict[int, set[int]] = {int(e): set() for e in egos}
    ego_set = set(int(e) for e in egos)
    for a, b in edges:
        a, b = int(a), int(b)
        if a in ego_set:
            adjacency[a].add(b)
        if b in ego_set:
            adjacency[b].add(a)

    seen: set[tuple[int, int]] = set()
    pos_pairs: list[tuple[int, int]] = []
    for e in egos:
        e = int(e)
        for alter in sorted(adjacency[e]):
            key = (min(e, alter), max(e, alter))
            if key not in seen:
                seen.add(key)
                pos_pairs.append((e, alter))
    if not pos_pairs:
        raise NumericError("degenerate dataset: no ties incident to the sampled egos")

    ai, bi = np.triu_indices(n_egos, k=1)
    cand = [
        (int(egos[a]), int(egos[b]))
        for a, b in zip(ai, bi)
        if (min(int(egos[a]), int(egos[b])), max(int(egos[a]), int(egos[b]))) not in seen
    ]
    target = int(round(negatives_per_positive * len(pos_pairs)))
    if len(cand) > target:
        pick = rng.choice(len(cand), size=target, replace=False)
        neg_pairs = [cand[k] for k in pick]
    else:
        neg_pairs = cand

    pairs = pos_pairs + neg_pairs
    i_idx = np.array([p[0] for p in pairs])
    j_idx = np.array([p[1] for p in pairs])
    feats = standardized_pair_features(table, i_idx, j_idx, config, std)
    labels = [1] * len(pos_pairs) + [0] * len(neg_pairs)
    return [
        DyadRecord(
            ego_id=table.ids[i],
            alter_id=table.ids[j],
            edge=lab,
            features=feats[k],
        )
        for k, (i, j, lab) in enumerate(zip(i_idx, j_idx, labels))
    ]


@dataclass(frozen=True)
class SimulationResult:
    positions: np.ndarray
    table: AttributeTable
    theta: np.ndarray
    edges: np.ndarray
    records: list[DyadRecord]
    config: FeatureConfig
    std: Standardization

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.edges.shape[0] / self.table.n


def simulate_dataset(cfg: SyntheticConfig, seed=None, theta=None) -> SimulationResult:
    """One full benchmark draw: positions, network, and ego dataset.

    ``theta`` overrides the configured truth distribution when given.
    """
    rng = np.random.default_rng(seed)
    config, std = coordinate_design()
    theta = cfg.draw_theta(rng) if theta is None else np.asarray(theta, dtype=float)
    positions = sample_positions(cfg.n_individuals, rng)
    table = position_table(positions)
    params = KernelParams(theta, names=config.names)
    edges = generate_network(table, params, config, std, seed=rng)
    records = sample_ego_dataset(
        edges,
        table,
        config,
        std,
        n_egos=cfg.n_egos,
        negatives_per_positive=cfg.negatives_per_positive,
        seed=rng,
    )
    return SimulationResult(
        positions=positions,
        table=table,
        theta=theta,
        edges=edges,
        records=records,
        config=config,
        std=std,
    )


def chi_squared_statistic(theta_true, theta_hat, hessian) -> float:
    """Quadratic form of the estimation error under the fitted curvature."""
    d = np.asarray(theta_true, dtype=float) - np.asarray(theta_hat, dtype=float)
    H = np.asarray(hessian, dtype=float)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise NumericError("curvature matrix is not positive definite") from None
    return float(d @ H @ d)


def chi2_quantile(alpha: float, df: int) -> float:
    """Chi-square quantile via the inverse regularized incomplete gamma."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if df < 1:
        raise ValueError("df must be a positive integer")
    return float(2.0 * gammaincinv(df / 2.0, alpha))


@dataclass(frozen=True)
class CoverageReport:
    """Empirical coverage of nominal chi-square credible sets.

    ``coverage[k]`` is the fraction of successful replications whose
    error statistic fell inside the nominal ``alphas[k]`` set; ``se`` is
    its binomial standard error.  Failed replications (degenerate data or
    non-convergence) are excluded and counted.
    """

    alphas: np.ndarray
    coverage: np.ndarray
    se: np.ndarray
    n_effective: int
    failures: int
    replications: int


def _coverage_replication(args) -> tuple[float, str]:
    """One replication; returns (chi-square statistic, "") or (nan, reason)."""
    cfg, prior, seed_seq = args
    try:
        rng = np.random.default_rng(seed_seq)
        sim = simulate_dataset(cfg, seed=rng)
        r = estimate_prevalence_ratio(sim.records, cfg.n_individuals, sim.mean_degree)
        fit = fit_map(sim.records, r, prior)
        return (
            chi_squared_statistic(sim.theta, fit.map_estimate.theta, fit.hessian),
            "",
        )
    except (NumericError, ConvergenceError, ValueError) as exc:
        return (float("nan"), f"{type(exc).__name__}: {exc}")


def run_coverage(
    cfg: SyntheticConfig,
    replications: int = 250,
    alphas=None,
    seed=None,
    threads: int = 1,
    prior: PriorSpec | None = None,
) -> CoverageReport:
    """Replicate the simulate-sample-fit pipeline and report empirical
    coverage of the chi-square credible sets on a nominal-level grid.

    Replications get independent seeds spawned from ``seed`` and are
    aggregated in replication order, so results are identical for any
    ``threads`` value.
    """
    if replications < 1:
        raise ValueError("replications must be positive")
    if threads < 1:
        raise ValueError("threads must be positive")
    alphas = (
        np.linspace(0.1, 0.9, 9) if alphas is None else np.asarray(alphas, dtype=float)
    )
    if np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ValueError("alpha grid must lie strictly inside (0, 1)")
    prior = prior if prior is not None else PriorSpec.default(3)
    seeds = np.random.SeedSequence(seed).spawn(replications)
    jobs = [(cfg, prior, s) for s in seeds]
    if threads == 1:
        results = [_coverage_replication(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_coverage_replication, jobs))
    stats = np.array([r[0] for r in results])
    ok = np.isfinite(stats)
    n_eff = int(ok.sum())
    failures = replications - n_eff
    if n_eff == 0:
        raise NumericError("every coverage replication failed")
    quantiles = np.array([chi2_quantile(a, df=len(prior.scales)) for a in alphas])
    coverage = (stats[ok, None] <= quantiles[None, :]).mean(axis=0)
    se = np.sqrt(coverage * (1.0 - coverage) / n_eff)
    return CoverageReport(
        alphas=alphas,
        coverage=coverage,
        se=se,
        n_effective=n_eff,
        failures=failures,
        replications=replications,
    )
