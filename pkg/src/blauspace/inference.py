"""Case-control posterior inference for logistic connectivity kernels.

Observed dyads come from an ego-centred design: nominated ties are the
positive examples and randomly drawn respondent pairs supply the
negatives.  Because positives are heavily over-represented relative to
the population rate of ties, each dyad's likelihood is corrected by the
prevalence ratio between sample and population; for a logistic kernel
the correction acts as a known offset on the bias, leaving the other
coefficients comparable to full-network inference.

All likelihood code works on the log-odds scale with softplus/logsumexp
so values stay finite far into the tails.  Survey designs are supported
through a weighted pseudo-likelihood (ego weight on positives, ego times
alter weight on negatives) with winsorized weights.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import minimize as _scipy_minimize

from .errors import ConvergenceError, NumericError
from .kernel import KernelParams

__all__ = [
    "DyadRecord",
    "DyadDataset",
    "PrevalenceRatio",
    "PriorSpec",
    "PosteriorResult",
    "OptimizationResult",
    "as_dataset",
    "observed_log_likelihood",
    "log_likelihood_gradient",
    "log_prior",
    "log_prior_gradient",
    "log_posterior",
    "log_posterior_gradient",
    "estimate_prevalence_ratio",
    "winsorize_weights",
    "finite_difference_hessian",
    "maximize",
    "fit_map",
    "random_walk_metropolis",
    "sample_posterior",
    "laplace_sd",
    "posterior_median",
]


@dataclass(frozen=True)
class DyadRecord:
    """One observed dyad: who was paired with whom, whether the tie exists,
    the design weights, and the standardized feature vector."""

    ego_id: str
    alter_id: str
    edge: int
    ego_weight: float = 1.0
    alter_weight: float = 1.0
    features: np.ndarray = None

    def __post_init__(self) -> None:
        if self.edge not in (0, 1):
            raise ValueError("edge indicator must be 0 or 1")
        for name in ("ego_weight", "alter_weight"):
            w = getattr(self, name)
            if not (np.isfinite(w) and w > 0):
                raise ValueError(f"{name} must be positive and finite")
        f = np.asarray(self.features, dtype=float)
        if f.ndim != 1 or f.size == 0 or not np.all(np.isfinite(f)):
            raise ValueError("features must be a finite vector")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "edge", int(self.edge))


class DyadDataset:
    """Columnar view of a record list, the shape the numerics work on."""

    def __init__(
        self,
        features: np.ndarray,
        edges: np.ndarray,
        ego_weights: np.ndarray | None = None,
        alter_weights: np.ndarray | None = None,
        ego_ids: Sequence[str] | None = None,
        alter_ids: Sequence[str] | None = None,
    ):
        self.features = np.ascontiguousarray(features, dtype=float)
        if self.features.ndim != 2 or self.features.size == 0:
            raise ValueError("features must be a non-empty (m, p) array")
        m = self.features.shape[0]
        self.edges = np.asarray(edges, dtype=float)
        if self.edges.shape != (m,) or not np.all(np.isin(self.edges, (0.0, 1.0))):
            raise ValueError("edges must be a {0,1} vector matching features")
        self.ego_weights = (
            np.ones(m) if ego_weights is None else np.asarray(ego_weights, dtype=float)
        )
        self.alter_weights = (
            np.ones(m) if alter_weights is None else np.asarray(alter_weights, dtype=float)
        )
        for w in (self.ego_weights, self.alter_weights):
            if w.shape != (m,) or np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be positive, finite, and match length")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        self.ego_ids = tuple(ego_ids) if ego_ids is not None else tuple(str(i) for i in range(m))
        self.alter_ids = (
            tuple(alter_ids) if alter_ids is not None else tuple(str(i) for i in range(m))
        )

    @classmethod
    def from_records(cls, records: Sequence[DyadRecord]) -> "DyadDataset":
        if not records:
            raise ValueError("no records")
        p = records[0].features.size
        if any(r.features.size != p for r in records):
            raise ValueError("records disagree on feature dimension")
        return cls(
            features=np.array([r.features for r in records]),
            edges=np.array([r.edge for r in records], dtype=float),
            ego_weights=np.array([r.ego_weight for r in records]),
            alter_weights=np.array([r.alter_weight for r in records]),
            ego_ids=[r.ego_id for r in records],
            alter_ids=[r.alter_id for r in records],
        )

    def to_records(self) -> list[DyadRecord]:
        return [
            DyadRecord(
                ego_id=self.ego_ids[i],
                alter_id=self.alter_ids[i],
                edge=int(self.edges[i]),
                ego_weight=float(self.ego_weights[i]),
                alter_weight=float(self.alter_weights[i]),
                features=self.features[i],
            )
            for i in range(len(self))
        ]

    def case_weights(self) -> np.ndarray:
        """Pseudo-likelihood weight per record: the ego weight for a
        positive, ego times alter weight for a negative."""
        return self.ego_weights * (self.edges + (1.0 - self.edges) * self.alter_weights)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


def as_dataset(records) -> DyadDataset:
    if isinstance(records, DyadDataset):
        return records
    return DyadDataset.from_records(list(records))


@dataclass(frozen=True)
class PrevalenceRatio:
    """Sample-to-population prevalence ratios for non-ties (r0) and ties (r1)."""

    r0: float
    r1: float

    def __post_init__(self) -> None:
        for name in ("r0", "r1"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")

    @classmethod
    def representative(cls) -> "PrevalenceRatio":
        """No correction: the sample prevalence matches the population."""
        return cls(1.0, 1.0)


def estimate_prevalence_ratio(
    records, population_size: int, mean_degree: float
) -> PrevalenceRatio:
    """Prevalence ratios from the sample and known population tie rates.

    The population prevalence is mean degree over (n - 1); the sample
    prevalence is the case-weighted fraction of positive records.
    """
    ds = as_dataset(records)
    if population_size < 2:
        raise ValueError("population size must be at least 2")
    pi = mean_degree / (population_size - 1)
    if not (0.0 < pi < 1.0):
        raise ValueError("population prevalence must lie strictly inside (0, 1)")
    c = ds.case_weights()
    s = float((c * ds.edges).sum() / c.sum())
    if s <= 0.0 or s >= 1.0:
        raise ValueError("records are all in one state; prevalence ratio undefined")
    return PrevalenceRatio(r0=(1.0 - s) / (1.0 - pi), r1=s / pi)


def winsorize_weights(weights, percentile: float = 95.0) -> np.ndarray:
    """Clip weights above the given percentile to it, then rescale so the
    sum equals the count (linear-interpolation percentile definition)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")
    cap = np.percentile(w, percentile)
    w = np.minimum(w, cap)
    return w * (w.size / w.sum())


@dataclass(frozen=True)
class PriorSpec:
    """Independent Cauchy priors, one scale per coefficient."""

    scales: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.scales, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("prior scales must be positive and finite")
        object.__setattr__(self, "scales", s)

    @classmethod
    def default(cls, p: int, scale: float = 2.5, bias_scale: float = 10.0) -> "PriorSpec":
        """Weakly informative default: scale 2.5 per coefficient, widened
        to 10 for the bias (first position), which tie density alone can
        push far from zero."""
        scales = np.full(p, scale)
        scales[0] = bias_scale
        return cls(scales)

    @property
    def p(self) -> int:
        return self.scales.size


def log_prior(theta, prior: PriorSpec) -> float:
    """Unnormalized log density of the independent Cauchy priors."""
    theta = np.asarray(theta, dtype=float)
    return float(-np.log1p((theta / prior.scales) ** 2).sum())


def log_prior_gradient(theta, prior: PriorSpec) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return -2.0 * theta / (prior.scales**2 + theta**2)


def _theta_of(params) -> np.ndarray:
    return params.theta if isinstance(params, KernelParams) else np.asarray(params, float)


def _per_dyad_terms(xi: np.ndarray, edges: np.ndarray, r: PrevalenceRatio):
    """Stable per-dyad pieces shared by the likelihood and its gradient.

    softplus(xi) = -log(1 - rho) and softplus(-xi) = -log(rho), so every
    quantity is assembled from the two softplus values and one two-term
    logsumexp without ever forming rho - 1 or log of a tiny difference.
    """
    sp_pos = np.logaddexp(0.0, xi)
    sp_neg = np.logaddexp(0.0, -xi)
    log_r0, log_r1 = np.log(r.r0), np.log(r.r1)
    correction = np.logaddexp(log_r0 - sp_pos, log_r1 - sp_neg)
    base = -edges * sp_neg - (1.0 - edges) * sp_pos
    return sp_pos, sp_neg, correction, base


def observed_log_likelihood(
    records,
    params,
    r: PrevalenceRatio | None = None,
    *,
    weighted: bool = False,
    include_prevalence_constant: bool = True,
) -> float:
    """Log-likelihood of the observed dyads under case-control sampling.

    Each record contributes its tie log-probability minus the log of the
    prevalence-weighted normalizer; ``include_prevalence_constant`` keeps
    the parameter-free ``edge * log r1 + (1 - edge) * log r0`` term, so the
    value is the exact log-probability of the observed state (and is
    invariant to rescaling both ratios by a common factor).  Dropping the
    constant shifts the value but never the location of the optimum.

    With ``weighted`` the pseudo-likelihood case weights multiply each
    record's contribution.
    """
    ds = as_dataset(records)
    r = r if r is not None else PrevalenceRatio.representative()
    theta = _theta_of(params)
    if theta.size != ds.p:
        raise ValueError("theta dimension does not match records")
    xi = ds.features @ theta
    _, _, correction, base = _per_dyad_terms(xi, ds.edges, r)
    terms = base - correction
    if include_prevalence_constant:
        terms = terms + ds.edges * np.log(r.r1) + (1.0 - ds.edges) * np.log(r.r0)
    if weighted:
        terms = terms * ds.case_weights()
    return float(terms.sum())


def log_likelihood_gradient(
    records,
    params,
    r: PrevalenceRatio | None = None,
    *,
    weighted: bool = False,
) -> np.ndarray:
    """Gradient of :func:`observed_log_likelihood` with respect to theta
    (the prevalence constant carries no parameter and drops out)."""
    ds = as_dataset(records)
    r = r if r is not None else PrevalenceRatio.representative()
    theta = _theta_of(params)
    xi = ds.features @ theta
    sp_pos, sp_neg, correction, _ = _per_dyad_terms(xi, ds.edges, r)
    rho = np.exp(-sp_neg)
    # d/dxi of the correction term: (r1 - r0) rho (1 - rho) / normalizer
    q = np.exp(-(sp_pos + sp_neg) - correction)
    factor = ds.edges - rho - (r.r1 - r.r0) * q
    if weighted:
        factor = factor * ds.case_weights()
    return ds.features.T @ factor


def log_posterior(
    records, theta, r: PrevalenceRatio, prior: PriorSpec, *, weighted: bool = False
) -> float:
    """Log-posterior up to a constant: the constant-free likelihood plus
    the Cauchy log-prior."""
    return (
        observed_log_likelihood(
            records, theta, r, weighted=weighted, include_prevalence_constant=False
        )
        + log_prior(_theta_of(theta), prior)
    )


def log_posterior_gradient(
    records, theta, r: PrevalenceRatio, prior: PriorSpec, *, weighted: bool = False
) -> np.ndarray:
    return log_likelihood_gradient(records, theta, r, weighted=weighted) + log_prior_gradient(
        _theta_of(theta), prior
    )


def finite_difference_hessian(grad_fn, x, rel_step: float = 1e-4) -> np.ndarray:
    """Symmetrized central finite differences of an analytic gradient.

    Steps are relative to each coordinate's magnitude with a floor of the
    raw step, so tiny and large coefficients are differenced sensibly.
    """
    x = np.asarray(x, dtype=float)
    p = x.size
    H = np.empty((p, p))
    for k in range(p):
        h = rel_step * max(1.0, abs(x[k]))
        e = np.zeros(p)
        e[k] = h
        H[:, k] = (np.asarray(grad_fn(x + e)) - np.asarray(grad_fn(x - e))) / (2.0 * h)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class OptimizationResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int


def maximize(fun, grad, x0, *, gtol: float = 1e-6, max_iter: int = 10_000) -> OptimizationResult:
    """Maximize a smooth function with a quasi-second-order line search.

    BFGS does the heavy lifting; if its line search stalls short of the
    gradient tolerance (infinity norm), damped Newton steps on the
    analytic gradient finish the job within the same iteration budget.
    Raises :class:`ConvergenceError` carrying the last iterate when the
    tolerance cannot be met.
    """
    x0 = np.asarray(x0, dtype=float)
    res = _scipy_minimize(
        lambda x: -fun(x),
        x0,
        jac=lambda x: -np.asarray(grad(x)),
        method="BFGS",
        options={"gtol": gtol, "maxiter": max_iter, "norm": np.inf},
    )
    x = np.asarray(res.x, dtype=float)
    iterations = int(res.nit)
    g = np.asarray(grad(x), dtype=float)
    grad_norm = float(np.max(np.abs(g)))
    while grad_norm > gtol and iterations < max_iter:
        H = -finite_difference_hessian(grad, x)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        fx = fun(x)
        t, moved = 1.0, False
        for _ in range(30):
            cand = x + t * step
            fc = fun(cand)
            g_cand = np.asarray(grad(cand), dtype=float)
            gn_cand = float(np.max(np.abs(g_cand)))
            # close to the optimum the value test drowns in rounding;
            # a halved gradient norm is the sharper progress signal, with
            # a slack bound so genuine descent is still rejected
            ok = fc > fx or (
                gn_cand < 0.5 * grad_norm and fc >= fx - 1e-8 * (1.0 + abs(fx))
            )
            if ok:
                x, g, grad_norm, moved = cand, g_cand, gn_cand, True
                break
            t *= 0.5
        if not moved:
            break
        iterations += 1
    if grad_norm > gtol:
        raise ConvergenceError(
            f"optimizer stopped at gradient norm {grad_norm:.3e} "
            f"after {iterations} iterations (tolerance {gtol:.1e})",
            last_iterate=x,
            grad_norm=grad_norm,
        )
    return OptimizationResult(
        x=x, value=float(fun(x)), grad_norm=grad_norm, iterations=iterations
    )


@dataclass(frozen=True)
class PosteriorResult:
    """Outcome of posterior inference: MAP, curvature, and optionally the
    sampled chain.  ``hessian`` is the negative log-posterior curvature at
    the MAP, i.e. the Laplace precision matrix."""

    map_estimate: KernelParams
    hessian: np.ndarray
    r: PrevalenceRatio
    prior: PriorSpec
    iterations: int
    grad_norm: float
    log_posterior: float
    chain: np.ndarray | None = None
    acceptance_rate: float | None = None


def fit_map(
    records,
    r: PrevalenceRatio | None = None,
    prior: PriorSpec | None = None,
    init=None,
    *,
    weighted: bool = False,
    gtol: float = 1e-6,
    max_iter: int = 10_000,
    hessian_step: float = 1e-4,
    names: tuple[str, ...] | None = None,
) -> PosteriorResult:
    """Posterior mode and curvature for a case-control dyad dataset."""
    ds = as_dataset(records)
    r = r if r is not None else PrevalenceRatio.representative()
    prior = prior if prior is not None else PriorSpec.default(ds.p)
    if prior.p != ds.p:
        raise ValueError("prior dimension does not match records")
    x0 = np.zeros(ds.p) if init is None else np.asarray(init, dtype=float)
    if x0.shape != (ds.p,):
        raise ValueError("init dimension does not match records")

    def f(theta):
        return log_posterior(ds, theta, r, prior, weighted=weighted)

    def g(theta):
        return log_posterior_gradient(ds, theta, r, prior, weighted=weighted)

    opt = maximize(f, g, x0, gtol=gtol, max_iter=max_iter)
    hessian = -finite_difference_hessian(g, opt.x, rel_step=hessian_step)
    return PosteriorResult(
        map_estimate=KernelParams(opt.x, names),
        hessian=hessian,
        r=r,
        prior=prior,
        iterations=opt.iterations,
        grad_norm=opt.grad_norm,
        log_posterior=opt.value,
    )


def random_walk_metropolis(
    log_density,
    init,
    proposal_cov: np.ndarray,
    draws: int,
    burn_in: int = 0,
    seed=None,
) -> tuple[np.ndarray, float]:
    """Gaussian random-walk Metropolis chain of ``draws`` states after burn-in.

    A proposal is accepted when log(u) < the log-density difference, which
    for a symmetric proposal is exactly the min(1, density ratio) rule.
    The proposal is fixed throughout, so the kept chain targets the
    density exactly.  Returns the chain and the overall acceptance rate.
    """
    if draws < 1 or burn_in < 0:
        raise ValueError("draws must be positive and burn_in non-negative")
    x = np.asarray(init, dtype=float).copy()
    p = x.size
    cov = np.asarray(proposal_cov, dtype=float)
    if cov.shape != (p, p):
        raise ValueError("proposal covariance shape does not match init")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NumericError("proposal covariance is not positive definite") from None
    rng = np.random.default_rng(seed)
    lp = float(log_density(x))
    if not np.isfinite(lp):
        raise NumericError("log density is not finite at the chain start")
    chain = np.empty((draws, p))
    accepted = 0
    total = draws + burn_in
    for t in range(total):
        proposal = x + chol @ rng.standard_normal(p)
        lp_prop = float(log_density(proposal))
        if np.isfinite(lp_prop) and np.log(rng.uniform()) < lp_prop - lp:
            x, lp = proposal, lp_prop
            accepted += 1
        if t >= burn_in:
            chain[t - burn_in] = x
    return chain, accepted / total


def sample_posterior(
    records,
    r: PrevalenceRatio | None = None,
    prior: PriorSpec | None = None,
    init=None,
    *,
    proposal_cov: np.ndarray | None = None,
    draws: int = 5000,
    burn_in: int = 1000,
    seed=None,
    weighted: bool = False,
    gtol: float = 1e-6,
    max_iter: int = 10_000,
    names: tuple[str, ...] | None = None,
) -> PosteriorResult:
    """Two-step posterior sampling: find the MAP, then run a random-walk
    Metropolis chain started there with proposal covariance
    (2.38^2 / p) * inverse Hessian (override via ``proposal_cov``)."""
    fit = fit_map(
        records,
        r,
        prior,
        init,
        weighted=weighted,
        gtol=gtol,
        max_iter=max_iter,
        names=names,
    )
    p = fit.map_estimate.p
    if proposal_cov is None:
        proposal_cov = (2.38**2 / p) * _invert_pd(fit.hessian)

    def target(theta):
        return log_posterior(records, theta, fit.r, fit.prior, weighted=weighted)

    chain, rate = random_walk_metropolis(
        target, fit.map_estimate.theta, proposal_cov, draws, burn_in, seed
    )
    return replace(fit, chain=chain, acceptance_rate=rate)


def _invert_pd(matrix: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(matrix)
    except (LinAlgError, ValueError):
        raise NumericError("matrix is not positive definite") from None
    return cho_solve(factor, np.eye(matrix.shape[0]))


def laplace_sd(hessian: np.ndarray) -> np.ndarray:
    """Posterior standard deviations under the Laplace (Gaussian) view:
    square roots of the diagonal of the inverse curvature."""
    return np.sqrt(np.diag(_invert_pd(np.asarray(hessian, dtype=float))))


def posterior_median(chain: np.ndarray) -> np.ndarray:
    """Per-parameter posterior median of a chain."""
    chain = np.asarray(chain, dtype=float)
    if chain.ndim != 2 or chain.size == 0:
        raise ValueError("chain must be a non-empty (draws, p) array")
    return np.median(chain, axis=0)
