"""Logistic connectivity kernels and the two-block benchmark model.

A connectivity kernel gives the probability that two individuals are
tied, as a function of their dyadic features: the log-odds of a tie is
the linear form theta . f(x, y).  The two-block stochastic block model
is the closed-form benchmark the statistics are checked against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import AttributeTable, FeatureConfig, Standardization, evaluate_features

__all__ = [
    "KernelParams",
    "SbmSpec",
    "logit",
    "sigmoid",
    "log_odds",
    "edge_probability",
    "sbm_edge_probability",
]


def logit(p):
    """log(p / (1 - p)); errors on values outside the open unit interval."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("logit requires probabilities strictly inside (0, 1)")
    out = np.log(p / (1.0 - p))
    return out if out.ndim else float(out)

def sigmoid(x):
    """Standard logistic function, stable at extreme arguments.

    Computed as exp(-softplus(-x)), which underflows gracefully instead
    of overflowing: sigmoid(-750) is a clean 0 rather than a warning.
    """
    x = np.asarray(x, dtype=float)
    out = np.exp(-np.logaddexp(0.0, -x))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelParams:
    """Kernel coefficients, one per feature; the first multiplies the bias.

    ``names``, when given, must match the feature config the parameters
    were fitted against and is used for serialization round-trips.
    """

    theta: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError("theta must be a non-empty vector")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", theta)
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != theta.size:
                raise ValueError("names length does not match theta")
            object.__setattr__(self, "names", names)

    @property
    def p(self) -> int:
        return self.theta.size

    @property
    def is_homophilous(self) -> bool:
        """True when every non-bias coefficient is strictly negative, i.e.
        larger feature distances always mean lower tie odds."""
        return bool(np.all(self.theta[1:] < 0))


def _as_theta(params) -> np.ndarray:
    return params.theta if isinstance(params, KernelParams) else np.asarray(params, float)


def log_odds(x, y, params, config: FeatureConfig, std: Standardization) -> float:
    """Tie log-odds theta . f(x, y) on standardized features."""
    from .features import apply_standardization

    f = apply_standardization(evaluate_features(x, y, config), std)
    return float(f @ _as_theta(params))


def edge_probability(x, y, params, config: FeatureConfig, std: Standardization) -> float:
    """Tie probability sigmoid(theta . f(x, y)) for the dyad (x, y)."""
    return float(sigmoid(log_odds(x, y, params, config, std)))


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model: K blocks with within/between tie rates.

    ``block_probs`` is the population distribution over blocks (sums to
    one); individuals in the same block are tied with rate ``rho_same``,
    across blocks with ``rho_diff``.
    """

    block_probs: tuple[float, ...]
    rho_same: float
    rho_diff: float

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.block_probs)
        if len(probs) < 2:
            raise ValueError("need at least 2 blocks")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("block probabilities must be non-negative and sum to 1")
        for name in ("rho_same", "rho_diff"):
            r = getattr(self, name)
            if not (0.0 < r < 1.0):
                raise ValueError(f"{name} must lie strictly inside (0, 1)")
        object.__setattr__(self, "block_probs", probs)

    @property
    def n_blocks(self) -> int:
        return len(self.block_probs)

    def check_block(self, x: int) -> int:
        if not (1 <= x <= self.n_blocks):
            raise ValueError(f"block index {x} outside 1..{self.n_blocks}")
        return int(x)


def sbm_edge_probability(x: int, y: int, spec: SbmSpec) -> float:
    """Tie probability between members of blocks x and y (1-based labels)."""
    x, y = spec.check_block(x), spec.check_block(y)
    return spec.rho_same if x == y else spec.rho_diff
