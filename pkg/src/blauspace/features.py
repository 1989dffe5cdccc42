"""Attribute schemas, dyadic feature maps, and feature standardization.

Dyad covariates are built from the attribute rows of the two individuals
involved: absolute differences of continuous values, category mismatch
indicators, rank gaps on ordinal scales, half-L1 distance between
mixed-membership vectors, and binned geographic distance.  A feature
configuration lists the maps in order, always starting with a constant
bias feature.

Because raw features live on incomparable scales, they are standardized
against a reference sample of dyads: every non-bias feature is centred
at its sample mean, and non-binary features are additionally divided by
twice their sample standard deviation so a unit coefficient corresponds
to a two-standard-deviation contrast.  Binary features are centred but
not rescaled; the bias is left untouched.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

COLUMN_KINDS = ("continuous", "ordinal", "categorical", "mixed_membership", "location")

FEATURE_KINDS = (
    "bias",
    "abs_diff",
    "mismatch",
    "ordinal_abs_diff",
    "mixed_l1",
    "ordinal_distance",
    "squared_diff",
)

# Kinds whose raw value is an exact metric on attribute rows, so they get
# affine metadata (a=1, b=0) by default.  ordinal_distance is excluded on
# purpose: a binned distance minus its self-level can violate the triangle
# inequality.  squared_diff is a deliberately non-metric diagnostic map.
_DEFAULT_METRIC_KINDS = frozenset({"abs_diff", "mismatch", "ordinal_abs_diff", "mixed_l1"})


@dataclass(frozen=True)
class ColumnSpec:
    """One attribute column: a name plus how to interpret its values."""

    name: str
    kind: str
    levels: tuple[str, ...] | None = None   # ordinal only: labels in rank order
    group: str | None = None                # mixed_membership only

    def __post_init__(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise ConfigError("column name must be a non-empty string")
        if self.kind not in COLUMN_KINDS:
            raise ConfigError(f"unknown column kind {self.kind!r} for column {self.name!r}")
        if self.kind == "ordinal":
            if not self.levels or len(self.levels) < 2:
                raise ConfigError(f"ordinal column {self.name!r} needs at least 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise ConfigError(f"ordinal column {self.name!r} has duplicate levels")
        elif self.levels is not None:
            raise ConfigError(f"column {self.name!r}: levels only apply to ordinal columns")
        if self.kind == "mixed_membership":
            if not self.group:
                raise ConfigError(f"mixed_membership column {self.name!r} needs a group")
        elif self.group is not None:
            raise ConfigError(f"column {self.name!r}: group only applies to mixed_membership")

    def rank_of(self, value) -> float:
        """Rank of an ordinal label (consecutive integers from 0)."""
        if self.kind != "ordinal":
            raise ConfigError(f"column {self.name!r} is not ordinal")
        if isinstance(value, str):
            try:
                return float(self.levels.index(value))
            except ValueError:
                raise ConfigError(
                    f"unknown level {value!r} for ordinal column {self.name!r}"
                ) from None
        return float(value)


_RESERVED_COLUMNS = {"id", "weight"}


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered collection of attribute columns an individual is described by."""

    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise ConfigError("schema needs at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate column names in schema")
        bad = _RESERVED_COLUMNS.intersection(names)
        if bad:
            raise ConfigError(f"column names {sorted(bad)} are reserved")
        for group, members in self.groups().items():
            if len(members) < 2:
                raise ConfigError(
                    f"mixed membership group {group!r} needs at least 2 member columns"
                )

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise ConfigError(f"schema has no column named {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def groups(self) -> dict[str, list[str]]:
        """Membership groups mapped to their member column names, in order."""
        out: dict[str, list[str]] = {}
        for c in self.columns:
            if c.kind == "mixed_membership":
                out.setdefault(c.group, []).append(c.name)
        return out

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)


class AttributeTable:
    """Column store of attribute rows keyed by string ids.

    Continuous columns are float arrays, ordinal columns hold numeric
    ranks, categorical columns hold labels, mixed-membership columns hold
    non-negative shares normalized to sum to one per individual within
    each group, and location columns hold planar (x, y) coordinates.
    Rows with missing values should be dropped before feature evaluation;
    ``complete_mask`` identifies them.
    """

    def __init__(
        self,
        schema: AttributeSchema,
        ids: Sequence[str],
        columns: Mapping[str, np.ndarray],
        weights: np.ndarray | None = None,
    ):
        self.schema = schema
        self.ids = tuple(str(i) for i in ids)
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("duplicate ids in attribute table")
        n = len(self.ids)
        self._columns: dict[str, np.ndarray] = {}
        for spec in schema.columns:
            if spec.name not in columns:
                raise ConfigError(f"attribute table is missing column {spec.name!r}")
            self._columns[spec.name] = _coerce_column(spec, columns[spec.name], n)
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (n,):
                raise ConfigError("weights length does not match number of rows")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ConfigError("weights must be positive and finite")
        self.weights = weights
        self._index = {i: k for k, i in enumerate(self.ids)}
        self._normalize_memberships()

    def _normalize_memberships(self) -> None:
        for group, members in self.schema.groups().items():
            block = np.column_stack([self._columns[m] for m in members])
            if np.any(block < 0):
                raise ConfigError(f"negative membership share in group {group!r}")
            totals = block.sum(axis=1)
            ok = totals > 0
            block[ok] = block[ok] / totals[ok, None]
            block[~ok] = np.nan  # all-zero membership is treated as missing
            for k, m in enumerate(members):
                self._columns[m] = block[:, k]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]

    def index(self, individual_id: str) -> int:
        try:
            return self._index[str(individual_id)]
        except KeyError:
            raise KeyError(f"id {individual_id!r} not in attribute table") from None

    def __contains__(self, individual_id) -> bool:
        return str(individual_id) in self._index

    def row(self, key) -> dict[str, object]:
        """Attribute row as a mapping, addressed by id (str) or position (int)."""
        i = key if isinstance(key, (int, np.integer)) else self.index(key)
        out: dict[str, object] = {}
        for spec in self.schema.columns:
            col = self._columns[spec.name]
            out[spec.name] = np.array(col[i]) if spec.kind == "location" else col[i]
        return out

    def complete_mask(self) -> np.ndarray:
        """Boolean mask of rows with no missing attribute values."""
        ok = np.ones(self.n, dtype=bool)
        for spec in self.schema.columns:
            col = self._columns[spec.name]
            if spec.kind == "categorical":
                ok &= np.array([v is not None and v == v and v != "" for v in col])
            elif spec.kind == "location":
                ok &= np.all(np.isfinite(col), axis=1)
            else:
                ok &= np.isfinite(col)
        return ok

    def subset(self, indices) -> "AttributeTable":
        indices = np.asarray(indices)
        cols = {name: arr[indices] for name, arr in self._columns.items()}
        w = self.weights[indices] if self.weights is not None else None
        return AttributeTable(self.schema, [self.ids[i] for i in indices], cols, w)

    def drop_incomplete(self) -> tuple["AttributeTable", tuple[str, ...]]:
        """Complete-case filter; returns the kept table and the dropped ids."""
        mask = self.complete_mask()
        if mask.all():
            return self, ()
        dropped = tuple(i for i, keep in zip(self.ids, mask) if not keep)
        return self.subset(np.flatnonzero(mask)), dropped


def _coerce_column(spec: ColumnSpec, values, n: int) -> np.ndarray:
    if spec.kind == "location":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (n, 2):
            raise ConfigError(f"location column {spec.name!r} must be n x 2")
        return arr
    if spec.kind == "categorical":
        arr = np.asarray(values, dtype=object)
        if arr.shape != (n,):
            raise ConfigError(f"column {spec.name!r} has wrong length")
        return arr
    if spec.kind == "ordinal":
        vals = list(values)
        if len(vals) != n:
            raise ConfigError(f"column {spec.name!r} has wrong length")
        return np.array([spec.rank_of(v) if v == v and v != "" else np.nan for v in vals])
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"column {spec.name!r} has wrong length")
    return arr


@dataclass(frozen=True)
class FeatureSpec:
    """One dyadic feature map.

    ``affine`` declares the feature as ``a * d + b`` for an underlying
    metric ``d`` with ``a > 0``; the metric checker requires it.  ``binary``
    marks features that are centred but not rescaled by standardization.
    """

    name: str
    kind: str
    column: str | None = None
    group: str | None = None
    bins: tuple[float, ...] | None = None
    binary: bool | None = None
    affine: tuple[float, float] | None = None


_KIND_COLUMN = {
    "abs_diff": "continuous",
    "squared_diff": "continuous",
    "mismatch": "categorical",
    "ordinal_abs_diff": "ordinal",
    "ordinal_distance": "location",
}


@dataclass(frozen=True)
class FeatureConfig:
    """Validated, ordered feature map list bound to an attribute schema.

    The first entry must be the single bias feature.  On construction the
    per-entry ``binary`` and ``affine`` fields are resolved to their
    defaults (mismatch is binary; the exactly-metric kinds get a=1, b=0).
    """

    schema: AttributeSchema
    entries: tuple[FeatureSpec, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.entries:
            raise ConfigError("feature config needs at least one entry")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate feature names")
        n_bias = sum(1 for e in self.entries if e.kind == "bias")
        if n_bias != 1:
            raise ConfigError(f"exactly one bias feature required, found {n_bias}")
        if self.entries[0].kind != "bias":
            raise ConfigError("the bias feature must come first")
        object.__setattr__(
            self, "entries", tuple(self._resolve(e) for e in self.entries)
        )

    def _resolve(self, e: FeatureSpec) -> FeatureSpec:
        if e.kind not in FEATURE_KINDS:
            raise ConfigError(f"unknown feature kind {e.kind!r} for feature {e.name!r}")
        if e.kind == "bias":
            if e.column or e.group or e.bins:
                raise ConfigError("bias feature takes no column, group, or bins")
        elif e.kind == "mixed_l1":
            if not e.group:
                raise ConfigError(f"feature {e.name!r} needs a group")
            if e.group not in self.schema.groups():
                raise ConfigError(f"feature {e.name!r}: no group {e.group!r} in schema")
        else:
            if not e.column:
                raise ConfigError(f"feature {e.name!r} needs a column")
            col = self.schema.column(e.column)
            want = _KIND_COLUMN[e.kind]
            if col.kind != want:
                raise ConfigError(
                    f"feature {e.name!r} ({e.kind}) needs a {want} column, "
                    f"but {e.column!r} is {col.kind}"
                )
        if e.kind == "ordinal_distance":
            if not e.bins:
                raise ConfigError(f"feature {e.name!r} needs distance bins")
            bins = tuple(float(b) for b in e.bins)
            if any(b <= 0 for b in bins) or list(bins) != sorted(set(bins)):
                raise ConfigError(
                    f"feature {e.name!r}: bins must be positive and strictly increasing"
                )
            e = replace(e, bins=bins)
        elif e.bins is not None:
            raise ConfigError(f"feature {e.name!r}: bins only apply to ordinal_distance")

        binary = e.binary if e.binary is not None else (e.kind == "mismatch")
        affine = e.affine
        if affine is None and e.kind in _DEFAULT_METRIC_KINDS:
            affine = (1.0, 0.0)
        if affine is not None:
            a, b = float(affine[0]), float(affine[1])
            if not (a > 0 and np.isfinite(a) and np.isfinite(b)):
                raise ConfigError(f"feature {e.name!r}: affine slope must be positive")
            affine = (a, b)
        return replace(e, binary=binary, affine=affine)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    @property
    def p(self) -> int:
        return len(self.entries)

    @property
    def binary_mask(self) -> np.ndarray:
        return np.array([bool(e.binary) for e in self.entries])

    def self_values(self) -> np.ndarray:
        """Raw feature vector of a self-pair (x, x), constant by construction:
        1 for the bias, the lowest distance level for ordinal_distance, else 0."""
        out = np.zeros(self.p)
        for k, e in enumerate(self.entries):
            if e.kind == "bias":
                out[k] = 1.0
            elif e.kind == "ordinal_distance":
                out[k] = 1.0  # no bin threshold lies strictly below distance 0
        return out

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"no feature named {name!r}") from None


def _membership(row: Mapping, members: Sequence[str], group: str) -> np.ndarray:
    v = np.array([float(row[m]) for m in members])
    if np.any(v < 0):
        raise ConfigError(f"negative membership share in group {group!r}")
    total = v.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError(f"missing or empty membership vector for group {group!r}")
    return v / total


def distance_level(distance, bins: Sequence[float]):
    """Ordinal level of a distance: 1 plus the number of bin thresholds
    strictly below it, so a distance exactly at a threshold falls in the
    lower level."""
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    lev = 1 + np.searchsorted(np.asarray(bins, dtype=float), d, side="left")
    return lev if d.ndim else int(lev)


def evaluate_features(x: Mapping, y: Mapping, config: FeatureConfig) -> np.ndarray:
    """Raw (unstandardized) feature vector for the dyad (x, y).

    ``x`` and ``y`` are attribute rows as mappings from column name to
    value (as produced by :meth:`AttributeTable.row`).  Raises
    ``ValueError`` on missing values: incomplete rows must be dropped
    upstream, never silently imputed.
    """
    groups = config.schema.groups()
    out = np.empty(config.p)
    for k, e in enumerate(config.entries):
        if e.kind == "bias":
            out[k] = 1.0
            continue
        if e.kind == "mixed_l1":
            vx = _membership(x, groups[e.group], e.group)
            vy = _membership(y, groups[e.group], e.group)
            out[k] = 0.5 * np.abs(vx - vy).sum()
            continue
        col = config.schema.column(e.column)
        vx, vy = x[e.column], y[e.column]
        if e.kind == "mismatch":
            if vx is None or vy is None or vx != vx or vy != vy or vx == "" or vy == "":
                raise ValueError(f"missing value for column {e.column!r}")
            out[k] = 0.0 if vx == vy else 1.0
        elif e.kind == "ordinal_distance":
            d = float(np.linalg.norm(np.asarray(vx, float) - np.asarray(vy, float)))
            if not np.isfinite(d):
                raise ValueError(f"missing location for column {e.column!r}")
            out[k] = distance_level(d, e.bins)
        else:
            fx = col.rank_of(vx) if col.kind == "ordinal" else float(vx)
            fy = col.rank_of(vy) if col.kind == "ordinal" else float(vy)
            if not (np.isfinite(fx) and np.isfinite(fy)):
                raise ValueError(f"missing value for column {e.column!r}")
            gap = abs(fx - fy)
            out[k] = gap * gap if e.kind == "squared_diff" else gap
    return out


def evaluate_pair_features(
    table: AttributeTable,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    config: FeatureConfig,
) -> np.ndarray:
    """Vectorized raw features for dyads (table[i], table[j]) per index pair.

    Returns an (m, p) array in config order.  Raises ``ValueError`` if any
    involved value is missing.
    """
    i_idx = np.asarray(i_idx, dtype=np.intp)
    j_idx = np.asarray(j_idx, dtype=np.intp)
    if i_idx.shape != j_idx.shape:
        raise ValueError("index arrays must have equal length")
    m = i_idx.size
    out = np.empty((m, config.p))
    groups = config.schema.groups()
    for k, e in enumerate(config.entries):
        if e.kind == "bias":
            out[:, k] = 1.0
        elif e.kind == "mixed_l1":
            acc = np.zeros(m)
            for name in groups[e.group]:
                col = table.column(name)
                acc += np.abs(col[i_idx] - col[j_idx])
            out[:, k] = 0.5 * acc
        elif e.kind == "mismatch":
            col = table.column(e.column)
            a, b = col[i_idx], col[j_idx]
            missing = [v is None or v != v or v == "" for v in a] if a.dtype == object else None
            if missing is not None and (any(missing) or any(
                v is None or v != v or v == "" for v in b
            )):
                raise ValueError(f"missing value for column {e.column!r}")
            out[:, k] = (a != b).astype(float)
        elif e.kind == "ordinal_distance":
            loc = table.column(e.column)
            d = np.linalg.norm(loc[i_idx] - loc[j_idx], axis=1)
            if not np.all(np.isfinite(d)):
                raise ValueError(f"missing location for column {e.column!r}")
            out[:, k] = distance_level(d, e.bins)
        else:
            col = table.column(e.column)
            gap = np.abs(col[i_idx] - col[j_idx])
            out[:, k] = gap * gap if e.kind == "squared_diff" else gap
    if np.isnan(out).any():
        raise ValueError("missing attribute values in dyad features; drop incomplete rows first")
    return out


@dataclass(frozen=True)
class Standardization:
    """Per-feature affine transform fitted on a reference dyad sample.

    Applied as ``(raw - mean) / scale``.  The bias keeps mean 0 and scale
    1; binary features carry their sample mean with scale 1; everything
    else carries mean and twice the population standard deviation.
    """

    mean: np.ndarray
    scale: np.ndarray
    binary: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        scale = np.asarray(self.scale, dtype=float)
        binary = np.asarray(self.binary, dtype=bool)
        if not (mean.shape == scale.shape == binary.shape) or mean.ndim != 1:
            raise ConfigError("standardization arrays must be equal-length vectors")
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)) or not np.all(np.isfinite(mean)):
            raise ConfigError("standardization scales must be positive and finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "binary", binary)

    @property
    def p(self) -> int:
        return self.mean.size

    @classmethod
    def identity(cls, config: FeatureConfig, source: str = "identity") -> "Standardization":
        return cls(
            mean=np.zeros(config.p),
            scale=np.ones(config.p),
            binary=config.binary_mask,
            source=source,
        )


def fit_standardization(
    features: np.ndarray, config: FeatureConfig, source: str = ""
) -> Standardization:
    """Fit the standardization on raw features of a reference dyad sample.

    Any non-bias feature with zero variance in the sample is an error:
    with no contrast there is nothing to scale and the feature cannot
    inform a fit.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != config.p:
        raise ConfigError("feature sample shape does not match config")
    if features.shape[0] < 2:
        raise ConfigError("standardization needs at least 2 sample dyads")
    mean = features.mean(axis=0)
    sd = features.std(axis=0)  # population denominator
    binary = config.binary_mask
    out_mean = np.zeros(config.p)
    out_scale = np.ones(config.p)
    for k, e in enumerate(config.entries):
        if e.kind == "bias":
            continue
        if sd[k] == 0.0:
            raise ConfigError(
                f"feature {e.name!r} has zero variance in the standardization sample"
            )
        out_mean[k] = mean[k]
        if not binary[k]:
            out_scale[k] = 2.0 * sd[k]
    return Standardization(out_mean, out_scale, binary, source=source)


def apply_standardization(features: np.ndarray, std: Standardization) -> np.ndarray:
    """Standardize raw feature rows: ``(features - mean) / scale``."""
    features = np.asarray(features, dtype=float)
    return (features - std.mean) / std.scale


def standardized_pair_features(
    table: AttributeTable,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    config: FeatureConfig,
    std: Standardization,
) -> np.ndarray:
    return apply_standardization(
        evaluate_pair_features(table, i_idx, j_idx, config), std
    )
