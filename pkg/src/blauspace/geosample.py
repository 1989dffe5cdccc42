"""Population-weighted sampling of locations from polygonal regions.

A region is one or more polygon rings with a population weight.  Drawing
a location picks a region proportional to population, a ring
proportional to area, then rejection-samples uniformly inside the ring
from its bounding box.  Rings are treated as disjoint parts of a
multi-polygon; containment uses the even-odd rule.

The text format is one region per line::

    region_id population x,y x,y x,y [; x,y x,y x,y ...]

with ``#`` starting a comment and semicolons separating rings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError

__all__ = [
    "PolygonRegion",
    "GeoSample",
    "parse_regions",
    "format_regions",
    "sample_locations",
    "sample_location",
    "sample_control_distance_levels",
    "DEFAULT_DISTANCE_BINS",
]

DEFAULT_DISTANCE_BINS = (1.0, 5.0, 50.0)


def _ring_area(ring: np.ndarray) -> float:
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _points_in_ring(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorized over points."""
    x = points[:, 0]
    y = points[:, 1]
    inside = np.zeros(points.shape[0], dtype=bool)
    n = ring.shape[0]
    j = n - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            xi, yi = ring[i]
            xj, yj = ring[j]
            straddles = (yi > y) != (yj > y)
            cross_x = (xj - xi) * (y - yi) / (yj - yi) + xi
            inside ^= straddles & (x < cross_x)
            j = i
    return inside


@dataclass(frozen=True, eq=False)
class PolygonRegion:
    region_id: str
    population: float
    rings: tuple[np.ndarray, ...]
    areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.region_id or any(c.isspace() for c in self.region_id):
            raise ConfigError("region id must be non-empty without whitespace")
        if not (np.isfinite(self.population) and self.population > 0):
            raise ConfigError(f"region {self.region_id!r}: population must be positive")
        if not self.rings:
            raise ConfigError(f"region {self.region_id!r}: needs at least one ring")
        rings = []
        for ring in self.rings:
            ring = np.asarray(ring, dtype=float)
            if ring.ndim != 2 or ring.shape[1] != 2 or ring.shape[0] < 3:
                raise ConfigError(
                    f"region {self.region_id!r}: each ring needs >= 3 x,y vertices"
                )
            if not np.all(np.isfinite(ring)):
                raise ConfigError(
                    f"region {self.region_id!r}: ring has non-finite coordinates"
                )
            rings.append(ring)
        object.__setattr__(self, "rings", tuple(rings))
        areas = np.array([_ring_area(r) for r in rings])
        if areas.sum() <= 0:
            raise ConfigError(f"region {self.region_id!r}: polygon area is zero")
        object.__setattr__(self, "areas", areas)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(pts.shape[0], dtype=bool)
        for ring in self.rings:
            inside ^= _points_in_ring(pts, ring)
        return inside


def _parse_ring(tokens: list[str], line_no: int) -> np.ndarray:
    verts = []
    for tok in tokens:
        parts = tok.split(",")
        if len(parts) != 2:
            raise ConfigError(f"line {line_no}: vertex {tok!r} is not of the form x,y")
        try:
            verts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ConfigError(
                f"line {line_no}: vertex {tok!r} has non-numeric coordinates"
            ) from None
    if len(verts) < 3:
        raise ConfigError(f"line {line_no}: a ring needs at least 3 vertices")
    return np.array(verts)


def parse_regions(text: str) -> list[PolygonRegion]:
    """Parse the region text format; raises ConfigError with the
    offending line number on malformed input."""
    regions: list[PolygonRegion] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        chunks = [c.strip() for c in line.split(";")]
        head = chunks[0].split()
        if len(head) < 5:
            raise ConfigError(
                f"line {line_no}: expected 'id population x,y x,y x,y ...'"
            )
        region_id, pop_token = head[0], head[1]
        try:
            population = float(pop_token)
        except ValueError:
            raise ConfigError(
                f"line {line_no}: population {pop_token!r} is not numeric"
            ) from None
        rings = [_parse_ring(head[2:], line_no)]
        for extra in chunks[1:]:
            if not extra:
                raise ConfigError(f"line {line_no}: empty ring after ';'")
            rings.append(_parse_ring(extra.split(), line_no))
        if region_id in seen:
            raise ConfigError(f"line {line_no}: duplicate region id {region_id!r}")
        seen.add(region_id)
        try:
            regions.append(PolygonRegion(region_id, population, tuple(rings)))
        except ConfigError as exc:
            raise ConfigError(f"line {line_no}: {exc}") from None
    if not regions:
        raise ConfigError("no regions defined")
    return regions


def _fmt(x: float) -> str:
    return repr(float(x))


def format_regions(regions) -> str:
    """Inverse of parse_regions, with round-trip-exact float formatting."""
    lines = []
    for r in regions:
        rings = [
            " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in ring) for ring in r.rings
        ]
        lines.append(f"{r.region_id} {_fmt(r.population)} " + " ; ".join(rings))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GeoSample:
    locations: np.ndarray
    region_ids: tuple[str, ...]
    proposals: int

    @property
    def acceptance_rate(self) -> float:
        return self.locations.shape[0] / self.proposals


def _sample_in_ring(
    ring: np.ndarray, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    lo = ring.min(axis=0)
    hi = ring.max(axis=0)
    span = hi - lo
    if np.any(span <= 0):
        raise NumericError("ring has a degenerate bounding box")
    out = []
    got = 0
    proposals = 0
    empty_rounds = 0
    while got < count:
        m = int(max(64, 2 * (count - got)))
        prop = lo + span * rng.random((m, 2))
        inside = _points_in_ring(prop, ring)
        hits = int(inside.sum())
        if got + hits >= count:
            # stop exactly at the proposal that yields the last needed point,
            # so the proposal count matches a sequential rejection sampler
            need = count - got
            stop = int(np.searchsorted(np.cumsum(inside), need))
            proposals += stop + 1
            out.append(prop[: stop + 1][inside[: stop + 1]])
            got = count
        else:
            proposals += m
            if hits:
                out.append(prop[inside])
                got += hits
                empty_rounds = 0
            else:
                empty_rounds += 1
                if empty_rounds >= 1000:
                    raise NumericError(
                        "rejection sampling is not hitting the polygon; "
                        "check the ring for self-intersection or sliver geometry"
                    )
    return np.vstack(out), proposals


def _sample_in_region(
    region: PolygonRegion, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    if len(region.rings) == 1:
        ring_of = np.zeros(count, dtype=int)
    else:
        ring_of = rng.choice(
            len(region.rings), size=count, p=region.areas / region.areas.sum()
        )
    pts = np.empty((count, 2))
    proposals = 0
    for k in np.unique(ring_of):
        idx = np.where(ring_of == k)[0]
        drawn, used = _sample_in_ring(region.rings[k], idx.size, rng)
        pts[idx] = drawn
        proposals += used
    return pts, proposals


def sample_locations(regions, n: int, seed=None) -> GeoSample:
    """Draw n locations: region proportional to population, uniform over
    the region's polygon.  ``proposals`` counts every bounding-box
    proposal, so the acceptance rate estimates polygon-to-bbox area."""
    regions = list(regions)
    if not regions:
        raise ConfigError("no regions to sample from")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    pops = np.array([r.population for r in regions])
    assign = rng.choice(len(regions), size=n, p=pops / pops.sum())
    locs = np.empty((n, 2))
    proposals = 0
    for r_idx in np.unique(assign):
        idx = np.where(assign == r_idx)[0]
        drawn, used = _sample_in_region(regions[r_idx], idx.size, rng)
        locs[idx] = drawn
        proposals += used
    ids = tuple(regions[i].region_id for i in assign)
    return GeoSample(locations=locs, region_ids=ids, proposals=proposals)


def sample_location(region: PolygonRegion, seed=None) -> np.ndarray:
    """One uniform draw from a single region."""
    rng = np.random.default_rng(seed)
    return _sample_in_region(region, 1, rng)[0][0]


def sample_control_distance_levels(
    regions,
    n_pairs: int,
    bins=DEFAULT_DISTANCE_BINS,
    seed=None,
) -> np.ndarray:
    """Ordinal distance levels between independent location pairs.

    Both endpoints are drawn from the population-weighted region mix;
    the Euclidean distance is mapped to level 1 + (number of thresholds
    strictly below it), matching the ordinal distance feature.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    bins_arr = np.asarray(bins, dtype=float)
    if bins_arr.ndim != 1 or bins_arr.size == 0:
        raise ConfigError("distance thresholds must be a non-empty sequence")
    if np.any(bins_arr <= 0) or np.any(np.diff(bins_arr) <= 0):
        raise ConfigError("distance thresholds must be positive and increasing")
    rng = np.random.default_rng(seed)
    draw = sample_locations(regions, 2 * n_pairs, seed=rng)
    a = draw.locations[:n_pairs]
    b = draw.locations[n_pairs:]
    d = np.sqrt(((a - b) ** 2).sum(axis=1))
    return np.searchsorted(bins_arr, d, side="left") + 1
