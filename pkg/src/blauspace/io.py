"""File formats: delimited tables, the YAML feature config, the binary
separation matrix, and run manifests.

All delimited output goes through ``format_float`` (shortest round-trip
representation) with LF line endings, so identical inputs produce
byte-identical files on every platform.  Manifests carry a timestamp and
are the one deliberate exception.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .features import (
    AttributeSchema,
    AttributeTable,
    ColumnSpec,
    FeatureConfig,
    FeatureSpec,
    Standardization,
)
from .inference import DyadRecord

__all__ = [
    "format_float",
    "load_config",
    "dump_config",
    "read_attribute_table",
    "write_attribute_table",
    "read_nominations",
    "write_nominations",
    "read_records",
    "write_records",
    "read_standardization",
    "write_standardization",
    "read_vector_csv",
    "write_vector_csv",
    "write_rows",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_separation_binary",
    "write_separation_binary",
    "read_chain",
    "write_chain",
    "write_coverage",
    "write_strain",
    "write_isolation",
    "write_points_csv",
    "write_manifest",
    "sha256_file",
]

SEPARATION_MAGIC = b"BLAUSEP1"


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _open_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    return rows[0], rows[1:]


# --- feature configuration ------------------------------------------------

_COLUMN_KEYS = {"name", "kind", "levels", "group"}
_FEATURE_KEYS = {"name", "kind", "column", "group", "bins", "binary", "affine"}
_TOP_KEYS = {"columns", "features", "standardization"}
_STD_KEYS = {"pairs", "seed"}


def load_config(path) -> tuple[FeatureConfig, dict]:
    """Read the YAML feature configuration.

    Returns the validated FeatureConfig plus the optional standardization
    options (``pairs``, ``seed``) as a plain dict.
    """
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("columns", "features"):
        if key not in raw or not isinstance(raw[key], list) or not raw[key]:
            raise ConfigError(f"{path}: {key!r} must be a non-empty list")

    columns = []
    for i, entry in enumerate(raw["columns"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: columns[{i}] must be a mapping")
        unknown = set(entry) - _COLUMN_KEYS
        if unknown:
            raise ConfigError(f"{path}: columns[{i}] unknown keys {sorted(unknown)}")
        try:
            columns.append(
                ColumnSpec(
                    name=entry.get("name", ""),
                    kind=entry.get("kind", ""),
                    levels=tuple(str(v) for v in entry["levels"])
                    if "levels" in entry
                    else None,
                    group=entry.get("group"),
                )
            )
        except (ConfigError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: columns[{i}]: {exc}") from None

    features = []
    for i, entry in enumerate(raw["features"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: features[{i}] must be a mapping")
        unknown = set(entry) - _FEATURE_KEYS
        if unknown:
            raise ConfigError(f"{path}: features[{i}] unknown keys {sorted(unknown)}")
        affine = entry.get("affine")
        if affine is not None:
            if not isinstance(affine, (list, tuple)) or len(affine) != 2:
                raise ConfigError(
                    f"{path}: features[{i}]: affine must be a [slope, offset] pair"
                )
            affine = (float(affine[0]), float(affine[1]))
        try:
            features.append(
                FeatureSpec(
                    name=entry.get("name", ""),
                    kind=entry.get("kind", ""),
                    column=entry.get("column"),
                    group=entry.get("group"),
                    bins=tuple(float(b) for b in entry["bins"])
                    if "bins" in entry
                    else None,
                    binary=entry.get("binary"),
                    affine=affine,
                )
            )
        except (ConfigError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: features[{i}]: {exc}") from None

    try:
        config = FeatureConfig(AttributeSchema(tuple(columns)), tuple(features))
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None

    std_options = raw.get("standardization") or {}
    if not isinstance(std_options, dict):
        raise ConfigError(f"{path}: standardization must be a mapping")
    unknown = set(std_options) - _STD_KEYS
    if unknown:
        raise ConfigError(f"{path}: standardization unknown keys {sorted(unknown)}")
    return config, std_options


def dump_config(path, config: FeatureConfig, std_options: dict | None = None) -> None:
    """Write a feature configuration back out as YAML that load_config
    accepts."""
    columns = []
    for c in config.schema.columns:
        entry: dict = {"name": c.name, "kind": c.kind}
        if c.levels is not None:
            entry["levels"] = list(c.levels)
        if c.group is not None:
            entry["group"] = c.group
        columns.append(entry)
    features = []
    for e in config.entries:
        entry = {"name": e.name, "kind": e.kind}
        if e.column is not None:
            entry["column"] = e.column
        if e.group is not None:
            entry["group"] = e.group
        if e.bins is not None:
            entry["bins"] = [float(b) for b in e.bins]
        if e.binary is not None:
            entry["binary"] = bool(e.binary)
        if e.affine is not None:
            entry["affine"] = [float(e.affine[0]), float(e.affine[1])]
        features.append(entry)
    payload: dict = {"columns": columns, "features": features}
    if std_options:
        payload["standardization"] = dict(std_options)
    with open(path, "w") as fh:
        yaml.safe_dump(payload, fh, sort_keys=False)


# --- attribute tables -----------------------------------------------------


def _float_or_nan(cell: str) -> float:
    if cell == "":
        return float("nan")
    try:
        return float(cell)
    except ValueError:
        raise ConfigError(f"non-numeric value {cell!r}") from None


def read_attribute_table(path, schema: AttributeSchema) -> AttributeTable:
    """Attribute CSV: an ``id`` column, optional ``weight``, one column
    per schema entry; a location column ``name`` is stored as the pair
    ``name_x``, ``name_y``.  Empty cells are missing values."""
    header, rows = _open_rows(path)
    index = {name: k for k, name in enumerate(header)}
    if "id" not in index:
        raise ConfigError(f"{path}: missing required column 'id'")
    for col in schema.columns:
        wanted = (
            (f"{col.name}_x", f"{col.name}_y") if col.kind == "location" else (col.name,)
        )
        for w in wanted:
            if w not in index:
                raise ConfigError(f"{path}: missing column {w!r}")

    ids = [row[index["id"]] for row in rows]
    weights = None
    if "weight" in index:
        try:
            weights = np.array(
                [_float_or_nan(row[index["weight"]]) for row in rows]
            )
        except ConfigError as exc:
            raise ConfigError(f"{path}: weight column: {exc}") from None
        weights = np.where(np.isnan(weights), 1.0, weights)

    columns: dict[str, object] = {}
    for col in schema.columns:
        try:
            if col.kind == "location":
                xs = [_float_or_nan(row[index[f"{col.name}_x"]]) for row in rows]
                ys = [_float_or_nan(row[index[f"{col.name}_y"]]) for row in rows]
                columns[col.name] = np.column_stack((xs, ys))
            elif col.kind in ("continuous", "mixed_membership"):
                columns[col.name] = np.array(
                    [_float_or_nan(row[index[col.name]]) for row in rows]
                )
            else:
                # ordinal and categorical keep raw strings; the table
                # coerces labels and flags the unknown ones
                columns[col.name] = [row[index[col.name]] for row in rows]
        except ConfigError as exc:
            raise ConfigError(f"{path}: column {col.name!r}: {exc}") from None
        except IndexError:
            raise ConfigError(f"{path}: ragged row while reading {col.name!r}") from None
    try:
        return AttributeTable(schema, ids=ids, columns=columns, weights=weights)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_attribute_table(path, table: AttributeTable) -> None:
    header = ["id", "weight"]
    for col in table.schema.columns:
        if col.kind == "location":
            header += [f"{col.name}_x", f"{col.name}_y"]
        else:
            header.append(col.name)
    weights = table.weights if table.weights is not None else np.ones(table.n)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for i, ident in enumerate(table.ids):
            row = [ident, format_float(weights[i])]
            for col in table.schema.columns:
                data = table.column(col.name)
                if col.kind == "location":
                    x, y = data[i]
                    row += [
                        "" if np.isnan(x) else format_float(x),
                        "" if np.isnan(y) else format_float(y),
                    ]
                elif col.kind == "categorical":
                    row.append("" if data[i] is None else str(data[i]))
                elif col.kind == "ordinal":
                    # stored as rank codes; files carry the labels
                    v = data[i]
                    row.append("" if np.isnan(v) else col.levels[int(v)])
                else:
                    v = data[i]
                    row.append("" if np.isnan(v) else format_float(v))
            w.writerow(row)


# --- nominations and edges ------------------------------------------------


def write_nominations(path, pairs) -> None:
    """Two-column id pair CSV; used for both nomination lists and
    simulated edge lists."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["ego_id", "alter_id"])
        for a, b in pairs:
            w.writerow([str(a), str(b)])


def read_nominations(path) -> list[tuple[str, str]]:
    header, rows = _open_rows(path)
    if header != ["ego_id", "alter_id"]:
        raise ConfigError(f"{path}: expected header ego_id,alter_id")
    out = []
    for ln, row in enumerate(rows, start=2):
        if len(row) != 2 or not row[0] or not row[1]:
            raise ConfigError(f"{path}: line {ln}: expected two non-empty ids")
        out.append((row[0], row[1]))
    if not out:
        raise ConfigError(f"{path}: no nominations")
    return out


# --- dyad records ---------------------------------------------------------

_RECORD_FIXED = ["ego_id", "alter_id", "edge", "ego_weight", "alter_weight"]


def write_records(path, records, names) -> None:
    names = list(names)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(_RECORD_FIXED + names)
        for rec in records:
            if rec.features.size != len(names):
                raise ConfigError("record feature length does not match the names")
            w.writerow(
                [
                    rec.ego_id,
                    rec.alter_id,
                    str(rec.edge),
                    format_float(rec.ego_weight),
                    format_float(rec.alter_weight),
                ]
                + [format_float(v) for v in rec.features]
            )


def read_records(path) -> tuple[list[str], list[DyadRecord]]:
    header, rows = _open_rows(path)
    if header[: len(_RECORD_FIXED)] != _RECORD_FIXED:
        raise ConfigError(
            f"{path}: header must start with {','.join(_RECORD_FIXED)}"
        )
    names = header[len(_RECORD_FIXED):]
    if not names:
        raise ConfigError(f"{path}: no feature columns")
    records = []
    for ln, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}: line {ln}: expected {len(header)} fields")
        try:
            records.append(
                DyadRecord(
                    ego_id=row[0],
                    alter_id=row[1],
                    edge=int(row[2]),
                    ego_weight=float(row[3]),
                    alter_weight=float(row[4]),
                    features=np.array([float(v) for v in row[5:]]),
                )
            )
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}: line {ln}: {exc}") from None
    if not records:
        raise ConfigError(f"{path}: no records")
    return names, records


# --- standardization ------------------------------------------------------


def write_standardization(path, std: Standardization, names) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["feature", "mean", "scale", "binary"])
        for name, m, s, b in zip(names, std.mean, std.scale, std.binary):
            w.writerow([name, format_float(m), format_float(s), "1" if b else "0"])


def read_standardization(path) -> tuple[list[str], Standardization]:
    header, rows = _open_rows(path)
    if header != ["feature", "mean", "scale", "binary"]:
        raise ConfigError(f"{path}: expected header feature,mean,scale,binary")
    names = [r[0] for r in rows]
    try:
        std = Standardization(
            mean=np.array([float(r[1]) for r in rows]),
            scale=np.array([float(r[2]) for r in rows]),
            binary=np.array([r[3] == "1" for r in rows]),
            source=str(path),
        )
    except (ValueError, IndexError, ConfigError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return names, std


# --- small named-value tables ---------------------------------------------


def write_vector_csv(
    path, names, values, value_col="estimate", extras=None, name_col="feature"
) -> None:
    """<name_col>,<value_col>[,extra columns] rows; extras maps column
    name to a same-length value sequence (None cells stay empty)."""
    extras = extras or {}
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow([name_col, value_col] + list(extras))
        for i, (name, v) in enumerate(zip(names, values)):
            row = [name, format_float(v)]
            for col in extras.values():
                row.append("" if col[i] is None else format_float(col[i]))
            w.writerow(row)


def read_vector_csv(path) -> tuple[list[str], np.ndarray]:
    """First two columns of any keyed value table: names and floats."""
    header, rows = _open_rows(path)
    if len(header) < 2:
        raise ConfigError(f"{path}: expected a name,value table")
    try:
        return [r[0] for r in rows], np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_rows(path, header, rows) -> None:
    """Plain delimited write of already-formatted cells."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(list(header))
        for row in rows:
            w.writerow(list(row))


# --- matrices -------------------------------------------------------------


def write_matrix_csv(path, ids, values) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["id"] + list(ids))
        for ident, row in zip(ids, values):
            w.writerow([ident] + [format_float(v) for v in row])


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    header, rows = _open_rows(path)
    if not header or header[0] != "id":
        raise ConfigError(f"{path}: expected an id-headed matrix")
    ids = header[1:]
    if [r[0] for r in rows] != ids:
        raise ConfigError(f"{path}: row ids do not match the header ids")
    try:
        values = np.array([[float(v) for v in r[1:]] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if values.shape != (len(ids), len(ids)):
        raise ConfigError(f"{path}: matrix is not square")
    return ids, values


def write_separation_binary(path, ids, values) -> None:
    """Binary matrix layout: magic, uint64 LE point count, uint64 LE id
    block length, newline-joined UTF-8 ids, then n*n float64 LE values
    row-major."""
    values = np.ascontiguousarray(values, dtype="<f8")
    n = len(ids)
    if values.shape != (n, n):
        raise ConfigError("separation matrix shape does not match the ids")
    id_block = "\n".join(ids).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SEPARATION_MAGIC)
        fh.write(struct.pack("<QQ", n, len(id_block)))
        fh.write(id_block)
        fh.write(values.tobytes(order="C"))


def read_separation_binary(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != SEPARATION_MAGIC:
        raise ConfigError(f"{path}: bad magic; not a separation matrix file")
    if len(blob) < 24:
        raise ConfigError(f"{path}: truncated header")
    n, id_len = struct.unpack("<QQ", blob[8:24])
    id_end = 24 + id_len
    expected = id_end + 8 * n * n
    if len(blob) != expected:
        raise ConfigError(
            f"{path}: expected {expected} bytes for n={n}, found {len(blob)}"
        )
    ids = blob[24:id_end].decode("utf-8").split("\n") if id_len else []
    if len(ids) != n:
        raise ConfigError(f"{path}: id block holds {len(ids)} ids, expected {n}")
    values = np.frombuffer(blob[id_end:], dtype="<f8").reshape(n, n).copy()
    return ids, values


# --- chains, coverage, reports --------------------------------------------


def write_chain(path, names, chain) -> None:
    chain = np.asarray(chain, dtype=float)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(list(names))
        for row in chain:
            w.writerow([format_float(v) for v in row])


def read_chain(path) -> tuple[list[str], np.ndarray]:
    header, rows = _open_rows(path)
    try:
        chain = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if chain.ndim != 2 or chain.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged chain")
    return list(header), chain


def write_coverage(path, report) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["alpha", "coverage", "se"])
        for a, c, s in zip(report.alphas, report.coverage, report.se):
            w.writerow([format_float(a), format_float(c), format_float(s)])


def write_strain(path, report) -> None:
    has_interval = report.lower is not None
    extras = {}
    if has_interval:
        extras = {
            "lower": list(report.lower) + [report.total_interval[0]],
            "upper": list(report.upper) + [report.total_interval[1]],
        }
    write_vector_csv(
        path,
        list(report.feature_names) + ["TOTAL"],
        list(report.contributions) + [report.total],
        value_col="contribution",
        extras=extras,
    )


def write_isolation(path, ids, values) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["id", "isolation"])
        for ident, v in zip(ids, values):
            w.writerow([ident, format_float(v)])


def write_points_csv(path, header, array) -> None:
    array = np.asarray(array, dtype=float)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(list(header))
        for row in np.atleast_2d(array):
            w.writerow([format_float(v) for v in row])


# --- manifests ------------------------------------------------------------


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(path, command, arguments, outputs, extra=None) -> None:
    """Run manifest: command, arguments, per-output sha256, timestamp.

    The timestamp makes this the one file not expected to be
    byte-identical across reruns.
    """
    payload = {
        "command": command,
        "arguments": arguments,
        "created": datetime.now(timezone.utc).isoformat(),
        "outputs": {
            Path(p).name: sha256_file(p) for p in outputs if Path(p).exists()
        },
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
