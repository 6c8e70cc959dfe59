"""Radio map ingestion: CSV loading, dataset schemas and the RadioMap container.

A radio map is a collection of fingerprints. Each fingerprint is one Wi-Fi
scan: an RSSI reading (dBm) per access point, a planar position (x, y) in the
dataset's native units, a floor label and a building label. Access points not
heard during the scan carry a sentinel value (100 in the public datasets) that
is kept distinct from real readings all the way through ingestion; only the
transform module maps it to a number.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml

from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    EmptyDatasetError,
    ParseError,
    SchemaError,
)

# Detected readings must be plausible dBm values; anything else is the sentinel.
RSSI_FLOOR_DBM = -110.0
RSSI_CEIL_DBM = 0.0


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a fingerprint CSV.

    AP columns are every column named ``<ap_prefix><integer>``, ordered by the
    integer suffix. ``building_col`` and ``id_col`` are optional: without a
    building column every row gets building 0, without an id column row order
    provides the id.
    """

    name: str
    ap_prefix: str
    x_col: str
    y_col: str
    floor_col: str
    building_col: str | None = None
    id_col: str | None = None
    sentinel: float = 100.0


# Column conventions for the public datasets. UJIIndoorLoc ships these exact
# headers; coordinates are planar metres (projected), so 2D errors come out in
# metres directly. The UTS and TUT presets cover the common CSV exports of
# those datasets and can be overridden with a schema file when a copy uses
# different headers.
SCHEMA_PRESETS: dict[str, DatasetSchema] = {
    "ujiindoorloc": DatasetSchema(
        name="ujiindoorloc",
        ap_prefix="WAP",
        x_col="LONGITUDE",
        y_col="LATITUDE",
        floor_col="FLOOR",
        building_col="BUILDINGID",
        sentinel=100.0,
    ),
    "utsindoorloc": DatasetSchema(
        name="utsindoorloc",
        ap_prefix="WAP",
        x_col="Pos_x",
        y_col="Pos_y",
        floor_col="Floor",
        building_col=None,
        sentinel=100.0,
    ),
    "tut-generic": DatasetSchema(
        name="tut-generic",
        ap_prefix="WAP",
        x_col="X",
        y_col="Y",
        floor_col="FLOOR",
        building_col=None,
        sentinel=100.0,
    ),
    "synthetic": DatasetSchema(
        name="synthetic",
        ap_prefix="AP",
        x_col="X",
        y_col="Y",
        floor_col="FLOOR",
        building_col="BUILDING",
        id_col="ID",
        sentinel=100.0,
    ),
}

_SCHEMA_FILE_KEYS = {
    "name",
    "ap_prefix",
    "x_col",
    "y_col",
    "floor_col",
    "building_col",
    "id_col",
    "sentinel",
}


def load_schema_file(path: str) -> DatasetSchema:
    """Read a user schema from a small YAML key-value file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"schema file {path!r} must hold a key-value mapping")
    unknown = set(raw) - _SCHEMA_FILE_KEYS
    if unknown:
        raise ConfigError(f"schema file {path!r} has unknown keys: {sorted(unknown)}")
    for key in ("ap_prefix", "x_col", "y_col", "floor_col"):
        if key not in raw:
            raise ConfigError(f"schema file {path!r} is missing required key {key!r}")
    return DatasetSchema(
        name=str(raw.get("name", "custom")),
        ap_prefix=str(raw["ap_prefix"]),
        x_col=str(raw["x_col"]),
        y_col=str(raw["y_col"]),
        floor_col=str(raw["floor_col"]),
        building_col=None if raw.get("building_col") is None else str(raw["building_col"]),
        id_col=None if raw.get("id_col") is None else str(raw["id_col"]),
        sentinel=float(raw.get("sentinel", 100.0)),
    )


def resolve_schema(name_or_path: str) -> DatasetSchema:
    """Look up a preset by name, else treat the argument as a schema file path."""
    key = name_or_path.lower()
    if key in SCHEMA_PRESETS:
        return SCHEMA_PRESETS[key]
    return load_schema_file(name_or_path)


@dataclass(frozen=True)
class Fingerprint:
    """A single scan: raw RSSI per AP (sentinel included) plus ground truth."""

    rssi: np.ndarray
    x: float
    y: float
    floor: int
    building: int
    id: str


class RadioMap:
    """Immutable fingerprint collection backed by numpy arrays.

    All arrays are aligned by row. ``global_min`` is only meaningful on a
    training partition: the minimum detected reading minus 1 dBm, the anchor
    of the powed representation. Instances are never mutated after
    construction, so they can be shared freely across worker processes.
    """

    def __init__(
        self,
        rssi: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        floor: np.ndarray,
        building: np.ndarray,
        ids: list[str],
        sentinel: float,
        partition: str = "train",
        global_min: float | None = None,
        validate: bool = True,
    ) -> None:
        self.rssi = np.asarray(rssi, dtype=np.float64)
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.floor = np.asarray(floor, dtype=np.int64)
        self.building = np.asarray(building, dtype=np.int64)
        self.ids = [str(i) for i in ids]
        self.sentinel = float(sentinel)
        self.partition = str(partition)
        if validate:
            self._validate()
        self.detected = self.rssi != self.sentinel
        if global_min is None and self.partition == "train":
            global_min = compute_global_min(self)
        self.global_min = global_min
        for arr in (self.rssi, self.x, self.y, self.floor, self.building, self.detected):
            arr.setflags(write=False)

    def _validate(self) -> None:
        if self.rssi.ndim != 2:
            raise DataError("rssi must be a 2-D (samples x APs) array")
        n, m = self.rssi.shape
        if n == 0:
            raise EmptyDatasetError("radio map holds zero fingerprints")
        if m == 0:
            raise SchemaError("radio map holds zero AP columns")
        for name, arr in (("x", self.x), ("y", self.y), ("floor", self.floor), ("building", self.building)):
            if arr.shape != (n,):
                raise DataError(f"{name} column length {arr.shape} does not match {n} fingerprints")
        if len(self.ids) != n:
            raise DataError("id count does not match fingerprint count")
        real = self.rssi[self.rssi != self.sentinel]
        if real.size and (real.min() < RSSI_FLOOR_DBM or real.max() > RSSI_CEIL_DBM):
            bad = real[(real < RSSI_FLOOR_DBM) | (real > RSSI_CEIL_DBM)][0]
            raise DataError(
                f"reading {bad} dBm outside plausible range [{RSSI_FLOOR_DBM}, {RSSI_CEIL_DBM}] "
                f"and not equal to sentinel {self.sentinel}"
            )

    @property
    def ap_count(self) -> int:
        return self.rssi.shape[1]

    def __len__(self) -> int:
        return self.rssi.shape[0]

    def fingerprint(self, i: int) -> Fingerprint:
        return Fingerprint(
            rssi=self.rssi[i],
            x=float(self.x[i]),
            y=float(self.y[i]),
            floor=int(self.floor[i]),
            building=int(self.building[i]),
            id=self.ids[i],
        )

    def __iter__(self):
        return (self.fingerprint(i) for i in range(len(self)))

    def buildings(self) -> np.ndarray:
        return np.unique(self.building)

    def floors(self) -> np.ndarray:
        return np.unique(self.floor)

    def subset(self, indices: np.ndarray, partition: str | None = None) -> "RadioMap":
        idx = np.asarray(indices, dtype=np.int64)
        return RadioMap(
            rssi=self.rssi[idx],
            x=self.x[idx],
            y=self.y[idx],
            floor=self.floor[idx],
            building=self.building[idx],
            ids=[self.ids[int(i)] for i in idx],
            sentinel=self.sentinel,
            partition=self.partition if partition is None else partition,
            global_min=self.global_min,
            validate=False,
        )


def compute_global_min(rm: RadioMap) -> float:
    """Minimum detected reading across the map, minus 1 dBm."""
    detected = rm.rssi[rm.rssi != rm.sentinel]
    if detected.size == 0:
        raise DegenerateDataError("no detected reading anywhere; global minimum is undefined")
    return float(detected.min()) - 1.0


def _ap_columns(columns: list[str], prefix: str) -> list[str]:
    pat = re.compile(re.escape(prefix) + r"(\d+)$")
    found = []
    for col in columns:
        m = pat.fullmatch(col)
        if m:
            found.append((int(m.group(1)), col))
    found.sort()
    return [col for _, col in found]


def _numeric(df: pd.DataFrame, col: str, path: str) -> np.ndarray:
    series = df[col]
    coerced = pd.to_numeric(series, errors="coerce")
    bad = coerced.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"{path}: non-numeric value {series.iloc[row]!r} in column {col!r} at row {row}")
    return coerced.to_numpy(dtype=np.float64)


def load_csv(path: str, schema: DatasetSchema, partition: str = "train") -> RadioMap:
    """Load a fingerprint CSV according to a schema.

    Raises SchemaError when a named column is missing, ParseError (naming the
    row) for non-numeric cells, EmptyDatasetError for a data-less file.
    """
    try:
        # round_trip parsing: a float written with repr() must reload bit-exact
        df = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError(f"{path}: file holds no rows") from None
    if len(df) == 0:
        raise EmptyDatasetError(f"{path}: file holds no rows")

    ap_cols = _ap_columns(list(df.columns), schema.ap_prefix)
    if not ap_cols:
        raise SchemaError(f"{path}: no AP columns matching prefix {schema.ap_prefix!r}")
    required = [schema.x_col, schema.y_col, schema.floor_col]
    if schema.building_col is not None:
        required.append(schema.building_col)
    if schema.id_col is not None:
        required.append(schema.id_col)
    for col in required:
        if col not in df.columns:
            raise SchemaError(f"{path}: missing column {col!r}")

    rssi = np.column_stack([_numeric(df, c, path) for c in ap_cols])
    x = _numeric(df, schema.x_col, path)
    y = _numeric(df, schema.y_col, path)
    floor = _numeric(df, schema.floor_col, path).astype(np.int64)
    if schema.building_col is not None:
        building = _numeric(df, schema.building_col, path).astype(np.int64)
    else:
        building = np.zeros(len(df), dtype=np.int64)
    if schema.id_col is not None:
        ids = [str(v) for v in df[schema.id_col]]
    else:
        ids = [str(i) for i in range(len(df))]

    return RadioMap(
        rssi=rssi,
        x=x,
        y=y,
        floor=floor,
        building=building,
        ids=ids,
        sentinel=schema.sentinel,
        partition=partition,
    )


def _fmt(value: float) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(value))


def save_csv(rm: RadioMap, path: str, schema: DatasetSchema) -> None:
    """Canonical CSV re-export in schema column order (APs first).

    Reloading the file with the same schema reproduces every fingerprint
    bit-exactly; float cells are written with round-trip precision.
    """
    if schema.building_col is None and len(rm.buildings()) > 1:
        raise ConfigError(
            "schema has no building column but the radio map spans "
            f"{len(rm.buildings())} buildings; labels would be lost"
        )
    header = [f"{schema.ap_prefix}{i + 1}" for i in range(rm.ap_count)]
    header += [schema.x_col, schema.y_col, schema.floor_col]
    if schema.building_col is not None:
        header.append(schema.building_col)
    if schema.id_col is not None:
        header.append(schema.id_col)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(rm)):
            row = [_fmt(v) for v in rm.rssi[i]]
            row += [_fmt(rm.x[i]), _fmt(rm.y[i]), str(int(rm.floor[i]))]
            if schema.building_col is not None:
                row.append(str(int(rm.building[i])))
            if schema.id_col is not None:
                row.append(rm.ids[i])
            writer.writerow(row)
