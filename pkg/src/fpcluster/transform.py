"""RSSI representations and clustering feature vectors.

The powed representation maps a raw reading r (dBm) into [0, 1]:

    powed(r) = (r - min)^e / (-min)^e

where min is the training-set minimum detected reading minus 1 dBm and e is a
positive exponent controlling the non-linear scaling. Undetected readings
(sentinel) and anything at or below min map to 0; a reading of 0 dBm maps
to 1; the map is strictly increasing in between.

The exponent default is 2.71828. That number is a convention of this package,
not a tuned value; it is echoed into every config snapshot and report so runs
remain comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError
from .ingest import Fingerprint, RadioMap

DEFAULT_EXPONENT = 2.71828
DEFAULT_FLOOR_HEIGHT = 4.0


class FeatureSpace(str, Enum):
    """Feature space a clustering run partitions: spatial or radio."""

    XYZ = "xyz"
    RSSI = "rssi"


class Representation(str, Enum):
    """RSSI representation used for neighbour distances."""

    POWED = "powed"
    RAW = "raw"


@dataclass(frozen=True)
class PowedConfig:
    """Exponent and anchor of the powed map. ``min`` must be a negative dBm value."""

    exponent: float = DEFAULT_EXPONENT
    min: float = -105.0

    def __post_init__(self) -> None:
        if not self.exponent > 0:
            raise ConfigError(f"powed exponent must be positive, got {self.exponent}")
        if not self.min < 0:
            raise ConfigError(f"powed min must be a negative dBm value, got {self.min}")


def powed(rssi, cfg: PowedConfig, sentinel: float | None = None):
    """Powed representation of a scalar or array of raw readings.

    Values equal to ``sentinel`` (when given) are treated as undetected and
    map to 0. Everything else is clamped into [cfg.min, 0] before the formula,
    so test-time readings below the training minimum land on 0 as well.
    """
    values = np.asarray(rssi, dtype=np.float64)
    scalar = values.ndim == 0
    values = np.atleast_1d(values).copy()
    if sentinel is not None:
        values[values == sentinel] = cfg.min
    np.clip(values, cfg.min, 0.0, out=values)
    out = (values - cfg.min) ** cfg.exponent / (-cfg.min) ** cfg.exponent
    return float(out[0]) if scalar else out


def raw_clamped(rssi, cfg: PowedConfig, sentinel: float | None = None):
    """Raw-dBm representation: sentinel to cfg.min, clamp into [cfg.min, 0]."""
    values = np.asarray(rssi, dtype=np.float64)
    scalar = values.ndim == 0
    values = np.atleast_1d(values).copy()
    if sentinel is not None:
        values[values == sentinel] = cfg.min
    np.clip(values, cfg.min, 0.0, out=values)
    return float(values[0]) if scalar else values


def rssi_features(rssi, representation: Representation, cfg: PowedConfig, sentinel: float | None):
    """Distance features for a raw reading vector or matrix."""
    if representation == Representation.POWED:
        return powed(rssi, cfg, sentinel)
    return raw_clamped(rssi, cfg, sentinel)


def features(
    fp: Fingerprint,
    space: FeatureSpace,
    cfg: PowedConfig,
    *,
    floor_height: float = DEFAULT_FLOOR_HEIGHT,
    sentinel: float | None = None,
) -> np.ndarray:
    """Clustering feature vector of one fingerprint.

    XYZ: (x, y, floor * floor_height). RSSI: element-wise powed readings.
    """
    if space == FeatureSpace.XYZ:
        return np.array([fp.x, fp.y, fp.floor * floor_height], dtype=np.float64)
    return powed(fp.rssi, cfg, sentinel)


def feature_matrix(
    rm: RadioMap,
    space: FeatureSpace,
    cfg: PowedConfig,
    *,
    floor_height: float = DEFAULT_FLOOR_HEIGHT,
) -> np.ndarray:
    """Row-aligned clustering features for a whole radio map."""
    if space == FeatureSpace.XYZ:
        return np.column_stack([rm.x, rm.y, rm.floor * floor_height]).astype(np.float64)
    return powed(rm.rssi, cfg, rm.sentinel)
