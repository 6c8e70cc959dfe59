"""Versioned JSON serialization of a fitted model bundle.

A bundle holds everything `fit` produced: the cluster model, the
representative AP table, the powed config derived from the training map and
the floor height. It references training fingerprints by id, so evaluating a
bundle needs the training CSV alongside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .assignment import ApCombinationTable
from .clustering import ClusterModel
from .errors import DataError
from .transform import PowedConfig

BUNDLE_FORMAT_VERSION = 1


@dataclass
class Bundle:
    model: ClusterModel
    table: ApCombinationTable
    pcfg: PowedConfig
    floor_height: float
    sentinel: float

    def to_dict(self) -> dict:
        return {
            "format_version": BUNDLE_FORMAT_VERSION,
            "powed": {"exponent": self.pcfg.exponent, "min": self.pcfg.min},
            "floor_height": self.floor_height,
            "sentinel": self.sentinel,
            "model": self.model.to_dict(),
            "table": self.table.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Bundle":
        version = data.get("format_version")
        if version != BUNDLE_FORMAT_VERSION:
            raise DataError(f"unsupported bundle format version {version!r}")
        return cls(
            model=ClusterModel.from_dict(data["model"]),
            table=ApCombinationTable.from_dict(data["table"]),
            pcfg=PowedConfig(exponent=float(data["powed"]["exponent"]), min=float(data["powed"]["min"])),
            floor_height=float(data["floor_height"]),
            sentinel=float(data["sentinel"]),
        )


def save_bundle(bundle: Bundle, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_dict(), fh)
        fh.write("\n")


def load_bundle(path: str) -> Bundle:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a valid bundle file ({exc})") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: not a valid bundle file")
    return Bundle.from_dict(data)
