"""Synthetic radio map generator (log-distance path loss plus floor attenuation).

Used by the test suite and the `synth` CLI command so the whole pipeline can
run without any public dataset. Every draw comes from one seeded generator in
a fixed order, so a given (spec, seed) pair always produces the same pair of
maps, bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SynthSpecError
from .ingest import RSSI_FLOOR_DBM, RadioMap


@dataclass(frozen=True)
class SynthSpec:
    """Geometry and propagation parameters of a synthetic deployment.

    Buildings are axis-aligned boxes of ``extent`` metres placed
    ``building_gap`` metres apart on the x axis, far enough that APs from one
    building fall below the detection threshold in the next. AP height and
    sample height are both ``floor * floor_height``, so a sample standing on
    an AP sees distance zero.
    """

    buildings: int = 1
    floors: int = 3
    floor_height: float = 4.0
    extent: tuple[float, float] = (40.0, 25.0)
    aps_per_floor: int = 6
    ap_positions: tuple[tuple[int, int, float, float], ...] | None = None  # (building, floor, x, y)
    train_per_floor: int = 50
    test_per_floor: int = 15
    p0: float = -35.0  # dBm at the reference distance d0
    d0: float = 1.0
    gamma: float = 2.2  # path-loss exponent
    sigma: float = 3.0  # shadowing noise, dB
    floor_atten: float = 12.0  # dB lost per concrete slab crossed
    threshold: float = -95.0  # readings below this are not detected
    sentinel: float = 100.0
    building_gap: float = 2000.0

    def validate(self) -> None:
        if self.buildings < 1 or self.floors < 1:
            raise SynthSpecError("need at least one building and one floor")
        if self.ap_positions is not None:
            if len(self.ap_positions) == 0:
                raise SynthSpecError("explicit AP list is empty")
        elif self.aps_per_floor < 1:
            raise SynthSpecError("zero APs per floor")
        if self.train_per_floor < 1 or self.test_per_floor < 1:
            raise SynthSpecError("zero samples per floor")
        if self.d0 <= 0:
            raise SynthSpecError("reference distance d0 must be positive")
        if self.sigma < 0:
            raise SynthSpecError("noise sigma must be non-negative")
        if not (RSSI_FLOOR_DBM < self.threshold <= 0):
            raise SynthSpecError(
                f"detection threshold must lie in ({RSSI_FLOOR_DBM}, 0] dBm, got {self.threshold}"
            )
        if self.p0 > 0:
            raise SynthSpecError("reference power p0 must be <= 0 dBm")


def path_loss_rssi(d: np.ndarray | float, spec: SynthSpec) -> np.ndarray | float:
    """Noise-free received power at 3-D distance d: p0 - 10*gamma*log10(max(d, d0)/d0)."""
    dd = np.maximum(np.asarray(d, dtype=np.float64), spec.d0)
    return spec.p0 - 10.0 * spec.gamma * np.log10(dd / spec.d0)


def _ap_layout(spec: SynthSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """AP positions as (xyz array, floor array, building array)."""
    if spec.ap_positions is not None:
        b = np.array([p[0] for p in spec.ap_positions], dtype=np.int64)
        f = np.array([p[1] for p in spec.ap_positions], dtype=np.int64)
        x = np.array([p[2] for p in spec.ap_positions], dtype=np.float64)
        y = np.array([p[3] for p in spec.ap_positions], dtype=np.float64)
    else:
        b_list, f_list, x_list, y_list = [], [], [], []
        for bld in range(spec.buildings):
            for flr in range(spec.floors):
                pos = rng.uniform((0.0, 0.0), spec.extent, size=(spec.aps_per_floor, 2))
                b_list.append(np.full(spec.aps_per_floor, bld, dtype=np.int64))
                f_list.append(np.full(spec.aps_per_floor, flr, dtype=np.int64))
                x_list.append(pos[:, 0])
                y_list.append(pos[:, 1])
        b = np.concatenate(b_list)
        f = np.concatenate(f_list)
        x = np.concatenate(x_list)
        y = np.concatenate(y_list)
    xyz = np.column_stack([x + b * spec.building_gap, y, f * spec.floor_height])
    return xyz, f, b


def _sample_positions(
    spec: SynthSpec, per_floor: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform sample locations, building by building, floor by floor."""
    xs, fs, bs = [], [], []
    for bld in range(spec.buildings):
        for flr in range(spec.floors):
            pos = rng.uniform((0.0, 0.0), spec.extent, size=(per_floor, 2))
            xs.append(np.column_stack([pos[:, 0] + bld * spec.building_gap, pos[:, 1],
                                       np.full(per_floor, flr * spec.floor_height)]))
            fs.append(np.full(per_floor, flr, dtype=np.int64))
            bs.append(np.full(per_floor, bld, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(fs), np.concatenate(bs)


def synth_rssi_matrix(
    pos_xyz: np.ndarray,
    floors: np.ndarray,
    spec: SynthSpec,
    ap_xyz: np.ndarray,
    ap_floor: np.ndarray,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Raw readings for arbitrary sample positions against an AP layout.

    noise is an (n_samples, n_aps) matrix of dB offsets (zeros when omitted).
    Readings below the detection threshold become the sentinel; detected
    readings are clipped at 0 dBm.
    """
    diff = pos_xyz[:, None, :] - ap_xyz[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    crossed = np.abs(floors[:, None] - ap_floor[None, :])
    rssi = path_loss_rssi(d, spec) - crossed * spec.floor_atten
    if noise is not None:
        rssi = rssi + noise
    rssi = np.minimum(rssi, 0.0)
    return np.where(rssi < spec.threshold, spec.sentinel, rssi)


def synth_radio_map(spec: SynthSpec, seed: int) -> tuple[RadioMap, RadioMap]:
    """Generate a (train, test) radio map pair from a spec and a seed."""
    spec.validate()
    rng = np.random.default_rng(seed)

    ap_xyz, ap_floor, _ = _ap_layout(spec, rng)
    train_xyz, train_floor, train_bld = _sample_positions(spec, spec.train_per_floor, rng)
    test_xyz, test_floor, test_bld = _sample_positions(spec, spec.test_per_floor, rng)
    train_noise = rng.normal(0.0, spec.sigma, size=(len(train_xyz), len(ap_xyz)))
    test_noise = rng.normal(0.0, spec.sigma, size=(len(test_xyz), len(ap_xyz)))

    train_rssi = synth_rssi_matrix(train_xyz, train_floor, spec, ap_xyz, ap_floor, train_noise)
    test_rssi = synth_rssi_matrix(test_xyz, test_floor, spec, ap_xyz, ap_floor, test_noise)

    train = RadioMap(
        rssi=train_rssi,
        x=train_xyz[:, 0],
        y=train_xyz[:, 1],
        floor=train_floor,
        building=train_bld,
        ids=[f"train-{i}" for i in range(len(train_xyz))],
        sentinel=spec.sentinel,
        partition="train",
    )
    test = RadioMap(
        rssi=test_rssi,
        x=test_xyz[:, 0],
        y=test_xyz[:, 1],
        floor=test_floor,
        building=test_bld,
        ids=[f"test-{i}" for i in range(len(test_xyz))],
        sentinel=spec.sentinel,
        partition="test",
        global_min=None,
    )
    return train, test
