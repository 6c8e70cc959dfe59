"""Position and floor estimation inside an assigned cluster.

Three neighbour rules over Euclidean distance in the chosen RSSI
representation:

* knn: arithmetic mean of the k nearest members; floor by majority vote.
* wknn: weights 1/d; weighted coordinate mean; floor with the largest weight
  sum wins.
* wknn-t: wknn, but the neighbour set extends past k to every member whose
  distance equals the k-th nearest distance.

Shared conventions, pinned by tests: neighbour order is distance then member
index (stable sort); k larger than the member count means "use all members";
floor ties break to the lowest label; a weighted estimate with any
zero-distance neighbour (d < 1e-9) degenerates to the unweighted mean over
exactly the zero-distance members.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import numpy as np

from .assignment import ApCombinationTable, assign
from .clustering import ClusterModel, Level
from .errors import ConfigError, DataError
from .ingest import Fingerprint, RadioMap
from .transform import (
    DEFAULT_FLOOR_HEIGHT,
    PowedConfig,
    Representation,
    rssi_features,
)

ZERO_DISTANCE = 1e-9


class Variant(str, Enum):
    KNN = "knn"
    WKNN = "wknn"
    WKNN_T = "wknn-t"


@dataclass(frozen=True)
class KnnConfig:
    k: int
    variant: Variant = Variant.WKNN
    representation: Representation = Representation.POWED

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"neighbour count k must be >= 1, got {self.k}")


@dataclass
class PositionEstimate:
    x: float
    y: float
    floor: int
    cluster: int | None
    neighbour_ids: list[str]


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two equal-length feature vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DataError(f"feature length mismatch: {va.shape} vs {vb.shape}")
    diff = va - vb
    return float(np.sqrt(np.dot(diff, diff)))


def _modal_floor(floors: np.ndarray) -> int:
    values, counts = np.unique(floors, return_counts=True)
    return int(values[counts.argmax()])  # unique() sorts, argmax takes first max


def _weighted_floor(floors: np.ndarray, weights: np.ndarray) -> int:
    values = np.unique(floors)
    sums = np.array([weights[floors == v].sum() for v in values])
    return int(values[sums.argmax()])


def _sorted_neighbours(qvec: np.ndarray, feats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distances of a query to every member, sorted (distance, then row index)."""
    diff = feats - qvec
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.argsort(d, kind="stable")
    return d[order], order


def _estimate_from_sorted(
    d_sorted: np.ndarray,
    order: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    floors: np.ndarray,
    k: int,
    variant: Variant,
) -> tuple[float, float, int, np.ndarray]:
    m = d_sorted.shape[0]
    cut = min(k, m)
    if variant == Variant.WKNN_T and cut < m:
        kth = d_sorted[cut - 1]
        while cut < m and d_sorted[cut] == kth:
            cut += 1
    sel = order[:cut]
    dsel = d_sorted[:cut]

    if variant == Variant.KNN:
        px = float(x[sel].mean())
        py = float(y[sel].mean())
        floor = _modal_floor(floors[sel])
        return px, py, floor, sel

    zero = dsel < ZERO_DISTANCE
    if zero.any():
        exact = sel[zero]
        px = float(x[exact].mean())
        py = float(y[exact].mean())
        floor = _modal_floor(floors[exact])
        return px, py, floor, exact
    w = 1.0 / dsel
    wsum = w.sum()
    px = float((x[sel] * w).sum() / wsum)
    py = float((y[sel] * w).sum() / wsum)
    floor = _weighted_floor(floors[sel], w)
    return px, py, floor, sel


def knn_estimate(
    query: Fingerprint,
    members: RadioMap,
    cfg: KnnConfig,
    pcfg: PowedConfig,
) -> PositionEstimate:
    """Estimate position and floor of a query from one cluster's members."""
    feats = rssi_features(members.rssi, cfg.representation, pcfg, members.sentinel)
    qvec = rssi_features(query.rssi, cfg.representation, pcfg, members.sentinel)
    d_sorted, order = _sorted_neighbours(qvec, feats)
    px, py, floor, sel = _estimate_from_sorted(
        d_sorted, order, members.x, members.y, members.floor, cfg.k, cfg.variant
    )
    return PositionEstimate(
        x=px, y=py, floor=floor, cluster=None, neighbour_ids=[members.ids[int(i)] for i in sel]
    )


@dataclass
class ClusterMembers:
    """Arrays of one candidate neighbourhood, handed to estimators."""

    rssi: np.ndarray
    x: np.ndarray
    y: np.ndarray
    floor: np.ndarray
    ids: list[str]
    sentinel: float


class Estimator(Protocol):
    """Anything that maps (query, neighbourhood, powed config) to an estimate.

    Custom regressors plug in here; the built-in KNN family is the default.
    """

    def __call__(
        self, query: Fingerprint, members: ClusterMembers, pcfg: PowedConfig
    ) -> PositionEstimate: ...


class Pipeline:
    """A fitted end-to-end localiser: training map + clusters + table + KNN config.

    ``model`` and ``table`` may both be None, which is the no-clustering
    baseline: every query searches its whole building. Multi-building routing
    uses the query's ground-truth building label by default; set
    ``routing="strongest-ap"`` to classify the building from the query's
    single strongest AP instead.
    """

    def __init__(
        self,
        train: RadioMap,
        pcfg: PowedConfig,
        knn: KnnConfig,
        model: ClusterModel | None = None,
        table: ApCombinationTable | None = None,
        *,
        floor_height: float = DEFAULT_FLOOR_HEIGHT,
        routing: str = "truth",
        estimator: Estimator | None = None,
    ) -> None:
        if (model is None) != (table is None):
            raise ConfigError("model and table must be given together (or neither, for the baseline)")
        if routing not in ("truth", "strongest-ap"):
            raise ConfigError(f"unknown routing {routing!r}")
        if model is not None:
            model.check_alignment(train)
        self.train = train
        self.pcfg = pcfg
        self.knn = knn
        self.model = model
        self.table = table
        self.floor_height = floor_height
        self.routing = routing
        self.estimator = estimator
        self._feats_cache: dict[Representation, np.ndarray] = {}
        self._group_rows: dict[tuple, np.ndarray] = {}
        self._group_feats: dict[tuple, np.ndarray] = {}
        self._group_truth: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._ap_building: np.ndarray | None = None

    # group keys: ("gid", gid) for clusters, ("building", b) for the baseline
    def _rows(self, key: tuple) -> np.ndarray:
        if key not in self._group_rows:
            kind, value = key
            if kind == "gid":
                rows = self.model.members(value)
            else:
                rows = np.flatnonzero(self.train.building == value)
            if rows.size == 0:
                raise DataError(f"empty neighbourhood for {key}")
            self._group_rows[key] = rows
        return self._group_rows[key]

    def _features(self, representation: Representation) -> np.ndarray:
        if representation not in self._feats_cache:
            self._feats_cache[representation] = rssi_features(
                self.train.rssi, representation, self.pcfg, self.train.sentinel
            )
        return self._feats_cache[representation]

    def group_features(self, key: tuple, representation: Representation) -> np.ndarray:
        """Distance features of one neighbourhood, sliced once and cached."""
        cache_key = (representation, *key)
        if cache_key not in self._group_feats:
            self._group_feats[cache_key] = self._features(representation)[self._rows(key)]
        return self._group_feats[cache_key]

    def group_truth(self, key: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x, y, floor) arrays of one neighbourhood."""
        if key not in self._group_truth:
            rows = self._rows(key)
            self._group_truth[key] = (self.train.x[rows], self.train.y[rows], self.train.floor[rows])
        return self._group_truth[key]

    def members_of(self, key: tuple) -> ClusterMembers:
        rows = self._rows(key)
        t = self.train
        return ClusterMembers(
            rssi=t.rssi[rows],
            x=t.x[rows],
            y=t.y[rows],
            floor=t.floor[rows],
            ids=[t.ids[int(i)] for i in rows],
            sentinel=t.sentinel,
        )

    def building_of(self, query: Fingerprint) -> int:
        if self.routing == "truth":
            return query.building
        if self._ap_building is None:
            self._ap_building = _strongest_ap_buildings(self.train)
        tops = top_strongest(query.rssi, self.train.sentinel)
        vote = self._ap_building[tops]
        if vote >= 0:
            return int(vote)
        counts = np.bincount(self.train.building)
        return int(counts.argmax())

    def route_ex(self, query: Fingerprint) -> tuple[tuple, bool]:
        """Neighbourhood key for a query plus the zero-score fallback flag."""
        if self.model is None:
            return ("building", self.building_of(query)), False
        building = None
        if not self.model.strategy.pooled and len(self.train.buildings()) > 1:
            building = self.building_of(query)
        result = assign(query.rssi, self.table, sentinel=self.train.sentinel, building=building)
        return ("gid", result.cluster), result.fallback

    def route(self, query: Fingerprint) -> tuple:
        """Neighbourhood key: assigned cluster, or the whole building for the baseline."""
        return self.route_ex(query)[0]

    def predict(self, query: Fingerprint) -> PositionEstimate:
        key = self.route(query)
        gid = key[1] if key[0] == "gid" else None
        if self.estimator is not None:
            est = self.estimator(query, self.members_of(key), self.pcfg)
            est.cluster = gid
        else:
            rows = self._rows(key)
            feats = self.group_features(key, self.knn.representation)
            gx, gy, gfloor = self.group_truth(key)
            qvec = rssi_features(query.rssi, self.knn.representation, self.pcfg, self.train.sentinel)
            d_sorted, order = _sorted_neighbours(qvec, feats)
            px, py, floor, sel = _estimate_from_sorted(
                d_sorted, order, gx, gy, gfloor, self.knn.k, self.knn.variant
            )
            est = PositionEstimate(
                x=px, y=py, floor=floor, cluster=gid,
                neighbour_ids=[self.train.ids[int(rows[int(i)])] for i in sel],
            )
        # Floor-level clusters are floor-pure: the cluster decides the floor.
        if gid is not None and self.model.strategy.level == Level.FLOOR:
            est.floor = int(self.model.cluster_floor[gid])
        return est


def top_strongest(rssi: np.ndarray, sentinel: float) -> int:
    """Index of the single strongest detected AP (ties to the lower index)."""
    values = np.asarray(rssi, dtype=np.float64)
    detected = np.flatnonzero(values != sentinel)
    if detected.size == 0:
        raise DataError("fingerprint has no detected AP")
    return int(detected[np.argsort(-values[detected], kind="stable")[0]])


def _strongest_ap_buildings(train: RadioMap) -> np.ndarray:
    """Per-AP building vote: the building where the AP is most often the strongest.

    -1 marks APs that are never the strongest anywhere in training.
    """
    n_ap = train.ap_count
    buildings = train.buildings()
    counts = np.zeros((n_ap, int(buildings.max()) + 1), dtype=np.int64)
    for i in range(len(train)):
        if train.detected[i].any():
            ap = top_strongest(train.rssi[i], train.sentinel)
            counts[ap, train.building[i]] += 1
    out = np.full(n_ap, -1, dtype=np.int64)
    seen = counts.sum(axis=1) > 0
    out[seen] = counts[seen].argmax(axis=1)
    return out


def predict(
    query: Fingerprint,
    model: ClusterModel | None,
    table: ApCombinationTable | None,
    cfg: KnnConfig,
    pcfg: PowedConfig,
    train: RadioMap,
    **kwargs,
) -> PositionEstimate:
    """One-shot prediction without keeping a Pipeline around."""
    return Pipeline(train, pcfg, cfg, model, table, **kwargs).predict(query)
