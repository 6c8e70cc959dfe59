"""Radio map partitioning: Lloyd's k-means over per-building or per-floor scopes.

The clustering level decides the scopes: one k-means run per building
(Building level) or one per (building, floor) pair (Floor level). Scopes are
independent; under the Floor level every cluster inherits the floor of its
scope, which is what lets the pipeline read the floor straight off the
assigned cluster.

k-means details, all of which the tests pin down: centroids start as k
distinct points sampled without replacement from the scope (k-means++ is
available behind a flag), assignment is nearest-centroid in Euclidean
distance with ties to the lowest centroid index, iteration stops when the
largest centroid displacement drops below ``tol`` or after ``max_iter``
rounds, and an emptied cluster is re-seeded to the point farthest from its
current centroid. Given a seed the whole procedure is deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DataError, InfeasibleKError
from .ingest import RadioMap
from .transform import DEFAULT_FLOOR_HEIGHT, FeatureSpace, PowedConfig, feature_matrix

MODEL_FORMAT_VERSION = 1


class Level(str, Enum):
    BUILDING = "building"
    FLOOR = "floor"


@dataclass(frozen=True)
class ClusterStrategy:
    """What to partition (level), where (feature space) and how many pieces (k)."""

    level: Level
    space: FeatureSpace
    k: int
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-4
    init: str = "sample"  # "sample" = k distinct data points; "kmeans++" optional
    pooled: bool = False  # Building level only: one scope across all buildings

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"cluster count k must be >= 1, got {self.k}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")
        if self.init not in ("sample", "kmeans++"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.pooled and self.level != Level.BUILDING:
            raise ConfigError("pooled mode applies to the building level only")


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    iterations: int
    sse_history: list[float]


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, one centroid column at a time."""
    out = np.empty((points.shape[0], centroids.shape[0]), dtype=np.float64)
    for j in range(centroids.shape[0]):
        diff = points - centroids[j]
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _init_centroids(points: np.ndarray, k: int, rng: np.random.Generator, init: str) -> np.ndarray:
    distinct = np.unique(points, axis=0)
    if k > distinct.shape[0]:
        raise InfeasibleKError(
            f"asked for {k} clusters but the scope has only {distinct.shape[0]} distinct points"
        )
    if init == "sample":
        idx = rng.choice(distinct.shape[0], size=k, replace=False)
        return distinct[idx].copy()
    # kmeans++: distance-squared weighted seeding over the distinct points
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = distinct[rng.integers(distinct.shape[0])]
    closest = _sq_distances(distinct, centroids[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            remaining = np.flatnonzero(closest >= 0)
            centroids[j] = distinct[rng.choice(remaining)]
        else:
            centroids[j] = distinct[rng.choice(distinct.shape[0], p=closest / total)]
        closest = np.minimum(closest, _sq_distances(distinct, centroids[j : j + 1]).ravel())
    return centroids


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-4,
    init: str = "sample",
) -> KMeansResult:
    """Lloyd's algorithm. Returns centroids, labels, iteration count and SSE history.

    The SSE history records the within-cluster sum of squared distances after
    each assignment step; Lloyd's updates make it non-increasing.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise DataError("kmeans needs a non-empty 2-D point array")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    centroids = _init_centroids(pts, k, rng, init)

    n = pts.shape[0]
    row = np.arange(n)
    sse_history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = _sq_distances(pts, centroids)
        labels = d2.argmin(axis=1)
        sse_history.append(float(d2[row, labels].sum()))

        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = pts[labels == j].mean(axis=0)
        if (counts == 0).any():
            own = d2[row, labels].copy()
            for j in np.flatnonzero(counts == 0):
                far = int(own.argmax())
                new_centroids[j] = pts[far]
                own[far] = -1.0  # a point can repair only one cluster
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    # Final consistency pass: labels must be optimal for the returned
    # centroids, and no cluster may end up empty.
    for _ in range(k + 1):
        d2 = _sq_distances(pts, centroids)
        labels = d2.argmin(axis=1)
        counts = np.bincount(labels, minlength=k)
        if (counts > 0).all():
            break
        own = d2[row, labels].copy()
        for j in np.flatnonzero(counts == 0):
            far = int(own.argmax())
            centroids[j] = pts[far]
            own[far] = -1.0
    else:
        raise InfeasibleKError(f"could not keep {k} clusters non-empty")
    sse_history.append(float(d2[row, labels].sum()))

    return KMeansResult(centroids=centroids, labels=labels, iterations=iterations, sse_history=sse_history)


@dataclass
class Scope:
    """One independent k-means run: a building (or all, when pooled) or a building-floor pair."""

    building: int | None
    floor: int | None
    seed: int
    first_gid: int
    centroids: np.ndarray
    iterations: int


class ClusterModel:
    """Fitted partition of a training radio map.

    Clusters carry global ids (gid), numbered scope by scope. ``labels`` holds
    one gid per training fingerprint, aligned with the map the model was
    fitted on; ``ids`` keeps the fingerprint ids for re-alignment after
    deserialization. Instances are immutable once fitted.
    """

    def __init__(
        self,
        strategy: ClusterStrategy,
        scopes: list[Scope],
        labels: np.ndarray,
        ids: list[str],
        creation_ms: float,
    ) -> None:
        self.strategy = strategy
        self.scopes = scopes
        self.labels = np.asarray(labels, dtype=np.int64)
        self.ids = list(ids)
        self.creation_ms = float(creation_ms)
        self.cluster_count = sum(s.centroids.shape[0] for s in scopes)
        self.cluster_building: dict[int, int | None] = {}
        self.cluster_floor: dict[int, int | None] = {}
        for s in scopes:
            for local in range(s.centroids.shape[0]):
                gid = s.first_gid + local
                self.cluster_building[gid] = s.building
                self.cluster_floor[gid] = s.floor
        self._members: dict[int, np.ndarray] | None = None

    def members(self, gid: int) -> np.ndarray:
        """Training row indices of a cluster, ascending."""
        if self._members is None:
            self._members = {
                g: np.flatnonzero(self.labels == g) for g in range(self.cluster_count)
            }
        return self._members[gid]

    def member_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.cluster_count)

    def check_alignment(self, train: RadioMap) -> None:
        if len(train) != len(self.ids) or train.ids != self.ids:
            raise DataError("cluster model was fitted on a different training map (id mismatch)")

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "strategy": {
                "level": self.strategy.level.value,
                "space": self.strategy.space.value,
                "k": self.strategy.k,
                "seed": self.strategy.seed,
                "max_iter": self.strategy.max_iter,
                "tol": self.strategy.tol,
                "init": self.strategy.init,
                "pooled": self.strategy.pooled,
            },
            "scopes": [
                {
                    "building": s.building,
                    "floor": s.floor,
                    "seed": s.seed,
                    "first_gid": s.first_gid,
                    "iterations": s.iterations,
                    "centroids": s.centroids.tolist(),
                }
                for s in self.scopes
            ],
            "labels": self.labels.tolist(),
            "ids": self.ids,
            "creation_ms": self.creation_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterModel":
        version = data.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model format version {version!r}")
        st = data["strategy"]
        strategy = ClusterStrategy(
            level=Level(st["level"]),
            space=FeatureSpace(st["space"]),
            k=int(st["k"]),
            seed=int(st["seed"]),
            max_iter=int(st["max_iter"]),
            tol=float(st["tol"]),
            init=st.get("init", "sample"),
            pooled=bool(st.get("pooled", False)),
        )
        scopes = [
            Scope(
                building=None if s["building"] is None else int(s["building"]),
                floor=None if s["floor"] is None else int(s["floor"]),
                seed=int(s["seed"]),
                first_gid=int(s["first_gid"]),
                centroids=np.asarray(s["centroids"], dtype=np.float64),
                iterations=int(s["iterations"]),
            )
            for s in data["scopes"]
        ]
        return cls(
            strategy=strategy,
            scopes=scopes,
            labels=np.asarray(data["labels"], dtype=np.int64),
            ids=[str(i) for i in data["ids"]],
            creation_ms=float(data["creation_ms"]),
        )


def _scope_keys(train: RadioMap, strategy: ClusterStrategy) -> list[tuple[int | None, int | None]]:
    if strategy.level == Level.BUILDING:
        if strategy.pooled:
            return [(None, None)]
        return [(int(b), None) for b in train.buildings()]
    keys = sorted(
        {(int(b), int(f)) for b, f in zip(train.building, train.floor)}
    )
    return list(keys)


def fit_clusters(
    train: RadioMap,
    strategy: ClusterStrategy,
    pcfg: PowedConfig,
    *,
    floor_height: float = DEFAULT_FLOOR_HEIGHT,
) -> ClusterModel:
    """Partition a training map scope by scope.

    Scope seeds are derived as ``strategy.seed + scope_index`` with scopes
    ordered by (building, floor), so one top-level seed pins every run.
    """
    t0 = time.perf_counter()
    feats = feature_matrix(train, strategy.space, pcfg, floor_height=floor_height)
    labels = np.full(len(train), -1, dtype=np.int64)
    scopes: list[Scope] = []
    first_gid = 0
    for index, (bld, flr) in enumerate(_scope_keys(train, strategy)):
        mask = np.ones(len(train), dtype=bool)
        if bld is not None:
            mask &= train.building == bld
        if flr is not None:
            mask &= train.floor == flr
        rows = np.flatnonzero(mask)
        scope_seed = strategy.seed + index
        try:
            result = kmeans(
                feats[rows],
                strategy.k,
                seed=scope_seed,
                max_iter=strategy.max_iter,
                tol=strategy.tol,
                init=strategy.init,
            )
        except InfeasibleKError as exc:
            raise InfeasibleKError(f"scope (building={bld}, floor={flr}): {exc}") from None
        labels[rows] = first_gid + result.labels
        scopes.append(
            Scope(
                building=bld,
                floor=flr,
                seed=scope_seed,
                first_gid=first_gid,
                centroids=result.centroids,
                iterations=result.iterations,
            )
        )
        first_gid += strategy.k
    creation_ms = (time.perf_counter() - t0) * 1e3
    return ClusterModel(strategy=strategy, scopes=scopes, labels=labels, ids=train.ids, creation_ms=creation_ms)
