"""Cluster assignment from strongest-AP combinations.

Each cluster is represented by a frequency table: how many of its training
fingerprints share each exact set of top-N strongest APs. At query time the
top-N set of the scan is expanded into all 2^N - 1 non-empty subsets; every
table row whose combination contains a subset S adds freq * |S| to its
cluster's score, and the highest-scoring cluster wins. Scores are exact
integers.

Matching is set containment, not equality, and every matching (subset, row)
pair contributes: a row whose combination contains two subsets of the query
counts twice, once per subset.
"""

from __future__ import annotations

import time
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .clustering import ClusterModel
from .errors import DataError, NoModelError, UndetectableFingerprintError
from .ingest import RadioMap

TABLE_FORMAT_VERSION = 1


def top_n_aps(rssi: np.ndarray, n: int, *, sentinel: float) -> tuple[int, ...]:
    """Indices of the up-to-n strongest detected APs, as a sorted tuple.

    Equal readings are ranked by lower AP index. Fewer than n detected APs
    means the whole detected set is used; zero detected APs is an error.
    """
    values = np.asarray(rssi, dtype=np.float64)
    detected = np.flatnonzero(values != sentinel)
    if detected.size == 0:
        raise UndetectableFingerprintError("fingerprint has no detected AP")
    order = np.argsort(-values[detected], kind="stable")
    take = detected[order[: min(n, detected.size)]]
    return tuple(sorted(int(i) for i in take))


def top_n_sets(rssi: np.ndarray, n: int, *, sentinel: float) -> list[tuple[int, ...] | None]:
    """Vectorised top_n_aps over a matrix; None marks all-sentinel rows."""
    values = np.asarray(rssi, dtype=np.float64)
    detected = values != sentinel
    counts = detected.sum(axis=1)
    masked = np.where(detected, values, -np.inf)
    order = np.argsort(-masked, axis=1, kind="stable")
    out: list[tuple[int, ...] | None] = []
    for i in range(values.shape[0]):
        c = int(counts[i])
        if c == 0:
            out.append(None)
        else:
            out.append(tuple(sorted(int(j) for j in order[i, : min(n, c)])))
    return out


@dataclass(frozen=True)
class TableRow:
    combination: tuple[int, ...]
    freq: int
    cluster: int


class ApCombinationTable:
    """Concatenated per-cluster frequency tables of top-n AP combinations.

    ``cluster_building`` routes multi-building queries to the right slice of
    the table; ``skipped`` counts training fingerprints per cluster that had
    no detected AP and therefore no combination. A subset index is built
    lazily per building so scoring a query costs at most 2^n - 1 dictionary
    lookups.
    """

    def __init__(
        self,
        rows: list[TableRow],
        n: int,
        cluster_building: dict[int, int | None] | None = None,
        skipped: dict[int, int] | None = None,
        build_ms: float = 0.0,
        per_cluster_ms: dict[int, float] | None = None,
    ) -> None:
        if n < 1:
            raise DataError(f"table width n must be >= 1, got {n}")
        seen: set[tuple[tuple[int, ...], int]] = set()
        for r in rows:
            if r.freq < 1:
                raise DataError(f"row {r} has non-positive frequency")
            if r.combination != tuple(sorted(set(r.combination))) or not r.combination:
                raise DataError(f"row {r} combination is not a sorted set of AP indices")
            if len(r.combination) > n:
                raise DataError(f"row {r} combination wider than n={n}")
            key = (r.combination, r.cluster)
            if key in seen:
                raise DataError(f"duplicate (combination, cluster) pair {key}")
            seen.add(key)
        self.rows = list(rows)
        self.n = int(n)
        self.cluster_building = dict(cluster_building or {})
        self.skipped = dict(skipped or {})
        self.build_ms = float(build_ms)
        self.per_cluster_ms = dict(per_cluster_ms or {})
        self._index: dict[int | None, dict[tuple[int, ...], dict[int, int]]] = {}
        self._freq_sums: dict[int | None, dict[int, int]] = {}

    def freq_sums(self, building: int | None = None) -> dict[int, int]:
        """Total combination frequency per cluster (within one building's slice)."""
        if building not in self._freq_sums:
            sums: dict[int, int] = defaultdict(int)
            for r in self._rows_for(building):
                sums[r.cluster] += r.freq
            self._freq_sums[building] = dict(sums)
        return self._freq_sums[building]

    def _rows_for(self, building: int | None) -> list[TableRow]:
        if building is None:
            return self.rows
        return [r for r in self.rows if self.cluster_building.get(r.cluster) in (building, None)]

    def _index_for(self, building: int | None) -> dict[tuple[int, ...], dict[int, int]]:
        if building not in self._index:
            index: dict[tuple[int, ...], dict[int, int]] = {}
            for r in self._rows_for(building):
                for size in range(1, len(r.combination) + 1):
                    for sub in combinations(r.combination, size):
                        bucket = index.setdefault(sub, {})
                        bucket[r.cluster] = bucket.get(r.cluster, 0) + r.freq
            self._index[building] = index
        return self._index[building]

    def to_dict(self) -> dict:
        return {
            "format_version": TABLE_FORMAT_VERSION,
            "n": self.n,
            "rows": [[list(r.combination), r.freq, r.cluster] for r in self.rows],
            "cluster_building": {str(k): v for k, v in self.cluster_building.items()},
            "skipped": {str(k): v for k, v in self.skipped.items()},
            "build_ms": self.build_ms,
            "per_cluster_ms": {str(k): v for k, v in self.per_cluster_ms.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ApCombinationTable":
        version = data.get("format_version")
        if version != TABLE_FORMAT_VERSION:
            raise DataError(f"unsupported table format version {version!r}")
        rows = [TableRow(tuple(int(a) for a in comb), int(freq), int(gid)) for comb, freq, gid in data["rows"]]
        return cls(
            rows=rows,
            n=int(data["n"]),
            cluster_building={int(k): v for k, v in data.get("cluster_building", {}).items()},
            skipped={int(k): int(v) for k, v in data.get("skipped", {}).items()},
            build_ms=float(data.get("build_ms", 0.0)),
            per_cluster_ms={int(k): float(v) for k, v in data.get("per_cluster_ms", {}).items()},
        )


def build_table(model: ClusterModel, train: RadioMap, n: int) -> ApCombinationTable:
    """Build the frequency table of every cluster in the model.

    Within a cluster the sum of row frequencies equals the number of member
    fingerprints with at least one detected AP; members without any detected
    AP are skipped and counted.
    """
    model.check_alignment(train)
    rows: list[TableRow] = []
    skipped: dict[int, int] = {}
    per_cluster_ms: dict[int, float] = {}
    t_total = time.perf_counter()
    for gid in range(model.cluster_count):
        t0 = time.perf_counter()
        members = model.members(gid)
        tops = top_n_sets(train.rssi[members], n, sentinel=train.sentinel)
        counter = Counter(t for t in tops if t is not None)
        skipped[gid] = sum(1 for t in tops if t is None)
        rows.extend(TableRow(comb, freq, gid) for comb, freq in sorted(counter.items()))
        per_cluster_ms[gid] = (time.perf_counter() - t0) * 1e3
        if sum(counter.values()) != len(members) - skipped[gid]:
            raise DataError(f"cluster {gid}: frequency sum does not match membership")
    build_ms = (time.perf_counter() - t_total) * 1e3
    return ApCombinationTable(
        rows=rows,
        n=n,
        cluster_building=dict(model.cluster_building),
        skipped=skipped,
        build_ms=build_ms,
        per_cluster_ms=per_cluster_ms,
    )


@dataclass
class AssignResult:
    cluster: int
    scores: dict[int, int]
    fallback: bool  # True when no subset matched and the largest cluster was used


def assign(
    rssi: np.ndarray,
    table: ApCombinationTable,
    *,
    sentinel: float,
    building: int | None = None,
) -> AssignResult:
    """Score every cluster against a query scan and pick the winner.

    Ties go to the cluster with the larger total training membership (table
    frequency sum), then to the lowest cluster id. A query whose subsets
    match nothing falls back to the largest cluster of the routed slice.
    """
    sums = table.freq_sums(building)
    if not sums:
        raise NoModelError(
            "representative table has no rows" + (f" for building {building}" if building is not None else "")
        )
    query = top_n_aps(rssi, table.n, sentinel=sentinel)
    index = table._index_for(building)
    scores: dict[int, int] = defaultdict(int)
    for size in range(1, len(query) + 1):
        for sub in combinations(query, size):
            bucket = index.get(sub)
            if bucket:
                for gid, freq_sum in bucket.items():
                    scores[gid] += freq_sum * size
    if not scores:
        gid = min(sums, key=lambda g: (-sums[g], g))
        return AssignResult(cluster=gid, scores={}, fallback=True)
    gid = min(scores, key=lambda g: (-scores[g], -sums.get(g, 0), g))
    return AssignResult(cluster=gid, scores=dict(scores), fallback=False)
