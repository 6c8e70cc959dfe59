"""Evaluation metrics, the sweep harness and report output.

Metrics follow the usual fingerprinting conventions: floor detection rate
(fraction of samples with the floor predicted exactly), mean 2-D positioning
error on the x-y plane, the same error restricted to correct-floor samples,
and 50th/95th percentiles of both. Percentiles use linear interpolation
between closest ranks (inclusive), the rule numpy calls "linear"; every
report names it so numbers stay comparable.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assignment import build_table
from .clustering import ClusterModel, ClusterStrategy, Level
from .errors import ConfigError, DataError, DegenerateDataError, InfeasibleKError
from .ingest import RadioMap
from .localisation import (
    KnnConfig,
    Pipeline,
    Variant,
    ZERO_DISTANCE,
    _estimate_from_sorted,
    _sorted_neighbours,
)
from .transform import (
    DEFAULT_EXPONENT,
    DEFAULT_FLOOR_HEIGHT,
    FeatureSpace,
    PowedConfig,
    Representation,
    rssi_features,
)

PERCENTILE_RULE = "linear interpolation between closest ranks (inclusive)"
TIMING_WARMUP_QUERIES = 5


def percentile(values, p: float) -> float:
    """Percentile with linear-inclusive interpolation. ``p`` is a fraction in [0, 1]."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DataError("percentile of an empty value list is undefined")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"percentile fraction must lie in [0, 1], got {p}")
    return float(np.quantile(arr, p, method="linear"))


@dataclass
class SampleResult:
    id: str
    cluster: int | None
    x: float
    y: float
    floor: int
    x_true: float
    y_true: float
    floor_true: int
    e2d: float
    floor_correct: bool
    assignment_ms: float


@dataclass
class EvaluationReport:
    """Aggregates, counters, timing and the full config snapshot of one run."""

    per_sample: list[SampleResult]
    fdr: float
    mean_e2d: float
    p50_e2d: float
    p95_e2d: float
    mean_e2d_cf: float
    p50_e2d_cf: float
    p95_e2d_cf: float
    correct_floor_count: int
    evaluated_count: int
    undetectable_count: int
    zero_score_fallbacks: int
    cluster_creation_ms: float
    table_build_ms: float
    mean_assignment_ms: float
    config: dict

    def to_dict(self, include_samples: bool = True) -> dict:
        def clean(v):
            if isinstance(v, float) and math.isnan(v):
                return None
            return v

        out = {
            "fdr": clean(self.fdr),
            "mean_e2d": clean(self.mean_e2d),
            "p50_e2d": clean(self.p50_e2d),
            "p95_e2d": clean(self.p95_e2d),
            "mean_e2d_cf": clean(self.mean_e2d_cf),
            "p50_e2d_cf": clean(self.p50_e2d_cf),
            "p95_e2d_cf": clean(self.p95_e2d_cf),
            "correct_floor_count": self.correct_floor_count,
            "evaluated_count": self.evaluated_count,
            "undetectable_count": self.undetectable_count,
            "zero_score_fallbacks": self.zero_score_fallbacks,
            "cluster_creation_ms": self.cluster_creation_ms,
            "table_build_ms": self.table_build_ms,
            "mean_assignment_ms": self.mean_assignment_ms,
            "config": self.config,
        }
        if include_samples:
            out["per_sample"] = [
                {
                    "id": s.id,
                    "cluster": s.cluster,
                    "x": s.x,
                    "y": s.y,
                    "floor": s.floor,
                    "x_true": s.x_true,
                    "y_true": s.y_true,
                    "floor_true": s.floor_true,
                    "e2d": s.e2d,
                    "floor_correct": s.floor_correct,
                    "assignment_ms": s.assignment_ms,
                }
                for s in self.per_sample
            ]
        return out


def config_snapshot(pipeline: Pipeline, cfg: KnnConfig) -> dict:
    model = pipeline.model
    snap: dict = {
        "baseline": model is None,
        "level": None if model is None else model.strategy.level.value,
        "space": None if model is None else model.strategy.space.value,
        "k_clusters": None if model is None else model.strategy.k,
        "n_aps": None if pipeline.table is None else pipeline.table.n,
        "variant": cfg.variant.value,
        "knn_k": cfg.k,
        "representation": cfg.representation.value,
        "powed_exponent": pipeline.pcfg.exponent,
        "powed_min_dbm": pipeline.pcfg.min,
        "floor_height": pipeline.floor_height,
        "routing": pipeline.routing,
        "sentinel": pipeline.train.sentinel,
        "train_fingerprints": len(pipeline.train),
        "ap_count": pipeline.train.ap_count,
        "conventions": {
            "distance": "euclidean",
            "percentile_rule": PERCENTILE_RULE,
            "top_n_tie_break": "equal RSSI ranked by lower AP index",
            "assignment_tie_break": "higher score, then larger training membership, then lower cluster id",
            "floor_tie_break": "lowest floor label",
            "zero_distance_epsilon": ZERO_DISTANCE,
            "assignment_time_warmup_queries": TIMING_WARMUP_QUERIES,
        },
    }
    if model is not None:
        snap["kmeans"] = {
            "seed": model.strategy.seed,
            "max_iter": model.strategy.max_iter,
            "tol": model.strategy.tol,
            "init": model.strategy.init,
            "pooled": model.strategy.pooled,
        }
    return snap


def _aggregate(
    samples: list[SampleResult],
    times: list[float],
    undetectable: int,
    fallbacks: int,
    pipeline: Pipeline,
    cfg: KnnConfig,
) -> EvaluationReport:
    if not samples:
        raise DegenerateDataError("no evaluable fingerprint in the test partition")
    errors = np.array([s.e2d for s in samples], dtype=np.float64)
    correct = np.array([s.floor_correct for s in samples], dtype=bool)
    cf = errors[correct]
    nan = float("nan")
    measured = times[TIMING_WARMUP_QUERIES:] if len(times) > TIMING_WARMUP_QUERIES else times
    return EvaluationReport(
        per_sample=samples,
        fdr=float(correct.mean()),
        mean_e2d=float(errors.mean()),
        p50_e2d=percentile(errors, 0.5),
        p95_e2d=percentile(errors, 0.95),
        mean_e2d_cf=float(cf.mean()) if cf.size else nan,
        p50_e2d_cf=percentile(cf, 0.5) if cf.size else nan,
        p95_e2d_cf=percentile(cf, 0.95) if cf.size else nan,
        correct_floor_count=int(correct.sum()),
        evaluated_count=len(samples),
        undetectable_count=undetectable,
        zero_score_fallbacks=fallbacks,
        cluster_creation_ms=0.0 if pipeline.model is None else pipeline.model.creation_ms,
        table_build_ms=0.0 if pipeline.table is None else pipeline.table.build_ms,
        mean_assignment_ms=float(np.mean(measured)) if measured else 0.0,
        config=config_snapshot(pipeline, cfg),
    )


def evaluate_many(test: RadioMap, pipeline: Pipeline, cfgs: list[KnnConfig]) -> list[EvaluationReport]:
    """Evaluate several KNN configs in one pass over the test set.

    All configs must share one representation; cluster assignment and the
    sorted neighbour lists are computed once per query, so every returned
    report is identical to an independent evaluate() with that config.
    """
    if not cfgs:
        raise ConfigError("no KNN config to evaluate")
    reps = {c.representation for c in cfgs}
    if len(reps) != 1:
        raise ConfigError("evaluate_many needs a single representation across configs")
    representation = cfgs[0].representation
    if test.sentinel != pipeline.train.sentinel:
        raise DataError(
            f"test sentinel {test.sentinel} differs from training sentinel {pipeline.train.sentinel}"
        )

    model = pipeline.model
    per_cfg: list[list[SampleResult]] = [[] for _ in cfgs]
    times: list[float] = []
    undetectable = 0
    fallbacks = 0
    for i in range(len(test)):
        if not test.detected[i].any():
            undetectable += 1
            continue
        query = test.fingerprint(i)
        t0 = time.perf_counter()
        key, fb = pipeline.route_ex(query)
        dt_ms = (time.perf_counter() - t0) * 1e3
        times.append(dt_ms)
        fallbacks += int(fb)
        gid = key[1] if key[0] == "gid" else None

        if pipeline.estimator is not None:
            est = pipeline.estimator(query, pipeline.members_of(key), pipeline.pcfg)
            answers = [(est.x, est.y, est.floor)] * len(cfgs)
        else:
            feats = pipeline.group_features(key, representation)
            gx, gy, gfloor = pipeline.group_truth(key)
            qvec = rssi_features(query.rssi, representation, pipeline.pcfg, test.sentinel)
            d_sorted, order = _sorted_neighbours(qvec, feats)
            answers = []
            for cfg in cfgs:
                px, py, fl, _ = _estimate_from_sorted(d_sorted, order, gx, gy, gfloor, cfg.k, cfg.variant)
                answers.append((px, py, fl))

        for j, (px, py, fl) in enumerate(answers):
            if gid is not None and model.strategy.level == Level.FLOOR:
                fl = int(model.cluster_floor[gid])
            e2d = float(np.hypot(px - query.x, py - query.y))
            per_cfg[j].append(
                SampleResult(
                    id=query.id,
                    cluster=gid,
                    x=px,
                    y=py,
                    floor=fl,
                    x_true=query.x,
                    y_true=query.y,
                    floor_true=query.floor,
                    e2d=e2d,
                    floor_correct=fl == query.floor,
                    assignment_ms=dt_ms,
                )
            )

    return [
        _aggregate(per_cfg[j], times, undetectable, fallbacks, pipeline, cfg)
        for j, cfg in enumerate(cfgs)
    ]


def evaluate(test: RadioMap, pipeline: Pipeline) -> EvaluationReport:
    """Per-sample errors and aggregate metrics of one configured pipeline."""
    return evaluate_many(test, pipeline, [pipeline.knn])[0]


# ---------------------------------------------------------------------------
# sweep harness


@dataclass(frozen=True)
class SweepSettings:
    """Knobs shared by every combination of a sweep."""

    exponent: float = DEFAULT_EXPONENT
    floor_height: float = DEFAULT_FLOOR_HEIGHT
    seed: int = 0
    representation: Representation = Representation.POWED
    routing: str = "truth"
    max_iter: int = 300
    tol: float = 1e-4
    init: str = "sample"


@dataclass(frozen=True)
class SweepGrid:
    """The hyperparameter grid: clustering level/space/K, table width N, KNN k and variant."""

    levels: tuple[Level, ...] = (Level.BUILDING,)
    spaces: tuple[FeatureSpace, ...] = (FeatureSpace.XYZ, FeatureSpace.RSSI)
    n_values: tuple[int, ...] = (1, 2, 3, 4, 5)
    k_clusters: tuple[int, ...] = (2, 4, 8)
    knn_ks: tuple[int, ...] = (1, 3, 5, 7, 9, 11, 13)
    variants: tuple[Variant, ...] = (Variant.KNN, Variant.WKNN, Variant.WKNN_T)
    include_baseline: bool = True


@dataclass
class SweepResult:
    reports: list[EvaluationReport]
    skipped: list[dict] = field(default_factory=list)


_WORKER: dict = {}


def _init_worker(train: RadioMap, test: RadioMap, grid: SweepGrid, settings: SweepSettings) -> None:
    _WORKER["args"] = (train, test, grid, settings)


def _knn_cfgs(grid: SweepGrid, settings: SweepSettings) -> list[KnnConfig]:
    return [
        KnnConfig(k=k, variant=v, representation=settings.representation)
        for v in grid.variants
        for k in grid.knn_ks
    ]


def _pcfg(train: RadioMap, settings: SweepSettings) -> PowedConfig:
    gmin = train.global_min
    if gmin is None:
        raise DataError("training map carries no global minimum; load it as the train partition")
    return PowedConfig(exponent=settings.exponent, min=gmin)


def _run_unit(unit: tuple) -> tuple[list[dict], list[dict]]:
    """Evaluate one sweep unit; returns (report dicts, skip records)."""
    train, test, grid, settings = _WORKER["args"]
    pcfg = _pcfg(train, settings)
    cfgs = _knn_cfgs(grid, settings)
    if unit[0] == "baseline":
        pipeline = Pipeline(
            train, pcfg, cfgs[0], None, None,
            floor_height=settings.floor_height, routing=settings.routing,
        )
        reports = evaluate_many(test, pipeline, cfgs)
        return [r.to_dict() for r in reports], []

    _, level, space, k_clusters = unit
    strategy = ClusterStrategy(
        level=level, space=space, k=k_clusters, seed=settings.seed,
        max_iter=settings.max_iter, tol=settings.tol, init=settings.init,
    )
    try:
        from .clustering import fit_clusters

        model = fit_clusters(train, strategy, pcfg, floor_height=settings.floor_height)
    except InfeasibleKError as exc:
        return [], [
            {"level": level.value, "space": space.value, "k_clusters": k_clusters, "reason": str(exc)}
        ]
    out: list[dict] = []
    for n in grid.n_values:
        table = build_table(model, train, n)
        pipeline = Pipeline(
            train, pcfg, cfgs[0], model, table,
            floor_height=settings.floor_height, routing=settings.routing,
        )
        out.extend(r.to_dict() for r in evaluate_many(test, pipeline, cfgs))
    return out, []


def _report_from_dict(data: dict) -> EvaluationReport:
    samples = [
        SampleResult(
            id=s["id"], cluster=s["cluster"], x=s["x"], y=s["y"], floor=s["floor"],
            x_true=s["x_true"], y_true=s["y_true"], floor_true=s["floor_true"],
            e2d=s["e2d"], floor_correct=s["floor_correct"], assignment_ms=s["assignment_ms"],
        )
        for s in data.get("per_sample", [])
    ]

    def num(v):
        return float("nan") if v is None else float(v)

    return EvaluationReport(
        per_sample=samples,
        fdr=num(data["fdr"]),
        mean_e2d=num(data["mean_e2d"]),
        p50_e2d=num(data["p50_e2d"]),
        p95_e2d=num(data["p95_e2d"]),
        mean_e2d_cf=num(data["mean_e2d_cf"]),
        p50_e2d_cf=num(data["p50_e2d_cf"]),
        p95_e2d_cf=num(data["p95_e2d_cf"]),
        correct_floor_count=int(data["correct_floor_count"]),
        evaluated_count=int(data["evaluated_count"]),
        undetectable_count=int(data["undetectable_count"]),
        zero_score_fallbacks=int(data["zero_score_fallbacks"]),
        cluster_creation_ms=float(data["cluster_creation_ms"]),
        table_build_ms=float(data["table_build_ms"]),
        mean_assignment_ms=float(data["mean_assignment_ms"]),
        config=data["config"],
    )


def sweep(
    train: RadioMap,
    test: RadioMap,
    grid: SweepGrid,
    settings: SweepSettings | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Evaluate the whole grid; results come back in grid order.

    One cluster model per (level, space, K) is fitted once and reused across
    every N, variant and k. Units run in parallel worker processes when
    ``jobs`` > 1; ordering does not depend on scheduling.
    """
    settings = settings or SweepSettings()
    units: list[tuple] = []
    if grid.include_baseline:
        units.append(("baseline",))
    for level in grid.levels:
        for space in grid.spaces:
            for k_clusters in grid.k_clusters:
                units.append(("cluster", level, space, k_clusters))

    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(
            max_workers=min(jobs, len(units)),
            initializer=_init_worker,
            initargs=(train, test, grid, settings),
        ) as pool:
            results = list(pool.map(_run_unit, units))
    else:
        _init_worker(train, test, grid, settings)
        results = [_run_unit(u) for u in units]

    reports: list[EvaluationReport] = []
    skipped: list[dict] = []
    for report_dicts, skips in results:
        reports.extend(_report_from_dict(d) for d in report_dicts)
        skipped.extend(skips)
    return SweepResult(reports=reports, skipped=skipped)


# ---------------------------------------------------------------------------
# report output


_SUMMARY_METRICS = ("mean_e2d_cf", "p50_e2d_cf", "p95_e2d_cf", "mean_e2d", "p50_e2d", "p95_e2d", "fdr")


def _best(reports: list[EvaluationReport]) -> EvaluationReport | None:
    """Lowest mean 2-D error; ties to higher FDR, then smaller K, N and k."""

    def key(r: EvaluationReport):
        c = r.config
        return (
            r.mean_e2d,
            -r.fdr,
            c.get("k_clusters") or 0,
            c.get("n_aps") or 0,
            c.get("knn_k") or 0,
        )

    return min(reports, key=key) if reports else None


def summarize(result: SweepResult) -> list[dict]:
    """Best-cell summary rows: per variant and level, baseline plus one row per space."""
    reports = result.reports
    rows: list[dict] = []
    variants = sorted({r.config["variant"] for r in reports})
    levels = sorted({r.config["level"] for r in reports if r.config["level"]})
    for variant in variants:
        of_variant = [r for r in reports if r.config["variant"] == variant]
        baseline = _best([r for r in of_variant if r.config["baseline"]])
        for level in levels or [None]:
            groups: list[tuple[str, EvaluationReport | None]] = [("baseline", baseline)]
            for space in ("xyz", "rssi"):
                cell = _best(
                    [
                        r
                        for r in of_variant
                        if not r.config["baseline"]
                        and r.config["level"] == level
                        and r.config["space"] == space
                    ]
                )
                groups.append((space, cell))
            for group, rep in groups:
                if rep is None:
                    continue
                row = {
                    "variant": variant,
                    "level": level,
                    "group": group,
                    "n_aps": rep.config["n_aps"],
                    "k_clusters": rep.config["k_clusters"],
                    "knn_k": rep.config["knn_k"],
                }
                for m in _SUMMARY_METRICS:
                    row[m] = getattr(rep, m)
                rows.append(row)
    return rows


def write_summary_csv(rows: list[dict], path: str) -> None:
    cols = ["variant", "level", "group", "n_aps", "k_clusters", "knn_k", *_SUMMARY_METRICS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c) for c in cols})


def write_report_json(report: EvaluationReport, path: str, include_samples: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(include_samples=include_samples), fh, indent=2)
        fh.write("\n")


def write_per_sample_csv(report: EvaluationReport, path: str) -> None:
    cols = [
        "id", "cluster", "x", "y", "floor", "x_true", "y_true", "floor_true",
        "e2d", "floor_correct", "assignment_ms",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for s in report.per_sample:
            writer.writerow([
                s.id, s.cluster, repr(s.x), repr(s.y), s.floor,
                repr(s.x_true), repr(s.y_true), s.floor_true,
                repr(s.e2d), int(s.floor_correct), repr(s.assignment_ms),
            ])


def write_cdf_svg(report: EvaluationReport, path: str) -> None:
    """Empirical CDF of the 2-D error as an SVG plot."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    errors = np.sort(np.array([s.e2d for s in report.per_sample]))
    frac = np.arange(1, errors.size + 1) / errors.size
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.step(errors, frac, where="post")
    ax.set_xlabel("2-D positioning error")
    ax.set_ylabel("fraction of samples")
    ax.set_ylim(0, 1)
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
