import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from fpcluster import (
    ApCombinationTable,
    ClusterStrategy,
    ConfigError,
    DataError,
    FeatureSpace,
    KnnConfig,
    Level,
    Pipeline,
    SweepGrid,
    SweepResult,
    SweepSettings,
    TableRow,
    Variant,
    build_table,
    evaluate,
    evaluate_many,
    fit_clusters,
    percentile,
    summarize,
    sweep,
    write_cdf_svg,
    write_per_sample_csv,
    write_report_json,
    write_summary_csv,
)
from fpcluster.clustering import ClusterModel, Scope
from conftest import tiny_map

S = 100.0

P50_1234 = 2.5
P95_1234 = 3.8499999999999996


# ---------------------------------------------------------------------------
# percentile
# ---------------------------------------------------------------------------

def test_percentile_frozen_values():
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert percentile(v, 0.5) == P50_1234
    assert percentile(v, 0.95) == P95_1234
    assert percentile(v, 0.0) == 1.0
    assert percentile(v, 1.0) == 4.0
    assert percentile(np.array([7.0]), 0.3) == 7.0


def test_percentile_errors():
    with pytest.raises(DataError):
        percentile(np.array([]), 0.5)
    with pytest.raises(ConfigError):
        percentile(np.array([1.0]), 1.5)
    with pytest.raises(ConfigError):
        percentile(np.array([1.0]), -0.1)


@hyp_settings(max_examples=150, deadline=None)
@given(
    st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=50),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_percentile_matches_linear_interpolation_oracle(values, p):
    v = sorted(values)
    h = (len(v) - 1) * p
    f = math.floor(h)
    want = v[f] if f + 1 >= len(v) else v[f] + (h - f) * (v[f + 1] - v[f])
    assert percentile(np.array(values), p) == pytest.approx(want, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def test_perfect_prediction_on_training_queries(small_maps, pcfg_for):
    train, _ = small_maps
    pipe = Pipeline(train, pcfg_for(train), KnnConfig(k=3, variant=Variant.WKNN))
    report = evaluate(train, pipe)
    # every query matches itself at distance zero
    assert report.fdr == 1.0
    assert report.mean_e2d == 0.0 and report.p95_e2d == 0.0
    assert report.mean_e2d_cf == 0.0
    assert report.evaluated_count == len(train)
    assert report.undetectable_count == 0


def test_report_internal_consistency(small_maps, pcfg_for):
    train, test = small_maps
    pipe = Pipeline(train, pcfg_for(train), KnnConfig(k=5, variant=Variant.KNN))
    r = evaluate(test, pipe)
    errors = np.array([s.e2d for s in r.per_sample])
    correct = np.array([s.floor_correct for s in r.per_sample])
    assert r.evaluated_count + r.undetectable_count == len(test)
    assert r.correct_floor_count == correct.sum()
    assert r.fdr == pytest.approx(correct.mean())
    assert r.mean_e2d == pytest.approx(errors.mean())
    assert r.p50_e2d == percentile(errors, 0.5)
    assert r.mean_e2d_cf == pytest.approx(errors[correct].mean())
    for s in r.per_sample:
        assert s.e2d == pytest.approx(math.hypot(s.x - s.x_true, s.y - s.y_true))
        assert s.floor_correct == (s.floor == s.floor_true)


def test_undetectable_rows_are_excluded():
    rssi = np.array([[-40.0, S], [S, -50.0], [S, S]])
    train = tiny_map(rssi=rssi[:2], x=[0.0, 4.0], y=[0.0, 0.0], floor=[0, 0])
    test = tiny_map(rssi=rssi, x=[0.0, 4.0, 9.0], y=[0.0, 0.0, 0.0],
                    floor=[0, 0, 0], partition="test")
    from fpcluster import PowedConfig
    pipe = Pipeline(train, PowedConfig(exponent=2.71828, min=train.global_min),
                    KnnConfig(k=1))
    r = evaluate(test, pipe)
    assert r.undetectable_count == 1
    assert r.evaluated_count == 2
    assert {s.id for s in r.per_sample} == {"fp-0", "fp-1"}


def test_zero_score_fallback_is_counted():
    from fpcluster import PowedConfig
    rssi = np.array([[-40.0, S, S], [S, -45.0, S], [-42.0, S, S], [S, -41.0, S]])
    train = tiny_map(rssi=rssi, x=[0, 10, 1, 11], y=[0, 0, 0, 0], floor=[0, 0, 0, 0])
    labels = np.array([0, 1, 0, 1])
    scope = Scope(building=None, floor=None, seed=0, first_gid=0,
                  centroids=np.zeros((2, 3)), iterations=1)
    strategy = ClusterStrategy(level=Level.BUILDING, space=FeatureSpace.RSSI, k=2, pooled=True)
    model = ClusterModel(strategy=strategy, scopes=[scope], labels=labels,
                         ids=train.ids, creation_ms=1.0)
    table = build_table(model, train, n=2)
    pipe = Pipeline(train, PowedConfig(exponent=2.71828, min=train.global_min),
                    KnnConfig(k=1), model=model, table=table)
    test = tiny_map(rssi=np.array([[S, S, -50.0], [-39.0, S, S]]),
                    x=[0.0, 0.0], y=[0.0, 0.0], floor=[0, 0], partition="test")
    r = evaluate(test, pipe)
    assert r.zero_score_fallbacks == 1
    assert r.evaluated_count == 2


def test_evaluate_many_matches_individual_runs(two_building_maps, pcfg_for):
    train, test = two_building_maps
    pcfg = pcfg_for(train)
    model = fit_clusters(train, ClusterStrategy(level=Level.BUILDING,
                         space=FeatureSpace.RSSI, k=3, seed=2), pcfg)
    table = build_table(model, train, n=3)
    cfgs = [KnnConfig(k=k, variant=v) for v in Variant for k in (1, 5)]
    pipe = Pipeline(train, pcfg, cfgs[0], model=model, table=table)
    batch = evaluate_many(test, pipe, cfgs)
    for cfg, joint in zip(cfgs, batch):
        solo = evaluate(test, Pipeline(train, pcfg, cfg, model=model, table=table))
        assert joint.config["variant"] == cfg.variant.value
        assert joint.fdr == solo.fdr
        assert joint.mean_e2d == solo.mean_e2d
        assert joint.p95_e2d_cf == solo.p95_e2d_cf or (
            math.isnan(joint.p95_e2d_cf) and math.isnan(solo.p95_e2d_cf))
        for a, b in zip(joint.per_sample, solo.per_sample):
            assert (a.x, a.y, a.floor, a.cluster, a.id) == (b.x, b.y, b.floor, b.cluster, b.id)


def test_single_cluster_degenerates_to_baseline(two_building_maps, pcfg_for):
    train, test = two_building_maps
    pcfg = pcfg_for(train)
    model = fit_clusters(train, ClusterStrategy(level=Level.BUILDING,
                         space=FeatureSpace.XYZ, k=1, seed=0), pcfg)
    table = build_table(model, train, n=3)
    for variant in Variant:
        cfg = KnnConfig(k=7, variant=variant)
        clustered = evaluate(test, Pipeline(train, pcfg, cfg, model=model, table=table))
        baseline = evaluate(test, Pipeline(train, pcfg, cfg))
        assert clustered.mean_e2d == baseline.mean_e2d
        assert clustered.fdr == baseline.fdr
        for a, b in zip(clustered.per_sample, baseline.per_sample):
            assert (a.x, a.y, a.floor) == (b.x, b.y, b.floor)


def test_evaluate_many_argument_errors(small_maps, pcfg_for):
    train, test = small_maps
    pipe = Pipeline(train, pcfg_for(train), KnnConfig(k=1))
    with pytest.raises(ConfigError):
        evaluate_many(test, pipe, [])
    from fpcluster import Representation
    mixed = [KnnConfig(k=1), KnnConfig(k=1, representation=Representation.RAW)]
    with pytest.raises(ConfigError):
        evaluate_many(test, pipe, mixed)
    other = tiny_map(rssi=np.array([[-40.0]]), x=[0.0], y=[0.0], floor=[0],
                     sentinel=0.0, partition="test")
    with pytest.raises(DataError):
        evaluate_many(other, pipe, [KnnConfig(k=1)])


def test_config_snapshot_names_conventions(small_maps, pcfg_for):
    train, test = small_maps
    pipe = Pipeline(train, pcfg_for(train), KnnConfig(k=3))
    r = evaluate(test, pipe)
    conv = r.config["conventions"]
    assert "linear" in conv["percentile_rule"]
    assert conv["assignment_time_warmup_queries"] == 5
    assert r.config["powed_exponent"] == 2.71828
    assert r.config["baseline"] is True and r.config["knn_k"] == 3


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SMALL_GRID = SweepGrid(
    levels=(Level.BUILDING,),
    spaces=(FeatureSpace.RSSI,),
    n_values=(2,),
    k_clusters=(2,),
    knn_ks=(1, 3),
    variants=(Variant.WKNN,),
    include_baseline=True,
)


def test_sweep_order_and_equivalence(small_maps, pcfg_for):
    train, test = small_maps
    result = sweep(train, test, SMALL_GRID, SweepSettings(seed=0))
    assert len(result.reports) == 4  # baseline k in {1,3} + one unit k in {1,3}
    assert [r.config["baseline"] for r in result.reports] == [True, True, False, False]
    assert [r.config["knn_k"] for r in result.reports] == [1, 3, 1, 3]

    pcfg = pcfg_for(train)
    model = fit_clusters(train, ClusterStrategy(level=Level.BUILDING,
                         space=FeatureSpace.RSSI, k=2, seed=0), pcfg)
    table = build_table(model, train, n=2)
    direct = evaluate(test, Pipeline(train, pcfg, KnnConfig(k=3, variant=Variant.WKNN),
                                     model=model, table=table))
    swept = result.reports[3]
    assert swept.mean_e2d == direct.mean_e2d
    assert swept.fdr == direct.fdr
    assert swept.config["k_clusters"] == 2 and swept.config["n_aps"] == 2


def test_sweep_parallel_matches_serial(small_maps):
    train, test = small_maps
    serial = sweep(train, test, SMALL_GRID)
    parallel = sweep(train, test, SMALL_GRID, jobs=2)
    assert len(serial.reports) == len(parallel.reports)
    for a, b in zip(serial.reports, parallel.reports):
        assert a.config == b.config
        assert a.mean_e2d == b.mean_e2d and a.fdr == b.fdr


def test_sweep_records_infeasible_units(small_maps):
    train, test = small_maps
    grid = SweepGrid(levels=(Level.BUILDING,), spaces=(FeatureSpace.XYZ,),
                     n_values=(2,), k_clusters=(2, 10_000), knn_ks=(1,),
                     variants=(Variant.KNN,), include_baseline=False)
    result = sweep(train, test, grid)
    assert len(result.skipped) == 1
    skip = result.skipped[0]
    assert skip["k_clusters"] == 10_000 and "distinct" in skip["reason"]
    assert {r.config["k_clusters"] for r in result.reports} == {2}


def test_summarize_and_csv(tmp_path, small_maps):
    train, test = small_maps
    result = sweep(train, test, SMALL_GRID)
    rows = summarize(result)
    groups = {(r["variant"], r["group"]) for r in rows}
    assert ("wknn", "baseline") in groups and ("wknn", "rssi") in groups
    for row in rows:
        if row["group"] == "baseline":
            assert row["k_clusters"] is None
        else:
            assert row["k_clusters"] == 2
    # best pick: minimal mean_e2d among that group's reports
    rssi_reports = [r for r in result.reports if not r.config["baseline"]]
    assert min(r.mean_e2d for r in rssi_reports) == \
        next(row["mean_e2d"] for row in rows if row["group"] == "rssi")

    path = tmp_path / "summary.csv"
    write_summary_csv(rows, str(path))
    with open(path, newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert list(parsed[0].keys()) == [
        "variant", "level", "group", "n_aps", "k_clusters", "knn_k",
        "mean_e2d_cf", "p50_e2d_cf", "p95_e2d_cf", "mean_e2d", "p50_e2d", "p95_e2d", "fdr"]
    assert len(parsed) == len(rows)


def test_best_tie_breaks_prefer_higher_fdr_then_smaller_k():
    from fpcluster.evaluation import _best

    def fake(mean_e2d, fdr, k_clusters, n_aps, knn_k):
        cfg = {"k_clusters": k_clusters, "n_aps": n_aps, "knn_k": knn_k,
               "baseline": False, "level": "building", "space": "rssi", "variant": "wknn"}
        return type("R", (), {"mean_e2d": mean_e2d, "fdr": fdr, "config": cfg})()

    a = fake(5.0, 0.9, 8, 3, 5)
    b = fake(5.0, 0.95, 8, 3, 5)
    c = fake(5.0, 0.95, 4, 3, 5)
    assert _best([a, b, c]) is c


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------

def test_report_writers(tmp_path, small_maps, pcfg_for):
    train, test = small_maps
    pipe = Pipeline(train, pcfg_for(train), KnnConfig(k=3))
    r = evaluate(test, pipe)

    jpath = tmp_path / "report.json"
    write_report_json(r, str(jpath))
    blob = json.loads(jpath.read_text())
    assert blob["fdr"] == r.fdr and len(blob["per_sample"]) == r.evaluated_count
    write_report_json(r, str(jpath), include_samples=False)
    assert "per_sample" not in json.loads(jpath.read_text())

    cpath = tmp_path / "samples.csv"
    write_per_sample_csv(r, str(cpath))
    with open(cpath, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == r.evaluated_count
    assert float(rows[0]["e2d"]) == r.per_sample[0].e2d  # repr round trip

    spath = tmp_path / "cdf.svg"
    write_cdf_svg(r, str(spath))
    content = spath.read_text()
    assert content.lstrip().startswith("<?xml") and "svg" in content
