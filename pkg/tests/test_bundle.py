import json

import numpy as np
import pytest

from fpcluster import (
    Bundle,
    ClusterStrategy,
    DataError,
    FeatureSpace,
    KnnConfig,
    Level,
    Pipeline,
    build_table,
    evaluate,
    fit_clusters,
    load_bundle,
    save_bundle,
)


def test_bundle_round_trip_preserves_predictions(tmp_path, small_maps, pcfg_for):
    train, test = small_maps
    pcfg = pcfg_for(train)
    model = fit_clusters(train, ClusterStrategy(level=Level.BUILDING,
                         space=FeatureSpace.RSSI, k=3, seed=1), pcfg)
    table = build_table(model, train, n=3)
    path = tmp_path / "bundle.json"
    save_bundle(Bundle(model=model, table=table, pcfg=pcfg, floor_height=4.0,
                       sentinel=train.sentinel), str(path))
    back = load_bundle(str(path))
    assert back.sentinel == train.sentinel
    assert back.pcfg == pcfg
    assert np.array_equal(back.model.labels, model.labels)
    assert back.table.rows == table.rows

    cfg = KnnConfig(k=5)
    before = evaluate(test, Pipeline(train, pcfg, cfg, model=model, table=table))
    after = evaluate(test, Pipeline(train, back.pcfg, cfg, model=back.model, table=back.table))
    assert before.mean_e2d == after.mean_e2d and before.fdr == after.fdr


def test_bundle_version_and_parse_errors(tmp_path, small_maps, pcfg_for):
    train, _ = small_maps
    pcfg = pcfg_for(train)
    model = fit_clusters(train, ClusterStrategy(level=Level.BUILDING,
                         space=FeatureSpace.XYZ, k=2, seed=0), pcfg)
    table = build_table(model, train, n=2)
    path = tmp_path / "bundle.json"
    save_bundle(Bundle(model=model, table=table, pcfg=pcfg, floor_height=4.0,
                       sentinel=train.sentinel), str(path))

    blob = json.loads(path.read_text())
    blob["format_version"] = 42
    path.write_text(json.dumps(blob))
    with pytest.raises(DataError):
        load_bundle(str(path))

    path.write_text("{not json")
    with pytest.raises(DataError):
        load_bundle(str(path))
