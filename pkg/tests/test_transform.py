import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fpcluster import (
    ConfigError,
    FeatureSpace,
    Fingerprint,
    PowedConfig,
    feature_matrix,
    features,
    powed,
    raw_clamped,
)

# frozen: (55/105)**2.71828 computed independently at 40-digit precision
POWED_MINUS50_MIN105 = 0.17243866173814033


def test_powed_endpoints():
    cfg = PowedConfig(exponent=2.71828, min=-105.0)
    assert powed(-105.0, cfg) == 0.0
    assert powed(0.0, cfg) == 1.0


def test_powed_frozen_value():
    cfg = PowedConfig(exponent=2.71828, min=-105.0)
    assert powed(-50.0, cfg) == pytest.approx(POWED_MINUS50_MIN105, rel=1e-12)


def test_powed_sentinel_maps_to_zero():
    cfg = PowedConfig(exponent=2.71828, min=-105.0)
    assert powed(100.0, cfg, sentinel=100.0) == 0.0
    arr = powed(np.array([100.0, -50.0, 100.0]), cfg, sentinel=100.0)
    assert arr[0] == 0.0 and arr[2] == 0.0
    assert arr[1] == pytest.approx(POWED_MINUS50_MIN105, rel=1e-12)


def test_powed_clamps_both_sides():
    cfg = PowedConfig(exponent=2.0, min=-100.0)
    assert powed(-130.0, cfg) == 0.0  # below min clamps to min
    assert powed(3.0, cfg) == 1.0  # above 0 dBm clamps to 0


def test_powed_config_validation():
    with pytest.raises(ConfigError):
        PowedConfig(exponent=0.0, min=-100.0)
    with pytest.raises(ConfigError):
        PowedConfig(exponent=2.0, min=5.0)


@settings(max_examples=200, deadline=None)
@given(
    r1=st.floats(min_value=-104.999, max_value=0.0),
    r2=st.floats(min_value=-104.999, max_value=0.0),
    e=st.floats(min_value=0.1, max_value=6.0),
)
def test_powed_strictly_increasing(r1, r2, e):
    # pairs separated by less than float64 resolution at the (r - min) scale
    # cannot be distinguished by any formula; keep a realistic dB separation
    assume(abs(r1 - r2) >= 1e-6)
    cfg = PowedConfig(exponent=e, min=-105.0)
    lo, hi = sorted((r1, r2))
    assert powed(lo, cfg) < powed(hi, cfg)


@settings(max_examples=200, deadline=None)
@given(r=st.floats(min_value=-500.0, max_value=50.0), e=st.floats(min_value=0.1, max_value=6.0))
def test_powed_range(r, e):
    cfg = PowedConfig(exponent=e, min=-105.0)
    assert 0.0 <= powed(r, cfg) <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=-110.0, max_value=0.0), min_size=1, max_size=16))
def test_powed_vector_matches_scalar(values):
    cfg = PowedConfig(exponent=2.71828, min=-111.0)
    vec = powed(np.array(values), cfg)
    for i, v in enumerate(values):
        assert vec[i] == powed(v, cfg)


def test_raw_clamped():
    cfg = PowedConfig(exponent=2.0, min=-100.0)
    out = raw_clamped(np.array([100.0, -50.0, -130.0, 5.0]), cfg, sentinel=100.0)
    assert out.tolist() == [-100.0, -50.0, -100.0, 0.0]


def _fp(rssi, x=2.0, y=3.0, floor=1, building=0):
    return Fingerprint(rssi=np.asarray(rssi, dtype=float), x=x, y=y, floor=floor, building=building, id="q")


def test_features_xyz():
    cfg = PowedConfig(min=-105.0)
    fp = _fp([-50.0], x=2.0, y=3.0, floor=1)
    assert features(fp, FeatureSpace.XYZ, cfg, floor_height=4.0).tolist() == [2.0, 3.0, 4.0]
    # floor height is configurable
    assert features(fp, FeatureSpace.XYZ, cfg, floor_height=3.0).tolist() == [2.0, 3.0, 3.0]


def test_features_rssi_all_sentinel_is_zero_vector():
    cfg = PowedConfig(min=-105.0)
    fp = _fp([100.0, 100.0, 100.0])
    out = features(fp, FeatureSpace.RSSI, cfg, sentinel=100.0)
    assert out.tolist() == [0.0, 0.0, 0.0]


def test_features_rssi_single_full_strength():
    cfg = PowedConfig(min=-105.0)
    fp = _fp([100.0, 0.0, 100.0])
    out = features(fp, FeatureSpace.RSSI, cfg, sentinel=100.0)
    assert out.tolist() == [0.0, 1.0, 0.0]


def test_feature_matrix_matches_per_fingerprint(small_maps, pcfg_for):
    train, _ = small_maps
    cfg = pcfg_for(train)
    for space in (FeatureSpace.XYZ, FeatureSpace.RSSI):
        mat = feature_matrix(train, space, cfg, floor_height=4.0)
        for i in (0, len(train) // 2, len(train) - 1):
            row = features(train.fingerprint(i), space, cfg, floor_height=4.0, sentinel=train.sentinel)
            assert np.array_equal(mat[i], row)
