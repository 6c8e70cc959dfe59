import numpy as np
import pytest

from fpcluster import SynthSpec, SynthSpecError, path_loss_rssi, synth_radio_map, synth_rssi_matrix


def test_path_loss_at_ten_reference_distances():
    # sigma=0, gamma=2: ten reference distances cost exactly 20 dB
    spec = SynthSpec(gamma=2.0, sigma=0.0, p0=-30.0, d0=1.0)
    assert path_loss_rssi(10.0, spec) == -30.0 - 20.0
    assert path_loss_rssi(1.0, spec) == -30.0
    # inside the reference distance the model saturates at p0
    assert path_loss_rssi(0.0, spec) == -30.0


def test_ap_at_sample_location_reads_p0_exactly():
    spec = SynthSpec(sigma=0.0, p0=-30.0, ap_positions=((0, 1, 5.0, 6.0),))
    pos = np.array([[5.0, 6.0, 1 * spec.floor_height]])
    floors = np.array([1])
    ap_xyz = np.array([[5.0, 6.0, 1 * spec.floor_height]])
    ap_floor = np.array([1])
    rssi = synth_rssi_matrix(pos, floors, spec, ap_xyz, ap_floor)
    assert rssi[0, 0] == -30.0


def test_floor_attenuation_applied_per_crossed_floor():
    spec = SynthSpec(sigma=0.0, p0=-30.0, gamma=2.0, d0=1.0, floor_height=3.0,
                     floor_atten=7.0, threshold=-95.0)
    # AP on floor 0 at origin; sample on floor 2 directly above at d = 6 m
    pos = np.array([[0.0, 0.0, 6.0]])
    rssi = synth_rssi_matrix(pos, np.array([2]), spec, np.array([[0.0, 0.0, 0.0]]), np.array([0]))
    expected = -30.0 - 20.0 * np.log10(6.0) - 2 * 7.0
    assert rssi[0, 0] == pytest.approx(expected, abs=1e-12)


def test_below_threshold_becomes_sentinel():
    spec = SynthSpec(sigma=0.0, p0=-90.0, gamma=2.0, threshold=-95.0)
    pos = np.array([[0.0, 0.0, 0.0], [200.0, 0.0, 0.0]])
    ap = np.array([[0.0, 0.0, 0.0]])
    rssi = synth_rssi_matrix(pos, np.array([0, 0]), spec, ap, np.array([0]))
    assert rssi[0, 0] == -90.0
    assert rssi[1, 0] == spec.sentinel  # -90 - 46 dB is far below threshold


def test_determinism_and_shapes():
    spec = SynthSpec(buildings=2, floors=3, aps_per_floor=4, train_per_floor=10, test_per_floor=5)
    t1, e1 = synth_radio_map(spec, seed=99)
    t2, e2 = synth_radio_map(spec, seed=99)
    assert np.array_equal(t1.rssi, t2.rssi) and np.array_equal(e1.rssi, e2.rssi)
    assert np.array_equal(t1.x, t2.x) and np.array_equal(e1.y, e2.y)
    assert len(t1) == 2 * 3 * 10 and len(e1) == 2 * 3 * 5
    assert t1.ap_count == 2 * 3 * 4
    t3, _ = synth_radio_map(spec, seed=100)
    assert not np.array_equal(t1.rssi, t3.rssi)


def test_partitions_and_global_min():
    spec = SynthSpec(buildings=1, floors=2, aps_per_floor=4, train_per_floor=10, test_per_floor=5)
    train, test = synth_radio_map(spec, seed=1)
    assert train.partition == "train" and test.partition == "test"
    assert train.global_min is not None and test.global_min is None
    detected = train.rssi[train.detected]
    assert detected.min() >= spec.threshold and detected.max() <= 0.0


def test_buildings_are_radio_isolated():
    # an AP of one building must never be detected in the other
    spec = SynthSpec(buildings=2, floors=1, aps_per_floor=3, train_per_floor=8,
                     test_per_floor=2, sigma=0.0)
    train, _ = synth_radio_map(spec, seed=3)
    aps_per_building = spec.floors * spec.aps_per_floor
    b0 = train.building == 0
    assert not train.detected[b0][:, aps_per_building:].any()
    assert not train.detected[~b0][:, :aps_per_building].any()


def test_spec_validation():
    with pytest.raises(SynthSpecError):
        synth_radio_map(SynthSpec(aps_per_floor=0), seed=0)
    with pytest.raises(SynthSpecError):
        synth_radio_map(SynthSpec(train_per_floor=0), seed=0)
    with pytest.raises(SynthSpecError):
        synth_radio_map(SynthSpec(buildings=0), seed=0)
    with pytest.raises(SynthSpecError):
        synth_radio_map(SynthSpec(threshold=-150.0), seed=0)
    with pytest.raises(SynthSpecError):
        synth_radio_map(SynthSpec(sigma=-1.0), seed=0)
