import math
import numpy as np
import pytest

from src.core.enums import NetKind, ShuffleMode
from src.core.exceptions import DimensionError, RunawayGrowthError
from src.core.models import EnsembleJS, GalmoConfig, NetBundle
from src.nn.galmo import (
    HARD_EXPERT_LIMIT,
    ExpertEnsemble,
    TrainingReport,
    error_quantiles,
    next_threshold,
    train,
    train_epoch,
)

FAST = NetBundle(hidden=12, init_bound=0.1, learning_rate=0.5, hidden_slope=1.0, output_slope=1.0)
FAST_BUNDLES = {NetKind.P: FAST, NetKind.G: FAST}


def _one_hot(i: int, n: int) -> np.ndarray:
    x = np.zeros(n)
    x[i] = 1.0
    return x


def test_quantiles_use_linear_interpolation():
    assert error_quantiles([1.0, 2.0, 3.0, 4.0]) == (2.5, 3.25)
    assert next_threshold([1.0, 2.0, 3.0, 4.0], w=3.0) == pytest.approx(4.75)


def test_first_epoch_never_grows(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 3, 2, rng)
    samples = [(rng.uniform(size=3), rng.uniform(size=2)) for _ in range(10)]
    result = train_epoch(ensemble, samples, math.inf, rng)
    assert len(ensemble) == 1
    assert result.growth == []
    assert len(result.min_errors) == 10


def test_outlier_duplicates_best_expert(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 3, 2, rng)
    samples = [(np.ones(3), np.array([0.2, 0.8]))]
    original = ensemble.experts[0].clone()
    result = train_epoch(ensemble, samples, 0.0, rng)
    assert len(ensemble) == len(ensemble.gates) == 2
    assert result.growth[0].source_expert == 0
    # the original expert is left untouched, the clone took the step
    np.testing.assert_array_equal(ensemble.experts[0].w2, original.w2)
    assert not np.array_equal(ensemble.experts[1].w2, original.w2)
    assert ensemble.experts[1].l1_error(*samples[0]) < original.l1_error(*samples[0])


def test_expert_cap_trains_closest_instead(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 3, 2, rng)
    samples = [(np.ones(3), np.array([0.2, 0.8])), (np.zeros(3), np.array([0.5, 0.5]))]
    result = train_epoch(ensemble, samples, 0.0, rng, GalmoConfig(max_experts=1))
    assert len(ensemble) == 1
    assert result.growth == []


def test_runaway_growth_raises_with_ensemble(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 2, 1, rng)
    while len(ensemble) < HARD_EXPERT_LIMIT:
        ensemble.experts.append(ensemble.experts[0].clone())
        ensemble.gates.append(ensemble.gates[0].clone())
    with pytest.raises(RunawayGrowthError) as info:
        train_epoch(ensemble, [(np.ones(2), np.array([0.3]))], 0.0, rng)
    assert info.value.ensemble is ensemble


def test_sample_dimension_mismatch(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 3, 2, rng)
    with pytest.raises(DimensionError):
        train_epoch(ensemble, [(np.ones(4), np.ones(2))], math.inf, rng)
    with pytest.raises(DimensionError):
        ensemble.predict_all(np.ones(2))


def test_single_valued_mapping_is_learned(rng):
    samples = [(_one_hot(i, 6), np.full(3, 0.1 + 0.15 * i)) for i in range(6)]
    ensemble = ExpertEnsemble.create(NetKind.P, 6, 3, rng, FAST_BUNDLES)
    train(ensemble, samples, GalmoConfig(max_epoch=1500, max_experts=4), rng)
    for x, y in samples:
        assert min(ensemble.errors(x, y)) < 0.1


def test_one_to_many_mapping_grows_and_splits(rng):
    n = 10
    samples = [(_one_hot(i, n), np.full(4, 0.2 + 0.06 * i)) for i in range(n - 2)]
    conflict = _one_hot(n - 1, n)
    low, high = np.full(4, 0.1), np.full(4, 0.9)
    samples += [(conflict, low), (conflict, high)]
    ensemble = ExpertEnsemble.create(NetKind.P, n, 4, rng, FAST_BUNDLES)
    report = TrainingReport()
    train(ensemble, samples, GalmoConfig(max_epoch=2000, max_experts=4), rng, report)
    assert len(ensemble) >= 2
    assert report.growth_events
    gap = float(np.abs(high - low).sum())
    for target in (low, high):
        assert min(ensemble.errors(conflict, target)) < 0.5 * gap


def test_training_report_tracks_every_epoch(rng):
    samples = [(_one_hot(i, 4), np.full(2, 0.3)) for i in range(4)]
    ensemble = ExpertEnsemble.create(NetKind.P, 4, 2, rng, FAST_BUNDLES)
    report = TrainingReport()
    config = GalmoConfig(max_epoch=25, error_log_every=10, shuffle=ShuffleMode.ONCE)
    train(ensemble, samples, config, rng, report)
    assert len(report.theta_history) == len(report.expert_counts) == 25
    assert sorted({row[0] for row in report.error_rows}) == [0, 10, 20, 24]
    assert math.isinf(ensemble.theta_history[0])


def test_shuffling_is_seeded():
    samples = [(_one_hot(i, 5), np.full(2, 0.1 * (i + 1))) for i in range(5)]
    outputs = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        ensemble = ExpertEnsemble.create(NetKind.P, 5, 2, rng, FAST_BUNDLES)
        train(ensemble, samples, GalmoConfig(max_epoch=30), rng)
        outputs.append(ensemble.experts[0].forward(samples[0][0]))
    np.testing.assert_array_equal(outputs[0], outputs[1])


def test_record_round_trip_keeps_gates(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 3, 2, rng)
    train_epoch(ensemble, [(np.ones(3), np.array([0.2, 0.8]))], 0.0, rng)
    ensemble.theta_history = [math.inf, 0.4]
    restored = ExpertEnsemble.from_record(ensemble.to_record(w=3.0))
    assert len(restored) == 2
    assert math.isinf(restored.theta_history[0])
    x = np.ones(3)
    assert restored.gate_values(x) == ensemble.gate_values(x)


def test_outlier_trains_the_copy_it_spawned(rng):
    ensemble = ExpertEnsemble.create(NetKind.R, 3, 1, rng)
    samples = [(np.ones(3), np.array([0.9]))]
    train_epoch(ensemble, samples, 0.0, rng)
    assert ensemble.spawned_for == {1: 0}
    spawned = ensemble.experts[1].clone()
    result = train_epoch(ensemble, samples, 0.0, rng, epoch=1)
    assert len(ensemble) == 2
    assert result.growth == []
    assert ensemble.experts[1].l1_error(*samples[0]) < spawned.l1_error(*samples[0])


def test_literal_growth_spawns_on_every_outlier(rng):
    ensemble = ExpertEnsemble.create(NetKind.R, 3, 1, rng)
    samples = [(np.ones(3), np.array([0.9]))]
    config = GalmoConfig(retrain_own_clone=False)
    for epoch in range(3):
        train_epoch(ensemble, samples, 0.0, rng, config, epoch=epoch)
    assert len(ensemble) == 4


def test_record_keeps_bundles_for_later_growth(rng):
    ensemble = ExpertEnsemble.create(NetKind.P, 3, 2, rng, FAST_BUNDLES)
    record = EnsembleJS.model_validate_json(ensemble.to_record(w=3.0).model_dump_json())
    restored = ExpertEnsemble.from_record(record)
    assert restored.bundles == FAST_BUNDLES
    train_epoch(restored, [(np.ones(3), np.array([0.2, 0.8]))], 0.0, rng)
    assert restored.gates[-1].hidden_dim == FAST.hidden
    assert ExpertEnsemble.from_record(ExpertEnsemble.create(NetKind.P, 3, 2, rng).to_record(w=3.0)).bundles is None
