"""Curve computation, normalization, peaks, onsets, comparisons, and I/O."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decodewin.curves import (
    CurveMeta,
    DecodabilityCurve,
    batched_accuracy,
    compare_curves,
    compute_curve,
    curve_from_json_dict,
    curve_to_json_dict,
    decodability_onset,
    find_peak,
    normalize_curve,
    read_curve,
    read_curve_csv,
    read_curve_json,
    thread_count,
    write_curve_csv,
    write_curve_json,
)
from decodewin.errors import ComputationError, FormatError, ValidationError
from decodewin.linclass import TrainConfig, train_softmax
from decodewin.tensorio import FeatureMatrix, PhoneRecord
from decodewin.windowing import (
    FoldPlan,
    WindowSpec,
    build_offset_dataset,
    frame_index,
    make_folds,
)


def onehot_corpus(n_utts=6, seconds=8.0, k=4, rate=50.0, seed=0):
    """Noiseless features that one-hot encode the current phone."""
    rng = np.random.default_rng(seed)
    labels = ["A" + chr(65 + i) for i in range(k)]
    matrices, records, classes_by_utt = [], [], {}
    for u in range(n_utts):
        uid = f"u{u}"
        frames = int(seconds * rate)
        classes = np.zeros(frames, dtype=np.int64)
        t = 0.0
        while t < seconds:
            dur = float(rng.uniform(0.06, 0.2))
            c = int(rng.integers(k))
            records.append(PhoneRecord(uid, labels[c], t, t + dur))
            start = frame_index(t, rate)
            stop = min(frame_index(t + dur, rate), frames)
            classes[start:stop] = c
            t += dur
        data = np.zeros((frames, k), dtype=np.float32)
        data[np.arange(frames), classes] = 1.0
        matrices.append(FeatureMatrix(uid, rate, data))
        classes_by_utt[uid] = classes
    return matrices, records, classes_by_utt, labels


def curve_of(accs, step_ms=40.0, start_ms=None, **meta):
    n = len(accs)
    if start_ms is None:
        start_ms = -(n // 2) * step_ms
    return DecodabilityCurve(
        offsets_ms=tuple(start_ms + i * step_ms for i in range(n)),
        accuracies=tuple(accs),
        n_samples=tuple(100 for _ in accs),
        meta=CurveMeta(**meta),
    )


class TestComputeCurve:
    def test_onehot_features_track_label_match_rate(self):
        matrices, records, classes_by_utt, labels = onehot_corpus()
        spec = WindowSpec(window_ms=200.0, frame_rate_hz=50.0)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds([m.utterance_id for m in matrices], 2, seed=0)
        curve = compute_curve(dataset, plan, batches=1)

        # Independent expectation: how often does the frame at onset+j still
        # (or already) carry the phone's own class?
        label_id = {p: i for i, p in enumerate(labels)}
        for idx, j in enumerate(spec.offsets):
            hits, total = 0, 0
            for r in records:
                k0 = frame_index(r.onset_s, 50.0)
                k = k0 + j
                classes = classes_by_utt[r.utterance_id]
                if 0 <= k < len(classes):
                    total += 1
                    hits += int(classes[k] == label_id[r.phone])
            expected = hits / total
            assert curve.n_samples[idx] == total
            assert curve.accuracies[idx] == pytest.approx(expected, abs=0.06)
        assert curve.accuracies[spec.offsets.index(0)] == 1.0

    def test_fold_relabeling_is_bitwise_invariant(self):
        matrices, records, _, _ = onehot_corpus(n_utts=4, seconds=4.0)
        spec = WindowSpec(window_ms=120.0, frame_rate_hz=50.0)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds([m.utterance_id for m in matrices], 2, seed=0)
        relabeled = FoldPlan(
            n_folds=2,
            seed=plan.seed,
            assignment={u: 1 - f for u, f in plan.assignment.items()},
        )
        a = compute_curve(dataset, plan, batches=4)
        b = compute_curve(dataset, relabeled, batches=4)
        assert a.accuracies == b.accuracies

    def test_thread_count_does_not_change_results(self):
        matrices, records, _, _ = onehot_corpus(n_utts=4, seconds=4.0)
        spec = WindowSpec(window_ms=120.0, frame_rate_hz=50.0)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds([m.utterance_id for m in matrices], 2, seed=0)
        serial = compute_curve(dataset, plan, threads=1)
        threaded = compute_curve(dataset, plan, threads=4)
        assert serial.accuracies == threaded.accuracies

    def test_sparse_offsets_are_missing_not_zero(self):
        rate = 50.0
        frames = 300
        records = []
        for u in range(2):
            for i in range(30):
                records.append(
                    PhoneRecord(f"u{u}", "AA" if i % 2 else "AB", 0.04, 0.06)
                )
        matrices = [
            FeatureMatrix(f"u{u}", rate, np.random.default_rng(u).normal(size=(frames, 3)))
            for u in range(2)
        ]
        spec = WindowSpec(window_ms=200.0, frame_rate_hz=rate)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds(["u0", "u1"], 2, seed=0)
        curve = compute_curve(dataset, plan, min_samples=20)
        for idx, j in enumerate(spec.offsets):
            if j < -2:
                assert curve.accuracies[idx] is None
                assert curve.n_samples[idx] == 0
            else:
                assert curve.accuracies[idx] is not None
                assert curve.n_samples[idx] == 60

    def test_all_missing_is_a_computation_error(self):
        matrices, records, _, _ = onehot_corpus(n_utts=2, seconds=2.0)
        spec = WindowSpec(window_ms=120.0, frame_rate_hz=50.0)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds(["u0", "u1"], 2, seed=0)
        with pytest.raises(ComputationError, match="no decodable offsets"):
            compute_curve(dataset, plan, min_samples=10**6)

    def test_single_class_dataset_rejected(self):
        matrices, records, _, _ = onehot_corpus(n_utts=2, seconds=2.0, k=1)
        spec = WindowSpec(window_ms=120.0, frame_rate_hz=50.0)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds(["u0", "u1"], 2, seed=0)
        with pytest.raises(ValidationError, match="class"):
            compute_curve(dataset, plan)

    def test_meta_carries_fold_count_and_raw_flag(self):
        matrices, records, _, _ = onehot_corpus(n_utts=4, seconds=3.0)
        spec = WindowSpec(window_ms=120.0, frame_rate_hz=50.0)
        dataset = build_offset_dataset(matrices, records, spec)
        plan = make_folds([m.utterance_id for m in matrices], 2, seed=0)
        curve = compute_curve(
            dataset, plan, meta=CurveMeta(encoder_tag="enc", layer=9)
        )
        assert curve.meta.encoder_tag == "enc"
        assert curve.meta.layer == 9
        assert curve.meta.folds == 2
        assert curve.meta.normalized is False


class TestBatchedAccuracy:
    def train_toy(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(300, 4))
        y = (X[:, 0] > 0).astype(int)
        clf = train_softmax(X, y, 2, TrainConfig(max_iterations=100))
        X_eval = rng.normal(size=(400, 4))
        y_eval = (X_eval[:, 0] > 0).astype(int)
        return clf, X_eval, y_eval

    def test_divisible_batching_equals_pooled(self):
        clf, X, y = self.train_toy()
        pooled = batched_accuracy(clf, X, y, batches=1)
        batched = batched_accuracy(clf, X, y, batches=20)
        assert abs(pooled - batched) < 1e-12

    def test_more_batches_than_samples(self):
        clf, X, y = self.train_toy()
        pooled = batched_accuracy(clf, X[:7], y[:7], batches=1)
        per_sample = batched_accuracy(clf, X[:7], y[:7], batches=50)
        assert abs(pooled - per_sample) < 1e-12

    def test_empty_rejected(self):
        clf, X, y = self.train_toy()
        with pytest.raises(ValidationError):
            batched_accuracy(clf, X[:0], y[:0], batches=4)


class TestNormalize:
    def test_constant_curve_becomes_ones(self):
        curve = normalize_curve(curve_of([0.4, 0.4, 0.4]))
        assert curve.accuracies == (1.0, 1.0, 1.0)

    def test_exact_division(self):
        curve = normalize_curve(curve_of([0.2, 0.8, 0.4]))
        assert curve.accuracies == (0.25, 1.0, 0.5)

    def test_missing_values_stay_missing(self):
        curve = normalize_curve(curve_of([0.2, None, 0.8]))
        assert curve.accuracies == (0.25, None, 1.0)

    def test_normalized_flag_set(self):
        curve = normalize_curve(curve_of([0.2, 0.8]))
        assert curve.meta.normalized is True

    def test_all_missing_rejected(self):
        with pytest.raises(ComputationError):
            normalize_curve(curve_of([None, None]))

    def test_zero_max_rejected(self):
        with pytest.raises(ComputationError):
            normalize_curve(curve_of([0.0, 0.0]))

    @settings(max_examples=50, deadline=None)
    @given(
        accs=st.lists(
            st.one_of(st.none(), st.floats(min_value=0.01, max_value=1.0)),
            min_size=1,
            max_size=20,
        ).filter(lambda xs: any(a is not None for a in xs))
    )
    def test_peak_location_is_invariant(self, accs):
        curve = curve_of(accs)
        normalized = normalize_curve(curve)
        assert find_peak(normalized).peak_time_ms == find_peak(curve).peak_time_ms
        assert find_peak(normalized).peak_value == 1.0


class TestPeaksAndOnsets:
    def test_peak_tie_takes_earliest(self):
        curve = curve_of([0.5, 0.9, 0.9], start_ms=0.0)
        report = find_peak(curve)
        assert report.peak_time_ms == 40.0
        assert report.peak_value == 0.9

    def test_peak_skips_missing(self):
        curve = curve_of([None, 0.7, 0.9, None], start_ms=0.0)
        assert find_peak(curve).peak_time_ms == 80.0

    def test_peak_on_empty_curve_rejected(self):
        with pytest.raises(ComputationError):
            find_peak(curve_of([None, None]))

    def test_onset_first_crossing(self):
        curve = curve_of([0.1, 0.6, 1.0], start_ms=-40.0, normalized=True)
        assert decodability_onset(curve, theta=0.5) == 0.0

    def test_onset_theta_one_is_the_peak(self):
        curve = curve_of([0.1, 0.6, 1.0], start_ms=-40.0, normalized=True)
        assert decodability_onset(curve, theta=1.0) == 40.0

    def test_onset_requires_normalized(self):
        with pytest.raises(ValidationError, match="normalized"):
            decodability_onset(curve_of([0.1, 0.6, 1.0]))

    def test_onset_theta_validation(self):
        curve = curve_of([0.1, 1.0], normalized=True)
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValidationError):
                decodability_onset(curve, theta=bad)


class TestCompare:
    def test_identical_curves_have_zero_deltas(self):
        curve = curve_of([0.2, 0.6, 0.9, 0.5])
        report = compare_curves(curve, curve)
        assert report.peak_delta_ms == 0.0
        assert report.onset_delta_ms == 0.0
        assert all(d == 0.0 for d in report.accuracy_deltas)

    def test_cross_rate_resampling_uses_nearest(self):
        fine = curve_of([0.1, 0.2, 0.3, 0.4, 0.5], step_ms=20.0, start_ms=-40.0)
        coarse = curve_of([0.1, 0.3, 0.5], step_ms=40.0, start_ms=-40.0)
        report = compare_curves(fine, coarse)
        # -20 ms ties between coarse points at -40 and 0; earlier wins.
        assert report.offsets_ms == (-40.0, -20.0, 0.0, 20.0, 40.0)
        assert report.accuracy_deltas == (
            0.0,
            pytest.approx(0.1),
            0.0,
            pytest.approx(0.1),
            0.0,
        )

    def test_missing_b_values_give_missing_deltas(self):
        a = curve_of([0.2, 0.4, 0.6], start_ms=0.0)
        b = curve_of([0.2, None, 0.6], start_ms=0.0)
        report = compare_curves(a, b)
        assert report.accuracy_deltas == (0.0, None, 0.0)

    def test_disjoint_ranges_rejected(self):
        a = curve_of([0.2, 0.4], start_ms=0.0)
        b = curve_of([0.2, 0.4], start_ms=400.0)
        with pytest.raises(ComputationError, match="overlap"):
            compare_curves(a, b)

    def test_peak_shift_reported(self):
        a = curve_of([0.1, 0.9, 0.1, 0.1], start_ms=0.0)
        b = curve_of([0.1, 0.1, 0.1, 0.9], start_ms=0.0)
        assert compare_curves(a, b).peak_delta_ms == -80.0


class TestCurveIO:
    def test_csv_round_trip_with_missing(self, tmp_path):
        curve = curve_of([0.123456789012345, None, 1.0 / 3.0])
        path = tmp_path / "c.csv"
        write_curve_csv(curve, path)
        back = read_curve_csv(path)
        assert back.offsets_ms == curve.offsets_ms
        assert back.accuracies == curve.accuracies
        assert back.n_samples == curve.n_samples

    def test_json_round_trip_keeps_meta(self, tmp_path):
        curve = curve_of(
            [0.5, 0.25], encoder_tag="enc", layer=7, normalized=True, folds=3
        )
        path = tmp_path / "c.json"
        write_curve_json(curve, path)
        back = read_curve_json(path)
        assert back.accuracies == curve.accuracies
        assert back.meta == curve.meta

    def test_json_dict_round_trip(self):
        curve = curve_of([0.5, None, 0.25], delay_ms=80.0)
        back = curve_from_json_dict(curve_to_json_dict(curve))
        assert back.accuracies == curve.accuracies
        assert back.meta == curve.meta

    def test_read_curve_dispatches_on_extension(self, tmp_path):
        curve = curve_of([0.5, 1.0])
        write_curve_csv(curve, tmp_path / "c.csv")
        write_curve_json(curve, tmp_path / "c.json")
        assert read_curve(tmp_path / "c.csv").accuracies == curve.accuracies
        assert read_curve(tmp_path / "c.json").accuracies == curve.accuracies
        with pytest.raises(FormatError, match="unknown curve format"):
            read_curve(tmp_path / "c.txt")

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(FormatError, match="line 1"):
            read_curve_csv(path)

    def test_csv_bad_row(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("offset_ms,accuracy,n_samples\n0.0,xyz,10\n")
        with pytest.raises(FormatError, match="line 2"):
            read_curve_csv(path)

    def test_curve_validation(self):
        with pytest.raises(ValidationError, match="increasing"):
            DecodabilityCurve(
                offsets_ms=(0.0, 0.0),
                accuracies=(0.1, 0.2),
                n_samples=(1, 1),
            )
        with pytest.raises(ValidationError, match="mismatch"):
            DecodabilityCurve(
                offsets_ms=(0.0, 40.0),
                accuracies=(0.1,),
                n_samples=(1, 1),
            )


class TestThreadCount:
    def test_explicit_wins(self):
        assert thread_count(3) == 3

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("DECODEWIN_THREADS", "5")
        assert thread_count() == 5

    def test_zero_means_auto(self, monkeypatch):
        monkeypatch.setenv("DECODEWIN_THREADS", "0")
        assert thread_count() >= 1

    def test_bad_env_rejected(self, monkeypatch):
        monkeypatch.setenv("DECODEWIN_THREADS", "many")
        with pytest.raises(ValidationError):
            thread_count()

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            thread_count(-2)
