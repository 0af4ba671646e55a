import csv
import json
import math

import numpy as np
import pytest

import pupilkit as pk
from pupilkit import ConfigError, FormatError, InputError, RoiRect, assemble_report, evaluate, load_annotated_set
from pupilkit.evaluation import write_curve_csv, write_report_json
from pupilkit.imgio import write_pgm


def write_lpw_dir(root, frames, truths):
    for i, frame in enumerate(frames):
        write_pgm(root / f"{i:05d}.pgm", frame)
    root.joinpath("annotations.txt").write_text(
        "".join(f"{x} {y}\n" for x, y in truths)
    )


@pytest.fixture
def small_frames():
    rng = np.random.default_rng(0)
    return [rng.integers(0, 256, (48, 64)).astype(np.uint8) for _ in range(3)]


class TestLpwLoader:
    def test_happy_path(self, tmp_path, small_frames):
        write_lpw_dir(tmp_path, small_frames, [(10, 10), (20, 20), (30, 30)])
        annotated = load_annotated_set(tmp_path, "lpw_frames")
        assert len(annotated.frames) == 3
        assert annotated.truth[1] == (20.0, 20.0)
        assert annotated.resolution == (64, 48)

    def test_count_mismatch_names_both(self, tmp_path, small_frames):
        write_lpw_dir(tmp_path, small_frames, [(10, 10), (20, 20)])
        with pytest.raises(FormatError, match="3 frames but 2 annotation"):
            load_annotated_set(tmp_path, "lpw_frames")

    def test_unparsable_line_is_located(self, tmp_path, small_frames):
        write_lpw_dir(tmp_path, small_frames, [(10, 10), (20, 20), (30, 30)])
        txt = tmp_path / "annotations.txt"
        txt.write_text("10 10\nbad line here\n30 30\n")
        with pytest.raises(FormatError, match=":2"):
            load_annotated_set(tmp_path, "lpw_frames")

    def test_requires_exactly_one_txt(self, tmp_path, small_frames):
        write_lpw_dir(tmp_path, small_frames, [(1, 1), (2, 2), (3, 3)])
        (tmp_path / "extra.txt").write_text("")
        with pytest.raises(FormatError, match="exactly one"):
            load_annotated_set(tmp_path, "lpw_frames")

    def test_truth_outside_frame_rejected(self, tmp_path, small_frames):
        write_lpw_dir(tmp_path, small_frames, [(10, 10), (999, 10), (30, 30)])
        with pytest.raises(FormatError, match="outside frame"):
            load_annotated_set(tmp_path, "lpw_frames")

    def test_unknown_layout(self, tmp_path):
        with pytest.raises(InputError):
            load_annotated_set(tmp_path, "mystery")


class TestSessionLoader:
    def write_session(self, root, frames, rows):
        for name, _, _ in rows:
            if name:
                write_pgm(root / name, frames[0])
        with open(root / "labels.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame", "x", "y"])
            w.writerows(rows)

    def test_happy_path_with_unlabeled(self, tmp_path, small_frames):
        rows = [("a.pgm", "10", "12"), ("b.pgm", "", ""), ("c.pgm", "30.5", "7")]
        self.write_session(tmp_path, small_frames, rows)
        annotated = load_annotated_set(tmp_path, "free_movement_session")
        assert [p.name for p in annotated.frames] == ["a.pgm", "c.pgm"]
        assert len(annotated.unlabeled) == 1
        assert annotated.truth == [(10.0, 12.0), (30.5, 7.0)]

    def test_missing_frame_file(self, tmp_path, small_frames):
        rows = [("a.pgm", "10", "12")]
        self.write_session(tmp_path, small_frames, rows)
        (tmp_path / "labels.csv").write_text("frame,x,y\nmissing.pgm,1,1\n")
        with pytest.raises(FormatError, match="missing.pgm"):
            load_annotated_set(tmp_path, "marker_session")

    def test_header_must_match(self, tmp_path, small_frames):
        write_pgm(tmp_path / "a.pgm", small_frames[0])
        (tmp_path / "labels.csv").write_text("file,cx,cy\na.pgm,1,1\n")
        with pytest.raises(FormatError, match="header"):
            load_annotated_set(tmp_path, "marker_session")

    def test_unlisted_frames_rejected(self, tmp_path, small_frames):
        rows = [("a.pgm", "10", "12")]
        self.write_session(tmp_path, small_frames, rows)
        write_pgm(tmp_path / "stray.pgm", small_frames[0])
        with pytest.raises(FormatError, match="labels.csv lists"):
            load_annotated_set(tmp_path, "marker_session")

    def test_missing_labels_csv(self, tmp_path):
        with pytest.raises(FormatError, match="labels.csv"):
            load_annotated_set(tmp_path, "marker_session")


class TestAssembleReport:
    def test_perfect_detection(self):
        truths = [(10.0, 10.0), (20.0, 5.0), (30.0, 30.0)]
        report = assemble_report(list(truths), truths)
        assert np.all(report.curve == 1.0)
        assert report.mean_error_over_detected == 0.0
        assert report.rate_at_5px == 1.0

    def test_all_misses(self):
        truths = [(10.0, 10.0), (20.0, 5.0)]
        report = assemble_report([None, None], truths)
        assert np.all(report.curve == 0.0)
        assert math.isnan(report.mean_error_over_detected)

    def test_planted_integer_errors_exact_step_curve(self):
        truths = [(100.0, 100.0)] * 21
        detections = [(100.0 + e, 100.0) for e in range(21)]
        report = assemble_report(detections, truths)
        expected = np.array([(e + 1) / 21 for e in range(21)])
        assert np.array_equal(report.curve, expected)
        assert report.rate_at_5px == 6 / 21
        assert report.rate_at_10px == 11 / 21

    def test_misses_count_in_denominator_only(self):
        truths = [(0.0, 0.0)] * 4
        detections = [(0.0, 0.0), (3.0, 0.0), None, None]
        report = assemble_report(detections, truths)
        assert report.curve[0] == 0.25
        assert report.rate_at_5px == 0.5
        assert report.mean_error_over_detected == pytest.approx(1.5)

    def test_rate_two_ways_agree(self):
        rng = np.random.default_rng(1)
        truths = [(50.0, 50.0)] * 40
        detections = []
        for i in range(40):
            if i % 5 == 0:
                detections.append(None)
            else:
                detections.append((50.0 + rng.uniform(-12, 12), 50.0 + rng.uniform(-12, 12)))
        report = assemble_report(detections, truths)
        for e in (5, 10):
            direct = sum(
                1 for fe in report.per_frame if fe.l2 is not None and fe.l2 <= e
            ) / len(report.per_frame)
            assert report.curve[e] == pytest.approx(direct)
        assert report.rate_at_5px <= report.rate_at_10px

    def test_curve_monotone(self):
        rng = np.random.default_rng(2)
        truths = [(50.0, 50.0)] * 30
        detections = [(50 + rng.uniform(-25, 25), 50 + rng.uniform(-25, 25)) for _ in range(30)]
        report = assemble_report(detections, truths)
        assert np.all(np.diff(report.curve) >= 0)

    def test_reorder_invariance(self):
        rng = np.random.default_rng(3)
        truths = [(float(10 + i), 20.0) for i in range(10)]
        detections = [(t[0] + rng.uniform(-8, 8), t[1]) for t in truths]
        fwd = assemble_report(detections, truths)
        rev = assemble_report(detections[::-1], truths[::-1])
        assert np.array_equal(fwd.curve, rev.curve)
        assert fwd.mean_error_over_detected == pytest.approx(rev.mean_error_over_detected)

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            assemble_report([None], [(1.0, 1.0), (2.0, 2.0)])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            assemble_report([], [])


class TestEvaluate:
    def test_synthetic_session_end_to_end(self, tmp_path, subject_params):
        spec = pk.SessionSpec(count=12, seed=3, noise_sigma=4.0)
        annotated = pk.make_session(spec, tmp_path / "sess")
        report = evaluate(annotated, subject_params)
        assert report.n_frames == 12
        assert report.rate_at_5px >= 0.9
        assert report.mean_error_over_detected < 1.0
        assert np.all(np.diff(report.curve) >= 0)

    def test_half_occluded_session(self, tmp_path, subject_params):
        spec = pk.SessionSpec(count=20, seed=4, noise_sigma=4.0, occluded_fraction=0.5)
        annotated = pk.make_session(spec, tmp_path / "sess")
        report = evaluate(annotated, subject_params)
        assert abs(report.rate_at_5px - 0.5) <= 1.0 / 20 + 1e-9

    def test_roi_does_not_shift_reported_centers(self, tmp_path, subject_params):
        spec = pk.SessionSpec(count=4, seed=5, noise_sigma=4.0)
        annotated = pk.make_session(spec, tmp_path / "sess")
        base = evaluate(annotated, subject_params)
        roi = RoiRect(40, 30, 560, 420)
        with_roi = evaluate(annotated, pk.params_with(subject_params, roi=roi))
        for a, b in zip(base.per_frame, with_roi.per_frame):
            if a.detected and b.detected:
                assert a.detected == pytest.approx(b.detected, abs=0.6)

    def test_roi_outside_frames_is_config_error(self, tmp_path, subject_params):
        spec = pk.SessionSpec(count=2, seed=6, noise_sigma=4.0)
        annotated = pk.make_session(spec, tmp_path / "sess")
        bad = pk.params_with(subject_params, roi=RoiRect(0, 0, 6400, 480))
        with pytest.raises(ConfigError):
            evaluate(annotated, bad)


class TestMacroAverage:
    def test_macro_average_is_unweighted(self):
        from pupilkit.evaluation import macro_average_rates

        small = assemble_report([(0.0, 0.0)], [(0.0, 0.0)])                    # rate 1.0
        big = assemble_report([None] * 3 + [(0.0, 0.0)], [(0.0, 0.0)] * 4)      # rate 0.25
        macro = macro_average_rates([small, big])
        assert macro["n_sets"] == 2
        assert macro["rate_at_5px"] == pytest.approx(0.625)
        assert macro["curve"][5] == pytest.approx(0.625)

    def test_empty_rejected(self):
        from pupilkit.evaluation import macro_average_rates

        with pytest.raises(InputError):
            macro_average_rates([])


class TestReportWriters:
    def test_json_layout(self, tmp_path):
        report = assemble_report([(1.0, 1.0), None], [(1.0, 1.0), (2.0, 2.0)])
        out = tmp_path / "report.json"
        write_report_json(report, out)
        text = out.read_text()
        assert text.endswith("\n")
        doc = json.loads(text)
        assert doc["n_frames"] == 2
        assert doc["per_frame"][1]["detected"] is None
        assert doc["per_frame"][1]["l2"] is None
        assert len(doc["curve"]) == 21
        assert doc["curve"][0] == {"e_px": 0, "rate": 0.5}

    def test_nan_mean_serializes_as_null(self, tmp_path):
        report = assemble_report([None], [(1.0, 1.0)])
        out = tmp_path / "report.json"
        write_report_json(report, out)
        assert json.loads(out.read_text())["mean_error_over_detected"] is None

    def test_curve_csv(self, tmp_path):
        report = assemble_report([(1.0, 1.0)], [(1.0, 1.0)])
        out = tmp_path / "curve.csv"
        write_curve_csv(report, out)
        rows = list(csv.reader(out.read_text().splitlines()))
        assert rows[0] == ["e_px", "rate"]
        assert len(rows) == 22
        assert rows[1] == ["0", "1.000000"]
