import numpy as np
import pytest

from slascore import fileio
from slascore.core import OVERALL, ScoredRecord
from slascore.errors import (
    CalibrationVersionMismatch,
    DuplicateKey,
    OffGridReference,
    ParseError,
)
from slascore.fusion import FusionCalibration
from slascore.head import CLASSIFICATION, FrameSequence, HeadParameters
from slascore.synth import SynthConfig, generate_frames, generate_scores


class TestPredictionFiles:
    def test_round_trip_byte_identical(self, tmp_path):
        recs = [ScoredRecord("a", 1, 3.123456789012345), ScoredRecord("b", 3, 4.0)]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        fileio.write_predictions(p1, recs)
        fileio.write_predictions(p2, fileio.read_predictions(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_enforced(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("speaker,part,score\na,1,3.0\n")
        with pytest.raises(ParseError):
            fileio.read_predictions(p)

    def test_duplicate_key(self, tmp_path):
        p = tmp_path / "dup.csv"
        p.write_text("speaker_id,part,score\na,1,3.0\na,1,3.5\n")
        with pytest.raises(DuplicateKey):
            fileio.read_predictions(p)

    def test_reference_validation(self, tmp_path):
        p = tmp_path / "refs.csv"
        p.write_text("speaker_id,part,score\na,1,3.3\n")
        with pytest.raises(OffGridReference):
            fileio.read_predictions(p, kind="reference")

    def test_overall_rows(self, tmp_path):
        p = tmp_path / "overall.csv"
        fileio.write_predictions(p, [ScoredRecord("a", OVERALL, 3.5)])
        with pytest.raises(ParseError):
            fileio.read_predictions(p)
        recs = fileio.read_predictions(p, allow_overall=True)
        assert recs == [ScoredRecord("a", OVERALL, 3.5)]

    def test_bad_score(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("speaker_id,part,score\na,1,abc\n")
        with pytest.raises(ParseError):
            fileio.read_predictions(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            fileio.read_predictions(tmp_path / "nope.csv")


class TestCalibrationFiles:
    def make_calib(self):
        return FusionCalibration(
            weights=(0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 0.33),
            grid_step=0.01,
            dev_rmse=0.123456789,
            per_bin_counts=(1, 2, 3, 4, 5, 6, 7, 8),
        )

    def test_round_trip_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "c1.json", tmp_path / "c2.json"
        fileio.write_calibration(p1, self.make_calib(), {"seed": 7})
        calib, prov = fileio.read_calibration(p1)
        fileio.write_calibration(p2, calib, prov)
        assert p1.read_bytes() == p2.read_bytes()
        assert prov == {"seed": 7}

    def test_values_preserved(self, tmp_path):
        p = tmp_path / "c.json"
        orig = self.make_calib()
        fileio.write_calibration(p, orig)
        calib, _ = fileio.read_calibration(p)
        assert calib == orig

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "c.json"
        fileio.write_calibration(p, self.make_calib())
        text = p.read_text().replace('"format_version": 1', '"format_version": 99')
        p.write_text(text)
        with pytest.raises(CalibrationVersionMismatch):
            fileio.read_calibration(p)

    def test_garbage(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            fileio.read_calibration(p)


class TestFeatureFiles:
    def test_round_trip_byte_identical(self, tmp_path):
        seqs = generate_frames(4, [2.5, 4.0], d=3, separation=2.0, seed=1)
        seqs.append(FrameSequence(frames=np.ones((2, 3))))  # unlabeled
        p1, p2 = tmp_path / "f1.txt", tmp_path / "f2.txt"
        fileio.write_features(p1, seqs)
        fileio.write_features(p2, fileio.read_features(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_values_exact(self, tmp_path):
        seqs = generate_frames(2, [3.0], d=4, separation=1.0, seed=5)
        p = tmp_path / "f.txt"
        fileio.write_features(p, seqs)
        loaded = fileio.read_features(p)
        assert len(loaded) == len(seqs)
        for a, b in zip(seqs, loaded):
            np.testing.assert_array_equal(a.frames, b.frames)
            assert a.label == b.label

    def test_magic_enforced(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text("not a feature file\n")
        with pytest.raises(ParseError):
            fileio.read_features(p)

    def test_shape_mismatch_detected(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text("slascore-features v1\nrecord 2 3 -\n1.0 2.0 3.0\n")
        with pytest.raises(ParseError):
            fileio.read_features(p)

    def test_width_mismatch_detected(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text("slascore-features v1\nrecord 1 3 -\n1.0 2.0\n")
        with pytest.raises(ParseError):
            fileio.read_features(p)


class TestHeadParamFiles:
    def make_params(self):
        rng = np.random.default_rng(0)
        return HeadParameters(
            attn_W=rng.standard_normal((3, 4)),
            attn_b=rng.standard_normal(3),
            attn_u=rng.standard_normal(3),
            prototypes=rng.standard_normal((2, 4)),
            levels=np.array([3.0, 4.0]),
            mlp_W=rng.standard_normal((2, 6)),
            mlp_b=rng.standard_normal(2),
            mode=CLASSIFICATION,
        )

    def test_round_trip_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "p1.json", tmp_path / "p2.json"
        fileio.write_head_params(p1, self.make_params())
        fileio.write_head_params(p2, fileio.read_head_params(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_arrays_exact(self, tmp_path):
        p = tmp_path / "p.json"
        orig = self.make_params()
        fileio.write_head_params(p, orig)
        loaded = fileio.read_head_params(p)
        for name in ("attn_W", "attn_b", "attn_u", "prototypes", "levels", "mlp_W", "mlp_b"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(orig, name))
        assert loaded.mode == orig.mode

    def test_bad_mode(self, tmp_path):
        p = tmp_path / "p.json"
        fileio.write_head_params(p, self.make_params())
        p.write_text(p.read_text().replace('"classification"', '"nonsense"'))
        with pytest.raises(ParseError):
            fileio.read_head_params(p)


def test_synth_dataset_round_trip(tmp_path):
    data = generate_scores(SynthConfig(n_speakers=10, seed=0))
    w2v = [ScoredRecord(r.speaker_id, r.part, r.w2v) for r in data.rows]
    p1, p2 = tmp_path / "w1.csv", tmp_path / "w2.csv"
    fileio.write_predictions(p1, w2v)
    fileio.write_predictions(p2, fileio.read_predictions(p1))
    assert p1.read_bytes() == p2.read_bytes()
