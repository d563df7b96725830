import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slascore import metrics
from slascore.core import OVERALL, JoinedDataset, JoinedRow, ScoredRecord
from slascore.errors import (
    DuplicatePart,
    EmptyDataset,
    InvalidConfig,
    MissingPart,
    NonFiniteScore,
    NoReferences,
)
from slascore.fusion import (
    DEFAULT_EDGES,
    N_BINS,
    FusionCalibration,
    IntervalLayout,
    aggregate_overall,
    bin_index,
    calibrate,
    fuse_dataset,
    fuse_one,
    weight_grid,
)
from slascore.synth import SynthConfig, generate_scores, heteroscedastic_config


def make_calib(weights, **kw):
    return FusionCalibration(weights=tuple(weights), **kw)


def dataset(rows):
    return JoinedDataset(rows=tuple(JoinedRow(*r) for r in rows))


class TestLayout:
    def test_default_edges(self):
        assert DEFAULT_EDGES == (0.0, 2.25, 2.75, 3.25, 3.75, 4.25, 4.75, 5.25, 6.0)
        IntervalLayout()

    def test_bad_edge_count(self):
        with pytest.raises(InvalidConfig):
            IntervalLayout(edges=(0.0, 1.0))

    def test_non_increasing(self):
        with pytest.raises(InvalidConfig):
            IntervalLayout(edges=(0.0, 2.25, 2.25, 3.25, 3.75, 4.25, 4.75, 5.25, 6.0))


class TestBinIndex:
    @pytest.mark.parametrize("score,expected", [
        (3.0, 2), (2.25, 1), (6.0, 7), (0.0, 0), (2.24, 0),
        (5.25, 7), (5.24, 6), (4.999, 6),
    ])
    def test_examples(self, score, expected):
        assert bin_index(score) == expected

    def test_clamping(self):
        assert bin_index(-0.5) == 0
        assert bin_index(6.5) == 7

    def test_non_finite(self):
        with pytest.raises(NonFiniteScore):
            bin_index(math.nan)

    @given(st.floats(min_value=0.0, max_value=6.0, allow_nan=False))
    def test_partition(self, score):
        k = bin_index(score)
        assert 0 <= k <= 7
        lo, hi = DEFAULT_EDGES[k], DEFAULT_EDGES[k + 1]
        assert lo <= score and (score < hi or (k == 7 and score <= hi))

    @pytest.mark.parametrize("edge_i", range(1, 8))
    def test_adjacent_bins_at_edges(self, edge_i):
        e = DEFAULT_EDGES[edge_i]
        eps = 1e-9
        assert bin_index(e - eps) == edge_i - 1
        assert bin_index(e) == edge_i
        assert bin_index(e + eps) == edge_i


class TestFuseOne:
    def test_midpoint(self):
        calib = make_calib([0.5] * N_BINS)
        assert fuse_one(3.0, 4.0, calib) == 3.5

    def test_w_zero_returns_w2v_exactly(self):
        calib = make_calib([0.0] * N_BINS)
        assert fuse_one(3.123456789, 4.7, calib) == 3.123456789

    def test_w_one_returns_mllm_exactly(self):
        calib = make_calib([1.0] * N_BINS)
        assert fuse_one(3.123456789, 4.7, calib) == 4.7

    def test_uses_mllm_bin(self):
        weights = [0.0] * N_BINS
        weights[7] = 1.0
        calib = make_calib(weights)
        # mllm=5.5 is in bin 7 -> weight 1.0
        assert fuse_one(2.0, 5.5, calib) == 5.5
        # mllm=3.0 is in bin 2 -> weight 0.0
        assert fuse_one(2.0, 3.0, calib) == 2.0

    @given(st.floats(min_value=0, max_value=6, allow_nan=False),
           st.floats(min_value=0, max_value=6, allow_nan=False),
           st.floats(min_value=0, max_value=1, allow_nan=False))
    def test_convexity(self, w2v, mllm, w):
        calib = make_calib([w] * N_BINS)
        fused = fuse_one(w2v, mllm, calib)
        assert min(w2v, mllm) - 1e-12 <= fused <= max(w2v, mllm) + 1e-12

    def test_weight_out_of_range_rejected(self):
        with pytest.raises(InvalidConfig):
            make_calib([1.5] * N_BINS)


class TestWeightGrid:
    def test_default_grid(self):
        grid = weight_grid(0.01)
        assert len(grid) == 101
        assert grid[0] == 0.0 and grid[-1] == 1.0

    def test_bad_step(self):
        with pytest.raises(InvalidConfig):
            weight_grid(0.03)


class TestCalibrate:
    def test_mllm_exact_gives_weight_one(self):
        rng = np.random.default_rng(0)
        rows = []
        for i, ref in enumerate([2.0, 3.0, 4.0, 5.0] * 5):
            rows.append((f"s{i}", 1, ref + rng.normal(0, 0.4), ref, ref))
        calib = calibrate(dataset(rows))
        for k, cnt in enumerate(calib.per_bin_counts):
            if cnt:
                assert calib.weights[k] == 1.0
        assert calib.dev_rmse == 0.0

    def test_w2v_exact_gives_weight_zero(self):
        rng = np.random.default_rng(0)
        rows = []
        for i, ref in enumerate([2.0, 3.0, 4.0, 5.0] * 5):
            rows.append((f"s{i}", 1, ref, ref + rng.normal(0, 0.4), ref))
        calib = calibrate(dataset(rows))
        for k, cnt in enumerate(calib.per_bin_counts):
            if cnt:
                assert calib.weights[k] == 0.0

    def test_heteroscedastic_pattern(self):
        data = generate_scores(heteroscedastic_config(500, seed=0))
        calib = calibrate(data)
        low = [calib.weights[k] for k in range(4) if calib.per_bin_counts[k] > 10]
        high = [calib.weights[k] for k in range(4, 8) if calib.per_bin_counts[k] > 10]
        # binning is on the (noisy) mllm score, so bins just above the
        # noise boundary stay contaminated by misbinned low-level rows
        assert all(w <= 0.25 for w in low)
        assert all(w >= 0.5 for w in high)

    def test_dominance_over_components(self):
        data = generate_scores(SynthConfig(n_speakers=80, seed=5))
        calib = calibrate(data)
        ref = data.references()
        assert calib.dev_rmse <= metrics.rmse(data.w2v_scores(), ref)
        assert calib.dev_rmse <= metrics.rmse(data.mllm_scores(), ref)

    def test_dev_rmse_recomputable(self):
        data = generate_scores(SynthConfig(n_speakers=50, seed=2))
        calib = calibrate(data)
        fused = fuse_dataset(data, calib)
        got = metrics.rmse([r.score for r in fused], data.references())
        assert got == calib.dev_rmse

    def test_weights_on_grid(self):
        data = generate_scores(SynthConfig(n_speakers=60, seed=9))
        calib = calibrate(data, grid_step=0.05)
        for w in calib.weights:
            assert abs(w / 0.05 - round(w / 0.05)) < 1e-9

    def test_deterministic(self):
        data = generate_scores(SynthConfig(n_speakers=40, seed=11))
        assert calibrate(data) == calibrate(data)

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            calibrate(dataset([]))

    def test_blind_dataset(self):
        with pytest.raises(NoReferences):
            calibrate(dataset([("a", 1, 3.0, 3.5, None)]))

    def test_empty_bins_get_global_weight(self):
        # all refs at 3.0 -> only bin 2 populated
        rng = np.random.default_rng(4)
        rows = [(f"s{i}", 1, 3.0 + rng.normal(0, 0.3), 3.0 + rng.normal(0, 0.05), 3.0)
                for i in range(30)]
        calib = calibrate(dataset(rows))
        populated = [k for k, c in enumerate(calib.per_bin_counts) if c]
        empty = [k for k, c in enumerate(calib.per_bin_counts) if not c]
        assert len(empty) >= 5
        global_w = {calib.weights[k] for k in empty}
        assert len(global_w) == 1  # single global fallback weight


class TestFuseDataset:
    def test_single_row(self):
        calib = make_calib([0.5] * N_BINS)
        out = fuse_dataset(dataset([("a", 1, 3.0, 4.0, None)]), calib)
        assert out == [ScoredRecord("a", 1, 3.5)]

    def test_empty(self):
        assert fuse_dataset(dataset([]), make_calib([0.5] * N_BINS)) == []

    def test_order_and_keys_preserved(self):
        calib = make_calib([0.0] * N_BINS)
        rows = [("b", 3, 3.0, 4.0, None), ("a", 1, 2.5, 2.5, None)]
        out = fuse_dataset(dataset(rows), calib)
        assert [(r.speaker_id, r.part) for r in out] == [("b", 3), ("a", 1)]

    def test_clamp(self):
        calib = make_calib([1.0] * N_BINS)
        out = fuse_dataset(dataset([("a", 1, 3.0, 5.9, None)]), calib, clamp=True)
        assert out[0].score == 5.5


class TestAggregateOverall:
    def test_mean_of_parts(self):
        recs = [ScoredRecord("a", p, s)
                for p, s in [(1, 3.0), (3, 3.0), (4, 4.0), (5, 4.0)]]
        out = aggregate_overall(recs)
        assert out == [ScoredRecord("a", OVERALL, 3.5)]

    def test_identity(self):
        recs = [ScoredRecord("a", p, 3.5) for p in (1, 3, 4, 5)]
        assert aggregate_overall(recs)[0].score == 3.5

    def test_missing_part(self):
        recs = [ScoredRecord("a", p, 3.0) for p in (1, 3, 4)]
        with pytest.raises(MissingPart):
            aggregate_overall(recs)

    def test_duplicate_part(self):
        recs = [ScoredRecord("a", 1, 3.0), ScoredRecord("a", 1, 3.5)]
        with pytest.raises(DuplicatePart):
            aggregate_overall(recs)

    @given(st.lists(st.floats(min_value=2, max_value=5.5, allow_nan=False),
                    min_size=4, max_size=4),
           st.floats(min_value=-1, max_value=1, allow_nan=False))
    @settings(max_examples=50)
    def test_commutes_with_uniform_shift(self, scores, c):
        recs = [ScoredRecord("a", p, s) for p, s in zip((1, 3, 4, 5), scores)]
        shifted = [ScoredRecord("a", p, s + c) for p, s in zip((1, 3, 4, 5), scores)]
        base = aggregate_overall(recs)[0].score
        assert aggregate_overall(shifted)[0].score == pytest.approx(base + c, abs=1e-12)

    def test_multiple_speakers_sorted(self):
        recs = [ScoredRecord(sid, p, 3.0) for sid in ("b", "a") for p in (1, 3, 4, 5)]
        out = aggregate_overall(recs)
        assert [r.speaker_id for r in out] == ["a", "b"]
