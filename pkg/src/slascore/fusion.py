"""Score-conditioned fusion of the two grader streams.

The multimodal score selects one of eight CEFR-aligned intervals; each
interval carries an interpolation weight w_k calibrated by exhaustive
grid search on a dev set (RMSE objective), then fixed for evaluation:

    fused = (1 - w_k) * w2v + w_k * mllm

Overall speaker scores are the mean of the four part scores.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .core import OVERALL, PARTS, JoinedDataset, ScoredRecord
from .errors import (
    DuplicatePart,
    EmptyDataset,
    InvalidConfig,
    MissingPart,
    NonFiniteScore,
    NoReferences,
)

log = logging.getLogger(__name__)

#: The eight CEFR-aligned interval edges: [0.0-2.25), [2.25-2.75), ...,
#: [4.75-5.25), [5.25-6.0]; last interval closed on both ends.
DEFAULT_EDGES = (0.0, 2.25, 2.75, 3.25, 3.75, 4.25, 4.75, 5.25, 6.0)

N_BINS = 8


@dataclass(frozen=True, slots=True)
class IntervalLayout:
    edges: tuple[float, ...] = DEFAULT_EDGES

    def __post_init__(self):
        if len(self.edges) != N_BINS + 1:
            raise InvalidConfig(f"need {N_BINS + 1} edges, got {len(self.edges)}")
        if any(a >= b for a, b in zip(self.edges, self.edges[1:])):
            raise InvalidConfig("interval edges must be strictly increasing")


@dataclass(frozen=True, slots=True)
class FusionCalibration:
    """Per-interval weights fixed after dev-set grid search."""

    weights: tuple[float, ...]
    grid_step: float = 0.01
    layout: IntervalLayout = field(default_factory=IntervalLayout)
    dev_rmse: float = float("nan")
    per_bin_counts: tuple[int, ...] = (0,) * N_BINS

    def __post_init__(self):
        if len(self.weights) != N_BINS:
            raise InvalidConfig(f"need {N_BINS} weights, got {len(self.weights)}")
        for w in self.weights:
            if not 0.0 <= w <= 1.0:
                raise InvalidConfig(f"weight {w} outside [0, 1]")


def weight_grid(grid_step: float) -> list[float]:
    """The search grid {0, step, 2*step, ..., 1}; step must divide 1."""
    if not 0.0 < grid_step <= 1.0:
        raise InvalidConfig(f"grid_step {grid_step} outside (0, 1]")
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9:
        raise InvalidConfig(f"grid_step {grid_step} does not divide 1 evenly")
    return [i * grid_step for i in range(n + 1)]


def bin_index(mllm_score: float, layout: IntervalLayout | None = None) -> int:
    """Index of the interval containing the multimodal score.

    Out-of-range inputs clamp to the end bins (with a warning); the last
    interval is closed at its right edge.
    """
    if not math.isfinite(mllm_score):
        raise NonFiniteScore(f"cannot bin non-finite score {mllm_score}")
    edges = (layout or IntervalLayout()).edges
    if mllm_score < edges[0]:
        log.warning("score %s below %s, clamped to bin 0", mllm_score, edges[0])
        return 0
    if mllm_score > edges[-1]:
        log.warning("score %s above %s, clamped to bin %d", mllm_score, edges[-1], N_BINS - 1)
        return N_BINS - 1
    if mllm_score == edges[-1]:
        return N_BINS - 1
    return int(np.searchsorted(edges, mllm_score, side="right")) - 1


def fuse_one(w2v: float, mllm: float, calib: FusionCalibration) -> float:
    """Convex combination with the weight of the mllm score's interval."""
    if not (math.isfinite(w2v) and math.isfinite(mllm)):
        raise NonFiniteScore(f"cannot fuse non-finite scores ({w2v}, {mllm})")
    w = calib.weights[bin_index(mllm, calib.layout)]
    return (1.0 - w) * w2v + w * mllm


def calibrate(
    dev: JoinedDataset,
    layout: IntervalLayout | None = None,
    grid_step: float = 0.01,
) -> FusionCalibration:
    """Grid-search each interval's weight on a dev set with references.

    Each populated bin independently gets the grid weight minimizing the
    bin-restricted RMSE (ties toward the smallest w, favoring the speech
    grader); empty bins fall back to the single best global weight.
    """
    layout = layout or IntervalLayout()
    if len(dev) == 0:
        raise EmptyDataset("cannot calibrate on an empty dev set")
    if dev.blind:
        raise NoReferences("calibration requires reference scores")
    grid = weight_grid(grid_step)

    w2v = np.asarray(dev.w2v_scores())
    mllm = np.asarray(dev.mllm_scores())
    ref = np.asarray(dev.references())
    bins = np.array([bin_index(s, layout) for s in mllm])

    # errs[i, j]: fusion error of row j under grid weight i
    fused = w2v[None, :] + np.asarray(grid)[:, None] * (mllm - w2v)[None, :]
    sq = (fused - ref[None, :]) ** 2

    global_w = grid[int(np.argmin(np.sqrt(np.mean(sq, axis=1))))]
    weights, counts = [], []
    for k in range(N_BINS):
        mask = bins == k
        counts.append(int(np.sum(mask)))
        if counts[-1] == 0:
            weights.append(global_w)
        else:
            bin_rmse = np.sqrt(np.mean(sq[:, mask], axis=1))
            weights.append(grid[int(np.argmin(bin_rmse))])

    calib = FusionCalibration(
        weights=tuple(weights),
        grid_step=grid_step,
        layout=layout,
        per_bin_counts=tuple(counts),
    )
    fused_dev = fuse_dataset(dev, calib)
    dev_rmse = metrics.rmse([r.score for r in fused_dev], list(ref))
    return FusionCalibration(
        weights=calib.weights,
        grid_step=grid_step,
        layout=layout,
        dev_rmse=dev_rmse,
        per_bin_counts=calib.per_bin_counts,
    )


def fuse_dataset(
    data: JoinedDataset,
    calib: FusionCalibration,
    clamp: bool = False,
) -> list[ScoredRecord]:
    """Fuse every row; key- and order-preserving.

    ``clamp`` optionally clips fused scores to the reference range
    [2.0, 5.5] (off by default: references never leave it, but graders may).
    """
    out = []
    for row in data.rows:
        score = fuse_one(row.w2v, row.mllm, calib)
        if clamp:
            score = min(max(score, 2.0), 5.5)
        out.append(ScoredRecord(row.speaker_id, row.part, score))
    return out


def aggregate_overall(per_part: list[ScoredRecord]) -> list[ScoredRecord]:
    """Per-speaker mean of the four part scores (parts 1, 3, 4, 5)."""
    by_speaker: dict[str, dict[int, float]] = {}
    for rec in per_part:
        parts = by_speaker.setdefault(rec.speaker_id, {})
        if rec.part in parts:
            raise DuplicatePart(f"duplicate part {rec.part} for speaker {rec.speaker_id}")
        parts[rec.part] = rec.score
    out = []
    for sid in sorted(by_speaker):
        parts = by_speaker[sid]
        missing = [p for p in PARTS if p not in parts]
        if missing:
            raise MissingPart(f"speaker {sid} missing part(s) {missing}")
        extra = sorted(set(parts) - set(PARTS))
        if extra:
            raise MissingPart(f"speaker {sid} has unexpected part(s) {extra}")
        out.append(ScoredRecord(sid, OVERALL, sum(parts[p] for p in PARTS) / 4.0))
    return out
