"""Synthetic datasets and brute-force oracles for desk-scale verification.

Stands in for the real corpus: grader predictions are simulated as the
reference level plus per-interval Gaussian noise, and frame features as
class-conditional Gaussians, so calibration and training behaviour can
be checked against exhaustive/nearest-mean oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PARTS, REFERENCE_LEVELS, JoinedDataset, JoinedRow
from .errors import EmptyBin, InvalidConfig, NoReferences
from .fusion import N_BINS, IntervalLayout, bin_index
from .head import FrameSequence
from .metrics import macro_f1


@dataclass(frozen=True, slots=True)
class SynthConfig:
    """Per-interval noise model for the two simulated grader streams."""

    n_speakers: int = 100
    parts: tuple[int, ...] = PARTS
    w2v_noise: tuple[float, ...] = (0.3,) * N_BINS
    mllm_noise: tuple[float, ...] = (0.3,) * N_BINS
    seed: int = 0
    level_weights: tuple[float, ...] = (1.0,) * N_BINS

    def __post_init__(self):
        if self.n_speakers < 1:
            raise InvalidConfig("need at least one speaker")
        if not self.parts or any(p not in PARTS for p in self.parts):
            raise InvalidConfig(f"parts must be a nonempty subset of {PARTS}")
        for name in ("w2v_noise", "mllm_noise"):
            sigmas = getattr(self, name)
            if len(sigmas) != N_BINS or any(s < 0 for s in sigmas):
                raise InvalidConfig(f"{name} must be {N_BINS} non-negative sigmas")
        if len(self.level_weights) != N_BINS:
            raise InvalidConfig(f"level_weights must have length {N_BINS}")
        if any(w < 0 for w in self.level_weights) or sum(self.level_weights) == 0:
            raise InvalidConfig("level_weights must be non-negative and not all zero")


def heteroscedastic_config(n_speakers: int = 500, seed: int = 0) -> SynthConfig:
    """mllm accurate in the top four intervals, w2v in the bottom four."""
    return SynthConfig(
        n_speakers=n_speakers,
        w2v_noise=(0.1,) * 4 + (0.6,) * 4,
        mllm_noise=(0.6,) * 4 + (0.1,) * 4,
        seed=seed,
    )


def generate_scores(cfg: SynthConfig) -> JoinedDataset:
    """Draw reference levels and noisy grader predictions per (speaker, part)."""
    rng = np.random.default_rng(cfg.seed)
    layout = IntervalLayout()
    weights = np.asarray(cfg.level_weights, dtype=np.float64)
    weights = weights / weights.sum()
    levels = np.asarray(REFERENCE_LEVELS)
    rows = []
    for i in range(cfg.n_speakers):
        sid = f"spk{i:04d}"
        for part in cfg.parts:
            ref = float(levels[rng.choice(len(levels), p=weights)])
            k = bin_index(ref, layout)
            rows.append(JoinedRow(
                speaker_id=sid,
                part=part,
                w2v=ref + rng.normal(0.0, cfg.w2v_noise[k]),
                mllm=ref + rng.normal(0.0, cfg.mllm_noise[k]),
                reference=ref,
            ))
    return JoinedDataset(rows=tuple(rows))


def generate_frames(
    n_per_class: int,
    levels: list[float],
    d: int,
    separation: float,
    seed: int = 0,
    t_range: tuple[int, int] = (5, 20),
) -> list[FrameSequence]:
    """Class-conditional Gaussian frame sequences, unit within-class sigma.

    Class means sit ``separation`` apart along distinct coordinate axes;
    sequence lengths are uniform over ``t_range``.
    """
    if separation < 0:
        raise InvalidConfig("separation must be >= 0")
    if n_per_class < 1 or d < 1 or not levels:
        raise InvalidConfig("need n_per_class >= 1, d >= 1, and at least one level")
    rng = np.random.default_rng(seed)
    out = []
    for k, level in enumerate(levels):
        mean = np.zeros(d)
        mean[k % d] = separation
        for _ in range(n_per_class):
            t = int(rng.integers(t_range[0], t_range[1] + 1))
            frames = mean + rng.standard_normal((t, d))
            out.append(FrameSequence(frames=frames, label=float(level)))
    return out


def brute_force_bin_weight(
    rows: list[JoinedRow],
    grid_step: float = 0.01,
) -> tuple[float, float]:
    """Exhaustively scan the weight grid over one bin's rows.

    Independent oracle for the calibrated per-bin weight; returns the
    first (smallest-w) minimizer and its RMSE.
    """
    if not rows:
        raise EmptyBin("no rows in bin")
    if any(r.reference is None for r in rows):
        raise NoReferences("bin rows must carry references")
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9:
        raise InvalidConfig(f"grid_step {grid_step} does not divide 1 evenly")
    best_w, best_rmse = 0.0, float("inf")
    for i in range(n + 1):
        w = i * grid_step
        sse = 0.0
        for r in rows:
            err = (1.0 - w) * r.w2v + w * r.mllm - r.reference
            sse += err * err
        rm = (sse / len(rows)) ** 0.5
        if rm < best_rmse:
            best_w, best_rmse = w, rm
    return best_w, best_rmse


def nearest_class_mean_f1(
    train: list[FrameSequence],
    dev: list[FrameSequence],
) -> float:
    """Macro F1 of a nearest-class-mean classifier over frame-averaged
    vectors; confirms (or refutes) separability of generated features."""
    if not train or not dev:
        raise InvalidConfig("train and dev must be nonempty")
    sums: dict[float, np.ndarray] = {}
    counts: dict[float, int] = {}
    for seq in train:
        vec = seq.frames.mean(axis=0)
        sums[seq.label] = sums.get(seq.label, 0.0) + vec
        counts[seq.label] = counts.get(seq.label, 0) + 1
    levels = sorted(sums)
    means = np.stack([sums[lvl] / counts[lvl] for lvl in levels])
    preds = []
    for seq in dev:
        vec = seq.frames.mean(axis=0)
        preds.append(levels[int(np.argmin(np.linalg.norm(means - vec, axis=1)))])
    return macro_f1(preds, [seq.label for seq in dev])
