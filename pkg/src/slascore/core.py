"""Domain types for scores, parts, records, and joined grader datasets.

Scores live on a CEFR-aligned numeric scale: references take the eight
levels 2.0, 2.5, ..., 5.5; grader predictions are unconstrained finite
reals (flagged when outside [0.0, 6.0]).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import (
    DuplicateKey,
    EmptyJoin,
    InvalidPart,
    MissingReference,
    NonFiniteScore,
    OffGridReference,
)

log = logging.getLogger(__name__)

#: The four speaking-task parts (Interview, Opinion, Presentation,
#: Communication Activity).
PARTS = (1, 3, 4, 5)

#: Sentinel part id for per-speaker overall scores.
OVERALL = "overall"

#: Valid reference levels: 2.0 through 5.5 in 0.5 steps.
REFERENCE_LEVELS = tuple(2.0 + 0.5 * i for i in range(8))

_GRID_TOL = 1e-9


def is_on_grid(value: float) -> bool:
    """True when ``value`` is one of the eight 0.5-step reference levels."""
    if not math.isfinite(value):
        return False
    return any(abs(value - lvl) <= _GRID_TOL for lvl in REFERENCE_LEVELS)


@dataclass(frozen=True, slots=True)
class ScoredRecord:
    """One (speaker, part) score: a grader prediction or a reference."""

    speaker_id: str
    part: int | str
    score: float

    @property
    def key(self) -> tuple[str, int | str]:
        return (self.speaker_id, self.part)


def validate_record(rec: ScoredRecord, kind: str) -> ScoredRecord:
    """Validate one record as a ``"reference"`` or ``"prediction"``.

    References must sit exactly on the 0.5-step level grid; predictions
    only need to be finite (values outside [0.0, 6.0] are logged, not
    rejected, since both graders regress continuously).
    """
    if kind not in ("reference", "prediction"):
        raise ValueError(f"unknown record kind {kind!r}")
    if rec.part not in PARTS:
        raise InvalidPart(f"part {rec.part!r} not in {PARTS} (speaker {rec.speaker_id})")
    if not math.isfinite(rec.score):
        raise NonFiniteScore(f"non-finite score for ({rec.speaker_id}, {rec.part})")
    if kind == "reference":
        if not is_on_grid(rec.score):
            raise OffGridReference(
                f"reference {rec.score} for ({rec.speaker_id}, {rec.part}) "
                "is not a 0.5-step level in [2.0, 5.5]"
            )
    elif not 0.0 <= rec.score <= 6.0:
        log.warning(
            "prediction %s for (%s, %s) outside [0.0, 6.0]",
            rec.score, rec.speaker_id, rec.part,
        )
    return rec


@dataclass(frozen=True, slots=True)
class JoinedRow:
    """Both grader scores (plus optional reference) for one (speaker, part)."""

    speaker_id: str
    part: int
    w2v: float
    mllm: float
    reference: float | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.speaker_id, self.part)


@dataclass(frozen=True, slots=True)
class JoinedDataset:
    """Inner join of the two grader streams, keyed by (speaker, part).

    ``blind`` datasets carry no references and can only be fused, not
    evaluated or calibrated.
    """

    rows: tuple[JoinedRow, ...]

    @property
    def blind(self) -> bool:
        return any(r.reference is None for r in self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def w2v_scores(self) -> list[float]:
        return [r.w2v for r in self.rows]

    def mllm_scores(self) -> list[float]:
        return [r.mllm for r in self.rows]

    def references(self) -> list[float]:
        from .errors import NoReferences

        if self.blind:
            raise NoReferences("dataset is blind: no reference column")
        return [r.reference for r in self.rows]


def _index(records: list[ScoredRecord], label: str) -> dict:
    out: dict[tuple[str, int | str], float] = {}
    for rec in records:
        if rec.key in out:
            raise DuplicateKey(f"duplicate {label} key {rec.key}")
        out[rec.key] = rec.score
    return out


def join(
    w2v: list[ScoredRecord],
    mllm: list[ScoredRecord],
    refs: list[ScoredRecord] | None = None,
) -> JoinedDataset:
    """Inner-join the grader streams (and optional references) on key.

    Keys present in only one grader stream are dropped with a warning.
    When references are supplied, every joined key must have one:
    partial reference coverage raises rather than silently shrinking
    the evaluation set.
    """
    by_w2v = _index(w2v, "w2v")
    by_mllm = _index(mllm, "mllm")
    keys = sorted(by_w2v.keys() & by_mllm.keys())
    if not keys:
        raise EmptyJoin("no (speaker, part) keys shared by the two grader streams")
    for side, index in (("w2v", by_w2v), ("mllm", by_mllm)):
        only = sorted(set(index) - set(keys))
        if only:
            log.warning("%d key(s) only in %s stream: %s", len(only), side, only)

    by_ref = _index(refs, "reference") if refs is not None else None
    if by_ref is not None:
        missing = [k for k in keys if k not in by_ref]
        if missing:
            raise MissingReference(f"no reference for joined key(s): {missing}")

    rows = tuple(
        JoinedRow(
            speaker_id=sid,
            part=part,
            w2v=by_w2v[(sid, part)],
            mllm=by_mllm[(sid, part)],
            reference=by_ref[(sid, part)] if by_ref is not None else None,
        )
        for sid, part in keys
    )
    return JoinedDataset(rows=rows)
