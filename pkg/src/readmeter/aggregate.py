"""Per-session reading time summation and read-level classification."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .baselines import TimestampPrediction

# Words-per-minute thresholds separating skip / skim / read-in-detail.
SKIM_WPM = 400.0
DETAIL_WPM = 200.0


class ReadLevel(Enum):
    SKIP = "skip"
    SKIM = "skim"
    DETAIL = "detail"

    @property
    def read(self) -> bool:
        """True when the message was skimmed or read in detail."""
        return self is not ReadLevel.SKIP


class CoverageError(ValueError):
    """Predictions do not cover the session's seconds exactly once."""


@dataclass(frozen=True)
class ReadingTimeEstimate:
    msg_id: str
    session_id: str
    time: float

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("reading time must be non-negative")


def reading_time(
    predictions: Iterable[TimestampPrediction],
    seconds: Sequence[int],
    session_id: str = "",
) -> ReadingTimeEstimate:
    """Sum per-second probabilities for one (message, session).

    Every integer second of the session must appear exactly once; missing
    seconds are an error rather than implicit zeros.
    """
    preds = list(predictions)
    if not preds:
        raise CoverageError("no predictions supplied")
    msg_id = preds[0].msg_id
    seen: dict[int, float] = {}
    for p in preds:
        if p.msg_id != msg_id:
            raise CoverageError(f"mixed msg_ids {msg_id!r} and {p.msg_id!r}")
        if p.t in seen:
            raise CoverageError(f"duplicate second {p.t}")
        seen[p.t] = p.p
    expected = set(seconds)
    if set(seen) != expected:
        missing = sorted(expected - set(seen))[:5]
        extra = sorted(set(seen) - expected)[:5]
        raise CoverageError(f"seconds mismatch: missing={missing} extra={extra}")
    return ReadingTimeEstimate(msg_id=msg_id, session_id=session_id, time=sum(seen.values()))


def classify_read_level(time: float, words: int) -> ReadLevel:
    """Read level from effective reading speed against 400/200 wpm.

    Boundaries are closed on the slower side: exactly 400 wpm is a skim,
    exactly 200 wpm is read-in-detail. Zero time is always a skip.
    """
    if words < 1:
        raise ValueError("words must be >= 1")
    if time < 0:
        raise ValueError("time must be >= 0")
    # speed > 400 wpm <=> time < words * 60/400; comparisons avoid dividing
    # by tiny times
    if time * SKIM_WPM < words * 60.0:
        return ReadLevel.SKIP
    if time * DETAIL_WPM < words * 60.0:
        return ReadLevel.SKIM
    return ReadLevel.DETAIL


READ_LEVELS = (ReadLevel.SKIP, ReadLevel.SKIM, ReadLevel.DETAIL)
LEVEL_INDEX = {level: i for i, level in enumerate(READ_LEVELS)}


def level_from_index(idx: int) -> ReadLevel:
    return READ_LEVELS[idx]
