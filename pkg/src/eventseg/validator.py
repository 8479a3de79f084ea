"""Time-interval post-validation of predicted boundaries.

Step one moves each boundary toward the largest of the three inter-event
gaps around it. Step two removes boundaries that leave a segment shorter
than the minimum activity length, dropping the flank with the smaller gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import EventStream, segments_from_boundaries
from .segmenter import SegmentationResult


@dataclass(frozen=True)
class ValidatorConfig:
    min_activity_length: int = 4
    # revise each boundary until it stops moving; False applies one step
    to_fixpoint: bool = True

    def __post_init__(self):
        if self.min_activity_length < 2:
            raise ValueError("min_activity_length must be >= 2")


def _times(stream) -> np.ndarray:
    return stream.times if isinstance(stream, EventStream) else np.asarray(stream, dtype=float)


def intervals(times: Sequence[float], b: int) -> tuple[float, float, float] | None:
    t = times
    if not 2 <= b <= len(t) - 2:
        return None
    return (t[b - 1] - t[b - 2], t[b] - t[b - 1], t[b + 1] - t[b])


def revise_boundary(stream, b: int) -> int:
    """Later event of the largest gap among the three around ``b``.

    Ties keep ``b``; a tie between the outer two gaps shifts left.
    """
    iv = intervals(_times(stream), b)
    if iv is None:
        return b
    i1, i2, i3 = iv
    if i2 >= i1 and i2 >= i3:
        return b
    return b - 1 if i1 >= i3 else b + 1


def revise_to_fixpoint(stream, b: int) -> int:
    times = _times(stream)
    while True:
        nb = revise_boundary(times, b)
        if nb == b:
            return b
        b = nb


def _gap(times: np.ndarray, b: int) -> float:
    return float(times[b] - times[b - 1])


def enforce_min_length(
    stream,
    boundaries: Iterable[int],
    config: ValidatorConfig = ValidatorConfig(),
    audit: list | None = None,
) -> tuple[int, ...]:
    """Merge segments shorter than the minimum length, leftmost first."""
    times = _times(stream)
    n = len(times)
    bounds = sorted(set(boundaries))
    while bounds:
        short = next(
            ((s, e) for s, e in segments_from_boundaries(n, bounds) if e - s < config.min_activity_length),
            None,
        )
        if short is None:
            break
        s, e = short
        left = _gap(times, s) if s > 0 else math.inf
        right = _gap(times, e) if e < n else math.inf
        # ties drop the right flank
        drop = s if left < right else e
        bounds.remove(drop)
        if audit is not None:
            audit.append({
                "step": "min_length",
                "boundary": drop,
                "segment": [s, e],
                "left_gap": left if s > 0 else None,
                "right_gap": right if e < n else None,
                "action": "removed",
            })
    return tuple(bounds)


def validate(
    stream,
    result: SegmentationResult,
    config: ValidatorConfig = ValidatorConfig(),
) -> SegmentationResult:
    """Revise every raw boundary, deduplicate, then enforce the minimum length."""
    times = _times(stream)
    if len(times) != len(result.scores):
        raise ValueError(f"stream has {len(times)} events but segmentation covers {len(result.scores)}")
    audit: list[dict] = []
    revised = []
    for b in result.boundaries:
        nb = revise_to_fixpoint(times, b) if config.to_fixpoint else revise_boundary(times, b)
        iv = intervals(times, b)
        entry = {
            "step": "revise",
            "boundary": b,
            "intervals": list(iv) if iv is not None else None,
            "revised": nb,
            "action": "kept" if nb == b else "shifted",
        }
        if nb in revised:
            entry["action"] = "merged"
        else:
            revised.append(nb)
        audit.append(entry)
    final = enforce_min_length(times, revised, config, audit)
    return SegmentationResult(result.scores, final, "validated", tuple(audit), result.timing)
