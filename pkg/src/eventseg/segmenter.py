"""Sliding-window inference over a concatenated event stream."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import EventStream
from .encoder import StatusAugmentation, encode_stream
from .lstm import LstmModel, WindowBatch, forward, make_targets


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    scores: np.ndarray
    boundaries: tuple[int, ...]
    source: str = "raw"
    audit: tuple[dict, ...] = ()
    timing: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bounds = tuple(sorted(set(int(b) for b in self.boundaries)))
        n = len(self.scores)
        if any(not 1 <= b < n for b in bounds):
            raise ValueError(f"boundaries must lie in 1..{n - 1}")
        object.__setattr__(self, "boundaries", bounds)
        if self.source not in ("raw", "validated"):
            raise ValueError(f"unknown source {self.source!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegmentationResult):
            return NotImplemented
        return (
            self.boundaries == other.boundaries
            and self.source == other.source
            and self.audit == other.audit
            and np.array_equal(self.scores, other.scores)
        )

    def to_dict(self) -> dict:
        d = {
            "source": self.source,
            "n_events": len(self.scores),
            "boundaries": list(self.boundaries),
            "scores": np.asarray(self.scores).tolist(),
        }
        if self.audit:
            d["audit"] = list(self.audit)
        if self.timing:
            d["timing"] = self.timing
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentationResult":
        scores = np.asarray(d["scores"], dtype=float).reshape(-1, 2)
        return cls(scores, tuple(d["boundaries"]), d.get("source", "raw"), tuple(d.get("audit", ())), d.get("timing", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SegmentationResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def window_starts(n: int, L: int) -> np.ndarray:
    return np.arange(max(1, n - L + 1))


def windows(
    encoded: np.ndarray,
    L: int,
    boundaries: Iterable[int] = (),
    omega: float = 1.0,
) -> WindowBatch:
    """Stride-1 windows of length ``L``; streams shorter than ``L`` get one padded window."""
    encoded = np.asarray(encoded, dtype=float)
    n, D = encoded.shape
    if n == 0:
        raise ValueError("cannot window an empty stream")
    starts = window_starts(n, L)
    if n < L:
        padded = np.zeros((L, D))
        padded[:n] = encoded
        inputs = padded[None]
        mask = (np.arange(L) < n)[None]
    else:
        idx = starts[:, None] + np.arange(L)[None, :]
        inputs = encoded[idx]
        mask = np.ones((len(starts), L), dtype=bool)
    is_b = np.zeros(max(n, L), dtype=bool)
    is_b[[b for b in boundaries]] = True
    labels = is_b[starts[:, None] + np.arange(L)[None, :]] & mask
    return WindowBatch(inputs, make_targets(labels, omega), mask)


def aggregate(outputs: np.ndarray, mask: np.ndarray, n: int, method: str = "mean") -> np.ndarray:
    """Combine per-window outputs (N, L, 2) into one 2-vector per event.

    ``mean`` averages every unmasked output covering the event. ``vote``
    returns the fraction of covering windows with a boundary decision and
    its complement.
    """
    outputs = np.asarray(outputs, dtype=float)
    N, L, _ = outputs.shape
    mask = np.asarray(mask, dtype=bool)
    if method == "vote":
        outputs = np.stack([outputs[..., 0] > outputs[..., 1], outputs[..., 0] <= outputs[..., 1]], axis=-1).astype(float)
    elif method != "mean":
        raise ValueError(f"unknown aggregation {method!r}")
    total = np.zeros((n + L, 2))
    count = np.zeros(n + L)
    for p in range(L):
        m = mask[:, p]
        total[p:p + N] += outputs[:, p] * m[:, None]
        count[p:p + N] += m
    count = count[:n]
    if np.any(count == 0):
        raise ValueError("some events are not covered by any window")
    return total[:n] / count[:, None]


def decide(aggregated: np.ndarray) -> tuple[int, ...]:
    """Boundary wherever the first score strictly exceeds the second; never index 0."""
    agg = np.asarray(aggregated)
    hits = np.flatnonzero(agg[:, 0] > agg[:, 1])
    return tuple(int(i) for i in hits if i > 0)


def predict_windows(model: LstmModel, batch: WindowBatch, chunk: int = 512) -> np.ndarray:
    out = np.empty(batch.inputs.shape[:2] + (2,))
    for s in range(0, len(batch), chunk):
        out[s:s + chunk] = forward(model, batch.inputs[s:s + chunk])
    return out


def segment_encoded(model: LstmModel, encoded: np.ndarray, aggregation: str = "mean") -> SegmentationResult:
    batch = windows(encoded, model.time_steps)
    outputs = predict_windows(model, batch)
    scores = aggregate(outputs, batch.mask, len(encoded), aggregation)
    return SegmentationResult(scores, decide(scores), "raw")


def segment(
    model: LstmModel,
    stream: EventStream,
    aug: StatusAugmentation | str | None = None,
    max_people: int = 10,
    max_seats: int = 10,
    aggregation: str = "mean",
    state_before: bool = False,
) -> SegmentationResult:
    """Encode, window, run the model, aggregate and decide."""
    if aug is None:
        aug = model.augmentation
    if not isinstance(aug, StatusAugmentation):
        aug = StatusAugmentation.parse(aug)
    width = aug.width(len(stream.vocabulary))
    if width != model.input_width:
        raise ValueError(f"encoder width {width} does not match model input width {model.input_width}")
    encoded = encode_stream(stream, aug, max_people, max_seats, state_before)
    return segment_encoded(model, encoded, aggregation)
