"""One-hot event encoding with optional appended object-status features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_VOCABULARY, Event, EventStream, ObjectState, StreamError, Vocabulary, state_trace

# appended order is fixed regardless of how the flags are written
OBJECT_ORDER: tuple[str, ...] = ("people", "light", "door", "seats")

_ALIASES = {
    "people": "people",
    "people_count": "people",
    "light": "light",
    "door": "door",
    "seats": "seats",
    "seats_count": "seats",
}


@dataclass(frozen=True)
class StatusAugmentation:
    flags: frozenset[str] = frozenset()

    @classmethod
    def parse(cls, spec: str | None) -> "StatusAugmentation":
        """Parse strings like ``"people+light"``; empty or ``"none"`` is the basic model."""
        if spec is None or spec.strip().lower() in ("", "none", "basic"):
            return cls()
        flags = set()
        for part in spec.split("+"):
            key = part.strip().lower()
            if key not in _ALIASES:
                raise ValueError(f"unknown object {part!r} in augmentation {spec!r}")
            flags.add(_ALIASES[key])
        return cls(frozenset(flags))

    @property
    def ordered(self) -> tuple[str, ...]:
        return tuple(o for o in OBJECT_ORDER if o in self.flags)

    def __str__(self) -> str:
        return "+".join(self.ordered)

    def width(self, vocab_size: int) -> int:
        return vocab_size + len(self.flags)


def status_features(state: ObjectState, aug: StatusAugmentation) -> list[float]:
    out = []
    for obj in aug.ordered:
        if obj == "people":
            out.append(state.people / state.max_people)
        elif obj == "light":
            out.append(1.0 if state.light else 0.0)
        elif obj == "door":
            out.append(1.0 if state.door_open else 0.0)
        else:
            out.append(state.seats / state.max_seats)
    return out


def encode_event(
    ev: Event,
    state_after_ev: ObjectState,
    aug: StatusAugmentation,
    vocabulary: Vocabulary = DEFAULT_VOCABULARY,
) -> np.ndarray:
    if not 0 <= ev.event_type < len(vocabulary):
        raise StreamError(f"unknown event id {ev.event_type}")
    vec = np.zeros(aug.width(len(vocabulary)))
    vec[ev.event_type] = 1.0
    vec[len(vocabulary):] = status_features(state_after_ev, aug)
    return vec


def encode_stream(
    stream: EventStream,
    aug: StatusAugmentation,
    max_people: int = 10,
    max_seats: int = 10,
    state_before: bool = False,
) -> np.ndarray:
    """Encode every event; returns an array of shape (len(stream), V + k).

    Row i uses the object state after event i, or before it when
    ``state_before`` is set.
    """
    V = len(stream.vocabulary)
    out = np.zeros((len(stream), aug.width(V)))
    if not len(stream):
        return out
    out[np.arange(len(stream)), stream.ids] = 1.0
    if aug.flags:
        trace = state_trace(stream, max_people, max_seats)
        if state_before:
            trace = [ObjectState(max_people=max_people, max_seats=max_seats), *trace[:-1]]
        out[:, V:] = [status_features(s, aug) for s in trace]
    return out
