"""Event vocabulary, stream container and the running object-state tracker."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

DEFAULT_EVENT_NAMES: tuple[str, ...] = (
    "entrance",
    "exit",
    "light on",
    "light off",
    "door opened",
    "door closed",
    "sit down",
    "stand up",
    "air conditioner on",
    "air conditioner off",
    "heater on",
    "heater off",
    "projector on",
    "projector off",
    "screen down",
    "screen up",
    "pc on",
    "pc off",
    "window opened",
    "window closed",
    "blinds down",
    "blinds up",
    "coffee machine on",
)


class StreamError(ValueError):
    """Raised for malformed streams, unknown events or missing ground truth."""


@dataclass(frozen=True)
class EventType:
    id: int
    name: str


class Vocabulary:
    """Dense mapping between event names and integer ids."""

    def __init__(self, names: Iterable[str]):
        self.names: tuple[str, ...] = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise StreamError("event names must be unique")
        if not self.names:
            raise StreamError("vocabulary is empty")
        self._index = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[EventType]:
        return (EventType(i, n) for i, n in enumerate(self.names))

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and other.names == self.names

    def __hash__(self) -> int:
        return hash(self.names)

    def id(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise StreamError(f"unknown event {name!r}") from None

    def name(self, event_id: int) -> str:
        if not 0 <= event_id < len(self.names):
            raise StreamError(f"event id {event_id} outside vocabulary of size {len(self)}")
        return self.names[event_id]

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        names = json.loads(Path(path).read_text())
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise StreamError("vocabulary file must be a JSON array of strings")
        return cls(names)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(list(self.names), indent=1) + "\n")


DEFAULT_VOCABULARY = Vocabulary(DEFAULT_EVENT_NAMES)


@dataclass(frozen=True)
class Event:
    t: float
    event_type: int
    user: int | None = None
    activity_id: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.t) or self.t < 0:
            raise StreamError(f"event time must be finite and >= 0, got {self.t}")


@dataclass(frozen=True)
class EventStream:
    """Time-ordered events plus ground-truth boundaries.

    A boundary index marks the first event of an activity; index 0 is never
    a boundary. ``activity_types`` optionally maps activity ids to template
    names and is only used for reporting.
    """

    events: tuple[Event, ...]
    true_boundaries: frozenset[int] = frozenset()
    vocabulary: Vocabulary = DEFAULT_VOCABULARY
    activity_types: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "true_boundaries", frozenset(int(b) for b in self.true_boundaries))
        n = len(self.events)
        for a, b in zip(self.events, self.events[1:]):
            if b.t < a.t:
                raise StreamError("events must be sorted by time")
        for ev in self.events:
            if not 0 <= ev.event_type < len(self.vocabulary):
                raise StreamError(f"event id {ev.event_type} outside vocabulary")
        for b in self.true_boundaries:
            if not 1 <= b <= n - 1:
                raise StreamError(f"boundary {b} outside 1..{n - 1}")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.t for e in self.events], dtype=float)

    @property
    def ids(self) -> np.ndarray:
        return np.array([e.event_type for e in self.events], dtype=int)

    @property
    def names(self) -> list[str]:
        return [self.vocabulary.names[e.event_type] for e in self.events]

    @property
    def boundaries(self) -> list[int]:
        return sorted(self.true_boundaries)

    @property
    def labeled(self) -> bool:
        return bool(self.events) and all(e.activity_id is not None for e in self.events)

    def segments(self) -> list[tuple[int, int]]:
        """Half-open (start, end) index ranges induced by the true boundaries."""
        return segments_from_boundaries(len(self), self.true_boundaries)

    def slice(self, start: int, stop: int) -> "EventStream":
        bounds = {b - start for b in self.true_boundaries if start < b < stop}
        return EventStream(self.events[start:stop], frozenset(bounds), self.vocabulary, self.activity_types)

    @classmethod
    def from_names(
        cls,
        names: Sequence[str],
        times: Sequence[float] | None = None,
        activities: Sequence[int] | None = None,
        vocabulary: Vocabulary = DEFAULT_VOCABULARY,
    ) -> "EventStream":
        """Build a stream from event names; boundaries follow activity id changes."""
        if times is None:
            times = [float(i) for i in range(len(names))]
        acts = list(activities) if activities is not None else [None] * len(names)
        events = [
            Event(float(t), vocabulary.id(n), None, a) for n, t, a in zip(names, times, acts)
        ]
        return cls(tuple(events), boundaries_from_activity_ids(acts), vocabulary)


def segments_from_boundaries(n: int, boundaries: Iterable[int]) -> list[tuple[int, int]]:
    if n == 0:
        return []
    cuts = [0, *sorted(boundaries), n]
    return [(a, b) for a, b in zip(cuts, cuts[1:])]


def boundaries_from_activity_ids(activity_ids: Sequence[int | None]) -> frozenset[int]:
    """Indices where the activity id differs from the previous event's id."""
    if any(a is None for a in activity_ids):
        return frozenset()
    return frozenset(i for i in range(1, len(activity_ids)) if activity_ids[i] != activity_ids[i - 1])


@dataclass(frozen=True)
class ObjectState:
    light: bool = False
    door_open: bool = False
    people: int = 0
    seats: int = 0
    max_people: int = 10
    max_seats: int = 10

    def __post_init__(self):
        if self.max_people <= 0 or self.max_seats <= 0:
            raise StreamError("object-state maxima must be positive")
        if not (0 <= self.people <= self.max_people and 0 <= self.seats <= self.max_seats):
            raise StreamError("object-state counters outside [0, max]")


# name -> (field, value or counter delta)
_EFFECTS: dict[str, tuple[str, object]] = {
    "entrance": ("people", +1),
    "exit": ("people", -1),
    "light on": ("light", True),
    "light off": ("light", False),
    "door opened": ("door_open", True),
    "door closed": ("door_open", False),
    "sit down": ("seats", +1),
    "stand up": ("seats", -1),
}


def apply_event(state: ObjectState, ev: Event | str, vocabulary: Vocabulary = DEFAULT_VOCABULARY) -> ObjectState:
    name = ev if isinstance(ev, str) else vocabulary.name(ev.event_type)
    if name not in vocabulary:
        raise StreamError(f"unknown event {name!r}")
    effect = _EFFECTS.get(name)
    if effect is None:
        return state
    attr, value = effect
    if isinstance(value, bool):
        return replace(state, **{attr: value})
    top = state.max_people if attr == "people" else state.max_seats
    return replace(state, **{attr: min(top, max(0, getattr(state, attr) + value))})


def would_clamp(state: ObjectState, name: str) -> bool:
    """True when applying ``name`` hits a counter limit (inconsistent stream)."""
    effect = _EFFECTS.get(name)
    if effect is None or isinstance(effect[1], bool):
        return False
    attr, delta = effect
    top = state.max_people if attr == "people" else state.max_seats
    return not 0 <= getattr(state, attr) + delta <= top


def is_noop(state: ObjectState, name: str) -> bool:
    """True when a binary-object event would leave the state unchanged."""
    effect = _EFFECTS.get(name)
    return effect is not None and isinstance(effect[1], bool) and getattr(state, effect[0]) == effect[1]


def state_trace(
    stream: EventStream,
    max_people: int = 10,
    max_seats: int = 10,
    initial: ObjectState | None = None,
) -> list[ObjectState]:
    """State after each event, folding :func:`apply_event` over the stream."""
    state = initial if initial is not None else ObjectState(max_people=max_people, max_seats=max_seats)
    trace = []
    for ev in stream.events:
        state = apply_event(state, ev, stream.vocabulary)
        trace.append(state)
    return trace


@dataclass(frozen=True)
class DatasetStats:
    e_total: int
    e_boundary: int

    def __post_init__(self):
        if not 0 <= self.e_boundary <= self.e_total:
            raise StreamError("need 0 <= e_boundary <= e_total")


def dataset_stats(stream: EventStream) -> DatasetStats:
    if not stream.labeled:
        raise StreamError("dataset_stats needs a stream with ground-truth activity ids")
    return DatasetStats(len(stream), len(stream.true_boundaries))


# --- event-log files -------------------------------------------------------


def dump_events(stream: EventStream, path: str | Path) -> None:
    with open(path, "w") as fh:
        for ev in stream.events:
            rec = {
                "t": ev.t,
                "event": stream.vocabulary.names[ev.event_type],
                "user": ev.user,
                "activity": ev.activity_id,
            }
            fh.write(json.dumps(rec) + "\n")


def load_events(
    path: str | Path,
    vocabulary: Vocabulary = DEFAULT_VOCABULARY,
    activity_types: Mapping[int, str] | None = None,
) -> EventStream:
    events = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                t, name = float(rec["t"]), rec["event"]
            except (ValueError, KeyError, TypeError) as exc:
                raise StreamError(f"{path}:{lineno}: bad event record ({exc})") from None
            if name not in vocabulary:
                raise StreamError(f"{path}:{lineno}: unknown event {name!r}")
            events.append(Event(t, vocabulary.id(name), rec.get("user"), rec.get("activity")))
    acts = [e.activity_id for e in events]
    return EventStream(tuple(events), boundaries_from_activity_ids(acts), vocabulary, dict(activity_types or {}))
