"""Synthetic multi-user smart-room event streams with ground-truth activities.

Activities are drawn from templates: a mandatory skeleton (host events),
context-dependent optional events, extra participants who arrive and leave
on their own, and an occasional leave-and-return trip by the host. When two
consecutive activities share a host, the second may skip setup that the
first never tore down (the light stays on, the host stays seated).
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import DEFAULT_VOCABULARY, Event, EventStream, Vocabulary

SETUP, BODY, TEARDOWN = "setup", "body", "teardown"

# opener -> closer for every two-state object the generator drives
PAIRS: dict[str, str] = {
    "entrance": "exit",
    "sit down": "stand up",
    "light on": "light off",
    "door opened": "door closed",
    "air conditioner on": "air conditioner off",
    "heater on": "heater off",
    "projector on": "projector off",
    "screen down": "screen up",
    "pc on": "pc off",
    "window opened": "window closed",
    "blinds down": "blinds up",
}


@dataclass(frozen=True)
class OptionalEvent:
    """An event (or opener/closer pair) included with some probability.

    ``position`` is ``setup`` for pairs (opener after the entrance, closer
    before the exit) or ``body`` for single events placed while seated.
    ``when`` restricts inclusion to a context flag such as ``"night"``.
    """

    event: str
    prob: float
    position: str = SETUP
    when: str | None = None

    @property
    def closer(self) -> str | None:
        return PAIRS.get(self.event) if self.position == SETUP else None


@dataclass(frozen=True)
class ActivityTemplate:
    name: str
    skeleton: tuple[str, ...]
    optional_events: tuple[OptionalEvent, ...] = ()
    participants: tuple[int, int] = (1, 1)
    duration_scale: float = 1.0
    redundancy: bool = True
    weight: float = 1.0

    def __post_init__(self):
        if len(self.skeleton) < 2:
            raise ValueError(f"{self.name}: skeleton needs at least 2 events")
        lo, hi = self.participants
        if not 1 <= lo <= hi:
            raise ValueError(f"{self.name}: bad participant range")

    @property
    def seated(self) -> bool:
        return "sit down" in self.skeleton and "stand up" in self.skeleton


def _opt(event, prob, position=SETUP, when=None):
    return OptionalEvent(event, prob, position, when)


_CLIMATE = (_opt("air conditioner on", 0.7, when="summer"), _opt("heater on", 0.6, when="winter"))
_LIGHT = (_opt("light on", 0.9, when="night"), _opt("light on", 0.15, when="day"))

DEFAULT_TEMPLATES: tuple[ActivityTemplate, ...] = (
    ActivityTemplate(
        "study",
        ("entrance", "sit down", "stand up", "exit"),
        _LIGHT + _CLIMATE + (_opt("pc on", 0.5), _opt("blinds down", 0.15), _opt("coffee machine on", 0.3, BODY)),
        (1, 3), weight=2.0,
    ),
    ActivityTemplate(
        "seminar",
        ("entrance", "projector on", "screen down", "sit down", "stand up", "screen up", "projector off", "exit"),
        _LIGHT + _CLIMATE + (_opt("door opened", 0.4), _opt("blinds down", 0.4)),
        (3, 8), duration_scale=1.5, weight=2.0,
    ),
    ActivityTemplate(
        "phone call",
        ("entrance", "sit down", "stand up", "exit"),
        (_opt("light on", 0.5, when="night"),),
        (1, 1), duration_scale=0.5, redundancy=False,
    ),
    ActivityTemplate(
        "meeting",
        ("entrance", "sit down", "stand up", "exit"),
        _LIGHT + _CLIMATE + (_opt("door opened", 0.3), _opt("pc on", 0.3), _opt("coffee machine on", 0.4, BODY)),
        (2, 6), weight=2.0,
    ),
    ActivityTemplate(
        "lecture",
        ("entrance", "light on", "projector on", "sit down", "stand up", "projector off", "light off", "exit"),
        _CLIMATE + (_opt("screen down", 0.7), _opt("door opened", 0.3)),
        (4, 8), duration_scale=1.5,
    ),
    ActivityTemplate(
        "cleaning",
        ("entrance", "window opened", "window closed", "exit"),
        _LIGHT + (_opt("door opened", 0.7),),
        (1, 2), duration_scale=0.7, redundancy=False,
    ),
    ActivityTemplate(
        "reading",
        ("entrance", "sit down", "stand up", "exit"),
        (_opt("light on", 0.95, when="night"), _opt("light on", 0.5, when="day"), _opt("blinds down", 0.3))
        + _CLIMATE,
        (1, 1),
    ),
    ActivityTemplate(
        "coffee break",
        ("entrance", "coffee machine on", "sit down", "stand up", "exit"),
        _LIGHT,
        (1, 4), duration_scale=0.6, redundancy=False,
    ),
    ActivityTemplate(
        "video conference",
        ("entrance", "pc on", "sit down", "stand up", "pc off", "exit"),
        _LIGHT + (_opt("blinds down", 0.5), _opt("door opened", 0.2)),
        (1, 3),
    ),
    ActivityTemplate(
        "movie",
        ("entrance", "blinds down", "projector on", "screen down", "sit down", "stand up", "screen up",
         "projector off", "blinds up", "exit"),
        _CLIMATE,
        (2, 5), duration_scale=2.0,
    ),
    ActivityTemplate(
        "group study",
        ("entrance", "sit down", "stand up", "exit"),
        _LIGHT + _CLIMATE + (_opt("pc on", 0.4), _opt("coffee machine on", 0.3, BODY)),
        (2, 5),
    ),
    ActivityTemplate(
        "presentation practice",
        ("entrance", "pc on", "projector on", "screen down", "screen up", "projector off", "pc off", "exit"),
        _LIGHT,
        (1, 2),
    ),
    ActivityTemplate(
        "interview",
        ("entrance", "door opened", "sit down", "stand up", "door closed", "exit"),
        _LIGHT + _CLIMATE,
        (2, 3),
    ),
    ActivityTemplate(
        "maintenance",
        ("entrance", "light on", "air conditioner on", "air conditioner off", "light off", "exit"),
        (_opt("door opened", 0.5), _opt("window opened", 0.3)),
        (1, 1), duration_scale=0.5, redundancy=False,
    ),
    ActivityTemplate(
        "nap",
        ("entrance", "blinds down", "sit down", "stand up", "blinds up", "exit"),
        _CLIMATE,
        (1, 1), duration_scale=2.0,
    ),
    ActivityTemplate(
        "discussion",
        ("entrance", "sit down", "stand up", "exit"),
        _LIGHT + (_opt("door opened", 0.3), _opt("window opened", 0.3, when="summer")),
        (2, 5),
    ),
    ActivityTemplate(
        "ventilation",
        ("entrance", "window opened", "door opened", "door closed", "window closed", "exit"),
        (_opt("light on", 0.5, when="night"),),
        (1, 1), duration_scale=0.5, redundancy=False,
    ),
)


@dataclass(frozen=True)
class GapModel:
    """Log-normal gap distribution given by its median (seconds) and log-sd."""

    median: float
    sigma: float

    def __post_init__(self):
        if self.median <= 0 or self.sigma < 0:
            raise ValueError("gap median must be > 0 and sigma >= 0")

    def draw(self, rng: np.random.Generator, scale: float = 1.0, size=None):
        return rng.lognormal(math.log(self.median * scale), self.sigma, size)


@dataclass(frozen=True)
class GeneratorConfig:
    templates: tuple[ActivityTemplate, ...] = DEFAULT_TEMPLATES
    intra_gap: GapModel = GapModel(30.0, 1.0)
    inter_gap: GapModel = GapModel(600.0, 0.7)
    boundary_cluster_factor: float = 0.3
    shared_event_prob: float = 0.5
    # chance that the next activity keeps the previous activity's host
    host_stay_prob: float = 0.0
    redundancy_prob: float = 0.15
    # chance that a guest leaves and comes back during the body
    guest_trip_prob: float = 0.0
    late_arrival_prob: float = 0.3
    early_departure_prob: float = 0.3
    night_prob: float = 0.4
    n_users: int = 4
    min_activity_length: int = 4
    max_people: int = 10
    max_seats: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("boundary_cluster_factor", "shared_event_prob", "host_stay_prob", "redundancy_prob", "guest_trip_prob",
                     "late_arrival_prob", "early_departure_prob", "night_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.intra_gap.median >= self.inter_gap.median:
            raise ValueError("intra-activity gap median must be below the inter-activity median")
        if not self.templates:
            raise ValueError("need at least one template")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        top = max(t.participants[1] for t in self.templates)
        if top > min(self.max_people, self.max_seats):
            raise ValueError("template participants exceed object-state maxima")

    def template(self, name: str) -> ActivityTemplate:
        for t in self.templates:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "templates" in d:
            d["templates"] = tuple(
                ActivityTemplate(
                    t["name"], tuple(t["skeleton"]),
                    tuple(OptionalEvent(**o) for o in t.get("optional_events", ())),
                    tuple(t.get("participants", (1, 1))), t.get("duration_scale", 1.0),
                    t.get("redundancy", True), t.get("weight", 1.0),
                )
                for t in d["templates"]
            )
        for key in ("intra_gap", "inter_gap"):
            if key in d and isinstance(d[key], dict):
                d[key] = GapModel(**d[key])
        return cls(**d)


@dataclass
class _Slot:
    name: str
    user: int
    phase: str
    skeleton: bool = False


@dataclass
class ActivityInstance:
    template: ActivityTemplate
    slots: list[_Slot]
    host: int
    context: dict
    linked: bool = False  # shares setup with the previous activity

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.slots]

    def __len__(self) -> int:
        return len(self.slots)


def draw_context(rng: np.random.Generator, config: GeneratorConfig) -> dict:
    return {
        "night": bool(rng.random() < config.night_prob),
        "season": str(rng.choice(["spring", "summer", "autumn", "winter"])),
    }


def _flags(context: dict) -> set[str]:
    flags = {"night" if context.get("night") else "day"}
    if context.get("season"):
        flags.add(context["season"])
    return flags


def _insert(slots: list[_Slot], lo: int, hi: int, new: list[_Slot], rng) -> int:
    """Insert ``new`` contiguously at a uniform position in [lo, hi]."""
    pos = int(rng.integers(lo, hi + 1))
    slots[pos:pos] = new
    return pos


def build_activity(
    template: ActivityTemplate,
    context: dict,
    rng: np.random.Generator,
    config: GeneratorConfig = GeneratorConfig(),
    host: int = 0,
    guests: tuple[int, ...] | None = None,
) -> ActivityInstance:
    """Draw the event sequence (without times) for one activity instance."""
    flags = _flags(context)
    sk = list(template.skeleton)
    seated = template.seated
    # skeleton split: setup runs through the host's sit down, teardown from the stand up
    if seated:
        sit, stand = sk.index("sit down"), len(sk) - 1 - sk[::-1].index("stand up")
    else:
        sit, stand = 0, len(sk) - 1
    slots = [
        _Slot(n, host, SETUP if i <= sit else TEARDOWN if i >= stand else BODY, skeleton=True)
        for i, n in enumerate(sk)
    ]

    openers, singles, seen = [], [], set()
    for opt in template.optional_events:
        if opt.when is not None and opt.when not in flags:
            continue
        if opt.event in seen or opt.event in sk:
            continue
        if rng.random() < opt.prob:
            seen.add(opt.event)
            (openers if opt.closer else singles).append(opt)
    order = rng.permutation(len(openers))
    openers = [openers[i] for i in order]
    # openers follow the entrance, closers precede the exit in reverse order
    for k, opt in enumerate(openers):
        slots.insert(1 + k, _Slot(opt.event, host, SETUP))
    for opt in openers:
        j = len(slots) - 1
        slots.insert(j, _Slot(opt.closer, host, TEARDOWN))
    # closers are shuffled a little: swap adjacent pairs at random, never two skeleton events
    tail = [i for i, s in enumerate(slots) if s.phase == TEARDOWN and s.name != "exit" and i < len(slots) - 1]
    for a, b in zip(tail, tail[1:]):
        if b == a + 1 and rng.random() < 0.3 and not (slots[a].skeleton and slots[b].skeleton):
            slots[a], slots[b] = slots[b], slots[a]

    def body_range() -> tuple[int, int]:
        if seated:
            lo = next(i for i, s in enumerate(slots) if s.name == "sit down" and s.user == host) + 1
            hi = max(i for i, s in enumerate(slots) if s.name == "stand up" and s.user == host)
        else:
            lo, hi = 1, len(slots) - 1
        return lo, hi

    for opt in singles:
        lo, hi = body_range()
        _insert(slots, lo, hi, [_Slot(opt.event, host, BODY)], rng)

    if template.redundancy and rng.random() < config.redundancy_prob:
        lo, hi = body_range()
        trip = ["stand up", "exit", "entrance", "sit down"] if seated else ["exit", "entrance"]
        _insert(slots, lo, hi, [_Slot(n, host, BODY) for n in trip], rng)

    lo_p, hi_p = template.participants
    n_extra = int(rng.integers(lo_p, hi_p + 1)) - 1
    if guests is None:
        pool = [u for u in range(max(config.n_users, n_extra + 1)) if u != host]
        guests = tuple(int(u) for u in rng.permutation(pool)[:n_extra])
    for user in guests[:n_extra]:
        arrive = ["entrance", "sit down"] if seated else ["entrance"]
        leave = ["stand up", "exit"] if seated else ["exit"]
        lo, hi = body_range()
        late = rng.random() < config.late_arrival_prob
        # on-time guests arrive before the host sits down
        a_lo, a_hi = (lo, hi) if late else (1, max(1, lo - 1))
        pos = _insert(slots, a_lo, a_hi, [_Slot(n, user, SETUP if not late else BODY) for n in arrive], rng)
        lo, hi = body_range()
        start = pos + len(arrive)
        if rng.random() < config.early_departure_prob:
            d_lo, d_hi = start, max(start, hi)
        else:
            d_lo, d_hi = max(start, hi), max(start, hi)
        _insert(slots, d_lo, d_hi, [_Slot(n, user, BODY) for n in leave], rng)
        if rng.random() < config.guest_trip_prob:
            here = [i for i, sl in enumerate(slots) if sl.user == user]
            _insert(slots, here[len(arrive) - 1] + 1, here[len(arrive)], [_Slot(n, user, BODY) for n in leave + arrive], rng)
    return ActivityInstance(template, slots, host, dict(context))


def time_activity(
    inst: ActivityInstance,
    rng: np.random.Generator,
    config: GeneratorConfig,
) -> np.ndarray:
    """Offsets (seconds) of each event from the activity's first event."""
    n = len(inst)
    gaps = config.intra_gap.draw(rng, inst.template.duration_scale, size=max(n - 1, 0))
    if n >= 2:
        gaps[0] *= config.boundary_cluster_factor
        gaps[-1] *= config.boundary_cluster_factor
    for i in range(1, n):
        if inst.slots[i].name == "entrance" and inst.slots[i - 1].name == "exit" and inst.slots[i].user == inst.slots[i - 1].user:
            gaps[i - 1] *= 4.0  # a leave-and-return trip takes a while
    return np.concatenate([[0.0], np.cumsum(gaps)])


def generate_activity(
    template: ActivityTemplate,
    context: dict,
    rng: np.random.Generator,
    config: GeneratorConfig = GeneratorConfig(),
    vocabulary: Vocabulary = DEFAULT_VOCABULARY,
    activity_id: int = 0,
    host: int = 0,
) -> EventStream:
    inst = build_activity(template, context, rng, config, host)
    offsets = time_activity(inst, rng, config)
    events = tuple(Event(float(t), vocabulary.id(s.name), s.user, activity_id) for s, t in zip(inst.slots, offsets))
    return EventStream(events, frozenset(), vocabulary, {activity_id: template.name})


def _last(slots, name, user, phase=None) -> int | None:
    for i in range(len(slots) - 1, -1, -1):
        s = slots[i]
        if s.name == name and s.user == user and (phase is None or s.phase == phase):
            return i
    return None


def _first(slots, name, user, phase=None) -> int | None:
    for i, s in enumerate(slots):
        if s.name == name and s.user == user and (phase is None or s.phase == phase):
            return i
    return None


def link_shared(prev: ActivityInstance, nxt: ActivityInstance, min_length: int) -> bool:
    """Cancel the host's teardown in ``prev`` against matching setup in ``nxt``.

    The host stays in the room and any object left on carries over, so the
    follow-on activity starts after its redundant setup events. Returns
    False (and leaves both untouched) when either activity would become
    shorter than ``min_length``.
    """
    if prev.host != nxt.host or not (prev.template.seated and nxt.template.seated):
        return False
    host = prev.host
    drop_prev, drop_next = set(), set()
    for opener, closer in PAIRS.items():
        j = _first(nxt.slots, opener, host, SETUP)
        i = _last(prev.slots, closer, host, TEARDOWN)
        if i is None or j is None:
            continue
        if opener in ("entrance", "sit down"):
            # the host's own presence carries over only as a whole
            continue
        drop_prev.add(i)
        drop_next.add(j)
    i_exit, j_ent = _last(prev.slots, "exit", host), _first(nxt.slots, "entrance", host)
    i_up, j_sit = _last(prev.slots, "stand up", host, TEARDOWN), _first(nxt.slots, "sit down", host, SETUP)
    if None in (i_exit, j_ent, i_up, j_sit) or i_exit != len(prev.slots) - 1 or j_ent != 0:
        return False
    drop_prev |= {i_exit, i_up}
    drop_next |= {j_ent, j_sit}
    if len(prev) - len(drop_prev) < min_length or len(nxt) - len(drop_next) < min_length:
        return False
    # guests of nxt who arrived before the host sat down keep their events
    prev.slots = [s for k, s in enumerate(prev.slots) if k not in drop_prev]
    nxt.slots = [s for k, s in enumerate(nxt.slots) if k not in drop_next]
    nxt.linked = True
    return True


def generate_corpus(
    config: GeneratorConfig = GeneratorConfig(),
    n_activities: int = 436,
    rng: np.random.Generator | None = None,
    vocabulary: Vocabulary = DEFAULT_VOCABULARY,
) -> EventStream:
    """Concatenate ``n_activities`` generated activities into one labeled stream."""
    if n_activities < 1:
        raise ValueError("n_activities must be >= 1")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    weights = np.array([t.weight for t in config.templates], dtype=float)
    weights /= weights.sum()
    insts: list[ActivityInstance] = []
    for k in range(n_activities):
        template = config.templates[int(rng.choice(len(config.templates), p=weights))]
        host = int(rng.integers(config.n_users))
        if insts and rng.random() < config.host_stay_prob:
            host = insts[-1].host
        inst = build_activity(template, draw_context(rng, config), rng, config, host)
        if insts and rng.random() < config.shared_event_prob:
            link_shared(insts[-1], inst, config.min_activity_length)
        insts.append(inst)

    events: list[Event] = []
    boundaries = set()
    types = {}
    t = 0.0
    for k, inst in enumerate(insts):
        offsets = time_activity(inst, rng, config)
        if k:
            gap = config.inter_gap.draw(rng)
            t = events[-1].t + float(gap)
            boundaries.add(len(events))
        types[k] = inst.template.name
        for s, off in zip(inst.slots, offsets):
            events.append(Event(round(t + float(off), 3), vocabulary.id(s.name), s.user, k))
    return EventStream(tuple(events), frozenset(boundaries), vocabulary, types)


# --- reporting -------------------------------------------------------------


def activity_runs(stream: EventStream) -> list[tuple[int, int]]:
    return stream.segments()


def corpus_report(stream: EventStream) -> dict:
    """Inclusion probabilities, thirds-position distribution and length histogram."""
    names = stream.vocabulary.names
    seq = stream.names
    runs = activity_runs(stream)
    by_type: dict[str, list[set[str]]] = defaultdict(list)
    thirds = {n: [0, 0, 0] for n in names}
    lengths = []
    for s, e in runs:
        act = stream.events[s].activity_id
        kind = stream.activity_types.get(act, "unknown") if act is not None else "unknown"
        by_type[kind].append(set(seq[s:e]))
        L = e - s
        lengths.append(L)
        for k in range(s, e):
            thirds[seq[k]][min(2, 3 * (k - s) // L)] += 1
    inclusion = {
        kind: {n: sum(n in inst for inst in insts) / len(insts) for n in names}
        for kind, insts in sorted(by_type.items())
    }
    thirds_prob = {
        n: [c / sum(v) for c in v] if sum(v) else [0.0, 0.0, 0.0] for n, v in thirds.items()
    }
    times = stream.times
    bset = stream.true_boundaries
    gaps = np.diff(times) if len(times) > 1 else np.zeros(0)
    inter = np.array([gaps[b - 1] for b in sorted(bset)]) if bset else np.zeros(0)
    intra = np.array([g for i, g in enumerate(gaps, start=1) if i not in bset])
    lengths_arr = np.array(lengths) if lengths else np.zeros(0, dtype=int)
    return {
        "n_events": len(stream),
        "n_activities": len(runs),
        "n_boundaries": len(bset),
        "activity_counts": {k: len(v) for k, v in sorted(by_type.items())},
        "length_histogram": {int(k): v for k, v in sorted(Counter(lengths).items())},
        "min_length": int(lengths_arr.min()) if len(lengths_arr) else 0,
        "max_length": int(lengths_arr.max()) if len(lengths_arr) else 0,
        "fraction_lengths_below_60": float(np.mean(lengths_arr < 60)) if len(lengths_arr) else 1.0,
        "inclusion_probability": inclusion,
        "thirds_distribution": thirds_prob,
        "intra_gap_mean": float(intra.mean()) if len(intra) else 0.0,
        "inter_gap_mean": float(inter.mean()) if len(inter) else 0.0,
        "intra_gap_max": float(intra.max()) if len(intra) else 0.0,
        "inter_gap_min": float(inter.min()) if len(inter) else 0.0,
    }


def save_corpus(stream: EventStream, config: GeneratorConfig, out_dir: str | Path, n_activities: int) -> dict:
    from .core import dump_events

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_events(stream, out / "events.jsonl")
    sidecar = {
        "n_activities": n_activities,
        "config": config.to_dict(),
        "activity_types": {str(k): v for k, v in sorted(stream.activity_types.items())},
        "report": corpus_report(stream),
    }
    (out / "corpus.json").write_text(json.dumps(sidecar, indent=1) + "\n")
    return sidecar
