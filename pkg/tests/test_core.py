import json

import pytest
from hypothesis import given, strategies as st

from eventseg.core import (
    DEFAULT_VOCABULARY,
    Event,
    EventStream,
    ObjectState,
    StreamError,
    Vocabulary,
    apply_event,
    dataset_stats,
    dump_events,
    load_events,
    state_trace,
)

V = DEFAULT_VOCABULARY
COUNTER_EVENTS = ["entrance", "exit", "sit down", "stand up", "light on", "light off", "pc on"]


def ev(name, t=0.0, act=None):
    return Event(t, V.id(name), None, act)


def test_vocabulary_defaults():
    assert len(V) == 23
    assert [e.id for e in V] == list(range(23))
    assert len(set(V.names)) == 23


def test_vocabulary_rejects_duplicates():
    with pytest.raises(StreamError):
        Vocabulary(["a", "a"])


def test_apply_event_examples():
    assert apply_event(ObjectState(people=0), ev("entrance")).people == 1
    assert apply_event(ObjectState(people=0), ev("exit")).people == 0
    assert apply_event(ObjectState(light=False), ev("light on")).light is True
    assert apply_event(ObjectState(light=True), ev("light off")).light is False
    assert apply_event(ObjectState(), ev("door opened")).door_open is True
    assert apply_event(ObjectState(seats=2), ev("stand up")).seats == 1
    s = ObjectState(people=3, seats=1, light=True)
    assert apply_event(s, ev("projector on")) == s


def test_apply_event_clamps_at_maximum():
    s = ObjectState(people=2, max_people=2)
    assert apply_event(s, ev("entrance")).people == 2


def test_state_trace_examples():
    stream = EventStream.from_names(["entrance", "sit down"])
    tr = state_trace(stream)
    assert (tr[0].people, tr[0].seats) == (1, 0)
    assert (tr[1].people, tr[1].seats) == (1, 1)
    assert state_trace(EventStream(())) == []
    tr = state_trace(EventStream.from_names(["entrance", "entrance", "exit"]))
    assert [s.people for s in tr] == [1, 2, 1]


def test_dataset_stats_examples():
    one = EventStream.from_names(["entrance", "sit down", "stand up", "exit"], activities=[0] * 4)
    assert dataset_stats(one) == (dataset_stats(one).__class__(4, 0))
    names = ["entrance", "sit down", "stand up", "exit"] + ["entrance", "light on", "sit down", "stand up", "exit"]
    two = EventStream.from_names(names, activities=[0] * 4 + [1] * 5)
    stats = dataset_stats(two)
    assert (stats.e_total, stats.e_boundary) == (9, 1)
    assert two.boundaries == [4]


def test_dataset_stats_needs_ground_truth():
    with pytest.raises(StreamError):
        dataset_stats(EventStream.from_names(["entrance", "exit"]))


def test_stream_invariants():
    with pytest.raises(StreamError):
        EventStream((ev("entrance", 5.0), ev("exit", 1.0)))
    with pytest.raises(StreamError):
        EventStream((ev("entrance"), ev("exit")), frozenset({0}))
    with pytest.raises(StreamError):
        Event(float("nan"), 0)
    with pytest.raises(StreamError):
        Event(-1.0, 0)
    # ties keep input order
    s = EventStream((ev("entrance", 1.0), ev("exit", 1.0)))
    assert s.names == ["entrance", "exit"]


def test_event_log_roundtrip(tmp_path):
    names = ["entrance", "light on", "sit down", "stand up", "light off", "exit", "entrance", "exit"]
    stream = EventStream.from_names(names, [0, 1.5, 2, 30, 31, 31, 600, 700], [0] * 6 + [1] * 2)
    path = tmp_path / "events.jsonl"
    dump_events(stream, path)
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"t", "event", "user", "activity"}
    back = load_events(path)
    assert back.names == names
    assert back.boundaries == [6]
    assert list(back.times) == list(stream.times)


def test_event_log_unknown_event(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"t": 0, "event": "teleport", "user": null, "activity": null}\n')
    with pytest.raises(StreamError, match="teleport"):
        load_events(path)


def test_vocabulary_file_roundtrip(tmp_path):
    V.dump(tmp_path / "vocab.json")
    assert Vocabulary.load(tmp_path / "vocab.json") == V


names_st = st.lists(st.sampled_from(COUNTER_EVENTS), max_size=60)


@given(names_st, st.integers(1, 4), st.integers(1, 4))
def test_counters_stay_in_range(names, max_people, max_seats):
    trace = state_trace(EventStream.from_names(names), max_people, max_seats)
    assert len(trace) == len(names)
    for s in trace:
        assert 0 <= s.people <= max_people
        assert 0 <= s.seats <= max_seats


@given(names_st, names_st)
def test_state_trace_prefix_fold(a, b):
    whole = state_trace(EventStream.from_names(a + b))
    left = state_trace(EventStream.from_names(a))
    start = left[-1] if left else None
    right = state_trace(EventStream.from_names(b), initial=start)
    assert whole[len(a):] == right


@given(st.lists(st.integers(4, 9), min_size=1, max_size=8))
def test_boundary_count_matches_activity_runs(lengths):
    names, acts = [], []
    for k, n in enumerate(lengths):
        names += ["entrance"] + ["pc on"] * (n - 2) + ["exit"]
        acts += [k] * n
    stream = EventStream.from_names(names, activities=acts)
    assert dataset_stats(stream).e_boundary == len(lengths) - 1
