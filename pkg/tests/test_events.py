import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csdl_aed.errors import InputError
from csdl_aed.events import Event, EventRoll, make_event, merge_overlapping, rasterize, runs


def test_make_event_validates():
    assert make_event("0.5", 1.2, "door") == Event(0.5, 1.2, "door")
    with pytest.raises(InputError):
        make_event(1.0, 1.0, "x")


def test_merge_same_label_only():
    ev = [Event(0.0, 1.0, "a"), Event(0.5, 2.0, "a"), Event(2.0, 2.5, "a"), Event(0.2, 0.3, "b")]
    assert merge_overlapping(ev) == [Event(0.0, 2.5, "a"), Event(0.2, 0.3, "b")]


def test_rasterize_any_overlap():
    roll = rasterize([Event(0.05, 0.15, "x")], ["x"], 0.1, 3)
    assert roll.tolist() == [[1, 1, 0]]
    # an offset exactly on a boundary does not touch the next slot
    assert rasterize([Event(0.1, 0.2, "x")], ["x"], 0.1, 3).tolist() == [[0, 1, 0]]


def test_rasterize_ignores_unknown_labels():
    assert rasterize([Event(0, 1, "z")], ["x"], 0.1, 5).sum() == 0


def test_runs():
    assert runs([0, 1, 1, 0, 1], 1) == [(1, 3), (4, 5)]
    assert runs([0, 1, 1, 0, 1], 0) == [(0, 1), (3, 4)]
    assert runs([], 1) == []


def test_roll_validation():
    with pytest.raises(InputError):
        EventRoll(np.zeros((2, 4)), ["a"], 0.01)
    with pytest.raises(InputError):
        EventRoll(np.full((1, 4), 2), ["a"], 0.01)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1), min_size=40, max_size=40), min_size=1, max_size=3),
       st.sampled_from([0.0, 0.015]))
def test_roll_event_round_trip(rows, offset):
    labels = [f"e{i}" for i in range(len(rows))]
    roll = EventRoll(np.array(rows), labels, 0.01, offset)
    back = EventRoll.from_events(roll.to_events(), labels, 0.01, 40, offset)
    assert np.array_equal(back.roll, roll.roll)
