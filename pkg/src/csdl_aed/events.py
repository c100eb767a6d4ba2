"""Event intervals and binary event rolls."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError


class Event(NamedTuple):
    onset: float
    offset: float
    label: str


def make_event(onset, offset, label) -> Event:
    onset, offset = float(onset), float(offset)
    if not onset < offset:
        raise InputError(f"event {label!r}: onset {onset} must be < offset {offset}")
    return Event(onset, offset, str(label))


def labels_of(events) -> list:
    return sorted({e.label for e in events})


def merge_overlapping(events) -> list:
    """Merge overlapping or touching intervals that share a label."""
    out = []
    for label in labels_of(events):
        ivs = sorted((e.onset, e.offset) for e in events if e.label == label)
        cur_on, cur_off = ivs[0]
        for on, off in ivs[1:]:
            if on <= cur_off:
                cur_off = max(cur_off, off)
            else:
                out.append(Event(cur_on, cur_off, label))
                cur_on, cur_off = on, off
        out.append(Event(cur_on, cur_off, label))
    return sorted(out)


def _slot_range(onset, offset, resolution):
    # tolerance keeps 0.1 / 0.01 from landing on 10.000000000000002
    start = math.floor(onset / resolution + 1e-9)
    stop = math.ceil(offset / resolution - 1e-9)
    return start, max(stop, start + 1)


def rasterize(events, labels, resolution: float, n_slots: int | None = None) -> np.ndarray:
    """Binary ``(len(labels), n_slots)`` roll; slot ``i`` covers
    ``[i * resolution, (i + 1) * resolution)`` and is active when any event of
    that label overlaps it."""
    index = {lab: i for i, lab in enumerate(labels)}
    if n_slots is None:
        n_slots = max((_slot_range(e.onset, e.offset, resolution)[1] for e in events), default=0)
    roll = np.zeros((len(labels), n_slots), dtype=np.uint8)
    for e in events:
        if e.label not in index:
            continue
        start, stop = _slot_range(e.onset, e.offset, resolution)
        roll[index[e.label], max(start, 0):min(stop, n_slots)] = 1
    return roll


@dataclass
class EventRoll:
    """Binary ``(events, frames)`` activity matrix.

    Slot ``i`` spans ``[time_offset + i * frame_hop, time_offset + (i + 1) * frame_hop)``.
    """

    roll: np.ndarray
    labels: list
    frame_hop: float
    time_offset: float = 0.0

    def __post_init__(self):
        self.roll = np.asarray(self.roll, dtype=np.uint8)
        if self.roll.ndim != 2 or self.roll.shape[0] != len(self.labels):
            raise InputError("roll must be (len(labels), frames)")
        if np.any(self.roll > 1):
            raise InputError("roll entries must be 0 or 1")

    @property
    def n_frames(self) -> int:
        return self.roll.shape[1]

    def to_events(self) -> list:
        """Runs of ones as ``[start * hop, (end + 1) * hop)`` intervals."""
        out = []
        t0, hop = self.time_offset, self.frame_hop
        for row, label in zip(self.roll, self.labels):
            for start, stop in runs(row, 1):
                out.append(Event(t0 + start * hop, t0 + stop * hop, label))
        return sorted(out)

    @classmethod
    def from_events(cls, events, labels, frame_hop, n_frames, time_offset=0.0) -> "EventRoll":
        """Inverse of :meth:`to_events` for frame-aligned intervals."""
        roll = np.zeros((len(labels), n_frames), dtype=np.uint8)
        index = {lab: i for i, lab in enumerate(labels)}
        for e in events:
            start = max(int(round((e.onset - time_offset) / frame_hop)), 0)
            stop = int(round((e.offset - time_offset) / frame_hop))
            roll[index[e.label], start:stop] = 1
        return cls(roll, list(labels), frame_hop, time_offset)


def runs(row, value) -> list:
    """Half-open ``(start, stop)`` index pairs of maximal runs equal to ``value``."""
    row = np.asarray(row)
    hit = np.concatenate([[False], row == value, [False]])
    edges = np.flatnonzero(np.diff(hit.astype(np.int8)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))
