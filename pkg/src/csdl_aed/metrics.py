"""Frame-based and segment-based F-measures for polyphonic event detection.

All metrics rasterize reference and hypothesis event lists on a fixed grid
(10 ms frames or 100 ms segments). A grid slot is active for a class when
any event of that class overlaps it. Counting then happens on the binary
rolls:

* frame-based: F per recording from summed TP/FP/FN over classes, then the
  unweighted mean over recordings;
* segment-based: TP/FP/FN pooled over all segments, classes and recordings;
* class-wise segment-based: pooled F per reference class, then the mean.

When a count has nothing to score (no reference and no hypothesis activity)
precision, recall and F are all 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionError
from .events import labels_of, rasterize


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other):
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self

    @property
    def precision(self) -> float:
        if self.tp + self.fp == 0:
            return 1.0 if self.fn == 0 else 0.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        if self.tp + self.fn == 0:
            return 1.0 if self.fp == 0 else 0.0
        return self.tp / (self.tp + self.fn)

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def count_rolls(ref: np.ndarray, hyp: np.ndarray) -> Counts:
    ref = ref.astype(bool)
    hyp = hyp.astype(bool)
    return Counts(int(np.sum(ref & hyp)), int(np.sum(hyp & ~ref)), int(np.sum(ref & ~hyp)))


@dataclass
class MetricReport:
    name: str
    precision: float
    recall: float
    f_measure: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_recording: list = field(default_factory=list)
    per_class: dict = field(default_factory=dict)
    unreferenced_fp: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _prepare(refs, hyps, durations):
    refs, hyps = list(refs), list(hyps)
    if len(refs) != len(hyps):
        raise DimensionError(f"{len(refs)} reference lists vs {len(hyps)} hypothesis lists")
    if durations is None:
        durations = [max([e.offset for e in r] + [e.offset for e in h] + [0.0])
                     for r, h in zip(refs, hyps)]
    durations = list(durations)
    if len(durations) != len(refs):
        raise DimensionError("one duration per recording required")
    return refs, hyps, durations


def _rolls(ref, hyp, duration, labels, resolution):
    n = math.ceil(duration / resolution - 1e-9)
    n = max(n, rasterize(ref, labels, resolution).shape[1], rasterize(hyp, labels, resolution).shape[1])
    return rasterize(ref, labels, resolution, n), rasterize(hyp, labels, resolution, n)


def _all_labels(refs, hyps):
    return labels_of([e for lst in list(refs) + list(hyps) for e in lst])


def frame_based_f(refs, hyps, durations=None, frame: float = 0.010) -> MetricReport:
    refs, hyps, durations = _prepare(refs, hyps, durations)
    labels = _all_labels(refs, hyps)
    per = []
    total = Counts()
    for ref, hyp, dur in zip(refs, hyps, durations):
        c = count_rolls(*_rolls(ref, hyp, dur, labels, frame))
        total += c
        per.append({"precision": c.precision, "recall": c.recall, "f_measure": c.f_measure,
                    "tp": c.tp, "fp": c.fp, "fn": c.fn})
    if not per:
        return MetricReport("F_fb", 1.0, 1.0, 1.0)
    return MetricReport("F_fb",
                        float(np.mean([p["precision"] for p in per])),
                        float(np.mean([p["recall"] for p in per])),
                        float(np.mean([p["f_measure"] for p in per])),
                        total.tp, total.fp, total.fn, per)


def _segment_counts(refs, hyps, durations, segment, labels):
    per_class = {lab: Counts() for lab in labels}
    for ref, hyp, dur in zip(refs, hyps, durations):
        R, H = _rolls(ref, hyp, dur, labels, segment)
        for i, lab in enumerate(labels):
            per_class[lab] += count_rolls(R[i], H[i])
    return per_class


def segment_based_f(refs, hyps, durations=None, segment: float = 0.100) -> MetricReport:
    refs, hyps, durations = _prepare(refs, hyps, durations)
    labels = _all_labels(refs, hyps)
    total = Counts()
    for c in _segment_counts(refs, hyps, durations, segment, labels).values():
        total += c
    return MetricReport("F_sb", total.precision, total.recall, total.f_measure,
                        total.tp, total.fp, total.fn)


def class_wise_segment_f(refs, hyps, durations=None, segment: float = 0.100) -> MetricReport:
    """Mean of per-class pooled F over classes that occur in the references.

    False positives on classes absent from every reference are reported in
    ``unreferenced_fp`` and do not enter the mean.
    """
    refs, hyps, durations = _prepare(refs, hyps, durations)
    labels = _all_labels(refs, hyps)
    ref_labels = set(labels_of([e for lst in refs for e in lst]))
    counts = _segment_counts(refs, hyps, durations, segment, labels)
    per_class, extra = {}, {}
    total = Counts()
    for lab, c in counts.items():
        if lab in ref_labels:
            per_class[lab] = {"precision": c.precision, "recall": c.recall,
                              "f_measure": c.f_measure, "tp": c.tp, "fp": c.fp, "fn": c.fn}
            total += c
        else:
            extra[lab] = c.fp
    if not per_class:
        f = 1.0 if not extra else 0.0
        return MetricReport("F_cwsb", f, f, f, 0, sum(extra.values()), 0, [], {}, extra)
    mean = lambda key: float(np.mean([v[key] for v in per_class.values()]))  # noqa: E731
    return MetricReport("F_cwsb", mean("precision"), mean("recall"), mean("f_measure"),
                        total.tp, total.fp, total.fn, [], per_class, extra)


def evaluate_all(refs, hyps, durations=None) -> dict:
    """The three reported metrics, keyed ``F_fb``, ``F_sb``, ``F_cwsb``."""
    return {r.name: r for r in (frame_based_f(refs, hyps, durations),
                                segment_based_f(refs, hyps, durations),
                                class_wise_segment_f(refs, hyps, durations))}


def report_json(reports: dict) -> str:
    return json.dumps({k: v.to_dict() for k, v in reports.items()}, indent=2)


def report_table(reports: dict) -> str:
    lines = [f"{'metric':<8} {'F':>7} {'P':>7} {'R':>7} {'TP':>8} {'FP':>8} {'FN':>8}"]
    for name, r in reports.items():
        lines.append(f"{name:<8} {r.f_measure:7.3f} {r.precision:7.3f} {r.recall:7.3f} "
                     f"{r.tp:8d} {r.fp:8d} {r.fn:8d}")
    return "\n".join(lines)
