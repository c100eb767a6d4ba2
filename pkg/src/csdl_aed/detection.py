"""Test-time pipeline: decomposition, frame classification, post-processing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .classifier import ClassifierBank, predict_frames
from .dictionary import OverallDictionary
from .errors import ConfigError
from .events import EventRoll, runs
from .frontend import Spectrogram
from .nmf import NmfConfig, nmf_semi_supervised

SILENCE_FLOOR = 1e-8


@dataclass(frozen=True)
class PostProcessConfig:
    median_len: int = 3
    max_gap: float = 0.250
    min_duration: float = 0.200

    def __post_init__(self):
        if self.median_len < 1 or self.median_len % 2 == 0:
            raise ConfigError("median_len must be a positive odd number")
        if self.max_gap < 0 or self.min_duration < 0:
            raise ConfigError("durations must be >= 0")


# frame counts against durations; the slack absorbs 25 * 0.01 != 0.25
def _lasts_less(n_frames, hop, limit):
    return n_frames * hop < limit - 1e-9


def _lasts_more(n_frames, hop, limit):
    return n_frames * hop > limit + 1e-9


def postprocess_row(row, hop, cfg: PostProcessConfig) -> np.ndarray:
    row = np.asarray(row, dtype=np.uint8)
    if cfg.median_len > 1 and len(row):
        row = median_filter(row, size=cfg.median_len, mode="nearest")
    row = row.copy()
    for start, stop in runs(row, 0):
        if start > 0 and stop < len(row) and _lasts_less(stop - start, hop, cfg.max_gap):
            row[start:stop] = 1
    out = np.zeros_like(row)
    for start, stop in runs(row, 1):
        if _lasts_more(stop - start, hop, cfg.min_duration):
            out[start:stop] = 1
    return out


def postprocess(roll: EventRoll, cfg: PostProcessConfig = PostProcessConfig()):
    """Median filter, then fill short gaps, then drop short events.

    Gaps strictly shorter than ``max_gap`` between two active runs are filled;
    events must last strictly longer than ``min_duration`` to survive.
    Returns ``(processed_roll, events)``.
    """
    out = np.vstack([postprocess_row(r, roll.frame_hop, cfg) for r in roll.roll]) \
        if len(roll.labels) else roll.roll.copy()
    processed = EventRoll(out, list(roll.labels), roll.frame_hop, roll.time_offset)
    return processed, processed.to_events()


@dataclass
class Detection:
    events: list
    raw_roll: EventRoll
    processed_roll: EventRoll
    activations: np.ndarray
    noise_activations: np.ndarray


def detect(test_spec: Spectrogram, dictionary: OverallDictionary, bank: ClassifierBank,
           noise_rank: int = 1, nmf_cfg: NmfConfig = NmfConfig(0),
           pp_cfg: PostProcessConfig = PostProcessConfig(),
           silence_floor: float = SILENCE_FLOOR) -> Detection:
    """Detect events in one recording.

    Activations come from semi-supervised NMF with ``noise_rank`` extra
    atoms; the noise activations are returned but never classified. Frames
    whose spectrum sums to at most ``silence_floor`` are forced inactive.
    """
    bank.check_fingerprint(dictionary.fingerprint())
    V = test_spec.values
    hop = test_spec.hop_seconds
    # roll slots are centred on the analysis frames
    offset = (test_spec.frame_len - test_spec.hop) / 2 / test_spec.sample_rate
    silent = V.sum(axis=0) <= silence_floor
    if np.all(silent):
        H = np.zeros((dictionary.n_atoms, V.shape[1]))
        Hn = np.zeros((noise_rank, V.shape[1]))
    else:
        res = nmf_semi_supervised(V, dictionary.basis, min(noise_rank, V.shape[1] - 1),
                                  nmf_cfg.with_rank(0))
        H, Hn = res.event_activations, res.noise_activations
    raw = predict_frames(bank, H, hop)
    raw.roll[:, silent] = 0
    raw.time_offset = offset
    processed, events = postprocess(raw, pp_cfg)
    return Detection(events, raw, processed, H, Hn)
