"""Glue between recordings and the learning / detection stages.

Training follows three steps: event spectra from isolated recordings feed
dictionary learning; supervised NMF of development mixtures against the
fixed dictionary gives activations; one-vs-rest classifiers are trained on
those activations with frame labels from the annotations.
"""

from __future__ import annotations

import logging

import numpy as np

from .classifier import ClassifierBank, TrainConfig, frame_label_sets, train_ovr
from .detection import Detection, PostProcessConfig, detect
from .dictionary import OverallDictionary
from .errors import InputError
from .frontend import Spectrogram, StftConfig, magnitude_spectrogram
from .nmf import NmfConfig, nmf_supervised

log = logging.getLogger(__name__)


def hstack_spectra(specs) -> Spectrogram:
    """Side-by-side concatenation; frame timing is dropped."""
    specs = [s for s in specs if s is not None]
    if not specs:
        raise InputError("nothing to concatenate")
    first = specs[0]
    for s in specs[1:]:
        if (s.n_bins, s.sample_rate, s.frame_len, s.hop) != \
                (first.n_bins, first.sample_rate, first.frame_len, first.hop):
            raise InputError("spectrograms use different analysis settings")
    return first.with_values(np.hstack([s.values for s in specs]))


def event_spectra(recordings, labels, stft_cfg: StftConfig = StftConfig()) -> list:
    """One spectrogram per label from isolated training recordings.

    A recording with annotations contributes the frames whose centre lies
    inside an annotated interval of the label. A recording without
    annotations contributes all its frames to its ``label``.
    """
    parts = {lab: [] for lab in labels}
    for rec in recordings:
        spec = magnitude_spectrogram(rec.clip, stft_cfg)
        if rec.events:
            sets = frame_label_sets(rec.events, spec.frame_centers())
            for lab in labels:
                cols = [i for i, s in enumerate(sets) if lab in s]
                if cols:
                    parts[lab].append(spec.select(cols))
        elif rec.label in parts:
            parts[rec.label].append(spec)
        else:
            log.warning("recording %s has no annotations and no known label", rec.recording_id)
    template = next((p[0] for p in parts.values() if p), None)
    if template is None:
        raise InputError("no training frames for any event")
    out = []
    for lab in labels:
        if parts[lab]:
            out.append(hstack_spectra(parts[lab]))
        else:
            log.warning("no training frames for event %s", lab)
            out.append(template.with_values(np.zeros((template.n_bins, 0))))
    return out


def training_activations(recordings, dictionary: OverallDictionary,
                         stft_cfg: StftConfig = StftConfig(),
                         nmf_cfg: NmfConfig = NmfConfig(0)):
    """Supervised activations ``H_D`` and per-frame label sets of annotated recordings."""
    Hs, sets = [], []
    for rec in recordings:
        spec = magnitude_spectrogram(rec.clip, stft_cfg)
        res = nmf_supervised(spec.values, dictionary.basis, nmf_cfg.with_rank(0))
        Hs.append(res.activations)
        sets.extend(frame_label_sets(rec.events, spec.frame_centers()))
    if not Hs:
        raise InputError("no development recordings")
    return np.hstack(Hs), sets


def train_classifiers(recordings, dictionary: OverallDictionary, labels,
                      stft_cfg: StftConfig = StftConfig(),
                      train_cfg: TrainConfig = TrainConfig(),
                      nmf_cfg: NmfConfig = NmfConfig(0)) -> ClassifierBank:
    H, sets = training_activations(recordings, dictionary, stft_cfg, nmf_cfg)
    return train_ovr(H, sets, train_cfg, list(labels), dictionary.fingerprint())


def detect_recordings(recordings, dictionary: OverallDictionary, bank: ClassifierBank,
                      stft_cfg: StftConfig = StftConfig(), noise_rank: int = 1,
                      nmf_cfg: NmfConfig = NmfConfig(0),
                      pp_cfg: PostProcessConfig = PostProcessConfig()) -> list:
    """:func:`detect` on every recording; returns one :class:`Detection` each."""
    out: list[Detection] = []
    for rec in recordings:
        spec = magnitude_spectrogram(rec.clip, stft_cfg)
        out.append(detect(spec, dictionary, bank, noise_rank, nmf_cfg, pp_cfg))
    return out
