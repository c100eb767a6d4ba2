"""Audio/annotation ingestion, matrix containers and synthetic datasets."""

from __future__ import annotations

import json
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, ParseError
from .events import Event, make_event, merge_overlapping
from .frontend import AudioClip

MATRIX_MAGIC = b"NNMAT\x00\x01\x00"
GMM_MAGIC = b"NNGMM\x00\x01\x00"


# --------------------------------------------------------------------- WAV

def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM WAV; samples are ``int16 / 32768`` and stereo is averaged."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            n = fh.getnframes()
            raw = fh.readframes(n)
    except (wave.Error, EOFError, struct.error) as exc:
        raise FormatError(f"{path}: bad RIFF/WAVE header or fmt chunk: {exc}") from exc
    if width != 2:
        raise FormatError(f"{path}: fmt chunk declares {8 * width}-bit samples; only 16-bit PCM is supported")
    if n_channels not in (1, 2):
        raise FormatError(f"{path}: fmt chunk declares {n_channels} channels; expected 1 or 2")
    if len(raw) != n * n_channels * width:
        raise FormatError(f"{path}: data chunk truncated ({len(raw)} of {n * n_channels * width} bytes)")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels == 2:
        data = data.reshape(-1, 2).mean(axis=1)
    return AudioClip(data, rate)


def write_wav(path, clip: AudioClip) -> None:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(clip.sample_rate))
        fh.writeframes(pcm.tobytes())


# ------------------------------------------------------------- annotations

def parse_annotation_text(text: str) -> list:
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise ParseError(f"expected 'onset offset label', got {line!r}", lineno)
        try:
            onset, offset = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric time in {line!r}", lineno) from None
        if not onset < offset:
            raise ParseError(f"onset {onset} is not before offset {offset}", lineno)
        events.append(Event(onset, offset, parts[2].strip()))
    return events


def parse_annotations(path) -> list:
    """Parse DCASE-style ``onset offset label`` lines (seconds)."""
    return parse_annotation_text(Path(path).read_text())


def format_annotations(events) -> str:
    return "".join(f"{e.onset:.3f}\t{e.offset:.3f}\t{e.label}\n" for e in sorted(events))


def write_annotations(path, events) -> None:
    Path(path).write_text(format_annotations(events))


# --------------------------------------------------------- matrix container

def save_matrix(path, M) -> None:
    """Binary container: 8 magic bytes, rows and cols as ``<u8``, row-major ``<f8`` values."""
    M = np.asarray(M, dtype="<f8")
    if M.ndim != 2:
        raise InputError("only 2-D matrices can be saved")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", *M.shape))
        fh.write(np.ascontiguousarray(M).tobytes())


def _read_block(fh, shape, path):
    count = int(np.prod(shape))
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise FormatError(f"{path}: truncated matrix payload")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != MATRIX_MAGIC:
            raise FormatError(f"{path}: not a matrix container")
        header = fh.read(16)
        if len(header) != 16:
            raise FormatError(f"{path}: truncated header")
        rows, cols = struct.unpack("<QQ", header)
        return _read_block(fh, (rows, cols), path)


def save_matrix_csv(path, M) -> None:
    np.savetxt(path, np.asarray(M), delimiter=",", fmt="%.17g")


def load_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def save_gmm(path, model) -> None:
    K, d = model.means.shape
    with open(path, "wb") as fh:
        fh.write(GMM_MAGIC)
        fh.write(struct.pack("<QQ", K, d))
        for block in (model.weights, model.means, model.variances):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_gmm(path):
    from .gmm import GmmModel

    with open(path, "rb") as fh:
        if fh.read(8) != GMM_MAGIC:
            raise FormatError(f"{path}: not a GMM container")
        K, d = struct.unpack("<QQ", fh.read(16))
        weights = _read_block(fh, (K,), path)
        means = _read_block(fh, (K, d), path)
        variances = _read_block(fh, (K, d), path)
    return GmmModel(weights, means, variances)


# ---------------------------------------------------------------- manifest

@dataclass
class AnnotatedRecording:
    clip: AudioClip
    events: list
    recording_id: str
    label: str | None = None

    def __post_init__(self):
        dur = self.clip.duration
        for e in self.events:
            if e.onset < 0 or e.offset > dur + 1e-6:
                raise InputError(
                    f"{self.recording_id}: event {e} lies outside the clip (0, {dur:.3f})")


@dataclass
class Manifest:
    """Recording list: ``{"labels": [...], "recordings": [{"id", "audio",
    "annotations"?, "label"?}]}``. Relative paths resolve against the
    manifest's directory."""

    labels: list
    entries: list
    root: Path = field(default_factory=Path)

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        if "recordings" not in data:
            raise FormatError(f"{path}: missing 'recordings'")
        entries = data["recordings"]
        labels = data.get("labels")
        if labels is None:
            labels = sorted({e["label"] for e in entries if e.get("label")})
        return cls(list(labels), entries, path.parent)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps({"labels": self.labels, "recordings": self.entries}, indent=2))

    def resolve(self, rel) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def recordings(self):
        for i, entry in enumerate(self.entries):
            clip = load_wav(self.resolve(entry["audio"]))
            ann = entry.get("annotations")
            events = parse_annotations(self.resolve(ann)) if ann else []
            yield AnnotatedRecording(clip, events, entry.get("id", f"rec{i:03d}"), entry.get("label"))


# ---------------------------------------------------------------- synthesis

C4, E4, G4 = 261.63, 329.63, 392.00


@dataclass(frozen=True)
class Dynamics:
    """A playing-strength layer: spectral tilt and treble damping of a note.

    Each rendered exemplar picks one layer with probability proportional to
    ``weight``. Its harmonic rolloff exponent is ``rolloff`` times a
    log-uniform factor in ``exp(+-rolloff_jitter)``; ``harmonic_decay``, when
    given as ``(lo, hi)``, replaces the exemplar's value by a uniform draw.
    """

    weight: float = 1.0
    rolloff: float = 1.0
    rolloff_jitter: float = 0.0
    harmonic_decay: tuple | None = None

    def __post_init__(self):
        if self.weight <= 0 or self.rolloff < 0 or self.rolloff_jitter < 0:
            raise InputError("dynamics weight must be positive, rolloff and jitter non-negative")


@dataclass(frozen=True)
class ExemplarSpec:
    """One kind of exemplar: simultaneous tones, each with harmonics."""

    pitches: tuple
    duration: float
    count: int
    n_harmonics: int = 3
    decay: float = 3.0          # 1/s, fundamental
    harmonic_decay: float = 1.0  # extra 1/s per harmonic above the first
    onset_ms: float = 5.0
    layers: tuple = (Dynamics(),)

    def __post_init__(self):
        if not self.layers:
            raise InputError("at least one dynamics layer required")
        if self.count < 1:
            raise InputError("exemplar count must be >= 1")
        if self.duration <= 0:
            raise InputError("exemplar duration must be positive")


@dataclass(frozen=True)
class SynthSpec:
    exemplars: tuple
    sample_rate: int = 8000
    noise_level: float = 0.0

    def __post_init__(self):
        nyq = self.sample_rate / 2
        for ex in self.exemplars:
            if max(ex.pitches) * ex.n_harmonics >= nyq:
                raise InputError(f"partials of {ex.pitches} reach Nyquist ({nyq} Hz)")


def default_piano_spec() -> SynthSpec:
    return SynthSpec((
        ExemplarSpec((C4, E4, G4), 1.0, 10),
        ExemplarSpec((C4,), 0.5, 1),
    ))


def layered_piano_spec() -> SynthSpec:
    """Piano event whose chords are played at two strengths.

    Soft chords are dull and steady; hard chords are bright with a random
    tilt and treble damping, so the chord part has more spectral variety
    than the rare C4 part. C4 is played soft. Same 20:1 layout as
    :func:`default_piano_spec`, six harmonics per tone.
    """
    soft = Dynamics(0.5, rolloff=3.0)
    hard = Dynamics(0.5, rolloff=0.3, rolloff_jitter=1.0, harmonic_decay=(0.0, 4.0))
    return SynthSpec((
        ExemplarSpec((C4, E4, G4), 1.0, 10, n_harmonics=6, harmonic_decay=0.0, layers=(soft, hard)),
        ExemplarSpec((C4,), 0.5, 1, n_harmonics=6, harmonic_decay=0.0, layers=(Dynamics(rolloff=3.0),)),
    ))


def synth_tone(pitches, duration, sample_rate, rng, n_harmonics=3, decay=3.0,
               harmonic_decay=1.0, onset_ms=5.0, rolloff=1.0) -> np.ndarray:
    """Sum of decaying harmonic tones, amplitude ``1/h**rolloff`` for harmonic ``h``.

    With ``harmonic_decay > 0`` higher harmonics die out faster, so the
    spectral shape drifts over a note. Partial phases are drawn from ``rng``.
    """
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    out = np.zeros_like(t)
    for f0 in pitches:
        for h in range(1, n_harmonics + 1):
            env = np.exp(-(decay + harmonic_decay * (h - 1)) * t) / h ** rolloff
            out += env * np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi))
    if onset_ms > 0:
        ramp = np.minimum(t / (onset_ms / 1000.0), 1.0)
        out *= ramp
    return out


def _render_exemplar(ex: ExemplarSpec, sample_rate, rng, duration=None):
    layer = ex.layers[0]
    if len(ex.layers) > 1:
        w = np.cumsum([d.weight for d in ex.layers])
        layer = ex.layers[int(np.searchsorted(w / w[-1], rng.random(), side="right"))]
    rolloff = layer.rolloff
    if layer.rolloff_jitter > 0:
        rolloff *= float(np.exp(rng.uniform(-layer.rolloff_jitter, layer.rolloff_jitter)))
    hd = ex.harmonic_decay
    if layer.harmonic_decay is not None:
        hd = float(rng.uniform(*layer.harmonic_decay))
    x = synth_tone(ex.pitches, ex.duration if duration is None else duration, sample_rate, rng,
                   ex.n_harmonics, ex.decay, hd, ex.onset_ms, rolloff)
    return x / np.max(np.abs(x))


def synth_event(spec: SynthSpec, seed: int = 0, label: str = "event") -> AnnotatedRecording:
    """All exemplars of ``spec`` back to back, peak-normalized, in one clip."""
    rng = np.random.default_rng(seed)
    pieces, events, t = [], [], 0.0
    for ex in spec.exemplars:
        for _ in range(ex.count):
            x = _render_exemplar(ex, spec.sample_rate, rng)
            pieces.append(x)
            events.append(Event(t, t + len(x) / spec.sample_rate, label))
            t += len(x) / spec.sample_rate
    audio = np.concatenate(pieces)
    if spec.noise_level > 0:
        audio = audio + spec.noise_level * rng.standard_normal(len(audio))
    audio = 0.9 * audio / np.max(np.abs(audio))
    return AnnotatedRecording(AudioClip(audio, spec.sample_rate), merge_overlapping(events),
                              f"{label}-{seed}", label)


def synth_piano_dataset(spec: SynthSpec | None = None, seed: int = 0):
    """Piano event with a hidden 20:1 chord/C4 imbalance, plus a held-out C4.

    Returns ``(event_recording, held_out_c4_clip)``. The held-out clip uses
    the last exemplar type of ``spec`` with fresh phases.
    """
    spec = default_piano_spec() if spec is None else spec
    rng = np.random.default_rng([seed, 1])
    event = synth_event(spec, seed, label="piano")
    single = spec.exemplars[-1]
    held = 0.9 * _render_exemplar(single, spec.sample_rate, rng)
    return event, AudioClip(held, spec.sample_rate)


def synth_polyphonic_mixture(event_defs: dict, schedule, snr_db: float = float("inf"),
                             seed: int = 0, duration: float | None = None,
                             sample_rate: int | None = None,
                             recording_id: str = "mix") -> AnnotatedRecording:
    """Additive mixture of scheduled events plus white noise at ``snr_db``.

    ``event_defs`` maps a label to a :class:`SynthSpec` whose exemplar kinds
    are the label's sounds; each scheduled ``(onset, duration, label)`` or
    ``(onset, duration, label, kind)`` renders one exemplar of kind ``kind``
    (default 0) trimmed to ``duration``. Overlapping same-label annotations
    are merged.
    """
    rng = np.random.default_rng(seed)
    rates = {s.sample_rate for s in event_defs.values()}
    sr = sample_rate or rates.pop()
    end = max(on + dur for on, dur, *_ in schedule) if schedule else 0.0
    duration = end if duration is None else duration
    mix = np.zeros(int(round(duration * sr)))
    events = []
    for item in schedule:
        onset, dur, label = item[:3]
        kind = item[3] if len(item) > 3 else 0
        ex = event_defs[label].exemplars[kind]
        x = _render_exemplar(ex, sr, rng, dur)
        start = int(round(onset * sr))
        stop = min(start + len(x), len(mix))
        mix[start:stop] += x[:stop - start]
        events.append(make_event(onset, min(onset + dur, duration), label))
    if np.isfinite(snr_db):
        sig_pow = np.mean(mix ** 2)
        noise = rng.standard_normal(len(mix))
        noise *= np.sqrt(sig_pow / (10 ** (snr_db / 10)) / np.mean(noise ** 2))
        mix = mix + noise
    peak = np.max(np.abs(mix))
    gain = 0.9 / peak if peak > 0 else 1.0
    return AnnotatedRecording(AudioClip(mix * gain, sr), merge_overlapping(events) if events else [],
                              recording_id)


# ---------------------------------------------------------------- desk-scale corpus

def desk_event_defs() -> dict:
    """Four events, each a frequent sound played at two strengths plus one
    rare sound with its own pitches (10:1 in the isolated recordings)."""
    soft = Dynamics(0.5, rolloff=2.0)
    hard = Dynamics(0.5, rolloff=0.5, rolloff_jitter=0.7, harmonic_decay=(0.0, 3.0))

    def event(frequent, rare):
        return SynthSpec((
            ExemplarSpec(frequent, 1.0, 10, n_harmonics=4, decay=1.0, harmonic_decay=0.0,
                         layers=(soft, hard)),
            ExemplarSpec(rare, 1.0, 1, n_harmonics=4, decay=1.0, harmonic_decay=0.0),
        ))

    return {
        "a": event((261.63, 329.63, 392.00), (293.66,)),
        "b": event((196.00, 246.94), (466.16,)),
        "c": event((349.23, 440.00), (207.65, 311.13)),
        "d": event((523.25,), (233.08, 369.99)),
    }


def random_schedule(labels, rng, duration: float = 12.0, n_events: int = 10,
                    rare_prob: float = 0.4, min_len: float = 0.6, max_len: float = 1.5) -> list:
    """Random ``(onset, duration, label, kind)`` items; kind 1 (rare) with ``rare_prob``."""
    labels = list(labels)
    out = []
    for _ in range(n_events):
        lab = labels[rng.integers(len(labels))]
        d = float(rng.uniform(min_len, max_len))
        on = float(rng.uniform(0, duration - d))
        out.append((round(on, 2), round(d, 2), lab, int(rng.random() < rare_prob)))
    return out
