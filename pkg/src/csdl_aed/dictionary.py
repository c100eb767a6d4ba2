"""Event dictionaries: clustering + separate sub-dictionary learning and baselines.

Every strategy returns an :class:`OverallDictionary`: a ``(freq_bins, atoms)``
basis with L1-normalized columns and one ``AtomTag`` per column recording
which event, cluster and local atom index it came from. Concatenation is
always event-major, then cluster, then atom.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dataio import load_matrix, save_matrix
from .errors import ConfigError, DegenerateInputError, FormatError
from .frontend import MfccConfig, Spectrogram, mfcc
from .gmm import fit_gmm, hard_assign, split_spectra
from .nmf import NmfConfig, nmf_factorize, nmf_supervised

log = logging.getLogger(__name__)

NO_CLUSTER = -1


class DictStrategy(str, enum.Enum):
    DL = "dl"
    E_NMF = "enmf"
    C_NDL = "cndl"
    C_SDL = "csdl"


class AtomTag(NamedTuple):
    event: str
    cluster: int
    index: int


@dataclass(frozen=True)
class SubDictionary:
    basis: np.ndarray
    event_id: str
    cluster_id: int


@dataclass(frozen=True)
class OverallDictionary:
    basis: np.ndarray
    atom_tags: tuple
    strategy: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.basis.shape[1] != len(self.atom_tags):
            raise ConfigError("one tag per atom required")
        if len(set(self.atom_tags)) != len(self.atom_tags):
            raise ConfigError("atom tags must be unique")

    @property
    def n_atoms(self) -> int:
        return self.basis.shape[1]

    @property
    def events(self) -> list:
        seen = []
        for tag in self.atom_tags:
            if tag.event not in seen:
                seen.append(tag.event)
        return seen

    def atoms_per_event(self) -> dict:
        counts = {}
        for tag in self.atom_tags:
            counts[tag.event] = counts.get(tag.event, 0) + 1
        return counts

    def subset(self, columns) -> "OverallDictionary":
        columns = list(columns)
        return OverallDictionary(self.basis[:, columns],
                                 tuple(self.atom_tags[c] for c in columns),
                                 self.strategy, dict(self.meta))

    def fingerprint(self) -> str:
        """Hash of tags and basis values; identifies one learned dictionary."""
        h = hashlib.sha256()
        h.update(json.dumps([list(t) for t in self.atom_tags]).encode())
        h.update(np.ascontiguousarray(self.basis, dtype="<f8").tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        """Basis to ``path`` (matrix container) and tags to ``path + '.tags.jsonl'``."""
        path = Path(path)
        save_matrix(path, self.basis)
        with open(tags_path(path), "w") as fh:
            for tag in self.atom_tags:
                fh.write(json.dumps({"event": tag.event, "cluster": tag.cluster,
                                     "index": tag.index}) + "\n")

    @classmethod
    def load(cls, path) -> "OverallDictionary":
        path = Path(path)
        basis = load_matrix(path)
        tags = []
        with open(tags_path(path)) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    tags.append(AtomTag(rec["event"], int(rec["cluster"]), int(rec["index"])))
        if len(tags) != basis.shape[1]:
            raise FormatError(f"{path}: {basis.shape[1]} atoms but {len(tags)} tags")
        return cls(basis, tuple(tags))


def tags_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".tags.jsonl")


def concatenate(subdicts) -> OverallDictionary:
    """``[W_1, W_2, ...]`` in the given order, tagged per atom."""
    subdicts = list(subdicts)
    if not subdicts:
        raise DegenerateInputError("no sub-dictionaries to concatenate")
    tags = [AtomTag(s.event_id, s.cluster_id, j)
            for s in subdicts for j in range(s.basis.shape[1])]
    return OverallDictionary(np.hstack([s.basis for s in subdicts]), tuple(tags))


def _effective_rank(rank, spec_values):
    p, q = spec_values.shape
    return min(rank, p - 1, q - 1)


def _learn(values, rank, nmf_cfg, seed, what):
    r = _effective_rank(rank, values)
    if r < rank:
        log.warning("%s: %d frames, shrinking rank %d -> %d", what, values.shape[1], rank, r)
    if r < 1:
        log.warning("%s: too few frames for any atom, skipped", what)
        return None
    if not np.any(values > 0):
        log.warning("%s: silent spectra, skipped", what)
        return None
    return nmf_factorize(values, nmf_cfg.with_rank(r).with_seed(seed)).basis


def _seed_for(seed, *parts) -> int:
    # stable child seeds so each event/cluster gets its own stream
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


def cluster_event(spec: Spectrogram, K: int, mfcc_cfg: MfccConfig, seed: int,
                  gmm_iters: int = 100) -> np.ndarray:
    """Per-frame cluster labels from a GMM fitted to the event's MFCCs."""
    feats = mfcc(spec, mfcc_cfg)
    K_eff = min(K, spec.n_frames)
    model = fit_gmm(feats, K_eff, seed=seed, max_em_iters=gmm_iters)
    return hard_assign(model, feats)


def _named(event_spectra, names):
    event_spectra = list(event_spectra)
    if names is None:
        names = [f"event{m}" for m in range(len(event_spectra))]
    if len(names) != len(event_spectra):
        raise ConfigError("one name per event spectrogram required")
    return event_spectra, [str(n) for n in names]


def learn_csdl(event_spectra, K: int = 2, r_sub: int = 3, mfcc_cfg: MfccConfig = MfccConfig(),
               seed: int = 0, names=None, nmf_cfg: NmfConfig = NmfConfig(1),
               gmm_iters: int = 100) -> OverallDictionary:
    """Clustering and separate sub-dictionary learning.

    For each event: MFCCs -> K-component GMM -> hard assignment -> split the
    event's spectra by cluster -> NMF of rank ``r_sub`` on each non-empty
    cluster. All sub-dictionaries are concatenated event-then-cluster.
    """
    event_spectra, names = _named(event_spectra, names)
    subdicts = []
    for m, (spec, name) in enumerate(zip(event_spectra, names)):
        if spec.is_empty:
            log.warning("event %s has no frames, skipped", name)
            continue
        labels = cluster_event(spec, K, mfcc_cfg, _seed_for(seed, m, 0), gmm_iters)
        for k, sub in enumerate(split_spectra(spec, labels, K)):
            if sub.is_empty:
                log.info("event %s cluster %d is empty", name, k)
                continue
            W = _learn(sub.values, r_sub, nmf_cfg, _seed_for(seed, m, 1, k), f"{name}/cluster{k}")
            if W is not None:
                subdicts.append(SubDictionary(W, name, k))
    d = concatenate(subdicts)
    return OverallDictionary(d.basis, d.atom_tags, DictStrategy.C_SDL.value,
                             {"K": K, "r_sub": r_sub, "seed": seed})


def learn_dl(event_spectra, rank: int = 35, seed: int = 0, names=None,
             nmf_cfg: NmfConfig = NmfConfig(1)) -> OverallDictionary:
    """One NMF over all event spectra side by side.

    Atoms are not tied to any event; they are tagged with the pseudo-event
    ``"*"``.
    """
    event_spectra, names = _named(event_spectra, names)
    V = np.hstack([s.values for s in event_spectra if not s.is_empty])
    W = _learn(V, rank, nmf_cfg, _seed_for(seed, 0), "all events")
    if W is None:
        raise DegenerateInputError("no usable spectra")
    tags = tuple(AtomTag("*", NO_CLUSTER, j) for j in range(W.shape[1]))
    return OverallDictionary(W, tags, DictStrategy.DL.value, {"rank": rank, "seed": seed})


def learn_enmf(event_spectra, rank: int = 3, seed: int = 0, names=None,
               nmf_cfg: NmfConfig = NmfConfig(1)) -> OverallDictionary:
    event_spectra, names = _named(event_spectra, names)
    subdicts = []
    for m, (spec, name) in enumerate(zip(event_spectra, names)):
        if spec.is_empty:
            log.warning("event %s has no frames, skipped", name)
            continue
        W = _learn(spec.values, rank, nmf_cfg, _seed_for(seed, m, 1, 0), name)
        if W is not None:
            subdicts.append(SubDictionary(W, name, NO_CLUSTER))
    d = concatenate(subdicts)
    return OverallDictionary(d.basis, d.atom_tags, DictStrategy.E_NMF.value,
                             {"rank": rank, "seed": seed})


def learn_cndl(event_spectra, K: int = 2, r_sub: int = 3, mfcc_cfg: MfccConfig = MfccConfig(),
               seed: int = 0, names=None, nmf_cfg: NmfConfig = NmfConfig(1),
               gmm_iters: int = 100) -> OverallDictionary:
    """Clustering and data-size-normalized dictionary learning.

    Clusters are formed exactly as in :func:`learn_csdl`; each cluster's
    columns are then divided by its frame count and one NMF of rank
    ``K * r_sub`` is run on the re-joined event spectra.
    """
    event_spectra, names = _named(event_spectra, names)
    subdicts = []
    for m, (spec, name) in enumerate(zip(event_spectra, names)):
        if spec.is_empty:
            log.warning("event %s has no frames, skipped", name)
            continue
        labels = cluster_event(spec, K, mfcc_cfg, _seed_for(seed, m, 0), gmm_iters)
        parts = [sub.values / sub.n_frames for sub in split_spectra(spec, labels, K)
                 if not sub.is_empty]
        W = _learn(np.hstack(parts), K * r_sub, nmf_cfg, _seed_for(seed, m, 1, 0), name)
        if W is not None:
            subdicts.append(SubDictionary(W, name, NO_CLUSTER))
    d = concatenate(subdicts)
    return OverallDictionary(d.basis, d.atom_tags, DictStrategy.C_NDL.value,
                             {"K": K, "r_sub": r_sub, "seed": seed})


def learn_baseline(event_spectra, strategy, seed: int = 0, names=None, *, rank: int | None = None,
                   K: int = 2, r_sub: int = 3, mfcc_cfg: MfccConfig = MfccConfig(),
                   nmf_cfg: NmfConfig = NmfConfig(1)) -> OverallDictionary:
    """Dispatch on :class:`DictStrategy`. ``rank`` defaults to 35 for DL, 3 for E-NMF."""
    strategy = DictStrategy(strategy)
    if strategy is DictStrategy.DL:
        return learn_dl(event_spectra, 35 if rank is None else rank, seed, names, nmf_cfg)
    if strategy is DictStrategy.E_NMF:
        return learn_enmf(event_spectra, 3 if rank is None else rank, seed, names, nmf_cfg)
    if strategy is DictStrategy.C_NDL:
        return learn_cndl(event_spectra, K, r_sub, mfcc_cfg, seed, names, nmf_cfg)
    return learn_csdl(event_spectra, K, r_sub, mfcc_cfg, seed, names, nmf_cfg)


def _similarity(basis, measure):
    if measure == "pearson":
        X = basis - basis.mean(axis=0)
    elif measure == "cosine":
        X = basis
    else:
        raise ConfigError(f"unknown similarity {measure!r}")
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    X = X / norms
    return X.T @ X


def reduce_min_correlation(d: OverallDictionary, target: int,
                           measure: str = "pearson") -> OverallDictionary:
    """Keep ``target`` mutually least-correlated atoms.

    Starts from the least-correlated pair, then greedily adds the atom whose
    largest correlation with the chosen set is smallest. Ties go to the lower
    atom index; selected atoms keep their original order.
    """
    n = d.n_atoms
    if target < 1 or target > n:
        raise ConfigError(f"target must be in [1, {n}], got {target}")
    if target == n:
        return d
    if target == 1:
        return d.subset([0])
    C = _similarity(d.basis, measure)
    iu, ju = np.triu_indices(n, k=1)
    best = int(np.argmin(C[iu, ju]))  # first minimum = lowest (i, j)
    chosen = [int(iu[best]), int(ju[best])]
    while len(chosen) < target:
        rest = [a for a in range(n) if a not in chosen]
        worst = C[np.ix_(rest, chosen)].max(axis=1)
        chosen.append(rest[int(np.argmin(worst))])
    return d.subset(sorted(chosen))


def reconstruction_score(exemplar, d: OverallDictionary | np.ndarray,
                         cfg: NmfConfig = NmfConfig(0, max_iters=500)) -> float:
    """Negated per-frame KL cost of the best supervised fit; 0 is perfect."""
    values = exemplar.values if isinstance(exemplar, Spectrogram) else np.asarray(exemplar)
    basis = d.basis if isinstance(d, OverallDictionary) else np.asarray(d)
    res = nmf_supervised(values, basis, cfg.with_rank(0))
    return -res.final_cost / values.shape[1]
