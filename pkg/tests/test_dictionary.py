import logging

import numpy as np
import pytest

from csdl_aed.dataio import synth_piano_dataset
from csdl_aed.dictionary import (
    AtomTag, DictStrategy, OverallDictionary, cluster_event, learn_baseline, learn_cndl,
    learn_csdl, learn_dl, learn_enmf, reconstruction_score, reduce_min_correlation,
)
from csdl_aed.errors import ConfigError, DegenerateInputError, FormatError
from csdl_aed.frontend import MfccConfig, Spectrogram, magnitude_spectrogram
from csdl_aed.gmm import split_spectra
from csdl_aed.nmf import NmfConfig, nmf_factorize

SR, FL, HOP, BINS = 8000, 320, 80, 161


def spec(values):
    return Spectrogram(np.asarray(values, dtype=float), SR, FL, HOP)


def two_sound_event(rng, T=60, share=0.3):
    """Frames drawn from two distinct random spectral shapes plus a little noise."""
    shapes = rng.random((BINS, 2)) ** 4
    which = (rng.random(T) < share).astype(int)
    gains = rng.uniform(0.5, 1.5, T)
    return spec(shapes[:, which] * gains + 1e-3 * rng.random((BINS, T)))


@pytest.fixture(scope="module")
def sixteen_events():
    rng = np.random.default_rng(0)
    return [two_sound_event(rng) for _ in range(16)]


def test_csdl_sixteen_events_96_atoms(sixteen_events):
    d = learn_csdl(sixteen_events, K=2, r_sub=3, mfcc_cfg=MfccConfig(23), seed=1)
    assert d.n_atoms == 96
    assert set(d.atoms_per_event().values()) == {6}
    assert d.strategy == "csdl"


def test_baseline_atom_counts(sixteen_events):
    assert learn_baseline(sixteen_events, "dl", seed=0).n_atoms == 35
    assert learn_baseline(sixteen_events, "enmf", seed=0).n_atoms == 48
    assert learn_baseline(sixteen_events, DictStrategy.C_NDL, seed=0, K=2, r_sub=3).n_atoms == 96


def test_all_strategies_normalized_and_finite(sixteen_events):
    for strategy in DictStrategy:
        d = learn_baseline(sixteen_events[:3], strategy, seed=2, rank=4)
        assert np.all(np.isfinite(d.basis))
        assert np.all(d.basis >= 0)
        assert np.allclose(d.basis.sum(axis=0), 1.0)


def test_csdl_tags_are_event_then_cluster_ordered(sixteen_events):
    names = [f"e{i}" for i in range(3)]
    d = learn_csdl(sixteen_events[:3], K=2, r_sub=2, seed=0, names=names)
    assert d.events == names
    assert [t.cluster for t in d.atom_tags] == [0, 0, 1, 1] * 3
    assert [t.index for t in d.atom_tags] == [0, 1] * 6


def test_piano_csdl_four_atoms():
    event, _ = synth_piano_dataset(seed=0)
    d = learn_csdl([magnitude_spectrogram(event.clip)], K=2, r_sub=2, mfcc_cfg=MfccConfig(25))
    assert d.n_atoms == 4


def test_identical_frames_give_that_shape():
    col = np.random.default_rng(3).random(BINS) + 0.1
    d = learn_csdl([spec(np.tile(col, (40, 1)).T)], K=2, r_sub=1, seed=0)
    assert d.n_atoms >= 1
    cos = d.basis.T @ col / (np.linalg.norm(d.basis, axis=0) * np.linalg.norm(col))
    assert np.all(cos > 0.99)


def test_single_cluster_strategies_coincide():
    rng = np.random.default_rng(4)
    s = two_sound_event(rng)
    a = learn_csdl([s], K=1, r_sub=3, seed=7).basis
    b = learn_cndl([s], K=1, r_sub=3, seed=7).basis
    c = learn_enmf([s], rank=3, seed=7).basis
    assert np.allclose(a, c, rtol=1e-6, atol=1e-12)
    assert np.allclose(b, c, rtol=1e-6, atol=1e-9)


def test_cndl_equal_clusters_is_scaled_plain_nmf():
    from csdl_aed.dictionary import _seed_for

    rng = np.random.default_rng(5)
    shapes = rng.random((BINS, 2)) ** 4
    which = np.tile([0, 1], 30)
    s = spec(shapes[:, which] * rng.uniform(0.5, 1.5, 60) + 1e-3 * rng.random((BINS, 60)))
    parts = split_spectra(s, cluster_event(s, 2, MfccConfig(), _seed_for(11, 0, 0)), 2)
    assert parts[0].n_frames == parts[1].n_frames == 30
    d = learn_cndl([s], K=2, r_sub=2, seed=11)
    # dividing every column by 30 is a uniform rescale: same atoms as unscaled NMF
    V = np.hstack([p.values for p in parts])
    ref = nmf_factorize(V, NmfConfig(4, seed=_seed_for(11, 0, 1, 0))).basis
    assert np.allclose(d.basis, ref, rtol=1e-6, atol=1e-9)


def test_small_cluster_shrinks_rank(caplog):
    rng = np.random.default_rng(6)
    values = np.hstack([rng.random((BINS, 40)) ** 4 + 1.0, np.tile(rng.random((BINS, 1)), 3) * 100])
    with caplog.at_level(logging.WARNING):
        d = learn_csdl([spec(values)], K=2, r_sub=5, seed=0)
    assert d.n_atoms < 10
    assert np.all(np.isfinite(d.basis))


def test_empty_event_is_skipped(caplog):
    rng = np.random.default_rng(8)
    good = two_sound_event(rng)
    with caplog.at_level(logging.WARNING):
        d = learn_csdl([spec(np.zeros((BINS, 0))), good], K=2, r_sub=2, seed=0, names=["x", "y"])
    assert d.events == ["y"]
    assert any("no frames" in r.message for r in caplog.records)


def test_silent_event_skipped():
    rng = np.random.default_rng(9)
    d = learn_enmf([spec(np.zeros((BINS, 20))), two_sound_event(rng)], rank=2, names=["q", "s"])
    assert d.events == ["s"]


def test_all_silent_raises():
    with pytest.raises(DegenerateInputError):
        learn_dl([spec(np.zeros((BINS, 20)))], rank=2)


def test_name_count_mismatch(sixteen_events):
    with pytest.raises(ConfigError):
        learn_enmf(sixteen_events[:2], names=["only-one"])


# ---------------------------------------------------------------- reduction

def test_reduce_orthogonal_pair():
    e1 = np.zeros(6)
    e1[0] = 1
    e2 = np.zeros(6)
    e2[1] = 1
    d = OverallDictionary(np.column_stack([e1, e1 + e2, e2]),
                          tuple(AtomTag("x", 0, j) for j in range(3)))
    for measure in ("pearson", "cosine"):
        r = reduce_min_correlation(d, 2, measure)
        assert [t.index for t in r.atom_tags] == [0, 2]


def test_reduce_identity_and_errors():
    rng = np.random.default_rng(0)
    d = OverallDictionary(rng.random((8, 4)), tuple(AtomTag("x", 0, j) for j in range(4)))
    assert reduce_min_correlation(d, 4) is d
    assert reduce_min_correlation(d, 1).n_atoms == 1
    with pytest.raises(ConfigError):
        reduce_min_correlation(d, 5)
    with pytest.raises(ConfigError):
        reduce_min_correlation(d, 0)
    with pytest.raises(ConfigError):
        reduce_min_correlation(d, 2, "spearman")


def test_reduce_greedy_minimizes_max_correlation():
    rng = np.random.default_rng(1)
    B = rng.random((20, 7))
    d = OverallDictionary(B, tuple(AtomTag("x", 0, j) for j in range(7)))
    r = reduce_min_correlation(d, 3)
    C = np.corrcoef(B.T)
    iu = np.triu_indices(7, 1)
    i, j = iu[0][np.argmin(C[iu])], iu[1][np.argmin(C[iu])]
    chosen = [t.index for t in r.atom_tags]
    assert {int(i), int(j)} <= set(chosen)
    third = (set(chosen) - {int(i), int(j)}).pop()
    others = [a for a in range(7) if a not in (i, j)]
    assert max(C[third, i], C[third, j]) == pytest.approx(min(max(C[a, i], C[a, j]) for a in others))


# ---------------------------------------------------------------- scoring, persistence

def test_reconstruction_score_orders_dictionaries():
    rng = np.random.default_rng(2)
    W = rng.random((BINS, 2)) ** 4
    ex = spec(W @ rng.random((2, 30)))
    good = reconstruction_score(ex, W, NmfConfig(0, max_iters=1000, tolerance=0))
    bad = reconstruction_score(ex, rng.random((BINS, 2)))
    assert good <= 0
    assert good > -1e-3 * ex.values.sum() / 30
    assert bad < good


def test_save_load_roundtrip(tmp_path, sixteen_events):
    d = learn_csdl(sixteen_events[:2], K=2, r_sub=2, seed=0, names=["a", "b"])
    d.save(tmp_path / "d.mat")
    e = OverallDictionary.load(tmp_path / "d.mat")
    assert np.array_equal(d.basis, e.basis)
    assert d.atom_tags == e.atom_tags
    assert d.fingerprint() == e.fingerprint()


def test_fingerprint_detects_changes(sixteen_events):
    d = learn_enmf(sixteen_events[:2], rank=2, seed=0)
    e = learn_enmf(sixteen_events[:2], rank=2, seed=1)
    assert d.fingerprint() != e.fingerprint()


def test_load_tag_count_mismatch(tmp_path):
    d = OverallDictionary(np.ones((4, 2)) / 4, (AtomTag("a", 0, 0), AtomTag("a", 0, 1)))
    d.save(tmp_path / "d.mat")
    (tmp_path / "d.mat.tags.jsonl").write_text('{"event": "a", "cluster": 0, "index": 0}\n')
    with pytest.raises(FormatError):
        OverallDictionary.load(tmp_path / "d.mat")


def test_duplicate_tags_rejected():
    with pytest.raises(ConfigError):
        OverallDictionary(np.ones((3, 2)), (AtomTag("a", 0, 0), AtomTag("a", 0, 0)))
