import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from csdl_aed.errors import ConfigError, DegenerateInputError, DimensionError
from csdl_aed.nmf import (
    NmfConfig, kl_divergence, nmf_factorize, nmf_semi_supervised, nmf_supervised,
)


def kl_loop(V, A, eps=1e-12):
    """Scalar-loop generalized KL, independent of the vectorized version."""
    total = 0.0
    for i in range(V.shape[0]):
        for j in range(V.shape[1]):
            v, a = float(V[i, j]), max(float(A[i, j]), eps)
            if v > 0:
                total += v * math.log(v / a)
            total += a - v
    return total


def monotone(trace, rel=1e-9, abs_=0.0):
    t = np.asarray(trace)
    return bool(np.all(t[1:] <= t[:-1] * (1 + rel) + abs_))


# ---------------------------------------------------------------- kl_divergence

def test_kl_identity():
    V = np.random.default_rng(0).random((6, 4))
    assert kl_divergence(V, V) == pytest.approx(0.0, abs=1e-12)


def test_kl_scalar_value():
    # 2 ln 2 - 2 + 1
    assert kl_divergence([[2.0]], [[1.0]]) == pytest.approx(0.38629436, abs=1e-8)


def test_kl_zero_entries_follow_convention():
    V = np.array([[0.0, 1.0]])
    A = np.array([[0.5, 1.0]])
    assert kl_divergence(V, A) == pytest.approx(0.5)


def test_kl_shape_mismatch():
    with pytest.raises(DimensionError):
        kl_divergence(np.ones((2, 2)), np.ones((2, 3)))


@pytest.mark.parametrize("seed", range(20))
def test_kl_matches_loop_oracle_and_is_nonnegative(seed):
    rng = np.random.default_rng(seed)
    V = rng.random((5, 5)) * (rng.random((5, 5)) > 0.2)
    A = rng.random((5, 5))
    got = kl_divergence(V, A)
    assert got >= 0
    assert got == pytest.approx(kl_loop(V, A), rel=1e-10, abs=1e-12)


# ---------------------------------------------------------------- full NMF

@pytest.mark.parametrize("seed", range(5))
def test_rank_one_exact_instance(seed):
    rng = np.random.default_rng(seed)
    V = np.outer(rng.random(12) + 0.1, rng.random(15) + 0.1)
    res = nmf_factorize(V, NmfConfig(1, max_iters=300, tolerance=0, seed=seed))
    assert res.final_cost < 1e-6 * V.sum()


def test_determinism_bitwise():
    V = np.random.default_rng(3).random((8, 9))
    a = nmf_factorize(V, NmfConfig(2, seed=11))
    b = nmf_factorize(V, NmfConfig(2, seed=11))
    assert np.array_equal(a.basis, b.basis)
    assert np.array_equal(a.activations, b.activations)
    assert a.cost_trace == b.cost_trace


@pytest.mark.parametrize("seed", range(50))
def test_full_cost_trace_monotone(seed):
    V = np.random.default_rng(seed).random((4, 4))
    res = nmf_factorize(V, NmfConfig(2, seed=seed))
    assert monotone(res.cost_trace)
    assert len(res.cost_trace) == res.iterations_run + 1


def test_basis_columns_l1_normalized_and_product_preserved():
    V = np.random.default_rng(1).random((10, 20))
    res = nmf_factorize(V, NmfConfig(3))
    assert np.allclose(res.basis.sum(axis=0), 1.0)
    assert kl_divergence(V, res.basis @ res.activations) == pytest.approx(res.final_cost, rel=1e-9)


def test_factorize_errors():
    with pytest.raises(DegenerateInputError):
        nmf_factorize(np.zeros((4, 5)), NmfConfig(2))
    with pytest.raises(ConfigError):
        nmf_factorize(np.ones((4, 5)), NmfConfig(4))
    with pytest.raises(DegenerateInputError):
        nmf_factorize(-np.ones((4, 5)), NmfConfig(1))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 7), elements=st.floats(0, 10)), st.integers(0, 2**31 - 1))
def test_outputs_nonnegative_and_finite(V, seed):
    if not np.any(V > 0):
        return
    res = nmf_factorize(V, NmfConfig(2, seed=seed, max_iters=50))
    assert np.all(res.basis >= 0) and np.all(res.activations >= 0)
    assert np.all(np.isfinite(res.basis)) and np.all(np.isfinite(res.activations))
    # costs can reach ~1e-11 here, where rounding noise dominates
    assert monotone(res.cost_trace, abs_=1e-14 * max(V.sum(), 1.0))


# ---------------------------------------------------------------- supervised

def _well_conditioned(rng, p=30, r=4):
    # each atom owns a block of bins plus a little shared energy
    W = 0.01 * rng.random((p, r))
    for k in range(r):
        W[k * (p // r):(k + 1) * (p // r), k] += rng.random(p // r) + 0.5
    return W


@pytest.mark.parametrize("seed", range(5))
def test_supervised_recovers_exact_instance(seed):
    rng = np.random.default_rng(seed)
    W = _well_conditioned(rng)
    V = W @ (rng.random((4, 25)) + 0.05)
    res = nmf_supervised(V, W, NmfConfig(4, max_iters=500, tolerance=0))
    assert res.final_cost < 1e-4 * V.sum()


def test_supervised_leaves_basis_untouched():
    rng = np.random.default_rng(0)
    W = rng.random((10, 3))
    W_copy = W.copy()
    res = nmf_supervised(rng.random((10, 12)), W, NmfConfig(3))
    assert np.array_equal(W, W_copy)
    assert res.basis is W


def test_supervised_zero_column_goes_to_floor():
    rng = np.random.default_rng(2)
    W = rng.random((10, 3))
    V = rng.random((10, 8))
    V[:, 4] = 0
    cfg = NmfConfig(3)
    H = nmf_supervised(V, W, cfg).activations
    assert H[:, 4].sum() < 3 * cfg.epsilon_floor * 10


def test_supervised_singular_basis():
    W = np.ones((5, 3))
    W[:, 1] = 0
    with pytest.raises(DegenerateInputError):
        nmf_supervised(np.ones((5, 6)), W, NmfConfig(3))


def test_supervised_rank_mismatch():
    with pytest.raises(ConfigError):
        nmf_supervised(np.ones((5, 6)), np.ones((5, 2)), NmfConfig(3))


@pytest.mark.parametrize("seed", range(50))
def test_supervised_trace_monotone(seed):
    rng = np.random.default_rng(seed)
    res = nmf_supervised(rng.random((6, 8)), rng.random((6, 3)), NmfConfig(3, seed=seed))
    assert monotone(res.cost_trace)


@pytest.mark.parametrize("c", [0.01, 7.0, 1000.0])
def test_supervised_scale_covariance(c):
    rng = np.random.default_rng(5)
    W = _well_conditioned(rng)
    V = W @ rng.random((4, 20)) + 0.05 * rng.random((30, 20))
    cfg = NmfConfig(4, max_iters=1000, tolerance=1e-10)
    base = nmf_supervised(V, W, cfg)
    scaled = nmf_supervised(c * V, W, cfg)
    rel_base = base.final_cost / V.sum()
    rel_scaled = scaled.final_cost / (c * V.sum())
    # KL(cV | cWH) = c KL(V | WH)
    assert rel_scaled == pytest.approx(rel_base, rel=1e-3)


# ---------------------------------------------------------------- semi-supervised

def test_semi_zero_noise_equals_supervised():
    rng = np.random.default_rng(4)
    V, W = rng.random((8, 10)), rng.random((8, 3))
    cfg = NmfConfig(3, seed=9)
    a = nmf_supervised(V, W, cfg)
    b = nmf_semi_supervised(V, W, 0, cfg)
    assert np.array_equal(a.activations, b.event_activations)
    assert a.cost_trace == b.cost_trace
    assert b.noise_basis.shape == (8, 0) and b.noise_activations.shape == (0, 10)


@pytest.mark.parametrize("seed", range(20))
def test_semi_noise_atom_lowers_cost(seed):
    rng = np.random.default_rng(seed)
    W = _well_conditioned(rng)
    broadband = 0.3 * (rng.random(30) + 0.5)
    V = W @ rng.random((4, 40)) + np.outer(broadband, rng.random(40))
    cfg = NmfConfig(4, seed=seed)
    sup = nmf_supervised(V, W, cfg)
    semi = nmf_semi_supervised(V, W, 1, cfg)
    assert semi.final_cost < sup.final_cost


def test_semi_clean_instance_reconstructs():
    rng = np.random.default_rng(7)
    W = _well_conditioned(rng)
    V = W @ (rng.random((4, 30)) + 0.05)
    res = nmf_semi_supervised(V, W, 1, NmfConfig(4, max_iters=1000, tolerance=0))
    approx = W @ res.event_activations + res.noise_basis @ res.noise_activations
    assert kl_divergence(V, approx) < 1e-3 * V.sum()


def test_semi_shapes_and_fixed_basis():
    rng = np.random.default_rng(8)
    W = rng.random((9, 3))
    W_copy = W.copy()
    res = nmf_semi_supervised(rng.random((9, 12)), W, 2, NmfConfig(3))
    assert np.array_equal(W, W_copy)
    assert res.noise_basis.shape == (9, 2)
    assert res.event_activations.shape == (3, 12)
    assert res.noise_activations.shape == (2, 12)
    assert np.allclose(res.noise_basis.sum(axis=0), 1.0)


def test_semi_noise_rank_too_large():
    with pytest.raises(ConfigError):
        nmf_semi_supervised(np.ones((5, 4)), np.ones((5, 2)), 4, NmfConfig(2))


@pytest.mark.parametrize("seed", range(50))
def test_semi_trace_monotone(seed):
    rng = np.random.default_rng(seed)
    res = nmf_semi_supervised(rng.random((6, 8)), rng.random((6, 3)), 1, NmfConfig(3, seed=seed))
    assert monotone(res.cost_trace)
