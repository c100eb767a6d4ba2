"""KL-divergence NMF with Lee-Seung multiplicative updates.

Three modes are provided:

* :func:`nmf_factorize` -- learn both the basis ``W`` and activations ``H``.
* :func:`nmf_supervised` -- basis held fixed, only ``H`` is estimated.
* :func:`nmf_semi_supervised` -- a fixed basis extended with a few estimable
  noise atoms ``[W_fixed, W_noise]``.

Matrices are plain ``numpy.ndarray`` of dtype float64 in the usual
``(rows, cols)`` layout: spectrograms are ``(freq_bins, frames)``, bases are
``(freq_bins, atoms)`` and activations ``(atoms, frames)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, DimensionError

EPS = 1e-12


@dataclass(frozen=True)
class NmfConfig:
    rank: int
    max_iters: int = 200
    epsilon_floor: float = EPS
    seed: int = 0
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.rank < 0:
            raise ConfigError(f"rank must be non-negative, got {self.rank}")
        if self.epsilon_floor <= 0:
            raise ConfigError("epsilon_floor must be > 0")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")

    def with_rank(self, rank: int) -> "NmfConfig":
        return NmfConfig(rank, self.max_iters, self.epsilon_floor, self.seed, self.tolerance)

    def with_seed(self, seed: int) -> "NmfConfig":
        return NmfConfig(self.rank, self.max_iters, self.epsilon_floor, seed, self.tolerance)


@dataclass(frozen=True)
class NmfResult:
    """Outcome of an NMF run.

    ``cost_trace[0]`` is the cost at initialization and ``cost_trace[k]`` the
    cost after the k-th iteration, so ``len(cost_trace) == iterations_run + 1``.
    """

    basis: np.ndarray
    activations: np.ndarray
    cost_trace: tuple
    iterations_run: int

    @property
    def final_cost(self) -> float:
        return self.cost_trace[-1]


@dataclass(frozen=True)
class SemiSupervisedResult:
    noise_basis: np.ndarray
    event_activations: np.ndarray
    noise_activations: np.ndarray
    cost_trace: tuple
    iterations_run: int

    @property
    def final_cost(self) -> float:
        return self.cost_trace[-1]


def as_nonneg(V, name="V") -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] == 0 or V.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise DegenerateInputError(f"{name} contains NaN or Inf")
    if np.any(V < 0):
        raise DegenerateInputError(f"{name} has negative entries")
    return V


def kl_divergence(V, approx, eps: float = EPS) -> float:
    """Generalized KL divergence ``D(V || approx)``.

    ``sum(V * log(V / approx) - V + approx)`` with ``0 * log(0 / x) = 0``.
    ``approx`` is floored to ``eps`` first.
    """
    V = np.asarray(V, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if V.shape != approx.shape:
        raise DimensionError(f"shape mismatch: {V.shape} vs {approx.shape}")
    return _Cost(V, eps)(approx)[0]


class _Cost:
    """KL cost against a fixed ``V``.

    Calling it returns the cost and the ratio ``V / approx``, which the
    multiplicative updates reuse.
    """

    def __init__(self, V, eps):
        self.V = V
        self.eps = eps
        self.pos = V > 0
        self.v_sum = float(V.sum())

    def __call__(self, approx):
        approx = np.maximum(approx, self.eps)
        ratio = self.V / approx
        ok = self.pos & (ratio > 0)
        logs = np.log(ratio, out=np.zeros_like(ratio), where=ok)
        under = self.pos & ~ok
        if under.any():
            # V / approx underflowed; take the logs separately
            logs[under] = np.log(self.V[under]) - np.log(approx[under])
        val = float(np.sum(self.V * logs)) - self.v_sum + float(approx.sum())
        return max(val, 0.0), ratio


def _uniform_init(rng: np.random.Generator, shape, eps: float) -> np.ndarray:
    # 1 - U[0, 1) lies in (0, 1]
    return np.maximum(1.0 - rng.random(shape), eps)


def _update_h(ratio, W, H, eps):
    denom = np.maximum(W.sum(axis=0)[:, None], eps)
    return np.maximum(H * (W.T @ ratio) / denom, eps)


def _update_w(ratio, W, H, eps):
    denom = np.maximum(H.sum(axis=1)[None, :], eps)
    return np.maximum(W * (ratio @ H.T) / denom, eps)


def _converged(prev: float, cur: float, tol: float) -> bool:
    if tol <= 0:
        return False
    return abs(prev - cur) <= tol * max(abs(prev), EPS)


def normalize_columns(W: np.ndarray, H: np.ndarray | None = None, eps: float = EPS):
    """L1-normalize the columns of ``W`` and push the scale into the rows of ``H``."""
    scale = np.maximum(W.sum(axis=0), eps)
    W = W / scale
    if H is None:
        return W
    return W, H * scale[:, None]


def nmf_factorize(V, config: NmfConfig) -> NmfResult:
    """Full KL-NMF ``V ~= W H``.

    Basis columns of the result are L1-normalized, with their scale moved
    into ``H`` so the product is unchanged.
    """
    V = as_nonneg(V)
    p, q = V.shape
    r = config.rank
    if r < 1 or r >= min(p, q):
        raise ConfigError(f"rank must satisfy 1 <= r < min(p, q) = {min(p, q)}, got {r}")
    if not np.any(V > 0):
        raise DegenerateInputError("cannot factorize an all-zero matrix")
    eps = config.epsilon_floor
    rng = np.random.default_rng(config.seed)
    W = _uniform_init(rng, (p, r), eps)
    H = _uniform_init(rng, (r, q), eps)

    cost = _Cost(V, eps)
    c, ratio = cost(W @ H)
    trace = [c]
    it = 0
    for it in range(1, config.max_iters + 1):
        H = _update_h(ratio, W, H, eps)
        W = _update_w(cost(W @ H)[1], W, H, eps)
        c, ratio = cost(W @ H)
        trace.append(c)
        if _converged(trace[-2], trace[-1], config.tolerance):
            break
    W, H = normalize_columns(W, H, eps)
    return NmfResult(W, H, tuple(trace), it)


def _check_fixed_basis(V, W_fixed):
    W_fixed = np.asarray(W_fixed, dtype=np.float64)
    if W_fixed.ndim != 2 or W_fixed.shape[0] != V.shape[0]:
        raise DimensionError(
            f"basis has shape {W_fixed.shape}, expected ({V.shape[0]}, r)")
    if W_fixed.shape[1] == 0:
        raise DimensionError("basis has no atoms")
    if np.any(W_fixed < 0) or not np.all(np.isfinite(W_fixed)):
        raise DegenerateInputError("basis must be finite and non-negative")
    if np.any(W_fixed.sum(axis=0) <= 0):
        raise DegenerateInputError("basis has an all-zero column (singular basis)")
    return W_fixed


def nmf_supervised(V, W_fixed, config: NmfConfig) -> NmfResult:
    """Estimate activations for a fixed basis.

    ``config.rank`` must equal the number of basis columns (0 is accepted as
    "take it from the basis"). The caller's ``W_fixed`` is never written to;
    ``result.basis`` is that same array.
    """
    V = as_nonneg(V)
    W = _check_fixed_basis(V, W_fixed)
    r = W.shape[1]
    if config.rank not in (0, r):
        raise ConfigError(f"config.rank={config.rank} but basis has {r} atoms")
    eps = config.epsilon_floor
    rng = np.random.default_rng(config.seed)
    H = _uniform_init(rng, (r, V.shape[1]), eps)

    cost = _Cost(V, eps)
    c, ratio = cost(W @ H)
    trace = [c]
    it = 0
    for it in range(1, config.max_iters + 1):
        H = _update_h(ratio, W, H, eps)
        c, ratio = cost(W @ H)
        trace.append(c)
        if _converged(trace[-2], trace[-1], config.tolerance):
            break
    return NmfResult(W_fixed, H, tuple(trace), it)


def nmf_semi_supervised(V, W_fixed, noise_rank: int, config: NmfConfig) -> SemiSupervisedResult:
    """Decompose ``V ~= [W_fixed, W_noise] [H_event; H_noise]``.

    Only ``W_noise`` (``noise_rank`` columns) is learned; ``W_fixed`` stays
    as given. With ``noise_rank == 0`` this is exactly :func:`nmf_supervised`.
    """
    V = as_nonneg(V)
    W = _check_fixed_basis(V, W_fixed)
    p, q = V.shape
    r = W.shape[1]
    if noise_rank < 0 or noise_rank >= q:
        raise ConfigError(f"noise_rank must satisfy 0 <= noise_rank < {q}, got {noise_rank}")
    if config.rank not in (0, r):
        raise ConfigError(f"config.rank={config.rank} but basis has {r} atoms")
    if noise_rank == 0:
        res = nmf_supervised(V, W_fixed, config)
        return SemiSupervisedResult(np.zeros((p, 0)), res.activations, np.zeros((0, q)),
                                    res.cost_trace, res.iterations_run)

    eps = config.epsilon_floor
    rng = np.random.default_rng(config.seed)
    H_ev = _uniform_init(rng, (r, q), eps)
    H_n = _uniform_init(rng, (noise_rank, q), eps)
    W_n = _uniform_init(rng, (p, noise_rank), eps)

    cost = _Cost(V, eps)
    c, ratio = cost(W @ H_ev + W_n @ H_n)
    trace = [c]
    it = 0
    for it in range(1, config.max_iters + 1):
        H_all = _update_h(ratio, np.hstack([W, W_n]), np.vstack([H_ev, H_n]), eps)
        H_ev, H_n = H_all[:r], H_all[r:]
        # the noise update sees the full reconstruction, fixed atoms included
        _, ratio = cost(W @ H_ev + W_n @ H_n)
        W_n = _update_w(ratio, W_n, H_n, eps)
        c, ratio = cost(W @ H_ev + W_n @ H_n)
        trace.append(c)
        if _converged(trace[-2], trace[-1], config.tolerance):
            break
    W_n, H_n = normalize_columns(W_n, H_n, eps)
    return SemiSupervisedResult(W_n, H_ev, H_n, tuple(trace), it)
