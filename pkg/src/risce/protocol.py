"""
Deterministic generators for channels, pilots, codes, and RIS schedules.

All random quantities are drawn from a caller-supplied ``numpy.random
.Generator``, so regeneration under the same seed is bit-identical.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import dft, hadamard

from .tensor_ops import effective_rank, khatri_rao_rows

__all__ = [
    "ChannelSet",
    "ProtocolMatrices",
    "complex_gaussian",
    "gen_channels",
    "gen_pilot",
    "gen_ut_pilot",
    "gen_coding",
    "gen_ris_schedules",
    "gen_protocol",
    "core_index",
    "dense_core",
]


@dataclass
class ChannelSet:
    """The four non-reciprocal block-fading channels."""

    H_d: np.ndarray  # (M, N) BS -> RIS, downlink
    H_u: np.ndarray  # (M, N) RIS -> BS, uplink
    G_d: np.ndarray  # (L, N) RIS -> UT, downlink
    G_u: np.ndarray  # (L, N) UT -> RIS, uplink


@dataclass
class ProtocolMatrices:
    """Known training quantities shared by transmitter and estimator."""

    X: np.ndarray    # (M, T) BS pilot, X @ X^H = I_M
    C: np.ndarray    # (P, L) UT code, full column rank
    S_d: np.ndarray  # (K, N) downlink RIS schedule, unit modulus
    S_u: np.ndarray  # (K, N) uplink RIS schedule, entries +-1
    S: np.ndarray    # (K, N^2) combined schedule, row k = S_d[k] kron S_u[k]
    s_col_rank: int  # numerical column rank of S (min(K, N^2) at best)


def complex_gaussian(rng, shape):
    """i.i.d. CN(0, 1) entries: real and imaginary parts each N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def gen_channels(cfg, rng):
    """Draw the four Rayleigh-fading channel matrices, CN(0,1) entries."""
    return ChannelSet(
        H_d=complex_gaussian(rng, (cfg.M, cfg.N)),
        H_u=complex_gaussian(rng, (cfg.M, cfg.N)),
        G_d=complex_gaussian(rng, (cfg.L, cfg.N)),
        G_u=complex_gaussian(rng, (cfg.L, cfg.N)),
    )


def gen_pilot(cfg):
    """
    BS pilot: first M rows of the T x T DFT matrix scaled by 1/sqrt(T),
    so that X @ X^H = I_M.
    """
    if cfg.T < cfg.M:
        raise ValueError("pilot length T must be at least M")
    return dft(cfg.T)[: cfg.M, :] / np.sqrt(cfg.T)


def gen_ut_pilot(cfg):
    """UT-side pilot for the FDD uplink baseline: L x T truncated DFT."""
    if cfg.T < cfg.L:
        raise ValueError("pilot length T must be at least L for the UT pilot")
    return dft(cfg.T)[: cfg.L, :] / np.sqrt(cfg.T)


def gen_coding(cfg):
    """UT code matrix: first L columns of the P x P DFT (condition number 1)."""
    if cfg.P < cfg.L:
        raise ValueError("coding slot count P must be at least L")
    return dft(cfg.P)[:, : cfg.L].copy()


def _truncated_hadamard(rows, cols):
    # Sylvester recursion needs a power-of-two ambient size; truncate rows/cols.
    size = 1
    while size < max(rows, cols):
        size *= 2
    return hadamard(size)[:rows, :cols].astype(np.float64)


def gen_ris_schedules(cfg):
    """
    RIS phase schedules for the two link directions.

    Downlink: first N columns of the K x K DFT (unit-modulus entries).
    Uplink: K x N truncated Hadamard (entries +-1). The two differ
    elementwise, so the schedule itself is non-reciprocal. The combined
    schedule S has row k equal to ``S_d[k, :] kron S_u[k, :]``.
    """
    if cfg.K < cfg.N:
        raise ValueError("block count K must be at least N")
    s_d = dft(cfg.K)[:, : cfg.N].copy()
    s_u = _truncated_hadamard(cfg.K, cfg.N).astype(np.complex128)
    s = khatri_rao_rows(s_d, s_u)
    return s_d, s_u, s


def gen_protocol(cfg):
    """Bundle pilot, code, and RIS schedules into :class:`ProtocolMatrices`."""
    s_d, s_u, s = gen_ris_schedules(cfg)
    return ProtocolMatrices(
        X=gen_pilot(cfg),
        C=gen_coding(cfg),
        S_d=s_d,
        S_u=s_u,
        S=s,
        s_col_rank=effective_rank(s),
    )


def core_index(n_u, n_d, n):
    """Combined RIS index of the selection core: r = n_u + n_d * N (0-based)."""
    return n_u + n_d * n


def dense_core(n):
    """
    Materialize the sparse selection core as a dense (N, N, N^2, N^2) tensor.

    Entry (n_u, n_d, j, j') is 1 iff j == j' == core_index(n_u, n_d, N).
    Test oracle only: the estimator never forms this tensor (its mode-1
    unfolding is N x N^5), hence the small-N guard.
    """
    if n > 4:
        raise ValueError("dense selection core is for oracle tests only (N <= 4)")
    core = np.zeros((n, n, n * n, n * n), dtype=np.complex128)
    for n_d in range(n):
        for n_u in range(n):
            r = core_index(n_u, n_d, n)
            core[n_u, n_d, r, r] = 1.0
    return core
