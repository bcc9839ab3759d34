"""
Closed-loop forward model: three-phase pilot transmission, UT coding,
feedback through the RIS, and reduction to the order-4 observation tensor.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .protocol import complex_gaussian
from .tensor_ops import pseudo_inverse, vec

__all__ = [
    "ClosedLoopObservation",
    "faded_block",
    "dl_block",
    "ut_encode",
    "ul_block",
    "pilot_matched_filter",
    "assemble_observation",
    "calibrate_noise",
    "simulate_observation",
    "dump_observation",
    "load_observation",
]

ORTHO_TOL = 1e-10


@dataclass
class ClosedLoopObservation:
    """Order-4 received tensor (M, M, K, L) after pilot and code filtering."""

    tensor: np.ndarray
    snr_db: float
    sigma2_dl: float
    sigma2_ul: float
    noiseless: Optional[np.ndarray] = None


def _noise(rng, shape, sigma2):
    if sigma2 == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    return np.sqrt(sigma2) * complex_gaussian(rng, shape)


def faded_block(a, s, b, x, sigma2=0.0, rng=None):
    """One faded pilot block ``a @ diag(s) @ b.T @ x`` plus AWGN."""
    out = (a * s) @ (b.T @ x)
    if rng is not None and sigma2 > 0.0:
        out = out + _noise(rng, out.shape, sigma2)
    return out


def dl_block(channels, x, s_d_k, sigma2_dl=0.0, rng=None):
    """Downlink block received by the UT: G_d diag(s_d[k]) H_d^T X + noise."""
    return faded_block(channels.G_d, s_d_k, channels.H_d, x, sigma2_dl, rng)


def ut_encode(y_block, c, p):
    """Code slot p at the UT: row l of the block scaled by C[p, l]."""
    if not 0 <= p < c.shape[0]:
        raise ValueError(f"code slot {p} out of range [0, {c.shape[0]})")
    return c[p, :][:, None] * y_block


def ul_block(channels, s_u_k, y_coded, sigma2_ul=0.0, rng=None):
    """Uplink block received by the BS: H_u diag(s_u[k]) G_u^T Y[k,p] + noise."""
    out = (channels.H_u * s_u_k) @ (channels.G_u.T @ y_coded)
    if rng is not None and sigma2_ul > 0.0:
        out = out + _noise(rng, out.shape, sigma2_ul)
    return out


def pilot_matched_filter(q_block, x):
    """
    Strip the pilot by right-multiplying with X^H.

    Rejects pilots that are not row-orthonormal, since the filter is only
    distortion-free when X @ X^H = I.
    """
    m = x.shape[0]
    gram = x @ x.conj().T
    dev = np.max(np.abs(gram - np.eye(m)))
    if dev > ORTHO_TOL:
        raise ValueError(
            f"pilot is not orthonormal: max |X X^H - I| = {dev:.3e} exceeds {ORTHO_TOL:.0e}"
        )
    return q_block @ x.conj().T


def assemble_observation(q_filtered, c):
    """
    Reduce the K*P filtered blocks to the order-4 observation tensor.

    ``q_filtered[k, p]`` is the (M, M) pilot-filtered uplink block. The
    blocks are vectorized and stacked into an (M^2 K, P) matrix, the code is
    stripped with the pseudo-inverse of C^T (requires P >= L), and the
    result is reshaped to (M, M, K, L) by splitting the leading M^2 axis.
    """
    q_filtered = np.asarray(q_filtered)
    k, p, m, _ = q_filtered.shape
    if c.shape[0] < c.shape[1]:
        raise ValueError("code matrix needs P >= L to be strippable")
    if p != c.shape[0]:
        raise ValueError(f"block count {p} does not match code slots {c.shape[0]}")
    cols = np.empty((m * m * k, p), dtype=np.complex128)
    for pi in range(p):
        cols[:, pi] = np.concatenate([vec(q_filtered[ki, pi]) for ki in range(k)])
    filtered = cols @ pseudo_inverse(c.T)
    return filtered.reshape((m, m, k, c.shape[1]), order="F")


def _noiseless_chain(channels, protocol):
    """Noiseless DL blocks (K, L, T) and UL blocks (K, P, M, T)."""
    k_blocks = protocol.S_d.shape[0]
    p_slots = protocol.C.shape[0]
    y0 = np.stack(
        [dl_block(channels, protocol.X, protocol.S_d[ki]) for ki in range(k_blocks)]
    )
    q0 = np.empty((k_blocks, p_slots, channels.H_u.shape[0], protocol.X.shape[1]), dtype=np.complex128)
    for ki in range(k_blocks):
        for pi in range(p_slots):
            q0[ki, pi] = ul_block(channels, protocol.S_u[ki], ut_encode(y0[ki], protocol.C, pi))
    return y0, q0


def calibrate_noise(channels, protocol, snr_db):
    """
    Per-hop noise variances for a target SNR.

    The variance at each hop is the mean per-entry power of that hop's
    noiseless received blocks divided by the linear SNR, so both receivers
    see the same SNR in pilot reception regardless of channel draw or
    training normalization.
    """
    y0, q0 = _noiseless_chain(channels, protocol)
    snr_lin = 10.0 ** (float(snr_db) / 10.0)
    if np.isinf(snr_lin):
        return 0.0, 0.0
    sigma2_dl = float(np.mean(np.abs(y0) ** 2)) / snr_lin
    sigma2_ul = float(np.mean(np.abs(q0) ** 2)) / snr_lin
    return sigma2_dl, sigma2_ul


def simulate_observation(channels, protocol, snr_db, rng, keep_noiseless=False):
    """
    Synthesize one noisy closed-loop observation.

    Noise is injected at both hops: once per block at the UT (the UT encodes
    its single noisy reception P times) and once per (block, slot) at the
    BS. Blocks are processed k-outer, p-inner, so the draw order is fixed
    and the result is deterministic given (channels, protocol, snr_db, rng).
    """
    k_blocks = protocol.S_d.shape[0]
    p_slots = protocol.C.shape[0]
    m = channels.H_d.shape[0]
    sigma2_dl, sigma2_ul = calibrate_noise(channels, protocol, snr_db)

    q_filtered = np.empty((k_blocks, p_slots, m, m), dtype=np.complex128)
    q0_filtered = np.empty_like(q_filtered) if keep_noiseless else None
    for ki in range(k_blocks):
        y_k = dl_block(channels, protocol.X, protocol.S_d[ki], sigma2_dl, rng)
        y0_k = dl_block(channels, protocol.X, protocol.S_d[ki]) if keep_noiseless else None
        for pi in range(p_slots):
            q_kp = ul_block(
                channels, protocol.S_u[ki], ut_encode(y_k, protocol.C, pi), sigma2_ul, rng
            )
            q_filtered[ki, pi] = pilot_matched_filter(q_kp, protocol.X)
            if keep_noiseless:
                q0_kp = ul_block(channels, protocol.S_u[ki], ut_encode(y0_k, protocol.C, pi))
                q0_filtered[ki, pi] = pilot_matched_filter(q0_kp, protocol.X)

    tensor = assemble_observation(q_filtered, protocol.C)
    noiseless = assemble_observation(q0_filtered, protocol.C) if keep_noiseless else None
    return ClosedLoopObservation(
        tensor=tensor,
        snr_db=float(snr_db),
        sigma2_dl=sigma2_dl,
        sigma2_ul=sigma2_ul,
        noiseless=noiseless,
    )


def dump_observation(path, tensor):
    """
    Write a complex tensor to ``path`` for cross-implementation regression.

    Format (little-endian): uint32 order, one uint64 per extent, then the
    entries as interleaved (re, im) float64 pairs in column-major order.
    """
    tensor = np.asarray(tensor, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(np.uint32(tensor.ndim).astype("<u4").tobytes())
        fh.write(np.asarray(tensor.shape, dtype="<u8").tobytes())
        flat = tensor.reshape(-1, order="F")
        interleaved = np.empty(2 * flat.size, dtype="<f8")
        interleaved[0::2] = flat.real
        interleaved[1::2] = flat.imag
        fh.write(interleaved.tobytes())


def load_observation(path):
    """Read a tensor written by :func:`dump_observation`."""
    with open(path, "rb") as fh:
        ndim = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        shape = tuple(np.frombuffer(fh.read(8 * ndim), dtype="<u8").astype(int))
        count = 2 * int(np.prod(shape)) if ndim else 2
        raw = np.frombuffer(fh.read(8 * count), dtype="<f8")
    flat = raw[0::2] + 1j * raw[1::2]
    return flat.reshape(shape, order="F")
