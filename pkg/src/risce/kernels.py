"""
Hot numeric kernels for the alternating least-squares inner loop.

Each kernel exists twice: a pure-numpy einsum implementation and a numba
``@njit`` twin with identical semantics. The numba path is used by default
when numba imports cleanly; setting the environment variable
``RISCE_DISABLE_NUMBA=1`` (before import) forces the numpy path. See
``benchmarks/bench_kernels.py`` for a timing comparison of the two.

Layout contracts (shared by every kernel):
  * combined RIS index  r = n_u + n_d * N   (uplink index fastest),
  * unfolding columns follow the column-major convention of
    :mod:`risce.tensor_ops` (earliest remaining mode fastest).
"""

import os

import numpy as np

_DISABLE = os.environ.get("RISCE_DISABLE_NUMBA", "0") not in ("", "0")

if not _DISABLE:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
else:
    njit = None


def _design_mode1_numpy(h_d, s, g_t):
    """(N, M*K*L) design matrix for the uplink BS-RIS factor update."""
    m, n = h_d.shape
    k = s.shape[0]
    l = g_t.shape[0]
    s4 = s.reshape(k, n, n)      # [k, n_d, n_u]
    g4 = g_t.reshape(l, n, n)    # [l, n_d, n_u]
    d = np.einsum("kdu,ldu,md->umkl", s4, g4, h_d, optimize=True)
    return d.reshape(n, m * k * l, order="F")


def _design_mode2_numpy(h_u, s, g_t):
    """(N, M*K*L) design matrix for the downlink BS-RIS factor update."""
    m, n = h_u.shape
    k = s.shape[0]
    l = g_t.shape[0]
    s4 = s.reshape(k, n, n)
    g4 = g_t.reshape(l, n, n)
    d = np.einsum("kdu,ldu,mu->dmkl", s4, g4, h_u, optimize=True)
    return d.reshape(n, m * k * l, order="F")


def _design_mode4_numpy(h_u, h_d, s):
    """(N^2, M*M*K) design matrix for the combined RIS-UT factor update."""
    m, n = h_u.shape
    k = s.shape[0]
    s4 = s.reshape(k, n, n)
    d = np.einsum("kdu,ad,bu->udbak", s4, h_d, h_u, optimize=True)
    return d.reshape(n * n, m * m * k, order="F")


if njit is not None:

    @njit(cache=True)
    def _design_mode1_numba(h_d, s, g_t):
        m, n = h_d.shape
        k = s.shape[0]
        l = g_t.shape[0]
        d = np.zeros((n, m * k * l), dtype=np.complex128)
        for li in range(l):
            for ki in range(k):
                base = ki * m + li * k * m
                for nd in range(n):
                    for nu in range(n):
                        w = s[ki, nu + nd * n] * g_t[li, nu + nd * n]
                        for mi in range(m):
                            d[nu, base + mi] += w * h_d[mi, nd]
        return d

    @njit(cache=True)
    def _design_mode2_numba(h_u, s, g_t):
        m, n = h_u.shape
        k = s.shape[0]
        l = g_t.shape[0]
        d = np.zeros((n, m * k * l), dtype=np.complex128)
        for li in range(l):
            for ki in range(k):
                base = ki * m + li * k * m
                for nd in range(n):
                    for nu in range(n):
                        w = s[ki, nu + nd * n] * g_t[li, nu + nd * n]
                        for mi in range(m):
                            d[nd, base + mi] += w * h_u[mi, nu]
        return d

    @njit(cache=True)
    def _design_mode4_numba(h_u, h_d, s):
        m, n = h_u.shape
        k = s.shape[0]
        d = np.empty((n * n, m * m * k), dtype=np.complex128)
        for ki in range(k):
            for m2 in range(m):
                for m1 in range(m):
                    col = m1 + m2 * m + ki * m * m
                    for nd in range(n):
                        for nu in range(n):
                            r = nu + nd * n
                            d[r, col] = s[ki, r] * h_d[m2, nd] * h_u[m1, nu]
        return d

    BACKEND = "numba"
else:
    _design_mode1_numba = None
    _design_mode2_numba = None
    _design_mode4_numba = None
    BACKEND = "numpy"


def _as_c128(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def design_mode1(h_d, s, g_t):
    """
    Design matrix of the mode-1 LS subproblem: the unfolded noiseless model
    factors as ``H_u @ design_mode1(H_d, S, G.T)``.
    """
    if BACKEND == "numba":
        return _design_mode1_numba(_as_c128(h_d), _as_c128(s), _as_c128(g_t))
    return _design_mode1_numpy(h_d, s, g_t)


def design_mode2(h_u, s, g_t):
    """Design matrix of the mode-2 LS subproblem (``H_d`` update)."""
    if BACKEND == "numba":
        return _design_mode2_numba(_as_c128(h_u), _as_c128(s), _as_c128(g_t))
    return _design_mode2_numpy(h_u, s, g_t)


def design_mode4(h_u, h_d, s):
    """Design matrix of the mode-4 LS subproblem (``G.T`` update)."""
    if BACKEND == "numba":
        return _design_mode4_numba(_as_c128(h_u), _as_c128(h_d), _as_c128(s))
    return _design_mode4_numpy(h_u, h_d, s)
