"""
Complex multi-way array primitives with column-major index conventions.

Every routine in this module assumes the *first index varies fastest*
(Fortran / column-major semantics), so that `vec` of a matrix stacks its
columns and mode-n unfoldings are mutually consistent with Kronecker /
Khatri-Rao factorizations of multilinear products. All tensors are plain
`numpy.ndarray` objects with dtype complex128; the functions never mutate
their inputs.
"""

import numpy as np

__all__ = [
    "vec",
    "unvec",
    "kronecker",
    "khatri_rao_cols",
    "khatri_rao_rows",
    "mode_n_unfold",
    "mode_n_fold",
    "mode_n_product",
    "multimode_unfold_12_34",
    "multimode_fold_12_34",
    "pseudo_inverse",
    "effective_rank",
    "rank_one_approx",
]

#: Relative singular-value cutoff for pseudo-inverses. Design matrices built
#: from DFT/Hadamard schedules are well conditioned, so truncation only guards
#: against degenerate user configurations.
PINV_RTOL = 1e-12


def vec(a):
    """Stack the columns of ``a`` into a single vector (column-major)."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, shape):
    """Inverse of :func:`vec`: reshape ``v`` into ``shape``, first index fastest."""
    return np.asarray(v).reshape(shape, order="F")


def kronecker(a, b):
    """
    Kronecker product of two matrices.

    Row ``(i, j)`` of the result (with ``j``, the index of ``b``, varying
    fastest) holds ``a[i, r] * b[j, s]`` at column ``(r, s)``.
    """
    return np.kron(np.asarray(a), np.asarray(b))


def khatri_rao_cols(a, b):
    """
    Column-wise Khatri-Rao product.

    Column ``r`` of the result is ``a[:, r] kron b[:, r]``; ``a`` and ``b``
    must have the same number of columns.

    Returns
    -------
    ndarray of shape ``(I*J, R)`` for inputs ``(I, R)`` and ``(J, R)``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column count mismatch: {a.shape[1]} != {b.shape[1]}"
        )
    i, r = a.shape
    j = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(i * j, r)


def khatri_rao_rows(a, b):
    """
    Row-wise (transposed) Khatri-Rao product.

    Row ``k`` of the result is ``a[k, :] kron b[k, :]``, i.e. entry
    ``a[k, m] * b[k, n]`` sits at column ``m*J + n``. Equivalent to
    ``khatri_rao_cols(a.T, b.T).T``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row count mismatch: {a.shape[0]} != {b.shape[0]}")
    k = a.shape[0]
    return (a[:, :, None] * b[:, None, :]).reshape(k, a.shape[1] * b.shape[1])


def mode_n_unfold(x, mode):
    """
    Mode-``mode`` unfolding (matricization) of a tensor.

    Fibers along ``mode`` become rows; the remaining indices are ordered
    ascending with the earliest varying fastest along the columns
    (column-major convention).

    Parameters
    ----------
    x : ndarray
    mode : int
        0-based mode index.

    Returns
    -------
    ndarray of shape ``(x.shape[mode], prod of the other extents)``.
    """
    x = np.asarray(x)
    if not 0 <= mode < x.ndim:
        raise ValueError(f"mode {mode} out of range for order-{x.ndim} tensor")
    return np.moveaxis(x, mode, 0).reshape((x.shape[mode], -1), order="F")


def mode_n_fold(m, mode, shape):
    """Inverse of :func:`mode_n_unfold` for a tensor of extents ``shape``."""
    shape = tuple(shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for order-{len(shape)} tensor")
    lead = (shape[mode],) + tuple(s for i, s in enumerate(shape) if i != mode)
    return np.moveaxis(np.asarray(m).reshape(lead, order="F"), 0, mode)


def mode_n_product(x, a, mode):
    """
    Multiply tensor ``x`` along ``mode`` by the matrix ``a``.

    Satisfies ``mode_n_unfold(result, mode) == a @ mode_n_unfold(x, mode)``;
    the extent of ``mode`` changes from ``a.shape[1]`` to ``a.shape[0]``.
    """
    x = np.asarray(x)
    a = np.asarray(a)
    if not 0 <= mode < x.ndim:
        raise ValueError(f"mode {mode} out of range for order-{x.ndim} tensor")
    if a.shape[1] != x.shape[mode]:
        raise ValueError(
            f"factor has {a.shape[1]} columns, tensor extent {x.shape[mode]} at mode {mode}"
        )
    return np.moveaxis(np.tensordot(a, x, axes=(1, mode)), 0, mode)


def multimode_unfold_12_34(x):
    """
    Merge modes (0, 1) row-wise and modes (2, 3) column-wise of an order-4
    tensor, the earlier mode varying fastest on each side.

    Returns
    -------
    ndarray of shape ``(I0*I1, I2*I3)``.
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"expected an order-4 tensor, got order {x.ndim}")
    i0, i1, i2, i3 = x.shape
    return x.reshape((i0 * i1, i2 * i3), order="F")


def multimode_fold_12_34(m, shape):
    """Inverse of :func:`multimode_unfold_12_34` for extents ``shape``."""
    shape = tuple(shape)
    if len(shape) != 4:
        raise ValueError(f"expected 4 extents, got {len(shape)}")
    return np.asarray(m).reshape(shape, order="F")


def effective_rank(a, rtol=PINV_RTOL):
    """Number of singular values above ``rtol`` times the largest one."""
    s = np.linalg.svd(np.asarray(a), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def pseudo_inverse(a, rtol=PINV_RTOL, return_rank=False):
    """
    Moore-Penrose pseudo-inverse via SVD with relative truncation.

    Singular values below ``rtol * sigma_max`` are treated as zero. The
    function is defined for every finite matrix; ill-conditioning is
    surfaced through the effective rank when ``return_rank`` is set.

    Returns
    -------
    ndarray, or ``(ndarray, int)`` when ``return_rank`` is true.
    """
    a = np.asarray(a)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size and s[0] > 0.0:
        keep = s > rtol * s[0]
    else:
        keep = np.zeros_like(s, dtype=bool)
    rank = int(np.count_nonzero(keep))
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    pinv = (vh.conj().T * inv_s) @ u.conj().T
    if return_rank:
        return pinv, rank
    return pinv


def rank_one_approx(m):
    """
    Best Frobenius rank-one approximation of a matrix.

    Returns vectors ``(u, v)`` with ``outer(u, v)`` the dominant singular
    triplet of ``m``; the singular value is split as ``sqrt(sigma)`` into
    each factor. Raises for an all-zero input, which has no meaningful
    rank-one factor.
    """
    m = np.asarray(m)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("rank_one_approx: input matrix is zero (degenerate)")
    scale = np.sqrt(s[0])
    return scale * u[:, 0], scale * vh[0, :]
