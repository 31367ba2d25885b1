"""Dense complex matrix kernel used throughout the toolkit.

Thin validation layer over ``numpy.linalg``. Every function accepts
stacked operands (arbitrary leading batch dimensions) and acts on the
trailing two axes, so per-subcarrier work vectorizes naturally.
"""

import numpy as np

# Smallest singular value relative to the largest below which a matrix
# is treated as numerically singular.
SINGULARITY_RCOND = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is singular or too ill-conditioned to invert reliably."""


class SvdConvergenceError(np.linalg.LinAlgError):
    """SVD iteration failed to converge."""


def as_cmatrix(a):
    """Coerce to a complex128 array with at least 2 dimensions."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2:
        raise ValueError(f"matrix must have >= 2 dimensions, got shape {a.shape}")
    if a.shape[-2] < 1 or a.shape[-1] < 1:
        raise ValueError(f"matrix dimensions must be >= 1, got shape {a.shape}")
    return a


def matmul(a, b):
    """Complex matrix product over the trailing two axes."""
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def conj_transpose(a):
    """Conjugate transpose, the (.)* operator."""
    return as_cmatrix(a).conj().swapaxes(-1, -2)


def trace(a):
    """Sum of diagonal entries (square matrices only)."""
    a = as_cmatrix(a)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"trace requires a square matrix, got shape {a.shape}")
    return np.einsum("...ii->...", a)


def inverse(a, check=True):
    """Matrix inverse with an explicit singularity guard.

    With ``check=True`` the smallest singular value is compared against
    SINGULARITY_RCOND times the largest and a SingularMatrixError is
    raised for near-singular input; a @ inverse(a) == I holds within
    1e-10 Frobenius for condition numbers below ~1e8.
    """
    a = as_cmatrix(a)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"inverse requires a square matrix, got shape {a.shape}")
    if check:
        s = np.linalg.svd(a, compute_uv=False)
        if np.any(s[..., -1] <= SINGULARITY_RCOND * s[..., 0]):
            raise SingularMatrixError("matrix is singular to working precision")
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:  # exactly singular
        raise SingularMatrixError(str(exc)) from exc


def svd(a):
    """Singular value decomposition a = U @ diag(S) @ V*.

    Returns (U, S, V) with S sorted descending and U, V having
    orthonormal columns. Note V is returned, not V*.
    """
    a = as_cmatrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(str(exc)) from exc
    return u, s, vh.conj().swapaxes(-1, -2)


def frobenius_norm(a):
    """Frobenius norm, equal to sqrt(trace(A* A))."""
    a = as_cmatrix(a)
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def identity_like(n, batch_shape=()):
    """Identity matrix broadcastable against a (batch_shape, n, n) stack."""
    return np.broadcast_to(np.eye(n, dtype=np.complex128), (*batch_shape, n, n))
