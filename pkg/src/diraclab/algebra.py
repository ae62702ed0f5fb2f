"""2x2 complex matrix helpers: products, conjugacy classes, rotation angles, norms.

Matrices are plain ``numpy`` arrays of shape ``(2, 2)`` (or stacks of shape
``(..., 2, 2)`` where noted) with complex dtype.
"""

from __future__ import annotations

import enum

import numpy as np

DEFAULT_TOL = 1e-9

IDENTITY = np.eye(2, dtype=complex)


class MatClass(str, enum.Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"
    PLUS_IDENTITY = "plus_identity"
    MINUS_IDENTITY = "minus_identity"
    INDETERMINATE = "indeterminate"

    @property
    def bounded_powers(self) -> bool:
        return self in (MatClass.ELLIPTIC, MatClass.PLUS_IDENTITY, MatClass.MINUS_IDENTITY)


def as_mat2(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def mat_mul(a, b) -> np.ndarray:
    return as_mat2(a) @ as_mat2(b)


def det(m) -> complex | np.ndarray:
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def adjugate(m) -> np.ndarray:
    """Classical adjoint; equals the inverse when ``det(m) == 1``."""
    m = np.asarray(m)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def inverse(m) -> np.ndarray:
    m = np.asarray(m)
    d = det(m)
    return adjugate(m) / np.asarray(d)[..., None, None]


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def operator_norm(m) -> float | np.ndarray:
    """Largest singular value, vectorized over leading axes.

    Closed form from the Gram matrix ``G = m^H m``:
    ``s_max**2 = (tr G + sqrt((G11 - G22)**2 + 4|G12|**2)) / 2``. The
    discriminant is a sum of squares, so near-unitary inputs keep full
    relative accuracy.
    """
    m = np.asarray(m)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    g11 = np.abs(a) ** 2 + np.abs(c) ** 2
    g22 = np.abs(b) ** 2 + np.abs(d) ** 2
    g12 = np.conj(a) * b + np.conj(c) * d
    s2 = 0.5 * (g11 + g22 + np.hypot(g11 - g22, 2.0 * np.abs(g12)))
    out = np.sqrt(s2)
    if out.ndim == 0:
        return float(out)
    return out


def classify(m, tol: float = DEFAULT_TOL) -> MatClass:
    """Conjugacy class of a unimodular 2x2 matrix.

    A single band ``tol`` controls the +-identity test, the parabolic trace
    test and the elliptic/hyperbolic margins. Traces with a non-negligible
    imaginary part inside the band are reported as indeterminate.
    """
    m = as_mat2(m)
    if abs(det(m) - 1.0) > tol:
        raise ValueError(f"classify expects a unimodular matrix, |det - 1| = {abs(det(m) - 1.0):.3e}")
    if np.max(np.abs(m - IDENTITY)) <= tol:
        return MatClass.PLUS_IDENTITY
    if np.max(np.abs(m + IDENTITY)) <= tol:
        return MatClass.MINUS_IDENTITY
    tr = m[0, 0] + m[1, 1]
    if abs(tr.real) > 2.0 + tol:
        return MatClass.HYPERBOLIC
    if abs(tr - 2.0) <= tol or abs(tr + 2.0) <= tol:
        return MatClass.PARABOLIC
    if abs(tr.real) < 2.0 - tol and abs(tr.imag) <= tol:
        return MatClass.ELLIPTIC
    return MatClass.INDETERMINATE


def rotation_angle(m, tol: float = DEFAULT_TOL) -> float:
    """Rotation angle in ``[0, pi]`` of an elliptic or +-identity matrix.

    Only the trace is used: ``eta = arccos(Re(trace) / 2)``.
    """
    cls = classify(m, tol)
    if not cls.bounded_powers:
        raise ValueError(f"rotation angle undefined for a {cls.value} matrix")
    if cls is MatClass.PLUS_IDENTITY:
        return 0.0
    if cls is MatClass.MINUS_IDENTITY:
        return float(np.pi)
    m = np.asarray(m)
    half_trace = float(np.clip((m[0, 0] + m[1, 1]).real / 2.0, -1.0, 1.0))
    return float(np.arccos(half_trace))


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """Product ``mats[-1] @ ... @ mats[0]`` (later factors act last).

    Pairwise tree reduction: log2(n) batched matmuls, and rounding errors
    grow like log(n) instead of n.
    """
    mats = np.asarray(mats, dtype=complex)
    if mats.shape[0] == 0:
        return IDENTITY.copy()
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, IDENTITY[None]], axis=0)
        mats = mats[1::2] @ mats[0::2]
    return mats[0]
