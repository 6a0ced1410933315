"""Closed-form linear algebra on real 2x2 matrices.

Matrices are plain ``numpy`` arrays of shape ``(2, 2)``. When a matrix stands
for a gradient ``Du`` the entry ``A[i, j]`` is ``du_i/dx_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

IDENTITY = np.eye(2)


def mat2(a11: float, a12: float, a21: float, a22: float) -> np.ndarray:
    return np.array([[a11, a12], [a21, a22]], dtype=float)


def diag(x: float, y: float) -> np.ndarray:
    return np.array([[x, 0.0], [0.0, y]])


def as_mat2(a) -> np.ndarray:
    """Coerce a nested list, flat 4-sequence or array to a finite 2x2 array."""
    m = np.asarray(a, dtype=float)
    if m.shape == (4,):
        m = m.reshape(2, 2)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def to_list(a: np.ndarray) -> list[float]:
    """Row-major JSON encoding ``[a11, a12, a21, a22]``."""
    return [float(v) for v in np.asarray(a, dtype=float).reshape(4)]


def from_list(values) -> np.ndarray:
    return as_mat2(values)


def det(a: np.ndarray) -> float:
    return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])


def frobenius(a: np.ndarray) -> float:
    return float(math.hypot(math.hypot(a[0, 0], a[0, 1]), math.hypot(a[1, 0], a[1, 1])))


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SVDecomp:
    """``A = Q @ diag(sigma1, sigma2) @ R`` with ``Q``, ``R`` in O(2)."""

    Q: np.ndarray
    R: np.ndarray
    sigma1: float
    sigma2: float

    @property
    def sigma(self) -> tuple[float, float]:
        return (self.sigma1, self.sigma2)

    def reconstruct(self) -> np.ndarray:
        return self.Q @ diag(self.sigma1, self.sigma2) @ self.R


def svd(a) -> SVDecomp:
    """Closed-form singular value decomposition of a 2x2 matrix.

    Uses the rotation-angle form ``A = rot(phi) diag(s1, s) rot(theta)``
    where ``s`` may be negative; a negative ``s`` is absorbed into ``R`` as a
    reflection. Signs are then fixed so that the first column of ``Q`` has a
    nonnegative first entry (nonnegative second entry on ties).

    >>> d = svd(diag(1.0, -2.0))
    >>> d.sigma
    (2.0, 1.0)
    """
    a = as_mat2(a)
    if not np.any(a):
        return SVDecomp(IDENTITY.copy(), IDENTITY.copy(), 0.0, 0.0)

    e = 0.5 * (a[0, 0] + a[1, 1])
    f = 0.5 * (a[0, 0] - a[1, 1])
    g = 0.5 * (a[1, 0] + a[0, 1])
    h = 0.5 * (a[1, 0] - a[0, 1])
    q = math.hypot(e, h)
    r = math.hypot(f, g)
    s1 = q + r
    s2 = q - r
    a1 = math.atan2(g, f)
    a2 = math.atan2(h, e)
    theta = 0.5 * (a2 - a1)
    phi = 0.5 * (a2 + a1)

    Q = rotation(phi)
    R = rotation(theta)
    if s2 < 0.0:
        s2 = -s2
        R = diag(1.0, -1.0) @ R

    c0 = Q[:, 0]
    if c0[0] < 0.0 or (c0[0] == 0.0 and c0[1] < 0.0):
        Q = Q @ diag(-1.0, 1.0)
        R = diag(-1.0, 1.0) @ R
    return SVDecomp(Q, R, float(s1), float(s2))


def singular_values(a) -> tuple[float, float]:
    d = svd(a)
    return d.sigma


def rank_le_one(x, tol: float = 1e-10) -> bool:
    """True iff ``|det X| <= tol * max(1, |X|_F^2)``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x = as_mat2(x)
    return abs(det(x)) <= tol * max(1.0, frobenius(x) ** 2)


def rank(x, tol: float = 1e-10) -> int:
    """Numerical rank from singular values, threshold relative to ``sigma1``."""
    s1, s2 = singular_values(x)
    if s1 <= tol:
        return 0
    return 1 if abs(s2) <= tol * s1 else 2


def conjugate(q, d, r) -> np.ndarray:
    return as_mat2(q) @ as_mat2(d) @ as_mat2(r)


def is_symmetric(a, rtol: float = 1e-12) -> bool:
    a = as_mat2(a)
    return frobenius(a - a.T) <= rtol * frobenius(a)


def sym_eig(a) -> tuple[np.ndarray, float, float]:
    """Eigendecomposition ``A = Q diag(l1, l2) Q^T`` of a symmetric matrix.

    Eigenvalues are ordered by decreasing absolute value, positive first on
    ties. Each column of ``Q`` has its first nonzero entry positive.
    """
    a = as_mat2(a)
    s = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(s)
    order = sorted(range(2), key=lambda i: (-abs(w[i]), -w[i]))
    w = w[order]
    v = v[:, order]
    for j in range(2):
        col = v[:, j]
        k = 0 if abs(col[0]) > 1e-14 else 1
        if col[k] < 0:
            v[:, j] = -col
    return v, float(w[0]), float(w[1])
