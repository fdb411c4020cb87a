"""Small dense complex linear algebra for M-dimensional beamforming vectors.

All routines accept numpy arrays. Functions that take a leading batch axis
say so; everything else works on single vectors or matrices.
"""

from __future__ import annotations

import numpy as np

UNITARY_TOL = 1e-10
NULLING_TOL = 1e-9
RANK_TOL = 1e-9


class RankDeficient(ValueError):
    """Raised when stacked channels are too close to linearly dependent."""


def inner(a, b) -> complex:
    """Return ``a^H b`` (conjugate-linear in ``a``)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def norm_sq(a) -> float:
    a = np.asarray(a)
    return float(np.real(np.vdot(a, a)))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. CN(0, 1) samples: real and imaginary parts each N(0, 1/2)."""
    z = rng.standard_normal((*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def _gram_schmidt_pass(A: np.ndarray) -> np.ndarray:
    # modified Gram-Schmidt over columns, vectorized across the batch axis
    Q = A.copy()
    m = Q.shape[-1]
    for j in range(m):
        for i in range(j):
            proj = np.sum(np.conj(Q[..., :, i]) * Q[..., :, j], axis=-1)
            Q[..., :, j] -= proj[..., None] * Q[..., :, i]
        nrm = np.sqrt(np.sum(np.abs(Q[..., :, j]) ** 2, axis=-1))
        Q[..., :, j] /= nrm[..., None]
    return Q


def orthonormalize(A: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``A`` (shape ``(..., M, M)``).

    Two modified Gram-Schmidt passes are applied. The first pass fixes the
    diagonal of the implied triangular factor to be positive real, which
    makes the result Haar distributed when ``A`` is complex Gaussian; the
    second pass only removes rounding drift.
    """
    A = np.asarray(A, dtype=complex)
    return _gram_schmidt_pass(_gram_schmidt_pass(A))


def haar_orthonormal(M: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw a Haar-distributed ``M x M`` unitary matrix (columns are beams).

    With ``size`` given, returns a stack of shape ``(size, M, M)``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    shape = (M, M) if size is None else (size, M, M)
    while True:
        A = complex_gaussian(rng, shape)
        Q = orthonormalize(A)
        err = np.abs(np.conj(np.swapaxes(Q, -1, -2)) @ Q - np.eye(M)).max()
        if np.all(np.isfinite(Q)) and err < UNITARY_TOL:
            return Q


def zf_directions(G) -> np.ndarray:
    """Unit-norm zero-forcing beams for the stacked row channels ``G``.

    ``G`` has shape ``(S, M)`` with ``S <= M``. Column ``j`` of the result is
    orthogonal to every row ``i != j`` of ``G``. The beams are the normalized
    columns of the pseudo-inverse of ``conj(G)``, whose rows are ``g_i^H``.

    Raises
    ------
    RankDeficient
        If the Gram matrix ``G G^H`` is numerically singular.
    """
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    S, M = G.shape
    if S > M:
        raise RankDeficient(f"{S} users exceed {M} antennas")
    A = G.conj()  # rows g_i^H, so (A w)_i = inner(g_i, w)
    gram = A @ A.conj().T
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= RANK_TOL * max(ev[-1], np.finfo(float).tiny):
        raise RankDeficient("stacked channels are linearly dependent")
    # rows of X solve gram X = A, so X^H = A^H gram^{-1}
    X = np.linalg.solve(gram, A)
    W = X.conj().T
    return W / np.linalg.norm(W, axis=0, keepdims=True)
