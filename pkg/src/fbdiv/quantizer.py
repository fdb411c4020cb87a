"""Codebooks and channel-direction quantization.

Three codebook families are supported:

* RVQ -- ``2^B`` i.i.d. isotropic unit vectors, one codebook per user.
* RBF -- a single Haar orthonormal basis shared by all users.
* PU2RC -- ``2^(B - log2 M)`` orthonormal bases shared by all users.

Quantization picks the codeword with the smallest squared sine of the angle
to the channel. For RVQ the simulator does not need the codebook itself,
only the quantized direction, and :func:`sample_rvq_quantization` draws that
directly from its exact distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .numerics import complex_gaussian, haar_orthonormal

MAX_BITS = 30
# codebooks larger than this are regenerated chunk by chunk while scanning
MATERIALIZE_BITS = 20
_CHUNK = 1 << 16

RVQ = "RVQ"
ORTHONORMAL = "Orthonormal"
SHARED = "shared"


@dataclass(frozen=True)
class QuantizationResult:
    index: int
    sin_sq_error: float


@dataclass
class Codebook:
    """Unit-norm codewords stored as rows.

    Codebooks above ``MATERIALIZE_BITS`` bits keep ``vectors`` as ``None`` and
    regenerate their rows deterministically from ``seed`` in chunks.
    """

    bits: int
    M: int
    kind: str = RVQ
    owner: int | str = SHARED
    vectors: np.ndarray | None = None
    seed: int | None = None

    def __len__(self) -> int:
        return 1 << self.bits if self.kind == RVQ else self.M

    def chunks(self) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(offset, rows)`` pairs covering the whole codebook."""
        if self.vectors is not None:
            yield 0, self.vectors
            return
        rng = np.random.Generator(np.random.PCG64(self.seed))
        n = len(self)
        for start in range(0, n, _CHUNK):
            yield start, _isotropic(rng, min(_CHUNK, n - start), self.M)

    def codeword(self, index: int) -> np.ndarray:
        if self.vectors is not None:
            return self.vectors[index]
        for start, rows in self.chunks():
            if index < start + len(rows):
                return rows[index - start]
        raise IndexError(index)


@dataclass
class PURCCodebookSet:
    """Orthonormal bases of shape ``(count, M, M)``; beams are columns."""

    bases: np.ndarray

    @property
    def count(self) -> int:
        return self.bases.shape[0]


def _isotropic(rng: np.random.Generator, n: int, M: int) -> np.ndarray:
    v = complex_gaussian(rng, (n, M))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def build_rvq_codebook(B: int, M: int, rng: np.random.Generator, owner: int | str = SHARED) -> Codebook:
    if not 1 <= B <= MAX_BITS:
        raise ValueError(f"B={B} outside [1, {MAX_BITS}]")
    if M < 1:
        raise ValueError("M must be >= 1")
    if B > MATERIALIZE_BITS:
        seed = int(rng.integers(0, 2**63))
        return Codebook(B, M, RVQ, owner, None, seed)
    return Codebook(B, M, RVQ, owner, _isotropic(rng, 1 << B, M))


def build_rbf_codebook(M: int, rng: np.random.Generator) -> Codebook:
    W = haar_orthonormal(M, rng)
    bits = int(math.log2(M)) if M & (M - 1) == 0 else math.ceil(math.log2(M))
    return Codebook(bits, M, ORTHONORMAL, SHARED, np.ascontiguousarray(W.T))


def log2_int(M: int) -> int:
    if M < 1 or M & (M - 1):
        raise ValueError(f"M={M} must be a power of two")
    return M.bit_length() - 1


def purc_codebook_count(B: int, M: int) -> int:
    extra = B - log2_int(M)
    if extra < 0:
        raise ValueError(f"B={B} below log2(M)={log2_int(M)}")
    return 1 << extra


def build_purc_codebooks(B: int, M: int, rng: np.random.Generator) -> PURCCodebookSet:
    return PURCCodebookSet(haar_orthonormal(M, rng, size=purc_codebook_count(B, M)))


def quantize(h, C: Codebook) -> QuantizationResult:
    """Minimum-angle codeword for ``h``; ties go to the lowest index."""
    h = np.asarray(h, dtype=complex)
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise ValueError("cannot quantize the zero vector")
    u = h / nrm
    best_idx, best_val = -1, -1.0
    for start, rows in C.chunks():
        corr = np.abs(rows.conj() @ u) ** 2
        i = int(np.argmax(corr))
        if corr[i] > best_val:
            best_idx, best_val = start + i, float(corr[i])
    return QuantizationResult(best_idx, max(0.0, 1.0 - best_val))


def rvq_error_quantile(u, B: int, M: int):
    """Inverse CDF of the RVQ quantization error ``sin^2``.

    With ``N = 2^B`` independent isotropic codewords each codeword's
    ``sin^2`` has CDF ``x^(M-1)``, so the minimum has CDF
    ``1 - (1 - x^(M-1))^N``.
    """
    u = np.asarray(u, dtype=float)
    if M == 1:
        return np.zeros_like(u)
    n = float(2.0**B)
    tail = -np.expm1(np.log1p(-u) / n)
    return tail ** (1.0 / (M - 1))


def sample_rvq_quantization(H: np.ndarray, B: int, rng: np.random.Generator):
    """Draw RVQ-quantized directions for every row of ``H`` (shape ``(..., M)``).

    Equivalent in distribution to quantizing each row against its own fresh
    ``2^B``-word RVQ codebook: the error ``z = sin^2`` follows the minimum
    distribution above and the codeword is ``sqrt(1-z) e^{j phi} h/|h|``
    plus ``sqrt(z)`` times an isotropic unit vector orthogonal to ``h``.

    Returns ``(w_hat, sin_sq)`` with shapes ``H.shape`` and ``H.shape[:-1]``.
    """
    H = np.asarray(H, dtype=complex)
    lead = H.shape[:-1]
    M = H.shape[-1]
    u_dir = H / np.linalg.norm(H, axis=-1, keepdims=True)
    z = rvq_error_quantile(rng.random(lead), B, M)
    v = complex_gaussian(rng, H.shape)
    v -= u_dir * np.sum(u_dir.conj() * v, axis=-1, keepdims=True)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    phase = np.exp(2j * np.pi * rng.random(lead))
    w_hat = np.sqrt(1.0 - z)[..., None] * phase[..., None] * u_dir + np.sqrt(z)[..., None] * v
    return w_hat, z


def rbf_sinr(gains: np.ndarray, M: int, P: float) -> np.ndarray:
    """Per-beam SINR from ``gains[..., m] = |h^H w_m|^2`` of one orthonormal basis.

    Interference is the sum over the other beams of the same basis, with
    each beam carrying power ``P/M``.
    """
    total = gains.sum(axis=-1, keepdims=True)
    return gains / (M / P + total - gains)


def purc_report(h, codebooks: PURCCodebookSet, P: float) -> tuple[int, int, float]:
    """Best ``(codebook, beam, SINR)`` over all bases; ties to the lowest index."""
    h = np.asarray(h, dtype=complex)
    M = h.shape[0]
    gains = np.abs(np.einsum("m,gmb->gb", h.conj(), codebooks.bases)) ** 2
    sinr = rbf_sinr(gains, M, P)
    flat = int(np.argmax(sinr))
    g, m = divmod(flat, M)
    return g, m, float(sinr[g, m])
