"""Per-frame sum rate of each feedback/transmission strategy.

Two layers live here. The batched kernels (``*_rates`` and
:func:`greedy_zf`) take a leading trial axis and are what the simulator
calls. The single-frame functions (:func:`rbf_frame`,
:func:`zf_rvq_feedback`, :func:`greedy_select`, ...) operate on one
:class:`~fbdiv.channel.ChannelRealization` and exist for inspection and
testing; they route through the same kernels.

Channel convention: user ``k`` receives ``h_k^H x``, so the gain of beam
``w`` at user ``k`` is ``|h_k^H w|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .numerics import RANK_TOL, haar_orthonormal
from .quantizer import (
    build_purc_codebooks,
    build_rvq_codebook,
    log2_int,
    purc_codebook_count,
    quantize,
    rbf_sinr,
    sample_rvq_quantization,
)

# cap on complex entries materialized per PU2RC sub-batch
_PURC_CHUNK_ENTRIES = 1 << 22


class ConfigError(ValueError):
    """Raised for parameter combinations a scheme cannot run with."""


@dataclass(frozen=True)
class SystemParams:
    """System parameters; ``P`` is linear SNR (noise has unit variance).

    ``K`` defaults to ``floor(T / B)``; ``users`` overrides it, which the
    perfect-CSIT baseline uses to serve a pool of ``T`` users.
    """

    M: int
    P: float
    T: int
    B: float
    users: int | None = None

    @property
    def K(self) -> int:
        if self.users is not None:
            return self.users
        return int(math.floor(self.T / self.B + 1e-12))

    def validate_zf_rvq(self) -> None:
        _check_common(self)
        lo = 1 + math.log2(self.M)
        if self.B < lo - 1e-12:
            raise ConfigError(f"B={self.B} below 1+log2(M)={lo:g}")
        if self.B > self.T / self.M + 1e-12:
            raise ConfigError(f"B={self.B} above T/M={self.T / self.M:g}")
        if int(self.B) != self.B:
            raise ConfigError(f"B={self.B} must be an integer")

    def validate_rbf(self) -> None:
        _check_common(self)
        if abs(self.B - math.log2(self.M)) > 1e-12:
            raise ConfigError(f"RBF uses B=log2(M)={math.log2(self.M):g}, got B={self.B}")

    def validate_purc(self) -> None:
        _check_common(self)
        try:
            purc_codebook_count(int(self.B), self.M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if int(self.B) != self.B:
            raise ConfigError(f"B={self.B} must be an integer")


def _check_common(p: SystemParams) -> None:
    if p.M < 1:
        raise ConfigError(f"M={p.M} must be >= 1")
    if not p.P > 0:
        raise ConfigError(f"P={p.P} must be positive")
    if p.T < 1:
        raise ConfigError(f"T={p.T} must be >= 1")
    if not p.B > 0:
        raise ConfigError(f"B={p.B} must be positive")


@dataclass(frozen=True)
class FeedbackReport:
    """What one user sends back.

    ``scalar`` is ``|h|^2`` for ZF-RVQ and the SINR for RBF / PU2RC.
    ``direction`` is the codeword the indices point at; the transmitter holds
    every codebook, so carrying it here only saves a lookup.
    """

    user: int
    codebook_id: int
    codeword: int
    scalar: float
    direction: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass
class TransmitPlan:
    users: list[int]
    beams: np.ndarray  # (M, |S|), unit-norm columns
    P: float

    @property
    def per_user_power(self) -> float:
        return self.P / len(self.users)

    @property
    def served(self) -> list[tuple[int, np.ndarray]]:
        return [(u, self.beams[:, j]) for j, u in enumerate(self.users)]


# -- batched kernels ---------------------------------------------------------


def beam_gains(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``|h_k^H w_b|^2`` for ``H`` (N, K, M) and beams ``W`` (N, M, nb) or (N, G, M, nb)."""
    if W.ndim == 3:
        return np.abs(H.conj() @ W) ** 2
    n, G, M, nb = W.shape
    flat = np.swapaxes(W, 1, 2).reshape(n, M, G * nb)
    return (np.abs(H.conj() @ flat) ** 2).reshape(n, H.shape[1], G, nb)


def rbf_rates(H: np.ndarray, W: np.ndarray, P: float) -> np.ndarray:
    """Sum rate per frame of random beamforming.

    ``H`` is (N, K, M); ``W`` is (N, M, M) with the beams as columns. Each
    user reports only its best beam; each beam goes to the highest reported
    SINR and beams nobody reported stay silent.
    """
    N, K, M = H.shape
    if K == 0:
        return np.zeros(N)
    sinr = rbf_sinr(beam_gains(H, W), M, P)
    best = np.argmax(sinr, axis=-1)
    reported = np.where(np.arange(M) == best[..., None], sinr, 0.0)
    return np.log2(1.0 + reported.max(axis=1)).sum(axis=-1)


def purc_rates(H: np.ndarray, bases: np.ndarray, P: float) -> np.ndarray:
    """Sum rate per frame of PU2RC with ``bases`` (N, G, M, M).

    Each user reports its best (basis, beam) pair by SINR, interference
    counted within the same basis. The transmitter runs RBF selection per
    basis and transmits on the basis with the largest sum rate.
    """
    N, K, M = H.shape
    G = bases.shape[1]
    if K == 0:
        return np.zeros(N)
    step = max(1, _PURC_CHUNK_ENTRIES // max(1, K * G * M))
    out = np.empty(N)
    for lo in range(0, N, step):
        hi = min(N, lo + step)
        n = hi - lo
        sinr = rbf_sinr(beam_gains(H[lo:hi], bases[lo:hi]), M, P).reshape(n, K, G * M)
        flat = np.argmax(sinr, axis=-1)
        val = np.take_along_axis(sinr, flat[..., None], axis=-1)[..., 0]
        best = np.zeros((n, G * M))
        rows = np.broadcast_to(np.arange(n)[:, None], flat.shape)
        np.maximum.at(best, (rows, flat), val)
        per_basis = np.log2(1.0 + best.reshape(n, G, M)).sum(axis=-1)
        out[lo:hi] = per_basis.max(axis=-1)
    return out


def greedy_zf(G: np.ndarray, P: float, max_users: int | None = None) -> np.ndarray:
    """Greedy ZF user selection on estimated channels ``G`` (N, K, M).

    Users are added one at a time, each time picking the candidate that
    maximizes the ZF sum rate of the enlarged set with equal power split,
    computed as if ``G`` were exact. Selection stops when no candidate
    increases that rate or ``max_users`` (default M) are chosen.

    The ZF gain of member ``i`` is ``1 / [(A A^H)^{-1}]_ii`` with ``A`` the
    stacked ``g^H`` rows; adding a candidate updates the inverse through its
    Schur complement, so each step costs ``O(K s^2)`` per frame.

    Returns an (N, max_users) integer array of user ids padded with -1.
    """
    N, K, M = G.shape
    smax = min(M if max_users is None else max_users, K)
    sel = np.full((N, max(smax, 1)), -1, dtype=np.int64)
    if K == 0 or smax == 0:
        return sel
    norms = np.sum(np.abs(G) ** 2, axis=-1)  # (N, K)
    rows = np.arange(N)

    first = np.argmax(norms, axis=-1)
    sel[:, 0] = first
    cur = np.log2(1.0 + P * norms[rows, first])
    active = np.ones(N, dtype=bool)
    Ainv = (1.0 / norms[rows, first])[:, None, None].astype(complex)
    chosen = np.zeros((N, K), dtype=bool)
    chosen[rows, first] = True

    for s in range(1, smax):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Gs = G[idx[:, None], sel[idx, :s]]  # (n, s, M)
        Gi = G[idx]
        b = Gi @ np.swapaxes(Gs.conj(), -1, -2)  # b[n, u, i] = inner(g_i, g_u)
        Ab = b @ np.swapaxes(Ainv[idx], -1, -2)
        delta = norms[idx] - np.real(np.sum(b.conj() * Ab, axis=-1))
        ok = (delta > RANK_TOL * norms[idx]) & ~chosen[idx]
        safe = np.where(ok, delta, 1.0)
        diag_old = np.real(np.diagonal(Ainv[idx], axis1=-2, axis2=-1))  # (n, s)
        diag_new = diag_old[:, None, :] + np.abs(Ab) ** 2 / safe[..., None]
        pw = P / (s + 1)
        rate = np.log2(1.0 + pw / diag_new).sum(axis=-1) + np.log2(1.0 + pw * safe)
        rate = np.where(ok, rate, -np.inf)
        u = np.argmax(rate, axis=-1)
        gain = rate[np.arange(idx.size), u] > cur[idx]
        stop = idx[~gain]
        active[stop] = False
        go = idx[gain]
        if go.size == 0:
            break
        ug = u[gain]
        sel[go, s] = ug
        chosen[go, ug] = True
        cur[go] = rate[gain, ug]
        A = G[go[:, None], sel[go, : s + 1]].conj()
        new_inv = np.linalg.inv(A @ np.swapaxes(A.conj(), -1, -2))
        grown = np.zeros((N, s + 1, s + 1), dtype=complex)
        grown[go] = new_inv
        Ainv = grown
    return sel


def zf_beams(G_sel: np.ndarray) -> np.ndarray:
    """Unit ZF beams (n, M, s) nulling the estimated channels ``G_sel`` (n, s, M)."""
    A = G_sel.conj()
    gram = A @ np.swapaxes(A.conj(), -1, -2)
    W = np.swapaxes(np.linalg.solve(gram, A).conj(), -1, -2)
    return W / np.linalg.norm(W, axis=-2, keepdims=True)


def zf_sum_rate(H_sel: np.ndarray, W: np.ndarray, P: float) -> np.ndarray:
    """Achieved rate of ZF beams ``W`` (n, M, s) on true channels ``H_sel`` (n, s, M)."""
    s = H_sel.shape[1]
    X = np.abs(H_sel.conj() @ W) ** 2  # X[k, j] = |h_k^H w_j|^2
    sig = np.diagonal(X, axis1=-2, axis2=-1)
    interf = X.sum(axis=-1) - sig
    pw = P / s
    return np.log2(1.0 + pw * sig / (1.0 + pw * interf)).sum(axis=-1)


def zf_rates(H: np.ndarray, G: np.ndarray, P: float) -> np.ndarray:
    """Greedy selection on ``G`` then ZF transmission over the true ``H``."""
    N = H.shape[0]
    sel = greedy_zf(G, P)
    counts = (sel >= 0).sum(axis=-1)
    out = np.zeros(N)
    for s in np.unique(counts):
        if s == 0:
            continue
        idx = np.flatnonzero(counts == s)
        cols = sel[idx, :s]
        W = zf_beams(G[idx[:, None], cols])
        out[idx] = zf_sum_rate(H[idx[:, None], cols], W, P)
    return out


def zf_rvq_rates(H: np.ndarray, B: int, P: float, rng: np.random.Generator) -> np.ndarray:
    """ZF-RVQ frames using exact-distribution sampling of the quantized directions."""
    w_hat, _ = sample_rvq_quantization(H, B, rng)
    G = np.linalg.norm(H, axis=-1, keepdims=True) * w_hat
    return zf_rates(H, G, P)


# -- single-frame API --------------------------------------------------------


def rbf_frame(H: ChannelRealization, params: SystemParams, rng: np.random.Generator | None = None,
              beams: np.ndarray | None = None) -> float:
    """Random beamforming rate for one frame.

    ``beams`` (M, M) fixes the orthonormal basis; otherwise a Haar basis is
    drawn from ``rng``.
    """
    if H.K == 0:
        return 0.0
    W = haar_orthonormal(H.M, rng) if beams is None else np.asarray(beams, dtype=complex)
    return float(rbf_rates(H.H[None], W[None], params.P)[0])


def zf_rvq_feedback(H: ChannelRealization, params: SystemParams, rngs) -> list[FeedbackReport]:
    """Each user quantizes against its own RVQ codebook and reports ``|h|^2``.

    ``rngs`` is either a callable ``user -> Generator`` (one codebook stream
    per user) or a sequence of generators.
    """
    B = int(params.B)
    reports = []
    for k in range(H.K):
        rng = rngs(k) if callable(rngs) else rngs[k]
        C = build_rvq_codebook(B, H.M, rng, owner=k)
        h = H.H[k]
        q = quantize(h, C)
        reports.append(FeedbackReport(k, 0, q.index, float(np.vdot(h, h).real), C.codeword(q.index)))
    return reports


def greedy_select(reports: list[FeedbackReport], params: SystemParams) -> TransmitPlan:
    """Greedy ZF selection treating ``sqrt(scalar) * direction`` as the channel."""
    if not reports:
        raise ValueError("need at least one report")
    G = np.stack([np.sqrt(r.scalar) * np.asarray(r.direction) for r in reports])
    sel = greedy_zf(G[None], params.P)[0]
    cols = sel[sel >= 0]
    W = zf_beams(G[cols][None])[0]
    return TransmitPlan([reports[i].user for i in cols], W, params.P)


def zf_true_rate(H: ChannelRealization, plan: TransmitPlan) -> float:
    H_sel = H.H[plan.users]
    return float(zf_sum_rate(H_sel[None], plan.beams[None], plan.P)[0])


def purc_frame(H: ChannelRealization, params: SystemParams, rng: np.random.Generator | None = None,
               codebooks=None) -> float:
    """PU2RC rate for one frame; ``codebooks`` fixes the shared basis set."""
    if codebooks is None:
        codebooks = build_purc_codebooks(int(params.B), H.M, rng)
    if H.K == 0:
        return 0.0
    return float(purc_rates(H.H[None], codebooks.bases[None], params.P)[0])


def zf_perfect_csit_frame(H: ChannelRealization, P: float) -> float:
    return float(zf_rates(H.H[None], H.H[None], P)[0])


__all__ = [
    "ConfigError",
    "FeedbackReport",
    "SystemParams",
    "TransmitPlan",
    "greedy_select",
    "greedy_zf",
    "log2_int",
    "purc_frame",
    "purc_rates",
    "rbf_frame",
    "rbf_rates",
    "zf_perfect_csit_frame",
    "zf_rates",
    "zf_rvq_feedback",
    "zf_rvq_rates",
    "zf_true_rate",
]
