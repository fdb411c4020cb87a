"""Closed-form approximate ZF-RVQ throughput and its optimal bits per user.

The approximate sum rate with ``T/B`` users each sending ``B`` bits is::

    R(B) = M log2(x) - M log2(1 + x 2^(-B/(M-1))),   x = (P/M) log2(T/B)

The first term is the multiuser-diversity rate of ZF with perfect CSIT and
the second the loss from quantization error. Dropping constants gives the
objective maximized over ``B``::

    f(B) = log2(log2(T/B)) - log2(1 + (P/M) log2(T/B) 2^(-B/(M-1)))

so ``f(B) = R(B)/M - log2(P/M)`` and both share an argmax.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class DomainError(ValueError):
    """The approximation is undefined at this point."""


def db_to_linear(p_db: float) -> float:
    return 10.0 ** (p_db / 10.0)


def linear_to_db(p: float) -> float:
    return 10.0 * math.log10(p)


def feasible_range(M: int, T: float) -> tuple[float, float]:
    """Continuous range ``[1 + log2 M, T/M]`` of bits per user for ZF-RVQ."""
    return 1.0 + math.log2(M), T / M


def _check(M: int, T: float, B: float) -> float:
    if M < 2:
        raise DomainError("the approximation needs M >= 2")
    if B <= 0 or T / B <= 1:
        raise DomainError(f"T/B={T / B if B > 0 else float('nan'):g} must exceed 1")
    return math.log2(T / B)


def diversity_term(P: float, M: int, T: float, B: float) -> float:
    x = P / M * _check(M, T, B)
    if x <= 1:
        raise DomainError(f"(P/M) log2(T/B)={x:g} must exceed 1")
    return M * math.log2(x)


def loss_term(P: float, M: int, T: float, B: float) -> float:
    x = P / M * _check(M, T, B)
    return M * math.log2(1.0 + x * 2.0 ** (-B / (M - 1)))


def rate_approx(P: float, M: int, T: float, B: float) -> float:
    """Approximate ZF-RVQ sum rate in bits/s/Hz.

    Raises
    ------
    DomainError
        When ``T/B <= 1`` or ``(P/M) log2(T/B) <= 1``.
    """
    return diversity_term(P, M, T, B) - loss_term(P, M, T, B)


def objective(P: float, M: int, T: float, B: float) -> float:
    """The B-dependent part of :func:`rate_approx` divided by M.

    Defined whenever ``T/B > 1``, which is wider than the domain of
    :func:`rate_approx` at low SNR.
    """
    L = _check(M, T, B)
    return math.log2(L) - math.log2(1.0 + P / M * L * 2.0 ** (-B / (M - 1)))


def objective_derivative(P: float, M: int, T: float, B: float) -> float:
    """Exact ``d objective / dB`` in closed form."""
    ln2 = math.log(2.0)
    L = _check(M, T, B)
    dL = -1.0 / (B * ln2)
    q = 2.0 ** (-B / (M - 1))
    dq = -q * ln2 / (M - 1)
    c = P / M
    return dL / (L * ln2) - c * (dL * q + L * dq) / ((1.0 + c * L * q) * ln2)


def stationarity_lhs(P: float, M: int, T: float, B: float) -> float:
    """Left side of the small-interference first-order condition.

    ``(P / (M (M-1))) 2^(-B/(M-1)) B ln(T/B)^2``, which equals 1 near the
    optimum when the quantization loss is small. Diagnostic only.
    """
    return P / (M * (M - 1)) * 2.0 ** (-B / (M - 1)) * B * math.log(T / B) ** 2


def bopt_bruteforce(P: float, M: int, T: float) -> int:
    """Integer maximizer of :func:`objective` over the feasible range.

    Ties go to the smaller ``B``; points outside the domain are skipped.
    """
    lo, hi = feasible_range(M, T)
    best_b, best_v = None, -math.inf
    for b in range(math.ceil(lo - 1e-12), math.floor(hi + 1e-12) + 1):
        try:
            v = objective(P, M, T, b)
        except DomainError:
            continue
        if v > best_v:
            best_b, best_v = b, v
    if best_b is None:
        raise DomainError(f"empty feasible range for M={M}, T={T}")
    return best_b


@dataclass(frozen=True)
class StationaryPoint:
    """Continuous optimum of :func:`objective`.

    ``boundary`` is set when the derivative has no sign change on the
    feasible range and ``b`` is the better endpoint instead of a root.
    """

    b: float
    boundary: bool = False

    def __float__(self) -> float:
        return self.b

    def __round__(self, ndigits=None):
        return round(self.b, ndigits)


def bopt_stationary(P: float, M: int, T: float, tol: float = 1e-10) -> StationaryPoint:
    """Root of the exact first-order condition of :func:`objective`.

    A coarse scan brackets the first sign change of the derivative from
    positive to negative; bisection then narrows it to ``tol`` (absolute,
    in bits).
    """
    lo, hi = feasible_range(M, T)
    if lo > hi + 1e-12:
        raise DomainError(f"empty feasible range for M={M}, T={T}")
    if hi - lo < 1e-12:
        return StationaryPoint(lo, True)
    grid = np.linspace(lo, hi, max(64, int(4 * (hi - lo)) + 1))
    d = np.array([objective_derivative(P, M, T, b) for b in grid])
    crossings = np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0))
    if crossings.size == 0:
        f_lo = objective(P, M, T, lo)
        f_hi = objective(P, M, T, hi)
        return StationaryPoint(float(lo if f_lo >= f_hi else hi), True)
    a, b = grid[crossings[0]], grid[crossings[0] + 1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if objective_derivative(P, M, T, mid) > 0:
            a = mid
        else:
            b = mid
    return StationaryPoint(float(0.5 * (a + b)))


SCALING_COLUMNS = ("M", "P_dB", "T", "B_hat", "B_brute", "objective_value")


def scaling_study(p_db_values: Iterable[float], m_values: Iterable[int], t_values: Iterable[float]) -> list[dict]:
    """Tabulate the analytic optimum over a grid of SNR, antennas and budget."""
    rows = []
    for M in m_values:
        for p_db in p_db_values:
            P = db_to_linear(p_db)
            for T in t_values:
                st = bopt_stationary(P, M, T)
                brute = bopt_bruteforce(P, M, T)
                rows.append({
                    "M": M,
                    "P_dB": p_db,
                    "T": T,
                    "B_hat": st.b,
                    "B_brute": brute,
                    "objective_value": objective(P, M, T, st.b),
                })
    return rows


def rows_to_csv(rows: list[dict], columns=SCALING_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items() if k in columns})
    return buf.getvalue()
