"""Monte Carlo harness: run frames, aggregate, sweep, locate the best B.

Trials are split into fixed blocks of :data:`~fbdiv.channel.BLOCK_SIZE`.
Every block draws from its own substreams and returns ``(count, mean, M2)``;
blocks are merged in block order, so results are bit-identical for any
worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import db_to_linear
from .channel import BLOCK_SIZE, SeedPolicy, StreamLabel, draw_channels, point_key
from .numerics import haar_orthonormal
from .quantizer import build_rvq_codebook, purc_codebook_count, quantize
from .schemes import (
    ConfigError,
    SystemParams,
    purc_rates,
    rbf_rates,
    zf_rates,
    zf_rvq_rates,
)

log = logging.getLogger(__name__)

RBF = "rbf"
ZF_RVQ = "zf-rvq"
PURC = "purc"
ZF_PERFECT = "zf-perfect"
SCHEMES = (RBF, ZF_RVQ, PURC, ZF_PERFECT)
SWEEP_AXES = ("B", "T", "P_dB")
RVQ_METHODS = ("statistical", "explicit")

DEFAULT_TRIALS = 10_000
PURC_EXTRA_BITS = 7
WORKERS_ENV = "FBDIV_WORKERS"

CSV_COLUMNS = ("scheme", "M", "P_dB", "T", "B", "K", "trials", "mean_rate", "stderr", "seed")

_ALIASES = {
    "zf_rvq": ZF_RVQ, "zfrvq": ZF_RVQ, "pu2rc": PURC, "zf_perfect": ZF_PERFECT,
    "perfect": ZF_PERFECT,
}


def normalize_scheme(name: str) -> str:
    key = name.strip().lower().replace(" ", "")
    key = _ALIASES.get(key, key)
    if key not in SCHEMES:
        raise ConfigError(f"scheme: unknown scheme {name!r} (choose from {', '.join(SCHEMES)})")
    return key


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment (or a sweep along one axis).

    ``B`` defaults to ``log2 M`` for RBF. ``users`` overrides ``floor(T/B)``;
    for the perfect-CSIT baseline it defaults to ``T`` (greedy ZF among a
    ``T``-user pool) unless ``B`` is given.
    """

    scheme: str
    M: int
    snr_db: float
    T: int
    B: float | None = None
    users: int | None = None
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    rvq_method: str = "statistical"

    def __post_init__(self):
        object.__setattr__(self, "scheme", normalize_scheme(self.scheme))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        if self.B is None and self.scheme in (RBF, ) and self.M >= 1:
            object.__setattr__(self, "B", math.log2(self.M))

    @property
    def P(self) -> float:
        return db_to_linear(self.snr_db)

    @property
    def params(self) -> SystemParams:
        users = self.users
        B = self.B
        if self.scheme == ZF_PERFECT and B is None:
            users = self.T if users is None else users
            B = self.T / users
        return SystemParams(self.M, self.P, self.T, B, users)

    @property
    def K(self) -> int:
        return self.params.K

    def validate(self) -> "ExperimentConfig":
        errors = []
        if not isinstance(self.M, int) or self.M < 1:
            errors.append(f"M: must be a positive integer, got {self.M!r}")
        if not isinstance(self.T, int) or self.T < 1:
            errors.append(f"T: must be a positive integer, got {self.T!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            errors.append(f"trials: must be >= 1, got {self.trials!r}")
        if not math.isfinite(self.snr_db):
            errors.append(f"snr_db: must be finite, got {self.snr_db!r}")
        if self.rvq_method not in RVQ_METHODS:
            errors.append(f"rvq_method: must be one of {RVQ_METHODS}, got {self.rvq_method!r}")
        if self.users is not None and self.users < 1:
            errors.append(f"users: must be >= 1, got {self.users!r}")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                errors.append(f"sweep_axis: must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
            elif not self.sweep_values:
                errors.append("sweep_values: empty list for sweep")
        if errors:
            raise ConfigError("; ".join(errors))
        if self.sweep_axis is None:
            self._validate_point()
        else:
            for pt in self.points():
                pt._validate_point()
        return self

    def _validate_point(self) -> None:
        if self.scheme != ZF_PERFECT and self.B is None:
            raise ConfigError(f"B: required for scheme {self.scheme}")
        p = self.params
        try:
            if self.scheme == ZF_RVQ:
                p.validate_zf_rvq()
            elif self.scheme == RBF:
                p.validate_rbf()
            elif self.scheme == PURC:
                p.validate_purc()
                if purc_codebook_count(int(p.B), p.M) > 1 << 16:
                    raise ConfigError(f"B={p.B} needs more than 2^16 PU2RC bases")
            elif not p.P > 0:
                raise ConfigError(f"P={p.P} must be positive")
        except ConfigError as exc:
            raise ConfigError(f"B: {exc}" if str(exc).startswith("B=") else str(exc)) from None
        if p.K < 1:
            raise ConfigError(f"T: budget {self.T} gives no users at B={p.B}")
        if self.scheme == ZF_RVQ and self.rvq_method == "explicit" and p.B > 30:
            raise ConfigError(f"B: explicit RVQ supports at most 30 bits, got {p.B}")

    def points(self) -> list["ExperimentConfig"]:
        if self.sweep_axis is None:
            return [self]
        field_name = {"B": "B", "T": "T", "P_dB": "snr_db"}[self.sweep_axis]
        out = []
        for v in self.sweep_values:
            if field_name == "T" or (field_name == "B" and float(v).is_integer()):
                v = int(v)
            out.append(dataclasses.replace(self, sweep_axis=None, sweep_values=(), **{field_name: v}))
        return out

    def point_key(self) -> int:
        p = self.params
        return point_key(self.scheme, p.M, repr(float(self.snr_db)), p.T, repr(float(p.B)), p.K, self.rvq_method)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweep_values"] = list(self.sweep_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        missing = [k for k in ("scheme", "M", "snr_db", "T") if k not in d]
        if missing:
            raise ConfigError(f"missing config field(s): {', '.join(missing)}")
        return cls(**d)


@dataclass(frozen=True)
class SimulationResult:
    mean_rate: float
    stderr: float
    trials: int
    config: ExperimentConfig
    wall_time: float = field(default=0.0, compare=False)

    def row(self) -> dict:
        p = self.config.params
        return {
            "scheme": self.config.scheme,
            "M": p.M,
            "P_dB": float(self.config.snr_db),
            "T": p.T,
            "B": int(p.B) if float(p.B).is_integer() else p.B,
            "K": p.K,
            "trials": self.trials,
            "mean_rate": self.mean_rate,
            "stderr": self.stderr,
            "seed": self.config.seed,
        }

    def summary(self) -> dict:
        return {"mean_rate": self.mean_rate, "stderr": self.stderr, "trials": self.trials,
                "config": self.config.to_dict()}


# -- frame evaluation ----------------------------------------------------------


def block_rates(config: ExperimentConfig, block: int) -> np.ndarray:
    """Per-trial sum rates for one block of ``config``'s trials."""
    n = min(BLOCK_SIZE, config.trials - block * BLOCK_SIZE)
    p = config.params
    seeds = SeedPolicy(config.seed, config.point_key())
    H = draw_channels(n, p.K, p.M, seeds.stream(block, StreamLabel.CHANNEL))
    if config.scheme == RBF:
        W = haar_orthonormal(p.M, seeds.stream(block, StreamLabel.RBF_BASIS), size=n)
        return rbf_rates(H, W, p.P)
    if config.scheme == PURC:
        G = purc_codebook_count(int(p.B), p.M)
        bases = haar_orthonormal(p.M, seeds.stream(block, StreamLabel.PURC_BASIS), size=n * G)
        return purc_rates(H, bases.reshape(n, G, p.M, p.M), p.P)
    if config.scheme == ZF_PERFECT:
        return zf_rates(H, H, p.P)
    if config.rvq_method == "explicit":
        return zf_rates(H, _explicit_rvq_estimates(H, int(p.B), seeds, block), p.P)
    return zf_rvq_rates(H, int(p.B), p.P, seeds.stream(block, StreamLabel.RVQ_ERROR))


def _explicit_rvq_estimates(H: np.ndarray, B: int, seeds: SeedPolicy, block: int) -> np.ndarray:
    # one codebook stream per user; trials of the block draw from it in order
    n, K, M = H.shape
    G = np.empty_like(H)
    for k in range(K):
        rng = seeds.stream(block, StreamLabel.RVQ_CODEBOOK + k)
        for t in range(n):
            C = build_rvq_codebook(B, M, rng, owner=k)
            q = quantize(H[t, k], C)
            G[t, k] = np.linalg.norm(H[t, k]) * C.codeword(q.index)
    return G


def _block_stats(args) -> tuple[int, float, float]:
    config, block = args
    r = block_rates(config, block)
    mean = float(r.mean())
    return r.size, mean, float(np.sum((r - mean) ** 2))


def _merge(a, b):
    # pairwise update of (count, mean, sum of squared deviations)
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * nb / n, sa + sb + d * d * na * nb / n


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run(config: ExperimentConfig, workers: int | None = None) -> SimulationResult:
    """Average the configured scheme's sum rate over ``config.trials`` frames."""
    config.validate()
    if config.sweep_axis is not None:
        raise ConfigError("sweep_axis: use sweep() for configs with a sweep axis")
    workers = default_workers() if workers is None else workers
    t0 = time.perf_counter()
    nblocks = -(-config.trials // BLOCK_SIZE)
    jobs = [(config, b) for b in range(nblocks)]
    if workers > 1 and nblocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_stats, jobs))
    else:
        parts = [_block_stats(j) for j in jobs]
    acc = parts[0]
    for part in parts[1:]:
        acc = _merge(acc, part)
    n, mean, m2 = acc
    stderr = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    res = SimulationResult(mean, stderr, n, config, time.perf_counter() - t0)
    log.debug("%s M=%d P=%gdB T=%d B=%s: %.4f +- %.4f (%.2fs)", config.scheme, config.M,
              config.snr_db, config.T, config.B, mean, stderr, res.wall_time)
    return res


def sweep(config: ExperimentConfig, workers: int | None = None) -> list[SimulationResult]:
    """One :func:`run` per value on the config's sweep axis."""
    config.validate()
    return [run(pt, workers) for pt in config.points()]


def zf_rvq_b_range(M: int, T: int) -> list[int]:
    return list(range(math.ceil(1 + math.log2(M) - 1e-12), T // M + 1))


@dataclass(frozen=True)
class BoptResult:
    """Empirical argmax of the sum rate over bits per user.

    ``band`` lists every B whose mean is within one standard error of the
    best mean (the standard error of the difference of the two means).
    """

    b_opt: int
    band: tuple[int, ...]
    results: tuple[SimulationResult, ...]

    @property
    def best(self) -> SimulationResult:
        return next(r for r in self.results if r.config.B == self.b_opt)

    def curve(self) -> list[tuple[int, float, float]]:
        return [(int(r.config.B), r.mean_rate, r.stderr) for r in self.results]


def argmax_band(results: list[SimulationResult]) -> BoptResult:
    best = max(results, key=lambda r: r.mean_rate)
    band = tuple(
        int(r.config.B) for r in results
        if best.mean_rate - r.mean_rate <= math.hypot(best.stderr, r.stderr)
    )
    return BoptResult(int(best.config.B), band, tuple(results))


def empirical_bopt(snr_db: float, M: int, T: int, trials: int = DEFAULT_TRIALS, seed: int = 0,
                   b_values=None, scheme: str = ZF_RVQ, workers: int | None = None) -> BoptResult:
    """Sweep B over the feasible range (or ``b_values``) and locate the best.

    For ZF-RVQ the default range is ``1 + log2 M .. T/M``. For PU2RC it is
    ``log2 M`` up to ``PURC_EXTRA_BITS`` extra bits or ``T/M``, whichever is
    smaller; past a few extra bits the shrinking user pool costs more rate
    than the extra bases add, while the work grows as ``2^B``.
    """
    scheme = normalize_scheme(scheme)
    if b_values is None:
        if scheme == ZF_RVQ:
            b_values = zf_rvq_b_range(M, T)
        elif scheme == PURC:
            lo = int(math.log2(M))
            b_values = list(range(lo, max(lo, min(lo + PURC_EXTRA_BITS, T // M)) + 1))
        else:
            raise ConfigError(f"scheme: empirical_bopt supports {ZF_RVQ} and {PURC}")
    if not b_values:
        raise ConfigError(f"B: empty feasible range for M={M}, T={T}")
    base = ExperimentConfig(scheme, M, snr_db, T, B=b_values[0], trials=trials, seed=seed,
                            sweep_axis="B", sweep_values=tuple(b_values))
    return argmax_band(sweep(base, workers))


# -- output ------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def results_to_csv(results: list[SimulationResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow({k: _fmt(v) for k, v in r.row().items()})
    return buf.getvalue()


def results_to_json(results: list[SimulationResult], **extra) -> str:
    doc = {"results": [r.summary() for r in results], **extra}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_config(path: str) -> dict:
    """Read a JSON config file into a plain dict of ExperimentConfig fields."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data
