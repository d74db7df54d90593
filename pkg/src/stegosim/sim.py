"""End-to-end Monte Carlo runs: encode, send through the physical channel, decode."""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
from scipy.stats import binomtest

from .bounds import achievable_rate
from .codec import (
    MAX_MESSAGES,
    MODES,
    Codebook,
    SecretKeyStream,
    build_codebook,
    decode_ml,
    key_bits_per_block,
    message_count,
)
from .pauli import PauliChannel, normalize_family, sample_errors, solve_intermediate
from .qecc import CodeError, SyndromeTable, get_code
from .secrecy import secrecy_deficit
from .typicality import DEFAULT_TOL

THREADS_ENV = "STEGOSIM_THREADS"
_CHUNK = 1024


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    p: float
    dp: float
    n: int
    trials: int
    seed: int = 0
    key_seed: str = "00"
    rate: Optional[float] = None
    messages: Optional[int] = None
    mode: str = "iid"
    tol: float = DEFAULT_TOL
    code: Optional[str] = None
    # trials per key block; 0 keeps one codebook for the whole run
    rekey_every: int = 1
    stratified: bool = True
    audit: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", normalize_family(self.family))
            solve_intermediate(self.family, self.p, self.p + self.dp)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dp < 0:
            raise ConfigError("dp must be >= 0")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n < 1:
            raise ConfigError("N must be >= 1")
        if (self.rate is None) == (self.messages is None):
            raise ConfigError("give exactly one of rate or messages")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.rekey_every < 0:
            raise ConfigError("rekey_every must be >= 0")
        if self.message_count > MAX_MESSAGES:
            raise ConfigError(
                f"{self.message_count} messages exceed the ML decoding limit of {MAX_MESSAGES}"
            )
        try:
            self.key()
        except ValueError as exc:
            raise ConfigError(f"bad key seed: {exc}") from None

    @property
    def message_count(self) -> int:
        if self.messages is not None:
            return int(self.messages)
        return message_count(self.n, self.rate)

    def key(self, counter: int = 0) -> SecretKeyStream:
        return SecretKeyStream.from_hex(self.key_seed, counter)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimReport:
    success_count: int
    trials: int
    success_rate: float
    ci_low: float
    ci_high: float
    key_bits: float
    erasures: Optional[int]
    secrecy_deficit: Optional[float]
    config: dict
    seed: int
    wall_clock: float = field(default=0.0, compare=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = asdict(self)
        if not include_timing:
            out.pop("wall_clock")
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True)


@dataclass
class TrialOutcomes:
    """Per-trial record, in trial order."""

    messages: np.ndarray
    decoded: np.ndarray
    erased: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        return (self.messages == self.decoded) & ~self.erased


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def thread_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return n


def _chunks(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    """(first trial, trial count, key counter) for each chunk; a chunk never spans two key blocks."""
    step = cfg.rekey_every or _CHUNK
    out = []
    for start in range(0, cfg.trials, step):
        count = min(step, cfg.trials - start)
        counter = start // cfg.rekey_every if cfg.rekey_every else 0
        out.append((start, count, counter))
    return out


def _codebook_for(cfg: ExperimentConfig, counter: int) -> Codebook:
    return build_codebook(
        cfg.family, cfg.p, cfg.dp, cfg.n, cfg.key(counter),
        messages=cfg.message_count, mode=cfg.mode, tol=cfg.tol, stratified=cfg.stratified,
    )


def _syndrome_table(cfg: ExperimentConfig) -> Optional[SyndromeTable]:
    if cfg.code is None:
        return None
    code = get_code(cfg.code)
    if cfg.n % code.n:
        raise CodeError(f"code length {code.n} does not divide N={cfg.n}")
    # Bob's table corrects the most likely errors of the channel Eve expects
    return SyndromeTable.build(code, PauliChannel.of_family(cfg.family, cfg.p + cfg.dp))


def _run_chunk(cfg: ExperimentConfig, start: int, count: int, counter: int,
               table: Optional[SyndromeTable]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cb = _codebook_for(cfg, counter)
    rng = np.random.default_rng([cfg.seed, start])
    physical = PauliChannel.of_family(cfg.family, cfg.p)
    msgs = rng.integers(cb.size, size=count)
    noise = sample_errors(physical, count, cfg.n, rng)
    totals = cb.entries[msgs] ^ noise
    decoded = np.empty(count, dtype=np.int64)
    erased = np.zeros(count, dtype=bool)
    for i, total in enumerate(totals):
        if table is not None:
            recovered = table.recover_blocks(total)
            if recovered is None:
                erased[i] = True
                decoded[i] = -1
                continue
            total = recovered
        decoded[i] = decode_ml(cb, total, physical)
    return msgs, decoded, erased


def run_outcomes(cfg: ExperimentConfig, threads: Optional[int] = None) -> TrialOutcomes:
    """Per-trial messages, decoded messages and erasure flags.  Pure in ``cfg``."""
    table = _syndrome_table(cfg)
    chunks = _chunks(cfg)
    threads = threads or thread_count()
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_chunk(cfg, *c, table), chunks))
    else:
        parts = [_run_chunk(cfg, *c, table) for c in chunks]
    return TrialOutcomes(
        messages=np.concatenate([x[0] for x in parts]),
        decoded=np.concatenate([x[1] for x in parts]),
        erased=np.concatenate([x[2] for x in parts]),
    )


def _key_bits(cfg: ExperimentConfig) -> float:
    blocks = math.ceil(cfg.trials / cfg.rekey_every) if cfg.rekey_every else 1
    if cfg.mode == "partition":
        cb = _codebook_for(cfg, 0)
        return blocks * math.log2(cb.subset_count)
    if achievable_rate(cfg.family, cfg.p, cfg.dp) == 0.0:
        return 0.0
    return blocks * key_bits_per_block(cfg.family, cfg.p, cfg.dp, cfg.n)


def _audit(cfg: ExperimentConfig) -> float:
    if cfg.mode == "partition":
        mode = "partition"
    else:
        mode = "exact" if cfg.rekey_every else "iid"
    report = secrecy_deficit(cfg.family, cfg.p, cfg.dp, cfg.n, mode, tol=cfg.tol,
                             key=cfg.key(), messages=cfg.message_count,
                             stratified=cfg.stratified)
    return report.deficit


def run_trials(cfg: ExperimentConfig, threads: Optional[int] = None) -> SimReport:
    """Monte Carlo success rate of the steganographic link for ``cfg``."""
    t0 = time.perf_counter()
    out = run_outcomes(cfg, threads)
    successes = int(out.correct.sum())
    lo, hi = wilson_interval(successes, cfg.trials)
    return SimReport(
        success_count=successes,
        trials=cfg.trials,
        success_rate=successes / cfg.trials,
        ci_low=lo,
        ci_high=hi,
        key_bits=_key_bits(cfg),
        erasures=int(out.erased.sum()) if cfg.code is not None else None,
        secrecy_deficit=_audit(cfg) if cfg.audit else None,
        config=cfg.to_dict(),
        seed=cfg.seed,
        wall_clock=time.perf_counter() - t0,
    )


def run_with_code(cfg: ExperimentConfig, code: str, threads: Optional[int] = None) -> SimReport:
    """As :func:`run_trials`, but Bob learns the total error only through syndromes of ``code``."""
    data = cfg.to_dict()
    data["code"] = code
    return run_trials(ExperimentConfig(**data), threads)
