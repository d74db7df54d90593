"""Weakly typical sets of i.i.d. Pauli error strings.

Every quantity here is computed through *type classes*: letters with equal
probability are pooled, and a type is the vector of counts per pool.  The
sample entropy of a string depends only on its type, so membership, total
mass and set size are exact sums over types.  Enumeration of the actual
strings is only done when ``alphabet**N`` fits under a cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np

from .pauli import PauliChannel, as_error

DEFAULT_TOL = 0.05
ENUMERATION_CAP = 2**24
# slack on the window edge; exact boundary types (e.g. weight 10 of 100 at
# p = 0.1) must be typical whichever summation order produced the entropy
_EDGE = 1e-12


class EnumerationTooLarge(RuntimeError):
    """The requested string space exceeds the enumeration cap."""


@dataclass(frozen=True)
class TypeClass:
    counts: tuple[int, ...]  # count per probability pool
    multiplicity: int  # number of strings of this type
    log2_prob: float  # log2 probability of one string of the type
    sample_entropy: float

    @property
    def log2_mass(self) -> float:
        if self.log2_prob == -math.inf:
            return -math.inf
        return math.log2(self.multiplicity) + self.log2_prob

    @property
    def mass(self) -> float:
        return 2.0 ** self.log2_mass if self.log2_prob > -math.inf else 0.0


class _Pools:
    """Grouping of alphabet letters by identical probability."""

    def __init__(self, ch: PauliChannel):
        values: list[float] = []
        letter_pool = []
        for x in ch.probs:
            if x not in values:
                values.append(x)
            letter_pool.append(values.index(x))
        self.values = tuple(values)
        self.sizes = tuple(letter_pool.count(g) for g in range(len(values)))
        self.letter_pool = np.array(letter_pool, dtype=np.intp)
        with np.errstate(divide="ignore"):
            self.log2 = tuple(math.log2(v) if v > 0 else -math.inf for v in values)

    def __len__(self) -> int:
        return len(self.values)

    def log2_prob(self, counts) -> float:
        terms = []
        for c, lp in zip(counts, self.log2):
            if c:
                if lp == -math.inf:
                    return -math.inf
                terms.append(c * lp)
        return math.fsum(terms)

    def counts_of(self, e: np.ndarray) -> tuple[int, ...]:
        pools = self.letter_pool[e]
        return tuple(int(x) for x in np.bincount(pools, minlength=len(self)))


def pooled_counts(strings: np.ndarray, ch: PauliChannel) -> tuple[np.ndarray, np.ndarray]:
    """Type of each row of ``strings`` and the log2 probability of that type's strings.

    Returns ``(counts, log2_prob)`` with ``counts`` shaped ``(rows, pools)``.
    """
    pools = _Pools(ch)
    pooled = pools.letter_pool[strings]
    counts = np.stack([(pooled == g).sum(axis=1) for g in range(len(pools))], axis=1)
    lp = np.array(pools.log2)
    finite = np.where(np.isfinite(lp), lp, 0.0)
    log2 = counts @ finite
    log2[(counts[:, ~np.isfinite(lp)] > 0).any(axis=1)] = -np.inf
    return counts, log2


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for tail in _compositions(n - head, parts - 1):
            yield (head,) + tail


def _sample_entropy_from_log2(log2_prob: float, n: int) -> float:
    return math.inf if log2_prob == -math.inf else -log2_prob / n


def sample_entropy(e, ch: PauliChannel) -> float:
    """``-(1/N) log2 P(e)``; ``inf`` for a string containing an impossible letter."""
    e = as_error(e)
    if e.size and int(e.max()) >= ch.alphabet:
        raise ValueError("error string uses letters outside the channel alphabet")
    pools = _Pools(ch)
    return _sample_entropy_from_log2(pools.log2_prob(pools.counts_of(e)), len(e))


@dataclass(frozen=True)
class TypicalSetSpec:
    channel: PauliChannel
    n: int
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("N must be >= 1")
        if not self.tol > 0:
            raise ValueError("typicality tolerance must be > 0")

    @cached_property
    def entropy(self) -> float:
        return self.channel.entropy()

    @cached_property
    def _pools(self) -> _Pools:
        return _Pools(self.channel)

    def admits(self, entropy: float) -> bool:
        return abs(entropy - self.entropy) <= self.tol + _EDGE

    def type_classes(self) -> Iterator[TypeClass]:
        """All type classes of length-N strings (including non-typical ones)."""
        pools, n = self._pools, self.n
        for counts in _compositions(n, len(pools)):
            mult = _multinomial(counts) * math.prod(s**c for s, c in zip(pools.sizes, counts))
            lp = pools.log2_prob(counts)
            yield TypeClass(counts, mult, lp, _sample_entropy_from_log2(lp, n))

    def typical_types(self) -> list[TypeClass]:
        return [t for t in self.type_classes() if self.admits(t.sample_entropy)]


def _multinomial(counts) -> int:
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def is_typical(e, spec: TypicalSetSpec) -> bool:
    e = as_error(e)
    if len(e) != spec.n:
        raise ValueError(f"string length {len(e)} != N={spec.n}")
    return spec.admits(sample_entropy(e, spec.channel))


def typical_mass(spec: TypicalSetSpec) -> float:
    """Exact probability of the typical set, summed over type classes."""
    return math.fsum(t.mass for t in spec.typical_types())


def typical_size(spec: TypicalSetSpec) -> int:
    """Exact number of typical strings."""
    return sum(t.multiplicity for t in spec.typical_types())


def _decode_indices(idx: np.ndarray, n: int, alphabet: int) -> np.ndarray:
    bits = 1 if alphabet == 2 else 2
    shifts = (bits * np.arange(n - 1, -1, -1)).astype(np.int64)
    return ((idx[:, None] >> shifts[None, :]) & (alphabet - 1)).astype(np.uint8)


def all_strings(n: int, alphabet: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Every string of length ``n`` in lexicographic order, as a ``(A**n, n)`` array."""
    if alphabet**n > cap:
        raise EnumerationTooLarge(f"{alphabet}^{n} strings exceed the cap of {cap}")
    return _decode_indices(np.arange(alphabet**n, dtype=np.int64), n, alphabet)


def enumerate_typical(
    spec: TypicalSetSpec, cap: int = ENUMERATION_CAP, chunk: int = 1 << 18
) -> np.ndarray:
    """All typical strings, lexicographically ordered, as a ``(|T|, N)`` uint8 array."""
    n, alphabet = spec.n, spec.channel.alphabet
    total = alphabet**n
    if total > cap:
        raise EnumerationTooLarge(f"{alphabet}^{n} strings exceed the cap of {cap}")
    pools = spec._pools
    g = len(pools)
    radix = n + 1
    table = np.zeros(radix**g, dtype=bool)
    for t in spec.typical_types():
        key = 0
        for c in t.counts:
            key = key * radix + c
        table[key] = True
    out = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        letters = _decode_indices(idx, n, alphabet)
        pooled = pools.letter_pool[letters]
        key = np.zeros(len(idx), dtype=np.int64)
        for j in range(g):
            key = key * radix + (pooled == j).sum(axis=1)
        out.append(letters[table[key]])
    return np.concatenate(out) if out else np.zeros((0, n), dtype=np.uint8)
