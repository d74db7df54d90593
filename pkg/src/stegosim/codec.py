"""Keyed codebooks, steganographic encoding, ML decoding and key accounting.

A codebook maps message indices to error strings that Alice applies to her
encoded covertext.  Two constructions are supported:

``iid``
    every codeword is drawn letter by letter from the emulation channel
    ``N_q`` using key-derived randomness (collisions are redrawn).
``partition``
    the typical set of ``N_q`` is enumerated, shuffled once by a permutation
    derived from the key seed, and cut into disjoint blocks of ``|M|``
    strings; each transmitted block picks one of them with key-derived
    randomness.  By default blocks are cut inside each type class and picked
    with probability proportional to their mass, so the key-and-message
    average applies every covered typical error with its true probability.
    ``stratified=False`` gives the plain variant (one global shuffle,
    uniformly chosen block).
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from .bounds import achievable_rate, emulation_entropy
from .pauli import (
    BITFLIP,
    PauliChannel,
    as_error,
    normalize_family,
    sample_errors,
    solve_intermediate,
)
from .typicality import (
    DEFAULT_TOL,
    ENUMERATION_CAP,
    TypicalSetSpec,
    enumerate_typical,
    pooled_counts,
    typical_size,
)

MODES = ("iid", "partition")
SECURE_LEVELS = ("none", "classical", "quantum")
MAX_MESSAGES = 2**24
CODEBOOK_FORMAT = "stegosim-codebook"
CODEBOOK_VERSION = 1


class InvalidMessageError(IndexError):
    pass


class RateExceedsTypicalSetError(ValueError):
    pass


class NegativeKeyError(ValueError):
    pass


@dataclass(frozen=True)
class SecretKeyStream:
    """Shared key material plus the index of the current block."""

    seed: bytes
    counter: int = 0

    def __post_init__(self):
        if len(self.seed) != 32:
            raise ValueError("key seed must be 32 bytes (256 bits)")
        if self.counter < 0:
            raise ValueError("key counter must be >= 0")

    @classmethod
    def from_hex(cls, text: str, counter: int = 0) -> "SecretKeyStream":
        text = text.lower().removeprefix("0x")
        if len(text) > 64:
            raise ValueError("key seed is longer than 256 bits")
        return cls(bytes.fromhex(text.rjust(64, "0")), counter)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(b"stegosim/fingerprint" + self.seed).hexdigest()[:16]

    def advance(self, steps: int = 1) -> "SecretKeyStream":
        if steps < 1:
            raise ValueError("the counter only moves forward")
        return SecretKeyStream(self.seed, self.counter + steps)

    def generator(self, purpose: str, per_block: bool = True) -> np.random.Generator:
        """Philox stream keyed by SHA-256 of (seed, counter, purpose)."""
        h = hashlib.sha256(self.seed)
        if per_block:
            h.update(self.counter.to_bytes(8, "big"))
        h.update(purpose.encode())
        key = np.frombuffer(h.digest()[:16], dtype="<u8")
        return np.random.Generator(np.random.Philox(key=key))


def message_count(n: int, rate: float) -> int:
    """``max(1, floor(2**(N*R)))``."""
    if rate <= 0:
        raise ValueError("rate must be > 0")
    exponent = n * rate
    if exponent > 62:
        return 2**62
    return max(1, math.floor(2.0**exponent * (1.0 + 1e-12)))


def _pack_planes(letters: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bit planes of a ``(M, N)`` letter array as ``(M, W)`` uint64 words."""
    m, n = letters.shape
    width = -(-n // 64) * 64
    out = []
    for plane in (letters & 1, letters >> 1):
        padded = np.zeros((m, width), dtype=np.uint8)
        padded[:, :n] = plane
        out.append(np.packbits(padded, axis=1, bitorder="little").view("<u8"))
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class Codebook:
    entries: np.ndarray  # (|M|, N) uint8
    family: str
    p: float
    dp: float
    mode: str
    tol: float
    key_fingerprint: str
    key_counter: int
    rate: Optional[float] = None
    subset_index: Optional[int] = None
    subset_count: Optional[int] = None
    stratified: Optional[bool] = None

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.uint8)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def __len__(self) -> int:
        return self.size

    @property
    def alphabet(self) -> int:
        return 2 if self.family == BITFLIP else 4

    @property
    def q(self) -> float:
        return solve_intermediate(self.family, self.p, self.p + self.dp)

    @property
    def physical(self) -> PauliChannel:
        return PauliChannel.of_family(self.family, self.p)

    @cached_property
    def planes(self) -> tuple[np.ndarray, np.ndarray]:
        return _pack_planes(self.entries)

    def same_as(self, other: "Codebook") -> bool:
        return self.header() == other.header() and np.array_equal(self.entries, other.entries)

    def header(self) -> dict:
        return {
            "family": self.family,
            "p": self.p,
            "dp": self.dp,
            "N": self.n,
            "rate": self.rate,
            "messages": self.size,
            "mode": self.mode,
            "tol": self.tol,
            "key_fingerprint": self.key_fingerprint,
            "key_counter": self.key_counter,
            "subset_index": self.subset_index,
            "subset_count": self.subset_count,
            "stratified": self.stratified,
        }

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        bits = 1 if self.alphabet == 2 else 2
        body = [base64.b16encode(_pack_letters(row, bits)).decode() for row in self.entries]
        doc = {"format": CODEBOOK_FORMAT, "version": CODEBOOK_VERSION, "header": self.header(),
               "codewords": body}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Codebook":
        doc = json.loads(text)
        if doc.get("format") != CODEBOOK_FORMAT:
            raise ValueError("not a codebook document")
        if doc.get("version") != CODEBOOK_VERSION:
            raise ValueError(f"unsupported codebook version {doc.get('version')!r}")
        hd = doc["header"]
        family = normalize_family(hd["family"])
        bits = 1 if family == BITFLIP else 2
        rows = [_unpack_letters(base64.b16decode(s), bits, hd["N"]) for s in doc["codewords"]]
        entries = np.array(rows, dtype=np.uint8).reshape(len(rows), hd["N"])
        if len(rows) != hd["messages"]:
            raise ValueError("codeword count does not match the header")
        return cls(
            entries=entries,
            family=family,
            p=hd["p"],
            dp=hd["dp"],
            mode=hd["mode"],
            tol=hd["tol"],
            key_fingerprint=hd["key_fingerprint"],
            key_counter=hd["key_counter"],
            rate=hd["rate"],
            subset_index=hd["subset_index"],
            subset_count=hd["subset_count"],
            stratified=hd.get("stratified"),
        )


def _pack_letters(row: np.ndarray, bits: int) -> bytes:
    if bits == 1:
        return np.packbits(row).tobytes()
    pairs = np.stack([(row >> 1) & 1, row & 1], axis=1).ravel()
    return np.packbits(pairs).tobytes()


def _unpack_letters(data: bytes, bits: int, n: int) -> np.ndarray:
    flat = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits == 1:
        return flat[:n]
    pairs = flat[: 2 * n].reshape(n, 2)
    return (pairs[:, 0] << 1) | pairs[:, 1]


def _emulation_channel(family: str, p: float, dp: float) -> PauliChannel:
    return PauliChannel.of_family(family, solve_intermediate(family, p, p + dp))


def _row_keys(rows: np.ndarray) -> np.ndarray:
    """Hashable key per row: packed bit planes, one void scalar per row."""
    p0, p1 = _pack_planes(rows)
    both = np.ascontiguousarray(np.concatenate([p0, p1], axis=1))
    return both.view(np.dtype((np.void, both.shape[1] * 8))).ravel()


def _iid_codewords(ch: PauliChannel, size: int, n: int, rng: np.random.Generator,
                   max_rounds: int = 200) -> np.ndarray:
    support = int(np.count_nonzero(ch.array)) ** n
    if size > support:
        raise RateExceedsTypicalSetError(f"{size} distinct codewords cannot fit in length {n}")
    rows = sample_errors(ch, size, n, rng)
    keys = _row_keys(rows)
    _, first = np.unique(keys, return_index=True)
    keep = np.zeros(size, dtype=bool)
    keep[first] = True
    seen = set(keys[first].tolist()) if len(first) < size else None
    # rejection: each collided slot is redrawn until it holds a fresh string
    for _ in range(max_rounds):
        holes = np.flatnonzero(~keep)
        if holes.size == 0:
            return rows
        draws = sample_errors(ch, holes.size, n, rng)
        for slot, row, key in zip(holes, draws, _row_keys(draws).tolist()):
            if key not in seen:
                seen.add(key)
                rows[slot] = row
                keep[slot] = True
    raise RateExceedsTypicalSetError(
        f"could not draw {size} distinct codewords from {ch!r}; lower the rate"
    )


@dataclass(frozen=True, eq=False)
class PartitionLayout:
    """Disjoint message blocks cut from the typical set of ``N_q``.

    ``weights`` is the probability with which the key selects each block.
    """

    blocks: np.ndarray  # (count, |M|, N)
    weights: np.ndarray  # (count,)
    typical_size: int
    stratified: bool

    @property
    def count(self) -> int:
        return self.blocks.shape[0]

    @property
    def covered(self) -> np.ndarray:
        return self.blocks.reshape(-1, self.blocks.shape[2])

    def covered_weights(self) -> np.ndarray:
        """Key-and-message averaged probability of each covered string."""
        m = self.blocks.shape[1]
        return np.repeat(self.weights / m, m)


@lru_cache(maxsize=32)
def _layout(seed: bytes, family: str, p: float, dp: float, n: int, tol: float, messages: int,
            stratified: bool, cap: int) -> PartitionLayout:
    emu = _emulation_channel(family, p, dp)
    typical = enumerate_typical(TypicalSetSpec(emu, n, tol), cap=cap)
    rng = SecretKeyStream(seed).generator("partition-order", per_block=False)
    if stratified:
        # blocks never mix type classes, so every block holds equiprobable strings
        counts, log2 = pooled_counts(typical, emu)
        classes, first = np.unique(counts, axis=0, return_index=True)
        blocks, weights = [], []
        for cls, lp in zip(classes, log2[first]):
            members = typical[(counts == cls).all(axis=1)]
            members = members[rng.permutation(len(members))]
            k = len(members) // messages
            if k:
                blocks.append(members[: k * messages].reshape(k, messages, n))
                weights.append(np.full(k, messages * 2.0 ** float(lp)))
        if not blocks:
            arr, w = np.zeros((0, messages, n), dtype=np.uint8), np.zeros(0)
        else:
            arr, w = np.concatenate(blocks), np.concatenate(weights)
            w = w / w.sum()
    else:
        shuffled = typical[rng.permutation(len(typical))]
        k = len(shuffled) // messages
        arr = shuffled[: k * messages].reshape(k, messages, n)
        w = np.full(k, 1.0 / k) if k else np.zeros(0)
    arr.setflags(write=False)
    w.setflags(write=False)
    return PartitionLayout(arr, w, len(typical), stratified)


def partition_layout(family: str, p: float, dp: float, n: int, messages: int,
                     key: SecretKeyStream, tol: float = DEFAULT_TOL, stratified: bool = True,
                     cap: int = ENUMERATION_CAP) -> PartitionLayout:
    """The fixed partition shared by Alice and Bob before any block is sent."""
    return _layout(key.seed, normalize_family(family), float(p), float(dp), int(n), float(tol),
                   int(messages), bool(stratified), cap)


def build_codebook(
    family: str,
    p: float,
    dp: float,
    n: int,
    key: SecretKeyStream,
    rate: Optional[float] = None,
    messages: Optional[int] = None,
    mode: str = "iid",
    tol: float = DEFAULT_TOL,
    stratified: bool = True,
    cap: int = ENUMERATION_CAP,
) -> Codebook:
    """Codebook for one transmitted block; exactly one of ``rate``/``messages``."""
    family = normalize_family(family)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if (rate is None) == (messages is None):
        raise ValueError("give exactly one of rate or messages")
    size = message_count(n, rate) if rate is not None else int(messages)
    if size < 1:
        raise ValueError("need at least one message")
    if size > MAX_MESSAGES:
        raise ValueError(f"{size} messages exceed the ML decoding limit of {MAX_MESSAGES}")
    emu = _emulation_channel(family, p, dp)
    common = dict(family=family, p=float(p), dp=float(dp), mode=mode, tol=float(tol),
                  key_fingerprint=key.fingerprint, key_counter=key.counter, rate=rate)
    if mode == "iid":
        entries = _iid_codewords(emu, size, n, key.generator("codebook-iid"))
        return Codebook(entries=entries, **common)
    layout = partition_layout(family, p, dp, n, size, key, tol, stratified, cap)
    if layout.count == 0:
        raise RateExceedsTypicalSetError(
            f"{size} messages do not fit in the {layout.typical_size} typical strings of N_q"
        )
    index = int(key.generator("partition-subset").choice(layout.count, p=layout.weights))
    return Codebook(entries=layout.blocks[index], subset_index=index,
                    subset_count=layout.count, stratified=stratified, **common)


def encode(cb: Codebook, m: int) -> np.ndarray:
    """Error string Alice applies for message ``m``."""
    if not 0 <= m < cb.size:
        raise InvalidMessageError(f"message {m} outside 0..{cb.size - 1}")
    return cb.entries[m].copy()


def _letter_log2(ch: PauliChannel) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log2(ch.promote().array)


def _popcount(words: np.ndarray) -> np.ndarray:
    c = np.bitwise_count(words)
    return c[:, 0].astype(np.int64) if c.shape[1] == 1 else c.sum(axis=1, dtype=np.int64)


def _weighted(counts, logp: float) -> np.ndarray:
    if logp > -math.inf:
        return counts * logp
    return np.where(counts > 0, -np.inf, 0.0)


def _differences(cb: Codebook, observed) -> tuple[np.ndarray, np.ndarray]:
    obs = as_error(observed)
    if len(obs) != cb.n:
        raise ValueError(f"observed length {len(obs)} != N={cb.n}")
    c0, c1 = cb.planes
    o0, o1 = _pack_planes(obs[None, :])
    return c0 ^ o0, c1 ^ o1


def _flip_weights(d0: np.ndarray, d1: np.ndarray, logp: list[float]):
    """Number of non-identity letters per codeword when the likelihood depends on it alone.

    Returns ``(weights, impossible)`` or ``None`` for a general Pauli channel.
    """
    if logp[1] == logp[2] == logp[3]:
        return _popcount(d0 | d1), None
    if logp[2] == logp[3] == -math.inf:
        impossible = d1.any(axis=1) if d1.any() else None
        return _popcount(d0), impossible
    return None


def log_likelihoods(cb: Codebook, observed, physical: PauliChannel) -> np.ndarray:
    """``log2 P_physical(observed (-) codeword)`` for every codeword."""
    d0, d1 = _differences(cb, observed)
    logp = [float(x) for x in _letter_log2(physical)]
    flips = _flip_weights(d0, d1, logp)
    if flips is not None:
        w, impossible = flips
        ll = _weighted(cb.n - w, logp[0]) + _weighted(w, logp[1])
        if impossible is not None:
            ll[impossible] = -np.inf
        return ll
    nx = _popcount(d0 & ~d1)
    ny = _popcount(~d0 & d1)
    nz = _popcount(d0 & d1)
    ll = _weighted(cb.n - nx - ny - nz, logp[0])
    for counts, lp in ((nx, logp[1]), (ny, logp[2]), (nz, logp[3])):
        ll = ll + _weighted(counts, lp)
    return ll


def decode_ml(cb: Codebook, observed, physical: PauliChannel) -> int:
    """Most likely message given the total error; ties go to the smallest index."""
    if cb.size == 1:
        return 0
    d0, d1 = _differences(cb, observed)
    logp = [float(x) for x in _letter_log2(physical)]
    flips = _flip_weights(d0, d1, logp)
    if flips is not None and flips[1] is None and math.isfinite(logp[0]) and math.isfinite(logp[1]):
        # log-likelihood is affine in the flip count, so rank by the count itself
        w = flips[0]
        if logp[1] < logp[0]:
            return int(np.argmin(w))
        if logp[1] > logp[0]:
            return int(np.argmax(w))
        return 0
    return int(np.argmax(log_likelihoods(cb, observed, physical)))


@dataclass(frozen=True)
class PartitionCount:
    log2_n: float  # N * (H(N_q) - achievable rate)
    messages: int
    typical_size: Optional[int] = None
    exact: Optional[int] = None  # floor(|T| / |M|)

    @property
    def n(self) -> float:
        return 2.0**self.log2_n


def partition_count(family: str, p: float, dp: float, n: int, tol: float = DEFAULT_TOL,
                    messages: Optional[int] = None, exact: bool = True) -> PartitionCount:
    """Number of key-selectable message blocks, asymptotic and (optionally) exact."""
    family = normalize_family(family)
    rate = achievable_rate(family, p, dp)
    per_use = emulation_entropy(family, p, dp) - rate
    if per_use < -1e-12:
        raise NegativeKeyError(
            f"achievable rate {rate:.6g} exceeds the emulation entropy; no valid partition"
        )
    per_use = max(per_use, 0.0)
    if messages is None:
        messages = message_count(n, rate) if rate > 0 else 1
    if not exact:
        return PartitionCount(n * per_use, messages)
    size = typical_size(TypicalSetSpec(_emulation_channel(family, p, dp), n, tol))
    return PartitionCount(n * per_use, messages, size, size // messages)


def key_bits_per_block(family: str, p: float, dp: float, n: int, secure: str = "none") -> float:
    """Key bits consumed per block, including any encryption surcharge."""
    if secure not in SECURE_LEVELS:
        raise ValueError(f"secure must be one of {SECURE_LEVELS}")
    k = partition_count(family, p, dp, n, exact=False).log2_n
    m = n * achievable_rate(family, p, dp)
    return k + {"none": 0.0, "classical": m, "quantum": 2.0 * m}[secure]
