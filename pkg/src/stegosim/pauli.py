"""Memoryless Pauli channels and error strings.

Error letters are small integers: ``I=0, X=1, Y=2, Z=3``.  With this labelling
the Pauli product modulo global phase is plain XOR (X*Y = Z -> 1^2 = 3), so
composing errors, dividing them out, and convolving channels all reduce to
XOR arithmetic on uint8 arrays.  Binary (bit-flip) channels use the first two
letters only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LETTERS = "IXYZ"
BITFLIP = "bitflip"
DEPOLARIZING = "depolarizing"
FAMILIES = (BITFLIP, DEPOLARIZING)

_FAMILY_ALIASES = {
    "bitflip": BITFLIP,
    "bit-flip": BITFLIP,
    "bf": BITFLIP,
    "depolarizing": DEPOLARIZING,
    "depolarising": DEPOLARIZING,
    "depol": DEPOLARIZING,
    "dc": DEPOLARIZING,
}

_PROB_ATOL = 1e-12


class ChannelDomainError(ValueError):
    """A channel parameter lies outside its valid domain."""


class SingularChannelError(ChannelDomainError):
    """The physical channel is at (or past) the point where emulation is singular."""


class NoValidEmulationError(ChannelDomainError):
    """The target channel is less noisy than the physical channel."""


def normalize_family(family: str) -> str:
    try:
        return _FAMILY_ALIASES[family.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown channel family {family!r}") from None


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ChannelDomainError(f"{name}={p} is not a probability")
    return p


def _xlog2x(p: float) -> float:
    return p * math.log2(p) if p > 0.0 else 0.0


def binary_entropy(p: float) -> float:
    """Binary entropy ``h(p)`` in bits, with ``0 log 0 = 0``."""
    p = _check_prob(p)
    return -_xlog2x(p) - _xlog2x(1.0 - p)


def depolarizing_entropy(q: float) -> float:
    """Shannon entropy of the Pauli distribution ``(1-q, q/3, q/3, q/3)`` in bits."""
    q = _check_prob(q, "q")
    return -_xlog2x(1.0 - q) - 3.0 * _xlog2x(q / 3.0)


def family_entropy(family: str, p: float) -> float:
    """``h`` for bit-flip, ``s`` for depolarizing."""
    if normalize_family(family) == BITFLIP:
        return binary_entropy(p)
    return depolarizing_entropy(p)


@dataclass(frozen=True)
class PauliChannel:
    """Probability vector over ``{I, X}`` (binary) or ``{I, X, Y, Z}``."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(x) for x in self.probs)
        if len(probs) not in (2, 4):
            raise ValueError("a Pauli channel needs 2 (I, X) or 4 (I, X, Y, Z) probabilities")
        for x in probs:
            if not (-_PROB_ATOL <= x <= 1.0 + _PROB_ATOL) or math.isnan(x):
                raise ChannelDomainError(f"probability {x} outside [0, 1]")
        if abs(sum(probs) - 1.0) > _PROB_ATOL:
            raise ChannelDomainError(f"probabilities sum to {sum(probs)!r}, not 1")
        probs = tuple(min(max(x, 0.0), 1.0) for x in probs)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bitflip(cls, p: float) -> "PauliChannel":
        p = _check_prob(p)
        return cls((1.0 - p, p))

    @classmethod
    def depolarizing(cls, p: float) -> "PauliChannel":
        p = _check_prob(p)
        return cls((1.0 - p, p / 3.0, p / 3.0, p / 3.0))

    @classmethod
    def identity(cls, alphabet: int = 2) -> "PauliChannel":
        return cls((1.0,) + (0.0,) * (alphabet - 1))

    @classmethod
    def of_family(cls, family: str, p: float) -> "PauliChannel":
        if normalize_family(family) == BITFLIP:
            return cls.bitflip(p)
        return cls.depolarizing(p)

    @property
    def alphabet(self) -> int:
        return len(self.probs)

    @property
    def is_binary(self) -> bool:
        return len(self.probs) == 2

    @property
    def error_probability(self) -> float:
        """Total probability of a non-identity letter (the family parameter)."""
        return 1.0 - self.probs[0]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def promote(self) -> "PauliChannel":
        """Quaternary form of this channel (no-op when already quaternary)."""
        if self.is_binary:
            return PauliChannel(self.probs + (0.0, 0.0))
        return self

    def entropy(self) -> float:
        """Single-letter Shannon entropy in bits."""
        return -sum(_xlog2x(x) for x in self.probs)

    def log2_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log2(self.array)

    def isclose(self, other: "PauliChannel", atol: float = 1e-12) -> bool:
        a, b = _common_alphabet(self, other)
        return bool(np.allclose(a.array, b.array, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        body = ", ".join(f"{LETTERS[i]}={x:.6g}" for i, x in enumerate(self.probs))
        return f"PauliChannel({body})"


def _common_alphabet(a: PauliChannel, b: PauliChannel) -> tuple[PauliChannel, PauliChannel]:
    if a.alphabet == b.alphabet:
        return a, b
    return a.promote(), b.promote()


def compose(a: PauliChannel, b: PauliChannel) -> PauliChannel:
    """Channel obtained by applying ``b`` then ``a`` (order is irrelevant)."""
    a, b = _common_alphabet(a, b)
    pa, pb = a.array, b.array
    k = np.arange(a.alphabet)
    out = np.zeros(a.alphabet)
    for i in range(a.alphabet):
        out[i ^ k] += pa[i] * pb
    return PauliChannel(tuple(out))


def compose_parameter(family: str, p: float, q: float) -> float:
    """Family parameter of ``N_p o N_q``: ``p+q-2pq`` or ``p+q-4pq/3``."""
    if normalize_family(family) == BITFLIP:
        return p + q - 2.0 * p * q
    return p + q - 4.0 * p * q / 3.0


def solve_intermediate(family: str, p_phys: float, p_target: float) -> float:
    """Parameter ``q`` of the emulation channel with ``N_p o N_q = N_target``."""
    family = normalize_family(family)
    p_phys = _check_prob(p_phys, "p_phys")
    p_target = _check_prob(p_target, "p_target")
    singular = 0.5 if family == BITFLIP else 0.75
    if p_phys >= singular:
        raise SingularChannelError(
            f"{family} emulation is singular for p_phys >= {singular} (got {p_phys})"
        )
    if p_target < p_phys:
        raise NoValidEmulationError(
            f"target {p_target} is less noisy than the physical channel {p_phys}"
        )
    dp = p_target - p_phys
    if family == BITFLIP:
        q = dp / (1.0 - 2.0 * p_phys)
    else:
        q = dp / (1.0 - 4.0 * p_phys / 3.0)
    if q > 1.0 + 1e-12:
        raise ChannelDomainError(f"emulation parameter q={q} exceeds 1")
    return min(q, 1.0)


# -- error strings ---------------------------------------------------------


def parse_error(text: str) -> np.ndarray:
    """``"IXYZ"`` (or ``"0110"``) -> uint8 letter array."""
    text = text.strip().upper()
    if text and set(text) <= set("01"):
        return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")
    try:
        return np.array([LETTERS.index(c) for c in text], dtype=np.uint8)
    except ValueError:
        raise ValueError(f"bad Pauli string {text!r}") from None


def format_error(e: Sequence[int]) -> str:
    return "".join(LETTERS[int(x)] for x in e)


def as_error(e: str | Iterable[int] | np.ndarray) -> np.ndarray:
    if isinstance(e, str):
        return parse_error(e)
    arr = np.asarray(e, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("an error string is one-dimensional")
    if arr.size and arr.max() > 3:
        raise ValueError("error letters must be in 0..3")
    return arr


def weight(e) -> int:
    """Number of non-identity letters."""
    return int(np.count_nonzero(as_error(e)))


def multiply(e1, e2) -> np.ndarray:
    """Letterwise Pauli product modulo phase.  Also its own inverse."""
    return np.bitwise_xor(as_error(e1), as_error(e2))


def _check_letters(ch: PauliChannel, e: np.ndarray) -> None:
    if e.size and int(e.max()) >= ch.alphabet:
        raise ValueError("error string uses letters outside the channel alphabet")


def string_probability(ch: PauliChannel, e) -> float:
    e = as_error(e)
    _check_letters(ch, e)
    counts = np.bincount(e, minlength=ch.alphabet)
    return math.prod(ch.probs[a] ** int(c) for a, c in enumerate(counts))


def product_distribution(ch: PauliChannel, n: int) -> np.ndarray:
    """Probabilities of all ``alphabet**n`` strings, index = base-A digits (first letter most significant)."""
    out = np.ones(1)
    for _ in range(n):
        out = np.multiply.outer(out, ch.array).ravel()
    return out


def sample_error(ch: PauliChannel, n: int, seed=None) -> np.ndarray:
    """Draw an i.i.d. error string.  ``seed`` may be an int or a ``numpy.random.Generator``."""
    if n < 1:
        raise ValueError("N must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sample_errors(ch, 1, n, rng)[0]


def sample_errors(ch: PauliChannel, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent strings as a ``(count, n)`` uint8 array."""
    u = rng.random((count, n))
    edges = np.cumsum(ch.array)[:-1]
    # never emit trailing zero-probability letters through rounding in cumsum
    last = int(np.flatnonzero(ch.array)[-1])
    edges[last:] = np.inf
    return np.searchsorted(edges, u, side="right").astype(np.uint8)
