"""What Eve sees: induced error distributions and their distance to the expected channel.

Pauli codewords averaged over key and message, followed by a Pauli channel,
give a state that is diagonal in the same error basis as the state Eve
expects, so the trace distance between the two equals the total-variation
distance between two classical distributions over error strings.  All exact
computations below work on those distributions.

Large blocks are handled through the weight statistic (number of
non-identity letters).  For key-averaged constructions the induced
distribution depends on a string only through its weight, so nothing is
lost; for a specific codebook the weight marginal only lower-bounds the
true distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom, binomtest

from .bounds import achievable_rate
from .codec import (
    Codebook,
    SecretKeyStream,
    build_codebook,
    log_likelihoods,
    message_count,
    partition_layout,
)
from .pauli import (
    BITFLIP,
    PauliChannel,
    normalize_family,
    product_distribution,
    sample_errors,
    solve_intermediate,
)
from .typicality import DEFAULT_TOL, ENUMERATION_CAP, TypicalSetSpec

AUDIT_MODES = ("exact", "partition", "iid", "single")
DEFAULT_THRESHOLD = 0.05
DEFAULT_KEY = SecretKeyStream(bytes(32))


@dataclass(frozen=True, eq=False)
class InducedDistribution:
    """Distribution over all strings (``support="strings"``) or over weights 0..N."""

    probs: np.ndarray
    support: str
    n: int
    alphabet: int
    construction: str

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        expected = self.alphabet**self.n if self.support == "strings" else self.n + 1
        if probs.shape != (expected,):
            raise ValueError(f"expected {expected} probabilities, got {probs.shape}")
        if abs(probs.sum() - 1.0) > 1e-10 or (probs < -1e-15).any():
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", probs)

    def weight_marginal(self) -> "InducedDistribution":
        if self.support == "weight":
            return self
        weights = _string_weights(self.n, self.alphabet)
        marg = np.bincount(weights, weights=self.probs, minlength=self.n + 1)
        return InducedDistribution(marg, "weight", self.n, self.alphabet, self.construction)


def _string_weights(n: int, alphabet: int) -> np.ndarray:
    w = np.zeros(1, dtype=np.int64)
    letter = (np.arange(alphabet) > 0).astype(np.int64)
    for _ in range(n):
        w = (w[:, None] + letter[None, :]).ravel()
    return w


def string_index(rows: np.ndarray, alphabet: int) -> np.ndarray:
    """Position of each row in the lexicographic list of all strings."""
    rows = np.atleast_2d(rows)
    bits = 1 if alphabet == 2 else 2
    out = np.zeros(len(rows), dtype=np.int64)
    for j in range(rows.shape[1]):
        out = (out << bits) | rows[:, j].astype(np.int64)
    return out


def convolve_channel(dist: np.ndarray, ch: PauliChannel, n: int) -> np.ndarray:
    """Distribution of ``E (x) F`` for ``E ~ dist`` and ``F ~ ch^{(x)n}``."""
    a = ch.alphabet
    mix = np.array([[ch.probs[i ^ j] for j in range(a)] for i in range(a)])
    t = np.asarray(dist, dtype=float).reshape((a,) * n)
    for axis in range(n):
        t = np.moveaxis(np.tensordot(mix, t, axes=([1], [axis])), 0, axis)
    return t.ravel()


def _weight_kernel(family: str, p: float) -> tuple[float, float]:
    """(probability a codeword error is cancelled, probability an identity slot is hit)."""
    return (p, p) if family == BITFLIP else (p / 3.0, p)


def convolve_weights(weights: np.ndarray, family: str, p: float, n: int) -> np.ndarray:
    """Weight distribution of ``E (x) F`` from the weight distribution of ``E``."""
    cancel, hit = _weight_kernel(family, p)
    out = np.zeros(n + 1)
    for w in np.flatnonzero(weights > 0):
        kept = binom.pmf(np.arange(w + 1), w, 1.0 - cancel)
        added = binom.pmf(np.arange(n - w + 1), n - w, hit)
        out += weights[w] * np.convolve(kept, added)
    return out


def expected_distribution(family: str, p_total: float, n: int, support: str = "strings") -> InducedDistribution:
    """``N_{p+dp}^{(x)N}``, the distribution Eve expects."""
    family = normalize_family(family)
    ch = PauliChannel.of_family(family, p_total)
    if support == "strings":
        return InducedDistribution(product_distribution(ch, n), "strings", n, ch.alphabet, "exact-enumeration")
    probs = binom.pmf(np.arange(n + 1), n, p_total)
    return InducedDistribution(probs / probs.sum(), "weight", n, ch.alphabet, "type-class")


def tv_distance(d1: InducedDistribution, d2: InducedDistribution) -> float:
    """Total-variation distance ``(1/2) sum |d1 - d2|``."""
    if (d1.support, d1.n, d1.alphabet) != (d2.support, d2.n, d2.alphabet):
        raise ValueError("distributions live on different supports")
    return float(0.5 * np.abs(d1.probs - d2.probs).sum())


def _codeword_average(family, p, dp, n, mode, tol, key, messages, codebook, stratified, cap):
    """Strings and weights of the key-and-message averaged codeword."""
    if codebook is not None:
        return codebook.entries, np.full(codebook.size, 1.0 / codebook.size)
    if mode == "partition":
        layout = partition_layout(family, p, dp, n, messages, key, tol, stratified, cap)
        if layout.count == 0:
            raise ValueError("no complete message block fits in the typical set")
        return layout.covered, layout.covered_weights()
    size = 1 if mode == "single" else messages
    cb = build_codebook(family, p, dp, n, key, messages=size, mode="iid")
    return cb.entries, np.full(cb.size, 1.0 / cb.size)


def induced_distribution(
    family: str,
    p: float,
    dp: float,
    n: int,
    codebook_mode: str = "exact",
    tol: float = DEFAULT_TOL,
    key: SecretKeyStream = DEFAULT_KEY,
    messages: Optional[int] = None,
    codebook: Optional[Codebook] = None,
    stratified: bool = True,
    support: Optional[str] = None,
    cap: int = ENUMERATION_CAP,
) -> InducedDistribution:
    """Distribution of the total error ``F (x) E(k, m)`` seen on the channel.

    ``codebook_mode``:
      ``exact``      key-averaged i.i.d. codebooks, i.e. codewords ~ ``N_q``
      ``partition``  key-averaged partition codebooks
      ``iid``        one key-derived i.i.d. codebook (messages averaged)
      ``single``     one fixed codeword
    An explicit ``codebook`` overrides the mode.
    """
    family = normalize_family(family)
    if codebook_mode not in AUDIT_MODES:
        raise ValueError(f"codebook_mode must be one of {AUDIT_MODES}")
    q = solve_intermediate(family, p, p + dp)
    phys = PauliChannel.of_family(family, p)
    alphabet = phys.alphabet
    if messages is None:
        rate = achievable_rate(family, p, dp)
        messages = message_count(n, rate) if rate > 0 else 1
    if support is None:
        support = "strings" if alphabet**n <= cap else "weight"

    if codebook is None and codebook_mode == "exact":
        if support == "strings":
            avg = product_distribution(PauliChannel.of_family(family, q), n)
            probs = convolve_channel(avg, phys, n)
            return InducedDistribution(probs, "strings", n, alphabet, "exact-enumeration")
        cw = binom.pmf(np.arange(n + 1), n, q)
        return InducedDistribution(convolve_weights(cw, family, p, n), "weight", n, alphabet, "type-class")

    if support == "weight" and codebook is None and codebook_mode == "partition" and alphabet**n > cap:
        # partition too large to enumerate: its remainder-free limit, P_q restricted to the typical set
        spec = TypicalSetSpec(PauliChannel.of_family(family, q), n, tol)
        cw = np.zeros(n + 1)
        for w in range(n + 1):
            log2_prob = _weight_log2_prob(n, w, q, alphabet)
            if log2_prob > -math.inf and spec.admits(-log2_prob / n):
                cw[w] = binom.pmf(w, n, q)
        cw /= cw.sum()
        probs = convolve_weights(cw, family, p, n)
        return InducedDistribution(probs, "weight", n, alphabet, "type-class")

    strings, weights = _codeword_average(family, p, dp, n, codebook_mode, tol, key, messages,
                                         codebook, stratified, cap)
    if support == "strings":
        avg = np.zeros(alphabet**n)
        np.add.at(avg, string_index(strings, alphabet), weights)
        probs = convolve_channel(avg, phys, n)
        return InducedDistribution(probs, "strings", n, alphabet, "exact-enumeration")
    cw = np.bincount(np.count_nonzero(strings, axis=1), weights=weights, minlength=n + 1)
    probs = convolve_weights(cw, family, p, n)
    return InducedDistribution(probs, "weight", n, alphabet, "weight-marginal")


def _weight_log2_prob(n: int, w: int, q: float, alphabet: int) -> float:
    """log2 probability of one weight-``w`` string under the family channel ``N_q``."""
    terms = []
    for count, prob in ((n - w, 1.0 - q), (w, q / (alphabet - 1))):
        if count:
            if prob <= 0.0:
                return -math.inf
            terms.append(count * math.log2(prob))
    return math.fsum(terms)


# -- Eve's hypothesis test -------------------------------------------------


@dataclass(frozen=True)
class AdvantageEstimate:
    advantage: float
    ci_low: float
    ci_high: float
    trials: int
    correct: int


def eve_advantage(p: float, dp: float, n: int, codebook: Codebook, trials: int,
                  seed: int = 0) -> AdvantageEstimate:
    """Monte Carlo estimate of the optimal distinguishing advantage against ``codebook``.

    Each trial flips a fair coin between "expected channel" and "stego
    traffic", draws a total error accordingly, and applies the
    likelihood-ratio test.  ``2 * accuracy - 1`` estimates the TV distance.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    family = codebook.family
    rng = np.random.default_rng(seed)
    phys = PauliChannel.of_family(family, p)
    expected = PauliChannel.of_family(family, p + dp)
    is_stego = rng.random(trials) < 0.5
    cover = sample_errors(expected, trials, n, rng)
    noise = sample_errors(phys, trials, n, rng)
    msgs = rng.integers(codebook.size, size=trials)
    samples = np.where(is_stego[:, None], codebook.entries[msgs] ^ noise, cover)

    with np.errstate(divide="ignore"):
        logp_exp = np.log(expected.promote().array)
    correct = 0
    for t, stego in zip(samples, is_stego):
        counts = np.bincount(t, minlength=4)
        used = counts > 0
        ll0 = float(np.sum(counts[used] * logp_exp[used]))
        ll1 = float(logsumexp(log_likelihoods(codebook, t, phys) * math.log(2.0))) - math.log(codebook.size)
        guess_stego = ll1 > ll0
        correct += int(guess_stego == stego)
    ci = binomtest(correct, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return AdvantageEstimate(
        advantage=2.0 * correct / trials - 1.0,
        ci_low=float(2.0 * ci.low - 1.0),
        ci_high=float(2.0 * ci.high - 1.0),
        trials=trials,
        correct=correct,
    )


# -- audit -----------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    config: dict
    N: int
    mode: str
    deficit: float
    ci_low: float
    ci_high: float
    verdict: str
    method: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def secrecy_deficit(
    family: str,
    p: float,
    dp: float,
    n: int,
    mode: str = "partition",
    tol: float = DEFAULT_TOL,
    key: SecretKeyStream = DEFAULT_KEY,
    messages: Optional[int] = None,
    codebook: Optional[Codebook] = None,
    stratified: bool = True,
    exact: Optional[bool] = None,
    trials: Optional[int] = None,
    seed: int = 0,
    threshold: float = DEFAULT_THRESHOLD,
    cap: int = ENUMERATION_CAP,
) -> AuditReport:
    """Distance between what Eve observes and what she expects.

    Exact over all strings when enumerable (or when ``exact=True``);
    otherwise exact on the weight statistic, which is the full answer for
    key-averaged modes and a lower bound for a specific codebook.  In the
    lower-bound case ``trials`` adds a Monte Carlo likelihood-ratio estimate.
    """
    family = normalize_family(family)
    alphabet = 2 if family == BITFLIP else 4
    enumerable = alphabet**n <= cap
    if exact and not enumerable:
        raise ValueError(f"{alphabet}^{n} strings exceed the enumeration cap")
    support = "strings" if (exact or (exact is None and enumerable)) else "weight"
    if messages is None:
        rate = achievable_rate(family, p, dp)
        messages = message_count(n, rate) if rate > 0 else 1
    config = {"family": family, "p": p, "dp": dp, "tol": tol, "messages": messages,
              "stratified": stratified, "key_fingerprint": key.fingerprint}

    induced = induced_distribution(family, p, dp, n, mode, tol, key, messages, codebook,
                                   stratified, support, cap)
    target = expected_distribution(family, p + dp, n, support)
    deficit = tv_distance(induced, target)
    method = induced.construction
    lo = hi = deficit
    if method == "weight-marginal":
        # the weight statistic only bounds the full distance from below
        hi = 1.0
        if trials:
            cb = codebook
            if cb is None:
                cb = build_codebook(family, p, dp, n, key,
                                    messages=1 if mode == "single" else messages)
            est = eve_advantage(p, dp, n, cb, trials, seed)
            deficit = max(deficit, est.advantage)
            lo = max(lo, est.ci_low)
            hi = max(deficit, min(1.0, est.ci_high))
            method = "monte-carlo"
    verdict = "SECURE" if deficit <= threshold else "INSECURE"
    return AuditReport(config, n, mode, deficit, lo, hi, verdict, method)
