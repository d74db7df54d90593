import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stegosim.codec import (
    Codebook,
    InvalidMessageError,
    RateExceedsTypicalSetError,
    SecretKeyStream,
    build_codebook,
    decode_ml,
    encode,
    key_bits_per_block,
    log_likelihoods,
    message_count,
    partition_count,
    partition_layout,
)
from stegosim.pauli import PauliChannel, solve_intermediate, string_probability
from stegosim.typicality import TypicalSetSpec, all_strings, is_typical

KEY = SecretKeyStream.from_hex("5eed")


def h2(x):
    x = mpmath.mpf(x)
    return -x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2)


def test_key_stream():
    a = KEY.generator("x").random(4)
    assert np.array_equal(a, SecretKeyStream.from_hex("5eed").generator("x").random(4))
    assert not np.array_equal(a, KEY.generator("y").random(4))
    assert not np.array_equal(a, KEY.advance().generator("x").random(4))
    assert KEY.advance(3).counter == 3
    assert SecretKeyStream.from_hex("0x5EED").seed == KEY.seed
    assert KEY.fingerprint != SecretKeyStream.from_hex("5eee").fingerprint
    with pytest.raises(ValueError):
        KEY.advance(0)
    with pytest.raises(ValueError):
        SecretKeyStream(b"short")
    with pytest.raises(ValueError):
        SecretKeyStream.from_hex("zz")


def test_message_count():
    assert message_count(10, 0.5) == 32
    assert message_count(24, 0.26) == math.floor(2 ** (24 * 0.26))
    assert message_count(3, 0.1) == 1
    with pytest.raises(ValueError):
        message_count(10, 0.0)


def test_partition_codebook_example():
    cb = build_codebook("bitflip", 0.1, 0.08, 20, KEY, messages=16, mode="partition", tol=0.3)
    assert cb.size == 16
    assert len({bytes(r) for r in cb.entries}) == 16
    spec = TypicalSetSpec(PauliChannel.bitflip(0.1), 20, 0.3)
    assert all(is_typical(r, spec) for r in cb.entries)


@pytest.mark.parametrize("family", ["bitflip", "depol"])
def test_iid_codebook_distinct_and_deterministic(family):
    cb = build_codebook(family, 0.05, 0.15, 12, KEY, rate=0.5)
    assert cb.size == 64
    assert len({bytes(r) for r in cb.entries}) == 64
    again = build_codebook(family, 0.05, 0.15, 12, KEY, rate=0.5)
    assert cb.same_as(again)
    other = build_codebook(family, 0.05, 0.15, 12, KEY.advance(), rate=0.5)
    assert not np.array_equal(cb.entries, other.entries)
    assert cb.entries.max() < cb.alphabet


def test_iid_codeword_letters_follow_emulation_channel():
    cb = build_codebook("depol", 0.1, 0.2, 40, KEY, messages=2000)
    q = solve_intermediate("depol", 0.1, 0.3)
    freq = np.bincount(cb.entries.ravel(), minlength=4) / cb.entries.size
    assert np.allclose(freq, PauliChannel.depolarizing(q).array, atol=0.01)


def test_too_many_messages():
    with pytest.raises(RateExceedsTypicalSetError):
        build_codebook("bitflip", 0.1, 0.08, 6, KEY, messages=60, mode="partition", tol=0.05)
    with pytest.raises(RateExceedsTypicalSetError):
        build_codebook("bitflip", 0.1, 0.08, 4, KEY, messages=17)


@pytest.mark.parametrize("stratified", [True, False])
def test_partition_blocks_disjoint_and_cover(stratified):
    m = 8
    layout = partition_layout("bitflip", 0.1, 0.1, 10, m, KEY, tol=0.3, stratified=stratified)
    flat = [bytes(r) for r in layout.covered]
    assert len(set(flat)) == len(flat)
    q = solve_intermediate("bitflip", 0.1, 0.2)
    spec = TypicalSetSpec(PauliChannel.bitflip(q), 10, 0.3)
    assert all(is_typical(np.frombuffer(r, dtype=np.uint8), spec) for r in flat)
    remainder = layout.typical_size - len(flat)
    assert remainder >= 0
    if stratified:
        assert remainder < m * len(spec.typical_types())
    else:
        assert remainder < m
        assert layout.count == layout.typical_size // m
    assert layout.weights.sum() == pytest.approx(1.0)


def test_stratified_weights_follow_mass():
    layout = partition_layout("bitflip", 0.1, 0.1, 10, 4, KEY, tol=0.3)
    q = solve_intermediate("bitflip", 0.1, 0.2)
    ch = PauliChannel.bitflip(q)
    mass = np.array([sum(string_probability(ch, r) for r in block) for block in layout.blocks])
    assert np.allclose(layout.weights, mass / mass.sum())


def test_partition_subset_depends_on_counter_only_through_index():
    a = build_codebook("bitflip", 0.1, 0.1, 10, KEY, messages=4, mode="partition", tol=0.3)
    layout = partition_layout("bitflip", 0.1, 0.1, 10, 4, KEY, tol=0.3)
    assert np.array_equal(a.entries, layout.blocks[a.subset_index])
    seen = {build_codebook("bitflip", 0.1, 0.1, 10, KEY.advance(k), messages=4, mode="partition",
                           tol=0.3).subset_index for k in range(1, 30)}
    assert len(seen) > 1


def test_encode_bounds():
    cb = build_codebook("bitflip", 0.1, 0.1, 8, KEY, messages=4)
    assert np.array_equal(encode(cb, 3), cb.entries[3])
    with pytest.raises(InvalidMessageError):
        encode(cb, 4)
    with pytest.raises(InvalidMessageError):
        encode(cb, -1)


def ml_oracle(cb, observed, ch):
    scores = np.array([string_probability(ch.promote() if cb.alphabet == 4 else ch, observed ^ c)
                       for c in cb.entries])
    # smallest index among the maxima, ignoring rounding in the products
    return int(np.flatnonzero(scores >= scores.max() * (1 - 1e-9))[0])


@pytest.mark.parametrize("family", ["bitflip", "depol"])
def test_decode_matches_brute_force(family):
    rng = np.random.default_rng(1)
    cb = build_codebook(family, 0.1, 0.15, 7, KEY, messages=12)
    for ch in (PauliChannel.of_family(family, 0.1), PauliChannel((0.6, 0.25, 0.0, 0.15)),
               PauliChannel.of_family(family, 0.45)):
        if cb.alphabet == 2 and ch.alphabet == 4 and ch.probs[2] + ch.probs[3] > 0:
            continue
        for _ in range(40):
            obs = rng.integers(0, cb.alphabet, 7).astype(np.uint8)
            assert decode_ml(cb, obs, ch) == ml_oracle(cb, obs, ch)
        ll = log_likelihoods(cb, obs, ch)
        with np.errstate(divide="ignore"):
            expected = [math.log2(x) if x > 0 else -math.inf for x in
                        (string_probability(ch.promote() if cb.alphabet == 4 else ch, obs ^ c) for c in cb.entries)]
        assert np.allclose(ll, expected)


def test_decode_noiseless_is_exact():
    cb = build_codebook("depol", 0.0, 0.3, 8, KEY, messages=50)
    for m in range(cb.size):
        assert decode_ml(cb, encode(cb, m), PauliChannel.depolarizing(0.0)) == m


def test_decode_wrong_length():
    cb = build_codebook("bitflip", 0.1, 0.1, 8, KEY, messages=4)
    with pytest.raises(ValueError):
        decode_ml(cb, np.zeros(7, dtype=np.uint8), PauliChannel.bitflip(0.1))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["bitflip", "depolarizing"]), st.integers(1, 70), st.integers(1, 20), st.integers(0, 99))
def test_json_round_trip(family, n, messages, counter):
    key = SecretKeyStream.from_hex("ab", counter)
    cb = build_codebook(family, 0.2, 0.2, n, key, messages=min(messages, 2**n))
    back = Codebook.from_json(cb.to_json())
    assert back.same_as(cb)
    assert back.to_json() == cb.to_json()


def test_json_rejects_garbage():
    with pytest.raises(ValueError):
        Codebook.from_json('{"format": "other"}')


def test_key_rate_value_against_high_precision():
    # q = 0.08 / 0.8 = 0.1; K/N = h(q) - (h(0.18) - h(0.1))
    expected = float(2 * h2("0.1") - h2("0.18"))
    assert partition_count("bitflip", 0.1, 0.08, 100, exact=False).log2_n / 100 == pytest.approx(expected, abs=1e-9)
    assert abs(expected - 0.257916) < 1e-4


def test_key_bits_surcharges():
    base = key_bits_per_block("bitflip", 0.1, 0.08, 100)
    rate_bits = 100 * float(h2("0.18") - h2("0.1"))
    assert key_bits_per_block("bitflip", 0.1, 0.08, 100, "classical") == pytest.approx(base + rate_bits)
    assert key_bits_per_block("bitflip", 0.1, 0.08, 100, "quantum") == pytest.approx(base + 2 * rate_bits)
    assert key_bits_per_block("bitflip", 0.0, 0.2, 50) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        key_bits_per_block("bitflip", 0.1, 0.08, 100, "paranoid")


@pytest.mark.parametrize("family,n,m,tol", [("bitflip", 12, 5, 0.2), ("depol", 5, 3, 0.3), ("bitflip", 9, 1, 0.1)])
def test_partition_count_exact(family, n, m, tol):
    pc = partition_count(family, 0.1, 0.1, n, tol=tol, messages=m)
    ch = PauliChannel.of_family(family, solve_intermediate(family, 0.1, 0.2))
    h = ch.entropy()
    size = 0
    for row in all_strings(n, ch.alphabet):
        pr = string_probability(ch, row)
        if pr > 0 and abs(-math.log2(pr) / n - h) <= tol + 1e-12:
            size += 1
    assert pc.typical_size == size
    assert pc.exact == size // m
