import math

import numpy as np
import pytest

from stegosim.codec import SecretKeyStream, build_codebook
from stegosim.pauli import PauliChannel, product_distribution
from stegosim.qecc import CodeError, SyndromeTable, get_code
from stegosim.sim import (
    ConfigError,
    ExperimentConfig,
    run_outcomes,
    run_trials,
    run_with_code,
    thread_count,
    wilson_interval,
)
from stegosim.typicality import all_strings


def cfg(**kw):
    base = dict(family="bitflip", p=0.05, dp=0.2, n=10, trials=200, seed=4, key_seed="beef", rate=0.26)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("kw", [
    dict(trials=0),
    dict(messages=4),  # both rate and messages
    dict(rate=None),
    dict(rate=None, messages=2**24 + 1),
    dict(p=0.5),
    dict(dp=-0.1),
    dict(mode="stream"),
    dict(key_seed="xyz"),
    dict(n=0),
    dict(rekey_every=-1),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        cfg(**kw)


def test_from_dict():
    c = ExperimentConfig.from_dict(dict(family="depol", p=0.1, dp=0.1, n=6, trials=5, messages=2))
    assert c.family == "depolarizing"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(family="depol", p=0.1, dp=0.1, n=6, trials=5, messages=2, colour="red"))


def test_single_message_noiseless():
    rep = run_trials(cfg(p=0.0, dp=0.0, rate=None, messages=1))
    assert rep.success_rate == 1.0 and rep.success_count == rep.trials


def test_report_invariants():
    rep = run_trials(cfg(trials=300))
    assert rep.success_rate == rep.success_count / rep.trials
    assert rep.ci_low <= rep.success_rate <= rep.ci_high
    assert rep.config["n"] == 10 and rep.seed == 4
    assert "wall_clock" not in rep.to_dict()
    assert rep.to_dict(include_timing=True)["wall_clock"] >= 0.0


def test_wilson_interval_reference():
    # textbook Wilson bounds for 8/10
    lo, hi = wilson_interval(8, 10)
    z = 1.959963984540054
    centre = (0.8 + z * z / 20) / (1 + z * z / 10)
    half = z * math.sqrt(0.8 * 0.2 / 10 + z * z / 400) / (1 + z * z / 10)
    assert lo == pytest.approx(centre - half) and hi == pytest.approx(centre + half)


def test_determinism_and_thread_independence():
    c = cfg(trials=500, rekey_every=7)
    assert run_trials(c, threads=1).to_json() == run_trials(c, threads=1).to_json()
    a, b = run_outcomes(c, threads=1), run_outcomes(c, threads=3)
    assert np.array_equal(a.decoded, b.decoded) and np.array_equal(a.messages, b.messages)
    assert run_trials(cfg(trials=500, seed=5)).to_json() != run_trials(cfg(trials=500)).to_json()


def exact_success(cb, phys):
    """Average over messages and all noise strings of [brute-force ML decode == m]."""
    strings = all_strings(cb.n, cb.alphabet)
    probs = product_distribution(phys, cb.n)
    logp = np.log(phys.array)
    total = 0.0
    for m, c in enumerate(cb.entries):
        for f, pf in zip(strings, probs):
            t = c ^ f
            scores = np.array([np.bincount(t ^ other, minlength=2) @ logp for other in cb.entries])
            best = int(np.flatnonzero(scores >= scores.max() - 1e-9)[0])
            total += pf * (best == m)
    return total / cb.size


def test_small_n_against_exhaustive_oracle():
    c = cfg(n=10, trials=4000, rekey_every=0, seed=9)
    cb = build_codebook("bitflip", 0.05, 0.2, 10, c.key(0), rate=0.26)
    expected = exact_success(cb, PauliChannel.bitflip(0.05))
    rep = run_trials(c)
    sd = math.sqrt(expected * (1 - expected) / c.trials)
    assert abs(rep.success_rate - expected) < 4 * sd


def test_key_bits_accounting():
    part = run_trials(cfg(n=10, mode="partition", rate=None, messages=3, tol=0.3, trials=20, rekey_every=5))
    layout_count = build_codebook("bitflip", 0.05, 0.2, 10, SecretKeyStream.from_hex("beef"), messages=3,
                                  mode="partition", tol=0.3).subset_count
    assert part.key_bits == pytest.approx(4 * math.log2(layout_count))
    assert run_trials(cfg(p=0.0, trials=3)).key_bits == pytest.approx(0.0, abs=1e-9)


def test_audit_flag():
    rep = run_trials(cfg(n=8, trials=10, audit=True))
    assert rep.secrecy_deficit == pytest.approx(0.0, abs=1e-12)
    one_book = run_trials(cfg(n=8, trials=10, audit=True, rekey_every=0))
    assert one_book.secrecy_deficit > 0.0


def test_code_length_mismatch():
    with pytest.raises(CodeError):
        run_with_code(cfg(n=12), "five_qubit")
    with pytest.raises(CodeError):
        run_with_code(cfg(n=10), "no_such_code")


def test_identity_channel_with_correctable_codewords():
    c = cfg(family="depol", p=0.0, dp=0.01, n=5, trials=300, rate=None, messages=2)
    rep = run_with_code(c, "five_qubit")
    table = SyndromeTable.build(get_code("five_qubit"), PauliChannel.depolarizing(0.01))
    out = run_outcomes(ExperimentConfig(**{**c.to_dict(), "code": "five_qubit"}))
    # every transmitted error is a codeword here, so weight <= 1 codewords are never erased
    for t in range(c.trials):
        cb = build_codebook("depol", 0.0, 0.01, 5, c.key(t), messages=2)
        if all(np.count_nonzero(e) <= 1 for e in cb.entries):
            assert not out.erased[t]
            assert out.decoded[t] == out.messages[t]
    assert rep.erasures == int(out.erased.sum())
    assert rep.success_count == int(out.correct.sum())
    assert table.injective_probability(PauliChannel.depolarizing(0.01)) > 0.99


def test_erasure_fraction_matches_injective_probability():
    # one message: the codeword is an exact N_q draw, so the total error is exactly N_{p+dp}
    c = cfg(family="depol", p=0.05, dp=0.1, n=5, trials=3000, rate=None, messages=1, seed=2)
    rep = run_with_code(c, "five_qubit")
    table = SyndromeTable.build(get_code("five_qubit"), PauliChannel.depolarizing(0.15))
    expected = 1 - table.injective_probability(PauliChannel.depolarizing(0.15))
    frac = rep.erasures / rep.trials
    assert abs(frac - expected) < 4 * math.sqrt(expected * (1 - expected) / rep.trials)


@pytest.mark.parametrize("code_id,n,family", [("five_qubit", 5, "depol"), ("hamming74", 7, "bitflip"),
                                               ("steane", 7, "depol"), ("rep5", 10, "bitflip")])
def test_conditional_equivalence(code_id, n, family):
    c = cfg(family=family, n=n, trials=400, rate=None, messages=3, dp=0.1)
    plain = run_outcomes(c)
    coded = run_outcomes(ExperimentConfig(**{**c.to_dict(), "code": code_id}))
    keep = ~coded.erased
    assert keep.any()
    assert np.array_equal(plain.messages, coded.messages)
    assert np.array_equal(plain.decoded[keep], coded.decoded[keep])


def test_thread_env(monkeypatch):
    monkeypatch.setenv("STEGOSIM_THREADS", "1")
    assert thread_count() == 1
    monkeypatch.setenv("STEGOSIM_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_count()
