"""Small nondegenerate codes: syndromes, injectivity checks and output entropies.

Stabilizer generators are kept in the symplectic picture (phases dropped):
a row of length ``2N`` holds the X-part followed by the Z-part.  Classical
parity-check codes act on the X-part of an error only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Union

import numpy as np

from .pauli import LETTERS, PauliChannel, as_error
from .typicality import ENUMERATION_CAP, EnumerationTooLarge, all_strings


class CodeError(ValueError):
    pass


def gf2_rank(rows: np.ndarray) -> int:
    m = np.array(rows, dtype=np.uint8) % 2
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(n_rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


def x_part(errors: np.ndarray) -> np.ndarray:
    """X component of letters (X or Y)."""
    return ((errors == 1) | (errors == 2)).astype(np.uint8)


def z_part(errors: np.ndarray) -> np.ndarray:
    """Z component of letters (Y or Z)."""
    return ((errors == 2) | (errors == 3)).astype(np.uint8)


def pauli_to_symplectic(e) -> np.ndarray:
    e = as_error(e)
    return np.concatenate([x_part(e), z_part(e)])


def symplectic_to_pauli(row: np.ndarray) -> np.ndarray:
    n = len(row) // 2
    x, z = row[:n].astype(np.uint8), row[n:].astype(np.uint8)
    # (x, z) -> I=0, X=1, Y=2, Z=3
    return np.choose(x * 2 + z, [0, 3, 1, 2]).astype(np.uint8)


def symplectic_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Commutation bits between the rows of ``a`` and the rows of ``b``."""
    a = np.atleast_2d(a).astype(np.int64)
    b = np.atleast_2d(b).astype(np.int64)
    n = a.shape[1] // 2
    return ((a[:, :n] @ b[:, n:].T + a[:, n:] @ b[:, :n].T) % 2).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ParityCheckCode:
    """Classical linear code given by a full-rank parity-check matrix."""

    H: np.ndarray
    name: str = "parity-check"

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=np.uint8) % 2)
        if gf2_rank(H) != H.shape[0]:
            raise CodeError("parity-check rows are not linearly independent")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.n - self.H.shape[0]

    @property
    def syndrome_bits(self) -> int:
        return self.H.shape[0]

    def syndromes(self, errors: np.ndarray) -> np.ndarray:
        return (x_part(errors).astype(np.int64) @ self.H.T.astype(np.int64) % 2).astype(np.uint8)

    def state_generators(self) -> np.ndarray:
        """Stabilizer of the all-zeros codeword ``|0...0>``: ``Z`` on every bit."""
        return np.concatenate([np.zeros((self.n, self.n), np.uint8), np.eye(self.n, dtype=np.uint8)], axis=1)


@dataclass(frozen=True, eq=False)
class StabilizerCode:
    """Stabilizer code; ``logical_z`` (k rows) fixes the codeword ``|0...0>_L``."""

    generators: np.ndarray
    logical_z: Optional[np.ndarray] = None
    name: str = "stabilizer"
    n_qubits: Optional[int] = None

    def __post_init__(self):
        gens = np.asarray(self.generators, dtype=np.uint8) % 2
        if gens.size == 0:
            if self.n_qubits is None:
                raise CodeError("a code without generators needs n_qubits")
            gens = np.zeros((0, 2 * self.n_qubits), dtype=np.uint8)
        gens = np.atleast_2d(gens)
        if gens.shape[1] % 2:
            raise CodeError("symplectic rows need even length")
        if len(gens) and gf2_rank(gens) != len(gens):
            raise CodeError("stabilizer generators are not independent")
        if len(gens) and symplectic_product(gens, gens).any():
            raise CodeError("stabilizer generators do not commute")
        gens.setflags(write=False)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "n_qubits", gens.shape[1] // 2)
        if self.logical_z is not None:
            lz = np.atleast_2d(np.asarray(self.logical_z, dtype=np.uint8) % 2)
            full = np.concatenate([gens, lz])
            if symplectic_product(full, full).any() or gf2_rank(full) != len(full):
                raise CodeError("logical Z operators must commute with the stabilizer and be independent")
            lz.setflags(write=False)
            object.__setattr__(self, "logical_z", lz)

    @property
    def n(self) -> int:
        return self.n_qubits

    @property
    def k(self) -> int:
        return self.n - self.generators.shape[0]

    @property
    def syndrome_bits(self) -> int:
        return self.generators.shape[0]

    def syndromes(self, errors: np.ndarray) -> np.ndarray:
        sym = np.concatenate([x_part(errors), z_part(errors)], axis=1)
        return symplectic_product(sym, self.generators)

    def state_generators(self) -> np.ndarray:
        if self.k == 0:
            return self.generators
        if self.logical_z is None or len(self.logical_z) != self.k:
            raise CodeError("coset entropy of a k > 0 code needs its k logical Z operators")
        return np.concatenate([self.generators, self.logical_z])


Code = Union[ParityCheckCode, StabilizerCode]


def _as_matrix(code: Code, errors) -> np.ndarray:
    arr = np.asarray(errors, dtype=np.uint8)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != code.n:
        raise CodeError(f"error length {arr.shape[1]} != code length {code.n}")
    return arr


def syndrome(code: Code, e) -> np.ndarray:
    """Syndrome bits of one error string."""
    return code.syndromes(_as_matrix(code, as_error(e)))[0]


def syndrome_ints(code: Code, errors: np.ndarray) -> np.ndarray:
    bits = code.syndromes(_as_matrix(code, errors)).astype(np.int64)
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits @ weights if bits.shape[1] else np.zeros(len(bits), dtype=np.int64)


def is_nondegenerate_on(code: Code, errors: Iterable) -> bool:
    """True iff distinct errors in the set have distinct syndromes."""
    rows = [as_error(e) for e in errors]
    if not rows:
        return True
    arr = np.unique(_as_matrix(code, np.array(rows)), axis=0)
    return len(np.unique(syndrome_ints(code, arr))) == len(arr)


def _shannon(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(-(p * np.log2(p)).sum())


def coset_distribution(code: Code, ch: PauliChannel, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Probability of each error class that leaves a distinct output state.

    Two Paulis give the same state on the codeword iff they differ by an
    element of its full stabilizer, so the classes are labelled by the
    syndrome with respect to the stabilizer generators plus logical Zs.  The
    distribution is built qubit by qubit as an XOR convolution; no 4^N
    enumeration is needed.
    """
    gens = code.state_generators()
    bits = gens.shape[0]
    if 2**bits > cap:
        raise EnumerationTooLarge(f"2^{bits} coset labels exceed the cap of {cap}")
    probs = ch.promote().array
    n = code.n
    weights = 1 << np.arange(bits - 1, -1, -1, dtype=np.int64)
    dist = np.zeros(2**bits)
    dist[0] = 1.0
    index = np.arange(2**bits, dtype=np.int64)
    for i in range(n):
        new = np.zeros_like(dist)
        for letter, pa in enumerate(probs):
            if pa == 0.0:
                continue
            e = np.zeros(n, dtype=np.uint8)
            e[i] = letter
            sym = pauli_to_symplectic(e)
            label = int(symplectic_product(sym, gens)[0].astype(np.int64) @ weights) if bits else 0
            new += pa * dist[index ^ label]
        dist = new
    return dist


def coset_output_entropy(code: Code, ch: PauliChannel, cap: int = ENUMERATION_CAP) -> float:
    """Von Neumann entropy (bits) of ``ch^{(x)N}`` applied to the code's reference codeword."""
    return _shannon(coset_distribution(code, ch, cap))


@dataclass(frozen=True, eq=False)
class SyndromeTable:
    """Most-likely error per syndrome; the leaders form the injective set."""

    code: Code
    channel: PauliChannel
    leaders: dict = field(repr=False)

    @classmethod
    def build(cls, code: Code, ch: PauliChannel) -> "SyndromeTable":
        errors = all_strings(code.n, ch.alphabet)
        logp = ch.log2_probs()
        with np.errstate(invalid="ignore"):
            ll = np.where(errors[:, :, None] == np.arange(ch.alphabet), logp, 0.0).sum(axis=(1, 2))
        synd = syndrome_ints(code, errors)
        leaders: dict[int, np.ndarray] = {}
        # stable sort: ties resolve to the lexicographically smallest error
        for i in np.argsort(-ll, kind="stable"):
            if not np.isfinite(ll[i]):
                continue
            leaders.setdefault(int(synd[i]), errors[i])
        return cls(code, ch, leaders)

    @cached_property
    def injective_set(self) -> np.ndarray:
        return np.array(sorted(self.leaders.values(), key=lambda e: tuple(e)), dtype=np.uint8)

    def recover(self, e) -> Optional[np.ndarray]:
        """The error itself when it is its syndrome's leader, else ``None`` (erasure)."""
        e = as_error(e)
        s = int(syndrome_ints(self.code, e[None, :])[0])
        lead = self.leaders.get(s)
        if lead is not None and np.array_equal(lead, e):
            return lead.copy()
        return None

    def recover_blocks(self, e) -> Optional[np.ndarray]:
        """Block-wise recovery of a string whose length is a multiple of the code length."""
        e = as_error(e)
        n = self.code.n
        if len(e) % n:
            raise CodeError(f"length {len(e)} is not a multiple of the code length {n}")
        out = []
        for start in range(0, len(e), n):
            block = self.recover(e[start:start + n])
            if block is None:
                return None
            out.append(block)
        return np.concatenate(out)

    def injective_probability(self, ch: PauliChannel) -> float:
        """Probability that a ``ch``-distributed block error is in the injective set."""
        probs = ch.array
        return math.fsum(float(np.prod(probs[e])) for e in self.leaders.values())


# -- built-in library and text import -------------------------------------


def _pauli_rows(lines: Iterable[str]) -> np.ndarray:
    return np.array([pauli_to_symplectic(line) for line in lines], dtype=np.uint8)


def repetition_code(n: int) -> ParityCheckCode:
    H = np.zeros((n - 1, n), dtype=np.uint8)
    for i in range(n - 1):
        H[i, i] = H[i, i + 1] = 1
    return ParityCheckCode(H, name=f"rep{n}")


def hamming74() -> ParityCheckCode:
    cols = [[(j >> b) & 1 for b in range(3)] for j in range(1, 8)]
    return ParityCheckCode(np.array(cols, dtype=np.uint8).T, name="hamming74")


def five_qubit_code() -> StabilizerCode:
    return StabilizerCode(
        _pauli_rows(["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"]),
        logical_z=_pauli_rows(["ZZZZZ"]),
        name="five_qubit",
    )


def css_code(hx: np.ndarray, hz: np.ndarray, logical_z=None, name: str = "css") -> StabilizerCode:
    hx, hz = np.atleast_2d(hx), np.atleast_2d(hz)
    n = hx.shape[1]
    rows = [np.concatenate([r, np.zeros(n, np.uint8)]) for r in hx]
    rows += [np.concatenate([np.zeros(n, np.uint8), r]) for r in hz]
    return StabilizerCode(np.array(rows, dtype=np.uint8), logical_z=logical_z, name=name)


def steane_code() -> StabilizerCode:
    H = hamming74().H
    return css_code(H, H, logical_z=_pauli_rows(["ZZZZZZZ"]), name="steane")


def trivial_code(n: int = 1) -> StabilizerCode:
    """No stabilizers; the reference codeword is ``|0...0>``."""
    lz = _pauli_rows(["I" * i + "Z" + "I" * (n - i - 1) for i in range(n)])
    return StabilizerCode(np.zeros((0, 2 * n), np.uint8), logical_z=lz, name=f"trivial{n}",
                          n_qubits=n)


LIBRARY = {
    "rep3": lambda: repetition_code(3),
    "rep5": lambda: repetition_code(5),
    "hamming74": hamming74,
    "five_qubit": five_qubit_code,
    "steane": steane_code,
    "trivial1": lambda: trivial_code(1),
}


def get_code(code_id: str) -> Code:
    try:
        return LIBRARY[code_id]()
    except KeyError:
        raise CodeError(f"unknown code {code_id!r}; known: {', '.join(sorted(LIBRARY))}") from None


def parse_code(text: str, name: str = "imported") -> Code:
    """Read a code from text.

    Rows of ``0``/``1`` give a parity-check matrix; rows of ``I/X/Y/Z`` give
    stabilizer generators.  A row prefixed ``logical:`` adds a logical Z.
    Blank lines and ``#`` comments are ignored.
    """
    rows, logical = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip().replace(" ", "")
        if not line:
            continue
        if line.lower().startswith("logical:"):
            logical.append(line.split(":", 1)[1].upper())
        else:
            rows.append(line.upper())
    if not rows and not logical:
        raise CodeError("empty code description")
    if rows and all(set(r) <= set("01") for r in rows) and not logical:
        H = np.array([[int(c) for c in r] for r in rows], dtype=np.uint8)
        return ParityCheckCode(H, name=name)
    bad = [r for r in rows + logical if not set(r) <= set(LETTERS)]
    if bad:
        raise CodeError(f"rows must be 0/1 or I/X/Y/Z strings; got {bad[0]!r}")
    lengths = {len(r) for r in rows + logical}
    if len(lengths) != 1:
        raise CodeError("all rows must have the same length")
    n = lengths.pop()
    gens = _pauli_rows(rows) if rows else np.zeros((0, 2 * n), np.uint8)
    return StabilizerCode(gens, logical_z=_pauli_rows(logical) if logical else None, name=name,
                          n_qubits=n)
