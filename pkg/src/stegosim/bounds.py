"""Achievable steganographic rates, converse upper bounds, and sweeps."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .pauli import (
    ChannelDomainError,
    binary_entropy,
    family_entropy,
    normalize_family,
    solve_intermediate,
)


def _validate(family: str, p: float, dp: float) -> str:
    family = normalize_family(family)
    if dp < 0:
        raise ChannelDomainError(f"dp={dp} must be >= 0")
    # raises for singular p or an out-of-range target
    solve_intermediate(family, p, p + dp)
    return family


def achievable_rate(family: str, p: float, dp: float) -> float:
    """Hidden bits per channel use: ``h(p+dp) - h(p)`` or ``s(p+dp) - s(p)``."""
    family = _validate(family, p, dp)
    return family_entropy(family, p + dp) - family_entropy(family, p)


def emulation_entropy(family: str, p: float, dp: float) -> float:
    """Single-letter entropy of the emulation channel ``N_q``."""
    family = _validate(family, p, dp)
    return family_entropy(family, solve_intermediate(family, p, p + dp))


def key_rate(family: str, p: float, dp: float) -> float:
    """Key bits per channel use spent on selecting the codebook subset."""
    return emulation_entropy(family, p, dp) - achievable_rate(family, p, dp)


def slack_g(n: int, delta: float) -> float:
    """Secrecy slack ``delta*N + h2(delta)``."""
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    return delta * n + binary_entropy(delta)


def slack_f(n: int, eps: float) -> float:
    """Recoverability slack ``eps*N + (1+eps) h2(eps/(1+eps))``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    return eps * n + (1.0 + eps) * binary_entropy(eps / (1.0 + eps))


def max_output_entropy(family: str, p_total: float, n: int) -> float:
    """Largest output entropy of ``N^{(x)N}`` on a pure state.

    Exact for bit-flip (attained by Z eigenstates).  For depolarizing this is
    only an upper bound valid for codewords of a nondegenerate code.
    """
    return n * family_entropy(family, p_total)


@dataclass(frozen=True)
class BoundInputs:
    family: str
    n: int
    p: float
    dp: float
    delta: float = 0.0
    eps: float = 0.0
    h_sigma_e: Optional[float] = None
    h_joint: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "family", _validate(self.family, self.p, self.dp))
        if self.n < 1:
            raise ValueError("N must be >= 1")
        for name in ("delta", "eps"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")


def upper_bound_M(inputs: BoundInputs) -> float:
    """Converse bound on the number of hidden (qu)bits per block."""
    h_sigma = inputs.h_sigma_e
    if h_sigma is None:
        h_sigma = max_output_entropy(inputs.family, inputs.p + inputs.dp, inputs.n)
    h_joint = inputs.h_joint
    if h_joint is None:
        # asymptotic value; finite-N corrections are carried by the slack terms
        h_joint = inputs.n * family_entropy(inputs.family, inputs.p)
    return h_sigma - h_joint + slack_g(inputs.n, inputs.delta) + slack_f(inputs.n, inputs.eps)


SWEEP_COLUMNS = ("family", "p", "dp", "N", "delta", "eps", "rate", "key_rate", "upper_bound")


@dataclass(frozen=True)
class SweepRow:
    family: str
    p: float
    dp: float
    N: int
    delta: float
    eps: float
    rate: float
    key_rate: float
    upper_bound: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


def sweep_point(family, p, dp, n, delta=0.0, eps=0.0) -> SweepRow:
    family = normalize_family(family)
    return SweepRow(
        family=family,
        p=p,
        dp=dp,
        N=n,
        delta=delta,
        eps=eps,
        rate=achievable_rate(family, p, dp),
        key_rate=key_rate(family, p, dp),
        upper_bound=upper_bound_M(BoundInputs(family, n, p, dp, delta, eps)),
    )


def sweep_grid(
    families: Iterable[str],
    ps: Iterable[float],
    dps: Iterable[float],
    ns: Iterable[int],
    deltas: Iterable[float] = (0.0,),
    epss: Iterable[float] = (0.0,),
) -> list[SweepRow]:
    """Cartesian sweep; points outside the channel domain are skipped."""
    rows = []
    for fam, p, dp, n, d, e in itertools.product(families, ps, dps, ns, deltas, epss):
        try:
            rows.append(sweep_point(fam, p, dp, n, d, e))
        except ChannelDomainError:
            continue
    return rows


def rows_to_csv(rows: Iterable[SweepRow], fh: Optional[io.TextIOBase] = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in row.as_tuple()])
    return buf.getvalue() if fh is None else ""


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)

