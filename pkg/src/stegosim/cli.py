"""Command-line entry point: ``stegosim <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys

from .bounds import BoundInputs, achievable_rate, rows_to_csv, slack_f, slack_g, sweep_grid, upper_bound_M
from .codec import MODES, SECURE_LEVELS, SecretKeyStream, key_bits_per_block
from .pauli import normalize_family
from .secrecy import AUDIT_MODES, secrecy_deficit
from .sim import ConfigError, ExperimentConfig, run_trials
from .typicality import DEFAULT_TOL

FAMILY_CHOICES = ("bitflip", "depol", "depolarizing")

SWEEP_KEYS = {"families": "families", "p": "ps", "dp": "dps", "N": "ns", "delta": "deltas", "eps": "epss"}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _hex(text: str) -> str:
    try:
        bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex string: {text!r}") from None
    return text


def _channel_args(p: argparse.ArgumentParser, n: bool = False) -> None:
    p.add_argument("--family", required=True, choices=FAMILY_CHOICES)
    p.add_argument("--p", type=float, required=True, help="physical error parameter")
    p.add_argument("--dp", type=float, required=True, help="extra noise Eve tolerates")
    if n:
        p.add_argument("--n", type=int, required=True, help="block length N")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stegosim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="achievable hidden rate in bits per channel use")
    _channel_args(p)

    p = sub.add_parser("keyrate", help="secret-key bits consumed per block")
    _channel_args(p, n=True)
    p.add_argument("--secure", choices=SECURE_LEVELS, default="none")

    p = sub.add_parser("bounds", help="converse upper bound on hidden bits per block")
    _channel_args(p, n=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)

    p = sub.add_parser("simulate", help="Monte Carlo encode/transmit/decode run")
    _channel_args(p, n=True)
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--rate", type=float)
    size.add_argument("--messages", type=int)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--key-seed", type=_hex, required=True)
    p.add_argument("--mode", choices=MODES, default="iid")
    p.add_argument("--code", help="code id from the built-in library (transparent syndromes if omitted)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--rekey-every", type=int, default=1, help="trials per key block; 0 reuses one codebook")
    p.add_argument("--audit", action="store_true", help="also compute the secrecy deficit")
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds in the JSON")

    p = sub.add_parser("secrecy", help="secrecy audit: distance between induced and expected output")
    _channel_args(p, n=True)
    p.add_argument("--mode", choices=AUDIT_MODES, required=True)
    p.add_argument("--exact", action="store_true", help="require the full string-space computation")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--messages", type=int)
    p.add_argument("--key-seed", type=_hex, default="00")
    p.add_argument("--trials", type=int, help="Monte Carlo trials when only a lower bound is exact")
    p.add_argument("--seed", type=_u64, default=0)

    p = sub.add_parser("sweep", help="bound/rate grid as CSV")
    p.add_argument("--config", required=True, help="JSON file with lists: families, p, dp, N, delta, eps")
    p.add_argument("--out", required=True)
    return parser


def _emit(obj) -> None:
    if isinstance(obj, str):
        sys.stdout.write(obj + "\n")
    else:
        sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _cmd_rate(a) -> None:
    _emit(repr(achievable_rate(a.family, a.p, a.dp)))


def _cmd_keyrate(a) -> None:
    _emit(repr(key_bits_per_block(a.family, a.p, a.dp, a.n, a.secure)))


def _cmd_bounds(a) -> None:
    inputs = BoundInputs(a.family, a.n, a.p, a.dp, a.delta, a.eps)
    _emit({
        "family": inputs.family, "p": a.p, "dp": a.dp, "N": a.n, "delta": a.delta, "eps": a.eps,
        "rate": achievable_rate(a.family, a.p, a.dp),
        "g": slack_g(a.n, a.delta), "f": slack_f(a.n, a.eps),
        "upper_bound": upper_bound_M(inputs),
    })


def _cmd_simulate(a) -> None:
    cfg = ExperimentConfig(
        family=a.family, p=a.p, dp=a.dp, n=a.n, trials=a.trials, seed=a.seed,
        key_seed=a.key_seed, rate=a.rate, messages=a.messages, mode=a.mode, tol=a.tol,
        code=a.code, rekey_every=a.rekey_every, audit=a.audit,
    )
    _emit(run_trials(cfg).to_json(include_timing=a.timing))


def _cmd_secrecy(a) -> None:
    report = secrecy_deficit(
        a.family, a.p, a.dp, a.n, a.mode, tol=a.tol, key=SecretKeyStream.from_hex(a.key_seed),
        messages=a.messages, exact=True if a.exact else None, trials=a.trials, seed=a.seed,
    )
    _emit(report.to_json())


def load_sweep_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("sweep config must be a JSON object")
    unknown = set(data) - set(SWEEP_KEYS)
    if unknown:
        raise ConfigError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    for key in ("families", "p", "dp", "N"):
        if key not in data:
            raise ConfigError(f"sweep config needs {key!r}")
    out = {}
    for key, arg in SWEEP_KEYS.items():
        if key in data:
            value = data[key]
            out[arg] = value if isinstance(value, list) else [value]
    out["families"] = [normalize_family(f) for f in out["families"]]
    return out


def _cmd_sweep(a) -> None:
    rows = sweep_grid(**load_sweep_config(a.config))
    with open(a.out, "w", encoding="utf-8", newline="") as fh:
        rows_to_csv(rows, fh)
    _emit(f"wrote {len(rows)} rows to {a.out}")


COMMANDS = {
    "rate": _cmd_rate,
    "keyrate": _cmd_keyrate,
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
    "secrecy": _cmd_secrecy,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        sys.stderr.write(f"stegosim {args.command}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
