"""Command line interface.

Exit codes: 0 success, 2 invalid configuration, 3 incompatible loss/model pair
(no population scaling), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import ConfigInvalid, NoRoot
from .harness import SweepResult, run_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_ROOT = 3
EXIT_IO = 4


def _parse_shorthand(text: str, field_names: list[str]) -> dict:
    """'flip_sign:0.75' -> {'kind': 'flip_sign', 'p': 0.75} and friends."""
    parts = text.split(":")
    cfg: dict = {"kind": parts[0]}
    for name, raw in zip(field_names, parts[1:]):
        try:
            cfg[name] = float(raw)
        except ValueError:
            cfg[name] = raw
    return cfg


_MODEL_FIELDS = {
    "linear": ["gain", "noise_std"],
    "sign_clean": [],
    "flip_sign": ["p"],
    "noisy_sign": ["noise", "scale"],
    "quantizer": ["step", "sat"],
}

_SET_FIELDS = {
    "l1ball": ["radius"],
    "l2ball": ["radius"],
    "sqrt_sparsity": ["s"],
    "subspace": ["dim"],
}

_LOSS_FIELDS = {"square": [], "logistic_paper": [], "glm": ["link"]}


def _shorthand(text: str, table: dict, what: str) -> dict:
    kind = text.split(":")[0]
    if kind not in table:
        raise ConfigInvalid(f"{what}: unknown kind {kind!r}")
    cfg = _parse_shorthand(text, table[kind])
    if kind in ("sqrt_sparsity", "subspace") and len(text.split(":")) > 1:
        key = table[kind][0]
        cfg[key] = int(cfg[key])
    return cfg


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _emit(obj) -> None:
    if isinstance(obj, SweepResult):
        payload = {
            "kind": obj.kind,
            "grid": list(obj.grid),
            "trials": obj.trials,
            "per_point": list(obj.per_point),
            "slope": obj.slope,
            "slope_stderr": obj.slope_stderr,
            "n_not_converged": obj.n_not_converged,
        }
    elif dataclasses.is_dataclass(obj):
        payload = dataclasses.asdict(obj)
    else:
        payload = obj
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siren")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="run a single recovery trial")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="run a seeded sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("modelparams", help="population model parameters for a pair")
    p.add_argument("--loss", help="e.g. square, logistic_paper, glm:logcosh")
    p.add_argument("--model", help="e.g. flip_sign:0.75, linear:1.0:0.3")
    p.add_argument("--config")

    p = sub.add_parser("meanwidth", help="Monte Carlo mean width / effective dimension")
    p.add_argument("--set", help="e.g. l1ball:1.0, sqrt_sparsity:4, subspace:8")
    p.add_argument("--n", type=int)
    p.add_argument("--local", type=float, help="localization scale t")
    p.add_argument("--center", help="JSON file holding the center vector")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("rsc", help="empirical restricted strong convexity report")
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--points", type=int, default=200)

    p = sub.add_parser("smallball", help="marginal tail (small ball) estimate")
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--M", dest="m_window")
    p.add_argument("--N", dest="n_window")
    p.add_argument("--seed", type=int)
    return parser


def _dispatch(args) -> int:
    if args.command in ("estimate", "sweep"):
        cfg = _load_json(args.config)
        if args.command == "estimate":
            cfg["kind"] = "estimate"
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = args.out
        workers = getattr(args, "workers", 1)
        result = run_config(cfg, workers=workers)
        _emit(result if args.command == "sweep" else
              dataclasses.asdict(result.records[0]))
        return EXIT_OK

    if args.command == "modelparams":
        if args.config:
            cfg = _load_json(args.config)
            cfg["kind"] = "modelparams"
        else:
            if not args.loss or not args.model:
                raise ConfigInvalid("loss: --loss and --model (or --config) are required")
            cfg = {
                "kind": "modelparams",
                "loss": _shorthand(args.loss, _LOSS_FIELDS, "loss"),
                "model": _shorthand(args.model, _MODEL_FIELDS, "model"),
            }
        _emit(run_config(cfg))
        return EXIT_OK

    if args.command == "meanwidth":
        if args.config:
            cfg = _load_json(args.config)
            cfg["kind"] = "meanwidth"
        else:
            if not args.set or args.n is None:
                raise ConfigInvalid("set: --set and --n (or --config) are required")
            cfg = {
                "kind": "meanwidth",
                "set": _shorthand(args.set, _SET_FIELDS, "set"),
                "n": args.n,
            }
        cfg.setdefault("samples", args.samples)
        cfg.setdefault("seed", args.seed)
        if args.local is not None:
            cfg["t"] = args.local
        if args.center is not None:
            cfg["center"] = _load_json(args.center)
        _emit(run_config(cfg))
        return EXIT_OK

    if args.command in ("rsc", "smallball"):
        cfg = _load_json(args.config)
        cfg["kind"] = args.command
        cfg["t"] = args.t
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.command == "rsc":
            cfg.setdefault("samples", args.points)
        else:
            if args.m_window is not None:
                cfg["M"] = _maybe_inf(args.m_window)
            if args.n_window is not None:
                cfg["N"] = _maybe_inf(args.n_window)
        _emit(run_config(cfg))
        return EXIT_OK

    raise ConfigInvalid(f"command: unknown command {args.command!r}")


def _maybe_inf(text: str):
    return text if text.lower() in ("inf", "infinity") else float(text)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoRoot as exc:
        print(f"incompatible pair: {exc}", file=sys.stderr)
        return EXIT_NO_ROOT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
