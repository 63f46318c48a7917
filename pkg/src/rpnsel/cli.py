"""Command-line entry point.

Subcommands ``sumrate``, ``csi`` and ``flops`` run seeded sweeps;
``validate-topology`` checks a topology file (or the built-in toroid) and
``gen-channel`` writes a channel tensor. Exit status is 0 on success, 2 for
usage or configuration errors and 1 for runtime failures.

Without ``--out`` results go to stdout, or to ``$RPNSEL_OUTPUT_DIR`` when
that is set; relative ``--out`` paths are resolved against it too.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from ._validation import ContractError
from .channel import SceneConfig, generate_channel, normalize_channel, save_channel
from .topology import build_toroid, load_topology, validate


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _add_sweep_options(sub):
    sub.add_argument("--config", help="JSON experiment config")
    sub.add_argument("--seed", type=int, nargs="+", help="seed list (overrides config)")
    sub.add_argument("--users", type=int, nargs="+", help="user counts")
    sub.add_argument("--tokens", type=int, nargs="+", help="selected-antenna counts")
    sub.add_argument("--algorithms", nargs="+", choices=harness.ALGORITHMS)
    sub.add_argument("--k-race", type=int, help="concurrent RPN runs per instance")
    sub.add_argument("--out", help="output file")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = _Parser(prog="rpnsel", description="Distributed antenna-selection experiments.")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("sumrate", "sum rate versus users and selected antennas"),
        ("csi", "robustness to CSI error and subcarrier subsampling"),
        ("flops", "flop counts and complexity scaling"),
    ):
        _add_sweep_options(subs.add_parser(name, help=help_))

    top = subs.add_parser("validate-topology", help="check a topology file")
    top.add_argument("path", nargs="?", help="topology text file (default: built-in toroid)")
    top.add_argument("--rows", type=int, default=4)
    top.add_argument("--cols", type=int, default=16)

    gen = subs.add_parser("gen-channel", help="generate and save a channel tensor")
    gen.add_argument("--config", help="JSON experiment config (its scene is used)")
    gen.add_argument("--seed", type=int, help="scene seed")
    gen.add_argument("--users", type=int, help="number of users")
    gen.add_argument("--tx", type=int, help="number of transmit antennas")
    gen.add_argument("--subcarriers", type=int, help="number of subcarriers")
    gen.add_argument("--raw", action="store_true", help="skip power normalisation")
    gen.add_argument("--out", required=True, help="output file (.csv for text, else binary)")
    return parser


def _load_cfg(args, command):
    if args.config:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.ExperimentConfig()
        if command == "csi":
            cfg.users, cfg.tokens = [12], [24]
    if getattr(args, "seed", None) is not None:
        cfg.seeds = list(args.seed)
    if getattr(args, "users", None) is not None:
        cfg.users = list(args.users)
    if getattr(args, "tokens", None) is not None:
        cfg.tokens = list(args.tokens)
    if getattr(args, "algorithms", None) is not None:
        cfg.algorithms = list(args.algorithms)
    if getattr(args, "k_race", None) is not None:
        cfg.k_race = args.k_race
    return cfg


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _metadata(cfg, command):
    return {
        "command": command,
        "n_seeds": len(cfg.seeds),
        "config": cfg.to_dict(),
    }


def _run_sweep(args):
    cfg = _load_cfg(args, args.command)
    out = harness.resolve_output(args.out or cfg.output, f"{args.command}.{args.format}")
    if args.command == "flops":
        report = harness.run_flops_experiment(cfg)
        rendered = harness.flops_to_text(report, args.format)
        meta = dict(_metadata(cfg, "flops"), slopes=report.metadata())
        if args.format == "csv":
            table, scaling = rendered
            _emit(table, out)
            if out is None:
                sys.stdout.write("\n" + scaling)
            else:
                _emit(scaling, out.with_name(out.stem + ".scaling.csv"))
        else:
            _emit(rendered, out)
    else:
        run = harness.run_sumrate_experiment if args.command == "sumrate" else harness.run_csi_experiment
        records = run(cfg)
        meta = _metadata(cfg, args.command)
        _emit(harness.records_to_text(records, args.format, meta), out)
    if out is not None and args.format == "csv":
        sidecar = out.with_name(out.name + ".meta.json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


def _validate_topology(args):
    if args.path:
        path = Path(args.path)
        if not path.exists():
            raise FileNotFoundError(f"topology file not found: {path}")
        top = load_topology(path)
    else:
        top = build_toroid(args.rows, args.cols)
    problems = validate(top)
    if problems:
        for p in problems:
            print(p)
        return 1
    print("OK")
    return 0


def _gen_channel(args):
    scene = harness.load_config(args.config).scene if args.config else SceneConfig()
    overrides = {
        "seed": args.seed,
        "n_users": args.users,
        "n_tx": args.tx,
        "n_subcarriers": args.subcarriers,
    }
    try:
        scene = dataclasses.replace(
            scene, **{k: v for k, v in overrides.items() if v is not None}
        )
    except ContractError as exc:
        raise harness.ConfigError(str(exc)) from exc
    H = generate_channel(scene)
    if not args.raw:
        H = normalize_channel(H)
    out = harness.resolve_output(args.out, "channel.bin")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_channel(H, out)
    return 0


_COMMANDS = {
    "sumrate": _run_sweep,
    "csi": _run_sweep,
    "flops": _run_sweep,
    "validate-topology": _validate_topology,
    "gen-channel": _gen_channel,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, harness.ConfigError) as exc:
        print(f"rpnsel {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ContractError, ValueError, OSError, ArithmeticError) as exc:
        print(f"rpnsel {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
