"""Command-line surface: transform, pretrain, gradcheck, embed, bench.

Exit codes: 0 success, 1 validation or check failure, 2 I/O or config
error. Training options resolve as preset defaults, then config-file
values, then explicit flags; every run banner echoes the fully resolved
configuration. The LINECONTRAST_LOG environment variable (quiet, warning,
info, debug) controls verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import gradcheck as gradcheck_mod
from .checkpoint import ConfigMismatch
from .encoder import EmptyGraph, EncoderConfig, ViewMismatch, VocabOutOfRange
from .graphs import EmptyEdgeSet, InvariantViolation, line_graph_to_record, to_line_graph
from .losses import BatchTooSmall, NonFinite
from .pipeline import (
    ParseError,
    TrainConfig,
    desk_train_config,
    embed_corpus,
    load_corpus,
    load_training_checkpoint,
    full_train_config,
    pretrain,
    save_training_checkpoint,
)

log = logging.getLogger("linecontrast")


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# key -> (section, field, caster); sections route into TrainConfig vs EncoderConfig
_CONFIG_KEYS = {
    "epochs": ("train", "epochs", int),
    "batch_size": ("train", "batch_size", int),
    "learning_rate": ("train", "learning_rate", float),
    "seed": ("train", "seed", int),
    "shuffle": ("train", "shuffle", _parse_bool),
    "inclusive_denominator": ("train", "inclusive_denominator", _parse_bool),
    "depth": ("encoder", "depth", int),
    "hidden_dim": ("encoder", "hidden_dim", int),
    "atomic_vocab": ("encoder", "atomic_vocab", int),
    "chirality_vocab": ("encoder", "chirality_vocab", int),
    "bond_type_vocab": ("encoder", "bond_type_vocab", int),
    "bond_direction_vocab": ("encoder", "bond_direction_vocab", int),
    "readout": ("encoder", "readout", str),
    "edge_fusion": ("encoder", "edge_fusion", _parse_bool),
    "tau": ("encoder", "tau", float),
    "alpha": ("encoder", "alpha", float),
    "beta": ("encoder", "beta", float),
}


def read_kv_config(path) -> dict[str, str]:
    """Flat key=value file; blank lines and # comments allowed."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def resolve_train_config(preset: str, file_values: dict[str, str],
                         flag_values: dict[str, object]) -> TrainConfig:
    base = desk_train_config() if preset == "desk" else full_train_config()
    train_fields = dataclasses.asdict(base)
    encoder_fields = train_fields.pop("encoder")
    for key, raw in file_values.items():
        section, field_name, caster = _CONFIG_KEYS[key]
        try:
            value = caster(raw)
        except (ValueError, ConfigError) as err:
            raise ConfigError(f"config key {key}: {err}") from err
        (train_fields if section == "train" else encoder_fields)[field_name] = value
    for key, value in flag_values.items():
        if value is None:
            continue
        section, field_name, _ = _CONFIG_KEYS[key]
        (train_fields if section == "train" else encoder_fields)[field_name] = value
    try:
        return TrainConfig(encoder=EncoderConfig(**encoder_fields), **train_fields)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _flat_config(cfg: TrainConfig) -> dict:
    flat = dataclasses.asdict(cfg)
    flat.update({f"encoder.{k}": v for k, v in flat.pop("encoder").items()})
    return flat


def _banner(command: str, cfg: TrainConfig | None = None, **extra) -> None:
    resolved = dict(extra)
    if cfg is not None:
        resolved.update(_flat_config(cfg))
    print(f"[{command}] config: " + json.dumps(resolved, sort_keys=True))


# --- commands -------------------------------------------------------------------

def cmd_transform(args) -> int:
    corpus = load_corpus(args.input)
    _banner("transform", input=str(args.input), output=str(args.output))
    total_edges = 0
    total_line_edges = 0
    blowups = []
    with open(args.output, "w", encoding="utf-8") as fh:
        for g in corpus:
            view = to_line_graph(g)
            fh.write(json.dumps(line_graph_to_record(view), separators=(",", ":")) + "\n")
            total_edges += g.num_edges
            total_line_edges += view.graph.num_edges
            blowups.append(view.graph.num_edges / g.num_edges)
    mean_blowup = float(np.mean(blowups)) if blowups else 0.0
    print(f"[transform] graphs={len(corpus)} edges={total_edges} "
          f"line_edges={total_line_edges} mean_degree_blowup={mean_blowup:.3f}")
    return 0


def cmd_pretrain(args) -> int:
    file_values = read_kv_config(args.config) if args.config else {}
    flags = {
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "seed": args.seed,
        "depth": args.depth,
        "hidden_dim": args.hidden_dim,
        "tau": args.tau,
        "alpha": args.alpha,
        "beta": args.beta,
        "edge_fusion": args.edge_fusion,
        "shuffle": args.shuffle,
    }
    cfg = resolve_train_config(args.preset, file_values, flags)
    _banner("pretrain", cfg, corpus=str(args.corpus), out=str(args.out),
            resume=bool(args.resume))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.bin"
    init = None
    if args.resume:
        if not ckpt_path.exists():
            raise ConfigError(f"--resume given but {ckpt_path} does not exist")
        init = load_training_checkpoint(ckpt_path)
    corpus = load_corpus(args.corpus)
    result = pretrain(corpus, cfg, metrics_path=out_dir / "metrics.jsonl", init=init)
    save_training_checkpoint(ckpt_path, result)
    per_epoch: dict[int, list[float]] = {}
    steps_per_epoch = max(1, len(corpus) // cfg.batch_size)
    for i, report in enumerate(result.reports):
        per_epoch.setdefault(i // steps_per_epoch, []).append(report.l_total)
    for epoch, values in per_epoch.items():
        print(f"[pretrain] epoch={epoch} mean_total_loss={np.mean(values):.6f}")
    print(f"[pretrain] wrote {ckpt_path} and {out_dir / 'metrics.jsonl'} "
          f"(step={result.step})")
    return 0


def cmd_gradcheck(args) -> int:
    _banner("gradcheck", seed=args.seed, tolerance=args.tolerance,
            inject_bug=args.inject_bug)
    results = gradcheck_mod.run_gradcheck(seed=args.seed, tolerance=args.tolerance,
                                          inject_bug=args.inject_bug)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[gradcheck] {r.name}: max_rel_err={r.max_rel_err:.3e} {status}")
    if failed:
        print(f"[gradcheck] FAILED components: {', '.join(r.name for r in failed)}")
        return 1
    print(f"[gradcheck] all {len(results)} components within {args.tolerance:g}")
    return 0


def cmd_embed(args) -> int:
    _banner("embed", corpus=str(args.corpus), ckpt=str(args.ckpt), out=str(args.out))
    state = load_training_checkpoint(args.ckpt)
    corpus = load_corpus(args.corpus)
    matrix = embed_corpus(corpus, state.params)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(json.dumps([float(x) for x in row]) + "\n")
    print(f"[embed] wrote {matrix.shape[0]} x {matrix.shape[1]} embeddings to {args.out}")
    return 0


def cmd_bench(args) -> int:
    if args.mode == "transform":
        sizes = tuple(int(s) for s in args.sizes.split(","))
        _banner("bench", mode=args.mode, sizes=list(sizes),
                degree_cap=args.degree_cap, seed=args.seed)
        report = bench_mod.bench_transform(graph_counts=sizes, degree_cap=args.degree_cap,
                                           seed=args.seed)
        for line in report.lines():
            print(f"[bench] {line}")
        return 0
    _banner("bench", mode=args.mode, graphs=args.graphs, batch_size=args.batch_size,
            steps=args.steps, seed=args.seed)
    report = bench_mod.bench_train_step(n_graphs=args.graphs, batch_size=args.batch_size,
                                        steps=args.steps, seed=args.seed)
    for line in report.lines():
        print(f"[bench] {line}")
    return 0


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linecontrast",
        description="Contrastive pre-training of graph encoders against line graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="transform a corpus into line graphs")
    p.add_argument("--in", dest="input", required=True, help="input corpus JSONL")
    p.add_argument("--out", dest="output", required=True, help="output line-graph JSONL")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("pretrain", help="run the pre-training loop")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint in the output directory")
    p.add_argument("--preset", choices=("desk", "full"), default="desk")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--edge-fusion", dest="edge_fusion", type=_parse_bool)
    p.add_argument("--shuffle", type=_parse_bool)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=gradcheck_mod.DEFAULT_TOLERANCE)
    p.add_argument("--inject-bug", dest="inject_bug", metavar="COMPONENT",
                   help="testing hook: corrupt one component's analytic gradient")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("embed", help="embed a corpus with a trained checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bench", help="timing harnesses")
    p.add_argument("--mode", choices=("transform", "train-step"), required=True)
    p.add_argument("--sizes", default="10000,20000,40000",
                   help="comma-separated corpus sizes for transform mode")
    p.add_argument("--degree-cap", dest="degree_cap", type=int, default=4)
    p.add_argument("--graphs", type=int, default=48, help="corpus size for train-step mode")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=16)
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


_LOG_LEVELS = {
    "quiet": logging.ERROR,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _configure_logging() -> None:
    level_name = os.environ.get("LINECONTRAST_LOG", "info").lower()
    level = _LOG_LEVELS.get(level_name, logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


_VALIDATION_ERRORS = (
    ParseError, InvariantViolation, EmptyEdgeSet, VocabOutOfRange, ViewMismatch,
    EmptyGraph, BatchTooSmall, NonFinite, ValueError,
)


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigMismatch, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
