"""Command line: dataset synthesis, training, evaluation, baseline comparison,
federated simulation, embedding export.

Exit codes: 0 ok, 2 config error, 3 I/O or data error, 4 training divergence,
5 checkpoint/artifact mismatch. Every command writes resolved_config.json
beside its outputs; given the same config and seed, outputs are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .artifacts import load_model_artifact, rebuild_split, save_model_artifact
from .baselines import run_baseline_suite
from .config import ConfigError, dump_json, load_config, require
from .data import (DataFormatError, MalformedEventError, SplitError, parse_dataset,
                   split_dataset, write_dataset)
from .evaluation import evaluate, evaluate_authentication, evaluate_identification, export_embeddings
from .federated import FedConfig, run_rounds, write_round_reports
from .model import DualChannelModel, ModelConfig
from .params import CheckpointError
from .synth import synth_generate
from .training import DivergenceError, TrainConfig, train_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_MISMATCH = 5


def _out_dir(cfg) -> Path:
    out = Path(require(cfg, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_samples(cfg):
    dataset = cfg["dataset"]
    path = require(cfg, "dataset.path")
    return parse_dataset(path, dataset["format"], dataset["flight_mode"])


def _build_split(cfg):
    seed = require(cfg, "seed")
    dataset = cfg["dataset"]
    return split_dataset(_load_samples(cfg), test_ratio=dataset["test_ratio"], seed=seed,
                         max_subwords=dataset["max_subwords"])


def _model_config(cfg, split) -> ModelConfig:
    try:
        return ModelConfig(num_users=split.num_users, num_subwords=split.vocab.num_subwords,
                           num_chars=split.vocab.num_chars, mode=cfg["mode"], **cfg["model"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model config: {exc}") from exc


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(seed=require(cfg, "seed"), **cfg["train"])


def cmd_synth(cfg) -> int:
    seed = require(cfg, "seed")
    s = cfg["synth"]
    if not s["phrase_pool"]:
        raise ConfigError("missing required config field: synth.phrase_pool")
    samples = synth_generate(s["num_users"], s["samples_per_user"], s["phrase_pool"], seed,
                             hold_range=tuple(s["hold_range"]),
                             flight_range=tuple(s["flight_range"]),
                             jitter_range=tuple(s["jitter_range"]))
    out = _out_dir(cfg)
    write_dataset(samples, out / "dataset.precomputed.csv", "precomputed")
    write_dataset(samples, out / "dataset.timestamps.csv", "timestamps")
    dump_json({"num_samples": len(samples), "num_users": s["num_users"],
               "files": ["dataset.precomputed.csv", "dataset.timestamps.csv"]},
              out / "manifest.json")
    dump_json(cfg, out / "resolved_config.json")
    print(f"synth: wrote {len(samples)} samples for {s['num_users']} users to {out}")
    return EXIT_OK


def cmd_train(cfg) -> int:
    split = _build_split(cfg)
    model = DualChannelModel(_model_config(cfg, split), seed=require(cfg, "seed"))
    tcfg = _train_config(cfg)
    labels = [split.label(s) for s in split.train]
    losses = train_model(model, split.train, labels, tcfg)
    report = evaluate(model, split)
    out = _out_dir(cfg)
    save_model_artifact(model, split, out / "model.tckpt",
                        extra_meta={"train": tcfg.to_dict(), "mode": cfg["mode"]})
    dump_json({"report": report.to_dict(), "epoch_losses": losses,
               "split_hash": split.split_hash}, out / "report.json")
    dump_json(cfg, out / "resolved_config.json")
    print(f"train[{cfg['mode']}]: accuracy={report.accuracy:.4f} eer={report.eer:.4f} "
          f"final_loss={losses[-1]:.4f}")
    return EXIT_OK


def cmd_eval(cfg) -> int:
    checkpoint = require(cfg, "checkpoint")
    model, meta = load_model_artifact(checkpoint)
    split = rebuild_split(meta, _load_samples(cfg))
    tasks = cfg["eval"]["tasks"]
    payload: dict = {"split_hash": split.split_hash, "tasks": tasks}
    if "identification" in tasks and "authentication" in tasks:
        report = evaluate(model, split)
    elif "identification" in tasks:
        report = evaluate_identification(model, split.test, split.user_index)
    elif "authentication" in tasks:
        report = evaluate_authentication(model, split)
    else:
        raise ConfigError(f"eval.tasks must name identification and/or authentication, got {tasks}")
    payload["report"] = report.to_dict()
    out = _out_dir(cfg)
    dump_json(payload, out / "eval_report.json")
    dump_json(cfg, out / "resolved_config.json")
    acc = "n/a" if report.accuracy is None else f"{report.accuracy:.4f}"
    eer = "n/a" if report.eer is None else f"{report.eer:.4f}"
    print(f"eval: accuracy={acc} eer={eer}")
    return EXIT_OK


def cmd_compare(cfg) -> int:
    seed = require(cfg, "seed")
    split = _build_split(cfg)
    report = run_baseline_suite(split, cfg["compare"]["rows"], seed,
                                model_config=cfg["model"],
                                train_config=_train_config(cfg),
                                lstm_hidden=cfg["compare"]["lstm_hidden"])
    out = _out_dir(cfg)
    dump_json(report, out / "compare_report.json")
    dump_json(cfg, out / "resolved_config.json")
    for name, fields in report["rows"].items():
        eer = "n/a" if fields["eer"] is None else f"{fields['eer']:.4f}"
        print(f"compare[{name}]: accuracy={fields['accuracy']:.4f} eer={eer}")
    return EXIT_OK


def cmd_fedsim(cfg) -> int:
    seed = require(cfg, "seed")
    split = _build_split(cfg)
    try:
        fed = FedConfig(seed=seed, **cfg["fed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad fed config: {exc}") from exc
    model = DualChannelModel(_model_config(cfg, split), seed=seed)
    reports = run_rounds(fed, model, split, _train_config(cfg))
    out = _out_dir(cfg)
    write_round_reports(reports, out / "rounds.jsonl")
    save_model_artifact(model, split, out / "model.tckpt",
                        extra_meta={"fed": fed.to_dict(), "mode": cfg["mode"]})
    dump_json(cfg, out / "resolved_config.json")
    final = reports[-1].global_accuracy if reports else None
    print(f"fedsim: rounds={fed.rounds} clients_per_round={fed.clients_per_round} "
          f"final_accuracy={final}")
    return EXIT_OK


def cmd_export_embeddings(cfg) -> int:
    checkpoint = require(cfg, "checkpoint")
    model, meta = load_model_artifact(checkpoint)
    split = rebuild_split(meta, _load_samples(cfg))
    out = _out_dir(cfg)
    export_embeddings(model, split.train + split.test, out / "embeddings.csv")
    dump_json(cfg, out / "resolved_config.json")
    print(f"export-embeddings: wrote {len(split.train) + len(split.test)} rows to {out}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "fedsim": cmd_fedsim,
    "export-embeddings": cmd_export_embeddings,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tckd",
                                     description="keystroke-dynamics modeling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", type=str, choices=["char_only", "temp_char"], default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--checkpoint", type=str, default=None)
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for key in ("seed", "mode", "out", "checkpoint"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    try:
        cfg = load_config(args.config, overrides)
        if args.print_config:
            import json as _json

            print(_json.dumps(cfg, sort_keys=True, indent=2))
            return EXIT_OK
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, MalformedEventError, SplitError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointError as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
