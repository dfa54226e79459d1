"""Command-line pipeline: distill | label | train | compress | eval | sweep | stats.

Configuration comes from an optional JSON file (nested sections: provider,
model, train, compress, paths) with command-line flags taking precedence
field by field. Commands that write files also write a ``*.manifest.json``
next to their primary output recording the effective config digest, input
digests, and library versions — never timestamps — so identical runs
produce identical trees.

Exit codes: 0 success, 1 user error (flags, config, missing files),
2 runtime failure (provider, data, or checkpoint trouble).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._util import digest_obj, sha256_file
from .align import (
    label_distilled_pairs,
    read_labeled_jsonl,
    write_labeled_jsonl,
)
from .compressor import CompressionRequest, compress
from .distill import (
    DistilledDataset,
    HttpProvider,
    LlmProvider,
    MockProvider,
    distill_corpus,
    ratio_histogram,
    read_pairs_jsonl,
    write_pairs_jsonl,
)
from .errors import ConfigParseError, ConfigValidationError, EfpcError
from .evaluation import (
    ContextAnswerTarget,
    QARecord,
    data_efficiency_sweep,
    evaluate_downstream,
)
from .model import (
    Model,
    ModelConfig,
    TrainConfig,
    build_vocab,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this artifact reserves 2
    # for runtime failures, so parse errors become exceptions instead.
    def error(self, message):
        raise _UsageError(message)


# ------------------------------------------------------------- run config

_SECTION_KEYS = {
    "provider": {"mock", "base_url", "model_name", "max_concurrency", "max_units"},
    "model": {"embed_dim", "num_layers", "num_heads", "ffn_dim", "max_seq_len", "seed"},
    "train": {
        "learning_rate",
        "batch_size",
        "epochs",
        "loss_variant",
        "seed",
    },
    "compress": {"ratio", "budget", "instruction"},
    "paths": {"corpus", "pairs", "labeled", "checkpoint", "report", "out_dir"},
}


@dataclass(frozen=True)
class RunConfig:
    provider: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    compress: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "provider": dict(self.provider),
            "model": dict(self.model),
            "train": dict(self.train),
            "compress": dict(self.compress),
            "paths": dict(self.paths),
            "seed": self.seed,
        }


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigParseError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigParseError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{path}: top level must be a JSON object")
    sections: dict[str, dict] = {}
    seed = None
    for key, value in raw.items():
        if key == "seed":
            if not isinstance(value, int):
                raise ConfigValidationError("seed must be an integer")
            seed = value
            continue
        if key not in _SECTION_KEYS:
            raise ConfigValidationError(f"unknown config section {key!r}")
        if not isinstance(value, dict):
            raise ConfigValidationError(f"section {key!r} must be an object")
        unknown = set(value) - _SECTION_KEYS[key]
        if unknown:
            raise ConfigValidationError(
                f"unknown key {sorted(unknown)[0]!r} in section {key!r}"
            )
        sections[key] = dict(value)
    cfg = RunConfig(seed=seed, **{k: sections.get(k, {}) for k in _SECTION_KEYS})
    if "ratio" in cfg.compress and "budget" in cfg.compress:
        raise ConfigValidationError("compress: set only one of ratio and budget")
    return cfg


def _args_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return RunConfig()


def _pick(flag_value, section: dict, key: str, default=None):
    """Flag wins over config file wins over default."""
    if flag_value is not None:
        return flag_value
    if key in section:
        return section[key]
    return default


def _need(value, what: str):
    if value is None:
        raise ConfigValidationError(f"{what} is required (flag or config file)")
    return value


def _provider_from(cfg: RunConfig, args) -> LlmProvider:
    mock = _pick(getattr(args, "mock", None), cfg.provider, "mock", True)
    if mock:
        return MockProvider()
    base_url = _need(_pick(args.base_url, cfg.provider, "base_url"), "--base-url")
    model_name = _need(
        _pick(args.model_name, cfg.provider, "model_name"), "--model-name"
    )
    return HttpProvider(base_url=base_url, model_name=model_name)


def _model_config(cfg: RunConfig, args, vocab_size: int) -> ModelConfig:
    m = cfg.model
    seed = _pick(getattr(args, "seed", None), m, "seed", cfg.seed or 0)
    return ModelConfig(
        vocab_size=vocab_size,
        embed_dim=_pick(getattr(args, "embed_dim", None), m, "embed_dim", 64),
        num_layers=_pick(getattr(args, "layers", None), m, "num_layers", 2),
        num_heads=_pick(getattr(args, "heads", None), m, "num_heads", 4),
        ffn_dim=_pick(getattr(args, "ffn_dim", None), m, "ffn_dim", 128),
        max_seq_len=_pick(getattr(args, "max_seq_len", None), m, "max_seq_len", 256),
        seed=seed,
    )


def _train_config(cfg: RunConfig, args) -> TrainConfig:
    t = cfg.train
    seed = _pick(getattr(args, "seed", None), t, "seed", cfg.seed or 0)
    return TrainConfig(
        learning_rate=_pick(getattr(args, "lr", None), t, "learning_rate", 1e-5),
        batch_size=_pick(getattr(args, "batch_size", None), t, "batch_size", 10),
        epochs=_pick(getattr(args, "epochs", None), t, "epochs", 10),
        loss_variant=_pick(getattr(args, "loss", None), t, "loss_variant", "mask"),
        seed=seed,
    )


# -------------------------------------------------------------- manifests


def _input_digests(inputs: list) -> dict:
    # keyed by basename, not full path, so identical runs in different
    # directories produce identical manifests and run ids
    return {Path(p).name: sha256_file(p) for p in inputs}


def _write_manifest(
    out_path, command: str, effective_config: dict, inputs: list
) -> None:
    digests = _input_digests(inputs)
    config_digest = digest_obj(effective_config)
    manifest = {
        "run_id": digest_obj(
            {"command": command, "config": config_digest, "inputs": digests}
        )[:12],
        "command": command,
        "config_digest": config_digest,
        "config": effective_config,
        "input_digests": digests,
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_identity(command: str, effective_config: dict, inputs: list) -> tuple[str, str]:
    digests = _input_digests(inputs)
    config_digest = digest_obj(effective_config)
    run_id = digest_obj(
        {"command": command, "config": config_digest, "inputs": digests}
    )[:12]
    return run_id, config_digest


# ------------------------------------------------------------ subcommands


def _read_corpus(path) -> tuple[list[str], list[str]]:
    """Documents and instructions from a JSONL corpus or a plain text file."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"corpus not found: {path}")
    if p.suffix == ".jsonl":
        docs, instructions = [], []
        with open(p, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                docs.append(rec["text"])
                instructions.append(rec.get("instruction", ""))
        return docs, instructions
    text = p.read_text(encoding="utf-8")
    return [text], [""]


def cmd_distill(args) -> int:
    cfg = _args_config(args)
    provider = _provider_from(cfg, args)
    corpus = _need(_pick(args.corpus, cfg.paths, "corpus"), "--corpus")
    out = _need(_pick(args.out, cfg.paths, "pairs"), "--out")
    max_units = _pick(args.max_units, cfg.provider, "max_units", 512)
    concurrency = _pick(args.max_concurrency, cfg.provider, "max_concurrency", 4)
    docs, instructions = _read_corpus(corpus)
    if args.instruction is not None:
        instructions = [args.instruction] * len(docs)
    dataset = distill_corpus(
        provider,
        docs,
        instructions,
        max_units=max_units,
        max_concurrency=concurrency,
    )
    write_pairs_jsonl(dataset, out)
    effective = {
        "command": "distill",
        "provider": provider.provider_id,
        "max_units": max_units,
        "instruction_override": args.instruction,
        "config": cfg.to_dict(),
    }
    _write_manifest(out, "distill", effective, [corpus])
    print(f"distilled {len(dataset.pairs)} pairs ({len(dataset.failures)} failures) -> {out}")
    return 0


def cmd_label(args) -> int:
    cfg = _args_config(args)
    pairs_path = _need(_pick(args.pairs, cfg.paths, "pairs"), "--pairs")
    out = _need(_pick(args.out, cfg.paths, "labeled"), "--out")
    dataset = read_pairs_jsonl(pairs_path)
    examples = label_distilled_pairs(
        dataset,
        min_match_rate=args.min_match_rate,
        include_instruction=not args.task_agnostic,
    )
    write_labeled_jsonl(examples, out)
    effective = {
        "command": "label",
        "min_match_rate": args.min_match_rate,
        "task_agnostic": args.task_agnostic,
        "config": cfg.to_dict(),
    }
    _write_manifest(out, "label", effective, [pairs_path])
    print(f"labeled {len(examples)} examples -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _args_config(args)
    data_path = _need(_pick(args.data, cfg.paths, "labeled"), "--data")
    out = _need(_pick(args.out, cfg.paths, "checkpoint"), "--out")
    examples = read_labeled_jsonl(data_path)
    train_cfg = _train_config(cfg, args)
    if args.resume:
        model = load_checkpoint(args.resume)
    else:
        # vocabulary and config are derived from the data unless resuming
        vocab = build_vocab(examples)
        model_cfg = _model_config(cfg, args, vocab.size)
        model = Model(config=model_cfg, vocab=vocab, params=init_params(model_cfg))
    model, report = train(model, examples, train_cfg)
    save_checkpoint(model, out)
    for ep in report.epochs:
        print(f"epoch {ep.epoch}\tloss {ep.loss:.6f}\taccuracy {ep.token_accuracy:.4f}")
    effective = {
        "command": "train",
        "train": asdict(train_cfg),
        "model": asdict(model.config),
        "resume": args.resume,
        "config": cfg.to_dict(),
    }
    inputs = [data_path] + ([args.resume] if args.resume else [])
    _write_manifest(out, "train", effective, inputs)
    print(f"saved checkpoint -> {out}")
    return 0


def _compression_target(cfg: RunConfig, args) -> tuple[float | None, int | None]:
    ratio = _pick(args.ratio, cfg.compress, "ratio")
    budget = _pick(args.budget, cfg.compress, "budget")
    if args.ratio is not None and args.budget is not None:
        raise ConfigValidationError("set only one of --ratio and --budget")
    if ratio is not None and budget is not None:
        # flag on one side overrides the config file on the other
        if args.ratio is not None:
            budget = None
        elif args.budget is not None:
            ratio = None
        else:
            raise ConfigValidationError("set only one of ratio and budget")
    if ratio is None and budget is None:
        raise ConfigValidationError("a compression target (ratio or budget) is required")
    return ratio, budget


def cmd_compress(args) -> int:
    cfg = _args_config(args)
    ckpt = _need(_pick(args.checkpoint, cfg.paths, "checkpoint"), "--checkpoint")
    input_path = _need(args.input, "--input")
    ratio, budget = _compression_target(cfg, args)
    instruction = _pick(args.instruction, cfg.compress, "instruction", "")
    model = load_checkpoint(ckpt)
    text = Path(input_path).read_text(encoding="utf-8")
    request = CompressionRequest(
        original=text, instruction=instruction, keep_ratio=ratio, unit_budget=budget
    )
    result = compress(model, request)
    record = json.dumps(result.to_record(), ensure_ascii=False)
    if args.out:
        Path(args.out).write_text(record + "\n", encoding="utf-8")
        effective = {
            "command": "compress",
            "ratio": ratio,
            "budget": budget,
            "instruction": instruction,
            "config": cfg.to_dict(),
        }
        _write_manifest(args.out, "compress", effective, [ckpt, input_path])
        print(f"compressed {result.n_original} -> {result.n_kept} words -> {args.out}")
    else:
        print(record)
    return 0


def _read_qa_jsonl(path) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"evaluation data not found: {path}")
    records = []
    with open(p, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            records.append(rec)
    return records


def cmd_eval(args) -> int:
    cfg = _args_config(args)
    ckpt = _need(_pick(args.checkpoint, cfg.paths, "checkpoint"), "--checkpoint")
    data_path = _need(args.data, "--data")
    out = _need(_pick(args.out, cfg.paths, "report"), "--out")
    ratio, budget = _compression_target(cfg, args)
    model = load_checkpoint(ckpt)
    records = _read_qa_jsonl(data_path)
    items = []
    for rec in records:
        question = rec["question"]
        instruction = "" if args.task_agnostic else rec.get("instruction", question)
        request = CompressionRequest(
            original=rec["context"],
            instruction=instruction,
            keep_ratio=ratio,
            unit_budget=budget,
        )
        result = compress(model, request)
        items.append(
            (result, QARecord(question=question, gold_answers=tuple(rec["answers"])))
        )
    target = ContextAnswerTarget(max_words=args.max_answer_words)
    report = evaluate_downstream(target, items)
    effective = {
        "command": "eval",
        "ratio": ratio,
        "budget": budget,
        "task_agnostic": args.task_agnostic,
        "max_answer_words": args.max_answer_words,
        "config": cfg.to_dict(),
    }
    run_id, config_digest = _run_identity("eval", effective, [ckpt, data_path])
    doc = {
        "run_id": run_id,
        "config_digest": config_digest,
        "metrics": dict(report.metrics)
        | {"n_scored": report.n_scored, "n_failed": report.n_failed},
        "per_example": report.per_example,
    }
    Path(out).write_text(
        json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _write_manifest(out, "eval", effective, [ckpt, data_path])
    print(f"scored {report.n_scored} items (token_f1 {report.metrics['token_f1']:.4f}) -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _args_config(args)
    base = _need(args.base_checkpoint, "--base-checkpoint")
    extra_path = _need(args.extra, "--extra")
    eval_path = _need(args.eval_data, "--eval-data")
    out_dir = Path(_need(_pick(args.out_dir, cfg.paths, "out_dir"), "--out-dir"))
    try:
        fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    except ValueError as exc:
        raise ConfigValidationError(f"bad --fractions value: {exc}") from exc
    model = load_checkpoint(base)
    extra = read_labeled_jsonl(extra_path)
    eval_set = read_labeled_jsonl(eval_path)
    train_cfg = _train_config(cfg, args)
    sweep = data_efficiency_sweep(model, extra, fractions, eval_set, train_cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    effective = {
        "command": "sweep",
        "fractions": fractions,
        "train": asdict(train_cfg),
        "config": cfg.to_dict(),
    }
    run_id, config_digest = _run_identity(
        "sweep", effective, [base, extra_path, eval_path]
    )
    lines = ["fraction\tn_extra\ttoken_accuracy"]
    for i, cell in enumerate(sweep.cells):
        doc = {
            "run_id": run_id,
            "config_digest": config_digest,
            "fraction": cell.fraction,
            "metrics": dict(cell.report.metrics),
            "per_example": cell.report.per_example,
        }
        cell_path = out_dir / f"cell_{i}.json"
        cell_path.write_text(
            json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        lines.append(
            f"{cell.fraction:g}\t{cell.report.metrics['n_extra']:g}"
            f"\t{cell.report.metrics['token_accuracy']:.6f}"
        )
    summary = out_dir / "summary.tsv"
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(summary, "sweep", effective, [base, extra_path, eval_path])
    print("\n".join(lines))
    print(f"wrote {len(sweep.cells)} cell reports -> {out_dir}")
    return 0


def cmd_stats(args) -> int:
    _args_config(args)  # nothing read from it yet, but bad files still fail fast
    dataset: DistilledDataset = read_pairs_jsonl(args.dataset)
    hist = ratio_histogram(dataset, bin_width=args.bin_width)
    print(f"pairs\t{hist.n}")
    print(f"mean_ratio\t{hist.mean:.4f}")
    for i, count in enumerate(hist.counts):
        lo, hi = hist.bin_edges[i], hist.bin_edges[i + 1]
        print(f"[{lo:g}, {hi:g})\t{count}")
    return 0


# ------------------------------------------------------------ entry point


def build_parser() -> _Parser:
    parser = _Parser(prog="efpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")

    p = sub.add_parser("distill", help="compress corpus chunks through a provider")
    common(p)
    p.add_argument("--corpus", help="JSONL ({'text', 'instruction'?}) or plain text file")
    p.add_argument("--out", help="output pairs JSONL")
    p.add_argument("--instruction", help="override instruction for every document")
    p.add_argument("--max-units", type=int, help="max words per chunk (default 512)")
    p.add_argument("--max-concurrency", type=int, help="parallel provider calls")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mock", dest="mock", action="store_true", default=None,
                   help="use the offline deterministic provider (default)")
    g.add_argument("--live", dest="mock", action="store_false", default=None,
                   help="use the HTTP provider (reads EFPC_API_KEY)")
    p.add_argument("--base-url", help="chat-completion endpoint URL")
    p.add_argument("--model-name", help="provider model identifier")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("label", help="align pairs into per-word keep labels")
    common(p)
    p.add_argument("--pairs", help="pairs JSONL from distill")
    p.add_argument("--out", help="output labeled JSONL")
    p.add_argument("--min-match-rate", type=float, default=0.0,
                   help="drop pairs whose alignment matched less than this")
    p.add_argument("--task-agnostic", action="store_true",
                   help="ignore instructions; emit boundary 0 examples")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train the word classifier")
    common(p)
    p.add_argument("--data", help="labeled JSONL")
    p.add_argument("--out", help="output checkpoint path")
    p.add_argument("--resume", help="continue from an existing checkpoint")
    p.add_argument("--loss", choices=["agnostic", "drop", "mask"], help="loss variant")
    p.add_argument("--lr", type=float, help="learning rate (default 1e-5)")
    p.add_argument("--batch-size", type=int, help="examples per update (default 10)")
    p.add_argument("--epochs", type=int, help="training epochs (default 10)")
    p.add_argument("--seed", type=int, help="shuffling / init seed")
    p.add_argument("--embed-dim", type=int, help="model width (default 64)")
    p.add_argument("--layers", type=int, help="encoder blocks (default 2)")
    p.add_argument("--heads", type=int, help="attention heads (default 4)")
    p.add_argument("--ffn-dim", type=int, help="feed-forward width (default 128)")
    p.add_argument("--max-seq-len", type=int, help="window length (default 256)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compress", help="compress one document with a checkpoint")
    common(p)
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--input", help="text file to compress")
    p.add_argument("--instruction", help="task description (empty = task-agnostic)")
    p.add_argument("--ratio", type=float, help="keep fraction τ in (0,1]")
    p.add_argument("--budget", type=int, help="maximum words to keep")
    p.add_argument("--out", help="write the result record here instead of stdout")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("eval", help="compress QA contexts and score answers")
    common(p)
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--data", help="JSONL of {'context','question','answers'}")
    p.add_argument("--ratio", type=float, help="keep fraction τ in (0,1]")
    p.add_argument("--budget", type=int, help="maximum words to keep")
    p.add_argument("--task-agnostic", action="store_true",
                   help="compress without the question as instruction")
    p.add_argument("--max-answer-words", type=int, default=8,
                   help="answer length of the offline target")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy vs amount of extra training data")
    common(p)
    p.add_argument("--base-checkpoint", help="starting model")
    p.add_argument("--extra", help="labeled JSONL of extra training data")
    p.add_argument("--eval-data", help="labeled JSONL scored per cell")
    p.add_argument("--fractions", default="0,0.1,0.5,1.0",
                   help="comma-separated fractions of the extra data")
    p.add_argument("--out-dir", help="directory for cell reports and summary.tsv")
    p.add_argument("--loss", choices=["agnostic", "drop", "mask"], help="loss variant")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--batch-size", type=int, help="examples per update")
    p.add_argument("--epochs", type=int, help="training epochs per cell")
    p.add_argument("--seed", type=int, help="subset / shuffling seed")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="ratio histogram of a pairs dataset")
    common(p)
    p.add_argument("--dataset", required=True, help="pairs JSONL from distill")
    p.add_argument("--bin-width", type=float, default=1.0, help="histogram bin width")
    p.set_defaults(func=cmd_stats)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # -h/--help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EfpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(run_cli())
