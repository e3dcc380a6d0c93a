"""Command-line entry point.

Subcommands: synthesize, train, evaluate, predict, ablate, similarity,
embed-train. Every command accepts --seed and --config; a config file holds
flat "key = value" lines whose keys mirror the command's long flags, with
explicit command-line flags taking precedence.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np
import torch

from .augment import AugmentSettings, preprocess
from .checkpoint import load_checkpoint
from .data import decode_tokens, load_dataset, split_samples
from .embeddings import (
    SubwordConfig,
    ToyCorpus,
    load_embedding_file,
    save_embedding_file,
    train_skipgram,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    HandrecError,
    InvalidInputError,
    NumericError,
    ShapeError,
)
from .evaluate import ABLATION_GRID, evaluate, run_ablation, similarity_matrix
from .model import ModelConfig
from .reports import (
    write_ablation_table,
    write_metric_report,
    write_similarity,
    write_training_report,
)
from .synth import Degradations, SynthConfig, default_fonts, load_lexicon, synthesize_dataset
from .training import TrainConfig, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _float_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return float(parts[0]), float(parts[1])


def _int_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return int(parts[0]), int(parts[1])


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="global random seed")
    sub.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="handrec", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    sp = subs.add_parser("synthesize", parents=[], help="render a degraded word-image dataset")
    sp.add_argument("--lexicon", required=True, help="word list, one UTF-8 word per line")
    sp.add_argument("--fonts", default=None, help="comma-separated TTF paths (default: bundled DejaVu)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--samples-per-word", type=int, default=5)
    sp.add_argument("--height", type=int, default=64)
    sp.add_argument("--blur", type=_float_range, default=(0.0, 1.0), help="blur radius lo:hi")
    sp.add_argument("--occlusions", type=_int_range, default=(0, 1), help="strip count lo:hi")
    sp.add_argument("--occlusion-width", type=_int_range, default=(2, 4))
    sp.add_argument("--ink", type=_float_range, default=(0.7, 1.0), help="ink alpha lo:hi")
    sp.add_argument("--test-blur", type=_float_range, default=None, help="test-split blur override")
    sp.add_argument("--test-occlusions", type=_int_range, default=None)
    sp.add_argument("--test-occlusion-width", type=_int_range, default=None)
    _common_flags(sp)
    commands["synthesize"] = sp

    tp = subs.add_parser("train", help="train a recognizer")
    tp.add_argument("--data", required=True, help="dataset directory (train/val/test indexes)")
    tp.add_argument("--embeddings", required=True, help="word-vector file supervising the semantics")
    tp.add_argument("--out", required=True, help="run directory for checkpoints and logs")
    tp.add_argument("--preset", choices=["paper", "toy"], default="paper")
    tp.add_argument("--epochs", type=int, default=50)
    tp.add_argument("--batch-size", type=int, default=64)
    tp.add_argument("--lr", type=float, default=1.0)
    tp.add_argument("--loss-weight", type=float, default=1.0, help="embedding-loss balance")
    tp.add_argument("--beam-width", type=int, default=5)
    tp.add_argument("--no-augment", action="store_true")
    tp.add_argument("--no-attention", action="store_true")
    tp.add_argument("--no-semantic-init", action="store_true")
    tp.add_argument("--early-stop-wer", type=float, default=None)
    tp.add_argument("--save-every", type=int, default=1)
    _common_flags(tp)
    commands["train"] = tp

    ep = subs.add_parser("evaluate", help="decode a split and write a metric report")
    ep.add_argument("--data", required=True)
    ep.add_argument("--split", choices=["train", "val", "test"], default="test")
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--beam-width", type=int, default=5)
    ep.add_argument("--batch-size", type=int, default=32)
    ep.add_argument("--out", required=True)
    _common_flags(ep)
    commands["evaluate"] = ep

    pp = subs.add_parser("predict", help="transcribe individual word images")
    pp.add_argument("--checkpoint", required=True)
    pp.add_argument("--beam-width", type=int, default=5)
    pp.add_argument("images", nargs="+", help="image files to transcribe")
    _common_flags(pp)
    commands["predict"] = pp

    ap = subs.add_parser("ablate", help="train the ablation grid and tabulate WER")
    ap.add_argument("--data", required=True)
    ap.add_argument("--embeddings", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--preset", choices=["paper", "toy"], default="toy")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--batch-size", type=int, default=64)
    ap.add_argument("--lr", type=float, default=1.0)
    ap.add_argument("--loss-weight", type=float, default=1.0)
    ap.add_argument("--beam-width", type=int, default=5)
    ap.add_argument("--no-augment", action="store_true")
    ap.add_argument("--seeds", type=_int_list, default=(0,), help="comma-separated seeds")
    ap.add_argument(
        "--variants",
        default=None,
        help="comma-separated subset of: " + ",".join(v[0] for v in ABLATION_GRID),
    )
    _common_flags(ap)
    commands["ablate"] = ap

    mp = subs.add_parser("similarity", help="cosine similarity of image semantics vs lexicon")
    mp.add_argument("--checkpoint", required=True)
    mp.add_argument("--data", required=True)
    mp.add_argument("--split", choices=["train", "val", "test"], default="test")
    mp.add_argument("--embeddings", required=True)
    mp.add_argument("--lexicon", default=None, help="word list (default: split vocabulary)")
    mp.add_argument("--limit", type=int, default=50, help="max images to analyze")
    mp.add_argument("--out", required=True)
    mp.add_argument("--no-heatmap", action="store_true")
    _common_flags(mp)
    commands["similarity"] = mp

    wp = subs.add_parser("embed-train", help="train toy subword skip-gram embeddings")
    wp.add_argument("--corpus", required=True, help="text file, one sentence per line")
    wp.add_argument("--out", required=True, help="output word-vector file")
    wp.add_argument("--dim", type=int, default=32)
    wp.add_argument("--epochs", type=int, default=5)
    wp.add_argument("--window", type=int, default=2)
    wp.add_argument("--l-min", type=int, default=3)
    wp.add_argument("--l-max", type=int, default=6)
    _common_flags(wp)
    commands["embed-train"] = wp

    return parser, commands


def read_config_file(path: str) -> dict[str, str]:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
    return values


def _apply_config(command_parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Install config values as parser defaults; command-line flags still win."""
    actions = {a.dest: a for a in command_parser._actions}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in ("help", "config"):
            raise ConfigError(f"unknown config key: {key}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            lowered = raw.lower()
            if lowered not in ("true", "false", "0", "1"):
                raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
            defaults[dest] = lowered in ("true", "1")
        elif action.type is not None:
            try:
                defaults[dest] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"config key {key}: {exc}") from None
        else:
            defaults[dest] = raw
    command_parser.set_defaults(**defaults)


def _load_split(data_dir: str):
    return split_samples(load_dataset(data_dir))


def _augment_settings(args) -> AugmentSettings:
    return AugmentSettings.disabled() if args.no_augment else AugmentSettings()


def _train_config(args, out_dir: str) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        embedding_loss_weight=args.loss_weight,
        beam_width=args.beam_width,
        seed=args.seed,
        augmentation=_augment_settings(args),
        early_stop_wer=getattr(args, "early_stop_wer", None),
        save_every=getattr(args, "save_every", 1),
        out_dir=out_dir,
    )


def cmd_synthesize(args) -> int:
    fonts = tuple(args.fonts.split(",")) if args.fonts else default_fonts()
    lexicon = load_lexicon(args.lexicon)
    test_deg = None
    if any(x is not None for x in (args.test_blur, args.test_occlusions, args.test_occlusion_width)):
        test_deg = Degradations(
            blur_radius=args.test_blur or args.blur,
            occlusion_count=args.test_occlusions or args.occlusions,
            occlusion_width=args.test_occlusion_width or args.occlusion_width,
            ink_alpha=args.ink,
        )
    config = SynthConfig(
        lexicon=lexicon,
        fonts=fonts,
        samples_per_word=args.samples_per_word,
        height=args.height,
        degradations=Degradations(
            blur_radius=args.blur,
            occlusion_count=args.occlusions,
            occlusion_width=args.occlusion_width,
            ink_alpha=args.ink,
        ),
        test_degradations=test_deg,
        seed=args.seed,
    )
    counts = synthesize_dataset(config, args.out)
    total = sum(counts.values())
    print(
        f"wrote {total} images to {args.out} "
        f"(train {counts['train']} / val {counts['val']} / test {counts['test']})"
    )
    return 0


def cmd_train(args) -> int:
    splits = _load_split(args.data)
    table = load_embedding_file(args.embeddings)
    base = ModelConfig.toy() if args.preset == "toy" else ModelConfig.paper()
    model_config = dataclasses.replace(
        base,
        embed_dim=table.dimension,
        use_attention=not args.no_attention,
        semantic_init=not args.no_semantic_init,
    )
    result = train(
        splits["train"], splits["val"], table, model_config, _train_config(args, args.out)
    )
    write_training_report(result.history, args.out)
    last = result.history[-1]
    print(
        f"trained {len(result.history)} epochs; "
        f"final total loss {last['total']:.4f}, "
        f"best checkpoint {result.best_path}"
    )
    return 0


def cmd_evaluate(args) -> int:
    splits = _load_split(args.data)
    samples = splits[args.split]
    checkpoint = load_checkpoint(args.checkpoint)
    report = evaluate(checkpoint, samples, beam_width=args.beam_width, batch_size=args.batch_size)
    paths = write_metric_report(report, args.out)
    print(report.summary_line())
    print(f"report written to {paths['jsonl']}")
    return 0


def cmd_predict(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    model = checkpoint.build_model()
    for path in args.images:
        if not os.path.exists(path):
            raise DataError(f"image not found: {path}")
        arrays = preprocess(path, size=model.config.input_size)
        images = torch.from_numpy(np.stack([arrays])).unsqueeze(1)
        hyp = model.recognize(images, beam_width=args.beam_width)[0]
        print(f"{path}\t{decode_tokens(hyp.token_ids, checkpoint.charset)}")
    return 0


def cmd_ablate(args) -> int:
    splits = _load_split(args.data)
    table = load_embedding_file(args.embeddings)
    base = ModelConfig.toy() if args.preset == "toy" else ModelConfig.paper()
    model_config = dataclasses.replace(base, embed_dim=table.dimension)
    variants = ABLATION_GRID
    if args.variants:
        wanted = [v.strip() for v in args.variants.split(",") if v.strip()]
        by_name = {v[0]: v for v in ABLATION_GRID}
        unknown = [w for w in wanted if w not in by_name]
        if unknown:
            raise ConfigError(f"unknown ablation variants: {', '.join(unknown)}")
        variants = tuple(by_name[w] for w in wanted)
    rows = run_ablation(
        splits["train"],
        splits["val"],
        splits["test"],
        table,
        model_config,
        _train_config(args, args.out),
        variants=variants,
        seeds=args.seeds,
        progress=lambda msg: print(msg, flush=True),
    )
    paths = write_ablation_table(rows, args.out)
    print(f"ablation table written to {paths['jsonl']}")
    return 0


def cmd_similarity(args) -> int:
    splits = _load_split(args.data)
    samples = splits[args.split][: args.limit]
    checkpoint = load_checkpoint(args.checkpoint)
    table = load_embedding_file(args.embeddings)
    if table.dimension != checkpoint.embed_dim:
        raise DataError(
            f"embedding dimension {table.dimension} does not match "
            f"checkpoint embed_dim {checkpoint.embed_dim}"
        )
    if args.lexicon:
        words = list(load_lexicon(args.lexicon))
    else:
        words = sorted({s.transcription for s in samples})
    model = checkpoint.build_model()
    matrix = similarity_matrix(model, samples, words, table)
    labels = [os.path.basename(s.image_path) for s in samples]
    paths = write_similarity(matrix, labels, words, args.out, heatmap=not args.no_heatmap)
    print(f"similarity matrix written to {paths['tsv']}")
    return 0


def cmd_embed_train(args) -> int:
    corpus = ToyCorpus.from_text(args.corpus, context_window=args.window)
    table = train_skipgram(
        corpus,
        config=SubwordConfig(l_min=args.l_min, l_max=args.l_max),
        dim=args.dim,
        epochs=args.epochs,
        seed=args.seed,
    )
    save_embedding_file(table, args.out)
    print(f"trained {len(table)} word vectors (dim {table.dimension}) -> {args.out}")
    return 0


_HANDLERS = {
    "synthesize": cmd_synthesize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "ablate": cmd_ablate,
    "similarity": cmd_similarity,
    "embed-train": cmd_embed_train,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(commands[args.command], read_config_file(args.config))
            args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except (ConfigError, InvalidInputError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except HandrecError as exc:  # any future error type: treat as usage
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
