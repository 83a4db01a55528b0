"""
Command-line surface.

    python -m cli gen-data   --count 10 --vocab words.txt --out ds/ --seed 1
    python -m cli train      --manifest ds/ --out run/ [--steps ...] [--config run.cfg]
    python -m cli eval       --ckpt run/checkpoint.bin --manifest ds/ --mode i2c2w
    python -m cli recognize  --ckpt run/checkpoint.bin --image word.png
    python -m cli attn-export --ckpt run/checkpoint.bin --image word.png --out maps/

Exit codes: 0 success, 1 usage error, 2 runtime failure. Results go to
stdout, logs and errors to stderr.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NoReturn, Optional, Sequence

import torch
from pydantic import ValidationError

from config.settings import build_configs, load_config_file
from core.charset import DEFAULT_CHARSET, DEFAULT_POSITIONS, PositionSet
from core.exceptions import I2C2WError, UsageError
from core.logger import get_logger
from models.i2c import CharCandidate
from models.recognizer import DecodeMode, Recognizer
from synth.dataset import Manifest, generate_dataset, load_vocab
from synth.render import REGIME_RANGES, Regime
from trainer.checkpoint import load_checkpoint
from trainer.engine import Trainer
from trainer.evaluate import run_evaluation
from utils.image_io import export_attention_maps, load_grayscale, to_model_input

logger = get_logger()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

# flag dest -> config key
CONFIG_FLAGS = {
    "steps": "steps",
    "batch_size": "batch_size",
    "n_queries": "n_queries",
    "beta": "beta",
    "lr_backbone": "lr_backbone",
    "lr_transformer": "lr_transformer",
    "seed": "seed",
}


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, carrying its own synopsis."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value file; flags win over it")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--n-queries", type=int, help="N, number of character queries")
    parser.add_argument("--beta", type=float, help="position weight in the matching cost")
    parser.add_argument("--lr-backbone", type=float)
    parser.add_argument("--lr-transformer", type=float)
    parser.add_argument("--seed", type=int)


def build_parser() -> CommandParser:
    parser = CommandParser(prog="i2c2w", description="Two-stage scene text recognizer")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = commands.add_parser("gen-data", help="render a labelled word-image dataset")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--vocab", type=Path, required=True, help="one word per line")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--regime", choices=[r.value for r in Regime], default=Regime.NORMAL.value)
    gen.add_argument("--n-queries", type=int, default=DEFAULT_POSITIONS.N,
                     help="reject words that do not fit N-2 characters")
    gen.add_argument("--workers", type=int, default=0)

    train = commands.add_parser("train", help="train a recognizer end to end")
    train.add_argument("--manifest", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--ckpt", type=Path, help="resume from this checkpoint")
    _add_config_flags(train)

    ev = commands.add_parser("eval", help="word accuracy on a manifest")
    ev.add_argument("--ckpt", type=Path, required=True)
    ev.add_argument("--manifest", type=Path, required=True)
    ev.add_argument("--mode", choices=[m.value for m in DecodeMode], default=DecodeMode.I2C2W.value)
    ev.add_argument("--batch-size", type=int, default=64)

    rec = commands.add_parser("recognize", help="decode one image")
    rec.add_argument("--ckpt", type=Path, required=True)
    rec.add_argument("--image", type=Path, required=True)
    rec.add_argument("--mode", choices=[m.value for m in DecodeMode], default=DecodeMode.I2C2W.value)

    attn = commands.add_parser("attn-export", help="write per-query attention heat-maps")
    attn.add_argument("--ckpt", type=Path, required=True)
    attn.add_argument("--image", type=Path, required=True)
    attn.add_argument("--out", type=Path, required=True)
    return parser


# ==================== COMMANDS ====================

def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    if args.config:
        if not args.config.is_file():
            raise UsageError(f"config file {args.config} not found")
        values = load_config_file(args.config)
    for dest, key in CONFIG_FLAGS.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[key] = flag
    return values


def _load_image(model: Recognizer, path: Path) -> torch.Tensor:
    dtype = next(model.parameters()).dtype
    image = load_grayscale(path, model.cfg.canvas_height, model.cfg.canvas_width)
    return to_model_input(image, dtype).unsqueeze(0)


def candidate_rows(candidates: Sequence[CharCandidate], null_pos: int) -> List[CharCandidate]:
    """Non-null candidates ordered by position, then query."""
    kept = [c for c in candidates if c.char_class != DEFAULT_CHARSET.null_char_index and c.pos_class != null_pos]
    return sorted(kept, key=lambda c: (c.pos_class, c.query_index))


def cmd_gen_data(args: argparse.Namespace) -> int:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    vocab = load_vocab(args.vocab)
    manifest = generate_dataset(
        args.count, vocab, REGIME_RANGES[Regime(args.regime)], args.seed, args.out,
        workers=args.workers, positions=PositionSet(args.n_queries),
    )
    print(manifest.file)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    try:
        model_cfg, train_cfg = build_configs(_overrides(args))
    except KeyError as e:
        raise UsageError(f"unknown config key {e}") from None
    manifest = Manifest.load(args.manifest)
    result = Trainer(model_cfg, train_cfg, args.out).train(manifest, resume_from=args.ckpt)
    print(result.checkpoint_path)
    if result.final_loss is not None:
        print(f"final_loss {result.final_loss:.6f}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.ckpt).build_model()
    report = run_evaluation(model, Manifest.load(args.manifest), args.mode, args.batch_size)
    print(report)
    return EXIT_OK


def cmd_recognize(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.ckpt).build_model()
    result = model.recognize(_load_image(model, args.image), DecodeMode(args.mode))[0]
    print(result.word)
    if model.has_i2c:
        print(f"i2c_only {result.i2c_word}")
        print("query\tchar\tpos\tprob")
        for cand in candidate_rows(result.candidates, model.cfg.n_queries):
            symbol = DEFAULT_CHARSET.symbol(cand.char_class)
            print(f"{cand.query_index}\t{symbol}\t{cand.pos_class}\t{cand.char_prob:.4f}")
    return EXIT_OK


def cmd_attn_export(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.ckpt).build_model()
    images = _load_image(model, args.image)
    candidates = model.recognize(images)[0].candidates
    maps = model.attention_maps(images, upsample=True)[0]
    written = export_attention_maps(
        maps, [c.char_class for c in candidates], [c.pos_class for c in candidates], args.out,
    )
    for path in written:
        print(path)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "recognize": cmd_recognize,
    "attn-export": cmd_attn_export,
}


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    logger.info(f"▶️ {args.command}")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValidationError) as e:
        print(f"{parser.format_usage()}i2c2w {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (I2C2WError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(f"i2c2w {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILURE
