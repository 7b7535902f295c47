import argparse
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..agents.accounting import parameter_ledger
from ..agents.adapted_model import AdaptedModel
from ..agents.trainer import train_adaptation
from ..agents.zero_shot import zero_shot_probability
from ..core.config import ExperimentConfig
from ..core.errors import ConfigError, UsageError
from ..data.io import save_ppm, write_manifest
from ..data.perturb import jpeg_roundtrip, psnr
from ..data.splits import build_splits
from ..data.synth import materialize, pretraining_corpus
from ..eval.metrics import Scorer, evaluate
from ..eval.sweeps import (
    compare_strategies,
    export_features,
    fewshot_experiment,
    load_eval_sets,
    robustness_sweep,
    size_ablation,
    strategy_specs,
)
from ..managers.checkpoint_manager import read_checkpoint, save_checkpoint
from ..managers.report_manager import ReportManager, emit_report
from ..managers.run_manager import RunManager
from ..models.config_models import StrategyKind
from ..models.metrics_models import RunMetadata
from ..models.sample_models import SampleRecord, SplitSpec
from ..vlm.encoder import DualEncoder, build_backbone
from ..vlm.pretrain import pretrain_toy
from ..vlm.vocab import Vocabulary

logger = logging.getLogger(__name__)

PROG = "vlm"
GEN_DATA_IMAGES = 8


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def valid_flags(self) -> List[str]:
        return sorted(opt for action in self._actions for opt in action.option_strings)

    def error(self, message: str):
        raise UsageError(f"{message}. Valid flags for {self.prog}: {', '.join(self.valid_flags())}")


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key"
    )
    parser.add_argument("--seed", type=int, help="Training and data seed (training.seed)")
    parser.add_argument("--out", help="Run directory (default: $VLM_RUN_ROOT/<command>-<digest>-seed<seed>)")


def _model_flags(parser: argparse.ArgumentParser, checkpoint: bool = False, zero_shot: bool = False) -> None:
    parser.add_argument("--backbone", help="Dual-encoder checkpoint to start from")
    if checkpoint:
        parser.add_argument("--checkpoint", help="Adapted or dual-encoder checkpoint to evaluate")
    if zero_shot:
        parser.add_argument("--zero-shot", action="store_true", help="Score with class-word text embeddings")


def _strategy_flags(parser: argparse.ArgumentParser, multiple: bool = False) -> None:
    parser.add_argument("--strategy", choices=[k.value for k in StrategyKind], help="strategy.kind")
    parser.add_argument("--m", type=int, help="Prompt context tokens (strategy.m)")
    parser.add_argument("--alpha", type=float, help="Adapter residual ratio (strategy.alpha)")
    parser.add_argument("--reduction", type=int, help="Adapter reduction (strategy.reduction)")
    parser.add_argument("--lr", type=float, help="Learning rate (strategy.lr)")
    parser.add_argument("--epochs", type=int, help="Training epochs (training.epochs)")
    parser.add_argument("--augment", action="store_true", help="Blur/JPEG augmentation during training")
    if multiple:
        parser.add_argument("--strategies", help="Comma-separated kinds, or 'all'")


def build_parser() -> CommandParser:
    parser = CommandParser(prog=PROG, description="Toy vision-language deepfake detection experiments")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    pretrain = commands.add_parser("pretrain", help="Contrastive pre-training of the dual encoder")
    _common_flags(pretrain)
    pretrain.add_argument("--epochs", type=int, help="Pre-training epochs (training.pretrain_epochs)")

    adapt = commands.add_parser("adapt", help="Train one adaptation strategy")
    _common_flags(adapt)
    _model_flags(adapt)
    _strategy_flags(adapt)

    evaluate_cmd = commands.add_parser("eval", help="AP/accuracy on every eval family")
    _common_flags(evaluate_cmd)
    _model_flags(evaluate_cmd, checkpoint=True, zero_shot=True)
    _strategy_flags(evaluate_cmd, multiple=True)

    robustness = commands.add_parser("robustness", help="JPEG/blur robustness sweep")
    _common_flags(robustness)
    _model_flags(robustness, checkpoint=True, zero_shot=True)
    _strategy_flags(robustness)

    fewshot = commands.add_parser("fewshot", help="Train on k real + k fake samples per category")
    _common_flags(fewshot)
    _model_flags(fewshot)
    _strategy_flags(fewshot, multiple=True)
    fewshot.add_argument("--k", type=int, help="Samples per class per category (eval.kshot)")

    ablate = commands.add_parser("ablate", help="Train-size ablation")
    _common_flags(ablate)
    _model_flags(ablate)
    _strategy_flags(ablate, multiple=True)
    ablate.add_argument("--sizes", help="Comma-separated even train sizes (default: scaled full-size defaults)")

    features = commands.add_parser("export-features", help="Image embeddings of every eval sample")
    _common_flags(features)
    _model_flags(features, checkpoint=True)

    gen_data = commands.add_parser("gen-data", help="Split manifests and sample PPM images")
    _common_flags(gen_data)
    gen_data.add_argument(
        "--images", type=int, default=GEN_DATA_IMAGES, help="PPM images written per split file"
    )
    parser.subcommands = commands.choices
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args, extras = parser.parse_known_args(list(argv))
    if extras:
        parser.subcommands[args.command].error(f"unrecognized arguments: {' '.join(extras)}")
    return args


# configuration


def _parse_overrides(pairs: Sequence[str]) -> Dict[str, str]:
    overrides: Dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file, then --set overrides, then the dedicated flags"""
    config = ExperimentConfig()
    if args.config:
        config = ExperimentConfig.from_canonical_text(Path(args.config).read_text(encoding="utf-8"))
    overrides = _parse_overrides(args.set)

    flags = {
        "seed": "training.seed",
        "strategy": "strategy.kind",
        "m": "strategy.m",
        "alpha": "strategy.alpha",
        "reduction": "strategy.reduction",
        "lr": "strategy.lr",
        "k": "eval.kshot",
    }
    for flag, key in flags.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "epochs", None) is not None:
        key = "training.pretrain_epochs" if args.command == "pretrain" else "training.epochs"
        overrides[key] = str(args.epochs)
    if getattr(args, "augment", False):
        overrides["strategy.augment"] = "true"
    return config.with_overrides(overrides)


def _strategy_kinds(args: argparse.Namespace, config: ExperimentConfig) -> List[StrategyKind]:
    raw = getattr(args, "strategies", None)
    if not raw:
        return [config.strategy.kind]
    if raw == "all":
        return list(StrategyKind)
    try:
        return [StrategyKind(part.strip()) for part in raw.split(",") if part.strip()]
    except ValueError:
        valid = ", ".join(k.value for k in StrategyKind)
        raise UsageError(f"--strategies expects 'all' or a list of: {valid}") from None


def _ablation_sizes(args: argparse.Namespace, config: ExperimentConfig) -> Tuple[int, ...]:
    if not args.sizes:
        return config.data.ablation_sizes
    try:
        return tuple(int(part) for part in args.sizes.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"--sizes expects comma-separated integers, got {args.sizes!r}") from None


# models


def load_backbone(
    args: argparse.Namespace, config: ExperimentConfig
) -> Tuple[DualEncoder, Vocabulary, ExperimentConfig]:
    """
    The --backbone checkpoint (or the backbone of an adapted one), or a freshly
    initialised encoder when no checkpoint is given.

    Returns:
        (backbone, vocabulary, config with the backbone's model section)
    """
    path = getattr(args, "backbone", None)
    if path:
        contents = read_checkpoint(path)
        model = contents.model
        backbone = model.backbone if isinstance(model, AdaptedModel) else model
        return backbone, contents.vocab, config.model_copy(update={"model": backbone.config})
    logger.warning("No --backbone given; starting from an untrained dual encoder")
    vocab = Vocabulary.default()
    return build_backbone(config.model, vocab, config.training.seed), vocab, config


def _train_set(config: ExperimentConfig, seed: int) -> List[SampleRecord]:
    split = build_splits(
        SplitSpec(
            train_size=config.data.train_size,
            eval_size=0,
            categories=config.data.categories,
            eval_families=(),
            seed=seed,
        )
    )
    return materialize(split.train, config.model.image_side)


def _write_curve(reports: ReportManager, name: str, curve: Sequence[float]) -> Path:
    frame = pd.DataFrame({"epoch": range(1, len(curve) + 1), "loss": list(curve)})
    return reports.write_raw_frame(name, frame)


def _train_scorer(
    backbone: DualEncoder,
    vocab: Vocabulary,
    config: ExperimentConfig,
    seed: int,
    run: RunManager,
    reports: ReportManager,
) -> Tuple[Scorer, RunMetadata]:
    """Train the configured strategy, store it in the run directory and score with it"""
    train_set = _train_set(config, seed)
    model, curve = train_adaptation(
        backbone,
        config.strategy,
        train_set,
        epochs=config.training.epochs,
        batch=config.training.batch,
        seed=seed,
        vocab=vocab,
    )
    run.record(
        [
            save_checkpoint(model, run.path("adapted.ckpt"), config),
            _write_curve(reports, "loss_curve.csv", curve),
        ]
    )
    metadata = RunMetadata(
        strategy=config.strategy.kind.value,
        seed=seed,
        config_digest=config.digest(),
        train_size=len(train_set),
    )
    return model.classify_batch, metadata


def _zero_shot_scorer(backbone: DualEncoder, vocab: Vocabulary, config: ExperimentConfig, seed: int):
    metadata = RunMetadata(strategy="zero_shot", seed=seed, config_digest=config.digest())
    return (lambda images: zero_shot_probability(backbone, vocab, images)), metadata


# commands


class CommandContext:
    """Resolved inputs of one command invocation"""

    def __init__(self, args: argparse.Namespace, config: ExperimentConfig):
        self.args = args
        self.checkpoint = None
        if getattr(args, "checkpoint", None):
            self.checkpoint = read_checkpoint(args.checkpoint)
            config = config.model_copy(update={"model": self.checkpoint.config.model})
            if self.checkpoint.kind == "adapted":
                config = config.model_copy(update={"strategy": self.checkpoint.config.strategy})
            self.backbone, self.vocab = None, self.checkpoint.vocab
        elif args.command in ("pretrain", "gen-data"):
            self.backbone, self.vocab = None, Vocabulary.default()
        else:
            self.backbone, self.vocab, config = load_backbone(args, config)
        self.config = config
        self.seed = config.training.seed
        self.run = RunManager(args.command, config, self.seed, out_dir=args.out)
        self.reports = ReportManager(self.run.run_dir)

    def scorer(self) -> Tuple[Scorer, RunMetadata]:
        """Stored model, zero-shot backbone, or a freshly trained strategy"""
        if self.checkpoint is not None:
            model = self.checkpoint.model
            if isinstance(model, AdaptedModel):
                metadata = RunMetadata(
                    strategy=model.spec.kind.value,
                    seed=self.checkpoint.seed,
                    config_digest=self.config.digest(),
                    extra={"checkpoint": str(self.args.checkpoint)},
                )
                return model.classify_batch, metadata
            return _zero_shot_scorer(model, self.vocab, self.config, self.seed)
        if self.args.zero_shot:
            return _zero_shot_scorer(self.backbone, self.vocab, self.config, self.seed)
        return _train_scorer(self.backbone, self.vocab, self.config, self.seed, self.run, self.reports)

    def image_backbone(self) -> DualEncoder:
        if self.checkpoint is not None:
            model = self.checkpoint.model
            return model.backbone if isinstance(model, AdaptedModel) else model
        return self.backbone


def cmd_pretrain(ctx: CommandContext) -> List[Path]:
    config, seed = ctx.config, ctx.seed
    corpus = pretraining_corpus(config.data.pretrain_size, config.data.categories, seed, config.model.image_side)
    model = build_backbone(config.model, ctx.vocab, seed)
    model, curve = pretrain_toy(
        model,
        corpus,
        ctx.vocab,
        epochs=config.training.pretrain_epochs,
        batch=config.training.batch,
        lr=config.training.pretrain_lr,
        seed=seed,
    )
    return [
        save_checkpoint(model, ctx.run.path("backbone.ckpt"), config, ctx.vocab),
        ctx.reports.write_text("vocab.txt", ctx.vocab.to_text()),
        _write_curve(ctx.reports, "pretrain_loss.csv", curve),
        ctx.reports.write_frame("parameter_ledger.csv", parameter_ledger(config.model, model.total_parameters())),
    ]


def cmd_adapt(ctx: CommandContext) -> List[Path]:
    config, seed = ctx.config, ctx.seed
    train_set = _train_set(config, seed)
    model, curve = train_adaptation(
        ctx.backbone,
        config.strategy,
        train_set,
        epochs=config.training.epochs,
        batch=config.training.batch,
        seed=seed,
        vocab=ctx.vocab,
    )
    report = model.verify_frozen()
    if report.applicable:
        logger.info(f"Freeze check: {'ok' if report.frozen_ok else f'changed {report.first_diff}'}")
    ledger = parameter_ledger(config.model, ctx.backbone.total_parameters(), config.strategy)
    return [
        save_checkpoint(model, ctx.run.path("adapted.ckpt"), config),
        _write_curve(ctx.reports, "loss_curve.csv", curve),
        write_manifest([s.entry for s in train_set], ctx.run.path("train.txt")),
        ctx.reports.write_frame("parameter_ledger.csv", ledger),
    ]


def cmd_eval(ctx: CommandContext) -> List[Path]:
    eval_sets = load_eval_sets(ctx.config, ctx.seed)
    if ctx.args.strategies and ctx.checkpoint is None and not ctx.args.zero_shot:
        specs = strategy_specs(ctx.config.strategy, _strategy_kinds(ctx.args, ctx.config))
        reports = compare_strategies(
            ctx.backbone, specs, _train_set(ctx.config, ctx.seed), eval_sets, ctx.config, ctx.seed, ctx.vocab
        )
        return emit_report(reports, ctx.run.run_dir, "report")
    scorer, metadata = ctx.scorer()
    return emit_report(evaluate(scorer, eval_sets, metadata), ctx.run.run_dir, "report")


def cmd_robustness(ctx: CommandContext) -> List[Path]:
    eval_sets = load_eval_sets(ctx.config, ctx.seed)
    scorer, metadata = ctx.scorer()
    result = robustness_sweep(
        scorer, eval_sets, metadata, ctx.config.eval.qualities, ctx.config.eval.sigmas
    )
    return emit_report(result, ctx.run.run_dir, "robustness")


def cmd_fewshot(ctx: CommandContext) -> List[Path]:
    config = ctx.config
    kinds = _strategy_kinds(ctx.args, config) if ctx.args.strategies else list(StrategyKind)
    reports = fewshot_experiment(
        ctx.backbone,
        strategy_specs(config.strategy, kinds),
        _train_set(config, ctx.seed),
        config.eval.kshot,
        load_eval_sets(config, ctx.seed),
        config,
        ctx.seed,
        ctx.vocab,
    )
    return emit_report(reports, ctx.run.run_dir, f"fewshot_k{config.eval.kshot}")


def cmd_ablate(ctx: CommandContext) -> List[Path]:
    config = ctx.config
    sizes = _ablation_sizes(ctx.args, config)
    eval_sets = load_eval_sets(config, ctx.seed)
    paths: List[Path] = []
    for spec in strategy_specs(config.strategy, _strategy_kinds(ctx.args, config)):
        reports = size_ablation(ctx.backbone, spec, sizes, ctx.seed, config, ctx.vocab, eval_sets)
        paths += emit_report(reports, ctx.run.run_dir, f"ablation_{spec.kind.value}")
    return paths


def cmd_export_features(ctx: CommandContext) -> List[Path]:
    frame = export_features(ctx.image_backbone(), load_eval_sets(ctx.config, ctx.seed))
    return [ctx.reports.write_raw_frame("features.csv", frame)]


def cmd_gen_data(ctx: CommandContext) -> List[Path]:
    config = ctx.config
    if ctx.args.images < 0:
        raise UsageError(f"--images must be non-negative, got {ctx.args.images}")
    split = build_splits(
        SplitSpec(
            train_size=config.data.train_size,
            eval_size=config.data.eval_size,
            categories=config.data.categories,
            eval_families=config.data.families,
            seed=ctx.seed,
        )
    )
    manifests = {"train": split.train}
    manifests.update({f"eval_{family.value}": entries for family, entries in split.evaluation.items()})

    paths: List[Path] = []
    for name, entries in manifests.items():
        paths.append(write_manifest(entries, ctx.run.path(f"{name}.txt")))
        samples = materialize(entries[: ctx.args.images], config.model.image_side)
        for index, sample in enumerate(samples):
            paths.append(
                save_ppm(sample.image, ctx.run.path(f"images/{name}/{index:05d}_{sample.family.value}.ppm"))
            )
        if samples:
            compressed = jpeg_roundtrip(samples[0].image, 50)
            logger.info(f"{name}: JPEG q=50 PSNR of the first sample {psnr(samples[0].image, compressed):.2f} dB")
    return paths


COMMANDS: Dict[str, Callable[[CommandContext], List[Path]]] = {
    "pretrain": cmd_pretrain,
    "adapt": cmd_adapt,
    "eval": cmd_eval,
    "robustness": cmd_robustness,
    "fewshot": cmd_fewshot,
    "ablate": cmd_ablate,
    "export-features": cmd_export_features,
    "gen-data": cmd_gen_data,
}


def run_command(argv: Sequence[str]) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a usage or configuration error, 2 on any other failure
    """
    command: Optional[str] = None
    try:
        args = parse_args(argv)
        command = args.command
        config = resolve_config(args)
        ctx = CommandContext(args, config)
        outputs = COMMANDS[command](ctx)
        ctx.run.record(outputs)
        ctx.run.finish()
        return 0
    except (UsageError, ConfigError) as e:
        logger.error(f"Usage error: {e}")
        return 1
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    except Exception as e:
        logger.error(f"{command or PROG} failed: {type(e).__name__}: {e}")
        return 2
