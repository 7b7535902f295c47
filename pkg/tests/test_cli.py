import json

import pandas as pd
import pytest

from app.src.api.commands import parse_args, resolve_config, run_command
from app.src.core.errors import UsageError
from app.src.managers.checkpoint_manager import read_checkpoint
from app.src.models.config_models import StrategyKind

TINY = {
    "model.d_model": "8",
    "model.n_layers": "1",
    "model.n_heads": "2",
    "model.d_embed": "8",
    "model.patch_size": "4",
    "model.image_side": "8",
    "model.context_len": "12",
    "data.train_size": "16",
    "data.eval_size": "4",
    "data.categories": "2",
    "data.pretrain_size": "8",
    "training.batch": "8",
    "training.epochs": "1",
    "training.pretrain_epochs": "1",
}


def tiny_flags():
    flags = []
    for key, value in TINY.items():
        flags += ["--set", f"{key}={value}"]
    return flags


def manifest_outputs(run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    return {entry["path"]: entry["sha256"] for entry in manifest["outputs"]}


@pytest.fixture(scope="module")
def pretrained(tmp_path_factory):
    out = tmp_path_factory.mktemp("pretrain")
    assert run_command(["pretrain", *tiny_flags(), "--seed", "5", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def adapted(pretrained, tmp_path_factory):
    out = tmp_path_factory.mktemp("adapt")
    argv = ["adapt", *tiny_flags(), "--backbone", str(pretrained / "backbone.ckpt"), "--strategy", "linear", "--out", str(out)]
    assert run_command(argv) == 0
    return out


# argument handling


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--bogus"],
        ["train"],
        [],
        ["adapt", "--strategy", "lora"],
        ["adapt", "--set", "no-equals-sign"],
        ["adapt", "--set", "strategy.temperature=1"],
        ["adapt", "--epochs", "many"],
    ],
)
def test_usage_errors_exit_1(argv, tmp_path):
    assert run_command([*argv, "--out", str(tmp_path)] if argv else argv) == 1


def test_unknown_flag_lists_valid_flags():
    with pytest.raises(UsageError, match="--strategy"):
        parse_args(["adapt", "--bogus"])


def test_help_exits_0():
    assert run_command(["eval", "--help"]) == 0


def test_missing_checkpoint_exits_2(tmp_path):
    assert run_command(["eval", "--checkpoint", str(tmp_path / "missing.ckpt"), "--out", str(tmp_path)]) == 2


def test_flags_override_set_and_file(tmp_path):
    config_file = tmp_path / "experiment.txt"
    config_file.write_text("strategy.m=4\ntraining.epochs=3\n")
    args = parse_args(
        ["adapt", "--config", str(config_file), "--set", "strategy.m=8", "--m", "12", "--strategy", "prompt", "--augment"]
    )
    config = resolve_config(args)
    assert config.strategy.m == 12
    assert config.strategy.kind is StrategyKind.PROMPT_TUNE
    assert config.strategy.augment is True
    assert config.training.epochs == 3


def test_epochs_flag_targets_the_command(tmp_path):
    assert resolve_config(parse_args(["pretrain", "--epochs", "9"])).training.pretrain_epochs == 9
    assert resolve_config(parse_args(["adapt", "--epochs", "9"])).training.epochs == 9


# end to end


def test_pretrain_outputs(pretrained):
    outputs = manifest_outputs(pretrained)
    for name in ["backbone.ckpt", "vocab.txt", "pretrain_loss.csv", "parameter_ledger.csv", "config.txt"]:
        assert name in outputs
    contents = read_checkpoint(pretrained / "backbone.ckpt")
    assert contents.kind == "dual_encoder"
    assert contents.config.model.d_model == 8
    curve = pd.read_csv(pretrained / "pretrain_loss.csv")
    assert list(curve.columns) == ["epoch", "loss"] and len(curve) == 1


def test_adapt_outputs(adapted):
    outputs = manifest_outputs(adapted)
    for name in ["adapted.ckpt", "loss_curve.csv", "train.txt", "parameter_ledger.csv"]:
        assert name in outputs
    contents = read_checkpoint(adapted / "adapted.ckpt")
    assert contents.kind == "adapted"
    assert contents.config.strategy.kind is StrategyKind.LINEAR_PROBE
    assert len((adapted / "train.txt").read_text().splitlines()) == 16


def test_eval_adapted_checkpoint(adapted, tmp_path):
    assert run_command(["eval", "--checkpoint", str(adapted / "adapted.ckpt"), *tiny_flags(), "--out", str(tmp_path)]) == 0
    report = pd.read_csv(tmp_path / "report.csv")
    assert list(report.dataset) == ["synth_gan_like", "synth_diffusion_like", "synth_commercial_like", "average"]
    assert report.n_real.tolist()[:3] == [2, 2, 2]
    assert "report.json" in manifest_outputs(tmp_path)


def test_eval_compares_strategies(pretrained, tmp_path):
    argv = ["eval", *tiny_flags(), "--backbone", str(pretrained / "backbone.ckpt"), "--strategies", "linear,adapter"]
    assert run_command([*argv, "--out", str(tmp_path)]) == 0
    summary = pd.read_csv(tmp_path / "report_summary.csv")
    assert list(summary.strategy) == ["linear", "adapter"]


def test_robustness_zero_shot(pretrained, tmp_path):
    argv = ["robustness", *tiny_flags(), "--backbone", str(pretrained / "backbone.ckpt"), "--zero-shot"]
    assert run_command([*argv, "--out", str(tmp_path)]) == 0
    sweep = pd.read_csv(tmp_path / "robustness.csv")
    assert len(sweep) == 15
    assert sweep.error.isna().all()


def test_fewshot_and_ablate(pretrained, tmp_path):
    backbone = ["--backbone", str(pretrained / "backbone.ckpt")]
    fewshot_dir, ablate_dir = tmp_path / "fewshot", tmp_path / "ablate"
    fewshot = ["fewshot", *tiny_flags(), *backbone, "--k", "1", "--strategies", "linear", "--out", str(fewshot_dir)]
    assert run_command(fewshot) == 0
    assert (fewshot_dir / "fewshot_k1_linear.csv").exists()
    ablate = ["ablate", *tiny_flags(), *backbone, "--sizes", "4,8", "--strategies", "linear", "--out", str(ablate_dir)]
    assert run_command(ablate) == 0
    frame = pd.read_csv(ablate_dir / "ablation_linear.csv")
    assert sorted(set(frame.train_size)) == [4, 8]


def test_export_features(pretrained, tmp_path):
    argv = ["export-features", *tiny_flags(), "--checkpoint", str(pretrained / "backbone.ckpt"), "--out", str(tmp_path)]
    assert run_command(argv) == 0
    frame = pd.read_csv(tmp_path / "features.csv")
    assert len(frame) == 12
    assert frame.columns[-1] == "e7"


def test_gen_data_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert run_command(["gen-data", *tiny_flags(), "--images", "2", "--out", str(out)]) == 0
    outputs = manifest_outputs(first)
    assert outputs == manifest_outputs(second)
    assert "train.txt" in outputs and "eval_commercial_like.txt" in outputs
    assert "images/train/00000_real.ppm" in outputs
    assert "images/train/00001_gan_like.ppm" in outputs
    assert (first / "images/train/00000_real.ppm").read_bytes()[:2] == b"P6"


@pytest.mark.parametrize(
    "command",
    [
        ["eval", "--strategies", "linear,prompt,adapter,finetune"],
        ["robustness"],
        ["fewshot", "--k", "1", "--strategies", "linear,adapter"],
        ["ablate", "--sizes", "4,8", "--strategies", "prompt"],
    ],
)
def test_reports_are_byte_identical_across_runs(pretrained, tmp_path, command):
    backbone = ["--backbone", str(pretrained / "backbone.ckpt")]
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert run_command([command[0], *tiny_flags(), *backbone, *command[1:], "--out", str(out)]) == 0
        runs.append(out)
    outputs = manifest_outputs(runs[0])
    assert outputs == manifest_outputs(runs[1])
    reports = [path for path in outputs if path.endswith((".csv", ".json"))]
    assert reports
    for path in reports:
        assert (runs[0] / path).read_bytes() == (runs[1] / path).read_bytes()
