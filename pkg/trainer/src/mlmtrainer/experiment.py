"""End-to-end experiment driver.

Produces everything the masking study needs for one grammar: reference
artifacts and corpora via the ``mlmoracle`` command-line pipeline
(invoked as a subprocess; this package never parses a grammar), one
trained checkpoint per (variant, mask count), exported predictions,
score CSVs, and the figures.
"""

from __future__ import annotations

import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .data import Vocabulary
from .model import ModelConfig
from .plots import render_all
from .predict import predict_to_file
from .train import DEFAULT_STEPS, TrainConfig, save_checkpoint, train

VARIANTS = ("bert", "np")  # with / without position embeddings

ORACLE_CMD = [sys.executable, "-m", "mlmoracle.cli"]


@dataclass
class ExperimentConfig:
    grammar_path: str
    out_dir: str
    ks: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    steps: int = DEFAULT_STEPS
    seed: int = 0
    threshold: float = 0.97
    train_size: int = 20000
    eval_size: int = 2000
    dropout: float = 0.1


@dataclass
class ExperimentPaths:
    run_dir: Path
    corpus_dir: Path
    checkpoints: dict = field(default_factory=dict)  # (variant, k) -> Path
    predictions: dict = field(default_factory=dict)  # variant -> Path (directory)
    scores: dict = field(default_factory=dict)  # variant -> Path (csv)
    figures: list = field(default_factory=list)


def _run(cmd: list[str]) -> None:
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(
            f"command failed ({proc.returncode}): {' '.join(map(str, cmd))}\n{proc.stderr}"
        )


def build_reference_artifacts(config: ExperimentConfig) -> ExperimentPaths:
    out = Path(config.out_dir)
    paths = ExperimentPaths(run_dir=out / "run", corpus_dir=out / "corpus")
    _run(
        ORACLE_CMD
        + [
            "sweep",
            config.grammar_path,
            "--threshold",
            str(config.threshold),
            "--k",
            *map(str, config.ks),
            "--out-dir",
            str(paths.run_dir),
        ]
    )
    _run(
        ORACLE_CMD
        + [
            "sample",
            config.grammar_path,
            "--train",
            str(config.train_size),
            "--valid",
            str(config.eval_size),
            "--test",
            str(config.eval_size),
            "--seed",
            str(config.seed),
            "--out-dir",
            str(paths.corpus_dir),
        ]
    )
    return paths


def train_variant(
    config: ExperimentConfig, paths: ExperimentPaths, variant: str, k: int, log_every: int = 0
) -> Path:
    vocab = Vocabulary.load(paths.corpus_dir / "vocab.txt")
    model_config = ModelConfig(
        use_positions=(variant == "bert"),
        vocab_size=len(vocab),
        dropout=config.dropout,
        vocab_sha256=vocab.sha256,
    )
    train_config = TrainConfig(k=k, steps=config.steps, seed=config.seed)
    result = train(
        model_config, train_config, paths.corpus_dir / "train.txt", vocab, log_every=log_every
    )
    ckpt_dir = Path(config.out_dir) / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    ckpt = ckpt_dir / f"{variant}_k{k}.pt"
    save_checkpoint(ckpt, result, model_config, train_config)
    paths.checkpoints[(variant, k)] = ckpt
    return ckpt


def export_predictions(config: ExperimentConfig, paths: ExperimentPaths, variant: str) -> Path:
    from .train import load_checkpoint

    vocab = Vocabulary.load(paths.corpus_dir / "vocab.txt")
    preds_dir = Path(config.out_dir) / f"preds_{variant}"
    preds_dir.mkdir(parents=True, exist_ok=True)
    for k in config.ks:
        model, _, _, _ = load_checkpoint(paths.checkpoints[(variant, k)])
        predict_to_file(
            model,
            vocab,
            paths.run_dir / f"manifest_k{k}.tsv",
            preds_dir / f"predictions_k{k}.tsv",
        )
    paths.predictions[variant] = preds_dir
    return preds_dir


def score_variant(config: ExperimentConfig, paths: ExperimentPaths, variant: str) -> Path:
    out_csv = Path(config.out_dir) / f"scores_{variant}.csv"
    _run(
        ORACLE_CMD
        + [
            "score",
            "--run-dir",
            str(paths.run_dir),
            "--predictions-dir",
            str(paths.predictions[variant]),
            "--model-name",
            variant,
            "--out",
            str(out_csv),
        ]
    )
    paths.scores[variant] = out_csv
    return out_csv


def run_experiment(config: ExperimentConfig, log_every: int = 0) -> ExperimentPaths:
    paths = build_reference_artifacts(config)
    for variant in VARIANTS:
        for k in config.ks:
            train_variant(config, paths, variant, k, log_every=log_every)
        export_predictions(config, paths, variant)
        score_variant(config, paths, variant)
    paths.figures = render_all(
        paths.run_dir / "sweep.csv",
        {variant: str(paths.scores[variant]) for variant in VARIANTS},
        Path(config.out_dir) / "figures",
    )
    return paths
