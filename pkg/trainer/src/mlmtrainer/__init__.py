"""Toy masked-prediction encoders with and without position embeddings."""

__version__ = "0.1.0"

from .data import MaskedBatches, Vocabulary, read_corpus
from .experiment import ExperimentConfig, run_experiment
from .model import MaskedTokenEncoder, ModelConfig
from .plots import MissingColumnError, render_all
from .predict import (
    ManifestInstance,
    VocabularyHashError,
    perplexity_eval,
    predict_to_file,
    read_manifest,
    terminal_distributions,
)
# NB: the training entry point lives at mlmtrainer.train.train; re-exporting a
# name equal to the submodule's would shadow the module attribute.
from .train import TrainConfig, TrainingDivergedError, load_checkpoint, save_checkpoint
