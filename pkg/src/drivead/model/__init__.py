from .baseline import BaselineAutoencoder, EnsembleModel
from .checkpoint import load_checkpoint, load_into, save_checkpoint
from .config import (EOS, EOS_ID, MANEUVERS, NUM_MANEUVERS, SOS, SOS_ID,
                     SYMBOL_TO_ID, VOCAB, VOCAB_SIZE, ModelConfig)
from .multitask import MultiTaskLoss, MultiTaskModel
from .train import (EpochMetrics, TrainSettings, VARIANTS, WindowArrays,
                    baseline_mse, evaluate_multitask, symbol_accuracy,
                    train_baseline, train_ensemble, train_multitask,
                    vocab_class_weights)

__all__ = [
    "BaselineAutoencoder", "EnsembleModel",
    "load_checkpoint", "load_into", "save_checkpoint",
    "EOS", "EOS_ID", "MANEUVERS", "NUM_MANEUVERS", "SOS", "SOS_ID",
    "SYMBOL_TO_ID", "VOCAB", "VOCAB_SIZE", "ModelConfig",
    "MultiTaskLoss", "MultiTaskModel",
    "EpochMetrics", "TrainSettings", "VARIANTS", "WindowArrays",
    "baseline_mse", "evaluate_multitask", "symbol_accuracy",
    "train_baseline", "train_ensemble", "train_multitask",
    "vocab_class_weights",
]
