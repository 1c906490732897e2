from . import autodiff
from .gradcheck import GradCheckReport, gradient_check, relative_error
from .layers import (BiLstm, Conv1d, Conv1dTranspose, Dense, Embedding,
                     LstmCell, LstmStack, Module, Param, Tape, zero_state)
from .losses import (class_weights, l2_regularization, mse_loss,
                     weighted_cross_entropy)
from .optim import Adam, clip_global_norm

__all__ = [
    "autodiff", "GradCheckReport", "gradient_check", "relative_error",
    "BiLstm", "Conv1d", "Conv1dTranspose", "Dense", "Embedding", "LstmCell",
    "LstmStack", "Module", "Param", "Tape", "zero_state",
    "class_weights", "l2_regularization", "mse_loss", "weighted_cross_entropy",
    "Adam", "clip_global_norm",
]
