"""Numerical training core: embedding evolution, prediction, penalty
training, and ranking evaluation, all in numpy with hand-written gradients."""

from .evaluate import EvalConfig, evaluate, harmonic_mrr, rank_of_true
from .forward import (ForwardTrace, as_carry, as_dnode_keys, backward_pass,
                      forward_coupled, forward_decoupled, forward_pass,
                      predict, ranking_loss, sample_negatives)
from .model import (ModelState, PhiTable, init_model, init_phi,
                    load_checkpoint, save_checkpoint)
from .nn import gru_forward, mlp_forward, softmax_cross_entropy
from .toychain import ToyConfig, ToyReport, coupled_forward, toy_six_layer
from .train import TrainConfig, TrainMetrics, constraint_residual, train

__all__ = [
    "EvalConfig", "ForwardTrace", "ModelState", "PhiTable", "ToyConfig",
    "ToyReport", "TrainConfig", "TrainMetrics", "as_carry", "as_dnode_keys",
    "backward_pass", "constraint_residual", "coupled_forward", "evaluate",
    "forward_coupled", "forward_decoupled", "forward_pass", "gru_forward",
    "harmonic_mrr", "init_model", "init_phi", "load_checkpoint",
    "mlp_forward", "predict", "rank_of_true", "ranking_loss",
    "sample_negatives", "save_checkpoint", "softmax_cross_entropy",
    "toy_six_layer", "train",
]
