"""Penalty-constrained gradient-descent training over a (decoupled) stream.

Per-batch stochastic descent: every batch does one forward over its time
window (states carried in from earlier batches as constants), one reverse
pass, and one plain SGD step on all parameter blocks and the d-node
replacement vectors. The per-epoch sequential-step count is the sum over
batches of the instrumented forward depth, which decoupling provably
shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDiverged, ValidationError
from ..ingest import ActiveSets, EventStream, make_batches
from .forward import as_carry, as_dnode_keys, backward_pass, forward_pass, \
    sample_negatives
from .model import ModelState, PhiTable, init_model, init_phi


@dataclass
class TrainConfig:
    alpha: float = 1.0
    lr: float = 0.1
    epochs: int = 10
    n_negatives: int = 10
    seed: int = 0
    dim: int = 8
    n_batches: int = 1


@dataclass
class TrainMetrics:
    loss_curve: list[float] = field(default_factory=list)
    ranking_curve: list[float] = field(default_factory=list)
    penalty_curve: list[float] = field(default_factory=list)
    sequential_steps: int = 0          # per-epoch, summed over batches
    constraint_residual: float = 0.0   # max ||phi - emb|| after training

    def to_dict(self) -> dict:
        return {"loss_curve": self.loss_curve,
                "ranking_curve": self.ranking_curve,
                "penalty_curve": self.penalty_curve,
                "sequential_steps": self.sequential_steps,
                "constraint_residual": self.constraint_residual}


def train(stream: EventStream, actives: ActiveSets, dnodes,
          config: TrainConfig) -> tuple[ModelState, PhiTable, TrainMetrics]:
    """Fit the model on the stream; ``dnodes`` may be None, one
    DecoupleResult, an iterable of per-batch results, or a key set."""
    if len(stream) == 0:
        raise ValidationError("no training events")
    keys = frozenset(as_dnode_keys(dnodes))
    model = init_model(stream, actives, config.dim, config.seed)
    phis = init_phi(model, set(keys), config.alpha)
    plan = make_batches(stream, min(config.n_batches, len(stream)))
    if keys:
        _preload_phi(stream, actives, model, phis, keys)
    metrics = TrainMetrics()
    neg_rng = np.random.default_rng(config.seed + 1)

    last_finite = None
    for epoch in range(config.epochs):
        negatives = sample_negatives(stream, config.n_negatives,
                                     int(neg_rng.integers(1 << 62)))
        carry: dict = {}
        carry_items: dict = {}
        epoch_rank = 0.0
        epoch_pen = 0.0
        steps = 0
        for lo, hi in plan:
            trace = forward_pass(stream, actives, model, phis=phis,
                                 dnode_keys=keys, negatives=negatives,
                                 lo=lo, hi=hi, carry_reads=carry,
                                 carry_last_item=carry_items,
                                 compute_loss=True, keep_caches=True)
            if not math.isfinite(trace.total_loss):
                raise TrainingDiverged(
                    f"loss became non-finite in epoch {epoch}",
                    last_state=last_finite)
            grads, phi_grads = backward_pass(model, phis, trace)
            for name, g in grads.items():
                model.params[name] -= config.lr * g
            if phis.values.size:
                phis.values -= config.lr * phi_grads

            epoch_rank += trace.ranking_loss * trace.n_events
            epoch_pen += trace.penalty
            steps += trace.max_level
            carry = as_carry(trace.final_reads)
            carry_items = trace.final_last_item

        mean_rank = epoch_rank / len(stream)
        metrics.ranking_curve.append(mean_rank)
        metrics.penalty_curve.append(epoch_pen)
        metrics.loss_curve.append(mean_rank + epoch_pen)
        metrics.sequential_steps = steps
        last_finite = (model.clone(), phis.clone())

    metrics.constraint_residual = constraint_residual(
        stream, actives, model, phis, keys, plan)
    return model, phis, metrics


def _preload_phi(stream: EventStream, actives: ActiveSets, model: ModelState,
                 phis: PhiTable, keys: frozenset) -> None:
    """Start at the feasible point: phi equals the coupled embedding under
    the initial parameters, so the decoupled model begins equivalent to the
    coupled one and the penalty only has to track drift during training."""
    trace = forward_pass(stream, actives, model, compute_loss=False)
    for key, row in phis.index.items():
        if key in trace.emb:
            phis.values[row] = trace.emb[key]


def constraint_residual(stream: EventStream, actives: ActiveSets,
                        model: ModelState, phis: PhiTable,
                        keys: frozenset, plan=None) -> float:
    """max over d-nodes of ||phi - emb|| on a fresh decoupled forward."""
    if not keys:
        return 0.0
    plan = plan or make_batches(stream, 1)
    worst = 0.0
    carry: dict = {}
    carry_items: dict = {}
    for lo, hi in plan:
        trace = forward_pass(stream, actives, model, phis=phis,
                             dnode_keys=keys, lo=lo, hi=hi,
                             carry_reads=carry, carry_last_item=carry_items,
                             compute_loss=False)
        for key in keys:
            if key in trace.emb:
                diff = phis.row(key) - trace.emb[key]
                worst = max(worst, float(np.linalg.norm(diff)))
        carry = as_carry(trace.final_reads)
        carry_items = trace.final_last_item
    return worst
