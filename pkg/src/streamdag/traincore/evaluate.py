"""Ranking evaluation: mean reciprocal rank and recall@10.

Test events are replayed in time order. Each event is scored from the
user's pre-event state against the true item plus uniformly sampled
negatives, then the states evolve. Active nodes may keep evolving from
their static vectors during the test phase (default), or stay pinned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..ingest import ActiveSets, EventStream
from .forward import Read, _event_feature, _negatives_matrix
from .model import ModelState
from .nn import gru_forward, mlp_forward


@dataclass
class EvalConfig:
    n_negatives: int = 499
    seed: int = 0
    evolve_active: bool = True


def rank_of_true(scores: np.ndarray) -> int:
    """Rank of candidate 0 among all candidates; ties favor the true item."""
    return 1 + int(np.sum(scores[1:] > scores[0]))


def harmonic_mrr(n_candidates: int) -> float:
    """Expected MRR of uniformly random scores over n candidates."""
    return sum(1.0 / k for k in range(1, n_candidates + 1)) / n_candidates


def evaluate(stream_test: EventStream, model: ModelState, actives: ActiveSets,
             config: EvalConfig | None = None,
             carry_reads: dict | None = None,
             carry_last_item: dict | None = None) -> dict:
    """Metrics over the test stream; carry args seed states from training."""
    config = config or EvalConfig()
    params = model.params
    rng = np.random.default_rng(config.seed)
    negatives = _negatives_matrix(rng, stream_test.item, stream_test.n_items,
                                  config.n_negatives)

    last: dict = dict(carry_reads) if carry_reads else {}
    last_item: dict = dict(carry_last_item) if carry_last_item else {}
    au, ai = actives.active_users, actives.active_items
    sentinel = model.sentinel_item_row()

    def current(part: int, node: int) -> np.ndarray:
        got = last.get((part, node))
        if got is not None:
            return got.value if isinstance(got, Read) else got
        if node in (au if part == 1 else ai):
            return model.psi(part, node)
        return params[f"xi{part}"]

    mrr_sum = 0.0
    hits = 0
    for e in range(len(stream_test)):
        u = int(stream_test.user[e])
        v = int(stream_test.item[e])
        h_u = current(1, u)
        h_v = current(2, v)

        item_row = last_item.get(u, sentinel)
        h_in = np.concatenate([h_u, params["user_feat"][u],
                               params["item_feat"][item_row]])
        h, _ = mlp_forward(params, h_in)
        cand_ids = [v] + [int(c) for c in negatives[e]]
        scores = np.array([float(h @ current(2, c)) for c in cand_ids])
        rank = rank_of_true(scores)
        mrr_sum += 1.0 / rank
        hits += rank <= 10

        feat_vec, _ = _event_feature(model, stream_test.feat[e])
        evolve_u = (u not in au) or config.evolve_active
        evolve_v = (v not in ai) or config.evolve_active
        if evolve_u:
            out, _ = gru_forward(params, "gru1_", h_u, h_v, feat_vec)
            last[(1, u)] = out
        if evolve_v:
            out, _ = gru_forward(params, "gru2_", h_v, h_u, feat_vec)
            last[(2, v)] = out
        last_item[u] = v

    n = max(len(stream_test), 1)
    return {"mrr": mrr_sum / n, "recall_at_10": hits / n,
            "n_events": len(stream_test)}
