"""Stream-ordered forward and reverse passes of the embedding model.

The forward walk mirrors the computational DAG: each event updates its
inactive endpoints through the direction-specific GRU using both partners'
pre-event states, while active endpoints stay pinned to their static
vectors. When a computed state is a d-node, every later read of it (self
chain, partner cross reads, prediction inputs, candidate scoring) returns
the state's learnable replacement vector instead, and a quadratic penalty
``alpha/2 * ||phi - emb||^2`` is charged at the step that computes the
state. With the replacement vectors preloaded to the coupled values the two
forwards agree bit for bit.

Each state also carries a level: 1 + max over its two read levels, where
static/init/replacement/carried-in reads count 0. The maximum level equals
the (decoupled) DAG depth, which is the instrumented sequential-step count.

The reverse pass walks events backwards, popping the accumulated adjoint of
each state exactly when its creating event is reached, and routes read
gradients to wherever the value came from (an earlier state, a static or
init vector, a replacement vector, or a carried-in constant).
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..compgraph import StateKey
from ..dnodes import DecoupleResult
from ..errors import ValidationError
from ..ingest import ActiveSets, EventStream
from .model import ModelState, PhiTable, zero_grads
from .nn import gru_backward, gru_forward, mlp_backward, mlp_forward, \
    softmax_cross_entropy

# Read sources for gradient routing.
SRC_STATE = 0
SRC_PHI = 1
SRC_PSI = 2
SRC_XI = 3
SRC_CONST = 4

_ZERO_LEVEL_SOURCES = (SRC_PHI, SRC_PSI, SRC_XI, SRC_CONST)


@dataclass
class Read:
    value: np.ndarray
    level: int
    source: int
    ref: object = None  # key / psi pair / partition, depending on source


@dataclass
class ForwardTrace:
    emb: dict[StateKey, np.ndarray] = field(default_factory=dict)
    levels: dict[StateKey, int] = field(default_factory=dict)
    event_loss: list[float] = field(default_factory=list)
    penalty_terms: dict[StateKey, float] = field(default_factory=dict)
    ranking_loss: float = 0.0
    penalty: float = 0.0
    total_loss: float = 0.0
    max_level: int = 0
    n_events: int = 0
    # (event_index, h, candidate ids, candidate scores) for each scored event
    predictions: list[tuple] = field(default_factory=list)
    # per-node state history for read-back: (part, node) -> sorted event list
    node_history: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    final_reads: dict[tuple[int, int], Read] = field(default_factory=dict)
    final_last_item: dict[int, int] = field(default_factory=dict)
    caches: Optional[list] = None


def _negatives_matrix(rng: np.random.Generator, true_items: np.ndarray,
                      n_items: int, n_negatives: int) -> np.ndarray:
    """Uniform draws over items excluding the true one (shifted-draw trick)."""
    n = len(true_items)
    k = min(n_negatives, n_items - 1)
    if k <= 0:
        return np.zeros((n, 0), dtype=np.int64)
    draws = rng.integers(0, n_items - 1, size=(n, k))
    return draws + (draws >= true_items[:, None])


def sample_negatives(stream: EventStream, n_negatives: int,
                     seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return _negatives_matrix(rng, stream.item, stream.n_items, n_negatives)


def _event_feature(model: ModelState, feat_row: np.ndarray
                   ) -> tuple[np.ndarray, list[int]]:
    if model.feature_dim == 0:
        return np.zeros(model.dim), []
    rows = [s * model.feature_vocab + int(feat_row[s])
            for s in range(model.feature_dim)]
    table = model.params["event_feat"]
    vec = table[rows[0]].copy()
    for r in rows[1:]:
        vec += table[r]
    return vec, rows


def forward_pass(stream: EventStream, actives: ActiveSets, model: ModelState,
                 phis: PhiTable | None = None,
                 dnode_keys: frozenset[StateKey] | set[StateKey] = frozenset(),
                 negatives: np.ndarray | None = None,
                 lo: int = 0, hi: int | None = None,
                 carry_reads: dict[tuple[int, int], Read] | None = None,
                 carry_last_item: dict[int, int] | None = None,
                 compute_loss: bool = True,
                 keep_caches: bool = False) -> ForwardTrace:
    """Process events ``[lo, hi)``; see module docstring for semantics."""
    if hi is None:
        hi = len(stream)
    if dnode_keys and phis is None:
        raise ValidationError("decoupled forward requires a phi table")
    if compute_loss and negatives is None:
        raise ValidationError("loss computation requires a negatives matrix")

    params = model.params
    dim = model.dim
    trace = ForwardTrace(n_events=hi - lo)
    if keep_caches:
        trace.caches = []

    last: dict[tuple[int, int], Read] = dict(carry_reads) if carry_reads else {}
    last_item: dict[int, int] = dict(carry_last_item) if carry_last_item else {}
    au, ai = actives.active_users, actives.active_items
    sentinel = model.sentinel_item_row()

    def current_read(part: int, node: int) -> Read:
        if node in (au if part == 1 else ai):
            return Read(model.psi(part, node), 0, SRC_PSI, (part, node))
        got = last.get((part, node))
        if got is not None:
            return got
        return Read(params[f"xi{part}"], 0, SRC_XI, part)

    loss_sum = 0.0
    for e in range(lo, hi):
        u = int(stream.user[e])
        v = int(stream.item[e])
        read_u = current_read(1, u)
        read_v = current_read(2, v)
        feat_vec, feat_rows = _event_feature(model, stream.feat[e])

        pred_cache = None
        if compute_loss:
            item_row = last_item.get(u, sentinel)
            h_in = np.concatenate([read_u.value, params["user_feat"][u],
                                   params["item_feat"][item_row]])
            h, mlp_cache = mlp_forward(params, h_in)
            cand_ids = [v] + [int(c) for c in negatives[e]]
            cand_reads = [read_v] + [current_read(2, c) for c in cand_ids[1:]]
            scores = np.array([float(h @ r.value) for r in cand_reads])
            ce, g_scores = softmax_cross_entropy(scores)
            loss_sum += ce
            trace.event_loss.append(ce)
            trace.predictions.append((e, h, cand_ids, scores))
            pred_cache = (read_u, u, item_row, h, mlp_cache, cand_reads, g_scores)

        new_reads = []
        gru_caches = []
        level = 1 + max(read_u.level, read_v.level)
        for part, node, active, read_self, read_other, prefix in (
                (1, u, u in au, read_u, read_v, "gru1_"),
                (2, v, v in ai, read_v, read_u, "gru2_")):
            if active:
                gru_caches.append(None)
                continue
            out, cache = gru_forward(params, prefix, read_self.value,
                                     read_other.value, feat_vec)
            key = (part, node, e)
            trace.emb[key] = out
            trace.levels[key] = level
            trace.node_history.setdefault((part, node), []).append(e)
            if level > trace.max_level:
                trace.max_level = level

            if key in dnode_keys:
                phi_row = phis.row(key)
                diff = phi_row - out
                pen = 0.5 * phis.alpha * float(diff @ diff)
                trace.penalty_terms[key] = pen
                trace.penalty += pen
                new_reads.append(((part, node), Read(phi_row, 0, SRC_PHI, key)))
            else:
                new_reads.append(((part, node),
                                  Read(out, level, SRC_STATE, key)))
            gru_caches.append(cache)

        # Advance reads only after both endpoints consumed pre-event values.
        for pn, read in new_reads:
            last[pn] = read
        last_item[u] = v

        if keep_caches:
            trace.caches.append((e, u, v, read_u, read_v, feat_vec, feat_rows,
                                 gru_caches, pred_cache))

    if compute_loss and trace.n_events:
        trace.ranking_loss = loss_sum / trace.n_events
    trace.total_loss = trace.ranking_loss + trace.penalty
    trace.final_reads = last
    trace.final_last_item = last_item
    return trace


def forward_coupled(stream: EventStream, actives: ActiveSets, model: ModelState,
                    negatives: np.ndarray | None = None,
                    compute_loss: bool = False, **kw) -> ForwardTrace:
    """Plain evolution per the update equations; no decoupling."""
    return forward_pass(stream, actives, model, negatives=negatives,
                        compute_loss=compute_loss, **kw)


def forward_decoupled(stream: EventStream, actives: ActiveSets,
                      model: ModelState, dnodes, phis: PhiTable,
                      negatives: np.ndarray | None = None,
                      compute_loss: bool = False, **kw) -> ForwardTrace:
    """Evolution with d-node reads replaced by their learnable vectors.

    ``dnodes`` may be a DecoupleResult, an iterable of DecoupleResults, or a
    set of state keys.
    """
    keys = as_dnode_keys(dnodes)
    missing = keys - phis.keys
    if missing:
        raise ValidationError(f"phi table missing entries for {sorted(missing)[:3]}")
    return forward_pass(stream, actives, model, phis=phis, dnode_keys=keys,
                        negatives=negatives, compute_loss=compute_loss, **kw)


def as_carry(reads: dict[tuple[int, int], Read]
             ) -> dict[tuple[int, int], Read]:
    """Batch-boundary conversion: computed states become constants (the
    reverse pass truncates there), leaf reads (phi/psi/xi) stay live, and
    every level resets to 0 so per-batch depth instrumentation starts fresh.
    """
    out = {}
    for pn, read in reads.items():
        source = SRC_CONST if read.source == SRC_STATE else read.source
        out[pn] = Read(read.value, 0, source, read.ref)
    return out


def as_dnode_keys(dnodes) -> set[StateKey]:
    if dnodes is None:
        return set()
    if isinstance(dnodes, DecoupleResult):
        return dnodes.dnode_keys()
    if isinstance(dnodes, (set, frozenset)):
        return set(dnodes)
    keys: set[StateKey] = set()
    for res in dnodes:
        keys |= res.dnode_keys()
    return keys


def predict(trace: ForwardTrace, event_index: int, model: ModelState,
            candidates: list[int] | None = None) -> dict[int, float]:
    """Score map for one scored event of the trace.

    With explicit ``candidates``, items are scored against their states as
    recorded at that event's time (pre-event).
    """
    for e, h, cand_ids, scores in trace.predictions:
        if e == event_index:
            if candidates is None:
                return dict(zip(cand_ids, (float(s) for s in scores)))
            out = {}
            for item in candidates:
                hist = trace.node_history.get((2, item), [])
                pos = bisect_left(hist, event_index)
                if pos == 0:
                    raise ValidationError(
                        f"item {item} has no recorded state before event "
                        f"{event_index}; pass items seen in the trace")
                value = trace.emb[(2, item, hist[pos - 1])]
                out[item] = float(h @ value)
            return out
    raise ValidationError(f"event {event_index} was not scored in this trace")


def ranking_loss(scores: np.ndarray) -> float:
    """Softmax loss of the true candidate (index 0) against the rest."""
    loss, _ = softmax_cross_entropy(scores)
    return loss


def backward_pass(model: ModelState, phis: PhiTable | None,
                  trace: ForwardTrace
                  ) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Reverse-mode accumulation over a trace built with ``keep_caches``."""
    if trace.caches is None:
        raise ValidationError("trace was not built with keep_caches=True")
    params = model.params
    grads = zero_grads(model)
    phi_grads = (np.zeros_like(phis.values) if phis is not None
                 else np.zeros((0, model.dim)))
    gstate: dict[StateKey, np.ndarray] = {}
    weight = 1.0 / trace.n_events if trace.n_events else 0.0

    def route(read: Read, g: np.ndarray) -> None:
        if read.source == SRC_STATE:
            acc = gstate.get(read.ref)
            if acc is None:
                gstate[read.ref] = g.copy()
            else:
                acc += g
        elif read.source == SRC_PHI:
            phi_grads[phis.index[read.ref]] += g
        elif read.source == SRC_PSI:
            grads["psi"][model.psi_index[read.ref]] += g
        elif read.source == SRC_XI:
            grads[f"xi{read.ref}"] += g
        # SRC_CONST: carried-in boundary value; nothing to do.

    for e, u, v, read_u, read_v, feat_vec, feat_rows, gru_caches, pred_cache \
            in reversed(trace.caches):
        if pred_cache is not None:
            p_read_u, p_u, item_row, h_vec, mlp_cache, cand_reads, g_scores = \
                pred_cache
            g_sc = g_scores * weight
            g_h = np.zeros(model.dim)
            for g_c, read in zip(g_sc, cand_reads):
                g_h += g_c * read.value
                route(read, g_c * h_vec)
            g_hin = mlp_backward(params, mlp_cache, g_h, grads)
            d = model.dim
            route(p_read_u, g_hin[:d])
            grads["user_feat"][p_u] += g_hin[d:2 * d]
            grads["item_feat"][item_row] += g_hin[2 * d:]

        g_feat_total = None
        for (part, node, prefix, read_self, read_other), cache in zip(
                ((1, u, "gru1_", read_u, read_v),
                 (2, v, "gru2_", read_v, read_u)), gru_caches):
            if cache is None:
                continue
            key = (part, node, e)
            g_out = gstate.pop(key, None)
            if key in trace.penalty_terms:
                emb = trace.emb[key]
                diff = phis.alpha * (emb - phis.row(key))
                g_out = diff if g_out is None else g_out + diff
                phi_grads[phis.index[key]] += phis.alpha * (phis.row(key) - emb)
            if g_out is None:
                continue
            g_self, g_other, g_f = gru_backward(params, prefix, cache, g_out, grads)
            route(read_self, g_self)
            route(read_other, g_other)
            if feat_rows:
                g_feat_total = g_f if g_feat_total is None else g_feat_total + g_f

        if g_feat_total is not None:
            for r in feat_rows:
                grads["event_feat"][r] += g_feat_total

    # Whatever is left belongs to states never consumed in this pass window.
    gstate.clear()
    return grads, phi_grads
