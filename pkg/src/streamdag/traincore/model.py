"""Model parameters, the d-node embedding table, and checkpoint I/O.

All learnable state: two GRU blocks (one per update direction), shared init
vectors for each partition, static vectors for active nodes, the prediction
MLP, and categorical feature embedding tables (user id, item id with a
trailing "no previous item" sentinel row, and per-slot event features).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..compgraph import StateKey
from ..errors import ValidationError
from ..ingest import ActiveSets, EventStream

CHECKPOINT_VERSION = 1


@dataclass
class ModelState:
    dim: int
    n_users: int
    n_items: int
    feature_dim: int
    feature_vocab: int
    params: dict[str, np.ndarray]
    psi_index: dict[tuple[int, int], int]  # (partition, node) -> row in "psi"

    def clone(self) -> "ModelState":
        return ModelState(self.dim, self.n_users, self.n_items, self.feature_dim,
                          self.feature_vocab,
                          {k: v.copy() for k, v in self.params.items()},
                          dict(self.psi_index))

    def psi(self, partition: int, node: int) -> np.ndarray:
        return self.params["psi"][self.psi_index[(partition, node)]]

    def sentinel_item_row(self) -> int:
        return self.n_items


@dataclass
class PhiTable:
    """One learnable vector per d-node plus the penalty weight."""

    alpha: float
    index: dict[StateKey, int] = field(default_factory=dict)
    values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError("penalty weight must be nonnegative")

    def row(self, key: StateKey) -> np.ndarray:
        try:
            return self.values[self.index[key]]
        except KeyError:
            raise ValidationError(f"no decoupling vector for state {key}") from None

    @property
    def keys(self) -> set[StateKey]:
        return set(self.index)

    def clone(self) -> "PhiTable":
        return PhiTable(self.alpha, dict(self.index), self.values.copy())


def init_model(stream: EventStream, actives: ActiveSets, dim: int,
               seed: int = 0) -> ModelState:
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    x_dim = 2 * dim  # partner state + event feature embedding

    from .nn import gru_param_init, mlp_param_init

    params.update(gru_param_init(rng, dim, x_dim, "gru1_"))
    params.update(gru_param_init(rng, dim, x_dim, "gru2_"))
    params.update(mlp_param_init(rng, dim, 3 * dim))
    params["xi1"] = rng.normal(0.0, 0.1, dim)
    params["xi2"] = rng.normal(0.0, 0.1, dim)

    psi_index: dict[tuple[int, int], int] = {}
    for u in sorted(actives.active_users):
        psi_index[(1, u)] = len(psi_index)
    for v in sorted(actives.active_items):
        psi_index[(2, v)] = len(psi_index)
    params["psi"] = rng.normal(0.0, 0.1, (len(psi_index), dim))

    params["user_feat"] = rng.normal(0.0, 0.1, (stream.n_users, dim))
    params["item_feat"] = rng.normal(0.0, 0.1, (stream.n_items + 1, dim))
    n_event_rows = stream.feature_dim * max(stream.feature_vocab, 1)
    params["event_feat"] = rng.normal(0.0, 0.1, (n_event_rows, dim))

    return ModelState(dim, stream.n_users, stream.n_items, stream.feature_dim,
                      stream.feature_vocab, params, psi_index)


def init_phi(model: ModelState, keys: set[StateKey], alpha: float) -> PhiTable:
    """Fresh table, one row per d-node, seeded at the partition init vector."""
    ordered = sorted(keys)
    values = np.zeros((len(ordered), model.dim))
    index = {}
    for i, key in enumerate(ordered):
        index[key] = i
        values[i] = model.params["xi1" if key[0] == 1 else "xi2"]
    return PhiTable(alpha, index, values)


def zero_grads(model: ModelState) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in model.params.items()}


def save_checkpoint(model: ModelState, phis: PhiTable | None,
                    path: str | Path) -> None:
    meta = {"version": CHECKPOINT_VERSION, "dim": model.dim,
            "n_users": model.n_users, "n_items": model.n_items,
            "feature_dim": model.feature_dim,
            "feature_vocab": model.feature_vocab,
            "alpha": phis.alpha if phis is not None else None}
    arrays = {f"param_{k}": v for k, v in model.params.items()}
    arrays["psi_keys"] = np.asarray(sorted(model.psi_index),
                                    dtype=np.int64).reshape(-1, 2)
    if phis is not None:
        arrays["phi_keys"] = np.asarray(sorted(phis.index),
                                        dtype=np.int64).reshape(-1, 3)
        arrays["phi_values"] = phis.values
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez_compressed(path, **arrays)


def load_checkpoint(path: str | Path) -> tuple[ModelState, PhiTable | None]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {meta['version']}")
        params = {k[len("param_"):]: data[k] for k in data.files
                  if k.startswith("param_")}
        psi_index = {(int(p), int(n)): i
                     for i, (p, n) in enumerate(data["psi_keys"])}
        model = ModelState(meta["dim"], meta["n_users"], meta["n_items"],
                           meta["feature_dim"], meta["feature_vocab"],
                           params, psi_index)
        phis = None
        if "phi_keys" in data.files:
            index = {(int(p), int(n), int(e)): i
                     for i, (p, n, e) in enumerate(data["phi_keys"])}
            phis = PhiTable(meta["alpha"], index, data["phi_values"])
    return model, phis
