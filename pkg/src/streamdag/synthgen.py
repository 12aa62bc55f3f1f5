"""Synthetic temporal interaction streams.

Two generators (preferential-attachment "scale-free" and uniform) plus a
hand-built eight-event fixture used throughout the test suite. Generation is
a pure function of :class:`StreamSpec`: the same spec (seed included) always
yields a byte-identical stream. Timestamps are the consecutive integers
``1..n_events`` because every downstream algorithm only consumes event order.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import EventStream

# Per-slot vocabulary for generated categorical event features.
FEATURE_VOCAB = 8


@dataclass(frozen=True)
class StreamSpec:
    n_users: int
    n_items: int
    n_events: int
    attachment_exponent: float = 1.0
    seed: int = 0
    feature_dim: int = 0
    label_cardinality: int = 2

    def validate(self) -> None:
        if self.n_users < 1:
            raise ValidationError("n_users must be >= 1")
        if self.n_items < 1:
            raise ValidationError("n_items must be >= 1")
        if self.n_events < 0:
            raise ValidationError("n_events must be >= 0")
        if self.feature_dim < 0:
            raise ValidationError("feature_dim must be >= 0")
        if self.label_cardinality < 1:
            raise ValidationError("label_cardinality must be >= 1")
        if not math.isfinite(self.attachment_exponent) or self.attachment_exponent < 0:
            raise ValidationError("attachment_exponent must be finite and >= 0")


def _assemble(spec: StreamSpec, users: list[int], items: list[int],
              rng: random.Random) -> EventStream:
    n = spec.n_events
    labels = [rng.randrange(spec.label_cardinality) for _ in range(n)]
    feat = np.asarray(
        [[rng.randrange(FEATURE_VOCAB) for _ in range(spec.feature_dim)]
         for _ in range(n)],
        dtype=np.int64).reshape(n, spec.feature_dim)
    return EventStream(
        np.asarray(users, dtype=np.int64),
        np.asarray(items, dtype=np.int64),
        np.arange(1, n + 1, dtype=np.int64),
        np.asarray(labels, dtype=np.int64).reshape(n),
        feat,
        n_users=spec.n_users, n_items=spec.n_items,
        feature_vocab=FEATURE_VOCAB if spec.feature_dim else 0)


class _PreferentialSampler:
    """Growth-style preferential attachment for one partition.

    Nodes enter the candidate pool on a linear arrival schedule (a seeded
    permutation); each event's endpoint is drawn with weight
    ``(degree + 1) ** exponent`` over the arrived nodes. Early arrivals
    accumulate degree roughly proportional to total_events / arrival_time,
    which is what produces the heavy (power-law, exponent ~2) tail; a
    fixed-population urn would flatten out to near-uniform shares instead.
    For exponent 1 an urn of past endpoints gives O(1) draws; other
    exponents pay an O(pool) cumulative search per draw.
    """

    def __init__(self, n: int, exponent: float, total_events: int,
                 rng: random.Random):
        self.n = n
        self.exponent = exponent
        self.total = max(total_events, 1)
        self.rng = rng
        self.arrival = list(range(n))
        rng.shuffle(self.arrival)
        self.arrived = 0
        self.degrees = [0] * n
        self.urn: list[int] = []

    def _pool(self, t: int) -> int:
        # Square-root arrival schedule: front-loads competition enough to
        # keep the tail heavy but not winner-take-all (top 1% of nodes land
        # around a third of all events at the default exponent).
        return max(1, min(self.n, math.ceil(self.n * math.sqrt((t + 1) / self.total))))

    def draw(self, t: int) -> int:
        pool = self._pool(t)
        if pool > self.arrived:
            # A newly arrived node takes this event: its bootstrap edge.
            node = self.arrival[self.arrived]
            self.arrived = pool
            return node
        if self.exponent == 1.0:
            k = self.rng.randrange(self.arrived + len(self.urn))
            return self.arrival[k] if k < self.arrived else self.urn[k - self.arrived]
        candidates = self.arrival[:self.arrived]
        weights = [(self.degrees[c] + 1) ** self.exponent for c in candidates]
        x = self.rng.random() * sum(weights)
        acc = 0.0
        for node, w in zip(candidates, weights):
            acc += w
            if x < acc:
                return node
        return candidates[-1]

    def record(self, node: int) -> None:
        self.degrees[node] += 1
        self.urn.append(node)


def generate_scale_free(spec: StreamSpec) -> EventStream:
    """Preferential-attachment stream with heavy-tailed endpoint degrees."""
    spec.validate()
    rng = random.Random(spec.seed)
    user_sampler = _PreferentialSampler(spec.n_users, spec.attachment_exponent,
                                        spec.n_events, rng)
    item_sampler = _PreferentialSampler(spec.n_items, spec.attachment_exponent,
                                        spec.n_events, rng)
    users, items = [], []
    for t in range(spec.n_events):
        u = user_sampler.draw(t)
        v = item_sampler.draw(t)
        user_sampler.record(u)
        item_sampler.record(v)
        users.append(u)
        items.append(v)
    return _assemble(spec, users, items, rng)


def generate_uniform(spec: StreamSpec) -> EventStream:
    """Control condition: endpoints drawn uniformly at random."""
    spec.validate()
    rng = random.Random(spec.seed)
    users = [rng.randrange(spec.n_users) for _ in range(spec.n_events)]
    items = [rng.randrange(spec.n_items) for _ in range(spec.n_events)]
    return _assemble(spec, users, items, rng)


def eight_event_fixture() -> EventStream:
    """Hand-built stream of 8 events over 4 nodes (2 users, 2 items).

    With no active nodes its computational DAG has depth exactly 6, and a
    3-element d-node set exists that brings the depth down to 3. The first
    four events form two short independent chains; the last four hammer the
    same (user 0, item 1) pair, stacking depth.
    """
    pairs = [(0, 0), (1, 1), (0, 0), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1)]
    users = np.asarray([u for u, _ in pairs], dtype=np.int64)
    items = np.asarray([v for _, v in pairs], dtype=np.int64)
    n = len(pairs)
    return EventStream(users, items, np.arange(1, n + 1, dtype=np.int64),
                       np.zeros(n, dtype=np.int64),
                       np.zeros((n, 0), dtype=np.int64),
                       n_users=2, n_items=2)
