"""Event-log parsing, splitting, activity classification, and batching.

The canonical in-memory form is :class:`EventStream`: columnar numpy arrays
sorted by timestamp (stable, so equal timestamps keep input order). All other
modules consume streams produced here or by :mod:`streamdag.synthgen`.

CSV format: header ``user_id,item_id,timestamp,label[,feat_0..feat_k]``,
UTF-8, integer user/item/label, timestamp integer or decimal.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ParseError, ValidationError


class Event(NamedTuple):
    user: int
    item: int
    time: float
    label: int
    feat: tuple[int, ...]


@dataclass
class EventStream:
    """Time-ordered bipartite interaction events in columnar form.

    ``user``/``item`` are dense nonnegative ids, ``time`` is nondecreasing,
    ``feat`` has one row per event (shape ``(n, feature_dim)``).
    """

    user: np.ndarray
    item: np.ndarray
    time: np.ndarray
    label: np.ndarray
    feat: np.ndarray
    n_users: int
    n_items: int
    feature_vocab: int = 0

    def __post_init__(self):
        n = len(self.user)
        if not (len(self.item) == len(self.time) == len(self.label) == n
                and self.feat.shape[0] == n):
            raise ValidationError("column lengths disagree")
        if self.feat.ndim != 2:
            raise ValidationError("feat must be 2-D")

    def __len__(self) -> int:
        return len(self.user)

    @property
    def feature_dim(self) -> int:
        return self.feat.shape[1]

    def event(self, i: int) -> Event:
        return Event(int(self.user[i]), int(self.item[i]), float(self.time[i]),
                     int(self.label[i]), tuple(int(v) for v in self.feat[i]))

    def __iter__(self) -> Iterator[Event]:
        return (self.event(i) for i in range(len(self)))

    def slice(self, lo: int, hi: int) -> "EventStream":
        """Contiguous sub-stream (views, no copies)."""
        return EventStream(self.user[lo:hi], self.item[lo:hi], self.time[lo:hi],
                           self.label[lo:hi], self.feat[lo:hi],
                           self.n_users, self.n_items, self.feature_vocab)


@dataclass(frozen=True)
class ActiveSets:
    """Nodes with strictly more training interactions than the threshold."""

    user_threshold: float
    item_threshold: float
    active_users: frozenset[int]
    active_items: frozenset[int]

    def is_active(self, partition: int, node: int) -> bool:
        return node in (self.active_users if partition == 1 else self.active_items)

    @property
    def size(self) -> int:
        return len(self.active_users) + len(self.active_items)


@dataclass(frozen=True)
class BatchPlan:
    """Contiguous equal-size (±1) partition of event indices."""

    n_batches: int
    bounds: tuple[tuple[int, int], ...]

    def __iter__(self):
        return iter(self.bounds)


@dataclass
class ParseResult:
    stream: EventStream
    user_map: dict[int, int] = field(default_factory=dict)
    item_map: dict[int, int] = field(default_factory=dict)
    resort_warnings: int = 0


def _empty_stream(feature_dim: int = 0) -> EventStream:
    return EventStream(
        np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
        np.zeros((0, feature_dim), dtype=np.int64), 0, 0)


def parse_csv(source: str | Path | bytes) -> ParseResult:
    """Parse an event-log CSV into a canonical EventStream.

    Raw ids are remapped to dense 0-based ids in order of first appearance
    after the canonical sort; the mapping tables are kept for reporting.
    Non-monotone timestamps are accepted but re-sorted (stable), counted in
    ``resort_warnings``.
    """
    if isinstance(source, bytes):
        fh = io.StringIO(source.decode("utf-8"))
    else:
        fh = open(source, "r", encoding="utf-8", newline="")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header", line=1)
        header = [h.strip() for h in header]
        if header[:4] != ["user_id", "item_id", "timestamp", "label"]:
            raise ParseError(f"bad header {header[:4]}", line=1)
        feature_dim = len(header) - 4

        users, items, times, labels, feats = [], [], [], [], []
        all_int_times = True
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 + feature_dim:
                raise ParseError(f"expected {4 + feature_dim} fields, got {len(row)}",
                                 line=lineno)
            try:
                users.append(int(row[0]))
                items.append(int(row[1]))
                t_text = row[2].strip()
                try:
                    t = int(t_text)
                except ValueError:
                    t = float(t_text)
                    all_int_times = False
                times.append(t)
                labels.append(int(row[3]))
                feats.append([int(v) for v in row[4:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc

    n = len(users)
    if n == 0:
        return ParseResult(_empty_stream(feature_dim))

    time_arr = np.asarray(times, dtype=np.int64 if all_int_times else np.float64)
    order = np.argsort(time_arr, kind="stable")
    warnings = int(np.sum(np.diff(time_arr) < 0))

    user_map: dict[int, int] = {}
    item_map: dict[int, int] = {}
    dense_u = np.empty(n, dtype=np.int64)
    dense_i = np.empty(n, dtype=np.int64)
    for pos, idx in enumerate(order):
        raw_u, raw_i = users[idx], items[idx]
        if raw_u < 0 or raw_i < 0:
            raise ParseError(f"negative id in row for t={times[idx]}")
        dense_u[pos] = user_map.setdefault(raw_u, len(user_map))
        dense_i[pos] = item_map.setdefault(raw_i, len(item_map))

    feat_arr = np.asarray(feats, dtype=np.int64).reshape(n, feature_dim)[order]
    stream = EventStream(
        dense_u, dense_i, time_arr[order],
        np.asarray(labels, dtype=np.int64)[order], feat_arr,
        n_users=len(user_map), n_items=len(item_map),
        feature_vocab=int(feat_arr.max()) + 1 if feat_arr.size else 0)
    return ParseResult(stream, user_map, item_map, warnings)


def write_csv(stream: EventStream, path: str | Path) -> None:
    """Write the stream in the canonical CSV format (dense ids)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "item_id", "timestamp", "label"]
                        + [f"feat_{i}" for i in range(stream.feature_dim)])
        int_times = np.issubdtype(stream.time.dtype, np.integer)
        for i in range(len(stream)):
            t = int(stream.time[i]) if int_times else float(stream.time[i])
            writer.writerow([int(stream.user[i]), int(stream.item[i]), t,
                             int(stream.label[i])]
                            + [int(v) for v in stream.feat[i]])


def write_id_maps(result: ParseResult, path: str | Path) -> None:
    """JSON sidecar with the raw-to-dense id remapping tables."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"users": {str(k): v for k, v in result.user_map.items()},
                   "items": {str(k): v for k, v in result.item_map.items()},
                   "resort_warnings": result.resort_warnings},
                  fh, indent=2, sort_keys=True)


def split_train_valid_test(stream: EventStream,
                           fractions: tuple[float, float, float]
                           ) -> tuple[EventStream, EventStream, EventStream]:
    """Contiguous time-ordered split; boundaries at floor of cumulative fractions."""
    fa, fb, fc = fractions
    if min(fa, fb, fc) < 0:
        raise ValidationError("fractions must be nonnegative")
    if abs(fa + fb + fc - 1.0) > 1e-9:
        raise ValidationError("fractions must sum to 1")
    n = len(stream)
    b1 = int(math.floor(fa * n + 1e-12))
    b2 = int(math.floor((fa + fb) * n + 1e-12))
    return stream.slice(0, b1), stream.slice(b1, b2), stream.slice(b2, n)


def classify_active(stream: EventStream, user_threshold: float,
                    item_threshold: float) -> ActiveSets:
    """Strict-inequality activity on the given (training) stream only.

    A threshold of ``math.inf`` yields an empty active set.
    """
    if user_threshold < 0 or item_threshold < 0:
        raise ValidationError("thresholds must be >= 0 or infinity")

    def over(ids: np.ndarray, threshold: float) -> frozenset[int]:
        if math.isinf(threshold) or len(ids) == 0:
            return frozenset()
        counts = np.bincount(ids)
        return frozenset(int(v) for v in np.nonzero(counts > threshold)[0])

    return ActiveSets(user_threshold, item_threshold,
                      over(stream.user, user_threshold),
                      over(stream.item, item_threshold))


def make_batches(stream: EventStream, n_batches: int) -> BatchPlan:
    """Equal-size (±1) contiguous batches preserving time order."""
    n = len(stream)
    if n_batches < 1:
        raise ValidationError("n_batches must be >= 1")
    if n_batches > n:
        raise ValidationError(f"n_batches={n_batches} exceeds {n} events")
    base, rem = divmod(n, n_batches)
    bounds = []
    lo = 0
    for b in range(n_batches):
        hi = lo + base + (1 if b < rem else 0)
        bounds.append((lo, hi))
        lo = hi
    return BatchPlan(n_batches, tuple(bounds))
