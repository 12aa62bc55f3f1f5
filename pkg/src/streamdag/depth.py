"""Work/depth metrics and wavefront schedules for computational DAGs.

Depth counts computed (state) nodes along a path; roots sit at level 0, so a
DAG with no states has depth 0. The per-node level is the classic longest-
distance-from-roots quantity, computed in one Kahn pass, O(|V|+|E|). A
wavefront schedule executes level k+1's states at step k, which is the
minimum possible number of level-synchronous steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .compgraph import KIND_STATE, CompDag
from .errors import GraphError
from .ingest import ActiveSets, BatchPlan, EventStream


@dataclass
class DepthReport:
    work: int                    # number of state (computed) nodes
    depth: int                   # states on the longest root-to-leaf path
    per_node_level: list[int]
    critical_path: list[int]     # state indices, level 1..depth

    def to_json(self) -> str:
        return json.dumps({"work": self.work, "depth": self.depth,
                           "critical_path": self.critical_path,
                           "per_node_level": self.per_node_level})


@dataclass
class Schedule:
    levels: list[list[int]]

    @property
    def step_count(self) -> int:
        return len(self.levels)

    def emit_levels(self) -> str:
        return "\n".join(" ".join(str(i) for i in level)
                         for level in self.levels) + ("\n" if self.levels else "")


def _compute_levels(dag: CompDag) -> list[int]:
    n = len(dag)
    # A state contributes 1 to any path through it, even with no predecessors.
    levels = [1 if k == KIND_STATE else 0 for k in dag.kinds]
    remaining = [len(p) for p in dag.pred]
    queue = [i for i in range(n) if remaining[i] == 0]
    head = 0
    succ = dag.succ
    while head < len(queue):
        u = queue[head]
        head += 1
        lu1 = levels[u] + 1
        for v in succ[u]:
            if lu1 > levels[v]:
                levels[v] = lu1
            remaining[v] -= 1
            if remaining[v] == 0:
                queue.append(v)
    if head != n:
        raise GraphError("graph contains a cycle; not a DAG")
    return levels


def longest_path(dag: CompDag) -> DepthReport:
    """Levels for all nodes plus one deterministic critical-path witness.

    Ties are broken toward the smallest node index, both for the endpoint
    and at every step backwards.
    """
    levels = _compute_levels(dag)
    work = dag.n_states
    depth = max(levels, default=0)
    if depth == 0:
        return DepthReport(work, 0, levels, [])

    tail = min(i for i, l in enumerate(levels) if l == depth)
    path = [tail]
    cur = tail
    while levels[cur] > 1:
        want = levels[cur] - 1
        cur = min(p for p in dag.pred[cur] if levels[p] == want)
        path.append(cur)
    path.reverse()
    return DepthReport(work, depth, levels, path)


def wavefront_schedule(dag: CompDag) -> Schedule:
    """Level-synchronous schedule: step k runs the states with level k+1."""
    levels = _compute_levels(dag)
    depth = max(levels, default=0)
    buckets: list[list[int]] = [[] for _ in range(depth)]
    for i, kind in enumerate(dag.kinds):
        if kind == KIND_STATE:
            buckets[levels[i] - 1].append(i)
    return Schedule(buckets)


@dataclass
class BatchDepthStats:
    reports: list[DepthReport] = field(default_factory=list)

    @property
    def mean_depth(self) -> float:
        if not self.reports:
            return 0.0
        return sum(r.depth for r in self.reports) / len(self.reports)

    @property
    def mean_work(self) -> float:
        if not self.reports:
            return 0.0
        return sum(r.work for r in self.reports) / len(self.reports)


def batch_depth_stats(stream: EventStream, actives: ActiveSets,
                      plan: BatchPlan) -> BatchDepthStats:
    """Per-batch depth reports over per-batch DAGs (fractional means)."""
    from .compgraph import build_dag

    stats = BatchDepthStats()
    for lo, hi in plan:
        stats.reports.append(longest_path(build_dag(stream, actives, lo, hi)))
    return stats
