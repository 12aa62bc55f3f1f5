"""D-node selection: greedy center-of-longest-path, exact tiny-instance
search, and the cut-by-time baseline, plus the decoupling transform itself.

Decoupling a state node i adds a root replica i' and moves every out-edge
(i, j) to (i', j); i keeps its in-edges. Descendants of i' then no longer
wait on i's ancestors, which is what shortens the longest path. The greedy
heuristic repeatedly splits the current longest path at its center state;
the exact solver brute-forces all budget-feasible subsets and realizes the
minmax program (level >= (1 - selected) * pred_level + 1, sum selected <= K)
by direct evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

from .compgraph import KIND_REPLICA, KIND_STATE, CompDag, StateKey
from .depth import longest_path
from .errors import GraphError, ValidationError

EXACT_MAX_STATES = 24
EXACT_MAX_K = 4


@dataclass
class DNodeSet:
    members: list[int]   # state node indices in the *original* DAG
    quota: int

    def __post_init__(self):
        if len(self.members) != len(set(self.members)):
            raise ValidationError("d-node members must be distinct")
        if len(self.members) > self.quota:
            raise ValidationError("d-node count exceeds quota")


@dataclass
class DecoupleResult:
    dag: CompDag
    dnodes: DNodeSet
    replica_of: dict[int, int]          # replica index -> original index
    depth_trajectory: list[int]

    @property
    def final_depth(self) -> int:
        return self.depth_trajectory[-1]

    def dnode_keys(self) -> set[StateKey]:
        return {self.dag.state_key(i) for i in self.dnodes.members}

    def to_json(self) -> str:
        triples = [{"partition": p, "node": n, "event": e}
                   for (p, n, e) in sorted(self.dnode_keys())]
        return json.dumps({"quota": self.dnodes.quota,
                           "n_dnodes": len(self.dnodes.members),
                           "dnodes": triples,
                           "depth_trajectory": self.depth_trajectory})


def _decouple_inplace(dag: CompDag, node: int) -> int:
    if not (0 <= node < len(dag)):
        raise GraphError(f"node {node} out of range")
    if dag.kinds[node] == KIND_REPLICA:
        raise GraphError(f"node {node} is a replica; decoupling it is useless")
    if dag.kinds[node] != KIND_STATE:
        raise GraphError(f"node {node} is a root; only states can be decoupled")
    if node in dag.decoupled:
        raise GraphError(f"node {node} is already decoupled")

    replica = dag.add_node(KIND_REPLICA, dag.parts[node], dag.node_ids[node],
                           dag.events[node])
    moved = dag.succ[node]
    dag.succ[node] = []
    dag.succ[replica] = moved
    for j in moved:
        dag.pred[j] = [replica if p == node else p for p in dag.pred[j]]
    dag.decoupled.add(node)
    dag.replica_of[replica] = node
    return replica


def decouple(dag: CompDag, node: int) -> CompDag:
    """Pure single-node decoupling: returns a new DAG, |V|+1, |E| unchanged."""
    out = dag.clone()
    _decouple_inplace(out, node)
    return out


def select_greedy(dag: CompDag, quota: int) -> DecoupleResult:
    """K rounds of: find a longest path, decouple its center state.

    The center of a path with m states is index (m - 1) // 2, which splits
    the path into halves of m // 2 + (m + 1) // 2 states. Stops early once
    depth <= 1. O(K * (|V| + |E|)).
    """
    if quota < 0:
        raise ValidationError("quota must be >= 0")
    work = dag.clone()
    members: list[int] = []
    replica_of: dict[int, int] = {}
    report = longest_path(work)
    trajectory = [report.depth]
    for _ in range(quota):
        if report.depth <= 1:
            break
        path = report.critical_path
        center = path[(len(path) - 1) // 2]
        replica = _decouple_inplace(work, center)
        members.append(center)
        replica_of[replica] = center
        report = longest_path(work)
        trajectory.append(report.depth)
    return DecoupleResult(work, DNodeSet(members, quota), replica_of, trajectory)


def _topo_order(dag: CompDag) -> list[int]:
    remaining = [len(p) for p in dag.pred]
    order = [i for i in range(len(dag)) if remaining[i] == 0]
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v in dag.succ[u]:
            remaining[v] -= 1
            if remaining[v] == 0:
                order.append(v)
    if head != len(dag):
        raise GraphError("graph contains a cycle; not a DAG")
    return order


def _depth_with_set(dag: CompDag, order: list[int],
                    selected: tuple[int, ...]) -> int:
    """Depth after decoupling `selected`, evaluated without copying the DAG.

    Direct evaluation of the minmax program: an edge (j, i) contributes
    level(j) + 1 unless j is selected, in which case it contributes 1.
    """
    chosen = set(selected)
    levels = [0] * len(dag)
    for i in order:
        if dag.kinds[i] != KIND_STATE:
            continue
        best = 1
        for j in dag.pred[i]:
            cand = 1 if j in chosen else levels[j] + 1
            if cand > best:
                best = cand
        levels[i] = best
    return max(levels, default=0)


def select_exact(dag: CompDag, quota: int) -> DecoupleResult:
    """Optimal d-node set by exhaustion over subsets of size <= quota.

    Only feasible on tiny instances; errors out beyond the documented bounds
    and points to the greedy heuristic.
    """
    states = dag.state_indices()
    if len(states) > EXACT_MAX_STATES or quota > EXACT_MAX_K:
        raise ValidationError(
            f"exact search limited to {EXACT_MAX_STATES} states and "
            f"K <= {EXACT_MAX_K}; use select_greedy")
    if quota < 0:
        raise ValidationError("quota must be >= 0")

    base_depth = longest_path(dag).depth
    order = _topo_order(dag)
    best_set: tuple[int, ...] = ()
    best_depth = base_depth
    for k in range(1, quota + 1):
        for subset in combinations(states, k):
            d = _depth_with_set(dag, order, subset)
            if d < best_depth:
                best_depth = d
                best_set = subset

    work = dag.clone()
    replica_of = {}
    for node in best_set:
        replica_of[_decouple_inplace(work, node)] = node
    return DecoupleResult(work, DNodeSet(list(best_set), quota), replica_of,
                          [base_depth, best_depth] if best_set else [base_depth])


def select_cut_by_time(dag: CompDag, n_parts: int,
                       event_range: tuple[int, int] | None = None
                       ) -> DecoupleResult:
    """Baseline: sever every dependency crossing equal-event-count boundaries.

    The covered event range (defaults to the DAG's own span) is divided into
    n_parts equal-count intervals; for each graph node, the last state before
    a boundary whose next state falls in a later part is decoupled. The
    d-node count is emergent, not budgeted.
    """
    if n_parts < 1:
        raise ValidationError("n_parts must be >= 1")

    state_events = [dag.events[i] for i in range(len(dag))
                    if dag.kinds[i] == KIND_STATE]
    base_depth = longest_path(dag).depth
    if not state_events:
        return DecoupleResult(dag.clone(), DNodeSet([], 0), {}, [base_depth])

    if event_range is not None:
        lo, hi = event_range
    else:
        lo, hi = min(state_events), max(state_events) + 1
    span = hi - lo

    def part_of(event: int) -> int:
        return (event - lo) * n_parts // span

    last_seen: dict[tuple[int, int], int] = {}
    to_cut: list[int] = []
    for i in range(len(dag)):
        if dag.kinds[i] != KIND_STATE:
            continue
        key = (dag.parts[i], dag.node_ids[i])
        prev = last_seen.get(key)
        if prev is not None and part_of(dag.events[prev]) != part_of(dag.events[i]):
            to_cut.append(prev)
        last_seen[key] = i

    work = dag.clone()
    replica_of = {}
    for node in to_cut:
        replica_of[_decouple_inplace(work, node)] = node
    final_depth = longest_path(work).depth if to_cut else base_depth
    trajectory = [base_depth, final_depth] if to_cut else [base_depth]
    return DecoupleResult(work, DNodeSet(to_cut, len(to_cut)),
                          replica_of, trajectory)


@dataclass
class SweepRow:
    k_or_parts: int
    n_dnodes: float
    mean_longest_path: float


def sweep_csv_rows(rows: list[SweepRow]) -> list[tuple[str, str, str]]:
    """Rows for the `k,dnodes,mean_longest_path` table."""
    return [(str(r.k_or_parts), f"{r.n_dnodes:g}", f"{r.mean_longest_path:g}")
            for r in rows]
