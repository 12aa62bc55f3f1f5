"""Computational DAG of temporal embedding states.

One graph node per temporal state ``(u, event)`` of an inactive endpoint,
plus root nodes: a static root per active node and an init root per inactive
node appearing in the stream. Every state has exactly two in-edges: the
self-chain from the node's previous state and a cross edge from the partner's
pre-event state (or the partner's static root). Both endpoints of an event
read the partner's state *before* the event, so states are keyed by event
index rather than raw timestamp and the last-seen map is advanced only after
both endpoints were wired.

Nodes are stored as parallel flat arrays with adjacency lists; indices of
states follow event order, so they are already topologically sorted until
decoupling adds replica roots at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import GraphError, ValidationError
from .ingest import ActiveSets, EventStream

KIND_STATIC = 0   # learnable static embedding of an active node (root)
KIND_INIT = 1     # shared init of an inactive node's first state (root)
KIND_STATE = 2    # computed temporal state (u, event)
KIND_REPLICA = 3  # root replica created by decoupling (holds out-edges)

KIND_NAMES = {KIND_STATIC: "static", KIND_INIT: "init",
              KIND_STATE: "state", KIND_REPLICA: "replica"}

StateKey = tuple[int, int, int]  # (partition, node_id, event_index)


@dataclass
class CompDag:
    kinds: list[int] = field(default_factory=list)
    parts: list[int] = field(default_factory=list)     # 1 = users, 2 = items
    node_ids: list[int] = field(default_factory=list)
    events: list[int] = field(default_factory=list)    # -1 for roots
    succ: list[list[int]] = field(default_factory=list)
    pred: list[list[int]] = field(default_factory=list)
    decoupled: set[int] = field(default_factory=set)   # state idx -> has replica
    replica_of: dict[int, int] = field(default_factory=dict)

    def add_node(self, kind: int, part: int, node_id: int, event: int = -1) -> int:
        idx = len(self.kinds)
        self.kinds.append(kind)
        self.parts.append(part)
        self.node_ids.append(node_id)
        self.events.append(event)
        self.succ.append([])
        self.pred.append([])
        return idx

    def add_edge(self, src: int, dst: int) -> None:
        self.succ[src].append(dst)
        self.pred[dst].append(src)

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    @property
    def n_states(self) -> int:
        return sum(1 for k in self.kinds if k == KIND_STATE)

    def state_indices(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == KIND_STATE]

    def is_state(self, idx: int) -> bool:
        return self.kinds[idx] == KIND_STATE

    def state_key(self, idx: int) -> StateKey:
        if self.kinds[idx] != KIND_STATE:
            raise GraphError(f"node {idx} is not a state")
        return (self.parts[idx], self.node_ids[idx], self.events[idx])

    def clone(self) -> "CompDag":
        return CompDag(list(self.kinds), list(self.parts), list(self.node_ids),
                       list(self.events), [list(s) for s in self.succ],
                       [list(p) for p in self.pred], set(self.decoupled),
                       dict(self.replica_of))


def build_dag(stream: EventStream, actives: ActiveSets,
              lo: int = 0, hi: int | None = None) -> CompDag:
    """Build the computational DAG for events ``[lo, hi)`` of the stream.

    Event indices stored on state nodes are global stream indices, so
    per-batch DAGs line up with the full stream.
    """
    if hi is None:
        hi = len(stream)
    if not (0 <= lo <= hi <= len(stream)):
        raise ValidationError(f"bad event range [{lo}, {hi})")

    dag = CompDag()
    static_idx: dict[tuple[int, int], int] = {}
    for u in sorted(actives.active_users):
        static_idx[(1, u)] = dag.add_node(KIND_STATIC, 1, u)
    for v in sorted(actives.active_items):
        static_idx[(2, v)] = dag.add_node(KIND_STATIC, 2, v)

    last_state: dict[tuple[int, int], int] = {}  # (part, node) -> node index
    users, items = stream.user, stream.item
    n_users, n_items = stream.n_users, stream.n_items
    au, ai = actives.active_users, actives.active_items

    for e in range(lo, hi):
        u = int(users[e])
        v = int(items[e])
        if not (0 <= u < n_users and 0 <= v < n_items):
            raise GraphError(f"event {e} references unknown node ({u}, {v})")
        endpoints = ((1, u, u in au), (2, v, v in ai))

        # Create init roots first so indices stay topologically sorted.
        for part, node, active in endpoints:
            if not active and (part, node) not in last_state:
                last_state[(part, node)] = dag.add_node(KIND_INIT, part, node)

        new_states = []
        for part, node, active in endpoints:
            if active:
                continue
            state = dag.add_node(KIND_STATE, part, node, event=e)
            dag.add_edge(last_state[(part, node)], state)

            other_part, other_node, other_active = endpoints[2 - part]
            if other_active:
                dag.add_edge(static_idx[(other_part, other_node)], state)
            else:
                dag.add_edge(last_state[(other_part, other_node)], state)
            new_states.append(((part, node), state))

        # Advance only after both endpoints read the pre-event states.
        for key, state in new_states:
            last_state[key] = state
    return dag


@dataclass
class DagReport:
    ok: bool
    violations: list[str] = field(default_factory=list)


def validate_dag(dag: CompDag) -> DagReport:
    """Structural checks: acyclicity, in-degree bounds, root conditions."""
    violations = []
    n = len(dag)
    indeg = [len(p) for p in dag.pred]
    for i in range(n):
        kind = dag.kinds[i]
        if kind == KIND_STATE:
            if indeg[i] > 2:
                violations.append(f"state {i} has in-degree {indeg[i]} > 2")
        else:
            if indeg[i] != 0:
                violations.append(
                    f"{KIND_NAMES[kind]} {i} must be a root, in-degree {indeg[i]}")
    for src, targets in enumerate(dag.succ):
        for dst in targets:
            if dag.kinds[dst] != KIND_STATE:
                violations.append(f"edge ({src}, {dst}) enters a non-state node")

    remaining = list(indeg)
    queue = [i for i in range(n) if remaining[i] == 0]
    head = 0
    seen = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        seen += 1
        for v in dag.succ[u]:
            remaining[v] -= 1
            if remaining[v] == 0:
                queue.append(v)
    if seen != n:
        cycle_nodes = [i for i in range(n) if remaining[i] > 0]
        violations.append(f"cycle through nodes {cycle_nodes[:10]}")
    return DagReport(ok=not violations, violations=violations)


def expected_counts(stream: EventStream, actives: ActiveSets,
                    lo: int = 0, hi: int | None = None) -> tuple[int, int]:
    """Closed-form (node, edge) counts for ``build_dag`` on the same range."""
    if hi is None:
        hi = len(stream)
    inactive_nodes = set()
    inactive_endpoints = 0
    for e in range(lo, hi):
        u, v = int(stream.user[e]), int(stream.item[e])
        if u not in actives.active_users:
            inactive_nodes.add((1, u))
            inactive_endpoints += 1
        if v not in actives.active_items:
            inactive_nodes.add((2, v))
            inactive_endpoints += 1
    nodes = actives.size + len(inactive_nodes) + inactive_endpoints
    return nodes, 2 * inactive_endpoints


def export_edge_list(dag: CompDag) -> str:
    """Text edge list ``src dst`` per line, stable order."""
    lines = []
    for src, targets in enumerate(dag.succ):
        for dst in targets:
            lines.append(f"{src} {dst}")
    return "\n".join(lines) + ("\n" if lines else "")


def export_node_table(dag: CompDag) -> list[dict]:
    return [{"kind": KIND_NAMES[dag.kinds[i]], "partition": dag.parts[i],
             "node": dag.node_ids[i], "event": dag.events[i]}
            for i in range(len(dag))]


def import_dag(node_table: list[dict], edge_text: str) -> CompDag:
    """Rebuild a CompDag from the export formats (external tooling path)."""
    name_to_kind = {v: k for k, v in KIND_NAMES.items()}
    dag = CompDag()
    for row in node_table:
        dag.add_node(name_to_kind[row["kind"]], int(row["partition"]),
                     int(row["node"]), int(row["event"]))
    for lineno, line in enumerate(edge_text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        src_s, dst_s = line.split()
        src, dst = int(src_s), int(dst_s)
        if not (0 <= src < len(dag) and 0 <= dst < len(dag)):
            raise GraphError(f"edge line {lineno} out of range: {line}")
        dag.add_edge(src, dst)
    return dag
