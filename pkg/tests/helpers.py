"""Independent oracles and random-instance builders shared by the tests.

These deliberately avoid the production traversal code: depth is recomputed
by memoized recursion over predecessor lists, and schedule minimality by
exhaustive level assignment.
"""

from __future__ import annotations

import random
from functools import lru_cache

from streamdag.compgraph import (KIND_INIT, KIND_STATE, KIND_STATIC, CompDag)


def brute_longest_path(dag: CompDag) -> int:
    """Memoized exhaustive DP: states on the longest path ending anywhere."""

    @lru_cache(maxsize=None)
    def ending_at(i: int) -> int:
        own = 1 if dag.kinds[i] == KIND_STATE else 0
        best = 0
        for p in dag.pred[i]:
            got = ending_at(p)
            if got > best:
                best = got
        return own + best

    result = max((ending_at(i) for i in range(len(dag))), default=0)
    ending_at.cache_clear()
    return result


def random_dag(rng: random.Random, max_nodes: int = 200,
               edge_prob: float = 0.25) -> CompDag:
    """Random valid-shaped DAG: a few roots plus states; edges only enter
    states and only from lower indices, so acyclicity holds by construction."""
    n_roots = rng.randint(1, 4)
    n_states = rng.randint(1, max_nodes - n_roots)
    dag = CompDag()
    for r in range(n_roots):
        dag.add_node(rng.choice((KIND_STATIC, KIND_INIT)), 1, r)
    for s in range(n_states):
        idx = dag.add_node(KIND_STATE, 1 + s % 2, s, event=s)
        n_prev = idx  # candidate predecessors: all earlier nodes
        for p in range(n_prev):
            if len(dag.pred[idx]) >= 2:
                break
            if rng.random() < edge_prob:
                dag.add_edge(rng.randrange(n_prev), idx)
    return dag


def min_schedule_steps(dag: CompDag, bound: int) -> bool:
    """True if some valid level-synchronous schedule uses <= bound steps.

    Exhaustive search with forced-earliest pruning: each state's earliest
    feasible level is 1 + max over predecessors, which is also optimal, so
    infeasibility of the earliest assignment settles the question.
    """
    levels: dict[int, int] = {}
    for i in range(len(dag)):
        if dag.kinds[i] != KIND_STATE:
            levels[i] = 0
            continue
        earliest = 1
        for p in dag.pred[i]:
            earliest = max(earliest, levels[p] + 1)
        if earliest > bound:
            return False
        levels[i] = earliest
    return True


def exhaustive_best_subset_depth(dag: CompDag, quota: int) -> int:
    """Reference minimizer over all d-node subsets, via the transform itself."""
    from itertools import combinations

    from streamdag.dnodes import decouple
    from streamdag.depth import longest_path

    states = dag.state_indices()
    best = longest_path(dag).depth
    for k in range(1, quota + 1):
        for subset in combinations(states, k):
            work = dag
            for node in subset:
                work = decouple(work, node)
            best = min(best, longest_path(work).depth)
    return best
