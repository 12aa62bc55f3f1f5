"""streamdag: depth-minimizing decoupling of temporal interaction DAGs.

Builds the computational DAG induced by event-by-event embedding updates
over a bipartite interaction stream, selects d-nodes that shorten its
longest path, emits wavefront schedules, and verifies the decoupling is
model-preserving with a small numpy training core.
"""

from .compgraph import CompDag, build_dag, validate_dag
from .dnodes import (DecoupleResult, DNodeSet, decouple, select_cut_by_time,
                       select_exact, select_greedy)
from .depth import (BatchDepthStats, DepthReport, Schedule, batch_depth_stats,
                    longest_path, wavefront_schedule)
from .ingest import (ActiveSets, BatchPlan, Event, EventStream, classify_active,
                     make_batches, parse_csv, split_train_valid_test, write_csv)
from .synthgen import (StreamSpec, eight_event_fixture, generate_scale_free,
                       generate_uniform)

__version__ = "0.1.0"

__all__ = [
    "ActiveSets", "BatchDepthStats", "BatchPlan", "CompDag", "DNodeSet",
    "DecoupleResult", "DepthReport", "Event", "EventStream", "Schedule",
    "StreamSpec", "batch_depth_stats", "build_dag", "classify_active",
    "decouple", "eight_event_fixture", "generate_scale_free",
    "generate_uniform", "longest_path", "make_batches", "parse_csv",
    "select_cut_by_time", "select_exact", "select_greedy",
    "split_train_valid_test", "validate_dag", "wavefront_schedule",
    "write_csv",
]
