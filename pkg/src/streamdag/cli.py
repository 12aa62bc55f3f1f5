"""Command-line pipeline: generate, analyze, select, schedule, train, toy, eval.

Every run resolves a RunConfig with precedence CLI flag > config file >
default, writes its outputs plus a manifest carrying the resolved config and
its hash, and is deterministic under a fixed seed: rerunning a command with
the same config produces byte-identical artifacts.

Config files are flat ``key = value`` text; keys match the flag names with
underscores (``n_events = 1000``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import compgraph, depth, dnodes, ingest, synthgen, traincore
from .errors import ParseError, ValidationError

STRATEGIES = ("greedy", "exact", "cut-by-time", "none")


@dataclass
class RunConfig:
    input: str = ""
    kind: str = "scale-free"          # generator kind when no input file
    n_users: int = 100
    n_items: int = 100
    n_events: int = 1000
    exponent: float = 1.0
    feature_dim: int = 0
    label_cardinality: int = 2
    seed: int = 0
    user_threshold: float = math.inf
    item_threshold: float = math.inf
    n_batches: int = 1
    k: int = 0
    strategy: str = "none"
    sweep: str = ""                   # comma list of K values or part counts
    alpha: float = 1.0
    lr: float = 0.1
    epochs: int = 10
    n_negatives: int = 10
    eval_negatives: int = 499
    dim: int = 8
    train_frac: float = 0.7
    valid_frac: float = 0.1
    test_frac: float = 0.2
    evolve_active: bool = True
    workers: int = 1
    out_dir: str = "."
    checkpoint: str = ""

    def sweep_values(self) -> list[int]:
        if not self.sweep:
            return [self.k] if self.strategy != "cut-by-time" else [1]
        return [int(v) for v in self.sweep.split(",") if v.strip() != ""]

    def canonical(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in sorted(asdict(self).items()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_BOOL_KEYS = {"evolve_active"}


def _coerce(key: str, value: str):
    value = value.strip()
    if key in _BOOL_KEYS:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"bad boolean for {key}: {value}")
    target = {f.name: f.type for f in fields(RunConfig)}.get(key)
    if target is None:
        raise ValidationError(f"unknown config key: {key}")
    if target == "int":
        return int(value)
    if target == "float":
        return float(value)
    return value


def load_config_file(path: str | Path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key = value, got {line!r}", line=lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = _coerce(key, value)
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {f.name: f.default for f in fields(RunConfig)}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for name in values:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return RunConfig(**values)


def _write_manifest(config: RunConfig, command: str, outputs: list[str]) -> Path:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}_manifest.json"
    manifest = {"command": command, "config": asdict(config),
                "config_hash": config.config_hash(),
                "outputs": sorted(outputs)}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True,
                               default=str) + "\n", encoding="utf-8")
    return path


def _load_stream(config: RunConfig) -> ingest.EventStream:
    if config.input:
        return ingest.parse_csv(config.input).stream
    spec = synthgen.StreamSpec(
        n_users=config.n_users, n_items=config.n_items,
        n_events=config.n_events, attachment_exponent=config.exponent,
        seed=config.seed, feature_dim=config.feature_dim,
        label_cardinality=config.label_cardinality)
    if config.kind == "scale-free":
        return synthgen.generate_scale_free(spec)
    if config.kind == "uniform":
        return synthgen.generate_uniform(spec)
    if config.kind == "fixture":
        return synthgen.eight_event_fixture()
    raise ValidationError(f"unknown generator kind: {config.kind}")


def cmd_generate(config: RunConfig) -> list[str]:
    stream = _load_stream(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "events.csv"
    ingest.write_csv(stream, out)
    return [str(out)]


def _batch_sweep(stream, actives, lo, hi, strategy, sweep):
    """Per-batch (n_dnodes, depth) for each sweep point; runs on a worker."""
    dag = compgraph.build_dag(stream, actives, lo, hi)
    points = []
    if strategy == "none":
        base = depth.longest_path(dag).depth
        points.append((0, 0.0, float(base)))
    elif strategy == "greedy":
        result = dnodes.select_greedy(dag, max(sweep))
        traj = result.depth_trajectory
        for k in sweep:
            used = min(k, len(traj) - 1)
            points.append((k, float(used), float(traj[used])))
    elif strategy == "exact":
        for k in sweep:
            result = dnodes.select_exact(dag, k)
            points.append((k, float(len(result.dnodes.members)),
                           float(result.final_depth)))
    elif strategy == "cut-by-time":
        for parts in sweep:
            result = dnodes.select_cut_by_time(dag, parts, event_range=(lo, hi))
            points.append((parts, float(len(result.dnodes.members)),
                           float(result.final_depth)))
    else:
        raise ValidationError(f"unknown strategy: {strategy}")
    return points


def analyze_sweep(stream, actives, plan, strategy, sweep, workers: int = 1):
    """Sweep rows aggregated over per-batch DAGs; deterministic merge order."""
    if strategy == "none":
        sweep = [0]
    if not sweep:
        raise ValidationError("empty sweep")
    if any(v < 0 for v in sweep):
        raise ValidationError("sweep values must be nonnegative")
    if strategy == "cut-by-time" and any(v < 1 for v in sweep):
        raise ValidationError("part counts must be >= 1")

    jobs = list(plan)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_batch = list(pool.map(
                lambda b: _batch_sweep(stream, actives, b[0], b[1],
                                       strategy, sweep), jobs))
    else:
        per_batch = [_batch_sweep(stream, actives, lo, hi, strategy, sweep)
                     for lo, hi in jobs]

    rows = []
    detail = {}
    for i, point in enumerate(per_batch[0]):
        k = point[0]
        counts = [b[i][1] for b in per_batch]
        depths = [b[i][2] for b in per_batch]
        rows.append(dnodes.SweepRow(
            k_or_parts=k,
            n_dnodes=sum(counts) / len(counts),
            mean_longest_path=sum(depths) / len(depths)))
        detail[str(k)] = {"n_dnodes": counts, "depth": depths}
    return rows, detail


def cmd_analyze(config: RunConfig) -> list[str]:
    stream = _load_stream(config)
    if len(stream) == 0:
        raise ValidationError("no events to analyze")
    actives = ingest.classify_active(stream, config.user_threshold,
                                     config.item_threshold)
    plan = ingest.make_batches(stream, config.n_batches)
    rows, detail = analyze_sweep(stream, actives, plan, config.strategy,
                                 config.sweep_values(), config.workers)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "analyze.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "k_or_parts", "n_dnodes",
                         "mean_longest_path"])
        for row in rows:
            writer.writerow([config.strategy, row.k_or_parts,
                             f"{row.n_dnodes:g}", f"{row.mean_longest_path:g}"])
    json_path = out_dir / "analyze.json"
    json_path.write_text(json.dumps(
        {"strategy": config.strategy, "n_batches": config.n_batches,
         "rows": [{"k_or_parts": r.k_or_parts, "n_dnodes": r.n_dnodes,
                   "mean_longest_path": r.mean_longest_path} for r in rows],
         "per_batch": detail}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return [str(csv_path), str(json_path)]


def _select_results(stream, actives, plan, config: RunConfig):
    results = []
    for lo, hi in plan:
        dag = compgraph.build_dag(stream, actives, lo, hi)
        if config.strategy == "greedy":
            results.append(dnodes.select_greedy(dag, config.k))
        elif config.strategy == "exact":
            results.append(dnodes.select_exact(dag, config.k))
        elif config.strategy == "cut-by-time":
            results.append(dnodes.select_cut_by_time(
                dag, max(config.k, 1), event_range=(lo, hi)))
        elif config.strategy == "none":
            results.append(dnodes.select_greedy(dag, 0))
        else:
            raise ValidationError(f"unknown strategy: {config.strategy}")
    return results


def cmd_select(config: RunConfig) -> list[str]:
    stream = _load_stream(config)
    if len(stream) == 0:
        raise ValidationError("no events to select over")
    actives = ingest.classify_active(stream, config.user_threshold,
                                     config.item_threshold)
    plan = ingest.make_batches(stream, config.n_batches)
    results = _select_results(stream, actives, plan, config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "dnodes.json"
    payload = [json.loads(r.to_json()) for r in results]
    path.write_text(json.dumps({"strategy": config.strategy,
                                "batches": payload}, indent=2,
                               sort_keys=True) + "\n", encoding="utf-8")
    return [str(path)]


def cmd_schedule(config: RunConfig) -> list[str]:
    stream = _load_stream(config)
    actives = ingest.classify_active(stream, config.user_threshold,
                                     config.item_threshold)
    dag = compgraph.build_dag(stream, actives)
    if config.strategy == "greedy" and config.k > 0:
        dag = dnodes.select_greedy(dag, config.k).dag
    sched = depth.wavefront_schedule(dag)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    levels_path = out_dir / "schedule.levels"
    levels_path.write_text(sched.emit_levels(), encoding="utf-8")
    meta_path = out_dir / "schedule.json"
    meta_path.write_text(json.dumps(
        {"steps": sched.step_count, "work": dag.n_states,
         "strategy": config.strategy, "k": config.k},
        indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [str(levels_path), str(meta_path)]


def _split(stream, config: RunConfig):
    return ingest.split_train_valid_test(
        stream, (config.train_frac, config.valid_frac, config.test_frac))


def cmd_train(config: RunConfig) -> list[str]:
    stream = _load_stream(config)
    train_stream, valid_stream, test_stream = _split(stream, config)
    if len(train_stream) == 0:
        raise ValidationError("no training events")
    actives = ingest.classify_active(train_stream, config.user_threshold,
                                     config.item_threshold)
    plan = ingest.make_batches(train_stream,
                               min(config.n_batches, len(train_stream)))
    dnodes = None
    if config.strategy != "none" and config.k > 0:
        dnodes = _select_results(train_stream, actives, plan, config)

    tc = traincore.TrainConfig(
        alpha=config.alpha, lr=config.lr, epochs=config.epochs,
        n_negatives=config.n_negatives, seed=config.seed, dim=config.dim,
        n_batches=plan.n_batches)
    model, phis, metrics = traincore.train(train_stream, actives, dnodes, tc)

    # Replay everything before the test window to position the states.
    pre_test = stream.slice(0, len(train_stream) + len(valid_stream))
    carry = traincore.forward_coupled(pre_test, actives, model)
    eval_metrics = traincore.evaluate(
        test_stream, model, actives,
        traincore.EvalConfig(n_negatives=config.eval_negatives,
                             seed=config.seed,
                             evolve_active=config.evolve_active),
        carry_reads=traincore.as_carry(carry.final_reads),
        carry_last_item=carry.final_last_item)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.npz"
    traincore.save_checkpoint(model, phis, ckpt_path)
    metrics_path = out_dir / "metrics.json"
    payload = metrics.to_dict()
    payload.update({"mrr": eval_metrics["mrr"],
                    "recall_at_10": eval_metrics["recall_at_10"],
                    "test_events": eval_metrics["n_events"]})
    metrics_path.write_text(json.dumps(payload, indent=2, sort_keys=True)
                            + "\n", encoding="utf-8")
    return [str(ckpt_path), str(metrics_path)]


def cmd_eval(config: RunConfig) -> list[str]:
    if not config.checkpoint:
        raise ValidationError("eval requires --checkpoint")
    model, _ = traincore.load_checkpoint(config.checkpoint)
    stream = _load_stream(config)
    train_stream, valid_stream, test_stream = _split(stream, config)
    actives = ingest.classify_active(train_stream, config.user_threshold,
                                     config.item_threshold)
    pre_test = stream.slice(0, len(train_stream) + len(valid_stream))
    carry = traincore.forward_coupled(pre_test, actives, model)
    eval_metrics = traincore.evaluate(
        test_stream, model, actives,
        traincore.EvalConfig(n_negatives=config.eval_negatives,
                             seed=config.seed,
                             evolve_active=config.evolve_active),
        carry_reads=traincore.as_carry(carry.final_reads),
        carry_last_item=carry.final_last_item)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "eval.json"
    path.write_text(json.dumps(eval_metrics, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return [str(path)]


def cmd_toy(config: RunConfig) -> list[str]:
    report = traincore.toy_six_layer(traincore.ToyConfig(
        alpha=config.alpha, lr=config.lr, seed=config.seed))
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "toy.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True)
                    + "\n", encoding="utf-8")
    print(f"segments: {report.segment_lengths[0]} and "
          f"{report.segment_lengths[1]} steps; residual "
          f"{report.residual:.2e}; coupled gap {report.coupled_gap:.2e}")
    return [str(path)]


COMMANDS = {"generate": cmd_generate, "analyze": cmd_analyze,
            "select": cmd_select, "schedule": cmd_schedule,
            "train": cmd_train, "toy": cmd_toy, "eval": cmd_eval}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out-dir", dest="out_dir")
    sub.add_argument("--input", help="event CSV (otherwise synthetic)")
    sub.add_argument("--kind", choices=("scale-free", "uniform", "fixture"))
    sub.add_argument("--n-users", dest="n_users", type=int)
    sub.add_argument("--n-items", dest="n_items", type=int)
    sub.add_argument("--n-events", dest="n_events", type=int)
    sub.add_argument("--exponent", type=float)
    sub.add_argument("--feature-dim", dest="feature_dim", type=int)
    sub.add_argument("--user-threshold", dest="user_threshold", type=float)
    sub.add_argument("--item-threshold", dest="item_threshold", type=float)
    sub.add_argument("--n-batches", dest="n_batches", type=int)
    sub.add_argument("--k", type=int)
    sub.add_argument("--strategy", choices=STRATEGIES)
    sub.add_argument("--sweep", help="comma list of K values or part counts")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--n-negatives", dest="n_negatives", type=int)
    sub.add_argument("--eval-negatives", dest="eval_negatives", type=int)
    sub.add_argument("--dim", type=int)
    sub.add_argument("--train-frac", dest="train_frac", type=float)
    sub.add_argument("--valid-frac", dest="valid_frac", type=float)
    sub.add_argument("--test-frac", dest="test_frac", type=float)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--checkpoint")
    sub.add_argument("--pin-active", dest="evolve_active",
                     action="store_false", default=None,
                     help="keep active nodes static during evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamdag",
        description="Build, decouple, schedule, and train over temporal "
                    "interaction DAGs.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(subs.add_parser(name))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        outputs = COMMANDS[args.command](config)
        manifest = _write_manifest(config, args.command, outputs)
        for line in outputs + [str(manifest)]:
            print(line)
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
