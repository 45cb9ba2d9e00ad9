"""
Command-line entry point for the mCD influence maximization toolkit.
Subcommands: gen, stats, split, learn, scan, solve, evaluate, bench
"""
import argparse
import logging
import sys
from typing import List, Optional, Tuple

import numpy as np

from . import __version__
from .baselines import IcConfig, evaluate
from .config import (
    BENCH_ACTIONS,
    BENCH_EPSILON,
    BENCH_KS,
    BENCH_USERS,
    DEFAULT_THREADS,
    GEN_ACTIONS,
    GEN_ADOPTION,
    GEN_ATTACHMENT,
    GEN_INITIATORS,
    GEN_MEAN_DELAY,
    GEN_RECIPROCITY,
    GEN_REPEAT_RATE,
    GEN_USERS,
    IC_EDGE_PROBABILITY,
    IC_SELECTION_SAMPLES,
    IC_SIMULATIONS,
    LOG_FORMAT,
    LOG_LEVEL,
    RNG_ALGORITHM,
    TEST_FRACTION,
)
from .credit_engine import dump_credits, scan_log
from .data_simulator import GenConfig, generate
from .errors import DomainError, MCDError
from .event_log import parse_log, repetition_rate, repetition_summary, split_by_action, top_actions, write_log
from .manifest import RunManifest
from .model_learner import learn, read_params, write_params
from .pipeline import MODES, solve
from .reporting import write_report
from .social_graph import load_graph, write_graph
from .solvers import (Cardinality, Constraint, Knapsack, WeightVector, load_weights, uniform_weights, write_result,
                      write_thresholds)

logger = logging.getLogger(__name__)


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT, force=True)


def constraint_spec(text: str) -> Tuple[str, float]:
    """argparse type for `k=N` or `budget=B`; range checks happen later"""
    key, sep, value = text.partition("=")
    if not sep or key not in ("k", "budget"):
        raise argparse.ArgumentTypeError(f"expected k=N or budget=B, got {text!r}")
    try:
        number = int(value) if key == "k" else float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed {key} value {value!r}") from None
    return key, number


def int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _read_graph(path: str):
    with open(path) as f:
        return load_graph(f)


def _read_log(path: str):
    with open(path) as f:
        return parse_log(f)


def _read_params(path: str):
    with open(path) as f:
        return read_params(f)


def _build_constraint(spec: Tuple[str, float], weights_path: Optional[str], users) -> Constraint:
    key, value = spec
    if key == "k":
        if value < 1:
            raise DomainError("k must be ≥ 1")
        return Cardinality(int(value))
    if value <= 0:
        raise DomainError(f"budget must be positive, got {value}")
    if weights_path is None:
        return Knapsack(uniform_weights(users, value))
    with open(weights_path) as f:
        return Knapsack(load_weights(f, value))


def cmd_gen(args, argv: List[str]) -> int:
    cfg = GenConfig.build(users=args.users, edges=args.edges, actions=args.actions,
                          initiators_per_action=args.initiators, repeat_rate=args.repeat_rate,
                          adoption_probability=args.adopt, reciprocity=args.reciprocity,
                          mean_delay=args.mean_delay, rng_seed=args.seed)
    graph, log = generate(cfg)
    manifest = RunManifest("gen", argv)
    manifest.record("seed", cfg.rng_seed)
    for key, value in cfg.dict().items():
        manifest.record(f"gen.{key}", value)

    with open(args.out_graph, "w") as f:
        write_graph(graph, f)
    with open(args.out_log, "w") as f:
        write_log(log, f)
    manifest.write(args.out_graph)
    manifest.write(args.out_log)
    print(f"users={graph.n} edges={len(graph.edges)} actions={len(log.actions)} records={len(log)}")
    return 0


def cmd_stats(args, argv: List[str]) -> int:
    log = _read_log(args.log)
    print(f"records={len(log)} users={len(log.users)} actions={len(log.actions)}")
    print(f"repetition_over_10pct={repetition_summary(log, 0.1):.4f}")
    print("action\tperformances\tperformers\trepetition_rate")
    for action in top_actions(log, args.top):
        print(f"{action}\t{len(log.records_for(action))}\t{len(log.performers(action))}"
              f"\t{repetition_rate(log, action):.4f}")
    return 0


def cmd_split(args, argv: List[str]) -> int:
    log = _read_log(args.log)
    train, test = split_by_action(log, args.test_fraction, args.seed)
    manifest = RunManifest("split", argv, inputs=[args.log])
    manifest.record("seed", args.seed)
    manifest.record("test_fraction", args.test_fraction)
    with open(args.out_train, "w") as f:
        write_log(train, f)
    with open(args.out_test, "w") as f:
        write_log(test, f)
    manifest.write(args.out_train)
    manifest.write(args.out_test)
    print(f"train_actions={len(train.actions)} test_actions={len(test.actions)}")
    return 0


def cmd_learn(args, argv: List[str]) -> int:
    graph = _read_graph(args.graph)
    log = _read_log(args.log)
    params = learn(graph, log, threads=args.threads)
    with open(args.out, "w") as f:
        write_params(params, f)
    RunManifest("learn", argv, inputs=[args.graph, args.log]).write(args.out)
    print(f"pairs={len(params.tau)} counts={len(params.action_counts)}")
    return 0


def cmd_scan(args, argv: List[str]) -> int:
    graph = _read_graph(args.graph)
    params = _read_params(args.params)
    log = _read_log(args.log)
    table = scan_log(graph, params, log, threads=args.threads)
    if args.dump:
        with open(args.dump, "w") as f:
            dump_credits(table, f)
        RunManifest("scan", argv, inputs=[args.graph, args.params, args.log]).write(args.dump)
    print(f"actions={len(table.blocks)} users={len(table.users)} tau_fallbacks={table.fallback_count}")
    return 0


def cmd_solve(args, argv: List[str]) -> int:
    graph = _read_graph(args.graph)
    params = _read_params(args.params)
    log = _read_log(args.log)
    table = scan_log(graph, params, log, threads=args.threads)
    constraint = _build_constraint(args.constraint, args.weights, table.users)
    result = solve(table, constraint, args.mode, args.epsilon, args.shuffle, args.threads)

    with open(args.out, "w") as f:
        write_result(result, f)
    inputs = [args.graph, args.params, args.log] + ([args.weights] if args.weights else [])
    manifest = RunManifest("solve", argv, inputs=inputs)
    manifest.record("mode", args.mode)
    manifest.record("constraint", f"{args.constraint[0]}={args.constraint[1]}")
    if args.shuffle is not None:
        manifest.record("seed.shuffle", args.shuffle)
    manifest.record("threads", args.threads)
    manifest.write(args.out)
    print(f"value={result.value:.6f} passes={result.passes} seeds={','.join(str(s) for s in result.seeds)}")
    return 0


def cmd_evaluate(args, argv: List[str]) -> int:
    graph = _read_graph(args.graph)
    params = _read_params(args.params)
    train = _read_log(args.train)
    test = _read_log(args.test)
    ic_cfg = IcConfig.build(edge_probability=args.ic_prob, simulations=args.ic_sims,
                            selection_samples=args.ic_selection_samples, rng_seed=args.seed)
    kwargs = {} if args.epsilon is None else {"epsilon": args.epsilon}
    report = evaluate(graph, train, test, args.seed_size, ic_cfg, params=params, threads=args.threads,
                      mode=args.mode, **kwargs)

    written = write_report(report, args.report, args.plot)
    manifest = RunManifest("evaluate", argv, inputs=[args.graph, args.params, args.train, args.test])
    manifest.record("seed.ic", args.seed)
    manifest.record("mode", args.mode)
    manifest.record("threads", args.threads)
    for path in written:
        manifest.write(path)
    summary = report.summary()
    print(f"actions={int(summary['actions'])} "
          + " ".join(f"{key}={value:.4f}" for key, value in summary.items() if key.startswith("sigma_mcd")))
    return 0


def _bench_row(label: str, constraint: str, stream, celf) -> str:
    ratio = stream.value / celf.value if celf.value > 0 else 1.0
    speedup = celf.wall_time / stream.wall_time if stream.wall_time > 0 else float("inf")
    rows = []
    for result in (stream, celf):
        rows.append(f"{label}\t{result.mode}\t{constraint}\t{result.value:.4f}\t{result.passes}"
                    f"\t{result.evaluations}\t{result.wall_time:.4f}")
    rows.append(f"{label}\tratio\t{constraint}\tvalue={ratio:.4f}\tspeedup={speedup:.1f}")
    return "\n".join(rows)


def cmd_bench(args, argv: List[str]) -> int:
    cfg = GenConfig.build(users=args.users, actions=args.actions, rng_seed=args.seed)
    graph, log = generate(cfg)
    train, test = split_by_action(log, TEST_FRACTION, args.seed)
    params = learn(graph, train, threads=args.threads)
    table = scan_log(graph, params, test, threads=args.threads)
    logger.info(f"Bench instance: {graph.n} users, {len(table.blocks)} test actions, {len(table.users)} candidates")

    print(f"# rng_algorithm={RNG_ALGORITHM} seed={args.seed}")
    print("instance\tmode\tconstraint\tvalue\tpasses\tevaluations\ttime_s")
    epsilon = BENCH_EPSILON if args.epsilon is None else args.epsilon
    for k in args.ks:
        constraint = Cardinality(k)
        stream = solve(table, constraint, "stream", epsilon, threads=args.threads)
        celf = solve(table, constraint, "celf")
        print(_bench_row("cardinality", f"k={k}", stream, celf))
        if args.thresholds:
            write_thresholds(stream, sys.stdout, f"k={k}")

    if args.budget is not None:
        rng = np.random.Generator(np.random.Philox(args.seed))
        users = sorted(table.users)
        costs = rng.uniform(1.0, 5.0, size=len(users))
        constraint = Knapsack(WeightVector({u: float(c) for u, c in zip(users, costs)}, args.budget))
        stream = solve(table, constraint, "stream", args.epsilon, threads=args.threads)
        celf = solve(table, constraint, "celf")
        print(_bench_row("knapsack", f"budget={args.budget:g}", stream, celf))
        if args.thresholds:
            write_thresholds(stream, sys.stdout, f"budget={args.budget:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcd", description="Multi-action credit distribution influence maximization")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="worker pool size")
    parser.add_argument("--log-level", default=LOG_LEVEL, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic graph and event log")
    p.add_argument("--users", type=int, default=GEN_USERS)
    p.add_argument("--edges", type=int, default=GEN_ATTACHMENT, help="attachment edges per new user")
    p.add_argument("--actions", type=int, default=GEN_ACTIONS)
    p.add_argument("--initiators", type=int, default=GEN_INITIATORS)
    p.add_argument("--repeat-rate", type=float, default=GEN_REPEAT_RATE)
    p.add_argument("--adopt", type=float, default=GEN_ADOPTION)
    p.add_argument("--reciprocity", type=float, default=GEN_RECIPROCITY)
    p.add_argument("--mean-delay", type=float, default=GEN_MEAN_DELAY)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-graph", required=True)
    p.add_argument("--out-log", required=True)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("stats", help="repetition statistics of an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("split", help="split a log into train and test actions")
    p.add_argument("--log", required=True)
    p.add_argument("--test-fraction", type=float, default=TEST_FRACTION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("learn", help="learn propagation delays and action counts")
    p.add_argument("--graph", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_learn)

    p = sub.add_parser("scan", help="compute total credits for a log")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--dump")
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("solve", help="select a seed set")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--mode", choices=MODES, default="stream")
    p.add_argument("--constraint", type=constraint_spec, required=True, help="k=N or budget=B")
    p.add_argument("--weights", help="`user weight` lines; uniform weights when omitted")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--shuffle", type=int, help="seed for a random arrival order")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("evaluate", help="compare mCD, CD and IC seed sets")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--seed-size", type=int, required=True)
    p.add_argument("--ic-prob", type=float, default=IC_EDGE_PROBABILITY)
    p.add_argument("--ic-sims", type=int, default=IC_SIMULATIONS)
    p.add_argument("--ic-selection-samples", type=int, default=IC_SELECTION_SAMPLES,
                   help="live-edge samples behind the IC seed selection")
    p.add_argument("--mode", choices=("celf", "stream"), default="celf", help="solver for the compared mCD and CD seeds")
    p.add_argument("--epsilon", type=float, help="streaming mode only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.add_argument("--plot")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("bench", help="streaming vs CELF on a generated instance")
    p.add_argument("--users", type=int, default=BENCH_USERS)
    p.add_argument("--actions", type=int, default=BENCH_ACTIONS)
    p.add_argument("--ks", type=int_list, default=int_list(BENCH_KS))
    p.add_argument("--budget", type=float)
    p.add_argument("--epsilon", type=float, help=f"defaults to {BENCH_EPSILON:g} for k, the solve default for budgets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", action="store_true", help="also print per-threshold candidate sets")
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.handler(args, argv)
    except (MCDError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:
        logger.exception(f"Unexpected failure in {args.command}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
