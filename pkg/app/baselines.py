"""
Baselines and evaluation: conventional CD, Independent Cascade Monte Carlo,
and per-action estimation accuracy against the observed number of performers.
"""
import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, validator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.stats import sem

from .config import (
    EPSILON_CARDINALITY,
    IC_CHUNK_SIZE,
    IC_EDGE_PROBABILITY,
    IC_SELECTION_SAMPLES,
    IC_SIMULATIONS,
    RNG_ALGORITHM,
)
from .credit_engine import CreditTable, action_influence, scan_log, sigma_from_scratch
from .errors import DomainError
from .event_log import EventLog, dedupe_first_occurrence
from .model_learner import LearnedParams, learn
from .pipeline import PipelineRun, run_pipeline, solve
from .social_graph import SocialGraph, propagation_graph
from .solvers import Cardinality, Constraint, SeedResult

logger = logging.getLogger(__name__)


class IcConfig(BaseModel):
    edge_probability: float = IC_EDGE_PROBABILITY
    simulations: int = IC_SIMULATIONS
    selection_samples: int = IC_SELECTION_SAMPLES
    rng_seed: int = 0

    @validator("edge_probability")
    def probability_in_unit_interval(cls, value):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"edge probability must lie in [0,1], got {value}")
        return value

    @validator("simulations", "selection_samples")
    def at_least_one_sample(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} must be >= 1, got {value}")
        return value

    @classmethod
    def build(cls, **values) -> "IcConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            raise DomainError(f"invalid IC configuration: {e}") from None


@dataclass
class ActionEstimate:
    true_count: int
    mcd_estimate: float
    initiator_estimate: float
    cd_estimate: Optional[float] = None


@dataclass
class EvalReport:
    per_action: Dict[int, ActionEstimate] = field(default_factory=dict)
    seed_values: Dict[str, float] = field(default_factory=dict)
    ic_spread: Dict[str, float] = field(default_factory=dict)
    ic_stderr: Dict[str, float] = field(default_factory=dict)
    runtimes: Dict[str, float] = field(default_factory=dict)
    seeds: Dict[str, List[int]] = field(default_factory=dict)
    rng_algorithm: str = RNG_ALGORITHM

    def summary(self) -> Dict[str, float]:
        rows = list(self.per_action.values())
        summary: Dict[str, float] = {"actions": len(rows)}
        if rows:
            summary["mean_true_count"] = float(np.mean([r.true_count for r in rows]))
            summary["mean_mcd_estimate"] = float(np.mean([r.mcd_estimate for r in rows]))
            cd = [r.cd_estimate for r in rows if r.cd_estimate is not None]
            if cd:
                summary["mean_cd_estimate"] = float(np.mean(cd))
        for model, value in self.seed_values.items():
            summary[f"sigma_mcd[{model}]"] = value
        for model, value in self.ic_spread.items():
            summary[f"ic_spread[{model}]"] = value
        for model, value in self.ic_stderr.items():
            summary[f"ic_stderr[{model}]"] = value
        for name, seconds in self.runtimes.items():
            summary[f"runtime_s[{name}]"] = seconds
        return summary


def cd_pipeline(graph: SocialGraph, train: EventLog, test: EventLog, constraint: Constraint,
                mode: str = "celf", epsilon: Optional[float] = None, threads: int = 1) -> PipelineRun:
    """The mCD pipeline on first-occurrence logs, i.e. the conventional CD model"""
    return run_pipeline(graph, dedupe_first_occurrence(train), dedupe_first_occurrence(test),
                        constraint, mode=mode, epsilon=epsilon, threads=threads)


def cd_baseline(graph: SocialGraph, train: EventLog, test: EventLog, constraint: Constraint,
                mode: str = "celf", epsilon: Optional[float] = None, threads: int = 1) -> SeedResult:
    return cd_pipeline(graph, train, test, constraint, mode, epsilon, threads).result


def _cascade(graph: SocialGraph, seeds: List[int], p: float, rng: np.random.Generator) -> int:
    active = set(seeds)
    frontier = list(seeds)
    while frontier:
        activated = []
        for v in frontier:
            followers = graph.out_neighbors(v)
            if not followers:
                continue
            hits = rng.random(len(followers)) < p
            for u, hit in zip(followers, hits):
                if hit and u not in active:
                    active.add(u)
                    activated.append(u)
        frontier = activated
    return len(active)


def ic_simulate(graph: SocialGraph, seeds: Iterable[int], cfg: IcConfig, threads: int = 1) -> np.ndarray:
    """
    Spread of each simulated cascade. Simulations are cut into fixed chunks with
    one Philox substream each, so the output does not depend on the thread count.
    """
    seeds = sorted(set(seeds))
    outside = [s for s in seeds if s not in graph.users]
    if outside:
        raise DomainError(f"seed {outside[0]} is not in the graph")

    n_chunks = math.ceil(cfg.simulations / IC_CHUNK_SIZE)
    streams = np.random.SeedSequence(cfg.rng_seed).spawn(n_chunks)
    sizes = [min(IC_CHUNK_SIZE, cfg.simulations - i * IC_CHUNK_SIZE) for i in range(n_chunks)]

    def run(i: int) -> List[int]:
        rng = np.random.Generator(np.random.Philox(streams[i]))
        return [_cascade(graph, seeds, cfg.edge_probability, rng) for _ in range(sizes[i])]

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, range(n_chunks)))
    else:
        chunks = [run(i) for i in range(n_chunks)]
    return np.concatenate([np.asarray(c, dtype=float) for c in chunks])


def ic_spread(graph: SocialGraph, seeds: Iterable[int], cfg: IcConfig, threads: int = 1) -> float:
    return float(ic_simulate(graph, seeds, cfg, threads).mean())


def _live_edge_samples(graph: SocialGraph, cfg: IcConfig) -> Tuple[List[int], List[csr_matrix]]:
    """cfg.selection_samples live-edge graphs: each edge kept independently with the IC probability"""
    users = sorted(graph.users)
    index = {u: i for i, u in enumerate(users)}
    edges = sorted(graph.edges)
    src = np.array([index[v] for v, _ in edges], dtype=np.intp)
    dst = np.array([index[u] for _, u in edges], dtype=np.intp)
    # separate substream from ic_simulate, so selection and scoring never share draws
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.rng_seed, 1])))
    n = len(users)
    samples = []
    for _ in range(cfg.selection_samples):
        live = rng.random(len(edges)) < cfg.edge_probability
        samples.append(csr_matrix((np.ones(int(live.sum())), (src[live], dst[live])), shape=(n, n)))
    return users, samples


def ic_celf_seeds(graph: SocialGraph, k: int, cfg: IcConfig) -> List[int]:
    """
    CELF over the IC spread estimated on a fixed set of live-edge samples.
    The estimate is a coverage function of the seed set, so it is submodular and
    lazy evaluation returns the same seeds as plain greedy on the same samples.
    """
    if k < 0:
        raise DomainError(f"k must be non-negative, got {k}")
    started = time.perf_counter()
    users, samples = _live_edge_samples(graph, cfg)
    covered = np.zeros((len(samples), len(users)), dtype=bool)

    def reach(i: int, r: int) -> np.ndarray:
        return breadth_first_order(samples[r], i, directed=True, return_predecessors=False)

    def gain(i: int) -> int:
        return sum(int(np.count_nonzero(~covered[r, reach(i, r)])) for r in range(len(samples)))

    heap = [(-gain(i), i, 0) for i in range(len(users))]
    heapq.heapify(heap)
    evaluations = len(heap)
    chosen: List[int] = []
    while heap and len(chosen) < k:
        _, i, stamp = heapq.heappop(heap)
        if stamp == len(chosen):
            chosen.append(i)
            for r in range(len(samples)):
                covered[r, reach(i, r)] = True
            continue
        heapq.heappush(heap, (-gain(i), i, len(chosen)))
        evaluations += 1

    seeds = [users[i] for i in chosen]
    logger.info(f"IC CELF picked {len(seeds)} seeds over {len(samples)} live-edge samples "
                f"({evaluations} spread evaluations, {time.perf_counter() - started:.3f}s)")
    return seeds


def _per_action(graph: SocialGraph, table: CreditTable, test: EventLog, seeds: List[int]) -> Dict[int, ActionEstimate]:
    estimates = action_influence(table, seeds)
    per_action = {}
    for action in sorted(test.actions):
        initiators = propagation_graph(graph, test, action).initiators
        per_action[action] = ActionEstimate(
            true_count=len(test.performers(action)),
            mcd_estimate=estimates[action],
            initiator_estimate=action_influence(table, initiators, [action])[action],
        )
    return per_action


def estimate_accuracy(graph: SocialGraph, params: LearnedParams, test: EventLog, seed_size: int,
                      epsilon: float = EPSILON_CARDINALITY, threads: int = 1,
                      table: Optional[CreditTable] = None, mode: str = "stream", label: str = "mcd") -> EvalReport:
    """Per-action influence of solver-selected seeds and of each action's initiators vs |V(a)|"""
    if seed_size < 1:
        raise DomainError(f"seed size must be >= 1, got {seed_size}")
    if table is None:
        table = scan_log(graph, params, test, threads=threads)
    result = solve(table, Cardinality(seed_size), mode, epsilon, threads=threads)
    report = EvalReport(per_action=_per_action(graph, table, test, result.seeds))
    report.seeds[label] = result.seeds
    report.seed_values[label] = result.value
    report.runtimes[f"solve[{label}]"] = result.wall_time
    return report


COMPARED_MODELS = ("mcd", "cd", "ic")


def evaluate(graph: SocialGraph, train: EventLog, test: EventLog, seed_size: int, ic_cfg: IcConfig,
             params: Optional[LearnedParams] = None, epsilon: float = EPSILON_CARDINALITY,
             threads: int = 1, mode: str = "celf") -> EvalReport:
    """
    Per-action accuracy of streaming-selected mCD and CD seeds (`mcd_stream`, `cd_stream`),
    then a seed-quality comparison of the mCD, CD and IC seed sets on sigma_mCD and IC
    spread. The compared mCD and CD seeds come from `mode` (CELF by default); the IC
    seeds from CELF over live-edge samples.
    """
    if params is None:
        params = learn(graph, train, threads=threads)
    mcd_table = scan_log(graph, params, test, threads=threads)
    report = estimate_accuracy(graph, params, test, seed_size, epsilon, threads, table=mcd_table, label="mcd_stream")

    started = time.perf_counter()
    cd = cd_pipeline(graph, train, test, Cardinality(seed_size), mode=mode, epsilon=epsilon, threads=threads)
    report.runtimes["cd_pipeline"] = time.perf_counter() - started
    cd_stream = solve(cd.table, Cardinality(seed_size), "stream", epsilon, threads=threads)
    cd_estimates = action_influence(cd.table, cd_stream.seeds)
    for action, row in report.per_action.items():
        row.cd_estimate = cd_estimates.get(action, 0.0)
    report.runtimes["solve[cd_stream]"] = cd_stream.wall_time
    report.seeds["cd_stream"] = cd_stream.seeds

    mcd = solve(mcd_table, Cardinality(seed_size), mode, epsilon, threads=threads)
    report.runtimes["solve[mcd]"] = mcd.wall_time
    report.seeds["mcd"] = mcd.seeds
    report.seeds["cd"] = cd.result.seeds
    full_graph = graph.including(train.users | test.users)
    started = time.perf_counter()
    report.seeds["ic"] = ic_celf_seeds(full_graph, seed_size, ic_cfg)
    report.runtimes["solve[ic]"] = time.perf_counter() - started

    for model, seeds in report.seeds.items():
        report.seed_values[model] = sigma_from_scratch(mcd_table, seeds)
    for model in COMPARED_MODELS:
        seeds = report.seeds[model]
        started = time.perf_counter()
        spreads = ic_simulate(full_graph, seeds, ic_cfg, threads)
        report.ic_spread[model] = float(spreads.mean())
        report.ic_stderr[model] = float(sem(spreads)) if len(spreads) > 1 else 0.0
        report.runtimes[f"ic_spread[{model}]"] = time.perf_counter() - started

    logger.info(f"Evaluated {len(report.per_action)} actions; sigma_mCD "
                + ", ".join(f"{m}={v:.3f}" for m, v in report.seed_values.items()))
    return report
