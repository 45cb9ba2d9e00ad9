"""
Model Learner -> Log Scanner -> Problem Solver
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .config import EPSILON_CARDINALITY, EPSILON_KNAPSACK
from .credit_engine import CreditTable, scan_log
from .errors import DomainError
from .event_log import EventLog
from .model_learner import LearnedParams, learn
from .social_graph import SocialGraph
from .solvers import (Cardinality, Constraint, Knapsack, SeedResult, brute_force, celf_greedy,
                      stream_budgeted, stream_cardinality)

logger = logging.getLogger(__name__)

MODES = ("stream", "celf", "brute")


@dataclass
class PipelineRun:
    params: LearnedParams
    table: CreditTable
    result: SeedResult


def ground_order(table: CreditTable, shuffle_seed: Optional[int] = None) -> List[int]:
    """Ascending user id, or a seeded permutation of it"""
    ground = sorted(table.users)
    if shuffle_seed is not None:
        rng = np.random.Generator(np.random.Philox(shuffle_seed))
        ground = [ground[i] for i in rng.permutation(len(ground))]
    return ground


def default_epsilon(constraint: Constraint) -> float:
    return EPSILON_CARDINALITY if isinstance(constraint, Cardinality) else EPSILON_KNAPSACK


def solve(table: CreditTable, constraint: Constraint, mode: str = "stream", epsilon: Optional[float] = None,
          shuffle_seed: Optional[int] = None, threads: int = 1) -> SeedResult:
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}, expected one of {', '.join(MODES)}")
    if isinstance(constraint, Knapsack):
        missing = table.users - set(constraint.weights.weights)
        if missing:
            raise DomainError(f"no weight for user {min(missing)}")
    if epsilon is None:
        epsilon = default_epsilon(constraint)
    ground = ground_order(table, shuffle_seed)

    if mode == "stream":
        if isinstance(constraint, Cardinality):
            return stream_cardinality(ground, constraint.k, epsilon, table, threads=threads)
        return stream_budgeted(ground, constraint.weights, epsilon, table, threads=threads)
    if mode == "celf":
        return celf_greedy(constraint, table, ground)
    return brute_force(constraint, table, ground=ground)


def run_pipeline(graph: SocialGraph, train: EventLog, test: EventLog, constraint: Constraint,
                 mode: str = "stream", epsilon: Optional[float] = None, shuffle_seed: Optional[int] = None,
                 threads: int = 1) -> PipelineRun:
    params = learn(graph, train, threads=threads)
    table = scan_log(graph, params, test, threads=threads)
    result = solve(table, constraint, mode, epsilon, shuffle_seed, threads)
    return PipelineRun(params, table, result)
