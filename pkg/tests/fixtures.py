"""
Shared instances for the test suite: the hand-checked 3-user example,
seeded random instances, and an independent recursive credit oracle.
"""
import math
from dataclasses import dataclass
from typing import Dict, Iterable

import numpy as np

from app.credit_engine import CreditTable, scan_log
from app.event_log import EventLog, EventRecord
from app.model_learner import LearnedParams, learn
from app.social_graph import SocialGraph

ACTION = 0


def canonical_graph() -> SocialGraph:
    return SocialGraph([(1, 2), (1, 3), (2, 3)])


def canonical_log() -> EventLog:
    return EventLog([
        EventRecord(1, ACTION, 0),
        EventRecord(1, ACTION, 2),
        EventRecord(2, ACTION, 3),
        EventRecord(3, ACTION, 6),
    ])


def canonical_text():
    graph = "1 2\n1 3\n2 3\n"
    log = "# user action time\n1 0 0\n1 0 2\n2 0 3\n3 0 6\n"
    return graph, log


@dataclass
class Instance:
    graph: SocialGraph
    log: EventLog
    params: LearnedParams
    table: CreditTable


def canonical_instance() -> Instance:
    graph, log = canonical_graph(), canonical_log()
    params = learn(graph, log)
    return Instance(graph, log, params, scan_log(graph, params, log))


def random_instance(seed: int, max_users: int = 20, max_actions: int = 5,
                    repeats: bool = True, edge_probability: float = 0.3) -> Instance:
    rng = np.random.Generator(np.random.Philox(seed))
    n = int(rng.integers(3, max_users + 1))
    edges = [(v, u) for v in range(n) for u in range(n) if v != u and rng.random() < edge_probability]
    graph = SocialGraph(edges, range(n))

    records = []
    for action in range(int(rng.integers(1, max_actions + 1))):
        size = int(rng.integers(1, n + 1))
        for u in rng.choice(n, size=size, replace=False):
            t = int(rng.integers(0, 40))
            records.append(EventRecord(int(u), action, t))
            if repeats:
                for _ in range(int(rng.integers(0, 3))):
                    t += int(rng.integers(1, 10))
                    records.append(EventRecord(int(u), action, t))
    log = EventLog(records)
    params = learn(graph, log)
    return Instance(graph, log, params, scan_log(graph, params, log))


def oracle_set_credit(inst: Instance, seeds: Iterable[int]) -> Dict[int, Dict[int, float]]:
    """Gamma_{S,u}(a) straight from the definitions, one action at a time"""
    seeds = set(seeds)
    log, graph = inst.log, inst.graph
    credits = {}
    for action in sorted(log.actions):
        first = {u: log.first_time(u, action) for u in log.performers(action)}
        credit: Dict[int, float] = {}
        for u in sorted(first, key=lambda x: (first[x], x)):
            if u in seeds:
                credit[u] = 1.0
                continue
            parents = [v for v in graph.in_neighbors(u) if v in first and first[v] < first[u]]
            if not parents:
                credit[u] = 0.0
                continue
            raw = []
            for v in parents:
                delays = [first[u] - t for t in log.times(v, action) if t < first[u]]
                dt = 1.0 / sum(1.0 / d for d in delays)
                raw.append(math.exp(-dt / inst.params.tau[(v, u)]))
            total = sum(raw)
            credit[u] = sum(credit[v] * w / total for v, w in zip(parents, raw))
        credits[action] = credit
    return credits


def oracle_sigma(inst: Instance, seeds: Iterable[int]) -> float:
    total = 0.0
    for action, credit in oracle_set_credit(inst, seeds).items():
        for u, value in credit.items():
            total += value / len(inst.log.actions_of(u))
    return total


class CountingIterator:
    """Wraps a ground set and counts how many times each element is read"""

    def __init__(self, items):
        self.items = list(items)
        self.reads: Dict[int, int] = {}

    def __iter__(self):
        for x in self.items:
            self.reads[x] = self.reads.get(x, 0) + 1
            yield x
