"""
Model Learner: average propagation delays tau_{v,u} and performance counts A_u(a)
learned from a training log, plus the effective-delay aggregate.
"""
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, TextIO, Tuple

from .errors import DomainError, ParseError
from .event_log import EventLog, parse_natural
from .social_graph import SocialGraph

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass
class LearnedParams:
    tau: Dict[Pair, float] = field(default_factory=dict)
    action_counts: Dict[Pair, int] = field(default_factory=dict)
    a_v2u: Dict[Pair, int] = field(default_factory=dict)

    def mean_tau(self) -> Optional[float]:
        if not self.tau:
            return None
        return sum(self.tau.values()) / len(self.tau)


def delay_set(log: EventLog, v: int, u: int, action: int) -> Tuple[int, ...]:
    """{t_1(u,a) - t : t in T_{v,u}(a)}, i.e. delays from each of v's earlier performances"""
    t1 = log.first_time(u, action)
    return tuple(t1 - t for t in log.times(v, action) if t < t1)


def effective_delay(delays: Iterable[float]) -> float:
    """Reciprocal of the sum of reciprocal delays (parallel-resistance aggregate)"""
    total = 0.0
    empty = True
    for d in delays:
        if d <= 0:
            raise DomainError(f"delays must be positive, got {d}")
        total += 1.0 / d
        empty = False
    if empty:
        raise DomainError("effective delay of an empty delay set")
    return 1.0 / total


def _learn_action(graph: SocialGraph, log: EventLog, action: int) -> Tuple[Dict[Pair, float], Dict[Pair, int]]:
    """Per-action partial sums: sum of mean delays and number of propagations per pair"""
    delay_means: Dict[Pair, float] = {}
    propagations: Dict[Pair, int] = {}
    current_table: Dict[int, int] = {}  # performer -> first performance time

    for record in log.records_for(action):
        u, t = record.user, record.time
        if u in current_table:
            continue  # repeat performance; parents come from first performances only
        for v in graph.in_neighbors(u):
            if v in current_table and current_table[v] < t:
                delays = [t - s for s in log.times(v, action) if s < t]
                delay_means[(v, u)] = sum(delays) / len(delays)
                propagations[(v, u)] = 1
        current_table[u] = t
    return delay_means, propagations


def learn(graph: SocialGraph, train: EventLog, threads: int = 1) -> LearnedParams:
    actions = sorted(train.actions)
    if threads > 1 and len(actions) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda a: _learn_action(graph, train, a), actions))
    else:
        partials = [_learn_action(graph, train, a) for a in actions]

    # merge in action order so the floating-point sums do not depend on scheduling
    sums: Dict[Pair, float] = defaultdict(float)
    a_v2u: Dict[Pair, int] = defaultdict(int)
    for delay_means, propagations in partials:
        for pair, mean in delay_means.items():
            sums[pair] += mean
        for pair, count in propagations.items():
            a_v2u[pair] += count

    params = LearnedParams(
        tau={pair: sums[pair] / a_v2u[pair] for pair in sorted(a_v2u)},
        action_counts={pair: train.count(*pair) for pair in sorted(train.pairs())},
        a_v2u=dict(sorted(a_v2u.items())),
    )
    logger.info(f"Learned tau for {len(params.tau)} pairs over {len(actions)} actions")
    return params


def write_params(params: LearnedParams, stream: TextIO) -> None:
    stream.write("[tau]\n")
    for (v, u), value in sorted(params.tau.items()):
        stream.write(f"{v} {u} {value:.17g}\n")
    stream.write("[counts]\n")
    for (u, a), count in sorted(params.action_counts.items()):
        stream.write(f"{u} {a} {count}\n")
    stream.write("[propagations]\n")
    for (v, u), count in sorted(params.a_v2u.items()):
        stream.write(f"{v} {u} {count}\n")


def read_params(stream: TextIO) -> LearnedParams:
    params = LearnedParams()
    sections = {"tau": params.tau, "counts": params.action_counts, "propagations": params.a_v2u}
    current: Optional[dict] = None
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1]
            if name not in sections:
                raise ParseError(f"unknown section [{name}]", lineno)
            current = sections[name]
            continue
        if current is None:
            raise ParseError("record before any section header", lineno)
        fields: List[str] = line.split()
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            key = (parse_natural(fields[0]), parse_natural(fields[1]))
            value = float(fields[2]) if current is params.tau else parse_natural(fields[2])
        except ValueError:
            raise ParseError(f"malformed record {line!r}", lineno) from None
        if current is params.tau and value <= 0:
            raise ParseError(f"tau must be positive, got {value}", lineno)
        current[key] = value
    return params
