"""
Synthetic data simulator - preferential-attachment follow graphs and
multi-action cascades with tunable repetition
"""
import heapq
import logging
from typing import List, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ValidationError, root_validator, validator

from .config import (
    GEN_ACTIONS,
    GEN_ADOPTION,
    GEN_ATTACHMENT,
    GEN_INITIATORS,
    GEN_MEAN_DELAY,
    GEN_RECIPROCITY,
    GEN_REPEAT_RATE,
    GEN_USERS,
)
from .errors import ConfigError
from .event_log import EventLog, EventRecord
from .social_graph import SocialGraph

logger = logging.getLogger(__name__)


class GenConfig(BaseModel):
    users: int = GEN_USERS
    edges: int = GEN_ATTACHMENT  # preferential-attachment edges per new user
    actions: int = GEN_ACTIONS
    initiators_per_action: int = GEN_INITIATORS
    repeat_rate: float = GEN_REPEAT_RATE
    adoption_probability: float = GEN_ADOPTION
    reciprocity: float = GEN_RECIPROCITY
    mean_delay: float = GEN_MEAN_DELAY  # seconds
    rng_seed: int = 0

    @validator("users", "edges", "actions", "initiators_per_action")
    def positive_count(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} must be positive, got {value}")
        return value

    @validator("repeat_rate")
    def repeat_rate_below_one(cls, value):
        if not 0.0 <= value < 1.0:
            raise ValueError(f"repeat_rate must lie in [0,1), got {value}")
        return value

    @validator("adoption_probability", "reciprocity")
    def probability(cls, value, field):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{field.name} must lie in [0,1], got {value}")
        return value

    @validator("mean_delay")
    def positive_delay(cls, value):
        if value <= 0:
            raise ValueError(f"mean_delay must be positive, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def initiators_fit(cls, values):
        if values["initiators_per_action"] > values["users"]:
            raise ValueError(f"initiators_per_action ({values['initiators_per_action']}) "
                             f"exceeds users ({values['users']})")
        return values

    @classmethod
    def build(cls, **values) -> "GenConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"invalid generator configuration: {e}") from None


class DataSimulator:
    def __init__(self, cfg: GenConfig):
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.Philox(cfg.rng_seed))

    def _delay(self) -> int:
        """Exponential inter-event delay, in whole seconds and at least 1"""
        return max(1, int(round(self.rng.exponential(self.cfg.mean_delay))))

    def _follow_graph(self) -> SocialGraph:
        cfg = self.cfg
        if cfg.users < 2:
            return SocialGraph([], range(cfg.users))
        m = min(cfg.edges, cfg.users - 1)
        undirected = nx.barabasi_albert_graph(cfg.users, m, seed=cfg.rng_seed)
        degree = dict(undirected.degree())

        edges = []
        for a, b in sorted(tuple(sorted(e)) for e in undirected.edges()):
            # the better-connected endpoint is the one being followed
            if (degree[a], -a) >= (degree[b], -b):
                influencer, follower = a, b
            else:
                influencer, follower = b, a
            edges.append((influencer, follower))
            if self.rng.random() < cfg.reciprocity:
                edges.append((follower, influencer))
        return SocialGraph(edges, range(cfg.users))

    def _cascade(self, graph: SocialGraph, action: int) -> List[EventRecord]:
        cfg = self.cfg
        keep_probability = 1.0 - cfg.repeat_rate
        initiators = sorted(int(u) for u in self.rng.choice(cfg.users, size=cfg.initiators_per_action, replace=False))

        # (time, user, is_repeat); adoption candidates for the same user race, earliest wins
        events: List[Tuple[int, int, bool]] = [(0, u, False) for u in initiators]
        heapq.heapify(events)
        adopted = set()
        records = []

        while events:
            t, user, is_repeat = heapq.heappop(events)
            if not is_repeat:
                if user in adopted:
                    continue
                adopted.add(user)
                repeats = int(self.rng.geometric(keep_probability)) - 1
                t_repeat = t
                for _ in range(repeats):
                    t_repeat += self._delay()
                    heapq.heappush(events, (t_repeat, user, True))
            records.append(EventRecord(user, action, t))

            # every performance gives each follower who has not acted yet another chance
            for follower in graph.out_neighbors(user):
                if follower not in adopted and self.rng.random() < cfg.adoption_probability:
                    heapq.heappush(events, (t + self._delay(), follower, False))
        return records

    def generate(self) -> Tuple[SocialGraph, EventLog]:
        graph = self._follow_graph()
        records = []
        for action in range(self.cfg.actions):
            records.extend(self._cascade(graph, action))
        log = EventLog(records)
        logger.info(f"Simulated {graph.n} users, {len(graph.edges)} follow edges, "
                    f"{self.cfg.actions} actions, {len(log)} records")
        return graph, log


def generate(cfg: GenConfig) -> Tuple[SocialGraph, EventLog]:
    """Public interface to generate a synthetic graph and event log"""
    return DataSimulator(cfg).generate()
