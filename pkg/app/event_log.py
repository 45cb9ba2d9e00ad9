"""
Multi-action event logs: parsing, ordering, splitting and repetition statistics
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, TextIO, Tuple

import numpy as np

from .errors import DomainError, ParseError, SplitError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EventRecord:
    user: int
    action: int
    time: int

    def sort_key(self) -> Tuple[int, int, int]:
        return (self.action, self.time, self.user)


class EventLog:
    """
    Chronologically ordered (user, action, time) records.

    Records are deduplicated and sorted by (action, time, user) on construction;
    the per-pair indices below are built once and the log is read-only afterwards.
    """

    def __init__(self, records: Iterable[EventRecord] = ()):
        unique = set(records)
        self.records: Tuple[EventRecord, ...] = tuple(sorted(unique, key=EventRecord.sort_key))
        self.users: FrozenSet[int] = frozenset(r.user for r in self.records)
        self.actions: FrozenSet[int] = frozenset(r.action for r in self.records)

        by_action: Dict[int, List[EventRecord]] = defaultdict(list)
        times: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for record in self.records:
            by_action[record.action].append(record)
            times[(record.user, record.action)].append(record.time)

        self._by_action = {a: tuple(rs) for a, rs in by_action.items()}
        # records are time-sorted within an action, so each list is already ascending
        self._times = {pair: tuple(ts) for pair, ts in times.items()}
        user_actions: Dict[int, set] = defaultdict(set)
        performers: Dict[int, set] = defaultdict(set)
        for (user, action) in self._times:
            user_actions[user].add(action)
            performers[action].add(user)
        self._user_actions = {u: frozenset(a) for u, a in user_actions.items()}
        self._performers = {a: frozenset(u) for a, u in performers.items()}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other) -> bool:
        return isinstance(other, EventLog) and self.records == other.records

    def __repr__(self) -> str:
        return f"EventLog(records={len(self.records)}, users={len(self.users)}, actions={len(self.actions)})"

    def count(self, user: int, action: int) -> int:
        """A_u(a): number of times user performed action"""
        return len(self._times.get((user, action), ()))

    def first_time(self, user: int, action: int) -> int:
        """t_1(u,a); only defined when count(user, action) >= 1"""
        try:
            return self._times[(user, action)][0]
        except KeyError:
            raise DomainError(f"user {user} never performs action {action}") from None

    def times(self, user: int, action: int) -> Tuple[int, ...]:
        return self._times.get((user, action), ())

    def records_for(self, action: int) -> Tuple[EventRecord, ...]:
        return self._by_action.get(action, ())

    def performers(self, action: int) -> FrozenSet[int]:
        return self._performers.get(action, frozenset())

    def actions_of(self, user: int) -> FrozenSet[int]:
        return self._user_actions.get(user, frozenset())

    def pairs(self) -> Iterable[Tuple[int, int]]:
        return self._times.keys()

    def restrict(self, actions: Iterable[int]) -> "EventLog":
        keep = set(actions)
        return EventLog(r for r in self.records if r.action in keep)


def parse_natural(field: str) -> int:
    """Non-negative integer written with ASCII digits only (no sign, no underscores)"""
    if not (field.isascii() and field.isdigit()):
        raise ValueError(f"not a non-negative integer: {field!r}")
    return int(field)


def parse_log(stream: TextIO) -> EventLog:
    """Parse `user action time` lines; `#` comments and blank lines are skipped"""
    records = []
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields 'user action time', got {len(fields)}", lineno)
        try:
            user, action, time = (parse_natural(f) for f in fields)
        except ValueError:
            raise ParseError(f"expected non-negative integers in {line!r}", lineno) from None
        records.append(EventRecord(user, action, time))

    log = EventLog(records)
    logger.info(f"Parsed {len(log)} records ({len(records) - len(log)} duplicates collapsed), "
                f"{len(log.users)} users, {len(log.actions)} actions")
    return log


def write_log(log: EventLog, stream: TextIO) -> None:
    for record in log.records:
        stream.write(f"{record.user} {record.action} {record.time}\n")


def repetition_rate(log: EventLog, action: int) -> float:
    """1 - distinct performers / total performances of the action"""
    records = log.records_for(action)
    if not records:
        raise DomainError(f"action {action} does not appear in the log")
    return 1.0 - len(log.performers(action)) / len(records)


def top_actions(log: EventLog, n: int) -> List[int]:
    """The n most-performed actions, ties broken by action id"""
    ranked = sorted(log.actions, key=lambda a: (-len(log.records_for(a)), a))
    return ranked[:n]


def repetition_summary(log: EventLog, threshold: float = 0.1) -> float:
    """Fraction of actions whose repetition rate exceeds threshold"""
    if not log.actions:
        return 0.0
    above = sum(1 for a in log.actions if repetition_rate(log, a) > threshold)
    return above / len(log.actions)


def split_by_action(log: EventLog, test_fraction: float, seed: int) -> Tuple[EventLog, EventLog]:
    """Partition the actions (never individual records) into train and test logs"""
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test fraction must lie in (0,1), got {test_fraction}")
    actions = sorted(log.actions)
    if len(actions) < 2:
        raise SplitError(f"need at least 2 distinct actions to split, got {len(actions)}")

    # half-up, so 5 actions at 0.5 give 3 test actions
    n_test = math.floor(test_fraction * len(actions) + 0.5)
    n_test = min(max(n_test, 1), len(actions) - 1)
    rng = np.random.Generator(np.random.Philox(seed))
    order = rng.permutation(len(actions))
    test_actions = {actions[i] for i in order[:n_test]}
    train_actions = set(actions) - test_actions

    logger.info(f"Split {len(actions)} actions into {len(train_actions)} train / {len(test_actions)} test")
    return log.restrict(train_actions), log.restrict(test_actions)


def dedupe_first_occurrence(log: EventLog) -> EventLog:
    """Keep only each (user, action) pair's first performance (the conventional CD log)"""
    return EventLog(EventRecord(u, a, log.first_time(u, a)) for (u, a) in log.pairs())
