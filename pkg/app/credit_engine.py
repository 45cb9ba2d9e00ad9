"""
Log Scanner and credit bookkeeping for the multi-action credit distribution model.

Total credits are stored per action as sparse rows over the action's performers
V(a), indexed in first-performance order: row i lists the receivers that node i
reaches with positive credit at scan time. Credit only flows from earlier
performers to later ones, so every stored entry has receiver position >= source
position. Absorbing a seed only ever lowers entries, so the pattern fixed at
scan time stays valid for every fork.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, TextIO, Tuple

import numpy as np
from scipy.special import softmax

from .config import TAU_FALLBACK
from .errors import ContractViolation, DomainError
from .event_log import EventLog
from .model_learner import LearnedParams, delay_set, effective_delay
from .social_graph import SocialGraph, propagation_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActionBlock:
    """Immutable layout of one action, shared by every fork of a table"""
    action: int
    nodes: Tuple[int, ...]
    index: Dict[int, int]
    parents: Tuple[np.ndarray, ...]  # parents[j]: positions of the in-neighbours of nodes[j]
    gamma: Tuple[np.ndarray, ...]  # gamma[j][r]: direct credit given to nodes[j] by nodes[parents[j][r]]
    weights: np.ndarray  # 1 / |A_u| for each node
    indptr: np.ndarray  # row i occupies slots indptr[i]:indptr[i + 1]
    indices: np.ndarray  # receiver position of each slot, ascending within a row
    entry_weights: np.ndarray  # weights[indices]
    col_ptr: np.ndarray  # column j: col_rows / col_slots[col_ptr[j]:col_ptr[j + 1]]
    col_rows: np.ndarray
    col_slots: np.ndarray

    def row(self, i: int) -> slice:
        return slice(int(self.indptr[i]), int(self.indptr[i + 1]))

    def column(self, j: int) -> slice:
        return slice(int(self.col_ptr[j]), int(self.col_ptr[j + 1]))

    def slot(self, i: int, j: int) -> Optional[int]:
        row = self.row(i)
        pos = int(np.searchsorted(self.indices[row], j))
        if row.start + pos < row.stop and self.indices[row.start + pos] == j:
            return row.start + pos
        return None

    def direct(self, source: int, receiver: int) -> float:
        """gamma_{source,receiver}(a), zero off the propagation graph"""
        if source not in self.index or receiver not in self.index:
            return 0.0
        j = self.index[receiver]
        hits = np.flatnonzero(self.parents[j] == self.index[source])
        return float(self.gamma[j][hits[0]]) if hits.size else 0.0


class CreditTable:
    """
    UC[a][v][u]: total credit Gamma_{v,u}(a) on the residual graph V - S.

    uc[a] holds the stored entries of action a in slot order. Forks share these
    arrays until one of them writes, at which point the writer takes a private copy.
    """

    def __init__(self, blocks: Dict[int, ActionBlock], uc: Dict[int, np.ndarray],
                 distinct_actions: Mapping[int, int], action_counts: Mapping[Tuple[int, int], int],
                 fallback_count: int = 0):
        self.blocks = blocks
        self.uc = uc
        self.distinct_actions = distinct_actions
        self.action_counts = action_counts
        self.fallback_count = fallback_count
        self._owned: Set[int] = set()
        user_actions: Dict[int, List[int]] = {}
        for action in sorted(blocks):
            for user in blocks[action].nodes:
                user_actions.setdefault(user, []).append(action)
        self._user_actions = {u: tuple(a) for u, a in user_actions.items()}

    @property
    def users(self) -> FrozenSet[int]:
        return frozenset(self._user_actions)

    def actions_of(self, user: int) -> Tuple[int, ...]:
        return self._user_actions.get(user, ())

    def entry(self, action: int, source: int, receiver: int) -> float:
        block = self.blocks.get(action)
        if block is None or source not in block.index or receiver not in block.index:
            return 0.0
        slot = block.slot(block.index[source], block.index[receiver])
        return 0.0 if slot is None else float(self.uc[action][slot])

    def nonzero(self, action: int) -> Iterator[Tuple[int, int, float]]:
        """(source, receiver, credit) for every positive entry of one action"""
        block = self.blocks[action]
        data = self.uc[action]
        for i, source in enumerate(block.nodes):
            for slot in range(block.indptr[i], block.indptr[i + 1]):
                if data[slot] > 0.0:
                    yield source, block.nodes[block.indices[slot]], float(data[slot])

    def stored(self) -> int:
        return sum(len(data) for data in self.uc.values())

    def fork(self) -> "CreditTable":
        clone = CreditTable.__new__(CreditTable)
        clone.blocks = self.blocks
        clone.uc = dict(self.uc)
        clone.distinct_actions = self.distinct_actions
        clone.action_counts = self.action_counts
        clone.fallback_count = self.fallback_count
        clone._owned = set()
        clone._user_actions = self._user_actions
        # arrays are shared from here on, so the parent copies before its next write too
        self._owned = set()
        return clone

    def writable(self, action: int) -> np.ndarray:
        if action not in self._owned:
            self.uc[action] = self.uc[action].copy()
            self._owned.add(action)
        return self.uc[action]


class SetCredit:
    """SC[a][u]: total credit Gamma_{S,u}(a) given to the seed set S"""

    def __init__(self):
        self.sc: Dict[int, np.ndarray] = {}
        self.seeds: List[int] = []
        self._members: Set[int] = set()

    def __contains__(self, user: int) -> bool:
        return user in self._members

    def value(self, action: int, position: int) -> float:
        credits = self.sc.get(action)
        return 0.0 if credits is None else float(credits[position])

    def writable(self, action: int, size: int) -> np.ndarray:
        if action not in self.sc:
            self.sc[action] = np.zeros(size)
        return self.sc[action]

    def copy(self) -> "SetCredit":
        clone = SetCredit()
        clone.sc = {a: credits.copy() for a, credits in self.sc.items()}
        clone.seeds = list(self.seeds)
        clone._members = set(self._members)
        return clone

    def add(self, user: int) -> None:
        self.seeds.append(user)
        self._members.add(user)


def direct_weight(delay: float, tau: float) -> float:
    """Unnormalized direct credit exp(-delay / tau)"""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if delay <= 0:
        raise DomainError(f"effective delay must be positive, got {delay}")
    return float(np.exp(-delay / tau))


def direct_credits(delays: Sequence[float], taus: Sequence[float]) -> np.ndarray:
    """
    Direct credits of one receiver's in-neighbours: exp(-dt/tau) normalized to sum to 1.
    Computed as a softmax so the result stays defined when every exponential underflows.
    """
    delays = np.asarray(delays, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if delays.size == 0:
        raise DomainError("direct credit needs at least one in-neighbour")
    if np.any(taus <= 0):
        raise DomainError(f"tau must be positive, got {taus.min()}")
    if np.any(delays <= 0):
        raise DomainError(f"effective delay must be positive, got {delays.min()}")
    return softmax(-delays / taus)


def _scan_action(graph: SocialGraph, params: LearnedParams, log: EventLog, action: int,
                 fallback_tau: float) -> Tuple[ActionBlock, np.ndarray, int]:
    pg = propagation_graph(graph, log, action)
    n = len(pg.nodes)
    index = {u: i for i, u in enumerate(pg.nodes)}
    parents: List[np.ndarray] = []
    gammas: List[np.ndarray] = []
    col_rows: List[np.ndarray] = []
    col_vals: List[np.ndarray] = []
    column = np.zeros(n)
    misses = 0

    for j, u in enumerate(pg.nodes):
        in_neighbors = pg.in_neighbors(u)
        positions = np.array([index[v] for v in in_neighbors], dtype=np.intp)
        credits = np.zeros(0)
        if in_neighbors:
            delays = [effective_delay(delay_set(log, v, u, action)) for v in in_neighbors]
            taus = []
            for v in in_neighbors:
                tau = params.tau.get((v, u))
                if tau is None:
                    tau = fallback_tau
                    misses += 1
                taus.append(tau)
            credits = direct_credits(delays, taus)
            for p, credit in zip(positions, credits):
                # column p already holds every credit flowing into nodes[p], including Gamma_{p,p} = 1
                column[col_rows[p]] += col_vals[p] * credit
        column[j] = 1.0
        rows = np.flatnonzero(column)
        col_rows.append(rows)
        col_vals.append(column[rows])
        column[rows] = 0.0
        parents.append(positions)
        gammas.append(credits)

    counts = np.array([len(r) for r in col_rows], dtype=np.intp)
    rows_cm = np.concatenate(col_rows)
    vals_cm = np.concatenate(col_vals)
    cols_cm = np.repeat(np.arange(n, dtype=np.intp), counts)
    order = np.lexsort((cols_cm, rows_cm))
    col_slots = np.empty_like(order)
    col_slots[order] = np.arange(len(order))
    indices = cols_cm[order]
    weights = np.array([1.0 / len(log.actions_of(u)) for u in pg.nodes])

    block = ActionBlock(
        action=action,
        nodes=pg.nodes,
        index=index,
        parents=tuple(parents),
        gamma=tuple(gammas),
        weights=weights,
        indptr=np.concatenate(([0], np.cumsum(np.bincount(rows_cm, minlength=n)))).astype(np.intp),
        indices=indices,
        entry_weights=weights[indices],
        col_ptr=np.concatenate(([0], np.cumsum(counts))).astype(np.intp),
        col_rows=rows_cm,
        col_slots=col_slots,
    )
    return block, vals_cm[order], misses


def scan_log(graph: SocialGraph, params: LearnedParams, test: EventLog, threads: int = 1,
             fallback_tau: Optional[float] = None) -> CreditTable:
    """Populate UC with Gamma_{v,u}(a) for every test action in one chronological pass"""
    if fallback_tau is None:
        fallback_tau = params.mean_tau() or TAU_FALLBACK
    actions = sorted(test.actions)
    if threads > 1 and len(actions) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scanned = list(pool.map(lambda a: _scan_action(graph, params, test, a, fallback_tau), actions))
    else:
        scanned = [_scan_action(graph, params, test, a, fallback_tau) for a in actions]

    blocks = {}
    uc = {}
    misses = 0
    for block, data, missed in scanned:
        blocks[block.action] = block
        uc[block.action] = data
        misses += missed
    if misses:
        logger.warning(f"{misses} propagation edges had no learned tau; used fallback tau={fallback_tau:.6g}")

    distinct = {u: len(test.actions_of(u)) for u in test.users}
    table = CreditTable(blocks, uc, distinct, params.action_counts, fallback_count=misses)
    logger.info(f"Scanned {len(actions)} actions covering {len(table.users)} users, "
                f"{table.stored()} stored credits")
    return table


def marginal_gain(x: int, uc: CreditTable, sc: SetCredit) -> float:
    """sigma(S + x) - sigma(S) from the residual credits, without re-evaluating sigma"""
    if x in sc:
        raise ContractViolation(f"user {x} is already in the seed set")
    gain = 0.0
    for action in uc.actions_of(x):
        block = uc.blocks[action]
        i = block.index[x]
        remaining = 1.0 - sc.value(action, i)
        if remaining <= 0.0:
            continue
        row = block.row(i)
        gain += remaining * float(uc.uc[action][row] @ block.entry_weights[row])
    return max(gain, 0.0)


def absorb(x: int, uc: CreditTable, sc: SetCredit) -> Tuple[CreditTable, SetCredit]:
    """Add x to the seed set: cut paths through x from UC and credit x's reach to SC"""
    if x in sc:
        raise ContractViolation(f"user {x} was already absorbed")
    for action in uc.actions_of(x):
        block = uc.blocks[action]
        i = block.index[x]
        data = uc.writable(action)
        credits = sc.writable(action, len(block.nodes))
        row = block.row(i)
        receivers = block.indices[row]
        reach = data[row].copy()

        credits[receivers] = np.clip(credits[receivers] + reach * (1.0 - credits[i]), 0.0, 1.0)
        credits[i] = 1.0

        column = block.column(i)
        through = data[block.col_slots[column]]
        for w, weight in zip(block.col_rows[column], through):
            if weight <= 0.0:
                continue
            w_row = block.row(w)
            pos = w_row.start + np.searchsorted(block.indices[w_row], receivers)
            # a receiver missing from row w had an underflowed credit there, nothing to cut
            inside = pos < w_row.stop
            match = inside.copy()
            match[inside] = block.indices[pos[inside]] == receivers[inside]
            pos = pos[match]
            data[pos] = np.maximum(data[pos] - weight * reach[match], 0.0)
    sc.add(x)
    return uc, sc


def sigma(uc: CreditTable, sc: SetCredit, seeds: Optional[Iterable[int]] = None) -> float:
    """Influence ability sum_u kappa_{S,u} read off the set credits"""
    if seeds is not None and set(seeds) != set(sc.seeds):
        raise ContractViolation("set credits do not describe the given seed set")
    total = 0.0
    for action in sorted(sc.sc):
        total += float(sc.sc[action] @ uc.blocks[action].weights)
    return total


def _set_credit_block(block: ActionBlock, seeds: FrozenSet[int]) -> np.ndarray:
    credits = np.zeros(len(block.nodes))
    for j, u in enumerate(block.nodes):
        if u in seeds:
            credits[j] = 1.0
        elif len(block.parents[j]):
            credits[j] = block.gamma[j] @ credits[block.parents[j]]
    return credits


def set_credit_from_scratch(table: CreditTable, seeds: Iterable[int]) -> Dict[int, np.ndarray]:
    """Gamma_{S,u}(a) by the direct-credit recursion, for every action touching S"""
    seeds = frozenset(seeds)
    touched = sorted({a for s in seeds for a in table.actions_of(s)})
    return {a: _set_credit_block(table.blocks[a], seeds) for a in touched}


def sigma_from_scratch(table: CreditTable, seeds: Iterable[int]) -> float:
    total = 0.0
    for action, credits in set_credit_from_scratch(table, seeds).items():
        total += float(credits @ table.blocks[action].weights)
    return total


def action_influence(table: CreditTable, seeds: Iterable[int],
                     actions: Optional[Iterable[int]] = None) -> Dict[int, float]:
    """Per-action sum_u Gamma_{S,u}(a): sigma restricted to one action"""
    seeds = frozenset(seeds)
    actions = sorted(table.blocks) if actions is None else sorted(actions)
    return {a: float(_set_credit_block(table.blocks[a], seeds).sum()) if a in table.blocks else 0.0
            for a in actions}


def dump_credits(table: CreditTable, stream: TextIO) -> None:
    for action in sorted(table.blocks):
        for source, receiver, credit in table.nonzero(action):
            stream.write(f"{action} {source} {receiver} {credit:.17g}\n")
