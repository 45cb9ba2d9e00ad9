"""
Problem Solver: seed selection under cardinality and knapsack constraints.

Streaming solvers read the ground set once and keep one candidate set per
threshold guess; CELF and brute force are the reference baselines.
"""
import bisect
import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, TextIO, Tuple, Union

from .config import BRUTE_FORCE_LIMIT
from .credit_engine import CreditTable, SetCredit, absorb, marginal_gain, sigma, sigma_from_scratch
from .errors import DomainError, EnumerationLimitError, ParseError
from .event_log import parse_natural

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightVector:
    weights: Dict[int, float]
    budget: float

    def weight(self, user: int) -> float:
        try:
            return self.weights[user]
        except KeyError:
            raise DomainError(f"no weight for user {user}") from None

    def cost(self, users: Iterable[int]) -> float:
        return sum(self.weight(u) for u in users)


@dataclass(frozen=True)
class Cardinality:
    k: int


@dataclass(frozen=True)
class Knapsack:
    weights: WeightVector


Constraint = Union[Cardinality, Knapsack]


@dataclass
class SeedResult:
    seeds: List[int]
    value: float
    passes: int
    per_threshold: Dict[float, Tuple[int, float]] = field(default_factory=dict)
    wall_time: float = 0.0
    visits: int = 0
    evaluations: int = 0
    mode: str = ""


def normalize_weights(w: WeightVector) -> WeightVector:
    """Divide weights and budget by the smallest weight"""
    if w.budget <= 0:
        raise DomainError(f"budget must be positive, got {w.budget}")
    if not w.weights:
        return w
    g_min = min(w.weights.values())
    if g_min <= 0:
        raise DomainError(f"weights must be positive, got {g_min}")
    return WeightVector({u: g / g_min for u, g in w.weights.items()}, w.budget / g_min)


def load_weights(stream: TextIO, budget: float) -> WeightVector:
    weights = {}
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"expected 'user weight', got {len(fields)} fields", lineno)
        try:
            weights[parse_natural(fields[0])] = float(fields[1])
        except ValueError:
            raise ParseError(f"malformed weight line {line!r}", lineno) from None
    return WeightVector(weights, budget)


def uniform_weights(users: Iterable[int], budget: float) -> WeightVector:
    return WeightVector({u: 1.0 for u in users}, budget)


def write_result(result: SeedResult, stream: TextIO) -> None:
    stream.write(f"value={result.value:.17g}\n")
    stream.write(f"passes={result.passes}\n")
    stream.write(f"time_s={result.wall_time:.6f}\n")
    for user in result.seeds:
        stream.write(f"{user}\n")


def write_thresholds(result: SeedResult, stream: TextIO, label: str = "") -> None:
    """One `#` comment line per live threshold of a streaming result"""
    prefix = f"{label} " if label else ""
    for threshold in sorted(result.per_threshold):
        size, value = result.per_threshold[threshold]
        stream.write(f"# {prefix}threshold={threshold:.17g} size={size} value={value:.17g}\n")


class Sieve:
    """
    Candidate set and private credit state of the thresholds listed in
    `exponents`. Thresholds that have accepted exactly the same users share
    one Sieve; it is split as soon as their decisions differ.
    """

    def __init__(self, uc: CreditTable, sc: Optional[SetCredit] = None, cost: float = 0.0):
        self.uc = uc
        self.sc = SetCredit() if sc is None else sc
        self.cost = cost
        self.stopped = False
        self.exponents: List[int] = []

    @property
    def seeds(self) -> List[int]:
        return self.sc.seeds

    def value(self) -> float:
        return sigma(self.uc, self.sc)

    def take(self, x: int, weight: float = 1.0) -> None:
        absorb(x, self.uc, self.sc)
        self.cost += weight

    def restart(self, uc: CreditTable) -> None:
        self.uc = uc.fork()
        self.sc = SetCredit()
        self.cost = 0.0

    def split(self, count: int) -> "Sieve":
        """Move the lowest `count` thresholds onto a copy of this state"""
        clone = Sieve(self.uc.fork(), self.sc.copy(), self.cost)
        clone.stopped = self.stopped
        clone.exponents, self.exponents = self.exponents[:count], self.exponents[count:]
        return clone


class ThresholdLadder:
    """
    Live thresholds base**i restricted to a window [lower, upper] that moves
    with the running maximum m. Thresholds leaving the window are discarded;
    thresholds entering it start from an empty set on the pristine table.
    """

    def __init__(self, base: float, uc: CreditTable):
        self.base = base
        self.uc = uc
        self.live: Dict[int, Sieve] = {}
        self.lower = 0.0
        self.upper = 0.0
        self._order: Optional[List[Sieve]] = []

    def threshold(self, exponent: int) -> float:
        return self.base ** exponent

    def _lowest_exponent(self, lower: float) -> int:
        i = math.ceil(math.log(lower, self.base))
        while self.base ** i < lower:
            i += 1
        while self.base ** (i - 1) >= lower:
            i -= 1
        return i

    def _highest_exponent(self, upper: float) -> int:
        i = math.floor(math.log(upper, self.base))
        while self.base ** i > upper:
            i -= 1
        while self.base ** (i + 1) <= upper:
            i += 1
        return i

    def set_window(self, lower: float, upper: float) -> None:
        if lower <= 0 or upper < lower or (lower, upper) == (self.lower, self.upper):
            return
        self.lower, self.upper = lower, upper
        lo = self._lowest_exponent(lower)
        hi = self._highest_exponent(upper)
        for i in sorted(i for i in self.live if i < lo or i > hi):
            self.live.pop(i).exponents.remove(i)
            self._order = None
        fresh = None
        for i in range(lo, hi + 1):
            if i not in self.live:
                if fresh is None:
                    fresh = Sieve(self.uc.fork())
                fresh.exponents.append(i)
                self.live[i] = fresh
                self._order = None

    def adopt(self, sieve: Sieve) -> None:
        for i in sieve.exponents:
            self.live[i] = sieve
        self._order = None

    def sieves(self) -> List[Sieve]:
        """Distinct candidate sets, ordered by their lowest threshold"""
        if self._order is None:
            order: List[Sieve] = []
            seen = set()
            for i in sorted(self.live):
                sieve = self.live[i]
                if id(sieve) not in seen:
                    seen.add(id(sieve))
                    order.append(sieve)
            self._order = order
        return self._order

    def best(self) -> Optional[Sieve]:
        best = None
        best_value = -1.0
        for sieve in self.sieves():  # ascending thresholds: lowest wins ties
            value = sieve.value()
            if value > best_value:
                best, best_value = sieve, value
        return best

    def per_threshold(self) -> Dict[float, Tuple[int, float]]:
        stats = {id(s): (len(s.seeds), s.value()) for s in self.sieves()}
        return {self.threshold(i): stats[id(self.live[i])] for i in sorted(self.live)}


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0,1), got {epsilon}")


def _run_sieves(sieves: List[Sieve], offer: Callable[[Sieve], Tuple[Optional[Sieve], int]],
                pool: Optional[ThreadPoolExecutor]) -> List[Tuple[Optional[Sieve], int]]:
    if pool is not None and len(sieves) > 1:
        return list(pool.map(offer, sieves))
    return [offer(sieve) for sieve in sieves]


def _settle(ladder: ThresholdLadder, outcomes: List[Tuple[Optional[Sieve], int]]) -> int:
    evaluations = 0
    for split, evaluated in outcomes:
        evaluations += evaluated
        if split is not None:
            ladder.adopt(split)
    return evaluations


def _finish(ladder: ThresholdLadder, visits: int, evaluations: int, started: float, mode: str) -> SeedResult:
    per_threshold = ladder.per_threshold()
    best = ladder.best()
    seeds = list(best.seeds) if best is not None else []
    value = best.value() if best is not None else 0.0
    for threshold, (size, sieve_value) in per_threshold.items():
        logger.debug(f"threshold {threshold:.6g}: {size} seeds, value {sieve_value:.6f}")
    return SeedResult(seeds, value, passes=1, per_threshold=per_threshold,
                      wall_time=time.perf_counter() - started, visits=visits,
                      evaluations=evaluations, mode=mode)


def stream_cardinality(ground: Iterable[int], k: int, epsilon: float, uc: CreditTable,
                       threads: int = 1) -> SeedResult:
    """Single-pass threshold streaming, (1/2 - epsilon)-approximate under |S| <= k"""
    if k < 1:
        raise DomainError("k must be ≥ 1")
    _check_epsilon(epsilon)
    started = time.perf_counter()
    pristine = SetCredit()
    ladder = ThresholdLadder(1.0 + epsilon, uc)
    m = 0.0
    visits = evaluations = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    try:
        for x in ground:
            visits += 1
            singleton = marginal_gain(x, uc, pristine)
            evaluations += 1
            m = max(m, singleton)
            ladder.set_window(m, 2 * k * m)

            # the singleton gain bounds the gain against every candidate set
            candidates = []
            for sieve in ladder.sieves():
                if ladder.threshold(sieve.exponents[0]) / (2 * k) > singleton:
                    break
                if len(sieve.seeds) < k:
                    candidates.append(sieve)

            def offer(sieve: Sieve) -> Tuple[Optional[Sieve], int]:
                gain = marginal_gain(x, sieve.uc, sieve.sc)
                bars = [ladder.threshold(i) / (2 * k) for i in sieve.exponents]
                accepted = bisect.bisect_right(bars, gain)
                if accepted == 0:
                    return None, 1
                if accepted == len(bars):
                    sieve.take(x)
                    return None, 1
                taker = sieve.split(accepted)
                taker.take(x)
                return taker, 1

            evaluations += _settle(ladder, _run_sieves(candidates, offer, pool))
    finally:
        if pool is not None:
            pool.shutdown()

    result = _finish(ladder, visits, evaluations, started, "stream")
    logger.info(f"Streaming (k={k}, eps={epsilon}) kept {len(ladder.live)} thresholds in "
                f"{len(ladder.sieves())} candidate sets, value={result.value:.4f} in {result.wall_time:.3f}s")
    return result


def stream_budgeted(ground: Iterable[int], w: WeightVector, epsilon: float, uc: CreditTable,
                    threads: int = 1) -> SeedResult:
    """Single-pass budgeted streaming, (1/3 - epsilon)-approximate under g^T I_S <= b"""
    _check_epsilon(epsilon)
    w = normalize_weights(w)
    b = w.budget
    started = time.perf_counter()
    pristine = SetCredit()
    ladder = ThresholdLadder(1.0 + 3 * epsilon, uc)
    m = 0.0
    visits = evaluations = 0
    skipped = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    try:
        for x in ground:
            visits += 1
            g = w.weight(x)
            if g > b:
                skipped += 1
                continue
            density = marginal_gain(x, uc, pristine) / g
            evaluations += 1
            m = max(m, density)
            ladder.set_window(m / (1 + 3 * epsilon), 2 * b * m)

            candidates = []
            for sieve in ladder.sieves():
                if 2 * ladder.threshold(sieve.exponents[0]) / (3 * b) > density:
                    break
                if not sieve.stopped:
                    candidates.append(sieve)

            def offer(sieve: Sieve) -> Tuple[Optional[Sieve], int]:
                bars = [2 * ladder.threshold(i) / (3 * b) for i in sieve.exponents]
                if g >= b / 2:
                    # a single dominant user is a solution on its own
                    triggered = bisect.bisect_right(bars, density)
                    if triggered == len(bars):
                        single = sieve
                        single.restart(ladder.uc)
                    else:
                        single = Sieve(ladder.uc.fork())
                        single.exponents, sieve.exponents = sieve.exponents[:triggered], sieve.exponents[triggered:]
                    single.take(x, g)
                    single.stopped = True
                    return (None if single is sieve else single), 0
                if sieve.cost + g > b:
                    return None, 0
                gain = marginal_gain(x, sieve.uc, sieve.sc)
                accepted = bisect.bisect_right([bar * g for bar in bars], gain)
                if accepted == 0:
                    return None, 1
                if accepted == len(bars):
                    sieve.take(x, g)
                    return None, 1
                taker = sieve.split(accepted)
                taker.take(x, g)
                return taker, 1

            evaluations += _settle(ladder, _run_sieves(candidates, offer, pool))
    finally:
        if pool is not None:
            pool.shutdown()

    if skipped:
        logger.warning(f"{skipped} users heavier than the budget were never eligible")
    result = _finish(ladder, visits, evaluations, started, "stream")
    logger.info(f"Budgeted streaming (b={b:g}, eps={epsilon}) kept {len(ladder.live)} thresholds in "
                f"{len(ladder.sieves())} candidate sets, value={result.value:.4f} in {result.wall_time:.3f}s")
    return result


def _lazy_greedy(ground: List[int], uc: CreditTable, weights: Optional[WeightVector],
                 budget: float, limit: Optional[int], per_weight: bool) -> SeedResult:
    """CELF: stale gains are upper bounds by submodularity, so only the top is refreshed"""
    started = time.perf_counter()
    table = uc.fork()
    sc = SetCredit()
    cost = 0.0
    evaluations = 0
    rounds = 0

    def weight(x: int) -> float:
        return weights.weight(x) if weights is not None else 1.0

    heap = []
    for x in ground:
        if weight(x) > budget:
            continue
        gain = marginal_gain(x, table, sc)
        evaluations += 1
        key = gain / weight(x) if per_weight else gain
        heap.append((-key, x, 0))
    heapq.heapify(heap)

    while heap and (limit is None or len(sc.seeds) < limit):
        neg_key, x, stamp = heapq.heappop(heap)
        if cost + weight(x) > budget:
            continue
        if stamp == len(sc.seeds):
            if -neg_key <= 0.0:
                break
            absorb(x, table, sc)
            cost += weight(x)
            rounds += 1
            continue
        gain = marginal_gain(x, table, sc)
        evaluations += 1
        key = gain / weight(x) if per_weight else gain
        heapq.heappush(heap, (-key, x, len(sc.seeds)))

    return SeedResult(list(sc.seeds), sigma(table, sc), passes=rounds,
                      wall_time=time.perf_counter() - started, visits=len(ground),
                      evaluations=evaluations, mode="celf")


def celf_greedy(constraint: Constraint, uc: CreditTable, ground: Optional[Iterable[int]] = None) -> SeedResult:
    ground = sorted(uc.users) if ground is None else list(ground)
    if isinstance(constraint, Cardinality):
        if constraint.k < 0:
            raise DomainError(f"k must be non-negative, got {constraint.k}")
        result = _lazy_greedy(ground, uc, None, math.inf, constraint.k, per_weight=False)
    else:
        w = normalize_weights(constraint.weights)
        unit = _lazy_greedy(ground, uc, w, w.budget, None, per_weight=False)
        benefit = _lazy_greedy(ground, uc, w, w.budget, None, per_weight=True)
        result = benefit if benefit.value > unit.value else unit
        result.wall_time = unit.wall_time + benefit.wall_time
        result.evaluations = unit.evaluations + benefit.evaluations
    logger.info(f"CELF selected {len(result.seeds)} seeds, value={result.value:.4f} "
                f"({result.evaluations} gain evaluations, {result.wall_time:.3f}s)")
    return result


def naive_greedy(constraint: Cardinality, uc: CreditTable, ground: Optional[Iterable[int]] = None) -> SeedResult:
    """Non-lazy greedy: re-evaluates every remaining user each round"""
    started = time.perf_counter()
    ground = sorted(uc.users) if ground is None else sorted(ground)
    table = uc.fork()
    sc = SetCredit()
    evaluations = 0
    while len(sc.seeds) < constraint.k:
        best, best_gain = None, 0.0
        for x in ground:
            if x in sc:
                continue
            gain = marginal_gain(x, table, sc)
            evaluations += 1
            if gain > best_gain:
                best, best_gain = x, gain
        if best is None:
            break
        absorb(best, table, sc)
    return SeedResult(list(sc.seeds), sigma(table, sc), passes=len(sc.seeds),
                      wall_time=time.perf_counter() - started, visits=len(ground),
                      evaluations=evaluations, mode="greedy")


def brute_force(constraint: Constraint, uc: CreditTable, limit: int = BRUTE_FORCE_LIMIT,
                ground: Optional[Iterable[int]] = None) -> SeedResult:
    """Exact optimum by evaluating sigma from scratch on every feasible subset"""
    started = time.perf_counter()
    ground = sorted(uc.users) if ground is None else sorted(ground)
    n = len(ground)

    if isinstance(constraint, Cardinality):
        if constraint.k < 0:
            raise DomainError(f"k must be non-negative, got {constraint.k}")
        # sigma is monotone, so subsets of the largest feasible size suffice
        sizes = [min(constraint.k, n)]
        weights = None
        budget = math.inf
    else:
        weights = normalize_weights(constraint.weights)
        budget = weights.budget
        # every normalized weight is at least 1
        sizes = range(0, min(n, int(math.floor(budget))) + 1)

    total = sum(math.comb(n, size) for size in sizes)
    if total > limit:
        raise EnumerationLimitError(f"{total} subsets exceed the enumeration limit {limit}")

    best: Tuple[int, ...] = ()
    best_value = 0.0
    evaluated = 0
    for size in sizes:
        for subset in itertools.combinations(ground, size):
            if weights is not None and weights.cost(subset) > budget:
                continue
            value = sigma_from_scratch(uc, subset)
            evaluated += 1
            if value > best_value:
                best, best_value = subset, value

    return SeedResult(list(best), best_value, passes=evaluated,
                      wall_time=time.perf_counter() - started, visits=n,
                      evaluations=evaluated, mode="brute")
