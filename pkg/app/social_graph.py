"""
Directed follow graph and the per-action propagation DAGs derived from it
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional, TextIO, Tuple

from .errors import DomainError, GraphLoadError, ParseError
from .event_log import EventLog, parse_natural

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class SocialGraph:
    """Edge (v, u) means v can influence u (u follows v)"""

    def __init__(self, edges: Iterable[Edge], users: Optional[Iterable[int]] = None):
        self.edges: FrozenSet[Edge] = frozenset(edges)
        for v, u in self.edges:
            if v == u:
                raise GraphLoadError(f"self-loop on user {v}")

        nodes = set(users or ())
        in_nb: Dict[int, list] = defaultdict(list)
        out_nb: Dict[int, list] = defaultdict(list)
        for v, u in self.edges:
            nodes.update((v, u))
            in_nb[u].append(v)
            out_nb[v].append(u)
        self.users: FrozenSet[int] = frozenset(nodes)
        self._in = {u: tuple(sorted(vs)) for u, vs in in_nb.items()}
        self._out = {v: tuple(sorted(us)) for v, us in out_nb.items()}

    @property
    def n(self) -> int:
        return len(self.users)

    def in_neighbors(self, user: int) -> Tuple[int, ...]:
        return self._in.get(user, ())

    def out_neighbors(self, user: int) -> Tuple[int, ...]:
        return self._out.get(user, ())

    def including(self, users: Iterable[int]) -> "SocialGraph":
        """Same edges, with any missing users added as isolated nodes"""
        return SocialGraph(self.edges, self.users | set(users))

    def __repr__(self) -> str:
        return f"SocialGraph(users={self.n}, edges={len(self.edges)})"


@dataclass(frozen=True)
class PropagationGraph:
    action: int
    nodes: Tuple[int, ...]  # ordered by (first performance time, user id)
    edges: FrozenSet[Edge]
    first_time: Dict[int, int] = field(compare=False)
    parents: Dict[int, Tuple[int, ...]] = field(compare=False)

    @property
    def initiators(self) -> Tuple[int, ...]:
        return tuple(u for u in self.nodes if not self.parents[u])

    def in_neighbors(self, user: int) -> Tuple[int, ...]:
        return self.parents.get(user, ())


def load_graph(stream: TextIO) -> SocialGraph:
    """Parse an edge list of `v u` lines; duplicate edges collapse, self-loops are rejected"""
    edges = set()
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields 'v u', got {len(fields)}", lineno)
        try:
            v, u = parse_natural(fields[0]), parse_natural(fields[1])
        except ValueError:
            raise ParseError(f"expected non-negative user ids in {line!r}", lineno) from None
        if v == u:
            raise GraphLoadError(f"line {lineno}: self-loop on user {v}")
        edges.add((v, u))

    graph = SocialGraph(edges)
    logger.info(f"Loaded graph with {graph.n} users and {len(graph.edges)} edges")
    return graph


def write_graph(graph: SocialGraph, stream: TextIO) -> None:
    for v, u in sorted(graph.edges):
        stream.write(f"{v} {u}\n")


def propagation_graph(graph: SocialGraph, log: EventLog, action: int) -> PropagationGraph:
    """G(a): performers of a, linked along follow edges from strictly earlier first performances"""
    performers = log.performers(action)
    if not performers:
        raise DomainError(f"action {action} does not appear in the log")

    first = {u: log.first_time(u, action) for u in performers}
    nodes = tuple(sorted(performers, key=lambda u: (first[u], u)))
    parents = {}
    edges = set()
    for u in nodes:
        ps = tuple(v for v in graph.in_neighbors(u) if v in first and first[v] < first[u])
        parents[u] = ps
        edges.update((v, u) for v in ps)
    return PropagationGraph(action, nodes, frozenset(edges), first, parents)
