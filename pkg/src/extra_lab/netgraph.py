"""Undirected communication graphs over m agents.

Agents are numbered 1..m in file formats and error messages; internally
everything is 0-based. Graphs are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import GraphError

Edge = tuple[int, int]


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected simple graph: ``m`` agents, edges as sorted 0-based pairs."""

    m: int
    edges: frozenset[Edge]
    _adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise GraphError(f"agent count must be positive, got m={self.m}")
        adj: list[list[int]] = [[] for _ in range(self.m)]
        for e in self.edges:
            i, j = e
            if i == j:
                raise GraphError(f"self-loop at agent {i + 1}")
            if not (0 <= i < j < self.m):
                raise GraphError(f"edge {tuple(a + 1 for a in e)} out of range for m={self.m}")
            adj[i].append(j)
            adj[j].append(i)
        for nbrs in adj:
            if len(nbrs) != len(set(nbrs)):
                raise GraphError("duplicate edge")
        object.__setattr__(
            self, "_adjacency", tuple(tuple(sorted(nbrs)) for nbrs in adj)
        )

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(nbrs) for nbrs in self._adjacency)

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Sorted 0-based neighbors of agent i (0-based)."""
        return self._adjacency[i]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges


def _make(m: int, pairs) -> NetworkGraph:
    return NetworkGraph(m=m, edges=frozenset((min(i, j), max(i, j)) for i, j in pairs))


def complete_graph(m: int) -> NetworkGraph:
    """All-to-all graph on m agents: m(m-1)/2 edges, uniform degree m-1."""
    if m < 1:
        raise GraphError(f"complete graph needs m >= 1, got {m}")
    return _make(m, ((i, j) for i in range(m) for j in range(i + 1, m)))


def ring_graph(m: int) -> NetworkGraph:
    """Cycle on m agents: m edges, uniform degree 2. Requires m >= 3."""
    if m < 3:
        raise GraphError(f"ring graph needs m >= 3, got {m}")
    return _make(m, ((i, (i + 1) % m) for i in range(m)))


def circulant_regular_graph(m: int, d: int) -> NetworkGraph:
    """Deterministic d-regular circulant graph on m agents.

    Each agent connects to offsets +-1..+-floor(d/2); when d is odd (which
    forces m even by the handshake lemma) the antipodal offset m/2 is added.
    """
    if m < 1:
        raise GraphError(f"circulant graph needs m >= 1, got {m}")
    if not (1 <= d <= m - 1):
        raise GraphError(f"degree d={d} must satisfy 1 <= d <= m-1 for m={m}")
    if (m * d) % 2 != 0:
        raise GraphError(f"no {d}-regular graph on {m} nodes: m*d must be even")
    offsets = list(range(1, d // 2 + 1))
    if d % 2 == 1:
        offsets.append(m // 2)
    pairs = {(i, (i + o) % m) for i in range(m) for o in offsets}
    g = _make(m, pairs)
    if g.degrees != (d,) * m:
        raise GraphError(f"circulant construction failed to reach uniform degree {d}")
    if not is_connected(g):
        # happens only for d=1 with m>2 (a perfect matching)
        raise GraphError(f"circulant graph with m={m}, d={d} is disconnected")
    return g


def is_connected(g: NetworkGraph) -> bool:
    """Breadth-first reachability check from agent 0."""
    seen = [False] * g.m
    seen[0] = True
    frontier = [0]
    count = 1
    while frontier:
        nxt = []
        for i in frontier:
            for j in g.neighbors(i):
                if not seen[j]:
                    seen[j] = True
                    count += 1
                    nxt.append(j)
        frontier = nxt
    return count == g.m
