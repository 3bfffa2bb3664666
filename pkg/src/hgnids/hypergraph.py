"""IP/port hypergraph construction and s-closeness-centrality metrics.

The hypergraph abstracts a window of flow records: every destination port
is a vertex, and every IP address (source or destination) is a hyperedge
containing the ports it touched. Two hyperedges are s-adjacent when they
share at least s vertices; s-paths, s-distances, s-components and the
s-closeness centrality

    C_s(e) = (|E| - 1) / sum of s-distances from e to the edges of its
             s-component E

all derive from that relation. A scanning source/target pair shows up as
two near-identical large hyperedges whose tail centralities (large s)
lock to 1, which is the signature the rest of the package exploits.

Pairwise overlap counts are computed once per hypergraph and reused for
every s, so per-s traversals stay near linear in the number of
overlapping edge pairs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .flows import Dataset

SCHEDULE_BASE = 3
SCHEDULE_STEPS = 11


class EdgeRole(Enum):
    SOURCE = "SOURCE"
    DEST = "DEST"
    BOTH = "BOTH"


class Hypergraph:
    """Immutable-after-build incidence structure with overlap caching."""

    def __init__(self):
        self.edges: dict[str, set[int]] = {}
        self.roles: dict[str, EdgeRole] = {}
        self._overlaps: dict[tuple[str, str], int] | None = None
        self._adjacency: dict[int, dict[str, list[str]]] = {}

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def vertices(self) -> set[int]:
        out: set[int] = set()
        for members in self.edges.values():
            out |= members
        return out

    def edge_size(self, ip: str) -> int:
        members = self.edges.get(ip)
        return 0 if members is None else len(members)

    def max_edge_size(self) -> int:
        if not self.edges:
            return 0
        return max(len(m) for m in self.edges.values())

    def _add(self, ip: str, port: int, role: EdgeRole) -> None:
        members = self.edges.get(ip)
        if members is None:
            self.edges[ip] = {port}
            self.roles[ip] = role
        else:
            members.add(port)
            if self.roles[ip] is not role:
                self.roles[ip] = EdgeRole.BOTH

    def overlaps(self) -> dict[tuple[str, str], int]:
        """Intersection sizes for every pair of edges sharing >= 1 vertex."""
        if self._overlaps is None:
            by_vertex: dict[int, list[str]] = {}
            for ip, members in self.edges.items():
                for port in members:
                    by_vertex.setdefault(port, []).append(ip)
            counts: dict[tuple[str, str], int] = {}
            for incident in by_vertex.values():
                for i in range(len(incident)):
                    a = incident[i]
                    for j in range(i + 1, len(incident)):
                        key = (a, incident[j])
                        counts[key] = counts.get(key, 0) + 1
            self._overlaps = counts
        return self._overlaps

    def adjacency_at(self, s: int) -> dict[str, list[str]]:
        """Neighbour lists under the >= s shared-vertex relation."""
        if s < 1:
            raise ValueError("s must be >= 1")
        cached = self._adjacency.get(s)
        if cached is not None:
            return cached
        neighbours: dict[str, list[str]] = {ip: [] for ip in self.edges}
        for (a, b), count in self.overlaps().items():
            if count >= s:
                neighbours[a].append(b)
                neighbours[b].append(a)
        self._adjacency[s] = neighbours
        return neighbours


@dataclass
class SComponentMap:
    s: int
    assignment: dict[str, int]

    def component_of(self, edge: str) -> int:
        return self.assignment[edge]

    def groups(self) -> list[set[str]]:
        byid: dict[int, set[str]] = {}
        for edge, cid in self.assignment.items():
            byid.setdefault(cid, set()).add(edge)
        return [byid[k] for k in sorted(byid)]


@dataclass(frozen=True)
class CentralityProfile:
    edge: str
    schedule: tuple[int, ...]
    values: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.values))


def build_hypergraph(dataset: Dataset) -> Hypergraph:
    """Build the port hypergraph: each record adds its destination port to
    both its source-IP edge and its destination-IP edge."""
    h = Hypergraph()
    for r in dataset:
        h._add(r.src_ip, r.dst_port, EdgeRole.SOURCE)
        h._add(r.dst_ip, r.dst_port, EdgeRole.DEST)
    return h


def _bfs_distances(h: Hypergraph, start: str, s: int) -> dict[str, int]:
    adjacency = h.adjacency_at(s)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in adjacency[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def s_distance(h: Hypergraph, e: str, f: str, s: int) -> int | None:
    """Length of the shortest s-path from e to f; None when unreachable."""
    if s < 1:
        raise ValueError("s must be >= 1")
    for edge in (e, f):
        if edge not in h.edges:
            raise KeyError(f"unknown edge: {edge}")
    if e == f:
        return 0
    adjacency = h.adjacency_at(s)
    dist = {e: 0}
    queue = deque([e])
    while queue:
        cur = queue.popleft()
        for nxt in adjacency[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                if nxt == f:
                    return dist[nxt]
                queue.append(nxt)
    return None


def s_components(h: Hypergraph, s: int) -> SComponentMap:
    """Connected components of the s-adjacency relation, ids assigned in
    edge insertion order."""
    if s < 1:
        raise ValueError("s must be >= 1")
    adjacency = h.adjacency_at(s)
    assignment: dict[str, int] = {}
    next_id = 0
    for edge in h.edges:
        if edge in assignment:
            continue
        assignment[edge] = next_id
        queue = deque([edge])
        while queue:
            cur = queue.popleft()
            for nxt in adjacency[cur]:
                if nxt not in assignment:
                    assignment[nxt] = next_id
                    queue.append(nxt)
        next_id += 1
    return SComponentMap(s, assignment)


def s_closeness_centrality(h: Hypergraph, e: str, s: int) -> float:
    """C_s(e) over e's s-component; 0 by convention for a singleton."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if e not in h.edges:
        raise KeyError(f"unknown edge: {e}")
    dist = _bfs_distances(h, e, s)
    n = len(dist)
    if n <= 1:
        return 0.0
    return (n - 1) / sum(dist.values())


def centrality_schedule(k: int) -> tuple[int, ...]:
    if k < 1:
        raise ValueError("skip interval k must be >= 1")
    return tuple(SCHEDULE_BASE + n * k for n in range(SCHEDULE_STEPS))


def centrality_profile(h: Hypergraph, e: str, k: int) -> CentralityProfile:
    """The 11 scheduled s-closeness centralities of e at s = 3, 3+k, ..., 3+10k.

    Scheduled values with s larger than the edge size are zero-filled.
    """
    if e not in h.edges:
        raise KeyError(f"unknown edge: {e}")
    schedule = centrality_schedule(k)
    size = len(h.edges[e])
    values = []
    for s in schedule:
        if s > size:
            values.append(0.0)
        else:
            values.append(s_closeness_centrality(h, e, s))
    return CentralityProfile(e, schedule, tuple(values))


def edge_profiles(h: Hypergraph, k: int) -> dict[str, CentralityProfile]:
    """Profiles for every edge, sharing per-s adjacency across edges."""
    schedule = centrality_schedule(k)
    values: dict[str, list[float]] = {ip: [0.0] * SCHEDULE_STEPS for ip in h.edges}
    for i, s in enumerate(schedule):
        for ip, members in h.edges.items():
            if len(members) < s:
                continue
            dist = _bfs_distances(h, ip, s)
            n = len(dist)
            if n > 1:
                values[ip][i] = (n - 1) / sum(dist.values())
    return {
        ip: CentralityProfile(ip, schedule, tuple(vals))
        for ip, vals in values.items()
    }


def feature_skip_interval(h: Hypergraph) -> int:
    """Spacing k such that the last scheduled s lands near 70% of the
    largest edge size; never below 1."""
    d = h.max_edge_size()
    if d == 0:
        raise ValueError("empty hypergraph has no skip interval")
    return max(1, math.floor((0.7 * d - SCHEDULE_BASE) / (SCHEDULE_STEPS - 1) + 0.5))


def detector_skip_interval(max_size: int) -> int:
    """Spacing used by the online detector: the schedule tops out just
    under the largest edge size."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    return max(1, (max_size - SCHEDULE_BASE) // (SCHEDULE_STEPS - 1))


def incidence_rows(h: Hypergraph) -> list[tuple[str, str, int]]:
    """(edge, role, port) rows for CSV export."""
    out = []
    for ip, members in h.edges.items():
        role = h.roles[ip].value
        for port in sorted(members):
            out.append((ip, role, port))
    return out
