"""Network topology: incidence matrix, spanning-tree cycle basis, connectivity."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np


class NetworkError(ValueError):
    """Invalid network description."""


class DisconnectedError(NetworkError):
    """Raised by analyses that require a connected graph."""

    def __init__(self, components):
        self.components = components
        names = "; ".join("{" + ", ".join(map(str, c)) + "}" for c in components)
        super().__init__(f"network is disconnected into {len(components)} components: {names}")


@dataclass(frozen=True, eq=False)
class PowerNetwork:
    """Undirected weighted graph with every edge oriented from lower to higher index.

    Attributes
    ----------
    buses : tuple
        External bus identifiers, in internal index order.
    src, dst : ndarray of int
        Edge endpoints as internal indices, ``src[e] < dst[e]``; edges sorted.
    weights : ndarray of float
        Coupling weights ``a_e`` (MW).
    """

    buses: tuple
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def m(self) -> int:
        return len(self.src)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def edge_label(self, e: int) -> str:
        return f"{self.buses[self.src[e]]}-{self.buses[self.dst[e]]}"

    @property
    def edge_labels(self) -> list[str]:
        return [self.edge_label(e) for e in range(self.m)]

    def edge_index(self, key) -> int:
        """Resolve an edge given as an index, a ``"a-b"`` label or a bus-id pair."""
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            if not 0 <= key < self.m:
                raise NetworkError(f"unknown edge index {key}")
            return int(key)
        if isinstance(key, str):
            parts = key.split("-")
            if len(parts) != 2:
                raise NetworkError(f"cannot parse edge label {key!r}")
            key = tuple(_coerce_id(p, self.buses) for p in parts)
        a, b = key
        lookup = self._edge_lookup()
        try:
            i, j = self.bus_index(a), self.bus_index(b)
        except NetworkError:
            raise NetworkError(f"unknown edge {a}-{b}") from None
        e = lookup.get((min(i, j), max(i, j)))
        if e is None:
            raise NetworkError(f"unknown edge {a}-{b}")
        return e

    def bus_index(self, bus) -> int:
        idx = self._cache.get("bus_index")
        if idx is None:
            idx = {b: k for k, b in enumerate(self.buses)}
            self._cache["bus_index"] = idx
        try:
            return idx[bus]
        except KeyError:
            raise NetworkError(f"unknown bus {bus!r}") from None

    def _edge_lookup(self) -> dict:
        lk = self._cache.get("edge_lookup")
        if lk is None:
            lk = {(int(i), int(j)): e for e, (i, j) in enumerate(self.edges)}
            self._cache["edge_lookup"] = lk
        return lk

    def degree_weights(self) -> np.ndarray:
        """Per-node sum of incident coupling weights."""
        out = np.zeros(self.n)
        np.add.at(out, self.src, self.weights)
        np.add.at(out, self.dst, self.weights)
        return out

    @property
    def is_connected(self) -> bool:
        return len(connected_components(self)) <= 1

    def require_connected(self) -> None:
        comps = connected_components(self)
        if len(comps) > 1:
            raise DisconnectedError([[self.buses[i] for i in c] for c in comps])

    def without_edges(self, edge_ids: Iterable[int]) -> "PowerNetwork":
        drop = set(edge_ids)
        keep = np.array([e for e in range(self.m) if e not in drop], dtype=np.intp)
        return PowerNetwork(self.buses, self.src[keep], self.dst[keep], self.weights[keep])


def _coerce_id(token: str, buses: Sequence[Hashable]):
    token = token.strip()
    if token in buses:
        return token
    try:
        as_int = int(token)
    except ValueError:
        return token
    return as_int


def build_network(buses: Sequence[Hashable], lines: Iterable[tuple]) -> PowerNetwork:
    """Validate ``(i, j, a)`` line records over the given bus ids.

    Edges are re-oriented so the lower internal index is the source and then
    sorted lexicographically.
    """
    buses = tuple(buses)
    if len(set(buses)) != len(buses):
        raise NetworkError("duplicate bus identifiers")
    index = {b: k for k, b in enumerate(buses)}
    seen: dict[tuple[int, int], tuple] = {}
    for rec in lines:
        a, b, w = rec
        if a not in index or b not in index:
            bad = a if a not in index else b
            raise NetworkError(f"line {a}-{b} references unknown bus {bad!r}")
        i, j = index[a], index[b]
        if i == j:
            raise NetworkError(f"line {a}-{b} is a self-loop")
        w = float(w)
        if not np.isfinite(w) or w <= 0:
            raise NetworkError(f"line {a}-{b} has nonpositive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise NetworkError(f"duplicate line {a}-{b}")
        seen[key] = w
    order = sorted(seen)
    src = np.array([k[0] for k in order], dtype=np.intp)
    dst = np.array([k[1] for k in order], dtype=np.intp)
    weights = np.array([seen[k] for k in order], dtype=float)
    return PowerNetwork(buses, src, dst, weights)


def incidence_matrix(net: PowerNetwork) -> np.ndarray:
    """Oriented node-edge incidence: +1 at the source row, -1 at the sink row."""
    B = np.zeros((net.n, net.m))
    cols = np.arange(net.m)
    B[net.src, cols] = 1.0
    B[net.dst, cols] = -1.0
    return B


def _adjacency(net: PowerNetwork) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(net.n)]
    for e, (i, j) in enumerate(net.edges):
        adj[i].append((j, e))
        adj[j].append((i, e))
    return adj


def connected_components(net: PowerNetwork) -> list[list[int]]:
    """Node partition by reachability, each component sorted, components ordered by minimum."""
    adj = _adjacency(net)
    label = [-1] * net.n
    comps = []
    for start in range(net.n):
        if label[start] >= 0:
            continue
        label[start] = len(comps)
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if label[v] < 0:
                    label[v] = label[start]
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


@dataclass(frozen=True)
class CycleBasis:
    """Fundamental cycles of a BFS spanning tree.

    ``C`` stacks the signed edge-incidence vectors, one row per non-tree edge.
    Each cycle starts with its non-tree edge traversed along its orientation.
    """

    C: np.ndarray
    chords: tuple[int, ...]

    @property
    def cycles(self) -> list[np.ndarray]:
        return list(self.C)

    def __len__(self) -> int:
        return self.C.shape[0]


def cycle_basis(net: PowerNetwork) -> CycleBasis:
    cached = net._cache.get("cycle_basis")
    if cached is not None:
        return cached
    net.require_connected()
    adj = _adjacency(net)
    # BFS from node 0; neighbours are visited in edge order
    parent_edge = [-1] * net.n
    parent = [-1] * net.n
    depth = [0] * net.n
    seen = [False] * net.n
    seen[0] = True
    queue = deque([0])
    tree = set()
    while queue:
        u = queue.popleft()
        for v, e in sorted(adj[u], key=lambda t: t[1]):
            if not seen[v]:
                seen[v] = True
                parent[v], parent_edge[v], depth[v] = u, e, depth[u] + 1
                tree.add(e)
                queue.append(v)

    src, dst = net.src, net.dst
    rows, chords = [], []
    for e in range(net.m):
        if e in tree:
            continue
        vec = np.zeros(net.m)
        vec[e] = 1.0
        # close the cycle from dst back to src along the tree
        a, b = int(dst[e]), int(src[e])
        up_a, up_b = [], []
        while a != b:
            if depth[a] >= depth[b]:
                up_a.append(a)
                a = parent[a]
            else:
                up_b.append(b)
                b = parent[b]
        for x in up_a:  # walking x -> parent[x]
            pe = parent_edge[x]
            vec[pe] += 1.0 if src[pe] == x else -1.0
        for x in up_b:  # walking parent[x] -> x
            pe = parent_edge[x]
            vec[pe] += 1.0 if dst[pe] == x else -1.0
        rows.append(vec)
        chords.append(e)
    C = np.array(rows).reshape(len(rows), net.m)
    basis = CycleBasis(C, tuple(chords))
    net._cache["cycle_basis"] = basis
    return basis
