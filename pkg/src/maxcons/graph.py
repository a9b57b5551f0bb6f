"""Undirected communication graphs and their structural quantities.

Graphs are immutable and 0-indexed. Each iteration of a simulation draws a
``GraphRealization``: the subset of edges that survive independent erasure
with probability ``p``.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import pdist, squareform

from .errors import (
    ConnectivityError,
    ConvergenceError,
    DomainError,
    GraphValidationError,
    RangeError,
)

logger = logging.getLogger(__name__)

POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_CAP = 100_000
INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph without self-loops or parallel edges."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    degrees: tuple[int, ...]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        if self.edges:
            rows, cols = self.edge_index
            a[rows, cols] = 1
            a[cols, rows] = 1
        return a

    @cached_property
    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint arrays aligned with ``edges``."""
        arr = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    @cached_property
    def _neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(nbrs)) for nbrs in adj)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g

    @property
    def is_regular(self) -> bool:
        return len(set(self.degrees)) == 1


@dataclass(frozen=True, eq=False)
class GraphRealization:
    """Edges of ``base`` that are active during one iteration."""

    base: Graph
    active_mask: np.ndarray = field(repr=False)

    @property
    def active_edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(e for e, keep in zip(self.base.edges, self.active_mask) if keep)

    @property
    def adjacency(self) -> np.ndarray:
        """Boolean adjacency of the surviving edges (both directions)."""
        n = self.base.n_nodes
        a = np.zeros((n, n), dtype=bool)
        if self.base.edges:
            rows, cols = self.base.edge_index
            rows, cols = rows[self.active_mask], cols[self.active_mask]
            a[rows, cols] = True
            a[cols, rows] = True
        return a


def build_graph(
    n_nodes: int,
    edges: Iterable[tuple[int, int]],
    allow_disconnected: bool = False,
) -> Graph:
    """Validate an edge list and build a ``Graph``.

    Raises:
        GraphValidationError: on bad node count, out-of-range index,
            self-loop or duplicate edge.
        ConnectivityError: if the graph is disconnected and
            ``allow_disconnected`` is false.
    """
    if n_nodes < 1:
        raise GraphValidationError(f"Graph needs at least one node, got {n_nodes}.")

    seen: set[tuple[int, int]] = set()
    degrees = [0] * n_nodes
    for raw in edges:
        i, j = (int(v) for v in raw)
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise GraphValidationError(f"Edge ({i}, {j}) has a node outside [0, {n_nodes}).")
        if i == j:
            raise GraphValidationError(f"Self-loop at node {i} is not allowed.")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphValidationError(f"Duplicate edge {key}.")
        seen.add(key)
        degrees[i] += 1
        degrees[j] += 1

    g = Graph(n_nodes=n_nodes, edges=tuple(sorted(seen)), degrees=tuple(degrees))
    if not allow_disconnected and not nx.is_connected(g.to_networkx()):
        raise ConnectivityError(f"Graph with {n_nodes} nodes and {g.edge_count} edges is disconnected.")
    return g


def spectral_radius(g: Graph) -> float:
    """Largest eigenvalue of the adjacency matrix by power iteration.

    Iterates on ``A + I`` so that bipartite graphs (eigenvalue pair +/-rho)
    still converge; the Rayleigh quotient of ``A`` is the estimate.
    """
    if g.edge_count == 0:
        return 0.0
    a = g.adjacency.astype(float)
    x = np.full(g.n_nodes, 1.0 / math.sqrt(g.n_nodes))
    previous = float(x @ a @ x)
    for _ in range(POWER_ITERATION_CAP):
        y = a @ x + x
        x = y / np.linalg.norm(y)
        estimate = float(x @ (a @ x))
        if abs(estimate - previous) <= POWER_ITERATION_TOL * abs(estimate):
            return estimate
        previous = estimate
    raise ConvergenceError(
        f"Power iteration did not converge within {POWER_ITERATION_CAP} iterations."
    )


def diameter(g: Graph) -> int:
    """Largest shortest-path hop count over node pairs (all-pairs BFS)."""
    longest = 0
    for source, lengths in nx.all_pairs_shortest_path_length(g.to_networkx()):
        if len(lengths) < g.n_nodes:
            raise ConnectivityError(f"Node {source} cannot reach every node; diameter is infinite.")
        longest = max(longest, max(lengths.values()))
    return longest


def sample_realization(g: Graph, p: float, rng: np.random.Generator) -> GraphRealization:
    """Erase each undirected edge independently with probability ``p``."""
    if not 0.0 <= p < 1.0:
        raise DomainError(f"Erasure probability must lie in [0, 1), got {p}.")
    if p == 0.0:
        mask = np.ones(g.edge_count, dtype=bool)
    else:
        mask = rng.random(g.edge_count) >= p
    return GraphRealization(base=g, active_mask=mask)


@lru_cache(maxsize=128)
def _walk_counts(g: Graph, t: int) -> np.ndarray:
    a = np.array(g.adjacency.tolist(), dtype=object)
    return np.linalg.matrix_power(a, t)


def adjacency_power_entry(g: Graph, t: int, i: int, j: int) -> int:
    """Number of length-``t`` walks between ``j`` and ``i`` (exact)."""
    if t < 0:
        raise DomainError(f"Walk length must be non-negative, got {t}.")
    value = int(_walk_counts(g, t)[i, j])
    if value > INT64_MAX:
        raise RangeError(f"[A^{t}]_({i},{j}) exceeds the 64-bit integer range.")
    return value


def count_self_loop_paths(g: Graph, t: int, l: int, i: int, j: int) -> int:
    """Paths of ``t`` steps from ``j`` to ``i`` with exactly ``l`` self-loops."""
    if not 0 <= l <= t:
        raise DomainError(f"Need 0 <= l <= t, got l={l}, t={t}.")
    value = math.comb(t, l) * adjacency_power_entry(g, t - l, i, j)
    if value > INT64_MAX:
        raise RangeError(f"Self-loop path count for t={t}, l={l} exceeds the 64-bit range.")
    return value


def degree_histogram(g: Graph) -> dict[int, int]:
    return dict(sorted(Counter(g.degrees).items()))


def _edges_within(distances: np.ndarray, n_nodes: int, radius: float) -> list[tuple[int, int]]:
    rows, cols = np.triu_indices(n_nodes, k=1)
    keep = distances <= radius
    return list(zip(rows[keep].tolist(), cols[keep].tolist()))


def benchmark_graph(
    n_nodes: int = 75,
    seed: int = 0,
    radius: float | None = None,
    target_rho: float | None = None,
) -> Graph:
    """Random geometric graph on the unit square.

    With neither ``radius`` nor ``target_rho`` the radius is the smallest one
    that connects the points. ``target_rho`` picks the smallest radius whose
    graph reaches that spectral radius.
    """
    if n_nodes < 2:
        raise DomainError(f"Benchmark graph needs at least 2 nodes, got {n_nodes}.")
    points = np.random.default_rng(seed).random((n_nodes, 2))
    distances = pdist(points)
    connecting = float(minimum_spanning_tree(squareform(distances)).max())

    if radius is not None:
        if radius < connecting:
            raise ConnectivityError(
                f"Radius {radius} is below the connecting radius {connecting:.6f}."
            )
        return build_graph(n_nodes, _edges_within(distances, n_nodes, radius))

    if target_rho is None:
        return build_graph(n_nodes, _edges_within(distances, n_nodes, connecting))

    if target_rho > n_nodes - 1:
        raise DomainError(f"No graph on {n_nodes} nodes reaches spectral radius {target_rho}.")
    candidates = np.unique(distances[distances >= connecting])
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        g = build_graph(n_nodes, _edges_within(distances, n_nodes, candidates[mid]))
        if spectral_radius(g) >= target_rho:
            hi = mid
        else:
            lo = mid + 1
    g = build_graph(n_nodes, _edges_within(distances, n_nodes, candidates[lo]))
    logger.info(
        "Benchmark graph n=%d seed=%d radius=%.6f rho=%.4f", n_nodes, seed, candidates[lo], spectral_radius(g)
    )
    return g


def erdos_renyi_graph(
    n_nodes: int,
    edge_probability: float,
    seed: int = 0,
    max_attempts: int = 200,
) -> Graph:
    """Connected G(n, q) sample, redrawn from derived seeds until connected."""
    if not 0.0 < edge_probability <= 1.0:
        raise DomainError(f"Edge probability must lie in (0, 1], got {edge_probability}.")
    for attempt in range(max_attempts):
        candidate = nx.gnp_random_graph(n_nodes, edge_probability, seed=seed + attempt)
        if nx.is_connected(candidate):
            return build_graph(n_nodes, candidate.edges())
    raise ConnectivityError(
        f"No connected G({n_nodes}, {edge_probability}) sample in {max_attempts} attempts."
    )


def read_graph(path: str | Path, one_indexed: bool = False) -> Graph:
    """Read the ``N E`` header + ``i j`` edge-list format."""
    return parse_graph(Path(path).read_text(encoding="utf-8"), one_indexed=one_indexed)


def parse_graph(text: str, one_indexed: bool = False) -> Graph:
    lines = [
        (number, line.split())
        for number, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise GraphValidationError("Graph file is empty.")
    number, header = lines[0]
    try:
        n_nodes, n_edges = (int(v) for v in header)
    except ValueError:
        raise GraphValidationError(f"Line {number}: expected header 'N E', got {' '.join(header)!r}.")

    offset = 1 if one_indexed else 0
    edges = []
    for number, parts in lines[1:]:
        try:
            i, j = (int(v) - offset for v in parts)
        except ValueError:
            raise GraphValidationError(f"Line {number}: expected 'i j', got {' '.join(parts)!r}.")
        edges.append((i, j))
    if len(edges) != n_edges:
        raise GraphValidationError(f"Header announces {n_edges} edges but {len(edges)} were listed.")
    return build_graph(n_nodes, edges)


def format_graph(g: Graph) -> str:
    lines = [f"{g.n_nodes} {g.edge_count}"]
    lines.extend(f"{i} {j}" for i, j in g.edges)
    return "\n".join(lines) + "\n"


def write_graph(g: Graph, path: str | Path) -> None:
    Path(path).write_text(format_graph(g), encoding="utf-8")


@lru_cache(maxsize=8)
def load_bundled_graph(name: str) -> Graph:
    """Load a topology shipped in ``maxcons.data``."""
    data_files = resources.files("maxcons.data")
    graph_file = data_files.joinpath(f"{name}.txt")
    if not graph_file.is_file():
        raise GraphValidationError(f"No bundled graph named {name!r}.")
    return parse_graph(graph_file.read_text(encoding="utf-8"))
