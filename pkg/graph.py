#!/usr/bin/env python3
"""
Mesh network topologies and the matrix operators built from them.

Node indices are 0-based inside the library; from_edges() and the text edge-list
format use 1-based indices.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from config import RGG_RETRY_CAP
from logger import get_logger

logger = get_logger('graph')

EIGEN_TOL = 1e-10


class GraphError(Exception):
    """Base error for topology construction"""


class InvalidEdge(GraphError):
    pass


class DisconnectedGraph(GraphError):
    pass


class ConnectivityRetryExhausted(GraphError):
    pass


@dataclass(frozen=True)
class Topology:
    n_agents: int
    dim_m: int
    edges: Tuple[Tuple[int, int], ...]
    degrees: Tuple[int, ...]
    positions: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    retries: int = 0

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> List[int]:
        return [b if a == i else a for a, b in self.edges if i in (a, b)]

    def to_text(self) -> str:
        """Serialize as a plain edge list: "N M" then one "i j" line per edge (1-based)"""
        lines = [f"{self.n_agents} {self.dim_m}"]
        lines.extend(f"{i + 1} {j + 1}" for i, j in self.edges)
        return "\n".join(lines) + "\n"


def from_text(text: str) -> Topology:
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise GraphError("edge list must start with a 'N M' header line")
    n_agents, dim_m = int(rows[0][0]), int(rows[0][1])
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise InvalidEdge(f"line {lineno}: expected 'i j', got {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
    return from_edges(n_agents, dim_m, edges)


def _is_connected(n_agents: int, edges: Iterable[Tuple[int, int]]) -> bool:
    g = nx.Graph()
    g.add_nodes_from(range(n_agents))
    g.add_edges_from(edges)
    return nx.is_connected(g)


def _canonical(n_agents: int, edges: Iterable[Tuple[int, int]], one_based: bool) -> List[Tuple[int, int]]:
    offset = 1 if one_based else 0
    canonical = set()
    for edge in edges:
        i, j = int(edge[0]) - offset, int(edge[1]) - offset
        if i == j:
            raise InvalidEdge(f"self-loop at node {i + offset}")
        if not (0 <= i < n_agents and 0 <= j < n_agents):
            raise InvalidEdge(f"edge ({i + offset}, {j + offset}) out of range for N={n_agents}")
        canonical.add((min(i, j), max(i, j)))
    return sorted(canonical)


def from_edges(n_agents: int, dim_m: int, edges: Sequence[Tuple[int, int]], one_based: bool = True) -> Topology:
    """Build a canonical Topology: oriented i<j, deduplicated, lexicographically sorted"""
    if n_agents < 2:
        raise GraphError(f"a mesh network needs at least 2 agents, got {n_agents}")
    if dim_m < 1:
        raise GraphError(f"dim_m must be positive, got {dim_m}")

    canonical = _canonical(n_agents, edges, one_based)
    if not _is_connected(n_agents, canonical):
        raise DisconnectedGraph(f"graph with N={n_agents} and {len(canonical)} edges is not connected")

    degrees = np.zeros(n_agents, dtype=int)
    for i, j in canonical:
        degrees[i] += 1
        degrees[j] += 1
    return Topology(n_agents, dim_m, tuple(canonical), tuple(int(d) for d in degrees))


def random_geometric(n_agents: int, dim_m: int, radius: float, seed: int,
                     retry_cap: int = RGG_RETRY_CAP) -> Topology:
    """
    Sample nodes uniformly on the unit square and connect pairs closer than radius.

    Disconnected samples are redrawn with an incremented sub-seed.
    """
    if radius <= 0:
        raise GraphError(f"radius must be positive, got {radius}")

    for attempt in range(retry_cap + 1):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))
        positions = rng.uniform(0.0, 1.0, size=(n_agents, 2))
        dist = squareform(pdist(positions))
        rows, cols = np.nonzero(np.triu(dist < radius, k=1))
        edges = list(zip(rows.tolist(), cols.tolist()))
        if edges and _is_connected(n_agents, edges):
            topo = from_edges(n_agents, dim_m, edges, one_based=False)
            if attempt:
                logger.info(f"Random geometric graph N={n_agents} R={radius} connected after {attempt} resamples")
            return Topology(topo.n_agents, topo.dim_m, topo.edges, topo.degrees,
                            positions=positions, retries=attempt)

    raise ConnectivityRetryExhausted(
        f"no connected graph for N={n_agents}, R={radius}, seed={seed} after {retry_cap} resamples")


def incidence_matrix(topo: Topology) -> np.ndarray:
    a = np.zeros((topo.n_edges, topo.n_agents))
    for k, (i, j) in enumerate(topo.edges):
        a[k, i] = 1.0
        a[k, j] = -1.0
    return a


def signless_laplacian(incidence: np.ndarray, degree: np.ndarray) -> np.ndarray:
    return 2.0 * np.diag(degree) - incidence.T @ incidence


@dataclass(frozen=True)
class GraphOperators:
    """
    N x N operators of a topology. The extended (Kronecker with I_M) versions act
    blockwise on (N, M) arrays and are only materialized through the *_ext properties.
    """
    dim_m: int
    incidence: np.ndarray
    degree: np.ndarray
    signed_laplacian: np.ndarray
    signless_laplacian: np.ndarray
    mixing: np.ndarray
    sigma_min: float
    norm_lplus: float

    @property
    def n_agents(self) -> int:
        return self.incidence.shape[1]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[0]

    @cached_property
    def incidence_ext(self) -> np.ndarray:
        return np.kron(self.incidence, np.eye(self.dim_m))

    @cached_property
    def degree_ext(self) -> np.ndarray:
        return np.kron(np.diag(self.degree), np.eye(self.dim_m))

    @cached_property
    def neighbor_lists(self) -> Tuple[Tuple[int, ...], ...]:
        adjacency = np.abs(self.incidence).T @ np.abs(self.incidence)
        np.fill_diagonal(adjacency, 0.0)
        return tuple(tuple(np.nonzero(row)[0].tolist()) for row in adjacency)

    def apply_incidence(self, z: np.ndarray) -> np.ndarray:
        """A z for z of shape (N, M); returns (E, M)"""
        return self.incidence @ z

    def apply_incidence_t(self, lam: np.ndarray) -> np.ndarray:
        """A^T lambda for lambda of shape (E, M); returns (N, M)"""
        return self.incidence.T @ lam

    def apply_signed(self, z: np.ndarray) -> np.ndarray:
        return self.signed_laplacian @ z

    def apply_mixing(self, z: np.ndarray) -> np.ndarray:
        return self.mixing @ z

    def apply_inv_degree(self, z: np.ndarray) -> np.ndarray:
        return z / self.degree[:, None]


def derive_operators(topo: Topology) -> GraphOperators:
    a = incidence_matrix(topo)
    degree = np.asarray(topo.degrees, dtype=float)
    l_minus = a.T @ a
    l_plus = signless_laplacian(a, degree)
    mixing = 0.5 * (l_plus - l_minus) / degree[:, None]

    eig_minus = linalg.eigvalsh(l_minus)
    scale = max(1.0, float(np.max(np.abs(eig_minus))))
    nonzero = eig_minus[eig_minus > EIGEN_TOL * scale]
    sigma_min = float(nonzero.min())
    norm_lplus = float(np.max(np.abs(linalg.eigvalsh(l_plus))))

    logger.debug(f"Operators for N={topo.n_agents}, E={topo.n_edges}: "
                 f"sigma_min={sigma_min:.6g}, ||L+||={norm_lplus:.6g}")
    return GraphOperators(
        dim_m=topo.dim_m,
        incidence=a,
        degree=degree,
        signed_laplacian=l_minus,
        signless_laplacian=l_plus,
        mixing=mixing,
        sigma_min=sigma_min,
        norm_lplus=norm_lplus,
    )
