"""Contact graphs: construction, random generators and spectral quantities.

The `Graph` class is an immutable undirected graph with optional edge weights.
Module level functions build graphs (`generate_graph`, `load_edge_list`),
derive the incidence matrix and Laplacian, and compute the quantities that
parameterize the regularization level and risk bounds of the denoiser
(Fiedler value, inverse scaling factor, compatibility factor bound).
"""

import logging
import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import EdgeListError, SpectralError
from .model_objects import SpectralSummary
from .seeding import make_rng

logger = logging.getLogger(__name__)

EXACT_RHO_MAX_NODES = 2000
DENSE_EIGEN_MAX_NODES = 500

GRAPH_MODELS = {
    "erdos_renyi": ("p",),
    "knn": ("k",),
    "small_world": ("m", "p"),
    "preferential_attachment": ("m",),
    "sbm": ("sizes", "probs"),
    "grid2d": ("rows", "cols"),
    "star": (),
    "complete": (),
    "path": (),
    "cycle": (),
}


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph on nodes 0..n-1.

    Attributes
    ----------
    n (int): Number of nodes.
    edges (np.ndarray): (m, 2) array of node pairs, stored as (min, max).
    weights (np.ndarray | None): Positive edge weights in (0, 1], one per edge.
    """

    n: int
    edges: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        """Normalize the edge array and validate the graph invariants."""
        if int(self.n) < 1:
            raise ValueError(f"Graph needs at least one node, got n={self.n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise ValueError(f"Edge endpoint outside 0..{self.n - 1}")
        if np.any(edges[:, 0] == edges[:, 1]):
            loop = edges[edges[:, 0] == edges[:, 1]][0]
            raise ValueError(f"Self-loop at node {loop[0]}")
        edges = np.sort(edges, axis=1)
        keys = edges[:, 0] * self.n + edges[:, 1]
        if np.unique(keys).size != keys.size:
            raise ValueError("Duplicate edges")
        edges.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", edges)

        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if weights.size != edges.shape[0]:
                raise ValueError(
                    f"Got {weights.size} weights for {edges.shape[0]} edges"
                )
            if np.any(weights <= 0) or np.any(weights > 1):
                raise ValueError("Edge weights must lie in (0, 1]")
            weights.setflags(write=False)
            object.__setattr__(self, "weights", weights)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Tuple[int, int]],
        weights: Optional[Sequence[float]] = None,
    ) -> "Graph":
        """Build a graph from an iterable of node pairs."""
        edge_list = [tuple(edge) for edge in edges]
        return cls(n, np.array(edge_list, dtype=np.int64).reshape(-1, 2), weights)

    @classmethod
    def from_networkx(cls, nx_graph: nx.Graph) -> "Graph":
        """Convert a networkx graph with integer nodes 0..n-1, edges sorted."""
        n = nx_graph.number_of_nodes()
        edges = sorted((min(u, v), max(u, v)) for u, v in nx_graph.edges())
        return cls.from_edges(n, edges)

    @property
    def m(self) -> int:
        """Number of edges."""
        return int(self.edges.shape[0])

    @cached_property
    def degrees(self) -> np.ndarray:
        """Unweighted node degrees."""
        return np.bincount(self.edges.ravel(), minlength=self.n)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Unweighted symmetric adjacency matrix."""
        return self._symmetric(np.ones(self.m))

    @cached_property
    def weight_matrix(self) -> sp.csr_matrix:
        """Symmetric weight matrix, unit weights when the graph is unweighted."""
        if self.weights is None:
            return self.adjacency
        return self._symmetric(self.weights)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Signed edge-node incidence matrix, cached."""
        rows = np.repeat(np.arange(self.m), 2)
        cols = self.edges.ravel()
        vals = np.tile([1.0, -1.0], self.m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.m, self.n))

    def _symmetric(self, values: np.ndarray) -> sp.csr_matrix:
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.concatenate([values, values])
        return sp.csr_matrix(
            (data, (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n, self.n),
        )

    def components(self) -> List[np.ndarray]:
        """Node index arrays of the connected components, in label order."""
        count, labels = connected_components(self.adjacency, directed=False)
        return [np.flatnonzero(labels == label) for label in range(count)]

    def is_connected(self) -> bool:
        """Whether the graph has a single connected component."""
        count, _ = connected_components(self.adjacency, directed=False)
        return count == 1

    def subgraph(self, nodes: np.ndarray) -> Tuple["Graph", np.ndarray]:
        """Induced subgraph relabelled to 0..len(nodes)-1.

        Returns
        -------
            Graph: The induced subgraph.
            np.ndarray: Indices (into self.edges) of the kept edges.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[nodes] = np.arange(nodes.size)
        keep = np.flatnonzero(
            (relabel[self.edges[:, 0]] >= 0) & (relabel[self.edges[:, 1]] >= 0)
        )
        weights = None if self.weights is None else self.weights[keep]
        return Graph(nodes.size, relabel[self.edges[keep]], weights), keep

    def relabel(self, permutation: Sequence[int]) -> "Graph":
        """Graph with node i renamed to permutation[i]; edge order is preserved."""
        perm = np.asarray(permutation, dtype=np.int64)
        if np.sort(perm).tolist() != list(range(self.n)):
            raise ValueError("relabel expects a permutation of 0..n-1")
        return Graph(self.n, perm[self.edges], self.weights)

    def with_weights(self, weights: Optional[np.ndarray]) -> "Graph":
        """Same topology with new edge weights."""
        return Graph(self.n, self.edges, weights)

    def to_networkx(self) -> nx.Graph:
        """Convert to a networkx graph, keeping weights as edge attributes."""
        nx_graph = nx.Graph()
        nx_graph.add_nodes_from(range(self.n))
        if self.weights is None:
            nx_graph.add_edges_from(map(tuple, self.edges.tolist()))
        else:
            nx_graph.add_weighted_edges_from(
                (int(i), int(j), float(w))
                for (i, j), w in zip(self.edges, self.weights)
            )
        return nx_graph


def _check_range(name: str, value: float, low: float, high: float) -> None:
    if not low <= value <= high:
        raise ValueError(f"{name}={value} outside [{low}, {high}]")


def _knn_graph(n: int, k: int, seed: int) -> Graph:
    """Symmetrized k-nearest-neighbour graph on n uniform points in [0,1]^2."""
    rng = make_rng(seed)
    points = rng.uniform(size=(n, 2))
    _, neighbours = cKDTree(points).query(points, k=k + 1)
    pairs = set()
    for i, row in enumerate(neighbours):
        for j in row:
            if j != i:
                pairs.add((min(i, int(j)), max(i, int(j))))
    return Graph.from_edges(n, sorted(pairs))


def generate_graph(model: str, n: int, seed: int = 0, **params) -> Graph:
    """Generate a graph of the requested family.

    Args:
    ----
        model (str): One of GRAPH_MODELS.
        n (int): Number of nodes.
        seed (int): Seed; the output is a pure function of (model, n, params, seed).
        **params: Model parameters, see GRAPH_MODELS.

    Returns:
    -------
        Graph: Generated graph with edges in lexicographic order.
    """
    if model not in GRAPH_MODELS:
        raise ValueError(f"Unknown graph model '{model}'")
    expected = set(GRAPH_MODELS[model])
    if set(params) != expected:
        raise ValueError(
            f"Model '{model}' takes parameters {sorted(expected)}, got {sorted(params)}"
        )
    if n < 2:
        raise ValueError(f"Graph generators need n >= 2, got {n}")

    match model:
        case "erdos_renyi":
            _check_range("p", params["p"], 0.0, 1.0)
            nx_graph = nx.gnp_random_graph(n, params["p"], seed=seed)
        case "knn":
            k = int(params["k"])
            if not 1 <= k < n:
                raise ValueError(f"knn needs 1 <= k < n, got k={k}, n={n}")
            return _knn_graph(n, k, seed)
        case "small_world":
            m = int(params["m"])
            _check_range("p", params["p"], 0.0, 1.0)
            if not 2 <= m < n:
                raise ValueError(f"small_world needs 2 <= m < n, got m={m}, n={n}")
            nx_graph = nx.watts_strogatz_graph(n, m, params["p"], seed=seed)
        case "preferential_attachment":
            m = int(params["m"])
            if not 1 <= m < n:
                raise ValueError(f"preferential_attachment needs 1 <= m < n, got m={m}")
            nx_graph = nx.barabasi_albert_graph(n, m, seed=seed)
        case "sbm":
            sizes = [int(size) for size in params["sizes"]]
            probs = np.asarray(params["probs"], dtype=float)
            if sum(sizes) != n:
                raise ValueError(f"sbm block sizes sum to {sum(sizes)}, expected {n}")
            if probs.shape != (len(sizes), len(sizes)) or not np.allclose(
                probs, probs.T
            ):
                raise ValueError("sbm probs must be a symmetric blocks x blocks matrix")
            _check_range("probs", float(probs.min()), 0.0, 1.0)
            _check_range("probs", float(probs.max()), 0.0, 1.0)
            nx_graph = nx.stochastic_block_model(sizes, probs.tolist(), seed=seed)
            nx_graph = nx.Graph(nx_graph)
        case "grid2d":
            rows, cols = int(params["rows"]), int(params["cols"])
            if rows * cols != n:
                raise ValueError(f"grid2d {rows}x{cols} does not have n={n} nodes")
            nx_graph = nx.convert_node_labels_to_integers(
                nx.grid_2d_graph(rows, cols), ordering="sorted"
            )
        case "star":
            nx_graph = nx.star_graph(n - 1)
        case "complete":
            nx_graph = nx.complete_graph(n)
        case "path":
            nx_graph = nx.path_graph(n)
        case "cycle":
            if n < 3:
                raise ValueError("cycle needs n >= 3")
            nx_graph = nx.cycle_graph(n)

    return Graph.from_networkx(nx_graph)


def incidence_matrix(g: Graph) -> sp.csr_matrix:
    """Edge-node incidence matrix D: +1 at min(i, j), -1 at max(i, j)."""
    return g.incidence


def laplacian(g: Graph) -> sp.csr_matrix:
    """Unnormalized Laplacian diag(A1) - A of the unweighted graph."""
    return (sp.diags(g.degrees.astype(float)) - g.adjacency).tocsr()


def fiedler_value(g: Graph) -> float:
    """Second-smallest eigenvalue of the unweighted Laplacian.

    Disconnected graphs report 0.0. Graphs up to DENSE_EIGEN_MAX_NODES nodes use a
    dense symmetric eigensolver; larger ones use networkx's TraceMIN-Fiedler
    iteration, which deflates the constant eigenvector.
    """
    if g.n < 2:
        raise ValueError("fiedler_value needs n >= 2")
    if not g.is_connected():
        logger.debug("graph with %d nodes is disconnected, lambda2 = 0", g.n)
        return 0.0
    if g.n <= DENSE_EIGEN_MAX_NODES:
        eigenvalues = scipy.linalg.eigvalsh(
            laplacian(g).toarray(), subset_by_index=[0, 1]
        )
        return float(eigenvalues[1])
    try:
        return float(
            nx.algebraic_connectivity(
                g.to_networkx(),
                weight=None,
                normalized=False,
                tol=1e-10,
                method="tracemin_lu",
                seed=0,
            )
        )
    except (nx.NetworkXError, np.linalg.LinAlgError, ArithmeticError) as exc:
        raise SpectralError(
            f"Fiedler eigen-solver failed on a graph with n={g.n}, m={g.m}: {exc}"
        ) from exc


def inverse_scaling_factor(
    g: Graph, mode: str = "bound", max_nodes: int = EXACT_RHO_MAX_NODES
) -> float:
    """Inverse scaling factor rho of the incidence matrix.

    Args:
    ----
        g (Graph): Connected graph.
        mode (str): 'exact' computes the largest column norm of pinv(D) through
            the Laplacian pseudoinverse; 'bound' returns sqrt(2) / lambda2.
        max_nodes (int): Size cap for exact mode (dense O(n^3) work).

    Returns:
    -------
        float: rho.
    """
    if mode not in ("exact", "bound"):
        raise ValueError(f"Unknown rho mode '{mode}'")
    if not g.is_connected():
        raise ValueError("inverse_scaling_factor needs a connected graph")
    if mode == "bound":
        return math.sqrt(2.0) / fiedler_value(g)
    if g.n > max_nodes:
        raise ValueError(
            f"Exact rho forms a dense pseudoinverse; n={g.n} exceeds cap {max_nodes}"
        )
    # pinv(D) = pinv(L) D^T, so column e is pinv(L)(e_i - e_j)
    l_pinv = scipy.linalg.pinvh(laplacian(g).toarray())
    gram = l_pinv @ l_pinv
    i, j = g.edges[:, 0], g.edges[:, 1]
    norms_sq = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
    return float(np.sqrt(np.max(np.clip(norms_sq, 0.0, None))))


def spectral_summary(g: Graph, rho_mode: str = "bound") -> SpectralSummary:
    """Collect lambda2, rho and the maximum degree of a graph."""
    lambda2 = fiedler_value(g)
    connected = lambda2 > 0
    rho = inverse_scaling_factor(g, rho_mode) if connected else math.inf
    return SpectralSummary(
        lambda2=lambda2,
        rho=rho,
        rho_mode=rho_mode,
        d_max=int(g.degrees.max()) if g.m else 0,
        connected=connected,
    )


def compatibility_factor_bound(g: Graph, t_size: int) -> float:
    """Lower bound 1 / (2 min(sqrt(d_max), sqrt(|T|))) on the compatibility factor."""
    if t_size < 1:
        raise ValueError("compatibility factor needs |T| >= 1")
    d_max = int(g.degrees.max())
    if d_max == 0:
        raise ValueError("compatibility factor is undefined on a graph without edges")
    return 1.0 / (2.0 * min(math.sqrt(d_max), math.sqrt(t_size)))


def contact_weights(g: Graph) -> Graph:
    """Weight every edge by 1 / max(d_i, d_j)."""
    d = g.degrees
    weights = 1.0 / np.maximum(d[g.edges[:, 0]], d[g.edges[:, 1]])
    return g.with_weights(weights)


_SEPARATOR = re.compile(r"[,\s]+")


def load_edge_list(
    path: str, one_based: bool = False, n: Optional[int] = None
) -> Graph:
    """Read an edge list of 'i j [w]' lines separated by whitespace or commas.

    Args:
    ----
        path (str): Edge-list file. Blank lines and '#' comments are skipped.
        one_based (bool): Node ids in the file start at 1.
        n (int, optional): Node count; defaults to the largest id + 1.

    Returns:
    -------
        Graph: Deduplicated undirected graph; weighted if any line has a third column.
    """
    offset = 1 if one_based else 0
    seen: Dict[Tuple[int, int], Optional[float]] = {}
    with open(path, encoding="utf-8") as edge_file:
        for line_number, raw_line in enumerate(edge_file, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = _SEPARATOR.split(line)
            if len(fields) not in (2, 3):
                raise EdgeListError(f"expected 'i j [w]', got '{line}'", line_number)
            try:
                i, j = int(fields[0]) - offset, int(fields[1]) - offset
                weight = float(fields[2]) if len(fields) == 3 else None
            except ValueError as exc:
                raise EdgeListError(str(exc), line_number) from exc
            if i < 0 or j < 0:
                raise EdgeListError(f"negative node id in '{line}'", line_number)
            if i == j:
                raise EdgeListError(f"self-loop at node {fields[0]}", line_number)
            if weight is not None and not 0.0 < weight <= 1.0:
                raise EdgeListError(f"weight {fields[2]} outside (0, 1]", line_number)
            key = (min(i, j), max(i, j))
            if key in seen and seen[key] != weight:
                raise EdgeListError(
                    f"edge {fields[0]}-{fields[1]} repeated with a different weight",
                    line_number,
                )
            seen[key] = weight

    node_count = max((j for _, j in seen), default=-1) + 1
    if n is not None:
        if n < node_count:
            raise EdgeListError(f"node id {node_count - 1 + offset} exceeds n={n}")
        node_count = n
    weights = list(seen.values())
    if any(w is None for w in weights) and not all(w is None for w in weights):
        raise EdgeListError("some edges have weights and some do not")
    graph_weights = None if not weights or weights[0] is None else weights
    logger.debug("loaded %d edges on %d nodes from %s", len(seen), node_count, path)
    return Graph.from_edges(max(node_count, 1), seen.keys(), graph_weights)


def write_edge_list(g: Graph, path: str, one_based: bool = False) -> None:
    """Write a graph in the format read by load_edge_list."""
    offset = 1 if one_based else 0
    with open(path, "w", encoding="utf-8") as edge_file:
        for index, (i, j) in enumerate(g.edges.tolist()):
            line = f"{i + offset} {j + offset}"
            if g.weights is not None:
                line += f" {float(g.weights[index])!r}"
            edge_file.write(line + "\n")
