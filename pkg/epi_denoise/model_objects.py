"""Dataclasses shared by the graph, denoiser, epidemic and harness modules."""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

if TYPE_CHECKING:
    from .graph import Graph


def _vector(values, name: str, length: Optional[int] = None) -> np.ndarray:
    array = np.asarray(values, dtype=float).reshape(-1).copy()
    if length is not None and array.size != length:
        raise ValueError(f"{name} has length {array.size}, expected {length}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpectralSummary:
    """Spectral quantities of a graph Laplacian."""

    lambda2: float
    rho: float
    rho_mode: str
    d_max: int
    connected: bool


@dataclass(frozen=True)
class SolverConfig:
    """ADMM settings for the TV denoiser."""

    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    max_iter: int = 50_000
    admm_penalty: float = 1.0
    adaptive_penalty: bool = True

    def __post_init__(self) -> None:
        """Validate tolerances and iteration budget."""
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.admm_penalty <= 0:
            raise ValueError("admm_penalty must be positive")


@dataclass(frozen=True)
class CvConfig:
    """Node-holdout cross-validation settings."""

    lambda_grid: Tuple[float, ...] = tuple(np.logspace(-4, 0, 20).tolist())
    holdout_fraction: float = 0.2
    folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the grid and the holdout fraction."""
        grid = tuple(float(value) for value in self.lambda_grid)
        if not grid:
            raise ValueError("lambda grid is empty")
        if any(value < 0 for value in grid) or any(
            b <= a for a, b in zip(grid, grid[1:])
        ):
            raise ValueError("lambda grid must be nonnegative and increasing")
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be at least 1")
        object.__setattr__(self, "lambda_grid", grid)


@dataclass(frozen=True)
class LambdaPolicy:
    """How the regularization level is chosen.

    kind is one of 'fixed', 'theory', 'theory-missing', 'cv'.
    """

    kind: str = "cv"
    value: Optional[float] = None
    delta: float = 0.05
    rho_mode: str = "bound"
    cv: CvConfig = field(default_factory=CvConfig)

    def __post_init__(self) -> None:
        """Check that a fixed policy carries a value."""
        if self.kind not in ("fixed", "theory", "theory-missing", "cv"):
            raise ValueError(f"Unknown lambda policy '{self.kind}'")
        if self.kind == "fixed" and (self.value is None or self.value < 0):
            raise ValueError("fixed lambda policy needs a nonnegative value")


@dataclass(frozen=True, eq=False)
class DenoiseProblem:
    """Weighted one-bit TV problem.

    Minimize sum_i a_i (t_i - p_i)^2 + lam * sum_e b_e |(Dp)_e| over [0,1]^n.

    Attributes
    ----------
    targets (np.ndarray): t, length n.
    node_weights (np.ndarray): a >= 0, length n, not all zero.
    edge_weights (np.ndarray): b >= 0, length m.
    lam (float): Regularization level >= 0.
    graph (Graph): Graph supplying D.
    labels (tuple, optional): Node labels for reporting.
    """

    targets: np.ndarray
    node_weights: np.ndarray
    edge_weights: np.ndarray
    lam: float
    graph: "Graph"
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        """Validate shapes and signs."""
        n, m = self.graph.n, self.graph.m
        object.__setattr__(self, "targets", _vector(self.targets, "targets", n))
        node_weights = _vector(self.node_weights, "node_weights", n)
        edge_weights = _vector(self.edge_weights, "edge_weights", m)
        if np.any(node_weights < 0) or not np.any(node_weights > 0):
            raise ValueError("node weights must be nonnegative and not all zero")
        if np.any(edge_weights < 0):
            raise ValueError("edge weights must be nonnegative")
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels must have one entry per node")
        object.__setattr__(self, "node_weights", node_weights)
        object.__setattr__(self, "edge_weights", edge_weights)
        object.__setattr__(self, "lam", float(self.lam))

    def weighted_mean(self) -> float:
        """Node-weighted mean of the targets, the solver's starting point."""
        return float(np.dot(self.node_weights, self.targets) / self.node_weights.sum())


@dataclass(frozen=True, eq=False)
class DenoiseResult:
    """Outcome of a TV denoising solve."""

    p_hat: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    lambda_used: float


@dataclass(frozen=True, eq=False)
class EpidemicParams:
    """Per-node infection rates beta, healing rates gamma and weight matrix omega."""

    beta: np.ndarray
    gamma: np.ndarray
    omega: sp.csr_matrix

    def __post_init__(self) -> None:
        """Broadcast scalar rates and check shapes, signs and symmetry."""
        omega = sp.csr_matrix(self.omega, dtype=float)
        n = omega.shape[0]
        if omega.shape != (n, n):
            raise ValueError("omega must be square")
        if omega.nnz and (omega.data.min() < 0 or np.any(omega.diagonal() != 0)):
            raise ValueError("omega must be nonnegative with a zero diagonal")
        if omega.nnz and abs(omega - omega.T).max() > 1e-12:
            raise ValueError("omega must be symmetric")
        beta = _vector(np.broadcast_to(self.beta, (n,)), "beta", n)
        gamma = _vector(np.broadcast_to(self.gamma, (n,)), "gamma", n)
        if np.any(beta < 0) or np.any(gamma < 0):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_graph(cls, g: "Graph", beta, gamma) -> "EpidemicParams":
        """Use the graph's weight matrix as omega."""
        return cls(beta, gamma, g.weight_matrix)

    @property
    def n(self) -> int:
        """Number of nodes."""
        return self.omega.shape[0]


@dataclass(frozen=True)
class AssumptionReport:
    """Result of checking gamma_i < 1 and beta_i * sum_j omega_ij < 1.

    violations lists (node, quantity, value) sorted worst first.
    """

    ok: bool
    violations: List[Tuple[int, str, float]]


@dataclass(frozen=True, eq=False)
class EpidemicState:
    """Infection probabilities p and, for SIR, recovered probabilities r."""

    p: np.ndarray
    r: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        """Check the [0,1] range and p + r <= 1."""
        p = _vector(self.p, "p")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("state p must lie in [0,1]")
        object.__setattr__(self, "p", p)
        if self.r is not None:
            r = _vector(self.r, "r", p.size)
            if np.any(r < 0) or np.any(p + r > 1 + 1e-12):
                raise ValueError("SIR state needs r >= 0 and p + r <= 1")
            object.__setattr__(self, "r", r)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """One snapshot of binary test results."""

    y: np.ndarray
    mask: np.ndarray
    alpha: float = 0.0
    pi: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        """Check binary entries and matching lengths."""
        y = _vector(self.y, "y")
        mask = _vector(self.mask, "mask", y.size)
        if not np.all(np.isin(y, (0.0, 1.0))) or not np.all(np.isin(mask, (0.0, 1.0))):
            raise ValueError("y and mask must be binary")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mask", mask)

    @property
    def fully_observed(self) -> bool:
        """Whether every node was observed."""
        return bool(np.all(self.mask == 1))

    def naive_estimate(self) -> np.ndarray:
        """Raw observations with unobserved entries set to 0."""
        return self.y * self.mask


@dataclass(frozen=True, eq=False)
class PhiSystem:
    """Stacked linear system delta_p = phi @ [beta, gamma]."""

    phi: np.ndarray
    delta_p: np.ndarray
    times_used: Tuple[int, ...]


@dataclass(frozen=True)
class ParamEstimate:
    """Least-squares estimate of (beta, gamma) and the reproductive number."""

    beta_hat: float
    gamma_hat: float
    r0_hat: Optional[float]
    residual_norm: float
    rank_flag: str


@dataclass(frozen=True)
class RiskRates:
    """Order of the l2 and l1 risk for a topology, up to constants."""

    l2: float
    l1: float


@dataclass
class ExperimentConfig:
    """Scenario description for the experiment harness."""

    scenario: str
    graph_model: str = "knn"
    graph_params: Dict[str, Any] = field(default_factory=lambda: {"k": 5})
    n: int = 1000
    edge_list: Optional[str] = None
    one_based: bool = False
    beta: List[float] = field(default_factory=lambda: [0.5])
    gamma: float = 0.1
    k0: List[int] = field(default_factory=lambda: [30])
    replicates: int = 1
    lambda_policy: LambdaPolicy = field(default_factory=LambdaPolicy)
    missing_fraction: List[float] = field(default_factory=lambda: [0.0])
    pi: Optional[List[float]] = None
    alpha: List[float] = field(default_factory=lambda: [0.0])
    fp_rescale: bool = False
    horizon: int = 2
    window: int = 10
    noiseless: bool = False
    seed: int = 0
    out: str = "report.csv"
    format: str = "csv"
    workers: int = 1
    shared_lambda: bool = False
    unchecked: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    cases: Optional[str] = None
    adjacency: Optional[str] = None


@dataclass
class Report:
    """Detail rows and aggregate statistics of one experiment.

    Attributes
    ----------
    scenario (str): Scenario name.
    columns (List[str]): Detail column order.
    rows (List[Dict]): One row per replicate, grid point and method.
    metrics (List[str]): Columns that are aggregated.
    group_keys (List[str]): Columns that identify a grid point.
    aggregates (List[Dict]): Filled in by the Reporter.
    nonconverged (int): Number of solves that hit max_iter.
    """

    scenario: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    metrics: List[str] = field(default_factory=list)
    group_keys: List[str] = field(default_factory=list)
    aggregates: List[Dict[str, Any]] = field(default_factory=list)
    nonconverged: int = 0


@dataclass(frozen=True, eq=False)
class SignalSummary:
    """Sparsity of a signal and of its graph differences.

    Attributes
    ----------
    support_size (int): s = ||p||_0.
    tv_l1 (float): ||Dp||_1.
    tv_l0 (int): ||Dp||_0.
    edge_support (np.ndarray): Indices of edges with (Dp)_e != 0.
    """

    support_size: int
    tv_l1: float
    tv_l0: int
    edge_support: np.ndarray
