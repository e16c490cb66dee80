"""One-bit total-variation denoising on graphs.

The core problem is

    minimize  sum_i a_i (t_i - p_i)^2 + lam * sum_e b_e |(Dp)_e|   over p in [0,1]^n

with D the incidence matrix of the graph. `tv_denoise` (uniform weights 1/n),
`tv_denoise_masked` (weights m_i/n) and `tv_denoise_weighted` (arbitrary weights,
e.g. county populations) all end up in `TvAdmmSolver`, an ADMM iteration on the
split z = Dp. The solution is clamped to [0,1] afterwards; clamping never
increases the objective.
"""

import logging
import math
import time
import warnings
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import lsq_linear, minimize_scalar
from scipy.sparse.linalg import factorized

from .errors import DisconnectedGraphWarning
from .graph import Graph, inverse_scaling_factor, laplacian
from .model_objects import (
    CvConfig,
    DenoiseProblem,
    DenoiseResult,
    LambdaPolicy,
    SolverConfig,
)
from .seeding import STREAM_CV, SeedLike, make_rng

logger = logging.getLogger(__name__)

ORACLE_MAX_NODES = 8
ORACLE_MAX_EDGES = 12
ORACLE_SUBGRADIENT_STEPS = 100_000

ADAPT_EVERY = 10
ADAPT_UNTIL = 10_000
ADAPT_RATIO = 10.0
ADAPT_FACTOR = 2.0


def clamp_unit(p) -> np.ndarray:
    """Clamp every entry to [0, 1]."""
    return np.clip(np.asarray(p, dtype=float), 0.0, 1.0)


def objective_value(p, problem: DenoiseProblem) -> float:
    """Evaluate sum_i a_i (t_i - p_i)^2 + lam * sum_e b_e |(Dp)_e|."""
    p = np.asarray(p, dtype=float)
    if p.shape != (problem.graph.n,):
        raise ValueError(f"p has shape {p.shape}, expected ({problem.graph.n},)")
    fidelity = float(np.dot(problem.node_weights, (problem.targets - p) ** 2))
    if problem.graph.m == 0:
        return fidelity
    tv = float(np.dot(problem.edge_weights, np.abs(problem.graph.incidence @ p)))
    return fidelity + problem.lam * tv


def _fidelity_only(problem: DenoiseProblem) -> np.ndarray:
    """Minimizer without the TV term; unweighted nodes take the weighted mean."""
    return np.where(
        problem.node_weights > 0, problem.targets, problem.weighted_mean()
    ).astype(float)


class TvAdmmSolver:
    """ADMM for a TV problem on a connected graph.

    The p-update solves (2 diag(a) + rho L) p = 2 a t + rho D^T (z - u) with a
    sparse LU factorization that is reused until rho changes; the z-update is
    entrywise soft-thresholding at lam * b / rho.

    Attributes
    ----------
    problem (DenoiseProblem): Problem on a connected graph with some a_i > 0.
    config (SolverConfig): Tolerances, iteration budget and penalty.
    """

    def __init__(self, problem: DenoiseProblem, config: SolverConfig) -> None:
        """Normalize the node weights to mean one and precompute D and L."""
        self.problem = problem
        self.config = config
        scale = float(problem.node_weights.mean())
        self.a = problem.node_weights / scale
        self.thresholds = problem.lam * problem.edge_weights / scale
        self.incidence = problem.graph.incidence
        self.incidence_t = self.incidence.T.tocsr()
        self.laplacian = laplacian(problem.graph).tocsc()
        self.rho = config.admm_penalty * 2.0 * float(self.a.mean())
        self.factorizations = 0

    def _factorize(self):
        self.factorizations += 1
        system = (sp.diags(2.0 * self.a) + self.rho * self.laplacian).tocsc()
        return factorized(system)

    def solve(self) -> Tuple[np.ndarray, int, float, float, bool]:
        """Run ADMM from the weighted-mean starting point.

        Returns
        -------
            np.ndarray: Unclamped solution p.
            int: Iterations used.
            float: Normalized primal residual.
            float: Normalized dual residual.
            bool: Whether both residuals fell below tolerance.
        """
        cfg = self.config
        n, m = self.problem.graph.n, self.problem.graph.m
        target_term = 2.0 * self.a * self.problem.targets
        p = np.full(n, self.problem.weighted_mean())
        z = np.zeros(m)
        u = np.zeros(m)
        solve_linear = self._factorize()
        primal = dual = math.inf
        converged = False

        iteration = 0
        for iteration in range(1, cfg.max_iter + 1):
            p = solve_linear(target_term + self.rho * (self.incidence_t @ (z - u)))
            dp = self.incidence @ p
            z_old = z
            shifted = dp + u
            z = np.sign(shifted) * np.maximum(
                np.abs(shifted) - self.thresholds / self.rho, 0.0
            )
            u = u + dp - z

            primal_norm = np.linalg.norm(dp - z)
            dual_norm = self.rho * np.linalg.norm(self.incidence_t @ (z - z_old))
            primal = primal_norm / (
                math.sqrt(m) + max(np.linalg.norm(dp), np.linalg.norm(z))
            )
            dual = dual_norm / (
                math.sqrt(n) + self.rho * np.linalg.norm(self.incidence_t @ u)
            )
            if primal <= cfg.tol_primal and dual <= cfg.tol_dual:
                converged = True
                break

            if (
                cfg.adaptive_penalty
                and iteration % ADAPT_EVERY == 0
                and iteration <= ADAPT_UNTIL
            ):
                if primal > ADAPT_RATIO * dual:
                    self.rho *= ADAPT_FACTOR
                    u = u / ADAPT_FACTOR
                    solve_linear = self._factorize()
                elif dual > ADAPT_RATIO * primal:
                    self.rho /= ADAPT_FACTOR
                    u = u * ADAPT_FACTOR
                    solve_linear = self._factorize()

        return p, iteration, float(primal), float(dual), converged


def tv_denoise_weighted(
    problem: DenoiseProblem, cfg: Optional[SolverConfig] = None
) -> DenoiseResult:
    """Solve a weighted TV denoising problem.

    Disconnected graphs are solved one component at a time; components whose
    node weights are all zero take the weighted mean of the targets.

    Args:
    ----
        problem (DenoiseProblem): Targets, node/edge weights, lambda and graph.
        cfg (SolverConfig, optional): Solver settings.

    Returns:
    -------
        DenoiseResult: Clamped solution and solver diagnostics.
    """
    cfg = cfg or SolverConfig()
    started = time.perf_counter()
    g = problem.graph

    if problem.lam == 0 or g.m == 0:
        p = _fidelity_only(problem)
        iterations, primal, dual, converged = 0, 0.0, 0.0, True
    else:
        components = g.components()
        if len(components) == 1:
            p, iterations, primal, dual, converged = TvAdmmSolver(
                problem, cfg
            ).solve()
        else:
            warnings.warn(
                f"graph has {len(components)} components, solving each separately",
                DisconnectedGraphWarning,
                stacklevel=2,
            )
            p, iterations, primal, dual, converged = _solve_components(
                problem, components, cfg
            )

    p_hat = clamp_unit(p)
    result = DenoiseResult(
        p_hat=p_hat,
        objective=objective_value(p_hat, problem),
        iterations=iterations,
        primal_residual=primal,
        dual_residual=dual,
        converged=converged,
        lambda_used=problem.lam,
    )
    logger.debug(
        "TV solve n=%d m=%d lambda=%g: %d iterations, residuals %.2e/%.2e, %.3fs",
        g.n,
        g.m,
        problem.lam,
        iterations,
        primal,
        dual,
        time.perf_counter() - started,
    )
    if not converged:
        logger.warning(
            "TV solve did not converge in %d iterations (lambda=%g)",
            cfg.max_iter,
            problem.lam,
        )
    return result


def _solve_components(
    problem: DenoiseProblem, components: List[np.ndarray], cfg: SolverConfig
) -> Tuple[np.ndarray, int, float, float, bool]:
    p = np.full(problem.graph.n, problem.weighted_mean())
    iterations, primal, dual, converged = 0, 0.0, 0.0, True
    for nodes in components:
        weights = problem.node_weights[nodes]
        if not np.any(weights > 0):
            continue
        sub_graph, kept_edges = problem.graph.subgraph(nodes)
        sub_problem = DenoiseProblem(
            targets=problem.targets[nodes],
            node_weights=weights,
            edge_weights=problem.edge_weights[kept_edges],
            lam=problem.lam,
            graph=sub_graph,
        )
        result = tv_denoise_weighted(sub_problem, cfg)
        p[nodes] = result.p_hat
        iterations = max(iterations, result.iterations)
        primal = max(primal, result.primal_residual)
        dual = max(dual, result.dual_residual)
        converged = converged and result.converged
    return p, iterations, primal, dual, converged


def tv_denoise(
    y, g: Graph, lam: float, cfg: Optional[SolverConfig] = None
) -> DenoiseResult:
    """Denoise observations y: minimize (1/n) sum (y_i - p_i)^2 + lam ||Dp||_1."""
    problem = DenoiseProblem(
        targets=y,
        node_weights=np.full(g.n, 1.0 / g.n),
        edge_weights=np.ones(g.m),
        lam=lam,
        graph=g,
    )
    return tv_denoise_weighted(problem, cfg)


def tv_denoise_masked(
    y_tilde, mask, g: Graph, lam: float, cfg: Optional[SolverConfig] = None
) -> DenoiseResult:
    """Denoise partially observed y.

    Minimizes (1/n) sum m_i (y_i - p_i)^2 + lam ||Dp||_1. Entries of y_tilde
    where mask is 0 are ignored and may be NaN.
    """
    mask = np.asarray(mask, dtype=float).reshape(-1)
    y_tilde = np.asarray(y_tilde, dtype=float).reshape(-1)
    if mask.size != g.n or y_tilde.size != g.n:
        raise ValueError(f"y and mask must have length {g.n}")
    if not np.all(np.isin(mask, (0.0, 1.0))):
        raise ValueError("mask entries must be 0 or 1")
    if not np.any(mask == 1):
        raise ValueError("mask has no observed node")
    problem = DenoiseProblem(
        targets=np.where(mask == 1, y_tilde, 0.0),
        node_weights=mask / g.n,
        edge_weights=np.ones(g.m),
        lam=lam,
        graph=g,
    )
    return tv_denoise_weighted(problem, cfg)


def theoretical_lambda(n: int, rho: float, delta: float) -> float:
    """Regularization level (sqrt(2) rho / n) log(4 n^2 / delta) for full data."""
    if n < 1 or rho <= 0:
        raise ValueError("theoretical_lambda needs n >= 1 and rho > 0")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return math.sqrt(2.0) * rho / n * math.log(4.0 * n * n / delta)


def theoretical_lambda_missing(n: int, rho: float) -> float:
    """Regularization level 9 sqrt(2) rho log(n) / n for missing data."""
    if n < 2 or rho <= 0:
        raise ValueError("theoretical_lambda_missing needs n >= 2 and rho > 0")
    return 9.0 * math.sqrt(2.0) * rho * math.log(n) / n


def cross_validate_lambda(
    y,
    mask,
    g: Graph,
    cv: CvConfig,
    cfg: Optional[SolverConfig] = None,
    seed: Optional[SeedLike] = None,
) -> Tuple[float, List[Tuple[float, float]]]:
    """Pick lambda by node-holdout cross-validation.

    Each fold hides a random holdout_fraction of the observed nodes, solves the
    masked problem on the rest and scores squared error on the hidden nodes.

    Args:
    ----
        y: Observations.
        mask: Observation mask, or None when every node is observed.
        g (Graph): Graph.
        cv (CvConfig): Grid, folds, holdout fraction and seed.
        cfg (SolverConfig, optional): Solver settings.
        seed (optional): Overrides cv.seed; an int or a Generator.

    Returns:
    -------
        float: Grid value with the lowest mean loss, ties broken toward larger lambda.
        List[Tuple[float, float]]: (lambda, mean held-out loss) for the whole grid.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    mask = np.ones(g.n) if mask is None else np.asarray(mask, dtype=float).reshape(-1)
    observed = np.flatnonzero(mask == 1)
    hidden_count = max(1, int(round(cv.holdout_fraction * observed.size)))
    if observed.size - hidden_count < 1:
        raise ValueError(
            f"{observed.size} observed nodes leave no training node per fold"
        )
    if len(cv.lambda_grid) == 1:
        return cv.lambda_grid[0], [(cv.lambda_grid[0], math.nan)]

    if seed is None:
        rng = make_rng(cv.seed, STREAM_CV)
    else:
        rng = make_rng(seed)
    losses = np.zeros((cv.folds, len(cv.lambda_grid)))
    for fold in range(cv.folds):
        hidden = rng.choice(observed, size=hidden_count, replace=False)
        train = mask.copy()
        train[hidden] = 0.0
        for index, lam in enumerate(cv.lambda_grid):
            p_hat = tv_denoise_masked(y, train, g, lam, cfg).p_hat
            losses[fold, index] = np.mean((p_hat[hidden] - y[hidden]) ** 2)

    mean_loss = losses.mean(axis=0)
    best = int(np.flatnonzero(mean_loss <= mean_loss.min() + 1e-12)[-1])
    table = [(lam, float(loss)) for lam, loss in zip(cv.lambda_grid, mean_loss)]
    logger.debug(
        "cross-validation picked lambda=%g from %s", cv.lambda_grid[best], table
    )
    return cv.lambda_grid[best], table


def select_lambda(
    policy: LambdaPolicy,
    y,
    mask,
    g: Graph,
    cfg: Optional[SolverConfig] = None,
    seed: Optional[SeedLike] = None,
) -> float:
    """Resolve a lambda policy ('fixed', 'theory', 'theory-missing', 'cv')."""
    match policy.kind:
        case "fixed":
            return float(policy.value)
        case "theory":
            rho = inverse_scaling_factor(g, policy.rho_mode)
            return theoretical_lambda(g.n, rho, policy.delta)
        case "theory-missing":
            rho = inverse_scaling_factor(g, policy.rho_mode)
            return theoretical_lambda_missing(g.n, rho)
        case "cv":
            lam, _ = cross_validate_lambda(y, mask, g, policy.cv, cfg, seed)
            return lam
    raise ValueError(f"Unknown lambda policy '{policy.kind}'")


def correct_false_positives(
    rho_hat, alpha: float, rescale: bool = False
) -> np.ndarray:
    """Zero every entry <= alpha.

    With rescale, surviving entries x become (x - alpha) / (1 - alpha).
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    rho_hat = np.asarray(rho_hat, dtype=float)
    if np.any(rho_hat < 0) or np.any(rho_hat > 1):
        raise ValueError("entries must lie in [0, 1]")
    corrected = np.where(rho_hat <= alpha, 0.0, rho_hat)
    if rescale:
        corrected = np.where(corrected > 0, (corrected - alpha) / (1.0 - alpha), 0.0)
    return corrected


def oracle_denoise(problem: DenoiseProblem) -> np.ndarray:
    """Reference minimizer for small problems, independent of the ADMM solver.

    With all node weights positive the dual problem

        minimize_w || (1/2) A^{-1/2} D^T w - A^{1/2} t ||^2  s.t. |w_e| <= lam b_e

    is solved exactly by bounded-variable least squares, and p = t - A^{-1} D^T w / 2.
    Otherwise projected subgradient descent with diminishing steps is polished by
    coordinate-wise bounded scalar minimization.
    """
    g = problem.graph
    if g.n > ORACLE_MAX_NODES or g.m > ORACLE_MAX_EDGES:
        raise ValueError(
            f"oracle is limited to n <= {ORACLE_MAX_NODES}, m <= {ORACLE_MAX_EDGES}"
        )
    bounds = problem.lam * problem.edge_weights
    active = np.flatnonzero(bounds > 0)
    if active.size == 0:
        return clamp_unit(_fidelity_only(problem))

    a, t = problem.node_weights, problem.targets
    if np.all(a > 0):
        d_t = g.incidence.toarray()[active].T
        design = 0.5 * d_t / np.sqrt(a)[:, None]
        solution = lsq_linear(
            design,
            np.sqrt(a) * t,
            bounds=(-bounds[active], bounds[active]),
            method="bvls",
            tol=1e-12,
            max_iter=500,
        )
        return clamp_unit(t - d_t @ solution.x / (2.0 * a))

    return _oracle_subgradient(problem)


def _oracle_subgradient(problem: DenoiseProblem) -> np.ndarray:
    g = problem.graph
    incidence = g.incidence.toarray()
    a, t = problem.node_weights, problem.targets
    edge_scale = problem.lam * problem.edge_weights
    p = np.full(g.n, problem.weighted_mean())
    best, best_value = p.copy(), objective_value(p, problem)
    step0 = 0.5 / max(float(a.max()), float(edge_scale.max()), 1e-12)
    for step in range(ORACLE_SUBGRADIENT_STEPS):
        gradient = 2.0 * a * (p - t) + incidence.T @ (
            edge_scale * np.sign(incidence @ p)
        )
        p = clamp_unit(p - step0 / math.sqrt(step + 1.0) * gradient)
        value = objective_value(p, problem)
        if value < best_value:
            best, best_value = p.copy(), value

    for _ in range(50):
        previous = best_value
        for node in range(g.n):

            def along(x, node=node):
                trial = best.copy()
                trial[node] = x
                return objective_value(trial, problem)

            found = minimize_scalar(
                along, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12}
            )
            if found.fun < best_value:
                best[node], best_value = found.x, found.fun
        if previous - best_value < 1e-15:
            break
    return best
