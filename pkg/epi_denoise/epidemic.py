"""Discrete-time SIS and SIR dynamics on a weighted contact graph.

The SIS step is p' = p + (I - diag(p)) B Omega p - Gamma p, with B = diag(beta)
and Gamma = diag(gamma). Under the well-posedness conditions checked by
`validate_params` (gamma_i < 1 and beta_i * sum_j omega_ij < 1) every state
stays in [0, 1].
"""

import csv
import logging
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .bounds import l1_risk_bound
from .errors import AssumptionViolation
from .model_objects import (
    AssumptionReport,
    EpidemicParams,
    EpidemicState,
    ObservationSet,
)
from .seeding import SeedLike, make_rng

logger = logging.getLogger(__name__)

MODELS = ("sis", "sir")
ROUNDOFF = 1e-12


def _row_sums(params: EpidemicParams) -> np.ndarray:
    return np.asarray(params.omega.sum(axis=1)).reshape(-1)


def validate_params(params: EpidemicParams) -> AssumptionReport:
    """Check gamma_i < 1 and beta_i * sum_j omega_ij < 1 for every node.

    Returns
    -------
        AssumptionReport: ok flag and (node, quantity, value) violations, worst first.
    """
    violations = []
    for node in np.flatnonzero(params.gamma >= 1):
        violations.append((int(node), "gamma", float(params.gamma[node])))
    pressure = params.beta * _row_sums(params)
    for node in np.flatnonzero(pressure >= 1):
        violations.append((int(node), "beta*row_sum", float(pressure[node])))
    violations.sort(key=lambda item: (-item[2], item[0]))
    return AssumptionReport(ok=not violations, violations=violations)


def check_params(params: EpidemicParams, unchecked: bool = False) -> AssumptionReport:
    """Raise AssumptionViolation on invalid parameters unless unchecked is set."""
    report = validate_params(params)
    if report.ok:
        return report
    worst = ", ".join(
        f"node {node}: {quantity}={value:.4g}"
        for node, quantity, value in report.violations[:5]
    )
    if not unchecked:
        raise AssumptionViolation(
            f"{len(report.violations)} nodes break the well-posedness conditions "
            f"(gamma < 1, beta * row sum < 1): {worst}"
        )
    logger.warning("Running with invalid epidemic parameters: %s", worst)
    return report


def _bounded(values: np.ndarray, upper, clip: bool) -> np.ndarray:
    """Clip round-off; clip larger excursions only when `clip` is set."""
    outside = int(np.sum((values < -ROUNDOFF) | (values > upper + ROUNDOFF)))
    if outside:
        if not clip:
            raise AssumptionViolation(
                f"{outside} node states left [0, 1]; the parameters break "
                "gamma < 1 or beta * row sum < 1"
            )
        logger.warning("Clipped %d node states back into [0, 1]", outside)
    return np.clip(values, 0.0, upper)


def sis_step(
    state: EpidemicState, params: EpidemicParams, clip: bool = False
) -> EpidemicState:
    """Advance one SIS step: p_i + (1 - p_i) beta_i sum_j omega_ij p_j - gamma_i p_i.

    Valid parameters keep the state in [0, 1]. Otherwise AssumptionViolation is
    raised, unless `clip` is set, in which case the state is clipped with a warning.
    """
    p = state.p
    pressure = params.omega @ p
    p_next = p + (1.0 - p) * params.beta * pressure - params.gamma * p
    return EpidemicState(_bounded(p_next, 1.0, clip))


def evolution_operator(p, params: EpidemicParams) -> sp.csr_matrix:
    """State-dependent operator O = I + (I - diag(p)) B Omega - Gamma.

    sis_step(p) equals O(p) @ p.
    """
    p = np.asarray(p, dtype=float)
    n = params.n
    infection = sp.diags((1.0 - p) * params.beta) @ params.omega
    return (sp.identity(n, format="csr") + infection - sp.diags(params.gamma)).tocsr()


def sir_step(
    state: EpidemicState, params: EpidemicParams, clip: bool = False
) -> EpidemicState:
    """Advance one SIR step.

    p' = p + (1 - p - r) beta sum_j omega_ij p_j - gamma p and r' = r + gamma p.
    States leaving p + r <= 1 are handled as in sis_step.
    """
    p = state.p
    r = np.zeros_like(p) if state.r is None else state.r
    pressure = params.omega @ p
    p_next = _bounded(
        p + (1.0 - p - r) * params.beta * pressure - params.gamma * p, 1.0, clip
    )
    r_next = _bounded(r + params.gamma * p, 1.0 - p_next, clip)
    return EpidemicState(p_next, r_next)


def simulate(
    p0: EpidemicState,
    params: EpidemicParams,
    steps: int,
    model: str = "sis",
    clip: bool = False,
) -> List[EpidemicState]:
    """Run the dynamics for `steps` steps; the trajectory includes p0.

    `clip` is passed to every step; set it only for parameters that were
    accepted with check_params(..., unchecked=True).
    """
    if steps < 0:
        raise ValueError(f"steps must be nonnegative, got {steps}")
    if p0.p.size != params.n:
        raise ValueError(f"state has {p0.p.size} nodes, params have {params.n}")
    match model:
        case "sis":
            step = sis_step
        case "sir":
            step = sir_step
            if p0.r is None:
                p0 = EpidemicState(p0.p, np.zeros_like(p0.p))
        case _:
            raise ValueError(f"Unknown epidemic model '{model}', expected {MODELS}")
    trajectory = [p0]
    for _ in range(steps):
        trajectory.append(step(trajectory[-1], params, clip))
    return trajectory


def patient_zero_state(
    n: int, index: Optional[int] = None, seed: Optional[SeedLike] = None
) -> EpidemicState:
    """Indicator state with a single infected node, given or drawn uniformly."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if index is None:
        if seed is None:
            raise ValueError("patient_zero_state needs an index or a seed")
        index = int(make_rng(seed).integers(n))
    if not 0 <= index < n:
        raise IndexError(f"patient zero {index} out of range for n={n}")
    p = np.zeros(n)
    p[index] = 1.0
    return EpidemicState(p)


def forecast(p_hat, params: EpidemicParams, horizon: int) -> np.ndarray:
    """Roll an estimated state forward `horizon` steps with the evolution operator."""
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    p = np.clip(np.asarray(p_hat, dtype=float), 0.0, 1.0)
    for _ in range(horizon):
        p = np.clip(evolution_operator(p, params) @ p, 0.0, 1.0)
    return p


def expected_infections(p) -> float:
    """Expected number of infected individuals, sum_i p_i."""
    return float(np.sum(p))


def lipschitz_constant(params: EpidemicParams) -> float:
    """l1 Lipschitz constant 1 - min gamma + max beta * max row sum of omega."""
    max_row_sum = float(_row_sums(params).max()) if params.n else 0.0
    return 1.0 - float(params.gamma.min()) + float(params.beta.max()) * max_row_sum


def forecast_error_bound(
    rho: float,
    kappa_t: float,
    t_size: int,
    s: int,
    tv_off_support: float,
    tv_support_size: int,
    params: EpidemicParams,
    steps: int,
    n: int,
    delta: float,
) -> float:
    """Bound on the l1 error of the expected infections `steps` steps ahead.

    The denoiser's l1 risk bound at the estimation time, multiplied by
    lipschitz_constant(params) ** steps.
    """
    if steps < 0:
        raise ValueError(f"steps must be nonnegative, got {steps}")
    bracket = l1_risk_bound(
        n, rho, kappa_t, t_size, s, tv_off_support, tv_support_size, delta
    )
    return lipschitz_constant(params) ** steps * bracket


def sample_observations(p, alpha: float, seed: SeedLike) -> np.ndarray:
    """Bernoulli test results with success probability (1 - alpha) p_i + alpha."""
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("infection probabilities must lie in [0, 1]")
    rate = (1.0 - alpha) * p + alpha
    return (make_rng(seed).random(p.size) < rate).astype(float)


def sample_mask(pi, seed: SeedLike) -> np.ndarray:
    """Observation mask with independent Bernoulli(pi_i) entries."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0) or np.any(pi > 1):
        raise ValueError("observation probabilities must lie in (0, 1]")
    return (make_rng(seed).random(pi.size) < pi).astype(float)


def write_trajectory_csv(trajectory: Sequence[EpidemicState], path: str) -> None:
    """Write one row per time step: step, p_0..p_{n-1} and r_0.. for SIR."""
    if not trajectory:
        raise ValueError("trajectory is empty")
    n = trajectory[0].p.size
    with_r = trajectory[0].r is not None
    header = ["step"] + [f"p_{i}" for i in range(n)]
    if with_r:
        header += [f"r_{i}" for i in range(n)]
    with open(path, "w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(header)
        for step, state in enumerate(trajectory):
            values = list(state.p)
            if with_r:
                values += list(state.r)
            writer.writerow([step] + [repr(float(value)) for value in values])


def write_observations_csv(observations: ObservationSet, path: str) -> None:
    """Write one row per node: node, y, mask."""
    with open(path, "w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(["node", "y", "mask"])
        for node, (y, mask) in enumerate(zip(observations.y, observations.mask)):
            writer.writerow([node, int(y), int(mask)])
