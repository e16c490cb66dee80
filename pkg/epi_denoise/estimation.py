"""Least-squares recovery of the SIS rates from a window of states.

Each transition t contributes, for every node i,

    p_i^{t+1} - p_i^t = beta * (1 - p_i^t) sum_j omega_ij p_j^t - gamma * p_i^t,

which is linear in (beta, gamma). Stacking all rows gives delta_p = phi @ [beta, gamma].
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .denoiser import select_lambda, tv_denoise, tv_denoise_masked
from .graph import Graph
from .model_objects import (
    LambdaPolicy,
    ObservationSet,
    ParamEstimate,
    PhiSystem,
    SolverConfig,
)
from .seeding import SeedLike

logger = logging.getLogger(__name__)

PINV_RCOND = 1e-10


def build_phi(trajectory: Sequence, omega) -> PhiSystem:
    """Stack the per-transition blocks [(1 - p^t) * (omega p^t), -p^t].

    Args:
    ----
        trajectory: Sequence of probability vectors (or EpidemicState objects).
        omega: n x n weight matrix, dense or sparse.

    Returns:
    -------
        PhiSystem: phi with n * (len(trajectory) - 1) rows and stacked differences.
    """
    states = [
        np.asarray(getattr(state, "p", state), dtype=float) for state in trajectory
    ]
    if len(states) < 2:
        raise ValueError(f"need at least 2 states, got {len(states)}")
    n = omega.shape[0]
    if any(state.shape != (n,) for state in states):
        raise ValueError(f"every state must have length {n}")

    blocks, targets = [], []
    for current, following in zip(states, states[1:]):
        pressure = np.asarray(omega @ current).reshape(-1)
        blocks.append(np.column_stack(((1.0 - current) * pressure, -current)))
        targets.append(following - current)
    return PhiSystem(
        phi=np.vstack(blocks),
        delta_p=np.concatenate(targets),
        times_used=tuple(range(len(states) - 1)),
    )


def reproductive_number(beta_hat: float, gamma_hat: float) -> float:
    """Reproductive number beta / gamma."""
    if gamma_hat <= 0:
        raise ValueError(f"gamma must be positive, got {gamma_hat}")
    return beta_hat / gamma_hat


def estimate_params(system: PhiSystem) -> ParamEstimate:
    """Solve delta_p = phi @ [beta, gamma] with a truncated pseudoinverse.

    Singular values below 1e-10 * sigma_max are discarded. When fewer than two
    survive the estimate is flagged 'degenerate' and no reproductive number is
    reported.
    """
    if system.phi.size == 0:
        raise ValueError("parameter system is empty")
    solution = np.linalg.pinv(system.phi, rcond=PINV_RCOND) @ system.delta_p
    singular_values = np.linalg.svd(system.phi, compute_uv=False)
    if singular_values.size and singular_values[0] > 0:
        rank = int(np.sum(singular_values > PINV_RCOND * singular_values[0]))
    else:
        rank = 0
    beta_hat, gamma_hat = float(solution[0]), float(solution[1])
    residual = float(np.linalg.norm(system.phi @ solution - system.delta_p))

    rank_flag = "full" if rank == 2 else "degenerate"
    r0_hat = None
    if rank_flag == "full" and gamma_hat > 0:
        r0_hat = reproductive_number(beta_hat, gamma_hat)
    if rank_flag == "degenerate":
        logger.debug("parameter system has rank %d, R0 withheld", rank)
    return ParamEstimate(beta_hat, gamma_hat, r0_hat, residual, rank_flag)


def denoise_window(
    observations: Sequence[ObservationSet],
    g: Graph,
    lam: float,
    solver: Optional[SolverConfig] = None,
) -> Tuple[list, int]:
    """Denoise every snapshot with one lambda.

    Returns the denoised states and the number of solves that did not converge.
    """
    states, nonconverged = [], 0
    for snapshot in observations:
        if snapshot.fully_observed:
            result = tv_denoise(snapshot.y, g, lam, solver)
        else:
            result = tv_denoise_masked(snapshot.y, snapshot.mask, g, lam, solver)
        states.append(result.p_hat)
        nonconverged += not result.converged
    return states, nonconverged


def compare_window_estimates(
    observations: Sequence[ObservationSet],
    g: Graph,
    omega,
    lam: float,
    solver: Optional[SolverConfig] = None,
) -> Tuple[ParamEstimate, ParamEstimate, int]:
    """Estimate (beta, gamma) from a window denoised with `lam` and from the raw one.

    Returns
    -------
        ParamEstimate: Estimate from the denoised states.
        ParamEstimate: Naive estimate from the raw observations (unobserved set to 0).
        int: Number of solves that did not converge.
    """
    if len(observations) < 2:
        raise ValueError(f"need at least 2 snapshots, got {len(observations)}")
    denoised, nonconverged = denoise_window(observations, g, lam, solver)
    if nonconverged:
        logger.warning(
            "%d of %d window solves did not converge", nonconverged, len(denoised)
        )
    tv_estimate = estimate_params(build_phi(denoised, omega))
    naive = [snapshot.naive_estimate() for snapshot in observations]
    naive_estimate = estimate_params(build_phi(naive, omega))
    return tv_estimate, naive_estimate, nonconverged


def estimate_params_from_observations(
    observations: Sequence[ObservationSet],
    g: Graph,
    omega,
    lambda_policy: LambdaPolicy,
    solver: Optional[SolverConfig] = None,
    seed: Optional[SeedLike] = None,
) -> Tuple[ParamEstimate, ParamEstimate]:
    """Estimate (beta, gamma) from denoised snapshots and from the raw ones.

    The lambda policy is resolved once on the last snapshot and reused for the
    whole window.

    Returns
    -------
        ParamEstimate: Estimate from the denoised states.
        ParamEstimate: Naive estimate from the raw observations (unobserved set to 0).
    """
    if len(observations) < 2:
        raise ValueError(f"need at least 2 snapshots, got {len(observations)}")
    last = observations[-1]
    mask = None if last.fully_observed else last.mask
    lam = select_lambda(lambda_policy, last.y, mask, g, solver, seed)
    tv_estimate, naive_estimate, _ = compare_window_estimates(
        observations, g, omega, lam, solver
    )
    return tv_estimate, naive_estimate
