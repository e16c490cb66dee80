"""Risk-bound calculators for the TV denoiser.

Every function evaluates a closed-form expression on the quantities it is given
(rho, kappa_T, |T|, sparsity of p* and Dp*); nothing here estimates them.
"""

import math
from typing import Optional, Sequence

import numpy as np

from .graph import Graph
from .model_objects import RiskRates, SignalSummary

TOPOLOGIES = ("grid2d", "complete", "star", "random")


def _log_term(n: int, delta: float) -> float:
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return math.log(4.0 * n * n / delta)


def _support_term(t_size: int, kappa_t: float) -> float:
    """|T| / kappa_T^2, with the empty set contributing nothing."""
    if t_size < 0:
        raise ValueError(f"|T| must be nonnegative, got {t_size}")
    if t_size == 0:
        return 0.0
    if kappa_t <= 0:
        raise ValueError(f"kappa_T must be positive, got {kappa_t}")
    return t_size / kappa_t**2


def l2_risk_bound(
    n: int,
    rho: float,
    kappa_t: float,
    t_size: int,
    tv_off_support: float,
    support_size: int,
    delta: float,
) -> float:
    """Squared l2 risk bound for the denoiser at the theoretical lambda.

    16 rho^2 |T| L^2 / kappa_T^2 + 4 sqrt(2) rho ||(Dp*)_{T^c}||_1 L
    + 4 s log(4/delta) / n, with L = log(4 n^2 / delta).
    """
    log_n = _log_term(n, delta)
    return (
        16.0 * rho**2 * _support_term(t_size, kappa_t) * log_n**2
        + 4.0 * math.sqrt(2.0) * rho * tv_off_support * log_n
        + 4.0 * support_size * math.log(4.0 / delta) / n
    )


def l1_risk_bound(
    n: int,
    rho: float,
    kappa_t: float,
    t_size: int,
    support_size: int,
    tv_off_support: float,
    tv_support_size: int,
    delta: float,
) -> float:
    """l1 risk bound for the denoiser at the theoretical lambda.

    Args:
    ----
        n (int): Number of nodes.
        rho (float): Inverse scaling factor.
        kappa_t (float): Compatibility factor of T (ignored when |T| = 0).
        t_size (int): |T|.
        support_size (int): s = ||p*||_0.
        tv_off_support (float): ||(Dp*)_{T^c}||_1.
        tv_support_size (int): ||Dp*||_0.
        delta (float): Failure probability in (0, 1].

    Returns:
    -------
        float: 4 rho sqrt(s |T|) L / kappa_T + 2 s sqrt(log(4/delta) / n)
            + 3 sqrt(rho s ||(Dp*)_{T^c}||_1 L) + sqrt(2) rho ||Dp*||_0 L.
    """
    log_n = _log_term(n, delta)
    support_term = math.sqrt(support_size * _support_term(t_size, kappa_t))
    return (
        4.0 * rho * support_term * log_n
        + 2.0 * support_size * math.sqrt(math.log(4.0 / delta) / n)
        + 3.0 * math.sqrt(rho * support_size * tv_off_support * log_n)
        + math.sqrt(2.0) * rho * tv_support_size * log_n
    )


def missing_risk_bracket(
    n: int, rho: float, kappa_t: float, t_size: int, pi: Sequence[float]
) -> float:
    """Missing-data risk bound without its absolute constants.

    {rho^2 kappa_pi |T| / kappa_T^2 + ||pi||_1 ||1/pi||_1 / n^2} log^2(n), where
    kappa_pi = 1 / min_i pi_i.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n,):
        raise ValueError(f"pi has shape {pi.shape}, expected ({n},)")
    if np.any(pi <= 0) or np.any(pi > 1):
        raise ValueError("observation probabilities must lie in (0, 1]")
    kappa_pi = 1.0 / float(pi.min())
    spread = float(pi.sum() * (1.0 / pi).sum()) / n**2
    support = rho**2 * kappa_pi * _support_term(t_size, kappa_t)
    return (support + spread) * math.log(n) ** 2


def signal_summary(g: Graph, p) -> SignalSummary:
    """Support size of p and the l1 norm, l0 norm and support of Dp."""
    p = np.asarray(p, dtype=float)
    if p.shape != (g.n,):
        raise ValueError(f"p has shape {p.shape}, expected ({g.n},)")
    differences = np.abs(g.incidence @ p) if g.m else np.zeros(0)
    edge_support = np.flatnonzero(differences > 0)
    return SignalSummary(
        support_size=int(np.count_nonzero(p)),
        tv_l1=float(differences.sum()),
        tv_l0=int(edge_support.size),
        edge_support=edge_support,
    )


def topology_rates(
    topology: str,
    n: int,
    s: int,
    tv_l1: float,
    tv_l0: int,
    d_n: Optional[float] = None,
) -> RiskRates:
    """Order of the l2 and l1 risk for a family of graphs, up to constants.

    topology is one of 'grid2d', 'complete', 'star' or 'random' (random
    d_n-regular or Erdos-Renyi with mean degree d_n, which must be given).
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    log_n = math.log(n)
    match topology:
        case "grid2d":
            l2 = math.sqrt(tv_l1 + s / (n * math.sqrt(log_n))) * log_n**0.75
            l1 = (math.sqrt(s * tv_l1 / log_n**1.5) + tv_l0) * log_n**1.5
        case "complete":
            l2 = math.sqrt((tv_l1 + s) / n) * math.sqrt(log_n)
            l1 = (math.sqrt(s * tv_l1 / (n * log_n)) + tv_l0 / n) * log_n
        case "star":
            l2 = math.sqrt(tv_l1 + s / n) * math.sqrt(log_n)
            l1 = (math.sqrt(s * tv_l1 / log_n) + tv_l0) * log_n
        case "random":
            if d_n is None or d_n <= 0:
                raise ValueError("random topology needs a positive degree d_n")
            l2 = math.sqrt(tv_l1 * log_n / d_n + s * log_n / n)
            l1 = (
                math.sqrt(s * tv_l1 / d_n)
                + tv_l0 * math.sqrt(log_n) / d_n
                + s / math.sqrt(n)
            ) * math.sqrt(log_n)
        case _:
            raise ValueError(
                f"Unknown topology '{topology}', expected one of {TOPOLOGIES}"
            )
    return RiskRates(l2=l2, l1=l1)
