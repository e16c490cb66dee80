"""Monte-Carlo experiments comparing the TV denoiser with the naive estimator.

Every scenario follows the same recipe per replicate: build a contact graph,
seed a patient zero, run the SIS dynamics for k0 steps, draw test results,
denoise them and score both estimators against the true infection
probabilities. Randomness for a replicate is keyed only by (seed, replicate,
purpose), so every point of a beta/k0/... grid sees the same graph and the same
patient zero, and the number of workers never changes a reported value.
"""

import csv
import itertools
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .bounds import signal_summary
from .denoiser import (
    correct_false_positives,
    select_lambda,
    tv_denoise,
    tv_denoise_masked,
    tv_denoise_weighted,
)
from .epidemic import (
    check_params,
    expected_infections,
    forecast,
    forecast_error_bound,
    lipschitz_constant,
    patient_zero_state,
    sample_mask,
    sample_observations,
    simulate,
    write_observations_csv,
    write_trajectory_csv,
)
from .errors import ConfigError, EdgeListError, InputDataError
from .estimation import build_phi, compare_window_estimates, estimate_params
from .graph import (
    Graph,
    compatibility_factor_bound,
    contact_weights,
    generate_graph,
    load_edge_list,
    spectral_summary,
    write_edge_list,
)
from .model_objects import (
    DenoiseProblem,
    DenoiseResult,
    EpidemicParams,
    EpidemicState,
    ExperimentConfig,
    ObservationSet,
    ParamEstimate,
    Report,
)
from .reporter import companion_path
from .seeding import (
    STREAM_CV,
    STREAM_GRAPH,
    STREAM_MASK,
    STREAM_OBSERVATIONS,
    STREAM_PATIENT_ZERO,
    derive_seed,
    make_rng,
)

logger = logging.getLogger(__name__)

ERROR_METRICS = ["l1", "l2sq"]
PARAM_METRICS = ["beta_hat", "gamma_hat", "r0_hat", "residual"]

DENOISE_COLUMNS = [
    "replicate",
    "seed",
    "k0",
    "beta",
    "gamma",
    "method",
    "lambda",
    "l1",
    "l2sq",
]
PARAM_COLUMNS = [
    "replicate",
    "seed",
    "k0",
    "beta",
    "gamma",
    "window",
    "method",
    "lambda",
    "beta_hat",
    "gamma_hat",
    "r0_hat",
    "residual",
    "rank",
]
COUNTY_COLUMNS = [
    "county_id",
    "population",
    "cases",
    "raw_prevalence",
    "smoothed_prevalence",
]

# (rows, non-converged solves, lambda per grid point)
ReplicateOutcome = Tuple[List[Dict[str, Any]], int, Dict[Tuple, float]]


def l1_error(p_hat, p_star) -> float:
    """Sum of absolute errors."""
    p_hat, p_star = np.asarray(p_hat, dtype=float), np.asarray(p_star, dtype=float)
    if p_hat.shape != p_star.shape:
        raise ValueError(f"shape mismatch: {p_hat.shape} vs {p_star.shape}")
    return float(np.abs(p_hat - p_star).sum())


def l2_error_sq(p_hat, p_star) -> float:
    """Sum of squared errors."""
    p_hat, p_star = np.asarray(p_hat, dtype=float), np.asarray(p_star, dtype=float)
    if p_hat.shape != p_star.shape:
        raise ValueError(f"shape mismatch: {p_hat.shape} vs {p_star.shape}")
    return float(np.sum((p_hat - p_star) ** 2))


class ReplicateContext:
    """Graph and patient zero shared by every grid point of one replicate.

    Attributes
    ----------
    cfg (ExperimentConfig): Experiment configuration.
    replicate (int): Replicate id.
    graph (Graph): Contact graph with 1 / max(d_i, d_j) weights unless loaded weighted.
    """

    def __init__(self, cfg: ExperimentConfig, replicate: int, base_graph=None) -> None:
        """Build the replicate's graph and patient zero."""
        self.cfg = cfg
        self.replicate = replicate
        if base_graph is None:
            base_graph = generate_graph(
                cfg.graph_model,
                cfg.n,
                seed=derive_seed(cfg.seed, replicate, STREAM_GRAPH),
                **cfg.graph_params,
            )
        if base_graph.weights is None:
            base_graph = contact_weights(base_graph)
        self.graph = base_graph
        self.patient_zero = patient_zero_state(
            self.graph.n, seed=make_rng(cfg.seed, replicate, STREAM_PATIENT_ZERO)
        )
        self._params: Dict[float, EpidemicParams] = {}
        self._clip: Dict[float, bool] = {}

    def params(self, beta: float) -> EpidemicParams:
        """Epidemic parameters at one beta, validated once."""
        if beta not in self._params:
            params = EpidemicParams.from_graph(self.graph, beta, self.cfg.gamma)
            report = check_params(params, self.cfg.unchecked)
            self._params[beta] = params
            self._clip[beta] = not report.ok
        return self._params[beta]

    def trajectory(self, beta: float, steps: int) -> List[np.ndarray]:
        """True infection probabilities p^0..p^steps."""
        params = self.params(beta)
        states = simulate(self.patient_zero, params, steps, clip=self._clip[beta])
        return [state.p for state in states]

    def observe(self, p_star, alpha: float = 0.0, *stream: int) -> np.ndarray:
        """Test results for p_star, keyed by the replicate and optional sub-stream."""
        rng = make_rng(self.cfg.seed, self.replicate, STREAM_OBSERVATIONS, *stream)
        return sample_observations(p_star, alpha, rng)

    def mask(self, missing_fraction: float) -> np.ndarray:
        """Observation mask from cfg.pi, or uniform with pi = 1 - missing_fraction."""
        if self.cfg.pi is not None:
            pi = np.asarray(self.cfg.pi, dtype=float)
            if pi.size == 1:
                pi = np.full(self.graph.n, pi[0])
        else:
            pi = np.full(self.graph.n, 1.0 - missing_fraction)
        if pi.size != self.graph.n:
            raise ConfigError(f"pi has {pi.size} entries for {self.graph.n} nodes")
        return sample_mask(pi, make_rng(self.cfg.seed, self.replicate, STREAM_MASK))

    def choose_lambda(
        self, key: Tuple, y, mask, shared: Optional[Dict[Tuple, float]]
    ) -> float:
        """Resolve the lambda policy, or reuse the value fitted on replicate 0."""
        if shared is not None and key in shared:
            return shared[key]
        return select_lambda(
            self.cfg.lambda_policy,
            y,
            mask,
            self.graph,
            self.cfg.solver,
            seed=make_rng(self.cfg.seed, self.replicate, STREAM_CV),
        )

    def denoise(self, y, mask, lam: float) -> DenoiseResult:
        """TV denoise, masked when some node is unobserved."""
        if mask is None or np.all(mask == 1):
            return tv_denoise(y, self.graph, lam, self.cfg.solver)
        return tv_denoise_masked(y, mask, self.graph, lam, self.cfg.solver)

    def base_row(self, beta: float, k0: int) -> Dict[str, Any]:
        """Columns shared by every row of this replicate."""
        return {
            "replicate": self.replicate,
            "seed": self.cfg.seed,
            "k0": k0,
            "beta": beta,
            "gamma": self.cfg.gamma,
        }


def _error_rows(base: Dict[str, Any], lam: float, tv, naive, truth) -> List[Dict]:
    return [
        {
            **base,
            "method": "tv",
            "lambda": lam,
            "l1": l1_error(tv, truth),
            "l2sq": l2_error_sq(tv, truth),
        },
        {
            **base,
            "method": "naive",
            "lambda": None,
            "l1": l1_error(naive, truth),
            "l2sq": l2_error_sq(naive, truth),
        },
    ]


def _grid(cfg: ExperimentConfig, extra: Optional[List] = None) -> List[Tuple]:
    axes = [cfg.beta, cfg.k0] + ([extra] if extra is not None else [])
    return list(itertools.product(*axes))


def _base_graph(cfg: ExperimentConfig) -> Optional[Graph]:
    if cfg.edge_list is None:
        return None
    return load_edge_list(cfg.edge_list, cfg.one_based)


def _run_replicates(
    cfg: ExperimentConfig,
    task: Callable[[ReplicateContext, Optional[Dict[Tuple, float]]], ReplicateOutcome],
) -> Tuple[List[Dict[str, Any]], int]:
    """Run task for every replicate on a bounded thread pool.

    Rows come back sorted by replicate whatever the number of workers.
    """
    base_graph = _base_graph(cfg)

    def run_one(replicate: int, shared) -> Tuple[int, ReplicateOutcome]:
        context = ReplicateContext(cfg, replicate, base_graph)
        outcome = task(context, shared)
        logger.info("replicate %d/%d done", replicate + 1, cfg.replicates)
        return replicate, outcome

    shared = None
    replicate_ids = list(range(cfg.replicates))
    outcomes: List[Tuple[int, ReplicateOutcome]] = []
    if cfg.shared_lambda:
        first = run_one(0, None)
        outcomes.append(first)
        shared = first[1][2]
        replicate_ids = replicate_ids[1:]

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        outcomes.extend(pool.map(lambda r: run_one(r, shared), replicate_ids))

    rows, nonconverged = [], 0
    for _, (replicate_rows, replicate_nonconverged, _) in sorted(
        outcomes, key=lambda item: item[0]
    ):
        rows.extend(replicate_rows)
        nonconverged += replicate_nonconverged
    return rows, nonconverged


def run_denoise_experiment(cfg: ExperimentConfig) -> Report:
    """Denoise y ~ Bernoulli(p^k0) and score TV against the naive p = y."""

    def task(context: ReplicateContext, shared) -> ReplicateOutcome:
        rows, nonconverged, lambdas = [], 0, {}
        for beta, k0 in _grid(cfg):
            p_star = context.trajectory(beta, k0)[k0]
            y = context.observe(p_star)
            lam = context.choose_lambda((beta, k0), y, None, shared)
            result = context.denoise(y, None, lam)
            nonconverged += not result.converged
            lambdas[(beta, k0)] = lam
            base = context.base_row(beta, k0)
            rows += _error_rows(base, lam, result.p_hat, y, p_star)
        return rows, nonconverged, lambdas

    rows, nonconverged = _run_replicates(cfg, task)
    return Report(
        scenario="denoise",
        columns=list(DENOISE_COLUMNS),
        rows=rows,
        metrics=list(ERROR_METRICS),
        group_keys=["k0", "beta"],
        nonconverged=nonconverged,
    )


def run_forecast_experiment(cfg: ExperimentConfig) -> Report:
    """Forecast p^{k0+h} from the denoised and the raw state at k0."""
    horizon = cfg.horizon

    def task(context: ReplicateContext, shared) -> ReplicateOutcome:
        rows, nonconverged, lambdas = [], 0, {}
        for beta, k0 in _grid(cfg):
            trajectory = context.trajectory(beta, k0 + horizon)
            y = context.observe(trajectory[k0])
            lam = context.choose_lambda((beta, k0), y, None, shared)
            result = context.denoise(y, None, lam)
            nonconverged += not result.converged
            lambdas[(beta, k0)] = lam
            params = context.params(beta)
            base = {**context.base_row(beta, k0), "horizon": horizon}
            rows += _error_rows(
                base,
                lam,
                forecast(result.p_hat, params, horizon),
                forecast(y, params, horizon),
                trajectory[k0 + horizon],
            )
        return rows, nonconverged, lambdas

    rows, nonconverged = _run_replicates(cfg, task)
    columns = DENOISE_COLUMNS[:5] + ["horizon"] + DENOISE_COLUMNS[5:]
    return Report(
        scenario="forecast",
        columns=columns,
        rows=rows,
        metrics=list(ERROR_METRICS),
        group_keys=["k0", "beta", "horizon"],
        nonconverged=nonconverged,
    )


def _param_row(
    base: Dict[str, Any], method: str, lam: Optional[float], estimate: ParamEstimate
) -> Dict[str, Any]:
    return {
        **base,
        "method": method,
        "lambda": lam,
        "beta_hat": estimate.beta_hat,
        "gamma_hat": estimate.gamma_hat,
        "r0_hat": estimate.r0_hat,
        "residual": estimate.residual_norm,
        "rank": estimate.rank_flag,
    }


def run_param_experiment(cfg: ExperimentConfig) -> Report:
    """Estimate (beta, gamma, R0) from the last `window` snapshots before k0.

    In noiseless mode the true states are used and only 'exact' rows are written.
    """
    window = cfg.window

    def task(context: ReplicateContext, shared) -> ReplicateOutcome:
        rows, nonconverged, lambdas = [], 0, {}
        for beta, k0 in _grid(cfg):
            if k0 + 1 < window:
                raise ConfigError(f"k0={k0} is too short for a window of {window}")
            trajectory = context.trajectory(beta, k0)[k0 + 1 - window :]
            base = {**context.base_row(beta, k0), "window": window}
            omega = context.graph.weight_matrix
            if cfg.noiseless:
                estimate = estimate_params(build_phi(trajectory, omega))
                rows.append(_param_row(base, "exact", None, estimate))
                continue
            snapshots = [
                ObservationSet(
                    y=context.observe(p_t, 0.0, step), mask=np.ones(p_t.size)
                )
                for step, p_t in enumerate(trajectory)
            ]
            lam = context.choose_lambda((beta, k0), snapshots[-1].y, None, shared)
            lambdas[(beta, k0)] = lam
            tv_estimate, naive_estimate, window_nonconverged = (
                compare_window_estimates(
                    snapshots, context.graph, omega, lam, cfg.solver
                )
            )
            nonconverged += window_nonconverged
            rows.append(_param_row(base, "tv", lam, tv_estimate))
            rows.append(_param_row(base, "naive", None, naive_estimate))
        return rows, nonconverged, lambdas

    if window < 2:
        raise ConfigError(f"window must be at least 2, got {window}")
    rows, nonconverged = _run_replicates(cfg, task)
    return Report(
        scenario="params",
        columns=list(PARAM_COLUMNS),
        rows=rows,
        metrics=list(PARAM_METRICS),
        group_keys=["k0", "beta", "window"],
        nonconverged=nonconverged,
    )


def run_missing_experiment(cfg: ExperimentConfig) -> Report:
    """Masked TV against the naive estimate with unobserved nodes set to 0."""

    def task(context: ReplicateContext, shared) -> ReplicateOutcome:
        rows, nonconverged, lambdas = [], 0, {}
        for beta, k0, fraction in _grid(cfg, cfg.missing_fraction):
            p_star = context.trajectory(beta, k0)[k0]
            y = context.observe(p_star)
            mask = context.mask(fraction)
            if not np.any(mask == 1):
                raise ConfigError(f"missing fraction {fraction} left no observed node")
            mask_arg = None if np.all(mask == 1) else mask
            lam = context.choose_lambda((beta, k0, fraction), y, mask_arg, shared)
            result = context.denoise(y, mask_arg, lam)
            nonconverged += not result.converged
            lambdas[(beta, k0, fraction)] = lam
            base = {**context.base_row(beta, k0), "missing_fraction": fraction}
            rows += _error_rows(base, lam, result.p_hat, y * mask, p_star)
        return rows, nonconverged, lambdas

    rows, nonconverged = _run_replicates(cfg, task)
    columns = DENOISE_COLUMNS[:5] + ["missing_fraction"] + DENOISE_COLUMNS[5:]
    return Report(
        scenario="missing",
        columns=columns,
        rows=rows,
        metrics=list(ERROR_METRICS),
        group_keys=["k0", "beta", "missing_fraction"],
        nonconverged=nonconverged,
    )


def run_false_positive_experiment(cfg: ExperimentConfig) -> Report:
    """Denoise tests with false-positive rate alpha, then zero entries <= alpha."""

    def task(context: ReplicateContext, shared) -> ReplicateOutcome:
        rows, nonconverged, lambdas = [], 0, {}
        for beta, k0, alpha in _grid(cfg, cfg.alpha):
            p_star = context.trajectory(beta, k0)[k0]
            y = context.observe(p_star, alpha)
            lam = context.choose_lambda((beta, k0, alpha), y, None, shared)
            result = context.denoise(y, None, lam)
            nonconverged += not result.converged
            lambdas[(beta, k0, alpha)] = lam
            corrected = correct_false_positives(result.p_hat, alpha, cfg.fp_rescale)
            base = {**context.base_row(beta, k0), "alpha": alpha}
            rows += _error_rows(base, lam, corrected, y, p_star)
        return rows, nonconverged, lambdas

    rows, nonconverged = _run_replicates(cfg, task)
    columns = DENOISE_COLUMNS[:5] + ["alpha"] + DENOISE_COLUMNS[5:]
    return Report(
        scenario="false_positive",
        columns=columns,
        rows=rows,
        metrics=list(ERROR_METRICS),
        group_keys=["k0", "beta", "alpha"],
        nonconverged=nonconverged,
    )


_ADJACENCY_SEPARATOR = re.compile(r"[,\s]+")


def _read_cases(cases_csv: str) -> Tuple[List[str], np.ndarray, np.ndarray]:
    ids, populations, cases = [], [], []
    with open(cases_csv, newline="", encoding="utf-8") as csv_file:
        reader = csv.DictReader(csv_file)
        missing = {"county_id", "population", "cases"} - set(reader.fieldnames or [])
        if missing:
            raise InputDataError(f"{cases_csv} lacks columns {sorted(missing)}")
        for row in reader:
            county = (row["county_id"] or "").strip()
            try:
                population, count = float(row["population"]), float(row["cases"])
            except (TypeError, ValueError):
                raise InputDataError(
                    f"{cases_csv} line {reader.line_num}: population and cases "
                    "must be numbers"
                ) from None
            if population <= 0:
                raise InputDataError(f"county {county} has population {population}")
            if not 0 <= count <= population:
                raise InputDataError(
                    f"county {county} has {count} cases for population {population}"
                )
            if county in ids:
                raise InputDataError(f"county {county} listed twice")
            ids.append(county)
            populations.append(population)
            cases.append(count)
    if not ids:
        raise InputDataError(f"{cases_csv} has no counties")
    return ids, np.array(populations), np.array(cases)


def _read_adjacency(adjacency: str, index: Dict[str, int]) -> List[Tuple[int, int]]:
    edges = {}
    with open(adjacency, encoding="utf-8") as adjacency_file:
        for line_number, raw_line in enumerate(adjacency_file, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = _ADJACENCY_SEPARATOR.split(line)
            if len(fields) != 2:
                raise EdgeListError(
                    f"expected two county ids, got '{line}'", line_number
                )
            for county in fields:
                if county not in index:
                    raise EdgeListError(f"unknown county id '{county}'", line_number)
            i, j = index[fields[0]], index[fields[1]]
            if i == j:
                raise EdgeListError(f"self-loop at county {fields[0]}", line_number)
            edges[(min(i, j), max(i, j))] = None
    return list(edges)


def ingest_county_data(
    cases_csv: str, adjacency: str, lam: float = 0.0
) -> DenoiseProblem:
    """Build the population-weighted problem for county case counts.

    Node c has target I_c / n_c and weight n_c. Edge (c, c') has weight
    n_c n_c' / max(N(c), N(c')), where N(c) is the total population of the
    neighbours of c.

    Args:
    ----
        cases_csv (str): CSV with columns county_id, population, cases.
        adjacency (str): Pairs of county ids, one per line.
        lam (float): Regularization level stored in the problem.

    Returns:
    -------
        DenoiseProblem: Problem labelled with the county ids.
    """
    return _county_problem(*_read_cases(cases_csv), adjacency, lam)


def _county_problem(
    ids: List[str],
    populations: np.ndarray,
    cases: np.ndarray,
    adjacency: str,
    lam: float,
) -> DenoiseProblem:
    edges = _read_adjacency(adjacency, {county: i for i, county in enumerate(ids)})
    graph = Graph.from_edges(len(ids), edges)
    neighbour_population = graph.adjacency @ populations
    edge_weights = np.array(
        [
            populations[i]
            * populations[j]
            / max(neighbour_population[i], neighbour_population[j])
            for i, j in graph.edges
        ]
    )
    return DenoiseProblem(
        targets=cases / populations,
        node_weights=populations,
        edge_weights=edge_weights,
        lam=lam,
        graph=graph,
        labels=tuple(ids),
    )


def run_county_smoothing(cfg: ExperimentConfig) -> Report:
    """Smooth county prevalence with the population-weighted TV problem."""
    if cfg.cases is None or cfg.adjacency is None:
        raise ConfigError("county smoothing needs both 'cases' and 'adjacency'")
    if cfg.lambda_policy.kind != "fixed":
        raise ConfigError("county smoothing needs a fixed lambda ('lambda' key)")
    ids, populations, cases = _read_cases(cfg.cases)
    problem = _county_problem(
        ids, populations, cases, cfg.adjacency, cfg.lambda_policy.value
    )
    result = tv_denoise_weighted(problem, cfg.solver)
    rows = [
        {
            "county_id": county,
            "population": population,
            "cases": count,
            "raw_prevalence": target,
            "smoothed_prevalence": smoothed,
        }
        for county, population, count, target, smoothed in zip(
            problem.labels,
            problem.node_weights.tolist(),
            cases.tolist(),
            problem.targets.tolist(),
            result.p_hat.tolist(),
        )
    ]
    return Report(
        scenario="county_smooth",
        columns=list(COUNTY_COLUMNS),
        rows=rows,
        nonconverged=int(not result.converged),
    )


def run_simulation(cfg: ExperimentConfig) -> List[str]:
    """Simulate one outbreak, write it to disk and describe its forecast bound.

    Replicate 0 at the first beta and k0 is run. The trajectory goes to cfg.out,
    the test results at k0 to <stem>_observations<suffix> and the contact graph
    to <stem>_edges.txt.

    Returns
    -------
        List[str]: Summary lines for the console.
    """
    beta, k0 = cfg.beta[0], cfg.k0[0]
    context = ReplicateContext(cfg, 0, _base_graph(cfg))
    trajectory = [EpidemicState(p) for p in context.trajectory(beta, k0)]
    p_star = trajectory[-1].p
    mask = context.mask(cfg.missing_fraction[0])
    observations = ObservationSet(
        y=context.observe(p_star, cfg.alpha[0]) * mask, mask=mask, alpha=cfg.alpha[0]
    )

    paths = {
        "trajectory": cfg.out,
        "observations": companion_path(cfg.out, "observations"),
        "edges": companion_path(cfg.out, "edges", ".txt"),
    }
    write_trajectory_csv(trajectory, paths["trajectory"])
    write_observations_csv(observations, paths["observations"])
    write_edge_list(context.graph, paths["edges"], cfg.one_based)
    logger.info("Wrote %s", ", ".join(paths.values()))

    params = context.params(beta)
    lines = [
        "==========> Simulated Outbreak <==========",
        f"nodes: {context.graph.n}, steps: {k0}, beta: {beta}, gamma: {cfg.gamma}",
        f"expected infections at step {k0}: {expected_infections(p_star):.6g}",
        f"positive tests: {int(observations.y.sum())} of {int(mask.sum())} observed",
        f"lipschitz constant: {lipschitz_constant(params):.6g}",
    ]
    summary = spectral_summary(context.graph, cfg.lambda_policy.rho_mode)
    if not summary.connected:
        lines.append("graph is disconnected: forecast error bound undefined")
        return lines
    # T is the support of D p*, so nothing is left off it.
    signal = signal_summary(context.graph, p_star)
    t_size = signal.tv_l0
    kappa_t = compatibility_factor_bound(context.graph, t_size) if t_size else 1.0
    bound = forecast_error_bound(
        summary.rho,
        kappa_t,
        t_size,
        signal.support_size,
        0.0,
        t_size,
        params,
        cfg.horizon,
        context.graph.n,
        cfg.lambda_policy.delta,
    )
    lines.append(
        f"forecast error bound, {cfg.horizon} step(s) ahead "
        f"(delta={cfg.lambda_policy.delta}): {bound:.6g}"
    )
    return lines
