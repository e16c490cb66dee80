"""Provides one-bit TV denoising of epidemic test results on contact graphs."""

from ._version import __version__
from .bounds import (
    l1_risk_bound,
    l2_risk_bound,
    missing_risk_bracket,
    signal_summary,
    topology_rates,
)
from .denoiser import (
    TvAdmmSolver,
    clamp_unit,
    correct_false_positives,
    cross_validate_lambda,
    objective_value,
    oracle_denoise,
    select_lambda,
    theoretical_lambda,
    theoretical_lambda_missing,
    tv_denoise,
    tv_denoise_masked,
    tv_denoise_weighted,
)
from .epi_denoise import create_cli, main
from .epidemic import (
    check_params,
    evolution_operator,
    expected_infections,
    forecast,
    forecast_error_bound,
    lipschitz_constant,
    patient_zero_state,
    sample_mask,
    sample_observations,
    simulate,
    sir_step,
    sis_step,
    validate_params,
    write_observations_csv,
    write_trajectory_csv,
)
from .errors import (
    AssumptionViolation,
    ConfigError,
    DisconnectedGraphWarning,
    EdgeListError,
    EpiDenoiseError,
    InputDataError,
    SpectralError,
)
from .estimation import (
    build_phi,
    compare_window_estimates,
    estimate_params,
    estimate_params_from_observations,
    reproductive_number,
)
from .experiments import (
    ingest_county_data,
    l1_error,
    l2_error_sq,
    run_county_smoothing,
    run_denoise_experiment,
    run_false_positive_experiment,
    run_forecast_experiment,
    run_missing_experiment,
    run_param_experiment,
    run_simulation,
)
from .graph import (
    Graph,
    compatibility_factor_bound,
    contact_weights,
    fiedler_value,
    generate_graph,
    incidence_matrix,
    inverse_scaling_factor,
    laplacian,
    load_edge_list,
    spectral_summary,
    write_edge_list,
)
from .model_objects import (
    AssumptionReport,
    CvConfig,
    DenoiseProblem,
    DenoiseResult,
    EpidemicParams,
    EpidemicState,
    ExperimentConfig,
    LambdaPolicy,
    ObservationSet,
    ParamEstimate,
    PhiSystem,
    Report,
    RiskRates,
    SignalSummary,
    SolverConfig,
    SpectralSummary,
)
from .parser import ConfigParser, build_config
from .reporter import Reporter, emit_report, read_report
from .runner import ExperimentRunner
from .seeding import derive_seed, make_rng
