"""Provides a class `ExperimentRunner` that configures logging and runs scenarios."""

import logging
import sys
from typing import Callable, Dict, List, Optional

from .denoiser import theoretical_lambda, theoretical_lambda_missing
from .experiments import (
    ReplicateContext,
    run_county_smoothing,
    run_denoise_experiment,
    run_false_positive_experiment,
    run_forecast_experiment,
    run_missing_experiment,
    run_param_experiment,
    run_simulation,
)
from .graph import compatibility_factor_bound, load_edge_list, spectral_summary
from .model_objects import ExperimentConfig, Report
from .reporter import Reporter, emit_report

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NOT_CONVERGED = 3

SCENARIO_RUNNERS: Dict[str, Callable[[ExperimentConfig], Report]] = {
    "denoise": run_denoise_experiment,
    "forecast": run_forecast_experiment,
    "params": run_param_experiment,
    "missing": run_missing_experiment,
    "false_positive": run_false_positive_experiment,
    "county_smooth": run_county_smoothing,
}


class ExperimentRunner:
    """Runs experiment scenarios and logs progress to the terminal and a file.

    Args:
    ----
        quiet (bool): Suppress terminal log output.
        log_file (str, optional): Also write the log to this file.
        log_messages (List[str], optional): Messages logged right after setup.

    Attributes:
    ----------
        logger (logging.Logger): The configured package logger.
    """

    def __init__(
        self,
        quiet: bool = False,
        log_file: Optional[str] = None,
        log_messages: Optional[List[str]] = None,
    ) -> None:
        """Initialize ExperimentRunner class."""
        self.quiet = quiet
        self.log_file = log_file
        self.log_messages = log_messages or []
        self.logger = self.initiate_logger()

    def initiate_logger(self) -> logging.Logger:
        """Attach a terminal handler (unless quiet) and an optional file handler.

        Both handlers log at INFO and share a formatter with timestamp and level.

        Returns
        -------
            logging.Logger: The 'epi_denoise' package logger.
        """
        logger = logging.getLogger("epi_denoise")
        logger.setLevel(logging.INFO)

        formater = logging.Formatter(
            "[%(asctime)s %(levelname)s] ::: %(message)s",
            datefmt="%d-%b-%y %H:%M:%S",
        )

        if not self.quiet:
            terminal_handler = logging.StreamHandler()
            terminal_handler.setLevel(logging.INFO)
            terminal_handler.setFormatter(formater)
            logger.addHandler(terminal_handler)

        if self.log_file:
            try:
                file_handler = logging.FileHandler(self.log_file)
            except PermissionError:
                print(f"Not enough permissions to create {self.log_file}, exiting")
                sys.exit(1)
            file_handler.setLevel(logging.INFO)
            file_handler.setFormatter(formater)
            logger.addHandler(file_handler)

        for message in self.log_messages:
            logger.info(message)

        return logger

    def run(self, cfg: ExperimentConfig) -> int:
        """Run one scenario, write its report and return the exit code.

        Args:
        ----
            cfg (ExperimentConfig): Validated configuration.

        Returns:
        -------
            int: 0 on success, 3 if any solve hit max_iter (report still written).
        """
        if cfg.scenario == "bounds":
            for line in self.describe_bounds(cfg):
                print(line)
            return EXIT_OK
        if cfg.scenario == "simulate":
            for line in run_simulation(cfg):
                print(line)
            return EXIT_OK

        self.logger.info(
            "Running '%s' with %d replicate(s), seed %d",
            cfg.scenario,
            cfg.replicates,
            cfg.seed,
        )
        report = SCENARIO_RUNNERS[cfg.scenario](cfg)
        emit_report(report, cfg.out, cfg.format)
        if report.metrics and not self.quiet:
            Reporter(report).print_report()

        if report.nonconverged:
            self.logger.warning(
                "%d solve(s) did not converge; results may be inaccurate",
                report.nonconverged,
            )
            return EXIT_NOT_CONVERGED
        return EXIT_OK

    def describe_bounds(self, cfg: ExperimentConfig) -> List[str]:
        """Spectral summary and theoretical lambdas for the configured graph."""
        if cfg.edge_list is not None:
            graph = load_edge_list(cfg.edge_list, cfg.one_based)
        else:
            graph = ReplicateContext(cfg, 0).graph
        policy = cfg.lambda_policy
        summary = spectral_summary(graph, policy.rho_mode)
        lines = [
            "==========> Graph Bounds <==========",
            f"nodes: {graph.n}, edges: {graph.m}, max degree: {summary.d_max}",
            f"connected: {summary.connected}",
            f"lambda2: {summary.lambda2:.6g}",
        ]
        if not summary.connected:
            lines.append("graph is disconnected: rho and theoretical lambda undefined")
            return lines
        lines += [
            f"rho ({summary.rho_mode}): {summary.rho:.6g}",
            "compatibility factor lower bound (T = E): "
            f"{compatibility_factor_bound(graph, graph.m):.6g}",
            f"theoretical lambda (delta={policy.delta}): "
            f"{theoretical_lambda(graph.n, summary.rho, policy.delta):.6g}",
            "theoretical lambda, missing data: "
            f"{theoretical_lambda_missing(graph.n, summary.rho):.6g}",
        ]
        return lines

    def __del__(self) -> None:
        """Close all handlers after ExperimentRunner is closed."""
        try:
            if self.logger:
                for handler in list(self.logger.handlers):
                    try:
                        handler.close()
                        self.logger.removeHandler(handler)
                    except Exception as exc:
                        print(f"Handler Error: Could not close handler: {exc}")
        except AttributeError as attrerr:
            print(f"Handler Error: {attrerr}. Logger object was not defined")
