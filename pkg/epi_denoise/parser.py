"""Read experiment configuration files and turn them into ExperimentConfig.

A config file is either a JSON object or flat 'key = value' lines. In the
latter, blank lines and '#' comments are skipped and each value is decoded as
JSON when possible (numbers, lists, true/false) and kept as a string otherwise.
"""

import json
import os
from typing import Any, Dict, List, Optional

from .errors import ConfigError
from .graph import GRAPH_MODELS
from .model_objects import CvConfig, ExperimentConfig, LambdaPolicy, SolverConfig

SCENARIOS = (
    "denoise",
    "forecast",
    "params",
    "missing",
    "false_positive",
    "county_smooth",
    "bounds",
    "simulate",
)

CONFIG_KEYS = (
    "graph_model",
    "graph_params",
    "n",
    "edge_list",
    "one_based",
    "beta",
    "gamma",
    "k0",
    "replicates",
    "lambda_policy",
    "lambda",
    "delta",
    "rho_mode",
    "cv_grid",
    "cv_folds",
    "holdout_fraction",
    "missing_fraction",
    "pi",
    "alpha",
    "fp_rescale",
    "horizon",
    "window",
    "noiseless",
    "seed",
    "out",
    "format",
    "workers",
    "shared_lambda",
    "unchecked",
    "tol",
    "max_iter",
    "cases",
    "adjacency",
)


class ConfigParser:
    """Reads a JSON or key=value experiment config file.

    Attributes
    ----------
    config_file (str): Path of the config file.
    config (Dict[str, Any]): Decoded key/value pairs.
    """

    def __init__(self, config_file: str) -> None:
        """Read and decode the config file.

        Args:
        ----
            config_file: Path of the config file.
        """
        self.config_file = config_file
        self.config = self.read_config()

    def read_config(self) -> Dict[str, Any]:
        """Decode the whole file, JSON when it starts with '{'."""
        if not os.path.exists(self.config_file):
            raise FileNotFoundError(f"Config file {self.config_file} does not exist")
        with open(self.config_file, encoding="utf-8") as config_raw:
            text = config_raw.read()
        if text.lstrip().startswith("{"):
            try:
                config = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{self.config_file}: invalid JSON: {exc}") from exc
            if not isinstance(config, dict):
                raise ConfigError(f"{self.config_file}: expected a JSON object")
            return config
        return self.parse_key_values(text.splitlines())

    def parse_key_values(self, lines: List[str]) -> Dict[str, Any]:
        """Parse 'key = value' lines.

        Args:
        ----
            lines (List[str]): Lines of the config file.

        Returns:
        -------
            Dict[str, Any]: Keys with JSON-decoded values.
        """
        config: Dict[str, Any] = {}
        for line_number, line in enumerate(lines, start=1):
            line_stripped = line.strip()
            if not line_stripped or line_stripped.startswith("#"):
                continue
            if "=" not in line_stripped:
                raise ConfigError(
                    f"{self.config_file}:{line_number}: expected 'key = value'"
                )
            key, value = (part.strip() for part in line_stripped.split("=", 1))
            config[key] = decode_value(value)
        return config


def decode_value(value: str) -> Any:
    """JSON-decode a value, falling back to the bare (unquoted) string."""
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value.strip("\"'")


def _as_list(key: str, value: Any, cast) -> List:
    values = value if isinstance(value, (list, tuple)) else [value]
    if not values:
        raise ConfigError(f"'{key}' must not be empty")
    try:
        return [cast(item) for item in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{key}' has an invalid value {value!r}") from exc


def _check_unit_interval(key: str, values: List[float]) -> None:
    if any(not 0 <= value < 1 for value in values):
        raise ConfigError(f"'{key}' values must lie in [0, 1), got {values}")


def _as_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("y", "yes", "true", "1"):
        return True
    if isinstance(value, str) and value.lower() in ("n", "no", "false", "0"):
        return False
    raise ConfigError(f"'{key}' must be a boolean, got {value!r}")


def build_config(
    scenario: str,
    raw: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Merge file values with CLI overrides and validate them.

    Args:
    ----
        scenario (str): One of SCENARIOS.
        raw (Dict, optional): Values read from the config file.
        overrides (Dict, optional): CLI values; None entries are ignored.

    Returns:
    -------
        ExperimentConfig: Validated configuration.
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"Unknown scenario '{scenario}', expected one of {SCENARIOS}")
    values = dict(raw or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    cfg = ExperimentConfig(scenario=scenario)
    try:
        _apply_graph(cfg, values)
        _apply_epidemic(cfg, values)
        _apply_run(cfg, values)
        cfg.solver = SolverConfig(
            tol_primal=float(values.get("tol", cfg.solver.tol_primal)),
            tol_dual=float(values.get("tol", cfg.solver.tol_dual)),
            max_iter=int(values.get("max_iter", cfg.solver.max_iter)),
        )
        cfg.lambda_policy = _lambda_policy(values, cfg.seed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _apply_graph(cfg: ExperimentConfig, values: Dict[str, Any]) -> None:
    if "graph_model" in values:
        cfg.graph_model = str(values["graph_model"])
        cfg.graph_params = {}
        if cfg.graph_model not in GRAPH_MODELS:
            raise ConfigError(
                f"Unknown graph model '{cfg.graph_model}', "
                f"expected one of {sorted(GRAPH_MODELS)}"
            )
    if "graph_params" in values:
        if not isinstance(values["graph_params"], dict):
            raise ConfigError("'graph_params' must be a JSON object")
        cfg.graph_params = dict(values["graph_params"])
    cfg.n = int(values.get("n", cfg.n))
    if cfg.n < 2:
        raise ConfigError(f"'n' must be at least 2, got {cfg.n}")
    cfg.edge_list = values.get("edge_list", cfg.edge_list)
    cfg.one_based = _as_bool("one_based", values.get("one_based", cfg.one_based))


def _apply_epidemic(cfg: ExperimentConfig, values: Dict[str, Any]) -> None:
    cfg.beta = _as_list("beta", values.get("beta", cfg.beta), float)
    if any(beta < 0 for beta in cfg.beta):
        raise ConfigError(f"'beta' must be nonnegative, got {cfg.beta}")
    cfg.gamma = float(values.get("gamma", cfg.gamma))
    if not 0 < cfg.gamma < 1:
        raise ConfigError(f"'gamma' must lie in (0, 1), got {cfg.gamma}")
    cfg.k0 = _as_list("k0", values.get("k0", cfg.k0), int)
    if any(k0 < 0 for k0 in cfg.k0):
        raise ConfigError(f"'k0' must be nonnegative, got {cfg.k0}")
    cfg.missing_fraction = _as_list(
        "missing_fraction", values.get("missing_fraction", cfg.missing_fraction), float
    )
    _check_unit_interval("missing_fraction", cfg.missing_fraction)
    if values.get("pi") is not None:
        cfg.pi = _as_list("pi", values["pi"], float)
        if any(not 0 < pi <= 1 for pi in cfg.pi):
            raise ConfigError("'pi' values must lie in (0, 1]")
    cfg.alpha = _as_list("alpha", values.get("alpha", cfg.alpha), float)
    _check_unit_interval("alpha", cfg.alpha)
    cfg.fp_rescale = _as_bool("fp_rescale", values.get("fp_rescale", cfg.fp_rescale))
    cfg.horizon = int(values.get("horizon", cfg.horizon))
    cfg.window = int(values.get("window", cfg.window))
    if cfg.horizon < 0 or cfg.window < 2:
        raise ConfigError("'horizon' must be >= 0 and 'window' >= 2")
    cfg.noiseless = _as_bool("noiseless", values.get("noiseless", cfg.noiseless))
    cfg.unchecked = _as_bool("unchecked", values.get("unchecked", cfg.unchecked))


def _apply_run(cfg: ExperimentConfig, values: Dict[str, Any]) -> None:
    cfg.replicates = int(values.get("replicates", cfg.replicates))
    if cfg.replicates < 1:
        raise ConfigError(f"'replicates' must be at least 1, got {cfg.replicates}")
    cfg.seed = int(values.get("seed", cfg.seed))
    if cfg.seed < 0:
        raise ConfigError(f"'seed' must be nonnegative, got {cfg.seed}")
    cfg.out = str(values.get("out", cfg.out))
    cfg.format = str(values.get("format", cfg.format))
    if cfg.format not in ("csv", "jsonl"):
        raise ConfigError(f"'format' must be csv or jsonl, got '{cfg.format}'")
    cfg.workers = int(values.get("workers", cfg.workers))
    if cfg.workers < 1:
        raise ConfigError(f"'workers' must be at least 1, got {cfg.workers}")
    cfg.shared_lambda = _as_bool(
        "shared_lambda", values.get("shared_lambda", cfg.shared_lambda)
    )
    cfg.cases = values.get("cases", cfg.cases)
    cfg.adjacency = values.get("adjacency", cfg.adjacency)


def _lambda_policy(values: Dict[str, Any], seed: int) -> LambdaPolicy:
    """A bare 'lambda' value implies the fixed policy."""
    kind = values.get("lambda_policy")
    if kind is None:
        kind = "fixed" if "lambda" in values else "cv"
    rho_mode = str(values.get("rho_mode", "bound"))
    if rho_mode not in ("exact", "bound"):
        raise ConfigError(f"'rho_mode' must be exact or bound, got '{rho_mode}'")
    delta = float(values.get("delta", 0.05))
    if not 0 < delta <= 1:
        raise ConfigError(f"'delta' must lie in (0, 1], got {delta}")
    value = values.get("lambda")
    cv_defaults = CvConfig()
    cv = CvConfig(
        lambda_grid=tuple(
            _as_list("cv_grid", values.get("cv_grid", cv_defaults.lambda_grid), float)
        ),
        holdout_fraction=float(
            values.get("holdout_fraction", cv_defaults.holdout_fraction)
        ),
        folds=int(values.get("cv_folds", cv_defaults.folds)),
        seed=seed,
    )
    return LambdaPolicy(
        kind=str(kind),
        value=None if value is None else float(value),
        delta=delta,
        rho_mode=rho_mode,
        cv=cv,
    )
