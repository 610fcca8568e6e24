from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import RunRecord, run_experiment
from .stats import fit_decay_slope, median_iqr, variance_overhead

__all__ = ["ConfigError", "ExperimentConfig", "RunRecord", "fit_decay_slope", "load_config",
           "median_iqr", "parse_config", "run_experiment", "variance_overhead"]
