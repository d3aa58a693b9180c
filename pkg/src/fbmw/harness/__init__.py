"""Monte Carlo sweeps, verification suites and report files."""

from .config import ConfigError, ExperimentConfig
from .report import emit_report
from .suites import SUITES, SuiteReport, run_lemma_suite
from .sweeps import RateFit, SweepAborted, critical_ratio_test, run_discrete_sweep, run_metric_sweep

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RateFit",
    "SUITES",
    "SuiteReport",
    "SweepAborted",
    "critical_ratio_test",
    "emit_report",
    "run_discrete_sweep",
    "run_lemma_suite",
    "run_metric_sweep",
]
