"""Experiment grid: synthetic fixtures, single-cell runs, the grid runner and reports."""

from .experiment import MODELS, ExperimentSpec, ResultRow, cell_seed, run_experiment
from .grid import (
    COLUMNS,
    SCHEMA_LINE,
    GridConfig,
    grid_config_from_dict,
    load_grid_config,
    lpt_makespan,
    read_results,
    run_grid,
    sorted_rows,
    write_results,
)
from .report import emit_report
from .synthetic import generate_synthetic, planted_trigger

__all__ = [
    "COLUMNS", "MODELS", "SCHEMA_LINE", "ExperimentSpec", "GridConfig", "ResultRow", "cell_seed",
    "emit_report", "generate_synthetic", "grid_config_from_dict", "load_grid_config",
    "lpt_makespan", "planted_trigger", "read_results", "run_experiment", "run_grid",
    "sorted_rows", "write_results",
]
