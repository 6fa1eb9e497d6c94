"""Declarative, seeded experiments and the ``muqm`` command line."""

from .config import ExperimentConfig, build_state, dumps_config, load_config, loads_config, substream
from .runner import (
    EnsembleReport,
    TrajectoryRecord,
    analyze,
    run_bounds,
    run_collapse,
    run_ensemble,
    run_measurement_chain,
    run_recollapse,
    run_truncate,
    trace_distance,
)
