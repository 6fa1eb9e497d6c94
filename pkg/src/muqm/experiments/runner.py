"""Seeded experiment runners behind the CLI."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..bounds import bounds_table
from ..collapse import CollapseEvent, collapse, outcome_ensemble
from ..dynamics import MuUnitary, TrajectoryStep, coherent_truncation, ghz_entangler, run_recollapse_cycle
from ..entanglement import EntanglementReport, analyze as analyze_state, chi, stable_for_chi
from ..errors import ConfigError
from ..hilbert import MultipartiteState, dumps_state, effective_dimension
from .config import ExperimentConfig, build_state, coherent_alpha, substream


def state_digest(state: MultipartiteState) -> str:
    return hashlib.sha256(dumps_state(state).encode("ascii")).hexdigest()


@dataclass(frozen=True)
class TrajectoryRecord:
    trajectory_id: int
    events: Tuple[CollapseEvent, ...]
    final_state_digest: str
    forced: bool = False


def _is_stable(state: MultipartiteState, cfg: ExperimentConfig) -> bool:
    return stable_for_chi(chi(state, cfg.resolution), cfg.resolution)


def _collapse_once(state: MultipartiteState, cfg: ExperimentConfig, trajectory_id: int, forced=None):
    res = cfg.resolution
    # stable inputs are collapsed anyway: these experiments exist to observe outcomes
    if forced is None:
        forced = _is_stable(state, cfg)
    post, event = collapse(state, res, substream(cfg.seed, trajectory_id), force=forced)
    return post, TrajectoryRecord(trajectory_id, (event,), state_digest(post), forced)


def run_collapse(cfg: ExperimentConfig, trajectory_id: int = 0) -> TrajectoryRecord:
    """Collapse the configured state once with substream ``trajectory_id``."""
    return _collapse_once(build_state(cfg.state), cfg, trajectory_id)[1]


def run_measurement_chain(cfg: ExperimentConfig) -> TrajectoryRecord:
    """Collapse a system-apparatus-environment state ``eq1(c_0, c_1, ...)``."""
    if not cfg.state or not cfg.state.strip().lower().startswith("eq1"):
        raise ConfigError("measurement_chain needs an eq1(c0, c1, ...) state")
    return run_collapse(cfg)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    evals = np.linalg.eigvalsh(rho - sigma)
    return 0.5 * float(np.sum(np.abs(evals)))


def _projector_sum(weighted_states) -> np.ndarray:
    rho = None
    for w, s in weighted_states:
        v = s.amplitudes / s.norm()
        term = w * np.outer(v, v.conj())
        rho = term if rho is None else rho + term
    return rho


@dataclass
class EnsembleReport:
    trajectories: int
    records: List[TrajectoryRecord]
    frequencies: Dict[int, float]
    born_probabilities: Dict[int, float]
    trace_distance: float
    distance_bound: float = field(init=False)

    def __post_init__(self):
        self.distance_bound = 5.0 / np.sqrt(self.trajectories)

    def summary(self) -> dict:
        return {
            "trajectories": self.trajectories,
            "trace_distance": self.trace_distance,
            "distance_bound": self.distance_bound,
            "frequencies": {str(k): v for k, v in sorted(self.frequencies.items())},
            "born_probabilities": {str(k): v for k, v in sorted(self.born_probabilities.items())},
        }


def run_ensemble(cfg: ExperimentConfig) -> EnsembleReport:
    """Collapse ``cfg.trajectories`` copies and compare with the dephased mixture.

    The empirical non-selective state averages the post-collapse projectors;
    the reference is ``sum_j p_j P_j`` over the minimal-basis outcomes.
    """
    state = build_state(cfg.state)
    res = cfg.resolution
    outcomes = outcome_ensemble(state, res)
    records = []
    posts: Dict[str, MultipartiteState] = {}
    counts: Counter = Counter()
    outcome_counts: Counter = Counter()
    forced = _is_stable(state, cfg)
    for i in range(cfg.trajectories):
        post, rec = _collapse_once(state, cfg, i, forced)
        records.append(rec)
        posts.setdefault(rec.final_state_digest, post)
        counts[rec.final_state_digest] += 1
        outcome_counts[rec.events[0].outcome_index] += 1
    M = cfg.trajectories
    empirical = _projector_sum((n / M, posts[d]) for d, n in counts.items())
    reference = _projector_sum((p, s) for _, p, s in outcomes)
    born = {j: p for j, p, _ in outcomes}
    return EnsembleReport(
        trajectories=M,
        records=records,
        frequencies={k: n / M for k, n in outcome_counts.items()},
        born_probabilities=born,
        trace_distance=trace_distance(empirical, reference),
    )


def _unitary(cfg: ExperimentConfig, state: MultipartiteState) -> MuUnitary:
    if cfg.unitary == "identity":
        return MuUnitary(np.eye(state.dimension), cfg.mu)
    if any(d != 2 for d in state.dims):
        raise ConfigError("the ghz-entangler unitary needs an all-qubit state")
    return MuUnitary(ghz_entangler(state.n_parties), cfg.mu)


def run_recollapse(cfg: ExperimentConfig) -> List[Tuple[int, List[TrajectoryStep]]]:
    state = build_state(cfg.state)
    u = _unitary(cfg, state)
    return [
        (i, run_recollapse_cycle(state, u, cfg.resolution, cfg.steps, substream(cfg.seed, i)))
        for i in range(cfg.trajectories)
    ]


def run_truncate(cfg: ExperimentConfig) -> dict:
    alpha = coherent_alpha(cfg.state)
    res = cfg.resolution
    tr = coherent_truncation(alpha, res)
    return {
        "alpha": str(alpha),
        "mu": cfg.mu,
        "n_r": tr.n_r,
        "tail": tr.tail,
        "log_tail": tr.log_tail,
        "included_probability": tr.included_probability,
        "mean_term_probability": tr.mean_term_probability,
        "effective_dimension": effective_dimension(tr.state, res),
    }


def run_bounds(cfg: ExperimentConfig) -> dict:
    return bounds_table(cfg.total_bits, cfg.mu, cfg.length, cfg.entropy)


def analyze(cfg: ExperimentConfig) -> EntanglementReport:
    return analyze_state(build_state(cfg.state), cfg.resolution)
