"""Discretized unitary evolution, operation-rate formulas and the evolve/collapse cycle.

Natural units (``hbar = 1``) throughout unless ``hbar`` is passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .collapse import CollapseEvent, collapse
from .entanglement import chi, stable_for_chi
from .errors import NumericDomainError
from .hilbert import MultipartiteState, ResolutionParams, discretize, round_to_grid

DEFAULT_MAX_FOCK_DIM = 4096


@dataclass(frozen=True, eq=False)
class MuUnitary:
    """A unitary whose entries have been rounded to the ``mu``-bit grid.

    ``deviation`` is the operator-norm distance to the nearest exact unitary
    (the polar factor). It is bounded by ``D * 2**(-mu/2)``; inputs that
    break the bound were not unitary to begin with and are rejected.
    """

    matrix: np.ndarray
    mu: int
    deviation: float = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("a mu-unitary must be a square matrix")
        m = round_to_grid(m, self.mu)
        m.setflags(write=False)
        s = np.linalg.svd(m, compute_uv=False)
        dev = float(np.max(np.abs(s - 1.0)))
        bound = m.shape[0] * 2.0 ** (-self.mu / 2)
        if dev > bound:
            raise ValueError(f"matrix is not unitary to within the grid bound ({dev:.3g} > {bound:.3g})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "deviation", dev)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def embed_operator(op: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` to the full space of ``dims``."""
    dims = tuple(dims)
    targets = list(targets)
    n = len(dims)
    t_dims = [dims[t] for t in targets]
    dt = math.prod(t_dims)
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (dt, dt):
        raise ValueError(f"operator shape {op.shape} does not match target dims {t_dims}")
    rest = [k for k in range(n) if k not in targets]
    dr = math.prod(dims[k] for k in rest)
    full = np.kron(op, np.eye(dr, dtype=np.complex128))
    # full acts on axes ordered targets + rest; permute to natural order
    perm = targets + rest
    full = full.reshape([dims[k] for k in perm] * 2)
    inv = list(np.argsort(perm))
    full = full.transpose(inv + [n + i for i in inv])
    D = math.prod(dims)
    return full.reshape(D, D)


def cnot(n: int, control: int, target: int) -> np.ndarray:
    proj0 = np.diag([1, 0]).astype(np.complex128)
    proj1 = np.diag([0, 1]).astype(np.complex128)
    dims = (2,) * n
    return embed_operator(proj0, [control], dims) + embed_operator(
        np.kron(proj1, PAULI_X), [control, target], dims
    )


def ghz_entangler(n: int) -> np.ndarray:
    """Hadamard on qubit 0 followed by a CNOT chain 0->1->...->n-1."""
    u = embed_operator(HADAMARD, [0], (2,) * n)
    for k in range(n - 1):
        u = cnot(n, k, k + 1) @ u
    return u


def apply_mu_unitary(state: MultipartiteState, u: MuUnitary, res: ResolutionParams) -> MultipartiteState:
    """Multiply and snap back to the grid; the norm drift is left in place.

    Raises :class:`NumericDomainError` if nothing survives the rounding.
    """
    if u.dimension != state.dimension:
        raise ValueError(f"unitary of dimension {u.dimension} cannot act on a state of dimension {state.dimension}")
    out = discretize(state.with_amplitudes(u.matrix @ state.amplitudes), res)
    if not np.any(out.amplitudes):
        raise NumericDomainError(f"every amplitude rounded to zero on the mu={res.mu} grid")
    return out


@dataclass(frozen=True)
class EnergySpectrum:
    energies: tuple

    def __post_init__(self):
        e = tuple(float(x) for x in self.energies)
        if not e:
            raise ValueError("spectrum is empty")
        if not all(math.isfinite(x) and x >= 0 for x in e):
            raise ValueError("energies must be finite and non-negative")
        object.__setattr__(self, "energies", e)

    @property
    def mean(self) -> float:
        return math.fsum(self.energies) / len(self.energies)


def _check_D(spec: EnergySpectrum, D: Optional[int]) -> int:
    if D is None:
        return len(spec.energies)
    if D != len(spec.energies):
        raise ValueError(f"D={D} does not match {len(spec.energies)} energies")
    return D


def per_amplitude_rates(spec: EnergySpectrum, res: ResolutionParams, hbar: float = 1.0) -> np.ndarray:
    """Grid cells swept per unit time by each amplitude, ``2**(mu/2) E_j / hbar``."""
    return 2.0 ** (res.mu / 2) * np.asarray(spec.energies) / hbar


def ops_rate(spec: EnergySpectrum, res: ResolutionParams, D: Optional[int] = None, hbar: float = 1.0) -> float:
    """Total state-update rate ``2**(mu/2) * sum(E_j) / hbar``."""
    _check_D(spec, D)
    return 2.0 ** (res.mu / 2) * math.fsum(spec.energies) / hbar


def operator_update_rate(spec: EnergySpectrum, res: ResolutionParams, D: int, hbar: float = 1.0) -> float:
    """Heisenberg-picture update rate ``2**(mu/2) * D**2 * mean(E) / hbar``."""
    return 2.0 ** (res.mu / 2) * D * D * spec.mean / hbar


def classical_ops_rate(E: float, hbar: float = 1.0) -> float:
    if E < 0:
        raise ValueError("energy must be non-negative")
    return 2.0 * E / (math.pi * hbar)


def classical_ops_rate_per_qubit(E: float, n: int, hbar: float = 1.0) -> float:
    """Rate of each of ``n`` qubits sharing total energy ``E``."""
    return classical_ops_rate(E, hbar) / n


def qubit_flip_evolve(t: float, deltaE: float, hbar: float = 1.0) -> MultipartiteState:
    """``|0>`` evolved under ``E_0|E_0><E_0| + E_1|E_1><E_1|`` for time ``t``.

    With ``|E_0>, |E_1> = (|0> +- |1>)/sqrt(2)`` and ``deltaE = (E_1 - E_0)/2``
    the state is ``(|E_0> + exp(2i deltaE t/hbar)|E_1>)/sqrt(2)`` up to a
    global phase, i.e. ``|1>`` at ``t = pi hbar / (2 deltaE)``.
    """
    if not deltaE > 0:
        raise ValueError("deltaE must be positive")
    ph = np.exp(2j * deltaE * t / hbar)
    return MultipartiteState((2,), np.array([(1 + ph) / 2, (1 - ph) / 2]))


@dataclass(frozen=True, eq=False)
class CoherentTruncation:
    n_r: int
    tail: float
    log_tail: float
    state: MultipartiteState

    @property
    def included_probability(self) -> float:
        return -math.expm1(self.log_tail)

    @property
    def mean_term_probability(self) -> float:
        return self.included_probability / self.n_r


def _log_amplitude(n: int, r: float) -> float:
    return -r * r / 2 + n * math.log(r) - 0.5 * math.lgamma(n + 1)


def coherent_truncation(
    alpha: complex, res: ResolutionParams, max_dim: int = DEFAULT_MAX_FOCK_DIM
) -> CoherentTruncation:
    """Truncate the coherent state ``|alpha>`` where its amplitudes drop below the grid.

    ``n_r`` is the smallest ``n`` beyond which every Fock amplitude is below
    ``2**(-mu/2)``; amplitudes decrease monotonically past ``|alpha|**2``, so
    the scan starts at the peak. Everything is done in the log domain. The
    returned state keeps Fock levels ``0 .. n_r-1`` (at least two levels),
    rounded to the grid.
    """
    r = abs(complex(alpha))
    if not r > 0:
        raise ValueError("alpha must be non-zero")
    log_thr = -res.mu / 2 * math.log(2)
    cap = min(max_dim, 2**res.mu)
    n = int(math.floor(r * r))  # the amplitude peak
    if _log_amplitude(n, r) < log_thr:
        raise NumericDomainError("no Fock amplitude of this coherent state is resolvable")
    while _log_amplitude(n, r) >= log_thr:
        n += 1
        if n > cap:
            raise NumericDomainError(f"coherent state needs more than {cap} Fock levels at mu={res.mu}")
    n_r = n
    # tail probability sum_{m >= n_r} |a_m|^2 via log-sum-exp
    logs = []
    m = n_r
    while True:
        lp = 2 * _log_amplitude(m, r)
        logs.append(lp)
        if m > n_r and lp < logs[0] - 60:
            break
        m += 1
    top = max(logs)
    log_tail = top + math.log(math.fsum(math.exp(x - top) for x in logs))
    ph = complex(alpha) / r
    dim = max(n_r, 2)
    amps = np.zeros(dim, dtype=np.complex128)
    for k in range(n_r):
        amps[k] = math.exp(_log_amplitude(k, r)) * ph**k
    state = discretize(MultipartiteState((dim,), amps), res)
    return CoherentTruncation(n_r, math.exp(log_tail), log_tail, state)


@dataclass(frozen=True, eq=False)
class TrajectoryStep:
    step: int
    state: MultipartiteState
    chi: float
    event: Optional[CollapseEvent]

    @property
    def norm_drift(self) -> float:
        return self.state.norm_drift

    def csv_row(self) -> List[str]:
        return [
            str(self.step),
            format(self.chi, ".17g"),
            "1" if self.event else "0",
            str(self.event.outcome_index) if self.event else "",
            format(self.norm_drift, ".17g"),
        ]


TRAJECTORY_CSV_HEADER = ("step", "chi", "event_flag", "outcome_index", "norm_drift")


def run_recollapse_cycle(
    initial: MultipartiteState,
    u: MuUnitary,
    res: ResolutionParams,
    steps: int,
    rng: np.random.Generator,
) -> List[TrajectoryStep]:
    """Alternate mu-unitary steps with collapses whenever ``chi >= kappa * mu``.

    Each record holds the state after the step (post-collapse if one fired)
    and its ``chi``.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    state = initial
    out = []
    for k in range(steps):
        state = apply_mu_unitary(state, u, res)
        c = chi(state, res)
        event = None
        if not stable_for_chi(c, res):
            state, event = collapse(state, res, rng)
            c = event.chi_after
        out.append(TrajectoryStep(k, state, c, event))
    return out
