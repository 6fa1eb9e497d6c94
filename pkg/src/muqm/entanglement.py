"""Entanglement diagnostics for finite-resolution pure states.

All bipartite quantities are computed from the Schmidt decomposition of the
state reshaped across the cut, never from explicit ``|psi><psi|`` matrices;
the dense route is kept in the test-suite as an independent oracle.

Bipartition scans visit ``2**(N-1) - 1`` cuts, so states are capped at
:data:`MAX_PARTIES` parties.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from .errors import NumericDomainError
from .hilbert import MultipartiteState, ResolutionParams

MAX_PARTIES = 20
PSD_TOLERANCE = 1e-9
CHI_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SubsetMask:
    """A non-empty subset of party indices out of ``n_total`` parties."""

    members: frozenset
    n_total: int

    def __post_init__(self):
        members = frozenset(int(m) for m in self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("subset must be non-empty")
        if min(members) < 0 or max(members) >= self.n_total:
            raise ValueError(f"subset {sorted(members)} out of range for {self.n_total} parties")

    @classmethod
    def of(cls, members: Iterable[int], n_total: int) -> "SubsetMask":
        return cls(frozenset(members), n_total)

    @property
    def is_proper(self) -> bool:
        return len(self.members) < self.n_total

    def complement(self) -> "SubsetMask":
        return SubsetMask(frozenset(range(self.n_total)) - self.members, self.n_total)

    def sorted_members(self) -> Tuple[int, ...]:
        return tuple(sorted(self.members))

    def label(self) -> str:
        return "{" + ",".join(str(m) for m in self.sorted_members()) + "}"


SubsetLike = Union[SubsetMask, Iterable[int]]


def _as_mask(subset: SubsetLike, n: int) -> SubsetMask:
    if isinstance(subset, SubsetMask):
        if subset.n_total != n:
            raise ValueError(f"subset built for {subset.n_total} parties, state has {n}")
        return subset
    return SubsetMask.of(subset, n)


def bipartitions(n: int) -> Iterator[SubsetMask]:
    """Yield one side of every bipartition of ``n`` parties.

    Cuts are ordered by increasing subset size, then lexicographically; a
    cut whose complement was already yielded is skipped.
    """
    if n > MAX_PARTIES:
        raise ValueError(f"bipartition scans are limited to {MAX_PARTIES} parties, got {n}")
    seen = set()
    everyone = frozenset(range(n))
    for k in range(1, n):
        for combo in itertools.combinations(range(n), k):
            y = frozenset(combo)
            if everyone - y in seen:
                continue
            seen.add(y)
            yield SubsetMask(y, n)


def _cut_matrix(tensor: np.ndarray, members: Sequence[int]) -> np.ndarray:
    members = sorted(members)
    rest = [i for i in range(tensor.ndim) if i not in members]
    t = np.transpose(tensor, members + rest)
    d_a = math.prod(tensor.shape[i] for i in members)
    return t.reshape(d_a, -1)


def _unit_tensor(state: MultipartiteState) -> np.ndarray:
    n = state.norm()
    if n == 0.0:
        raise NumericDomainError("zero state has no reduced density")
    return (state.amplitudes / n).reshape(state.dims)


def schmidt_weights(state: MultipartiteState, subset: SubsetLike) -> np.ndarray:
    """Squared Schmidt coefficients across ``subset | complement``, descending."""
    mask = _as_mask(subset, state.n_parties)
    if not mask.is_proper:
        raise ValueError("Schmidt weights need a proper subset")
    s = np.linalg.svd(_cut_matrix(_unit_tensor(state), mask.sorted_members()), compute_uv=False)
    return s * s


def reduced_density(state: MultipartiteState, subset: SubsetLike, proper: bool = True) -> np.ndarray:
    """Reduced density matrix of ``subset`` (party order ascending).

    The state is normalized first, so the result has unit trace even for
    discretized inputs.
    """
    mask = _as_mask(subset, state.n_parties)
    if proper and not mask.is_proper:
        raise ValueError("reduced_density requires a proper subset")
    m = _cut_matrix(_unit_tensor(state), mask.sorted_members())
    rho = m @ m.conj().T
    return 0.5 * (rho + rho.conj().T)


def _entropy_from_weights(weights: np.ndarray, floor: float) -> float:
    w = weights[weights > floor]
    return float(-np.sum(w * np.log2(w))) if w.size else 0.0


def von_neumann_entropy(rho: np.ndarray, entropy_floor: float = 1e-12) -> float:
    """Entropy ``-Tr rho log2 rho`` in bits."""
    rho = np.asarray(rho, dtype=np.complex128)
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if evals.size and evals[0] < -PSD_TOLERANCE:
        raise NumericDomainError(f"matrix is not positive semidefinite (min eigenvalue {evals[0]:.3g})")
    s = _entropy_from_weights(evals, entropy_floor)
    return min(max(s, 0.0), math.log2(rho.shape[0]))


def lambda_plus(state: MultipartiteState, subset: SubsetLike) -> float:
    """Second-largest eigenvalue of the reduced density of ``subset``."""
    w = schmidt_weights(state, subset)
    return float(max(w[1], 0.0)) if w.size > 1 else 0.0


def _marginal_entropy_sum(state: MultipartiteState, floor: float) -> float:
    unit = _unit_tensor(state)
    total = 0.0
    for j in range(state.n_parties):
        s = np.linalg.svd(_cut_matrix(unit, [j]), compute_uv=False)
        total += _entropy_from_weights(s * s, floor)
    return total


def xi(state: MultipartiteState, entropy_floor: float = 1e-12) -> float:
    """Sum of single-party entropies if every bipartition is entangled, else 0.

    A bipartition counts as unentangled when its second Schmidt weight is
    at or below ``entropy_floor``.
    """
    if state.n_parties < 2:
        raise NumericDomainError("xi needs at least two parties")
    for y in bipartitions(state.n_parties):
        if lambda_plus(state, y) <= entropy_floor:
            return 0.0
    return _marginal_entropy_sum(state, entropy_floor)


def xi_mu(state: MultipartiteState, res: ResolutionParams) -> float:
    """Like :func:`xi` but every cut must clear the resolution threshold.

    A single party has no bipartitions and carries no entanglement, so it
    yields 0.
    """
    if state.n_parties < 2:
        return 0.0
    thr = res.lambda_threshold
    for y in bipartitions(state.n_parties):
        if lambda_plus(state, y) < thr:
            return 0.0
    return _marginal_entropy_sum(state, res.entropy_floor)


@dataclass(frozen=True, eq=False)
class Island:
    """A block of parties treated as an independent pure state."""

    parties: Tuple[int, ...]
    state: MultipartiteState


def islands(state: MultipartiteState, res: ResolutionParams) -> List[Island]:
    """Recursively factor ``state`` at every unresolvable cut.

    At each level the first cut (size, then lexicographic order) whose
    second Schmidt weight falls below the threshold is split; each side is
    replaced by its dominant Schmidt vector. Islands come back sorted by
    their smallest party index.
    """
    if state.n_parties > MAX_PARTIES:
        raise ValueError(f"island decomposition is limited to {MAX_PARTIES} parties")
    thr = res.lambda_threshold
    out: List[Island] = []

    def split(tensor: np.ndarray, labels: Tuple[int, ...]) -> None:
        n = len(labels)
        if n == 1:
            out.append(Island(labels, MultipartiteState(tensor.shape, tensor.reshape(-1))))
            return
        for y in bipartitions(n):
            members = y.sorted_members()
            m = _cut_matrix(tensor, members)
            u, s, vh = np.linalg.svd(m, full_matrices=False)
            w = s * s
            if w.size > 1 and w[1] >= thr:
                continue
            rest = tuple(i for i in range(n) if i not in members)
            a = u[:, 0].reshape([tensor.shape[i] for i in members])
            b = vh[0, :].reshape([tensor.shape[i] for i in rest])
            split(a, tuple(labels[i] for i in members))
            split(b, tuple(labels[i] for i in rest))
            return
        out.append(Island(labels, MultipartiteState(tensor.shape, tensor.reshape(-1))))

    split(_unit_tensor(state), tuple(range(state.n_parties)))
    out.sort(key=lambda isl: min(isl.parties))
    return out


def island_decomposition(state: MultipartiteState, res: ResolutionParams) -> List[Tuple[int, ...]]:
    return [isl.parties for isl in islands(state, res)]


def _island_chis(state: MultipartiteState, res: ResolutionParams) -> List[Tuple[Island, float]]:
    return [(isl, xi_mu(isl.state, res)) for isl in islands(state, res)]


def chi(state: MultipartiteState, res: ResolutionParams) -> float:
    """Largest resolvable entanglement over the pure islands of ``state``."""
    return max(c for _, c in _island_chis(state, res))


def dominant_island(state: MultipartiteState, res: ResolutionParams) -> Tuple[Island, float]:
    """Island carrying the largest ``xi_mu`` (first one on ties) and its value."""
    best = None
    for isl, c in _island_chis(state, res):
        if best is None or c > best[1]:
            best = (isl, c)
    return best


def stable_for_chi(chi_value: float, res: ResolutionParams) -> bool:
    """``chi < kappa * mu``, with values within ``CHI_TOLERANCE`` of the
    threshold counted as reaching it (entropies carry ~1e-15 roundoff)."""
    return chi_value < res.instability_threshold - CHI_TOLERANCE


def is_computationally_stable(state: MultipartiteState, res: ResolutionParams) -> bool:
    return stable_for_chi(chi(state, res), res)


def invariant_count(D: int, N: int, max_bits: int = 1 << 16) -> int:
    """Number of independent real local-unitary invariants of ``N`` ``D``-level parties.

    ``D**(N+1) - (D**2 - 1)*N - 1``, evaluated exactly. Results wider than
    ``max_bits`` raise :class:`OverflowError`.
    """
    D, N = int(D), int(N)
    if D < 2 or N < 1:
        raise ValueError("need D >= 2 and N >= 1")
    if (N + 1) * math.log2(D) > max_bits:
        raise OverflowError(f"D**(N+1) exceeds {max_bits} bits for D={D}, N={N}")
    return D ** (N + 1) - (D * D - 1) * N - 1


@dataclass(frozen=True)
class EntanglementReport:
    xi: float
    xi_mu: float
    chi: float
    lambda_plus_by_bipartition: Dict[SubsetMask, float] = field(default_factory=dict)
    islands: Tuple[Tuple[int, ...], ...] = ()
    stable: bool = True
    mu: int = 0
    kappa: float = 1.0

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "kappa": self.kappa,
            "xi": self.xi,
            "xi_mu": self.xi_mu,
            "chi": self.chi,
            "stable": self.stable,
            "islands": [list(i) for i in self.islands],
            "lambda_plus": {m.label(): v for m, v in self.lambda_plus_by_bipartition.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        """Structured text report: ``key: value`` lines then the cut table."""
        fmt = lambda x: format(x, ".17g")  # noqa: E731
        lines = [
            f"mu: {self.mu}",
            f"kappa: {fmt(self.kappa)}",
            f"xi: {fmt(self.xi)}",
            f"xi_mu: {fmt(self.xi_mu)}",
            f"chi: {fmt(self.chi)}",
            f"stable: {str(self.stable).lower()}",
            "islands: " + " ".join(m for m in ("{" + ",".join(map(str, i)) + "}" for i in self.islands)),
            "lambda_plus:",
        ]
        lines.extend(f"  {m.label()}: {fmt(v)}" for m, v in self.lambda_plus_by_bipartition.items())
        return "\n".join(lines) + "\n"


def analyze(state: MultipartiteState, res: ResolutionParams) -> EntanglementReport:
    lam = {y: lambda_plus(state, y) for y in bipartitions(state.n_parties)}
    c = chi(state, res)
    return EntanglementReport(
        xi=xi(state, res.entropy_floor),
        xi_mu=xi_mu(state, res),
        chi=c,
        lambda_plus_by_bipartition=lam,
        islands=tuple(island_decomposition(state, res)),
        stable=stable_for_chi(c, res),
        mu=res.mu,
        kappa=res.kappa,
    )
