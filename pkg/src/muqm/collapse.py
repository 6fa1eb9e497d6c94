"""Error-preventive collapse in the algorithmically minimal basis.

Collapse acts on the island with the largest resolvable entanglement. A
trigger party is drawn uniformly from that island and projected onto the
basis that minimizes the Born-weighted mean ``chi`` of what remains; the
rest of the island follows into the correlated state. When the island has
a single-index expansion the correlated state is already a product and one
projection finishes the job. Otherwise further triggers are drawn from the
remaining parties until the whole island is a product.

Random draws, in order: one ``rng.integers`` for the first trigger, then
for every stage one ``rng.random()`` sampled by inverse CDF over the Born
weights (and one ``rng.integers`` for each later trigger).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .entanglement import chi, dominant_island, stable_for_chi
from .errors import CollapseContractError, NumericDomainError
from .hilbert import MultipartiteState, ResolutionParams, discretize

SINGLE_INDEX_TOL = 1e-8
ORTHO_TOL = 1e-9
_NOISE = 1e-15
# fixed contraction vectors make the single-index search deterministic
_PROBE_SEEDS = (0x5EED, 0xC0FFEE, 0xBADC0DE)

CSV_HEADER = ("trigger", "outcome_index", "born_probability", "chi_before", "chi_after", "basis_label")


def _phase_fix(v: np.ndarray) -> Tuple[np.ndarray, complex]:
    """Rotate ``v`` so its first significant component is real positive.

    Returns the rotated vector and the phase ``z`` with ``v = z * rotated``.
    """
    mags = np.abs(v)
    idx = int(np.argmax(mags > 1e-9 * mags.max()))
    z = v[idx] / mags[idx]
    return v / z, z


def _vector_key(v: np.ndarray) -> tuple:
    return tuple(-round(float(x), 9) for x in np.concatenate([v.real, v.imag]))


def _complete_basis(columns: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a full basis, appending in order."""
    d, r = columns.shape
    if r == d:
        return columns
    q, _ = np.linalg.qr(np.hstack([columns, np.eye(d, dtype=np.complex128)]))
    extra = [_phase_fix(q[:, k])[0] for k in range(r, d)]
    return np.column_stack([columns] + extra)


def _sorted_basis(columns: np.ndarray) -> np.ndarray:
    order = sorted(range(columns.shape[1]), key=lambda k: _vector_key(columns[:, k]))
    return columns[:, order]


def _contract(tensor: np.ndarray, axis: int, vec: np.ndarray) -> np.ndarray:
    """Project ``axis`` of ``tensor`` onto ``<vec|`` and drop that axis."""
    return np.tensordot(vec.conj(), tensor, axes=([0], [axis]))


@dataclass(frozen=True, eq=False)
class SingleIndexForm:
    """``sum_j c_j |v_j^0>|v_j^1>...`` with orthonormal per-party vectors.

    ``vectors[k]`` holds party ``k``'s term vectors as columns. Terms are
    ordered by the components of their party-0 vector (computational order
    for computational-basis states).
    """

    coefficients: np.ndarray
    vectors: Tuple[np.ndarray, ...]

    @property
    def n_terms(self) -> int:
        return self.coefficients.size

    def term(self, j: int, dims: Sequence[int]) -> MultipartiteState:
        amps = np.ones(1, dtype=np.complex128)
        for v in self.vectors:
            amps = np.kron(amps, v[:, j])
        return MultipartiteState(tuple(dims), amps)


def _probe_bases(unit: np.ndarray, seed: int) -> List[np.ndarray]:
    n = unit.ndim
    if n == 2:
        u, _, vh = np.linalg.svd(unit)
        return [u, vh.T]
    rng = np.random.default_rng(seed)
    probes = []
    for d in unit.shape:
        w = rng.normal(size=d) + 1j * rng.normal(size=d)
        probes.append(w / np.linalg.norm(w))
    bases = []
    for k in range(n):
        partner = (k + 1) % n
        m = unit
        # contract from the highest axis down so lower indices stay valid
        for ax in sorted((a for a in range(n) if a not in (k, partner)), reverse=True):
            m = _contract(m, ax, probes[ax].conj())
        if partner < k:
            m = m.T
        u, _, _ = np.linalg.svd(m)
        bases.append(u)
    return bases


def _match_terms(unit: np.ndarray, bases: List[np.ndarray], tol: float):
    t = unit
    for ax, b in enumerate(bases):
        t = np.moveaxis(np.tensordot(b.conj().T, t, axes=([1], [ax])), 0, ax)
    p = (t * t.conj()).real
    flat = np.argsort(-p, axis=None, kind="stable")
    used = [set() for _ in bases]
    accepted = []
    kept = 0.0
    for f in flat:
        if p.flat[f] <= _NOISE:
            break
        idx = np.unravel_index(f, p.shape)
        if any(i in u for i, u in zip(idx, used)):
            continue
        for i, u in zip(idx, used):
            u.add(i)
        accepted.append((idx, t[idx]))
        kept += p.flat[f]
    if 1.0 - kept > tol:
        return None
    return accepted


def single_index_form(state: MultipartiteState, tol: float = SINGLE_INDEX_TOL) -> Optional[SingleIndexForm]:
    """Single-index expansion of ``state``, or ``None`` if there is none.

    Candidate per-party bases come from SVDs of the state contracted with
    fixed generic vectors on all but two parties, which splits degenerate
    coefficients. A candidate is accepted only when the expansion leaves at
    most ``tol`` of the norm outside one-index-per-party terms.
    """
    nrm = state.norm()
    if nrm == 0.0:
        raise NumericDomainError("zero state has no expansion")
    unit = (state.amplitudes / nrm).reshape(state.dims)
    if state.n_parties == 1:
        v, z = _phase_fix(unit)
        return SingleIndexForm(np.array([z]), (v[:, None],))
    for seed in _PROBE_SEEDS:
        bases = _probe_bases(unit, seed)
        accepted = _match_terms(unit, bases, tol)
        if accepted is not None:
            break
        if state.n_parties == 2:
            return None
    else:
        return None
    terms = []
    for idx, c in accepted:
        vecs = []
        for ax, i in enumerate(idx):
            v, z = _phase_fix(bases[ax][:, i])
            vecs.append(v)
            c = c * z
        terms.append((c, vecs))
    terms.sort(key=lambda cv: _vector_key(np.concatenate(cv[1])))
    coeffs = np.array([c for c, _ in terms], dtype=np.complex128)
    vectors = tuple(np.column_stack([vecs[k] for _, vecs in terms]) for k in range(state.n_parties))
    return SingleIndexForm(coeffs, vectors)


def born_probabilities(state: MultipartiteState, expansion: SingleIndexForm) -> np.ndarray:
    """Outcome probabilities ``|c_j|^2``, renormalized to sum to one."""
    w = np.abs(expansion.coefficients) ** 2
    total = w.sum()
    if total == 0.0:
        raise NumericDomainError("degenerate state: all expansion coefficients vanish")
    return w / total


@dataclass(frozen=True, eq=False)
class TriggerBasis:
    """Orthonormal basis (as columns) for the trigger party."""

    trigger: int
    vectors: np.ndarray
    label: str = "custom"
    mean_post_chi: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("trigger basis must be a square matrix of column vectors")
        if not np.allclose(v.conj().T @ v, np.eye(v.shape[0]), atol=ORTHO_TOL, rtol=0):
            raise ValueError("trigger basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)


def _outcome_weights(unit: np.ndarray, trigger: int, vectors: np.ndarray) -> np.ndarray:
    m = np.moveaxis(unit, trigger, 0).reshape(unit.shape[trigger], -1)
    amps = vectors.conj().T @ m
    w = np.einsum("ij,ij->i", amps, amps.conj()).real
    return w / w.sum()


def mean_post_chi(state: MultipartiteState, tb: TriggerBasis, res: ResolutionParams) -> float:
    """Born-weighted mean ``chi`` of the states left after projecting the trigger.

    Outcomes of (numerically) zero probability contribute nothing.
    """
    unit = (state.amplitudes / state.norm()).reshape(state.dims)
    rest_dims = tuple(d for k, d in enumerate(state.dims) if k != tb.trigger)
    if not rest_dims:
        return 0.0
    total = 0.0
    for j in range(tb.vectors.shape[1]):
        phi = _contract(unit, tb.trigger, tb.vectors[:, j])
        p = float(np.vdot(phi, phi).real)
        if p <= _NOISE or len(rest_dims) < 2:
            continue
        total += p * chi(MultipartiteState(rest_dims, phi.reshape(-1) / math.sqrt(p)), res)
    return total


def marginal_eigenbasis(state: MultipartiteState, party: int) -> np.ndarray:
    """Eigenvectors of one party's marginal, by descending eigenvalue.

    Near-degenerate eigenvalues are ordered by the components of their
    phase-fixed eigenvectors.
    """
    unit = (state.amplitudes / state.norm()).reshape(state.dims)
    m = np.moveaxis(unit, party, 0).reshape(state.dims[party], -1)
    rho = m @ m.conj().T
    evals, evecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    cols = [_phase_fix(evecs[:, k])[0] for k in range(evals.size)]
    order = sorted(range(evals.size), key=lambda k: (-round(float(evals[k]), 12), _vector_key(cols[k])))
    return np.column_stack([cols[k] for k in order])


def _single_index_basis(form: SingleIndexForm, trigger: int) -> np.ndarray:
    return _sorted_basis(_complete_basis(form.vectors[trigger]))


def minimal_basis(
    state: MultipartiteState,
    trigger: int,
    res: ResolutionParams,
    extra_bases: Sequence[np.ndarray] = (),
    form: Optional[SingleIndexForm] = None,
) -> TriggerBasis:
    """Trigger basis minimizing :func:`mean_post_chi`.

    A single-index expansion fixes the basis outright. Without one, the
    candidates are the trigger's marginal eigenbasis, the computational
    basis and ``extra_bases``, tried in that order; ties keep the earliest.
    """
    if not 0 <= trigger < state.n_parties:
        raise ValueError(f"trigger {trigger} out of range")
    if form is None:
        form = single_index_form(state)
    if form is not None:
        tb = TriggerBasis(trigger, _single_index_basis(form, trigger), "single-index")
        return TriggerBasis(trigger, tb.vectors, tb.label, mean_post_chi(state, tb, res))
    d = state.dims[trigger]
    candidates = [("marginal-eigenbasis", marginal_eigenbasis(state, trigger)),
                  ("computational", np.eye(d, dtype=np.complex128))]
    candidates += [(f"custom[{i}]", np.asarray(b, dtype=np.complex128)) for i, b in enumerate(extra_bases)]
    best = None
    for label, vecs in candidates:
        tb = TriggerBasis(trigger, vecs, label)
        val = mean_post_chi(state, tb, res)
        if best is None or val < best[1] - 1e-12:
            best = (tb, val)
    tb, val = best
    return TriggerBasis(trigger, tb.vectors, tb.label, val)


@dataclass(frozen=True)
class CollapseEvent:
    trigger: int
    basis_label: str
    outcome_index: int
    born_probability: float
    chi_before: float
    chi_after: float
    mean_post_chi: float = 0.0

    def csv_row(self) -> List[str]:
        f = lambda x: format(x, ".17g")  # noqa: E731
        return [str(self.trigger), str(self.outcome_index), f(self.born_probability),
                f(self.chi_before), f(self.chi_after), self.basis_label]

    def to_dict(self) -> dict:
        return {
            "trigger": self.trigger,
            "outcome_index": self.outcome_index,
            "born_probability": self.born_probability,
            "chi_before": self.chi_before,
            "chi_after": self.chi_after,
            "basis_label": self.basis_label,
            "mean_post_chi": self.mean_post_chi,
        }


def _sample(weights: np.ndarray, u: float) -> int:
    cdf = np.cumsum(weights)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), weights.size - 1))


def _project_product(state: MultipartiteState, assigned: dict) -> MultipartiteState:
    """Apply ``(x)_k |v_k><v_k|`` on the assigned parties, identity elsewhere."""
    unit = (state.amplitudes / state.norm()).reshape(state.dims)
    parties = sorted(assigned)
    rest = unit
    for k in reversed(parties):
        rest = _contract(rest, k, assigned[k])
    if np.linalg.norm(rest) == 0.0:
        raise NumericDomainError("collapse outcome has zero overlap with the global state")
    prod = np.ones(1, dtype=np.complex128)
    for k in parties:
        prod = np.kron(prod, assigned[k])
    out = np.multiply.outer(prod.reshape([state.dims[k] for k in parties]), rest)
    others = [k for k in range(state.n_parties) if k not in assigned]
    out = np.transpose(out, np.argsort(parties + others))
    out = out.reshape(-1)
    return MultipartiteState(state.dims, out / np.linalg.norm(out))


def _island_outcome_vectors(block: MultipartiteState, parties, trig_pos, res, rng, extra_bases):
    """Run the staged projection on an island block.

    Returns ``(assigned, first_basis, first_outcome, probability)`` where
    ``assigned`` maps global party -> chosen local vector.
    """
    assigned = {}
    remaining = list(parties)
    current = block
    prob = 1.0
    first = None
    t = trig_pos
    while remaining:
        form = single_index_form(current)
        tb = minimal_basis(current, t, res, extra_bases, form=form)
        if form is not None:
            p_terms = born_probabilities(current, form)
            basis = tb.vectors
            # position of each term's trigger vector inside the sorted basis
            pos = [int(np.argmax(np.abs(basis.conj().T @ form.vectors[t][:, j]))) for j in range(form.n_terms)]
            weights = np.zeros(basis.shape[1])
            weights[pos] = p_terms
            b = _sample(weights, rng.random())
            j = pos.index(b)
            for k, g in enumerate(remaining):
                assigned[g] = form.vectors[k][:, j]
            prob *= float(weights[b])
            remaining = []
        else:
            unit = (current.amplitudes / current.norm()).reshape(current.dims)
            weights = _outcome_weights(unit, t, tb.vectors)
            b = _sample(weights, rng.random())
            prob *= float(weights[b])
            assigned[remaining[t]] = tb.vectors[:, b]
            phi = _contract(unit, t, tb.vectors[:, b])
            dims = tuple(d for k, d in enumerate(current.dims) if k != t)
            remaining.pop(t)
            current = MultipartiteState(dims, phi.reshape(-1) / np.linalg.norm(phi))
        if first is None:
            first = (tb, b)
        if remaining:
            t = int(rng.integers(len(remaining)))
    return assigned, first[0], first[1], prob


def collapse(
    state: MultipartiteState,
    res: ResolutionParams,
    rng: np.random.Generator,
    force: bool = False,
    extra_bases: Sequence[np.ndarray] = (),
) -> Tuple[MultipartiteState, CollapseEvent]:
    """Collapse the most entangled island of ``state``.

    Raises :class:`CollapseContractError` when the state is computationally
    stable, unless ``force`` is set. The result is renormalized and then
    discretized at ``res.mu``.
    """
    island, chi_before = dominant_island(state, res)
    if stable_for_chi(chi_before, res) and not force:
        raise CollapseContractError(
            f"state is computationally stable (chi={chi_before:.6g} < {res.instability_threshold:.6g})"
        )
    trig_pos = int(rng.integers(len(island.parties)))
    assigned, tb, outcome, prob = _island_outcome_vectors(
        island.state, island.parties, trig_pos, res, rng, extra_bases
    )
    post = discretize(_project_product(state, assigned), res)
    event = CollapseEvent(
        trigger=island.parties[trig_pos],
        basis_label=tb.label,
        outcome_index=outcome,
        born_probability=prob,
        chi_before=chi_before,
        chi_after=chi(post, res),
        mean_post_chi=tb.mean_post_chi or 0.0,
    )
    return post, event


def outcome_ensemble(
    state: MultipartiteState, res: ResolutionParams, trigger: Optional[int] = None
) -> List[Tuple[int, float, MultipartiteState]]:
    """All possible post-collapse states as ``(outcome_index, probability, state)``.

    Only defined when the dominant island has a single-index expansion;
    ``trigger`` (a global party index inside that island) selects the
    minimal basis used. States are returned before discretization.
    """
    island, _ = dominant_island(state, res)
    form = single_index_form(island.state)
    if form is None:
        raise NumericDomainError("outcome ensemble needs a single-index island")
    t = 0 if trigger is None else island.parties.index(trigger)
    basis = minimal_basis(island.state, t, res, form=form).vectors
    p = born_probabilities(island.state, form)
    out = []
    for j in range(form.n_terms):
        b = int(np.argmax(np.abs(basis.conj().T @ form.vectors[t][:, j])))
        assigned = {g: form.vectors[k][:, j] for k, g in enumerate(island.parties)}
        out.append((b, float(p[j]), _project_product(state, assigned)))
    out.sort(key=lambda x: x[0])
    return out
