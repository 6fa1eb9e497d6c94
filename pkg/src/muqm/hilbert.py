"""Finite-resolution multipartite pure states.

A state is a dense amplitude vector over the tensor product of its parties,
indexed in row-major party order (party 0 is the most significant digit).
Amplitudes live on a square grid of step ``2**(-mu/2)`` once discretized;
discretized states are deliberately left unnormalized.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NumericDomainError, UnsupportedPrecisionError

#: Largest resolution (bits per complex amplitude) the float64 grid supports.
MAX_MU = 100

FORMAT_HEADER = "muqm-state 1"


class InconsistencyWarning(UserWarning):
    """A quantity violated a bound that holds for normalized states."""


@dataclass(frozen=True)
class ResolutionParams:
    """Resolution ``mu`` and the thresholds derived from it.

    Parameters
    ----------
    mu : int
        Bits per complex amplitude (``mu/2`` for each real component).
    kappa : float
        Instability factor: a state is unstable once ``chi >= kappa * mu``.
    entropy_floor : float, optional
        Eigenvalues at or below this are treated as exact zeros. Must lie
        below ``lambda_threshold`` so that every resolvable cut also counts
        as entangled; defaults to ``min(1e-12, lambda_threshold / 1024)``.
    threshold_exponent : float
        Bipartitions are resolvably entangled when their second Schmidt
        weight is at least ``2**(-threshold_exponent * mu)``. The default
        0.5 compares a probability against the amplitude grid step.
    """

    mu: int
    kappa: float = 1.0
    entropy_floor: Optional[float] = None
    threshold_exponent: float = 0.5

    def __post_init__(self):
        if isinstance(self.mu, bool) or int(self.mu) != self.mu or self.mu < 1:
            raise ValueError(f"mu must be a positive integer, got {self.mu!r}")
        object.__setattr__(self, "mu", int(self.mu))
        if not 0 < self.kappa <= 1:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if not self.threshold_exponent > 0:
            raise ValueError("threshold_exponent must be positive")
        if self.entropy_floor is None:
            object.__setattr__(self, "entropy_floor", min(1e-12, self.lambda_threshold / 1024))
        if not 0 <= self.entropy_floor < self.lambda_threshold:
            raise ValueError(
                f"entropy_floor must lie in [0, {self.lambda_threshold:.3g}), got {self.entropy_floor!r}"
            )

    @property
    def epsilon(self) -> float:
        """Amplitude grid step ``2**(-mu/2)``."""
        return 2.0 ** (-self.mu / 2)

    @property
    def lambda_threshold(self) -> float:
        return 2.0 ** (-self.threshold_exponent * self.mu)

    @property
    def instability_threshold(self) -> float:
        return self.kappa * self.mu


@dataclass(frozen=True, eq=False)
class MultipartiteState:
    """Pure state of several parties with per-party dimensions ``dims``.

    The amplitude array is copied and frozen on construction, so instances
    are safe to share.
    """

    dims: tuple
    amplitudes: np.ndarray
    mu: Optional[int] = None
    norm_tolerance: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("a state needs at least one party")
        if any(d < 2 for d in dims):
            raise ValueError(f"every party dimension must be >= 2, got {dims}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != math.prod(dims):
            raise ValueError(
                f"{amps.size} amplitudes do not match dims {dims} (product {math.prod(dims)})"
            )
        if not np.all(np.isfinite(amps)):
            raise NumericDomainError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def norm_drift(self) -> float:
        """Deviation ``| ||psi||^2 - 1 |``."""
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def default_norm_tolerance(self) -> float:
        if self.norm_tolerance is not None:
            return self.norm_tolerance
        if self.mu is None:
            return 1e-9
        return self.dimension * 2.0 ** (-self.mu / 2)

    def is_normalized(self, tol: Optional[float] = None) -> bool:
        tol = self.default_norm_tolerance() if tol is None else tol
        return self.norm_drift <= tol

    def normalized(self) -> "MultipartiteState":
        n = self.norm()
        if n == 0.0:
            raise NumericDomainError("cannot normalize the zero vector")
        return MultipartiteState(self.dims, self.amplitudes / n, mu=None)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per party."""
        return self.amplitudes.reshape(self.dims)

    def kron(self, other: "MultipartiteState") -> "MultipartiteState":
        return MultipartiteState(
            self.dims + other.dims, np.kron(self.amplitudes, other.amplitudes)
        )

    def with_amplitudes(self, amplitudes, mu=None) -> "MultipartiteState":
        return MultipartiteState(self.dims, amplitudes, mu=mu)

    def same_as(self, other: "MultipartiteState", atol: float = 0.0) -> bool:
        if self.dims != other.dims or self.mu != other.mu:
            return False
        if atol == 0.0:
            return bool(np.array_equal(self.amplitudes, other.amplitudes))
        return bool(np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol))

    def __repr__(self):
        return f"MultipartiteState(dims={self.dims}, mu={self.mu}, norm={self.norm():.6g})"


def _check_mu(mu: int) -> None:
    if mu > MAX_MU:
        raise UnsupportedPrecisionError(
            f"mu={mu} exceeds the supported maximum {MAX_MU} for float64 amplitudes"
        )


def round_to_grid(values: np.ndarray, mu: int) -> np.ndarray:
    """Round real and imaginary parts to the nearest multiple of ``2**(-mu/2)``.

    Ties go to the even multiple.
    """
    _check_mu(mu)
    values = np.asarray(values, dtype=np.complex128)
    if mu % 2 == 0:
        # exact power-of-two scaling
        k = mu // 2
        re = np.ldexp(np.rint(np.ldexp(values.real, k)), -k)
        im = np.ldexp(np.rint(np.ldexp(values.imag, k)), -k)
    else:
        eps = 2.0 ** (-mu / 2)
        re = np.rint(values.real / eps) * eps
        im = np.rint(values.imag / eps) * eps
    return re + 1j * im


def discretize(state: MultipartiteState, res: ResolutionParams) -> MultipartiteState:
    """Snap every amplitude to the ``mu``-bit grid without renormalizing."""
    return MultipartiteState(state.dims, round_to_grid(state.amplitudes, res.mu), mu=res.mu)


def hilbert_angle(a: MultipartiteState, b: MultipartiteState) -> float:
    """Fubini-Study angle between two states, in ``[0, pi/2]``.

    Evaluated from the chord between phase-aligned unit vectors,
    ``2 asin(|u_a - e^{-i arg<a|b>} u_b| / 2)``, which is exact for identical
    inputs and keeps full relative precision at tiny angles.
    """
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    na, nb = np.linalg.norm(a.amplitudes), np.linalg.norm(b.amplitudes)
    if na == 0.0 or nb == 0.0:
        raise NumericDomainError("Hilbert angle is undefined for a zero vector")
    ua, ub = a.amplitudes / na, b.amplitudes / nb
    overlap = np.vdot(ua, ub)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    chord = float(np.linalg.norm(ua - ub / phase))
    return float(2.0 * math.asin(min(chord / 2.0, math.sqrt(0.5))))


def is_resolvable_pair(a: MultipartiteState, b: MultipartiteState, res: ResolutionParams) -> bool:
    return hilbert_angle(a, b) >= res.epsilon


def effective_dimension(state: MultipartiteState, res: ResolutionParams) -> int:
    """Number of amplitudes with modulus at least the grid step.

    For a normalized state this can never exceed ``2**mu``; a violation is
    reported with :class:`InconsistencyWarning`.
    """
    count = int(np.count_nonzero(np.abs(state.amplitudes) >= res.epsilon))
    if count > 2**res.mu and state.is_normalized():
        warnings.warn(
            f"{count} resolvable amplitudes exceed 2**mu = {2**res.mu}",
            InconsistencyWarning,
            stacklevel=2,
        )
    return count


def algorithmic_information(D: int, res: ResolutionParams, kind: str = "state") -> int:
    """Bits needed to store a ``D``-dimensional state or operator at ``mu`` bits.

    ``D * mu`` for states and ``D**2 * mu`` for operators. The normalization
    constraint, which would allow ``(D - 1) * mu`` for states, is ignored.
    """
    D = int(D)
    if D < 1:
        raise ValueError("D must be >= 1")
    if kind == "state":
        return D * res.mu
    if kind == "operator":
        return D * D * res.mu
    raise ValueError(f"kind must be 'state' or 'operator', got {kind!r}")


# -- construction helpers ---------------------------------------------------


def basis_state(dims: Sequence[int], digits: Sequence[int]) -> MultipartiteState:
    dims = tuple(dims)
    amps = np.zeros(math.prod(dims), dtype=np.complex128)
    amps[np.ravel_multi_index(tuple(digits), dims)] = 1.0
    return MultipartiteState(dims, amps)


def product_state(vectors: Iterable[Sequence[complex]]) -> MultipartiteState:
    vectors = [np.asarray(v, dtype=np.complex128) for v in vectors]
    amps = vectors[0]
    for v in vectors[1:]:
        amps = np.kron(amps, v)
    return MultipartiteState(tuple(v.size for v in vectors), amps)


def bell() -> MultipartiteState:
    return MultipartiteState((2, 2), np.array([1, 0, 0, 1]) / math.sqrt(2))


def ghz(n: int, d: int = 2, coefficients: Optional[Sequence[complex]] = None) -> MultipartiteState:
    """``sum_j c_j |j j ... j>`` on ``n`` parties of dimension ``d``."""
    if coefficients is None:
        coefficients = np.full(d, 1 / math.sqrt(d))
    coefficients = np.asarray(coefficients, dtype=np.complex128)
    if coefficients.size > d:
        raise ValueError("more coefficients than local dimension")
    dims = (d,) * n
    amps = np.zeros(d**n, dtype=np.complex128)
    for j, c in enumerate(coefficients):
        amps[np.ravel_multi_index((j,) * n, dims)] = c
    return MultipartiteState(dims, amps)


def w_state(n: int) -> MultipartiteState:
    amps = np.zeros(2**n, dtype=np.complex128)
    for k in range(n):
        amps[1 << k] = 1 / math.sqrt(n)
    return MultipartiteState((2,) * n, amps)


def measurement_state(coefficients: Sequence[complex]) -> MultipartiteState:
    """System-apparatus-environment state ``sum_j c_j |j>|m_j>|E_j>``.

    Pointer and environment records are the computational basis vectors,
    so the state is single-index in the computational basis. Coefficients
    are normalized.
    """
    c = np.asarray(coefficients, dtype=np.complex128)
    total = float(np.vdot(c, c).real)
    if c.size == 0 or total == 0.0:
        raise NumericDomainError("measurement coefficients are not normalizable")
    c = c / math.sqrt(total)
    d = max(c.size, 2)
    return ghz(3, d, c)


def random_state(dims: Sequence[int], rng: np.random.Generator) -> MultipartiteState:
    """Haar-random pure state."""
    dims = tuple(dims)
    v = rng.normal(size=math.prod(dims)) + 1j * rng.normal(size=math.prod(dims))
    return MultipartiteState(dims, v / np.linalg.norm(v))


# -- text serialization -----------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_state(state: MultipartiteState) -> str:
    """Serialize to the line-oriented text format.

    ::

        muqm-state 1
        dims 2 2
        mu 10            (or "mu -" when never discretized)
        <re> <im>        one line per amplitude, row-major
    """
    lines = [
        FORMAT_HEADER,
        "dims " + " ".join(str(d) for d in state.dims),
        "mu " + ("-" if state.mu is None else str(state.mu)),
    ]
    lines.extend(f"{_fmt(a.real)} {_fmt(a.imag)}" for a in state.amplitudes)
    return "\n".join(lines) + "\n"


def loads_state(text: str) -> MultipartiteState:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"missing '{FORMAT_HEADER}' header")
    try:
        key, *dim_tokens = lines[1].split()
        if key != "dims":
            raise ValueError("second line must start with 'dims'")
        dims = tuple(int(t) for t in dim_tokens)
        key, mu_token = lines[2].split()
        if key != "mu":
            raise ValueError("third line must start with 'mu'")
        mu = None if mu_token == "-" else int(mu_token)
        amps = []
        for ln in lines[3:]:
            re, im = ln.split()
            amps.append(complex(float(re), float(im)))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed state text: {exc}") from exc
    return MultipartiteState(dims, np.array(amps, dtype=np.complex128), mu=mu)


def save_state(state: MultipartiteState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_state(state))


def load_state(path) -> MultipartiteState:
    with open(path, encoding="utf-8") as fh:
        return loads_state(fh.read())
