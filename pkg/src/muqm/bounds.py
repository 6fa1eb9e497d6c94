"""Closed-form limits implied by a finite state resolution.

Integral quantities (``2**mu`` and friends) are exact Python integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Union

import scipy.constants

from .hilbert import ResolutionParams

MuLike = Union[int, ResolutionParams]

#: Commonly quoted cosmic bound on mu for S/k_B = 1e120. It does not follow
#: from log2(exp(S/k_B)) ~ 1.44e120 and is kept only for side-by-side reports.
QUOTED_COSMIC_MU_BOUND = 1e143


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float
    k_B: float
    unit_system: str

    def __post_init__(self):
        if self.hbar <= 0 or self.k_B <= 0:
            raise ValueError("physical constants must be positive")
        if self.unit_system not in ("natural", "SI"):
            raise ValueError(f"unknown unit system {self.unit_system!r}")


NATURAL = PhysicalConstants(1.0, 1.0, "natural")
SI = PhysicalConstants(scipy.constants.hbar, scipy.constants.k, "SI")


def _mu(res: MuLike) -> int:
    mu = res.mu if isinstance(res, ResolutionParams) else res
    if isinstance(mu, bool) or int(mu) != mu or mu < 0:
        raise ValueError(f"mu must be a non-negative integer, got {mu!r}")
    return int(mu)


def memory_capacity_qubits(total_bits: Real, res: MuLike) -> int:
    """Largest ``N`` with ``2**N * mu <= total_bits``."""
    mu = _mu(res)
    if mu < 1:
        raise ValueError("mu must be >= 1")
    total = Fraction(total_bits)
    if total <= 0:
        raise ValueError("total_bits must be positive")
    slots = math.floor(total / mu)
    if slots < 1:
        raise ValueError(f"{total_bits} bits cannot hold a single {mu}-bit amplitude")
    return slots.bit_length() - 1


def shor_max_n(res: MuLike) -> int:
    """Largest number factorizable before the register exceeds ``2**mu`` dimensions."""
    mu = _mu(res)
    if mu < 1:
        raise ValueError("mu must be >= 1")
    return 1 << mu


def spatial_resolution(L: float, res: MuLike) -> float:
    """Smallest cell size ``L / 2**(mu/3)`` keeping a region of side ``L`` resolvable."""
    if not L > 0:
        raise ValueError("L must be positive")
    return L / 2.0 ** (_mu(res) / 3)


def mu_upper_bound_from_entropy(S_over_kB: float) -> float:
    """``log2 D_univ`` for ``D_univ = exp(S/k_B)``, i.e. ``S/(k_B ln 2)``."""
    if not S_over_kB > 0:
        raise ValueError("entropy must be positive")
    return S_over_kB / math.log(2)


def bounds_table(total_bits: Real, mu: int, L: float, S_over_kB: float) -> dict:
    """All calculators at once, keyed as the ``bounds`` CLI reports them."""
    return {
        "mu": mu,
        "max_qubits": memory_capacity_qubits(total_bits, mu),
        "shor_max_n": shor_max_n(mu),
        "delta_x": spatial_resolution(L, mu),
        "mu_upper_bound": mu_upper_bound_from_entropy(S_over_kB),
        "mu_upper_bound_quoted": QUOTED_COSMIC_MU_BOUND,
    }
