"""Experiment configuration: flat ``key = value`` files and state presets.

A config file is a single ``[experiment]`` INI section::

    [experiment]
    experiment = ensemble
    state = eq1(sqrt(0.3), sqrt(0.7))
    mu = 10
    seed = 1234
    trajectories = 10000

Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
import re
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..errors import ConfigError
from ..hilbert import (
    MultipartiteState,
    ResolutionParams,
    basis_state,
    bell,
    ghz,
    load_state,
    measurement_state,
    w_state,
)

EXPERIMENTS = ("measurement_chain", "ensemble", "recollapse", "truncate", "bounds", "analyze")
STOCHASTIC = ("measurement_chain", "ensemble", "recollapse")
FORMATS = ("csv", "json")
UNITARIES = ("ghz-entangler", "identity")
SECTION = "experiment"
MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    state: Optional[str] = None
    mu: int = 10
    kappa: float = 1.0
    seed: Optional[int] = None
    trajectories: int = 1
    steps: int = 10
    output: Optional[str] = None
    format: str = "csv"
    unitary: str = "ghz-entangler"
    total_bits: float = 1e21
    length: float = 1.0
    entropy: float = 1e120

    def __post_init__(self):
        validate(self)

    @property
    def resolution(self) -> ResolutionParams:
        return ResolutionParams(self.mu, kappa=self.kappa)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT_KEYS = ("mu", "seed", "trajectories", "steps")
_FLOAT_KEYS = ("kappa", "total_bits", "length", "entropy")


def validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {cfg.experiment!r}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be csv or json; got {cfg.format!r}")
    if cfg.unitary not in UNITARIES:
        raise ConfigError(f"unitary must be one of {', '.join(UNITARIES)}; got {cfg.unitary!r}")
    if not isinstance(cfg.mu, int) or cfg.mu < 1:
        raise ConfigError(f"mu must be a positive integer; got {cfg.mu!r}")
    if not 0 < cfg.kappa <= 1:
        raise ConfigError(f"kappa must lie in (0, 1]; got {cfg.kappa!r}")
    if cfg.seed is not None and not 0 <= cfg.seed <= MAX_SEED:
        raise ConfigError(f"seed must be a 64-bit unsigned integer; got {cfg.seed!r}")
    if cfg.experiment in STOCHASTIC and cfg.seed is None:
        raise ConfigError(f"a seed is required for the {cfg.experiment} experiment")
    if cfg.trajectories < 1:
        raise ConfigError(f"trajectories must be >= 1; got {cfg.trajectories!r}")
    if cfg.steps < 0:
        raise ConfigError(f"steps must be >= 0; got {cfg.steps!r}")
    for key in ("total_bits", "length", "entropy"):
        v = getattr(cfg, key)
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"{key} must be a positive finite number; got {v!r}")
    if cfg.experiment not in ("bounds",) and not cfg.state:
        raise ConfigError(f"the {cfg.experiment} experiment needs a state")


def _coerce(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw, 0)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw or None


def config_from_mapping(values: dict) -> ExperimentConfig:
    unknown = sorted(set(values) - set(FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "experiment" not in values:
        raise ConfigError("config is missing the 'experiment' key")
    coerced = {k: (_coerce(k, v) if isinstance(v, str) else v) for k, v in values.items()}
    return ExperimentConfig(**coerced)


def loads_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    extra = [s for s in parser.sections() if s != SECTION]
    if extra or not parser.has_section(SECTION):
        raise ConfigError(f"config must contain exactly one [{SECTION}] section")
    return config_from_mapping(dict(parser.items(SECTION)))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dumps_config(cfg: ExperimentConfig) -> str:
    lines = [f"[{SECTION}]"]
    for name in FIELDS:
        v = getattr(cfg, name)
        if v is None:
            continue
        if isinstance(v, float):
            v = format(v, ".17g")
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"


# -- state presets ----------------------------------------------------------

_PRESET = re.compile(r"^\s*([a-z0-9_]+)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)
_SQRT = re.compile(r"^([+-]?)sqrt\((.+)\)$")


def parse_number(token: str) -> complex:
    """Parse a real/complex literal, optionally as ``sqrt(x)`` or ``-sqrt(x)``."""
    tok = token.strip().replace(" ", "")
    m = _SQRT.match(tok)
    try:
        if m:
            inner = float(m.group(2))
            if inner < 0:
                raise ValueError
            val = math.sqrt(inner)
            return complex(-val if m.group(1) == "-" else val)
        return complex(tok)
    except ValueError as exc:
        raise ConfigError(f"cannot parse number {token!r}") from exc


def _args(raw: Optional[str]) -> List[str]:
    if raw is None or not raw.strip():
        return []
    return [a for a in (x.strip() for x in raw.split(",")) if a]


def _int_arg(args: List[str], name: str, default: Optional[int] = None) -> int:
    if not args:
        if default is None:
            raise ConfigError(f"{name}(...) needs an integer argument")
        return default
    if len(args) != 1:
        raise ConfigError(f"{name}(...) takes one integer argument")
    try:
        n = int(args[0])
    except ValueError as exc:
        raise ConfigError(f"{name}(...) needs an integer, got {args[0]!r}") from exc
    if n < 2:
        raise ConfigError(f"{name}(...) needs at least 2 parties")
    return n


def coherent_alpha(spec: str) -> complex:
    m = _PRESET.match(spec)
    if not m or m.group(1).lower() != "coherent":
        raise ConfigError(f"expected coherent(alpha), got {spec!r}")
    args = _args(m.group(2))
    if len(args) != 1:
        raise ConfigError("coherent(...) takes one amplitude")
    return parse_number(args[0])


def build_state(spec: str) -> MultipartiteState:
    """Build a state from a preset or load it from a state file.

    Presets: ``bell``, ``ghz(N)``, ``w(N)``, ``eq1(c0, c1, ...)``,
    ``basis(0101)``. Anything else is taken as a path.
    """
    m = _PRESET.match(spec)
    if m:
        name, args = m.group(1).lower(), _args(m.group(2))
        if name == "bell" and not args:
            return bell()
        if name == "ghz":
            return ghz(_int_arg(args, "ghz", 3))
        if name == "w":
            return w_state(_int_arg(args, "w", 3))
        if name == "eq1":
            if not args:
                raise ConfigError("eq1(...) needs coefficients")
            return measurement_state([parse_number(a) for a in args])
        if name == "basis":
            if len(args) != 1 or not re.fullmatch(r"[01]{2,}", args[0]):
                raise ConfigError("basis(...) takes a bit string of at least two qubits, e.g. basis(0101)")
            bits = [int(b) for b in args[0]]
            return basis_state((2,) * len(bits), bits)
        if name == "coherent":
            raise ConfigError("coherent(alpha) is only valid for the truncate experiment")
    if os.path.exists(spec):
        try:
            return load_state(spec)
        except ValueError as exc:
            raise ConfigError(f"cannot load state file {spec}: {exc}") from exc
    raise ConfigError(f"unknown state preset or missing file: {spec!r}")


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for trajectory ``index`` of a run seeded with ``seed``.

    ``PCG64(SeedSequence(seed, spawn_key=(index,)))``: independent of how
    many other trajectories exist or the order they run in.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))
