"""Experiment configuration read from TOML.

Every section maps onto a dataclass; unknown sections or keys raise
:class:`ConfigError`.  Example::

    [problem]
    kind = "elliptic"          # or "finite"
    fixture = "fixture.toml"   # finite only

    [rates]
    alpha = 1.0
    beta = 2.0
    zeta = 1.0

    [study]
    epsilons = [0.125, 0.0625, 0.03125, 0.015625]
    replicates = 50
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .allocation import RateParameters

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("single-level-smc", "mlsmc-standard", "mlsmc-telescoped")


class ConfigError(ValueError):
    pass


@dataclass
class ProblemConfig:
    kind: str = "elliptic"
    fixture: str | None = None
    K: int = 50
    data_level: int = 10
    noise_seed: int = 0
    xi_std: float = 0.25
    truth_u: list[float] | None = None
    # all levels share this FEM level (degenerate G == 1 problem)
    fixed_fem_level: int | None = None
    proposal_mix: float = 0.5
    rw_step: float = 0.1
    coords_per_step: int = 5


@dataclass
class RatesConfig:
    alpha: float = 1.0
    beta: float = 2.0
    zeta: float = 1.0
    M_refine: int = 2
    k_offset: int = 3


@dataclass
class AllocationConfig:
    scale: float = 1.0
    baseline_scale: float = 1.0
    c: float = 2.0
    max_level: int = 12


@dataclass
class StudyConfig:
    epsilons: list[float] = field(default_factory=lambda: [2.0 ** -j for j in range(3, 7)])
    replicates: int = 50
    seed: int = 20160501
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    sweeps: int = 5
    init_oversample: int = 10
    init_sweeps: int = 10


@dataclass
class TruthConfig:
    level_offset: int = 2
    replicates: int = 200
    n_factor: int = 4
    max_se_ratio: float = 0.2


@dataclass
class VarianceConfig:
    levels: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    replicates: int = 100
    particles: int = 200


@dataclass
class OutputConfig:
    dir: str = "results"
    record_wall_clock: bool = False


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    allocation: AllocationConfig = field(default_factory=AllocationConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    truth: TruthConfig = field(default_factory=TruthConfig)
    variance: VarianceConfig = field(default_factory=VarianceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = "."

    def validate(self):
        if self.problem.kind not in ("elliptic", "finite"):
            raise ConfigError(f"unknown problem kind {self.problem.kind!r}")
        if self.problem.kind == "finite" and not self.problem.fixture:
            raise ConfigError("finite problems need problem.fixture")
        eps = self.study.epsilons
        if not eps or any(e <= 0 for e in eps):
            raise ConfigError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon grid must be strictly decreasing")
        if self.study.replicates < 2:
            raise ConfigError("need at least 2 replicates")
        bad = set(self.study.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        if self.truth.replicates < 2 or self.variance.replicates < 2:
            raise ConfigError("need at least 2 replicates")
        r = self.rates
        try:
            RateParameters(r.alpha, r.beta, r.zeta, r.M_refine, r.k_offset)
        except ValueError as exc:
            raise ConfigError(f"[rates]: {exc}") from exc
        return self

    def fixture_path(self):
        p = Path(self.problem.fixture)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def digest(self):
        """sha256 of everything that can change a number (output settings excluded)."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(unknown)}")
    return cls(**data)


def from_dict(data, base_dir="."):
    sections = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    sections.pop("base_dir")
    unknown = set(data) - set(sections)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    kinds = {
        "problem": ProblemConfig, "rates": RatesConfig,
        "allocation": AllocationConfig, "study": StudyConfig,
        "truth": TruthConfig, "variance": VarianceConfig, "output": OutputConfig,
    }
    parts = {name: _build(kinds[name], data[name], name) for name in data}
    return ExperimentConfig(**parts, base_dir=str(base_dir)).validate()


def load_config(path):
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data, base_dir=path.parent)
