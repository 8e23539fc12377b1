"""Experiment descriptions: models, strict JSON configs and run plumbing.

A config names a model, an inference method, a data source, sampler sizes and
optional overrides of the model's default prior, constraints and ABC
settings.  Unknown keys anywhere are rejected.  Everything random derives
from the config seed:

* stream 1 simulates the data (unless ``data.seed`` is given),
* stream 2 drives the inference method,
* stream 3 seeds replicate studies,
* stream 4 builds the ABC reference table shared by replicates.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .abc import (SUMMARIES, ABCConfig, ArchSim, CoalescentSim, GarchSim, GkSim,
                  NormalSim, abc_rejection, reference_table)
from .constraints import ArchResiduals, GarchScore, GkParams, GkPercentiles, NormalMoments
from .data import load_dataset
from .el import SolverConfig
from .mathfn import rng_stream
from .popgen import CompositeScore
from .priors import PriorSpec
from .samplers import WeightedSample, bcel_amis, bcel_basic
from .simulate import ScenarioSpec, sim_arch, sim_coalescent, sim_garch, sim_gk, sim_normal
from .study import StudyDescriptor

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Experiment",
    "MODELS",
    "METHODS",
    "load_config",
]

METHODS = ("bcel", "bcel-amis", "abc", "stub")

STREAM_DATA, STREAM_METHOD, STREAM_REPLICATE, STREAM_REFERENCE = 1, 2, 3, 4


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _strict(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(raw) - names)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from None


@dataclass(frozen=True)
class DataConfig:
    source: str = "simulate"
    truth: list | None = None
    size: int | dict | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self):
        if self.source not in ("simulate", "file"):
            raise ValueError("source must be 'simulate' or 'file'")
        if self.source == "file" and not self.path:
            raise ValueError("file source needs a path")


@dataclass(frozen=True)
class SamplerSettings:
    M: int = 5000
    T_M: int = 1
    mixture: str = "full"

    def __post_init__(self):
        if self.M < 1 or self.T_M < 1:
            raise ValueError("M and T_M must be positive")
        if self.mixture not in ("full", "paper-literal"):
            raise ValueError("mixture must be 'full' or 'paper-literal'")


@dataclass(frozen=True)
class ABCSettings:
    summary: str | None = None
    distance: str = "mahalanobis-diagonal"
    quantile: float | None = 0.01
    epsilon: float | None = None
    M: int = 1000
    max_sims: int = 10_000_000

    def build(self, default_summary: str) -> ABCConfig:
        summary = self.summary or default_summary
        if summary not in SUMMARIES:
            raise ValueError(f"unknown summary {summary!r}")
        quantile = None if self.epsilon is not None else self.quantile
        return ABCConfig(summary=summary, distance=self.distance, epsilon=self.epsilon,
                         quantile=quantile, M=self.M, max_sims=self.max_sims)


@dataclass(frozen=True)
class ReplicateSettings:
    R: int = 10
    methods: list | None = None


@dataclass(frozen=True)
class SolverSettings:
    grad_tol: float = 1e-8
    max_iter: int = 100
    hull_tol: float = 1e-10


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully serializable description of one experiment."""

    model: str = "normal"
    method: str = "bcel"
    seed: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    prior: dict | None = None
    constraints: dict = field(default_factory=dict)
    abc: ABCSettings = field(default_factory=ABCSettings)
    replicate: ReplicateSettings = field(default_factory=ReplicateSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    out: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        top = {f.name for f in dataclasses.fields(cls)}
        extra = sorted(set(raw) - top)
        if extra:
            raise ConfigError(f"config: unknown key(s) {', '.join(extra)}")
        parts = dict(raw)
        nested = {"data": DataConfig, "sampler": SamplerSettings, "abc": ABCSettings,
                  "replicate": ReplicateSettings, "solver": SolverSettings}
        for key, sub in nested.items():
            if key in parts:
                parts[key] = _strict(sub, parts[key], key)
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else dataclasses.replace(self, seed=int(seed))

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {sorted(MODELS)}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        allowed = MODELS[self.model].constraint_keys
        extra = sorted(set(self.constraints) - set(allowed))
        if extra:
            raise ConfigError(f"constraints: unknown key(s) {', '.join(extra)} for {self.model}")
        for m in self.replicate.methods or ():
            if m not in METHODS:
                raise ConfigError(f"replicate.methods: unknown method {m!r}")
        try:
            Experiment(self)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as err:
            raise ConfigError(str(err)) from None


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# model registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelDef:
    kind: str
    names: tuple
    truth: tuple
    size: object
    prior: dict
    summary: str
    constraint_keys: tuple = ()


def _box(lo, hi, transform="identity"):
    return {"type": "uniform", "lo": list(lo), "hi": list(hi), "transform": transform}


MODELS = {
    "normal": ModelDef("iid", ("mu",), (0.0,), 100,
                       {"blocks": [_box([-5.0], [5.0])]}, "mean", ("order",)),
    "gk": ModelDef("iid", ("A", "B", "g", "k"), (3.0, 1.0, 2.0, 0.5), 100,
                   {"blocks": [_box([2.0, 0.5, 1.0, 0.0], [4.0, 1.5, 3.0, 1.0])]},
                   "octiles", ("probs", "c")),
    "arch": ModelDef("series", ("alpha0", "alpha1"), (0.5, 0.3), 500,
                     {"blocks": [{"type": "dirichlet", "alpha": [1.0, 1.0, 1.0]}]},
                     "arch-ls", ("variant",)),
    "garch": ModelDef("series", ("alpha0", "alpha1", "beta1"), (0.1, 0.1, 0.8), 1000,
                      {"blocks": [{"type": "exponential", "rate": 1.0},
                                  {"type": "dirichlet", "alpha": [1.0, 1.0, 1.0]}]},
                      "garch-mle"),
    "popgen-A": ModelDef("microsat", ("theta", "tau"), (5.0, 1.0),
                         {"individuals_per_pop": 30, "loci": 100},
                         {"blocks": [_box([-1.0, -1.0], [1.5, 1.0], "log10")]},
                         "popgen", ("theta_same_pop_only",)),
    "popgen-B": ModelDef("microsat", ("theta", "tau1", "tau2"), (5.0, 1.0, 10.0),
                         {"individuals_per_pop": 30, "loci": 100},
                         {"blocks": [_box([-1.0, -1.0, -1.0], [1.5, 2.0, 2.0], "log10")],
                          "ordered": [[1, 2]], "support_mass": 0.5},
                         "popgen", ("theta_same_pop_only",)),
}


class Experiment:
    """Resolved experiment: prior, provider, simulators and method runners."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.model = MODELS[config.model]
        prior_cfg = config.prior if config.prior is not None else self.model.prior
        prior_cfg = dict(prior_cfg)
        prior_cfg.setdefault("names", list(self.model.names))
        extra = sorted(set(prior_cfg) - {"blocks", "names", "ordered", "support_mass"})
        if extra:
            raise ConfigError(f"prior: unknown key(s) {', '.join(extra)}")
        self.prior = PriorSpec.from_config(prior_cfg)
        if self.prior.dim != len(self.model.names):
            raise ConfigError(f"prior has dimension {self.prior.dim}, "
                              f"{config.model} needs {len(self.model.names)}")
        self.truth = np.asarray(config.data.truth if config.data.truth is not None
                                else self.model.truth, dtype=float)
        if self.truth.size != len(self.model.names):
            raise ConfigError("truth has the wrong length")
        self.size = config.data.size if config.data.size is not None else self.model.size
        self.provider = self._provider()
        self.solver = SolverConfig(**dataclasses.asdict(config.solver))
        self.abc_config = config.abc.build(self.model.summary)
        if config.model.startswith("popgen"):
            self.spec = ScenarioSpec(config.model[-1], **self.size)
        self._reference = None

    def _provider(self):
        c, name = self.config.constraints, self.config.model
        if name == "normal":
            return NormalMoments(c.get("order", 1))
        if name == "gk":
            return GkPercentiles(tuple(c.get("probs", (0.25, 0.5, 0.75))), c.get("c", 0.8))
        if name == "arch":
            return ArchResiduals(c.get("variant", "correlations"))
        if name == "garch":
            return GarchScore()
        return CompositeScore(name[-1], c.get("theta_same_pop_only"))

    # -- data ---------------------------------------------------------------

    def simulate_data(self, rng, truth=None):
        t = self.truth if truth is None else np.asarray(truth, dtype=float)
        name = self.config.model
        if name == "normal":
            return sim_normal(rng, self.size, t[0])
        if name == "gk":
            return sim_gk(rng, self.size, GkParams(*t, c=self.provider.c))
        if name == "arch":
            return sim_arch(rng, self.size, *t)
        if name == "garch":
            return sim_garch(rng, self.size, *t)
        return sim_coalescent(rng, self.spec, t)

    def load_data(self):
        d = self.config.data
        if d.source == "file":
            try:
                data = load_dataset(d.path, self.model.kind)
            except (OSError, ValueError) as err:
                raise ConfigError(f"cannot load {d.path}: {err}") from None
            if self.model.kind == "microsat" and data.scenario != self.config.model[-1]:
                raise ConfigError(f"data file is scenario {data.scenario}, "
                                  f"model is {self.config.model}")
            return data, False
        seed = self.config.seed if d.seed is None else d.seed
        return self.simulate_data(rng_stream(seed, STREAM_DATA)), True

    # -- inference ----------------------------------------------------------

    def simulator(self):
        name = self.config.model
        if name == "normal":
            return NormalSim(self.size)
        if name == "gk":
            return GkSim(self.size, self.provider.c)
        if name == "arch":
            return ArchSim(self.size)
        if name == "garch":
            return GarchSim(self.size)
        return CoalescentSim(self.spec)

    def summary(self):
        return SUMMARIES[self.abc_config.summary]()

    def shared_reference(self):
        """ABC reference table built once per experiment from its own stream."""
        if self._reference is None and self.abc_config.quantile is not None:
            self._reference = reference_table(
                rng_stream(self.config.seed, STREAM_REFERENCE), self.prior,
                self.simulator(), self.summary(), self.abc_config.n_sims)
        return self._reference

    def run(self, method, rng, data, threads: int = 1, reference=None) -> WeightedSample:
        s = self.config.sampler
        if method == "bcel":
            return bcel_basic(rng, self.prior, self.provider, data, s.M, self.solver, threads)
        if method == "bcel-amis":
            return bcel_amis(rng, self.prior, self.provider, data, s.M, s.T_M,
                             s.mixture, self.solver, threads)
        if method == "abc":
            return abc_rejection(rng, self.prior, self.simulator(), self.summary(),
                                 self.abc_config, data, reference=reference)
        if method == "stub":
            return self.stub_sample()
        raise ConfigError(f"unknown method {method!r}")

    def stub_sample(self) -> WeightedSample:
        """A single particle at the truth (pipeline checks only)."""
        params = self.truth[None, :]
        return WeightedSample(self.prior.to_working(params), params, np.zeros(1),
                              np.ones(1, dtype=np.int64), self.prior.names)

    def study(self, methods, threads: int = 1) -> StudyDescriptor:
        runners = {}
        for m in methods:
            if m == "abc":
                runners[m] = lambda rng, data: self.run(
                    "abc", rng, data, threads, reference=self.shared_reference())
            else:
                runners[m] = lambda rng, data, m=m: self.run(m, rng, data, threads)
        return StudyDescriptor(simulate=self.simulate_data, methods=runners,
                               names=self.prior.names)
