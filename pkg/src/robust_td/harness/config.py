"""Experiment configuration: YAML files validated by pydantic models.

Every file carries ``schema: robust-td-experiment/1``. Unknown keys are
errors. Validation failures are raised as :class:`ConfigError` whose message
lists ``file:line: field.path: problem`` for each offending field.

Example::

    schema: robust-td-experiment/1
    instance:
      generator: {num_states: 50, K: 5, gamma: 0.5, reward_lo: 0, reward_hi: 5, seed: 0}
    noise: {kind: gaussian, variance: 1.0}
    attack: {kind: constant_bias, eps: 0.01, bias: 10000}
    learner:
      kind: robust_td
      alpha: 0.1
      burn_in: 1000
      constant_C: 8
      schedule: practical
    trials: 10
    T: 100000
    log_stride: 100
    base_seed: 0
    output: results/robust_eps0.01
"""

from typing import List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..contamination import AttackModel, RewardNoise
from ..learners import StepSchedule
from ..mrp import Mrp, load_mrp
from .instances import generate_instance

__all__ = [
    "SCHEMA",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "dump_config",
]

SCHEMA = "robust-td-experiment/1"


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeneratorSpec(_Model):
    num_states: int = Field(ge=1)
    K: int = Field(ge=1)
    gamma: float = Field(gt=0.0, lt=1.0)
    reward_lo: float = 0.0
    reward_hi: float = 5.0
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.K > self.num_states:
            raise ValueError(f"K={self.K} exceeds num_states={self.num_states}")
        if self.reward_hi < self.reward_lo:
            raise ValueError("reward_hi must be >= reward_lo")
        return self


class InlineMrpSpec(_Model):
    transition: List[List[float]]
    mean_rewards: List[float]
    discount: float
    features: List[List[float]]


class InstanceSpec(_Model):
    generator: Optional[GeneratorSpec] = None
    inline: Optional[InlineMrpSpec] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [k for k in ("generator", "inline", "file") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"give exactly one of generator, inline, file (got {given or 'none'})")
        return self

    def build(self):
        if self.generator is not None:
            g = self.generator
            return generate_instance(g.num_states, g.K, g.gamma, g.reward_lo, g.reward_hi, g.seed)
        if self.inline is not None:
            m = self.inline
            return Mrp(m.transition, m.mean_rewards, m.discount, m.features)
        return load_mrp(self.file)


class NoiseSpec(_Model):
    kind: Literal["deterministic", "gaussian", "uniform_shift", "two_point_heavy_tail"] = "deterministic"
    variance: Optional[float] = Field(default=None, ge=0.0)
    half_width: Optional[float] = Field(default=None, ge=0.0)
    magnitude: Optional[float] = Field(default=None, ge=0.0)
    probability: Optional[float] = Field(default=None, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _fields_for_kind(self):
        need = {
            "deterministic": (),
            "gaussian": ("variance",),
            "uniform_shift": ("half_width",),
            "two_point_heavy_tail": ("magnitude", "probability"),
        }[self.kind]
        for name in ("variance", "half_width", "magnitude", "probability"):
            present = getattr(self, name) is not None
            if name in need and not present:
                raise ValueError(f"noise kind {self.kind!r} requires {name!r}")
            if name not in need and present:
                raise ValueError(f"{name!r} does not apply to noise kind {self.kind!r}")
        return self

    def build(self):
        if self.kind == "gaussian":
            return RewardNoise.gaussian(self.variance)
        if self.kind == "uniform_shift":
            return RewardNoise.uniform_shift(self.half_width)
        if self.kind == "two_point_heavy_tail":
            return RewardNoise.two_point_heavy_tail(self.magnitude, self.probability)
        return RewardNoise.deterministic()


class AttackSpec(_Model):
    kind: Literal["none", "constant_bias", "state_bias", "sign_flip"] = "none"
    eps: float = Field(default=0.0, ge=0.0, lt=0.5)
    bias: Optional[float] = None
    bias_times_eps: Optional[float] = None
    C: Optional[List[float]] = None
    scale: Optional[float] = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        allowed = {
            "none": (),
            "constant_bias": ("bias", "bias_times_eps"),
            "state_bias": ("C",),
            "sign_flip": ("scale",),
        }[self.kind]
        for name in ("bias", "bias_times_eps", "C", "scale"):
            if getattr(self, name) is not None and name not in allowed:
                raise ValueError(f"{name!r} does not apply to attack kind {self.kind!r}")
        if self.kind == "none" and self.eps != 0.0:
            raise ValueError("attack kind 'none' requires eps = 0")
        if self.kind == "constant_bias":
            if (self.bias is None) == (self.bias_times_eps is None):
                raise ValueError("constant_bias needs exactly one of 'bias', 'bias_times_eps'")
            if self.bias_times_eps is not None and self.eps == 0.0:
                raise ValueError("'bias_times_eps' needs eps > 0")
        if self.kind == "state_bias" and self.C is None:
            raise ValueError("state_bias requires 'C'")
        return self

    def build(self):
        if self.kind == "constant_bias":
            bias = self.bias if self.bias is not None else self.bias_times_eps / self.eps
            return AttackModel.constant_bias(self.eps, bias)
        if self.kind == "state_bias":
            return AttackModel.state_bias(self.eps, self.C)
        if self.kind == "sign_flip":
            return AttackModel.sign_flip(self.eps, 1.0 if self.scale is None else self.scale)
        return AttackModel.none()


class StepSpec(_Model):
    kind: Literal["constant", "diminishing"] = "diminishing"
    alpha: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    c: float = Field(default=1.0, gt=0.0)
    t0: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "constant" and self.alpha is None:
            raise ValueError("constant step requires 'alpha'")
        if self.kind == "diminishing" and self.alpha is not None:
            raise ValueError("'alpha' does not apply to a diminishing step; use c and t0")
        return self

    def build(self):
        if self.kind == "constant":
            return StepSchedule.constant(self.alpha)
        return StepSchedule.diminishing(self.c, self.t0)


class Td0Spec(_Model):
    kind: Literal["td0"]
    step: StepSpec = StepSpec()


class RobustTdSpec(_Model):
    """``"finite_time"`` for alpha/burn_in uses the finite-time schedule; ``"auto"``
    derives eps from the attack, tau_mix from the chain and sigma1 from the
    reward bound and noise variance."""

    kind: Literal["robust_td"]
    alpha: Union[float, Literal["finite_time"]] = "finite_time"
    burn_in: Union[int, Literal["finite_time"]] = "finite_time"
    c1: float = Field(default=4.0, gt=0.0)
    c2: float = Field(default=16.0, gt=0.0)
    sigma1: Union[float, Literal["auto"]] = "auto"
    eps: Union[float, Literal["auto"]] = "auto"
    tau_mix: Union[int, Literal["auto"]] = "auto"
    constant_C: float = Field(default=1.0, ge=1.0)
    estimation_stride: int = Field(default=1, ge=1)
    schedule: Literal["analysis", "practical"] = "analysis"
    strict: bool = True


class ExperimentConfig(_Model):
    schema_: Literal["robust-td-experiment/1"] = Field(alias="schema")
    instance: InstanceSpec
    noise: NoiseSpec = NoiseSpec()
    attack: AttackSpec = AttackSpec()
    learner: Union[Td0Spec, RobustTdSpec] = Field(discriminator="kind")
    trials: int = Field(default=10, ge=1)
    T: int = Field(default=100_000, ge=2)
    log_stride: int = Field(default=100, ge=1)
    base_seed: int = Field(default=0, ge=0)
    output: str = "results"
    start: Union[Literal["stationary"], int] = "stationary"

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    def seeds(self):
        return [self.base_seed + i for i in range(self.trials)]

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        data = self.model_dump(by_alias=True)
        data.update(kw)
        return ExperimentConfig.model_validate(data)


def _node_marks(node, path=(), out=None):
    """Map key paths of a composed YAML tree to the line of the offending node."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _node_marks(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _node_marks(v, path + (i,), out)
    return out


def _line_for(loc, marks):
    # Pydantic inserts union tags (e.g. 'robust_td') into locations; drop
    # path elements that do not exist in the document.
    path = ()
    line = marks.get((), 1)
    for part in loc:
        if path + (part,) in marks:
            path = path + (part,)
            line = marks[path]
    return line


def parse_config(text, source="<config>"):
    """Parse and validate YAML text into an :class:`ExperimentConfig`."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")
    if data.get("schema") != SCHEMA:
        raise ConfigError(f"{source}:{_line_for(('schema',), _node_marks(node))}: schema: expected {SCHEMA!r}, got {data.get('schema')!r}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        marks = _node_marks(node)
        lines = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            field = ".".join(str(p) for p in loc) or "<root>"
            lines.append(f"{source}:{_line_for(loc, marks)}: {field}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def dump_config(cfg):
    """YAML text that :func:`parse_config` maps back to an equal config."""
    data = cfg.model_dump(by_alias=True, exclude_none=True, mode="json")
    return yaml.safe_dump(data, sort_keys=False)


def resolve(cfg):
    """Concrete objects for one experiment: ``(mrp, noise, attack)``."""
    try:
        return cfg.instance.build(), cfg.noise.build(), cfg.attack.build()
    except (ValueError, OSError) as exc:
        raise ConfigError(f"instance/noise/attack: {exc}") from None


def default_sigma1(mrp, noise):
    from ..learners import sigma1

    return sigma1(mrp.reward_bound, float(np.sqrt(noise.variance_bound)))
