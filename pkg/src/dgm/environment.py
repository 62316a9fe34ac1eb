"""Deterministic reward environments and the declared model set ``M``.

Each model scores a submitted concept against its environment-held
requirement set and charges a cost term. Rewards are terminal by default:
the whole reward arrives at the submission step. Model sets load from a file
listing the models; requirement files referenced by path are inlined so the
set's content hash covers both ``M`` and the requirements.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import domains, textio
from .errors import EnvironmentContractError, UsageError
from .verification import RequirementSet, verify_external

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class EnvironmentModel:
    id: str
    domain: str
    requirements: RequirementSet
    horizon: int
    weight: float = 1.0
    params: dict = field(default_factory=dict)
    partial_credit: bool = True
    reward_range: tuple = (-math.inf, math.inf)
    shaping: str = "terminal"

    def __hash__(self):
        return hash(self.digest)

    def __post_init__(self):
        if self.requirements.location != "environment-held":
            raise ValueError(f"model {self.id}: requirements must be environment-held")
        if self.shaping not in ("terminal", "spread"):
            raise ValueError(f"model {self.id}: unknown shaping {self.shaping!r}")

    @property
    def domain_impl(self):
        return domains.get(self.domain)

    def reward(self, c):
        """Reward for submitting ``c``; checked against the declared range."""
        r = verify_external(c, self.requirements, self.domain_impl, self.params, self.partial_credit)
        lo, hi = self.reward_range
        if not lo <= r <= hi:
            raise EnvironmentContractError(f"model {self.id}: reward {r} outside [{lo}, {hi}]")
        return r

    def to_obj(self):
        lo, hi = self.reward_range
        return {
            "id": self.id, "domain": self.domain, "weight": self.weight, "horizon": self.horizon,
            "params": self.params, "partial_credit": self.partial_credit,
            "reward_range": [lo, hi], "shaping": self.shaping,
            "requirements": self.requirements.to_obj(),
        }

    @classmethod
    def from_obj(cls, obj, base=None):
        req = obj["requirements"]
        if isinstance(req, str):
            req = textio.read(Path(base or ".") / req)
        lo, hi = obj.get("reward_range", [-1e9, 1e9])
        return cls(obj["id"], obj["domain"], RequirementSet.from_obj(req, "environment-held"),
                   int(obj["horizon"]), float(obj.get("weight", 1.0)), dict(obj.get("params", {})),
                   bool(obj.get("partial_credit", True)), (float(lo), float(hi)),
                   obj.get("shaping", "terminal"))

    @property
    def digest(self):
        return textio.content_hash(self.to_obj())


def env_evaluate(model, c, step=None):
    """Reward stream of length ``model.horizon`` for submitting ``c`` at ``step``.

    ``step`` defaults to the last step. The terminal mode pays everything at
    ``step``; the spread mode pays equal parts from step 0 through ``step``.
    """
    T = model.horizon
    step = T - 1 if step is None else step
    if not 0 <= step < T:
        raise ValueError(f"submission step {step} outside 0..{T - 1}")
    stream = [0.0] * T
    if c.is_empty:
        return stream
    r = model.reward(c)
    if model.shaping == "terminal":
        stream[step] = r
    else:
        for t in range(step + 1):
            stream[t] = r / (step + 1)
    return stream


@dataclass(frozen=True)
class ModelSet:
    """The finite weighted set ``M``; weights sum to 1 and horizons agree."""

    models: tuple

    def __post_init__(self):
        if not self.models:
            raise ValueError("a model set needs at least one model")
        if abs(math.fsum(m.weight for m in self.models) - 1.0) > WEIGHT_TOLERANCE:
            raise EnvironmentContractError("model weights must sum to 1")
        if len({m.horizon for m in self.models}) != 1:
            raise EnvironmentContractError("models in one set must share a horizon")
        if len({m.domain for m in self.models}) != 1:
            raise EnvironmentContractError("models in one set must share a domain")
        if len({m.id for m in self.models}) != len(self.models):
            raise ValueError("model ids must be unique")

    def __iter__(self):
        return iter(self.models)

    def __len__(self):
        return len(self.models)

    @property
    def horizon(self):
        return self.models[0].horizon

    @property
    def domain(self):
        return self.models[0].domain

    def to_obj(self):
        return {"models": [m.to_obj() for m in self.models]}

    @classmethod
    def from_obj(cls, obj, base=None):
        return cls(tuple(EnvironmentModel.from_obj(m, base) for m in obj["models"]))

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise UsageError(f"model file {path} not found")
        return cls.from_obj(textio.read(path), path.parent)

    @property
    def digest(self):
        return textio.content_hash(self.to_obj())


def compile_concept(c, domain, horizon=None):
    """Machine semantics of ``c`` in ``domain`` (a name or a domain object)."""
    if isinstance(domain, str):
        domain = domains.get(domain)
    return domain.compile(c, horizon)
