"""Requirements and the two readings of verification.

External verification scores a concept against the environment's requirement
set. Internal verification is the machine's own estimate: an expected reward
over the declared models, conditioned on which of its internal requirements
the concept meets. Revision adjusts per-requirement agreement scores after
each submission and drops requirements that keep disagreeing with the
observed reward.
"""
import math
from dataclasses import dataclass, replace

from . import textio
from .errors import CompileError

LOCATIONS = ("environment-held", "machine-internal")
DROP_THRESHOLD = -3


@dataclass(frozen=True)
class Requirement:
    id: str
    scenario: dict
    weight: float = 1.0
    score: int = 0

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"requirement {self.id}: weight must be >= 0")

    def __hash__(self):
        return hash((self.id, textio.dumps(self.scenario), self.weight, self.score))

    def to_obj(self):
        return {"id": self.id, "scenario": self.scenario, "weight": self.weight, "score": self.score}

    @classmethod
    def from_obj(cls, obj):
        return cls(obj["id"], obj["scenario"], float(obj.get("weight", 1.0)), int(obj.get("score", 0)))


@dataclass(frozen=True)
class RequirementSet:
    requirements: tuple = ()
    location: str = "machine-internal"

    def __post_init__(self):
        if self.location not in LOCATIONS:
            raise ValueError(f"unknown requirement location {self.location!r}")
        ids = [r.id for r in self.requirements]
        if len(set(ids)) != len(ids):
            raise ValueError("requirement ids must be unique")

    def __iter__(self):
        return iter(self.requirements)

    def __len__(self):
        return len(self.requirements)

    @property
    def total_weight(self):
        return math.fsum(r.weight for r in self.requirements)

    def get(self, rid):
        for r in self.requirements:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def without(self, rid):
        return RequirementSet(tuple(r for r in self.requirements if r.id != rid), self.location)

    def scaled(self, factor):
        return RequirementSet(tuple(replace(r, weight=r.weight * factor) for r in self.requirements),
                              self.location)

    def to_obj(self):
        return {"location": self.location, "requirements": [r.to_obj() for r in self.requirements]}

    @classmethod
    def from_obj(cls, obj, location=None):
        return cls(tuple(Requirement.from_obj(r) for r in obj["requirements"]),
                   location or obj.get("location", "machine-internal"))

    @property
    def digest(self):
        return textio.content_hash(self.to_obj())


def _check_compiles(c, domain):
    if not c.is_empty:
        domain.compiled(c)


def verify_external(c, phi_env, domain, params=None, partial_credit=True):
    """Satisfied requirement weight less the domain cost term.

    Without partial credit the concept earns the full weight only when every
    requirement holds, and nothing otherwise. ``⊤`` always scores 0.
    """
    if c.is_empty:
        return 0.0
    _check_compiles(c, domain)
    ok = domain.satisfied(c, [r.scenario for r in phi_env])
    if partial_credit:
        gained = math.fsum(r.weight for r, hit in zip(phi_env, ok) if hit)
    elif all(ok):
        gained = phi_env.total_weight
    else:
        return 0.0
    return gained - domain.cost(c, params or {})


def satisfies(c, requirement, domain):
    if c.is_empty:
        return False
    return domain.satisfied(c, [requirement.scenario])[0]


def utility_cpe(c, phi, models, domain):
    """Expected reward of submitting ``c`` while asserting ``phi``.

    Each model pays its full requirement weight when the assertion holds and
    always charges its cost term: ``sum_i w_i (W_i [c |= phi] - cost_i(c))``.
    """
    if c.is_empty:
        return 0.0
    _check_compiles(c, domain)
    hit = satisfies(c, phi, domain)
    return math.fsum(m.weight * ((m.requirements.total_weight if hit else 0.0) - domain.cost(c, m.params))
                     for m in models)


def verify_internal(c, phi_int, models, domain, normalize=True):
    """Weighted ``utility_cpe`` over the internal requirements; 0 for an empty set."""
    total = phi_int.total_weight
    if not len(phi_int) or total == 0:
        return 0.0
    scale = 1.0 / total if normalize else 1.0
    return math.fsum(r.weight * scale * utility_cpe(c, r, models, domain) for r in phi_int)


def revise_requirements(phi_int, reward, c, domain):
    """One agreement step per requirement after a submission.

    A requirement predicts a positive reward when ``c`` meets it and a
    non-positive one otherwise. Its score moves +1 when that prediction has
    the sign of the observed reward and -1 when it does not; requirements at
    or below the drop threshold are removed. Environment-held sets are
    returned unchanged.
    """
    if phi_int.location == "environment-held":
        return phi_int
    observed = 1 if reward > 0 else -1
    kept = []
    for r in phi_int:
        try:
            predicted = 1 if satisfies(c, r, domain) else -1
        except CompileError:
            predicted = -1
        score = r.score + (1 if predicted == observed else -1)
        if score > DROP_THRESHOLD:
            kept.append(replace(r, score=score))
    return RequirementSet(tuple(kept), phi_int.location)
