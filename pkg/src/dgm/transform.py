"""Transformational engine: proposals, certificates and the switch.

A proposal edits one part of a machine state: its rules, its policy, its
utility parameters or its meta parameters. Certification evaluates the
basis and the successor under every declared model with identical seeds
and the basis expansion charge, and concludes strict improvement under the
configured rule (every model by default). Checking a certificate repeats
both evaluations from stored snapshots and compares every number exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from . import textio
from .errors import (
    CertificateInvalidError,
    ForbiddenEditError,
    MalformedProposalError,
    StaleBasisError,
    UnresolvableHashError,
)
from .explore import DesignSequence, MachineState, run_episode
from .language import Rule, is_permissible

CHECKER_VERSION = "dgm-checker/1"
TARGETS = ("rules", "policy", "utility-params", "meta-params")
FORBIDDEN_TARGETS = ("environment", "models", "environment-requirements")
EDIT_OPS = ("add", "remove", "replace")
EDIT_KINDS = ("add-rule", "remove-rule", "remove-sequence", "tune-utility", "tune-meta")

DEFAULT_META = {
    "edit_kinds": ["add-rule", "tune-utility", "remove-sequence"],
    "max_edits": 1,
    "max_rule_size": 4,
    "rule_templates": [],
    "utility_grid": {},
    "meta_grid": {},
    "checker_mode": "all-models",
    "proposal_budget": 100,
}


def full_meta(meta):
    return {**DEFAULT_META, **(meta or {})}


@dataclass(frozen=True)
class RewriteProposal:
    target: str
    edits: tuple
    basis: str

    def __post_init__(self):
        if self.target in FORBIDDEN_TARGETS:
            raise ForbiddenEditError(f"edits to {self.target} are not allowed")
        if self.target not in TARGETS:
            raise MalformedProposalError(f"unknown proposal target {self.target!r}")
        for op, _ in self.edits:
            if op not in EDIT_OPS:
                raise MalformedProposalError(f"unknown edit {op!r}")

    @property
    def id(self):
        return textio.content_hash(self.to_obj())

    def to_obj(self):
        return {"target": self.target, "basis": self.basis,
                "edits": [[op, payload] for op, payload in self.edits]}

    @classmethod
    def from_obj(cls, obj):
        return cls(obj["target"], tuple((op, payload) for op, payload in obj["edits"]), obj["basis"])


def constraint_size(expr):
    """Number of operator nodes in a constraint expression."""
    if isinstance(expr, (list, tuple)) and expr and isinstance(expr[0], str):
        return 1 + sum(constraint_size(a) for a in expr[1:] if isinstance(a, (list, tuple)))
    return 0


# -- applying edits -----------------------------------------------------------

def _edit_rules(rules, edits):
    current = list(rules.rules)
    for op, payload in edits:
        if op == "remove":
            ids = [r.id for r in current]
            if payload not in ids:
                raise MalformedProposalError(f"no rule {payload!r} to remove")
            current = [r for r in current if r.id != payload]
            continue
        rule = Rule.from_obj(payload)
        ids = [r.id for r in current]
        if op == "add":
            if rule.id in ids:
                raise MalformedProposalError(f"rule {rule.id!r} already present")
            current.append(rule)
        else:
            if rule.id not in ids:
                raise MalformedProposalError(f"no rule {rule.id!r} to replace")
            current[ids.index(rule.id)] = rule
    return rules.with_rules(current)


def _edit_policy(policy, edits):
    current = list(policy)
    for op, payload in edits:
        ids = [s.id for s in current]
        if op == "remove":
            if payload not in ids:
                raise MalformedProposalError(f"no sequence {payload} to remove")
            del current[ids.index(payload)]
        elif op == "add":
            current.append(DesignSequence.from_obj(payload))
        else:
            if payload["id"] not in ids:
                raise MalformedProposalError(f"no sequence {payload['id']} to replace")
            current[ids.index(payload["id"])] = DesignSequence.from_obj(payload["sequence"])
    return tuple(current)


def _edit_dict(d, edits):
    d = dict(d)
    for op, payload in edits:
        if op == "remove":
            d.pop(payload, None)
        else:
            d[payload["key"]] = payload["value"]
    return d


def successor_of(basis: MachineState, p: RewriteProposal):
    """``(successor state, pruned concepts)``; raises MalformedProposalError."""
    if p.basis != basis.digest:
        raise StaleBasisError(f"proposal {p.id[:12]} targets {p.basis[:12]}, state is {basis.digest[:12]}")
    try:
        if p.target == "rules":
            succ = basis.evolve(rules=_edit_rules(basis.rules, p.edits))
        elif p.target == "policy":
            succ = basis.evolve(policy=_edit_policy(basis.policy, p.edits))
        elif p.target == "utility-params":
            succ = basis.evolve(params=_edit_dict(basis.params, p.edits))
        else:
            succ = basis.evolve(meta=_edit_dict(basis.meta, p.edits))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedProposalError(f"proposal {p.id[:12]}: {exc}") from exc
    kept = tuple(c for c in succ.concepts if is_permissible(c, succ.rules))
    pruned = tuple(c for c in succ.concepts if c not in kept)
    return succ.evolve(concepts=kept), pruned


# -- proposal generation -----------------------------------------------------

def _single_edits(basis, meta):
    kinds = meta["edit_kinds"]
    present = {r.id for r in basis.rules.rules}
    for kind in kinds:
        if kind == "add-rule":
            for t in sorted(meta["rule_templates"], key=lambda t: t["id"]):
                if t["id"] not in present and constraint_size(t["constraint"]) <= meta["max_rule_size"]:
                    yield "rules", ("add", t)
        elif kind == "remove-rule":
            for r in basis.rules.rules:
                yield "rules", ("remove", r.id)
        elif kind == "remove-sequence":
            for s in basis.policy:
                yield "policy", ("remove", s.id)
        elif kind == "tune-utility":
            params = basis.full_params
            for key in sorted(meta["utility_grid"]):
                for v in meta["utility_grid"][key]:
                    if params.get(key) != v:
                        yield "utility-params", ("replace", {"key": key, "value": v})
        elif kind == "tune-meta":
            for key in sorted(meta["meta_grid"]):
                for v in meta["meta_grid"][key]:
                    if meta.get(key) != v:
                        yield "meta-params", ("replace", {"key": key, "value": v})


def propose(basis: MachineState, meta=None, budget=None):
    """Deterministic stream of structurally valid proposals, at most ``budget``.

    Single edits come first, in the order of ``edit_kinds``; combinations of
    up to ``max_edits`` edits on one target follow.
    """
    meta = full_meta(basis.meta if meta is None else meta)
    budget = meta["proposal_budget"] if budget is None else budget
    if budget < 1:
        raise ValueError("budget must be >= 1")
    singles = list(_single_edits(basis, meta))

    def candidates():
        for target, edit in singles:
            yield target, (edit,)
        for n in range(2, meta["max_edits"] + 1):
            for combo in itertools.combinations(singles, n):
                if len({t for t, _ in combo}) == 1:
                    yield combo[0][0], tuple(e for _, e in combo)

    emitted = 0
    for target, edits in candidates():
        if emitted >= budget:
            return
        p = RewriteProposal(target, edits, basis.digest)
        try:
            successor_of(basis, p)
        except MalformedProposalError:
            continue
        emitted += 1
        yield p


# -- certification -------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    basis: str
    successor: str
    proposal: str
    environment: str
    horizon: int
    expansion_cost: float
    before: tuple
    after: tuple
    conclusion: bool
    suite: str = "episode"
    mode: str = "all-models"
    checker_version: str = CHECKER_VERSION

    def to_obj(self):
        return {
            "basis": self.basis, "successor": self.successor, "proposal": self.proposal,
            "environment": self.environment, "horizon": self.horizon,
            "expansion_cost": self.expansion_cost,
            "before": list(self.before), "after": list(self.after),
            "conclusion": self.conclusion, "suite": self.suite, "mode": self.mode,
            "checker_version": self.checker_version,
        }

    @classmethod
    def from_obj(cls, obj):
        return cls(obj["basis"], obj["successor"], obj["proposal"], obj["environment"],
                   int(obj["horizon"]), obj["expansion_cost"], tuple(obj["before"]),
                   tuple(obj["after"]), obj["conclusion"], obj.get("suite", "episode"),
                   obj.get("mode", "all-models"), obj.get("checker_version", CHECKER_VERSION))

    @property
    def digest(self):
        return textio.content_hash(self.to_obj())

    @property
    def min_before(self):
        return min(self.before)

    @property
    def min_after(self):
        return min(self.after)


def conclude(before, after, weights, mode="all-models"):
    """Strict improvement: on every model, or of the weighted mean."""
    if len(before) != len(after) or not before:
        return False
    if mode == "all-models":
        return all(a > b for a, b in zip(after, before))
    if mode == "weighted-mean":
        return math.fsum(w * a for w, a in zip(weights, after)) > math.fsum(w * b for w, b in zip(weights, before))
    raise ValueError(f"unknown checker mode {mode!r}")


def meta_utility(cert, mode="indicator", archive=(), submitted=None, weight=0.0):
    """1 when the certificate concludes improvement, else 0.

    The shaped mode adds ``weight`` times an originality score; it only
    orders proposals and never gates a switch.
    """
    base = 1.0 if cert.conclusion else 0.0
    if mode == "indicator":
        return base
    return base + weight * originality(submitted, archive)


def originality(concept, archive):
    """Mean canonical edit distance from ``concept`` to archived concepts."""
    if concept is None or not archive:
        return 0.0
    from .language import canonical_form

    def parts(c):
        c = canonical_form(c)
        return {("n",) + (n.kind, n.props) for n in c.nodes} | {("e",) + tuple(e) for e in c.edges}

    mine = parts(concept)
    return math.fsum(len(mine ^ parts(o)) for o in archive) / len(archive)


class Certifier:
    """Evaluation suites with a per-snapshot cache for basis evaluations."""

    def __init__(self, models, store=None, cache=True):
        self.models = models
        self.store = store
        self._cache = {} if cache else None

    def _episode_suite(self, state, lam):
        key = ("episode", state.digest, lam)
        if self._cache is not None and key in self._cache:
            return self._cache[key]
        value = run_episode(state, self.models, expansion_cost=lam).utilities
        if self._cache is not None:
            self._cache[key] = value
        return value

    def _lookahead_suite(self, state, lam):
        key = ("lookahead", state.digest, lam)
        if self._cache is not None and key in self._cache:
            return self._cache[key]
        first = self._episode_suite(state, lam)
        nxt = state
        inner = Certifier(self.models, None, cache=self._cache is not None)
        for p in propose(state):
            if p.target == "meta-params":
                continue
            cert = inner.certify(p, state)
            if cert.conclusion:
                nxt, _ = successor_of(state, p)
                break
        second = self._episode_suite(nxt, lam)
        value = tuple(a + b for a, b in zip(first, second))
        if self._cache is not None:
            self._cache[key] = value
        return value

    def suite(self, name, state, lam):
        if name == "episode":
            return self._episode_suite(state, lam)
        if name == "lookahead":
            return self._lookahead_suite(state, lam)
        raise ValueError(f"unknown evaluation suite {name!r}")

    def certify(self, p, basis, mode=None):
        """Certificate for ``p`` against ``basis``; its conclusion may be false."""
        successor, _ = successor_of(basis, p)
        meta = full_meta(basis.meta)
        mode = mode or meta["checker_mode"]
        suite = "lookahead" if p.target == "meta-params" else "episode"
        lam = basis.full_params["expansion_cost"]
        before = self.suite(suite, basis, lam)
        after = self.suite(suite, successor, lam)
        weights = [m.weight for m in self.models]
        ok = successor.digest != basis.digest and conclude(before, after, weights, mode)
        cert = Certificate(basis.digest, successor.digest, p.id, self.models.digest, self.models.horizon,
                           lam, tuple(before), tuple(after), ok, suite, mode)
        if self.store is not None:
            self.store.put("snapshots", basis.to_obj())
            self.store.put("snapshots", successor.to_obj())
            self.store.put("environments", self.models.to_obj())
            self.store.put("proposals", p.to_obj())
            self.store.put("certificates", cert.to_obj())
        return cert


def certify(p, basis, models, store=None, mode=None):
    return Certifier(models, store).certify(p, basis, mode)


def check_certificate(cert, store):
    """Re-run both evaluations from stored artifacts; true iff all numbers match exactly.

    Raises UnresolvableHashError when a referenced artifact is missing.
    """
    from .environment import ModelSet

    if isinstance(cert, dict):
        try:
            cert = Certificate.from_obj(cert)
        except (KeyError, TypeError, ValueError):
            return False
    basis = MachineState.from_obj(store.get("snapshots", cert.basis))
    successor = MachineState.from_obj(store.get("snapshots", cert.successor))
    models = ModelSet.from_obj(store.get("environments", cert.environment))
    p = RewriteProposal.from_obj(store.get("proposals", cert.proposal))
    if cert.checker_version != CHECKER_VERSION or cert.horizon != models.horizon:
        return False
    if basis.digest != cert.basis or successor.digest != cert.successor or models.digest != cert.environment:
        return False
    try:
        rebuilt, _ = successor_of(basis, p)
    except (MalformedProposalError, StaleBasisError):
        return False
    if rebuilt.digest != cert.successor:
        return False
    expected_suite = "lookahead" if p.target == "meta-params" else "episode"
    lam = basis.full_params["expansion_cost"]
    if cert.suite != expected_suite or cert.expansion_cost != lam:
        return False
    fresh = Certifier(models, None, cache=False)
    before = fresh.suite(cert.suite, basis, lam)
    after = fresh.suite(cert.suite, successor, lam)
    if tuple(before) != tuple(cert.before) or tuple(after) != tuple(cert.after):
        return False
    weights = [m.weight for m in models]
    derived = successor.digest != basis.digest and conclude(before, after, weights, cert.mode)
    return derived == cert.conclusion


def switch(ms: MachineState, p: RewriteProposal, cert: Certificate, store, checked=False):
    """Apply a certified proposal; returns ``(successor, pruned concepts)``.

    Raises StaleBasisError if ``ms`` is not the certified basis and
    CertificateInvalidError if the certificate does not check or concludes
    no improvement. ``checked=True`` skips re-running the check when the
    caller produced the certificate itself in this process.
    """
    if cert.basis != ms.digest or p.basis != ms.digest:
        raise StaleBasisError(f"certificate basis {cert.basis[:12]} is not the current state {ms.digest[:12]}")
    if cert.proposal != p.id:
        raise CertificateInvalidError("certificate was issued for a different proposal")
    if not cert.conclusion:
        raise CertificateInvalidError("certificate does not conclude strict improvement")
    if not checked and not check_certificate(cert, store):
        raise CertificateInvalidError(f"certificate {cert.digest[:12]} does not re-verify")
    successor, pruned = successor_of(ms, p)
    if successor.digest != cert.successor:
        raise CertificateInvalidError("successor does not match the certified hash")
    return successor, pruned


def self_modify(ms, p, cert, store, checked=False):
    """Switch restricted to utility and meta parameters."""
    if p.target not in ("utility-params", "meta-params"):
        raise MalformedProposalError(f"self-modification cannot target {p.target}")
    return switch(ms, p, cert, store, checked)


def identity_proposal(basis):
    return RewriteProposal("policy", (), basis.digest)


def drop_submit_proposal(basis):
    """Replace every sequence that submits with a copy lacking the submit step."""
    edits = []
    for s in basis.policy:
        if any(a.op == "submit" for a in s.actions):
            stripped = DesignSequence(tuple(a for a in s.actions if a.op != "submit"), s.name)
            edits.append(("replace", {"id": s.id, "sequence": stripped.to_obj()}))
    return RewriteProposal("policy", tuple(edits), basis.digest)


__all__ = [
    "Certificate", "Certifier", "RewriteProposal", "certify",
    "check_certificate", "conclude", "drop_submit_proposal", "identity_proposal", "meta_utility",
    "propose", "self_modify", "successor_of", "switch",
]
