"""Run configuration, the propose-certify-switch loop, reports and replay.

A run alternates episodes and switches. After each episode the internal
requirements are revised from the submission, the state is snapshotted, and
proposals are certified in order until one concludes improvement; that one
is switched in. The loop ends at the switch limit or when no proposal
certifies, after a closing episode.

Outputs under the run directory: ``config.json`` (the effective
configuration), ``trace.jsonl``, ``report.json``, ``timing.json`` and a
content-addressed ``store/``. Everything except ``timing.json`` is a pure
function of the configuration and seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import domains, textio
from .environment import ModelSet
from .errors import MissingArtifactError, ReplayMismatchError, UnresolvableHashError, UsageError
from .explore import MachineState, policy_from_obj, run_episode
from .language import RuleSet
from .transform import Certificate, Certifier, RewriteProposal, check_certificate, propose, switch
from .verification import RequirementSet, revise_requirements

TRACE = "trace.jsonl"
REPORT = "report.json"
CONFIG = "config.json"
TIMING = "timing.json"
STORE = "store"
MAX_SEED = 2**64 - 1


def data_dir(domain):
    return Path(str(resources.files("dgm") / "data" / domain))


@dataclass(frozen=True)
class RunConfig:
    domain: str
    rules: Path
    policy: Path
    models: Path
    requirements: Path
    meta: Path
    params: dict = field(default_factory=dict)
    seed: int = 0
    horizon: int = 12
    proposal_budget: int = 100
    switch_limit: int = 3
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def load(cls, path=None, domain=None, seed=None, rules=None, switch_limit=None):
        """Read a configuration file, or the shipped default for ``domain``.

        Relative paths resolve against the configuration file's directory.
        Command-line overrides replace the matching keys.
        """
        if path is None:
            domain = domain or "circuit"
            if domain not in domains.DOMAINS:
                raise UsageError(f"unknown domain {domain!r}")
            path = data_dir(domain) / "config.json"
        path = Path(path)
        if not path.exists():
            raise UsageError(f"configuration {path} not found")
        raw = textio.read(path)
        if domain is not None and raw.get("domain") != domain:
            raise UsageError(f"configuration is for domain {raw.get('domain')!r}, not {domain!r}")
        base = path.parent
        if seed is not None:
            raw["seed"] = seed
        if switch_limit is not None:
            raw["switch_limit"] = switch_limit
        if rules is not None:
            raw["rules"] = str(Path(rules).resolve())
        seed_value = int(raw.get("seed", 0))
        if not 0 <= seed_value <= MAX_SEED:
            raise UsageError("seed must be an unsigned 64-bit integer")

        def resolve(key):
            if key not in raw:
                raise UsageError(f"configuration lacks {key!r}")
            p = Path(raw[key])
            p = p if p.is_absolute() else base / p
            if not p.exists():
                raise UsageError(f"{key} file {p} not found")
            return p

        return cls(raw["domain"], resolve("rules"), resolve("policy"), resolve("models"),
                   resolve("requirements"), resolve("meta"), dict(raw.get("params", {})), seed_value,
                   int(raw.get("horizon", 12)), int(raw.get("proposal_budget", 100)),
                   int(raw.get("switch_limit", 3)), raw)

    def effective(self):
        """The configuration with every referenced file inlined."""
        return {
            "domain": self.domain, "seed": self.seed, "horizon": self.horizon,
            "proposal_budget": self.proposal_budget, "switch_limit": self.switch_limit,
            "params": self.params,
            "rules": textio.read(self.rules), "policy": textio.read(self.policy),
            "models": ModelSet.load(self.models).to_obj(),
            "requirements": textio.read(self.requirements), "meta": textio.read(self.meta),
        }

    def model_set(self):
        models = ModelSet.load(self.models)
        if models.horizon != self.horizon:
            raise UsageError(f"step horizon {self.horizon} differs from the models' horizon {models.horizon}")
        if models.domain != self.domain:
            raise UsageError(f"models are for domain {models.domain!r}, not {self.domain!r}")
        return models

    def initial_state(self):
        meta = textio.read(self.meta)
        meta["proposal_budget"] = self.proposal_budget
        return MachineState(
            self.domain, RuleSet.load(self.rules), policy_from_obj(textio.read(self.policy)),
            dict(self.params), RequirementSet.from_obj(textio.read(self.requirements), "machine-internal"),
            meta, seed=self.seed)


class TraceWriter:
    def __init__(self, path):
        self.lines = []
        self.path = Path(path)

    def write(self, record):
        self.lines.append(textio.record_line(record))

    def flush(self):
        self.path.write_text("".join(line + "\n" for line in self.lines), encoding="utf-8")


def _hashes(state):
    return {"snapshot": state.digest, "rules": state.rules.digest,
            "policy": textio.content_hash({"sequences": [s.to_obj() for s in state.policy]}),
            "meta": textio.content_hash(state.meta)}


def _after_episode(state, ep, domain):
    """State update at an episode boundary: frontier, reward, archive, revision."""
    reqs, dropped = state.requirements, []
    if ep.submitted is not None:
        reqs = revise_requirements(state.requirements, ep.env_reward, ep.submitted, domain)
        kept = {r.id for r in reqs}
        dropped = [r.id for r in state.requirements if r.id not in kept]
    archive = state.archive + ((ep.submitted.digest,) if ep.submitted is not None else ())
    steps = ep.submit_step + 1 if ep.submit_step is not None else len(ep.expansions)
    new = state.evolve(concepts=ep.frontier, step=steps, reward=state.reward + ep.utility,
                       archive=archive, requirements=reqs)
    return new, dropped


def _episode_records(e, state, models, ep):
    h = _hashes(state)
    out = [{"type": "episode_start", "episode": e, **h, "environment": models.digest}]
    for r in ep.records:
        out.append({"type": "step", "episode": e, "step": r["step"], "action": r["action"],
                    "concept": r["concept"], "reward": r["reward"], "utility": r["utility"],
                    "rules": h["rules"], "policy": h["policy"], "meta": h["meta"]})
    out.append({"type": "episode_end", "episode": e, "utility": ep.utility, "utilities": list(ep.utilities),
                "expansions": ep.total_expansions,
                "submitted": None if ep.submitted is None else ep.submitted.digest,
                "submit_step": ep.submit_step})
    return out


def execute(cfg: RunConfig, out, log=None):
    """Run the loop under ``cfg`` and write every artifact to ``out``."""
    t0 = time.perf_counter()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    textio.write(out / CONFIG, cfg.effective())
    store = textio.Store(out / STORE)
    models = cfg.model_set()
    domain = domains.get(cfg.domain)
    store.put("environments", models.to_obj())
    trace = TraceWriter(out / TRACE)
    state = cfg.initial_state()
    certifier = Certifier(models, store)
    switches, e = 0, 0
    timings = []
    while True:
        t_ep = time.perf_counter()
        store.put("snapshots", state.to_obj())
        ep = run_episode(state, models, cfg.horizon, domain=domain)
        for rec in _episode_records(e, state, models, ep):
            trace.write(rec)
        state, dropped = _after_episode(state, ep, domain)
        store.put("snapshots", state.to_obj())
        trace.write({"type": "revise", "episode": e, "snapshot": state.digest,
                     "requirements": state.requirements.digest, "dropped": dropped})
        timings.append({"episode": e, "seconds": time.perf_counter() - t_ep})
        if log:
            log(f"episode {e}: utility {ep.utility:.6f}, expansions {ep.total_expansions}")
        if switches >= cfg.switch_limit:
            break
        accepted = None
        t_sw = time.perf_counter()
        for p in propose(state, budget=cfg.proposal_budget):
            cert = certifier.certify(p, state)
            if cert.conclusion:
                accepted = p, cert
                break
        if accepted is None:
            if log:
                log("no proposal certified; stopping")
            break
        p, cert = accepted
        successor, pruned = switch(state, p, cert, store, checked=True)
        trace.write({"type": "switch", "episode": e, "proposal": p.id, "target": p.target,
                     "certificate": store.put("certificates", cert.to_obj()),
                     "basis": cert.basis, "successor": cert.successor,
                     "before": list(cert.before), "after": list(cert.after),
                     "pruned": [c.digest for c in pruned]})
        timings.append({"switch": switches, "seconds": time.perf_counter() - t_sw})
        if log:
            log(f"switch {switches}: {p.target} {p.id[:12]} min utility {min(cert.before):.6f} -> {min(cert.after):.6f}")
        state = successor
        switches += 1
        e += 1
    trace.write({"type": "end", "snapshot": state.digest})
    trace.flush()
    report = report_from_trace(read_trace(out / TRACE))
    textio.write(out / REPORT, report)
    textio.write(out / TIMING, {"total_seconds": time.perf_counter() - t0, "phases": timings})
    return report


def read_trace(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"trace {path} not found")
    return [textio.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def report_from_trace(records):
    """The run report, derived from trace records alone."""
    episodes, switches = [], []
    for r in records:
        if r["type"] == "episode_start":
            episodes.append({"episode": r["episode"], "snapshot": r["snapshot"]})
        elif r["type"] == "episode_end":
            episodes[-1].update(utility=r["utility"], utilities=r["utilities"], expansions=r["expansions"],
                                submitted=r["submitted"], submit_step=r["submit_step"])
        elif r["type"] == "switch":
            switches.append({"episode": r["episode"], "proposal": r["proposal"], "target": r["target"],
                             "certificate": r["certificate"], "before": r["before"], "after": r["after"],
                             "min_before": min(r["before"]), "min_after": min(r["after"]),
                             "pruned": len(r["pruned"])})
    final = [r for r in records if r["type"] == "end"]
    return {
        "episodes": episodes,
        "switches": switches,
        "certified_min_utilities": [s["min_after"] for s in switches],
        "expansions": [ep.get("expansions") for ep in episodes],
        "final_snapshot": final[-1]["snapshot"] if final else None,
    }


def _load_state(store, h):
    try:
        return MachineState.from_obj(store.get("snapshots", h))
    except UnresolvableHashError as exc:
        raise MissingArtifactError(str(exc)) from exc


def replay(out, deep=True):
    """Rebuild the report from the trace and, with ``deep``, re-execute the run.

    Re-execution starts every episode from its stored snapshot, regenerates
    its trace records, re-derives each state transition and re-checks every
    certificate. Any difference raises ReplayMismatchError; missing files
    raise MissingArtifactError.
    """
    out = Path(out)
    records = read_trace(out / TRACE)
    if not (out / REPORT).exists():
        raise MissingArtifactError(f"report {out / REPORT} not found")
    stored = textio.read(out / REPORT)
    rebuilt = report_from_trace(records)
    if textio.dumps(rebuilt) != textio.dumps(stored):
        raise ReplayMismatchError("report does not match the trace")
    if not deep:
        return rebuilt
    store = textio.Store(out / STORE)
    k = 0
    expected_next = None
    while k < len(records):
        r = records[k]
        if r["type"] == "episode_start":
            try:
                models = ModelSet.from_obj(store.get("environments", r["environment"]))
            except UnresolvableHashError as exc:
                raise MissingArtifactError(str(exc)) from exc
            state = _load_state(store, r["snapshot"])
            if state.digest != r["snapshot"] or (expected_next is not None and expected_next != r["snapshot"]):
                raise ReplayMismatchError(f"episode {r['episode']} does not start from the expected state")
            domain = domains.get(state.domain)
            ep = run_episode(state, models, domain=domain)
            regenerated = _episode_records(r["episode"], state, models, ep)
            span = records[k:k + len(regenerated)]
            if [textio.record_line(x) for x in span] != [textio.record_line(x) for x in regenerated]:
                raise ReplayMismatchError(f"episode {r['episode']} records differ on re-execution")
            k += len(regenerated)
            state, _ = _after_episode(state, ep, domain)
            rev = records[k] if k < len(records) else None
            if rev is None or rev["type"] != "revise" or rev["snapshot"] != state.digest:
                raise ReplayMismatchError(f"episode {r['episode']} boundary state differs")
            expected_next = state.digest
            k += 1
            continue
        if r["type"] == "switch":
            try:
                cert = Certificate.from_obj(store.get("certificates", r["certificate"]))
                p = RewriteProposal.from_obj(store.get("proposals", r["proposal"]))
            except UnresolvableHashError as exc:
                raise MissingArtifactError(str(exc)) from exc
            if (cert.basis != r["basis"] or cert.successor != r["successor"] or list(cert.before) != r["before"]
                    or list(cert.after) != r["after"] or cert.basis != expected_next):
                raise ReplayMismatchError(f"switch record {r['proposal'][:12]} disagrees with its certificate")
            basis = _load_state(store, cert.basis)
            successor, pruned = switch(basis, p, cert, store)
            if [c.digest for c in pruned] != r["pruned"]:
                raise ReplayMismatchError("pruned concepts differ on re-execution")
            expected_next = successor.digest
        elif r["type"] == "end":
            if r["snapshot"] != expected_next:
                raise ReplayMismatchError("final state differs on re-execution")
        k += 1
    return rebuilt
