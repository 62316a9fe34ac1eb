"""Exploratory engine: design actions, design sequences and episodes.

A policy is an ordered tuple of guarded design sequences. One interpreter
round applies every sequence to every concept of the frontier, keeps the
concepts it produced together with the frontier itself, and retains the
top ``beam`` of them by the ranking handle, ties broken by concept text.
An episode runs rounds from ``{⊤}`` until a concept is submitted or the
horizon ends. Each step pays the environment reward of that step less an
expansion charge.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

from . import textio
from .errors import BudgetExceededError, CompileError, UnknownReferenceError, UnknownSymbolError
from .language import TOP, Concept, Edge, Node, RuleSet, canonical_form, compile_constraint, is_permissible
from .verification import RequirementSet

ACTION_OPS = ("instantiate", "connect", "compose_product", "compose_feedback", "refine",
              "abstract", "set_property", "verify", "submit")

DEFAULT_PARAMS = {
    "beam": 8,
    "sample_rate": 1.0,
    "max_expansions": 100_000,
    "expansion_cost": 1e-4,
    "size_weight": 0.1,
    "pending_weight": 0.05,
}


@dataclass(frozen=True)
class DesignAction:
    op: str
    args: tuple = ()
    guard: tuple | None = None

    def __post_init__(self):
        if self.op not in ACTION_OPS:
            raise ValueError(f"unknown design action {self.op!r}")

    @property
    def arg(self):
        return dict(self.args)

    def to_obj(self):
        obj = {"op": self.op, **{k: _thaw(v) for k, v in self.args}}
        if self.guard is not None:
            obj["guard"] = _thaw(self.guard)
        return obj

    @classmethod
    def from_obj(cls, obj):
        args = tuple(sorted((k, _freeze(v)) for k, v in obj.items() if k not in ("op", "guard")))
        guard = obj.get("guard")
        return cls(obj["op"], args, None if guard is None else _freeze(guard))


def _freeze(x):
    if isinstance(x, dict):
        return ("__dict__",) + tuple(sorted((k, _freeze(v)) for k, v in x.items()))
    if isinstance(x, (list, tuple)):
        return tuple(_freeze(v) for v in x)
    return x


def _thaw(x):
    if isinstance(x, tuple):
        if x and x[0] == "__dict__":
            return {k: _thaw(v) for k, v in x[1:]}
        return [_thaw(v) for v in x]
    return x


@dataclass(frozen=True)
class DesignSequence:
    actions: tuple
    name: str = ""

    @property
    def id(self):
        return _sequence_id(self.actions)

    def to_obj(self):
        return {"name": self.name, "actions": [a.to_obj() for a in self.actions]}

    @classmethod
    def from_obj(cls, obj):
        return cls(tuple(DesignAction.from_obj(a) for a in obj["actions"]), obj.get("name", ""))


@lru_cache(maxsize=4096)
def _sequence_id(actions):
    return textio.content_hash([a.to_obj() for a in actions])


def policy_to_obj(policy):
    return {"sequences": [s.to_obj() for s in policy]}


def policy_from_obj(obj):
    return tuple(DesignSequence.from_obj(s) for s in obj["sequences"])


# -- action semantics -------------------------------------------------------

@dataclass
class ActionContext:
    """What actions may consult besides the concept: domain, Φ_int, scratch."""

    domain: object = None
    requirements: RequirementSet = field(default_factory=RequirementSet)
    new: str | None = None
    submitted: bool = False


@lru_cache(maxsize=8192)
def _guard_fn(guard, alphabet):
    return compile_constraint(_thaw(guard), alphabet)


def _select(c, sel, ctx, port=None):
    sel = _thaw(sel)
    if "id" in sel:
        return sel["id"] if sel["id"] in c.by_id else None
    if sel.get("new"):
        return ctx.new if ctx.new in c.by_id else None
    want = sel.get("props", {})
    for n in c.nodes:
        if n.kind != sel.get("kind") or any(n.prop(k) != v for k, v in want.items()):
            continue
        if sel.get("free") and port is not None and (n.id, port) in c.driver_of:
            continue
        return n.id
    return None


def _relabel_fragment(c, frag):
    """Fresh ids for ``frag``'s nodes so it can sit next to ``c``."""
    used = set(c.by_id)
    rename, k = {}, len(c.nodes)
    for n in frag.nodes:
        while f"n{k}" in used:
            k += 1
        rename[n.id] = f"n{k}"
        used.add(f"n{k}")
    return rename


def _reaches(c, start, goal):
    succ = {}
    for e in c.edges:
        succ.setdefault(e.src, []).append(e.dst)
    stack, seen = [start], set()
    while stack:
        v = stack.pop()
        if v == goal:
            return seen | {v}
        if v in seen:
            continue
        seen.add(v)
        stack.extend(succ.get(v, ()))
    return None


def _structural(c, a, ctx):
    """Apply one structural action; ``None`` when it cannot be carried out."""
    arg = a.arg
    if a.op == "instantiate":
        out, ctx.new = c.add_node(arg["kind"], _thaw(arg.get("props", ())) or {})
        return out
    if a.op in ("connect", "compose_feedback"):
        src = _select(c, arg["src"], ctx)
        dst = _select(c, arg["dst"], ctx, arg["dst_port"])
        if src is None or dst is None:
            return None
        closes_loop = _reaches(c, dst, src) if src != dst else {src}
        if a.op == "connect" and closes_loop:
            return None
        if a.op == "compose_feedback":
            delays = getattr(ctx.domain, "delay_kinds", ())
            if not closes_loop or not any(c.by_id[v].kind in delays for v in closes_loop):
                return None
        return c.add_edge(src, arg["src_port"], dst, arg["dst_port"])
    if a.op == "compose_product":
        frag = Concept.from_obj(_thaw(arg["fragment"]))
        rename = _relabel_fragment(c, frag)
        nodes = c.nodes + tuple(Node(rename[n.id], n.kind, n.props) for n in frag.nodes)
        edges = c.edges + tuple(Edge(rename[e.src], e.src_port, rename[e.dst], e.dst_port) for e in frag.edges)
        return Concept.build(nodes, edges)
    if a.op == "refine":
        target = _select(c, arg["node"], ctx)
        if target is None:
            return None
        frag = Concept.from_obj(_thaw(arg["fragment"]))
        rename = _relabel_fragment(c, frag)
        ins, outs = _thaw(arg.get("inputs", {})), _thaw(arg.get("outputs", {}))
        nodes = [n for n in c.nodes if n.id != target]
        nodes += [Node(rename[n.id], n.kind, n.props) for n in frag.nodes]
        edges = [Edge(rename[e.src], e.src_port, rename[e.dst], e.dst_port) for e in frag.edges]
        for e in c.edges:
            if e.dst == target:
                edges += [Edge(e.src, e.src_port, rename[f], p) for f, p in ins.get(e.dst_port, ())]
            elif e.src == target:
                if e.src_port not in outs:
                    return None
                f, p = outs[e.src_port]
                edges.append(Edge(rename[f], p, e.dst, e.dst_port))
            else:
                edges.append(e)
        return Concept.build(nodes, edges)
    if a.op == "abstract":
        group = set(_thaw(arg["nodes"]))
        if not group <= set(c.by_id):
            return None
        new_id = c.fresh_id()
        ins, outs = _thaw(arg.get("inputs", {})), _thaw(arg.get("outputs", {}))
        nodes = [n for n in c.nodes if n.id not in group]
        nodes.append(Node(new_id, arg["kind"], tuple(sorted((_thaw(arg.get("props", ())) or {}).items()))))
        edges = []
        for e in c.edges:
            inside_src, inside_dst = e.src in group, e.dst in group
            if inside_src and inside_dst:
                continue
            if inside_dst:
                port = ins.get(f"{e.dst}.{e.dst_port}")
                if port is None:
                    return None
                edges.append(Edge(e.src, e.src_port, new_id, port))
            elif inside_src:
                port = outs.get(f"{e.src}.{e.src_port}")
                if port is None:
                    return None
                edges.append(Edge(new_id, port, e.dst, e.dst_port))
            else:
                edges.append(e)
        ctx.new = new_id
        return Concept.build(nodes, edges)
    if a.op == "set_property":
        target = _select(c, arg["node"], ctx)
        if target is None:
            return None
        return c.set_prop(target, arg["prop"], arg["value"])
    raise ValueError(a.op)


def _verify(c, a, ctx):
    if c.is_empty or ctx.domain is None:
        return False
    wanted = a.arg.get("requirements", "*")
    reqs = [r for r in ctx.requirements if wanted == "*" or r.id in wanted]
    return all(ctx.domain.satisfied(c, [r.scenario for r in reqs]))


def apply_action(c: Concept, a: DesignAction, rules: RuleSet, ctx: ActionContext | None = None):
    """The concept after ``a``, or ``None`` for no change.

    ``None`` covers a false guard, an action that cannot be carried out and a
    result that is not permissible. ``verify`` and ``submit`` leave the concept
    as it is; ``submit`` sets ``ctx.submitted``.
    """
    ctx = ctx if ctx is not None else ActionContext()
    if a.guard is not None and not _guard_fn(a.guard, rules.alphabet)(c):
        return None
    if a.op == "verify":
        return c if _verify(c, a, ctx) else None
    if a.op == "submit":
        if c.is_empty or (ctx.domain is not None and ctx.domain.try_compile(c) is None):
            return None
        ctx.submitted = True
        return c
    try:
        out = _structural(c, a, ctx)
        if out is None or not is_permissible(out, rules):
            return None
    except (UnknownReferenceError, UnknownSymbolError, KeyError, TypeError, ValueError):
        return None
    return out


def apply_sequence(c, seq, rules, ctx):
    """Fold a sequence over ``c``; ``(concept, submitted)`` or ``None`` if any step is rejected."""
    ctx.new, ctx.submitted = None, False
    for a in seq.actions:
        c = apply_action(c, a, rules, ctx)
        if c is None:
            return None
    return c, ctx.submitted


# -- interpreter ------------------------------------------------------------

def _sampled(seed, rnd, text, seq_id, rate):
    if rate >= 1.0:
        return True
    h = hashlib.blake2b(f"{seed}|{rnd}|{seq_id}|{text}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "big") < rate * 2**64


@dataclass(frozen=True)
class RoundResult:
    concepts: tuple
    submitted: tuple
    expansions: int
    origin: dict = field(default_factory=dict, compare=False)


class Ranker:
    """Memoised ranking handle: ``domain.rank`` under the internal requirements."""

    def __init__(self, domain, requirements, params):
        self.domain, self.requirements, self.params = domain, tuple(requirements), params
        self._cache = {}

    def __call__(self, c):
        v = self._cache.get(c.text)
        if v is None:
            v = self._cache[c.text] = self.domain.rank(c, self.requirements, self.params)
        return v

    def key(self, c):
        return (-self(c), c.text)


def apply_interpreter(c_in, rules, policy, rank, params=None, ctx=None, seed=0, rnd=0, budget=None):
    """One interpreter round over the concept set ``c_in``.

    Every retained sequence is applied to every concept. An expansion is a
    permissible successor that differs from its input; more than ``budget``
    expansions (default ``max_expansions``) raises BudgetExceededError.
    The result keeps ``c_in`` and the successors, deduplicated by canonical
    form, and retains the top ``beam`` by ``rank``.
    """
    params = {**DEFAULT_PARAMS, **(params or {})}
    ctx = ctx or ActionContext()
    budget = params["max_expansions"] if budget is None else budget
    rank = rank if isinstance(rank, Ranker) or hasattr(rank, "key") else _plain_ranker(rank)
    inputs = sorted({canonical_form(c) for c in c_in}, key=lambda c: c.text)
    pool = {c.text: c for c in inputs}
    origin = {c.text: None for c in inputs}
    submitted = {}
    expansions = 0
    for c in inputs:
        for seq in policy:
            if not _sampled(seed, rnd, c.text, seq.id, params["sample_rate"]):
                continue
            res = apply_sequence(c, seq, rules, ctx)
            if res is None:
                continue
            out, did_submit = res
            out = canonical_form(out)
            if out.text != c.text:
                expansions += 1
                if expansions > budget:
                    raise BudgetExceededError(f"interpreter passed {budget} expansions")
            if out.text not in pool:
                pool[out.text] = out
                origin[out.text] = seq.id
            if did_submit:
                submitted.setdefault(out.text, (out, seq.id))
    ranked = sorted(pool.values(), key=rank.key)[: params["beam"]]
    subs = tuple(sorted((v[0] for v in submitted.values()), key=rank.key))
    origin.update({t: sid for t, (_, sid) in submitted.items()})
    return RoundResult(tuple(ranked), subs, expansions, origin)


class _plain_ranker:
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, c):
        return self.fn(c)

    def key(self, c):
        return (-self.fn(c), c.text)


# -- machine state and episodes ---------------------------------------------

@dataclass(frozen=True)
class MachineState:
    domain: str
    rules: RuleSet
    policy: tuple
    params: dict
    requirements: RequirementSet
    meta: dict = field(default_factory=dict)
    concepts: tuple = (TOP,)
    step: int = 0
    reward: float = 0.0
    seed: int = 0
    archive: tuple = ()

    def __hash__(self):
        return hash(self.digest)

    @property
    def full_params(self):
        return {**DEFAULT_PARAMS, **self.params}

    def to_obj(self):
        return {
            "domain": self.domain,
            "rules": self.rules.to_obj(),
            "policy": policy_to_obj(self.policy),
            "params": dict(sorted(self.params.items())),
            "requirements": self.requirements.to_obj(),
            "meta": self.meta,
            "concepts": [c.to_obj() for c in self.concepts],
            "step": self.step,
            "reward": self.reward,
            "seed": self.seed,
            "archive": list(self.archive),
        }

    @classmethod
    def from_obj(cls, obj):
        return cls(obj["domain"], RuleSet.from_obj(obj["rules"]), policy_from_obj(obj["policy"]),
                   dict(obj["params"]), RequirementSet.from_obj(obj["requirements"]),
                   obj.get("meta", {}), tuple(Concept.from_obj(c) for c in obj["concepts"]),
                   int(obj.get("step", 0)), float(obj.get("reward", 0.0)), int(obj.get("seed", 0)),
                   tuple(obj.get("archive", ())))

    @property
    def digest(self):
        return textio.content_hash(self.to_obj())

    def evolve(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class Episode:
    """Outcome of one episode under every model of ``M``."""

    rewards: tuple          # per model, per step
    utilities: tuple        # per model: sum of its reward stream
    utility: float          # weighted over models
    expansions: tuple       # per step
    submitted: Concept | None
    submit_step: int | None
    env_reward: float       # weighted environment reward of the submission
    records: tuple
    frontier: tuple

    @property
    def total_expansions(self):
        return sum(self.expansions)

    def to_obj(self):
        return {
            "rewards": [list(r) for r in self.rewards],
            "utilities": list(self.utilities),
            "utility": self.utility,
            "expansions": list(self.expansions),
            "submitted": None if self.submitted is None else self.submitted.digest,
            "submit_step": self.submit_step,
            "env_reward": self.env_reward,
        }


def run_episode(ms: MachineState, models, horizon=None, expansion_cost=None, domain=None):
    """Run rounds from ``{⊤}`` under ``ms`` and score them under every model.

    Step ``τ`` pays ``r_i(τ) = env_i(τ) - λ * expansions(τ)``, where the
    environment part is the model's reward stream for the concept submitted
    at the first submitting step, and ``λ`` is ``expansion_cost`` (the
    state's own by default). The episode stops after the first submission;
    the submitted concept is the best-ranked submission of that round.
    """
    from . import domains
    from .environment import env_evaluate

    T = models.horizon if horizon is None else horizon
    if T != models.horizon:
        raise ValueError(f"horizon {T} does not match the environment horizon {models.horizon}")
    params = ms.full_params
    lam = params["expansion_cost"] if expansion_cost is None else expansion_cost
    domain = domain or domains.get(ms.domain)
    ranker = Ranker(domain, ms.requirements, params)
    ctx = ActionContext(domain, ms.requirements)
    frontier = (TOP,)
    spent, per_step, records = 0, [], []
    submitted, submit_step, env_streams = None, None, None
    for tau in range(T):
        rr = apply_interpreter(frontier, ms.rules, ms.policy, ranker, params, ctx,
                               ms.seed, tau, params["max_expansions"] - spent)
        spent += rr.expansions
        per_step.append(rr.expansions)
        frontier = rr.concepts
        if rr.submitted:
            submitted, submit_step = rr.submitted[0], tau
            env_streams = [env_evaluate(m, submitted, tau) for m in models]
            records.append((tau, rr.origin.get(submitted.text), submitted.digest))
            break
        best = frontier[0]
        records.append((tau, rr.origin.get(best.text), best.digest))
    per_step += [0] * (T - len(per_step))
    rewards = []
    for k, m in enumerate(models):
        env = env_streams[k] if env_streams else [0.0] * T
        rewards.append(tuple(env[t] - lam * per_step[t] for t in range(T)))
    utilities = tuple(math.fsum(r) for r in rewards)
    utility = math.fsum(m.weight * u for m, u in zip(models, utilities))
    env_reward = math.fsum(m.weight * math.fsum(s) for m, s in zip(models, env_streams or ()))
    recs, cum = [], 0.0
    for tau, seq_id, h in records:
        r = math.fsum(m.weight * rewards[k][tau] for k, m in enumerate(models))
        cum += r
        recs.append({"step": tau, "action": seq_id, "concept": h, "reward": r, "utility": cum})
    return Episode(tuple(rewards), utilities, utility, tuple(per_step), submitted, submit_step,
                   env_reward, tuple(recs), frontier)
