import pytest

from dgm import domains, textio
from dgm.errors import BudgetExceededError
from dgm.explore import (ActionContext, DesignAction, DesignSequence, MachineState, apply_action,
                         apply_interpreter, apply_sequence, policy_from_obj, policy_to_obj, run_episode)
from dgm.language import TOP, Concept, RuleSet
from dgm.oracles import truth_table
from dgm.runner import RunConfig, data_dir


@pytest.fixture(scope="module")
def cfg():
    return RunConfig.load(domain="circuit")


@pytest.fixture(scope="module")
def rules():
    return RuleSet.load(data_dir("circuit") / "rules.json")


def act(op, guard=None, **args):
    return DesignAction.from_obj({"op": op, **args, **({"guard": guard} if guard else {})})


def two_gates():
    return Concept.build([("g", "NAND", {}), ("h", "NAND", {})], [("g", "y", "h", "a")])


def test_instantiate_and_connect(rules):
    ctx = ActionContext()
    c = apply_action(TOP, act("instantiate", kind="NAND"), rules, ctx)
    assert c.count("NAND") == 1 and ctx.new in c.by_id
    c = apply_action(c, act("instantiate", kind="IN", props={"pin_in": "A"}), rules, ctx)
    wired = apply_action(c, act("connect", src={"new": True}, src_port="y",
                                dst={"kind": "NAND", "free": True}, dst_port="a"), rules, ctx)
    assert len(wired.edges) == 1


def test_connect_refuses_to_close_a_loop(rules):
    c = two_gates()
    back = act("connect", src={"id": "h"}, src_port="y", dst={"id": "g"}, dst_port="a")
    assert apply_action(c, back, rules) is None


def test_feedback_needs_a_delay_on_the_loop(rules):
    class Delayed:
        delay_kinds = ("NAND",)

    back = act("compose_feedback", src={"id": "h"}, src_port="y", dst={"id": "g"}, dst_port="a")
    assert apply_action(two_gates(), back, rules, ActionContext()) is None
    closed = apply_action(two_gates(), back, RuleSet(rules.alphabet, ()), ActionContext(domain=Delayed()))
    assert closed is not None and len(closed.edges) == 2


def test_rules_filter_every_action(rules):
    c = Concept.build([("p", "IN", {"pin_in": "A"})])
    assert apply_action(c, act("instantiate", kind="IN", props={"pin_in": "A"}), rules) is None


def test_guards_gate_actions(rules):
    a = act("instantiate", guard=["count", "NAND", "==", 0], kind="NAND")
    once = apply_action(TOP, a, rules)
    assert once is not None and apply_action(once, a, rules) is None


def test_product_refine_abstract_and_set_property(rules):
    frag = two_gates().to_obj()
    c = apply_action(Concept.build([("g", "NAND", {})]), act("compose_product", fragment=frag), rules)
    assert c.count("NAND") == 3
    inv = Concept.build([("x", "NAND", {})]).to_obj()
    refined = apply_action(two_gates(), act("refine", node={"id": "g"}, fragment=inv,
                                            outputs={"y": ["x", "y"]}), rules)
    assert refined is not None and refined.count("NAND") == 2 and "g" not in refined.by_id
    ctx = ActionContext()
    folded = apply_action(two_gates(), act("abstract", nodes=["g", "h"], kind="NAND"), rules, ctx)
    assert folded.count("NAND") == 1 and not folded.edges
    c = Concept.build([("p", "IN", {"pin_in": "A"})])
    flipped = apply_action(c, act("set_property", node={"id": "p"}, prop="pin_in", value="B"), rules)
    assert flipped.by_id["p"].prop("pin_in") == "B"


def test_sequences_are_atomic(rules):
    seq = DesignSequence((act("instantiate", kind="NAND"),
                          act("connect", src={"id": "nope"}, src_port="y", dst={"new": True}, dst_port="a")))
    assert apply_sequence(TOP, seq, rules, ActionContext()) is None


def test_submit_requires_a_compilable_concept(rules):
    circuit = domains.get("circuit")
    ctx = ActionContext(domain=circuit)
    assert apply_action(two_gates(), act("submit"), rules, ctx) is None
    assert apply_action(TOP, act("submit"), rules, ctx) is None


def test_policy_round_trips(cfg):
    policy = cfg.initial_state().policy
    back = policy_from_obj(policy_to_obj(policy))
    assert [s.id for s in back] == [s.id for s in policy]
    assert len({s.id for s in policy}) == len(policy)


def test_interpreter_keeps_its_input_and_respects_the_beam(cfg):
    s = cfg.initial_state()
    domain = domains.get("circuit")
    rank = lambda c: domain.rank(c, s.requirements, s.full_params)  # noqa: E731
    rr = apply_interpreter((TOP,), s.rules, s.policy, rank, {"beam": 3})
    assert TOP in rr.concepts and len(rr.concepts) <= 3
    assert rr.expansions >= 1
    with pytest.raises(BudgetExceededError):
        apply_interpreter((TOP,), s.rules, s.policy, rank, budget=0)


def test_episode_finds_the_half_adder(cfg):
    ep = run_episode(cfg.initial_state(), cfg.model_set())
    table = {(a, b): outs for a, b, outs in truth_table(ep.submitted)}
    assert table == {(a, b): {"C": a & b, "S": a ^ b} for a in (0, 1) for b in (0, 1)}
    assert len(ep.rewards) == 2 and all(len(r) == cfg.horizon for r in ep.rewards)
    assert ep.records[-1]["step"] == ep.submit_step
    assert ep.expansions[ep.submit_step + 1:] == (0,) * (cfg.horizon - ep.submit_step - 1)


def test_episode_utility_charges_expansions(cfg):
    s = cfg.initial_state()
    free = run_episode(s, cfg.model_set(), expansion_cost=0.0)
    paid = run_episode(s, cfg.model_set(), expansion_cost=1e-3)
    assert free.utilities[0] - paid.utilities[0] == pytest.approx(1e-3 * paid.total_expansions)


def test_seeds_change_the_search(cfg):
    a = run_episode(RunConfig.load(seed=1).initial_state(), cfg.model_set())
    b = run_episode(RunConfig.load(seed=2).initial_state(), cfg.model_set())
    again = run_episode(RunConfig.load(seed=1).initial_state(), cfg.model_set())
    assert a.to_obj() == again.to_obj()
    assert a.expansions != b.expansions or a.records != b.records


def test_state_snapshot_round_trips(cfg):
    s = cfg.initial_state()
    back = MachineState.from_obj(textio.loads(textio.dumps(s.to_obj())))
    assert back.digest == s.digest and back == s


def test_pipeline_episode_submits():
    cfg = RunConfig.load(domain="pipeline")
    ep = run_episode(cfg.initial_state(), cfg.model_set())
    assert ep.submitted is not None
    assert domains.get("pipeline").type_compatible(ep.submitted)
