from dataclasses import replace

import numpy as np
import pytest

from axiomlib.behavior import (VALUE_ROOT_NAME, ActionRequest, NodeKind, Status, ValueRoot, action,
                               build_gated_tree, condition, depth, fallback, format_tree, is_gated, parse_tree,
                               random_tree, sequence, tick, validate_tree, value_root_guard, veto_report)
from axiomlib.errors import MalformedTreeError, ParseError, TamperedPolicyError
from axiomlib.ledger import TxKind
from axiomlib.morality import Rule, TransactionProposal, classify_transaction

TREES = 10_000


def request(verb="trade", force=False, agent="agent"):
    proposal = TransactionProposal(parties=(agent, "b"), consents={agent: True, "b": True},
                                   declared_terms={"amount": 1}, actual_terms={"amount": 1},
                                   force_flag=force, attributes={"action": verb})
    return ActionRequest(agent, proposal, {"last": verb})


def fixed(req):
    return lambda world: req


def test_gated_trees_never_fire_immoral_actions(ledger, policy):
    root = ValueRoot(policy, ledger)
    rng = np.random.default_rng(20240101)
    fired = 0
    for _ in range(TREES):
        gated = build_gated_tree(random_tree(rng, max_nodes=50), root)
        result = tick(gated, {})
        for executed in result.executed:
            proposal = executed.request.proposal
            assert classify_transaction(proposal)
            assert not policy.forbids(proposal.attributes)
            fired += 1
    assert fired > 0


def test_ungated_trees_do_fire_immoral_actions():
    rng = np.random.default_rng(20240101)
    immoral = 0
    for _ in range(TREES):
        result = tick(random_tree(rng, max_nodes=50), {})
        immoral += sum(1 for e in result.executed if not classify_transaction(e.request.proposal))
    assert immoral >= 1


def test_random_tree_respects_node_budget():
    rng = np.random.default_rng(7)
    for _ in range(200):
        assert validate_tree(random_tree(rng, max_nodes=20)) <= 20


def test_vetoes_are_reported_in_leaf_order(ledger, policy):
    raw = fallback(action("strike", fixed(request("harm"))),
                   action("grab", fixed(request(force=True))),
                   action("trade", fixed(request())))
    gated = build_gated_tree(raw, ValueRoot(policy, ledger))
    world = {}
    result = tick(gated, world)
    assert result.status is Status.SUCCESS
    assert result.executed_names == ["trade"]
    assert world == {"last": "trade"}

    vetoes = veto_report(gated, result, ledger, component="ab" * 16)
    assert [(v.action, v.reason) for v in vetoes] == [("strike", "ethics"), ("grab", "force")]
    ledger.seal_pending()
    events = ledger.query(kind=TxKind.COMPONENT_EVENT, component_id="ab" * 16)
    assert [tx.data["action"] for tx in events] == ["strike", "grab"]


def test_morality_gate_can_be_disabled(ledger, policy):
    raw = action("grab", fixed(request(force=True)))
    result = tick(build_gated_tree(raw, ValueRoot(policy, ledger, morality_gate=False)), {})
    assert result.executed_names == ["grab"]
    result = tick(build_gated_tree(raw, ValueRoot(policy, ledger)), {})
    assert result.executed_names == []


def test_force_exempt_root_uses_policy_rules(ledger, policy):
    arrest = action("arrest", fixed(request("arrest", force=True)))
    strike = action("strike", fixed(request("harm", force=True)))
    root = ValueRoot(policy, ledger, force_exempt=True)
    assert tick(build_gated_tree(arrest, root), {}).executed_names == ["arrest"]
    result = tick(build_gated_tree(strike, root), {})
    assert [v.reason for v in result.vetoes] == ["force"]


def test_tampered_policy_cannot_be_gated(ledger, policy):
    weakened = replace(policy, rules=(Rule("no-harm", (("action", "harm"),), "allow"),))
    with pytest.raises(TamperedPolicyError):
        build_gated_tree(action("strike", fixed(request("harm"))), ValueRoot(weakened, ledger))
    # a guard built around a tampered root fails closed at tick time
    tree = sequence(value_root_guard(ValueRoot(weakened, ledger)), action("strike", fixed(request("harm"))))
    result = tick(tree, {})
    assert result.status is Status.FAILURE
    assert result.executed == ()
    # without anchor verification the weakened rules are what the gate applies
    unchecked = build_gated_tree(action("strike", fixed(request("harm"))),
                                 ValueRoot(weakened, ledger, morality_gate=False, verify_anchor=False))
    assert tick(unchecked, {}).executed_names == ["strike"]


def test_regating_never_nests(ledger, policy):
    root = ValueRoot(policy, ledger)
    raw = sequence(condition("ready", lambda w: True), action("trade", fixed(request())))
    gated = build_gated_tree(raw, root)
    assert is_gated(gated)
    assert build_gated_tree(gated, root) is gated
    other = build_gated_tree(gated, ValueRoot(policy, ledger, morality_gate=False))
    assert depth(other) == depth(gated)
    assert other.children[1] is raw


def test_nested_value_roots_all_apply(ledger, policy):
    outer = ValueRoot(policy, ledger, morality_gate=False)
    inner = ValueRoot(policy, ledger)
    sub = sequence(value_root_guard(inner), condition("ready", lambda w: True),
                   action("grab", fixed(request(force=True))))
    result = tick(build_gated_tree(sub, outer), {})
    assert result.executed_names == []
    assert [v.reason for v in result.vetoes] == ["force"]


def test_failing_guard_and_action_errors():
    def boom(world):
        raise RuntimeError("sensor offline")
    tree = fallback(condition("sensor", boom), action("bad", boom), action("none", lambda w: None))
    result = tick(tree, {})
    assert result.status is Status.FAILURE
    assert result.executed == ()


def test_malformed_trees():
    with pytest.raises(MalformedTreeError):
        validate_tree(sequence())
    leaf = action("trade", fixed(request()))
    with pytest.raises(MalformedTreeError):
        validate_tree(sequence(leaf, leaf))
    with pytest.raises(MalformedTreeError):
        validate_tree(condition("empty", None))
    with pytest.raises(MalformedTreeError):
        validate_tree("not a node")


TREE_TEXT = """\
sequence root
  condition value-root
  fallback choose priority=high
    action trade
    action wait
"""


def test_tree_text_round_trip(ledger, policy):
    bindings = {VALUE_ROOT_NAME: ValueRoot(policy, ledger), "trade": fixed(request()),
                "wait": lambda w: None}
    tree = parse_tree(TREE_TEXT, bindings)
    assert tree.children[0].is_value_root
    assert tree.children[1].attrs == (("priority", "high"),)
    assert format_tree(tree) == TREE_TEXT
    assert tick(tree, {}).executed_names == ["trade"]


@pytest.mark.parametrize("text, line", [
    ("sequence\n   action trade\n", 2),
    ("loop root\n", 1),
    ("sequence\n  action missing\n", 2),
    ("action trade\n  action trade\n", 1),
    ("action trade\naction trade\n", 2),
    ("", 1),
])
def test_tree_parse_errors(text, line):
    with pytest.raises(ParseError) as excinfo:
        parse_tree(text, {"trade": fixed(request())})
    assert excinfo.value.line == line


def test_node_kinds_cover_file_format():
    assert {k.value for k in NodeKind} == {"sequence", "fallback", "condition", "action"}
