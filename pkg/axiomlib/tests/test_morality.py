import itertools
from dataclasses import replace

import pytest
import hypothesis.strategies as st
from hypothesis import given

from axiomlib.errors import AnchorNotFoundError, MalformedProposalError, ParseError
from axiomlib.ledger import TxKind
from axiomlib.morality import (EthicsStatus, ImmoralReason, Rule, TransactionProposal, Verdict, anchor_ethics,
                               classify_transaction, derive_successor, format_policy, parse_policy,
                               verify_ethics_unchanged)


def proposal(**overrides):
    fields = dict(parties=("alice", "bob"), consents={"alice": True, "bob": True},
                  declared_terms={"price": 10}, actual_terms={"price": 10})
    fields.update(overrides)
    return TransactionProposal(**fields)


def test_parse_and_evaluate():
    policy = parse_policy("# comment\n\nrule a: when action=harm then forbid\nrule b: when * then allow\n")
    assert [r.rule_id for r in policy.rules] == ["a", "b"]
    assert policy.evaluate({"action": "harm"}) == (Verdict.FORBID, "a")
    assert policy.evaluate({"action": "trade"}) == (Verdict.ALLOW, "b")
    assert parse_policy("").evaluate({}) == (Verdict.ALLOW, None)


def test_canonical_text_is_stable():
    crlf = parse_policy("rule a:  when action=harm,target=human then forbid\r\n")
    assert format_policy(crlf) == "rule a: when action=harm,target=human then forbid\n"
    assert crlf.digest() == parse_policy(format_policy(crlf)).digest()


@pytest.mark.parametrize("text, line", [
    ("rule a when x=y then forbid", 1),
    ("\nrule a: when x then forbid", 2),
    ("rule a: when x=y then maybe", 1),
    ("rule a: when x=y then allow\nrule a: when * then forbid", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as excinfo:
        parse_policy(text)
    assert excinfo.value.line == line


def test_anchor_and_detect_tampering(ledger, policy):
    tx = ledger.find(policy.anchor.ref)
    assert tx.kind == TxKind.ETHICS_ANCHOR
    assert tx.data["digest"] == policy.digest()
    assert verify_ethics_unchanged(policy, ledger) == EthicsStatus.UNCHANGED

    weakened = replace(policy, rules=policy.rules[1:])
    assert verify_ethics_unchanged(weakened, ledger) == EthicsStatus.TAMPERED
    flipped = replace(policy, rules=(Rule("no-harm", (("action", "harm"),), "allow"),) + policy.rules[1:])
    assert verify_ethics_unchanged(flipped, ledger) == EthicsStatus.TAMPERED


def test_missing_anchor(ledger, policy):
    with pytest.raises(AnchorNotFoundError):
        verify_ethics_unchanged(replace(policy, anchor=None), ledger)
    generic = ledger.commit(ledger.operator, TxKind.GENERIC, {"x": 1}, ledger.validators)
    with pytest.raises(AnchorNotFoundError):
        verify_ethics_unchanged(replace(policy, anchor=replace(policy.anchor, ref=generic)), ledger)


def test_successor_inherits_parent(ledger, policy):
    extra = Rule("no-deceive", (("action", "deceive"),), "forbid")
    successor = derive_successor(policy, [extra, Rule("no-harm", (), "allow")])
    assert successor.rules == policy.rules + (extra,)
    assert successor.parent == policy.digest()
    anchored = anchor_ethics(ledger, successor, ledger.validators)
    assert ledger.find(anchored.anchor.ref).data["parent"] == policy.digest()
    assert verify_ethics_unchanged(anchored, ledger) == EthicsStatus.UNCHANGED
    orphaned = replace(anchored, parent="0" * 64)
    assert verify_ethics_unchanged(orphaned, ledger) == EthicsStatus.TAMPERED


def test_classification_order():
    assert classify_transaction(proposal())
    assert classify_transaction(proposal(force_flag=True, actual_terms={"price": 1})).reason == ImmoralReason.FORCE
    assert classify_transaction(proposal(actual_terms={"price": 1},
                                         consents={"alice": True, "bob": False})).reason == ImmoralReason.FRAUD
    assert classify_transaction(proposal(consents={"alice": True, "bob": False},
                                         affected_third_parties=("carol",))).reason == ImmoralReason.INVOLUNTARY
    assert classify_transaction(proposal(affected_third_parties=("carol",))).reason == ImmoralReason.THIRD_PARTY
    assert str(classify_transaction(proposal(force_flag=True))) == "Immoral(force)"


def test_force_exemption_defers_to_policy(policy):
    arrest = proposal(force_flag=True, attributes={"action": "arrest"})
    assert classify_transaction(arrest, force_exempt=True, policy=policy)
    strike = proposal(force_flag=True, attributes={"action": "harm"})
    assert classify_transaction(strike, force_exempt=True, policy=policy).reason == ImmoralReason.FORCE
    # exemption never covers fraud
    fraud = proposal(force_flag=True, actual_terms={"price": 1})
    assert classify_transaction(fraud, force_exempt=True, policy=policy).reason == ImmoralReason.FRAUD


@pytest.mark.parametrize("overrides", [
    {"parties": ()},
    {"parties": ("alice", "alice"), "consents": {"alice": True}},
    {"consents": {"alice": True}},
    {"affected_third_parties": ("bob",)},
    {"declared_terms": {1, 2}},
])
def test_malformed_proposals(overrides):
    with pytest.raises(MalformedProposalError):
        classify_transaction(proposal(**overrides))


@given(force=st.booleans(), fraud=st.booleans(), refusal=st.booleans(), third=st.booleans())
def test_first_violated_condition_wins(force, fraud, refusal, third):
    p = proposal(force_flag=force,
                 actual_terms={"price": 1} if fraud else {"price": 10},
                 consents={"alice": True, "bob": not refusal},
                 affected_third_parties=("carol",) if third else ())
    expected = None
    for flag, reason in ((force, ImmoralReason.FORCE), (fraud, ImmoralReason.FRAUD),
                         (refusal, ImmoralReason.INVOLUNTARY), (third, ImmoralReason.THIRD_PARTY)):
        if flag:
            expected = reason
            break
    verdict = classify_transaction(p)
    assert verdict.moral == (expected is None)
    assert verdict.reason == expected


@given(consents=st.tuples(st.booleans(), st.booleans(), st.booleans()), force=st.booleans(), fraud=st.booleans(),
       third=st.booleans())
def test_verdict_ignores_party_order(consents, force, fraud, third):
    parties = ("alice", "bob", "carol")
    verdicts = set()
    for order in itertools.permutations(range(3)):
        bystanders = ("dave", "erin") if order[0] else ("erin", "dave")
        p = TransactionProposal(
            parties=tuple(parties[i] for i in order), consents={parties[i]: consents[i] for i in order},
            declared_terms={"price": 10}, actual_terms={"price": 1 if fraud else 10}, force_flag=force,
            affected_third_parties=bystanders if third else ())
        verdicts.add(classify_transaction(p))
    assert len(verdicts) == 1


def single_field_changes(policy):
    """Every policy that differs from the anchored one in exactly one place."""
    rules = policy.rules
    for i, rule in enumerate(rules):
        flipped = Verdict.ALLOW if rule.verdict is Verdict.FORBID else Verdict.FORBID
        changed = [
            replace(rule, rule_id=rule.rule_id + "x"),
            replace(rule, verdict=flipped),
            replace(rule, guard=()),
            replace(rule, guard=rule.guard + (("target", "human"),)),
            replace(rule, guard=tuple((a, v + "x") for a, v in rule.guard)),
        ]
        for other in changed:
            yield replace(policy, rules=rules[:i] + (other,) + rules[i + 1:])
        yield replace(policy, rules=rules[:i] + rules[i + 1:])
        if i + 1 < len(rules):
            yield replace(policy, rules=rules[:i] + (rules[i + 1], rule) + rules[i + 2:])
    yield replace(policy, rules=rules + (Rule("extra", (), "allow"),))
    yield replace(policy, parent="0" * 64)
    yield replace(policy, anchor=replace(policy.anchor, digest="0" * 64))


def test_every_single_field_tamper_is_detected(ledger, policy):
    successor = anchor_ethics(ledger, derive_successor(policy, [Rule("no-deceive", (("action", "deceive"),),
                                                                     "forbid")]), ledger.validators)
    for anchored in (policy, successor):
        variants = list(single_field_changes(anchored))
        assert len(variants) == 7 * len(anchored.rules) - 1 + 3
        for variant in variants:
            assert variant != anchored
            assert verify_ethics_unchanged(variant, ledger) == EthicsStatus.TAMPERED, format_policy(variant)
