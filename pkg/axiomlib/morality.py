"""
Morality Module for axiomlib

This module holds the two value mechanisms every agent is bound by: an ethics
policy whose digest is anchored on the ledger so it cannot be silently altered,
and the voluntary-exchange test that classifies a proposed transaction as moral
only when it involves no force, no fraud, full consent and no imposition on
third parties.

Key features:
- Ordered attribute=value guard rules, first match wins, default allow
- Canonical policy text (LF line endings) is exactly what gets digested
- Quorum-anchored policies and tamper detection against the on-chain digest
- Successor policies that inherit every rule of their parent
- Force exemption for police/military agents, where the policy's guard rules
  stand in for the force clause

Policy file format:
    rule <id>: when <attr>=<value>[,<attr>=<value>...] then <allow|forbid>
    rule <id>: when * then <allow|forbid>

Example Usage:
    from axiomlib.morality import parse_policy, anchor_ethics, classify_transaction

    policy = anchor_ethics(ledger, parse_policy(text), votes=ledger.validators)
    verdict = classify_transaction(proposal)
    if not verdict:
        print(verdict.reason.value)
"""

import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum

from .errors import AnchorNotFoundError, MalformedProposalError, ParseError
from .ledger import TxKind, TxRef, digest, encode_payload, find_transaction

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"^[^\s,=:*]+$")
_RULE_LINE = re.compile(r"^rule\s+(?P<id>[^\s:]+):\s+when\s+(?P<guard>.+?)\s+then\s+(?P<verdict>\S+)$")


class Verdict(Enum):
    ALLOW = "allow"
    FORBID = "forbid"


class ImmoralReason(Enum):
    FORCE = "force"
    FRAUD = "fraud"
    INVOLUNTARY = "involuntary"
    THIRD_PARTY = "third-party-imposition"


class EthicsStatus(Enum):
    UNCHANGED = "unchanged"
    TAMPERED = "tampered"


@dataclass(frozen=True)
class Rule:
    rule_id: str
    guard: tuple
    verdict: Verdict

    def __post_init__(self):
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        object.__setattr__(self, "guard", tuple((str(a), str(v)) for a, v in self.guard))
        for token in (self.rule_id,) + tuple(t for pair in self.guard for t in pair):
            if not _TOKEN.match(token):
                raise ValueError(f"'{token}' is not a valid rule token")

    def matches(self, attributes):
        return all(str(attributes.get(attr)) == value for attr, value in self.guard)

    def format(self):
        guard = ",".join(f"{a}={v}" for a, v in self.guard) or "*"
        return f"rule {self.rule_id}: when {guard} then {self.verdict.value}"


@dataclass(frozen=True)
class PolicyAnchor:
    ref: TxRef
    digest: str

    @property
    def policy_id(self):
        return f"ethics-{self.digest[:12]}"


@dataclass(frozen=True)
class EthicsPolicy:
    rules: tuple
    anchor: PolicyAnchor = None
    parent: str = None

    def canonical(self):
        return format_policy(self).encode("utf-8")

    def digest(self):
        return digest(self.canonical()).hex()

    def evaluate(self, attributes):
        """First matching rule's verdict and id; (ALLOW, None) when nothing matches."""
        for rule in self.rules:
            if rule.matches(attributes):
                return rule.verdict, rule.rule_id
        return Verdict.ALLOW, None

    def forbids(self, attributes):
        return self.evaluate(attributes)[0] is Verdict.FORBID


def format_policy(policy):
    rules = policy.rules if isinstance(policy, EthicsPolicy) else policy
    return "".join(rule.format() + "\n" for rule in rules)


def parse_policy(text, source=None):
    """
    Parse policy text into an unanchored EthicsPolicy.

    Args:
        text: Rule lines; blank lines and '#' comments are ignored
        source: File name used in diagnostics

    Returns:
        EthicsPolicy
    """
    rules = []
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _RULE_LINE.match(line)
        if match is None:
            raise ParseError("expected 'rule <id>: when <guard> then <allow|forbid>'", line_no, 1, source)
        guard_text = match.group("guard")
        guard = []
        if guard_text != "*":
            for term in guard_text.split(","):
                attr, sep, value = term.strip().partition("=")
                if not sep:
                    raise ParseError(f"guard term '{term}' is not attr=value", line_no,
                                     raw.find(term) + 1, source)
                guard.append((attr, value))
        try:
            rule = Rule(match.group("id"), tuple(guard), match.group("verdict"))
        except ValueError as e:
            raise ParseError(str(e), line_no, 1, source) from None
        if rule.rule_id in seen:
            raise ParseError(f"duplicate rule id '{rule.rule_id}'", line_no, 1, source)
        seen.add(rule.rule_id)
        rules.append(rule)
    return EthicsPolicy(tuple(rules))


@dataclass(frozen=True)
class TransactionProposal:
    parties: tuple
    consents: Mapping
    declared_terms: object = None
    actual_terms: object = None
    force_flag: bool = False
    affected_third_parties: tuple = ()
    attributes: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class MoralVerdict:
    moral: bool
    reason: ImmoralReason = None

    def __bool__(self):
        return self.moral

    def __str__(self):
        return "Moral" if self.moral else f"Immoral({self.reason.value})"


MORAL = MoralVerdict(True)


def _canonical_terms(terms):
    try:
        return encode_payload({"terms": terms})
    except (TypeError, ValueError) as e:
        raise MalformedProposalError(f"terms are not canonically serialisable: {e}") from None


def validate_proposal(p):
    if not isinstance(p, TransactionProposal):
        raise MalformedProposalError(f"expected TransactionProposal, got {type(p).__name__}")
    parties = tuple(p.parties)
    if not parties:
        raise MalformedProposalError("a proposal needs at least one party")
    if len(set(parties)) != len(parties):
        raise MalformedProposalError("parties must be distinct")
    if not isinstance(p.consents, Mapping) or set(p.consents) != set(parties):
        raise MalformedProposalError("consents must have exactly one entry per party")
    if set(p.affected_third_parties) & set(parties):
        raise MalformedProposalError("a party cannot also be an affected third party")
    if not isinstance(p.attributes, Mapping):
        raise MalformedProposalError("attributes must be a mapping")


def classify_transaction(p, force_exempt=False, policy=None):
    """
    Voluntary-exchange test.

    Args:
        p: TransactionProposal
        force_exempt: Acting agent belongs to a force-exempt class; the policy's
            guard rules replace the force clause (fraud and consent still apply)
        policy: EthicsPolicy consulted for force-exempt agents

    Returns:
        MoralVerdict with the first violated condition in the order
        force, fraud, involuntary, third-party-imposition
    """
    validate_proposal(p)
    if force_exempt:
        if policy is not None and policy.forbids(p.attributes):
            return MoralVerdict(False, ImmoralReason.FORCE)
    elif p.force_flag:
        return MoralVerdict(False, ImmoralReason.FORCE)
    if _canonical_terms(p.declared_terms) != _canonical_terms(p.actual_terms):
        return MoralVerdict(False, ImmoralReason.FRAUD)
    if not all(p.consents[party] for party in p.parties):
        return MoralVerdict(False, ImmoralReason.INVOLUNTARY)
    if p.affected_third_parties:
        return MoralVerdict(False, ImmoralReason.THIRD_PARTY)
    return MORAL


def anchor_ethics(ledger, policy, votes, author=None):
    """
    Commit a policy digest through an ethics-anchor transaction.

    Returns:
        The same rules with anchor set (policy id on anchor.policy_id)
    """
    policy_digest = policy.digest()
    payload = {"digest": policy_digest, "rules": len(policy.rules)}
    if policy.parent is not None:
        payload["parent"] = policy.parent
    ref = ledger.commit(author or ledger.operator, TxKind.ETHICS_ANCHOR, payload, votes,
                        what="ethics anchoring")
    logger.info("Anchored ethics policy %s at %s", policy_digest[:12], ref)
    return EthicsPolicy(policy.rules, PolicyAnchor(ref, policy_digest), policy.parent)


def anchored_digest(policy, chain):
    """Digest recorded on chain for the policy's anchor."""
    if policy.anchor is None:
        raise AnchorNotFoundError("policy carries no anchor")
    tx = find_transaction(chain, policy.anchor.ref)
    if tx is None or tx.kind != TxKind.ETHICS_ANCHOR or "digest" not in tx.data:
        raise AnchorNotFoundError(f"{policy.anchor.ref} is not an ethics-anchor transaction")
    return tx.data


def verify_ethics_unchanged(policy, chain):
    """
    Compare a policy against its on-chain anchor.

    Args:
        policy: EthicsPolicy claiming an anchor
        chain: Ledger or sequence of Blocks

    Returns:
        EthicsStatus.UNCHANGED or EthicsStatus.TAMPERED
    """
    if hasattr(chain, "verify") and not chain.verify().valid:
        logger.error("Chain failed integrity check while verifying ethics anchor")
        return EthicsStatus.TAMPERED
    data = anchored_digest(policy, chain)
    if (policy.digest() != data["digest"] or policy.anchor.digest != data["digest"]
            or policy.parent != data.get("parent")):
        logger.warning("Ethics policy %s does not match its anchor", policy.anchor.policy_id)
        return EthicsStatus.TAMPERED
    return EthicsStatus.UNCHANGED


def derive_successor(policy, added_rules=()):
    """
    Next generation's value system: every parent rule first, then additions.

    Args:
        policy: Parent EthicsPolicy
        added_rules: Extra Rules whose ids do not collide with the parent's

    Returns:
        Unanchored EthicsPolicy whose parent is the parent's digest
    """
    existing = {rule.rule_id for rule in policy.rules}
    extra = tuple(rule for rule in added_rules if rule.rule_id not in existing)
    return EthicsPolicy(tuple(policy.rules) + extra, parent=policy.digest())
