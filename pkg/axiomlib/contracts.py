"""
Contracts Module for axiomlib

This module holds the automatable obligations of the containment scheme:
smart contracts whose clauses are checked against the sealed chain, and the
market layer built from them.

Key features:
- All-or-nothing contract execution with expiry and breach states
- Technology licenses granted only to verified, conformant, ethics-anchored requesters
- Smart tokens metering every resource request, with an exponential-growth detector
- Every holdings change is logged, so replay_holdings rebuilds balances from the chain
- Ostracism petitions that cut a target off from resources until repealed
- Generation vaults: k-of-n custodian unlock carrying the successor's ethics anchor
- Binomial compromise probability for a k-of-n custodian set

Contract file format:
    contract <id>
    party <identity>
    expires <tick>
    clause <id>: party=<identity> requires <obligation-name>(<arg>, ...)
    effect <key>=<value>

Built-in obligations (evaluated against sealed blocks only):
    on-chain-tx-exists(kind[, author]), license-held(licensee, technology),
    conformity-declared(component), ethics-anchored(digest-prefix),
    identity-valid(subject)

Example Usage:
    from axiomlib.contracts import Market, hack_probability

    market = Market(ledger, identities, components)
    decision = market.issue_license(credential, technology, now=3, policy=policy,
                                    requester_components=[ci])
    print(hack_probability(5, 4, 0.3))
"""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .errors import (
    AnchorNotFoundError,
    ContractBreachedError,
    ContractExpiredError,
    DomainError,
    ParseError,
    UnknownTechnologyError,
    UnverifiedSignerError,
)
from .ledger import Ledger, TxKind, TxRef, component_hex
from .morality import EthicsStatus, classify_transaction, verify_ethics_unchanged

logger = logging.getLogger(__name__)

DEFAULT_GROWTH_RATIO = 2.0
DEFAULT_GROWTH_WINDOW = 3
DEFAULT_PETITION_FRACTION = Fraction(2, 3)


# --- smart contracts -----------------------------------------------------------

class ContractState(Enum):
    OPEN = "open"
    EXECUTED = "executed"
    BREACHED = "breached"
    EXPIRED = "expired"


def _sealed_txs(chain):
    blocks = chain.blocks if isinstance(chain, Ledger) else tuple(chain)
    for block in blocks:
        yield from block.txs


def _tx_exists(chain, world, kind, author=None):
    wanted = TxKind.from_label(kind)
    return any(tx.kind == wanted and (author is None or tx.author == author) for tx in _sealed_txs(chain))


def _license_held(chain, world, licensee, technology):
    held = False
    for tx in _sealed_txs(chain):
        if tx.kind != TxKind.LICENSE:
            continue
        data = tx.data
        if data.get("licensee") == licensee and data.get("technology") == technology.lower():
            if data.get("outcome") == "granted":
                held = True
            elif data.get("action") == "revoke":
                held = False
    return held


def _conformity_declared(chain, world, component):
    declared = False
    for tx in _sealed_txs(chain):
        data = tx.data
        if tx.kind == TxKind.COMPONENT_EVENT and data.get("component") == component.lower():
            if data.get("event") == "conformity":
                declared = bool(data.get("declared"))
            elif data.get("event") == "configure":
                declared = bool(data.get("conformity"))
    return declared


def _ethics_anchored(chain, world, digest_prefix):
    return any(tx.kind == TxKind.ETHICS_ANCHOR and tx.data.get("digest", "").startswith(digest_prefix.lower())
               for tx in _sealed_txs(chain))


def _identity_valid(chain, world, subject):
    now = world.get("now", 0)
    live = {}
    for tx in _sealed_txs(chain):
        if tx.kind != TxKind.IDENTITY_ISSUE:
            continue
        data = tx.data
        if data.get("action") in ("issue", "reissue"):
            live[data["serial"]] = (data["subject"], tuple(data["validity"]))
            live.pop(data.get("supersedes"), None)
        elif data.get("action") == "revoke":
            live.pop(data.get("serial"), None)
    return any(s == subject and start <= now < end for s, (start, end) in live.values())


OBLIGATIONS = {
    "on-chain-tx-exists": _tx_exists,
    "license-held": _license_held,
    "conformity-declared": _conformity_declared,
    "ethics-anchored": _ethics_anchored,
    "identity-valid": _identity_valid,
}


@dataclass(frozen=True)
class Obligation:
    name: str
    args: tuple = ()

    def __post_init__(self):
        if self.name not in OBLIGATIONS:
            raise ValueError(f"unknown obligation '{self.name}'")

    def holds(self, chain, world):
        try:
            return bool(OBLIGATIONS[self.name](chain, world, *self.args))
        except Exception as e:
            logger.warning("Obligation %s%s raised %s; treating as unmet", self.name, self.args, e)
            return False

    def __str__(self):
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class Clause:
    clause_id: str
    obligation: Obligation
    party: str


@dataclass
class SmartContract:
    contract_id: str
    parties: tuple = ()
    clauses: tuple = ()
    effects: dict = field(default_factory=dict)
    expires_at: int = None
    state: ContractState = ContractState.OPEN

    def unmet_clauses(self, chain, world):
        """Clause ids whose obligations do not hold, in clause order."""
        return [c.clause_id for c in self.clauses if not c.obligation.holds(chain, world)]


@dataclass(frozen=True)
class ExecutionResult:
    executed: bool
    unmet: tuple = ()


def _log_contract(chain, contract, event, **details):
    if isinstance(chain, Ledger):
        payload = {"event": event, "contract": contract.contract_id}
        payload.update(details)
        chain.record(chain.operator, TxKind.GENERIC, payload)


def execute_contract(contract, chain, world):
    """
    Execute a contract iff every clause verifies.

    Args:
        contract: SmartContract in state OPEN
        chain: Ledger or sequence of Blocks (sealed blocks only are consulted)
        world: Mutable mapping; 'now' is the current tick

    Returns:
        ExecutionResult; a pending result leaves world untouched
    """
    if contract.state is ContractState.EXPIRED:
        raise ContractExpiredError(f"contract {contract.contract_id} has expired")
    if contract.state is ContractState.BREACHED:
        raise ContractBreachedError(f"contract {contract.contract_id} was breached")
    if contract.state is ContractState.EXECUTED:
        return ExecutionResult(True)
    if contract.expires_at is not None and world.get("now", 0) >= contract.expires_at:
        contract.state = ContractState.EXPIRED
        _log_contract(chain, contract, "contract-expired")
        raise ContractExpiredError(f"contract {contract.contract_id} has expired")

    unmet = contract.unmet_clauses(chain, world)
    if unmet:
        return ExecutionResult(False, tuple(unmet))
    world.update(contract.effects)
    contract.state = ContractState.EXECUTED
    _log_contract(chain, contract, "contract-executed")
    return ExecutionResult(True)


def breach_contract(contract, chain, clause_id, evidence=""):
    """Mark an open contract breached (a party reneged on clause_id)."""
    if contract.state is not ContractState.OPEN:
        return contract.state
    contract.state = ContractState.BREACHED
    _log_contract(chain, contract, "contract-breached", clause=clause_id, evidence=str(evidence))
    return contract.state


_CLAUSE_LINE = re.compile(
    r"^clause\s+(?P<id>[^\s:]+):\s+party=(?P<party>\S+)\s+requires\s+(?P<name>[\w-]+)\((?P<args>[^)]*)\)$")


def parse_contract(text, source=None):
    """
    Parse a contract file.

    Returns:
        SmartContract in state OPEN
    """
    contract_id = None
    parties = []
    clauses = []
    effects = {}
    expires = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "clause":
            match = _CLAUSE_LINE.match(line)
            if match is None:
                raise ParseError("expected 'clause <id>: party=<identity> requires <name>(<args>)'",
                                 line_no, 1, source)
            args = tuple(a.strip() for a in match.group("args").split(",") if a.strip())
            try:
                obligation = Obligation(match.group("name"), args)
            except ValueError as e:
                raise ParseError(str(e), line_no, raw.find(match.group("name")) + 1, source) from None
            clauses.append(Clause(match.group("id"), obligation, match.group("party")))
            if match.group("party") not in parties:
                parties.append(match.group("party"))
        elif keyword == "contract" and rest:
            contract_id = rest
        elif keyword == "party" and rest:
            if rest not in parties:
                parties.append(rest)
        elif keyword == "expires":
            try:
                expires = int(rest)
            except ValueError:
                raise ParseError(f"expiry '{rest}' is not an integer tick", line_no, 9, source) from None
        elif keyword == "effect" and "=" in rest:
            key, _, value = rest.partition("=")
            effects[key.strip()] = value.strip()
        else:
            raise ParseError(f"unexpected line '{keyword}'", line_no, 1, source)
    if contract_id is None:
        raise ParseError("contract file lacks a 'contract <id>' line", None, None, source)
    return SmartContract(contract_id, tuple(parties), tuple(clauses), effects, expires)


# --- market layer ---------------------------------------------------------------

class DenialReason(Enum):
    IDENTITY = "identity"
    CONFORMITY = "conformity"
    ETHICS = "ethics"
    OSTRACIZED = "ostracized"
    COMPLIANCE = "compliance"


@dataclass(frozen=True)
class LicenseGrant:
    licensee: str
    technology: object
    terms: object
    granted_at: int
    ref: TxRef = None
    revoked: bool = False


@dataclass(frozen=True)
class LicenseDecision:
    granted: bool
    grant: LicenseGrant = None
    reason: DenialReason = None

    def __bool__(self):
        return self.granted


@dataclass
class SmartToken:
    holder: object
    components: tuple = ()
    policy: object = None
    usage_meter: list = field(default_factory=list)

    @property
    def subject(self):
        return self.holder.subject


@dataclass(frozen=True)
class SpendResult:
    granted: bool
    reason: DenialReason = None
    flagged: bool = False

    def __bool__(self):
        return self.granted


@dataclass
class Petition:
    petition_id: str
    target: str
    threshold: int
    electorate: frozenset = None
    signatories: set = field(default_factory=set)
    enacted: bool = False
    repeal_signatories: set = field(default_factory=set)
    repealed: bool = False


@dataclass
class GenerationVault:
    capability: object
    custodians: tuple
    unlock_quorum: int
    value_system_ref: object
    unlocked: bool = False
    generation: int = 1

    def __post_init__(self):
        if not 1 <= self.unlock_quorum <= len(self.custodians):
            raise DomainError(f"unlock quorum {self.unlock_quorum} outside 1..{len(self.custodians)}")


@dataclass(frozen=True)
class UnlockResult:
    unlocked: bool
    reason: str = None
    signers: tuple = ()
    ref: TxRef = None

    def __bool__(self):
        return self.unlocked


def growth_flag(meter, ratio=DEFAULT_GROWTH_RATIO, window=DEFAULT_GROWTH_WINDOW):
    """True when each of the last `window` entries is at least ratio x its predecessor."""
    if len(meter) < window + 1:
        return False
    tail = meter[-(window + 1):]
    return all(later >= ratio * earlier for earlier, later in zip(tail, tail[1:]))


class Market:
    """
    The market/resource layer: licenses, tokens, petitions, holdings and vaults.

    Args:
        ledger: Ledger receiving every market event
        identities: IdentityRegistry verifying requesters, signers and custodians
        components: ComponentRegistry the licensed technologies live in
        growth_ratio: Exponential-growth detector ratio c
        growth_window: Exponential-growth detector window w
        petition_fraction: Default petition threshold as a fraction of the electorate
        required_factors: Factor kinds required when verifying credentials
    """

    def __init__(self, ledger, identities, components=None, growth_ratio=DEFAULT_GROWTH_RATIO,
                 growth_window=DEFAULT_GROWTH_WINDOW, petition_fraction=DEFAULT_PETITION_FRACTION,
                 required_factors=None):
        self.ledger = ledger
        self.identities = identities
        self.components = components
        self.growth_ratio = growth_ratio
        self.growth_window = growth_window
        self.petition_fraction = Fraction(petition_fraction)
        self.required_factors = required_factors
        self.holdings = {}
        self.ostracized = set()
        self.licenses = []
        self._petitions = 0

    def _verified(self, credential, now):
        return self.identities.check(credential, now, self.required_factors).verified

    def _ethics_ok(self, policy):
        if policy is None:
            return False
        try:
            return verify_ethics_unchanged(policy, self.ledger) is EthicsStatus.UNCHANGED
        except AnchorNotFoundError:
            return False

    # licenses

    def issue_license(self, requester, technology, now, policy, requester_components=(), terms=None):
        """
        Grant access to a registered technology.

        Args:
            requester: Credential of the requester
            technology: ComponentId of the technology
            now: Current tick
            policy: Requester's anchored EthicsPolicy
            requester_components: Requester's ConfigurationItems (all must declare conformity)
            terms: Optional SmartContract governing the license

        Returns:
            LicenseDecision; denial reasons in order identity, conformity, ethics, ostracized
        """
        if self.components is None or not self.components.is_registered(technology):
            raise UnknownTechnologyError(f"technology {component_hex(technology)} is not registered")

        subject = requester.subject
        reason = None
        if not self._verified(requester, now):
            reason = DenialReason.IDENTITY
        elif not requester_components or not all(ci.conformity_declared for ci in requester_components):
            reason = DenialReason.CONFORMITY
        elif not self._ethics_ok(policy):
            reason = DenialReason.ETHICS
        elif subject in self.ostracized:
            reason = DenialReason.OSTRACIZED

        payload = {"licensee": subject, "technology": component_hex(technology), "tick": now}
        author = subject if self.ledger.is_registered(subject) else self.ledger.operator
        if reason is not None:
            payload.update(outcome="denied", reason=reason.value)
            self.ledger.record(author, TxKind.LICENSE, payload)
            logger.info("License for %s denied: %s", subject, reason.value)
            return LicenseDecision(False, reason=reason)

        payload["outcome"] = "granted"
        if terms is not None:
            payload["terms"] = terms.contract_id
        tx = self.ledger.record(author, TxKind.LICENSE, payload)
        grant = LicenseGrant(subject, technology, terms, now, TxRef(self.ledger.height + 1, tx.id))
        self.licenses.append(grant)
        return LicenseDecision(True, grant)

    def holds_license(self, subject, technology):
        wanted = component_hex(technology)
        return any(g.licensee == subject and component_hex(g.technology) == wanted and not g.revoked
                   for g in self.licenses)

    def revoke_license(self, grant, votes):
        self.ledger.commit(self.ledger.operator, TxKind.LICENSE,
                           {"action": "revoke", "licensee": grant.licensee,
                            "technology": component_hex(grant.technology)},
                           votes, what="license revocation")
        self.licenses = [g for g in self.licenses if g is not grant]
        revoked = LicenseGrant(grant.licensee, grant.technology, grant.terms, grant.granted_at, grant.ref, True)
        self.licenses.append(revoked)
        return revoked

    # tokens

    def compliant(self, token, now):
        """Conformity of every component plus an unchanged ethics anchor."""
        return (bool(token.components) and all(ci.conformity_declared for ci in token.components)
                and self._ethics_ok(token.policy))

    def spend_token(self, token, amount, now):
        """
        Request resource units on a token.

        Args:
            token: SmartToken
            amount: Resource units (> 0)
            now: Current tick

        Returns:
            SpendResult; the request is metered and logged whether granted or not
        """
        if not amount > 0:
            raise DomainError(f"spend amount must be positive, got {amount}")
        subject = token.subject
        token.usage_meter.append(float(amount))
        flagged = growth_flag(token.usage_meter, self.growth_ratio, self.growth_window)

        reason = None
        if subject in self.ostracized:
            reason = DenialReason.OSTRACIZED
        elif not self.compliant(token, now):
            reason = DenialReason.COMPLIANCE

        payload = {"holder": subject, "amount": float(amount), "tick": now,
                   "outcome": "denied" if reason else "granted", "flagged": flagged}
        if reason is not None:
            payload["reason"] = reason.value
        author = subject if self.ledger.is_registered(subject) else self.ledger.operator
        self.ledger.record(author, TxKind.TOKEN_SPEND, payload)
        if flagged:
            logger.warning("Exponential resource growth flagged for %s", subject)
        if reason is None:
            self.holdings[subject] = self.holdings.get(subject, 0.0) + float(amount)
        return SpendResult(reason is None, reason, flagged)

    def credit(self, subject, amount, now, reason):
        """
        Change holdings outside token metering (endowments, earnings, settled trades).

        The change is still logged, so replay_holdings rebuilds it from the chain.

        Returns:
            The subject's new holdings
        """
        if amount < 0:
            raise DomainError(f"credit amount cannot be negative, got {amount}")
        self.ledger.record(self.ledger.operator, TxKind.GENERIC,
                           {"event": "holdings", "holder": subject, "amount": float(amount), "tick": now,
                            "reason": reason})
        self.holdings[subject] = self.holdings.get(subject, 0.0) + float(amount)
        return self.holdings[subject]

    # petitions

    def create_petition(self, target, electorate, threshold=None):
        electorate = frozenset(electorate)
        if threshold is None:
            f = self.petition_fraction
            threshold = max(1, -(-f.numerator * len(electorate) // f.denominator))
        self._petitions += 1
        petition = Petition(f"petition-{self._petitions}", target, threshold, electorate)
        self.ledger.record(self.ledger.operator, TxKind.PETITION_SIGN,
                           {"action": "create", "petition": petition.petition_id, "target": target,
                            "threshold": threshold})
        return petition

    def _signature(self, petition, signer, now):
        if not self._verified(signer, now):
            raise UnverifiedSignerError(f"'{signer.subject}' failed identity verification")
        if petition.electorate and signer.subject not in petition.electorate:
            raise UnverifiedSignerError(f"'{signer.subject}' is not in the electorate")
        return signer.subject

    def sign_petition(self, petition, signer, now):
        """
        Add a verified signature; enact ostracism at threshold.

        Returns:
            The updated Petition
        """
        subject = self._signature(petition, signer, now)
        if subject in petition.signatories:
            return petition
        petition.signatories.add(subject)
        self.ledger.record(subject, TxKind.PETITION_SIGN,
                           {"action": "sign", "petition": petition.petition_id, "target": petition.target})
        if not petition.enacted and len(petition.signatories) >= petition.threshold:
            petition.enacted = True
            self.ostracized.add(petition.target)
            self.ledger.record(self.ledger.operator, TxKind.PETITION_SIGN,
                               {"action": "enact", "petition": petition.petition_id, "target": petition.target})
            logger.info("Ostracism of %s enacted by %s", petition.target, petition.petition_id)
        return petition

    def repeal_petition(self, petition, signer, now):
        """Repeal signatures need the same threshold as enactment."""
        subject = self._signature(petition, signer, now)
        if not petition.enacted or petition.repealed or subject in petition.repeal_signatories:
            return petition
        petition.repeal_signatories.add(subject)
        self.ledger.record(subject, TxKind.PETITION_SIGN,
                           {"action": "repeal-sign", "petition": petition.petition_id})
        if len(petition.repeal_signatories) >= petition.threshold:
            petition.repealed = True
            self.ostracized.discard(petition.target)
            self.ledger.record(self.ledger.operator, TxKind.PETITION_SIGN,
                               {"action": "repeal", "petition": petition.petition_id, "target": petition.target})
        return petition

    # exchanges

    def exchange(self, proposal, force_exempt=False, policy=None, author=None):
        """Classify a market trade and log the verdict."""
        verdict = classify_transaction(proposal, force_exempt, policy)
        payload = {"event": "exchange", "parties": sorted(proposal.parties), "verdict": str(verdict)}
        self.ledger.record(author or self.ledger.operator, TxKind.GENERIC, payload)
        return verdict

    # generation vaults

    def unlock_generation(self, vault, signatures, successor, now):
        """
        Unlock the next generation's capability.

        Args:
            vault: GenerationVault (locked)
            signatures: Custodian Credentials; duplicates and non-custodians are ignored
            successor: Successor EthicsPolicy, which must verify unchanged
            now: Current tick

        Returns:
            UnlockResult; refusals are logged with outcome 'refused'
        """
        capability = component_hex(vault.capability)
        if vault.unlocked:
            return UnlockResult(False, "already-unlocked")
        signers = sorted({cred.subject for cred in signatures
                          if cred.subject in vault.custodians and self._verified(cred, now)})
        reason = None
        if len(signers) < vault.unlock_quorum:
            reason = "below-quorum"
        elif not self._ethics_ok(successor):
            reason = "tampered-successor-ethics"

        payload = {"capability": capability, "generation": vault.generation, "signers": signers}
        if reason is not None:
            payload.update(outcome="refused", reason=reason)
            self.ledger.record(self.ledger.operator, TxKind.UNLOCK_VOTE, payload)
            logger.info("Unlock of generation %d refused: %s", vault.generation, reason)
            return UnlockResult(False, reason, tuple(signers))

        payload.update(outcome="unlocked", ethics=successor.anchor.digest, parent=successor.parent,
                       vault_policy=vault.value_system_ref.digest())
        tx = self.ledger.record(self.ledger.operator, TxKind.UNLOCK_VOTE, payload)
        vault.unlocked = True
        return UnlockResult(True, None, tuple(signers), TxRef(self.ledger.height + 1, tx.id))


def replay_holdings(chain):
    """Rebuild market holdings from granted token spends and logged credits, in chain order."""
    holdings = {}
    for tx in _sealed_txs(chain):
        data = tx.data
        granted = tx.kind == TxKind.TOKEN_SPEND and data.get("outcome") == "granted"
        credited = tx.kind == TxKind.GENERIC and data.get("event") == "holdings"
        if granted or credited:
            holdings[data["holder"]] = holdings.get(data["holder"], 0.0) + float(data["amount"])
    return holdings


@dataclass(frozen=True)
class LineageReport:
    intact: bool
    digests: tuple
    broken_at: int = None


def ethics_lineage(chain, capability=None):
    """
    Check the chain of ethics digests across generation unlocks.

    Every unlock must hand over to a successor derived from the vault's own
    value system, and each vault must hold the previous successor's values.

    Returns:
        LineageReport (broken_at is the generation where the chain breaks)
    """
    wanted = component_hex(capability) if capability is not None else None
    digests = []
    previous = None
    for tx in _sealed_txs(chain):
        if tx.kind != TxKind.UNLOCK_VOTE:
            continue
        data = tx.data
        if data.get("outcome") != "unlocked" or (wanted and data.get("capability") != wanted):
            continue
        if not digests:
            digests.append(data["vault_policy"])
        if data.get("parent") != data["vault_policy"] or (previous is not None and data["vault_policy"] != previous):
            return LineageReport(False, tuple(digests), data.get("generation"))
        digests.append(data["ethics"])
        previous = data["ethics"]
    return LineageReport(True, tuple(digests))


# --- compromise probability ---------------------------------------------------

def _log_pmf(n, j, log_p, log_q):
    return math.log(math.comb(n, j)) + j * log_p + (n - j) * log_q


def hack_probability(n, k, p):
    """
    Probability that at least k of n custodians are compromised.

    Compromises are assumed independent, each with probability p, so this is
    P(X >= k) for X ~ Binomial(n, p). The smaller tail is summed in log space
    and the other obtained by complement.

    Args:
        n: Custodian count (>= 1)
        k: Unlock quorum, 1 <= k <= n
        p: Per-custodian compromise probability in [0, 1]

    Returns:
        Probability in [0, 1]
    """
    if isinstance(n, bool) or isinstance(k, bool) or int(n) != n or int(k) != k:
        raise DomainError("n and k must be integers")
    n, k = int(n), int(k)
    if n < 1 or not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if p == 0:
        return 0.0
    if p == 1:
        return 1.0

    log_p, log_q = math.log(p), math.log1p(-p)
    if k - 1 >= n * p:
        upper = logsumexp([_log_pmf(n, j, log_p, log_q) for j in range(k, n + 1)])
        return float(min(1.0, math.exp(upper)))
    lower = logsumexp([_log_pmf(n, j, log_p, log_q) for j in range(0, k)])
    return float(min(1.0, max(0.0, -math.expm1(lower))))


def sample_compromise(n, k, p, trials, rng):
    """
    Monte-Carlo estimate of hack_probability.

    Returns:
        (rate, standard error)
    """
    if trials < 1:
        raise DomainError("trials must be positive")
    hits = rng.binomial(n, p, size=trials) >= k
    rate = float(np.mean(hits))
    return rate, math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
