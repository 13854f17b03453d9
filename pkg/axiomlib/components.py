"""
Components Module for axiomlib

This module gives every algorithm, device, model and dataset a registry-assigned
unique id and wraps it in a Configuration Item (CI): the component's on-board
parameter set plus the fidelity tests that gate its activation.

A CI starts suppressed. It only becomes active through a ledger-logged
handshake in which every fidelity test passes, every clause of its contract
verifies and a conformity declaration is on file; otherwise it stays
suppressed. Active CIs advance through numbered checkpoints, and any
stakeholder with standing can shut one down remotely.

Key features:
- 16-byte ids: 8-byte registry counter followed by an 8-byte hash prefix
- Fail-closed handshake naming the first failing test or clause
- Checkpoints that halt (and log the halt) on a failed fidelity test
- Single-stakeholder shutdown; reinstatement needs every validator
- Built-in fidelity tests: config schema, version pin, ethics anchor
- Lifecycle replay from the audit trail

Manifest format:
    component=<hex id>
    class=<algorithm|hardware|model|dataset|other>
    param.<key>=<value>
    test.<n>=<test name>
    conformity=<true|false>

Example Usage:
    from axiomlib.components import ComponentRegistry, ComponentClass

    registry = ComponentRegistry(ledger, identities)
    cid = registry.register_component(ComponentClass.MODEL, votes=ledger.validators)
    ci = registry.configure(cid, {'version': '1.2'}, tests=[...], conformity=True)
    result = registry.handshake(ci, host_state={'versions': {'model': '1.2'}})
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    AnchorNotFoundError,
    BelowQuorumError,
    InactiveComponentError,
    ParseError,
    StageOrderError,
    UnauthorizedStakeholderError,
    UnregisteredComponentError,
)
from .ledger import TxKind, component_hex, digest, encode_payload
from .morality import EthicsStatus, verify_ethics_unchanged

logger = logging.getLogger(__name__)

ID_COUNTER_BYTES = 8
ID_HASH_BYTES = 8


class ComponentClass(Enum):
    ALGORITHM = "algorithm"
    HARDWARE = "hardware"
    MODEL = "model"
    DATASET = "dataset"
    OTHER = "other"


class CIState(Enum):
    SUPPRESSED = "suppressed"
    ACTIVE = "active"
    SHUTDOWN = "shutdown"


@dataclass(frozen=True)
class ComponentId:
    id: bytes
    component_class: ComponentClass

    @property
    def hex(self):
        return self.id.hex()

    @property
    def counter(self):
        return int.from_bytes(self.id[:ID_COUNTER_BYTES], "big")

    def __str__(self):
        return self.hex


@dataclass(frozen=True)
class FidelityTest:
    name: str
    check: object

    def __call__(self, host_state, params):
        return bool(self.check(host_state, params))


@dataclass
class ConfigurationItem:
    component: ComponentId
    config_params: dict = field(default_factory=dict)
    fidelity_tests: list = field(default_factory=list)
    contract_ref: object = None
    conformity_declared: bool = False
    checkpoints: list = field(default_factory=list)
    state: CIState = field(default=CIState.SUPPRESSED, init=False)
    stage: int = field(default=0, init=False)


@dataclass(frozen=True)
class HandshakeResult:
    active: bool
    reason: str = None

    def __bool__(self):
        return self.active


@dataclass(frozen=True)
class CheckpointResult:
    advanced: bool
    stage: int
    reason: str = None


def config_schema_check(schema):
    """Every key in schema is present in config_params with the given type."""
    def check(host_state, params):
        return all(key in params and isinstance(params[key], kind) for key, kind in schema.items())
    return FidelityTest("config-schema", check)


def version_pin_check(pins):
    """The host reports exactly the pinned version of each named part."""
    def check(host_state, params):
        versions = host_state.get("versions", {})
        return all(versions.get(name) == version for name, version in pins.items())
    return FidelityTest("version-pin", check)


def ethics_anchor_check(policy, chain):
    """The value system shipped with the component still matches its anchor."""
    def check(host_state, params):
        try:
            return verify_ethics_unchanged(policy, chain) is EthicsStatus.UNCHANGED
        except AnchorNotFoundError:
            return False
    return FidelityTest("ethics-anchor", check)


def _run_test(test, host_state, params):
    try:
        return test(host_state, params)
    except Exception as e:
        logger.warning("Fidelity test '%s' raised %s; treating as failed", test.name, e)
        return False


class ComponentRegistry:
    """
    Registry of component ids and their CIs.

    Args:
        ledger: Ledger every lifecycle event is written to
        identities: IdentityRegistry used to verify shutdown stakeholders
        enforce: False disables handshake and checkpoint tests (activation is
            then unconditional, as when no configuration-item regime exists)
    """

    def __init__(self, ledger, identities=None, enforce=True):
        self.ledger = ledger
        self.identities = identities
        self.enforce = enforce
        self._components = {hex_id: record.component for hex_id, record in replay_components(ledger).items()}
        self._counter = max((c.counter for c in self._components.values()), default=0)

    def is_registered(self, component_id):
        return component_hex(component_id) in self._components

    def lookup(self, component_id):
        try:
            return self._components[component_hex(component_id)]
        except KeyError:
            raise UnregisteredComponentError(f"component {component_hex(component_id)} is not registered") from None

    def component_ids(self):
        return set(self._components)

    def _event(self, ci, event, author=None, kind=TxKind.COMPONENT_EVENT, **details):
        payload = {"event": event, "component": ci.component.hex}
        payload.update(details)
        return self.ledger.record(author or self.ledger.operator, kind, payload)

    def register_component(self, component_class, votes, metadata=None):
        """
        Assign a fresh unique id by quorum.

        Args:
            component_class: ComponentClass
            votes: Ballot of validator ids
            metadata: Optional mapping folded into the id's hash prefix

        Returns:
            ComponentId
        """
        component_class = ComponentClass(component_class)
        counter = self._counter + 1
        prefix = digest(encode_payload({"class": component_class.value, "metadata": metadata or {},
                                        "counter": counter}))[:ID_HASH_BYTES]
        cid = ComponentId(counter.to_bytes(ID_COUNTER_BYTES, "big") + prefix, component_class)
        self.ledger.commit(self.ledger.operator, TxKind.COMPONENT_EVENT,
                           {"event": "register", "component": cid.hex, "class": component_class.value},
                           votes, what="component registration")
        self._counter = counter
        self._components[cid.hex] = cid
        logger.info("Registered %s component %s", component_class.value, cid.hex)
        return cid

    def configure(self, component_id, params=None, tests=(), contract_ref=None,
                  conformity=False, checkpoints=()):
        """Create the suppressed CI for a registered component."""
        cid = self.lookup(component_id)
        ci = ConfigurationItem(cid, dict(params or {}), list(tests), contract_ref,
                               conformity, list(checkpoints))
        self._event(ci, "configure", params=digest(encode_payload(ci.config_params)).hex(),
                    tests=[t.name for t in ci.fidelity_tests], conformity=conformity)
        return ci

    def declare_conformity(self, ci, declared=True, author=None):
        """Supplier's declaration of conformity, as a machine-checkable flag."""
        self.lookup(ci.component)
        ci.conformity_declared = declared
        self._event(ci, "conformity", author=author, declared=declared)

    def handshake(self, ci, host_state, world=None):
        """
        Try to move a suppressed CI to active.

        Args:
            ci: ConfigurationItem
            host_state: Mapping describing the host (passed to fidelity tests)
            world: World state handed to contract clauses

        Returns:
            HandshakeResult; denied CIs stay suppressed
        """
        self.lookup(ci.component)
        if ci.state is CIState.SHUTDOWN:
            self._event(ci, "handshake", outcome="denied", reason="shutdown")
            return HandshakeResult(False, "shutdown")
        if ci.state is CIState.ACTIVE:
            return HandshakeResult(True)

        reason = self._first_failure(ci, host_state, world) if self.enforce else None
        if reason is not None:
            self._event(ci, "handshake", outcome="denied", reason=reason)
            logger.info("Handshake denied for %s: %s", ci.component.hex, reason)
            return HandshakeResult(False, reason)

        ci.state = CIState.ACTIVE
        self._event(ci, "handshake", outcome="active")
        return HandshakeResult(True)

    def _first_failure(self, ci, host_state, world):
        for test in ci.fidelity_tests:
            if not _run_test(test, host_state, ci.config_params):
                return f"test:{test.name}"
        if ci.contract_ref is not None:
            unmet = ci.contract_ref.unmet_clauses(self.ledger, world if world is not None else {})
            if unmet:
                return f"clause:{unmet[0]}"
        if not ci.conformity_declared:
            return "conformity"
        return None

    def checkpoint_pass(self, ci, stage, host_state):
        """
        Advance an active CI to a later stage if that stage's test passes.

        Args:
            ci: Active ConfigurationItem
            stage: Target stage (1-based index into ci.checkpoints)
            host_state: Mapping passed to the stage test

        Returns:
            CheckpointResult; a halt leaves the stage unchanged
        """
        if ci.state is not CIState.ACTIVE:
            raise InactiveComponentError(f"component {ci.component.hex} is {ci.state.value}")
        if stage <= ci.stage:
            raise StageOrderError(f"stage {stage} does not follow stage {ci.stage}")
        if stage > len(ci.checkpoints):
            raise StageOrderError(f"no checkpoint defined for stage {stage}")

        test = ci.checkpoints[stage - 1]
        if self.enforce and not _run_test(test, host_state, ci.config_params):
            reason = f"test:{test.name}"
            self._event(ci, "halt", stage=ci.stage, attempted=stage, reason=reason)
            logger.info("Checkpoint halt for %s at stage %d: %s", ci.component.hex, ci.stage, reason)
            return CheckpointResult(False, ci.stage, reason)

        ci.stage = stage
        self._event(ci, "checkpoint", stage=stage)
        return CheckpointResult(True, stage)

    def has_standing(self, ci, subject):
        parties = getattr(ci.contract_ref, "parties", ()) or ()
        return subject in parties or subject in self.ledger.validators

    def remote_shutdown(self, ci, stakeholder, evidence, now):
        """
        Shut a CI down on violation evidence from a single stakeholder.

        Args:
            ci: ConfigurationItem in any state
            stakeholder: Credential of a contract party or validator
            evidence: Violation evidence, logged verbatim
            now: Current tick

        Returns:
            The CI's new state (always SHUTDOWN)
        """
        self.lookup(ci.component)
        subject = stakeholder.subject
        verified = self.identities is not None and self.identities.check(stakeholder, now).verified
        if not verified or not self.has_standing(ci, subject):
            raise UnauthorizedStakeholderError(f"'{subject}' has no standing to shut down {ci.component.hex}")

        repeat = ci.state is CIState.SHUTDOWN
        ci.state = CIState.SHUTDOWN
        self._event(ci, "shutdown", author=subject, kind=TxKind.SHUTDOWN,
                    stakeholder=subject, evidence=str(evidence), repeat=repeat)
        logger.info("Component %s shut down by %s", ci.component.hex, subject)
        return ci.state

    def reinstate(self, ci, votes):
        """Return a shut-down CI to suppressed; every validator must approve."""
        self.lookup(ci.component)
        ballot = self.ledger.tally(votes)
        if ballot < len(self.ledger.validators):
            raise BelowQuorumError(ballot, len(self.ledger.validators), "reinstatement")
        self.ledger.commit(self.ledger.operator, TxKind.COMPONENT_EVENT,
                           {"event": "reinstate", "component": ci.component.hex}, votes,
                           what="reinstatement")
        ci.state = CIState.SUPPRESSED
        ci.stage = 0
        return ci.state

    def history(self, ci):
        return self.ledger.query(component_id=ci.component.hex)


@dataclass(frozen=True)
class ComponentManifest:
    component: str
    component_class: ComponentClass
    params: dict
    tests: tuple
    conformity: bool


def parse_manifest(text, source=None):
    """
    Parse a CI manifest.

    Returns:
        ComponentManifest (tests in ascending test.<n> order)
    """
    fields = {}
    params = {}
    tests = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected key=value", line_no, 1, source)
        key, value = key.strip(), value.strip()
        if key.startswith("param."):
            params[key[len("param."):]] = value
        elif key.startswith("test."):
            try:
                tests[int(key[len("test."):])] = value
            except ValueError:
                raise ParseError(f"test index in '{key}' is not an integer", line_no, 1, source) from None
        elif key in ("component", "class", "conformity"):
            fields[key] = (value, line_no)
        else:
            raise ParseError(f"unknown manifest key '{key}'", line_no, 1, source)

    for required in ("component", "class"):
        if required not in fields:
            raise ParseError(f"manifest lacks '{required}'", None, None, source)
    component, line_no = fields["component"]
    try:
        bytes.fromhex(component)
    except ValueError:
        raise ParseError(f"component '{component}' is not hex", line_no, 1, source) from None
    try:
        component_class = ComponentClass(fields["class"][0])
    except ValueError:
        raise ParseError(f"unknown class '{fields['class'][0]}'", fields["class"][1], 1, source) from None
    conformity = fields.get("conformity", ("false", None))[0].lower()
    if conformity not in ("true", "false"):
        raise ParseError("conformity must be true or false", fields["conformity"][1], 1, source)
    return ComponentManifest(component.lower(), component_class, params,
                             tuple(tests[i] for i in sorted(tests)), conformity == "true")


@dataclass
class ComponentRecord:
    component: ComponentId
    state: CIState = CIState.SUPPRESSED
    stage: int = 0
    conformity: bool = False


def replay_components(chain):
    """
    Rebuild component lifecycle state from the audit trail.

    Args:
        chain: Ledger or sequence of Blocks

    Returns:
        Dictionary hex id -> ComponentRecord
    """
    records = {}
    blocks = chain.blocks if hasattr(chain, "blocks") else tuple(chain)
    for block in blocks:
        for tx in block.txs:
            if tx.kind not in (TxKind.COMPONENT_EVENT, TxKind.SHUTDOWN):
                continue
            data = tx.data
            event = data.get("event")
            hex_id = data.get("component")
            if event == "register":
                records[hex_id] = ComponentRecord(ComponentId(bytes.fromhex(hex_id), ComponentClass(data["class"])))
                continue
            record = records.get(hex_id)
            if record is None:
                continue
            if event == "configure":
                record.state, record.stage, record.conformity = CIState.SUPPRESSED, 0, bool(data.get("conformity"))
            elif event == "conformity":
                record.conformity = bool(data.get("declared"))
            elif event == "handshake" and data.get("outcome") == "active":
                record.state = CIState.ACTIVE
            elif event == "checkpoint":
                record.stage = data["stage"]
            elif event == "shutdown":
                record.state = CIState.SHUTDOWN
            elif event == "reinstate":
                record.state, record.stage = CIState.SUPPRESSED, 0
    return records
