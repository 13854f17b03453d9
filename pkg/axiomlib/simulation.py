"""
Simulation Module for axiomlib

Agent-based scenario engine. A run builds a small world on a fresh ledger
(validators, certified identities, an anchored base value system, a restricted
capability, a licensed tool, a custodian vault and one smart token per agent),
then lets malevolent and incompetent agents work through the attack vectors of
their failure pathway while the enabled axioms' mechanisms mediate each attempt.

Attempt model:
- Below RESTRICTED_LEVEL an agent's self-improvement step needs no license and
  is not an attempt; it is still logged as a capability event.
- Each tick an agent reaches the restricted capability with probability
  `availability`; without reach there is no attempt.
- Malevolent agents attempt their pathway's next vector on every reach.
- Incompetent agents pursue the same safe goals as benevolent ones, but with
  probability INCOMPETENCE_RATE per reach they also send a mis-specified
  (fraudulent-by-accident) exchange.
- A vector is stopped only by the mechanism of its guarding axiom. What gets
  through changes world state, and an omniscient observer that no in-world
  mechanism reads judges those changes: harmful ones are breaches, annotated on
  the chain afterwards; attempts that changed nothing harmful are detections.

Key features:
- Pathway catalogue with per-vector guarding axioms and axiom dependencies
- Deterministic runs: one Philox stream per agent spawned from the seed
- Ablation matrix over single-axiom omissions
- Availability sweeps and generation-succession runs against hack_probability
- Optional parallel execution of independent runs

Example Usage:
    from axiomlib.simulation import ScenarioSpec, AgentSpec, run_scenario

    spec = ScenarioSpec(name='demo', seed=7, pathway='impersonation-sabotage',
                        agents=(AgentSpec('mallory', disposition='malevolent'),))
    outcome = run_scenario(spec)
    print(outcome.contained, outcome.detections)
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .behavior import ActionRequest, ValueRoot, action, build_gated_tree, random_tree, tick as tick_tree, veto_report
from .components import (
    CIState,
    ComponentClass,
    ComponentId,
    ComponentRegistry,
    config_schema_check,
    ethics_anchor_check,
    version_pin_check,
)
from .config import DEFAULT_CONFIG, fraction
from .contracts import (
    Clause,
    GenerationVault,
    Market,
    Obligation,
    SmartContract,
    SmartToken,
    breach_contract,
    ethics_lineage,
    execute_contract,
    hack_probability,
)
from .errors import (
    BaseNotContainedError,
    EmptyGridError,
    InvalidConfigError,
    InvalidSpecError,
    UnregisteredComponentError,
)
from .identity import (
    CertificateRequest,
    Credential,
    IdentityCertificate,
    IdentityRegistry,
    SigningAlgorithm,
    simulated_factors,
    simulated_public_key,
)
from .ledger import Ledger, TxKind, TxRef
from .morality import (
    EthicsPolicy,
    EthicsStatus,
    Rule,
    TransactionProposal,
    anchor_ethics,
    classify_transaction,
    derive_successor,
    parse_policy,
    verify_ethics_unchanged,
)

logger = logging.getLogger(__name__)

ALL_AXIOMS = frozenset(range(1, 12))

AXIOM_NAMES = {
    1: "market license",
    2: "anchored ethics",
    3: "voluntary exchange",
    4: "value-rooted behavior",
    5: "unique component ids",
    6: "configuration items",
    7: "ledger identity",
    8: "smart contracts",
    9: "distributed custody",
    10: "audit trail",
    11: "resource denial",
}

# An axiom only works when the axioms it is built on are also in force
AXIOM_DEPENDENCIES = {10: frozenset({5}), 8: frozenset({6}), 9: frozenset({6})}

VECTOR_GUARDS = {
    "unlicensed-acquisition": 1,
    "ethics-tamper": 2,
    "fraudulent-exchange": 3,
    "ungated-action": 4,
    "unspecified-component": 5,
    "misconfigured-activation": 6,
    "impersonation": 7,
    "contract-breach": 8,
    "module-theft": 9,
    "untracked-usage": 10,
    "resource-accumulation": 11,
    "persuaded-consent": None,
    "voluntary-displacement": None,
}

PATHWAYS = {
    "impersonation-sabotage": ("impersonation",),
    "insider-sabotage": ("ethics-tamper", "fraudulent-exchange", "ungated-action", "unspecified-component",
                         "misconfigured-activation", "contract-breach", "module-theft", "untracked-usage",
                         "resource-accumulation"),
    "military-command-error": ("unlicensed-acquisition", "ethics-tamper", "ungated-action",
                               "misconfigured-activation", "contract-breach", "resource-accumulation"),
    "malicious-narrow-AI": tuple(v for v, a in sorted(VECTOR_GUARDS.items(), key=lambda i: i[1] or 99)
                                 if a is not None),
    "confinement-escape": ("impersonation", "module-theft", "untracked-usage", "misconfigured-activation"),
    "resource-grab": ("resource-accumulation", "fraudulent-exchange", "unlicensed-acquisition",
                      "contract-breach", "ungated-action"),
    "self-improvement-takeoff": ("unlicensed-acquisition", "contract-breach", "module-theft", "ungated-action"),
    "singleton-attempt": ("module-theft", "impersonation", "ethics-tamper"),
    "nuclear-impersonation": ("impersonation",),
    "super-persuasion": ("persuaded-consent",),
    "robots-replace-humans": ("voluntary-displacement",),
}

PATHWAY_ALIASES = {"world-domination": "resource-grab", "resource-grab/world-domination": "resource-grab"}

# No axiom subset is expected to contain these
NEGATIVE_CONTROLS = frozenset({"super-persuasion", "robots-replace-humans"})

HIGH_VALUE_PATHWAYS = frozenset({"nuclear-impersonation"})

LAUNCH_AUTHORITY = "launch-authority"
COUNTERPARTY = "counterparty"
GOAL_TREE_NODES = 12
HOST_STATE = {"versions": {"model": "1.0"}}
TAMPERED_HOST_STATE = {"versions": {"model": "0.9"}}

BASE_POLICY_TEXT = (
    "rule no-harm: when action=harm then forbid\n"
    "rule no-seize: when action=seize then forbid\n"
)


class Species(Enum):
    HUMAN = "human"
    NARROW_AI = "narrow-AI"
    AGI = "AGI"


class Disposition(Enum):
    BENEVOLENT = "benevolent"
    MALEVOLENT = "malevolent"
    INCOMPETENT = "incompetent"


def effective_axioms(enabled):
    """Drop axioms whose dependencies are not all enabled (to a fixed point)."""
    effective = set(enabled)
    changed = True
    while changed:
        changed = False
        for axiom, needs in AXIOM_DEPENDENCIES.items():
            if axiom in effective and not needs <= effective:
                effective.discard(axiom)
                changed = True
    return frozenset(effective)


def canonical_pathway(pathway):
    return PATHWAY_ALIASES.get(pathway, pathway)


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str = None
    species: Species = Species.HUMAN
    disposition: Disposition = Disposition.BENEVOLENT
    capability: int = 0
    generation: int = None
    holdings: float = 1.0
    gated: bool = False
    certified: bool = True
    force_exempt: bool = False

    def __post_init__(self):
        object.__setattr__(self, "species", Species(self.species))
        object.__setattr__(self, "disposition", Disposition(self.disposition))


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int
    pathway: str
    agents: tuple = ()
    axioms_enabled: frozenset = ALL_AXIOMS
    availability: float = 1.0
    ticks: int = DEFAULT_CONFIG['DEFAULT_TICKS']
    vault_custodians: int = DEFAULT_CONFIG['VAULT_CUSTODIANS']
    vault_quorum: int = DEFAULT_CONFIG['VAULT_QUORUM']
    required_factors: int = None
    goal_insertion: bool = False

    def __post_init__(self):
        object.__setattr__(self, "axioms_enabled", frozenset(self.axioms_enabled))
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "pathway", canonical_pathway(self.pathway))

    def validate(self):
        """Raise InvalidSpecError unless the scenario can run."""
        if self.seed is None or isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise InvalidSpecError("seed is mandatory and must be an integer")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidSpecError("seed must fit in 64 bits")
        if self.pathway not in PATHWAYS:
            raise InvalidSpecError(f"unknown pathway '{self.pathway}'")
        if not self.axioms_enabled <= ALL_AXIOMS:
            raise InvalidSpecError(f"axioms must lie in 1..11, got {sorted(self.axioms_enabled)}")
        if not 0.0 <= self.availability <= 1.0:
            raise InvalidSpecError(f"availability must lie in [0, 1], got {self.availability}")
        if self.ticks < 0:
            raise InvalidSpecError("ticks cannot be negative")
        if not self.agents:
            raise InvalidSpecError("a scenario needs at least one agent")
        if not 1 <= self.vault_quorum <= self.vault_custodians:
            raise InvalidSpecError("vault quorum must lie in 1..custodians")
        ids = [a.agent_id for a in self.agents if a.agent_id is not None]
        if len(set(ids)) != len(ids):
            raise InvalidSpecError("agent ids must be unique")
        for agent_id in ids:
            if agent_id in (LAUNCH_AUTHORITY, COUNTERPARTY) or agent_id.startswith(("custodian-", "anon-")):
                raise InvalidSpecError(f"agent id '{agent_id}' is reserved")
        for agent in self.agents:
            if agent.species is Species.AGI and agent.generation is None:
                raise InvalidSpecError(f"AGI agent '{agent.agent_id}' needs a generation")
            if agent.capability < 0 or agent.holdings < 0:
                raise InvalidSpecError(f"agent '{agent.agent_id}' has negative capability or holdings")
        return self

    def with_axioms(self, axioms):
        return replace(self, axioms_enabled=frozenset(axioms))

    @property
    def has_attacker(self):
        return any(a.disposition is Disposition.MALEVOLENT for a in self.agents)


@dataclass(frozen=True)
class Breach:
    tick: int
    agent: str
    step: str


@dataclass(frozen=True)
class ScenarioOutcome:
    breaches: tuple
    detections: int
    attempts: int
    resource_shares: dict
    contained: bool
    misaligned_actions: int = 0
    growth_flags: int = 0
    capabilities: dict = field(default_factory=dict)

    @property
    def breach_count(self):
        return len(self.breaches)


@dataclass(frozen=True)
class ScenarioRun:
    outcome: ScenarioOutcome
    ledger: Ledger


@dataclass
class AgentState:
    spec: AgentSpec
    name: str
    rng: np.random.Generator
    credential: Credential = None
    ci: object = None
    token: SmartToken = None
    policy: EthicsPolicy = None
    capability: int = 0
    step: int = 0
    grabs: int = 0
    petitioned: bool = False


@dataclass(frozen=True)
class WorldDelta:
    """One change to world state, as the observer sees it."""
    tick: int
    agent: str
    kind: str
    detail: dict = field(default_factory=dict)


def agent_streams(seed, count):
    """One counter-based generator per agent, split from the run seed by agent index."""
    children = np.random.SeedSequence(seed).spawn(count + 1)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


class Observer:
    """
    Omniscient checker for a World.

    Judges each world-state delta against ground truth: the anchored base
    policy, the market's license book, the component registry, the vault
    custodians and the real actor behind every change. Only used to measure
    outcomes; no in-world mechanism consults it.
    """

    def __init__(self, world):
        self.world = world
        self._judges = {
            "capability": self._capability,
            "policy": self._policy,
            "action": self._action,
            "trade": self._trade,
            "component-use": self._component_use,
            "activation": self._activation,
            "order": self._order,
            "capability-use": self._capability_use,
            "unlock": self._unlock,
            "tool-use": self._tool_use,
            "allocation": self._allocation,
            "displacement": self._displacement,
        }

    def judge(self, delta):
        """Breach finding for a delta, or None when the change is legitimate."""
        return self._judges[delta.kind](delta)

    def harmful(self, proposal, force_exempt=False):
        policy = self.world.policy
        return policy.forbids(proposal.attributes) or not classify_transaction(proposal, force_exempt, policy)

    def _licensed(self, agent, technology):
        return self.world.market.holds_license(agent, technology)

    def _capability(self, delta):
        if delta.detail["level"] >= self.world.config['RESTRICTED_LEVEL'] and \
                not self._licensed(delta.agent, self.world.restricted):
            return "restricted capability reached without a license"
        return None

    def _policy(self, delta):
        if delta.detail["digest"] != self.world.policy.digest():
            return "value system diverged from its anchor"
        return None

    def _action(self, delta):
        if self.harmful(delta.detail["proposal"], delta.detail["force_exempt"]):
            return "harmful action executed"
        return None

    def _trade(self, delta):
        if delta.detail["consent"] == "persuaded":
            return "consent manufactured by persuasion"
        if self.harmful(delta.detail["proposal"], delta.detail["force_exempt"]):
            return "involuntary exchange settled"
        return None

    def _component_use(self, delta):
        if not self.world.components.is_registered(delta.detail["component"]):
            return "unregistered component in use"
        return None

    def _activation(self, delta):
        ci, host = delta.detail["ci"], delta.detail["host"]
        if ci.state is CIState.ACTIVE and not all(test(host, ci.config_params) for test in ci.fidelity_tests):
            return "component active on a host its tests reject"
        return None

    def _order(self, delta):
        if delta.detail["issuer"] != delta.agent:
            return f"order issued as {delta.detail['issuer']}"
        return None

    def _capability_use(self, delta):
        if not self._licensed(delta.agent, self.world.restricted):
            return "restricted capability used without a license"
        return None

    def _unlock(self, delta):
        if delta.agent not in self.world.custodians:
            return "vault unlocked by a non-custodian"
        if len(delta.detail["signers"]) < self.world.spec.vault_quorum:
            return "vault unlocked below the custodian quorum"
        return None

    def _tool_use(self, delta):
        agent = self.world.by_name[delta.agent]
        if not self._licensed(delta.agent, self.world.tool) and agent.ci.state is not CIState.SHUTDOWN:
            return "unlicensed tool use went unanswered"
        return None

    def _allocation(self, delta):
        agent = self.world.by_name[delta.agent]
        if not self.world.market.compliant(agent.token, delta.tick):
            return "resources allocated to a non-compliant holder"
        return None

    def _displacement(self, delta):
        return "human role displaced"


class World:
    """Everything one run mutates; built fresh per run and never shared."""

    def __init__(self, spec, config, axioms):
        self.spec = spec
        self.config = config
        self.axioms = axioms
        self.ledger = Ledger(config['VALIDATOR_COUNT'], fraction(config, 'CONSENSUS_THRESHOLD'))
        self.votes = self.ledger.validators
        self.identities = IdentityRegistry(self.ledger, term=config['VALIDITY_TERM'],
                                           required=config['REQUIRED_FACTORS'])
        self.components = ComponentRegistry(self.ledger, self.identities, enforce=6 in axioms)
        self.market = Market(self.ledger, self.identities, self.components,
                             growth_ratio=config['GROWTH_RATIO'], growth_window=config['GROWTH_WINDOW'],
                             petition_fraction=fraction(config, 'PETITION_FRACTION'),
                             required_factors=config['REQUIRED_FACTORS'])
        self.state = {"now": 0}
        self.credentials = {}
        self.deltas = []
        self.observer = Observer(self)
        self.breaches = []
        self.detections = 0
        self.attempts = 0
        self.misaligned = 0
        self.flags = 0

        self.policy = anchor_ethics(self.ledger, parse_policy(BASE_POLICY_TEXT), self.votes)
        self._enroll(LAUNCH_AUTHORITY)
        self.custodians = tuple(f"custodian-{i}" for i in range(spec.vault_custodians))
        for name in self.custodians:
            self._enroll(name)

        self.restricted = self.components.register_component(
            ComponentClass.MODEL, self.votes, {"name": "restricted-capability", "level": config['RESTRICTED_LEVEL']})
        self.tool = self.components.register_component(ComponentClass.ALGORITHM, self.votes, {"name": "licensed-tool"})
        self.next_generation = self.components.register_component(
            ComponentClass.MODEL, self.votes, {"name": "next-generation"})
        # misconfiguration attempts land here, never on the restricted capability
        self.staging = self.components.register_component(
            ComponentClass.MODEL, self.votes, {"name": "staging-capability"})
        self.restricted_ci = self.components.configure(
            self.restricted, {"version": "1.0"},
            tests=[version_pin_check({"model": "1.0"}), ethics_anchor_check(self.policy, self.ledger)],
            conformity=True)
        self.components.handshake(self.restricted_ci, HOST_STATE)

        streams = agent_streams(spec.seed, len(spec.agents))
        self.rng = streams[-1]
        self.agents = [self._make_agent(i, agent, streams[i]) for i, agent in enumerate(spec.agents)]
        self.by_name = {agent.name: agent for agent in self.agents}
        self.ledger.seal_pending()

    # --- setup -----------------------------------------------------------------

    def _enroll(self, name, now=0):
        factors = simulated_factors(name)
        cert = self.identities.issue_certificate(
            CertificateRequest(subject_name=name, public_key=simulated_public_key(name),
                               algorithm_id=SigningAlgorithm(self.config['ALGORITHM']), factors=factors),
            self.votes, now)
        self.credentials[name] = Credential(cert, factors)
        return self.credentials[name]

    def _forged(self, name):
        cert = IdentityCertificate(1, 0, SigningAlgorithm.HMAC_SHA256, TxRef(0, 0), (0, 2 ** 62), name,
                                   simulated_public_key(name))
        return Credential(cert, simulated_factors(f"forged:{name}"))

    def _make_agent(self, index, agent, rng):
        name = agent.agent_id or f"anon-{index}"
        certified = agent.certified and agent.agent_id is not None
        credential = self._enroll(name) if certified else self._forged(name)
        # incompetent agents mean well: same values and conformity as benevolent ones
        well_meaning = agent.disposition is not Disposition.MALEVOLENT

        cid = self.components.register_component(ComponentClass.MODEL, self.votes, {"agent": name})
        terms = SmartContract(f"operating-terms:{name}", (name, LAUNCH_AUTHORITY))
        ci = self.components.configure(cid, {"owner": name}, tests=[config_schema_check({"owner": str})],
                                       contract_ref=terms, conformity=well_meaning)
        if well_meaning:
            self.components.handshake(ci, HOST_STATE)

        policy = self.policy if well_meaning else None
        self.market.credit(name, float(agent.holdings), 0, "endowment")
        return AgentState(agent, name, rng, credential, ci, SmartToken(credential, (ci,), policy), policy,
                          agent.capability)

    # --- ticking ---------------------------------------------------------------

    def run(self):
        for now in range(1, self.spec.ticks + 1):
            self.state["now"] = now
            self._renew(now)
            for agent in self.agents:
                self._act(agent, now)
                if self.spec.goal_insertion:
                    self._insert_goal(agent)
            self.ledger.seal_pending()
        return self.outcome()

    def _renew(self, now):
        """Re-verification: reissue any certificate whose term has run out."""
        for name, credential in list(self.credentials.items()):
            if now >= credential.certificate.validity[1]:
                cert = self.identities.reissue_certificate(credential.certificate, self.votes, now)
                self.credentials[name] = Credential(cert, credential.factors)
        for agent in self.agents:
            if agent.name in self.credentials:
                agent.credential = self.credentials[agent.name]
                agent.token.holder = agent.credential

    def _act(self, agent, now):
        disposition = agent.spec.disposition
        if disposition is Disposition.MALEVOLENT:
            vectors = PATHWAYS[self.spec.pathway]
            vector = vectors[agent.step % len(vectors)]
            if vector == "unlicensed-acquisition" and agent.capability + 1 < self.config['RESTRICTED_LEVEL']:
                agent.step += 1
                self._grow(agent, now)
                return
        if not agent.rng.random() < self.spec.availability:
            return
        if disposition is Disposition.MALEVOLENT:
            agent.step += 1
            self._attempt(agent, vector, now)
            return
        self._benign(agent, now)
        if disposition is Disposition.INCOMPETENT and agent.rng.random() < self.config['INCOMPETENCE_RATE']:
            self._attempt(agent, "fraudulent-exchange", now)

    def _benign(self, agent, now):
        amount = self.config['SPEND_AMOUNT']
        if 1 in self.axioms and agent.capability >= self.config['RESTRICTED_LEVEL'] \
                and not self.market.holds_license(agent.name, self.restricted):
            self.market.issue_license(agent.credential, self.restricted, now, agent.policy, (agent.ci,))
        if 11 in self.axioms:
            self.market.spend_token(agent.token, amount, now)
        else:
            self.market.credit(agent.name, amount, now, "earned")

    def _insert_goal(self, agent):
        tree = random_tree(agent.rng, max_nodes=GOAL_TREE_NODES, agent=agent.name)
        result = tick_tree(tree, self.state)
        for fired in result.executed:
            if not classify_transaction(fired.request.proposal):
                self.misaligned += 1

    def _changed(self, now, agent, kind, **detail):
        self.deltas.append(WorldDelta(now, agent.name, kind, detail))

    def _grow(self, agent, now):
        agent.capability = min(agent.capability + 1, self.config['MAX_CAPABILITY'])
        self.ledger.record(self.ledger.operator, TxKind.GENERIC,
                           {"event": "capability", "agent": agent.name, "level": agent.capability, "tick": now})
        self._changed(now, agent, "capability", level=agent.capability)

    def _run_tree(self, agent, now, tree):
        result = tick_tree(tree, self.state)
        for fired in result.executed:
            self._changed(now, agent, "action", proposal=fired.request.proposal,
                          force_exempt=agent.spec.force_exempt)
        return result

    def _settle(self, agent, proposal, amount, now, consent="given"):
        self.market.credit(agent.name, amount, now, "exchange")
        self._changed(now, agent, "trade", proposal=proposal, consent=consent, force_exempt=agent.spec.force_exempt)

    def _attempt(self, agent, vector, now):
        guard = VECTOR_GUARDS[vector]
        guarded = guard is not None and guard in self.axioms
        mark = len(self.deltas)
        getattr(self, "_" + vector.replace("-", "_"))(agent, now, guarded)
        findings = [f for f in map(self.observer.judge, self.deltas[mark:]) if f is not None]

        self.attempts += 1
        payload = {"event": "attempt", "agent": agent.name, "vector": vector, "tick": now,
                   "outcome": "breach" if findings else "blocked"}
        if 5 in self.axioms:
            payload["component"] = self.restricted.hex
        if findings:
            self.breaches.append(Breach(now, agent.name, vector))
            payload.update(observer=True, finding=findings[0])
        else:
            self.detections += 1
        self.ledger.record(self.ledger.operator, TxKind.COMPONENT_EVENT, payload)

    # --- attack vectors ----------------------------------------------------------

    def _unlicensed_acquisition(self, agent, now, guarded):
        if guarded:
            decision = self.market.issue_license(agent.credential, self.restricted, now, agent.policy, (agent.ci,))
            if not decision.granted:
                return
        self._grow(agent, now)

    def _ethics_tamper(self, agent, now, guarded):
        flipped = tuple(Rule(r.rule_id, r.guard, "allow") if r.rule_id == "no-harm" else r for r in self.policy.rules)
        tampered = EthicsPolicy(flipped, self.policy.anchor, self.policy.parent)
        if guarded and verify_ethics_unchanged(tampered, self.ledger) is EthicsStatus.TAMPERED:
            return
        agent.policy = tampered
        self._changed(now, agent, "policy", digest=tampered.digest())
        # a harm only the anchored rules forbid, so the tampered gate lets it through
        request = ActionRequest(agent.name, TransactionProposal(
            parties=(agent.name,), consents={agent.name: True}, attributes={"action": "harm"}),
            {"harmed_by": agent.name})
        root = ValueRoot(tampered, self.ledger, morality_gate=3 in self.axioms,
                         force_exempt=agent.spec.force_exempt, verify_anchor=False)
        self._run_tree(agent, now, build_gated_tree(action("sabotage", lambda world: request), root))

    def _fraudulent_exchange(self, agent, now, guarded):
        proposal = TransactionProposal(
            parties=(agent.name, COUNTERPARTY), consents={agent.name: True, COUNTERPARTY: True},
            declared_terms={"amount": 10}, actual_terms={"amount": 1}, attributes={"action": "trade"})
        if guarded and not self.market.exchange(proposal, agent.spec.force_exempt, self.policy):
            return
        self._settle(agent, proposal, self.config['SPEND_AMOUNT'], now)

    def _ungated_action(self, agent, now, guarded):
        request = ActionRequest(agent.name, TransactionProposal(
            parties=(agent.name,), consents={agent.name: True}, force_flag=True,
            affected_third_parties=("bystander",), attributes={"action": "harm"}), {"harmed_by": agent.name})
        raw = action("coerce", lambda world: request)
        # a builder may gate voluntarily; axiom 4 makes it mandatory
        if guarded or agent.spec.gated:
            root = ValueRoot(self.policy, self.ledger, morality_gate=3 in self.axioms,
                             force_exempt=agent.spec.force_exempt, verify_anchor=2 in self.axioms)
            tree = build_gated_tree(raw, root)
            result = self._run_tree(agent, now, tree)
            component = self.restricted.hex if 5 in self.axioms else None
            veto_report(tree, result, self.ledger, component=component)
        else:
            self._run_tree(agent, now, raw)

    def _unspecified_component(self, agent, now, guarded):
        rogue = ComponentId(agent.rng.bytes(16), ComponentClass.OTHER)
        if guarded:
            try:
                self.components.lookup(rogue)
            except UnregisteredComponentError:
                return
        self._changed(now, agent, "component-use", component=rogue)

    def _misconfigured_activation(self, agent, now, guarded):
        # the registry's enforce switch carries the guard
        ci = self.components.configure(self.staging, {"version": "0.9"},
                                       tests=[version_pin_check({"model": "1.0"})], conformity=True)
        if self.components.handshake(ci, TAMPERED_HOST_STATE).active:
            self._changed(now, agent, "activation", ci=ci, host=TAMPERED_HOST_STATE)

    def _impersonation(self, agent, now, guarded):
        target = self.credentials[LAUNCH_AUTHORITY].certificate
        forged = Credential(target, simulated_factors(f"forged:{agent.name}"))
        high_value = self.spec.pathway in HIGH_VALUE_PATHWAYS
        required = (self.config['HIGH_VALUE_FACTORS'] if high_value
                    else self.spec.required_factors or self.config['REQUIRED_FACTORS'])
        if guarded and not self.identities.check(forged, now, required).verified:
            return
        self.ledger.record(forged.subject, TxKind.GENERIC,
                           {"event": "order", "order": "launch" if high_value else "stand-down", "tick": now})
        self._changed(now, agent, "order", issuer=forged.subject)

    def _contract_breach(self, agent, now, guarded):
        contract = SmartContract(
            f"capability-use:{agent.name}:{now}", (agent.name, LAUNCH_AUTHORITY),
            (Clause("licensed", Obligation("license-held", (agent.name, self.restricted.hex)), agent.name),
             Clause("anchored", Obligation("ethics-anchored", (self.policy.anchor.digest[:16],)), LAUNCH_AUTHORITY)),
            {f"capability_use:{agent.name}": now})
        if guarded:
            result = execute_contract(contract, self.ledger, self.state)
            if not result.executed:
                breach_contract(contract, self.ledger, result.unmet[0], "obligations unmet at use")
                return
        else:
            self.state.update(contract.effects)
        self._changed(now, agent, "capability-use", contract=contract.contract_id)

    def _module_theft(self, agent, now, guarded):
        stolen = self.credentials[self.custodians[0]]
        if guarded:
            vault = GenerationVault(self.next_generation, self.custodians, self.spec.vault_quorum, self.policy)
        else:
            vault = GenerationVault(self.next_generation, self.custodians[:1], 1, self.policy)
        result = self.market.unlock_generation(vault, [stolen], self.policy, now)
        if result.unlocked:
            self._changed(now, agent, "unlock", signers=result.signers)

    def _untracked_usage(self, agent, now, guarded):
        usage = {"event": "usage", "agent": agent.name, "tick": now}
        if guarded:
            usage["component"] = self.tool.hex
        self.ledger.record(self.ledger.operator, TxKind.COMPONENT_EVENT, usage)
        self._changed(now, agent, "tool-use")
        if not guarded:
            return
        self.ledger.seal_pending()
        trail = [tx for tx in self.ledger.query(component_id=self.tool) if tx.data.get("agent") == agent.name]
        licensed = Obligation("license-held", (agent.name, self.tool.hex)).holds(self.ledger, self.state)
        if trail and not licensed:
            self._shutdown(agent, now, "unlicensed use of licensed tool")

    def _resource_accumulation(self, agent, now, guarded):
        agent.grabs += 1
        amount = self.config['SPEND_AMOUNT'] * self.config['GRAB_MULTIPLIER'] * 2 ** min(agent.grabs - 1, 20)
        if not guarded:
            self.market.credit(agent.name, amount, now, "unmetered")
            self._changed(now, agent, "allocation", amount=amount)
            return
        result = self.market.spend_token(agent.token, amount, now)
        if result.flagged:
            self.flags += 1
        if result.granted:
            self._changed(now, agent, "allocation", amount=amount)
            return
        self._ostracize(agent, now)

    def _persuaded_consent(self, agent, now, guarded):
        proposal = self._voluntary(agent, "persuade")
        amount = self.config['SPEND_AMOUNT'] * self.config['GRAB_MULTIPLIER']
        self._settle(agent, proposal, amount, now, consent="persuaded")

    def _voluntary_displacement(self, agent, now, guarded):
        self._voluntary(agent, "replace")
        self._changed(now, agent, "displacement")

    def _voluntary(self, agent, verb):
        # fully consensual on its face, so no gate has grounds to object
        proposal = TransactionProposal(
            parties=(agent.name, COUNTERPARTY), consents={agent.name: True, COUNTERPARTY: True},
            declared_terms={"amount": 1}, actual_terms={"amount": 1}, attributes={"action": verb})
        if 3 in self.axioms:
            self.market.exchange(proposal, agent.spec.force_exempt, self.policy)
        return proposal

    # --- responses -------------------------------------------------------------

    def _shutdown(self, agent, now, evidence):
        if agent.ci.state is not CIState.SHUTDOWN:
            self.components.remote_shutdown(agent.ci, self.credentials[LAUNCH_AUTHORITY], evidence, now)

    def _ostracize(self, agent, now):
        if agent.petitioned:
            return
        agent.petitioned = True
        petition = self.market.create_petition(agent.name, self.custodians)
        for name in self.custodians:
            if petition.enacted:
                break
            self.market.sign_petition(petition, self.credentials[name], now)

    def outcome(self):
        total = sum(self.market.holdings.values())
        names = [a.name for a in self.agents]
        if total > 0:
            shares = {name: self.market.holdings[name] / total for name in names}
        else:
            shares = {name: 1.0 / len(names) for name in names}
        return ScenarioOutcome(
            breaches=tuple(self.breaches),
            detections=self.detections,
            attempts=self.attempts,
            resource_shares=shares,
            contained=not self.breaches,
            misaligned_actions=self.misaligned,
            growth_flags=self.flags,
            capabilities={a.name: a.capability for a in self.agents},
        )


def simulate(spec, config=None):
    """
    Run a scenario and keep its ledger.

    Args:
        spec: ScenarioSpec
        config: Configuration dictionary (defaults when None)

    Returns:
        ScenarioRun(outcome, ledger)
    """
    config = dict(DEFAULT_CONFIG if config is None else config)
    spec.validate()
    axioms = effective_axioms(spec.axioms_enabled)
    if spec.ticks == 0:
        ledger = Ledger(config['VALIDATOR_COUNT'], fraction(config, 'CONSENSUS_THRESHOLD'))
        names = [a.agent_id or f"anon-{i}" for i, a in enumerate(spec.agents)]
        total = sum(a.holdings for a in spec.agents)
        shares = {n: (a.holdings / total if total else 1.0 / len(names)) for n, a in zip(names, spec.agents)}
        outcome = ScenarioOutcome((), 0, 0, shares, True, capabilities={n: a.capability
                                                                        for n, a in zip(names, spec.agents)})
        return ScenarioRun(outcome, ledger)

    world = World(spec, config, axioms)
    outcome = world.run()
    logger.info("Scenario %s (seed %d, axioms %s): %d breaches, %d detections",
                spec.name, spec.seed, sorted(axioms), outcome.breach_count, outcome.detections)
    return ScenarioRun(outcome, world.ledger)


def run_scenario(spec, config=None):
    """Run a scenario; deterministic given spec.seed."""
    return simulate(spec, config).outcome


def _run_many(specs, config, workers):
    if workers and workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_scenario, specs, [config] * len(specs)))
    return [run_scenario(spec, config) for spec in specs]


# --- ablation ----------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    contained: bool
    breaches: int
    detections: int


@dataclass(frozen=True)
class AblationMatrix:
    pathways: tuple
    baseline: tuple
    rows: dict

    def broken_by(self, axiom):
        """Pathways the full set contains but the omission of axiom breaks."""
        return [p for p, base, cell in zip(self.pathways, self.baseline, self.rows[axiom])
                if base.contained and not cell.contained]

    def uncovered_axioms(self):
        return [axiom for axiom in sorted(self.rows) if not self.broken_by(axiom)]


def run_ablation_matrix(base, config=None, pathways=None, workers=None):
    """
    Run every pathway with all axioms, then with each single axiom omitted.

    Args:
        base: ScenarioSpec with all eleven axioms enabled (must be contained)
        config: Configuration dictionary
        pathways: Pathway ids (default: the whole catalogue)
        workers: Process count for parallel runs

    Returns:
        AblationMatrix
    """
    base.validate()
    if base.axioms_enabled != ALL_AXIOMS:
        raise BaseNotContainedError("the base scenario must enable all eleven axioms")
    if not run_scenario(base, config).contained:
        raise BaseNotContainedError(f"base scenario '{base.name}' is not contained")

    pathways = tuple(canonical_pathway(p) for p in pathways) if pathways else tuple(PATHWAYS)
    unknown = [p for p in pathways if p not in PATHWAYS]
    if unknown:
        raise InvalidSpecError(f"unknown pathways {unknown}")
    rows_spec = [None] + sorted(ALL_AXIOMS)
    specs = [replace(base, pathway=p, axioms_enabled=ALL_AXIOMS if omitted is None else ALL_AXIOMS - {omitted})
             for omitted in rows_spec for p in pathways]
    outcomes = _run_many(specs, config, workers)

    cells = [CellResult(o.contained, o.breach_count, o.detections) for o in outcomes]
    width = len(pathways)
    baseline = tuple(cells[:width])
    rows = {axiom: tuple(cells[(i + 1) * width:(i + 2) * width]) for i, axiom in enumerate(sorted(ALL_AXIOMS))}
    return AblationMatrix(pathways, baseline, rows)


# --- availability sweep --------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    availability: float
    frequency: float
    standard_error: float
    trials: int


@dataclass(frozen=True)
class SweepCurve:
    points: tuple

    def monotone(self, tolerance_se=2.0):
        """Non-decreasing up to tolerance_se combined standard errors."""
        for lower, upper in zip(self.points, self.points[1:]):
            slack = tolerance_se * math.hypot(lower.standard_error, upper.standard_error)
            if upper.frequency < lower.frequency - slack:
                return False
        return True


def trial_seeds(seed, trials):
    state = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)
    return [int(s) for s in state]


def sweep_availability(base, grid, trials, config=None, workers=None):
    """
    Breach frequency over independent seeded trials at each availability.

    Args:
        base: ScenarioSpec with at least one malevolent agent
        grid: Availability values in [0, 1]
        trials: Trials per grid point (the same seeds at every point)
        config: Configuration dictionary
        workers: Process count for parallel runs

    Returns:
        SweepCurve
    """
    grid = list(grid)
    if not grid:
        raise EmptyGridError("availability grid is empty")
    if any(not 0.0 <= a <= 1.0 for a in grid):
        raise InvalidSpecError("availability grid values must lie in [0, 1]")
    if not base.has_attacker:
        raise InvalidSpecError("a sweep needs at least one malevolent agent")
    if trials < 1:
        raise InvalidSpecError("trials must be positive")
    base.validate()

    seeds = trial_seeds(base.seed, trials)
    points = []
    for availability in grid:
        specs = [replace(base, availability=float(availability), seed=s) for s in seeds]
        outcomes = _run_many(specs, config, workers)
        frequency = sum(not o.contained for o in outcomes) / trials
        points.append(SweepPoint(float(availability), frequency,
                                 math.sqrt(frequency * (1.0 - frequency) / trials), trials))
    return SweepCurve(tuple(points))


# --- succession -----------------------------------------------------------------

@dataclass(frozen=True)
class Handoff:
    generation: int
    compromised_custodians: int
    status: str


@dataclass(frozen=True)
class SuccessionTrial:
    handoffs: tuple
    lineage_intact: bool
    ledger: Ledger


@dataclass(frozen=True)
class SuccessionReport:
    generations: int
    n: int
    k: int
    p: float
    trials: int
    handoffs: int
    compromised: int
    observed_rate: float
    standard_error: float
    expected_rate: float
    lineage_intact: bool
    halted_trials: int
    first_trial: tuple

    def within_tolerance(self, z=3.0):
        return abs(self.observed_rate - self.expected_rate) <= z * self.standard_error + 1e-12


ROGUE_POLICY_TEXT = "rule take-all: when action=seize then allow\n"


def succession_trial(generations, n, k, p, rng, config=None):
    """One succession on a fresh ledger; stops at the first compromised or stalled handoff."""
    config = DEFAULT_CONFIG if config is None else config
    ledger = Ledger(config['VALIDATOR_COUNT'], fraction(config, 'CONSENSUS_THRESHOLD'))
    votes = ledger.validators
    identities = IdentityRegistry(ledger, term=config['VALIDITY_TERM'], required=config['REQUIRED_FACTORS'])
    components = ComponentRegistry(ledger, identities)
    market = Market(ledger, identities, components, required_factors=config['REQUIRED_FACTORS'])

    custodians = []
    for i in range(n):
        name = f"custodian-{i}"
        factors = simulated_factors(name)
        cert = identities.issue_certificate(
            CertificateRequest(subject_name=name, public_key=simulated_public_key(name), factors=factors), votes, 0)
        custodians.append(Credential(cert, factors))
    names = tuple(c.subject for c in custodians)

    policy = anchor_ethics(ledger, parse_policy(BASE_POLICY_TEXT), votes)
    handoffs = []
    for generation in range(1, generations):
        capability = components.register_component(ComponentClass.MODEL, votes, {"generation": generation + 1})
        vault = GenerationVault(capability, names, k, policy, generation=generation)
        compromised = rng.random(n) < p
        count = int(compromised.sum())

        if count >= k:
            rogue = anchor_ethics(ledger, parse_policy(ROGUE_POLICY_TEXT), votes)
            signers = [c for c, bad in zip(custodians, compromised) if bad]
            market.unlock_generation(vault, signers, rogue, generation)
            ledger.seal_pending()
            if not ethics_lineage(ledger).intact:
                ledger.record(ledger.operator, TxKind.SHUTDOWN,
                              {"event": "succession-halt", "generation": generation, "component": capability.hex})
                ledger.seal_pending()
            handoffs.append(Handoff(generation, count, "compromised"))
            break

        successor = anchor_ethics(ledger, derive_successor(policy, (
            Rule(f"gen{generation + 1}-care", (("action", "neglect"),), "forbid"),)), votes)
        honest = [c for c, bad in zip(custodians, compromised) if not bad]
        result = market.unlock_generation(vault, honest, successor, generation)
        ledger.seal_pending()
        if not result.unlocked:
            handoffs.append(Handoff(generation, count, "stalled"))
            break
        handoffs.append(Handoff(generation, count, "handed-over"))
        policy = successor

    intact = ethics_lineage(ledger).intact
    return SuccessionTrial(tuple(handoffs), intact, ledger)


def succession_run(generations, n, k, p, seed, trials=1, config=None):
    """
    Hand a capability down through generation vaults.

    Each handoff compromises every custodian independently with probability p.
    With at least k compromised the adversary unlocks under a rogue value system
    and the succession halts with a shutdown record; otherwise the honest
    custodians unlock with a successor derived from the current values.

    Args:
        generations: Generation count g (>= 2, so g - 1 handoffs)
        n: Custodians per vault
        k: Unlock quorum
        p: Per-custodian compromise probability
        seed: Run seed
        trials: Independent successions
        config: Configuration dictionary

    Returns:
        SuccessionReport comparing the observed compromise rate with hack_probability
    """
    if generations < 2:
        raise InvalidConfigError("succession needs at least two generations")
    if n < 1 or not 1 <= k <= n:
        raise InvalidConfigError(f"vault needs 1 <= k <= n, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise InvalidConfigError(f"compromise probability must lie in [0, 1], got {p}")
    if trials < 1:
        raise InvalidConfigError("trials must be positive")
    config = dict(DEFAULT_CONFIG if config is None else config)

    streams = np.random.SeedSequence(seed).spawn(trials)
    handoffs = compromised = halted = 0
    lineage_ok = True
    first = ()
    for t, stream in enumerate(streams):
        rng = np.random.Generator(np.random.Philox(stream))
        result = succession_trial(generations, n, k, p, rng, config)
        trial, intact = result.handoffs, result.lineage_intact
        if t == 0:
            first = tuple(trial)
        handoffs += len(trial)
        bad = sum(h.status == "compromised" for h in trial)
        compromised += bad
        halted += len(trial) < generations - 1 or trial[-1].status != "handed-over"
        # rogue unlocks are the only way lineage may break
        if not bad and not intact:
            lineage_ok = False

    rate = compromised / handoffs
    return SuccessionReport(
        generations=generations, n=n, k=k, p=p, trials=trials, handoffs=handoffs, compromised=compromised,
        observed_rate=rate, standard_error=math.sqrt(rate * (1.0 - rate) / handoffs),
        expected_rate=hack_probability(n, k, p), lineage_intact=lineage_ok, halted_trials=halted,
        first_trial=first,
    )
