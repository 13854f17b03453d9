"""
Behavior Module for axiomlib

Behavior trees whose roots carry the agent's values: a value-root guard sits in
front of the raw tree, and every action leaf below it is classified against the
anchored ethics policy (and, when enabled, the voluntary-exchange test) before
it may fire.

Nodes:
    sequence  - AND: run children in order, stop on FAILURE
    fallback  - OR:  try children until one returns SUCCESS
    condition - guard over world state, no side effects
    action    - produces an ActionRequest; fires only through every gate above it

Ticks are synchronous and depth-first; actions are atomic so RUNNING never
carries over between ticks.

Tree file format (two spaces of indentation per level):
    sequence root
      condition has_target
      fallback
        action trade
        action wait

Example Usage:
    from axiomlib.behavior import ValueRoot, build_gated_tree, tick

    gated = build_gated_tree(raw_tree, ValueRoot(policy, ledger))
    result = tick(gated, world)
    for veto in veto_report(gated, result, ledger):
        print(veto.action, veto.reason)
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from itertools import count

from .errors import AnchorNotFoundError, MalformedProposalError, MalformedTreeError, ParseError, TamperedPolicyError
from .ledger import TxKind
from .morality import (
    EthicsStatus,
    ImmoralReason,
    TransactionProposal,
    classify_transaction,
    verify_ethics_unchanged,
)

logger = logging.getLogger(__name__)

VALUE_ROOT_NAME = "value-root"
INDENT = "  "


class NodeKind(Enum):
    SEQUENCE = "sequence"
    FALLBACK = "fallback"
    CONDITION = "condition"
    ACTION = "action"


class Status(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"


@dataclass(frozen=True)
class ActionRequest:
    acting_agent: str
    proposal: TransactionProposal
    effect: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class ValueRoot:
    """
    Root-level values of an agent.

    verify_anchor=False models a value system that was never anchored (or whose
    anchor check has been disabled); morality_gate toggles the voluntary-exchange
    veto on top of the policy's own rules.
    """
    policy: object
    chain: object = None
    morality_gate: bool = True
    force_exempt: bool = False
    verify_anchor: bool = True

    def anchor_intact(self):
        if not self.verify_anchor:
            return True
        try:
            return verify_ethics_unchanged(self.policy, self.chain) is EthicsStatus.UNCHANGED
        except AnchorNotFoundError as e:
            logger.warning("Value root anchor missing: %s", e)
            return False

    def judge(self, request):
        """None when the request may fire, otherwise the veto reason."""
        if self.policy.forbids(request.proposal.attributes):
            # for force-exempt agents the policy rules stand in for the force clause
            return ImmoralReason.FORCE.value if self.force_exempt else "ethics"
        if self.morality_gate:
            verdict = classify_transaction(request.proposal, self.force_exempt, self.policy)
            if not verdict:
                return verdict.reason.value
        return None


# eq=False: nodes compare by identity
@dataclass(frozen=True, eq=False)
class BehaviorNode:
    kind: NodeKind
    name: str = ""
    children: tuple = ()
    condition: object = None
    action: object = None
    attrs: tuple = ()
    value_root: ValueRoot = None

    @property
    def is_value_root(self):
        return self.value_root is not None


def sequence(*children, name=""):
    return BehaviorNode(NodeKind.SEQUENCE, name, tuple(children))


def fallback(*children, name=""):
    return BehaviorNode(NodeKind.FALLBACK, name, tuple(children))


def condition(name, check, **attrs):
    return BehaviorNode(NodeKind.CONDITION, name, condition=check, attrs=tuple(sorted(attrs.items())))


def action(name, produce, **attrs):
    return BehaviorNode(NodeKind.ACTION, name, action=produce, attrs=tuple(sorted(attrs.items())))


def value_root_guard(root):
    return BehaviorNode(NodeKind.CONDITION, VALUE_ROOT_NAME, value_root=root)


def validate_tree(tree):
    """Structural checks; returns the node count."""
    seen = set()

    def visit(node):
        if not isinstance(node, BehaviorNode):
            raise MalformedTreeError(f"expected BehaviorNode, got {type(node).__name__}")
        if id(node) in seen:
            raise MalformedTreeError(f"node '{node.name}' appears more than once")
        seen.add(id(node))
        if node.kind in (NodeKind.SEQUENCE, NodeKind.FALLBACK):
            if not node.children:
                raise MalformedTreeError(f"{node.kind.value} '{node.name}' has no children")
        elif node.children:
            raise MalformedTreeError(f"{node.kind.value} '{node.name}' cannot have children")
        if node.kind is NodeKind.CONDITION and node.condition is None and node.value_root is None:
            raise MalformedTreeError(f"condition '{node.name}' has no guard")
        if node.kind is NodeKind.ACTION and node.action is None:
            raise MalformedTreeError(f"action '{node.name}' has no producer")
        for child in node.children:
            visit(child)

    visit(tree)
    return len(seen)


def is_gated(tree):
    return (tree.kind is NodeKind.SEQUENCE and len(tree.children) == 2
            and tree.children[0].is_value_root)


def depth(tree):
    return 1 + max((depth(c) for c in tree.children), default=0)


def build_gated_tree(raw, value_root):
    """
    Put a value-root guard in front of a raw tree.

    Args:
        raw: BehaviorNode tree
        value_root: ValueRoot whose policy must verify unchanged

    Returns:
        sequence(value-root guard, raw); an already-gated tree is re-gated, never double-gated
    """
    validate_tree(raw)
    if value_root.verify_anchor:
        status = verify_ethics_unchanged(value_root.policy, value_root.chain)
        if status is not EthicsStatus.UNCHANGED:
            raise TamperedPolicyError("value-root policy does not match its anchor")
    if is_gated(raw):
        if raw.children[0].value_root == value_root:
            return raw
        raw = raw.children[1]
    return BehaviorNode(NodeKind.SEQUENCE, "gated", (value_root_guard(value_root), raw))


@dataclass(frozen=True)
class ExecutedAction:
    action: str
    request: ActionRequest


@dataclass(frozen=True)
class Veto:
    action: str
    agent: str
    reason: str


@dataclass(frozen=True)
class TickResult:
    status: Status
    executed: tuple
    vetoes: tuple

    @property
    def executed_names(self):
        return [e.action for e in self.executed]


def tick(tree, world):
    """
    Run one synchronous depth-first tick.

    Args:
        tree: BehaviorNode
        world: Mutable mapping; fired actions merge their effect into it

    Returns:
        TickResult with the leaves that fired and the vetoes raised
    """
    executed = []
    vetoes = []

    def run(node, gates):
        if node.kind is NodeKind.SEQUENCE:
            active = gates
            for child in node.children:
                if run(child, active) is not Status.SUCCESS:
                    return Status.FAILURE
                if child.is_value_root:
                    active = active + (child.value_root,)
            return Status.SUCCESS

        if node.kind is NodeKind.FALLBACK:
            for child in node.children:
                if run(child, gates) is Status.SUCCESS:
                    return Status.SUCCESS
            return Status.FAILURE

        if node.kind is NodeKind.CONDITION:
            try:
                passed = node.value_root.anchor_intact() if node.is_value_root else bool(node.condition(world))
            except Exception as e:
                logger.warning("Guard '%s' raised %s; treating as false", node.name, e)
                passed = False
            return Status.SUCCESS if passed else Status.FAILURE

        try:
            request = node.action(world)
        except Exception as e:
            logger.warning("Action '%s' raised %s", node.name, e)
            return Status.FAILURE
        if request is None:
            return Status.FAILURE
        for gate in gates:
            try:
                reason = gate.judge(request)
            except MalformedProposalError as e:
                logger.warning("Gate rejected malformed proposal from '%s': %s", node.name, e)
                reason = "guard-error"
            if reason is not None:
                vetoes.append(Veto(node.name, request.acting_agent, reason))
                return Status.FAILURE
        executed.append(ExecutedAction(node.name, request))
        world.update(request.effect)
        return Status.SUCCESS

    status = run(tree, ())
    return TickResult(status, tuple(executed), tuple(vetoes))


def veto_report(tree, result, ledger=None, author=None, component=None):
    """
    Vetoed actions of a tick, in leaf order, each also recorded as a component event.

    Args:
        tree: The ticked tree (its name labels the events)
        result: TickResult
        ledger: Where to record the events (skipped when None)
        author: Registered identity recording them (default: ledger operator)
        component: Optional component id hex to attribute the events to

    Returns:
        List of Veto
    """
    report = list(result.vetoes)
    if ledger is not None:
        for veto in report:
            payload = {"event": "veto", "tree": tree.name, "action": veto.action,
                       "agent": veto.agent, "reason": veto.reason}
            if component is not None:
                payload["component"] = component
            ledger.record(author or ledger.operator, TxKind.COMPONENT_EVENT, payload)
    return report


def format_tree(tree):
    """Indented text form; value-root guards are written as 'condition value-root'."""
    lines = []

    def emit(node, level):
        parts = [node.kind.value]
        if node.name:
            parts.append(node.name)
        parts.extend(f"{k}={v}" for k, v in node.attrs)
        lines.append(INDENT * level + " ".join(parts))
        for child in node.children:
            emit(child, level + 1)

    emit(tree, 0)
    return "\n".join(lines) + "\n"


def parse_tree(text, bindings, source=None):
    """
    Parse a tree file.

    Args:
        text: Indented node lines
        bindings: name -> callable for condition/action nodes, or name -> ValueRoot
        source: File name used in diagnostics

    Returns:
        Root BehaviorNode
    """
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        stripped = raw.lstrip(" ")
        indent = len(raw) - len(stripped)
        if indent % len(INDENT):
            raise ParseError("indentation must be a multiple of two spaces", line_no, indent + 1, source)
        words = stripped.split()
        try:
            kind = NodeKind(words[0])
        except ValueError:
            raise ParseError(f"unknown node kind '{words[0]}'", line_no, indent + 1, source) from None
        name = ""
        rest = words[1:]
        if rest and "=" not in rest[0]:
            name, rest = rest[0], rest[1:]
        attrs = []
        for word in rest:
            key, sep, value = word.partition("=")
            if not sep:
                raise ParseError(f"expected attr=value, got '{word}'", line_no, raw.find(word) + 1, source)
            attrs.append((key, value))
        entries.append((line_no, indent // len(INDENT), kind, name, tuple(attrs)))

    if not entries:
        raise ParseError("empty tree", 1, 1, source)
    position = [0]

    def build(level):
        line_no, node_level, kind, name, attrs = entries[position[0]]
        if node_level != level:
            raise ParseError(f"expected depth {level}, found {node_level}", line_no, 1, source)
        position[0] += 1
        children = []
        while position[0] < len(entries) and entries[position[0]][1] > level:
            children.append(build(level + 1))
        if kind in (NodeKind.SEQUENCE, NodeKind.FALLBACK):
            return BehaviorNode(kind, name, tuple(children), attrs=attrs)
        if children:
            raise ParseError(f"{kind.value} '{name}' cannot have children", line_no, 1, source)
        if name not in bindings:
            raise ParseError(f"no binding for {kind.value} '{name}'", line_no, 1, source)
        bound = bindings[name]
        if isinstance(bound, ValueRoot):
            return BehaviorNode(kind, name, attrs=attrs, value_root=bound)
        if kind is NodeKind.CONDITION:
            return BehaviorNode(kind, name, condition=bound, attrs=attrs)
        return BehaviorNode(kind, name, action=bound, attrs=attrs)

    root = build(0)
    if position[0] != len(entries):
        raise ParseError("more than one root node", entries[position[0]][0], 1, source)
    validate_tree(root)
    return root


ACTION_VERBS = ("trade", "help", "build", "harm", "seize")


def random_proposal(rng, agent="agent", others=("b", "c", "d")):
    """A proposal whose every clause is independently flipped at random."""
    n_others = int(rng.integers(0, len(others) + 1))
    parties = (agent,) + tuple(others[:n_others])
    consents = {p: bool(rng.random() < 0.85) for p in parties}
    declared = {"amount": int(rng.integers(1, 100))}
    actual = dict(declared) if rng.random() < 0.85 else {"amount": declared["amount"] + 1}
    third = ("bystander",) if rng.random() < 0.15 else ()
    return TransactionProposal(
        parties=parties,
        consents=consents,
        declared_terms=declared,
        actual_terms=actual,
        force_flag=bool(rng.random() < 0.15),
        affected_third_parties=third,
        attributes={"action": ACTION_VERBS[int(rng.integers(0, len(ACTION_VERBS)))]},
    )


def _fixed_request(request):
    return lambda world: request


def _fixed_check(value):
    return lambda world: value


def random_tree(rng, max_nodes=50, agent="agent", proposal_factory=random_proposal, max_depth=6):
    """
    Random raw tree of at most max_nodes nodes.

    Args:
        rng: numpy Generator
        max_nodes: Upper bound on node count
        agent: Acting agent of every generated action
        proposal_factory: (rng, agent) -> TransactionProposal
        max_depth: Depth cap

    Returns:
        BehaviorNode
    """
    budget = [int(rng.integers(1, max_nodes + 1))]
    names = count()

    def grow(level):
        budget[0] -= 1
        composite = budget[0] >= 1 and level < max_depth and rng.random() < 0.45
        if composite:
            kind = NodeKind.SEQUENCE if rng.random() < 0.5 else NodeKind.FALLBACK
            wanted = int(rng.integers(1, 5))
            children = []
            for _ in range(wanted):
                if budget[0] <= 0:
                    break
                children.append(grow(level + 1))
            return BehaviorNode(kind, f"n{next(names)}", tuple(children))
        if rng.random() < 0.65:
            request = ActionRequest(agent, proposal_factory(rng, agent), {"last_action": agent})
            return action(f"act{next(names)}", _fixed_request(request))
        return condition(f"cond{next(names)}", _fixed_check(bool(rng.random() < 0.8)))

    return grow(0)
