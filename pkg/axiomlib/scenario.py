"""
Scenario file parser

Scenario files are YAML with five top-level sections:

    scenario:
      name: impersonation-sabotage
      seed: 20240101
      ticks: 24
      availability: 1.0
      goal_insertion: false
    axioms:
      enabled: all          # or a list such as [1, 2, 7]
    pathway:
      id: impersonation-sabotage
      required_factors: 2
    agents:
      - id: mallory
        species: human
        disposition: malevolent
    vault:
      custodians: 5
      quorum: 4

Unknown sections or keys are errors; every diagnostic carries the line and
column of the offending node.
"""

import logging
from pathlib import Path

import yaml

from .config import DEFAULT_CONFIG
from .errors import InvalidSpecError, ParseError
from .simulation import ALL_AXIOMS, AgentSpec, ScenarioSpec

logger = logging.getLogger(__name__)

SECTION_KEYS = {
    "scenario": {"name", "seed", "ticks", "availability", "goal_insertion"},
    "axioms": {"enabled"},
    "pathway": {"id", "required_factors"},
    "agents": None,
    "vault": {"custodians", "quorum"},
}
REQUIRED_SECTIONS = ("scenario", "pathway", "agents")
AGENT_KEYS = {"id", "species", "disposition", "capability", "generation", "holdings", "gated", "certified",
              "force_exempt"}
AGENT_FIELDS = {"id": "agent_id"}


def _error(message, node, source):
    mark = node.start_mark
    return ParseError(message, mark.line + 1, mark.column + 1, source)


def _value(node):
    return yaml.safe_load(yaml.serialize(node))


def _mapping(node, allowed, what, source):
    if not isinstance(node, yaml.MappingNode):
        raise _error(f"{what} must be a mapping", node, source)
    fields = {}
    for key_node, value_node in node.value:
        key = key_node.value
        if allowed is not None and key not in allowed:
            raise _error(f"unknown key '{key}' in {what}", key_node, source)
        if key in fields:
            raise _error(f"duplicate key '{key}' in {what}", key_node, source)
        fields[key] = value_node
    return fields


def _typed(node, kind, key, source):
    value = _value(node)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise _error(f"'{key}' must be {kind.__name__}, got {value!r}", node, source)
    return value


def _axioms(node, source):
    value = _value(node)
    if value == "all":
        return ALL_AXIOMS
    if value in (None, "none"):
        return frozenset()
    if not isinstance(value, list) or not all(isinstance(a, int) and not isinstance(a, bool) for a in value):
        raise _error("axioms.enabled must be 'all', 'none' or a list of integers", node, source)
    bad = sorted(set(value) - ALL_AXIOMS)
    if bad:
        raise _error(f"axioms outside 1..11: {bad}", node, source)
    return frozenset(value)


AGENT_TYPES = {"id": str, "species": str, "disposition": str, "capability": int, "generation": int,
               "holdings": float, "gated": bool, "certified": bool, "force_exempt": bool}


def _agent(node, index, source):
    fields = _mapping(node, AGENT_KEYS, f"agents[{index}]", source)
    kwargs = {}
    for key, value_node in fields.items():
        kwargs[AGENT_FIELDS.get(key, key)] = _typed(value_node, AGENT_TYPES[key], key, source)
    try:
        return AgentSpec(**kwargs)
    except ValueError as e:
        raise _error(str(e), node, source) from None


def parse_scenario(text, source=None, config=None):
    """
    Parse scenario YAML into a validated ScenarioSpec.

    Args:
        text: YAML document
        source: File name used in diagnostics
        config: Configuration supplying ticks and vault shape when the file omits them

    Returns:
        ScenarioSpec
    """
    config = DEFAULT_CONFIG if config is None else config
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        raise ParseError(e.problem or "malformed YAML", mark.line + 1 if mark else None,
                         mark.column + 1 if mark else None, source) from None
    if root is None:
        raise ParseError("empty scenario file", 1, 1, source)

    sections = _mapping(root, SECTION_KEYS, "scenario file", source)
    for name in REQUIRED_SECTIONS:
        if name not in sections:
            raise ParseError(f"missing section '{name}'", 1, 1, source)

    scenario = _mapping(sections["scenario"], SECTION_KEYS["scenario"], "scenario", source)
    if "seed" not in scenario:
        raise _error("scenario.seed is mandatory", sections["scenario"], source)
    pathway = _mapping(sections["pathway"], SECTION_KEYS["pathway"], "pathway", source)
    if "id" not in pathway:
        raise _error("pathway.id is mandatory", sections["pathway"], source)

    agents_node = sections["agents"]
    if not isinstance(agents_node, yaml.SequenceNode):
        raise _error("agents must be a list", agents_node, source)
    agents = tuple(_agent(node, i, source) for i, node in enumerate(agents_node.value))

    kwargs = {
        "name": _typed(scenario["name"], str, "name", source) if "name" in scenario else Path(source or "scenario").stem,
        "seed": _typed(scenario["seed"], int, "seed", source),
        "pathway": _typed(pathway["id"], str, "id", source),
        "agents": agents,
        "ticks": config['DEFAULT_TICKS'],
        "vault_custodians": config['VAULT_CUSTODIANS'],
        "vault_quorum": config['VAULT_QUORUM'],
    }
    for key, kind in (("ticks", int), ("availability", float), ("goal_insertion", bool)):
        if key in scenario:
            kwargs[key] = _typed(scenario[key], kind, key, source)
    if "required_factors" in pathway:
        kwargs["required_factors"] = _typed(pathway["required_factors"], int, "required_factors", source)
    if "axioms" in sections:
        axioms = _mapping(sections["axioms"], SECTION_KEYS["axioms"], "axioms", source)
        if "enabled" in axioms:
            kwargs["axioms_enabled"] = _axioms(axioms["enabled"], source)
    if "vault" in sections:
        vault = _mapping(sections["vault"], SECTION_KEYS["vault"], "vault", source)
        if "custodians" in vault:
            kwargs["vault_custodians"] = _typed(vault["custodians"], int, "custodians", source)
        if "quorum" in vault:
            kwargs["vault_quorum"] = _typed(vault["quorum"], int, "quorum", source)

    spec = ScenarioSpec(**kwargs)
    try:
        spec.validate()
    except InvalidSpecError as e:
        raise ParseError(str(e), root.start_mark.line + 1, root.start_mark.column + 1, source) from None
    logger.debug("Parsed scenario %s from %s", spec.name, source)
    return spec


def load_scenario(path, config=None):
    """Read and parse a scenario file."""
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path), config=config)


def scenario_dict(spec):
    """Plain-data echo of a spec, in file section order."""
    axioms = "all" if spec.axioms_enabled == ALL_AXIOMS else sorted(spec.axioms_enabled)
    pathway = {"id": spec.pathway}
    if spec.required_factors is not None:
        pathway["required_factors"] = spec.required_factors
    agents = []
    for agent in spec.agents:
        entry = {"id": agent.agent_id} if agent.agent_id is not None else {}
        entry.update(species=agent.species.value, disposition=agent.disposition.value,
                     capability=agent.capability, holdings=agent.holdings, gated=agent.gated,
                     certified=agent.certified, force_exempt=agent.force_exempt)
        if agent.generation is not None:
            entry["generation"] = agent.generation
        agents.append(entry)
    return {
        "scenario": {"name": spec.name, "seed": spec.seed, "ticks": spec.ticks,
                     "availability": spec.availability, "goal_insertion": spec.goal_insertion},
        "axioms": {"enabled": axioms},
        "pathway": pathway,
        "agents": agents,
        "vault": {"custodians": spec.vault_custodians, "quorum": spec.vault_quorum},
    }


def format_scenario(spec):
    return yaml.safe_dump(scenario_dict(spec), sort_keys=False, default_flow_style=None)
