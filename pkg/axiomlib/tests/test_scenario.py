import pytest

from axiomlib.errors import ParseError
from axiomlib.scenario import format_scenario, load_scenario, parse_scenario, scenario_dict
from axiomlib.simulation import ALL_AXIOMS, PATHWAYS, Disposition, Species

MINIMAL = """\
scenario:
  seed: 7
pathway:
  id: impersonation-sabotage
agents:
  - id: mallory
    disposition: malevolent
"""


def test_shipped_files_parse(scenario_dir):
    files = sorted(scenario_dir.glob("*.yaml"))
    assert len(files) >= len(PATHWAYS)
    covered = {load_scenario(path).pathway for path in files}
    assert covered == set(PATHWAYS)


def test_base_scenario(scenario_dir):
    spec = load_scenario(scenario_dir / "base.yaml")
    assert (spec.name, spec.seed, spec.pathway) == ("base", 1100, "malicious-narrow-AI")
    assert spec.axioms_enabled == ALL_AXIOMS
    prometheus = spec.agents[1]
    assert prometheus.species is Species.AGI
    assert (prometheus.generation, prometheus.capability) == (1, 4)
    assert spec.agents[2].disposition is Disposition.INCOMPETENT


def test_defaults_come_from_config(config):
    config['DEFAULT_TICKS'] = 5
    config['VAULT_CUSTODIANS'] = 3
    config['VAULT_QUORUM'] = 2
    spec = parse_scenario(MINIMAL, source="minimal.yaml", config=config)
    assert spec.name == "minimal"
    assert (spec.ticks, spec.vault_custodians, spec.vault_quorum) == (5, 3, 2)
    assert spec.axioms_enabled == ALL_AXIOMS
    assert spec.availability == 1.0


def test_axiom_lists_and_aliases():
    text = MINIMAL.replace("impersonation-sabotage", "world-domination") + "axioms:\n  enabled: [1, 7]\n"
    spec = parse_scenario(text)
    assert spec.pathway == "resource-grab"
    assert spec.axioms_enabled == frozenset({1, 7})
    assert parse_scenario(MINIMAL + "axioms:\n  enabled: none\n").axioms_enabled == frozenset()


def test_format_round_trip(scenario_dir):
    spec = load_scenario(scenario_dir / "impersonation-sabotage.yaml")
    again = parse_scenario(format_scenario(spec))
    assert again == spec
    assert scenario_dict(again)["agents"][2].get("id") is None


@pytest.mark.parametrize("text, line, column", [
    (MINIMAL + "  - id: eve\n    mood: grumpy\n", 9, 5),
    (MINIMAL.replace("  seed: 7\n", "  seed: 7\n  speed: 3\n"), 3, 3),
    (MINIMAL + "extras: {}\n", 8, 1),
    (MINIMAL.replace("seed: 7", "seed: seven"), 2, 9),
    (MINIMAL + "axioms:\n  enabled: [1, 12]\n", 9, 12),
    (MINIMAL.replace("malevolent", "grumpy"), 6, 5),
])
def test_errors_carry_location(text, line, column):
    with pytest.raises(ParseError) as excinfo:
        parse_scenario(text, source="bad.yaml")
    assert (excinfo.value.line, excinfo.value.column) == (line, column)
    assert str(excinfo.value).startswith(f"bad.yaml:{line}:{column}: ")


def test_seed_is_mandatory():
    with pytest.raises(ParseError, match="scenario.seed is mandatory"):
        parse_scenario(MINIMAL.replace("  seed: 7\n", "  ticks: 3\n"))


@pytest.mark.parametrize("text", [
    "",
    "scenario: [1, 2\n",
    "pathway:\n  id: resource-grab\nagents: []\n",
    MINIMAL.replace("id: impersonation-sabotage", "id: teleportation"),
    MINIMAL + "  - species: AGI\n",
])
def test_invalid_files(text):
    with pytest.raises(ParseError):
        parse_scenario(text)
