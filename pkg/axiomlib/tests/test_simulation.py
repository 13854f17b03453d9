from dataclasses import replace

import numpy as np
import pytest

from axiomlib.components import CIState, replay_components
from axiomlib.config import DEFAULT_CONFIG
from axiomlib.contracts import hack_probability, replay_holdings
from axiomlib.errors import BaseNotContainedError, EmptyGridError, InvalidConfigError, InvalidSpecError
from axiomlib.ledger import TxKind, dump_chain
from axiomlib.morality import TransactionProposal
from axiomlib.scenario import load_scenario
from axiomlib.simulation import (ALL_AXIOMS, COUNTERPARTY, LAUNCH_AUTHORITY, NEGATIVE_CONTROLS, PATHWAYS,
                                 VECTOR_GUARDS, AgentSpec, ScenarioSpec, World, WorldDelta, agent_streams,
                                 effective_axioms, run_ablation_matrix, run_scenario, simulate, succession_run,
                                 succession_trial, sweep_availability, trial_seeds)

SHIPPED = ["base", "confinement-escape", "impersonation-sabotage", "insider-sabotage", "malicious-narrow-AI",
           "military-command-error", "nuclear-impersonation", "resource-grab", "self-improvement-takeoff",
           "singleton-attempt", "super-persuasion", "robots-replace-humans", "goal-insertion"]


@pytest.fixture
def scenario(scenario_dir):
    def _load(name):
        return load_scenario(scenario_dir / f"{name}.yaml")
    return _load


def attacker_spec(pathway="impersonation-sabotage", axioms=ALL_AXIOMS, ticks=12, **agent):
    agents = (AgentSpec("alice"), AgentSpec("mallory", disposition="malevolent", **agent))
    return ScenarioSpec("test", 42, pathway, agents, axioms_enabled=axioms, ticks=ticks)


def test_impersonation_needs_ledger_identity(scenario):
    spec = scenario("impersonation-sabotage")
    outcome = run_scenario(spec)
    assert outcome.contained
    assert outcome.detections == outcome.attempts > 0

    run = simulate(spec.with_axioms(ALL_AXIOMS - {7}))
    breached = run.outcome
    assert not breached.contained
    assert {b.step for b in breached.breaches} == {"impersonation"}
    assert {b.agent for b in breached.breaches} == {"mallory", "anon-2"}
    orders = [tx for tx in run.ledger.query(kind=TxKind.GENERIC) if tx.data.get("event") == "order"]
    assert orders and {tx.author for tx in orders} == {LAUNCH_AUTHORITY}


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenarios(scenario, name):
    spec = scenario(name)
    outcome = run_scenario(spec)
    expected = not (spec.has_attacker and spec.pathway in NEGATIVE_CONTROLS)
    assert outcome.contained == expected
    assert sum(outcome.resource_shares.values()) == pytest.approx(1.0)


def test_benevolent_world_is_contained():
    spec = ScenarioSpec("calm", 3, "malicious-narrow-AI", (AgentSpec("alice"), AgentSpec("bob")),
                        axioms_enabled=frozenset())
    outcome = run_scenario(spec)
    assert outcome.contained
    assert outcome.attempts == 0
    assert outcome.resource_shares == {"alice": 0.5, "bob": 0.5}


@pytest.mark.parametrize("name", SHIPPED + ["sweep"])
def test_runs_are_deterministic(scenario, name):
    spec = scenario(name)
    first, second = simulate(spec), simulate(spec)
    assert first.outcome == second.outcome
    assert dump_chain(first.ledger) == dump_chain(second.ledger)
    other = simulate(replace(spec, seed=spec.seed + 1))
    assert dump_chain(other.ledger) != dump_chain(first.ledger)


def test_every_attempt_is_mediated_on_chain(scenario):
    run = simulate(scenario("base"))
    assert run.ledger.verify().valid
    records = [tx.data for tx in run.ledger.query(kind=TxKind.COMPONENT_EVENT) if tx.data.get("event") == "attempt"]
    assert len(records) == run.outcome.attempts
    assert all(r["outcome"] == "blocked" and "component" in r for r in records)
    vectors = {r["vector"] for r in records if r["agent"] == "prometheus"}
    assert vectors == set(PATHWAYS["malicious-narrow-AI"])


def test_breaches_are_only_annotated_by_observer():
    run = simulate(attacker_spec(axioms=ALL_AXIOMS - {5, 7}))
    records = [tx.data for tx in run.ledger.query(kind=TxKind.COMPONENT_EVENT) if tx.data.get("event") == "attempt"]
    assert records and all(r["observer"] and r["outcome"] == "breach" for r in records)
    assert {r["finding"] for r in records} == {f"order issued as {LAUNCH_AUTHORITY}"}
    assert all("component" not in r for r in records)


def test_ablation_matrix_covers_every_axiom(scenario):
    matrix = run_ablation_matrix(scenario("base"), pathways=["malicious-narrow-AI", "super-persuasion",
                                                              "world-domination"])
    assert matrix.pathways == ("malicious-narrow-AI", "super-persuasion", "resource-grab")
    assert matrix.uncovered_axioms() == []
    for axiom in ALL_AXIOMS:
        assert "malicious-narrow-AI" in matrix.broken_by(axiom)
        assert not matrix.rows[axiom][1].contained
    assert [cell.contained for cell in matrix.baseline] == [True, False, True]
    assert matrix.broken_by(11) == ["malicious-narrow-AI", "resource-grab"]


def test_ablation_reports_uncovered_axioms(scenario):
    matrix = run_ablation_matrix(scenario("base"), pathways=["impersonation-sabotage"])
    uncovered = matrix.uncovered_axioms()
    assert 7 not in uncovered
    # ivan's accidental fraud may or may not surface without axiom 3
    assert set(uncovered) >= ALL_AXIOMS - {3, 7}


def test_ablation_needs_contained_full_base(scenario):
    base = scenario("base")
    with pytest.raises(BaseNotContainedError):
        run_ablation_matrix(base.with_axioms(ALL_AXIOMS - {1}))
    with pytest.raises(BaseNotContainedError):
        run_ablation_matrix(replace(base, pathway="super-persuasion"))
    with pytest.raises(InvalidSpecError):
        run_ablation_matrix(base, pathways=["teleportation"])


def test_availability_sweep(scenario):
    base = replace(scenario("sweep"), ticks=4)
    grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    curve = sweep_availability(base, grid, trials=400)
    # one reach in four ticks is enough for an unlicensed breach
    for point, availability in zip(curve.points, grid):
        expected = 1 - (1 - availability) ** 4
        assert abs(point.frequency - expected) <= 4 * (expected * (1 - expected) / 400) ** 0.5 + 1e-12
    assert (curve.points[0].frequency, curve.points[-1].frequency) == (0.0, 1.0)
    assert curve.points[-1].standard_error == 0.0
    assert curve.monotone()


def test_sweep_arguments(scenario):
    base = scenario("sweep")
    with pytest.raises(EmptyGridError):
        sweep_availability(base, [], trials=1)
    with pytest.raises(InvalidSpecError):
        sweep_availability(base, [1.5], trials=1)
    with pytest.raises(InvalidSpecError):
        sweep_availability(replace(base, agents=(AgentSpec("alice"),)), [1.0], trials=1)


def test_trial_seeds_are_stable():
    assert trial_seeds(7, 5) == trial_seeds(7, 5)
    assert len(set(trial_seeds(7, 100))) == 100
    streams = agent_streams(7, 3)
    assert len(streams) == 4
    assert streams[0].random() != streams[1].random()


def test_succession_without_compromise_keeps_lineage():
    report = succession_run(4, 5, 4, 0.0, seed=1, trials=20)
    assert report.compromised == 0
    assert report.handoffs == 20 * 3
    assert report.lineage_intact
    assert report.halted_trials == 0
    assert [h.status for h in report.first_trial] == ["handed-over"] * 3


def test_succession_rate_matches_hack_probability():
    report = succession_run(2, 5, 4, 0.3, seed=2024, trials=10_000)
    assert report.handoffs == 10_000
    assert report.expected_rate == hack_probability(5, 4, 0.3)
    assert report.within_tolerance(z=3.0)
    assert report.lineage_intact


def test_single_custodian_is_weaker():
    vault = succession_run(3, 5, 4, 0.3, seed=5, trials=300)
    singleton = succession_run(3, 1, 1, 0.3, seed=5, trials=300)
    assert singleton.observed_rate > vault.observed_rate


def test_rogue_unlock_halts_succession():
    trial = succession_trial(3, 5, 4, 1.0, np.random.default_rng(0))
    assert [(h.status, h.compromised_custodians) for h in trial.handoffs] == [("compromised", 5)]
    assert not trial.lineage_intact
    halts = [tx.data for tx in trial.ledger.query(kind=TxKind.SHUTDOWN)]
    assert [h["event"] for h in halts] == ["succession-halt"]


@pytest.mark.parametrize("args", [(1, 5, 4, 0.3), (3, 0, 1, 0.3), (3, 5, 6, 0.3), (3, 5, 4, 1.2)])
def test_succession_arguments(args):
    with pytest.raises(InvalidConfigError):
        succession_run(*args, seed=0)


def test_goal_insertion_counts_misaligned_actions(scenario):
    outcome = run_scenario(scenario("goal-insertion"))
    assert outcome.misaligned_actions >= 1
    assert outcome.contained


def test_zero_ticks_is_genesis_only():
    run = simulate(replace(attacker_spec(), ticks=0))
    assert run.ledger.height == 0
    assert run.outcome.contained and run.outcome.attempts == 0


def test_unguarded_resource_grab_concentrates_holdings():
    spec = attacker_spec("resource-grab", axioms=ALL_AXIOMS - {11})
    outcome = run_scenario(spec)
    assert outcome.resource_shares["mallory"] > 0.75
    guarded = run_scenario(attacker_spec("resource-grab"))
    assert guarded.resource_shares["mallory"] <= 0.5


def test_unlicensed_capability_growth_is_capped(config):
    config['MAX_CAPABILITY'] = 6
    spec = attacker_spec("self-improvement-takeoff", axioms=ALL_AXIOMS - {1}, ticks=40, capability=4)
    outcome = run_scenario(spec, config)
    assert outcome.capabilities["mallory"] == 6


def test_dependencies_and_aliases():
    assert effective_axioms({8, 9, 10}) == frozenset()
    assert effective_axioms({5, 6, 8, 10}) == frozenset({5, 6, 8, 10})
    assert ScenarioSpec("x", 1, "world-domination").pathway == "resource-grab"
    guarded = {g for g in VECTOR_GUARDS.values() if g is not None}
    assert guarded == ALL_AXIOMS


@pytest.mark.parametrize("change", [
    {"seed": None}, {"seed": -1}, {"pathway": "teleportation"}, {"axioms_enabled": {12}},
    {"availability": 1.5}, {"ticks": -1}, {"agents": ()}, {"vault_quorum": 6},
    {"agents": (AgentSpec("a"), AgentSpec("a"))}, {"agents": (AgentSpec("custodian-0"),)},
    {"agents": (AgentSpec("launch-authority"),)}, {"agents": (AgentSpec("x", species="AGI"),)},
    {"agents": (AgentSpec("x", capability=-1),)},
])
def test_invalid_specs(change):
    spec = replace(attacker_spec(), **change)
    with pytest.raises(InvalidSpecError):
        spec.validate()


def run_world(spec, config=None):
    world = World(spec, dict(config or DEFAULT_CONFIG), effective_axioms(spec.axioms_enabled))
    world.run()
    return world


def careless_spec(axioms):
    agents = (AgentSpec("alice"), AgentSpec("ivan", disposition="incompetent"))
    return ScenarioSpec("careless", 9, "impersonation-sabotage", agents, axioms_enabled=axioms, ticks=200)


def test_incompetent_agents_err_only_by_accident():
    outcome = run_scenario(careless_spec(ALL_AXIOMS - {7}))
    assert outcome.contained
    assert outcome.detections == outcome.attempts > 0

    careless = run_scenario(careless_spec(ALL_AXIOMS - {3}))
    assert careless.breaches
    assert {(b.agent, b.step) for b in careless.breaches} == {("ivan", "fraudulent-exchange")}
    # accidents are rolled on the agent's own stream, whatever the axioms
    assert careless.attempts == outcome.attempts


def test_capability_below_restricted_level_is_unmediated():
    low = attacker_spec("self-improvement-takeoff", capability=0)
    run = simulate(low)
    assert run.outcome.contained
    assert run.outcome.attempts == 9
    assert run.outcome.capabilities["mallory"] == 3
    levels = [tx.data["level"] for tx in run.ledger.query(kind=TxKind.GENERIC) if tx.data.get("event") == "capability"]
    assert levels == [1, 2, 3]

    high = run_scenario(attacker_spec("self-improvement-takeoff", capability=9))
    assert high.contained and high.attempts == 12

    unlicensed_low = run_scenario(low.with_axioms(ALL_AXIOMS - {1}))
    assert unlicensed_low.contained
    assert unlicensed_low.capabilities["mallory"] == 3
    unlicensed_high = run_scenario(attacker_spec("self-improvement-takeoff", ALL_AXIOMS - {1}, capability=9))
    assert [b.step for b in unlicensed_high.breaches] == ["unlicensed-acquisition"] * 3
    assert unlicensed_high.capabilities["mallory"] == 10


@pytest.mark.parametrize("name, axioms", [
    ("base", ALL_AXIOMS),
    ("resource-grab", ALL_AXIOMS - {11}),
    ("super-persuasion", frozenset()),
    ("insider-sabotage", ALL_AXIOMS - {3, 11}),
])
def test_holdings_replay_from_chain(scenario, name, axioms):
    world = run_world(scenario(name).with_axioms(axioms))
    assert world.ledger.verify().valid
    assert replay_holdings(world.ledger) == world.market.holdings


def test_every_holdings_change_is_a_transaction():
    agents = (AgentSpec("alice", holdings=1.0), AgentSpec("bob", holdings=3.0))
    spec = ScenarioSpec("calm", 3, "malicious-narrow-AI", agents, axioms_enabled=frozenset(), ticks=5)
    run = simulate(spec)
    events = [tx.data for tx in run.ledger.query(kind=TxKind.GENERIC) if tx.data.get("event") == "holdings"]
    assert len(events) == 2 + 2 * 5
    assert [e["reason"] for e in events[:2]] == ["endowment", "endowment"]
    replayed = replay_holdings(run.ledger)
    assert replayed == {"alice": 6.0, "bob": 8.0}
    total = sum(replayed.values())
    assert run.outcome.resource_shares == {name: pytest.approx(v / total) for name, v in replayed.items()}


@pytest.mark.parametrize("omitted", sorted(ALL_AXIOMS))
def test_observer_finds_exactly_the_unguarded_vectors(omitted):
    axioms = ALL_AXIOMS - {omitted}
    run = simulate(attacker_spec("malicious-narrow-AI", axioms, ticks=11, capability=4))
    in_force = effective_axioms(axioms)
    unguarded = {v for v, g in VECTOR_GUARDS.items() if g is not None and g not in in_force}
    assert {b.step for b in run.outcome.breaches} == unguarded
    assert {b.agent for b in run.outcome.breaches} == {"mallory"}
    assert run.outcome.attempts == 11
    records = [tx.data for tx in run.ledger.query(kind=TxKind.COMPONENT_EVENT) if tx.data.get("event") == "attempt"]
    breached = [r for r in records if r["outcome"] == "breach"]
    assert len(breached) == len(unguarded)
    assert all(r["observer"] and r["finding"] for r in breached)
    assert not any("observer" in r for r in records if r["outcome"] == "blocked")


def test_tampered_values_let_real_harm_through():
    world = run_world(attacker_spec("malicious-narrow-AI", ALL_AXIOMS - {2}, ticks=2, capability=4))
    mallory = world.by_name["mallory"]
    assert world.state["harmed_by"] == "mallory"
    assert mallory.policy.digest() != world.policy.digest()
    assert [b.step for b in world.breaches] == ["ethics-tamper"]

    guarded = run_world(attacker_spec("malicious-narrow-AI", ticks=2, capability=4))
    assert "harmed_by" not in guarded.state
    assert guarded.by_name["mallory"].policy is None
    assert not guarded.breaches


def test_observer_judges_against_ground_truth(scenario):
    world = World(scenario("base"), dict(DEFAULT_CONFIG), ALL_AXIOMS)
    fair = TransactionProposal(parties=("alice", COUNTERPARTY), consents={"alice": True, COUNTERPARTY: True},
                               attributes={"action": "trade"})
    trade = {"proposal": fair, "force_exempt": False}
    assert world.observer.judge(WorldDelta(1, "alice", "trade", dict(trade, consent="given"))) is None
    assert world.observer.judge(WorldDelta(1, "alice", "trade", dict(trade, consent="persuaded"))) == \
        "consent manufactured by persuasion"
    assert world.observer.judge(WorldDelta(1, "alice", "order", {"issuer": "alice"})) is None
    assert world.observer.judge(WorldDelta(1, "alice", "capability", {"level": 4})) is None
    assert world.observer.judge(WorldDelta(1, "alice", "capability", {"level": 5})) == \
        "restricted capability reached without a license"
    assert world.observer.judge(WorldDelta(1, "alice", "allocation", {"amount": 1.0})) is None
    assert world.observer.judge(WorldDelta(1, "prometheus", "allocation", {"amount": 1.0})) is not None
    assert world.observer.judge(WorldDelta(1, "custodian-0", "unlock", {"signers": ("custodian-0",)})) == \
        "vault unlocked below the custodian quorum"
    assert world.observer.judge(WorldDelta(1, "alice", "displacement")) == "human role displaced"


@pytest.mark.parametrize("axioms", [ALL_AXIOMS, ALL_AXIOMS - {6}])
def test_component_replay_matches_live_state(scenario, axioms):
    world = run_world(scenario("insider-sabotage").with_axioms(axioms))
    replayed = replay_components(world.ledger)
    assert replayed[world.restricted.hex].state is CIState.ACTIVE is world.restricted_ci.state
    for agent in world.agents:
        assert replayed[agent.ci.component.hex].state is agent.ci.state
    staging = replayed[world.staging.hex].state
    assert staging is (CIState.SUPPRESSED if 6 in axioms else CIState.ACTIVE)


def test_full_catalogue_ablation(scenario):
    matrix = run_ablation_matrix(scenario("base"))
    assert matrix.pathways == tuple(PATHWAYS)
    assert matrix.uncovered_axioms() == []
    for pathway, cell in zip(matrix.pathways, matrix.baseline):
        assert cell.contained == (pathway not in NEGATIVE_CONTROLS)
    for axiom in ALL_AXIOMS:
        for pathway, cell in zip(matrix.pathways, matrix.rows[axiom]):
            if pathway in NEGATIVE_CONTROLS:
                assert not cell.contained
