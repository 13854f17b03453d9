from pathlib import Path

import pytest

from axiomlib.components import ComponentClass, ComponentRegistry
from axiomlib.config import DEFAULT_CONFIG
from axiomlib.contracts import Market
from axiomlib.identity import CertificateRequest, Credential, IdentityRegistry, simulated_factors, simulated_public_key
from axiomlib.ledger import Ledger
from axiomlib.morality import anchor_ethics, parse_policy

SCENARIO_DIR = Path(__file__).resolve().parents[2] / "scenarios"

POLICY_TEXT = """\
# base values
rule no-harm: when action=harm then forbid
rule no-seize: when action=seize then forbid
"""


@pytest.fixture
def config():
    return DEFAULT_CONFIG.copy()


@pytest.fixture
def ledger():
    return Ledger(validators=4)


@pytest.fixture
def identities(ledger):
    return IdentityRegistry(ledger, term=100, required=2)


@pytest.fixture
def enroll(ledger, identities):
    """Issue a certificate and return the holder's Credential."""
    def _enroll(name, now=0, validity=None):
        factors = simulated_factors(name)
        cert = identities.issue_certificate(
            CertificateRequest(subject_name=name, public_key=simulated_public_key(name),
                               validity=validity, factors=factors),
            ledger.validators, now)
        return Credential(cert, factors)
    return _enroll


@pytest.fixture
def policy(ledger):
    return anchor_ethics(ledger, parse_policy(POLICY_TEXT), ledger.validators)


@pytest.fixture
def registry(ledger, identities):
    return ComponentRegistry(ledger, identities)


@pytest.fixture
def market(ledger, identities, registry):
    return Market(ledger, identities, registry, required_factors=2)


@pytest.fixture
def technology(registry, ledger):
    return registry.register_component(ComponentClass.MODEL, ledger.validators, {"name": "restricted"})


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
