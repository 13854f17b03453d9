"""
Identity Module for axiomlib

This module issues, verifies and revokes identity certificates whose issuing
authority is the ledger itself: issuance is a quorum-sealed identity-issue
transaction, and verification checks the certificate against that record.

Key features:
- Seven-field certificates (version, serial, algorithm, issuing record, validity,
  subject, public key) with a half-open validity window [start, end)
- Multi-factor verification against factor digests anchored at issuance
- Quorum revocation, idempotent, plus re-issuance with a fresh serial
- Registry state rebuilt from the audit trail alone

Example Usage:
    from axiomlib.identity import IdentityRegistry, CertificateRequest, simulated_factors

    registry = IdentityRegistry(ledger, term=100)
    factors = simulated_factors('alice')
    cert = registry.issue_certificate(
        CertificateRequest(subject_name='alice', public_key=b'...', factors=factors),
        votes=ledger.validators, now=0)
    result = registry.verify_identity(cert, factors, required=2, now=10)
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import DuplicateSubjectError, MissingFieldError
from .ledger import TxKind, TxRef, digest, find_transaction, query_audit_trail

logger = logging.getLogger(__name__)

CERTIFICATE_VERSION = 1
DEFAULT_TERM = 100
DEFAULT_REQUIRED_FACTORS = 2


class SigningAlgorithm(Enum):
    HMAC_SHA256 = "hmac-sha256"
    ED25519_SIM = "ed25519-sim"


class FactorKind(Enum):
    KEY_PROOF = "key-proof"
    BIOMETRIC_TOKEN = "biometric-token"
    ONE_TIME_CODE = "one-time-code"


class FailureReason(Enum):
    REVOKED = "revoked"
    EXPIRED = "expired"
    NOT_YET_VALID = "not-yet-valid"
    CHAIN_MISMATCH = "chain-mismatch"
    FACTOR_MISMATCH = "factor-mismatch"


@dataclass(frozen=True)
class AuthenticationFactor:
    kind: FactorKind
    evidence: bytes

    def __post_init__(self):
        object.__setattr__(self, "kind", FactorKind(self.kind))
        if not self.evidence:
            raise ValueError(f"{self.kind.value} factor has empty evidence")

    def fingerprint(self):
        return digest(self.kind.value.encode("ascii") + b":" + bytes(self.evidence)).hex()


def simulated_factors(secret, kinds=tuple(FactorKind)):
    """Deterministic factor evidence for a simulated subject (no real biometrics)."""
    return tuple(
        AuthenticationFactor(kind, digest(f"{kind.value}:{secret}".encode("utf-8")))
        for kind in kinds
    )


def simulated_public_key(subject):
    return digest(b"public-key:" + subject.encode("utf-8"))


@dataclass(frozen=True)
class CertificateRequest:
    """Subject fields supplied by the requester; serial and issuing record are assigned."""
    subject_name: str = None
    public_key: bytes = None
    algorithm_id: SigningAlgorithm = SigningAlgorithm.HMAC_SHA256
    version: int = CERTIFICATE_VERSION
    validity: tuple = None
    factors: tuple = ()


@dataclass(frozen=True)
class IdentityCertificate:
    version: int
    serial: int
    algorithm_id: SigningAlgorithm
    issuing_record: TxRef
    validity: tuple
    subject_name: str
    public_key: bytes
    revoked: bool = False

    def __post_init__(self):
        start, end = self.validity
        if end <= start:
            raise ValueError(f"validity end {end} must exceed start {start}")

    def covers(self, now):
        start, end = self.validity
        return start <= now < end


@dataclass(frozen=True)
class Credential:
    """A certificate plus the factors its holder presents with it."""
    certificate: IdentityCertificate
    factors: tuple = ()

    @property
    def subject(self):
        return self.certificate.subject_name


@dataclass(frozen=True)
class VerificationResult:
    verified: bool
    reason: FailureReason = None
    needs_reverification: bool = False

    def __bool__(self):
        return self.verified


@dataclass
class ReplayedCertificate:
    subject: str
    validity: tuple
    ref: TxRef
    factors: dict = field(default_factory=dict)
    revoked: bool = False


def _issue_payload(cert, factor_digests, action="issue", supersedes=None):
    payload = {
        "action": action,
        "version": cert.version,
        "serial": cert.serial,
        "algorithm": cert.algorithm_id.value,
        "validity": list(cert.validity),
        "subject": cert.subject_name,
        "public_key": cert.public_key.hex(),
        "factors": factor_digests,
    }
    if supersedes is not None:
        payload["supersedes"] = supersedes
    return payload


def replay_certificates(chain):
    """
    Rebuild certificate state from identity-issue transactions.

    Args:
        chain: Ledger or sequence of Blocks

    Returns:
        Dictionary serial -> ReplayedCertificate
    """
    certs = {}
    blocks = chain.blocks if hasattr(chain, "blocks") else tuple(chain)
    for block in blocks:
        for tx in block.txs:
            if tx.kind != TxKind.IDENTITY_ISSUE:
                continue
            data = tx.data
            action = data.get("action")
            if action in ("issue", "reissue"):
                certs[data["serial"]] = ReplayedCertificate(
                    data["subject"], tuple(data["validity"]),
                    TxRef(block.height, tx.id), dict(data.get("factors", {})))
                if "supersedes" in data and data["supersedes"] in certs:
                    certs[data["supersedes"]].revoked = True
            elif action == "revoke" and data.get("serial") in certs:
                certs[data["serial"]].revoked = True
    return certs


class IdentityRegistry:
    """
    Certificate authority backed by ledger consensus.

    Issuance, revocation and re-issuance all go through Ledger.commit, so a
    ballot below quorum raises BelowQuorumError and leaves no trace.
    """

    def __init__(self, ledger, term=DEFAULT_TERM, required=DEFAULT_REQUIRED_FACTORS):
        self.ledger = ledger
        self.term = term
        self.required = required
        self._state = replay_certificates(ledger)
        self._next_serial = max(self._state, default=0) + 1

    def _live_serial(self, subject, now):
        for serial, record in self._state.items():
            if record.subject == subject and not record.revoked and record.validity[0] <= now < record.validity[1]:
                return serial
        return None

    def is_revoked(self, serial):
        record = self._state.get(serial)
        return record is not None and record.revoked

    def certificates(self):
        return dict(self._state)

    def issue_certificate(self, request, votes, now):
        """
        Issue a certificate anchored by a quorum-sealed identity-issue transaction.

        Args:
            request: CertificateRequest
            votes: Ballot of validator ids
            now: Current tick

        Returns:
            IdentityCertificate whose issuing_record points at the sealing block
        """
        for name in ("version", "algorithm_id", "subject_name", "public_key"):
            value = getattr(request, name)
            if value is None or value == b"" or value == "":
                raise MissingFieldError(name)
        if not request.factors:
            raise MissingFieldError("factors")

        if self._live_serial(request.subject_name, now) is not None:
            raise DuplicateSubjectError(f"subject '{request.subject_name}' already holds a live certificate")

        validity = tuple(request.validity) if request.validity else (now, now + self.term)
        factors = {f.kind.value: f.fingerprint() for f in request.factors}
        return self._anchor(request.subject_name, request.public_key, SigningAlgorithm(request.algorithm_id),
                            request.version, validity, factors, votes)

    def _anchor(self, subject, public_key, algorithm, version, validity, factors, votes, supersedes=None):
        serial = self._next_serial
        placeholder = TxRef(0, 0)
        draft = IdentityCertificate(version, serial, algorithm, placeholder, validity, subject, bytes(public_key))
        action = "issue" if supersedes is None else "reissue"
        ref = self.ledger.commit(subject, TxKind.IDENTITY_ISSUE,
                                 _issue_payload(draft, factors, action, supersedes),
                                 votes, what="certificate issuance")
        self._next_serial += 1
        self._state[serial] = ReplayedCertificate(subject, validity, ref, factors)
        if supersedes is not None:
            self._state[supersedes].revoked = True
        self.ledger.register_identity(subject)
        logger.info("Issued certificate %d to %s at %s", serial, subject, ref)
        return replace(draft, issuing_record=ref)

    def verify_identity(self, cert, factors, required=None, now=0):
        """
        Check a certificate and presented factors.

        Args:
            cert: IdentityCertificate
            factors: Presented AuthenticationFactors
            required: Distinct factor kinds needed (default: registry setting)
            now: Current tick

        Returns:
            VerificationResult; failures are values, never exceptions
        """
        required = self.required if required is None else required
        if cert.revoked or self.is_revoked(cert.serial):
            return VerificationResult(False, FailureReason.REVOKED)
        start, end = cert.validity
        if now >= end:
            return VerificationResult(False, FailureReason.EXPIRED, needs_reverification=True)
        if now < start:
            return VerificationResult(False, FailureReason.NOT_YET_VALID)

        record = self._anchored_record(cert)
        if record is None:
            return VerificationResult(False, FailureReason.CHAIN_MISMATCH)

        stored = record.get("factors", {})
        valid_kinds = {f.kind for f in factors if stored.get(f.kind.value) == f.fingerprint()}
        if len(valid_kinds) < required:
            return VerificationResult(False, FailureReason.FACTOR_MISMATCH)
        return VerificationResult(True)

    def check(self, credential, now, required=None):
        """verify_identity for a Credential."""
        return self.verify_identity(credential.certificate, credential.factors, required, now)

    def _anchored_record(self, cert):
        if not self.ledger.verify().valid:
            return None
        tx = find_transaction(self.ledger, cert.issuing_record)
        if tx is None or tx.kind != TxKind.IDENTITY_ISSUE:
            return None
        data = tx.data
        matches = (
            data.get("action") in ("issue", "reissue")
            and data.get("serial") == cert.serial
            and data.get("subject") == cert.subject_name
            and data.get("public_key") == cert.public_key.hex()
            and data.get("algorithm") == cert.algorithm_id.value
            and data.get("version") == cert.version
            and tuple(data.get("validity", ())) == tuple(cert.validity)
        )
        return data if matches else None

    def revoke_certificate(self, cert, votes):
        """
        Revoke by quorum; revoking twice anchors a single event.

        Returns:
            The certificate with revoked=True
        """
        if self.is_revoked(cert.serial):
            logger.info("Certificate %d already revoked", cert.serial)
            return replace(cert, revoked=True)
        self.ledger.commit(self.ledger.operator, TxKind.IDENTITY_ISSUE,
                           {"action": "revoke", "serial": cert.serial, "subject": cert.subject_name},
                           votes, what="revocation")
        if cert.serial in self._state:
            self._state[cert.serial].revoked = True
        logger.info("Revoked certificate %d (%s)", cert.serial, cert.subject_name)
        return replace(cert, revoked=True)

    def reissue_certificate(self, cert, votes, now):
        """Re-verification path: supersede cert with a fresh serial and window."""
        record = self._state.get(cert.serial)
        if record is None:
            raise MissingFieldError("issuing_record")
        return self._anchor(cert.subject_name, cert.public_key, cert.algorithm_id, cert.version,
                            (now, now + self.term), dict(record.factors), votes, supersedes=cert.serial)

    def history(self, subject):
        """Identity-issue transactions authored by or about a subject."""
        return [tx for tx in query_audit_trail(self.ledger, kind=TxKind.IDENTITY_ISSUE)
                if tx.data.get("subject") == subject]


CERTIFICATE_FIELDS = ("version", "serial", "algorithm", "issuing_record", "validity", "subject", "public_key")


def format_certificate(cert):
    """Fixed-order key=value text form."""
    start, end = cert.validity
    values = (cert.version, cert.serial, cert.algorithm_id.value, cert.issuing_record,
              f"{start}..{end}", cert.subject_name, cert.public_key.hex())
    return "".join(f"{key}={value}\n" for key, value in zip(CERTIFICATE_FIELDS, values))


def parse_certificate(text):
    fields = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    for key in CERTIFICATE_FIELDS:
        if key not in fields:
            raise MissingFieldError(key)
    start, _, end = fields["validity"].partition("..")
    return IdentityCertificate(
        version=int(fields["version"]),
        serial=int(fields["serial"]),
        algorithm_id=SigningAlgorithm(fields["algorithm"]),
        issuing_record=TxRef.parse(fields["issuing_record"]),
        validity=(int(start), int(end)),
        subject_name=fields["subject"],
        public_key=bytes.fromhex(fields["public_key"]),
    )
