"""
Ledger Module for axiomlib

This module implements the permissioned, hash-chained ledger every other mechanism
anchors to. A fixed set of validators seals blocks by quorum vote (proof of
authority); nothing is ever rewritten once sealed.

Key features:
- Transactions carry a SHA-256 digest of their payload
- Blocks are sealed on demand when distinct valid votes reach ceil(threshold * n)
- Integrity verification re-checks every quorum signature and reports the lowest corrupted height
- Audit queries by author, kind and component id, in chain order
- Canonical binary dump (bit-exact) and a line-oriented text dump for diffing

Binary layout (all integers big-endian):
    dump  := "AXLG" | version:u8 | hash-id:u8 | block-count:u64 | (block-len:u32 | block)*
    block := height:u64 | prev_hash:32 | tx-count:u32 | tx* | vote-count:u32 | vote* | block_hash:32
    tx    := id:u64 | author-len:u16 | author | kind:u8 | payload-len:u32 | payload | digest:32
    vote  := validator-len:u16 | validator | signature:32

Example Usage:
    from axiomlib.ledger import Ledger, TxKind, encode_payload

    ledger = Ledger(validators=4)
    tx = ledger.record(ledger.operator, TxKind.GENERIC, encode_payload({'event': 'hello'}))
    result = ledger.seal_block(ledger.sign_votes(ledger.validators[:3]))
    print(result.sealed, ledger.height)
"""

import hashlib
import hmac
import json
import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from urllib.parse import quote, unquote

from .errors import (
    BelowQuorumError,
    CorruptChainError,
    DigestMismatchError,
    DuplicateVoteError,
    EmptyPoolError,
    ParseError,
    SequenceError,
    UnknownAuthorError,
)

logger = logging.getLogger(__name__)

HASH_SIZE = 32
HASH_ID = 1  # sha256
ZERO_HASH = bytes(HASH_SIZE)
DUMP_MAGIC = b"AXLG"
DUMP_VERSION = 1

TWO_THIRDS = Fraction(2, 3)
UNANIMOUS = Fraction(1)

OPERATOR_ID = "ledger-operator"


def digest(data):
    """SHA-256 of a byte string."""
    return hashlib.sha256(data).digest()


class TxKind(IntEnum):
    IDENTITY_ISSUE = 1
    ETHICS_ANCHOR = 2
    LICENSE = 3
    TOKEN_SPEND = 4
    PETITION_SIGN = 5
    UNLOCK_VOTE = 6
    COMPONENT_EVENT = 7
    SHUTDOWN = 8
    GENERIC = 9

    @property
    def label(self):
        return self.name.lower().replace('_', '-')

    @classmethod
    def from_label(cls, label):
        try:
            return cls[label.upper().replace('-', '_')]
        except KeyError:
            raise ValueError(f"unknown transaction kind '{label}'") from None


# Kinds whose payloads may carry a "component" attribution
COMPONENT_KINDS = frozenset({TxKind.COMPONENT_EVENT, TxKind.SHUTDOWN})


def encode_payload(obj):
    """Canonical JSON bytes for a structured payload."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")


def decode_payload(payload):
    """Inverse of encode_payload; returns None for opaque (non-JSON-object) payloads."""
    try:
        data = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, ValueError):
        return None
    return data if isinstance(data, dict) else None


@dataclass(frozen=True)
class Transaction:
    id: int
    author: str
    kind: TxKind
    payload: bytes
    payload_digest: bytes

    @classmethod
    def create(cls, tx_id, author, kind, payload):
        return cls(tx_id, author, TxKind(kind), bytes(payload), digest(payload))

    def digest_ok(self):
        return hmac.compare_digest(self.payload_digest, digest(self.payload))

    @property
    def data(self):
        return decode_payload(self.payload) or {}

    def encode(self):
        author = self.author.encode("utf-8")
        return b"".join((
            struct.pack(">QH", self.id, len(author)), author,
            struct.pack(">BI", int(self.kind), len(self.payload)), self.payload,
            self.payload_digest,
        ))


@dataclass(frozen=True)
class TxRef:
    """Where a transaction was sealed: block height plus transaction id."""
    height: int
    tx_id: int

    def __str__(self):
        return f"{self.height}/{self.tx_id}"

    @classmethod
    def parse(cls, text):
        height, _, tx_id = text.partition("/")
        return cls(int(height), int(tx_id))


@dataclass(frozen=True)
class Vote:
    validator: str
    signature: bytes

    def encode(self):
        vid = self.validator.encode("utf-8")
        return struct.pack(">H", len(vid)) + vid + self.signature


@dataclass(frozen=True)
class Validator:
    id: str
    secret: bytes = b""

    def __post_init__(self):
        if not self.secret:
            # Simulation-grade key derived from the validator id
            object.__setattr__(self, "secret", digest(b"validator-secret:" + self.id.encode("utf-8")))

    def sign(self, message):
        return Vote(self.id, hmac.new(self.secret, message, hashlib.sha256).digest())


def make_validators(count, prefix="validator"):
    return tuple(Validator(f"{prefix}-{i}") for i in range(count))


@dataclass(frozen=True)
class ConsensusConfig:
    n: int
    threshold: Fraction = TWO_THIRDS

    def __post_init__(self):
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        if self.n < 1:
            raise ValueError("validator count must be at least 1")
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold}")

    @property
    def quorum(self):
        # exact ceiling of threshold * n
        return -(-self.threshold.numerator * self.n // self.threshold.denominator)


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    txs: tuple
    votes: tuple
    block_hash: bytes

    @classmethod
    def build(cls, height, prev_hash, txs, votes):
        votes = tuple(sorted(votes, key=lambda v: v.validator))
        draft = cls(height, prev_hash, tuple(txs), votes, ZERO_HASH)
        return cls(height, prev_hash, tuple(txs), votes, draft.compute_hash())

    def header_bytes(self):
        parts = [struct.pack(">Q", self.height), self.prev_hash, struct.pack(">I", len(self.txs))]
        parts.extend(tx.encode() for tx in self.txs)
        return b"".join(parts)

    def signing_digest(self):
        """What validators sign: the block without its votes."""
        return digest(self.header_bytes())

    def body_bytes(self):
        parts = [self.header_bytes(), struct.pack(">I", len(self.votes))]
        parts.extend(v.encode() for v in self.votes)
        return b"".join(parts)

    def compute_hash(self):
        return digest(self.body_bytes())

    def encode(self):
        return self.body_bytes() + self.block_hash


def signing_digest_for(height, prev_hash, txs):
    return Block(height, prev_hash, tuple(txs), (), ZERO_HASH).signing_digest()


@dataclass(frozen=True)
class SealResult:
    sealed: bool
    block: object
    votes: int
    quorum: int


@dataclass(frozen=True)
class IntegrityReport:
    valid: bool
    bad_height: object = None
    reason: str = ""


def _blocks_of(chain):
    return chain.blocks if isinstance(chain, Ledger) else tuple(chain)


def keyring_for(validators):
    """Validator keyring from a count, a ConsensusConfig, ids or Validators."""
    if isinstance(validators, ConsensusConfig):
        validators = validators.n
    if isinstance(validators, int):
        validators = make_validators(validators)
    ring = {}
    for v in validators:
        v = v if isinstance(v, Validator) else Validator(v)
        ring[v.id] = v
    return ring


def count_valid_votes(block, keyring):
    """Distinct keyring validators whose signature over the block's signing digest checks out."""
    message = block.signing_digest()
    valid = set()
    for vote in block.votes:
        validator = keyring.get(vote.validator)
        if validator is None or vote.validator in valid:
            continue
        if hmac.compare_digest(vote.signature, validator.sign(message).signature):
            valid.add(vote.validator)
    return len(valid)


def verify_chain_integrity(chain, start=0, prev_hash=None, validators=4, threshold=TWO_THIRDS):
    """
    Recompute every block hash and prev_hash link, and re-check each block's votes.

    Args:
        chain: Ledger or sequence of Blocks
        start: First index to check (earlier blocks are trusted)
        prev_hash: block_hash of block start-1 when start > 0
        validators: Validator set for plain block sequences: a count, a
            ConsensusConfig, or validator ids (a Ledger uses its own keyring)
        threshold: Consensus threshold for plain block sequences

    Returns:
        IntegrityReport naming the lowest corrupted height, if any
    """
    if isinstance(chain, Ledger):
        keyring, quorum = chain._validators, chain.quorum
    else:
        keyring = keyring_for(validators)
        if isinstance(validators, ConsensusConfig):
            threshold = validators.threshold
        quorum = ConsensusConfig(len(keyring), threshold).quorum

    blocks = _blocks_of(chain)
    prev = ZERO_HASH if start == 0 else prev_hash
    last_tx = -1
    for height in range(start, len(blocks)):
        block = blocks[height]
        if block.height != height:
            return IntegrityReport(False, height, "height out of sequence")
        if block.prev_hash != prev:
            return IntegrityReport(False, height, "prev_hash link broken")
        if block.compute_hash() != block.block_hash:
            return IntegrityReport(False, height, "block hash mismatch")
        for tx in block.txs:
            if not tx.digest_ok():
                return IntegrityReport(False, height, f"payload digest mismatch in tx {tx.id}")
            if start == 0 and tx.id <= last_tx:
                return IntegrityReport(False, height, f"tx id {tx.id} out of order")
            last_tx = tx.id
        votes = count_valid_votes(block, keyring)
        if votes < quorum:
            return IntegrityReport(False, height, f"votes below quorum ({votes} of {quorum})")
        prev = block.block_hash
    return IntegrityReport(True)


def find_transaction(chain, ref):
    """Resolve a TxRef on a chain; None when absent."""
    if isinstance(chain, Ledger):
        return chain.find(ref)
    blocks = _blocks_of(chain)
    if not 0 <= ref.height < len(blocks):
        return None
    for tx in blocks[ref.height].txs:
        if tx.id == ref.tx_id:
            return tx
    return None


def component_hex(component_id):
    """Normalise a component id (bytes, hex string or ComponentId) to lowercase hex."""
    if isinstance(component_id, (bytes, bytearray)):
        return bytes(component_id).hex()
    if isinstance(component_id, str):
        return component_id.lower()
    return component_id.id.hex()


def query_audit_trail(chain, author=None, kind=None, component_id=None):
    """
    Filter committed transactions, in chain order.

    Args:
        chain: Ledger or sequence of Blocks
        author: Only transactions by this identity
        kind: Only this TxKind (or its label)
        component_id: Only component-bearing transactions carrying this id

    Returns:
        List of matching Transactions (empty when nothing matches)
    """
    report = chain.verify() if isinstance(chain, Ledger) else verify_chain_integrity(chain)
    if not report.valid:
        raise CorruptChainError(report.bad_height, report.reason)

    if isinstance(kind, str):
        kind = TxKind.from_label(kind)
    wanted = component_hex(component_id) if component_id is not None else None

    matches = []
    for block in _blocks_of(chain):
        for tx in block.txs:
            if author is not None and tx.author != author:
                continue
            if kind is not None and tx.kind != kind:
                continue
            if wanted is not None:
                if tx.kind not in COMPONENT_KINDS or tx.data.get("component") != wanted:
                    continue
            matches.append(tx)
    return matches


class Ledger:
    """
    Single-writer chain state: sealed blocks, pending pool, validator keyring and
    the set of identities allowed to author transactions.
    """

    def __init__(self, validators=4, threshold=TWO_THIRDS, operator=OPERATOR_ID, _genesis=True):
        if isinstance(validators, int):
            validators = make_validators(validators)
        self._validators = {v.id: v for v in validators}
        self.config = ConsensusConfig(len(self._validators), threshold)
        self.operator = operator
        self._identities = set(self._validators) | {operator}
        self._blocks = []
        self._pending = []
        self._index = {}
        self._last_tx_id = 0
        self._verified = 0

        if _genesis:
            genesis = Block.build(0, ZERO_HASH, (), ())
            votes = [v.sign(genesis.signing_digest()) for v in self._validators.values()]
            self._append_block(Block.build(0, ZERO_HASH, (), votes))

    @classmethod
    def from_blocks(cls, blocks, validators=4, threshold=TWO_THIRDS, operator=OPERATOR_ID):
        """Rebuild chain state from loaded blocks (e.g. a dump) without re-sealing."""
        ledger = cls(validators, threshold, operator, _genesis=False)
        for block in blocks:
            ledger._append_block(block)
        return ledger

    def _append_block(self, block):
        self._blocks.append(block)
        for tx in block.txs:
            self._index[tx.id] = (block.height, tx)
            self._last_tx_id = max(self._last_tx_id, tx.id)
            if tx.kind == TxKind.IDENTITY_ISSUE:
                self._identities.add(tx.author)

    # --- state -------------------------------------------------------------

    @property
    def validators(self):
        return tuple(self._validators)

    @property
    def quorum(self):
        return self.config.quorum

    @property
    def blocks(self):
        return tuple(self._blocks)

    @property
    def pending(self):
        return tuple(self._pending)

    @property
    def height(self):
        return len(self._blocks) - 1

    @property
    def head_hash(self):
        return self._blocks[-1].block_hash if self._blocks else ZERO_HASH

    def register_identity(self, name):
        self._identities.add(name)

    def is_registered(self, name):
        return name in self._identities

    def transactions(self):
        for block in self._blocks:
            yield from block.txs

    def find(self, ref):
        entry = self._index.get(ref.tx_id)
        if entry is None or entry[0] != ref.height:
            return None
        return entry[1]

    def verify(self):
        """Integrity check, incremental over blocks sealed since the last call."""
        start = self._verified
        prev = self._blocks[start - 1].block_hash if start else None
        report = verify_chain_integrity(self, start=start, prev_hash=prev)
        if report.valid:
            self._verified = len(self._blocks)
        return report

    def query(self, author=None, kind=None, component_id=None):
        return query_audit_trail(self, author=author, kind=kind, component_id=component_id)

    # --- writing -----------------------------------------------------------

    def new_transaction(self, author, kind, payload):
        """Build (but do not submit) the next transaction in sequence."""
        next_id = max([self._last_tx_id] + [tx.id for tx in self._pending]) + 1
        return Transaction.create(next_id, author, kind, payload)

    def append_transaction(self, tx):
        """
        Put a transaction in the pending pool.

        Args:
            tx: Transaction with a correct digest and a fresh id

        Returns:
            The pending pool as a tuple
        """
        if tx.kind != TxKind.IDENTITY_ISSUE and tx.author not in self._identities:
            raise UnknownAuthorError(f"author '{tx.author}' is not a registered identity")
        if not tx.digest_ok():
            raise DigestMismatchError(f"payload digest of tx {tx.id} does not match its payload")
        last = max([self._last_tx_id] + [p.id for p in self._pending])
        if tx.id <= last:
            raise SequenceError(f"tx id {tx.id} does not follow {last}")
        self._pending.append(tx)
        return tuple(self._pending)

    def record(self, author, kind, payload):
        """Append an unvoted event; it seals with the next block."""
        if isinstance(payload, dict):
            payload = encode_payload(payload)
        tx = self.new_transaction(author, kind, payload)
        self.append_transaction(tx)
        return tx

    def proposal_digest(self):
        return signing_digest_for(len(self._blocks), self.head_hash, self._pending)

    def sign_votes(self, validator_ids=None):
        """Have the named validators (default: all) sign the current proposal."""
        ids = self._validators if validator_ids is None else validator_ids
        message = self.proposal_digest()
        return tuple(self._validators[v].sign(message) for v in ids if v in self._validators)

    def tally(self, votes):
        """Count distinct registered validators in a ballot of validator ids."""
        return len({v for v in votes if v in self._validators})

    def seal_block(self, votes):
        """
        Seal the pending pool into a block if enough validators voted.

        Args:
            votes: Iterable of Vote signed over proposal_digest()

        Returns:
            SealResult; on refusal the chain and pool are unchanged
        """
        if not self._pending:
            raise EmptyPoolError("nothing pending to seal")
        votes = list(votes)
        ids = [v.validator for v in votes]
        if len(ids) > 1 and len(set(ids)) == 1:
            raise DuplicateVoteError(f"every vote came from {ids[0]}")

        message = self.proposal_digest()
        valid = {}
        for vote in votes:
            validator = self._validators.get(vote.validator)
            if validator is None or vote.validator in valid:
                continue
            if hmac.compare_digest(vote.signature, validator.sign(message).signature):
                valid[vote.validator] = vote

        if len(valid) < self.quorum:
            logger.info("Seal refused at height %d: %d of %d votes",
                        len(self._blocks), len(valid), self.quorum)
            return SealResult(False, None, len(valid), self.quorum)

        block = Block.build(len(self._blocks), self.head_hash, self._pending, valid.values())
        self._pending = []
        self._append_block(block)
        logger.debug("Sealed block %d with %d txs", block.height, len(block.txs))
        return SealResult(True, block, len(valid), self.quorum)

    def seal_pending(self):
        """Seal whatever is pending with the full validator set."""
        if not self._pending:
            return None
        return self.seal_block(self.sign_votes()).block

    def commit(self, author, kind, payload, votes, what="operation"):
        """
        Approve-append-seal in one step for quorum-voted mechanisms.

        Args:
            author: Identity authoring the transaction
            kind: TxKind
            payload: bytes or dict (encoded canonically)
            votes: Ballot of validator ids approving the operation
            what: Name used in the refusal message

        Returns:
            TxRef of the sealed transaction
        """
        ballot = sorted({v for v in votes if v in self._validators})
        if len(ballot) < self.quorum:
            raise BelowQuorumError(len(ballot), self.quorum, what)
        tx = self.record(author, kind, payload)
        block = self.seal_block(self.sign_votes(ballot)).block
        return TxRef(block.height, tx.id)


# --- dumps -------------------------------------------------------------------

class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise ValueError("truncated input")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, size):
        return self.take(size).decode("utf-8")

    @property
    def exhausted(self):
        return self.offset == len(self.data)


def decode_block(data):
    """Decode one block's bytes; raises ValueError on any structural problem."""
    reader = _Reader(data)
    height, = reader.unpack(">Q")
    prev_hash = reader.take(HASH_SIZE)
    tx_count, = reader.unpack(">I")
    txs = []
    for _ in range(tx_count):
        tx_id, author_len = reader.unpack(">QH")
        author = reader.text(author_len)
        kind, payload_len = reader.unpack(">BI")
        payload = reader.take(payload_len)
        tx_digest = reader.take(HASH_SIZE)
        txs.append(Transaction(tx_id, author, TxKind(kind), payload, tx_digest))
    vote_count, = reader.unpack(">I")
    votes = []
    for _ in range(vote_count):
        vid_len, = reader.unpack(">H")
        votes.append(Vote(reader.text(vid_len), reader.take(HASH_SIZE)))
    block_hash = reader.take(HASH_SIZE)
    if not reader.exhausted:
        raise ValueError("trailing bytes in block")
    return Block(height, prev_hash, tuple(txs), tuple(votes), block_hash)


def dump_chain(chain):
    blocks = _blocks_of(chain)
    parts = [DUMP_MAGIC, struct.pack(">BBQ", DUMP_VERSION, HASH_ID, len(blocks))]
    for block in blocks:
        encoded = block.encode()
        parts.append(struct.pack(">I", len(encoded)))
        parts.append(encoded)
    return b"".join(parts)


def load_chain(data):
    """
    Parse a binary dump.

    Returns:
        List of Blocks

    Raises:
        ParseError: header is not a chain dump
        CorruptChainError: a block failed to decode (height = its position)
    """
    reader = _Reader(data)
    try:
        magic = reader.take(len(DUMP_MAGIC))
        version, hash_id, count = reader.unpack(">BBQ")
    except ValueError:
        raise ParseError("truncated chain dump header") from None
    if magic != DUMP_MAGIC or version != DUMP_VERSION or hash_id != HASH_ID:
        raise ParseError("not an axiomlib chain dump (bad magic, version or hash id)")

    blocks = []
    for position in range(count):
        try:
            size, = reader.unpack(">I")
            blocks.append(decode_block(reader.take(size)))
        except ValueError as e:
            raise CorruptChainError(position, str(e)) from None
    if not reader.exhausted:
        raise CorruptChainError(count, "trailing bytes after last block")
    return blocks


def verify_dump(data, validators=4, threshold=TWO_THIRDS):
    """Integrity report for a binary dump; decode failures count as corruption."""
    try:
        blocks = load_chain(data)
    except CorruptChainError as e:
        return IntegrityReport(False, e.height, str(e))
    return verify_chain_integrity(blocks, validators=validators, threshold=threshold)


def format_chain_text(chain):
    """Line-oriented dump; JSON payloads get a decoded comment line for diffing."""
    blocks = _blocks_of(chain)
    lines = [f"chain v{DUMP_VERSION} blocks={len(blocks)}"]
    for block in blocks:
        lines.append(f"block {block.height} prev={block.prev_hash.hex()} hash={block.block_hash.hex()}")
        for tx in block.txs:
            lines.append(
                f"  tx {tx.id} author={quote(tx.author, safe='')} kind={tx.kind.label} "
                f"digest={tx.payload_digest.hex()} payload={tx.payload.hex()}"
            )
            data = decode_payload(tx.payload)
            if data is not None:
                lines.append(f"  # {encode_payload(data).decode('ascii')}")
        for vote in block.votes:
            lines.append(f"  vote {quote(vote.validator, safe='')} sig={vote.signature.hex()}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _fields(parts, line_no):
    fields = {}
    for part in parts:
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got '{part}'", line_no)
        fields[key] = value
    return fields


def parse_chain_text(text):
    """Inverse of format_chain_text."""
    blocks = []
    current = None

    def close():
        if current is not None:
            height, prev, block_hash, txs, votes = current
            blocks.append(Block(height, prev, tuple(txs), tuple(votes), block_hash))

    lines = text.splitlines()
    if not lines or not lines[0].startswith("chain v"):
        raise ParseError("missing chain header", 1)
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        words = line.split()
        try:
            if words[0] == "block":
                close()
                f = _fields(words[2:], line_no)
                current = (int(words[1]), bytes.fromhex(f["prev"]), bytes.fromhex(f["hash"]), [], [])
            elif words[0] == "tx" and current is not None:
                f = _fields(words[2:], line_no)
                current[3].append(Transaction(
                    int(words[1]), unquote(f["author"]), TxKind.from_label(f["kind"]),
                    bytes.fromhex(f["payload"]), bytes.fromhex(f["digest"])))
            elif words[0] == "vote" and current is not None:
                f = _fields(words[2:], line_no)
                current[4].append(Vote(unquote(words[1]), bytes.fromhex(f["sig"])))
            elif words[0] == "end":
                close()
                current = None
            else:
                raise ParseError(f"unexpected line '{words[0]}'", line_no)
        except (KeyError, IndexError, ValueError) as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"malformed line: {e}", line_no) from None
    if current is not None:
        raise ParseError("missing 'end' line", len(lines))
    return blocks
