"""Hash-chained block store and versioned key-value world state.

Every peer keeps one Ledger per channel: the immutable chain of blocks plus
the world state materialized from the valid transactions, each entry
stamped with the (block, tx) version that wrote it. Commit-time validation
follows the execute-order-validate discipline: membership, client
signature, duplicate tx id, endorsement policy, then the MVCC check that
every version read at endorsement is still current. Invalid transactions
stay in the chain but apply nothing.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .codec import (
    HASH_ALG_SHA256,
    HASH_LEN,
    ZERO_HASH,
    CodecError,
    Decoder,
    Encoder,
    checked_hash,
    sha256,
)
from .config import ChannelConfig
from .identity import Certificate, verify_identity, verify_signature

log = logging.getLogger(__name__)

Version = tuple[int, int]  # (block_no, tx_index)
ReadSet = list[tuple[str, Version | None]]
WriteSet = list[tuple[str, bytes, bool]]
Endorsement = tuple[str, Certificate, bytes]

CONFIG_CHAINCODE = "_config"

BLOCK_FILE_MAGIC = b"FLB1"


class LedgerError(Exception):
    pass


class OutOfOrderBlock(LedgerError):
    pass


class ChainBroken(LedgerError):
    def __init__(self, height: int, reason: str) -> None:
        super().__init__(f"chain broken at height {height}: {reason}")
        self.height = height


class ValidationCode(enum.Enum):
    VALID = 0
    MVCC_READ_CONFLICT = 1
    ENDORSEMENT_POLICY_FAILURE = 2
    BAD_SIGNATURE = 3
    DUPLICATE_TXID = 4
    UNKNOWN_CHAINCODE = 5
    NOT_A_MEMBER = 6


class CutReason(enum.Enum):
    TIMEOUT = "timeout"
    MAX_MESSAGES = "max_messages"
    GENESIS = "genesis"


def encode_read_set(read_set: ReadSet) -> bytes:
    enc = Encoder().count(len(read_set))
    for key, version in read_set:
        enc.string(key).boolean(version is not None)
        block_no, tx_index = version if version is not None else (0, 0)
        enc.u64(block_no).u64(tx_index)
    return enc.done()


def decode_read_set(dec: Decoder) -> ReadSet:
    out: ReadSet = []
    for _ in range(dec.count()):
        key = dec.string()
        present = dec.boolean()
        block_no = dec.u64()
        tx_index = dec.u64()
        out.append((key, (block_no, tx_index) if present else None))
    return out


def encode_write_set(write_set: WriteSet) -> bytes:
    enc = Encoder().count(len(write_set))
    for key, value, is_delete in write_set:
        enc.string(key).bytestr(value).boolean(is_delete)
    return enc.done()


def decode_write_set(dec: Decoder) -> WriteSet:
    return [
        (dec.string(), dec.bytestr(), dec.boolean()) for _ in range(dec.count())
    ]


def encode_rwset(read_set: ReadSet, write_set: WriteSet) -> bytes:
    return encode_read_set(read_set) + encode_write_set(write_set)


@dataclass
class Transaction:
    channel: str
    chaincode: str
    function: str
    args: list[str]
    creator: Certificate
    nonce: bytes
    read_set: ReadSet
    write_set: WriteSet
    response_payload: bytes = b""  # endorsers sign (rwset, payload); carried for re-verification
    endorsements: list[Endorsement] = field(default_factory=list)
    client_signature: bytes = b""
    submit_time: int = 0  # ns
    tx_id: bytes = b""

    def __post_init__(self) -> None:
        if not self.tx_id:
            self.tx_id = sha256(self.body_payload())

    def body_payload(self) -> bytes:
        """The identity-defining bytes: tx_id = hash of these."""
        enc = (
            Encoder()
            .string(self.channel)
            .string(self.chaincode)
            .string(self.function)
            .count(len(self.args))
        )
        for arg in self.args:
            enc.string(arg)
        enc.bytestr(self.creator.encode())
        enc.bytestr(self.nonce)
        enc.raw(encode_rwset(self.read_set, self.write_set))
        return enc.done()

    def signing_payload(self) -> bytes:
        return Encoder().raw(self.tx_id).u64(self.submit_time).done()

    def encode(self) -> bytes:
        enc = Encoder().raw(self.body_payload())
        enc.bytestr(self.response_payload)
        enc.count(len(self.endorsements))
        for org_id, cert, sig in self.endorsements:
            enc.string(org_id).bytestr(cert.encode()).bytestr(sig)
        enc.bytestr(self.client_signature)
        enc.u64(self.submit_time)
        return enc.done()

    @classmethod
    def read_from(cls, dec: Decoder) -> "Transaction":
        channel = dec.string()
        chaincode = dec.string()
        function = dec.string()
        args = [dec.string() for _ in range(dec.count())]
        creator = Certificate.decode(dec.bytestr())
        nonce = dec.bytestr()
        read_set = decode_read_set(dec)
        write_set = decode_write_set(dec)
        response_payload = dec.bytestr()
        endorsements = [
            (dec.string(), Certificate.decode(dec.bytestr()), dec.bytestr())
            for _ in range(dec.count())
        ]
        client_signature = dec.bytestr()
        submit_time = dec.u64()
        return cls(
            channel=channel,
            chaincode=chaincode,
            function=function,
            args=args,
            creator=creator,
            nonce=nonce,
            read_set=read_set,
            write_set=write_set,
            response_payload=response_payload,
            endorsements=endorsements,
            client_signature=client_signature,
            submit_time=submit_time,
        )

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        dec = Decoder(data)
        tx = cls.read_from(dec)
        dec.expect_end()
        return tx


@dataclass(frozen=True)
class BlockHeader:
    number: int
    prev_hash: bytes
    data_hash: bytes

    def encode(self) -> bytes:
        return Encoder().u64(self.number).raw(self.prev_hash).raw(self.data_hash).done()

    def hash(self) -> bytes:
        return sha256(self.encode())

    @classmethod
    def read_from(cls, dec: Decoder) -> "BlockHeader":
        return cls(dec.u64(), dec.raw(HASH_LEN), dec.raw(HASH_LEN))


@dataclass
class Block:
    header: BlockHeader
    transactions: list[Transaction]
    cut_reason: CutReason
    validation_codes: list[ValidationCode] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        number: int,
        prev_hash: bytes,
        transactions: Sequence[Transaction],
        cut_reason: CutReason,
    ) -> "Block":
        if not transactions:
            raise LedgerError("a block carries at least one transaction")
        data_hash = sha256(b"".join(tx.encode() for tx in transactions))
        return cls(BlockHeader(number, prev_hash, data_hash), list(transactions), cut_reason)

    def encode(self) -> bytes:
        enc = Encoder().raw(self.header.encode()).string(self.cut_reason.value)
        enc.count(len(self.transactions))
        for tx in self.transactions:
            enc.bytestr(tx.encode())
        enc.count(len(self.validation_codes))
        for code in self.validation_codes:
            enc.u64(code.value)
        return enc.done()

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        dec = Decoder(data)
        header = BlockHeader.read_from(dec)
        try:
            cut_reason = CutReason(dec.string())
        except ValueError as exc:
            raise CodecError("unknown cut reason") from exc
        txs = [Transaction.decode(dec.bytestr()) for _ in range(dec.count())]
        codes = []
        for _ in range(dec.count()):
            raw = dec.u64()
            try:
                codes.append(ValidationCode(raw))
            except ValueError as exc:
                raise CodecError(f"unknown validation code {raw}") from exc
        dec.expect_end()
        return cls(header, txs, cut_reason, codes)


def encode_block_file(block: Block, hash_alg: int = HASH_ALG_SHA256) -> bytes:
    body = BLOCK_FILE_MAGIC + bytes([hash_alg]) + block.encode()
    return body + checked_hash(body, hash_alg)


def decode_block_file(data: bytes) -> Block:
    if len(data) < len(BLOCK_FILE_MAGIC) + 1 + HASH_LEN:
        raise CodecError("block file too short")
    if data[: len(BLOCK_FILE_MAGIC)] != BLOCK_FILE_MAGIC:
        raise CodecError("bad block file magic")
    alg = data[len(BLOCK_FILE_MAGIC)]
    body, digest = data[:-HASH_LEN], data[-HASH_LEN:]
    if checked_hash(body, alg) != digest:
        raise CodecError("block file digest mismatch")
    return Block.decode(body[len(BLOCK_FILE_MAGIC) + 1 :])


class WorldState:
    """Versioned key-value view of the valid transactions committed so far."""

    def __init__(self) -> None:
        self.entries: dict[str, tuple[bytes, Version]] = {}
        self.height = 0  # next expected block number

    def get(self, key: str) -> tuple[bytes, Version] | None:
        return self.entries.get(key)

    def range(self, key_prefix: str) -> list[tuple[str, bytes, Version]]:
        return sorted(
            (key, value, version)
            for key, (value, version) in self.entries.items()
            if key.startswith(key_prefix)
        )

    def dump(self) -> str:
        lines = []
        for key in sorted(self.entries):
            value, (block_no, tx_index) = self.entries[key]
            lines.append(f"{key}\t{value.hex()}\t{block_no}.{tx_index}")
        return "\n".join(lines) + ("\n" if lines else "")


def query_state(state: WorldState, key: str) -> tuple[bytes, Version] | None:
    return state.get(key)


def range_query(state: WorldState, key_prefix: str) -> list[tuple[str, bytes, Version]]:
    return state.range(key_prefix)


def _creator_is_member(tx: Transaction, config: ChannelConfig) -> bool:
    if tx.chaincode == CONFIG_CHAINCODE:
        # The genesis config transaction is created by the orderer itself.
        return tx.creator.org_id == config.orderer_org and verify_identity(
            tx.creator, config.org_roots
        )
    return config.is_member_org(tx.creator.org_id) and verify_identity(
        tx.creator, config.org_roots
    )


def _endorsement_policy_met(
    tx: Transaction, config: ChannelConfig, required: int
) -> bool:
    rwset_payload = endorsement_payload(
        tx.read_set, tx.write_set, tx.response_payload
    )
    valid_orgs: set[str] = set()
    for org_id, cert, sig in tx.endorsements:
        if org_id != cert.org_id or not config.is_member_org(org_id):
            continue
        if not verify_identity(cert, config.org_roots):
            continue
        if not verify_signature(cert, rwset_payload, sig):
            continue
        valid_orgs.add(org_id)
    return len(valid_orgs) >= required


def endorsement_payload(read_set: ReadSet, write_set: WriteSet, response: bytes) -> bytes:
    """Bytes an endorsing peer signs: the rwset plus its response payload."""
    return Encoder().raw(encode_rwset(read_set, write_set)).bytestr(response).done()


def validate_and_commit(
    state: WorldState,
    block: Block,
    config: ChannelConfig,
    committed_chaincodes: Iterable[str],
    seen_txids: set[bytes],
    required_by_chaincode: dict[str, int] | None = None,
) -> list[ValidationCode]:
    """Validate every transaction in order and apply the valid writes.

    Invalidity is a code, never an exception. Writes from earlier valid
    transactions in the same block are visible to later MVCC checks, which
    is what makes the block equivalent to sequential execution.
    """
    if state.height != block.header.number:
        raise OutOfOrderBlock(
            f"state at height {state.height}, block {block.header.number}"
        )
    committed = set(committed_chaincodes)
    codes: list[ValidationCode] = []
    for tx_index, tx in enumerate(block.transactions):
        code = _validate_one(
            state, tx, config, committed, seen_txids, required_by_chaincode
        )
        seen_txids.add(tx.tx_id)
        if code is ValidationCode.VALID and tx.chaincode != CONFIG_CHAINCODE:
            for key, value, is_delete in tx.write_set:
                if is_delete:
                    state.entries.pop(key, None)
                else:
                    state.entries[key] = (value, (block.header.number, tx_index))
        codes.append(code)
    state.height = block.header.number + 1
    return codes


def _validate_one(
    state: WorldState,
    tx: Transaction,
    config: ChannelConfig,
    committed: set[str],
    seen_txids: set[bytes],
    required_by_chaincode: dict[str, int] | None,
) -> ValidationCode:
    if not _creator_is_member(tx, config):
        return ValidationCode.NOT_A_MEMBER
    if not verify_signature(tx.creator, tx.signing_payload(), tx.client_signature):
        return ValidationCode.BAD_SIGNATURE
    if tx.tx_id in seen_txids:
        return ValidationCode.DUPLICATE_TXID
    if tx.chaincode == CONFIG_CHAINCODE:
        return ValidationCode.VALID
    if tx.chaincode not in committed:
        return ValidationCode.UNKNOWN_CHAINCODE
    required = config.required_endorsing_orgs()
    if required_by_chaincode and tx.chaincode in required_by_chaincode:
        required = required_by_chaincode[tx.chaincode]
    if not _endorsement_policy_met(tx, config, required):
        return ValidationCode.ENDORSEMENT_POLICY_FAILURE
    for key, version in tx.read_set:
        entry = state.entries.get(key)
        current = entry[1] if entry is not None else None
        if current != version:
            return ValidationCode.MVCC_READ_CONFLICT
    return ValidationCode.VALID


class Ledger:
    """One channel's chain plus world state, optionally file-backed.

    append_block only checks and stores the chain linkage; commit_appended
    runs validation, fills the block's validation codes and freezes the
    block's file bytes. Block files land in `<dir>/<number>.blk`.
    """

    def __init__(
        self,
        channel: str,
        config: ChannelConfig,
        blocks_dir: str | Path | None = None,
    ) -> None:
        self.channel = channel
        self.config = config
        self.blocks: list[Block] = []
        self.stored_bytes: list[bytes | None] = []
        self.state = WorldState()
        self.seen_txids: set[bytes] = set()
        self.committed_chaincodes: set[str] = set()
        self.required_by_chaincode: dict[str, int] = {}
        self.blocks_dir = Path(blocks_dir) if blocks_dir is not None else None
        if self.blocks_dir is not None:
            self.blocks_dir.mkdir(parents=True, exist_ok=True)

    @property
    def height(self) -> int:
        return len(self.blocks)

    def tip_hash(self) -> bytes:
        return self.blocks[-1].header.hash() if self.blocks else ZERO_HASH

    def append_block(self, block: Block) -> None:
        if block.header.number != self.height:
            raise OutOfOrderBlock(
                f"expected block {self.height}, got {block.header.number}"
            )
        expected_prev = self.tip_hash()
        if block.header.prev_hash != expected_prev:
            raise ChainBroken(block.header.number, "prev_hash mismatch")
        data_hash = sha256(b"".join(tx.encode() for tx in block.transactions))
        if block.header.data_hash != data_hash:
            raise ChainBroken(block.header.number, "data_hash mismatch")
        self.blocks.append(block)
        self.stored_bytes.append(None)

    def commit_appended(self) -> list[ValidationCode]:
        block = self.blocks[self.state.height]
        codes = validate_and_commit(
            self.state,
            block,
            self.config,
            self.committed_chaincodes,
            self.seen_txids,
            self.required_by_chaincode,
        )
        block.validation_codes = codes
        data = encode_block_file(block)
        self.stored_bytes[block.header.number] = data
        if self.blocks_dir is not None:
            (self.blocks_dir / f"{block.header.number}.blk").write_bytes(data)
        return codes

    def append_and_commit(self, block: Block) -> list[ValidationCode]:
        self.append_block(block)
        return self.commit_appended()

    def verify_chain(self) -> tuple[bool, int | None]:
        """Re-check every stored block; returns (ok, first broken height)."""
        prev_hash = ZERO_HASH
        for number, data in enumerate(self.stored_bytes):
            if data is None:
                return False, number
            header, ok = _verify_block_bytes(data, number, prev_hash)
            if not ok:
                return False, number
            prev_hash = header.hash()
        return True, None

    def dump_state(self) -> str:
        return self.state.dump()


def _verify_block_bytes(
    data: bytes, expected_number: int, expected_prev: bytes
) -> tuple[BlockHeader | None, bool]:
    """Integrity walk for one stored block: file digest, header sequence and
    linkage, and the data hash over the raw transaction encodings. Skips
    deep transaction decoding (decode_block_file does that on load paths),
    which keeps full-chain verification cheap enough to run thousands of
    times in the mutation tests."""
    prefix = len(BLOCK_FILE_MAGIC) + 1
    if len(data) < prefix + HASH_LEN or data[: len(BLOCK_FILE_MAGIC)] != BLOCK_FILE_MAGIC:
        return None, False
    alg = data[len(BLOCK_FILE_MAGIC)]
    body, digest = data[:-HASH_LEN], data[-HASH_LEN:]
    try:
        if checked_hash(body, alg) != digest:
            return None, False
        dec = Decoder(body[prefix:])
        header = BlockHeader.read_from(dec)
        if header.number != expected_number or header.prev_hash != expected_prev:
            return header, False
        CutReason(dec.string())
        tx_blobs = [dec.bytestr() for _ in range(dec.count())]
        if header.data_hash != sha256(b"".join(tx_blobs)):
            return header, False
    except (CodecError, ValueError):
        return None, False
    return header, True


def replay(
    blocks: Sequence[Block],
    config: ChannelConfig,
    committed_chaincodes: Iterable[str] = (),
    required_by_chaincode: dict[str, int] | None = None,
) -> WorldState:
    """Rebuild world state from a chain; bit-identical to live commits."""
    state = WorldState()
    seen: set[bytes] = set()
    prev_hash = ZERO_HASH
    for number, block in enumerate(blocks):
        if block.header.number != number:
            raise ChainBroken(number, "non-sequential block numbers")
        if block.header.prev_hash != prev_hash:
            raise ChainBroken(number, "prev_hash mismatch")
        data_hash = sha256(b"".join(tx.encode() for tx in block.transactions))
        if block.header.data_hash != data_hash:
            raise ChainBroken(number, "data_hash mismatch")
        validate_and_commit(
            state, block, config, committed_chaincodes, seen, required_by_chaincode
        )
        prev_hash = block.header.hash()
    return state


def load_chain(blocks_dir: str | Path) -> list[Block]:
    """Read `<n>.blk` files in sequence until a gap."""
    directory = Path(blocks_dir)
    blocks: list[Block] = []
    number = 0
    while True:
        path = directory / f"{number}.blk"
        if not path.exists():
            break
        blocks.append(decode_block_file(path.read_bytes()))
        number += 1
    return blocks
