"""Endorsing and committing peer.

Endorsement executes a contract against the peer's committed state without
mutating it, recording every read (with its version) and buffered write;
the signed result is what clients assemble into transactions. The commit
loop consumes the orderer's delivery stream strictly in order, validates,
applies, and emits one CommitEvent per transaction -- the measurement point
for commit latency.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .codec import Encoder
from .config import ChannelConfig
from .contracts import Contract, ContractError
from .identity import Certificate, Identity, new_nonce, verify_identity, verify_signature
from .ledger import (
    Block,
    Ledger,
    LedgerError,
    ReadSet,
    Transaction,
    ValidationCode,
    Version,
    WriteSet,
    endorsement_payload,
)

log = logging.getLogger(__name__)


class PeerError(Exception):
    def __init__(self, message: str, code: ValidationCode | None = None) -> None:
        super().__init__(message)
        self.code = code


class EndorsementDivergence(Exception):
    """Endorsers returned different read-write sets: nondeterminism, surfaced."""


@dataclass(frozen=True)
class Proposal:
    channel: str
    chaincode: str
    function: str
    args: tuple[str, ...]
    creator: Certificate
    nonce: bytes
    client_signature: bytes = b""

    def signing_payload(self) -> bytes:
        enc = (
            Encoder()
            .string(self.channel)
            .string(self.chaincode)
            .string(self.function)
            .count(len(self.args))
        )
        for arg in self.args:
            enc.string(arg)
        enc.bytestr(self.nonce)
        return enc.done()

    @classmethod
    def build(
        cls,
        identity: Identity,
        channel: str,
        chaincode: str,
        function: str,
        args: tuple[str, ...] | list[str],
        nonce: bytes | None = None,
    ) -> "Proposal":
        unsigned = cls(
            channel=channel,
            chaincode=chaincode,
            function=function,
            args=tuple(args),
            creator=identity.certificate,
            nonce=nonce if nonce is not None else new_nonce(),
        )
        return cls(
            **{**unsigned.__dict__, "client_signature": identity.sign(unsigned.signing_payload())}
        )

    def encode(self) -> bytes:
        return (
            Encoder()
            .raw(self.signing_payload())
            .bytestr(self.creator.encode())
            .bytestr(self.client_signature)
            .done()
        )

    @classmethod
    def decode(cls, data: bytes) -> "Proposal":
        from .codec import Decoder

        dec = Decoder(data)
        channel = dec.string()
        chaincode = dec.string()
        function = dec.string()
        args = tuple(dec.string() for _ in range(dec.count()))
        nonce = dec.bytestr()
        creator = Certificate.decode(dec.bytestr())
        signature = dec.bytestr()
        dec.expect_end()
        return cls(channel, chaincode, function, args, creator, nonce, signature)


@dataclass
class ProposalResponse:
    ok: bool
    read_set: ReadSet
    write_set: WriteSet
    response_payload: bytes
    endorser: Certificate
    endorser_signature: bytes

    def signed_payload(self) -> bytes:
        return endorsement_payload(self.read_set, self.write_set, self.response_payload)

    def encode(self) -> bytes:
        from .ledger import encode_read_set, encode_write_set

        return (
            Encoder()
            .boolean(self.ok)
            .raw(encode_read_set(self.read_set))
            .raw(encode_write_set(self.write_set))
            .bytestr(self.response_payload)
            .bytestr(self.endorser.encode())
            .bytestr(self.endorser_signature)
            .done()
        )

    @classmethod
    def decode(cls, data: bytes) -> "ProposalResponse":
        from .codec import Decoder
        from .ledger import decode_read_set, decode_write_set

        dec = Decoder(data)
        ok = dec.boolean()
        read_set = decode_read_set(dec)
        write_set = decode_write_set(dec)
        payload = dec.bytestr()
        endorser = Certificate.decode(dec.bytestr())
        signature = dec.bytestr()
        dec.expect_end()
        return cls(ok, read_set, write_set, payload, endorser, signature)


@dataclass(frozen=True)
class CommitEvent:
    channel: str
    block_no: int
    tx_id: bytes
    validation_code: ValidationCode
    commit_time: int  # ns

    def encode(self) -> bytes:
        return (
            Encoder()
            .string(self.channel)
            .u64(self.block_no)
            .bytestr(self.tx_id)
            .u64(self.validation_code.value)
            .u64(self.commit_time)
            .done()
        )

    @classmethod
    def decode(cls, data: bytes) -> "CommitEvent":
        from .codec import Decoder

        dec = Decoder(data)
        event = cls(
            dec.string(), dec.u64(), dec.bytestr(), ValidationCode(dec.u64()), dec.u64()
        )
        dec.expect_end()
        return event


class TxSimulator:
    """Records a contract run against a read-consistent state snapshot.

    Reads hit committed state (never this transaction's own buffered
    writes, matching rwset semantics) and are logged with their versions;
    writes are buffered. The prefix guard keeps a contract inside its own
    key namespace.
    """

    def __init__(self, state, key_prefix: str) -> None:
        self._state = state
        self._prefix = key_prefix
        self._reads: dict[str, Version | None] = {}
        self._writes: dict[str, tuple[bytes, bool]] = {}

    def _guard(self, key: str) -> None:
        if not key.startswith(self._prefix):
            raise ContractError(
                f"key {key!r} is outside this contract's namespace {self._prefix!r}"
            )

    def get(self, key: str) -> bytes | None:
        self._guard(key)
        entry = self._state.get(key)
        if key not in self._reads:
            self._reads[key] = entry[1] if entry is not None else None
        return entry[0] if entry is not None else None

    def range(self, key_prefix: str) -> list[tuple[str, bytes, Version]]:
        self._guard(key_prefix)
        results = self._state.range(key_prefix)
        for key, _, version in results:
            if key not in self._reads:
                self._reads[key] = version
        return results

    def put(self, key: str, value: bytes) -> None:
        self._guard(key)
        self._writes[key] = (value, False)

    def delete(self, key: str) -> None:
        self._guard(key)
        self._writes[key] = (b"", True)

    def read_set(self) -> ReadSet:
        return sorted(self._reads.items())

    def write_set(self) -> WriteSet:
        return sorted((k, v, d) for k, (v, d) in self._writes.items())


@dataclass
class _PeerChannel:
    ledger: Ledger
    halted: bool = False
    halt_reason: str = ""
    lock: threading.Lock = field(default_factory=threading.Lock)


class Peer:
    def __init__(
        self,
        peer_id: str,
        identity: Identity,
        clock,
        blocks_root: str | Path | None = None,
    ) -> None:
        self.peer_id = peer_id
        self.identity = identity
        self.clock = clock
        self.blocks_root = Path(blocks_root) if blocks_root is not None else None
        self.installed: dict[str, Contract] = {}
        self.channels: dict[str, _PeerChannel] = {}
        self._commit_subscribers: list = []
        self._tx_watchers: dict[bytes, list] = {}
        self._watch_lock = threading.Lock()

    @property
    def org_id(self) -> str:
        return self.identity.org_id

    # --- lifecycle ----------------------------------------------------------

    def install(self, contract: Contract) -> None:
        self.installed[contract.name] = contract

    def join_channel(
        self,
        config: ChannelConfig,
        orderer,
        committed_chaincodes: set[str] | None = None,
        required_overrides: dict[str, int] | None = None,
    ) -> None:
        if config.name in self.channels:
            raise PeerError(f"already joined {config.name!r}")
        blocks_dir = (
            self.blocks_root / "blocks" / config.name if self.blocks_root else None
        )
        ledger = Ledger(config.name, config, blocks_dir)
        # The lifecycle view must be in place before catch-up replays blocks.
        ledger.committed_chaincodes = set(committed_chaincodes or ())
        ledger.required_by_chaincode = dict(required_overrides or {})
        pc = _PeerChannel(ledger)
        self.channels[config.name] = pc
        # Catch-up delivery from block 0 replays the chain through commit.
        orderer.deliver(config.name, ledger.height, lambda block: self._on_block(pc, block))

    def set_committed_chaincodes(
        self, channel: str, names: set[str], required: dict[str, int]
    ) -> None:
        ledger = self._channel(channel).ledger
        ledger.committed_chaincodes = set(names)
        ledger.required_by_chaincode = dict(required)

    def _channel(self, name: str) -> _PeerChannel:
        try:
            return self.channels[name]
        except KeyError:
            raise PeerError(f"peer {self.peer_id} has not joined {name!r}") from None

    # --- commit path ----------------------------------------------------------

    def _on_block(self, pc: _PeerChannel, block: Block) -> None:
        with pc.lock:
            if pc.halted:
                return
            try:
                codes = pc.ledger.append_and_commit(block)
            except LedgerError as exc:
                pc.halted = True
                pc.halt_reason = str(exc)
                log.error(
                    "peer %s halted channel %s: %s", self.peer_id, pc.ledger.channel, exc
                )
                return
        now = self.clock.now_ns()
        for tx, code in zip(block.transactions, codes):
            self._emit(
                CommitEvent(
                    channel=pc.ledger.channel,
                    block_no=block.header.number,
                    tx_id=tx.tx_id,
                    validation_code=code,
                    commit_time=now,
                )
            )

    def _emit(self, event: CommitEvent) -> None:
        for cb in list(self._commit_subscribers):
            try:
                cb(event)
            except Exception:
                log.exception("commit event subscriber failed")
        with self._watch_lock:
            watchers = self._tx_watchers.pop(event.tx_id, [])
        for cb in watchers:
            cb(event)

    def on_commit(self, callback) -> None:
        self._commit_subscribers.append(callback)

    def watch_tx(self, tx_id: bytes, callback) -> None:
        with self._watch_lock:
            self._tx_watchers.setdefault(tx_id, []).append(callback)

    def halted(self, channel: str) -> bool:
        return self._channel(channel).halted

    # --- endorsement and queries ---------------------------------------------

    def _contract_for(self, pc: _PeerChannel, chaincode: str) -> Contract:
        if chaincode not in pc.ledger.committed_chaincodes:
            raise PeerError(
                f"chaincode {chaincode!r} is not committed on {pc.ledger.channel!r}",
                ValidationCode.UNKNOWN_CHAINCODE,
            )
        contract = self.installed.get(chaincode)
        if contract is None:
            raise PeerError(
                f"chaincode {chaincode!r} is not installed on peer {self.peer_id}",
                ValidationCode.UNKNOWN_CHAINCODE,
            )
        return contract

    def endorse(self, proposal: Proposal) -> ProposalResponse:
        pc = self._channel(proposal.channel)
        config = pc.ledger.config
        if not config.is_member_org(proposal.creator.org_id) or not verify_identity(
            proposal.creator, config.org_roots
        ):
            raise PeerError(
                "proposal creator is not a channel member", ValidationCode.NOT_A_MEMBER
            )
        if not verify_signature(
            proposal.creator, proposal.signing_payload(), proposal.client_signature
        ):
            raise PeerError("bad proposal signature", ValidationCode.BAD_SIGNATURE)
        contract = self._contract_for(pc, proposal.chaincode)
        with pc.lock:
            sim = TxSimulator(pc.ledger.state, contract.key_prefix)
            try:
                payload = contract.invoke(sim, proposal.function, list(proposal.args))
                ok = True
                write_set = sim.write_set()
            except ContractError as exc:
                payload = str(exc).encode("utf-8")
                ok = False
                write_set = []
        read_set = sim.read_set()
        signature = self.identity.sign(endorsement_payload(read_set, write_set, payload))
        return ProposalResponse(
            ok=ok,
            read_set=read_set,
            write_set=write_set,
            response_payload=payload,
            endorser=self.identity.certificate,
            endorser_signature=signature,
        )

    def query(self, channel: str, chaincode: str, function: str, args) -> bytes:
        """Read-only evaluation at current height; no ordering round-trip."""
        pc = self._channel(channel)
        contract = self._contract_for(pc, chaincode)
        with pc.lock:
            sim = TxSimulator(pc.ledger.state, contract.key_prefix)
            return contract.invoke(sim, function, list(args))

    def state_dump(self, channel: str) -> str:
        pc = self._channel(channel)
        with pc.lock:
            return pc.ledger.dump_state()


def assemble_transaction(
    proposal: Proposal,
    responses: list[ProposalResponse],
    client_identity: Identity,
    submit_time: int,
) -> Transaction:
    """Combine matching endorsements into a client-signed transaction.

    Divergent read-write sets between endorsers indicate nondeterminism and
    raise; policy sufficiency is judged at validation, not here.
    """
    if not responses:
        raise EndorsementDivergence("no endorsements to assemble")
    baseline = responses[0].signed_payload()
    for response in responses[1:]:
        if response.signed_payload() != baseline:
            raise EndorsementDivergence(
                "endorsers disagree on the read-write set or payload"
            )
    first = responses[0]
    tx = Transaction(
        channel=proposal.channel,
        chaincode=proposal.chaincode,
        function=proposal.function,
        args=list(proposal.args),
        creator=client_identity.certificate,
        nonce=proposal.nonce,
        read_set=list(first.read_set),
        write_set=list(first.write_set),
        response_payload=first.response_payload,
        endorsements=[
            (r.endorser.org_id, r.endorser, r.endorser_signature) for r in responses
        ],
        submit_time=submit_time,
    )
    tx.client_signature = client_identity.sign(tx.signing_payload())
    return tx
