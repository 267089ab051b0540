"""Shared test fixtures: hand-built channels and fully signed transactions."""

from __future__ import annotations

import itertools

from fleetledger.clock import LogicalClock
from fleetledger.codec import ZERO_HASH
from fleetledger.config import ChannelConfig, OrdererConfig
from fleetledger.identity import Identity, Organization, Role, new_nonce
from fleetledger.ledger import (
    Block,
    CONFIG_CHAINCODE,
    CutReason,
    Transaction,
    endorsement_payload,
)

_counter = itertools.count(1)


class ChannelWorld:
    """A two-org channel with real keys, no peers: enough to build valid
    transactions by hand for ledger and orderer tests."""

    def __init__(
        self,
        channel: str = "testch",
        orgs: tuple[str, ...] = ("Org1", "Org2"),
        orderer_config: OrdererConfig | None = None,
        chaincodes: tuple[str, ...] = ("path",),
    ) -> None:
        self.channel = channel
        self.orgs = {name: Organization.create(name) for name in orgs}
        self.orderer_org = Organization.create("OrdererOrg")
        self.orderer_identity = self.orderer_org.issue("orderer0", Role.ORDERER)
        roots = {name: org.root_public_key for name, org in self.orgs.items()}
        roots["OrdererOrg"] = self.orderer_org.root_public_key
        self.config = ChannelConfig(
            name=channel,
            member_orgs=orgs,
            orderer_config=orderer_config or OrdererConfig(5.0, 100),
            org_roots=roots,
            orderer_org="OrdererOrg",
        )
        self.endorsers = {
            name: org.issue(f"peer0.{name.lower()}", Role.PEER)
            for name, org in self.orgs.items()
        }
        self.client = self.orgs[orgs[0]].issue("client0", Role.CLIENT)
        self.outsider_org = Organization.create("Mallory")
        self.outsider = self.outsider_org.issue("intruder", Role.CLIENT)
        self.chaincodes = set(chaincodes)

    def make_tx(
        self,
        read_set=(),
        write_set=(),
        chaincode: str = "path",
        function: str = "CreateAsset",
        args: tuple[str, ...] = (),
        endorse_orgs: tuple[str, ...] | None = None,
        creator: Identity | None = None,
        submit_time: int = 0,
        client_signature: bytes | None = None,
        payload: bytes = b"ok",
    ) -> Transaction:
        creator = creator or self.client
        endorse_orgs = endorse_orgs if endorse_orgs is not None else tuple(self.orgs)
        rs = [(k, v) for k, v in read_set]
        ws = [(k, v, d) for k, v, d in write_set]
        signed = endorsement_payload(rs, ws, payload)
        endorsements = [
            (org, self.endorsers[org].certificate, self.endorsers[org].sign(signed))
            for org in endorse_orgs
        ]
        tx = Transaction(
            channel=self.channel,
            chaincode=chaincode,
            function=function,
            args=list(args) or [f"arg{next(_counter)}"],
            creator=creator.certificate,
            nonce=new_nonce(),
            read_set=rs,
            write_set=ws,
            response_payload=payload,
            endorsements=endorsements,
            submit_time=submit_time,
        )
        tx.client_signature = (
            client_signature
            if client_signature is not None
            else creator.sign(tx.signing_payload())
        )
        return tx

    def genesis(self) -> Block:
        tx = Transaction(
            channel=self.channel,
            chaincode=CONFIG_CHAINCODE,
            function="genesis",
            args=[self.config.encode().hex()],
            creator=self.orderer_identity.certificate,
            nonce=new_nonce(),
            read_set=[],
            write_set=[],
        )
        tx.client_signature = self.orderer_identity.sign(tx.signing_payload())
        return Block.build(0, ZERO_HASH, [tx], CutReason.GENESIS)

    def chain_of(self, blocks_of_writes: list[list[tuple]], start=None) -> list[Block]:
        """Build a valid chain: genesis + one block per write list; each
        write is (key, value, is_delete)."""
        chain = [start or self.genesis()]
        for writes in blocks_of_writes:
            txs = [self.make_tx(write_set=[w]) for w in writes]
            chain.append(
                Block.build(
                    len(chain), chain[-1].header.hash(), txs, CutReason.TIMEOUT
                )
            )
        return chain


def fresh_ledger(world: ChannelWorld, blocks_dir=None):
    from fleetledger.ledger import Ledger

    ledger = Ledger(world.channel, world.config, blocks_dir)
    ledger.committed_chaincodes = set(world.chaincodes)
    return ledger


def logical_clock() -> LogicalClock:
    return LogicalClock()
