"""Network bring-up and channel/chaincode lifecycle.

Mirrors the five bring-up steps: create the orderer and the organizations,
issue certificates, create a channel genesis, join peers and set anchor
peers, then run the chaincode lifecycle (package/install are modeled as
registering a contract implementation with a peer; the approve/commit gate
is what controls invocation). Everything administrative runs through this
single controller.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .codec import ZERO_HASH
from .config import ChaincodeDefinition, ChannelConfig, OrdererConfig, majority
from .contracts import Contract
from .identity import Identity, Organization, Role, new_nonce
from .ledger import CONFIG_CHAINCODE, Block, CutReason, Transaction
from .orderer import Orderer
from .peer import Peer

log = logging.getLogger(__name__)

ORDERER_ORG = "OrdererOrg"


class NetworkError(Exception):
    pass


class InsufficientApprovals(NetworkError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    orgs: dict[str, tuple[str, ...]]  # org_id -> peer ids
    orderer_id: str = "orderer0"

    def __post_init__(self) -> None:
        if not self.orgs:
            raise NetworkError("a network needs at least one organization")
        if not self.orderer_id:
            raise NetworkError("a network needs an orderer")
        seen_peers: set[str] = set()
        for org_id, peers in self.orgs.items():
            if not org_id:
                raise NetworkError("empty org name")
            if not peers:
                raise NetworkError(f"org {org_id!r} needs at least one peer")
            for peer_id in peers:
                if peer_id in seen_peers:
                    raise NetworkError(f"duplicate peer id {peer_id!r}")
                seen_peers.add(peer_id)

    @classmethod
    def default(cls) -> "NetworkSpec":
        return cls(orgs={"Org1": ("peer0.org1",), "Org2": ("peer0.org2",)})


@dataclass
class _ChaincodeState:
    active: ChaincodeDefinition | None = None  # committed and in effect
    pending: ChaincodeDefinition | None = None
    approvals: set[str] = field(default_factory=set)  # for pending


@dataclass
class Channel:
    config: ChannelConfig
    genesis: Block
    chaincodes: dict[str, _ChaincodeState] = field(default_factory=dict)
    joined: list[str] = field(default_factory=list)  # peer ids in join order

    @property
    def name(self) -> str:
        return self.config.name

    def committed_names(self) -> set[str]:
        return {n for n, st in self.chaincodes.items() if st.active is not None}

    def required_overrides(self) -> dict[str, int]:
        return {
            n: st.active.required_endorsing_orgs
            for n, st in self.chaincodes.items()
            if st.active is not None and st.active.required_endorsing_orgs is not None
        }


class Network:
    """In-process permissioned network: orgs, peers, one solo orderer."""

    def __init__(self, clock, data_root: str | Path | None = None) -> None:
        self.clock = clock
        self.data_root = Path(data_root) if data_root is not None else None
        self.orgs: dict[str, Organization] = {}
        self.peers: dict[str, Peer] = {}
        self.org_peers: dict[str, list[str]] = {}
        self.channels: dict[str, Channel] = {}
        self.orderer: Orderer | None = None
        self._orderer_org: Organization | None = None

    # --- step 1 and 2: orgs, orderer, certificates ---------------------------

    @classmethod
    def bring_up(
        cls, spec: NetworkSpec, clock, data_root: str | Path | None = None
    ) -> "Network":
        net = cls(clock, data_root)
        net._orderer_org = Organization.create(ORDERER_ORG)
        orderer_identity = net._orderer_org.issue(spec.orderer_id, Role.ORDERER)
        net.orderer = Orderer(clock, orderer_identity)
        for org_id, peer_ids in spec.orgs.items():
            if org_id in net.orgs or org_id == ORDERER_ORG:
                raise NetworkError(f"duplicate org {org_id!r}")
            org = Organization.create(org_id)
            net.orgs[org_id] = org
            net.org_peers[org_id] = list(peer_ids)
            for peer_id in peer_ids:
                identity = org.issue(peer_id, Role.PEER)
                peer_root = (
                    net.data_root / peer_id if net.data_root is not None else None
                )
                net.peers[peer_id] = Peer(peer_id, identity, clock, peer_root)
        return net

    def root_keys(self, member_orgs: tuple[str, ...]) -> dict[str, bytes]:
        roots = {org: self.orgs[org].root_public_key for org in member_orgs}
        assert self._orderer_org is not None
        roots[ORDERER_ORG] = self._orderer_org.root_public_key
        return roots

    def issue_client_identity(self, org_id: str, subject_id: str) -> Identity:
        try:
            org = self.orgs[org_id]
        except KeyError:
            raise NetworkError(f"unknown org {org_id!r}") from None
        return org.issue(subject_id, Role.CLIENT)

    def issue_admin_identity(self, org_id: str, subject_id: str) -> Identity:
        return self.orgs[org_id].issue(subject_id, Role.ADMIN)

    # --- step 3: channel genesis, joins, anchors ------------------------------

    def create_channel(
        self,
        name: str,
        member_orgs: list[str] | tuple[str, ...],
        orderer_config: OrdererConfig,
    ) -> Channel:
        if name in self.channels:
            raise NetworkError(f"channel {name!r} already exists")
        unknown = [o for o in member_orgs if o not in self.orgs]
        if unknown:
            raise NetworkError(f"unknown member orgs: {unknown}")
        config = ChannelConfig(
            name=name,
            member_orgs=tuple(member_orgs),
            orderer_config=orderer_config,
            org_roots=self.root_keys(tuple(member_orgs)),
            orderer_org=ORDERER_ORG,
        )
        genesis = self._genesis_block(config)
        assert self.orderer is not None
        self.orderer.create_lane(config, genesis)
        channel = Channel(config=config, genesis=genesis)
        self.channels[name] = channel
        return channel

    def _genesis_block(self, config: ChannelConfig) -> Block:
        assert self.orderer is not None
        identity = self.orderer.identity
        tx = Transaction(
            channel=config.name,
            chaincode=CONFIG_CHAINCODE,
            function="genesis",
            args=[config.encode().hex()],
            creator=identity.certificate,
            nonce=new_nonce(),
            read_set=[],
            write_set=[],
            submit_time=self.clock.now_ns(),
        )
        tx.client_signature = identity.sign(tx.signing_payload())
        return Block.build(0, ZERO_HASH, [tx], CutReason.GENESIS)

    def join_peer(self, channel_name: str, peer_id: str) -> None:
        channel = self._channel(channel_name)
        peer = self._peer(peer_id)
        if peer.org_id not in channel.config.member_orgs:
            raise NetworkError(
                f"org {peer.org_id!r} is not a member of {channel_name!r}"
            )
        peer.join_channel(
            channel.config,
            self.orderer,
            channel.committed_names(),
            channel.required_overrides(),
        )
        channel.joined.append(peer_id)

    def set_anchor_peer(self, channel_name: str, org_id: str, peer_id: str) -> None:
        channel = self._channel(channel_name)
        peer = self._peer(peer_id)
        if org_id not in channel.config.member_orgs:
            raise NetworkError(f"org {org_id!r} is not a member of {channel_name!r}")
        if peer.org_id != org_id:
            raise NetworkError(f"peer {peer_id!r} does not belong to {org_id!r}")
        channel.config.anchor_peers[org_id] = peer_id

    # --- steps 4 and 5: chaincode lifecycle -----------------------------------

    def install_contract(self, peer_id: str, contract: Contract) -> None:
        self._peer(peer_id).install(contract)

    def approve_chaincode(
        self, channel_name: str, org_id: str, definition: ChaincodeDefinition
    ) -> None:
        channel = self._channel(channel_name)
        if org_id not in channel.config.member_orgs:
            raise NetworkError(f"org {org_id!r} is not a member of {channel_name!r}")
        state = channel.chaincodes.setdefault(definition.name, _ChaincodeState())
        if state.pending is not None and state.pending == definition:
            state.approvals.add(org_id)
            return
        floor = max(
            state.active.sequence if state.active else 0,
            state.pending.sequence if state.pending else 0,
        )
        if definition.sequence <= floor and (state.active or state.pending):
            raise NetworkError(
                f"redefinition of {definition.name!r} must increase sequence "
                f"past {floor}"
            )
        state.pending = definition
        state.approvals = {org_id}

    def commit_chaincode(self, channel_name: str, name: str) -> ChaincodeDefinition:
        channel = self._channel(channel_name)
        state = channel.chaincodes.get(name)
        if state is None or state.pending is None:
            raise NetworkError(f"no definition approved for {name!r}")
        needed = majority(len(channel.config.member_orgs))
        if len(state.approvals) < needed:
            raise InsufficientApprovals(
                f"{name!r} has {len(state.approvals)} approvals, needs {needed}"
            )
        state.active = state.pending
        state.pending = None
        state.approvals = set()
        for peer_id in channel.joined:
            self.peers[peer_id].set_committed_chaincodes(
                channel_name, channel.committed_names(), channel.required_overrides()
            )
        return state.active

    # --- helpers --------------------------------------------------------------

    def _channel(self, name: str) -> Channel:
        try:
            return self.channels[name]
        except KeyError:
            raise NetworkError(f"unknown channel {name!r}") from None

    def _peer(self, peer_id: str) -> Peer:
        try:
            return self.peers[peer_id]
        except KeyError:
            raise NetworkError(f"unknown peer {peer_id!r}") from None

    def endorsing_peers(self, channel_name: str) -> list[Peer]:
        """One joined peer per member org, anchor peer preferred."""
        channel = self._channel(channel_name)
        chosen: list[Peer] = []
        for org_id in channel.config.member_orgs:
            anchor = channel.config.anchor_peers.get(org_id)
            candidates = [
                pid
                for pid in channel.joined
                if self.peers[pid].org_id == org_id
            ]
            if not candidates:
                continue
            pick = anchor if anchor in candidates else candidates[0]
            chosen.append(self.peers[pick])
        return chosen

    def peer_for_org(self, channel_name: str, org_id: str) -> Peer:
        channel = self._channel(channel_name)
        for pid in channel.joined:
            if self.peers[pid].org_id == org_id:
                return self.peers[pid]
        raise NetworkError(f"org {org_id!r} has no peer joined to {channel_name!r}")

    def settle(self) -> None:
        """Drain zero-delay work in logical mode; no-op on a wall clock."""
        self.clock.run_ready()


# --- network spec files -------------------------------------------------------


def load_network_spec(path: str | Path) -> tuple[NetworkSpec, dict]:
    """Parse a YAML network spec; returns the spec plus the raw document
    (channels/chaincode sections are interpreted by the CLI)."""
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise NetworkError("network spec must be a mapping")
    orgs_section = doc.get("orgs") or []
    orgs: dict[str, tuple[str, ...]] = {}
    for entry in orgs_section:
        orgs[entry["org_id"]] = tuple(entry.get("peers") or ())
    orderer_id = (doc.get("orderer") or {}).get("id", "orderer0")
    return NetworkSpec(orgs=orgs, orderer_id=orderer_id), doc


def orderer_config_from_doc(doc: dict) -> OrdererConfig:
    section = doc.get("orderer") or {}
    return OrdererConfig(
        batch_timeout_s=float(section.get("batch_timeout_s", 2.0)),
        max_message_count=int(section.get("max_message_count", 10)),
        max_batch_bytes=(
            int(section["max_batch_bytes"]) if "max_batch_bytes" in section else None
        ),
    )
