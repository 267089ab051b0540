"""On-disk network directory: CAs, wallets, genesis blocks, lifecycle state.

Lets the bring-up steps run as separate CLI invocations: `net up` writes
CAs and wallets, `net channel create` writes a genesis block, joins and
approvals mutate a lifecycle file, and `serve` loads the whole directory
back into a live in-process network (peers replay their chains from the
orderer's persisted blocks).

Layout under the data root:
    network.yaml                   orgs/peers/orderer echo
    cas/<OrgId>.ca                 CA root keys + issuance state
    wallets/<subject_id>           identity files (canonical bytes)
    channels/<name>/genesis.blk    channel genesis
    channels/<name>/lifecycle.yaml members, anchors, joins, chaincode state
    orderer/<channel>/<n>.blk      the ordering service's chain
    peers/<peer_id>/blocks/...     per-peer ledgers (written while serving)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import yaml

from .codec import ZERO_HASH
from .config import ChannelConfig, OrdererConfig, majority
from .contracts import Contract, standard_contracts
from .identity import CertificateAuthority, Identity, Role, load_identity, new_nonce, save_identity
from .ledger import CONFIG_CHAINCODE, Block, CutReason, Transaction, decode_block_file, load_chain
from .network import Network, NetworkSpec, ORDERER_ORG
from .orderer import Orderer
from .peer import Peer

log = logging.getLogger(__name__)


class StoreError(Exception):
    pass


def _root(path: str | Path) -> Path:
    return Path(path)


def _load_yaml(path: Path) -> dict:
    return yaml.safe_load(path.read_text()) or {}


def _dump_yaml(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(doc, sort_keys=True))


@dataclass
class NetworkStore:
    root: Path
    spec: NetworkSpec
    orderer_id: str

    # --- loading ----------------------------------------------------------

    @classmethod
    def open(cls, root: str | Path) -> "NetworkStore":
        root = _root(root)
        meta = root / "network.yaml"
        if not meta.exists():
            raise StoreError(f"{root} is not a network directory (run `net up` first)")
        doc = _load_yaml(meta)
        orgs = {o["org_id"]: tuple(o["peers"]) for o in doc["orgs"]}
        return cls(root=root, spec=NetworkSpec(orgs=orgs, orderer_id=doc["orderer_id"]),
                   orderer_id=doc["orderer_id"])

    def ca(self, org_id: str) -> CertificateAuthority:
        path = self.root / "cas" / f"{org_id}.ca"
        if not path.exists():
            raise StoreError(f"no CA for org {org_id!r}")
        return CertificateAuthority.load(path)

    def save_ca(self, ca: CertificateAuthority) -> None:
        ca.save(self.root / "cas" / f"{ca.org_id}.ca")

    def wallet(self, subject_id: str) -> Identity:
        path = self.root / "wallets" / subject_id
        if not path.exists():
            raise StoreError(f"no wallet for {subject_id!r}")
        return load_identity(path)

    def org_roots(self, members: tuple[str, ...]) -> dict[str, bytes]:
        roots = {org: self.ca(org).root_public_key for org in members}
        roots[ORDERER_ORG] = self.ca(ORDERER_ORG).root_public_key
        return roots

    def channel_dir(self, name: str) -> Path:
        return self.root / "channels" / name

    def channels(self) -> list[str]:
        base = self.root / "channels"
        return sorted(p.name for p in base.iterdir() if p.is_dir()) if base.exists() else []

    def lifecycle(self, channel: str) -> dict:
        path = self.channel_dir(channel) / "lifecycle.yaml"
        if not path.exists():
            raise StoreError(f"unknown channel {channel!r}")
        return _load_yaml(path)

    def save_lifecycle(self, channel: str, doc: dict) -> None:
        _dump_yaml(self.channel_dir(channel) / "lifecycle.yaml", doc)

    def org_of_peer(self, peer_id: str) -> str:
        for org, peers in self.spec.orgs.items():
            if peer_id in peers:
                return org
        raise StoreError(f"unknown peer {peer_id!r}")


# --- the five steps as file operations ---------------------------------------------


def init_network(spec: NetworkSpec, root: str | Path) -> NetworkStore:
    """Steps 1-2: organizations, orderer, certificates; all persisted."""
    root = _root(root)
    if (root / "network.yaml").exists():
        raise StoreError(f"{root} already holds a network")
    (root / "wallets").mkdir(parents=True, exist_ok=True)

    orderer_ca = CertificateAuthority(ORDERER_ORG)
    orderer_identity = orderer_ca.issue_identity(spec.orderer_id, Role.ORDERER)
    orderer_ca.save(root / "cas" / f"{ORDERER_ORG}.ca")
    save_identity(root / "wallets", orderer_identity)

    first_org = next(iter(spec.orgs))
    for org_id, peer_ids in spec.orgs.items():
        ca = CertificateAuthority(org_id)
        for peer_id in peer_ids:
            save_identity(root / "wallets", ca.issue_identity(peer_id, Role.PEER))
        if org_id == first_org:  # the web/operator client lives in the first org
            save_identity(
                root / "wallets",
                ca.issue_identity(f"web.{org_id.lower()}", Role.CLIENT),
            )
        ca.save(root / "cas" / f"{org_id}.ca")

    _dump_yaml(
        root / "network.yaml",
        {
            "orderer_id": spec.orderer_id,
            "orgs": [
                {"org_id": org, "peers": list(peers)}
                for org, peers in spec.orgs.items()
            ],
        },
    )
    return NetworkStore.open(root)


def issue_identity_cmd(root: str | Path, org_id: str, subject_id: str, role: str) -> Path:
    store = NetworkStore.open(root)
    ca = store.ca(org_id)
    identity = ca.issue_identity(subject_id, Role(role))
    store.save_ca(ca)
    return save_identity(store.root / "wallets", identity)


def create_channel_cmd(
    root: str | Path,
    name: str,
    members: list[str],
    orderer_config: OrdererConfig,
) -> Block:
    """Step 3a: channel genesis block, persisted."""
    store = NetworkStore.open(root)
    unknown = [m for m in members if m not in store.spec.orgs]
    if unknown:
        raise StoreError(f"unknown member orgs: {unknown}")
    channel_dir = store.channel_dir(name)
    if channel_dir.exists():
        raise StoreError(f"channel {name!r} already exists")
    config = ChannelConfig(
        name=name,
        member_orgs=tuple(members),
        orderer_config=orderer_config,
        org_roots=store.org_roots(tuple(members)),
        orderer_org=ORDERER_ORG,
    )
    orderer_identity = store.wallet(store.orderer_id)
    tx = Transaction(
        channel=name,
        chaincode=CONFIG_CHAINCODE,
        function="genesis",
        args=[config.encode().hex()],
        creator=orderer_identity.certificate,
        nonce=new_nonce(),
        read_set=[],
        write_set=[],
    )
    tx.client_signature = orderer_identity.sign(tx.signing_payload())
    genesis = Block.build(0, ZERO_HASH, [tx], CutReason.GENESIS)
    channel_dir.mkdir(parents=True)
    from .ledger import encode_block_file

    (channel_dir / "genesis.blk").write_bytes(encode_block_file(genesis))
    store.save_lifecycle(
        name,
        {"members": list(members), "joined": [], "anchors": {}, "chaincodes": {}},
    )
    return genesis


def join_peer_cmd(root: str | Path, channel: str, peer_id: str) -> None:
    store = NetworkStore.open(root)
    doc = store.lifecycle(channel)
    org = store.org_of_peer(peer_id)
    if org not in doc["members"]:
        raise StoreError(f"org {org!r} is not a member of {channel!r}")
    if peer_id not in doc["joined"]:
        doc["joined"].append(peer_id)
    store.save_lifecycle(channel, doc)


def set_anchor_cmd(root: str | Path, channel: str, org_id: str, peer_id: str) -> None:
    store = NetworkStore.open(root)
    doc = store.lifecycle(channel)
    if org_id not in doc["members"]:
        raise StoreError(f"org {org_id!r} is not a member of {channel!r}")
    if store.org_of_peer(peer_id) != org_id:
        raise StoreError(f"peer {peer_id!r} does not belong to {org_id!r}")
    doc["anchors"][org_id] = peer_id
    store.save_lifecycle(channel, doc)


def approve_chaincode_cmd(
    root: str | Path, channel: str, org_id: str, name: str, version: str, sequence: int
) -> dict:
    """Step 4: record one org's approval of a definition."""
    store = NetworkStore.open(root)
    doc = store.lifecycle(channel)
    if org_id not in doc["members"]:
        raise StoreError(f"org {org_id!r} is not a member of {channel!r}")
    state = doc["chaincodes"].setdefault(
        name, {"committed": None, "pending": None, "approvals": []}
    )
    pending = state["pending"]
    definition = {"name": name, "version": version, "sequence": sequence}
    if pending == definition:
        if org_id not in state["approvals"]:
            state["approvals"].append(org_id)
    else:
        floor = max(
            (state["committed"] or {}).get("sequence", 0),
            (pending or {}).get("sequence", 0),
        )
        if sequence <= floor and (state["committed"] or pending):
            raise StoreError(f"redefinition must increase sequence past {floor}")
        state["pending"] = definition
        state["approvals"] = [org_id]
    store.save_lifecycle(channel, doc)
    return state


def commit_chaincode_cmd(root: str | Path, channel: str, name: str) -> dict:
    """Step 5: majority gate, then the definition becomes invocable."""
    store = NetworkStore.open(root)
    doc = store.lifecycle(channel)
    state = doc["chaincodes"].get(name)
    if not state or not state["pending"]:
        raise StoreError(f"no definition approved for {name!r}")
    needed = majority(len(doc["members"]))
    if len(state["approvals"]) < needed:
        raise StoreError(
            f"{name!r} has {len(state['approvals'])} approvals, needs {needed}"
        )
    state["committed"] = state["pending"]
    state["pending"] = None
    state["approvals"] = []
    store.save_lifecycle(channel, doc)
    return state


def network_status(root: str | Path) -> dict:
    store = NetworkStore.open(root)
    channels = {}
    for name in store.channels():
        doc = store.lifecycle(name)
        channels[name] = {
            "members": doc["members"],
            "joined": doc["joined"],
            "anchors": doc["anchors"],
            "chaincodes": {
                cc: {
                    "committed": st["committed"],
                    "pending": st["pending"],
                    "approvals": st["approvals"],
                }
                for cc, st in doc["chaincodes"].items()
            },
        }
    return {
        "orderer": store.orderer_id,
        "orgs": {org: list(peers) for org, peers in store.spec.orgs.items()},
        "channels": channels,
        "wallets": sorted(p.name for p in (store.root / "wallets").iterdir()),
    }


# --- serving: load everything back into a live network -----------------------------


def load_live_network(
    root: str | Path, clock, contracts: list[Contract] | None = None
) -> Network:
    store = NetworkStore.open(root)
    contracts = contracts if contracts is not None else standard_contracts()
    net = Network(clock, data_root=store.root / "peers")
    net._orderer_org = None  # filled below via loaded CA

    from .identity import Organization

    orderer_ca = store.ca(ORDERER_ORG)
    net._orderer_org = Organization(ORDERER_ORG, orderer_ca, set())
    net.orderer = Orderer(clock, store.wallet(store.orderer_id))
    for org_id, peer_ids in store.spec.orgs.items():
        net.orgs[org_id] = Organization(org_id, store.ca(org_id), set(peer_ids))
        net.org_peers[org_id] = list(peer_ids)
        for peer_id in peer_ids:
            peer = Peer(peer_id, store.wallet(peer_id), clock, store.root / "peers" / peer_id)
            for contract in contracts:
                peer.install(contract)
            net.peers[peer_id] = peer

    for name in store.channels():
        doc = store.lifecycle(name)
        genesis = decode_block_file(
            (store.channel_dir(name) / "genesis.blk").read_bytes()
        )
        config = ChannelConfig.decode(bytes.fromhex(genesis.transactions[0].args[0]))
        orderer_chain_dir = store.root / "orderer" / name
        chain = load_chain(orderer_chain_dir) if orderer_chain_dir.exists() else []
        net.orderer.create_lane(
            config, genesis, chain or [genesis], blocks_dir=orderer_chain_dir
        )
        from .network import Channel, _ChaincodeState
        from .config import ChaincodeDefinition

        channel = Channel(config=config, genesis=genesis)
        for cc_name, st in doc["chaincodes"].items():
            state = _ChaincodeState()
            if st["committed"]:
                state.active = ChaincodeDefinition(
                    name=cc_name,
                    version=st["committed"]["version"],
                    sequence=st["committed"]["sequence"],
                )
            if st["pending"]:
                state.pending = ChaincodeDefinition(
                    name=cc_name,
                    version=st["pending"]["version"],
                    sequence=st["pending"]["sequence"],
                )
                state.approvals = set(st["approvals"])
            channel.chaincodes[cc_name] = state
        net.channels[name] = channel
        for org_id, peer_id in doc["anchors"].items():
            config.anchor_peers[org_id] = peer_id
        for peer_id in doc["joined"]:
            net.peers[peer_id].join_channel(
                config,
                net.orderer,
                channel.committed_names(),
                channel.required_overrides(),
            )
            channel.joined.append(peer_id)
    return net
