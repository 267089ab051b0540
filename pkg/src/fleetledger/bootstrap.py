"""Canonical five-step bring-up used by the CLI, bench and demos.

1. create the orderer and the organizations (certificates included)
2. (genesis material is implicit: org roots travel in the channel config)
3. create the channel genesis, join every peer, set anchor peers
4. approve the chaincode definitions for every org (after install)
5. commit the definitions, after which invocation is allowed

Also issues the operator/web client identity (from the first org) and one
application identity per robot when asked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import ChaincodeDefinition, OrdererConfig
from .contracts import Contract, standard_contracts
from .identity import Identity
from .network import Channel, Network, NetworkSpec

DEFAULT_CHANNEL = "fleet"


@dataclass
class Stack:
    network: Network
    channel: Channel
    web_identity: Identity
    app_identities: dict[str, Identity] = field(default_factory=dict)

    @property
    def channel_name(self) -> str:
        return self.channel.name


def standard_network(
    clock,
    spec: NetworkSpec | None = None,
    channel_name: str = DEFAULT_CHANNEL,
    orderer_config: OrdererConfig | None = None,
    contracts: list[Contract] | None = None,
    data_root=None,
    app_subjects: dict[str, str] | None = None,
) -> Stack:
    """Bring up the default two-org network ready to invoke.

    app_subjects maps subject_id -> org_id for per-robot application
    identities (one application per robot, each its own network client).
    """
    spec = spec or NetworkSpec.default()
    orderer_config = orderer_config or OrdererConfig(
        batch_timeout_s=2.0, max_message_count=10
    )
    contracts = contracts if contracts is not None else standard_contracts()

    net = Network.bring_up(spec, clock, data_root)
    members = list(spec.orgs)
    net.create_channel(channel_name, members, orderer_config)
    for org_id, peer_ids in spec.orgs.items():
        for peer_id in peer_ids:
            net.join_peer(channel_name, peer_id)
        net.set_anchor_peer(channel_name, org_id, peer_ids[0])
    for peer_ids in spec.orgs.values():
        for peer_id in peer_ids:
            for contract in contracts:
                net.install_contract(peer_id, contract)
    for contract in contracts:
        definition = ChaincodeDefinition(name=contract.name, version=contract.version)
        for org_id in members:
            net.approve_chaincode(channel_name, org_id, definition)
        net.commit_chaincode(channel_name, contract.name)

    web_identity = net.issue_client_identity(members[0], f"web.{members[0].lower()}")
    stack = Stack(
        network=net, channel=net.channels[channel_name], web_identity=web_identity
    )
    for subject, org in (app_subjects or {}).items():
        stack.app_identities[subject] = net.issue_client_identity(org, subject)
    return stack
