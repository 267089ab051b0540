"""Desk-scale permissioned ledger for robot fleets.

A miniature execute-order-validate blockchain (identities, channels,
chaincode lifecycle, solo orderer with batch-timeout / max-message block
cutting, MVCC world state), the inventory-mission smart contracts, a
deterministic two-robot fleet simulation wired to the ledger through
rate-gated recorders, a stress-test harness, and an operator gateway.
"""

from .clock import LogicalClock, WallClock, NS_PER_S, s_to_ns
from .config import ChaincodeDefinition, ChannelConfig, OrdererConfig
from .contracts import (
    CommandContract,
    Contract,
    ContractError,
    ObjectContract,
    PathContract,
    standard_contracts,
)
from .identity import Identity, Role, create_ca, load_identity, save_identity
from .ledger import (
    Block,
    CutReason,
    Ledger,
    Transaction,
    ValidationCode,
    WorldState,
    replay,
)
from .network import Network, NetworkError, NetworkSpec
from .orderer import Orderer
from .peer import CommitEvent, Peer, Proposal
from .client import ChannelClient

__version__ = "0.1.0"

__all__ = [
    "Block",
    "ChaincodeDefinition",
    "ChannelClient",
    "ChannelConfig",
    "CommandContract",
    "CommitEvent",
    "Contract",
    "ContractError",
    "CutReason",
    "Identity",
    "Ledger",
    "LogicalClock",
    "Network",
    "NetworkError",
    "NetworkSpec",
    "NS_PER_S",
    "ObjectContract",
    "Orderer",
    "OrdererConfig",
    "PathContract",
    "Peer",
    "Proposal",
    "Role",
    "Transaction",
    "ValidationCode",
    "WallClock",
    "WorldState",
    "create_ca",
    "load_identity",
    "replay",
    "s_to_ns",
    "save_identity",
    "standard_contracts",
]
