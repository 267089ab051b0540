"""Channel and ordering configuration shared across modules.

The channel config is what the genesis block carries: membership (including
each org's root public key, so a peer joining from block 0 can verify
everything that follows), the ordering parameters and the endorsement
policy. The only policy kind is majority-of-orgs, which for the default
two-org network means both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clock import s_to_ns
from .codec import Decoder, Encoder

POLICY_MAJORITY = "MajorityOrgs"


class ConfigError(ValueError):
    pass


def majority(n_orgs: int) -> int:
    """ceil((n + 1) / 2): strictly more than half."""
    return (n_orgs + 2) // 2


@dataclass(frozen=True)
class OrdererConfig:
    batch_timeout_s: float = 2.0
    max_message_count: int = 10
    max_batch_bytes: int | None = None

    def __post_init__(self) -> None:
        if self.batch_timeout_s <= 0:
            raise ConfigError("batch_timeout_s must be > 0")
        if self.max_message_count < 1:
            raise ConfigError("max_message_count must be >= 1")
        if self.max_batch_bytes is not None and self.max_batch_bytes < 1:
            raise ConfigError("max_batch_bytes must be >= 1 when set")

    @property
    def batch_timeout_ns(self) -> int:
        return s_to_ns(self.batch_timeout_s)

    def encode(self) -> bytes:
        return (
            Encoder()
            .f64(self.batch_timeout_s)
            .u64(self.max_message_count)
            .boolean(self.max_batch_bytes is not None)
            .u64(self.max_batch_bytes or 0)
            .done()
        )

    @classmethod
    def read_from(cls, dec: Decoder) -> "OrdererConfig":
        bt = dec.f64()
        max_msgs = dec.u64()
        has_cap = dec.boolean()
        cap = dec.u64()
        return cls(bt, max_msgs, cap if has_cap else None)


@dataclass(frozen=True)
class ChannelConfig:
    name: str
    member_orgs: tuple[str, ...]
    orderer_config: OrdererConfig
    org_roots: dict[str, bytes]  # org_id -> root public key, orderer org included
    orderer_org: str
    endorsement_policy: str = POLICY_MAJORITY
    anchor_peers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.member_orgs:
            raise ConfigError("channel needs at least one member org")
        if self.endorsement_policy != POLICY_MAJORITY:
            raise ConfigError(f"unknown endorsement policy {self.endorsement_policy!r}")
        missing = [o for o in self.member_orgs if o not in self.org_roots]
        if missing:
            raise ConfigError(f"missing root keys for orgs: {missing}")
        if self.orderer_org not in self.org_roots:
            raise ConfigError("missing root key for orderer org")

    def required_endorsing_orgs(self) -> int:
        return majority(len(self.member_orgs))

    def is_member_org(self, org_id: str) -> bool:
        return org_id in self.member_orgs

    def encode(self) -> bytes:
        enc = (
            Encoder()
            .string(self.name)
            .count(len(self.member_orgs))
        )
        for org in self.member_orgs:
            enc.string(org)
        enc.raw(self.orderer_config.encode())
        enc.count(len(self.org_roots))
        for org in sorted(self.org_roots):
            enc.string(org).bytestr(self.org_roots[org])
        enc.string(self.orderer_org)
        enc.string(self.endorsement_policy)
        enc.count(len(self.anchor_peers))
        for org in sorted(self.anchor_peers):
            enc.string(org).string(self.anchor_peers[org])
        return enc.done()

    @classmethod
    def decode(cls, data: bytes) -> "ChannelConfig":
        dec = Decoder(data)
        name = dec.string()
        members = tuple(dec.string() for _ in range(dec.count()))
        orderer_config = OrdererConfig.read_from(dec)
        roots = {dec.string(): dec.bytestr() for _ in range(dec.count())}
        orderer_org = dec.string()
        policy = dec.string()
        anchors = {dec.string(): dec.string() for _ in range(dec.count())}
        dec.expect_end()
        return cls(
            name=name,
            member_orgs=members,
            orderer_config=orderer_config,
            org_roots=roots,
            orderer_org=orderer_org,
            endorsement_policy=policy,
            anchor_peers=anchors,
        )


@dataclass(frozen=True)
class ChaincodeDefinition:
    name: str
    version: str
    sequence: int = 1
    required_endorsing_orgs: int | None = None  # None -> channel majority

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("chaincode name must be non-empty")
        if self.sequence < 1:
            raise ConfigError("sequence starts at 1")


RESERVED_CHAINCODES = {"_config"}


__all__ = [
    "ChaincodeDefinition",
    "ChannelConfig",
    "ConfigError",
    "OrdererConfig",
    "POLICY_MAJORITY",
    "RESERVED_CHAINCODES",
    "majority",
]
