"""Rate-gated ledger recorders: one application per robot.

The generic recorder subscribes to a topic and writes an asset for a
message only when the gap since the last *recorded* message reaches
1/max_freq (first message always passes). The detection recorder writes one
object asset per unique (robot, object) detection, absorbing re-detections
("already exists") as benign skips.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .clock import NS_PER_S
from .client import ChannelClient, PendingTx
from .contracts import ContractError, object_asset_id, path_asset_id
from .ledger import ValidationCode
from .sim import DetectionMsg, PoseMsg, TopicBus

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecorderConfig:
    data_topic: str
    max_freq: float  # Hz, fractional allowed
    channel: str
    chaincode: str
    download_after_write: bool = False
    fire_and_forget: bool = False  # skip waiting for commit acknowledgment

    def __post_init__(self) -> None:
        if self.max_freq <= 0:
            raise ValueError("max_freq must be > 0")

    @property
    def period_ns(self) -> int:
        return round(NS_PER_S / self.max_freq)


@dataclass
class RecorderStats:
    recorded: int = 0  # messages that passed the gate and were submitted
    durable: int = 0  # VALID commit acknowledgments
    skipped_duplicates: int = 0
    failures: dict[str, int] = field(default_factory=dict)


class Recorder:
    """Algorithm-style low-frequency recorder for one topic."""

    def __init__(self, client: ChannelClient, config: RecorderConfig) -> None:
        if config.chaincode != client.chaincode:
            raise ValueError("client is bound to a different chaincode")
        self.client = client
        self.config = config
        self.stats = RecorderStats()
        self.last_recorded_ns: int | None = None  # -inf: first message records
        self.pending: list[PendingTx] = []
        self.last_download: bytes | None = None

    def attach(self, bus: TopicBus) -> None:
        bus.subscribe(self.config.data_topic, self.on_message)

    def gate(self, stamp_ns: int) -> bool:
        if (
            self.last_recorded_ns is not None
            and stamp_ns - self.last_recorded_ns < self.config.period_ns
        ):
            return False
        self.last_recorded_ns = stamp_ns  # moves only on recorded messages
        return True

    def on_message(self, msg) -> None:
        if not self.gate(msg.stamp):
            return
        self.record(msg)

    def record(self, msg) -> None:
        fields = self.to_asset(msg)
        try:
            pending = self.client.submit_transaction(
                "CreateAsset", [json.dumps(fields)], on_commit=self._on_commit
            )
        except ContractError as exc:
            if "already exists" in str(exc):
                self.stats.skipped_duplicates += 1
                log.debug("duplicate asset skipped: %s", fields.get("asset_id"))
                return
            raise
        self.stats.recorded += 1
        if not self.config.fire_and_forget:
            self.pending.append(pending)
        if self.config.download_after_write:
            self.last_download = self.client.evaluate("ReadAllAssets", [])

    def _on_commit(self, event) -> None:
        if event.validation_code is ValidationCode.VALID:
            self.stats.durable += 1
        else:
            name = event.validation_code.name
            self.stats.failures[name] = self.stats.failures.get(name, 0) + 1

    def unresolved(self) -> int:
        self.pending = [p for p in self.pending if not p.done]
        return len(self.pending)

    def to_asset(self, msg) -> dict:
        raise NotImplementedError


class PathRecorder(Recorder):
    """PoseMsg -> path asset, sequence numbers per robot."""

    def __init__(self, client: ChannelClient, config: RecorderConfig, owner_org: str) -> None:
        super().__init__(client, config)
        self.owner_org = owner_org
        self._seq = 0

    def to_asset(self, msg: PoseMsg) -> dict:
        self._seq += 1
        return {
            "asset_id": path_asset_id(msg.robot_id, self._seq),
            "robot_id": msg.robot_id,
            "x": msg.x,
            "y": msg.y,
            "z": msg.z,
            "yaw": msg.yaw,
            "stamp": msg.stamp,
            "owner_org": self.owner_org,
        }


class DetectionRecorder(Recorder):
    """DetectionMsg -> object asset per unique (robot, object) detection.

    Not rate gated: uniqueness is the filter. Re-detections of a key this
    recorder already wrote are dropped locally; races that slip through are
    absorbed by the contract's "already exists".
    """

    def __init__(self, client: ChannelClient, config: RecorderConfig, owner_org: str) -> None:
        super().__init__(client, config)
        self.owner_org = owner_org
        self._seq = 0
        self._seen: set[tuple[str, str]] = set()

    def on_message(self, msg: DetectionMsg) -> None:
        key = (msg.robot_id, msg.object_key)
        if key in self._seen:
            self.stats.skipped_duplicates += 1
            return
        self._seen.add(key)
        self.record(msg)

    def to_asset(self, msg: DetectionMsg) -> dict:
        self._seq += 1
        return {
            "asset_id": object_asset_id(msg.label, msg.robot_id, self._seq),
            "label": msg.label,
            "x": msg.x,
            "y": msg.y,
            "z": msg.z,
            "robot_id": msg.robot_id,
            "confidence": msg.confidence,
            "stamp": msg.stamp,
            "owner_org": self.owner_org,
        }
