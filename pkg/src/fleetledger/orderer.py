"""Solo ordering service: FIFO queues, batch timeout and max-message cuts.

One orderer carries every channel, each in its own lane. Blocks are cut
when the queue reaches the configured message count (or crosses the byte
cap), or when the batch timeout expires, counted from the moment the queue
went non-empty. All cutting and delivery run on the clock's worker, so
subscribers on a channel observe one total order.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

from .clock import TimerHandle
from .codec import ZERO_HASH
from .config import ChannelConfig
from .identity import Identity, verify_identity
from .ledger import Block, CutReason, Transaction, ValidationCode

log = logging.getLogger(__name__)


class OrdererError(Exception):
    pass


@dataclass(frozen=True)
class SubmitResult:
    accepted: bool
    reason: str = ""
    code: ValidationCode | None = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPTED = SubmitResult(True)


class _Lane:
    """Per-channel queue, timer and chain tip. Guarded by its own lock."""

    def __init__(self, config: ChannelConfig, chain: list[Block], blocks_dir=None) -> None:
        self.config = config
        self.blocks: list[Block] = list(chain)
        self.blocks_dir = blocks_dir
        self.queue: list[tuple[Transaction, int]] = []
        self.queue_bytes = 0
        self.first_arrival: int | None = None
        self.timer: TimerHandle | None = None
        self.cut_pending = False
        self.subscribers: list = []  # (from_block, callback)
        self.lock = threading.Lock()

    def tip_hash(self) -> bytes:
        return self.blocks[-1].header.hash() if self.blocks else ZERO_HASH

    def persist(self, block: Block) -> None:
        if self.blocks_dir is not None:
            from .ledger import encode_block_file

            path = self.blocks_dir / f"{block.header.number}.blk"
            path.write_bytes(encode_block_file(block))


class Orderer:
    """Single sequencing node; the whole network runs exactly one."""

    def __init__(self, clock, identity: Identity) -> None:
        self.clock = clock
        self.identity = identity
        self._lanes: dict[str, _Lane] = {}
        # Outer lock for delivery fan-out and subscription catch-up; always
        # taken before any lane lock.
        self._dispatch_lock = threading.RLock()

    # --- channel management -------------------------------------------------

    def create_lane(
        self,
        config: ChannelConfig,
        genesis: Block,
        chain: list[Block] | None = None,
        blocks_dir=None,
    ) -> None:
        """Open a channel lane from its genesis (or a restored chain)."""
        if config.name in self._lanes:
            raise OrdererError(f"channel {config.name!r} already exists")
        blocks = chain if chain else [genesis]
        if blocks_dir is not None:
            blocks_dir.mkdir(parents=True, exist_ok=True)
        lane = _Lane(config, blocks, blocks_dir)
        if blocks_dir is not None:
            for block in blocks:
                path = blocks_dir / f"{block.header.number}.blk"
                if not path.exists():
                    lane.persist(block)
        self._lanes[config.name] = lane

    def channels(self) -> list[str]:
        return sorted(self._lanes)

    def chain(self, channel: str) -> list[Block]:
        lane = self._lane(channel)
        with lane.lock:
            return list(lane.blocks)

    def _lane(self, channel: str) -> _Lane:
        try:
            return self._lanes[channel]
        except KeyError:
            raise OrdererError(f"unknown channel {channel!r}") from None

    # --- ingress ------------------------------------------------------------

    def submit(self, tx: Transaction) -> SubmitResult:
        lane = self._lanes.get(tx.channel)
        if lane is None:
            return SubmitResult(False, f"unknown channel {tx.channel!r}")
        config = lane.config
        if not config.is_member_org(tx.creator.org_id) or not verify_identity(
            tx.creator, config.org_roots
        ):
            return SubmitResult(
                False, "creator is not a channel member", ValidationCode.NOT_A_MEMBER
            )
        size = len(tx.encode())
        with lane.lock:
            lane.queue.append((tx, size))
            lane.queue_bytes += size
            if len(lane.queue) == 1:
                lane.first_arrival = self.clock.now_ns()
                lane.timer = self.clock.call_at(
                    lane.first_arrival + config.orderer_config.batch_timeout_ns,
                    self._on_timeout,
                    lane,
                )
            if self._cut_condition(lane) and not lane.cut_pending:
                lane.cut_pending = True
                self.clock.call_later(0, self._cut, lane, CutReason.MAX_MESSAGES)
        return ACCEPTED

    @staticmethod
    def _cut_condition(lane: _Lane) -> bool:
        cfg = lane.config.orderer_config
        if len(lane.queue) >= cfg.max_message_count:
            return True
        return cfg.max_batch_bytes is not None and lane.queue_bytes > cfg.max_batch_bytes

    # --- cutting ------------------------------------------------------------

    def _on_timeout(self, lane: _Lane) -> None:
        self._cut(lane, CutReason.TIMEOUT)

    def _cut(self, lane: _Lane, reason: CutReason) -> None:
        """Cut one block (or several, if the queue ran ahead) and deliver."""
        with self._dispatch_lock:
            while True:
                with lane.lock:
                    lane.cut_pending = False
                    batch = self._take_batch(lane)
                    if batch is None:
                        return
                    block = Block.build(
                        number=len(lane.blocks),
                        prev_hash=lane.tip_hash(),
                        transactions=batch,
                        cut_reason=reason,
                    )
                    lane.blocks.append(block)
                    lane.persist(block)
                    if lane.timer is not None:
                        lane.timer.cancel()
                        lane.timer = None
                    if lane.queue:
                        # Remainder starts a fresh batching window at the cut.
                        lane.first_arrival = self.clock.now_ns()
                        lane.timer = self.clock.call_at(
                            lane.first_arrival
                            + lane.config.orderer_config.batch_timeout_ns,
                            self._on_timeout,
                            lane,
                        )
                    else:
                        lane.first_arrival = None
                    more = self._cut_condition(lane)
                    subscribers = list(lane.subscribers)
                self._deliver(block, subscribers)
                if not more:
                    return
                reason = CutReason.MAX_MESSAGES

    def _take_batch(self, lane: _Lane) -> list[Transaction] | None:
        """Pop up to max_message_count txs; the byte cap closes the batch
        with the transaction that crosses it."""
        if not lane.queue:
            return None  # spurious timer wake
        cfg = lane.config.orderer_config
        batch: list[Transaction] = []
        taken_bytes = 0
        while lane.queue and len(batch) < cfg.max_message_count:
            tx, size = lane.queue.pop(0)
            batch.append(tx)
            taken_bytes += size
            lane.queue_bytes -= size
            if cfg.max_batch_bytes is not None and taken_bytes > cfg.max_batch_bytes:
                break
        return batch

    def cut_now(self, channel: str) -> None:
        """Administrative flush of a channel's pending queue."""
        self._cut(self._lane(channel), CutReason.TIMEOUT)

    # --- delivery -----------------------------------------------------------

    def _deliver(self, block: Block, subscribers: list) -> None:
        for from_block, callback in subscribers:
            if block.header.number >= from_block:
                try:
                    callback(block)
                except Exception:
                    log.exception("delivery callback failed")

    def deliver(self, channel: str, from_block: int, callback) -> None:
        """Subscribe to the channel's block stream.

        The callback first receives every existing block numbered
        >= from_block (catch-up), then each new block exactly once, in
        order. A from_block beyond the tip simply waits.
        """
        lane = self._lane(channel)
        with self._dispatch_lock:
            with lane.lock:
                backlog = [b for b in lane.blocks if b.header.number >= from_block]
                lane.subscribers.append((from_block, callback))
            for block in backlog:
                callback(block)

    def pending_count(self, channel: str) -> int:
        lane = self._lane(channel)
        with lane.lock:
            return len(lane.queue)
