import random

import pytest

from fleetledger.clock import LogicalClock, s_to_ns
from fleetledger.config import OrdererConfig
from fleetledger.ledger import CutReason, ValidationCode
from fleetledger.orderer import Orderer, OrdererError

from helpers import ChannelWorld
from oracles import MAX_MESSAGES, TIMEOUT, expected_cuts

MS = 1_000_000  # ns


def make_orderer(world, clock):
    orderer = Orderer(clock, world.orderer_identity)
    orderer.create_lane(world.config, world.genesis())
    return orderer


def collect(clock, orderer, channel, skip_genesis=True):
    cuts = []

    def on_block(block):
        if skip_genesis and block.cut_reason is CutReason.GENESIS:
            return
        cuts.append(
            (clock.now_ns(), len(block.transactions), block.cut_reason.value)
        )

    orderer.deliver(channel, 0, on_block)
    return cuts


def run_trace(arrivals_ns, orderer_config, n_orgs=2):
    """Drive scheduled submissions through an orderer on a logical clock."""
    world = ChannelWorld(orderer_config=orderer_config)
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    cuts = collect(clock, orderer, world.channel)
    sizes = []
    for when in arrivals_ns:
        tx = world.make_tx()
        sizes.append(len(tx.encode()))
        clock.call_at(when, orderer.submit, tx)
    clock.run_until_idle()
    return cuts, sizes


def test_five_submissions_cut_at_fifth_arrival():
    # Table row "5 / 5": block size matches Max Messages.
    arrivals = [i * MS for i in range(5)]
    cuts, _ = run_trace(arrivals, OrdererConfig(5.0, 5))
    assert cuts == [(4 * MS, 5, MAX_MESSAGES)]


def test_lone_tx_commits_at_first_arrival_plus_timeout():
    cuts, _ = run_trace([3 * MS], OrdererConfig(5.0, 5))
    assert cuts == [(3 * MS + s_to_ns(5.0), 1, TIMEOUT)]


def test_spec_trace_four_then_two():
    # arrivals at 0,1,2,3,8,9 ms with M=4, BT=5 s:
    # block of 4 at 3 ms (max_messages), block of 2 at 5.008 s (timeout).
    arrivals = [0, 1 * MS, 2 * MS, 3 * MS, 8 * MS, 9 * MS]
    cuts, _ = run_trace(arrivals, OrdererConfig(5.0, 4))
    assert cuts == [
        (3 * MS, 4, MAX_MESSAGES),
        (8 * MS + s_to_ns(5.0), 2, TIMEOUT),
    ]


def test_timeout_flush_smaller_than_max():
    cuts, _ = run_trace([0, MS, 2 * MS], OrdererConfig(0.5, 100))
    assert cuts == [(s_to_ns(0.5), 3, TIMEOUT)]


def test_queue_of_seven_with_max_five_cuts_then_rearms():
    world = ChannelWorld(orderer_config=OrdererConfig(5.0, 5))
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    cuts = collect(clock, orderer, world.channel)
    for _ in range(7):  # queued before the sequencer runs: queue reaches 7
        orderer.submit(world.make_tx())
    assert orderer.pending_count(world.channel) == 7
    clock.run_ready()
    assert cuts == [(0, 5, MAX_MESSAGES)]
    assert orderer.pending_count(world.channel) == 2
    clock.run_until_idle()
    assert cuts[1] == (s_to_ns(5.0), 2, TIMEOUT)


def test_byte_cap_cuts_after_crossing_tx():
    world = ChannelWorld()
    probe = world.make_tx()
    size = len(probe.encode())
    # cap between one and two tx encodings: the second crosses it
    cap = int(size * 1.7)
    config = OrdererConfig(5.0, 100, max_batch_bytes=cap)
    arrivals = [0, MS, 2 * MS]
    cuts, sizes = run_trace(arrivals, config)
    assert cuts[0][1] == 2 and cuts[0][2] == MAX_MESSAGES
    assert cuts == expected_cuts(arrivals, s_to_ns(5.0), 100, cap, sizes)


def test_unknown_channel_rejected():
    world = ChannelWorld()
    orderer = make_orderer(world, LogicalClock())
    tx = world.make_tx()
    tx.channel = "nope"
    result = orderer.submit(tx)
    assert not result and "unknown channel" in result.reason


def test_non_member_rejected_with_code():
    world = ChannelWorld()
    orderer = make_orderer(world, LogicalClock())
    result = orderer.submit(world.make_tx(creator=world.outsider))
    assert not result
    assert result.code is ValidationCode.NOT_A_MEMBER


def test_duplicate_channel_lane_rejected():
    world = ChannelWorld()
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    with pytest.raises(OrdererError):
        orderer.create_lane(world.config, world.genesis())


def test_two_subscribers_same_sequence_and_late_subscriber():
    world = ChannelWorld(orderer_config=OrdererConfig(0.1, 3))
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    seen_a, seen_b = [], []
    orderer.deliver(world.channel, 0, lambda b: seen_a.append(b.encode()))
    for i in range(7):
        clock.call_at(i * MS, orderer.submit, world.make_tx())
    clock.run_until_idle()
    orderer.deliver(world.channel, 0, lambda b: seen_b.append(b.encode()))
    assert seen_a == seen_b  # byte equality, full history replayed
    assert len(seen_a) == 1 + 3  # genesis + ceil(7/3) blocks... 2 full + 1 flush


def test_delivery_from_future_block_waits():
    world = ChannelWorld(orderer_config=OrdererConfig(0.05, 10))
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    seen = []
    orderer.deliver(world.channel, 2, seen.append)
    orderer.submit(world.make_tx())
    clock.run_until_idle()
    assert seen == []  # block 1 cut, but subscriber starts at 2
    orderer.submit(world.make_tx())
    clock.run_until_idle()
    assert [b.header.number for b in seen] == [2]


def test_fifo_order_preserved_under_load():
    world = ChannelWorld(orderer_config=OrdererConfig(0.02, 9))
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    delivered = []
    orderer.deliver(
        world.channel,
        1,
        lambda b: delivered.extend(tx.tx_id for tx in b.transactions),
    )
    submitted = []
    rng = random.Random(11)
    when = 0
    for _ in range(1000):
        when += rng.randrange(0, 3 * MS)
        tx = world.make_tx()
        submitted.append(tx.tx_id)
        clock.call_at(when, orderer.submit, tx)
    clock.run_until_idle()
    assert delivered == submitted


def test_latency_equals_timeout_when_arrivals_sparse():
    # inter-arrival > batch timeout -> per-tx latency is exactly BT
    bt = OrdererConfig(0.25, 100)
    world = ChannelWorld(orderer_config=bt)
    clock = LogicalClock()
    orderer = make_orderer(world, clock)
    latencies = []

    def on_block(block):
        if block.cut_reason is CutReason.GENESIS:
            return
        for tx in block.transactions:
            latencies.append(clock.now_ns() - tx.submit_time)

    orderer.deliver(world.channel, 0, on_block)
    for i in range(5):
        when = i * s_to_ns(1.0)
        tx = world.make_tx(submit_time=when)
        clock.call_at(when, orderer.submit, tx)
    clock.run_until_idle()
    assert latencies == [s_to_ns(0.25)] * 5


@pytest.mark.parametrize("seed", range(5))
def test_randomized_traces_match_des_oracle(seed):
    rng = random.Random(seed)
    bt_s = rng.choice([0.01, 0.05, 0.3, 2.0])
    m = rng.choice([1, 2, 5, 20])
    n = rng.randrange(1, 60)
    arrivals, t = [], 0
    for _ in range(n):
        t += rng.randrange(0, s_to_ns(0.4))
        arrivals.append(t)
    cuts, _ = run_trace(arrivals, OrdererConfig(bt_s, m))
    assert cuts == expected_cuts(arrivals, s_to_ns(bt_s), m)
    assert all(1 <= count <= m for _, count, _ in cuts)
