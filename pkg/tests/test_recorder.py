import json
import random

import pytest

from fleetledger.bootstrap import standard_network
from fleetledger.clock import LogicalClock, NS_PER_S, s_to_ns
from fleetledger.client import ChannelClient
from fleetledger.config import OrdererConfig
from fleetledger.recorder import (
    DetectionRecorder,
    PathRecorder,
    Recorder,
    RecorderConfig,
)
from fleetledger.sim import DetectionMsg, PoseMsg, TopicBus

from oracles import expected_recorded


class GateProbe(Recorder):
    """Recorder with the ledger swapped out: records stamps only."""

    def __init__(self, config: RecorderConfig) -> None:
        # bypass Recorder.__init__; only the gate is under test
        self.config = config
        self.last_recorded_ns = None
        self.taken = []

    def on_message(self, msg) -> None:
        if self.gate(msg.stamp):
            self.taken.append(msg.stamp)


def probe(max_freq):
    return GateProbe(
        RecorderConfig(
            data_topic="/t", max_freq=max_freq, channel="fleet", chaincode="path"
        )
    )


def pose(stamp):
    return PoseMsg("uav1", stamp, 0.0, 0.0, 0.0, 0.0)


def test_config_rejects_nonpositive_frequency():
    with pytest.raises(ValueError):
        RecorderConfig(data_topic="/t", max_freq=0.0, channel="c", chaincode="path")


def test_thirty_hz_gated_to_five_hz():
    # messages every 1/30 s for 2 s; 5 Hz gate records every 0.2 s exactly
    g = probe(5.0)
    stamps = [i * NS_PER_S // 30 for i in range(60)]
    for s in stamps:
        g.on_message(pose(s))
    assert g.taken == [i * NS_PER_S // 30 for i in range(0, 60, 6)]
    assert g.taken == expected_recorded(stamps, g.config.period_ns)


def test_point_two_hz_trajectory_gate():
    # pose topic at 10 Hz, 0.2 Hz gate -> one record every 5 s
    g = probe(0.2)
    stamps = [i * NS_PER_S // 10 for i in range(10 * 16)]  # 16 s
    for s in stamps:
        g.on_message(pose(s))
    assert g.taken == [0, 5 * NS_PER_S, 10 * NS_PER_S, 15 * NS_PER_S]


def test_single_message_then_silence_records_once():
    g = probe(5.0)
    g.on_message(pose(123_456))
    assert g.taken == [123_456]


def test_spec_trace_boundary_equality():
    # msgs at 0, 0.1, 0.2, 0.3 s with max_freq 5 -> {0, 0.2}: the 0.2 gap
    # passes (>=), the 0.1 gap after it does not
    g = probe(5.0)
    for s in (0, 100_000_000, 200_000_000, 300_000_000):
        g.on_message(pose(s))
    assert g.taken == [0, 200_000_000]


def test_gate_only_advances_on_recorded_messages():
    g = probe(1.0)  # 1 s period
    for s in (0, 600_000_000, 900_000_000, 1_100_000_000):
        g.on_message(pose(s))
    # 0 records; 0.6 and 0.9 rejected; 1.1 - 0 >= 1.0 records
    assert g.taken == [0, 1_100_000_000]


@pytest.mark.parametrize("seed", range(8))
def test_random_traces_match_gate_oracle(seed):
    rng = random.Random(seed)
    max_freq = rng.choice([0.2, 1.0, 5.0, 7.3, 30.0])
    g = probe(max_freq)
    stamps, t = [], 0
    for _ in range(rng.randrange(1, 400)):
        t += rng.randrange(0, 200_000_000)
        stamps.append(t)
    for s in stamps:
        g.on_message(pose(s))
    assert g.taken == expected_recorded(stamps, g.config.period_ns)
    for a, b in zip(g.taken, g.taken[1:]):
        assert b - a >= g.config.period_ns


# --- ledger-backed recorder behavior -------------------------------------------


@pytest.fixture
def stack():
    clock = LogicalClock()
    return standard_network(
        clock,
        orderer_config=OrdererConfig(batch_timeout_s=0.2, max_message_count=100),
        app_subjects={"uav1.app": "Org1", "dashgo.app": "Org2"},
    )


def make_path_recorder(stack, robot="uav1", max_freq=5.0, **cfg):
    identity = stack.app_identities[f"{robot}.app"]
    client = ChannelClient(stack.network, identity, stack.channel_name, "path")
    config = RecorderConfig(
        data_topic=f"/{robot}/pose",
        max_freq=max_freq,
        channel=stack.channel_name,
        chaincode="path",
        **cfg,
    )
    org = identity.org_id
    return PathRecorder(client, config, owner_org=org)


def test_recorder_writes_assets_and_counts_durable(stack):
    clock = stack.network.clock
    bus = TopicBus()
    rec = make_path_recorder(stack, max_freq=5.0)
    rec.attach(bus)
    for i in range(30):  # 1 s at 30 Hz
        bus.publish("/uav1/pose", pose(i * NS_PER_S // 30))
    clock.run_until(s_to_ns(2.0))
    assert rec.stats.recorded == 5  # 0, 0.2, 0.4, 0.6, 0.8
    assert rec.stats.durable == 5
    assert rec.unresolved() == 0
    assets = json.loads(rec.client.evaluate("ReadAllAssets", []))
    assert [a["asset_id"] for a in assets] == [
        f"path~uav1~{i:06d}" for i in range(1, 6)
    ]


def test_download_after_write(stack):
    clock = stack.network.clock
    bus = TopicBus()
    rec = make_path_recorder(stack, max_freq=5.0, download_after_write=True)
    rec.attach(bus)
    bus.publish("/uav1/pose", pose(0))
    clock.run_until(s_to_ns(1.0))
    assert rec.last_download is not None
    # the download happened right after submission, before commit: empty view
    assert json.loads(rec.last_download) == []
    bus.publish("/uav1/pose", pose(NS_PER_S))
    clock.run_until(s_to_ns(2.0))
    assert len(json.loads(rec.last_download)) == 1


def test_detection_recorder_dedupes_per_robot(stack):
    clock = stack.network.clock
    bus = TopicBus()
    recorders = {}
    for robot in ("uav1", "dashgo"):
        identity = stack.app_identities[f"{robot}.app"]
        client = ChannelClient(stack.network, identity, stack.channel_name, "object")
        rec = DetectionRecorder(
            client,
            RecorderConfig(
                data_topic=f"/{robot}/detections",
                max_freq=1000.0,
                channel=stack.channel_name,
                chaincode="object",
            ),
            owner_org=identity.org_id,
        )
        rec.attach(bus)
        recorders[robot] = rec

    def det(robot, stamp):
        return DetectionMsg(robot, stamp, "banana", "banana#0", 1.0, 2.0, 1.0, 0.8)

    bus.publish("/uav1/detections", det("uav1", 0))
    bus.publish("/uav1/detections", det("uav1", 1000))  # same pass, re-detection
    bus.publish("/dashgo/detections", det("dashgo", 2000))
    clock.run_until(s_to_ns(1.0))

    assert recorders["uav1"].stats.recorded == 1
    assert recorders["uav1"].stats.skipped_duplicates == 1
    assert recorders["dashgo"].stats.recorded == 1
    assets = json.loads(
        recorders["uav1"].client.evaluate("ReadAllAssets", [])
    )
    assert len(assets) == 2  # two robots -> two assets, distinct robot_id
    assert {a["robot_id"] for a in assets} == {"uav1", "dashgo"}
    assert len({a["asset_id"] for a in assets}) == 2


def test_recorder_requires_matching_chaincode(stack):
    identity = stack.app_identities["uav1.app"]
    client = ChannelClient(stack.network, identity, stack.channel_name, "object")
    with pytest.raises(ValueError, match="different chaincode"):
        PathRecorder(
            client,
            RecorderConfig(
                data_topic="/t", max_freq=1.0, channel=stack.channel_name, chaincode="path"
            ),
            owner_org="Org1",
        )
