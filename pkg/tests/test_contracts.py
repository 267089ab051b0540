import json

import pytest

from fleetledger.contracts import (
    CommandContract,
    ContractError,
    ObjectContract,
    PathContract,
    command_asset_id,
    default_coco_labels,
    format_seq,
    object_asset_id,
    path_asset_id,
)
from fleetledger.ledger import WorldState
from fleetledger.peer import TxSimulator


def path_fields(seq=1, robot="uav1", **over):
    fields = {
        "asset_id": path_asset_id(robot, seq),
        "robot_id": robot,
        "x": 1.0, "y": 2.0, "z": 0.0, "yaw": 0.5,
        "stamp": 1_000_000, "owner_org": "Org1",
    }
    fields.update(over)
    return fields


def object_fields(seq=1, label="banana", robot="uav1", **over):
    fields = {
        "asset_id": object_asset_id(label, robot, seq),
        "label": label, "x": 1.0, "y": 0.5, "z": 1.1,
        "robot_id": robot, "confidence": 0.8,
        "stamp": 2_000_000, "owner_org": "Org2",
    }
    fields.update(over)
    return fields


def command_fields(seq=1, **over):
    fields = {
        "asset_id": command_asset_id(seq),
        "robot_id": "dashgo",
        "waypoints": [[1.0, 2.0, 0.0]],
        "issued_by": "web.org1",
        "status": "pending",
        "stamp": 3_000_000,
        "owner_org": "Org1",
    }
    fields.update(over)
    return fields


class Runner:
    """Applies contract writes straight to a world state, versioned 0.n."""

    def __init__(self, contract):
        self.contract = contract
        self.state = WorldState()
        self._n = 0

    def invoke(self, function, *args):
        sim = TxSimulator(self.state, self.contract.key_prefix)
        payload = self.contract.invoke(sim, function, list(args))
        for key, value, is_delete in sim.write_set():
            if is_delete:
                self.state.entries.pop(key, None)
            else:
                self.state.entries[key] = (value, (0, self._n))
        self._n += 1
        return payload

    def create(self, fields):
        return self.invoke("CreateAsset", json.dumps(fields))


@pytest.fixture
def path():
    return Runner(PathContract())


@pytest.fixture
def objects():
    return Runner(ObjectContract())


@pytest.fixture
def commands():
    return Runner(CommandContract())


def test_create_fresh_then_duplicate(path):
    assert path.create(path_fields()) == b"ok"
    with pytest.raises(ContractError, match="already exists"):
        path.create(path_fields())


def test_fifty_creates_counted_by_read_all(path):
    for i in range(50):
        path.create(path_fields(seq=i))
    assets = json.loads(path.invoke("ReadAllAssets"))
    assert len(assets) == 50  # counting oracle


def test_read_all_sorted_regardless_of_insertion_order(path):
    path.create(path_fields(seq=2))
    path.create(path_fields(seq=1))
    ids = [a["asset_id"] for a in json.loads(path.invoke("ReadAllAssets"))]
    assert ids == sorted(ids)


def test_exists_lifecycle(path):
    key = path_asset_id("uav1", 1)
    assert path.invoke("AssetExists", key) == b"false"
    path.create(path_fields())
    assert path.invoke("AssetExists", key) == b"true"


def test_update_requires_existence(objects):
    with pytest.raises(ContractError, match="not found"):
        objects.invoke("UpdateAsset", json.dumps(object_fields()))
    objects.create(object_fields(confidence=0.5))
    objects.invoke("UpdateAsset", json.dumps(object_fields(confidence=0.9)))
    assets = json.loads(objects.invoke("ReadAllAssets"))
    assert assets[0]["confidence"] == 0.9


def test_transfer_returns_old_owner(objects):
    objects.create(object_fields(owner_org="Org1"))
    got = objects.invoke("TransferAsset", object_asset_id("banana", "uav1", 1), "Org2")
    assert got == b"Org1"
    assert json.loads(objects.invoke("ReadAllAssets"))[0]["owner_org"] == "Org2"


def test_transfer_absent_errors(objects):
    with pytest.raises(ContractError, match="not found"):
        objects.invoke("TransferAsset", object_asset_id("banana", "uav1", 9), "Org2")


def test_unknown_label_rejected(objects):
    assert "banana" in default_coco_labels()
    with pytest.raises(ContractError, match="unknown label"):
        objects.create(object_fields(label="gizmo", asset_id="obj~gizmo~uav1~000001"))


def test_confidence_bounds(objects):
    with pytest.raises(ContractError, match="confidence"):
        objects.create(object_fields(confidence=1.2))


def test_prefix_guard_blocks_cross_contract_keys(path):
    with pytest.raises(ContractError, match="must start with 'path~'"):
        path.create(path_fields(asset_id="obj~banana~uav1~000001"))
    # the simulator guard backstops even hand-written contract code
    sim = TxSimulator(path.state, PathContract.key_prefix)
    with pytest.raises(ContractError, match="namespace"):
        sim.get("cmd~000001")
    with pytest.raises(ContractError, match="namespace"):
        sim.put("obj~banana~uav1~000001", b"{}")


def test_command_lifecycle_and_pending_queue(commands):
    commands.invoke("CreateCommand", json.dumps(command_fields(seq=1)))
    pending = json.loads(commands.invoke("ReadPendingCommands", "dashgo"))
    assert [c["asset_id"] for c in pending] == [command_asset_id(1)]
    commands.invoke("SetCommandStatus", command_asset_id(1), "executing")
    assert json.loads(commands.invoke("ReadPendingCommands", "dashgo")) == []
    commands.invoke("SetCommandStatus", command_asset_id(1), "done")
    all_assets = json.loads(commands.invoke("ReadAllAssets"))
    assert all_assets[0]["status"] == "done"


def test_command_illegal_transitions(commands):
    commands.invoke("CreateCommand", json.dumps(command_fields(seq=1)))
    with pytest.raises(ContractError, match="illegal"):
        commands.invoke("SetCommandStatus", command_asset_id(1), "done")
    commands.invoke("SetCommandStatus", command_asset_id(1), "executing")
    commands.invoke("SetCommandStatus", command_asset_id(1), "done")
    with pytest.raises(ContractError, match="illegal"):
        commands.invoke("SetCommandStatus", command_asset_id(1), "pending")


def test_commands_fifo_by_sequence(commands):
    commands.invoke("CreateCommand", json.dumps(command_fields(seq=2)))
    commands.invoke("CreateCommand", json.dumps(command_fields(seq=1)))
    pending = json.loads(commands.invoke("ReadPendingCommands", "dashgo"))
    assert [c["asset_id"] for c in pending] == [
        command_asset_id(1),
        command_asset_id(2),
    ]


def test_command_needs_waypoints(commands):
    with pytest.raises(ContractError, match="waypoint"):
        commands.invoke("CreateCommand", json.dumps(command_fields(waypoints=[])))


def test_created_commands_start_pending(commands):
    with pytest.raises(ContractError, match="created pending"):
        commands.invoke("CreateCommand", json.dumps(command_fields(status="executing")))


def test_field_validation_messages(path):
    with pytest.raises(ContractError, match="missing field"):
        path.create({k: v for k, v in path_fields().items() if k != "yaw"})
    with pytest.raises(ContractError, match="unknown fields"):
        path.create(path_fields(extra=1))
    with pytest.raises(ContractError, match="must be a number"):
        path.create(path_fields(x="far away"))
    with pytest.raises(ContractError, match="finite"):
        path.create(path_fields(x=float("inf")))


def test_seq_formatting():
    assert format_seq(7) == "000007"
    assert path_asset_id("uav1", 42) == "path~uav1~000042"
    with pytest.raises(ContractError):
        format_seq(1_000_000)


def test_exists_false_after_tombstone_delete(path):
    # deletes ride in the write_set as tombstones (update/transfer plumbing)
    path.create(path_fields())
    key = path_asset_id("uav1", 1)
    assert path.invoke("AssetExists", key) == b"true"
    sim = TxSimulator(path.state, PathContract.key_prefix)
    sim.delete(key)
    for k, value, is_delete in sim.write_set():
        assert is_delete
        path.state.entries.pop(k, None)
    assert path.invoke("AssetExists", key) == b"false"
