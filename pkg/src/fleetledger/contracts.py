"""Smart contracts for the inventory mission: paths, objects, commands.

Each contract owns a key prefix in the shared world state and exposes the
five application functions (create, read-all, exists, update, transfer);
the command contract adds its pending-queue and status-machine functions.
Contract code is strictly deterministic: timestamps arrive as arguments and
nothing reads a clock or RNG, so every endorsing peer produces the same
read-write set at the same height.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from typing import Callable, Iterable

COMMAND_STATUSES = ("pending", "executing", "done")
_LEGAL_TRANSITIONS = {("pending", "executing"), ("executing", "done")}


class ContractError(Exception):
    """Surfaced to the client as an error proposal response."""


def default_coco_labels() -> frozenset[str]:
    text = (
        importlib.resources.files("fleetledger.data")
        .joinpath("coco_labels.txt")
        .read_text(encoding="utf-8")
    )
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def asset_json(fields: dict) -> bytes:
    """Fixed JSON projection: sorted keys, compact separators."""
    return json.dumps(fields, sort_keys=True, separators=(",", ":")).encode("utf-8")


def format_seq(n: int) -> str:
    """Zero-padded so lexical key order equals temporal order."""
    if not 0 <= n <= 999_999:
        raise ContractError(f"sequence {n} outside 6-digit range")
    return f"{n:06d}"


def path_asset_id(robot_id: str, seq: int) -> str:
    return f"path~{robot_id}~{format_seq(seq)}"


def object_asset_id(label: str, robot_id: str, seq: int) -> str:
    return f"obj~{label}~{robot_id}~{format_seq(seq)}"


def command_asset_id(seq: int) -> str:
    return f"cmd~{format_seq(seq)}"


def _require(fields: dict, spec: dict[str, type]) -> dict:
    if not isinstance(fields, dict):
        raise ContractError("asset payload must be a JSON object")
    unknown = set(fields) - set(spec)
    if unknown:
        raise ContractError(f"unknown fields: {sorted(unknown)}")
    out = {}
    for name, kind in spec.items():
        if name not in fields:
            raise ContractError(f"missing field {name!r}")
        value = fields[name]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ContractError(f"field {name!r} must be a number")
            value = float(value)
            if not math.isfinite(value):
                raise ContractError(f"field {name!r} must be finite")
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ContractError(f"field {name!r} must be an integer")
        elif not isinstance(value, kind):
            raise ContractError(f"field {name!r} must be {kind.__name__}")
        out[name] = value
    return out


def _parse_json_arg(args: list[str], what: str) -> dict:
    if len(args) != 1:
        raise ContractError(f"{what} takes one JSON argument")
    try:
        return json.loads(args[0])
    except json.JSONDecodeError as exc:
        raise ContractError(f"malformed JSON: {exc}") from exc


class Contract:
    """Base asset contract; subclasses define fields and extra functions.

    The stub passed to every function is the peer's transaction simulator:
    get/put/delete record the read-write set and refuse keys outside this
    contract's prefix.
    """

    name: str = ""
    version: str = "1.0"
    key_prefix: str = ""
    field_spec: dict[str, type] = {}

    def __init__(self) -> None:
        self._functions: dict[str, Callable] = {
            "CreateAsset": self.create_asset,
            "ReadAllAssets": self.read_all_assets,
            "AssetExists": self.asset_exists,
            "UpdateAsset": self.update_asset,
            "TransferAsset": self.transfer_asset,
        }

    def functions(self) -> list[str]:
        return sorted(self._functions)

    def invoke(self, stub, function: str, args: list[str]) -> bytes:
        fn = self._functions.get(function)
        if fn is None:
            raise ContractError(f"{self.name} has no function {function!r}")
        return fn(stub, list(args))

    # --- shared five functions -------------------------------------------

    def validate_fields(self, fields: dict) -> dict:
        checked = _require(fields, self.field_spec)
        asset_id = checked["asset_id"]
        if not asset_id.startswith(self.key_prefix):
            raise ContractError(
                f"asset_id must start with {self.key_prefix!r}, got {asset_id!r}"
            )
        return checked

    def create_asset(self, stub, args: list[str]) -> bytes:
        fields = self.validate_fields(_parse_json_arg(args, "CreateAsset"))
        key = fields["asset_id"]
        if stub.get(key) is not None:
            raise ContractError(f"asset {key!r} already exists")
        stub.put(key, asset_json(fields))
        return b"ok"

    def read_all_assets(self, stub, args: list[str]) -> bytes:
        if args:
            raise ContractError("ReadAllAssets takes no arguments")
        assets = [json.loads(value) for _, value, _ in stub.range(self.key_prefix)]
        return asset_json(assets)  # key-sorted by range order

    def asset_exists(self, stub, args: list[str]) -> bytes:
        if len(args) != 1:
            raise ContractError("AssetExists takes the asset id")
        return b"true" if stub.get(args[0]) is not None else b"false"

    def update_asset(self, stub, args: list[str]) -> bytes:
        fields = self.validate_fields(_parse_json_arg(args, "UpdateAsset"))
        key = fields["asset_id"]
        existing = stub.get(key)
        if existing is None:
            raise ContractError(f"asset {key!r} not found")
        self.check_update(json.loads(existing), fields)
        stub.put(key, asset_json(fields))
        return b"ok"

    def check_update(self, old: dict, new: dict) -> None:
        """Hook for contracts with update constraints (status machines)."""

    def transfer_asset(self, stub, args: list[str]) -> bytes:
        if len(args) != 2:
            raise ContractError("TransferAsset takes asset id and new owner org")
        key, new_owner = args
        existing = stub.get(key)
        if existing is None:
            raise ContractError(f"asset {key!r} not found")
        fields = json.loads(existing)
        old_owner = fields["owner_org"]
        fields["owner_org"] = new_owner
        stub.put(key, asset_json(fields))
        return old_owner.encode("utf-8")


class PathContract(Contract):
    """Trajectory samples: one asset per recorded pose."""

    name = "path"
    key_prefix = "path~"
    field_spec = {
        "asset_id": str,
        "robot_id": str,
        "x": float,
        "y": float,
        "z": float,
        "yaw": float,
        "stamp": int,
        "owner_org": str,
    }


class ObjectContract(Contract):
    """Detected objects of interest, labelled with configured categories."""

    name = "object"
    key_prefix = "obj~"
    field_spec = {
        "asset_id": str,
        "label": str,
        "x": float,
        "y": float,
        "z": float,
        "robot_id": str,
        "confidence": float,
        "stamp": int,
        "owner_org": str,
    }

    def __init__(self, labels: Iterable[str] | None = None) -> None:
        super().__init__()
        self.labels = frozenset(labels) if labels is not None else default_coco_labels()

    def validate_fields(self, fields: dict) -> dict:
        checked = super().validate_fields(fields)
        if checked["label"] not in self.labels:
            raise ContractError(f"unknown label {checked['label']!r}")
        if not 0.0 <= checked["confidence"] <= 1.0:
            raise ContractError("confidence must lie in [0, 1]")
        return checked


class CommandContract(Contract):
    """Waypoint commands with a pending -> executing -> done status machine."""

    name = "command"
    key_prefix = "cmd~"
    field_spec = {
        "asset_id": str,
        "robot_id": str,
        "waypoints": list,
        "issued_by": str,
        "status": str,
        "stamp": int,
        "owner_org": str,
    }

    def __init__(self) -> None:
        super().__init__()
        self._functions["CreateCommand"] = self.create_asset
        self._functions["ReadPendingCommands"] = self.read_pending
        self._functions["SetCommandStatus"] = self.set_status

    def validate_fields(self, fields: dict) -> dict:
        checked = super().validate_fields(fields)
        waypoints = checked["waypoints"]
        if not waypoints:
            raise ContractError("a command needs at least one waypoint")
        for wp in waypoints:
            if (
                not isinstance(wp, (list, tuple))
                or len(wp) != 3
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in wp)
            ):
                raise ContractError("waypoints are [x, y, z] triples")
        checked["waypoints"] = [[float(c) for c in wp] for wp in waypoints]
        if checked["status"] not in COMMAND_STATUSES:
            raise ContractError(f"unknown status {checked['status']!r}")
        return checked

    def create_asset(self, stub, args: list[str]) -> bytes:
        fields = _parse_json_arg(args, "CreateCommand")
        if fields.get("status", "pending") != "pending":
            raise ContractError("commands are created pending")
        fields["status"] = "pending"
        return super().create_asset(stub, [json.dumps(fields)])

    def check_update(self, old: dict, new: dict) -> None:
        if old["status"] != new["status"]:
            _check_transition(old["status"], new["status"])

    def read_pending(self, stub, args: list[str]) -> bytes:
        if len(args) != 1:
            raise ContractError("ReadPendingCommands takes the robot id")
        robot_id = args[0]
        pending = [
            fields
            for _, value, _ in stub.range(self.key_prefix)
            if (fields := json.loads(value))["status"] == "pending"
            and fields["robot_id"] == robot_id
        ]
        return asset_json(pending)  # key order == creation (seq) order

    def set_status(self, stub, args: list[str]) -> bytes:
        if len(args) != 2:
            raise ContractError("SetCommandStatus takes asset id and new status")
        key, status = args
        existing = stub.get(key)
        if existing is None:
            raise ContractError(f"command {key!r} not found")
        if status not in COMMAND_STATUSES:
            raise ContractError(f"unknown status {status!r}")
        fields = json.loads(existing)
        _check_transition(fields["status"], status)
        fields["status"] = status
        stub.put(key, asset_json(fields))
        return b"ok"


def _check_transition(old: str, new: str) -> None:
    if (old, new) not in _LEGAL_TRANSITIONS:
        raise ContractError(f"illegal status transition {old} -> {new}")


def standard_contracts(labels: Iterable[str] | None = None) -> list[Contract]:
    return [PathContract(), ObjectContract(labels), CommandContract()]
