"""Deterministic fleet simulation: a shelf room, two robots, a topic bus.

The world is a rectangle (defaults to ~40 m^2) with shelves carrying
labelled objects. Robots follow waypoint queues at constant speed and
publish poses, image stubs and simulated detections on an in-process topic
bus at fixed rates. Everything is a pure function of (seed, world, mission,
command trace): no wall clock, no RNG draws at runtime -- detection
confidences are hashes.

Message stamps are integer nanoseconds computed from tick indices
(stamp = tick * NS // tick_rate), so downstream rate gates behave
bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import yaml

from .clock import NS_PER_S

WAYPOINT_RADIUS_M = 0.05  # waypoint popped when closer than this

GROUND = "ground"
AERIAL = "aerial"

AERIAL_Z_MIN = 0.5
AERIAL_Z_MAX = 3.0


class SimError(ValueError):
    pass


# --- messages -----------------------------------------------------------------


@dataclass(frozen=True)
class PoseMsg:
    robot_id: str
    stamp: int  # ns
    x: float
    y: float
    z: float
    yaw: float


@dataclass(frozen=True)
class DetectionMsg:
    robot_id: str
    stamp: int
    label: str
    object_key: str  # stable identity of the simulated object
    x: float
    y: float
    z: float
    confidence: float


@dataclass(frozen=True)
class ImageStubMsg:
    robot_id: str
    stamp: int
    size_bytes: int


class TopicBus:
    """Synchronous in-process pub/sub; per-publisher per-topic FIFO because
    delivery happens inline at publish time."""

    def __init__(self) -> None:
        self._handlers: dict[str, list] = defaultdict(list)
        self.published: dict[str, int] = defaultdict(int)

    def subscribe(self, topic: str, callback) -> None:
        self._handlers[topic].append(callback)

    def publish(self, topic: str, msg) -> None:
        self.published[topic] += 1
        for callback in list(self._handlers[topic]):
            callback(msg)


# --- world --------------------------------------------------------------------


@dataclass(frozen=True)
class WorldObject:
    key: str  # "banana#0"
    label: str
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Shelf:
    x1: float
    y1: float
    x2: float
    y2: float
    labels: tuple[str, ...]

    def object_positions(self) -> list[tuple[float, float]]:
        n = len(self.labels)
        return [
            (
                self.x1 + (self.x2 - self.x1) * (i + 1) / (n + 1),
                self.y1 + (self.y2 - self.y1) * (i + 1) / (n + 1),
            )
            for i in range(n)
        ]


@dataclass
class WorldModel:
    width: float
    height: float
    shelves: list[Shelf]
    objects: list[WorldObject] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.objects:
            self.objects = self._place_objects()
        for obj in self.objects:
            if not (0 <= obj.x <= self.width and 0 <= obj.y <= self.height):
                raise SimError(f"object {obj.key} outside the room")

    def _place_objects(self) -> list[WorldObject]:
        out: list[WorldObject] = []
        counts: dict[str, int] = defaultdict(int)
        for shelf in self.shelves:
            for label, (x, y) in zip(shelf.labels, shelf.object_positions()):
                key = f"{label}#{counts[label]}"
                counts[label] += 1
                out.append(WorldObject(key=key, label=label, x=x, y=y, z=1.0))
        return out

    @property
    def area_m2(self) -> float:
        return self.width * self.height

    @classmethod
    def default(cls) -> "WorldModel":
        # ~6.3 m x 6.3 m gives the 40 m^2 room; three shelf rows.
        return cls(
            width=6.3,
            height=6.3,
            shelves=[
                Shelf(1.0, 1.5, 5.3, 1.5, ("banana", "apple", "bottle", "cup")),
                Shelf(1.0, 3.15, 5.3, 3.15, ("book", "laptop", "keyboard", "mouse")),
                Shelf(1.0, 4.8, 5.3, 4.8, ("orange", "vase", "clock", "scissors")),
            ],
        )

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "shelves": [
                {"x1": s.x1, "y1": s.y1, "x2": s.x2, "y2": s.y2, "labels": list(s.labels)}
                for s in self.shelves
            ],
            "objects": [
                {"key": o.key, "label": o.label, "x": o.x, "y": o.y, "z": o.z}
                for o in self.objects
            ],
        }

    @classmethod
    def from_yaml(cls, path: str | Path) -> "WorldModel":
        doc = yaml.safe_load(Path(path).read_text())
        shelves = [
            Shelf(
                float(s["x1"]), float(s["y1"]), float(s["x2"]), float(s["y2"]),
                tuple(s["labels"]),
            )
            for s in doc.get("shelves", [])
        ]
        return cls(width=float(doc["width"]), height=float(doc["height"]), shelves=shelves)


# --- robots ---------------------------------------------------------------------


@dataclass
class Waypoint:
    x: float
    y: float
    z: float
    command_id: str | None = None  # set when injected by an operator command


@dataclass
class Sensor:
    range_m: float
    fov_rad: float


@dataclass
class Robot:
    robot_id: str
    kind: str  # GROUND or AERIAL
    x: float
    y: float
    z: float
    yaw: float = 0.0
    speed: float = 0.3  # m/s
    sensor: Sensor = field(default_factory=lambda: Sensor(2.0, math.tau))
    waypoints: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.kind == GROUND:
            self.z = 0.0
        elif self.kind == AERIAL:
            self.z = min(max(self.z, AERIAL_Z_MIN), AERIAL_Z_MAX)
        else:
            raise SimError(f"unknown robot kind {self.kind!r}")

    @property
    def pose(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.z, self.yaw)

    def enqueue(self, waypoints: Iterable[Waypoint], front: bool = False) -> None:
        if front:
            for wp in reversed(list(waypoints)):
                self.waypoints.appendleft(wp)
        else:
            self.waypoints.extend(waypoints)

    def idle(self) -> bool:
        return not self.waypoints


def wrap_angle(a: float) -> float:
    return (a + math.pi) % math.tau - math.pi


# --- the simulation -------------------------------------------------------------


class FleetSim:
    def __init__(
        self,
        world: WorldModel,
        robots: list[Robot],
        seed: int = 0,
        tick_rate: int = 30,
        pose_rate: int = 10,
        image_rate: int = 30,
        detect_rate: int = 5,
    ) -> None:
        for rate, name in ((pose_rate, "pose"), (image_rate, "image"), (detect_rate, "detect")):
            if rate < 1 or tick_rate % rate:
                raise SimError(f"{name}_rate {rate} must divide tick_rate {tick_rate}")
        self.world = world
        self.robots = {r.robot_id: r for r in robots}
        self.seed = seed
        self.tick_rate = tick_rate
        self.pose_rate = pose_rate
        self.image_rate = image_rate
        self.detect_rate = detect_rate
        self.bus = TopicBus()
        self.tick = 0
        self.detected_by: dict[str, set[str]] = defaultdict(set)  # key -> robots
        self._firing: dict[str, set[str]] = defaultdict(set)  # robot -> keys fired this pass
        self.trajectory: dict[str, list[PoseMsg]] = defaultdict(list)

    def stamp_ns(self, tick: int | None = None) -> int:
        t = self.tick if tick is None else tick
        return t * NS_PER_S // self.tick_rate

    # --- kinematics --------------------------------------------------------

    def step(self, dt: float) -> None:
        if dt <= 0:
            raise SimError("dt must be positive")
        for robot in self.robots.values():
            self._step_robot(robot, dt)

    def _step_robot(self, robot: Robot, dt: float) -> None:
        budget = robot.speed * dt
        while robot.waypoints and budget > 1e-12:
            target = robot.waypoints[0]
            dx, dy = target.x - robot.x, target.y - robot.y
            dz = (target.z - robot.z) if robot.kind == AERIAL else 0.0
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist > 1e-9:
                robot.yaw = math.atan2(dy, dx)
            if dist <= WAYPOINT_RADIUS_M:
                robot.waypoints.popleft()
                continue
            hop = min(budget, dist)
            robot.x += dx / dist * hop
            robot.y += dy / dist * hop
            if robot.kind == AERIAL:
                robot.z += dz / dist * hop
            budget -= hop
            if hop >= dist - 1e-12:
                robot.waypoints.popleft()
        robot.x = min(max(robot.x, 0.0), self.world.width)
        robot.y = min(max(robot.y, 0.0), self.world.height)
        if robot.kind == AERIAL:
            robot.z = min(max(robot.z, AERIAL_Z_MIN), AERIAL_Z_MAX)

    # --- sensing -----------------------------------------------------------

    def confidence(self, robot_id: str, object_key: str) -> float:
        digest = hashlib.sha256(
            f"{self.seed}|{robot_id}|{object_key}".encode()
        ).digest()
        frac = int.from_bytes(digest[:8], "big") / 2**64
        return 0.5 + frac / 2  # [0.5, 1)

    def visible(self, robot: Robot, obj: WorldObject) -> bool:
        dx, dy = obj.x - robot.x, obj.y - robot.y
        if math.hypot(dx, dy) > robot.sensor.range_m:
            return False
        bearing = math.atan2(dy, dx)
        return abs(wrap_angle(bearing - robot.yaw)) <= robot.sensor.fov_rad / 2

    def sense(self, robot: Robot) -> list[DetectionMsg]:
        """Detections for objects entering (range AND fov); each (robot,
        object) fires at most once per pass -- the object must leave sensor
        range before it can fire again."""
        fired = self._firing[robot.robot_id]
        in_range = {
            obj.key
            for obj in self.world.objects
            if math.hypot(obj.x - robot.x, obj.y - robot.y) <= robot.sensor.range_m
        }
        fired.intersection_update(in_range)  # objects that left reset
        out: list[DetectionMsg] = []
        for obj in self.world.objects:
            if obj.key not in in_range or obj.key in fired:
                continue
            if not self.visible(robot, obj):
                continue
            fired.add(obj.key)
            self.detected_by[obj.key].add(robot.robot_id)
            out.append(
                DetectionMsg(
                    robot_id=robot.robot_id,
                    stamp=self.stamp_ns(),
                    label=obj.label,
                    object_key=obj.key,
                    x=obj.x,
                    y=obj.y,
                    z=obj.z,
                    confidence=self.confidence(robot.robot_id, obj.key),
                )
            )
        return out

    # --- publishing --------------------------------------------------------

    def run_tick(self) -> None:
        """One fixed-rate tick: move, then publish every stream that is due."""
        self.step(1.0 / self.tick_rate)
        tick = self.tick
        for robot in self.robots.values():
            if tick % (self.tick_rate // self.image_rate) == 0:
                self.bus.publish(
                    f"/{robot.robot_id}/image",
                    ImageStubMsg(robot.robot_id, self.stamp_ns(), 640 * 480 * 3),
                )
            if tick % (self.tick_rate // self.pose_rate) == 0:
                msg = PoseMsg(robot.robot_id, self.stamp_ns(), *robot.pose)
                self.trajectory[robot.robot_id].append(msg)
                self.bus.publish(f"/{robot.robot_id}/pose", msg)
            if tick % (self.tick_rate // self.detect_rate) == 0:
                for detection in self.sense(robot):
                    self.bus.publish(f"/{robot.robot_id}/detections", detection)
        self.tick += 1

    def all_idle(self) -> bool:
        return all(r.idle() for r in self.robots.values())

    def export_trajectory_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["robot_id", "stamp", "x", "y", "z"])
            for robot_id in sorted(self.trajectory):
                for msg in self.trajectory[robot_id]:
                    writer.writerow([robot_id, msg.stamp, msg.x, msg.y, msg.z])


# --- scripted missions -----------------------------------------------------------


def lawnmower(world: WorldModel, margin: float = 0.6, row_spacing: float = 1.2) -> list[Waypoint]:
    """Boustrophedon sweep for the ground robot."""
    out: list[Waypoint] = []
    y = margin
    left, right = margin, world.width - margin
    at_left = True
    while y <= world.height - margin + 1e-9:
        a, b = (left, right) if at_left else (right, left)
        out.append(Waypoint(a, y, 0.0))
        out.append(Waypoint(b, y, 0.0))
        at_left = not at_left
        y += row_spacing
    return out


def perimeter(world: WorldModel, margin: float = 0.8, z: float = 1.5) -> list[Waypoint]:
    """Closed loop along the walls for the aerial robot."""
    left, right = margin, world.width - margin
    bottom, top = margin, world.height - margin
    corners = [(left, bottom), (right, bottom), (right, top), (left, top), (left, bottom)]
    return [Waypoint(x, y, z) for x, y in corners]


def default_robots(world: WorldModel) -> list[Robot]:
    return [
        Robot(
            robot_id="dashgo",
            kind=GROUND,
            x=0.6, y=0.6, z=0.0,
            speed=0.3,
            sensor=Sensor(range_m=2.0, fov_rad=math.tau),  # ring lidar
            waypoints=deque(lawnmower(world)),
        ),
        Robot(
            robot_id="uav1",
            kind=AERIAL,
            x=0.8, y=0.8, z=1.5,
            speed=0.5,
            sensor=Sensor(range_m=2.5, fov_rad=math.radians(100)),  # forward camera
            waypoints=deque(perimeter(world)),
        ),
    ]


def default_sim(seed: int = 0) -> FleetSim:
    world = WorldModel.default()
    return FleetSim(world, default_robots(world), seed=seed)


def load_mission_spec(path: str | Path, world: WorldModel) -> tuple[list[Robot], dict]:
    """Mission spec file: robots (kind, start, speed, sensor) with waypoint
    scripts, plus publisher rates. Waypoint scripts are explicit lists or
    the named sweeps ("lawnmower" / "perimeter")."""
    doc = yaml.safe_load(Path(path).read_text())
    robots: list[Robot] = []
    for entry in doc.get("robots", []):
        kind = entry["kind"]
        script = entry.get("waypoints", [])
        if script == "lawnmower":
            waypoints = lawnmower(world)
        elif script == "perimeter":
            waypoints = perimeter(world, z=float(entry.get("z", 1.5)))
        else:
            waypoints = [
                Waypoint(float(x), float(y), float(z)) for x, y, z in script
            ]
        sensor_doc = entry.get("sensor", {})
        sensor = Sensor(
            range_m=float(sensor_doc.get("range_m", 2.0)),
            fov_rad=math.radians(float(sensor_doc.get("fov_deg", 360.0))),
        )
        start = entry.get("start", [0.5, 0.5, 1.5 if kind == AERIAL else 0.0])
        robots.append(
            Robot(
                robot_id=entry["robot_id"],
                kind=kind,
                x=float(start[0]),
                y=float(start[1]),
                z=float(start[2]),
                speed=float(entry.get("speed", 0.3 if kind == GROUND else 0.5)),
                sensor=sensor,
                waypoints=deque(waypoints),
            )
        )
    rates = {
        key: int(doc[key])
        for key in ("tick_rate", "pose_rate", "image_rate", "detect_rate")
        if key in doc
    }
    return robots, rates
