"""End-to-end inventory mission: simulation ticks feeding the ledger.

One application (client identity + recorders) per robot, as deployed in the
room experiment: the path recorder samples the pose topic at 0.2 Hz, the
detection recorder stores each unique detection, and a command listener
polls the command contract to steer the robot through operator waypoints.
Runs on either clock; in logical mode the whole mission is deterministic.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .bootstrap import Stack, standard_network
from .clock import NS_PER_S, s_to_ns
from .client import ChannelClient
from .config import OrdererConfig
from .contracts import ContractError
from .network import NetworkSpec
from .recorder import DetectionRecorder, PathRecorder, RecorderConfig
from .sim import FleetSim, Robot, Waypoint, default_robots, WorldModel

log = logging.getLogger(__name__)

TRAJECTORY_SAMPLE_HZ = 0.2  # trajectory sampling rate
COMMAND_POLL_S = 0.5


class CommandListener:
    """Polls pending commands for one robot, executes them in sequence
    order, and walks the status machine pending -> executing -> done."""

    def __init__(self, robot: Robot, client: ChannelClient) -> None:
        self.robot = robot
        self.client = client
        self.active_id: str | None = None
        self.handled: set[str] = set()

    def poll(self) -> None:
        if self.active_id is not None:
            if any(wp.command_id == self.active_id for wp in self.robot.waypoints):
                return
            self._set_status(self.active_id, "done")
            self.active_id = None
        pending = json.loads(
            self.client.evaluate("ReadPendingCommands", [self.robot.robot_id])
        )
        for command in pending:  # key order == seq order
            if command["asset_id"] in self.handled:
                continue
            self._start(command)
            return  # one command at a time; the rest stay queued

    def _start(self, command: dict) -> None:
        cmd_id = command["asset_id"]
        self.handled.add(cmd_id)
        self.active_id = cmd_id
        self._set_status(cmd_id, "executing")
        waypoints = [
            Waypoint(x, y, z if self.robot.kind == "aerial" else 0.0, command_id=cmd_id)
            for x, y, z in command["waypoints"]
        ]
        self.robot.enqueue(waypoints, front=True)
        log.info("robot %s diverting to command %s", self.robot.robot_id, cmd_id)

    def _set_status(self, cmd_id: str, status: str) -> None:
        try:
            self.client.submit_transaction("SetCommandStatus", [cmd_id, status])
        except ContractError as exc:
            log.warning("status update %s -> %s failed: %s", cmd_id, status, exc)


@dataclass
class Mission:
    stack: Stack
    sim: FleetSim
    path_recorders: dict[str, PathRecorder]
    detection_recorders: dict[str, DetectionRecorder]
    listeners: dict[str, CommandListener] = field(default_factory=dict)

    @property
    def network(self):
        return self.stack.network

    @property
    def clock(self):
        return self.stack.network.clock

    def unresolved(self) -> int:
        recs = list(self.path_recorders.values()) + list(self.detection_recorders.values())
        return sum(r.unresolved() for r in recs)

    # --- driving -------------------------------------------------------------

    def run(self, max_duration_s: float = 600.0, settle_s: float = 5.0) -> float:
        """Run ticks until every robot is idle, then settle commits.

        Returns the mission duration in simulated seconds (idle time, not
        counting the settle tail). Logical-clock only; wall-clock demos use
        `start_paced`.
        """
        clock = self.clock
        if not clock.is_logical:
            raise RuntimeError("run() drives a logical clock; use start_paced()")
        max_ticks = int(max_duration_s * self.sim.tick_rate)
        idle_at: float | None = None
        for _ in range(max_ticks):
            deadline = self.sim.stamp_ns(self.sim.tick)
            clock.run_until(deadline)
            self._tick_once()
            if self.sim.all_idle() and idle_at is None:
                idle_at = self.sim.stamp_ns(self.sim.tick) / NS_PER_S
            if idle_at is not None and self.unresolved() == 0 and not self._commands_open():
                break
        duration = idle_at if idle_at is not None else max_duration_s
        clock.run_until(clock.now_ns() + s_to_ns(settle_s))
        return duration

    def _tick_once(self) -> None:
        self.sim.run_tick()
        if self.sim.tick % max(1, int(COMMAND_POLL_S * self.sim.tick_rate)) == 0:
            for listener in self.listeners.values():
                listener.poll()

    def _commands_open(self) -> bool:
        return any(listener.active_id is not None for listener in self.listeners.values())

    def start_paced(self, duration_s: float) -> None:
        """Schedule ticks on a wall clock (live demo mode)."""
        clock = self.clock
        start = clock.now_ns()
        total = int(duration_s * self.sim.tick_rate)

        def tick(i: int) -> None:
            self._tick_once()
            if i + 1 < total:
                clock.call_at(start + self.sim.stamp_ns(i + 1), tick, i + 1)

        clock.call_at(start, tick, 0)


def build_mission(
    clock,
    seed: int = 0,
    world: WorldModel | None = None,
    robots: list[Robot] | None = None,
    orderer_config: OrdererConfig | None = None,
    trajectory_hz: float = TRAJECTORY_SAMPLE_HZ,
    data_root=None,
) -> Mission:
    world = world or WorldModel.default()
    robots = robots if robots is not None else default_robots(world)
    orderer_config = orderer_config or OrdererConfig(
        batch_timeout_s=0.5, max_message_count=25
    )
    org_of = {r.robot_id: ("Org1" if i % 2 == 0 else "Org2") for i, r in enumerate(robots)}
    stack = standard_network(
        clock,
        spec=NetworkSpec.default(),
        orderer_config=orderer_config,
        data_root=data_root,
        app_subjects={f"{r.robot_id}.app": org_of[r.robot_id] for r in robots},
    )
    sim = FleetSim(world, robots, seed=seed)

    path_recorders: dict[str, PathRecorder] = {}
    detection_recorders: dict[str, DetectionRecorder] = {}
    listeners: dict[str, CommandListener] = {}
    for robot in robots:
        org = org_of[robot.robot_id]
        identity = stack.app_identities[f"{robot.robot_id}.app"]
        channel = stack.channel_name
        path_client = ChannelClient(stack.network, identity, channel, "path")
        object_client = ChannelClient(stack.network, identity, channel, "object")
        command_client = ChannelClient(stack.network, identity, channel, "command")

        path_rec = PathRecorder(
            path_client,
            RecorderConfig(
                data_topic=f"/{robot.robot_id}/pose",
                max_freq=trajectory_hz,
                channel=channel,
                chaincode="path",
            ),
            owner_org=org,
        )
        path_rec.attach(sim.bus)
        path_recorders[robot.robot_id] = path_rec

        det_rec = DetectionRecorder(
            object_client,
            RecorderConfig(
                data_topic=f"/{robot.robot_id}/detections",
                max_freq=1000.0,  # uniqueness, not rate, is the filter
                channel=channel,
                chaincode="object",
            ),
            owner_org=org,
        )
        det_rec.attach(sim.bus)
        detection_recorders[robot.robot_id] = det_rec

        listeners[robot.robot_id] = CommandListener(robot, command_client)

    return Mission(
        stack=stack,
        sim=sim,
        path_recorders=path_recorders,
        detection_recorders=detection_recorders,
        listeners=listeners,
    )
