"""HTTP/JSON facade for the operator console.

Read endpoints are pure views over peer queries (restarting the process
reproduces byte-identical bodies); POST /api/commands runs the full
endorse -> order -> commit pipeline and answers 202, with commit status
arriving on the /api/events server-sent stream. Coordinates are meters;
stamps are nanosecond strings so browser JSON parsing cannot lose
precision.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .client import ChannelClient, SubmitRejected
from .contracts import ContractError, command_asset_id
from .gateway import GatewayService
from .identity import Identity
from .peer import CommitEvent

log = logging.getLogger(__name__)

CONTRACT_NAMES = ("path", "object", "command")
SSE_KEEPALIVE_S = 15.0


def _json_bytes(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _asset_view(fields: dict) -> dict:
    out = dict(fields)
    if "stamp" in out:
        out["stamp"] = str(out["stamp"])
    return out


class OperatorGateway:
    """Bundles the network, the web client identity and live feeds."""

    def __init__(
        self,
        network,
        web_identity: Identity,
        channel: str,
        static_dir: str | Path | None = None,
    ) -> None:
        self.network = network
        self.web_identity = web_identity
        self.channel = channel
        self.static_dir = Path(static_dir) if static_dir else None
        self.service = GatewayService(network)
        self.online = True
        self.sim = None
        self._sse_queues: list[queue.Queue] = []
        self._sse_lock = threading.Lock()
        self._subscribed_channels: set[str] = set()
        self._subscribe_events(channel)

    # --- live feeds -----------------------------------------------------------

    def _subscribe_events(self, channel: str) -> None:
        if channel in self._subscribed_channels:
            return
        self._subscribed_channels.add(channel)
        self.service.subscribe_events(channel, self._on_commit)

    def _on_commit(self, event: CommitEvent) -> None:
        self._broadcast(
            "commit",
            str(event.block_no),
            {
                "channel": event.channel,
                "block_no": event.block_no,
                "tx_id": event.tx_id.hex(),
                "validation_code": event.validation_code.name,
            },
        )

    def attach_mission(self, mission) -> None:
        """Wire a live simulation in: pose ticks flow to the event stream."""
        self.sim = mission.sim
        for robot_id in mission.sim.robots:
            mission.sim.bus.subscribe(f"/{robot_id}/pose", self._on_pose)

    def _on_pose(self, msg) -> None:
        self._broadcast(
            "pose",
            None,
            {
                "robot_id": msg.robot_id,
                "x": msg.x,
                "y": msg.y,
                "z": msg.z,
                "yaw": msg.yaw,
                "stamp": str(msg.stamp),
            },
        )

    def _broadcast(self, kind: str, event_id: str | None, data: dict) -> None:
        with self._sse_lock:
            listeners = list(self._sse_queues)
        for q in listeners:
            try:
                q.put_nowait((kind, event_id, data))
            except queue.Full:
                pass  # a stalled consumer must never block the commit path

    def sse_register(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=10000)
        with self._sse_lock:
            self._sse_queues.append(q)
        return q

    def sse_unregister(self, q: queue.Queue) -> None:
        with self._sse_lock:
            if q in self._sse_queues:
                self._sse_queues.remove(q)

    # --- ledger views -----------------------------------------------------------

    def channel_names(self) -> list[str]:
        return sorted(self.network.channels)

    def assets(self, channel: str, contract: str) -> list[dict]:
        raw = self.service.query(channel, contract, "ReadAllAssets", [])
        return [_asset_view(a) for a in json.loads(raw)]

    def robots(self) -> list[dict]:
        if self.sim is not None:
            return [
                {"robot_id": r.robot_id, "kind": r.kind}
                for r in sorted(self.sim.robots.values(), key=lambda r: r.robot_id)
            ]
        seen = sorted({a["robot_id"] for a in self.assets(self.channel, "path")})
        return [{"robot_id": rid, "kind": "unknown"} for rid in seen]

    def trajectory(self, robot_id: str) -> list[dict] | None:
        known = {r["robot_id"] for r in self.robots()}
        points = [
            {"stamp": a["stamp"], "x": a["x"], "y": a["y"], "z": a["z"]}
            for a in self.assets(self.channel, "path")
            if a["robot_id"] == robot_id
        ]
        if not points and robot_id not in known:
            return None
        return points  # asset key order == sequence order

    def world(self) -> dict | None:
        return self.sim.world.to_dict() if self.sim is not None else None

    def submit_command(self, robot_id: str, waypoints: list) -> dict:
        client = ChannelClient(
            self.network, self.web_identity, self.channel, "command"
        )
        existing = json.loads(client.evaluate("ReadAllAssets", []))
        next_seq = 1 + max(
            (int(a["asset_id"].rsplit("~", 1)[1]) for a in existing), default=0
        )
        last_error: Exception | None = None
        for seq in range(next_seq, next_seq + 3):  # ride out create races
            fields = {
                "asset_id": command_asset_id(seq),
                "robot_id": robot_id,
                "waypoints": waypoints,
                "issued_by": self.web_identity.subject_id,
                "status": "pending",
                "stamp": self.network.clock.now_ns(),
                "owner_org": self.web_identity.org_id,
            }
            try:
                pending = client.submit_transaction("CreateCommand", [json.dumps(fields)])
                return {"asset_id": fields["asset_id"], "tx_id": pending.tx_id.hex()}
            except ContractError as exc:
                last_error = exc
                if "already exists" not in str(exc):
                    raise
        raise last_error  # type: ignore[misc]


class _Handler(BaseHTTPRequestHandler):
    server_version = "FleetLedgerGateway/0.1"
    protocol_version = "HTTP/1.1"

    @property
    def gw(self) -> OperatorGateway:
        return self.server.gateway  # type: ignore[attr-defined]

    def log_message(self, fmt, *args) -> None:
        log.debug("http: " + fmt, *args)

    # --- plumbing ---------------------------------------------------------------

    def _send(self, status: int, body: bytes, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, payload) -> None:
        self._send(status, _json_bytes(payload))

    def _error(self, status: int, message: str) -> None:
        self._json(status, {"error": message})

    def _offline(self) -> bool:
        if not self.gw.online:
            self._error(503, "network down")
            return True
        return False

    # --- routing -----------------------------------------------------------------

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:1] != ["api"]:
                self._static(url.path)
                return
            if self._offline():
                return
            query = parse_qs(url.query)
            route = parts[1:]
            if route == ["channels"]:
                self._json(200, self.gw.channel_names())
            elif len(route) == 3 and route[0] == "channels" and route[2] == "assets":
                self._assets(route[1], query)
            elif len(route) == 3 and route[0] == "robots" and route[2] == "trajectory":
                self._trajectory(route[1])
            elif route == ["robots"]:
                self._json(200, self.gw.robots())
            elif route == ["objects"]:
                self._json(200, self.gw.assets(self.gw.channel, "object"))
            elif route == ["world"]:
                world = self.gw.world()
                if world is None:
                    self._error(404, "no live world attached")
                else:
                    self._json(200, world)
            elif route == ["events"]:
                self._events()
            else:
                self._error(404, "unknown endpoint")
        except BrokenPipeError:
            pass
        except Exception as exc:  # surface as a 500, keep the server alive
            log.exception("request failed")
            try:
                self._error(500, str(exc))
            except OSError:
                pass

    def _assets(self, channel: str, query: dict) -> None:
        if channel not in self.gw.channel_names():
            self._error(404, f"unknown channel {channel!r}")
            return
        contract = query.get("contract", ["path"])[0]
        if contract not in CONTRACT_NAMES:
            self._error(400, f"contract must be one of {CONTRACT_NAMES}")
            return
        assets = self.gw.assets(channel, contract)
        limit = query.get("limit", [None])[0]
        if limit is not None:
            assets = assets[: max(0, int(limit))]
        self._json(200, assets)

    def _trajectory(self, robot_id: str) -> None:
        points = self.gw.trajectory(robot_id)
        if points is None:
            self._error(404, f"unknown robot {robot_id!r}")
        else:
            self._json(200, points)

    def do_POST(self) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts != ["api", "commands"]:
            self._error(404, "unknown endpoint")
            return
        if self._offline():
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._error(400, "malformed JSON body")
            return
        robot_id = doc.get("robot_id")
        waypoints = doc.get("waypoints")
        if not isinstance(robot_id, str) or not robot_id:
            self._error(400, "robot_id is required")
            return
        if robot_id not in {r["robot_id"] for r in self.gw.robots()}:
            self._error(404, f"unknown robot {robot_id!r}")
            return
        if (
            not isinstance(waypoints, list)
            or not waypoints
            or not all(
                isinstance(w, list) and len(w) == 3
                and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in w)
                for w in waypoints
            )
        ):
            self._error(400, "waypoints must be a non-empty list of [x, y, z]")
            return
        try:
            result = self.gw.submit_command(robot_id, waypoints)
        except ContractError as exc:
            self._error(400, str(exc))
            return
        except SubmitRejected as exc:
            self._error(503, str(exc))
            return
        self._json(202, result)

    # --- server-sent events ---------------------------------------------------------

    def _events(self) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        q = self.gw.sse_register()
        try:
            last_seen = self.headers.get("Last-Event-ID")
            try:
                replay_from = int(last_seen) + 1 if last_seen is not None else None
            except ValueError:
                replay_from = None
            if replay_from is not None:
                for event in self.gw.service.replay_commit_events(
                    self.gw.channel, replay_from
                ):
                    self._write_sse(
                        "commit",
                        str(event.block_no),
                        {
                            "channel": event.channel,
                            "block_no": event.block_no,
                            "tx_id": event.tx_id.hex(),
                            "validation_code": event.validation_code.name,
                        },
                    )
            while True:
                try:
                    kind, event_id, data = q.get(timeout=SSE_KEEPALIVE_S)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                self._write_sse(kind, event_id, data)
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.gw.sse_unregister(q)

    def _write_sse(self, kind: str, event_id: str | None, data: dict) -> None:
        chunks = [f"event: {kind}\n"]
        if event_id is not None:
            chunks.append(f"id: {event_id}\n")
        chunks.append(f"data: {json.dumps(data, sort_keys=True)}\n\n")
        self.wfile.write("".join(chunks).encode("utf-8"))
        self.wfile.flush()

    # --- static UI -------------------------------------------------------------------

    def _static(self, path: str) -> None:
        root = self.gw.static_dir
        if root is None:
            self._json(
                200,
                {
                    "service": "fleetledger gateway",
                    "api": "/api",
                    "ui": "not built; see frontend/README.md",
                },
            )
            return
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._error(404, "not found")
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)


class WebServer:
    def __init__(self, gateway: OperatorGateway, bind=("127.0.0.1", 0)) -> None:
        self._httpd = ThreadingHTTPServer(bind, _Handler)
        self._httpd.daemon_threads = True
        self._httpd.gateway = gateway  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address  # type: ignore[return-value]

    def start(self) -> "WebServer":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="gateway-http", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
