"""Command-line interface.

`net ...` mirrors the five bring-up steps against a persistent network
directory; `serve` loads that directory into a live network with the TCP
gateway and the HTTP console; `demo` runs the whole inventory mission
live; `recorder` replays a topic trace into the ledger through the
gateway; `bench ...` is the stress-test harness; `mission run` executes
the deterministic logical-clock mission.
"""

from __future__ import annotations

import json
import signal
import sys
import time
from pathlib import Path

import click

from . import store as st
from .bench import (
    BenchConfig,
    load_results,
    load_sweep,
    reference_sweep_configs,
    run_bench,
    sweep as run_sweep,
    sweep_csv,
)
from .clock import LogicalClock, WallClock
from .config import OrdererConfig
from .gateway import GatewayClient, GatewayServer
from .identity import load_identity
from .mission import build_mission
from .network import load_network_spec, orderer_config_from_doc
from .recorder import PathRecorder, RecorderConfig
from .report import check_trends, make_plots, summarize
from .sim import PoseMsg
from .webapp import OperatorGateway, WebServer


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (st.StoreError, ValueError) as exc:
            raise click.ClickException(str(exc)) from exc


@click.group(cls=_Group)
def main() -> None:
    """Permissioned robot-fleet ledger at desk scale."""


def _data_root_option(fn):
    return click.option(
        "--data-root", default="netdata", show_default=True,
        type=click.Path(path_type=Path), help="network directory",
    )(fn)


# --- net: the five bring-up steps ------------------------------------------------


@main.group()
def net() -> None:
    """Network bring-up and chaincode lifecycle (persistent directory)."""


@net.command("up")
@click.argument("spec_file", type=click.Path(exists=True, path_type=Path))
@_data_root_option
@click.option("--full", is_flag=True, help="also run channels/chaincodes from the spec file")
def net_up(spec_file: Path, data_root: Path, full: bool) -> None:
    """Steps 1-2: create the orderer and the organizations with their CAs."""
    spec, doc = load_network_spec(spec_file)
    st.init_network(spec, data_root)
    click.echo(f"network initialized under {data_root}")
    if not full:
        return
    orderer_config = orderer_config_from_doc(doc)
    for channel in doc.get("channels") or []:
        name = channel["name"]
        members = channel["members"]
        st.create_channel_cmd(data_root, name, members, orderer_config)
        for org_id, peer_ids in spec.orgs.items():
            if org_id in members:
                for peer_id in peer_ids:
                    st.join_peer_cmd(data_root, name, peer_id)
                st.set_anchor_cmd(data_root, name, org_id, peer_ids[0])
        for cc in channel.get("chaincodes") or (
            [{"name": n} for n in ("path", "object", "command")]
        ):
            for org_id in members:
                st.approve_chaincode_cmd(
                    data_root, name, org_id, cc["name"],
                    cc.get("version", "1.0"), cc.get("sequence", 1),
                )
            st.commit_chaincode_cmd(data_root, name, cc["name"])
        click.echo(f"channel {name!r} ready (joined, approved, committed)")


@net.group()
def channel() -> None:
    """Channel operations (step 3)."""


@channel.command("create")
@click.argument("name")
@click.option("--members", required=True, help="comma-separated org ids")
@click.option("--batch-timeout", type=float, default=2.0, show_default=True)
@click.option("--max-messages", type=int, default=10, show_default=True)
@click.option("--max-batch-bytes", type=int, default=None)
@_data_root_option
def channel_create(name, members, batch_timeout, max_messages, max_batch_bytes, data_root):
    """Create the channel genesis block."""
    config = OrdererConfig(batch_timeout, max_messages, max_batch_bytes)
    st.create_channel_cmd(data_root, name, members.split(","), config)
    click.echo(f"genesis written for channel {name!r}")


@net.command("join")
@click.argument("channel")
@click.argument("peer")
@_data_root_option
def net_join(channel, peer, data_root):
    """Join a member org's peer to a channel."""
    st.join_peer_cmd(data_root, channel, peer)
    click.echo(f"{peer} joined {channel}")


@net.command("anchor")
@click.argument("channel")
@click.argument("org")
@click.argument("peer")
@_data_root_option
def net_anchor(channel, org, peer, data_root):
    """Set an org's anchor peer on a channel."""
    st.set_anchor_cmd(data_root, channel, org, peer)
    click.echo(f"anchor peer for {org} on {channel}: {peer}")


@net.group()
def cc() -> None:
    """Chaincode lifecycle (steps 4-5)."""


@cc.command("approve")
@click.argument("channel")
@click.argument("name")
@click.option("--org", required=True)
@click.option("--version", default="1.0", show_default=True)
@click.option("--sequence", type=int, default=1, show_default=True)
@_data_root_option
def cc_approve(channel, name, org, version, sequence, data_root):
    state = st.approve_chaincode_cmd(data_root, channel, org, name, version, sequence)
    click.echo(f"approvals for {name!r}: {sorted(state['approvals'])}")


@cc.command("commit")
@click.argument("channel")
@click.argument("name")
@_data_root_option
def cc_commit(channel, name, data_root):
    state = st.commit_chaincode_cmd(data_root, channel, name)
    click.echo(f"committed {name!r} at {state['committed']}")


@net.command("identity")
@click.argument("org")
@click.argument("subject")
@click.option("--role", default="client", show_default=True,
              type=click.Choice(["client", "admin", "peer", "orderer"]))
@_data_root_option
def net_identity(org, subject, role, data_root):
    """Issue an application identity into the wallet directory."""
    path = st.issue_identity_cmd(data_root, org, subject, role)
    click.echo(f"wallet written: {path}")


@net.command("status")
@_data_root_option
def net_status(data_root):
    click.echo(json.dumps(st.network_status(data_root), indent=2, sort_keys=True))


# --- serving ---------------------------------------------------------------------


def _run_servers(network, web_identity, channel, http_port, gateway_port, static_dir,
                 mission=None, max_frame=None):
    from .gateway import MAX_FRAME_BYTES

    gateway = OperatorGateway(network, web_identity, channel, static_dir)
    if mission is not None:
        gateway.attach_mission(mission)
    web = WebServer(gateway, ("127.0.0.1", http_port)).start()
    tcp = GatewayServer(
        network, ("127.0.0.1", gateway_port), max_frame or MAX_FRAME_BYTES
    ).start()
    click.echo(f"HTTP console:   http://{web.address[0]}:{web.address[1]}/")
    click.echo(f"TCP gateway:    {tcp.address[0]}:{tcp.address[1]}")
    return web, tcp


def _default_static_dir() -> Path | None:
    for candidate in (Path("frontend/dist"), Path(__file__).parent.parent.parent / "frontend" / "dist"):
        if (candidate / "index.html").exists():
            return candidate
    return None


@main.command("serve")
@_data_root_option
@click.option("--channel", default="fleet", show_default=True)
@click.option("--http-port", type=int, default=8080, show_default=True)
@click.option("--gateway-port", type=int, default=7070, show_default=True)
@click.option("--max-frame", type=int, default=None, help="wire protocol frame cap, bytes")
@click.option("--ui", type=click.Path(path_type=Path), default=None,
              help="static UI build to serve (defaults to frontend/dist if present)")
def serve(data_root, channel, http_port, gateway_port, max_frame, ui):
    """Load a network directory and serve the gateways until interrupted."""
    clock = WallClock()
    network = st.load_live_network(data_root, clock)
    if channel not in network.channels:
        raise click.ClickException(f"channel {channel!r} not found in {data_root}")
    store = st.NetworkStore.open(data_root)
    first_org = next(iter(store.spec.orgs))
    web_identity = store.wallet(f"web.{first_org.lower()}")
    _run_servers(network, web_identity, channel, http_port, gateway_port,
                 ui or _default_static_dir(), max_frame=max_frame)
    click.echo("serving; Ctrl-C to stop")
    signal.sigwait({signal.SIGINT, signal.SIGTERM})


@main.command("demo")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--duration", type=float, default=300.0, show_default=True,
              help="mission length to pace out, seconds")
@click.option("--http-port", type=int, default=8080, show_default=True)
@click.option("--gateway-port", type=int, default=7070, show_default=True)
@click.option("--ui", type=click.Path(path_type=Path), default=None)
def demo(seed, duration, http_port, gateway_port, ui):
    """Live mission demo: network + robots + gateways on the wall clock."""
    clock = WallClock()
    mission = build_mission(clock, seed=seed)
    _run_servers(
        mission.network, mission.stack.web_identity, "fleet",
        http_port, gateway_port, ui or _default_static_dir(), mission=mission,
    )
    mission.start_paced(duration)
    click.echo("mission running; Ctrl-C to stop")
    signal.sigwait({signal.SIGINT, signal.SIGTERM})


# --- recorder ---------------------------------------------------------------------


@main.command("recorder")
@click.option("--topic", required=True, help="e.g. /uav1/pose")
@click.option("--max-freq", type=float, required=True, help="recording frequency, Hz")
@click.option("--channel", default="fleet", show_default=True)
@click.option("--chaincode", default="path", show_default=True)
@click.option("--wallet", required=True, type=click.Path(exists=True, path_type=Path),
              help="identity file")
@click.option("--gateway", default="127.0.0.1:7070", show_default=True)
@click.option("--trace", type=click.Path(exists=True, path_type=Path), default=None,
              help="JSONL pose trace; '-' or omit for stdin")
@click.option("--owner-org", default=None, help="asset owner org (defaults to wallet org)")
@click.option("--download-after-write", is_flag=True)
def recorder_cmd(topic, max_freq, channel, chaincode, wallet, gateway, trace,
                 owner_org, download_after_write):
    """Replay a topic trace into the ledger through the TCP gateway.

    Trace lines are JSON poses: {"robot_id", "stamp", "x", "y", "z", "yaw"}.
    """
    identity = load_identity(wallet)
    host, port = gateway.rsplit(":", 1)
    clock = WallClock()
    client = GatewayClient((host, int(port)), identity, channel, chaincode, clock)
    config = RecorderConfig(
        data_topic=topic, max_freq=max_freq, channel=channel, chaincode=chaincode,
        download_after_write=download_after_write,
    )
    rec = PathRecorder(client, config, owner_org or identity.org_id)
    robot = topic.strip("/").split("/")[0]

    def feed(lines) -> None:
        for line in lines:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            rec.on_message(
                PoseMsg(
                    robot_id=doc.get("robot_id", robot),
                    stamp=int(doc["stamp"]),
                    x=float(doc["x"]), y=float(doc["y"]), z=float(doc.get("z", 0.0)),
                    yaw=float(doc.get("yaw", 0.0)),
                )
            )

    if trace in (None, Path("-")):
        feed(sys.stdin)
    else:
        with open(trace) as fh:
            feed(fh)
    deadline = time.time() + 30
    while rec.unresolved() and time.time() < deadline:
        time.sleep(0.05)
    click.echo(
        f"recorded={rec.stats.recorded} durable={rec.stats.durable} "
        f"skipped={rec.stats.skipped_duplicates}"
    )
    client.close()
    clock.shutdown()


# --- mission ----------------------------------------------------------------------


@main.command("mission")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-duration", type=float, default=600.0, show_default=True)
@click.option("--world", "world_file", type=click.Path(exists=True, path_type=Path),
              default=None, help="world spec YAML (room, shelves, objects)")
@click.option("--mission", "mission_file", type=click.Path(exists=True, path_type=Path),
              default=None, help="mission spec YAML (robots, waypoints, rates)")
@click.option("--export-trajectory", type=click.Path(path_type=Path), default=None)
@click.option("--export-state", type=click.Path(path_type=Path), default=None)
def mission_cmd(seed, max_duration, world_file, mission_file, export_trajectory, export_state):
    """Run the scripted inventory mission on the logical clock and report."""
    from .sim import WorldModel, load_mission_spec

    clock = LogicalClock()
    world = WorldModel.from_yaml(world_file) if world_file else None
    robots = None
    if mission_file:
        robots, _rates = load_mission_spec(mission_file, world or WorldModel.default())
    mission = build_mission(clock, seed=seed, world=world, robots=robots)
    duration = mission.run(max_duration_s=max_duration)
    dump = mission.network.peers["peer0.org1"].state_dump("fleet")
    paths = sum(1 for l in dump.splitlines() if l.startswith("path~"))
    objects = sum(1 for l in dump.splitlines() if l.startswith("obj~"))
    click.echo(f"mission duration: {duration:.1f} s (simulated)")
    click.echo(f"trajectory assets: {paths}, object assets: {objects}")
    click.echo(f"world objects detected: {len(mission.sim.detected_by)}/"
               f"{len(mission.sim.world.objects)}")
    dumps = {
        pid: mission.network.peers[pid].state_dump("fleet")
        for pid in mission.network.peers
    }
    agree = len(set(dumps.values())) == 1
    click.echo(f"peers agree byte-for-byte: {agree}")
    if export_trajectory:
        mission.sim.export_trajectory_csv(export_trajectory)
        click.echo(f"trajectory CSV: {export_trajectory}")
    if export_state:
        Path(export_state).write_text(dump)
        click.echo(f"state dump: {export_state}")


# --- bench ------------------------------------------------------------------------


@main.group()
def bench() -> None:
    """Stress tests: throughput, latency distribution, resource usage."""


@bench.command("run")
@click.option("--batch-timeout", type=float, required=True)
@click.option("--max-messages", type=int, required=True)
@click.option("--mode", type=click.Choice(["sync", "open"]), default="sync",
              show_default=True)
@click.option("--rate", type=float, default=0.0, help="open-loop load, Hz")
@click.option("--clients", type=int, default=1, show_default=True)
@click.option("--duration", type=float, default=10.0, show_default=True)
@click.option("--warmup", type=float, default=2.0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--wall", is_flag=True, help="run on the wall clock instead of logical time")
def bench_run(batch_timeout, max_messages, mode, rate, clients, duration, warmup, out, wall):
    config = BenchConfig(
        batch_timeout_s=batch_timeout,
        max_message_count=max_messages,
        client_mode="synchronous" if mode == "sync" else "open_loop",
        rate_hz=rate,
        num_clients=clients,
        duration_s=duration,
        warmup_s=warmup,
        out_path=str(out) if out else None,
        wall=wall,
    )
    result = run_bench(config)
    click.echo(summarize([result]))
    if out:
        click.echo(f"result JSON: {out}")


@bench.command("sweep")
@click.argument("sweep_file", required=False,
                type=click.Path(exists=True, path_type=Path))
@click.option("--reference", is_flag=True,
              help="run the built-in eight-row stress table")
@click.option("--wall", is_flag=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("bench-out"),
              show_default=True)
def bench_sweep(sweep_file, reference, wall, out_dir):
    """Run a sweep file (YAML: defaults + runs) and write CSV/JSON."""
    if reference == (sweep_file is not None):
        raise click.ClickException("pass a sweep file or --reference (not both)")
    configs = (
        reference_sweep_configs(wall=wall) if reference else load_sweep(sweep_file)
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    results = run_sweep(configs, out_csv=out_dir / "sweep.csv",
                        out_json=out_dir / "sweep.json")
    click.echo(summarize(results))
    click.echo(f"wrote {out_dir / 'sweep.csv'} and {out_dir / 'sweep.json'}")


@bench.command("report")
@click.argument("results_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("bench-plots"),
              show_default=True)
def bench_report(results_file, out_dir):
    """Plots (throughput, latency, resources) plus a text summary."""
    results = load_results(results_file)
    written = make_plots(results, out_dir)
    summary = summarize(results)
    (out_dir / "summary.txt").write_text(summary)
    click.echo(summary)
    for path in written:
        click.echo(f"plot: {path}")


@bench.command("check")
@click.argument("results_file", type=click.Path(exists=True, path_type=Path))
def bench_check(results_file):
    """Exit nonzero when the sweep violates the expected trends."""
    violations = check_trends(load_results(results_file))
    if violations:
        for v in violations:
            click.echo(f"VIOLATION: {v}", err=True)
        sys.exit(1)
    click.echo("trends hold")


if __name__ == "__main__":
    main()
