"""Stress-test harness: drive transactions, measure throughput and latency.

Brings up its own two-org network per run, drives it with synchronous
clients (submit the next transaction only after the previous one commits)
or an open-loop arrival process at a fixed rate, and measures per-tx commit
latency as CommitEvent time minus submit time. Open-loop submit timestamps
are the intended send times, so coordinated omission shows up as latency
rather than disappearing. Runs on the logical clock by default (exact,
deterministic); `wall=True` runs the identical code against real time.

Absolute numbers are hardware-bound and never asserted; the interesting
output is the shape: throughput falls as the batch timeout grows (with
synchronous clients), and latency grows with the block size under a fixed
offered load.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import psutil
import yaml

from .bootstrap import standard_network
from .clock import LogicalClock, NS_PER_S, WallClock, s_to_ns
from .client import ChannelClient
from .config import OrdererConfig
from .contracts import PathContract
from .ledger import ValidationCode

SYNCHRONOUS = "synchronous"
OPEN_LOOP = "open_loop"

BENCH_CHANNEL = "bench"


@dataclass(frozen=True)
class BenchConfig:
    batch_timeout_s: float
    max_message_count: int
    client_mode: str = SYNCHRONOUS
    rate_hz: float = 0.0  # open-loop offered load (total across clients)
    num_clients: int = 1
    duration_s: float = 10.0
    warmup_s: float = 2.0
    # synchronous-client turnaround between a commit and the next submit;
    # keeps the zero-cost logical model finite when commits are instant
    # (M=1 cuts immediately), and is negligible against any batch timeout
    client_think_s: float = 0.001
    out_path: str | None = None
    wall: bool = False
    seed: int = 0
    label: str = ""

    def __post_init__(self) -> None:
        if not self.duration_s > self.warmup_s >= 0:
            raise ValueError("need duration > warmup >= 0")
        if self.client_mode not in (SYNCHRONOUS, OPEN_LOOP):
            raise ValueError(f"unknown client mode {self.client_mode!r}")
        if self.client_mode == OPEN_LOOP and self.rate_hz <= 0:
            raise ValueError("open_loop needs rate_hz > 0")
        if self.num_clients < 1:
            raise ValueError("need at least one client")
        if self.client_mode == SYNCHRONOUS and self.client_think_s <= 0:
            raise ValueError("synchronous clients need client_think_s > 0")


@dataclass
class BenchResult:
    config: dict
    measured_throughput: float  # VALID commits per second in the window
    latency_ns: dict  # p50/p90/p99/min/max plus the full histogram
    submitted: int
    committed_valid: int  # in the measurement window
    committed_invalid: int
    total_committed: int  # over the whole run
    in_flight: int  # at cutoff
    invalid_codes: dict
    resource_samples: list  # (t_s, cpu_pct, rss_bytes)
    wall_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @property
    def p50_ms(self) -> float:
        return self.latency_ns["p50"] / 1e6


def percentiles(samples_ns: list[int]) -> dict:
    if not samples_ns:
        return {"p50": 0, "p90": 0, "p99": 0, "min": 0, "max": 0, "samples": []}
    arr = np.asarray(samples_ns, dtype=np.int64)
    return {
        "p50": int(np.percentile(arr, 50)),
        "p90": int(np.percentile(arr, 90)),
        "p99": int(np.percentile(arr, 99)),
        "min": int(arr.min()),
        "max": int(arr.max()),
        "samples": [int(v) for v in arr],
    }


class _ResourceSampler:
    """1 Hz process CPU/RSS sampling on a side thread.

    The deployment is in-process, so there is one set of numbers for the
    whole network rather than per-container columns."""

    def __init__(self) -> None:
        self._proc = psutil.Process()
        self._samples: list[tuple[float, float, int]] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._t0 = time.monotonic()

    def _run(self) -> None:
        self._proc.cpu_percent(None)  # prime the counter
        while not self._stop.wait(1.0):
            self._samples.append(
                (
                    round(time.monotonic() - self._t0, 3),
                    self._proc.cpu_percent(None),
                    self._proc.memory_info().rss,
                )
            )

    def start(self) -> "_ResourceSampler":
        self._thread.start()
        return self

    def stop(self) -> list[tuple[float, float, int]]:
        self._stop.set()
        self._thread.join(timeout=2)
        return self._samples


class _Workload:
    """Shared submission bookkeeping for both client modes."""

    def __init__(self, stack, config: BenchConfig, t0_ns: int) -> None:
        self.network = stack.network
        self.clock = stack.network.clock
        self.config = config
        self.t0_ns = t0_ns
        self.window_start = t0_ns + s_to_ns(config.warmup_s)
        self.window_end = t0_ns + s_to_ns(config.duration_s)
        self.stopped = False
        self.submitted = 0
        self.total_committed = 0
        self.window_valid = 0
        self.window_invalid = 0
        self.invalid_codes: dict[str, int] = {}
        self.latencies: list[int] = []
        self.lock = threading.Lock()
        self.clients = [
            ChannelClient(
                stack.network,
                stack.app_identities[f"bench{i}.app"],
                BENCH_CHANNEL,
                "path",
            )
            for i in range(config.num_clients)
        ]
        self._seq = [0] * config.num_clients

    def _next_args(self, client_index: int) -> list[str]:
        self._seq[client_index] += 1
        seq = self._seq[client_index]
        return [
            json.dumps(
                {
                    "asset_id": f"path~bench{client_index}~{seq:06d}",
                    "robot_id": f"bench{client_index}",
                    "x": 0.0, "y": 0.0, "z": 0.0, "yaw": 0.0,
                    "stamp": seq, "owner_org": "Org1",
                }
            )
        ]

    def submit(self, client_index: int, submit_time: int, on_commit) -> None:
        if self.stopped:
            return
        client = self.clients[client_index]
        try:
            client.submit_transaction(
                "CreateAsset",
                self._next_args(client_index),
                submit_time=submit_time,
                on_commit=on_commit,
            )
        except Exception:
            if not self.stopped:
                raise
            return
        with self.lock:
            self.submitted += 1

    def record(self, event, submit_time: int) -> None:
        with self.lock:
            self.total_committed += 1
            if not (self.window_start <= event.commit_time <= self.window_end):
                return
            if event.validation_code is ValidationCode.VALID:
                self.window_valid += 1
                self.latencies.append(event.commit_time - submit_time)
            else:
                self.window_invalid += 1
                name = event.validation_code.name
                self.invalid_codes[name] = self.invalid_codes.get(name, 0) + 1


def _drive_synchronous(workload: _Workload) -> None:
    think_ns = s_to_ns(workload.config.client_think_s)

    def loop(client_index: int) -> None:
        submit_time = workload.clock.now_ns()

        def on_commit(event) -> None:
            workload.record(event, submit_time)
            if not workload.stopped:
                workload.clock.call_later(think_ns, loop, client_index)

        workload.submit(client_index, submit_time, on_commit)

    for i in range(workload.config.num_clients):
        workload.clock.call_at(workload.t0_ns, loop, i)


def _drive_open_loop(workload: _Workload) -> None:
    config = workload.config
    period_ns = round(NS_PER_S / config.rate_hz)
    total = int(s_to_ns(config.duration_s) // period_ns)

    def fire(k: int) -> None:
        intended = workload.t0_ns + k * period_ns  # intended send time
        client_index = k % config.num_clients
        workload.submit(
            client_index, intended, lambda e: workload.record(e, intended)
        )

    for k in range(total):
        workload.clock.call_at(workload.t0_ns + k * period_ns, fire, k)


def run_bench(config: BenchConfig) -> BenchResult:
    clock = WallClock() if config.wall else LogicalClock()
    started = time.monotonic()
    stack = standard_network(
        clock,
        channel_name=BENCH_CHANNEL,
        orderer_config=OrdererConfig(
            batch_timeout_s=config.batch_timeout_s,
            max_message_count=config.max_message_count,
        ),
        contracts=[PathContract()],
        app_subjects={
            f"bench{i}.app": ("Org1" if i % 2 == 0 else "Org2")
            for i in range(config.num_clients)
        },
    )
    sampler = _ResourceSampler().start()
    t0 = clock.now_ns()
    workload = _Workload(stack, config, t0)
    if config.client_mode == SYNCHRONOUS:
        _drive_synchronous(workload)
    else:
        _drive_open_loop(workload)

    if config.wall:
        time.sleep(config.duration_s)
        workload.stopped = True
        time.sleep(0.2)  # let in-flight dispatches settle
        clock.shutdown()
    else:
        clock.run_until(t0 + s_to_ns(config.duration_s))
        workload.stopped = True

    samples = sampler.stop()
    window_s = config.duration_s - config.warmup_s
    with workload.lock:
        latency = percentiles(workload.latencies)
        result = BenchResult(
            config=asdict(config),
            measured_throughput=workload.window_valid / window_s,
            latency_ns=latency,
            submitted=workload.submitted,
            committed_valid=workload.window_valid,
            committed_invalid=workload.window_invalid,
            total_committed=workload.total_committed,
            in_flight=workload.submitted - workload.total_committed,
            invalid_codes=dict(workload.invalid_codes),
            resource_samples=samples,
            wall_seconds=round(time.monotonic() - started, 3),
        )
    if config.out_path:
        result.save(config.out_path)
    return result


# --- sweeps ---------------------------------------------------------------------

CSV_COLUMNS = [
    "label",
    "batch_timeout_s",
    "max_message_count",
    "client_mode",
    "rate_hz",
    "num_clients",
    "duration_s",
    "throughput_hz",
    "p50_ms",
    "p90_ms",
    "p99_ms",
    "min_ms",
    "max_ms",
    "valid",
    "invalid",
    "process_cpu_pct_avg",
    "process_rss_mb_max",
]


def load_sweep(path: str | Path) -> list[BenchConfig]:
    doc = yaml.safe_load(Path(path).read_text())
    defaults = doc.get("defaults") or {}
    configs = []
    for entry in doc.get("runs") or []:
        merged = {**defaults, **entry}
        configs.append(BenchConfig(**merged))
    return configs


def load_results(path: str | Path) -> list[BenchResult]:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        doc = [doc]
    return [BenchResult(**entry) for entry in doc]


def sweep(configs: list[BenchConfig], out_csv: str | Path | None = None,
          out_json: str | Path | None = None) -> list[BenchResult]:
    results = [run_bench(c) for c in configs]
    if out_csv:
        Path(out_csv).write_text(sweep_csv(results))
    if out_json:
        Path(out_json).write_text(
            json.dumps([json.loads(r.to_json()) for r in results], indent=2)
        )
    return results


def sweep_csv(results: list[BenchResult]) -> str:
    # Whole-process CPU/RSS: an in-process network has no per-component
    # split; absolute resource numbers are informational.
    lines = [",".join(CSV_COLUMNS)]
    for r in results:
        cfg = r.config
        cpu = [s[1] for s in r.resource_samples]
        rss = [s[2] for s in r.resource_samples]
        row = [
            cfg.get("label") or "",
            cfg["batch_timeout_s"],
            cfg["max_message_count"],
            cfg["client_mode"],
            cfg["rate_hz"],
            cfg["num_clients"],
            cfg["duration_s"],
            round(r.measured_throughput, 3),
            round(r.latency_ns["p50"] / 1e6, 3),
            round(r.latency_ns["p90"] / 1e6, 3),
            round(r.latency_ns["p99"] / 1e6, 3),
            round(r.latency_ns["min"] / 1e6, 3),
            round(r.latency_ns["max"] / 1e6, 3),
            r.committed_valid,
            r.committed_invalid,
            round(sum(cpu) / len(cpu), 1) if cpu else "",
            round(max(rss) / 1e6, 1) if rss else "",
        ]
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def reference_sweep_configs(wall: bool = False) -> list[BenchConfig]:
    """The eight stress-test rows studied in the scalability table."""
    rows = [
        (5.0, 5), (5.0, 10), (5.0, 20), (5.0, 100), (5.0, 1000),
        (0.1, 100), (0.05, 100), (0.025, 100),
    ]
    return [
        BenchConfig(
            batch_timeout_s=bt,
            max_message_count=m,
            client_mode=SYNCHRONOUS,
            num_clients=4,
            duration_s=12.0 if bt >= 1 else 6.0,
            warmup_s=1.0,
            wall=wall,
            label=f"BT{bt}_M{m}",
        )
        for bt, m in rows
    ]
