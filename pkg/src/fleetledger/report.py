"""Presentation layer over bench results: plots, summary, trend checks.

Plots are illustrations only; every number lives in the CSV/JSON outputs.
The trend checker encodes the two directional claims the stress study
rests on and exits nonzero (via the CLI) when a sweep violates them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .bench import BenchResult


def _label(result: BenchResult) -> str:
    cfg = result.config
    return cfg.get("label") or f"BT{cfg['batch_timeout_s']}_M{cfg['max_message_count']}"


def make_plots(results: list[BenchResult], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(7, 3.2))
    labels = [_label(r) for r in results]
    ax.bar(labels, [r.measured_throughput for r in results], color="#348abd")
    ax.set_ylabel("throughput (tx/s)")
    ax.set_title("Measured transaction throughput")
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    path = out / "throughput.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 3.2))
    series = [
        [s / 1e6 for s in r.latency_ns["samples"]] or [0.0] for r in results
    ]
    ax.boxplot(series, tick_labels=labels, showfliers=False)
    ax.set_ylabel("commit latency (ms)")
    ax.set_title("Distribution of commit latency")
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    path = out / "latency.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, (ax_cpu, ax_mem) = plt.subplots(2, 1, figsize=(7, 4.6), sharex=True)
    for r in results:
        if not r.resource_samples:
            continue
        t = [s[0] for s in r.resource_samples]
        ax_cpu.plot(t, [s[1] for s in r.resource_samples], label=_label(r))
        ax_mem.plot(t, [s[2] / 1e6 for s in r.resource_samples])
    ax_cpu.set_ylabel("CPU (%)")
    ax_mem.set_ylabel("RSS (MB)")
    ax_mem.set_xlabel("time (s)")
    if results and any(r.resource_samples for r in results):
        ax_cpu.legend(fontsize=7)
    fig.tight_layout()
    path = out / "resources.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    return written


def summarize(results: list[BenchResult]) -> str:
    lines = ["label        thr(tx/s)   p50(ms)   p90(ms)   valid  invalid"]
    for r in results:
        lines.append(
            f"{_label(r):<12} {r.measured_throughput:>9.2f} "
            f"{r.latency_ns['p50'] / 1e6:>9.2f} {r.latency_ns['p90'] / 1e6:>9.2f} "
            f"{r.committed_valid:>6} {r.committed_invalid:>8}"
        )
    return "\n".join(lines) + "\n"


def check_trends(results: list[BenchResult]) -> list[str]:
    """Directional checks over a sweep; returns human-readable violations.

    1. With synchronous clients and the message cap fixed, throughput must
       strictly fall as the batch timeout grows.
    2. Under a fixed open-loop load with the timeout fixed, p50 latency
       must grow with the message cap (strictly between min and max).
    """
    violations: list[str] = []

    sync = [r for r in results if r.config["client_mode"] == "synchronous"]
    by_cap: dict[int, list[BenchResult]] = {}
    for r in sync:
        by_cap.setdefault(r.config["max_message_count"], []).append(r)
    for cap, rows in by_cap.items():
        rows = sorted(rows, key=lambda r: r.config["batch_timeout_s"])
        for a, b in zip(rows, rows[1:]):
            if not a.measured_throughput > b.measured_throughput:
                violations.append(
                    f"throughput(BT={a.config['batch_timeout_s']}) = "
                    f"{a.measured_throughput:.2f} not greater than "
                    f"throughput(BT={b.config['batch_timeout_s']}) = "
                    f"{b.measured_throughput:.2f} at M={cap}"
                )

    open_loop = [r for r in results if r.config["client_mode"] == "open_loop"]
    by_timeout: dict[float, list[BenchResult]] = {}
    for r in open_loop:
        by_timeout.setdefault(r.config["batch_timeout_s"], []).append(r)
    for bt, rows in by_timeout.items():
        rows = sorted(rows, key=lambda r: r.config["max_message_count"])
        if len(rows) >= 2 and not (
            rows[-1].latency_ns["p50"] > rows[0].latency_ns["p50"]
        ):
            violations.append(
                f"p50(M={rows[-1].config['max_message_count']}) not greater "
                f"than p50(M={rows[0].config['max_message_count']}) at BT={bt}"
            )
    return violations
