import json

import pytest

from fleetledger.bench import (
    BenchConfig,
    BenchResult,
    OPEN_LOOP,
    SYNCHRONOUS,
    load_results,
    load_sweep,
    percentiles,
    run_bench,
    sweep,
    sweep_csv,
)
from fleetledger.clock import NS_PER_S, s_to_ns
from fleetledger.report import check_trends, make_plots, summarize

from oracles import expected_cuts


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(batch_timeout_s=1.0, max_message_count=10, duration_s=1.0, warmup_s=2.0)
    with pytest.raises(ValueError):
        BenchConfig(batch_timeout_s=1.0, max_message_count=10, client_mode="warp")
    with pytest.raises(ValueError):
        BenchConfig(batch_timeout_s=1.0, max_message_count=10, client_mode=OPEN_LOOP)


def test_synchronous_latency_is_exactly_the_batch_timeout():
    # single sync client, M large: every tx waits out the timeout, exactly
    result = run_bench(
        BenchConfig(
            batch_timeout_s=0.25, max_message_count=100,
            client_mode=SYNCHRONOUS, num_clients=1,
            duration_s=4.0, warmup_s=0.5,
        )
    )
    samples = result.latency_ns["samples"]
    assert samples and set(samples) == {s_to_ns(0.25)}
    assert result.latency_ns["p50"] == s_to_ns(0.25)


def test_conservation_and_window_counting():
    result = run_bench(
        BenchConfig(
            batch_timeout_s=5.0, max_message_count=100,
            client_mode=SYNCHRONOUS, num_clients=3,
            duration_s=7.0, warmup_s=1.0,
        )
    )
    assert result.submitted == result.total_committed + result.in_flight
    # one cut at t=5 inside the window: 3 valid commits
    assert result.committed_valid == 3
    assert len(result.latency_ns["samples"]) == result.committed_valid


def test_open_loop_latencies_match_des_oracle_exactly():
    rate, bt, m, duration = 40.0, 5.0, 25, 6.0
    result = run_bench(
        BenchConfig(
            batch_timeout_s=bt, max_message_count=m,
            client_mode=OPEN_LOOP, rate_hz=rate, num_clients=2,
            duration_s=duration, warmup_s=0.0,
        )
    )
    period = round(NS_PER_S / rate)
    arrivals = [k * period for k in range(int(s_to_ns(duration) // period))]
    expected = []
    i = 0
    for cut_time, count, _ in expected_cuts(arrivals, s_to_ns(bt), m):
        for _ in range(count):
            if cut_time <= s_to_ns(duration):
                expected.append(cut_time - arrivals[i])
            i += 1
    assert sorted(result.latency_ns["samples"]) == sorted(expected)


def test_open_loop_latency_grows_with_block_size():
    results = []
    for m in (10, 100):
        results.append(
            run_bench(
                BenchConfig(
                    batch_timeout_s=5.0, max_message_count=m,
                    client_mode=OPEN_LOOP, rate_hz=200.0, num_clients=2,
                    duration_s=4.0, warmup_s=0.5, label=f"M{m}",
                )
            )
        )
    assert results[1].latency_ns["p50"] > results[0].latency_ns["p50"]


def test_rerun_same_config_identical_latency_columns():
    config = BenchConfig(
        batch_timeout_s=0.1, max_message_count=7,
        client_mode=OPEN_LOOP, rate_hz=90.0, num_clients=3,
        duration_s=3.0, warmup_s=0.5, seed=5,
    )
    a, b = run_bench(config), run_bench(config)
    assert a.latency_ns["samples"] == b.latency_ns["samples"]
    assert a.measured_throughput == b.measured_throughput


def test_sweep_files_and_csv(tmp_path):
    sweep_file = tmp_path / "sweep.yaml"
    sweep_file.write_text(
        """
defaults:
  client_mode: synchronous
  num_clients: 2
  duration_s: 2.0
  warmup_s: 0.5
runs:
  - {batch_timeout_s: 0.05, max_message_count: 100, label: fast}
  - {batch_timeout_s: 0.4, max_message_count: 100, label: slow}
"""
    )
    configs = load_sweep(sweep_file)
    assert len(configs) == 2 and configs[0].num_clients == 2
    results = sweep(configs, out_csv=tmp_path / "sweep.csv", out_json=tmp_path / "sweep.json")
    csv_lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(csv_lines) == 3 and csv_lines[0].startswith("label,batch_timeout_s")
    assert csv_lines[1].startswith("fast,")
    # throughput falls when the timeout grows
    assert results[0].measured_throughput > results[1].measured_throughput
    loaded = load_results(tmp_path / "sweep.json")
    assert [r.measured_throughput for r in loaded] == [
        r.measured_throughput for r in results
    ]


def test_sweep_csv_empty():
    assert sweep_csv([]).count("\n") == 1  # header only


def test_check_trends_flags_violations():
    def fake(bt, m, mode, thr, p50):
        return BenchResult(
            config={
                "batch_timeout_s": bt, "max_message_count": m,
                "client_mode": mode, "rate_hz": 0.0, "num_clients": 1,
                "duration_s": 1.0, "label": "",
            },
            measured_throughput=thr,
            latency_ns={"p50": p50, "p90": p50, "p99": p50, "min": 0, "max": p50, "samples": []},
            submitted=0, committed_valid=0, committed_invalid=0,
            total_committed=0, in_flight=0, invalid_codes={},
            resource_samples=[], wall_seconds=0.0,
        )

    good = [
        fake(0.025, 100, "synchronous", 100.0, 1),
        fake(5.0, 100, "synchronous", 2.0, 1),
        fake(5.0, 10, "open_loop", 0, 10),
        fake(5.0, 1000, "open_loop", 0, 500),
    ]
    assert check_trends(good) == []
    bad = [
        fake(0.025, 100, "synchronous", 2.0, 1),
        fake(5.0, 100, "synchronous", 100.0, 1),
    ]
    assert any("throughput" in v for v in check_trends(bad))


def test_report_outputs(tmp_path):
    result = run_bench(
        BenchConfig(
            batch_timeout_s=0.1, max_message_count=10,
            client_mode=SYNCHRONOUS, num_clients=1,
            duration_s=1.5, warmup_s=0.2,
        )
    )
    written = make_plots([result], tmp_path)
    assert len(written) == 3 and all(p.exists() and p.stat().st_size > 0 for p in written)
    text = summarize([result])
    assert "thr(tx/s)" in text
    # summary median matches the histogram p50
    assert f"{result.latency_ns['p50'] / 1e6:.2f}" in text


def test_percentiles_of_empty():
    assert percentiles([])["p50"] == 0


def test_degenerate_batching_single_message_blocks():
    # M=1: every tx is its own block; in logical mode with zero processing
    # cost the commit happens at the submit instant
    result = run_bench(
        BenchConfig(
            batch_timeout_s=5.0, max_message_count=1,
            client_mode=SYNCHRONOUS, num_clients=1,
            duration_s=2.0, warmup_s=0.5,
        )
    )
    assert result.latency_ns["max"] == 0
    assert result.committed_valid > 0


def test_reference_sweep_has_eight_rows(tmp_path):
    from fleetledger.bench import reference_sweep_configs

    configs = reference_sweep_configs(wall=False)
    assert len(configs) == 8
    results = sweep(configs, out_csv=tmp_path / "table.csv")
    lines = (tmp_path / "table.csv").read_text().splitlines()
    assert len(lines) == 9  # header + one row per configuration
    assert lines[1].startswith("BT5.0_M5,")
